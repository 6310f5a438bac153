//! Uniform periodic grids on `I = [-T, T]`, nodal vector-valued functions,
//! the forward-difference derivative, rectangle quadrature, the functional
//! `Phi(u) = R_G(u') + R_G(u)` and ray projection onto its level set.
//!
//! The forward difference and the rectangle rule are adjoint to each other on
//! a periodic grid: `sum_i h * <D u_i, w_i> = -sum_i h * <u_i, D* w_i>` holds
//! exactly, which is what makes the discrete action gradient exact.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gfunction::GFunction;
use crate::orlicz::modular;

/// Uniform periodic grid with `n` nodes `t_i = -T + i h`, `h = 2T / n`.
/// Node `n` is identified with node `0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    half_length: f64,
    n: usize,
}

impl Grid {
    /// Requires `|I| = 2T >= 1`, `n >= 4` and `n` even.
    pub fn new(half_length: f64, n: usize) -> Result<Self> {
        if !half_length.is_finite() || 2.0 * half_length < 1.0 {
            return Err(Error::Domain(format!(
                "interval length 2T = {} must be at least 1",
                2.0 * half_length
            )));
        }
        if n < 4 || n % 2 != 0 {
            return Err(Error::Input(format!("grid size n = {n} must be even and >= 4")));
        }
        Ok(Grid { half_length, n })
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    /// `|I| = 2T`.
    pub fn length(&self) -> f64 {
        2.0 * self.half_length
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.length() / self.n as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        -self.half_length + i as f64 * self.h()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.node(i))
    }

    /// Same interval, twice the nodes.
    pub fn refined(&self) -> Grid {
        Grid {
            half_length: self.half_length,
            n: 2 * self.n,
        }
    }
}

pub fn make_grid(half_length: f64, n: usize) -> Result<Grid> {
    Grid::new(half_length, n)
}

/// Rectangle rule `h * sum_i values[i]`; on a periodic grid this is the
/// trapezoid rule with the seam identified.
pub fn integrate(grid: &Grid, values: &[f64]) -> Result<f64> {
    if values.len() != grid.n() {
        return Err(Error::DimensionMismatch {
            expected: grid.n(),
            found: values.len(),
        });
    }
    Ok(grid.h() * values.iter().sum::<f64>())
}

/// Nodal values of a periodic `R^dim`-valued function, stored node-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteFunction {
    grid: Grid,
    dim: usize,
    values: Vec<f64>,
}

impl DiscreteFunction {
    pub fn zeros(grid: Grid, dim: usize) -> Self {
        DiscreteFunction {
            grid,
            dim,
            values: vec![0.0; grid.n() * dim],
        }
    }

    pub fn constant(grid: Grid, c: &[f64]) -> Self {
        let mut values = Vec::with_capacity(grid.n() * c.len());
        for _ in 0..grid.n() {
            values.extend_from_slice(c);
        }
        DiscreteFunction {
            grid,
            dim: c.len(),
            values,
        }
    }

    /// Samples `f` at every node; `f` writes the value at `t` into its slice.
    pub fn from_fn(grid: Grid, dim: usize, mut f: impl FnMut(f64, &mut [f64])) -> Self {
        let mut u = DiscreteFunction::zeros(grid, dim);
        for i in 0..grid.n() {
            let t = grid.node(i);
            f(t, u.node_mut(i));
        }
        u
    }

    pub fn from_values(grid: Grid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Input("dimension must be positive".into()));
        }
        if values.len() != grid.n() * dim {
            return Err(Error::DimensionMismatch {
                expected: grid.n() * dim,
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                node: i / dim,
                t: grid.node(i / dim),
            });
        }
        Ok(DiscreteFunction { grid, dim, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn node_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn nodes(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.dim)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        DiscreteFunction {
            grid: self.grid,
            dim: self.dim,
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &DiscreteFunction, s: f64) -> Self {
        debug_assert!(self.compatible(other));
        DiscreteFunction {
            grid: self.grid,
            dim: self.dim,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + s * b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &DiscreteFunction) -> Self {
        self.add_scaled(other, -1.0)
    }

    /// `(1 - s) * self + s * other`.
    pub fn lerp(&self, other: &DiscreteFunction, s: f64) -> Self {
        DiscreteFunction {
            grid: self.grid,
            dim: self.dim,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + s * (b - a))
                .collect(),
        }
    }

    /// Flat Euclidean inner product of nodal values (no `h` weight).
    pub fn dot(&self, other: &DiscreteFunction) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    /// `sqrt(h * sum |u_i|^2)`, the discrete L2 norm.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.h() * self.dot(self)).sqrt()
    }

    /// `max_i |u_i|` with the Euclidean norm on `R^dim`.
    pub fn max_abs(&self) -> f64 {
        self.nodes()
            .map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn compatible(&self, other: &DiscreteFunction) -> bool {
        self.grid == other.grid && self.dim == other.dim
    }

    pub(crate) fn check_compatible(&self, other: &DiscreteFunction) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        if self.grid != other.grid {
            return Err(Error::Input("functions live on different grids".into()));
        }
        Ok(())
    }

    /// Writes CSV with header `t,u_1,..,u_N`, one row per node.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim).map(|k| format!("u_{k}")));
        w.write_record(&header)?;
        for (i, x) in self.nodes().enumerate() {
            let mut row = vec![self.grid.node(i).to_string()];
            row.extend(x.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV written by [`DiscreteFunction::write_csv`]. The grid is
    /// recovered from the `t` column, which must be uniform and start at `-T`.
    /// Lines starting with `#` are ignored.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let dim = r.headers()?.len().checked_sub(1).unwrap_or(0);
        if dim == 0 {
            return Err(Error::Input("csv needs columns t,u_1,..".into()));
        }
        let mut ts = Vec::new();
        let mut values = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Input(format!("bad number {s:?}: {e}")))
            };
            ts.push(parse(&rec[0])?);
            for k in 1..=dim {
                values.push(parse(&rec[k])?);
            }
        }
        let n = ts.len();
        let half_length = -ts.first().copied().unwrap_or(0.0);
        let grid = Grid::new(half_length, n)?;
        for (i, t) in ts.iter().enumerate() {
            if (t - grid.node(i)).abs() > 1e-9 * (1.0 + half_length) {
                return Err(Error::Input(format!("row {i}: t = {t} is not on a uniform periodic grid")));
            }
        }
        DiscreteFunction::from_values(grid, dim, values)
    }
}

/// Forward difference with periodic wrap, `(u_{i+1} - u_i) / h`.
pub fn derivative(u: &DiscreteFunction) -> DiscreteFunction {
    let n = u.grid.n();
    let d = u.dim;
    let inv_h = 1.0 / u.grid.h();
    let mut out = DiscreteFunction::zeros(u.grid, d);
    for i in 0..n {
        let j = (i + 1) % n;
        for k in 0..d {
            out.values[i * d + k] = (u.values[j * d + k] - u.values[i * d + k]) * inv_h;
        }
    }
    out
}

/// `Phi(u) = R_G(u') + R_G(u)`.
pub fn phi(g: &GFunction, u: &DiscreteFunction) -> Result<f64> {
    Ok(modular(g, &derivative(u))? + modular(g, u)?)
}

/// Tolerance on `|Phi(s u) - rho|` for [`project_to_boundary`].
pub const BOUNDARY_TOL: f64 = 1e-10;

/// Scale factor `s > 0` with `Phi(s u) = rho`.
///
/// `s -> Phi(s u)` is convex, vanishes at 0 and is strictly increasing, so the
/// crossing is unique and bisection finds it.
pub fn boundary_scale(g: &GFunction, u: &DiscreteFunction, rho: f64) -> Result<f64> {
    if u.is_zero() {
        return Err(Error::Input("cannot project the zero function onto the boundary".into()));
    }
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::Input(format!("rho = {rho} must be positive")));
    }
    let du = derivative(u);
    let phi_at = |s: f64| -> Result<f64> { Ok(modular(g, &du.scaled(s))? + modular(g, &u.scaled(s))?) };

    let mut hi = 1.0;
    let mut f_hi = phi_at(hi)?;
    let mut lo = 0.0;
    let mut expansions = 0;
    while f_hi < rho {
        lo = hi;
        hi *= 2.0;
        f_hi = phi_at(hi)?;
        expansions += 1;
        if expansions > 2000 || !f_hi.is_finite() {
            return Err(Error::Bracketing(format!("Phi(s u) never reached rho = {rho}")));
        }
    }
    if (f_hi - rho).abs() <= BOUNDARY_TOL {
        return Ok(hi);
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        let f_mid = phi_at(mid)?;
        if (f_mid - rho).abs() <= BOUNDARY_TOL {
            return Ok(mid);
        }
        if f_mid < rho {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            return Ok(0.5 * (lo + hi));
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Ray projection onto `Phi^{-1}({rho})`: returns `s u` with `Phi(s u) = rho`.
pub fn project_to_boundary(g: &GFunction, u: &DiscreteFunction, rho: f64) -> Result<DiscreteFunction> {
    let s = boundary_scale(g, u, rho)?;
    Ok(u.scaled(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sine(grid: Grid) -> DiscreteFunction {
        DiscreteFunction::from_fn(grid, 2, |t, x| {
            x[0] = (std::f64::consts::PI * t).sin();
            x[1] = 0.0;
        })
    }

    #[test]
    fn grid_nodes() {
        let g = make_grid(1.0, 4).unwrap();
        let nodes: Vec<f64> = g.nodes().collect();
        assert_eq!(nodes, vec![-1.0, -0.5, 0.0, 0.5]);
        assert_eq!(make_grid(1.0, 64).unwrap().h(), 0.03125);
    }

    #[test]
    fn grid_rejects_short_interval_and_odd_n() {
        assert!(matches!(make_grid(0.4, 8), Err(Error::Domain(_))));
        assert!(matches!(make_grid(1.0, 5), Err(Error::Input(_))));
        assert!(matches!(make_grid(1.0, 2), Err(Error::Input(_))));
        assert!(make_grid(0.5, 4).is_ok());
    }

    #[test]
    fn derivative_of_constant_is_exactly_zero() {
        let grid = make_grid(1.0, 16).unwrap();
        let u = DiscreteFunction::constant(grid, &[0.3, -7.25]);
        assert!(derivative(&u).is_zero());
    }

    #[test]
    fn derivative_of_linear_away_from_seam() {
        let grid = make_grid(1.0, 32).unwrap();
        let u = DiscreteFunction::from_fn(grid, 2, |t, x| {
            x[0] = t;
            x[1] = 0.0;
        });
        let du = derivative(&u);
        for i in 0..grid.n() - 1 {
            assert_abs_diff_eq!(du.node(i)[0], 1.0, epsilon = 1e-12);
            assert_eq!(du.node(i)[1], 0.0);
        }
        // the seam jumps from T - h back to -T
        assert_abs_diff_eq!(du.node(grid.n() - 1)[0], (-1.0 - (1.0 - grid.h())) / grid.h(), epsilon = 1e-12);
    }

    #[test]
    fn derivative_converges_first_order() {
        let err = |n: usize| {
            let grid = make_grid(1.0, n).unwrap();
            let du = derivative(&sine(grid));
            (0..n)
                .map(|i| (du.node(i)[0] - std::f64::consts::PI * (std::f64::consts::PI * grid.node(i)).cos()).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(256), err(512));
        let h = 2.0 / 256.0;
        assert!(e1 <= 10.0 * h, "error {e1} not O(h)");
        let order = (e1 / e2).log2();
        assert!((order - 1.0).abs() < 0.05, "observed order {order}");
    }

    #[test]
    fn integrate_examples() {
        let grid = make_grid(1.0, 4096).unwrap();
        assert_abs_diff_eq!(integrate(&grid, &vec![1.0; 4096]).unwrap(), 2.0, epsilon = 1e-12);
        assert_eq!(integrate(&grid, &vec![0.0; 4096]).unwrap(), 0.0);
        let sq: Vec<f64> = grid.nodes().map(|t| t * t).collect();
        assert_abs_diff_eq!(integrate(&grid, &sq).unwrap(), 2.0 / 3.0, epsilon = 1e-5);
        assert!(matches!(integrate(&grid, &[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn integral_of_derivative_telescopes() {
        let grid = make_grid(1.0, 64).unwrap();
        let u = DiscreteFunction::from_fn(grid, 2, |t, x| {
            x[0] = (3.0 * t).exp().sin() + t * t;
            x[1] = (5.0 * t).cos();
        });
        let du = derivative(&u);
        for k in 0..2 {
            let comp: Vec<f64> = du.nodes().map(|x| x[k]).collect();
            assert_abs_diff_eq!(integrate(&grid, &comp).unwrap(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn phi_examples() {
        let g = GFunction::example5();
        let grid = make_grid(1.0, 64).unwrap();
        let u = DiscreteFunction::constant(grid, &[1.0, 1.0]);
        assert_abs_diff_eq!(phi(&g, &u).unwrap(), 2.0, epsilon = 1e-12);
        assert_eq!(phi(&g, &DiscreteFunction::zeros(grid, 2)).unwrap(), 0.0);
    }

    #[test]
    fn phi_stable_under_refinement() {
        let g = GFunction::example5();
        let grid = make_grid(1.0, 256).unwrap();
        let a = phi(&g, &sine(grid)).unwrap();
        let b = phi(&g, &sine(grid.refined())).unwrap();
        assert!((a - b).abs() <= 1e-3, "{a} vs {b}");
    }

    #[test]
    fn projection_examples() {
        let g = GFunction::example5();
        let grid = make_grid(1.0, 64).unwrap();
        let u = DiscreteFunction::constant(grid, &[1.0, 1.0]);
        let s = boundary_scale(&g, &u, 0.004).unwrap();
        assert_abs_diff_eq!(s, 0.002f64.sqrt(), epsilon = 1e-9);
        let p = project_to_boundary(&g, &u, 0.004).unwrap();
        assert!((phi(&g, &p).unwrap() - 0.004).abs() <= BOUNDARY_TOL);

        // already on the level set
        let s = boundary_scale(&g, &u, 2.0).unwrap();
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-10);

        assert!(matches!(
            project_to_boundary(&g, &DiscreteFunction::zeros(grid, 2), 0.004),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let grid = make_grid(1.5, 8).unwrap();
        let u = sine(grid);
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,u_1,u_2\n"));
        let back = DiscreteFunction::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, u);
    }

    #[test]
    fn csv_rejects_non_uniform_t() {
        let text = "t,u_1\n-1,0\n-0.5,0\n0.1,0\n0.5,0\n";
        assert!(DiscreteFunction::read_csv(text.as_bytes()).is_err());
    }
}
