//! Anisotropic G-functions: convex, even, superlinear `G: R^N -> [0, inf)`
//! with `G(0) = 0`.
//!
//! Two families are built in: positive definite quadratic forms
//! `G(x) = x^T A x` (the `example5` form is `v1^2 + (v1 - v2)^2`) and
//! power norms `G(x) = |x|^p`, `p > 1`. The quadratic family carries its
//! closed-form Fenchel conjugate `G*(y) = y^T A^{-1} y / 4`; every family can
//! also be conjugated numerically by damped Newton on `grad G(x) = y`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::report::{relative_margin, CheckReport, Witness};

/// Default radius grid size for [`convex_minorant`].
pub const DEFAULT_MINORANT_RADII: usize = 256;
/// Default number of sphere directions for [`convex_minorant`].
pub const DEFAULT_MINORANT_DIRECTIONS: usize = 720;
/// Default "at infinity" radius for the doubling checks.
pub const DEFAULT_GROWTH_THRESHOLD: f64 = 1.0;
/// Doubling ratios above this are treated as unbounded.
pub const DOUBLING_CAP: f64 = 1e6;

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 100;
/// Residual above which an exhausted Newton run counts as a failure.
const ACCEPT_TOL: f64 = 1e-6;
const SEED_GRID_PER_AXIS: usize = 41;
const SEED_GRID_MAX_POINTS: usize = 200_000;
const SPHERE_SEED: u64 = 0x6f72_6c69_637a;

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    /// `x^T A x` with `A` symmetric positive definite.
    Quadratic { form: DMatrix<f64>, inverse: DMatrix<f64> },
    /// `|x|^p`.
    Power { exponent: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GFunction {
    dim: usize,
    name: String,
    shape: Shape,
}

impl GFunction {
    /// The quadratic form `v1^2 + (v1 - v2)^2` on `R^2`.
    pub fn example5() -> Self {
        let mut g = GFunction::quadratic(vec![vec![2.0, -1.0], vec![-1.0, 1.0]]).expect("positive definite");
        g.name = "example5".into();
        g
    }

    /// `x^T A x` for a symmetric positive definite `A` given by rows.
    pub fn quadratic(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Input("quadratic form must be a non-empty square matrix".into()));
        }
        let form = DMatrix::from_fn(dim, dim, |i, j| rows[i][j]);
        if (&form - form.transpose()).amax() > 1e-12 * (1.0 + form.amax()) {
            return Err(Error::Input("quadratic form must be symmetric".into()));
        }
        let chol = form
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Input("quadratic form must be positive definite".into()))?;
        let inverse = chol.inverse();
        Ok(GFunction {
            dim,
            name: "quadratic".into(),
            shape: Shape::Quadratic { form, inverse },
        })
    }

    /// `|x|^p` on `R^dim`, `p > 1`.
    pub fn pnorm(dim: usize, exponent: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Input("dimension must be positive".into()));
        }
        if !(exponent > 1.0) || !exponent.is_finite() {
            return Err(Error::Input(format!("pnorm exponent {exponent} must be > 1")));
        }
        Ok(GFunction {
            dim,
            name: "pnorm".into(),
            shape: Shape::Power { exponent },
        })
    }

    /// Built-in lookup by name: `"example5"` or `"pnorm"` (needs `exponent`).
    pub fn by_name(name: &str, dim: usize, exponent: Option<f64>) -> Result<Self> {
        match name {
            "example5" => {
                if dim != 2 {
                    return Err(Error::DimensionMismatch { expected: 2, found: dim });
                }
                Ok(GFunction::example5())
            }
            "pnorm" => {
                let p = exponent.ok_or_else(|| Error::Input("pnorm needs an exponent".into()))?;
                GFunction::pnorm(dim, p)
            }
            other => Err(Error::Input(format!("unknown G-function {other:?}"))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x)?;
        Ok(self.value(x))
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x)?;
        let mut out = vec![0.0; self.dim];
        self.grad_into(x, &mut out);
        Ok(out)
    }

    /// `G(x)` without the length check.
    pub fn value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        match &self.shape {
            Shape::Quadratic { form, .. } => quad(form, x),
            Shape::Power { exponent } => norm(x).powf(*exponent),
        }
    }

    /// `grad G(x)` written into `out`.
    pub fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.shape {
            Shape::Quadratic { form, .. } => {
                for i in 0..self.dim {
                    out[i] = 2.0 * (0..self.dim).map(|j| form[(i, j)] * x[j]).sum::<f64>();
                }
            }
            Shape::Power { exponent } => {
                let r = norm(x);
                let c = if r == 0.0 { 0.0 } else { exponent * r.powf(exponent - 2.0) };
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = c * xi;
                }
            }
        }
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        match &self.shape {
            Shape::Quadratic { form, .. } => form * 2.0,
            Shape::Power { exponent: p } => {
                let r = norm(x);
                if r == 0.0 {
                    let d = if *p == 2.0 { 2.0 } else if *p > 2.0 { 0.0 } else { f64::INFINITY };
                    return DMatrix::from_diagonal_element(self.dim, self.dim, d);
                }
                let c = p * r.powf(p - 2.0);
                DMatrix::from_fn(self.dim, self.dim, |i, j| {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    c * (delta + (p - 2.0) * x[i] * x[j] / (r * r))
                })
            }
        }
    }

    pub fn has_analytic_conjugate(&self) -> bool {
        matches!(self.shape, Shape::Quadratic { .. })
    }

    /// Closed-form `G*(y)` where available.
    pub fn analytic_conjugate(&self, y: &[f64]) -> Option<f64> {
        match &self.shape {
            Shape::Quadratic { inverse, .. } => Some(0.25 * quad(inverse, y)),
            Shape::Power { .. } => None,
        }
    }

    /// Fenchel conjugate `G*(y) = sup_x <x, y> - G(x)`.
    pub fn conjugate(&self, y: &[f64]) -> Result<f64> {
        self.check_len(y)?;
        match self.analytic_conjugate(y) {
            Some(v) => Ok(v),
            None => self.conjugate_numeric(y),
        }
    }

    /// Numerical conjugate, ignoring any closed form.
    pub fn conjugate_numeric(&self, y: &[f64]) -> Result<f64> {
        self.check_len(y)?;
        Ok(self.conjugate_maximizer(y)?.1)
    }

    /// Maximizer `x*` of `<x, y> - G(x)` and the maximum `G*(y)`.
    ///
    /// Damped Newton on `grad G(x) = y` seeded from the best point of a
    /// 41-per-axis grid over `[-s, s]^N`, `s = 2 (1 + |y|)`. If Newton stalls
    /// the seed is refined by shrinking-box grid search and Newton restarts.
    pub fn conjugate_maximizer(&self, y: &[f64]) -> Result<(Vec<f64>, f64)> {
        self.check_len(y)?;
        let ny = norm(y);
        if ny == 0.0 {
            return Ok((vec![0.0; self.dim], 0.0));
        }
        let objective = |x: &[f64]| dot(x, y) - self.value(x);
        let half_width = 2.0 * (1.0 + ny);
        let mut best = self.grid_seed(y, &vec![0.0; self.dim], half_width);

        match self.newton_ascent(y, &best) {
            Ok(found) => return Ok(found),
            Err((x, _)) => {
                if objective(&x) > objective(&best) {
                    best = x;
                }
            }
        }
        let mut width = half_width;
        for _ in 0..60 {
            width *= 0.5;
            best = self.grid_seed(y, &best, width);
        }
        match self.newton_ascent(y, &best) {
            Ok(found) => Ok(found),
            Err((x, residual)) => {
                let lower_bound = objective(&x).max(objective(&best));
                Err(Error::ConjugateFailure { lower_bound, residual })
            }
        }
    }

    /// Best point of `<x, y> - G(x)` over a grid centred at `center`.
    fn grid_seed(&self, y: &[f64], center: &[f64], half_width: f64) -> Vec<f64> {
        let objective = |x: &[f64]| dot(x, y) - self.value(x);
        let mut best = center.to_vec();
        let mut best_val = objective(&best);
        let mut x = vec![0.0; self.dim];
        let per_axis = SEED_GRID_PER_AXIS;
        let total = per_axis.checked_pow(self.dim as u32).filter(|&t| t <= SEED_GRID_MAX_POINTS);
        match total {
            Some(total) => {
                for idx in 0..total {
                    let mut rest = idx;
                    for k in 0..self.dim {
                        let a = rest % per_axis;
                        rest /= per_axis;
                        x[k] = center[k] + half_width * (2.0 * a as f64 / (per_axis - 1) as f64 - 1.0);
                    }
                    let v = objective(&x);
                    if v > best_val {
                        best_val = v;
                        best.copy_from_slice(&x);
                    }
                }
            }
            None => {
                // too many axes for a full grid: scan the coordinate axes and the y ray
                let ny = norm(y);
                for a in 0..per_axis {
                    let s = half_width * (2.0 * a as f64 / (per_axis - 1) as f64 - 1.0);
                    for k in 0..=self.dim {
                        x.copy_from_slice(center);
                        if k < self.dim {
                            x[k] += s;
                        } else {
                            for (xi, yi) in x.iter_mut().zip(y) {
                                *xi += s * yi / ny;
                            }
                        }
                        let v = objective(&x);
                        if v > best_val {
                            best_val = v;
                            best.copy_from_slice(&x);
                        }
                    }
                }
            }
        }
        best
    }

    /// Damped Newton ascent on the concave `<x, y> - G(x)`.
    /// `Err` carries the last iterate and its residual.
    fn newton_ascent(&self, y: &[f64], seed: &[f64]) -> std::result::Result<(Vec<f64>, f64), (Vec<f64>, f64)> {
        let objective = |x: &[f64]| dot(x, y) - self.value(x);
        let tol = NEWTON_TOL * norm(y).max(1.0);
        let mut x = seed.to_vec();
        let mut g = vec![0.0; self.dim];
        let mut residual = f64::INFINITY;
        for _ in 0..NEWTON_MAX_ITER {
            self.grad_into(&x, &mut g);
            let r: Vec<f64> = y.iter().zip(&g).map(|(a, b)| a - b).collect();
            residual = norm(&r);
            if residual <= tol {
                return Ok((x.clone(), objective(&x)));
            }
            let h = self.hessian(&x);
            let rhs = DVector::from_column_slice(&r);
            let mut d: Vec<f64> = match h.lu().solve(&rhs) {
                Some(d) if d.iter().all(|v| v.is_finite()) => d.iter().copied().collect(),
                _ => r.clone(),
            };
            if dot(&d, &r) <= 0.0 {
                d = r.clone();
            }
            let f0 = objective(&x);
            let slope = dot(&d, &r);
            let mut t = 1.0;
            let mut trial = vec![0.0; self.dim];
            loop {
                for k in 0..self.dim {
                    trial[k] = x[k] + t * d[k];
                }
                if objective(&trial) >= f0 + 1e-4 * t * slope || t < 1e-16 {
                    break;
                }
                t *= 0.5;
            }
            if t < 1e-16 {
                // no ascent possible at working precision
                self.grad_into(&x, &mut g);
                let r = norm(&y.iter().zip(&g).map(|(a, b)| a - b).collect::<Vec<_>>());
                return if r <= ACCEPT_TOL * norm(y).max(1.0) { Ok((x.clone(), objective(&x))) } else { Err((x, r)) };
            }
            x.copy_from_slice(&trial);
        }
        // iteration budget spent: keep the iterate unless it is far from stationary
        self.grad_into(&x, &mut g);
        let r = norm(&y.iter().zip(&g).map(|(a, b)| a - b).collect::<Vec<_>>());
        if r <= ACCEPT_TOL * norm(y).max(1.0) {
            Ok((x.clone(), objective(&x)))
        } else {
            Err((x, residual.min(r)))
        }
    }
}

fn quad(m: &DMatrix<f64>, x: &[f64]) -> f64 {
    let n = x.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += x[i] * m[(i, j)] * x[j];
        }
    }
    s
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Points `r * d` for every radius and `n_dirs` directions (uniform angles in
/// 2-D, seeded random unit vectors otherwise).
pub fn ray_samples(dim: usize, radii: &[f64], n_dirs: usize) -> Vec<Vec<f64>> {
    let dirs = sphere_directions(dim, n_dirs);
    let mut out = Vec::with_capacity(radii.len() * dirs.len());
    for &r in radii {
        for d in &dirs {
            out.push(d.iter().map(|c| r * c).collect());
        }
    }
    out
}

pub(crate) fn sphere_directions(dim: usize, n: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..n)
            .map(|j| {
                let a = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(SPHERE_SEED);
            (0..n)
                .map(|_| loop {
                    let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                    let r = norm(&v);
                    if r > 1e-8 {
                        break v.into_iter().map(|c| c / r).collect();
                    }
                })
                .collect()
        }
    }
}

fn doubling_report(name: &str, threshold: f64, samples: &[Vec<f64>], eval: &dyn Fn(&[f64]) -> Result<f64>) -> Result<CheckReport> {
    let mut report = CheckReport::new(name).with_tolerance(0.0);
    let mut k_hat: f64 = 0.0;
    let mut worst: Option<Vec<f64>> = None;
    let mut used = 0;
    for x in samples {
        if norm(x) < threshold {
            continue;
        }
        let gx = eval(x)?;
        if gx <= 0.0 {
            continue;
        }
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let ratio = eval(&x2)? / gx;
        used += 1;
        if !ratio.is_finite() || ratio > k_hat || worst.is_none() {
            k_hat = if ratio.is_finite() { ratio.max(k_hat) } else { f64::INFINITY };
            worst = Some(x.clone());
        }
    }
    if used == 0 {
        return Ok(report
            .note(format!("no samples with |x| >= {threshold}; vacuous"))
            .metric("threshold", threshold)
            .finish());
    }
    let witness = worst.expect("sampled");
    report.observe(DOUBLING_CAP - k_hat, || Witness::point(&witness));
    report.samples_used = used;
    Ok(report
        .metric("k_hat", k_hat)
        .metric("threshold", threshold)
        .note(format!(
            "empirical certificate on |x| >= {threshold} (threshold is a modelling choice); bounded means k_hat <= {DOUBLING_CAP:e}"
        ))
        .finish())
}

/// Empirical `Delta_2` at infinity: `k_hat = max G(2x) / G(x)` over samples
/// with `|x| >= threshold`. Passes iff `k_hat` is finite and bounded.
pub fn check_delta2(g: &GFunction, samples: &[Vec<f64>], threshold: f64) -> Result<CheckReport> {
    if samples.is_empty() {
        return Err(Error::Input("Delta2 check needs samples".into()));
    }
    doubling_report("Delta2", threshold, samples, &|x| g.eval(x))
}

/// Empirical `nabla_2` at infinity, certified as `Delta_2` of the conjugate.
pub fn check_nabla2(g: &GFunction, samples: &[Vec<f64>], threshold: f64) -> Result<CheckReport> {
    if samples.is_empty() {
        return Err(Error::Input("nabla2 check needs samples".into()));
    }
    doubling_report("nabla2", threshold, samples, &|y| g.conjugate(y))
}

/// Samples the defining properties of a G-function: `G(0) = 0`, evenness,
/// midpoint convexity and growth of `G(s x) / |s x|` along rays.
pub fn check_g_function(g: &GFunction, samples: &[Vec<f64>]) -> Result<CheckReport> {
    if samples.is_empty() {
        return Err(Error::Input("G-function check needs samples".into()));
    }
    let mut report = CheckReport::new("G").with_tolerance(1e-12);
    let zero = vec![0.0; g.dim()];
    report.observe(-g.eval(&zero)?.abs(), || Witness::point(&zero));
    for (i, x) in samples.iter().enumerate() {
        g.check_len(x)?;
        let gx = g.value(x);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let gneg = g.value(&neg);
        report.observe(-(gx - gneg).abs() / (1.0 + gx.abs()), || Witness::point(x));

        let y = &samples[(i + 1) % samples.len()];
        let mid: Vec<f64> = x.iter().zip(y).map(|(a, b)| 0.5 * (a + b)).collect();
        report.observe(relative_margin(g.value(&mid), 0.5 * (gx + g.value(y))), || Witness::point(&mid));

        let r = norm(x);
        if r > 0.0 {
            let mut prev = f64::NEG_INFINITY;
            for s in [1.0, 2.0, 4.0, 8.0, 16.0, 32.0] {
                let scaled: Vec<f64> = x.iter().map(|v| v * s).collect();
                let ratio = g.value(&scaled) / (s * r);
                if prev.is_finite() && s * r >= 1.0 {
                    report.observe(relative_margin(prev, ratio), || Witness::point(&scaled));
                }
                prev = ratio;
            }
        }
    }
    Ok(report.finish())
}

/// Lower convex envelope of the sampled radial minimum `r -> min_{|x|=r} G(x)`,
/// the piecewise-linear table standing for `A_G`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexMinorant {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// The sampled radial minima before taking the envelope.
    pub radial_minima: Vec<f64>,
}

impl ConvexMinorant {
    /// Piecewise-linear evaluation, linear extrapolation past the table.
    pub fn eval(&self, r: f64) -> f64 {
        let n = self.radii.len();
        let r = r.abs();
        let j = match self.radii.binary_search_by(|x| x.total_cmp(&r)) {
            Ok(j) => return self.values[j],
            Err(j) => j.clamp(1, n - 1),
        };
        let (r0, r1) = (self.radii[j - 1], self.radii[j]);
        let (v0, v1) = (self.values[j - 1], self.values[j]);
        v0 + (v1 - v0) * (r - r0) / (r1 - r0)
    }

    pub fn max_value(&self) -> f64 {
        *self.values.last().expect("non-empty table")
    }

    pub fn r_max(&self) -> f64 {
        *self.radii.last().expect("non-empty table")
    }
}

/// Builds the envelope on `n_r` radii in `[0, r_max]` from `n_sphere`
/// directions per radius.
pub fn convex_minorant(g: &GFunction, r_max: f64, n_r: usize, n_sphere: usize) -> Result<ConvexMinorant> {
    if !(r_max > 0.0) || !r_max.is_finite() {
        return Err(Error::Input(format!("r_max = {r_max} must be positive")));
    }
    if n_r < 2 {
        return Err(Error::Input("need at least 2 radii".into()));
    }
    if n_sphere < 4 {
        return Err(Error::Input("need at least 4 sphere directions".into()));
    }
    let dirs = sphere_directions(g.dim(), n_sphere);
    let radii: Vec<f64> = (0..n_r).map(|i| r_max * i as f64 / (n_r - 1) as f64).collect();
    let mut x = vec![0.0; g.dim()];
    let radial_minima: Vec<f64> = radii
        .iter()
        .map(|&r| {
            dirs.iter()
                .map(|d| {
                    for (xi, di) in x.iter_mut().zip(d) {
                        *xi = r * di;
                    }
                    g.value(&x)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let values = lower_envelope(&radii, &radial_minima);
    Ok(ConvexMinorant {
        radii,
        values,
        radial_minima,
    })
}

/// Lower convex hull (monotone chain) of `(xs[i], ys[i])`, `xs` increasing,
/// evaluated back at every `xs[i]`.
pub(crate) fn lower_envelope(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let mut hull: Vec<usize> = Vec::with_capacity(xs.len());
    for i in 0..xs.len() {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (xs[b] - xs[a]) * (ys[i] - ys[a]) - (ys[b] - ys[a]) * (xs[i] - xs[a]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    let mut out = Vec::with_capacity(xs.len());
    let mut seg = 0;
    for (i, &x) in xs.iter().enumerate() {
        while seg + 1 < hull.len() && hull[seg + 1] < i {
            seg += 1;
        }
        if hull.contains(&i) {
            out.push(ys[i]);
            continue;
        }
        let (a, b) = (hull[seg], hull[seg + 1]);
        out.push(ys[a] + (ys[b] - ys[a]) * (x - xs[a]) / (xs[b] - xs[a]));
    }
    out
}

/// `A_G^{-1}(y)` by monotone piecewise-linear inversion of the table.
pub fn minorant_inverse(a: &ConvexMinorant, y: f64) -> Result<f64> {
    let max = a.max_value();
    if !(y >= 0.0) || y > max {
        return Err(Error::Range { value: y, max });
    }
    // first index whose value reaches y
    let j = a.values.partition_point(|&v| v < y);
    if j == 0 {
        return Ok(a.radii[0]);
    }
    let (r0, r1) = (a.radii[j - 1], a.radii[j]);
    let (v0, v1) = (a.values[j - 1], a.values[j]);
    Ok(r0 + (r1 - r0) * (y - v0) / (v1 - v0))
}

/// Uniform random sample in `[-half_width, half_width]^dim`.
pub fn box_samples(dim: usize, count: usize, half_width: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..dim).map(|_| rng.random_range(-half_width..=half_width)).collect())
        .collect()
}
