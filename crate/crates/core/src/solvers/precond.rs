use crate::discretization::{DiscreteFunction, Grid};
use crate::error::{Error, Result};

/// Riesz map of the discrete `H^1` inner product
/// `<u, v> = h sum (Du . Dv + u . v)`, i.e. the cyclic tridiagonal matrix
/// `P = L / h + h I` applied per component (`L` the periodic 1-D Laplacian).
///
/// Solves use the Thomas algorithm with a Sherman-Morrison correction for the
/// two corner entries; everything that does not depend on the right-hand side
/// is factored once.
#[derive(Debug, Clone)]
pub struct Preconditioner {
    grid: Grid,
    off: f64,
    diag: f64,
    cp: Vec<f64>,
    inv_m: Vec<f64>,
    gamma: f64,
    z: Vec<f64>,
    z_denominator: f64,
}

impl Preconditioner {
    pub fn new(grid: Grid) -> Self {
        let n = grid.n();
        let h = grid.h();
        let off = -1.0 / h;
        let diag = 2.0 / h + h;
        let gamma = -diag;
        let mut bb = vec![diag; n];
        bb[0] -= gamma;
        bb[n - 1] -= off * off / gamma;
        let mut cp = vec![0.0; n];
        let mut inv_m = vec![0.0; n];
        inv_m[0] = 1.0 / bb[0];
        cp[0] = off * inv_m[0];
        for i in 1..n {
            let m = bb[i] - off * cp[i - 1];
            inv_m[i] = 1.0 / m;
            cp[i] = off * inv_m[i];
        }
        let mut p = Preconditioner {
            grid,
            off,
            diag,
            cp,
            inv_m,
            gamma,
            z: Vec::new(),
            z_denominator: 1.0,
        };
        let mut u = vec![0.0; n];
        u[0] = gamma;
        u[n - 1] = off;
        p.thomas(&mut u);
        p.z_denominator = 1.0 + u[0] + off * u[n - 1] / gamma;
        p.z = u;
        p
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn thomas(&self, d: &mut [f64]) {
        let n = d.len();
        d[0] *= self.inv_m[0];
        for i in 1..n {
            d[i] = (d[i] - self.off * d[i - 1]) * self.inv_m[i];
        }
        for i in (0..n - 1).rev() {
            d[i] -= self.cp[i] * d[i + 1];
        }
    }

    fn solve_cyclic(&self, d: &mut [f64]) {
        let n = d.len();
        self.thomas(d);
        let fact = (d[0] + self.off * d[n - 1] / self.gamma) / self.z_denominator;
        for (x, z) in d.iter_mut().zip(&self.z) {
            *x -= fact * z;
        }
    }

    /// `P^{-1} r`.
    pub fn apply(&self, r: &DiscreteFunction) -> Result<DiscreteFunction> {
        self.check(r)?;
        let (n, d) = (self.grid.n(), r.dim());
        let mut out = r.clone();
        let mut col = vec![0.0; n];
        for k in 0..d {
            for i in 0..n {
                col[i] = r.values()[i * d + k];
            }
            self.solve_cyclic(&mut col);
            for i in 0..n {
                out.values_mut()[i * d + k] = col[i];
            }
        }
        Ok(out)
    }

    /// `P u`.
    pub fn multiply(&self, u: &DiscreteFunction) -> Result<DiscreteFunction> {
        self.check(u)?;
        let (n, d) = (self.grid.n(), u.dim());
        let v = u.values();
        let mut out = u.clone();
        for i in 0..n {
            let (prev, next) = ((i + n - 1) % n, (i + 1) % n);
            for k in 0..d {
                out.values_mut()[i * d + k] = self.diag * v[i * d + k] + self.off * (v[prev * d + k] + v[next * d + k]);
            }
        }
        Ok(out)
    }

    /// `a . P b`, the discrete `H^1` inner product.
    pub fn inner(&self, a: &DiscreteFunction, b: &DiscreteFunction) -> Result<f64> {
        a.check_compatible(b)?;
        Ok(a.dot(&self.multiply(b)?))
    }

    fn check(&self, u: &DiscreteFunction) -> Result<()> {
        if *u.grid() != self.grid {
            return Err(Error::Input("preconditioner built for a different grid".into()));
        }
        Ok(())
    }
}

/// Accepted backtracking step.
#[derive(Debug, Clone)]
pub(crate) struct Step {
    pub alpha: f64,
    pub point: DiscreteFunction,
    pub value: f64,
}

pub(crate) const ARMIJO: f64 = 1e-4;
pub(crate) const MAX_HALVINGS: usize = 60;

/// Backtracking from `alpha = 1`, halving, until
/// `J(x(alpha)) <= J(u) + c * g . (x(alpha) - u)`, where `x(alpha)` is
/// produced by `trial` (plain `u + alpha d`, or a projected variant).
/// Non-finite trial values count as rejections.
pub(crate) fn backtrack(
    u: &DiscreteFunction,
    value: f64,
    grad: &DiscreteFunction,
    mut trial: impl FnMut(f64) -> Result<DiscreteFunction>,
    mut eval: impl FnMut(&DiscreteFunction) -> Result<f64>,
) -> Result<Option<Step>> {
    let mut alpha = 1.0;
    for _ in 0..MAX_HALVINGS {
        let point = trial(alpha)?;
        let predicted = grad.dot(&point.sub(u));
        match eval(&point) {
            Ok(v) if v.is_finite() && predicted < 0.0 && v <= value + ARMIJO * predicted => {
                return Ok(Some(Step { alpha, point, value: v }));
            }
            Ok(_) | Err(Error::NonFinite { .. }) => {}
            Err(e) => return Err(e),
        }
        alpha *= 0.5;
    }
    Ok(None)
}
