//! Problem data `(F, V = K - W, f, g)` with growth constants, the built-in
//! example problems, and sampled verification of the structural hypotheses.

mod checks;
mod example;
mod scan;

pub use checks::{check_f, check_forcing, check_forcing_on, check_v, CloudSpec, Sample, SampleCloud, SCALING_FRACTIONS};
pub use example::{ControlProblem, Example5, Variant};
pub use scan::{check_legacy, region_scan, scan_h, HScan, HWhich, LegacyReport, LegacyRow, PolarScan, RegionRow, RegionScan, ScanBox};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gfunction::GFunction;

/// Growth constants attached to a problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constants {
    /// Superlinearity exponent of `F`.
    pub theta_f: f64,
    /// Superlinearity exponent of `V`.
    pub theta_v: f64,
    pub eps_v: f64,
    /// Ellipticity: `F >= Lambda G(v)`.
    pub lambda: f64,
    /// Radius beyond which the potential's growth inequalities hold.
    pub m: f64,
    /// Coercivity factor: `V >= b G - g` near zero.
    pub b: f64,
    /// Level of the sublevel set `Omega = { Phi < rho }`.
    pub rho: f64,
    pub p_k: f64,
    pub zeta_f: f64,
    pub zeta_k: f64,
    pub zeta_w: f64,
    /// Upper end of the scaling range for the small-amplitude inequalities.
    pub lambda0: f64,
}

impl Constants {
    pub fn validate(&self) -> Result<()> {
        let c = self;
        let checks: [(bool, &str); 9] = [
            (c.theta_f > 0.0, "theta_f > 0"),
            (c.theta_v > c.theta_f, "theta_v > theta_f"),
            (c.eps_v > 0.0, "eps_v > 0"),
            (c.p_k > 1.0 && c.p_k <= c.theta_v - c.eps_v, "1 < p_k <= theta_v - eps_v"),
            (c.b > 1.0, "b > 1"),
            (c.rho > 0.0, "rho > 0"),
            (c.lambda > 0.0 && c.m > 0.0, "Lambda > 0 and M > 0"),
            (c.lambda0 > 0.0 && c.lambda0 < 1.0, "lambda0 in (0, 1)"),
            (c.zeta_w > 1.0 && c.zeta_w < c.zeta_f.min(c.zeta_k), "1 < zeta_w < min(zeta_f, zeta_k)"),
        ];
        for (ok, what) in checks {
            if !ok {
                return Err(Error::Input(format!("constants violate {what}")));
            }
        }
        Ok(())
    }
}

/// A periodic Lagrangian problem on `I = [-T, T]`.
///
/// Implementors supply `F` with its partials, the split `V = K - W` with
/// gradients, the forcing `f` and the scalar envelope `g`.
pub trait Lagrangian: Send + Sync {
    fn name(&self) -> &str;
    fn g_function(&self) -> &GFunction;
    fn half_length(&self) -> f64;
    fn constants(&self) -> &Constants;

    fn dim(&self) -> usize {
        self.g_function().dim()
    }

    fn interval_length(&self) -> f64 {
        2.0 * self.half_length()
    }

    /// `F(t, x, v)`.
    fn kinetic(&self, t: f64, x: &[f64], v: &[f64]) -> f64;
    /// Writes `F_x` and `F_v`.
    fn kinetic_grad(&self, t: f64, x: &[f64], v: &[f64], fx: &mut [f64], fv: &mut [f64]);

    fn k(&self, t: f64, x: &[f64]) -> f64;
    fn k_grad(&self, t: f64, x: &[f64], out: &mut [f64]);
    fn w(&self, t: f64, x: &[f64]) -> f64;
    fn w_grad(&self, t: f64, x: &[f64], out: &mut [f64]);

    fn potential(&self, t: f64, x: &[f64]) -> f64 {
        self.k(t, x) - self.w(t, x)
    }

    fn potential_grad(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let mut buf = [0.0; 8];
        let mut heap;
        let w: &mut [f64] = if out.len() <= buf.len() {
            &mut buf[..out.len()]
        } else {
            heap = vec![0.0; out.len()];
            &mut heap
        };
        self.k_grad(t, x, out);
        self.w_grad(t, x, w);
        for (o, wi) in out.iter_mut().zip(w.iter()) {
            *o -= wi;
        }
    }

    fn forcing(&self, t: f64, out: &mut [f64]);
    /// The scalar `g(t)` in the coercivity bound `V >= b G - g`.
    fn envelope(&self, t: f64) -> f64;
}
