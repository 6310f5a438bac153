use serde::Serialize;

use super::{Constants, Lagrangian};
use crate::gfunction::{dot, norm, GFunction};

/// Which flavour of the built-in planar problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `F = G(v)`, forcing `f = (f0, f0)`.
    Standard,
    /// `F = G(v)`, `f = 0`.
    Unforced,
    /// `F = G(v) (2 + |x|^{9/2} - sin t)`, forcing as in `Standard`.
    Remark,
}

/// The planar problem on `I = [-1, 1]` with
/// `G(v) = v1^2 + (v1 - v2)^2`,
/// `K = 2 G(x) + |x|^2 log(|x|^2 + 1)`,
/// `W = G(x)^2 + (|x|^{3/2} + |x|^5) / 100`,
/// `f0(t) = (2 - t^2) / 2500` and `g = 0.001`.
#[derive(Debug, Clone)]
pub struct Example5 {
    g: GFunction,
    variant: Variant,
    name: String,
    constants: Constants,
    forcing_scale: f64,
    envelope: f64,
}

impl Example5 {
    pub const DEFAULT_CONSTANTS: Constants = Constants {
        theta_f: 4.0,
        theta_v: 4.9,
        eps_v: 0.001,
        lambda: 1.0,
        m: 6200.0,
        b: 2.0,
        rho: 0.004,
        p_k: 1.5,
        zeta_f: 2.0,
        zeta_k: 2.0,
        zeta_w: 31.0 / 16.0,
        lambda0: 0.05,
    };

    pub fn new(variant: Variant) -> Self {
        let name = match variant {
            Variant::Standard => "example5",
            Variant::Unforced => "example5_f0",
            Variant::Remark => "example5_remark",
        };
        Example5 {
            g: GFunction::example5(),
            variant,
            name: name.into(),
            constants: Self::DEFAULT_CONSTANTS,
            forcing_scale: 1.0,
            envelope: 0.001,
        }
    }

    pub fn example5() -> Self {
        Self::new(Variant::Standard)
    }

    pub fn example5_f0() -> Self {
        Self::new(Variant::Unforced)
    }

    pub fn example5_remark() -> Self {
        Self::new(Variant::Remark)
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Multiplies the forcing by `s`.
    pub fn with_forcing_scale(mut self, s: f64) -> Self {
        self.forcing_scale = s;
        self
    }

    /// Replaces the constant envelope `g`.
    pub fn with_envelope(mut self, g: f64) -> Self {
        self.envelope = g;
        self
    }

    pub fn with_constants(mut self, c: Constants) -> Self {
        self.constants = c;
        self
    }

    pub fn forcing_profile(t: f64) -> f64 {
        (2.0 - t * t) / 2500.0
    }

    fn weight(&self, t: f64, x: &[f64]) -> f64 {
        match self.variant {
            Variant::Remark => 2.0 + norm(x).powf(4.5) - t.sin(),
            _ => 1.0,
        }
    }
}

impl Lagrangian for Example5 {
    fn name(&self) -> &str {
        &self.name
    }

    fn g_function(&self) -> &GFunction {
        &self.g
    }

    fn half_length(&self) -> f64 {
        1.0
    }

    fn constants(&self) -> &Constants {
        &self.constants
    }

    fn kinetic(&self, t: f64, x: &[f64], v: &[f64]) -> f64 {
        self.g.value(v) * self.weight(t, x)
    }

    fn kinetic_grad(&self, t: f64, x: &[f64], v: &[f64], fx: &mut [f64], fv: &mut [f64]) {
        self.g.grad_into(v, fv);
        let w = self.weight(t, x);
        for c in fv.iter_mut() {
            *c *= w;
        }
        match self.variant {
            Variant::Remark => {
                // d/dx |x|^{9/2} = (9/2) |x|^{5/2} x
                let c = self.g.value(v) * 4.5 * norm(x).powf(2.5);
                for (o, xi) in fx.iter_mut().zip(x) {
                    *o = c * xi;
                }
            }
            _ => fx.fill(0.0),
        }
    }

    fn k(&self, _t: f64, x: &[f64]) -> f64 {
        let r2 = dot(x, x);
        2.0 * self.g.value(x) + r2 * r2.ln_1p()
    }

    fn k_grad(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        let r2 = dot(x, x);
        self.g.grad_into(x, out);
        let c = 2.0 * r2.ln_1p() + 2.0 * r2 / (1.0 + r2);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = 2.0 * *o + c * xi;
        }
    }

    fn w(&self, _t: f64, x: &[f64]) -> f64 {
        let g = self.g.value(x);
        let r = norm(x);
        g * g + (r.powf(1.5) + r.powi(5)) / 100.0
    }

    fn w_grad(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        let g = self.g.value(x);
        let r = norm(x);
        self.g.grad_into(x, out);
        let c = if r == 0.0 { 0.0 } else { (1.5 / r.sqrt() + 5.0 * r.powi(3)) / 100.0 };
        for (o, xi) in out.iter_mut().zip(x) {
            *o = 2.0 * g * *o + c * xi;
        }
    }

    fn forcing(&self, t: f64, out: &mut [f64]) {
        let f = match self.variant {
            Variant::Unforced => 0.0,
            _ => self.forcing_scale * Self::forcing_profile(t),
        };
        out.fill(f);
    }

    fn envelope(&self, _t: f64) -> f64 {
        self.envelope
    }
}

/// Simple reference problem `F = G(v)`, `V = a G(x) + c` (`K = V`, `W = 0`),
/// constant forcing. Used for sanity runs where the answer is known.
#[derive(Debug, Clone)]
pub struct ControlProblem {
    g: GFunction,
    a: f64,
    c: f64,
    forcing: Vec<f64>,
    half_length: f64,
    constants: Constants,
}

impl ControlProblem {
    pub fn new(g: GFunction, a: f64, c: f64) -> Self {
        let dim = g.dim();
        ControlProblem {
            g,
            a,
            c,
            forcing: vec![0.0; dim],
            half_length: 1.0,
            constants: Example5::DEFAULT_CONSTANTS,
        }
    }

    pub fn with_forcing(mut self, f: Vec<f64>) -> Self {
        self.forcing = f;
        self
    }
}

impl Lagrangian for ControlProblem {
    fn name(&self) -> &str {
        "control"
    }

    fn g_function(&self) -> &GFunction {
        &self.g
    }

    fn half_length(&self) -> f64 {
        self.half_length
    }

    fn constants(&self) -> &Constants {
        &self.constants
    }

    fn kinetic(&self, _t: f64, _x: &[f64], v: &[f64]) -> f64 {
        self.g.value(v)
    }

    fn kinetic_grad(&self, _t: f64, _x: &[f64], v: &[f64], fx: &mut [f64], fv: &mut [f64]) {
        fx.fill(0.0);
        self.g.grad_into(v, fv);
    }

    fn k(&self, _t: f64, x: &[f64]) -> f64 {
        self.a * self.g.value(x) + self.c
    }

    fn k_grad(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        self.g.grad_into(x, out);
        for o in out.iter_mut() {
            *o *= self.a;
        }
    }

    fn w(&self, _t: f64, _x: &[f64]) -> f64 {
        0.0
    }

    fn w_grad(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn forcing(&self, _t: f64, out: &mut [f64]) {
        out.copy_from_slice(&self.forcing);
    }

    fn envelope(&self, _t: f64) -> f64 {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn fd<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|k| {
                let (mut p, mut m) = (x.to_vec(), x.to_vec());
                p[k] += 1e-6;
                m[k] -= 1e-6;
                (f(&p) - f(&m)) / 2e-6
            })
            .collect()
    }

    #[test]
    fn example_values() {
        let l = Example5::example5();
        assert_abs_diff_eq!(l.k(0.0, &[1.0, 1.0]), 2.0 + 2.0 * 3f64.ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(l.k(0.0, &[1.0, 1.0]), 4.19722, epsilon = 1e-5);
        assert_eq!(l.w(0.0, &[0.0, 0.0]), 0.0);
        assert_eq!(Example5::forcing_profile(0.0), 0.0008);
        let mut f = [0.0; 2];
        l.forcing(0.0, &mut f);
        assert_eq!(f, [0.0008, 0.0008]);
        Example5::example5_f0().forcing(0.3, &mut f);
        assert_eq!(f, [0.0, 0.0]);
        Example5::DEFAULT_CONSTANTS.validate().unwrap();
    }

    #[test]
    fn gradients_match_finite_differences() {
        for l in [Example5::example5(), Example5::example5_remark()] {
            for x in [[0.3, -0.7], [1.2, 0.4], [-2.0, 1.5]] {
                let t = 0.37;
                let mut out = [0.0; 2];
                l.k_grad(t, &x, &mut out);
                let fdk = fd(|y| l.k(t, y), &x);
                for k in 0..2 {
                    assert!((out[k] - fdk[k]).abs() < 1e-6 * (1.0 + fdk[k].abs()));
                }
                l.w_grad(t, &x, &mut out);
                let fdw = fd(|y| l.w(t, y), &x);
                for k in 0..2 {
                    assert!((out[k] - fdw[k]).abs() < 1e-6 * (1.0 + fdw[k].abs()));
                }
                let v = [0.5, -1.1];
                let (mut fx, mut fv) = ([0.0; 2], [0.0; 2]);
                l.kinetic_grad(t, &x, &v, &mut fx, &mut fv);
                let fdx = fd(|y| l.kinetic(t, y, &v), &x);
                let fdv = fd(|y| l.kinetic(t, &x, y), &v);
                for k in 0..2 {
                    assert!((fx[k] - fdx[k]).abs() < 1e-5 * (1.0 + fdx[k].abs()));
                    assert!((fv[k] - fdv[k]).abs() < 1e-5 * (1.0 + fdv[k].abs()));
                }
            }
        }
    }

    #[test]
    fn potential_gradient_vanishes_at_origin() {
        let l = Example5::example5();
        let mut out = [1.0; 2];
        l.potential_grad(0.0, &[0.0, 0.0], &mut out);
        assert_eq!(out, [0.0, 0.0]);
    }

    #[test]
    fn constants_validation() {
        let mut c = Example5::DEFAULT_CONSTANTS;
        c.theta_v = 3.0;
        assert!(c.validate().is_err());
        let mut c = Example5::DEFAULT_CONSTANTS;
        c.zeta_w = 2.5;
        assert!(c.validate().is_err());
        let mut c = Example5::DEFAULT_CONSTANTS;
        c.lambda0 = 1.0;
        assert!(c.validate().is_err());
    }
}
