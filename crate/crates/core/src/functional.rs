//! Discrete action `J(u) = h sum_i F(t_i, u_i, Du_i) + V(t_i, u_i) + <f(t_i), u_i>`
//! and its exact gradient.

use serde::Serialize;

use crate::discretization::{derivative, DiscreteFunction};
use crate::error::{Error, Result};
use crate::lagrangian::Lagrangian;

/// Value, gradient and residual of the discrete action at one point.
///
/// `gradient` holds the partial derivatives `dJ / du_i` (so it carries a
/// factor `h`); `residual_norm` is the `L^2` norm of the gradient density
/// `dJ / du_i / h`, which is mesh independent.
#[derive(Debug, Clone, Serialize)]
pub struct ActionEvaluation {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradient: Option<DiscreteFunction>,
    pub residual_norm: f64,
}

impl ActionEvaluation {
    pub fn gradient(&self) -> &DiscreteFunction {
        self.gradient.as_ref().expect("gradient kept")
    }

    /// Drops the per-node gradient, e.g. before serializing a summary.
    pub fn without_gradient(mut self) -> Self {
        self.gradient = None;
        self
    }
}

fn check(l: &dyn Lagrangian, u: &DiscreteFunction) -> Result<()> {
    if u.dim() != l.dim() {
        return Err(Error::DimensionMismatch {
            expected: l.dim(),
            found: u.dim(),
        });
    }
    Ok(())
}

pub fn action(l: &dyn Lagrangian, u: &DiscreteFunction) -> Result<f64> {
    check(l, u)?;
    let du = derivative(u);
    let grid = u.grid();
    let mut f = vec![0.0; u.dim()];
    let mut sum = 0.0;
    for (i, (x, v)) in u.nodes().zip(du.nodes()).enumerate() {
        let t = grid.node(i);
        l.forcing(t, &mut f);
        let val = l.kinetic(t, x, v) + l.potential(t, x) + f.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        if !val.is_finite() {
            return Err(Error::NonFinite { node: i, t });
        }
        sum += val;
    }
    Ok(grid.h() * sum)
}

/// `J(u)` and its gradient
/// `dJ/du_i = h (F_x + V_x + f)(t_i) + F_v(t_{i-1}) - F_v(t_i)`,
/// the adjoint of the forward difference applied to `F_v`.
pub fn action_gradient(l: &dyn Lagrangian, u: &DiscreteFunction) -> Result<ActionEvaluation> {
    check(l, u)?;
    let n = u.grid().n();
    let d = u.dim();
    let h = u.grid().h();
    let du = derivative(u);
    let mut grad = DiscreteFunction::zeros(*u.grid(), d);
    let mut fv_all = vec![0.0; n * d];
    let (mut fx, mut vx, mut f) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut sum = 0.0;
    for i in 0..n {
        let t = u.grid().node(i);
        let (x, v) = (u.node(i), du.node(i));
        l.forcing(t, &mut f);
        let val = l.kinetic(t, x, v) + l.potential(t, x) + f.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        l.kinetic_grad(t, x, v, &mut fx, &mut fv_all[i * d..(i + 1) * d]);
        l.potential_grad(t, x, &mut vx);
        let gi = grad.node_mut(i);
        for k in 0..d {
            gi[k] = h * (fx[k] + vx[k] + f[k]);
        }
        if !val.is_finite() || gi.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite { node: i, t });
        }
        sum += val;
    }
    for i in 0..n {
        let prev = (i + n - 1) % n;
        let gi = grad.node_mut(i);
        for k in 0..d {
            gi[k] += fv_all[prev * d + k] - fv_all[i * d + k];
        }
    }
    let residual_norm = residual_norm(&grad);
    Ok(ActionEvaluation {
        value: h * sum,
        gradient: Some(grad),
        residual_norm,
    })
}

/// `sqrt(sum_i |g_i|^2 / h)`: the `L^2` norm of the gradient density.
pub fn residual_norm(gradient: &DiscreteFunction) -> f64 {
    (gradient.dot(gradient) / gradient.grid().h()).sqrt()
}

/// Largest relative mismatch `|FD - g| / (1 + |g|)` between central
/// differences of `J` (one probe per coordinate, two evaluations each) and
/// the analytic gradient.
pub fn fd_check(l: &dyn Lagrangian, u: &DiscreteFunction, step: f64) -> Result<f64> {
    if !(step > 0.0) {
        return Err(Error::Input(format!("step {step} must be positive")));
    }
    let eval = action_gradient(l, u)?;
    let g = eval.gradient();
    let mut probe = u.clone();
    let mut worst: f64 = 0.0;
    for j in 0..u.values().len() {
        let orig = probe.values()[j];
        probe.values_mut()[j] = orig + step;
        let plus = action(l, &probe)?;
        probe.values_mut()[j] = orig - step;
        let minus = action(l, &probe)?;
        probe.values_mut()[j] = orig;
        let fd = (plus - minus) / (2.0 * step);
        let an = g.values()[j];
        worst = worst.max((fd - an).abs() / (1.0 + an.abs()));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{integrate, Grid};
    use crate::lagrangian::{ControlProblem, Example5};
    use crate::sampling::{random_smooth, rng};
    use crate::GFunction;
    use approx::assert_abs_diff_eq;

    fn grid(n: usize) -> Grid {
        Grid::new(1.0, n).unwrap()
    }

    #[test]
    fn action_at_zero_vanishes() {
        let l = Example5::example5();
        assert_eq!(action(&l, &DiscreteFunction::zeros(grid(64), 2)).unwrap(), 0.0);
    }

    #[test]
    fn action_of_constant_matches_arithmetic() {
        let l = Example5::example5();
        let gr = grid(64);
        for c in [1e-3, 0.01, 0.1] {
            let u = DiscreteFunction::constant(gr, &[c, c]);
            // oracle: |I| V(c, c) + 2c * (rectangle sum of f0)
            let x = [c, c];
            let gx = c * c;
            let r2 = 2.0 * c * c;
            let v = 2.0 * gx + r2 * (1.0 + r2).ln() - gx * gx - (r2.powf(0.75) + r2.powf(2.5)) / 100.0;
            let f0: Vec<f64> = gr.nodes().map(Example5::forcing_profile).collect();
            let expected = 2.0 * v + 2.0 * c * integrate(&gr, &f0).unwrap();
            assert_abs_diff_eq!(action(&l, &u).unwrap(), expected, epsilon = 1e-10);
            assert_abs_diff_eq!(l.potential(0.0, &x), v, epsilon = 1e-15);
        }
    }

    #[test]
    fn gradient_at_zero_is_forcing() {
        let l = Example5::example5();
        let gr = grid(64);
        let e = action_gradient(&l, &DiscreteFunction::zeros(gr, 2)).unwrap();
        for (i, gi) in e.gradient().nodes().enumerate() {
            let f = gr.h() * Example5::forcing_profile(gr.node(i));
            assert_abs_diff_eq!(gi[0], f, epsilon = 1e-18);
            assert_abs_diff_eq!(gi[1], f, epsilon = 1e-18);
        }
        assert!(e.residual_norm > 0.0);
    }

    #[test]
    fn constants_are_critical_for_pure_kinetic() {
        let l = ControlProblem::new(GFunction::example5(), 0.0, 0.0);
        let u = DiscreteFunction::constant(grid(32), &[0.3, -1.7]);
        let e = action_gradient(&l, &u).unwrap();
        assert_eq!(e.residual_norm, 0.0);
        assert!(e.gradient().is_zero());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut r = rng(17);
        for l in [Example5::example5(), Example5::example5_remark()] {
            for _ in 0..3 {
                let u = random_smooth(&mut r, grid(64), 2, 4, 0.3);
                assert!(fd_check(&l, &u, 1e-6).unwrap() <= 1e-5);
            }
        }
        let zero = DiscreteFunction::zeros(grid(64), 2);
        assert!(fd_check(&Example5::example5(), &zero, 1e-6).unwrap() <= 1e-8);
    }

    #[test]
    fn fd_error_shrinks_with_step() {
        let l = Example5::example5();
        let u = random_smooth(&mut rng(2), grid(32), 2, 3, 0.5);
        let coarse = fd_check(&l, &u, 1e-1).unwrap();
        let mid = fd_check(&l, &u, 1e-3).unwrap();
        let fine = fd_check(&l, &u, 1e-5).unwrap();
        assert!(coarse > mid && mid > fine);
        assert!(fd_check(&l, &u, 0.0).is_err());
    }

    #[test]
    fn translation_invariance_without_potential() {
        let l = ControlProblem::new(GFunction::example5(), 0.0, 0.0);
        let u = random_smooth(&mut rng(4), grid(64), 2, 5, 1.0);
        let moved = u.add_scaled(&DiscreteFunction::constant(*u.grid(), &[0.7, -2.0]), 1.0);
        assert_abs_diff_eq!(action(&l, &u).unwrap(), action(&l, &moved).unwrap(), epsilon = 1e-10);
        let g = action_gradient(&l, &u).unwrap();
        for k in 0..2 {
            let s: f64 = g.gradient().nodes().map(|gi| gi[k]).sum();
            assert!(s.abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_and_finiteness_errors() {
        let l = Example5::example5();
        assert!(action(&l, &DiscreteFunction::zeros(grid(8), 3)).is_err());
        let huge = DiscreteFunction::constant(grid(8), &[1e80, 1e80]);
        assert!(matches!(action(&l, &huge), Err(Error::NonFinite { .. })));
    }
}
