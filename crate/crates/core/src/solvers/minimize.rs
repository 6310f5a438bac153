use std::cmp::Ordering;

use serde::Serialize;

use super::precond::{backtrack, Preconditioner};
use super::{default_psi, CriticalPoint, Kind, SolverParams, STALL_DECREASE, STALL_WINDOW};
use crate::discretization::{phi, project_to_boundary, DiscreteFunction, Grid};
use crate::error::{Error, Result, TracePoint};
use crate::functional::{action, action_gradient};
use crate::lagrangian::Lagrangian;
use crate::orlicz::sobolev_norm;
use crate::sampling::{random_periodic, rng};

/// Relative distance to `rho` below which an iterate counts as on the boundary.
pub const BOUNDARY_BAND: f64 = 1e-6;
/// Descent continues past `tol` until the residual reaches `tol * POLISH`
/// or stalls.
pub const POLISH: f64 = 1e-4;
/// Halvings of `lambda0` tried when building the small-amplitude seed.
const SEED_HALVINGS: usize = 60;

/// One accepted descent iterate, with the quantities Ekeland's principle
/// speaks about.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EkelandStep {
    pub iteration: usize,
    pub value: f64,
    pub residual: f64,
    /// `||u_{n+1} - u_n||` in the Orlicz-Sobolev norm.
    pub step_norm: f64,
    /// `J(u_n) - J(u_{n+1}) >= 0`.
    pub drop: f64,
    /// `eps_n = J(u_{n+1}) - c`, `c` the best value found over all starts.
    pub epsilon: f64,
}

impl EkelandStep {
    /// `drop / step_norm`, compared against `-sqrt(eps_n)`.
    pub fn ratio(&self) -> f64 {
        if self.step_norm > 0.0 {
            self.drop / self.step_norm
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone)]
struct Outcome {
    u: DiscreteFunction,
    value: f64,
    residual: f64,
    phi: f64,
    iterations: usize,
    trace: Vec<TracePoint>,
    ekeland: Vec<EkelandStep>,
}

/// Initial points: zero, the small-amplitude seed `lambda psi` (halving
/// `lambda` from `lambda0` until `J < 0`, if it ever is), and random
/// perturbations of zero placed at `Phi` between 1% and 50% of `rho`.
fn starts(l: &dyn Lagrangian, grid: Grid, rho: f64, params: &SolverParams) -> Result<Vec<DiscreteFunction>> {
    let g = l.g_function();
    let mut out = vec![DiscreteFunction::zeros(grid, l.dim())];
    if params.starts < 2 {
        return Ok(out);
    }
    let psi = project_to_boundary(g, &default_psi(grid, l.dim()), 0.5 * rho)?;
    let mut lambda = l.constants().lambda0;
    let mut seed = psi.scaled(lambda);
    for _ in 0..SEED_HALVINGS {
        if action(l, &seed)? < 0.0 {
            break;
        }
        lambda *= 0.5;
        seed = psi.scaled(lambda);
    }
    out.push(seed);
    let mut r = rng(params.seed);
    for i in 2..params.starts {
        let v = random_periodic(&mut r, grid, l.dim(), i, 1e-3, 1.0);
        let level = rho * (0.01 + 0.49 * (i - 2) as f64 / (params.starts - 2).max(1) as f64);
        out.push(project_to_boundary(g, &v, level)?);
    }
    Ok(out)
}

fn descend(l: &dyn Lagrangian, pre: &Preconditioner, u0: DiscreteFunction, rho: f64, params: &SolverParams) -> Result<Outcome> {
    let g = l.g_function();
    let mut u = u0;
    if phi(g, &u)? >= rho {
        u = project_to_boundary(g, &u, rho)?;
    }
    let mut eval = action_gradient(l, &u)?;
    let mut trace = vec![TracePoint {
        value: eval.value,
        residual: eval.residual_norm,
    }];
    let mut ekeland = Vec::new();
    let mut iterations = 0;
    while iterations < params.max_iter && eval.residual_norm > params.tol * POLISH {
        let grad = eval.gradient();
        let d = pre.apply(grad)?.scaled(-1.0);
        let trial = |a: f64| -> Result<DiscreteFunction> {
            let x = u.add_scaled(&d, a);
            if phi(g, &x)? >= rho {
                project_to_boundary(g, &x, rho)
            } else {
                Ok(x)
            }
        };
        let Some(step) = backtrack(&u, eval.value, grad, trial, |x| action(l, x))? else {
            break;
        };
        iterations += 1;
        let step_norm = sobolev_norm(g, &step.point.sub(&u))?;
        let drop = eval.value - step.value;
        u = step.point;
        eval = action_gradient(l, &u)?;
        trace.push(TracePoint {
            value: eval.value,
            residual: eval.residual_norm,
        });
        ekeland.push(EkelandStep {
            iteration: iterations,
            value: eval.value,
            residual: eval.residual_norm,
            step_norm,
            drop,
            epsilon: f64::NAN,
        });
        if iterations > STALL_WINDOW && trace[iterations - STALL_WINDOW].value - eval.value < STALL_DECREASE {
            break;
        }
    }
    Ok(Outcome {
        phi: phi(g, &u)?,
        u,
        value: eval.value,
        residual: eval.residual_norm,
        iterations,
        trace,
        ekeland,
    })
}

fn lexicographic(a: &DiscreteFunction, b: &DiscreteFunction) -> Ordering {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Minimum of `J` over the sublevel set `{Phi < rho}` by projected
/// preconditioned descent from several starts, run concurrently.
///
/// The winner is the converged interior result with the lowest value (ties:
/// lower residual, then lexicographic order of nodal values). Fails with
/// [`Error::BoundaryTrap`] when every start ends on `Phi = rho`.
pub fn minimize_in_omega(l: &dyn Lagrangian, grid: Grid, rho: f64, params: &SolverParams) -> Result<CriticalPoint> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::Input(format!("rho = {rho} must be positive")));
    }
    let pre = Preconditioner::new(grid);
    let inits = starts(l, grid, rho, params)?;
    let outcomes: Vec<Result<Outcome>> = std::thread::scope(|scope| {
        let handles: Vec<_> = inits
            .into_iter()
            .map(|u0| {
                let pre = &pre;
                scope.spawn(move || descend(l, pre, u0, rho, params))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("descent thread panicked")).collect()
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let best_value = outcomes.iter().map(|o| o.value).fold(f64::INFINITY, f64::min);

    let on_boundary = |o: &Outcome| o.phi >= rho * (1.0 - BOUNDARY_BAND);
    let mut good: Vec<Outcome> = outcomes
        .iter()
        .filter(|o| o.residual <= params.tol && !on_boundary(o))
        .cloned()
        .collect();
    good.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then(a.residual.total_cmp(&b.residual))
            .then_with(|| lexicographic(&a.u, &b.u))
    });
    let Some(mut best) = good.into_iter().next() else {
        if outcomes.iter().all(on_boundary) {
            return Err(Error::BoundaryTrap {
                witnesses: outcomes
                    .iter()
                    .map(|o| TracePoint {
                        value: o.value,
                        residual: o.residual,
                    })
                    .collect(),
            });
        }
        let worst = outcomes
            .into_iter()
            .min_by(|a, b| a.residual.total_cmp(&b.residual))
            .expect("at least one start");
        return Err(Error::NonConvergence {
            reason: format!("no start reached residual {} (best {:e})", params.tol, worst.residual),
            trace: worst.trace,
        });
    };
    for step in &mut best.ekeland {
        step.epsilon = step.value - best_value;
    }
    Ok(CriticalPoint {
        interior_margin: Some(rho - best.phi),
        phi: Some(best.phi),
        u: best.u,
        value: best.value,
        residual: best.residual,
        kind: Kind::OmegaMinimizer,
        iterations: best.iterations,
        trace: best.trace,
        ekeland: best.ekeland,
    })
}
