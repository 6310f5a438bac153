//! Critical points of the discrete action: the mountain-pass point between
//! `0` and a far endpoint, and the minimizer over the sublevel set
//! `Omega = {Phi < rho}`.

mod minimize;
mod mountain;
mod precond;

pub use minimize::{minimize_in_omega, EkelandStep, BOUNDARY_BAND, POLISH};
pub use mountain::{mountain_pass, mountain_pass_observed, PathState};
pub use precond::Preconditioner;

use serde::{Deserialize, Serialize};

use crate::discretization::{phi, project_to_boundary, DiscreteFunction, Grid};
use crate::error::{Error, Result, Stage, TracePoint};
use crate::functional::action;
use crate::lagrangian::Lagrangian;
use crate::orlicz::sobolev_norm;
use crate::report::CheckReport;
use crate::sampling::{random_periodic, rng, unit_vector};

/// Sweeps (or iterations) over which the tracked value must drop by at least
/// [`STALL_DECREASE`].
pub const STALL_WINDOW: usize = 50;
pub const STALL_DECREASE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    pub path_nodes: usize,
    /// Residual tolerance (`L^2` norm of the gradient density).
    pub tol: f64,
    pub max_iter: usize,
    /// Number of initial points for the sublevel-set minimization.
    pub starts: usize,
    /// Minimum Orlicz-Sobolev distance between the two solutions.
    pub sep_tol: f64,
    /// Upper limit of the doubling search for the far endpoint.
    pub lambda_max: f64,
    pub boundary_directions: usize,
    pub seed: u64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            path_nodes: 17,
            tol: 1e-4,
            max_iter: 50_000,
            starts: 8,
            sep_tol: 1e-3,
            lambda_max: 65_536.0,
            boundary_directions: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    MountainPass,
    OmegaMinimizer,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalPoint {
    pub u: DiscreteFunction,
    pub value: f64,
    pub residual: f64,
    pub kind: Kind,
    pub iterations: usize,
    /// `(value, residual)` per sweep or iteration; for the mountain pass the
    /// value is the path maximum.
    pub trace: Vec<TracePoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    /// `rho - Phi(u)` for the sublevel minimizer.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interior_margin: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub ekeland: Vec<EkelandStep>,
}

/// `(1, .., 1) / sqrt(N)` at every node.
pub fn default_psi(grid: Grid, dim: usize) -> DiscreteFunction {
    DiscreteFunction::constant(grid, &vec![1.0 / (dim as f64).sqrt(); dim])
}

/// `e = lambda psi` with `J(e) < 0` and `Phi(e) > rho`, doubling `lambda`
/// from 1 up to `lambda_max`.
pub fn find_e1(l: &dyn Lagrangian, psi: &DiscreteFunction, rho: f64, lambda_max: f64) -> Result<DiscreteFunction> {
    if psi.dim() != l.dim() {
        return Err(Error::DimensionMismatch {
            expected: l.dim(),
            found: psi.dim(),
        });
    }
    if psi.is_zero() {
        return Err(Error::Input("psi vanishes identically".into()));
    }
    let g = l.g_function();
    let mut lambda = 1.0;
    while lambda <= lambda_max {
        let e = psi.scaled(lambda);
        match action(l, &e) {
            Ok(j) if j < 0.0 && phi(g, &e)? > rho => return Ok(e),
            Ok(_) | Err(Error::NonFinite { .. }) => {}
            Err(err) => return Err(err),
        }
        lambda *= 2.0;
    }
    Err(Error::SearchFailure(format!(
        "no lambda <= {lambda_max} gives J(lambda psi) < 0 with Phi > {rho}"
    )))
}

/// Lowest action seen on `Phi = rho`, with where it was seen.
#[derive(Debug, Clone, Serialize)]
pub struct BoundaryEstimate {
    pub infimum: f64,
    pub argmin: DiscreteFunction,
    pub values: Vec<f64>,
}

/// Ray projections of `n_directions` random directions onto `Phi = rho`.
/// Every third direction is a constant function; the rest alternate smooth
/// and rough random functions.
pub fn boundary_estimate(l: &dyn Lagrangian, grid: Grid, rho: f64, n_directions: usize, seed: u64) -> Result<BoundaryEstimate> {
    if n_directions == 0 {
        return Err(Error::Input("need at least one direction".into()));
    }
    let mut r = rng(seed);
    let g = l.g_function();
    let mut best: Option<(f64, DiscreteFunction)> = None;
    let mut values = Vec::with_capacity(n_directions);
    for i in 0..n_directions {
        let dir = if i % 3 == 0 {
            DiscreteFunction::constant(grid, &unit_vector(&mut r, l.dim()))
        } else {
            random_periodic(&mut r, grid, l.dim(), i, 0.1, 10.0)
        };
        let u = project_to_boundary(g, &dir, rho)?;
        let j = action(l, &u)?;
        values.push(j);
        if best.as_ref().is_none_or(|(b, _)| j < *b) {
            best = Some((j, u));
        }
    }
    let (infimum, argmin) = best.expect("n_directions >= 1");
    Ok(BoundaryEstimate { infimum, argmin, values })
}

/// [`boundary_estimate`] reduced to the scalar estimate.
pub fn boundary_infimum(l: &dyn Lagrangian, grid: Grid, rho: f64, n_directions: usize, seed: u64) -> Result<f64> {
    Ok(boundary_estimate(l, grid, rho, n_directions, seed)?.infimum)
}

/// Why the two critical points are different solutions.
#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub unforced: bool,
    /// `c1 - c2`.
    pub value_gap: f64,
    /// `||u1 - u2||` in the Orlicz-Sobolev norm.
    pub separation: f64,
    /// `c2 < 0 = J(0)`, so `u2` is not the trivial solution (unforced case).
    pub nontrivial: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TwoSolutionReport {
    /// `false` when hypotheses failed and the run was forced.
    pub hypotheses_verified: bool,
    pub failed_checks: Vec<String>,
    pub endpoint: DiscreteFunction,
    pub endpoint_value: f64,
    pub boundary: BoundaryEstimate,
    pub mountain_pass: CriticalPoint,
    pub minimizer: CriticalPoint,
    pub certificate: Certificate,
}

fn forcing_vanishes(l: &dyn Lagrangian, grid: &Grid) -> bool {
    let mut f = vec![0.0; l.dim()];
    grid.nodes().all(|t| {
        l.forcing(t, &mut f);
        f.iter().all(|&c| c == 0.0)
    })
}

/// Full pipeline: hypothesis gate, far endpoint, boundary estimate, mountain
/// pass, sublevel minimization, distinctness certificate. Errors carry the
/// stage they came from.
pub fn two_solution_run(
    l: &dyn Lagrangian,
    grid: Grid,
    hypotheses: &[CheckReport],
    params: &SolverParams,
    force: bool,
) -> Result<TwoSolutionReport> {
    let failed: Vec<CheckReport> = hypotheses.iter().filter(|r| r.blocks()).cloned().collect();
    if !failed.is_empty() && !force {
        return Err(Error::HypothesesFailed(failed).at(Stage::Hypotheses));
    }
    let rho = l.constants().rho;
    let g = l.g_function();
    let zero = DiscreteFunction::zeros(grid, l.dim());

    let psi = default_psi(grid, l.dim());
    let e1 = find_e1(l, &psi, rho, params.lambda_max).map_err(|e| e.at(Stage::FindEndpoint))?;
    let e1_value = action(l, &e1).map_err(|e| e.at(Stage::FindEndpoint))?;

    let boundary = boundary_estimate(l, grid, rho, params.boundary_directions, params.seed)
        .map_err(|e| e.at(Stage::BoundaryEstimate))?;
    let floor = e1_value.max(0.0);
    if !(boundary.infimum > floor) {
        return Err(Error::Domain(format!(
            "boundary estimate {} does not exceed the endpoint values (max {floor})",
            boundary.infimum
        ))
        .at(Stage::BoundaryEstimate));
    }

    let u1 = mountain_pass(l, &zero, &e1, params).map_err(|e| e.at(Stage::MountainPass))?;
    let u2 = minimize_in_omega(l, grid, rho, params).map_err(|e| e.at(Stage::Minimization))?;

    let unforced = forcing_vanishes(l, &grid);
    let separation = sobolev_norm(g, &u1.u.sub(&u2.u)).map_err(|e| e.at(Stage::Distinctness))?;
    let certificate = Certificate {
        unforced,
        value_gap: u1.value - u2.value,
        separation,
        nontrivial: unforced.then_some(u2.value < 0.0 && !u2.u.is_zero()),
    };
    let mut problems = Vec::new();
    if !(u1.value > 0.0) {
        problems.push(format!("c1 = {} is not positive", u1.value));
    }
    if unforced && !(u2.value < 0.0) {
        problems.push(format!("c2 = {} is not negative in the unforced case", u2.value));
    }
    if !unforced && !(u2.value <= 0.0) {
        problems.push(format!("c2 = {} is positive", u2.value));
    }
    if !(certificate.value_gap > 0.0) {
        problems.push(format!("c1 - c2 = {} is not positive", certificate.value_gap));
    }
    if !(separation > params.sep_tol) {
        problems.push(format!("separation {separation:e} is not above {}", params.sep_tol));
    }
    if certificate.nontrivial == Some(false) {
        problems.push("u2 is the trivial solution".into());
    }
    if !problems.is_empty() {
        return Err(Error::Domain(problems.join("; ")).at(Stage::Distinctness));
    }
    Ok(TwoSolutionReport {
        hypotheses_verified: failed.is_empty(),
        failed_checks: failed.iter().map(|r| r.name.clone()).collect(),
        endpoint: e1,
        endpoint_value: e1_value,
        boundary,
        mountain_pass: u1,
        minimizer: u2,
        certificate,
    })
}
