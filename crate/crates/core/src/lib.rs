//! Anisotropic Orlicz-Sobolev machinery for periodic Euler-Lagrange systems
//! `d/dt F_v(t, u, u') = F_x(t, u, u') + V_x(t, u) + f(t)` on `I = [-T, T]`,
//! and solvers for their mountain-pass and sublevel-minimum critical points.

pub mod discretization;
pub mod error;
pub mod functional;
pub mod gfunction;
pub mod lagrangian;
pub mod orlicz;
pub mod report;
pub mod sampling;
pub mod solvers;

pub use discretization::{derivative, integrate, make_grid, phi, project_to_boundary, DiscreteFunction, Grid};
pub use error::{Error, Result, Stage, TracePoint};
pub use lagrangian::{Constants, Example5, Lagrangian};
pub use functional::{action, action_gradient, fd_check, residual_norm, ActionEvaluation};
pub use gfunction::{convex_minorant, minorant_inverse, ConvexMinorant, GFunction};
pub use orlicz::{luxemburg_norm, modular, sobolev_norm, NormReport};
pub use report::{CheckReport, Status, Witness};
pub use solvers::{boundary_infimum, find_e1, minimize_in_omega, mountain_pass, two_solution_run, CriticalPoint, Kind, PathState, SolverParams};
