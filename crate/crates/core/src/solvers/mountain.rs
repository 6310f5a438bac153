use serde::Serialize;

use super::precond::{backtrack, Preconditioner};
use super::{CriticalPoint, Kind, SolverParams, STALL_DECREASE, STALL_WINDOW};
use crate::discretization::DiscreteFunction;
use crate::error::{Error, Result, TracePoint};
use crate::functional::{action, action_gradient, ActionEvaluation};
use crate::lagrangian::Lagrangian;

/// Interior samples per segment when scanning the polyline for its maximum.
const SEGMENT_SAMPLES: usize = 5;
const GOLDEN_ITERATIONS: usize = 36;
/// Halvings of the node steps tried before a sweep is declared idle.
const RESPACE_ATTEMPTS: usize = 20;

/// A discrete path `e0 = z_0, ..., z_{m-1} = e1` and the action at each node.
#[derive(Debug, Clone, Serialize)]
pub struct PathState {
    pub nodes: Vec<DiscreteFunction>,
    pub energies: Vec<f64>,
    /// Maximum of `J` over the piecewise-linear path (not just the nodes).
    pub max_energy: f64,
    /// Position of that maximum, as `segment + fraction`.
    pub peak_position: f64,
    pub sweep: usize,
}

impl PathState {
    fn straight(l: &dyn Lagrangian, e0: &DiscreteFunction, e1: &DiscreteFunction, m: usize) -> Result<Self> {
        let mut nodes: Vec<DiscreteFunction> = (0..m).map(|j| e0.lerp(e1, j as f64 / (m - 1) as f64)).collect();
        nodes[0] = e0.clone();
        nodes[m - 1] = e1.clone();
        let energies = nodes.iter().map(|u| action(l, u)).collect::<Result<Vec<_>>>()?;
        let mut p = PathState {
            nodes,
            energies,
            max_energy: f64::NAN,
            peak_position: 0.0,
            sweep: 0,
        };
        let peak = locate_peak(l, &p.nodes, &p.energies)?;
        p.max_energy = peak.value;
        p.peak_position = peak.sigma;
        Ok(p)
    }

    /// Index of the highest node.
    pub fn max_node(&self) -> usize {
        self.energies
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &e)| if e > acc.1 { (i, e) } else { acc })
            .0
    }
}

fn point_at(nodes: &[DiscreteFunction], sigma: f64) -> DiscreteFunction {
    let j = (sigma.floor() as usize).min(nodes.len() - 2);
    nodes[j].lerp(&nodes[j + 1], sigma - j as f64)
}

struct Peak {
    sigma: f64,
    value: f64,
}

fn golden_max(l: &dyn Lagrangian, nodes: &[DiscreteFunction], mut a: f64, mut b: f64) -> Result<Peak> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = action(l, &point_at(nodes, c))?;
    let mut fd = action(l, &point_at(nodes, d))?;
    for _ in 0..GOLDEN_ITERATIONS {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = action(l, &point_at(nodes, c))?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = action(l, &point_at(nodes, d))?;
        }
    }
    Ok(if fc >= fd { Peak { sigma: c, value: fc } } else { Peak { sigma: d, value: fd } })
}

/// Coarse scan of every segment, then golden-section refinement around each
/// local maximum of the samples.
fn locate_peak(l: &dyn Lagrangian, nodes: &[DiscreteFunction], energies: &[f64]) -> Result<Peak> {
    let m = nodes.len();
    let step = 1.0 / (SEGMENT_SAMPLES + 1) as f64;
    let mut samples = Vec::with_capacity((m - 1) * (SEGMENT_SAMPLES + 1) + 1);
    for j in 0..m - 1 {
        samples.push(energies[j]);
        for k in 1..=SEGMENT_SAMPLES {
            samples.push(action(l, &nodes[j].lerp(&nodes[j + 1], k as f64 * step))?);
        }
    }
    samples.push(energies[m - 1]);
    let mut best = samples
        .iter()
        .enumerate()
        .fold(Peak { sigma: 0.0, value: f64::NEG_INFINITY }, |b, (i, &v)| {
            if v > b.value {
                Peak { sigma: i as f64 * step, value: v }
            } else {
                b
            }
        });
    // refine around every local maximum of the samples
    let total = (m - 1) * (SEGMENT_SAMPLES + 1);
    for i in 0..=total {
        let v = samples[i];
        let left = if i > 0 { samples[i - 1] } else { f64::NEG_INFINITY };
        let right = if i < total { samples[i + 1] } else { f64::NEG_INFINITY };
        if v >= left && v >= right {
            let p = golden_max(l, nodes, (i as f64 - 1.0).max(0.0) * step, ((i + 1).min(total)) as f64 * step)?;
            if p.value > best.value {
                best = p;
            }
        }
    }
    Ok(best)
}

/// Redistributes `m` nodes by arclength along the polyline `nodes`, keeping
/// `nodes[keep]` as a node and the endpoints fixed.
fn respace(nodes: &[DiscreteFunction], keep: usize, m: usize) -> Vec<DiscreteFunction> {
    let mut cum = vec![0.0];
    for w in nodes.windows(2) {
        let d = w[1].sub(&w[0]);
        cum.push(cum.last().unwrap() + d.dot(&d).sqrt());
    }
    let total = *cum.last().unwrap();
    let at = |arc: f64| -> DiscreteFunction {
        let j = match cum.iter().position(|&c| c > arc) {
            Some(0) => 0,
            Some(j) => j - 1,
            None => nodes.len() - 2,
        }
        .min(nodes.len() - 2);
        let len = cum[j + 1] - cum[j];
        let s = if len > 0.0 { ((arc - cum[j]) / len).clamp(0.0, 1.0) } else { 0.0 };
        nodes[j].lerp(&nodes[j + 1], s)
    };
    let peak_arc = cum[keep];
    let k = (((m - 1) as f64 * peak_arc / total).round() as usize).clamp(1, m - 2);
    let mut out = Vec::with_capacity(m);
    out.push(nodes[0].clone());
    for i in 1..k {
        out.push(at(peak_arc * i as f64 / k as f64));
    }
    out.push(nodes[keep].clone());
    for i in k + 1..m - 1 {
        out.push(at(peak_arc + (total - peak_arc) * (i - k) as f64 / (m - 1 - k) as f64));
    }
    out.push(nodes[nodes.len() - 1].clone());
    out
}

/// First of: arclength re-spacing that keeps the moved peak; the moved
/// polyline itself (no node was inserted); the moved polyline minus one of
/// its lowest nodes away from the peak. A candidate is taken only if its
/// maximum does not exceed the current one.
fn accept_candidate(
    l: &dyn Lagrangian,
    path: &PathState,
    moved: &[DiscreteFunction],
    moved_energies: &[f64],
    k: usize,
    m: usize,
) -> Result<Option<PathState>> {
    let try_path = |nodes: Vec<DiscreteFunction>, energies: Vec<f64>| -> Result<Option<PathState>> {
        let peak = locate_peak(l, &nodes, &energies)?;
        if peak.value <= path.max_energy {
            debug_assert!(nodes[0] == path.nodes[0] && nodes[m - 1] == path.nodes[m - 1]);
            return Ok(Some(PathState {
                nodes,
                energies,
                max_energy: peak.value,
                peak_position: peak.sigma,
                sweep: path.sweep,
            }));
        }
        Ok(None)
    };

    let spaced = respace(moved, k, m);
    let mut energies = Vec::with_capacity(m);
    energies.push(path.energies[0]);
    for u in &spaced[1..m - 1] {
        energies.push(action(l, u)?);
    }
    energies.push(path.energies[m - 1]);
    if let Some(p) = try_path(spaced, energies)? {
        return Ok(Some(p));
    }
    if moved.len() == m {
        return try_path(moved.to_vec(), moved_energies.to_vec());
    }
    let mut order: Vec<usize> = (1..moved.len() - 1).filter(|&i| i + 1 < k || i > k + 1).collect();
    order.sort_by(|&a, &b| moved_energies[a].total_cmp(&moved_energies[b]));
    for &drop in order.iter().take(3) {
        let mut nodes = moved.to_vec();
        let mut energies = moved_energies.to_vec();
        nodes.remove(drop);
        energies.remove(drop);
        if let Some(p) = try_path(nodes, energies)? {
            return Ok(Some(p));
        }
    }
    Ok(None)
}

fn mean_segment(pre: &Preconditioner, nodes: &[DiscreteFunction]) -> Result<f64> {
    let total = nodes
        .windows(2)
        .map(|w| {
            let d = w[1].sub(&w[0]);
            pre.inner(&d, &d).map(f64::sqrt)
        })
        .sum::<Result<f64>>()?;
    Ok(total / (nodes.len() - 1) as f64)
}

/// Preconditioned descent direction at `nodes[i]` with the local path
/// tangent projected out, capped at `cap` in the `H^1` norm, and its
/// backtracking step length.
fn transversal_step(
    l: &dyn Lagrangian,
    pre: &Preconditioner,
    nodes: &[DiscreteFunction],
    i: usize,
    eval: &ActionEvaluation,
    cap: f64,
) -> Result<Option<(DiscreteFunction, f64)>> {
    let g = eval.gradient();
    let p = &nodes[i];
    let mut d = pre.apply(g)?.scaled(-1.0);
    let tangent = nodes[i + 1].sub(&nodes[i - 1]);
    let tt = pre.inner(&tangent, &tangent)?;
    if tt > 0.0 {
        let transversal = d.add_scaled(&tangent, g.dot(&tangent) / tt);
        if g.dot(&transversal) < 0.0 {
            d = transversal;
        }
    }
    let d_norm = pre.inner(&d, &d)?.sqrt();
    if d_norm > cap {
        d = d.scaled(cap / d_norm);
    }
    let step = backtrack(p, eval.value, g, |a| Ok(p.add_scaled(&d, a)), |x| action(l, x))?;
    Ok(step.map(|s| (d, s.alpha)))
}

pub fn mountain_pass(l: &dyn Lagrangian, e0: &DiscreteFunction, e1: &DiscreteFunction, params: &SolverParams) -> Result<CriticalPoint> {
    mountain_pass_observed(l, e0, e1, params, &mut |_| {})
}

/// Numerical mountain pass. Each sweep locates the maximum of `J` on the
/// piecewise-linear path, makes it a node, moves that node one backtracking
/// step along the preconditioned gradient with the path tangent projected
/// out, and re-spaces the path by arclength. A sweep is kept only if the
/// path maximum does not increase. `observer` sees the path after every
/// accepted sweep.
pub fn mountain_pass_observed(
    l: &dyn Lagrangian,
    e0: &DiscreteFunction,
    e1: &DiscreteFunction,
    params: &SolverParams,
    observer: &mut dyn FnMut(&PathState),
) -> Result<CriticalPoint> {
    e0.check_compatible(e1)?;
    if e0.dim() != l.dim() {
        return Err(Error::DimensionMismatch {
            expected: l.dim(),
            found: e0.dim(),
        });
    }
    if e0.sub(e1).is_zero() {
        return Err(Error::Input("mountain pass endpoints coincide".into()));
    }
    let m = params.path_nodes;
    if m < 3 {
        return Err(Error::Input(format!("path needs at least 3 nodes, got {m}")));
    }
    let pre = Preconditioner::new(*e0.grid());
    let mut path = PathState::straight(l, e0, e1, m)?;
    let endpoint_max = path.energies[0].max(path.energies[m - 1]);
    observer(&path);
    let mut trace: Vec<TracePoint> = Vec::new();

    for sweep in 0..params.max_iter {
        let sigma = path.peak_position;
        let j = (sigma.floor() as usize).min(m - 2);
        let s = sigma - j as f64;
        // make the peak a node of an (m+1)-node polyline with the same image
        let mut nodes = path.nodes.clone();
        let k = if s < 1e-12 {
            j
        } else if s > 1.0 - 1e-12 {
            j + 1
        } else {
            nodes.insert(j + 1, point_at(&path.nodes, sigma));
            j + 1
        };
        if k == 0 || k == nodes.len() - 1 {
            return Err(Error::Domain(
                "path maximum sits at an endpoint: endpoints are not below the barrier".into(),
            ));
        }
        let p = nodes[k].clone();
        let eval = action_gradient(l, &p)?;
        trace.push(TracePoint {
            value: path.max_energy,
            residual: eval.residual_norm,
        });
        if eval.residual_norm <= params.tol {
            if !(eval.value > endpoint_max) {
                return Err(Error::Domain(format!(
                    "critical value {} is not above the endpoint values {endpoint_max}",
                    eval.value
                )));
            }
            return Ok(CriticalPoint {
                u: p,
                value: eval.value,
                residual: eval.residual_norm,
                kind: Kind::MountainPass,
                iterations: sweep,
                trace,
                phi: None,
                interior_margin: None,
                ekeland: Vec::new(),
            });
        }
        if sweep >= STALL_WINDOW && trace[sweep - STALL_WINDOW].value - path.max_energy < STALL_DECREASE {
            return Err(Error::NonConvergence {
                reason: format!("path maximum decreased by less than {STALL_DECREASE:e} over {STALL_WINDOW} sweeps"),
                trace,
            });
        }

        // the peak, and every node in the upper half of the barrier, takes one
        // capped transversal descent step
        let cap = 0.5 * mean_segment(&pre, &path.nodes)?;
        let base = endpoint_max;
        let threshold = base + 0.5 * (path.max_energy - base);
        let mut node_energies = path.energies.clone();
        if nodes.len() > m {
            node_energies.insert(k, eval.value);
        }
        let mut moves: Vec<(usize, DiscreteFunction, f64)> = Vec::new();
        for i in 1..nodes.len() - 1 {
            if i != k && node_energies[i] <= threshold {
                continue;
            }
            let e = if i == k { eval.clone() } else { action_gradient(l, &nodes[i])? };
            if let Some((d, alpha)) = transversal_step(l, &pre, &nodes, i, &e, cap)? {
                moves.push((i, d, alpha));
            }
        }
        if moves.is_empty() {
            path.sweep = sweep + 1;
            continue;
        }
        let mut beta = 1.0;
        for _ in 0..RESPACE_ATTEMPTS {
            let mut moved = nodes.clone();
            let mut moved_energies = node_energies.clone();
            for (i, d, alpha) in &moves {
                let point = nodes[*i].add_scaled(d, beta * alpha);
                let value = action(l, &point)?;
                if value <= node_energies[*i] {
                    moved[*i] = point;
                    moved_energies[*i] = value;
                }
            }
            if let Some(next) = accept_candidate(l, &path, &moved, &moved_energies, k, m)? {
                path = PathState { sweep: sweep + 1, ..next };
                observer(&path);
                break;
            }
            beta *= 0.5;
        }
    }
    Err(Error::NonConvergence {
        reason: format!("no critical point after {} sweeps", params.max_iter),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::Grid;

    #[test]
    fn respace_keeps_endpoints_and_peak() {
        let grid = Grid::new(1.0, 4).unwrap();
        let nodes: Vec<DiscreteFunction> = [0.0, 0.1, 0.5, 0.6, 1.0]
            .iter()
            .map(|&c| DiscreteFunction::constant(grid, &[c]))
            .collect();
        let out = respace(&nodes, 2, 5);
        assert_eq!(out.len(), 5);
        assert_eq!(out[0], nodes[0]);
        assert_eq!(out[4], nodes[4]);
        assert!(out.contains(&nodes[2]));
        let vals: Vec<f64> = out.iter().map(|u| u.values()[0]).collect();
        for w in vals.windows(2) {
            assert!(w[1] > w[0]);
        }
        assert!((vals[1] - 0.25).abs() < 1e-12 && (vals[3] - 0.75).abs() < 1e-12);
    }
}
