//! Comparison with the ball-based coercivity conditions, the `h1`/`h2`
//! tables, and the planar region map `A`, `C`, `B_r0`.

use serde::{Deserialize, Serialize};

use super::Lagrangian;
use crate::error::{Error, Result};
use crate::gfunction::{norm, sphere_directions};
use crate::orlicz::embedding_constant;
use crate::report::{CheckReport, Witness};

/// Candidate points for the legacy witness search inside `B_r0`: radii
/// geometric from `r_min * r0` to `r0`, `n_angles` directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolarScan {
    pub n_radii: usize,
    pub n_angles: usize,
    pub r_min: f64,
}

impl Default for PolarScan {
    fn default() -> Self {
        PolarScan {
            n_radii: 400,
            n_angles: 360,
            r_min: 1e-8,
        }
    }
}

/// Best witness found for one `r0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LegacyRow {
    pub r0: f64,
    /// Largest `a` admitted by the linear budget, `r0 / (2C)`.
    pub a1: f64,
    /// Largest `a` admitted by the power budget, `min{(r0/2C)^2, (r0/2C)^4}`.
    pub a2: f64,
    /// `max_{|x| <= r0} G - V - a1`; positive means a witness.
    pub max_h1: f64,
    pub argmax_h1: Vec<f64>,
    pub max_h2: f64,
    pub argmax_h2: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LegacyReport {
    pub report: CheckReport,
    pub embedding_constant: f64,
    pub rows: Vec<LegacyRow>,
}

/// Searches, for each `r0`, a point `|x| <= r0` with `V(x) < b G(x) - a` for
/// every `b > 1` and every admissible `a`, i.e. `G(x) - V(x) - a_max > 0`.
///
/// The report passes when both budgets have a witness at every `r0`, which
/// means the ball-based coercivity condition cannot hold; its margin is the
/// smallest `max_x (G - V - a_max)` over all `r0` and both budgets.
pub fn check_legacy(l: &dyn Lagrangian, r0_grid: &[f64], scan: &PolarScan) -> Result<LegacyReport> {
    if r0_grid.is_empty() || scan.n_radii == 0 || scan.n_angles == 0 {
        return Err(Error::Input("legacy check needs nonempty r0 and scan grids".into()));
    }
    if r0_grid.iter().any(|r| !(*r > 0.0)) || !(scan.r_min > 0.0 && scan.r_min < 1.0) {
        return Err(Error::Input("radii must be positive and r_min in (0, 1)".into()));
    }
    let c_inf = embedding_constant(l.g_function(), l.interval_length())?;
    let g = l.g_function();
    let dirs = sphere_directions(l.dim(), scan.n_angles);
    let mut report = CheckReport::new("legacy").with_tolerance(0.0).optional();
    let mut rows = Vec::with_capacity(r0_grid.len());
    let ratio = (1.0 / scan.r_min).powf(1.0 / (scan.n_radii.max(2) - 1) as f64);
    for &r0 in r0_grid {
        let s = r0 / (2.0 * c_inf);
        let a1 = s;
        let a2 = (s * s).min(s.powi(4));
        let mut best = (f64::NEG_INFINITY, vec![], f64::NEG_INFINITY, vec![]);
        let mut r = r0 * scan.r_min;
        for _ in 0..scan.n_radii {
            for d in &dirs {
                let x: Vec<f64> = d.iter().map(|c| r * c).collect();
                let gv = g.value(&x) - l.potential(0.0, &x);
                if gv - a1 > best.0 {
                    best.0 = gv - a1;
                    best.1 = x.clone();
                }
                if gv - a2 > best.2 {
                    best.2 = gv - a2;
                    best.3 = x;
                }
            }
            r = (r * ratio).min(r0);
        }
        report.observe(best.0, || Witness::point(&best.1));
        report.observe(best.2, || Witness::point(&best.3));
        rows.push(LegacyRow {
            r0,
            a1,
            a2,
            max_h1: best.0,
            argmax_h1: best.1,
            max_h2: best.2,
            argmax_h2: best.3,
        });
    }
    let missing = rows.iter().filter(|r| r.max_h1 <= 0.0 || r.max_h2 <= 0.0).count();
    let mut report = report
        .metric("embedding_constant", c_inf)
        .metric("r0_without_witness", missing as f64)
        .note("pass = a witness exists for every r0 under both budgets (the ball condition fails everywhere)")
        .finish();
    if missing > 0 {
        report.status = crate::report::Status::Fail;
    }
    Ok(LegacyReport {
        report,
        embedding_constant: c_inf,
        rows,
    })
}

/// Axis-aligned planar box `[x_lo, x_hi] x [y_lo, y_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanBox {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl ScanBox {
    pub fn square(half_width: f64) -> Self {
        ScanBox {
            x_lo: -half_width,
            x_hi: half_width,
            y_lo: -half_width,
            y_hi: half_width,
        }
    }

    fn validate(&self, resolution: usize) -> Result<()> {
        if !(self.x_hi > self.x_lo && self.y_hi > self.y_lo) || resolution < 2 {
            return Err(Error::Input("scan box must be nonempty with resolution >= 2".into()));
        }
        Ok(())
    }

    /// Node `(i, j)` of a `resolution x resolution` lattice including edges.
    fn point(&self, i: usize, j: usize, resolution: usize) -> [f64; 2] {
        let f = |k: usize| k as f64 / (resolution - 1) as f64;
        [
            self.x_lo + (self.x_hi - self.x_lo) * f(i),
            self.y_lo + (self.y_hi - self.y_lo) * f(j),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HWhich {
    H1,
    H2,
}

/// Tabulated `h1 = G - V - |x| / (2C)` or `h2 = G - V - (|x| / (2C))^2`.
#[derive(Debug, Clone, Serialize)]
pub struct HScan {
    pub which: HWhich,
    pub embedding_constant: f64,
    /// Rows `(x1, x2, value)`.
    pub rows: Vec<[f64; 3]>,
    pub max: f64,
    pub argmax: [f64; 2],
}

fn require_planar(l: &dyn Lagrangian) -> Result<()> {
    if l.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: l.dim(),
        });
    }
    Ok(())
}

pub fn scan_h(l: &dyn Lagrangian, which: HWhich, bbox: &ScanBox, resolution: usize) -> Result<HScan> {
    require_planar(l)?;
    bbox.validate(resolution)?;
    let c = embedding_constant(l.g_function(), l.interval_length())?;
    let g = l.g_function();
    let mut rows = Vec::with_capacity(resolution * resolution);
    let mut max = f64::NEG_INFINITY;
    let mut argmax = [0.0; 2];
    for j in 0..resolution {
        for i in 0..resolution {
            let x = bbox.point(i, j, resolution);
            let s = norm(&x) / (2.0 * c);
            let penalty = match which {
                HWhich::H1 => s,
                HWhich::H2 => s * s,
            };
            let h = g.value(&x) - l.potential(0.0, &x) - penalty;
            if h > max {
                max = h;
                argmax = x;
            }
            rows.push([x[0], x[1], h]);
        }
    }
    Ok(HScan {
        which,
        embedding_constant: c,
        rows,
        max,
        argmax,
    })
}

/// Membership flags of one lattice point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionRow {
    pub x: [f64; 2],
    /// `V(x) >= b G(x) - g`.
    pub in_a: bool,
    /// `G(x / (2|I|)) <= rho / 2`.
    pub in_c: bool,
    /// `|x| <= r0` for each requested radius.
    pub in_balls: Vec<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionScan {
    pub radii: Vec<f64>,
    pub rows: Vec<RegionRow>,
    pub c_count: usize,
    /// Points of `C` outside `A`; the containment `C in A` needs zero.
    pub c_not_a: usize,
    /// Smallest `V - (b G - g)` over points of `C`.
    pub worst_c_margin: f64,
    pub worst_c_point: Option<[f64; 2]>,
}

/// Lattice map of `A = { V >= b G - g }`, `C = { G(x / 2|I|) <= rho / 2 }`
/// and the balls `B_r0`, evaluated at `t = 0`.
pub fn region_scan(l: &dyn Lagrangian, bbox: &ScanBox, resolution: usize, radii: &[f64]) -> Result<RegionScan> {
    require_planar(l)?;
    bbox.validate(resolution)?;
    let g = l.g_function();
    let c = l.constants();
    let scale = 2.0 * l.interval_length();
    let env = l.envelope(0.0);
    let mut rows = Vec::with_capacity(resolution * resolution);
    let (mut c_count, mut c_not_a) = (0, 0);
    let mut worst = f64::INFINITY;
    let mut worst_point = None;
    for j in 0..resolution {
        for i in 0..resolution {
            let x = bbox.point(i, j, resolution);
            let margin = l.potential(0.0, &x) - (c.b * g.value(&x) - env);
            let in_a = margin >= 0.0;
            let in_c = g.value(&[x[0] / scale, x[1] / scale]) <= 0.5 * c.rho;
            if in_c {
                c_count += 1;
                if !in_a {
                    c_not_a += 1;
                }
                if margin < worst {
                    worst = margin;
                    worst_point = Some(x);
                }
            }
            let r = norm(&x);
            rows.push(RegionRow {
                x,
                in_a,
                in_c,
                in_balls: radii.iter().map(|r0| r <= *r0).collect(),
            });
        }
    }
    Ok(RegionScan {
        radii: radii.to_vec(),
        rows,
        c_count,
        c_not_a,
        worst_c_margin: worst,
        worst_c_point: worst_point,
    })
}
