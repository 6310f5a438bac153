//! Modulars, Luxemburg and Sobolev-Orlicz norms, the sup-norm embedding
//! constant, and the classical Orlicz inequalities evaluated on grid functions.

use serde::Serialize;

use crate::discretization::{derivative, DiscreteFunction};
use crate::error::{Error, Result};
use crate::gfunction::{convex_minorant, minorant_inverse, GFunction, DEFAULT_MINORANT_DIRECTIONS, DEFAULT_MINORANT_RADII};
use crate::report::{CheckReport, Witness};

/// Target accuracy `|R(u / lambda) - 1|` of the Luxemburg bisection.
pub const LUXEMBURG_TOL: f64 = 1e-8;
/// Slack used when classifying a norm as exactly one.
pub const AT_ONE_TOL: f64 = 1e-10;

fn check_dim(g: &GFunction, u: &DiscreteFunction) -> Result<()> {
    if u.dim() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            found: u.dim(),
        });
    }
    Ok(())
}

/// `R_G(u) = int_I G(u) dt` by the rectangle rule.
pub fn modular(g: &GFunction, u: &DiscreteFunction) -> Result<f64> {
    check_dim(g, u)?;
    Ok(scaled_modular(g, u, 1.0))
}

/// `R_G(s u)` without allocating.
pub(crate) fn scaled_modular(g: &GFunction, u: &DiscreteFunction, s: f64) -> f64 {
    let mut buf = vec![0.0; u.dim()];
    let mut sum = 0.0;
    for x in u.nodes() {
        for (b, xi) in buf.iter_mut().zip(x) {
            *b = s * xi;
        }
        sum += g.value(&buf);
    }
    u.grid().h() * sum
}

/// Luxemburg-type gauge `inf { lambda > 0 : m(1 / lambda) <= 1 }` for a
/// nondecreasing convex scale-modular `m` with `m(0) = 0`.
///
/// `size` is a magnitude hint (`max_t |u(t)|`) used for the initial bracket
/// `[1e-12, max(1, m(1)) (1 + size)]`; the bracket expands geometrically and
/// the bisection runs in `log lambda`.
pub fn luxemburg_gauge(mut m: impl FnMut(f64) -> Result<f64>, size: f64) -> Result<f64> {
    let mut lo: f64 = 1e-12;
    let mut m_lo = m(1.0 / lo)?;
    let mut guard = 0;
    while m_lo <= 1.0 {
        // function is tiny: shrink until the modular exceeds one
        lo *= 1e-3;
        m_lo = m(1.0 / lo)?;
        guard += 1;
        if guard > 80 || lo == 0.0 {
            return Err(Error::Bracketing("modular stays below 1 at every scale".into()));
        }
    }
    let mut hi = m(1.0)?.max(1.0) * (1.0 + size);
    let mut m_hi = m(1.0 / hi)?;
    guard = 0;
    while m_hi > 1.0 {
        lo = lo.max(hi);
        hi *= 2.0;
        m_hi = m(1.0 / hi)?;
        guard += 1;
        if guard > 2000 || !m_hi.is_finite() {
            return Err(Error::Bracketing("modular never drops below 1".into()));
        }
    }
    if (m_hi - 1.0).abs() <= LUXEMBURG_TOL {
        return Ok(hi);
    }
    let (mut a, mut b) = (lo.ln(), hi.ln());
    for _ in 0..400 {
        let mid = 0.5 * (a + b);
        let lam = mid.exp();
        let v = m(1.0 / lam)?;
        if !v.is_finite() {
            return Err(Error::Bracketing(format!("non-finite modular at lambda = {lam}")));
        }
        if (v - 1.0).abs() <= LUXEMBURG_TOL {
            return Ok(lam);
        }
        if v > 1.0 {
            a = mid;
        } else {
            b = mid;
        }
        if b - a <= 4.0 * f64::EPSILON {
            // modular jumps across 1 at machine resolution
            return Ok(b.exp());
        }
    }
    Err(Error::Bracketing("bisection exhausted its iteration budget".into()))
}

/// `||u||_G = inf { lambda > 0 : R_G(u / lambda) <= 1 }`; zero for `u = 0`.
pub fn luxemburg_norm(g: &GFunction, u: &DiscreteFunction) -> Result<f64> {
    check_dim(g, u)?;
    if u.is_zero() {
        return Ok(0.0);
    }
    luxemburg_gauge(|s| Ok(scaled_modular(g, u, s)), u.max_abs())
}

/// Luxemburg norm with respect to the conjugate `G*`.
pub fn conjugate_luxemburg_norm(g: &GFunction, v: &DiscreteFunction) -> Result<f64> {
    check_dim(g, v)?;
    if v.is_zero() {
        return Ok(0.0);
    }
    let h = v.grid().h();
    let mut buf = vec![0.0; v.dim()];
    luxemburg_gauge(
        |s| {
            let mut sum = 0.0;
            for y in v.nodes() {
                for (b, yi) in buf.iter_mut().zip(y) {
                    *b = s * yi;
                }
                sum += g.conjugate(&buf)?;
            }
            Ok(h * sum)
        },
        v.max_abs(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationSide {
    BelowOne,
    AtOne,
    AboveOne,
}

/// Norm and modular of one function, with the side of 1 the norm lies on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormReport {
    pub luxemburg: f64,
    pub modular: f64,
    pub relation_side: RelationSide,
}

impl NormReport {
    /// `R <= ||u||` when `||u|| <= 1`, `R > ||u||` when `||u|| > 1`,
    /// up to [`AT_ONE_TOL`].
    pub fn relation_holds(&self) -> bool {
        match self.relation_side {
            RelationSide::BelowOne | RelationSide::AtOne => self.modular <= self.luxemburg + AT_ONE_TOL,
            RelationSide::AboveOne => self.modular > self.luxemburg - AT_ONE_TOL,
        }
    }
}

pub fn norm_report(g: &GFunction, u: &DiscreteFunction) -> Result<NormReport> {
    let luxemburg = luxemburg_norm(g, u)?;
    let modular = modular(g, u)?;
    let relation_side = if (luxemburg - 1.0).abs() <= AT_ONE_TOL {
        RelationSide::AtOne
    } else if luxemburg < 1.0 {
        RelationSide::BelowOne
    } else {
        RelationSide::AboveOne
    };
    Ok(NormReport {
        luxemburg,
        modular,
        relation_side,
    })
}

/// `||u||_G + ||u'||_G`.
pub fn sobolev_norm(g: &GFunction, u: &DiscreteFunction) -> Result<f64> {
    Ok(luxemburg_norm(g, u)? + luxemburg_norm(g, &derivative(u))?)
}

/// `C = max{1, |I|} A_G^{-1}(1 / |I|)`, with `A_G` tabulated at the default
/// resolution on `[0, r_max]`, `r_max` doubled from 1 until the table covers
/// `1 / |I|`.
pub fn embedding_constant(g: &GFunction, interval_length: f64) -> Result<f64> {
    embedding_constant_with(g, interval_length, DEFAULT_MINORANT_RADII, DEFAULT_MINORANT_DIRECTIONS)
}

pub fn embedding_constant_with(g: &GFunction, interval_length: f64, n_r: usize, n_sphere: usize) -> Result<f64> {
    if !(interval_length >= 1.0) || !interval_length.is_finite() {
        return Err(Error::Domain(format!("interval length {interval_length} must be at least 1")));
    }
    let target = 1.0 / interval_length;
    let mut r_max = 1.0;
    loop {
        let a = convex_minorant(g, r_max, n_r, n_sphere)?;
        if a.max_value() >= target {
            return Ok(interval_length.max(1.0) * minorant_inverse(&a, target)?);
        }
        r_max *= 2.0;
        if r_max > 1e12 {
            return Err(Error::Bracketing("convex minorant never reaches 1/|I|".into()));
        }
    }
}

/// `2 ||u||_G ||v||_{G*} - int <u, v> dt`; nonnegative by Hoelder.
pub fn holder_gap(g: &GFunction, u: &DiscreteFunction, v: &DiscreteFunction) -> Result<f64> {
    u.check_compatible(v)?;
    check_dim(g, u)?;
    let pairing = u.grid().h() * u.dot(v);
    Ok(2.0 * luxemburg_norm(g, u)? * conjugate_luxemburg_norm(g, v)? - pairing)
}

/// Brezis-Lieb inequality
/// `|G(x+y) - G(x)| <= eps |G(kx) - k G(x)| + 2 G(C_eps y)`,
/// `C_eps = 1 / (eps (k - 1))`, at one point; raw margin, slack `1e-10`.
pub fn brezis_lieb_check(g: &GFunction, x: &[f64], y: &[f64], k: f64, eps: f64) -> Result<CheckReport> {
    let (lhs, rhs) = brezis_lieb_sides(g, x, y, k, eps)?;
    let mut report = CheckReport::new("Brezis-Lieb").with_tolerance(1e-10);
    report.observe(rhs - lhs, || Witness::point(x));
    Ok(report.metric("lhs", lhs).metric("rhs", rhs).metric("k", k).metric("eps", eps).finish())
}

/// Both sides of the Brezis-Lieb inequality.
pub fn brezis_lieb_sides(g: &GFunction, x: &[f64], y: &[f64], k: f64, eps: f64) -> Result<(f64, f64)> {
    if !(k > 1.0) || !(eps > 0.0 && eps < 1.0 / k) {
        return Err(Error::Input(format!("need k > 1 and 0 < eps < 1/k, got k = {k}, eps = {eps}")));
    }
    let c = 1.0 / (eps * (k - 1.0));
    let gx = g.eval(x)?;
    g.eval(y)?;
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
    let kx: Vec<f64> = x.iter().map(|a| k * a).collect();
    let cy: Vec<f64> = y.iter().map(|b| c * b).collect();
    let lhs = (g.value(&xy) - gx).abs();
    let rhs = eps * (g.value(&kx) - k * gx).abs() + 2.0 * g.value(&cy);
    Ok((lhs, rhs))
}

/// `R_G(s u) / ||s u||_G` for each scale; grows without bound as the norm
/// does.
pub fn modular_coercivity_probe(g: &GFunction, u: &DiscreteFunction, scales: &[f64]) -> Result<Vec<f64>> {
    check_dim(g, u)?;
    if u.is_zero() {
        return Err(Error::Input("coercivity probe needs a nonzero function".into()));
    }
    if scales.is_empty() || scales.iter().any(|s| !(*s > 0.0)) || scales.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Input("scales must be positive and strictly increasing".into()));
    }
    let base = luxemburg_norm(g, u)?;
    Ok(scales.iter().map(|&s| scaled_modular(g, u, s) / (s * base)).collect())
}

/// Sample-level estimate of the `p = q = 2` comparison constant:
/// `min_k int |u_k|^2 / ||u_k||_G^2` over nonzero `u_k`.
pub fn l2_to_orlicz_infimum(g: &GFunction, samples: &[DiscreteFunction]) -> Result<f64> {
    let mut inf = f64::INFINITY;
    for u in samples {
        if u.is_zero() {
            continue;
        }
        let l2 = u.grid().h() * u.dot(u);
        let n = luxemburg_norm(g, u)?;
        inf = inf.min(l2 / (n * n));
    }
    if inf.is_infinite() {
        return Err(Error::Input("no nonzero samples".into()));
    }
    Ok(inf)
}
