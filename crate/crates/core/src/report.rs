//! Structured pass/fail evidence shared by every hypothesis checker.

use std::collections::BTreeMap;

use serde::Serialize;

/// Default slack under which a negative margin still counts as a pass.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

/// Point at which a checker observed its worst margin.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Witness {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    pub x: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<f64>>,
}

impl Witness {
    pub fn point(x: &[f64]) -> Self {
        Witness {
            t: None,
            x: x.to_vec(),
            v: None,
        }
    }

    pub fn tx(t: f64, x: &[f64]) -> Self {
        Witness {
            t: Some(t),
            x: x.to_vec(),
            v: None,
        }
    }

    pub fn txv(t: f64, x: &[f64], v: &[f64]) -> Self {
        Witness {
            t: Some(t),
            x: x.to_vec(),
            v: Some(v.to_vec()),
        }
    }
}

/// Outcome of one hypothesis check.
///
/// `worst_margin` is the smallest observed value of `rhs - lhs` for the
/// inequality being certified (normalized per checker, see its docs). A report
/// fails exactly when that margin drops below `-tolerance`; the witness then
/// records where.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub status: Status,
    pub worst_margin: f64,
    pub tolerance: f64,
    pub witness: Option<Witness>,
    pub samples_used: usize,
    /// Whether this check gates the solvers.
    pub required: bool,
    pub metrics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl CheckReport {
    pub fn new(name: impl Into<String>) -> Self {
        CheckReport {
            name: name.into(),
            status: Status::Inconclusive,
            worst_margin: f64::INFINITY,
            tolerance: DEFAULT_TOLERANCE,
            witness: None,
            samples_used: 0,
            required: true,
            metrics: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn optional(mut self) -> Self {
        self.required = false;
        self
    }

    /// Folds one sample margin into the report, keeping the witness of the worst.
    pub fn observe(&mut self, margin: f64, witness: impl FnOnce() -> Witness) {
        self.samples_used += 1;
        if margin.is_nan() || margin < self.worst_margin {
            self.worst_margin = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
            self.witness = Some(witness());
        }
    }

    pub fn metric(mut self, key: &str, value: f64) -> Self {
        self.metrics.insert(key.to_string(), value);
        self
    }

    pub fn note(mut self, text: impl Into<String>) -> Self {
        self.notes.push(text.into());
        self
    }

    /// Sets the status from the worst margin: fail iff `worst_margin < -tolerance`,
    /// inconclusive when nothing was sampled.
    pub fn finish(mut self) -> Self {
        self.status = if self.samples_used == 0 {
            Status::Inconclusive
        } else if self.worst_margin < -self.tolerance {
            Status::Fail
        } else {
            Status::Pass
        };
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    /// A required report that did not pass blocks the solvers.
    pub fn blocks(&self) -> bool {
        self.required && self.status != Status::Pass
    }
}

/// Normalized margin `(rhs - lhs) / (1 + |lhs| + |rhs|)` for `lhs <= rhs`.
pub fn relative_margin(lhs: f64, rhs: f64) -> f64 {
    (rhs - lhs) / (1.0 + lhs.abs() + rhs.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fail_iff_margin_below_tolerance() {
        let mut r = CheckReport::new("x").with_tolerance(1e-6);
        r.observe(-1e-7, || Witness::point(&[0.0]));
        let r = r.finish();
        assert_eq!(r.status, Status::Pass);

        let mut r = CheckReport::new("x").with_tolerance(1e-6);
        r.observe(0.5, || Witness::point(&[1.0]));
        r.observe(-1e-3, || Witness::point(&[2.0]));
        let r = r.finish();
        assert_eq!(r.status, Status::Fail);
        assert_eq!(r.witness.unwrap().x, vec![2.0]);
        assert_eq!(r.samples_used, 2);
    }

    #[test]
    fn empty_is_inconclusive() {
        let r = CheckReport::new("x").finish();
        assert_eq!(r.status, Status::Inconclusive);
        assert!(r.blocks());
        assert!(!r.optional().blocks());
    }

    #[test]
    fn nan_margin_fails() {
        let mut r = CheckReport::new("x");
        r.observe(f64::NAN, || Witness::point(&[3.0]));
        assert_eq!(r.finish().status, Status::Fail);
    }
}
