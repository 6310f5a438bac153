//! Run configuration, read from TOML.

use std::path::{Path, PathBuf};

use aelt_core::lagrangian::{CloudSpec, PolarScan, ScanBox};
use aelt_core::{make_grid, Example5, Grid, Lagrangian, SolverParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// Master seed; every sampler derives from it.
    pub seed: u64,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverParams,
    #[serde(default)]
    pub checks: CheckConfig,
    #[serde(default)]
    pub scan: ScanConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemName {
    Example5,
    Example5F0,
    Example5Remark,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub name: ProblemName,
    /// Replaces the constant envelope `g`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<f64>,
    /// Multiplies the forcing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forcing_scale: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub half_length: f64,
    pub n: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { half_length: 1.0, n: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    pub cloud_count: usize,
    pub cloud_half_width: f64,
    /// `|x|` from which the doubling conditions are certified.
    pub growth_threshold: f64,
    pub growth_directions: usize,
    /// Legacy radii `r0 = k * r0_max / r0_count`, `k = 1..=r0_count`.
    pub r0_max: f64,
    pub r0_count: usize,
    pub polar: PolarScan,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            cloud_count: CloudSpec::default().count,
            cloud_half_width: CloudSpec::default().half_width,
            growth_threshold: aelt_core::gfunction::DEFAULT_GROWTH_THRESHOLD,
            growth_directions: 64,
            r0_max: 10.0,
            r0_count: 100,
            polar: PolarScan::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub bbox: ScanBox,
    pub resolution: usize,
    /// Ball radii flagged in the region table.
    pub radii: Vec<f64>,
    pub boundary_directions: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            bbox: ScanBox::square(3.0),
            resolution: 400,
            radii: vec![1.0, 2.0],
            boundary_directions: 200,
        }
    }
}

impl ProblemConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg: ProblemConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.solver.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies command-line overrides and re-validates.
    pub fn with_overrides(mut self, seed: Option<u64>, grid_n: Option<usize>, out: Option<PathBuf>) -> Result<Self, CliError> {
        if let Some(s) = seed {
            self.seed = s;
            self.solver.seed = s;
        }
        if let Some(n) = grid_n {
            self.grid.n = n;
        }
        if let Some(o) = out {
            self.output_dir = o;
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        self.grid()?;
        let s = &self.solver;
        if s.path_nodes < 3 || !(s.tol > 0.0) || s.max_iter == 0 || s.starts == 0 || !(s.lambda_max >= 1.0) {
            return bad("solver: need path_nodes >= 3, tol > 0, max_iter > 0, starts > 0, lambda_max >= 1".into());
        }
        let c = &self.checks;
        if c.cloud_count == 0 || !(c.cloud_half_width > 0.0) || c.r0_count == 0 || !(c.r0_max > 0.0) {
            return bad("checks: counts and widths must be positive".into());
        }
        if self.scan.resolution < 2 || self.scan.boundary_directions == 0 {
            return bad("scan: need resolution >= 2 and at least one boundary direction".into());
        }
        if let Some(g) = self.problem.envelope {
            if !g.is_finite() || g < 0.0 {
                return bad(format!("problem.envelope = {g} must be finite and nonnegative"));
            }
        }
        if let Some(f) = self.problem.forcing_scale {
            if !f.is_finite() {
                return bad("problem.forcing_scale must be finite".into());
            }
        }
        self.lagrangian().constants().validate().map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        make_grid(self.grid.half_length, self.grid.n).map_err(|e| CliError::Config(format!("grid: {e}")))
    }

    pub fn lagrangian(&self) -> Example5 {
        let mut l = match self.problem.name {
            ProblemName::Example5 => Example5::example5(),
            ProblemName::Example5F0 => Example5::example5_f0(),
            ProblemName::Example5Remark => Example5::example5_remark(),
        };
        if let Some(g) = self.problem.envelope {
            l = l.with_envelope(g);
        }
        if let Some(f) = self.problem.forcing_scale {
            l = l.with_forcing_scale(f);
        }
        l
    }

    pub fn cloud(&self) -> CloudSpec {
        CloudSpec {
            count: self.checks.cloud_count,
            half_width: self.checks.cloud_half_width,
            seed: self.seed,
        }
    }

    pub fn r0_grid(&self) -> Vec<f64> {
        let c = &self.checks;
        (1..=c.r0_count).map(|k| c.r0_max * k as f64 / c.r0_count as f64).collect()
    }

    /// Canonical TOML form, loadable with [`ProblemConfig::parse`].
    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = ProblemConfig::parse("seed = 3\n[problem]\nname = \"example5\"\n").unwrap();
        assert_eq!(c.grid, GridConfig::default());
        assert_eq!(c.solver.seed, 3);
        assert_eq!(c.output_dir, PathBuf::from("out"));
    }

    #[test]
    fn seed_is_mandatory() {
        assert!(matches!(
            ProblemConfig::parse("[problem]\nname = \"example5\"\n"),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            "seed = 1\ncolour = 2\n[problem]\nname = \"example5\"\n",
            "seed = 1\n[problem]\nname = \"example5\"\n[solver]\ntolerance = 1e-3\n",
            "seed = 1\n[problem]\nname = \"example6\"\n",
        ] {
            assert!(ProblemConfig::parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for text in [
            "seed = 1\n[problem]\nname = \"example5\"\n[grid]\nn = 7\n",
            "seed = 1\n[problem]\nname = \"example5\"\n[grid]\nhalf_length = 0.25\n",
            "seed = 1\n[problem]\nname = \"example5\"\nenvelope = -1.0\n",
        ] {
            assert!(ProblemConfig::parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn toml_round_trip() {
        let c = ProblemConfig::parse("seed = 9\n[problem]\nname = \"example5_f0\"\nenvelope = 0.01\n").unwrap();
        let back = ProblemConfig::parse(&c.to_toml().unwrap()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn overrides_apply_and_revalidate() {
        let c = ProblemConfig::parse("seed = 9\n[problem]\nname = \"example5\"\n").unwrap();
        let o = c.clone().with_overrides(Some(4), Some(32), None).unwrap();
        assert_eq!((o.seed, o.solver.seed, o.grid.n), (4, 4, 32));
        assert!(c.with_overrides(None, Some(3), None).is_err());
    }
}
