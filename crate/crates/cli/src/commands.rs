use std::fmt::Write as _;
use std::time::Instant;

use aelt_core::gfunction::{box_samples, check_delta2, check_g_function, check_nabla2, ray_samples};
use aelt_core::lagrangian::{
    check_f, check_forcing, check_legacy, check_v, region_scan, scan_h, HScan, HWhich, LegacyReport, SampleCloud,
};
use aelt_core::solvers::{boundary_estimate, TwoSolutionReport};
use aelt_core::{two_solution_run, CheckReport, Error, Lagrangian, TracePoint};
use clap::ValueEnum;
use serde::Serialize;

use crate::config::ProblemConfig;
use crate::error::CliError;
use crate::output::{OutDir, Table, VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanTarget {
    H1,
    H2,
    Regions,
    Boundary,
}

/// Everything a run produced, minus wall-clock timing (kept in
/// `timing.json` so identical inputs give identical reports).
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub status: String,
    pub config: ProblemConfig,
    pub checks: Vec<CheckReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub legacy: Option<LegacyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution: Option<TwoSolutionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub files: Vec<String>,
}

impl RunReport {
    fn new(command: &str, config: &ProblemConfig) -> Self {
        RunReport {
            tool: "aelt",
            version: VERSION,
            command: command.to_string(),
            status: "ok".into(),
            config: config.clone(),
            checks: Vec::new(),
            legacy: None,
            solution: None,
            scan: None,
            error: None,
            files: Vec::new(),
        }
    }
}

#[derive(Debug, Default, Serialize)]
struct Timing {
    command: String,
    stages: Vec<(String, f64)>,
}

impl Timing {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.stages.push((stage.to_string(), start.elapsed().as_secs_f64()));
        out
    }
}

/// Writes the echoed config, the report, the summary and the timing file.
fn finish(out: &mut OutDir, mut report: RunReport, summary: &str, timing: &Timing) -> Result<(), CliError> {
    out.write("config.toml", report.config.to_toml()?.as_bytes())?;
    out.write("summary.txt", summary.as_bytes())?;
    out.write_json("timing.json", timing)?;
    report.files = out.written().to_vec();
    report.files.push("report.json".into());
    out.write_json("report.json", &report)?;
    print!("{summary}");
    Ok(())
}

fn status_line(r: &CheckReport) -> String {
    let gate = if r.required { "" } else { " (informative)" };
    let mut s = format!("  {:<10} {:?}{gate}  worst margin {:.3e}", r.name, r.status, r.worst_margin);
    if let Some(w) = r.witness.as_ref().filter(|_| !r.passed()) {
        let _ = write!(s, "  witness {}", serde_json::to_string(w).unwrap_or_default());
    }
    s
}

/// Structural hypotheses gating the solvers, plus the `G`-function checks.
fn hypothesis_checks(cfg: &ProblemConfig, l: &dyn Lagrangian) -> Result<Vec<CheckReport>, CliError> {
    let cloud = SampleCloud::generate(l, &cfg.cloud())?;
    let mut reports = check_f(l, &cloud)?;
    reports.extend(check_v(l, &cloud)?);
    reports.push(check_forcing(l)?);
    let g = l.g_function();
    let t = cfg.checks.growth_threshold;
    let radii: Vec<f64> = (0..12).map(|k| t * 2f64.powi(k)).collect();
    let rays = ray_samples(g.dim(), &radii, cfg.checks.growth_directions);
    reports.push(check_delta2(g, &rays, t)?);
    reports.push(check_nabla2(g, &rays, t)?);
    reports.push(check_g_function(g, &box_samples(g.dim(), 500, cfg.checks.cloud_half_width, cfg.seed))?);
    Ok(reports)
}

pub fn cmd_check(cfg: &ProblemConfig) -> Result<(), CliError> {
    let mut out = OutDir::create(&cfg.output_dir)?;
    let l = cfg.lagrangian();
    let mut timing = Timing {
        command: "check".into(),
        ..Timing::default()
    };
    let mut report = RunReport::new("check", cfg);
    report.checks = timing.time("hypotheses", || hypothesis_checks(cfg, &l))?;
    let legacy = timing.time("legacy", || check_legacy(&l, &cfg.r0_grid(), &cfg.checks.polar))?;

    let mut table = Table::new(&["r0", "a1", "a2", "max_h1", "max_h2", "argmax_h1_x1", "argmax_h1_x2"])
        .meta("seed", cfg.seed)
        .meta("embedding_constant", legacy.embedding_constant)
        .meta("legacy_status", format!("{:?}", legacy.report.status));
    for r in &legacy.rows {
        table.row(&[&r.r0, &r.a1, &r.a2, &r.max_h1, &r.max_h2, &r.argmax_h1[0], &r.argmax_h1[1]]);
    }
    out.write_table("legacy.csv", &table)?;

    let failed: Vec<String> = report.checks.iter().filter(|r| r.blocks()).map(|r| r.name.clone()).collect();
    let mut summary = format!("aelt {VERSION} check: problem {:?}, seed {}\n", cfg.problem.name, cfg.seed);
    for r in report.checks.iter().chain(std::iter::once(&legacy.report)) {
        summary.push_str(&status_line(r));
        summary.push('\n');
    }
    let witnessed = legacy.rows.iter().filter(|r| r.max_h1 > 0.0 && r.max_h2 > 0.0).count();
    let _ = writeln!(
        summary,
        "  legacy: witnesses under both budgets for {witnessed} of {} radii",
        legacy.rows.len()
    );
    if failed.is_empty() {
        summary.push_str("all required checks pass\n");
    } else {
        report.status = "hypotheses-failed".into();
        let _ = writeln!(summary, "required checks failing: {}", failed.join(", "));
    }
    report.legacy = Some(legacy);
    finish(&mut out, report, &summary, &timing)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Hypotheses(failed))
    }
}

fn trace_table(trace: &[TracePoint], what: &str, cfg: &ProblemConfig) -> Table {
    let mut t = Table::new(&["iteration", "value", "residual"]).meta("seed", cfg.seed).meta("trace", what);
    for (i, p) in trace.iter().enumerate() {
        t.row(&[&i, &p.value, &p.residual]);
    }
    t
}

/// Innermost stage and the trace carried by a solver error, if any.
fn unwrap_stage(err: &Error) -> (Option<aelt_core::Stage>, &Error) {
    match err {
        Error::Stage { stage, source } => (Some(*stage), source.as_ref()),
        other => (None, other),
    }
}

pub fn cmd_solve(cfg: &ProblemConfig, force: bool) -> Result<(), CliError> {
    let mut out = OutDir::create(&cfg.output_dir)?;
    let l = cfg.lagrangian();
    let grid = cfg.grid()?;
    let mut timing = Timing {
        command: "solve".into(),
        ..Timing::default()
    };
    let mut report = RunReport::new("solve", cfg);
    report.checks = timing.time("hypotheses", || hypothesis_checks(cfg, &l))?;
    let mut summary = format!(
        "aelt {VERSION} solve: problem {:?}, n = {}, seed {}\n",
        cfg.problem.name, cfg.grid.n, cfg.seed
    );

    let run = timing.time("two-solution run", || two_solution_run(&l, grid, &report.checks, &cfg.solver, force));
    let run = match run {
        Ok(run) => run,
        Err(err) => {
            let (stage, inner) = unwrap_stage(&err);
            if let Error::HypothesesFailed(list) = inner {
                let names: Vec<String> = list.iter().map(|r| r.name.clone()).collect();
                report.status = "hypotheses-failed".into();
                report.error = Some(err.to_string());
                for r in list {
                    summary.push_str(&status_line(r));
                    summary.push('\n');
                }
                let _ = writeln!(summary, "refusing to solve: {} (use --force to override)", names.join(", "));
                finish(&mut out, report, &summary, &timing)?;
                return Err(CliError::Hypotheses(names));
            }
            let trace = match inner {
                Error::NonConvergence { trace, .. } => Some(trace.as_slice()),
                Error::BoundaryTrap { witnesses } => Some(witnesses.as_slice()),
                _ => None,
            };
            let trace_path = match trace {
                Some(t) => Some(out.write_table("failure_trace.csv", &trace_table(t, "failed stage", cfg))?),
                None => None,
            };
            report.status = "solver-failed".into();
            report.error = Some(err.to_string());
            let _ = writeln!(summary, "solver failed: {err}");
            finish(&mut out, report, &summary, &timing)?;
            return Err(CliError::Solver {
                stage,
                message: inner.to_string(),
                trace: trace_path,
            });
        }
    };

    if !run.hypotheses_verified {
        report.status = "hypotheses-unverified".into();
        let _ = writeln!(summary, "hypotheses-unverified: forced past {}", run.failed_checks.join(", "));
    }
    let meta = |what: &str, value: f64| -> Vec<(&str, String)> {
        vec![
            ("tool", format!("aelt {VERSION}")),
            ("seed", cfg.seed.to_string()),
            ("point", what.to_string()),
            ("value", value.to_string()),
        ]
    };
    let (u1, u2) = (&run.mountain_pass, &run.minimizer);
    out.write_function("u1.csv", &meta("mountain pass", u1.value), &u1.u)?;
    out.write_function("u2.csv", &meta("sublevel minimizer", u2.value), &u2.u)?;
    out.write_function("e1.csv", &meta("far endpoint", run.endpoint_value), &run.endpoint)?;
    out.write_table("u1_trace.csv", &trace_table(&u1.trace, "mountain pass: path maximum and peak residual", cfg))?;
    out.write_table("u2_trace.csv", &trace_table(&u2.trace, "sublevel descent", cfg))?;
    let mut ek = Table::new(&["iteration", "value", "residual", "step_norm", "drop", "epsilon"]).meta("seed", cfg.seed);
    for s in &u2.ekeland {
        ek.row(&[&s.iteration, &s.value, &s.residual, &s.step_norm, &s.drop, &s.epsilon]);
    }
    out.write_table("ekeland.csv", &ek)?;

    let _ = writeln!(summary, "  c1 = {:.10e} (residual {:.3e}, {} sweeps)", u1.value, u1.residual, u1.iterations);
    let _ = writeln!(
        summary,
        "  c2 = {:.10e} (residual {:.3e}, Phi = {:.6e} < rho = {})",
        u2.value,
        u2.residual,
        u2.phi.unwrap_or(f64::NAN),
        l.constants().rho
    );
    let _ = writeln!(
        summary,
        "  c1 - c2 = {:.10e}, separation {:.6}, boundary infimum {:.6e}",
        run.certificate.value_gap, run.certificate.separation, run.boundary.infimum
    );
    if let Some(nt) = run.certificate.nontrivial {
        let _ = writeln!(summary, "  unforced: u2 nontrivial = {nt}");
    }
    report.solution = Some(run);
    finish(&mut out, report, &summary, &timing)
}

fn h_table(cfg: &ProblemConfig, scan: &HScan) -> Table {
    let name = match scan.which {
        HWhich::H1 => "h1",
        HWhich::H2 => "h2",
    };
    let mut t = Table::new(&["x1", "x2", name])
        .meta("seed", cfg.seed)
        .meta("embedding_constant", scan.embedding_constant)
        .meta("max", scan.max)
        .meta("argmax", format!("{} {}", scan.argmax[0], scan.argmax[1]));
    for r in &scan.rows {
        t.row(&[&r[0], &r[1], &r[2]]);
    }
    t
}

pub fn cmd_scan(cfg: &ProblemConfig, target: ScanTarget) -> Result<(), CliError> {
    let mut out = OutDir::create(&cfg.output_dir)?;
    let l = cfg.lagrangian();
    let sc = &cfg.scan;
    let mut timing = Timing {
        command: "scan".into(),
        ..Timing::default()
    };
    let mut report = RunReport::new("scan", cfg);
    let mut summary = format!("aelt {VERSION} scan {target:?}: problem {:?}, seed {}\n", cfg.problem.name, cfg.seed);
    match target {
        ScanTarget::H1 | ScanTarget::H2 => {
            let which = if target == ScanTarget::H1 { HWhich::H1 } else { HWhich::H2 };
            let scan = timing.time("scan", || scan_h(&l, which, &sc.bbox, sc.resolution))?;
            let file = if target == ScanTarget::H1 { "h1.csv" } else { "h2.csv" };
            out.write_table(file, &h_table(cfg, &scan))?;
            let _ = writeln!(summary, "  max = {} at {:?}", scan.max, scan.argmax);
            report.scan = Some(serde_json::json!({
                "target": target,
                "max": scan.max,
                "argmax": scan.argmax,
                "embedding_constant": scan.embedding_constant,
            }));
        }
        ScanTarget::Regions => {
            let scan = timing.time("scan", || region_scan(&l, &sc.bbox, sc.resolution, &sc.radii))?;
            let mut header = vec!["x1".to_string(), "x2".into(), "in_a".into(), "in_c".into()];
            header.extend(scan.radii.iter().map(|r| format!("in_ball_{r}")));
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            let mut t = Table::new(&header)
                .meta("seed", cfg.seed)
                .meta("c_count", scan.c_count)
                .meta("c_not_a", scan.c_not_a)
                .meta("worst_c_margin", scan.worst_c_margin);
            for r in &scan.rows {
                let mut cells: Vec<&dyn std::fmt::Display> = vec![&r.x[0], &r.x[1], &r.in_a, &r.in_c];
                cells.extend(r.in_balls.iter().map(|b| b as &dyn std::fmt::Display));
                t.row(&cells);
            }
            out.write_table("regions.csv", &t)?;
            let _ = writeln!(
                summary,
                "  {} points in C, {} outside A, worst margin {:.3e}",
                scan.c_count, scan.c_not_a, scan.worst_c_margin
            );
            report.scan = Some(serde_json::json!({
                "target": target,
                "c_count": scan.c_count,
                "c_not_a": scan.c_not_a,
                "worst_c_margin": scan.worst_c_margin,
                "worst_c_point": scan.worst_c_point,
            }));
        }
        ScanTarget::Boundary => {
            let grid = cfg.grid()?;
            let rho = l.constants().rho;
            let est = timing.time("scan", || boundary_estimate(&l, grid, rho, sc.boundary_directions, cfg.seed))?;
            let positive = est.values.iter().filter(|&&v| v > 0.0).count();
            let mut t = Table::new(&["direction", "value"])
                .meta("seed", cfg.seed)
                .meta("rho", rho)
                .meta("n", grid.n())
                .meta("infimum", est.infimum);
            for (i, v) in est.values.iter().enumerate() {
                t.row(&[&i, v]);
            }
            out.write_table("boundary.csv", &t)?;
            let _ = writeln!(
                summary,
                "  infimum {} over {} directions ({positive} positive)",
                est.infimum,
                est.values.len()
            );
            report.scan = Some(serde_json::json!({
                "target": target,
                "infimum": est.infimum,
                "directions": est.values.len(),
                "positive": positive,
            }));
        }
    }
    finish(&mut out, report, &summary, &timing)
}
