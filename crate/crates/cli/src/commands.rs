//! The three subcommands. Computation finishes before any file is written.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use dphase_core::diagnostics::{
    check_gradients, check_modular_norm_relations, ray_limit_profile, summary_table, ChainChecker, CheckReport,
};
use dphase_core::random::{random_smooth, stream_rng};
use dphase_core::{
    DiscreteFunction, EigenEstimate, EigenSolver, Error, ScanReport, SpectralBounds, ValidationReport,
};
use serde::Serialize;

use crate::config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_UNRESOLVED: i32 = 2;

/// Exit with code 1 and this message on standard error.
#[derive(Debug)]
pub struct Failure(pub String);

impl From<String> for Failure {
    fn from(s: String) -> Self {
        Failure(s)
    }
}

fn check_output_dir(cfg: &RunConfig) -> Result<(), Failure> {
    let dir = &cfg.output_dir;
    match fs::metadata(dir) {
        Ok(m) if m.is_dir() => Ok(()),
        Ok(_) => Err(Failure(format!("output directory {}: not a directory", dir.display()))),
        Err(e) => Err(Failure(format!("output directory {}: {e}", dir.display()))),
    }
}

fn build_solver(cfg: &RunConfig) -> Result<EigenSolver, Failure> {
    let problem = cfg.problem()?;
    EigenSolver::new(problem, cfg.solver.clone()).map_err(|e| match e {
        Error::Validation(m) => Failure(format!("invalid exponents: {m}")),
        other => Failure(other.to_string()),
    })
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn profile_csv(hash: &str, u: &DiscreteFunction) -> String {
    let mut buf = format!("# config_hash: {hash}\n").into_bytes();
    u.write_csv(&mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

fn write_metadata(cfg: &RunConfig, command: &str, hash: &str) -> Result<(), Failure> {
    #[derive(Serialize)]
    struct Metadata<'a> {
        command: &'a str,
        config_hash: &'a str,
        timestamp_unix: u64,
        threads: usize,
        version: &'a str,
    }
    let meta = Metadata {
        command,
        config_hash: hash,
        timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        threads: rayon::current_num_threads(),
        version: env!("CARGO_PKG_VERSION"),
    };
    write(&cfg.output_dir, "metadata.json", &to_json(&meta))
}

fn warnings_of(v: &ValidationReport) -> Vec<String> {
    v.dimension_warnings.clone()
}

fn describe(e: &EigenEstimate) -> String {
    format!(
        "{:.12} (residual {:.3e}, {} iterations, restart {}, {})",
        e.lambda_hat,
        e.residual,
        e.iterations_used,
        e.restart,
        if e.converged { "converged" } else { "NOT converged" }
    )
}

#[derive(Serialize)]
struct Estimates<'a> {
    config_hash: &'a str,
    lambda1: &'a EigenEstimate,
    lambda0: &'a EigenEstimate,
    ordered: bool,
    warnings: Vec<String>,
}

pub fn solve(cfg: &RunConfig) -> Result<i32, Failure> {
    check_output_dir(cfg)?;
    let hash = cfg.hash();
    let solver = build_solver(cfg)?;
    let b: SpectralBounds = solver.spectral_bounds();
    let ordered = b.ordered();

    let mut summary = format!("config_hash: {hash}\n");
    let _ = writeln!(summary, "lambda1_hat = {}", describe(&b.lambda1));
    let _ = writeln!(summary, "lambda0_hat = {}", describe(&b.lambda0));
    let _ = writeln!(summary, "lambda0_hat <= lambda1_hat: {}", if ordered { "yes" } else { "NO" });
    for w in warnings_of(solver.validation()) {
        let _ = writeln!(summary, "warning: {w}");
    }

    let dir = &cfg.output_dir;
    let estimates = Estimates {
        config_hash: &hash,
        lambda1: &b.lambda1,
        lambda0: &b.lambda0,
        ordered,
        warnings: warnings_of(solver.validation()),
    };
    write(dir, "estimates.json", &to_json(&estimates))?;
    write(dir, "minimizer_lambda1.csv", &profile_csv(&hash, &b.lambda1.minimizer))?;
    write(dir, "minimizer_lambda0.csv", &profile_csv(&hash, &b.lambda0.minimizer))?;
    write(dir, "summary.txt", &summary)?;
    write_metadata(cfg, "solve", &hash)?;
    print!("{summary}");

    Ok(if b.lambda1.converged && b.lambda0.converged { EXIT_OK } else { EXIT_UNRESOLVED })
}

#[derive(Serialize)]
struct ScanOutput<'a> {
    config_hash: &'a str,
    bracket: [f64; 2],
    #[serde(flatten)]
    report: &'a ScanReport,
}

pub fn scan(cfg: &RunConfig) -> Result<i32, Failure> {
    let grid = cfg.lambda_grid.as_ref().ok_or_else(|| Failure("key `lambda_grid` is required for scan".into()))?;
    check_output_dir(cfg)?;
    let hash = cfg.hash();
    let solver = build_solver(cfg)?;
    let bounds = solver.spectral_bounds();
    let report = solver.scan_with_bounds(grid, &bounds).map_err(|e| Failure(e.to_string()))?;

    let mut summary = format!("config_hash: {hash}\n");
    let _ = writeln!(summary, "lambda0_hat = {}", describe(&bounds.lambda0));
    let _ = writeln!(summary, "lambda1_hat = {}", describe(&bounds.lambda1));
    let _ = writeln!(summary, "{:>14} {:>16} {:>12} {:>12}  classification", "lambda", "min_T", "norm", "residual");
    for r in &report.rows {
        let _ = writeln!(
            summary,
            "{:>14.6} {:>16.6e} {:>12.4e} {:>12.3e}  {}{}",
            r.lambda,
            r.min_t_value,
            r.minimizer_sobolev_norm,
            r.residual,
            r.classification.as_str(),
            if r.unbounded_below { " (unbounded below)" } else { "" }
        );
    }
    let fmt = |v: Option<f64>| v.map_or("none".to_string(), |v| v.to_string());
    let _ = writeln!(summary, "largest trivial_only lambda: {}", fmt(report.largest_trivial));
    let _ = writeln!(summary, "smallest eigenvalue_certified lambda: {}", fmt(report.smallest_certified));
    let _ = writeln!(summary, "bracket [lambda0_hat, lambda1_hat] = [{}, {}]", report.lambda0_hat, report.lambda1_hat);
    for w in warnings_of(solver.validation()).iter().chain(&report.warnings) {
        let _ = writeln!(summary, "warning: {w}");
    }

    let dir = &cfg.output_dir;
    write(dir, "scan.csv", &format!("# config_hash: {hash}\n{}", report.to_csv()))?;
    let out = ScanOutput { config_hash: &hash, bracket: [report.lambda0_hat, report.lambda1_hat], report: &report };
    write(dir, "scan.json", &to_json(&out))?;
    write(dir, "summary.txt", &summary)?;
    write_metadata(cfg, "scan", &hash)?;
    print!("{summary}");

    Ok(if bounds.lambda0.converged && bounds.lambda1.converged { EXIT_OK } else { EXIT_UNRESOLVED })
}

#[derive(Serialize)]
struct Diagnostics<'a> {
    config_hash: &'a str,
    validation: &'a ValidationReport,
    embedding_constant: f64,
    checks: &'a [CheckReport],
    passed: bool,
}

pub fn validate(cfg: &RunConfig) -> Result<i32, Failure> {
    check_output_dir(cfg)?;
    let hash = cfg.hash();
    let solver = build_solver(cfg)?;
    let problem = solver.problem();
    let mesh = problem.mesh();
    let seed = cfg.seed;

    let mut checks = Vec::new();
    for (name, p) in [("p1", problem.p1()), ("p2", problem.p2()), ("q", problem.q())] {
        let mut r = check_modular_norm_relations(cfg.modular_trials, mesh, p, seed);
        r.check_name = format!("modular_norm_relations[{name}]");
        checks.push(r);
    }
    let chain = ChainChecker::new(problem.clone(), &cfg.solver).map_err(|e| Failure(e.to_string()))?;
    checks.push(chain.check_random(cfg.chain_trials, seed));
    let coarse = cfg.gradient_problem()?;
    checks.push(
        check_gradients(cfg.gradient_trials, coarse.mesh(), coarse.p1(), coarse.p2(), coarse.q(), seed)
            .map_err(|e| Failure(e.to_string()))?,
    );
    // Both ends of a ray blow up only under the strict exponent chain.
    if solver.validation().chain_ok {
        let mut ray = CheckReport::new("ray_limits");
        for trial in 0..cfg.ray_trials {
            let u = random_smooth(mesh, &mut stream_rng(seed, (1 << 40) + trial as u64), 4);
            let prof = ray_limit_profile(&u, &[1e-3, 1.0, 1e3], problem.p1(), problem.p2(), problem.q())
                .map_err(|e| Failure(e.to_string()))?;
            let label = || format!("trial {trial}: R(1) vs R(t), t in {{1e-3, 1e3}}");
            ray.record(label, prof[1].1, prof[0].1, 0.0);
            ray.record(label, prof[1].1, prof[2].1, 0.0);
        }
        checks.push(ray);
    }
    let passed = checks.iter().all(CheckReport::passed);

    let mut summary = format!("config_hash: {hash}\n");
    summary.push_str(&summary_table(&checks));
    let _ = writeln!(summary, "embedding constant mu_hat = {}", chain.mu_hat());
    for w in warnings_of(solver.validation()) {
        let _ = writeln!(summary, "warning: {w}");
    }
    let _ = writeln!(summary, "{}", if passed { "all checks passed" } else { "FAILURES present" });

    let diag = Diagnostics {
        config_hash: &hash,
        validation: solver.validation(),
        embedding_constant: chain.mu_hat(),
        checks: &checks,
        passed,
    };
    let dir = &cfg.output_dir;
    write(dir, "diagnostics.json", &to_json(&diag))?;
    write(dir, "summary.txt", &summary)?;
    write_metadata(cfg, "validate", &hash)?;
    print!("{summary}");
    Ok(if passed { EXIT_OK } else { EXIT_UNRESOLVED })
}
