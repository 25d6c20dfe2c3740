use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const DEGENERATE: &str = r#"
domain = "interval"
bounds = [0, "pi"]
resolution = [200]
p1 = "2"
p2 = "2"
q = "2"
degenerate = true
"#;

const NONDEGENERATE: &str = r#"
resolution = [60]
p1 = "3 + 0.2*sin(3*x)"
p2 = "1.5"
q = "2 + 0.1*x"
restarts = 4
"#;

struct Run {
    dir: TempDir,
}

impl Run {
    fn new(config: &str) -> Run {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("run.toml"), config).unwrap();
        fs::create_dir(dir.path().join("out")).unwrap();
        Run { dir }
    }

    fn out(&self) -> PathBuf {
        self.dir.path().join("out")
    }

    fn exec(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_dphase"))
            .args(args)
            .arg("--config")
            .arg(self.dir.path().join("run.toml"))
            .output()
            .unwrap()
    }

    fn run(&self, command: &str) -> Output {
        let out = self.out();
        self.exec(&[command, "--out", out.to_str().unwrap()])
    }

    fn json(&self, name: &str) -> serde_json::Value {
        serde_json::from_slice(&fs::read(self.out().join(name)).unwrap()).unwrap()
    }
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn hash_line(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn degenerate_solve_finds_two() {
    let run = Run::new(DEGENERATE);
    let o = run.run("solve");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let est = run.json("estimates.json");
    for key in ["lambda1", "lambda0"] {
        let v = est[key]["lambda_hat"].as_f64().unwrap();
        assert!((v - 2.0).abs() < 1e-3, "{key} = {v}");
        assert_eq!(est[key]["converged"], true);
    }
    assert_eq!(est["ordered"], true);

    let hash = est["config_hash"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 64);
    for csv in ["minimizer_lambda1.csv", "minimizer_lambda0.csv"] {
        assert_eq!(hash_line(&run.out().join(csv)), format!("# config_hash: {hash}"));
    }
    assert!(fs::read_to_string(run.out().join("summary.txt")).unwrap().contains(&hash));
    let meta = run.json("metadata.json");
    assert_eq!(meta["config_hash"], hash.as_str());
    assert!(meta["timestamp_unix"].as_u64().unwrap() > 0);
    assert!(est.get("timestamp_unix").is_none());
}

#[test]
fn invalid_chain_exits_one() {
    let run = Run::new("p1 = \"2.5\"\np2 = \"1.5\"\nq = \"2.5\"\n");
    let o = run.run("solve");
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("p2(x) < q- <= q+ < p1(x)"), "{}", stderr(&o));
}

#[test]
fn missing_output_directory_exits_one() {
    let run = Run::new(NONDEGENERATE);
    let missing = run.dir.path().join("nowhere");
    let o = run.exec(&["solve", "--out", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nowhere"));
}

#[test]
fn config_errors_exit_one() {
    for (config, needle, commands) in [
        ("epsilon = 0.0\nlambda_grid = [1.0]\n", "epsilon", ["solve", "scan", "validate"].as_slice()),
        ("lambda_grid = [3.0, 2.0, 1.0]\n", "ascending", &["scan"]),
        ("lambda_grid = []\n", "empty", &["scan"]),
        ("p1 = \"3\"\nunknown_key = 1\n", "unknown_key", &["solve", "scan", "validate"]),
        ("p1 = \"3 +\"\nlambda_grid = [1.0]\n", "p1", &["solve", "scan", "validate"]),
    ] {
        let run = Run::new(config);
        for command in commands {
            let o = run.run(command);
            assert_eq!(o.status.code(), Some(1), "{config} / {command}");
            assert!(stderr(&o).contains(needle), "{config} / {command}: {}", stderr(&o));
        }
    }
}

#[test]
fn scan_without_grid_exits_one() {
    let run = Run::new(NONDEGENERATE);
    assert_eq!(run.run("scan").status.code(), Some(1));
}

#[test]
fn missing_config_flag_exits_one() {
    let o = Command::new(env!("CARGO_BIN_EXE_dphase")).arg("solve").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn degenerate_scan_brackets_two() {
    let run = Run::new(&format!("{DEGENERATE}lambda_grid = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0]\n"));
    let o = run.run("scan");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let scan = run.json("scan.json");
    let bracket: Vec<f64> = scan["bracket"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!((bracket[0] - 2.0).abs() < 1e-3 && (bracket[1] - 2.0).abs() < 1e-3);
    assert!(scan["largest_trivial"].as_f64().unwrap() <= 2.0);
    let csv = fs::read_to_string(run.out().join("scan.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash: "));
    assert_eq!(lines.next().unwrap(), "lambda,min_T,norm,residual,classification");
    assert_eq!(lines.count(), 8);
}

#[test]
fn default_config_validates() {
    let run = Run::new("");
    let o = run.run("validate");
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let diag = run.json("diagnostics.json");
    assert_eq!(diag["passed"], true);
    for check in diag["checks"].as_array().unwrap() {
        assert_eq!(check["failures"], 0);
        assert!(check["worst_violation"].as_f64().unwrap() <= 0.0);
    }
}

#[test]
fn seed_changes_details_not_verdict() {
    let run = Run::new("modular_trials = 200\nchain_trials = 50\n");
    let out = run.out();
    let mut hashes = Vec::new();
    for seed in ["1", "2"] {
        let o = run.exec(&["validate", "--seed", seed, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        hashes.push(run.json("diagnostics.json")["config_hash"].clone());
    }
    assert_ne!(hashes[0], hashes[1]);
}

#[test]
fn reports_are_byte_identical_across_runs_and_thread_counts() {
    let run = Run::new(&format!("{NONDEGENERATE}lambda_grid = [5.0, 50.0]\n"));
    let out = run.out();
    let mut seen = Vec::new();
    for threads in ["1", "3"] {
        let o = run.exec(&["scan", "--threads", threads, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        seen.push(fs::read(out.join("scan.json")).unwrap());
        let o = run.exec(&["solve", "--threads", threads, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        seen.push(fs::read(out.join("estimates.json")).unwrap());
    }
    assert_eq!(seen[0], seen[2]);
    assert_eq!(seen[1], seen[3]);
}

#[test]
fn iteration_cap_gives_exit_two() {
    let run = Run::new(&format!("{NONDEGENERATE}max_iterations = 1\n"));
    assert_eq!(run.run("solve").status.code(), Some(2));
}
