//! Run configuration: a flat TOML table with a fixed key set.
//!
//! Every key is optional. Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use dphase_core::expr::Expr;
use dphase_core::{DoublePhase, ExponentField, Mesh, SolverOptions, DEFAULT_EPSILON};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A number, or an expression in constants only such as `"pi/2"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Expression(String),
}

impl Scalar {
    fn resolve(&self, key: &str) -> Result<f64, String> {
        match self {
            Scalar::Number(v) => Ok(*v),
            Scalar::Expression(s) => {
                let e = Expr::parse(s).map_err(|e| format!("key `{key}`: {e}"))?;
                // Constant expressions do not depend on the evaluation point.
                let v = e.eval(0.0, 0.0);
                if v != e.eval(1.0, 1.0) {
                    return Err(format!("key `{key}`: `{s}` must not depend on x or y"));
                }
                Ok(v)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Interval,
    Rectangle,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub domain: Option<DomainKind>,
    /// `[a, b]` or `[x0, x1, y0, y1]`.
    pub bounds: Option<Vec<Scalar>>,
    /// `[n]` or `[nx, ny]`.
    pub resolution: Option<Vec<usize>>,
    pub p1: Option<String>,
    pub p2: Option<String>,
    pub q: Option<String>,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub lambda_grid: Option<Vec<f64>>,
    pub degenerate: Option<bool>,
    pub max_iterations: Option<usize>,
    pub gradient_tolerance: Option<f64>,
    pub initial_step: Option<f64>,
    pub shrink_factor: Option<f64>,
    pub sufficient_decrease: Option<f64>,
    pub restarts: Option<usize>,
    pub memory: Option<usize>,
    pub triviality_threshold: Option<f64>,
    pub modular_trials: Option<usize>,
    pub chain_trials: Option<usize>,
    pub gradient_trials: Option<usize>,
    /// Mesh resolution of the finite-difference gradient check.
    pub gradient_resolution: Option<Vec<usize>>,
    pub ray_trials: Option<usize>,
}

/// Fully resolved configuration. Its canonical JSON form, without the
/// output directory, is what the config hash covers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub domain: DomainKind,
    pub bounds: Vec<f64>,
    pub resolution: Vec<usize>,
    pub p1: String,
    pub p2: String,
    pub q: String,
    pub epsilon: f64,
    pub seed: u64,
    pub lambda_grid: Option<Vec<f64>>,
    pub solver: SolverOptions,
    pub modular_trials: usize,
    pub chain_trials: usize,
    pub gradient_trials: usize,
    pub gradient_resolution: Vec<usize>,
    pub ray_trials: usize,
    #[serde(skip)]
    pub output_dir: PathBuf,
}

pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<RunConfig, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        RunConfig::from_toml(&text, overrides).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn from_toml(text: &str, overrides: &Overrides) -> Result<RunConfig, String> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        RunConfig::resolve(raw, overrides)
    }

    fn resolve(raw: RawConfig, overrides: &Overrides) -> Result<RunConfig, String> {
        let domain = raw.domain.unwrap_or(DomainKind::Interval);
        let dims = match domain {
            DomainKind::Interval => 1,
            DomainKind::Rectangle => 2,
        };
        let bounds = match raw.bounds {
            Some(b) => b.iter().map(|s| s.resolve("bounds")).collect::<Result<Vec<_>, _>>()?,
            None => [0.0, 1.0].repeat(dims),
        };
        if bounds.len() != 2 * dims {
            return Err(format!("key `bounds`: expected {} values", 2 * dims));
        }
        let resolution = raw.resolution.unwrap_or_else(|| vec![if dims == 1 { 100 } else { 16 }; dims]);
        if resolution.len() != dims {
            return Err(format!("key `resolution`: expected {dims} value(s)"));
        }
        if resolution.iter().any(|&n| n < 2) {
            return Err("key `resolution`: every entry must be at least 2".into());
        }
        let gradient_resolution =
            raw.gradient_resolution.unwrap_or_else(|| vec![if dims == 1 { 20 } else { 10 }; dims]);
        if gradient_resolution.len() != dims || gradient_resolution.iter().any(|&n| n < 2) {
            return Err(format!("key `gradient_resolution`: expected {dims} value(s), each at least 2"));
        }
        let epsilon = raw.epsilon.unwrap_or(DEFAULT_EPSILON);
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(format!("key `epsilon`: must be positive, got {epsilon}"));
        }
        if let Some(grid) = &raw.lambda_grid {
            if grid.is_empty() {
                return Err("key `lambda_grid`: must not be empty".into());
            }
            if grid.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
                return Err("key `lambda_grid`: values must be positive".into());
            }
            if grid.windows(2).any(|w| w[1] <= w[0]) {
                return Err("key `lambda_grid`: values must be strictly ascending".into());
            }
        }
        let seed = overrides.seed.or(raw.seed).unwrap_or(0);
        let d = SolverOptions::default();
        let solver = SolverOptions {
            max_iterations: raw.max_iterations.unwrap_or(d.max_iterations),
            gradient_tolerance: raw.gradient_tolerance.unwrap_or(d.gradient_tolerance),
            initial_step: raw.initial_step.unwrap_or(d.initial_step),
            shrink_factor: raw.shrink_factor.unwrap_or(d.shrink_factor),
            sufficient_decrease: raw.sufficient_decrease.unwrap_or(d.sufficient_decrease),
            restarts: raw.restarts.unwrap_or(d.restarts),
            rng_seed: seed,
            memory: raw.memory.unwrap_or(d.memory),
            triviality_threshold: raw.triviality_threshold.unwrap_or(d.triviality_threshold),
            allow_degenerate: raw.degenerate.unwrap_or(false),
        };
        solver.validate().map_err(|e| e.to_string())?;
        Ok(RunConfig {
            domain,
            bounds,
            resolution,
            p1: raw.p1.unwrap_or_else(|| "3".into()),
            p2: raw.p2.unwrap_or_else(|| "1.5".into()),
            q: raw.q.unwrap_or_else(|| "2".into()),
            epsilon,
            seed,
            lambda_grid: raw.lambda_grid,
            solver,
            modular_trials: raw.modular_trials.unwrap_or(1000),
            chain_trials: raw.chain_trials.unwrap_or(200),
            gradient_trials: raw.gradient_trials.unwrap_or(20),
            gradient_resolution,
            ray_trials: raw.ray_trials.unwrap_or(50),
            output_dir: overrides.out.clone().or(raw.output_dir).unwrap_or_else(|| PathBuf::from(".")),
        })
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    fn mesh_at(&self, resolution: &[usize]) -> Result<Arc<Mesh>, String> {
        let b = &self.bounds;
        let mesh = match self.domain {
            DomainKind::Interval => Mesh::interval(b[0], b[1], resolution[0]),
            DomainKind::Rectangle => Mesh::rectangle((b[0], b[1]), (b[2], b[3]), resolution[0], resolution[1]),
        };
        mesh.map(Arc::new).map_err(|e| format!("domain: {e}"))
    }

    pub fn problem(&self) -> Result<DoublePhase, String> {
        self.problem_at(&self.resolution)
    }

    /// The problem on the mesh of the gradient check.
    pub fn gradient_problem(&self) -> Result<DoublePhase, String> {
        self.problem_at(&self.gradient_resolution)
    }

    fn problem_at(&self, resolution: &[usize]) -> Result<DoublePhase, String> {
        let mesh = self.mesh_at(resolution)?;
        let field = |key: &str, src: &str| ExponentField::parse(src, &mesh).map_err(|e| format!("key `{key}`: {e}"));
        let p1 = field("p1", &self.p1)?;
        let p2 = field("p2", &self.p2)?;
        let q = field("q", &self.q)?;
        DoublePhase::new(Arc::clone(&mesh), p1, p2, q)
            .and_then(|p| p.with_epsilon(self.epsilon))
            .map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn none() -> Overrides {
        Overrides { seed: None, out: None }
    }

    #[test]
    fn empty_config_uses_defaults() {
        let c = RunConfig::from_toml("", &none()).unwrap();
        assert_eq!(c.domain, DomainKind::Interval);
        assert_eq!(c.resolution, vec![100]);
        assert_eq!(c.solver, SolverOptions::default());
    }

    #[test]
    fn constant_expressions_in_bounds() {
        let c = RunConfig::from_toml("bounds = [0, \"pi\"]", &none()).unwrap();
        assert!((c.bounds[1] - std::f64::consts::PI).abs() < 1e-15);
        assert!(RunConfig::from_toml("bounds = [0, \"x\"]", &none()).is_err());
    }

    #[test]
    fn rejections() {
        for text in [
            "colour = 1",
            "epsilon = 0.0",
            "resolution = [1]",
            "lambda_grid = []",
            "lambda_grid = [2.0, 1.0]",
            "domain = \"rectangle\"\nbounds = [0, 1]",
            "restarts = 0",
        ] {
            assert!(RunConfig::from_toml(text, &none()).is_err(), "{text}");
        }
        let err = RunConfig::from_toml("p1 = \"3\"\ncolour = 1", &none()).unwrap_err();
        assert!(err.contains("colour") && err.contains("line 2"), "{err}");
    }

    #[test]
    fn hash_tracks_overrides_but_not_output() {
        let a = RunConfig::from_toml("seed = 1", &none()).unwrap();
        let b = RunConfig::from_toml("seed = 1", &Overrides { seed: None, out: Some("elsewhere".into()) }).unwrap();
        let c = RunConfig::from_toml("seed = 1", &Overrides { seed: Some(2), out: None }).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(c.solver.rng_seed, 2);
    }
}
