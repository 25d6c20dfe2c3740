//! Estimation of `λ₁ = inf J/I` and `λ₀ = inf J₁/I₁`, classification of
//! `λ` by minimizing `T_λ`, and `λ` sweeps.
//!
//! Every estimate is a minimum over the finite element space, hence an upper
//! bound for the corresponding continuum infimum.
//!
//! Quotients are minimized by preconditioned limited-memory descent from
//! several starts. Each start is first moved to the scale that minimizes the
//! quotient along its ray; the quotients are not scale invariant unless all
//! exponents coincide, and they blow up at both ends of every ray.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::exponent::{validate_triple, ExponentField, ValidationReport};
use crate::functionals::{DoublePhase, Functional, PowerTerm, Sample, Term};
use crate::linalg::BandedCholesky;
use crate::mesh::{DiscreteFunction, Mesh};
use crate::modular::sobolev_norm;
use crate::optim::{self, DescentParams, Evaluation, Objective, Stop};
use crate::random::{bump, random_smooth, stream_rng};

/// Minimum over the scan of `T` values regarded as indistinguishable from
/// the trivial value `T(0) = 0`.
pub const TRIVIAL_T_TOLERANCE: f64 = 1e-8;

const COLLAPSE_SCALE: f64 = 1e-10;
const DIVERGENCE_SCALE: f64 = 1e10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    /// First trial step of a fresh descent, relative to `max|u|`.
    pub initial_step: f64,
    pub shrink_factor: f64,
    pub sufficient_decrease: f64,
    pub restarts: usize,
    pub rng_seed: u64,
    /// Number of correction pairs kept by the quasi-Newton update.
    pub memory: usize,
    /// Sobolev norm below which a minimizer counts as the zero function.
    pub triviality_threshold: f64,
    /// Admit `p₂ ≤ q ≤ p₁` with equality (e.g. `p₁ ≡ p₂ ≡ q ≡ 2`).
    pub allow_degenerate: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 5000,
            gradient_tolerance: 1e-8,
            initial_step: 0.1,
            shrink_factor: 0.5,
            sufficient_decrease: 1e-4,
            restarts: 8,
            rng_seed: 0,
            memory: 10,
            triviality_threshold: 1e-6,
            allow_degenerate: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Argument(m.to_string()));
        if !(self.gradient_tolerance > 0.0) {
            return bad("gradient_tolerance must be positive");
        }
        if !(self.initial_step > 0.0) {
            return bad("initial_step must be positive");
        }
        if !(self.shrink_factor > 0.0 && self.shrink_factor < 1.0) {
            return bad("shrink_factor must lie in (0, 1)");
        }
        if !(self.sufficient_decrease > 0.0 && self.sufficient_decrease < 1.0) {
            return bad("sufficient_decrease must lie in (0, 1)");
        }
        if self.restarts < 1 {
            return bad("restarts must be at least 1");
        }
        if self.memory < 1 {
            return bad("memory must be at least 1");
        }
        if !(self.triviality_threshold > 0.0) {
            return bad("triviality_threshold must be positive");
        }
        Ok(())
    }

    fn descent(&self) -> DescentParams {
        DescentParams {
            max_iterations: self.max_iterations,
            tolerance: self.gradient_tolerance,
            initial_step: self.initial_step,
            shrink: self.shrink_factor,
            armijo: self.sufficient_decrease,
            memory: self.memory,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuotientKind {
    /// `J/I`, whose infimum is `λ₁`.
    JOverI,
    /// `J₁/I₁`, whose infimum is `λ₀`.
    J1OverI1,
}

fn serialize_function<S: Serializer>(u: &DiscreteFunction, s: S) -> std::result::Result<S::Ok, S::Error> {
    u.values().serialize(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenEstimate {
    pub kind: QuotientKind,
    pub lambda_hat: f64,
    #[serde(rename = "minimizer_nodal_values", serialize_with = "serialize_function")]
    pub minimizer: DiscreteFunction,
    /// `‖N'(u) − λ̂ D'(u)‖` over the free nodes, where `N/D` is the quotient.
    /// For `J/I` this is the weak-form residual at `λ̂`.
    pub residual: f64,
    pub iterations_used: usize,
    pub converged: bool,
    pub restart: usize,
    pub descent_history: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    EigenvalueCertified,
    TrivialOnly,
    Inconclusive,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::EigenvalueCertified => "eigenvalue_certified",
            Classification::TrivialOnly => "trivial_only",
            Classification::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub lambda: f64,
    pub min_t_value: f64,
    pub minimizer_sobolev_norm: f64,
    pub residual: f64,
    pub classification: Classification,
    /// `T_λ` decreased without bound along a descent run.
    pub unbounded_below: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub rows: Vec<ScanRow>,
    pub lambda0_hat: f64,
    pub lambda1_hat: f64,
    pub largest_trivial: Option<f64>,
    pub smallest_certified: Option<f64>,
    pub warnings: Vec<String>,
}

impl ScanReport {
    /// CSV with header `lambda,min_T,norm,residual,classification`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,min_T,norm,residual,classification\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.lambda,
                r.min_t_value,
                r.minimizer_sobolev_norm,
                r.residual,
                r.classification.as_str()
            ));
        }
        out
    }
}

/// Both spectral estimates; `λ̂₀` is warm-started from the `λ̂₁` minimizer.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralBounds {
    pub lambda1: EigenEstimate,
    pub lambda0: EigenEstimate,
}

impl SpectralBounds {
    /// `λ̂₀ ≤ λ̂₁` up to `1e−6·λ̂₀`.
    pub fn ordered(&self) -> bool {
        self.lambda0.lambda_hat <= self.lambda1.lambda_hat + 1e-6 * self.lambda0.lambda_hat
    }
}

struct QuotientObjective<'a> {
    mesh: &'a Mesh,
    num: &'a Functional,
    den: &'a Functional,
    eps: f64,
}

fn scatter(mesh: &Mesh, x: &[f64]) -> Vec<f64> {
    let mut nodal = vec![0.0; mesh.n_nodes()];
    for (&n, &v) in mesh.free_nodes().iter().zip(x) {
        nodal[n] = v;
    }
    nodal
}

fn gather(mesh: &Mesh, nodal: &[f64]) -> Vec<f64> {
    mesh.free_nodes().iter().map(|&n| nodal[n]).collect()
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

impl QuotientObjective<'_> {
    fn parts(&self, x: &[f64]) -> (f64, f64, Vec<f64>, Vec<f64>) {
        let s = Sample::new(self.mesh, &scatter(self.mesh, x));
        let n = self.num.value(self.mesh, &s);
        let d = self.den.value(self.mesh, &s);
        let mut gn = vec![0.0; self.mesh.n_nodes()];
        let mut gd = vec![0.0; self.mesh.n_nodes()];
        self.num.add_gradient(self.mesh, &s, self.eps, 1.0, &mut gn);
        self.den.add_gradient(self.mesh, &s, self.eps, 1.0, &mut gd);
        (n, d, gather(self.mesh, &gn), gather(self.mesh, &gd))
    }

    fn quotient(&self, x: &[f64]) -> f64 {
        let s = Sample::new(self.mesh, &scatter(self.mesh, x));
        let d = self.den.value(self.mesh, &s);
        if d > 0.0 {
            self.num.value(self.mesh, &s) / d
        } else {
            f64::INFINITY
        }
    }
}

impl Objective for QuotientObjective<'_> {
    fn eval(&self, x: &[f64]) -> Evaluation {
        let (n, d, gn, gd) = self.parts(x);
        if !(d > 0.0) {
            return Evaluation { value: f64::INFINITY, gradient: vec![0.0; x.len()], residual: f64::INFINITY };
        }
        let r = n / d;
        let defect: Vec<f64> = gn.iter().zip(&gd).map(|(a, b)| a - r * b).collect();
        let residual = defect.iter().map(|v| v * v).sum::<f64>().sqrt();
        Evaluation { value: r, gradient: defect.into_iter().map(|v| v / d).collect(), residual }
    }

    fn line<'a>(&'a self, x: &'a [f64], dir: &'a [f64]) -> Box<dyn Fn(f64) -> f64 + 'a> {
        let sx = Sample::new(self.mesh, &scatter(self.mesh, x));
        let sd = Sample::new(self.mesh, &scatter(self.mesh, dir));
        let n = self.num.value(self.mesh, &sx);
        let d = self.den.value(self.mesh, &sx);
        Box::new(move |alpha| {
            let dn = self.num.delta(self.mesh, &sx, &sd, alpha);
            let dd = self.den.delta(self.mesh, &sx, &sd, alpha);
            let new_d = d + dd;
            if !(new_d > 0.0) {
                return f64::INFINITY;
            }
            (dn * d - n * dd) / (d * new_d)
        })
    }
}

struct EnergyObjective<'a> {
    mesh: &'a Mesh,
    j: &'a Functional,
    i: &'a Functional,
    lambda: f64,
    eps: f64,
}

impl Objective for EnergyObjective<'_> {
    fn eval(&self, x: &[f64]) -> Evaluation {
        let s = Sample::new(self.mesh, &scatter(self.mesh, x));
        let value = self.j.value(self.mesh, &s) - self.lambda * self.i.value(self.mesh, &s);
        let mut g = vec![0.0; self.mesh.n_nodes()];
        self.j.add_gradient(self.mesh, &s, self.eps, 1.0, &mut g);
        self.i.add_gradient(self.mesh, &s, self.eps, -self.lambda, &mut g);
        let gradient = gather(self.mesh, &g);
        let residual = gradient.iter().map(|v| v * v).sum::<f64>().sqrt();
        Evaluation { value, gradient, residual }
    }

    fn line<'a>(&'a self, x: &'a [f64], dir: &'a [f64]) -> Box<dyn Fn(f64) -> f64 + 'a> {
        let sx = Sample::new(self.mesh, &scatter(self.mesh, x));
        let sd = Sample::new(self.mesh, &scatter(self.mesh, dir));
        Box::new(move |alpha| {
            self.j.delta(self.mesh, &sx, &sd, alpha) - self.lambda * self.i.delta(self.mesh, &sx, &sd, alpha)
        })
    }

    fn stop(&self, x: &[f64], value: f64) -> Option<Stop> {
        let m = max_abs(x);
        if m < COLLAPSE_SCALE && value >= 0.0 {
            Some(Stop::Collapsed)
        } else if m > DIVERGENCE_SCALE || value < -1e15 {
            Some(Stop::Diverged)
        } else {
            None
        }
    }
}

/// Minimize `φ(s) = f(eˢ x)` over `s ∈ [−20, 20]`: coarse grid, then golden
/// section around the best grid point. Returns the scale factor `eˢ`.
fn best_scale(f: impl Fn(f64) -> f64) -> f64 {
    let phi = |s: f64| f(s.exp());
    let base = phi(0.0);
    let mut best = (0.0, base);
    for k in -40..=40 {
        let s = 0.5 * k as f64;
        let v = phi(s);
        if v < best.1 {
            best = (s, v);
        }
    }
    let (mut a, mut b) = (best.0 - 0.5, best.0 + 0.5);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (phi(c), phi(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = phi(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = phi(d);
        }
    }
    let s = 0.5 * (a + b);
    let v = phi(s);
    if v < best.1 {
        best = (s, v);
    }
    // Keep the original scale unless the ray is genuinely non-flat.
    if best.1 < base - 1e-13 * base.abs() {
        best.0.exp()
    } else {
        1.0
    }
}

struct RunOutcome {
    x: Vec<f64>,
    value: f64,
    residual: f64,
    iterations: usize,
    stop: Stop,
    history: Vec<(usize, f64)>,
}

/// Quotient-minimization engine on a fixed mesh.
struct QuotientEngine<'a> {
    mesh: &'a Arc<Mesh>,
    num: &'a Functional,
    den: &'a Functional,
    eps: f64,
    precond: &'a BandedCholesky,
    homogeneous: bool,
    normalizer: &'a ExponentField,
}

impl QuotientEngine<'_> {
    fn objective(&self) -> QuotientObjective<'_> {
        QuotientObjective { mesh: self.mesh, num: self.num, den: self.den, eps: self.eps }
    }

    fn prepare(&self, start: &DiscreteFunction) -> Vec<f64> {
        let norm = sobolev_norm(start, self.normalizer).unwrap_or(1.0);
        let mut x = gather(self.mesh, start.values());
        if norm > 0.0 && norm.is_finite() {
            x.iter_mut().for_each(|v| *v /= norm);
        }
        if !self.homogeneous {
            let obj = self.objective();
            let t = best_scale(|t| {
                let y: Vec<f64> = x.iter().map(|v| v * t).collect();
                obj.quotient(&y)
            });
            x.iter_mut().for_each(|v| *v *= t);
        }
        x
    }

    fn run(&self, start: &DiscreteFunction, opts: &SolverOptions) -> RunOutcome {
        let obj = self.objective();
        let mut x = self.prepare(start);
        let mut iterations = 0;
        let mut history: Vec<(usize, f64)> = Vec::new();
        let mut stop = Stop::MaxIterations;
        // In the homogeneous case the iterate is renormalized after descent.
        // That changes the residual, so descent resumes from the
        // renormalized point when it misses the tolerance.
        for _ in 0..3 {
            let params = DescentParams { max_iterations: opts.max_iterations - iterations, ..opts.descent() };
            let r = optim::minimize(&obj, self.precond, x, &params);
            let offset = history.last().map(|&(_, v)| v - r.history[0].1);
            match offset {
                None => history.extend(r.history.iter().copied()),
                Some(off) => history.extend(r.history[1..].iter().map(|&(k, v)| (k + iterations, v + off))),
            }
            iterations += r.iterations;
            stop = r.stop;
            x = r.x;
            if !self.homogeneous {
                break;
            }
            let u = DiscreteFunction::from_free(self.mesh, &x).expect("finite iterate");
            let norm = sobolev_norm(&u, self.normalizer).unwrap_or(1.0);
            if norm > 0.0 && norm.is_finite() {
                x.iter_mut().for_each(|v| *v /= norm);
            }
            if obj.eval(&x).residual <= opts.gradient_tolerance || iterations >= opts.max_iterations {
                break;
            }
        }
        let ev = obj.eval(&x);
        RunOutcome { value: ev.value, residual: ev.residual, x, iterations, stop, history }
    }

    fn minimize(&self, kind: QuotientKind, starts: &[DiscreteFunction], opts: &SolverOptions) -> EigenEstimate {
        let outcomes: Vec<RunOutcome> = starts.par_iter().map(|s| self.run(s, opts)).collect();
        let (restart, best) = outcomes
            .into_iter()
            .enumerate()
            .min_by(|a, b| a.1.value.total_cmp(&b.1.value).then(a.0.cmp(&b.0)))
            .expect("at least one start");
        let minimizer = DiscreteFunction::from_free(self.mesh, &best.x).expect("finite minimizer");
        EigenEstimate {
            kind,
            lambda_hat: best.value,
            minimizer,
            residual: best.residual,
            iterations_used: best.iterations,
            converged: best.residual <= opts.gradient_tolerance,
            restart,
            descent_history: best.history,
        }
    }
}

fn initial_guesses(mesh: &Arc<Mesh>, opts: &SolverOptions, stream_base: u64) -> Vec<DiscreteFunction> {
    (0..opts.restarts)
        .map(|r| {
            if r == 0 {
                bump(mesh)
            } else {
                random_smooth(mesh, &mut stream_rng(opts.rng_seed, stream_base + r as u64), 4)
            }
        })
        .collect()
}

fn exponents_coincide(fields: &[&ExponentField]) -> bool {
    let first = fields[0];
    first.is_constant() && fields.iter().all(|f| f.is_constant() && f.min() == first.min())
}

/// Solver for one validated double-phase problem.
pub struct EigenSolver {
    problem: DoublePhase,
    options: SolverOptions,
    validation: ValidationReport,
    precond: BandedCholesky,
}

impl EigenSolver {
    /// Validates the exponents against the mesh dimension; dimension
    /// warnings are kept in [`EigenSolver::validation`].
    pub fn new(problem: DoublePhase, options: SolverOptions) -> Result<Self> {
        options.validate()?;
        let mesh = problem.mesh();
        let validation = validate_triple(mesh, problem.p1(), problem.p2(), problem.q(), mesh.dimension())?;
        if !validation.is_admissible(options.allow_degenerate) {
            let what = if !validation.subcritical_ok {
                "subcritical growth condition q+ < N p2/(N - p2) fails"
            } else {
                "condition 1 < p2(x) < q- <= q+ < p1(x) fails"
            };
            return Err(Error::Validation(what.to_string()));
        }
        let precond = BandedCholesky::stiffness(mesh);
        Ok(EigenSolver { problem, options, validation, precond })
    }

    pub fn problem(&self) -> &DoublePhase {
        &self.problem
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    pub fn validation(&self) -> &ValidationReport {
        &self.validation
    }

    fn homogeneous(&self) -> bool {
        let p = &self.problem;
        exponents_coincide(&[p.p1(), p.p2(), p.q()])
    }

    fn engine(&self, kind: QuotientKind) -> QuotientEngine<'_> {
        let p = &self.problem;
        let (num, den) = match kind {
            QuotientKind::JOverI => (p.j_functional(), p.i_functional()),
            QuotientKind::J1OverI1 => (p.j1_functional(), p.i1_functional()),
        };
        QuotientEngine {
            mesh: p.mesh(),
            num,
            den,
            eps: p.epsilon(),
            precond: &self.precond,
            homogeneous: self.homogeneous(),
            normalizer: p.p1(),
        }
    }

    /// Multi-start minimization of the chosen quotient.
    pub fn minimize_rayleigh(&self, kind: QuotientKind) -> EigenEstimate {
        self.minimize_rayleigh_from(kind, &[])
    }

    /// As [`EigenSolver::minimize_rayleigh`], with extra starting points
    /// tried alongside the random ones.
    pub fn minimize_rayleigh_from(&self, kind: QuotientKind, extra: &[DiscreteFunction]) -> EigenEstimate {
        let stream = match kind {
            QuotientKind::JOverI => 0,
            QuotientKind::J1OverI1 => 1 << 32,
        };
        let mut starts = initial_guesses(self.problem.mesh(), &self.options, stream);
        starts.extend(extra.iter().cloned());
        self.engine(kind).minimize(kind, &starts, &self.options)
    }

    /// `λ̂₁` first, then `λ̂₀` with the `λ̂₁` minimizer as an extra start.
    pub fn spectral_bounds(&self) -> SpectralBounds {
        let lambda1 = self.minimize_rayleigh(QuotientKind::JOverI);
        let lambda0 = self.minimize_rayleigh_from(QuotientKind::J1OverI1, std::slice::from_ref(&lambda1.minimizer));
        SpectralBounds { lambda1, lambda0 }
    }

    /// Global minimization of `T_λ`. When `warm` is a `J/I` estimate with
    /// `λ̂ < λ`, its minimizer, rescaled to the best point on its ray, is
    /// added as a start; `T_λ` is negative there.
    pub fn minimize_t(&self, lambda: f64, warm: Option<&EigenEstimate>) -> Result<(ScanRow, DiscreteFunction)> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Argument(format!("lambda must be positive, got {lambda}")));
        }
        let p = &self.problem;
        let mesh = p.mesh();
        let obj = EnergyObjective {
            mesh,
            j: p.j_functional(),
            i: p.i_functional(),
            lambda,
            eps: p.epsilon(),
        };

        let mut starts: Vec<Vec<f64>> = (0..self.options.restarts)
            .map(|r| {
                let mut rng = stream_rng(self.options.rng_seed, (2 << 32) + r as u64);
                let u = if r == 0 { bump(mesh) } else { random_smooth(mesh, &mut rng, 4) };
                let norm = sobolev_norm(&u, p.p1()).unwrap_or(1.0).max(f64::MIN_POSITIVE);
                // Spread starting sizes over two decades around unit norm.
                let size = 10f64.powf(-1.0 + 2.0 * r as f64 / self.options.restarts.max(2) as f64);
                gather(mesh, u.values()).into_iter().map(|v| v * size / norm).collect()
            })
            .collect();
        if let Some(w) = warm.filter(|w| w.kind == QuotientKind::JOverI && w.lambda_hat < lambda) {
            let x = gather(mesh, w.minimizer.values());
            let t = best_scale(|t| {
                let y: Vec<f64> = x.iter().map(|v| v * t).collect();
                obj.eval(&y).value
            });
            starts.push(x.iter().map(|v| v * t).collect());
        }

        let params = self.options.descent();
        let runs: Vec<RunOutcome> = starts
            .into_par_iter()
            .map(|x0| {
                let r = optim::minimize(&obj, &self.precond, x0, &params);
                let value = obj.eval(&r.x).value;
                RunOutcome {
                    x: r.x,
                    value,
                    residual: r.residual,
                    iterations: r.iterations,
                    stop: r.stop,
                    history: r.history,
                }
            })
            .collect();

        let unbounded_below = runs.iter().any(|r| r.stop == Stop::Diverged);
        // The zero function is always a candidate with T = 0.
        let best = runs
            .into_iter()
            .filter(|r| r.value.is_finite() && r.value < 0.0)
            .min_by(|a, b| a.value.total_cmp(&b.value));

        let (row, minimizer) = match best {
            None => (
                ScanRow {
                    lambda,
                    min_t_value: 0.0,
                    minimizer_sobolev_norm: 0.0,
                    residual: 0.0,
                    classification: Classification::TrivialOnly,
                    unbounded_below,
                },
                DiscreteFunction::zeros(mesh),
            ),
            Some(run) => {
                let u = DiscreteFunction::from_free(mesh, &run.x)?;
                let norm = sobolev_norm(&u, p.p1())?;
                let certified = run.value < 0.0
                    && run.residual <= self.options.gradient_tolerance
                    && norm > self.options.triviality_threshold
                    && !unbounded_below;
                let classification = if certified {
                    Classification::EigenvalueCertified
                } else if run.value >= -TRIVIAL_T_TOLERANCE && !unbounded_below {
                    Classification::TrivialOnly
                } else {
                    Classification::Inconclusive
                };
                let row = ScanRow {
                    lambda,
                    min_t_value: run.value,
                    minimizer_sobolev_norm: norm,
                    residual: run.residual,
                    classification,
                    unbounded_below,
                };
                (row, u)
            }
        };
        Ok((row, minimizer))
    }

    /// One `T_λ` minimization per grid value, bracketed by `[λ̂₀, λ̂₁]`.
    ///
    /// Rows in `[λ̂₀, λ̂₁)` that are not certified are reported as
    /// inconclusive: below `λ̂₁` the trivial function is the global minimizer
    /// of `T_λ`, but whether such `λ` are eigenvalues is not decided by it.
    pub fn scan_lambda(&self, grid: &[f64]) -> Result<ScanReport> {
        check_grid(grid)?;
        let bounds = self.spectral_bounds();
        self.scan_with_bounds(grid, &bounds)
    }

    pub fn scan_with_bounds(&self, grid: &[f64], bounds: &SpectralBounds) -> Result<ScanReport> {
        check_grid(grid)?;
        let l0 = bounds.lambda0.lambda_hat;
        let l1 = bounds.lambda1.lambda_hat;
        let mut rows: Vec<ScanRow> = grid
            .par_iter()
            .map(|&lambda| match self.minimize_t(lambda, Some(&bounds.lambda1)) {
                Ok((row, _)) => row,
                Err(_) => ScanRow {
                    lambda,
                    min_t_value: f64::NAN,
                    minimizer_sobolev_norm: f64::NAN,
                    residual: f64::NAN,
                    classification: Classification::Inconclusive,
                    unbounded_below: false,
                },
            })
            .collect();

        let mut warnings = Vec::new();
        for row in &mut rows {
            if row.classification == Classification::TrivialOnly && row.lambda >= l0 && row.lambda < l1 {
                row.classification = Classification::Inconclusive;
            }
            if row.lambda <= 0.9 * l0 && row.classification != Classification::TrivialOnly {
                warnings.push(format!(
                    "lambda = {} <= 0.9 * lambda0_hat but classified {}",
                    row.lambda,
                    row.classification.as_str()
                ));
            }
            if row.unbounded_below {
                warnings.push(format!("T_lambda unbounded below at lambda = {}", row.lambda));
            }
        }
        let first_certified = rows.iter().position(|r| r.classification == Classification::EigenvalueCertified);
        if let Some(k) = first_certified {
            for r in &rows[k..] {
                if r.classification != Classification::EigenvalueCertified {
                    warnings.push(format!(
                        "certified set not upward closed: lambda = {} is {}",
                        r.lambda,
                        r.classification.as_str()
                    ));
                }
            }
        }
        let largest_trivial = rows
            .iter()
            .filter(|r| r.classification == Classification::TrivialOnly)
            .map(|r| r.lambda)
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
        let smallest_certified = first_certified.map(|k| rows[k].lambda);
        Ok(ScanReport { rows, lambda0_hat: l0, lambda1_hat: l1, largest_trivial, smallest_certified, warnings })
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Argument("lambda grid is empty".into()));
    }
    if grid.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
        return Err(Error::Argument("lambda grid values must be positive".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument("lambda grid must be strictly ascending".into()));
    }
    Ok(())
}

/// Build a solver from exponent fields on `mesh`.
pub fn solver_for(
    mesh: &Arc<Mesh>,
    p1: &ExponentField,
    p2: &ExponentField,
    q: &ExponentField,
    opts: &SolverOptions,
) -> Result<EigenSolver> {
    let problem = DoublePhase::new(Arc::clone(mesh), p1.clone(), p2.clone(), q.clone())?;
    EigenSolver::new(problem, opts.clone())
}

pub fn minimize_rayleigh(
    kind: QuotientKind,
    p1: &ExponentField,
    p2: &ExponentField,
    q: &ExponentField,
    mesh: &Arc<Mesh>,
    opts: &SolverOptions,
) -> Result<EigenEstimate> {
    Ok(solver_for(mesh, p1, p2, q, opts)?.minimize_rayleigh(kind))
}

pub fn minimize_t(
    lambda: f64,
    p1: &ExponentField,
    p2: &ExponentField,
    q: &ExponentField,
    mesh: &Arc<Mesh>,
    opts: &SolverOptions,
) -> Result<(ScanRow, DiscreteFunction)> {
    let solver = solver_for(mesh, p1, p2, q, opts)?;
    let warm = solver.minimize_rayleigh(QuotientKind::JOverI);
    solver.minimize_t(lambda, Some(&warm))
}

pub fn scan_lambda(
    grid: &[f64],
    p1: &ExponentField,
    p2: &ExponentField,
    q: &ExponentField,
    mesh: &Arc<Mesh>,
    opts: &SolverOptions,
) -> Result<ScanReport> {
    check_grid(grid)?;
    solver_for(mesh, p1, p2, q, opts)?.scan_lambda(grid)
}

/// Best constant `λ_r` in `∫|∇u|^r ≥ λ_r ∫|u|^r` on the discrete space.
pub fn estimate_embedding_eigenvalue(r: f64, mesh: &Arc<Mesh>, opts: &SolverOptions) -> Result<f64> {
    Ok(embedding_estimate(r, mesh, opts)?.lambda_hat)
}

/// As [`estimate_embedding_eigenvalue`], returning the full estimate. The
/// `kind` field is reported as `J1OverI1`, the quotient family it belongs to.
pub fn embedding_estimate(r: f64, mesh: &Arc<Mesh>, opts: &SolverOptions) -> Result<EigenEstimate> {
    if !(r > 1.0 && r.is_finite()) {
        return Err(Error::Argument(format!("embedding exponent must exceed 1, got {r}")));
    }
    opts.validate()?;
    let field = ExponentField::constant(r, mesh)?;
    let num = Functional::new(vec![Term::Gradient(PowerTerm::plain(&field))]);
    let den = Functional::new(vec![Term::Value(PowerTerm::plain(&field))]);
    let precond = BandedCholesky::stiffness(mesh);
    let engine = QuotientEngine {
        mesh,
        num: &num,
        den: &den,
        eps: crate::functionals::DEFAULT_EPSILON,
        precond: &precond,
        homogeneous: true,
        normalizer: &field,
    };
    let starts = initial_guesses(mesh, opts, 3 << 32);
    Ok(engine.minimize(QuotientKind::J1OverI1, &starts, opts))
}
