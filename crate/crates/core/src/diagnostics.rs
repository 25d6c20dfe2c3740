//! Randomized verification of the norm, modular and energy inequalities the
//! analysis relies on.
//!
//! Every relation is checked in the form `lhs ≤ rhs`. The recorded violation
//! is `lhs − rhs − slack·max(|lhs|, |rhs|)`, and a trial fails when it is
//! positive, so a report without failures has `worst_violation ≤ 0`.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::functionals::{DoublePhase, Sample};
use crate::mesh::{DiscreteFunction, Mesh};
use crate::modular::{holder_bound, luxemburg_norm, modular, ScalarField};
use crate::random::{random_smooth, stream_rng};
use crate::solver::{estimate_embedding_eigenvalue, SolverOptions};

/// Relative slack of the modular and norm relations.
pub const MODULAR_SLACK: f64 = 1e-9;
/// Relative slack of the energy inequalities.
pub const CHAIN_SLACK: f64 = 1e-6;
/// Central-difference step of [`check_gradients`].
pub const FD_STEP: f64 = 1e-6;
/// Per-component relative tolerance of [`check_gradients`].
pub const FD_TOLERANCE: f64 = 1e-5;
/// Components below this magnitude are compared on an absolute scale.
pub const FD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureWitness {
    pub input: String,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub check_name: String,
    pub trials: usize,
    pub failures: usize,
    pub worst_violation: f64,
    pub details: Vec<FailureWitness>,
}

impl CheckReport {
    pub fn new(check_name: impl Into<String>) -> Self {
        CheckReport { check_name: check_name.into(), trials: 0, failures: 0, worst_violation: 0.0, details: Vec::new() }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    /// Record `lhs ≤ rhs` with relative `slack`.
    pub fn record(&mut self, input: impl FnOnce() -> String, lhs: f64, rhs: f64, slack: f64) {
        let violation = lhs - rhs - slack * lhs.abs().max(rhs.abs());
        self.push(violation, || FailureWitness { input: input(), lhs, rhs });
    }

    fn push(&mut self, violation: f64, witness: impl FnOnce() -> FailureWitness) {
        // NaN counts as a failure.
        let failed = !(violation <= 0.0);
        let v = if violation.is_nan() { f64::INFINITY } else { violation };
        self.worst_violation = if self.trials == 0 { v } else { self.worst_violation.max(v) };
        self.trials += 1;
        if failed {
            self.failures += 1;
            self.details.push(witness());
        }
    }

    /// Append the trials of `other`, in order.
    pub fn merge(&mut self, other: CheckReport) {
        if other.trials == 0 {
            return;
        }
        self.worst_violation =
            if self.trials == 0 { other.worst_violation } else { self.worst_violation.max(other.worst_violation) };
        self.trials += other.trials;
        self.failures += other.failures;
        self.details.extend(other.details);
    }

    fn merged(name: &str, parts: impl IntoIterator<Item = CheckReport>) -> CheckReport {
        let mut r = CheckReport::new(name);
        for p in parts {
            r.merge(p);
        }
        r
    }
}

/// Fixed-width summary table, one line per report.
pub fn summary_table(reports: &[CheckReport]) -> String {
    let mut out = format!("{:<32} {:>8} {:>8} {:>14}  status\n", "check", "trials", "failures", "worst");
    for r in reports {
        let _ = writeln!(
            out,
            "{:<32} {:>8} {:>8} {:>14.6e}  {}",
            r.check_name,
            r.trials,
            r.failures,
            r.worst_violation,
            if r.passed() { "pass" } else { "FAIL" }
        );
    }
    out
}

/// Smooth random field at the quadrature points: a trigonometric
/// polynomial on the bounding box, not tied to the boundary.
fn random_field<R: Rng>(mesh: &Mesh, rng: &mut R) -> ScalarField {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for n in mesh.nodes() {
        for k in 0..2 {
            lo[k] = lo[k].min(n[k]);
            hi[k] = hi[k].max(n[k]);
        }
    }
    let len = [hi[0] - lo[0], (hi[1] - lo[1]).max(1.0)];
    let terms: Vec<[f64; 4]> = (0..5)
        .map(|_| {
            [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.0..6.0),
                rng.gen_range(0.0..6.0),
                rng.gen_range(0.0..std::f64::consts::TAU),
            ]
        })
        .collect();
    let offset = rng.gen_range(-0.5..0.5);
    ScalarField::from_fn(mesh, |x| {
        let s = (x[0] - lo[0]) / len[0];
        let t = (x[1] - lo[1]) / len[1];
        offset + terms.iter().map(|c| c[0] * (c[1] * s + c[2] * t + c[3]).cos()).sum::<f64>()
    })
    .expect("trigonometric field is finite")
}

/// Sandwich relations between modular and Luxemburg norm on both sides of
/// norm 1, the normalization `ρ(f/|f|) = 1`, the Hölder bound, and the
/// sequence test `f/n → 0` in modular and in norm together.
pub fn check_modular_norm_relations(n_trials: usize, mesh: &Mesh, p: &ExponentField, rng_seed: u64) -> CheckReport {
    let (pmin, pmax) = p.extrema();
    let trials: Vec<[CheckReport; 3]> = (0..n_trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = stream_rng(rng_seed, trial as u64);
            let mut sandwich = CheckReport::new("sandwich");
            let mut normalization = CheckReport::new("normalization");
            let mut holder = CheckReport::new("holder");

            let f = random_field(mesh, &mut rng);
            let g = random_field(mesh, &mut rng);
            let Ok(base) = luxemburg_norm(mesh, &f, p) else {
                sandwich.push(f64::INFINITY, || FailureWitness {
                    input: format!("trial {trial}: norm evaluation failed"),
                    lhs: f64::NAN,
                    rhs: f64::NAN,
                });
                return [sandwich, normalization, holder];
            };
            // Alternate sides of the unit sphere.
            let exponent: f64 = rng.gen_range(0.01..4.0) * if trial % 2 == 0 { 1.0 } else { -1.0 };
            let target = exponent.exp();
            let f = if base > 0.0 { f.scaled(target / base) } else { f };
            let summary = || format!("trial {trial}: target norm {target:.6e}");

            match (luxemburg_norm(mesh, &f, p), modular(mesh, &f, p)) {
                (Ok(n), Ok(rho)) => {
                    let (lo, hi) = if n > 1.0 { (n.powf(pmin), n.powf(pmax)) } else { (n.powf(pmax), n.powf(pmin)) };
                    sandwich.record(summary, lo, rho, MODULAR_SLACK);
                    sandwich.record(summary, rho, hi, MODULAR_SLACK);
                    let rho1 = if n > 0.0 { modular(mesh, &f.scaled(1.0 / n), p).unwrap_or(f64::NAN) } else { 1.0 };
                    normalization.record(summary, (rho1 - 1.0).abs(), MODULAR_SLACK, 0.0);
                }
                _ => sandwich.push(f64::INFINITY, || FailureWitness { input: summary(), lhs: f64::NAN, rhs: f64::NAN }),
            }

            match holder_bound(mesh, &f, &g, p) {
                Ok(h) => holder.record(summary, h.lhs, h.rhs, MODULAR_SLACK),
                Err(_) => holder.push(f64::INFINITY, || FailureWitness { input: summary(), lhs: f64::NAN, rhs: f64::NAN }),
            }
            [sandwich, normalization, holder]
        })
        .collect();

    let mut report = CheckReport::new("modular_norm_relations");
    for parts in trials {
        for part in parts {
            report.merge(part);
        }
    }
    report.merge(sequence_check(mesh, p, rng_seed));
    report
}

/// `fₙ = g/n`: modular and norm both decrease strictly and tend to zero.
fn sequence_check(mesh: &Mesh, p: &ExponentField, rng_seed: u64) -> CheckReport {
    let mut report = CheckReport::new("sequence");
    let g = random_field(mesh, &mut stream_rng(rng_seed, u64::MAX));
    let values: Vec<(f64, f64)> = (1..=64)
        .map(|n| {
            let f = g.scaled(1.0 / n as f64);
            (modular(mesh, &f, p).unwrap_or(f64::NAN), luxemburg_norm(mesh, &f, p).unwrap_or(f64::NAN))
        })
        .collect();
    // Strict decrease: each later value is below the earlier one.
    let worst_step = values
        .windows(2)
        .map(|w| (w[1].0 - w[0].0).max(w[1].1 - w[0].1))
        .fold(f64::NEG_INFINITY, f64::max);
    report.push(worst_step, || FailureWitness {
        input: "f_n = g/n, n = 1..64: consecutive differences".into(),
        lhs: worst_step,
        rhs: 0.0,
    });
    let (first, last) = (values[0], values[values.len() - 1]);
    // ρ(g/64) ≤ ρ(g)/64^{p⁻} and |g/64| = |g|/64.
    report.record(|| "f_64 modular decay".into(), last.0, first.0 / 64f64.powf(p.min()), MODULAR_SLACK);
    report.record(|| "f_64 norm decay".into(), last.1, first.1 / 64.0, MODULAR_SLACK);
    report
}

/// Energy inequalities for one problem, with the embedding constants
/// estimated once.
pub struct ChainChecker {
    problem: DoublePhase,
    q_min: f64,
    q_max: f64,
    mu_hat: f64,
}

impl ChainChecker {
    /// `μ̂ = min(λ_{q⁺}, λ_{q⁻})`, the smaller discrete constant of
    /// `∫|∇u|^r ≥ λ_r ∫|u|^r` at the two extreme exponents of `q`.
    pub fn new(problem: DoublePhase, opts: &SolverOptions) -> Result<Self> {
        let (q_min, q_max) = problem.q().extrema();
        let mesh = Arc::clone(problem.mesh());
        let mut mu_hat = estimate_embedding_eigenvalue(q_max, &mesh, opts)?;
        if q_min != q_max {
            mu_hat = mu_hat.min(estimate_embedding_eigenvalue(q_min, &mesh, opts)?);
        }
        Ok(ChainChecker { problem, q_min, q_max, mu_hat })
    }

    pub fn mu_hat(&self) -> f64 {
        self.mu_hat
    }

    pub fn problem(&self) -> &DoublePhase {
        &self.problem
    }

    /// Four trials for `u`:
    /// (i) `|∇u|^{q⁺} + |∇u|^{q⁻} ≤ 2(|∇u|^{p₁} + |∇u|^{p₂})` at every
    /// quadrature point, (ii) `I₁(u) ≤ ∫|u|^{q⁺} + |u|^{q⁻}`,
    /// (iii) `J₁(u) ≤ p₁⁺ J(u)`, (iv) `(μ̂/2) I₁(u) ≤ J₁(u)`.
    pub fn check(&self, u: &DiscreteFunction, label: &str) -> Result<CheckReport> {
        let p = &self.problem;
        let e = p.eval_energies(u)?;
        let mesh = p.mesh();
        let mut report = CheckReport::new("inequality_chain");

        let grads = u.gradient_norms_at_quad();
        let (mut worst, mut at) = (f64::NEG_INFINITY, (0.0, 0.0, 0));
        for (k, ((&a, &e1), &e2)) in grads.iter().zip(p.p1().values()).zip(p.p2().values()).enumerate() {
            let lhs = a.powf(self.q_max) + a.powf(self.q_min);
            let rhs = 2.0 * (a.powf(e1) + a.powf(e2));
            let v = lhs - rhs - CHAIN_SLACK * lhs.max(rhs);
            if v > worst {
                (worst, at) = (v, (lhs, rhs, k));
            }
        }
        if grads.is_empty() {
            worst = 0.0;
        }
        report.push(worst, || FailureWitness {
            input: format!("{label}: pointwise gradient bound at quadrature point {}", at.2),
            lhs: at.0,
            rhs: at.1,
        });

        let vals = u.values_at_quad();
        let both: Vec<f64> = vals.iter().map(|v| v.abs().powf(self.q_max) + v.abs().powf(self.q_min)).collect();
        let sum = mesh.integrate(&both)?;
        report.record(|| format!("{label}: I1 vs integral of |u|^q+ + |u|^q-"), e.i1, sum, CHAIN_SLACK);
        report.record(|| format!("{label}: J1 vs p1+ J"), e.j1, p.p1().max() * e.j, CHAIN_SLACK);
        report.record(|| format!("{label}: (mu/2) I1 vs J1, mu = {}", self.mu_hat), 0.5 * self.mu_hat * e.i1, e.j1, CHAIN_SLACK);
        Ok(report)
    }

    /// [`ChainChecker::check`] on `n_trials` random smooth functions.
    pub fn check_random(&self, n_trials: usize, rng_seed: u64) -> CheckReport {
        let mesh = self.problem.mesh();
        let parts: Vec<CheckReport> = (0..n_trials)
            .into_par_iter()
            .map(|trial| {
                let mut rng = stream_rng(rng_seed, trial as u64);
                let amplitude = 10f64.powf(rng.gen_range(-2.0..2.0));
                let u = random_smooth(mesh, &mut rng, 4).scaled(amplitude);
                self.check(&u, &format!("trial {trial}, amplitude {amplitude:.4e}")).expect("same mesh")
            })
            .collect();
        CheckReport::merged("inequality_chain", parts)
    }
}

/// Energy inequalities for a single `u`, estimating `μ̂` with default
/// solver options.
pub fn check_inequality_chain(
    u: &DiscreteFunction,
    p1: &ExponentField,
    p2: &ExponentField,
    q: &ExponentField,
) -> Result<CheckReport> {
    let problem = DoublePhase::new(Arc::clone(u.mesh()), p1.clone(), p2.clone(), q.clone())?;
    ChainChecker::new(problem, &SolverOptions::default())?.check(u, "u")
}

/// `(t, J(tu)/I(tu))` for every `t` in the grid.
pub fn ray_limit_profile(
    u: &DiscreteFunction,
    t_grid: &[f64],
    p1: &ExponentField,
    p2: &ExponentField,
    q: &ExponentField,
) -> Result<Vec<(f64, f64)>> {
    if u.is_zero() {
        return Err(Error::Argument("ray profile needs a nonzero function".into()));
    }
    if t_grid.is_empty() || t_grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::Argument("t grid must be nonempty and positive".into()));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument("t grid must be strictly ascending".into()));
    }
    let problem = DoublePhase::new(Arc::clone(u.mesh()), p1.clone(), p2.clone(), q.clone())?;
    t_grid
        .iter()
        .map(|&t| Ok((t, problem.eval_energies(&u.scaled(t))?.rayleigh_ji.value())))
        .collect()
}

/// Both ends of a ray profile exceed `factor` times the value at `t = 1`.
pub fn ray_blows_up(profile: &[(f64, f64)], at_one: f64, factor: f64) -> bool {
    match (profile.first(), profile.last()) {
        (Some(a), Some(b)) => a.1 > factor * at_one && b.1 > factor * at_one,
        _ => false,
    }
}

/// Central differences of `J` and `I` along every free nodal coordinate,
/// compared with the assembled gradients.
///
/// The difference quotient is the five-point central stencil at step
/// [`FD_STEP`]. Its error still grows like `(h/(a·hₘ))⁴` where an element
/// gradient `a` is tiny on a fine mesh of size `hₘ` and an exponent is below
/// 3, because `|a|^p` is not smooth at `a = 0`. Near such points the
/// difference quotient, not the gradient, is the inaccurate side.
pub fn check_gradients(
    n_trials: usize,
    mesh: &Arc<Mesh>,
    p1: &ExponentField,
    p2: &ExponentField,
    q: &ExponentField,
    rng_seed: u64,
) -> Result<CheckReport> {
    let problem = DoublePhase::new(Arc::clone(mesh), p1.clone(), p2.clone(), q.clone())?;
    let parts: Vec<CheckReport> = (0..n_trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = stream_rng(rng_seed, trial as u64);
            let u = random_smooth(mesh, &mut rng, 4);
            gradient_trial(&problem, &u, &format!("trial {trial}"))
        })
        .collect();
    Ok(CheckReport::merged("gradients", parts))
}

/// One trial per functional; the trial fails if any component misses.
pub(crate) fn gradient_trial(problem: &DoublePhase, u: &DiscreteFunction, label: &str) -> CheckReport {
    let mesh = problem.mesh();
    let x = Sample::new(mesh, u.values());
    let mut report = CheckReport::new("gradients");
    for (name, f, g) in [
        ("J", problem.j_functional(), problem.grad_j(u).expect("same mesh")),
        ("I", problem.i_functional(), problem.grad_i(u).expect("same mesh")),
    ] {
        let mut worst = (f64::NEG_INFINITY, 0.0, 0.0, 0);
        let mut dir = vec![0.0; mesh.n_nodes()];
        for &node in mesh.free_nodes() {
            dir[node] = 1.0;
            let d = Sample::new(mesh, &dir);
            dir[node] = 0.0;
            let h = FD_STEP;
            let fd = (8.0 * (f.delta(mesh, &x, &d, h) - f.delta(mesh, &x, &d, -h))
                - (f.delta(mesh, &x, &d, 2.0 * h) - f.delta(mesh, &x, &d, -2.0 * h)))
                / (12.0 * h);
            let exact = g.values()[node];
            let scale = exact.abs().max(fd.abs()).max(FD_FLOOR);
            let v = (fd - exact).abs() - FD_TOLERANCE * scale;
            if !(v <= worst.0) {
                worst = (v, fd, exact, node);
            }
        }
        if mesh.free_nodes().is_empty() {
            worst.0 = 0.0;
        }
        report.push(worst.0, || FailureWitness {
            input: format!("{label}: d{name}/du at node {}", worst.3),
            lhs: worst.1,
            rhs: worst.2,
        });
    }
    report
}
