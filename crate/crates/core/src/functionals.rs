//! The energies `J`, `I`, `J₁`, `I₁`, their derivatives, the energy
//! `T_λ = J − λI`, and the weak-form residual.
//!
//! Energies and derivatives share one quadrature rule, so the discrete
//! gradient is the exact gradient of the discrete energy. Derivatives use the
//! regularized flux `(|a|² + ε²)^{(p−2)/2} a` wherever the exponent is below
//! 2; energies always use the exact `|a|^p`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::mesh::{DiscreteFunction, Mesh};

pub const DEFAULT_EPSILON: f64 = 1e-10;

/// A Rayleigh quotient, or the marker used when its denominator vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quotient {
    Finite(f64),
    Infinite,
}

impl Quotient {
    pub fn new(num: f64, den: f64) -> Self {
        if den > 0.0 {
            Quotient::Finite(num / den)
        } else {
            Quotient::Infinite
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Quotient::Finite(v) => v,
            Quotient::Infinite => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub j: f64,
    pub i: f64,
    pub j1: f64,
    pub i1: f64,
    pub rayleigh_ji: Quotient,
    pub rayleigh_j1i1: Quotient,
}

/// `⟨F'(u), φₙ⟩` for every node `n`; boundary entries are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector {
    values: Vec<f64>,
    free: Vec<usize>,
}

impl GradientVector {
    pub(crate) fn new(mesh: &Mesh, mut values: Vec<f64>) -> Self {
        for &b in mesh.boundary_nodes() {
            values[b] = 0.0;
        }
        GradientVector { values, free: mesh.free_nodes().to_vec() }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entries at the free nodes, in [`Mesh::free_nodes`] order.
    pub fn interior(&self) -> Vec<f64> {
        self.free.iter().map(|&n| self.values[n]).collect()
    }

    /// Euclidean norm over the free nodes.
    pub fn norm(&self) -> f64 {
        self.free.iter().map(|&n| self.values[n] * self.values[n]).sum::<f64>().sqrt()
    }

    /// `⟨F'(u), v⟩`.
    pub fn pair(&self, v: &DiscreteFunction) -> f64 {
        self.values.iter().zip(v.values()).map(|(a, b)| a * b).sum()
    }

    pub fn axpy(&self, alpha: f64, other: &GradientVector) -> GradientVector {
        GradientVector {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + alpha * b).collect(),
            free: self.free.clone(),
        }
    }
}

/// Element gradients and quadrature-point values of one nodal vector.
pub(crate) struct Sample {
    grads: Vec<[f64; 2]>,
    vals: Vec<f64>,
}

impl Sample {
    pub(crate) fn new(mesh: &Mesh, nodal: &[f64]) -> Self {
        Sample { grads: mesh.element_gradients(nodal), vals: mesh.values_at_quad(nodal) }
    }
}

/// Per-quadrature-point data of one power term `∫ c(x) |·|^{p(x)}`.
/// `dcoef` is the derivative coefficient `c(x) p(x)`, stored separately so
/// that `c = 1/p` gives an exactly unit flux coefficient.
#[derive(Debug, Clone)]
pub(crate) struct PowerTerm {
    exps: Vec<f64>,
    coef: Vec<f64>,
    dcoef: Vec<f64>,
}

impl PowerTerm {
    /// `∫ |·|^p / p`.
    pub(crate) fn normalized(p: &ExponentField) -> Self {
        let exps = p.values().to_vec();
        let coef = exps.iter().map(|e| 1.0 / e).collect();
        PowerTerm { dcoef: vec![1.0; exps.len()], coef, exps }
    }

    /// `∫ |·|^p`.
    pub(crate) fn plain(p: &ExponentField) -> Self {
        let exps = p.values().to_vec();
        PowerTerm { coef: vec![1.0; exps.len()], dcoef: exps.clone(), exps }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Term {
    /// Applied to `|∇u|`.
    Gradient(PowerTerm),
    /// Applied to `|u|`.
    Value(PowerTerm),
}

/// `|b|^p − |a|^p` from `a = |old|`, `b = |new|` and an accurately computed
/// `b − a`, without cancellation when the two are close.
#[inline]
fn pow_diff(a: f64, b: f64, diff: f64, p: f64) -> f64 {
    if a == 0.0 {
        b.powf(p)
    } else if b == 0.0 {
        -a.powf(p)
    } else {
        a.powf(p) * (p * (diff / a).ln_1p()).exp_m1()
    }
}

#[inline]
fn flux_factor(a2: f64, p: f64, eps: f64) -> f64 {
    if p < 2.0 {
        (a2 + eps * eps).powf(0.5 * (p - 2.0))
    } else {
        a2.powf(0.5 * (p - 2.0))
    }
}

/// A sum of power terms, evaluated on nodal vectors.
#[derive(Debug, Clone)]
pub(crate) struct Functional {
    terms: Vec<Term>,
}

impl Functional {
    pub(crate) fn new(terms: Vec<Term>) -> Self {
        Functional { terms }
    }

    pub(crate) fn value(&self, mesh: &Mesh, s: &Sample) -> f64 {
        let w = mesh.quad_weights();
        let k = mesh.qp_per_element();
        let mut total = 0.0;
        for term in &self.terms {
            match term {
                Term::Gradient(t) => {
                    for (e, g) in s.grads.iter().enumerate() {
                        let a = g[0].hypot(g[1]);
                        if a == 0.0 {
                            continue;
                        }
                        for qi in e * k..(e + 1) * k {
                            total += w[qi] * t.coef[qi] * a.powf(t.exps[qi]);
                        }
                    }
                }
                Term::Value(t) => {
                    for (qi, v) in s.vals.iter().enumerate() {
                        if *v != 0.0 {
                            total += w[qi] * t.coef[qi] * v.abs().powf(t.exps[qi]);
                        }
                    }
                }
            }
        }
        total
    }

    /// Adds `scale · ⟨F'(u), φₙ⟩` into `out[n]` for every node.
    pub(crate) fn add_gradient(&self, mesh: &Mesh, s: &Sample, eps: f64, scale: f64, out: &mut [f64]) {
        let w = mesh.quad_weights();
        let k = mesh.qp_per_element();
        let bary = mesh.reference_barycentrics();
        for term in &self.terms {
            match term {
                Term::Gradient(t) => {
                    for (e, g) in s.grads.iter().enumerate() {
                        let a2 = g[0] * g[0] + g[1] * g[1];
                        if a2 == 0.0 {
                            continue;
                        }
                        let mut c = 0.0;
                        for qi in e * k..(e + 1) * k {
                            c += w[qi] * t.dcoef[qi] * flux_factor(a2, t.exps[qi], eps);
                        }
                        c *= scale;
                        for (&n, bg) in mesh.element(e).iter().zip(mesh.basis_gradients(e)) {
                            out[n] += c * (g[0] * bg[0] + g[1] * bg[1]);
                        }
                    }
                }
                Term::Value(t) => {
                    for e in 0..mesh.n_elements() {
                        let el = mesh.element(e);
                        for (local, b) in bary.iter().enumerate() {
                            let qi = e * k + local;
                            let v = s.vals[qi];
                            if v == 0.0 {
                                continue;
                            }
                            let c = scale * w[qi] * t.dcoef[qi] * flux_factor(v * v, t.exps[qi], eps) * v;
                            for (&n, &bn) in el.iter().zip(b) {
                                out[n] += c * bn;
                            }
                        }
                    }
                }
            }
        }
    }

    /// `F(x + α d) − F(x)` computed term by term without forming the two
    /// large values.
    pub(crate) fn delta(&self, mesh: &Mesh, x: &Sample, d: &Sample, alpha: f64) -> f64 {
        let w = mesh.quad_weights();
        let k = mesh.qp_per_element();
        let mut total = 0.0;
        for term in &self.terms {
            match term {
                Term::Gradient(t) => {
                    for (e, (g, gd)) in x.grads.iter().zip(&d.grads).enumerate() {
                        let dl = [alpha * gd[0], alpha * gd[1]];
                        if dl == [0.0, 0.0] {
                            continue;
                        }
                        let a = g[0].hypot(g[1]);
                        let nb = [g[0] + dl[0], g[1] + dl[1]];
                        let b = nb[0].hypot(nb[1]);
                        let sum = a + b;
                        if sum == 0.0 {
                            continue;
                        }
                        let diff = (2.0 * (g[0] * dl[0] + g[1] * dl[1]) + dl[0] * dl[0] + dl[1] * dl[1]) / sum;
                        for qi in e * k..(e + 1) * k {
                            total += w[qi] * t.coef[qi] * pow_diff(a, b, diff, t.exps[qi]);
                        }
                    }
                }
                Term::Value(t) => {
                    for (qi, (v, vd)) in x.vals.iter().zip(&d.vals).enumerate() {
                        let dl = alpha * vd;
                        if dl == 0.0 {
                            continue;
                        }
                        let a = v.abs();
                        let b = (v + dl).abs();
                        let sum = a + b;
                        if sum == 0.0 {
                            continue;
                        }
                        let diff = (2.0 * v * dl + dl * dl) / sum;
                        total += w[qi] * t.coef[qi] * pow_diff(a, b, diff, t.exps[qi]);
                    }
                }
            }
        }
        total
    }
}

/// The double-phase problem data: mesh, exponents, and regularization.
#[derive(Debug, Clone)]
pub struct DoublePhase {
    mesh: Arc<Mesh>,
    p1: ExponentField,
    p2: ExponentField,
    q: ExponentField,
    epsilon: f64,
    j: Functional,
    i: Functional,
    j1: Functional,
    i1: Functional,
}

impl DoublePhase {
    pub fn new(mesh: Arc<Mesh>, p1: ExponentField, p2: ExponentField, q: ExponentField) -> Result<Self> {
        if !(p1.same_mesh(&mesh) && p2.same_mesh(&mesh) && q.same_mesh(&mesh)) {
            return Err(Error::MeshMismatch);
        }
        let j = Functional::new(vec![
            Term::Gradient(PowerTerm::normalized(&p1)),
            Term::Gradient(PowerTerm::normalized(&p2)),
        ]);
        let j1 = Functional::new(vec![Term::Gradient(PowerTerm::plain(&p1)), Term::Gradient(PowerTerm::plain(&p2))]);
        let i = Functional::new(vec![Term::Value(PowerTerm::normalized(&q))]);
        let i1 = Functional::new(vec![Term::Value(PowerTerm::plain(&q))]);
        Ok(DoublePhase { mesh, p1, p2, q, epsilon: DEFAULT_EPSILON, j, i, j1, i1 })
    }

    /// Regularization used in derivative assembly; must be positive.
    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Argument(format!("epsilon must be positive, got {epsilon}")));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn p1(&self) -> &ExponentField {
        &self.p1
    }

    pub fn p2(&self) -> &ExponentField {
        &self.p2
    }

    pub fn q(&self) -> &ExponentField {
        &self.q
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub(crate) fn j_functional(&self) -> &Functional {
        &self.j
    }

    pub(crate) fn i_functional(&self) -> &Functional {
        &self.i
    }

    pub(crate) fn j1_functional(&self) -> &Functional {
        &self.j1
    }

    pub(crate) fn i1_functional(&self) -> &Functional {
        &self.i1
    }

    fn check(&self, u: &DiscreteFunction) -> Result<()> {
        if u.mesh().fingerprint() != self.mesh.fingerprint() {
            return Err(Error::MeshMismatch);
        }
        Ok(())
    }

    pub fn eval_energies(&self, u: &DiscreteFunction) -> Result<EnergyBreakdown> {
        self.check(u)?;
        let s = Sample::new(&self.mesh, u.values());
        let j = self.j.value(&self.mesh, &s);
        let i = self.i.value(&self.mesh, &s);
        let j1 = self.j1.value(&self.mesh, &s);
        let i1 = self.i1.value(&self.mesh, &s);
        Ok(EnergyBreakdown {
            j,
            i,
            j1,
            i1,
            rayleigh_ji: Quotient::new(j, i),
            rayleigh_j1i1: Quotient::new(j1, i1),
        })
    }

    fn gradient_of(&self, f: &Functional, u: &DiscreteFunction) -> Result<GradientVector> {
        self.check(u)?;
        let s = Sample::new(&self.mesh, u.values());
        let mut out = vec![0.0; self.mesh.n_nodes()];
        f.add_gradient(&self.mesh, &s, self.epsilon, 1.0, &mut out);
        Ok(GradientVector::new(&self.mesh, out))
    }

    /// `⟨J'(u), φ⟩ = ∫ (|∇u|^{p₁−2} + |∇u|^{p₂−2}) ∇u·∇φ`.
    pub fn grad_j(&self, u: &DiscreteFunction) -> Result<GradientVector> {
        self.gradient_of(&self.j, u)
    }

    /// `⟨I'(u), φ⟩ = ∫ |u|^{q−2} u φ`.
    pub fn grad_i(&self, u: &DiscreteFunction) -> Result<GradientVector> {
        self.gradient_of(&self.i, u)
    }

    pub fn grad_j1(&self, u: &DiscreteFunction) -> Result<GradientVector> {
        self.gradient_of(&self.j1, u)
    }

    pub fn grad_i1(&self, u: &DiscreteFunction) -> Result<GradientVector> {
        self.gradient_of(&self.i1, u)
    }

    /// `T_λ(u) = J(u) − λ I(u)` and its gradient.
    pub fn eval_t(&self, u: &DiscreteFunction, lambda: f64) -> Result<(f64, GradientVector)> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Argument(format!("lambda must be positive, got {lambda}")));
        }
        self.check(u)?;
        let s = Sample::new(&self.mesh, u.values());
        let value = self.j.value(&self.mesh, &s) - lambda * self.i.value(&self.mesh, &s);
        let mut out = vec![0.0; self.mesh.n_nodes()];
        self.j.add_gradient(&self.mesh, &s, self.epsilon, 1.0, &mut out);
        self.i.add_gradient(&self.mesh, &s, self.epsilon, -lambda, &mut out);
        Ok((value, GradientVector::new(&self.mesh, out)))
    }

    /// Euclidean norm of `J'(u) − λ I'(u)` over the free nodes.
    pub fn weak_residual(&self, u: &DiscreteFunction, lambda: f64) -> Result<f64> {
        Ok(self.eval_t(u, lambda)?.1.norm())
    }
}
