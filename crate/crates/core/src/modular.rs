//! Modular, Luxemburg norm, and the gradient norm of `W₀^{1,p(x)}`, all
//! evaluated with the mesh quadrature.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::mesh::{DiscreteFunction, Mesh};

const BRACKET_CAP: usize = 2200;
const BISECTION_CAP: usize = 400;

/// Real values at the quadrature points of a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    values: Vec<f64>,
    mesh_fingerprint: u64,
}

impl ScalarField {
    pub fn from_values(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_quad() {
            return Err(Error::LengthMismatch { expected: mesh.n_quad(), actual: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        Ok(ScalarField { values, mesh_fingerprint: mesh.fingerprint() })
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        Self::from_values(mesh, mesh.quad_points().iter().map(|&p| f(p)).collect())
    }

    /// `u` evaluated at the quadrature points.
    pub fn of_function(u: &DiscreteFunction) -> Self {
        ScalarField { values: u.values_at_quad(), mesh_fingerprint: u.mesh().fingerprint() }
    }

    /// `|∇u|` at the quadrature points.
    pub fn gradient_norm(u: &DiscreteFunction) -> Self {
        ScalarField { values: u.gradient_norms_at_quad(), mesh_fingerprint: u.mesh().fingerprint() }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scaled(&self, t: f64) -> Self {
        ScalarField { values: self.values.iter().map(|v| v * t).collect(), mesh_fingerprint: self.mesh_fingerprint }
    }

    fn check(&self, mesh: &Mesh) -> Result<()> {
        if self.mesh_fingerprint != mesh.fingerprint() || self.values.len() != mesh.n_quad() {
            return Err(Error::MeshMismatch);
        }
        Ok(())
    }
}

fn check_exponent(p: &ExponentField, mesh: &Mesh) -> Result<()> {
    if !p.same_mesh(mesh) {
        return Err(Error::MeshMismatch);
    }
    Ok(())
}

/// `ρ_p(f) = ∫ |f|^{p(x)} dx`.
pub fn modular(mesh: &Mesh, f: &ScalarField, p: &ExponentField) -> Result<f64> {
    f.check(mesh)?;
    check_exponent(p, mesh)?;
    Ok(modular_raw(mesh.quad_weights(), f.values(), p.values()))
}

pub(crate) fn modular_raw(weights: &[f64], f: &[f64], p: &[f64]) -> f64 {
    weights
        .iter()
        .zip(f)
        .zip(p)
        .map(|((w, v), e)| if *v == 0.0 { 0.0 } else { w * v.abs().powf(*e) })
        .sum()
}

/// Luxemburg norm `inf{μ > 0 : ρ_p(f/μ) ≤ 1}`.
///
/// For nonzero `f` the map `μ ↦ ρ_p(f/μ)` is continuous and strictly
/// decreasing, so the infimum is the root of `ρ_p(f/μ) = 1`. It is bracketed
/// by doubling/halving from `max|f|` and then bisected down to adjacent
/// floating-point values.
pub fn luxemburg_norm(mesh: &Mesh, f: &ScalarField, p: &ExponentField) -> Result<f64> {
    f.check(mesh)?;
    check_exponent(p, mesh)?;
    luxemburg_raw(mesh.quad_weights(), f.values(), p.values())
}

pub(crate) fn luxemburg_raw(weights: &[f64], f: &[f64], p: &[f64]) -> Result<f64> {
    // Terms with zero weight or zero value never contribute.
    let terms: Vec<(f64, f64, f64)> = weights
        .iter()
        .zip(f)
        .zip(p)
        .filter(|((w, v), _)| **w > 0.0 && **v != 0.0)
        .map(|((w, v), e)| (*w, v.abs().ln(), *e))
        .collect();
    if terms.is_empty() {
        return Ok(0.0);
    }
    let rho = |mu: f64| {
        let lm = mu.ln();
        terms.iter().map(|&(w, lf, e)| w * (e * (lf - lm)).exp()).sum::<f64>()
    };

    let start = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (mut lo, mut hi) = (start, start);
    let mut steps = 0;
    if rho(start) > 1.0 {
        while rho(hi) > 1.0 {
            lo = hi;
            hi *= 2.0;
            steps += 1;
            if steps > BRACKET_CAP || !hi.is_finite() {
                return Err(Error::NoConvergence("Luxemburg norm bracket grew without bound".into()));
            }
        }
    } else {
        while rho(lo) <= 1.0 {
            hi = lo;
            lo *= 0.5;
            steps += 1;
            if steps > BRACKET_CAP || lo == 0.0 {
                return Err(Error::NoConvergence("Luxemburg norm bracket shrank to zero".into()));
            }
        }
    }
    // Invariant: rho(lo) > 1 >= rho(hi).
    for _ in 0..BISECTION_CAP {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(hi);
        }
        if rho(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if hi - lo <= 1e-12 {
        Ok(hi)
    } else {
        Err(Error::NoConvergence("Luxemburg norm bisection did not settle".into()))
    }
}

/// `‖u‖ = |∇u|_{p(x)}`.
pub fn sobolev_norm(u: &DiscreteFunction, p: &ExponentField) -> Result<f64> {
    let mesh = u.mesh();
    check_exponent(p, mesh)?;
    luxemburg_raw(mesh.quad_weights(), &u.gradient_norms_at_quad(), p.values())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderBound {
    pub lhs: f64,
    pub rhs: f64,
}

impl HolderBound {
    pub fn holds(&self, rel_slack: f64) -> bool {
        self.lhs <= self.rhs + rel_slack * self.rhs.abs().max(self.lhs.abs()) + 1e-300
    }
}

/// Both sides of `|∫uv| ≤ (1/p⁻ + 1/p'⁻) |u|_{p} |v|_{p'}`.
pub fn holder_bound(mesh: &Mesh, u: &ScalarField, v: &ScalarField, p: &ExponentField) -> Result<HolderBound> {
    u.check(mesh)?;
    v.check(mesh)?;
    check_exponent(p, mesh)?;
    let conj = p.conjugate();
    let product: Vec<f64> = u.values().iter().zip(v.values()).map(|(a, b)| a * b).collect();
    let lhs = mesh.integrate(&product)?.abs();
    let nu = luxemburg_raw(mesh.quad_weights(), u.values(), p.values())?;
    let nv = luxemburg_raw(mesh.quad_weights(), v.values(), conj.values())?;
    let rhs = (1.0 / p.min() + 1.0 / conj.min()) * nu * nv;
    Ok(HolderBound { lhs, rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn unit(n: usize) -> Mesh {
        Mesh::interval(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn modular_examples() {
        let m = unit(200);
        let p2 = ExponentField::constant(2.0, &m).unwrap();
        let p3 = ExponentField::constant(3.0, &m).unwrap();
        let one = ScalarField::from_fn(&m, |_| 1.0).unwrap();
        let two = ScalarField::from_fn(&m, |_| 2.0).unwrap();
        let x = ScalarField::from_fn(&m, |p| p[0]).unwrap();
        assert!((modular(&m, &one, &p2).unwrap() - 1.0).abs() < 1e-12);
        assert!((modular(&m, &two, &p2).unwrap() - 4.0).abs() < 1e-12);
        assert!((modular(&m, &x, &p3).unwrap() - 0.25).abs() < 1e-10);
        let zero = ScalarField::from_fn(&m, |_| 0.0).unwrap();
        assert_eq!(modular(&m, &zero, &p3).unwrap(), 0.0);
    }

    #[test]
    fn norm_examples() {
        let m = unit(200);
        let one = ScalarField::from_fn(&m, |_| 1.0).unwrap();
        let pv = ExponentField::parse("2 + sin(5*x)", &m).unwrap();
        assert!((luxemburg_norm(&m, &one, &pv).unwrap() - 1.0).abs() < 1e-12);

        let p2 = ExponentField::constant(2.0, &m).unwrap();
        let x = ScalarField::from_fn(&m, |p| p[0]).unwrap();
        assert!((luxemburg_norm(&m, &x, &p2).unwrap() - (1.0f64 / 3.0).sqrt()).abs() < 1e-8);

        // Piecewise exponent 2 | 4 with the split on an element boundary:
        // y/2 + y²/2 = 1 with y = (c/μ)² gives μ = c.
        let piece = ExponentField::from_fn(&m, |p| if p[0] < 0.5 { 2.0 } else { 4.0 }).unwrap();
        for c in [0.3, 1.0, 7.5] {
            let f = ScalarField::from_fn(&m, |_| c).unwrap();
            let n = luxemburg_norm(&m, &f, &piece).unwrap();
            assert!((n - c).abs() < 1e-12 * c.max(1.0), "{n} vs {c}");
        }

        let zero = ScalarField::from_fn(&m, |_| 0.0).unwrap();
        assert_eq!(luxemburg_norm(&m, &zero, &p2).unwrap(), 0.0);
    }

    #[test]
    fn mismatch_errors() {
        let m = unit(10);
        let other = unit(11);
        let p = ExponentField::constant(2.0, &m).unwrap();
        let f = ScalarField::from_fn(&other, |_| 1.0).unwrap();
        assert_eq!(modular(&m, &f, &p), Err(Error::MeshMismatch));
        assert_eq!(luxemburg_norm(&m, &f, &p), Err(Error::MeshMismatch));
        let po = ExponentField::constant(2.0, &other).unwrap();
        let g = ScalarField::from_fn(&m, |_| 1.0).unwrap();
        assert_eq!(modular(&m, &g, &po), Err(Error::MeshMismatch));
    }

    #[test]
    fn sobolev_norm_examples() {
        let m = Arc::new(unit(8));
        let p2 = ExponentField::constant(2.0, &m).unwrap();
        let zero = DiscreteFunction::zeros(&m);
        assert_eq!(sobolev_norm(&zero, &p2).unwrap(), 0.0);

        // Sawtooth with slopes ±1 vanishing at both ends.
        let saw = DiscreteFunction::interpolate(&m, |x| {
            let t = (x[0] * 4.0).fract();
            0.25 * if t <= 0.5 { t } else { 1.0 - t }
        })
        .unwrap();
        assert!(saw.element_gradients().iter().all(|g| (g[0].abs() - 1.0).abs() < 1e-12));
        assert!((sobolev_norm(&saw, &p2).unwrap() - 1.0).abs() < 1e-12);

        let u = DiscreteFunction::interpolate(&m, |x| x[0] * (1.0 - x[0]) * (3.0 * x[0]).sin()).unwrap();
        let p = ExponentField::constant(3.3, &m).unwrap();
        let a = sobolev_norm(&u, &p).unwrap();
        let b = sobolev_norm(&u.scaled(2.0), &p).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-10);
    }

    #[test]
    fn holder_examples() {
        let m = unit(200);
        let p2 = ExponentField::constant(2.0, &m).unwrap();
        let one = ScalarField::from_fn(&m, |_| 1.0).unwrap();
        let h = holder_bound(&m, &one, &one, &p2).unwrap();
        assert!((h.lhs - 1.0).abs() < 1e-12 && (h.rhs - 1.0).abs() < 1e-12);
        assert!(h.holds(1e-10));

        let zero = ScalarField::from_fn(&m, |_| 0.0).unwrap();
        let h = holder_bound(&m, &zero, &one, &p2).unwrap();
        assert_eq!(h.lhs, 0.0);
        assert!(h.holds(0.0));

        let x = ScalarField::from_fn(&m, |p| p[0]).unwrap();
        let omx = ScalarField::from_fn(&m, |p| 1.0 - p[0]).unwrap();
        let h = holder_bound(&m, &x, &omx, &p2).unwrap();
        assert!((h.lhs - 1.0 / 6.0).abs() < 1e-10);
        assert!((h.rhs - 1.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn normalization_and_sandwich() {
        let m = unit(64);
        let p = ExponentField::parse("2.2 + 0.9*x", &m).unwrap();
        let (lo, hi) = p.extrema();
        for scale in [1e-3, 0.2, 0.9, 1.7, 40.0] {
            let f = ScalarField::from_fn(&m, |x| scale * (1.0 + (7.0 * x[0]).cos())).unwrap();
            let n = luxemburg_norm(&m, &f, &p).unwrap();
            let r = modular(&m, &f, &p).unwrap();
            let normalized = modular(&m, &f.scaled(1.0 / n), &p).unwrap();
            assert!((normalized - 1.0).abs() < 1e-12);
            let (a, b) = if n > 1.0 { (n.powf(lo), n.powf(hi)) } else { (n.powf(hi), n.powf(lo)) };
            assert!(a <= r * (1.0 + 1e-12) && r <= b * (1.0 + 1e-12));
        }
    }
}
