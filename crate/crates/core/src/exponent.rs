//! Variable exponents sampled at quadrature points.
//!
//! Fields are built from an expression (see [`crate::expr`] for the grammar),
//! from a closure, or from an explicit array with one value per quadrature
//! point in mesh enumeration order. Every value must exceed 1. Extrema are
//! taken over the quadrature sample, so they approximate `sup`/`inf` of the
//! underlying continuous function from the inside.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::mesh::Mesh;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentSource {
    Expression(String),
    Array,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentField {
    values: Vec<f64>,
    source: ExponentSource,
    extrema: (f64, f64),
    mesh_fingerprint: u64,
}

impl ExponentField {
    /// Parse `expr` and sample it at every quadrature point of `mesh`.
    pub fn parse(expr: &str, mesh: &Mesh) -> Result<Self> {
        let ast = Expr::parse(expr)?;
        let values = mesh.quad_points().iter().map(|p| ast.eval(p[0], p[1])).collect();
        Self::build(values, ExponentSource::Expression(expr.to_string()), mesh)
    }

    pub fn constant(value: f64, mesh: &Mesh) -> Result<Self> {
        Self::build(vec![value; mesh.n_quad()], ExponentSource::Expression(value.to_string()), mesh)
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let values = mesh.quad_points().iter().map(|&p| f(p)).collect();
        Self::build(values, ExponentSource::Array, mesh)
    }

    /// One value per quadrature point, in mesh enumeration order.
    pub fn from_values(values: Vec<f64>, mesh: &Mesh) -> Result<Self> {
        if values.len() != mesh.n_quad() {
            return Err(Error::LengthMismatch { expected: mesh.n_quad(), actual: values.len() });
        }
        Self::build(values, ExponentSource::Array, mesh)
    }

    /// Plain-text array: one value per line; blank lines and `#` comments are
    /// skipped.
    pub fn from_array_text(text: &str, mesh: &Mesh) -> Result<Self> {
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let v = line.parse::<f64>().map_err(|_| Error::Parse {
                position: lineno + 1,
                message: format!("line {}: not a number: '{line}'", lineno + 1),
            })?;
            values.push(v);
        }
        Self::from_values(values, mesh)
    }

    fn build(values: Vec<f64>, source: ExponentSource, mesh: &Mesh) -> Result<Self> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { index: i });
            }
            if v <= 1.0 {
                return Err(Error::ExponentDomain { index: i, value: v });
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Ok(ExponentField { values, source, extrema: (lo, hi), mesh_fingerprint: mesh.fingerprint() })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source(&self) -> &ExponentSource {
        &self.source
    }

    /// `(h⁻, h⁺)` over the quadrature sample.
    pub fn extrema(&self) -> (f64, f64) {
        self.extrema
    }

    pub fn min(&self) -> f64 {
        self.extrema.0
    }

    pub fn max(&self) -> f64 {
        self.extrema.1
    }

    pub fn is_constant(&self) -> bool {
        self.extrema.0 == self.extrema.1
    }

    pub fn mesh_fingerprint(&self) -> u64 {
        self.mesh_fingerprint
    }

    pub fn same_mesh(&self, mesh: &Mesh) -> bool {
        self.mesh_fingerprint == mesh.fingerprint() && self.values.len() == mesh.n_quad()
    }

    /// Pointwise conjugate exponent `p / (p - 1)`.
    pub fn conjugate(&self) -> ExponentField {
        let values: Vec<f64> = self.values.iter().map(|&p| p / (p - 1.0)).collect();
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ExponentField {
            values,
            source: ExponentSource::Array,
            extrema: (lo, hi),
            mesh_fingerprint: self.mesh_fingerprint,
        }
    }
}

/// `(h⁻, h⁺)` of a field.
pub fn extrema(field: &ExponentField) -> (f64, f64) {
    field.extrema()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub index: usize,
    pub point: [f64; 2],
    pub condition: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    /// `1 < p₂(x) < q⁻ ≤ q⁺ < p₁(x)` at every quadrature point.
    pub chain_ok: bool,
    /// `q⁺ < N p₂(x) / (N − p₂(x))` wherever `p₂(x) < N`.
    pub subcritical_ok: bool,
    /// The chain with every strict inequality relaxed to `≤`. Admits the
    /// homogeneous case `p₁ ≡ p₂ ≡ q` used as a closed-form reference.
    pub relaxed_chain_ok: bool,
    pub dimension_warnings: Vec<String>,
    pub witness_points: Vec<Witness>,
}

impl ValidationReport {
    pub fn is_admissible(&self, allow_degenerate: bool) -> bool {
        self.subcritical_ok && (self.chain_ok || (allow_degenerate && self.relaxed_chain_ok))
    }
}

/// Check the structural assumptions on `(p₁, p₂, q)` pointwise.
///
/// Low ambient dimension and `p₁⁺ ≥ N` are reported as warnings only.
pub fn validate_triple(
    mesh: &Mesh,
    p1: &ExponentField,
    p2: &ExponentField,
    q: &ExponentField,
    ambient_dimension: usize,
) -> Result<ValidationReport> {
    if !(p1.same_mesh(mesh) && p2.same_mesh(mesh) && q.same_mesh(mesh)) {
        return Err(Error::MeshMismatch);
    }
    if ambient_dimension == 0 {
        return Err(Error::Argument("ambient dimension must be positive".into()));
    }
    let n = ambient_dimension as f64;
    let (q_lo, q_hi) = q.extrema();
    let mut chain_ok = true;
    let mut relaxed_chain_ok = true;
    let mut subcritical_ok = true;
    let mut vacuous_subcritical = false;
    let mut witness_points = Vec::new();
    let points = mesh.quad_points();

    for (i, ((&a, &b), point)) in p1.values().iter().zip(p2.values()).zip(points).enumerate() {
        let strict = 1.0 < b && b < q_lo && q_hi < a;
        let relaxed = 1.0 < b && b <= q_lo && q_hi <= a;
        if !strict {
            chain_ok = false;
            witness_points.push(Witness {
                index: i,
                point: *point,
                condition: format!("chain: need 1 < p2={b} < q-={q_lo} <= q+={q_hi} < p1={a}"),
            });
        }
        relaxed_chain_ok &= relaxed;
        if b < n {
            let critical = n * b / (n - b);
            if q_hi >= critical {
                subcritical_ok = false;
                witness_points.push(Witness {
                    index: i,
                    point: *point,
                    condition: format!("subcritical: q+={q_hi} >= N p2/(N-p2)={critical}"),
                });
            }
        } else {
            vacuous_subcritical = true;
        }
    }

    let mut dimension_warnings = Vec::new();
    if ambient_dimension < 3 {
        dimension_warnings.push(format!("ambient dimension N={ambient_dimension} < 3"));
    }
    if p1.max() >= n {
        dimension_warnings.push(format!("p1+ = {} >= N = {ambient_dimension}", p1.max()));
    }
    if vacuous_subcritical {
        dimension_warnings.push(format!(
            "p2(x) >= N = {ambient_dimension} somewhere; subcritical condition treated as satisfied there"
        ));
    }

    Ok(ValidationReport { chain_ok, subcritical_ok, relaxed_chain_ok, dimension_warnings, witness_points })
}
