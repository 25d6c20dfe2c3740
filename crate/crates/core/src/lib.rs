//! Discretized double-phase eigenvalue problems with variable exponents.
//!
//! The crate evaluates the energies of the operator
//! `−div((|∇u|^{p₁(x)−2} + |∇u|^{p₂(x)−2})∇u) = λ|u|^{q(x)−2}u` with zero
//! Dirichlet data on piecewise-linear finite elements, estimates the two
//! spectral constants `λ₁ = inf J/I` and `λ₀ = inf J₁/I₁`, and classifies
//! candidate `λ` values by minimizing `T_λ = J − λI`.

pub mod diagnostics;
pub mod error;
pub mod expr;
pub mod exponent;
pub mod functionals;
mod linalg;
pub mod mesh;
pub mod modular;
mod optim;
pub mod random;
pub mod solver;

pub use error::{Error, Result};
pub use exponent::{extrema, validate_triple, ExponentField, ExponentSource, ValidationReport, Witness};
pub use functionals::{DoublePhase, EnergyBreakdown, GradientVector, Quotient, DEFAULT_EPSILON};
pub use mesh::{DiscreteFunction, Mesh};
pub use modular::{holder_bound, luxemburg_norm, modular, sobolev_norm, HolderBound, ScalarField};
pub use solver::{
    estimate_embedding_eigenvalue, minimize_rayleigh, minimize_t, scan_lambda, Classification, EigenEstimate,
    EigenSolver, QuotientKind, ScanReport, ScanRow, SolverOptions, SpectralBounds,
};
pub use diagnostics::{
    check_gradients, check_inequality_chain, check_modular_norm_relations, ray_limit_profile, ChainChecker,
    CheckReport,
};
