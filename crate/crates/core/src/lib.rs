//! Rare-event probability estimation for expensive parameter-to-event maps.
//!
//! The estimator pipeline (LAIS) runs in four stages:
//!
//! 1. solve the rate-function minimization `min ½‖θ‖²  s.t.  F(θ) = z`
//!    for the most likely failure point `θ*` ([`ldt`]);
//! 2. build a low-dimensional subspace from the constraint normal and the
//!    dominant eigenvectors of the projected Hessian at `θ*` ([`ldt::build_subspace`]);
//! 3. adapt a Gaussian proposal inside that subspace with cross-entropy
//!    updates, reusing every evaluation through multiple importance sampling
//!    ([`estimators`], [`lais`]);
//! 4. report the pooled estimate together with its evaluation cost.
//!
//! Plain Monte Carlo and the shifted-prior estimator (LSIS) are included as
//! baselines, along with two benchmark problems: a quadratic limit state with
//! a quadrature oracle and a 1D log-normal diffusion problem with adjoint
//! gradients ([`problems`]).
//!
//! All numerical code is generic over the scalar type through [`Real`];
//! the `*64` aliases below fix it to `f64`, which is what the CLI and the
//! acceptance suite use.

pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod lais;
pub mod ldt;
pub mod numerics;
pub mod problems;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Mat64 = numerics::Mat<f64>;
pub type SpdMatrix64 = numerics::SpdMatrix<f64>;
pub type QuadraticMap64 = problems::QuadraticMap<f64>;
pub type LinearMap64 = problems::LinearMap<f64>;
pub type KlField64 = problems::KlField<f64>;
pub type DiffusionMap64 = problems::DiffusionMap<f64>;
pub type LdtSolution64 = ldt::LdtSolution<f64>;
pub type Subspace64 = ldt::Subspace<f64>;
pub type GaussianProposal64 = estimators::GaussianProposal<f64>;
pub type MisHistory64 = estimators::MisHistory<f64>;
pub type Estimate64 = estimators::Estimate<f64>;
pub type LaisReport64 = lais::LaisReport<f64>;
pub type RunEnsemble64 = diagnostics::RunEnsemble<f64>;
