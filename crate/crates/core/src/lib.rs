//! Asymptotic coupling for stochastic differential equations with additive
//! noise: measure algebra, symbolic binding construction, coupled
//! integration with Girsanov densities, and the statistical estimators used
//! to check contraction, Lyapunov and density conditions.

pub mod binding;
pub mod engine;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod measure;
pub mod models;
pub mod poly;

pub use error::{Error, Result};
pub use estimators::EstimatorReport;
pub use measure::{DiscreteKernel, DiscreteMeasure};
pub use models::{LyapunovKind, LyapunovSpec, ModelId, ModelParams, ModelSpec};
pub use poly::{IndexedPolynomial, PolyVectorField, Var};
