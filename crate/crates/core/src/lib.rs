//! Reduced dynamics of finite-dimensional open quantum systems coupled to
//! bosonic baths, together with an a-priori weak-coupling criterion.
//!
//! Four propagation methods are provided: second- and fourth-order
//! time-convolutionless master equations (TCL2/TCL4), the exponentiated
//! second-order influence functional ("P-mat"), and the hierarchical
//! equations of motion (HEOM) as a numerically converged benchmark.
//!
//! All numerics are generic over the real scalar type; concrete `f64`
//! aliases live at the crate root.

pub mod bath;
pub mod criterion;
pub mod error;
pub mod expm;
pub mod generators;
pub mod heom;
pub mod liouville;
pub mod models;
pub mod ode;
pub mod op;
pub mod scalar;

pub use error::Error;
pub use scalar::Real;

/// Concrete scalar used by the command-line tools and most consumers.
pub type CMatrix64 = scalar::CMatrix<f64>;
pub type CVector64 = scalar::CVector<f64>;
pub type HermitianOperator64 = op::HermitianOperator<f64>;
pub type DensityMatrix64 = op::DensityMatrix<f64>;
pub type EnergyBasis64 = op::EnergyBasis<f64>;
pub type Superoperator64 = liouville::Superoperator<f64>;
pub type ExponentialSumResponse64 = bath::ExponentialSumResponse<f64>;
pub type SystemModel64 = generators::SystemModel<f64>;
pub type Trajectory64 = generators::Trajectory<f64>;
pub type ModelSpec64 = models::ModelSpec<f64>;
pub type CriterionReport64 = criterion::CriterionReport<f64>;
pub type HeomConfig64 = heom::HeomConfig<f64>;
pub type Hierarchy64 = heom::Hierarchy<f64>;
