pub mod bipartite;
pub mod cost;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod optimality;
pub mod quadrature;
pub mod scalar;
pub mod sdp;
pub mod states;
pub mod transport;

pub use error::{QmkError, Result};
pub use scalar::{CMatrix, CVector, Field, Real};

pub type FockSpace64 = fock::FockSpace<f64>;
pub type Matrix64 = scalar::CMatrix<f64>;
pub type Density64 = states::DensityOperator<f64>;
pub type Measure64 = states::PhaseSpaceMeasure<f64>;
pub type Problem64 = sdp::PrimalProblem<f64>;
pub type Report64 = sdp::SolveReport<f64>;
pub type Bipartite64 = bipartite::BipartiteInstance<f64>;
pub type Plan64 = transport::TransportPlan<f64>;
