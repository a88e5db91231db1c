//! EEG source localization as a multi-objective problem.
//!
//! The crate bundles a three-shell forward model, a scenario simulator, the
//! penalty family shared by all solvers, classic regularized baselines
//! (Ridge-L, LASSO, ENET-L with GCV), and the cooperative-coevolution
//! multi-objective solver with proximal local search and a knee-point
//! decision maker. All numerical code is generic over [`Real`] (`f32`/`f64`);
//! the `*64` aliases below cover the common double-precision case.

pub mod classic;
pub mod coevolution;
pub mod decision;
pub mod error;
pub mod headmodel;
pub mod linalg;
pub mod local_search;
pub mod metrics;
pub mod moea;
pub mod objectives;
pub mod scalar;
pub mod simulator;

pub use error::{Error, Result};
pub use scalar::Real;

pub type SourceSpace64 = headmodel::SourceSpace<f64>;
pub type SensorArray64 = headmodel::SensorArray<f64>;
pub type HeadModel64 = headmodel::HeadModel<f64>;
pub type LeadField64 = headmodel::LeadField<f64>;
pub type Laplacian64 = headmodel::LaplacianOperator<f64>;
pub type PenaltyModel64 = objectives::PenaltyModel<f64>;
pub type CurrentDensity64 = simulator::CurrentDensity<f64>;
pub type Individual64 = moea::Individual<f64>;
