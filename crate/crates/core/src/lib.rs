pub mod cli;
pub mod error;
pub mod estimator;
pub mod evaluator;
pub mod gradient;
pub mod ingest;
pub mod intensity;
pub mod kernel;
pub mod likelihood;
pub mod params;
pub mod rng;
pub mod season;
pub mod series;
pub mod simulator;
pub mod unmarked;

pub use error::{HawkesError, Result};
