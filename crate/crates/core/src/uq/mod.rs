//! Uncertainty propagation: ensembles, density estimates and error metrics.

pub mod ensemble;
pub mod kde;

pub use ensemble::{ensemble_mse, run_ensemble, sample_parameters, EnsembleResult, EnsembleSpec};
pub use kde::{compare_samples, kde_estimate, kde_l1_distance, silverman_bandwidth, KdeEstimate};
