//! Importance weights and estimator kernels: plain Monte Carlo, the shifted
//! prior (LSIS), standard and deterministic-mixture MIS, and the
//! cross-entropy proposal update.
//!
//! Weights are carried as logarithms. At high thresholds they span hundreds
//! of orders of magnitude and only become plain numbers when summed into an
//! estimate.

mod baseline;
mod mis;
mod proposal;

pub use baseline::{evaluate_indicators, lsis_estimate, mc_estimate, Estimate};
pub use mis::{
    ce_update, dmmis_log_weight, dmmis_update_weights, mis_estimate, smis_log_weight, smis_weight,
    MisHistory, SampleRecord, WeightScheme,
};
pub use proposal::{gaussian_is_weight, GaussianProposal, JITTER};
