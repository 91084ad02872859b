//! A posteriori error estimation: the residual estimator for the elliptic
//! part, the per-step indicators and bounds, and the algebraic identities
//! of the time reconstructions behind them.

pub mod br;
pub mod identities;
pub mod indicators;

pub use br::{
    br_estimator, discrete_elliptic_on, reconstruction_error, reference_reconstruction, BrNorm,
};
pub use identities::{verify_reconstruction_identities, IdentityReport, TimeBasis};
pub use indicators::{
    all_indicators, indicators_at, total_bounds, EstimateReport, EstimatorOptions, IndicatorSample,
};
