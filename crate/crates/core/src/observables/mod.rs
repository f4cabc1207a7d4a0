//! Numerical experiments for the low-energy localization estimates.
//!
//! Each observable comes as a per-trial function (pure in `(spec, trial)`)
//! plus a rayon-parallel aggregate.

mod combes_thomas;
mod decay;
mod deviation;
mod dynamics;
mod edge;
mod tail;
mod weyl;

pub use combes_thomas::combes_thomas_ratio;
pub use decay::{decay_fit, decay_trial, eigenfunction_decay, median_decay_rate, DecayFit};
pub use deviation::{
    large_deviation_probability, large_deviation_scale, large_deviation_trial, rate_estimate, truncated_average,
};
pub use dynamics::{dynamical_moment, log_time_grid, DynamicalMoment};
pub use edge::{spectral_edge_estimate, EdgeEstimate};
pub use tail::{lifshitz_tail, lifshitz_threshold, lifshitz_trial, TailTrial};
pub use weyl::{free_quasi_mode, single_particle_operator, weyl_tensor_residual, LocalVector, WeylMode, WeylResidual};
