//! Numerical laboratory for the multi-particle Anderson tight-binding model
//!
//! ```text
//! H(n) = -Δ + V(x_1) + ... + V(x_n) + U(x)   on  ℓ²(ℤ^{nd})
//! ```
//!
//! with a correlated, finite-range, non-negative random potential `V` and a
//! compactly supported pair interaction `U`. The crate provides the pieces
//! needed to probe low-energy localization at desk scale:
//!
//! * [`lattice`]: index arithmetic on ℤ^{nd}, cubes and their boundaries.
//! * [`field`]: counter-based moving-average random fields and their
//!   mixing / conditional-continuity probes.
//! * [`hamiltonian`]: sparse assembly of the restricted operator.
//! * [`spectral`]: dense and shift-invert Lanczos eigensolvers, Green functions.
//! * [`msa`]: multi-scale-analysis predicates and initial-scale statistics.
//! * [`observables`]: large deviations, Lifshitz tails, Combes–Thomas,
//!   eigenfunction decay, dynamical localization, tensor Weyl sequences.

// Parameter checks use `!(x > y)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod field;
pub mod hamiltonian;
pub mod lattice;
pub mod msa;
pub mod observables;
pub mod seed;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use field::{BaseLaw, FieldSample, FieldSpec, Kernel, Region};
pub use hamiltonian::{AssembledOperator, HamiltonianSpec, InteractionSpec};
pub use lattice::{Cube, ParticleConfig};
pub use msa::MsaParams;
pub use spectral::{SolverOptions, SpectralResult};
pub use stats::{BernoulliTally, Proportion};
