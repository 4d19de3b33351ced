//! Additive Markov processes on 𝔭-adic fields and on the finite adeles of a
//! number field, together with a Monte Carlo estimator of the Dedekind zeta
//! function built from their exit laws.
//!
//! The crate is organised bottom-up:
//!
//! * [`number_field`]: finite places of `Q` and `Q(√d)`, plus deterministic
//!   Euler-product and Dirichlet-series values of `ζ_K(s)`.
//! * [`padic`]: finite-precision digit expansions, balls and sphere sampling.
//! * [`semigroup`]: the explicit transition semigroup, its generator and a
//!   Chapman–Kolmogorov check.
//! * [`process`]: exact exit-time / exit-position samplers, a ball-chain path
//!   simulator and the product (adelic) configuration.
//! * [`zeta_mc`]: the zeta estimator and the functional-equation checks.
//! * [`rng`] and [`stats`]: keyed random streams and the small amount of
//!   statistics shared by the CLI and the tests.

pub mod error;
pub mod number_field;
pub mod padic;
pub mod process;
pub mod rng;
pub mod semigroup;
pub mod stats;
pub mod zeta_mc;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use number_field::{FieldSpec, FinitePlace, ZetaOracleResult};
pub use padic::{Ball, PAdicApprox};
pub use process::{AdelicConfig, BallChainState, ExitSample};
pub use semigroup::{DistanceClass, JumpProfile, KernelValue};
pub use zeta_mc::{AlphaStrategy, EstimatorConfig, ZetaEstimate};
