//! Truncated quantum Fourier (Draper) arithmetic.
//!
//! A Draper adder maps `|x>` to `|x + a mod 2^L>` by a QFT, one phase rotation
//! per qubit encoding the classical addend, and an inverse QFT. Truncating the
//! transforms to a level `N` drops every rotation finer than `pi / 2^N`; the
//! crate models the resulting loss of correct-outcome probability.
//!
//! # Modules
//!
//! - [`model`]: exact per-instance fidelity from carry chains and effective sums.
//! - [`runstats`]: Bernoulli success-run statistics and average single-pass predictors.
//! - [`sequence`]: distribution of the effective sum for add/subtract sequences,
//!   the closed-form repeated-adder law, corrected adders and level inversion.
//! - [`noise`]: Gaussian rotation-error fidelities and the Z-flip equivalence.
//! - [`shor`]: modular-adder and modular-exponentiation fidelity composition.
//! - [`sim`]: dense statevector oracle and the deterministic Monte Carlo engine.
//! - [`cost`]: distilled and raw magic-state censuses.
//!
//! # Quick start
//!
//! ```
//! use truncq::model::{exact_truncation_fidelity, BitString, TruncationConfig};
//!
//! let cfg = TruncationConfig::new(4, 2, 0).unwrap();
//! let x = BitString::from_u64(3, 4).unwrap();
//! let a = BitString::from_u64(3, 4).unwrap();
//! let f = exact_truncation_fidelity(&x, &a, &cfg).unwrap();
//! assert!((f - (2.0 + 2f64.sqrt()) / 4.0).abs() < 1e-12);
//! ```

pub mod cost;
pub mod error;
pub mod model;
pub mod noise;
pub mod runstats;
pub mod sequence;
pub mod shor;
pub mod sim;

pub use error::{Error, Result};
