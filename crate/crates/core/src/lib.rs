//! Covariance-based joint device-activity detection and data decoding for
//! grant-free random access.
//!
//! A base station with `M` antennas observes `L` symbols of superimposed
//! signature sequences transmitted by a sparse subset of `N` devices, each
//! embedding a `J`-bit message in its sequence choice. Detection estimates
//! the non-negative power vector `γ` of length `N·2^J` by minimizing the
//! negative log-likelihood of the sample covariance under the model
//! `Σ(γ) = QΓQ^H + σ²I`, one coordinate at a time.
//!
//! The crate provides:
//!
//! - [`model`] — scenario generation (sequences, activity, channels, noise)
//!   and the sample covariance, over reproducible named RNG substreams;
//! - [`covariance`] — the solver state `(γ, Σ, Σ⁻¹, log|Σ|, F)` maintained
//!   under rank-one coordinate updates, the closed-form coordinate step and
//!   its exact objective-decrease reward;
//! - [`policies`] — coordinate-selection strategies: uniform random,
//!   Bernoulli ε-greedy over cached rewards, and Thompson sampling over an
//!   inner Beta-Bernoulli bandit that adapts the greedy probability;
//! - [`solver`] — the outer descent loop with stopping rule and trace
//!   recording;
//! - [`adc`] — a low-precision ADC path: uniform quantizer, Bussgang
//!   linearization and a surrogate model the same solver can minimize;
//! - [`detect`] — threshold decoding of `γ̂` into activity and message
//!   decisions plus missed-detection / false-alarm rates.
//!
//! ## Example
//!
//! ```rust
//! use actdet_core::detect::{calibrate_threshold, decode, missed_detection_prob};
//! use actdet_core::model::{generate_scenario, sample_covariance, SystemConfig};
//! use actdet_core::policies::ThompsonConfig;
//! use actdet_core::rng::{RngHub, Stream};
//! use actdet_core::solver::{run, PolicyKind, StopRule};
//!
//! let config = SystemConfig {
//!     num_devices: 20,
//!     num_active: 4,
//!     seq_len: 16,
//!     num_antennas: 8,
//!     ..SystemConfig::desk_scale(7)
//! };
//! let hub = RngHub::new(config.master_seed);
//! let scenario = generate_scenario(&config, &hub).unwrap();
//! let sigma_hat = sample_covariance(&scenario.received);
//!
//! let nr = config.num_coords() as u64;
//! let policy = PolicyKind::Thompson(ThompsonConfig::new(10, nr.div_ceil(2)));
//! let stop = StopRule { rel_tol: 1e-6, max_iters: 20 * nr, window: nr };
//! let out = run(
//!     &scenario.sequences,
//!     &sigma_hat,
//!     scenario.noise_var,
//!     &policy,
//!     &stop,
//!     &mut hub.stream(Stream::Policy),
//! )
//! .unwrap();
//!
//! let s_th = calibrate_threshold(&out.gamma, config.num_messages(), config.num_active).unwrap();
//! let result = decode(&out.gamma, config.num_messages(), s_th);
//! assert_eq!(missed_detection_prob(&scenario.truth, &result), 0.0);
//! ```

// `!(x > 0.0)` rejects NaN along with non-positive values; the plain
// `x <= 0.0` form would wave NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adc;
pub mod covariance;
pub mod detect;
pub mod error;
pub mod model;
pub mod policies;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
