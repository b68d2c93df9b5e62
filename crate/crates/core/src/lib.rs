//! Estimating the eigenvalue spectrum of a population covariance matrix from
//! few samples, including when the sample count is far below the dimension.
//!
//! The pipeline has two stages. [`moments`] computes unbiased estimates of
//! the spectral moments `(1/d) Σ λ_i^k` by averaging cycle products of the
//! Gram matrix over increasing index cycles. [`recovery`] then solves a
//! weighted-L1 moment-matching linear program ([`lp`]) over distributions on
//! a fine mesh and reads the eigenvalues off its quantiles.
//!
//! ```
//! use specest_core::{estimate_spectrum, synth, RecoveryConfig};
//!
//! let model = synth::CovarianceModel::two_spike(64);
//! let y = synth::sample_model(&model, 32, synth::EntryDistribution::Gaussian, 7).unwrap();
//! let spectrum = estimate_spectrum(&y, &RecoveryConfig::new(4.0)).unwrap();
//! assert_eq!(spectrum.len(), 64);
//! ```

#![allow(clippy::needless_range_loop)]

pub mod chebyshev;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod lp;
pub mod moments;
pub mod recovery;
pub mod synth;
pub mod wasserstein;

pub use error::{Error, Result};
pub use linalg::{gram, read_csv, strict_upper, sym_eigenvalues, write_csv, DataMatrix, Matrix, SquareMatrix};
pub use moments::{
    brute_force_increasing, empirical_moment, estimate_moment, estimate_moments, monte_carlo_variance, MomentEstimate,
    MonteCarloStats,
};
pub use recovery::{
    empirical_spectrum, estimate_spectrum, estimate_spectrum_detailed, heuristic_bound, RecoveryConfig,
    SpectralDistribution, SpectrumEstimate, SpectrumVector, WeightScheme,
};
pub use synth::{CovarianceModel, EntryDistribution, Family};
pub use wasserstein::{l1_sorted, quantize, w1, PointMassDistribution};
