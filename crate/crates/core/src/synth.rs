//! Synthetic ground truth: covariance families, factor matrices and data draws.
//!
//! All randomness comes from ChaCha8 seeded with a `u64`. Trial `i` of an
//! experiment seeded with `s` uses seed `s ^ i` (see [`trial_seed`]), so any
//! single trial can be regenerated in isolation.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{sym_eigen, sym_eigenvalues, DataMatrix, Matrix, SquareMatrix};
use crate::recovery::SpectrumVector;

/// Seed used for trial `trial` of a run seeded with `seed`.
#[inline]
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    seed ^ trial
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Identity,
    /// Half the eigenvalues at `low`, half at `high`.
    TwoSpike {
        low: f64,
        high: f64,
    },
    /// Eigenvalues `max * i / d` for `i = 1..=d`.
    UniformSpectrum {
        max: f64,
    },
    /// `Σ[i][j] = rho^|i-j|`.
    Toeplitz {
        rho: f64,
    },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Identity => "identity",
            Family::TwoSpike { .. } => "two_spike",
            Family::UniformSpectrum { .. } => "uniform",
            Family::Toeplitz { .. } => "toeplitz",
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    /// Parses a family name into its default parameterization.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Family::Identity),
            "two_spike" | "two-spike" => Ok(Family::TwoSpike { low: 1.0, high: 2.0 }),
            "uniform" | "uniform_spectrum" => Ok(Family::UniformSpectrum { max: 2.0 }),
            "toeplitz" => Ok(Family::Toeplitz { rho: 0.3 }),
            other => Err(invalid(format!("unknown covariance family {other:?}"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A synthetic population covariance of dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceModel {
    pub family: Family,
    pub d: usize,
}

impl CovarianceModel {
    pub fn new(family: Family, d: usize) -> Result<Self> {
        let m = Self { family, d };
        m.validate()?;
        Ok(m)
    }

    pub fn identity(d: usize) -> Self {
        Self { family: Family::Identity, d }
    }

    pub fn two_spike(d: usize) -> Self {
        Self { family: Family::TwoSpike { low: 1.0, high: 2.0 }, d }
    }

    pub fn uniform_spectrum(d: usize) -> Self {
        Self { family: Family::UniformSpectrum { max: 2.0 }, d }
    }

    pub fn toeplitz(d: usize) -> Self {
        Self { family: Family::Toeplitz { rho: 0.3 }, d }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        match self.family {
            Family::Identity => Ok(()),
            Family::TwoSpike { low, high } => {
                if !self.d.is_multiple_of(2) {
                    return Err(invalid(format!("two_spike needs an even dimension, got {}", self.d)));
                }
                if !(low >= 0.0 && high >= 0.0 && low.is_finite() && high.is_finite()) {
                    return Err(invalid("two_spike eigenvalues must be finite and nonnegative"));
                }
                Ok(())
            }
            Family::UniformSpectrum { max } => {
                if !(max > 0.0 && max.is_finite()) {
                    return Err(invalid("uniform spectrum upper end must be positive"));
                }
                Ok(())
            }
            Family::Toeplitz { rho } => {
                if rho.is_nan() || rho.abs() >= 1.0 {
                    return Err(invalid(format!("toeplitz needs |rho| < 1, got {rho}")));
                }
                Ok(())
            }
        }
    }

    /// The explicit covariance matrix Σ.
    pub fn covariance(&self) -> Result<SquareMatrix> {
        self.validate()?;
        let d = self.d;
        match self.family {
            Family::Toeplitz { rho } => {
                let mut m = Matrix::zeros(d, d);
                for i in 0..d {
                    for j in 0..d {
                        m.set(i, j, rho.powi(i.abs_diff(j) as i32));
                    }
                }
                SquareMatrix::new(m)
            }
            _ => SquareMatrix::new(Matrix::from_diagonal(self.true_spectrum()?.values())),
        }
    }

    /// Sorted population eigenvalues.
    pub fn true_spectrum(&self) -> Result<SpectrumVector> {
        self.validate()?;
        let d = self.d;
        let values = match self.family {
            Family::Identity => vec![1.0; d],
            Family::TwoSpike { low, high } => {
                let (lo, hi) = if low <= high { (low, high) } else { (high, low) };
                let mut v = vec![lo; d / 2];
                v.extend(std::iter::repeat_n(hi, d / 2));
                v
            }
            Family::UniformSpectrum { max } => (1..=d).map(|i| max * i as f64 / d as f64).collect(),
            Family::Toeplitz { .. } => sym_eigenvalues(&self.covariance()?)?,
        };
        SpectrumVector::new(values)
    }

    /// Largest population eigenvalue.
    pub fn max_eigenvalue(&self) -> Result<f64> {
        Ok(*self.true_spectrum()?.values().last().expect("d >= 1"))
    }

    /// A matrix `S` with `SᵀS = Σ`. Diagonal families use `diag(√λ)`;
    /// Toeplitz uses the symmetric square root.
    pub fn factor(&self) -> Result<SquareMatrix> {
        match self.family {
            Family::Toeplitz { .. } => {
                let (vals, q) = sym_eigen(&self.covariance()?)?;
                if vals[0] < -1e-12 {
                    return Err(invalid("covariance is not positive semidefinite"));
                }
                let roots: Vec<f64> = vals.iter().map(|v| v.max(0.0).sqrt()).collect();
                let s = q.matmul(&Matrix::from_diagonal(&roots))?.matmul(&q.transpose())?;
                // Symmetrize away rounding.
                let d = self.d;
                let mut sym = Matrix::zeros(d, d);
                for i in 0..d {
                    for j in 0..d {
                        sym.set(i, j, 0.5 * (s.get(i, j) + s.get(j, i)));
                    }
                }
                SquareMatrix::new(sym)
            }
            _ => {
                let roots: Vec<f64> = self.true_spectrum()?.values().iter().map(|v| v.sqrt()).collect();
                SquareMatrix::new(Matrix::from_diagonal(&roots))
            }
        }
    }
}

/// Distribution of the i.i.d. entries of X; all have mean 0 and variance 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryDistribution {
    Gaussian,
    Rademacher,
    /// Uniform on `[-√3, √3]`.
    UniformScaled,
}

impl EntryDistribution {
    /// E[X⁴].
    pub fn fourth_moment(&self) -> f64 {
        match self {
            EntryDistribution::Gaussian => 3.0,
            EntryDistribution::Rademacher => 1.0,
            EntryDistribution::UniformScaled => 9.0 / 5.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EntryDistribution::Gaussian => "gaussian",
            EntryDistribution::Rademacher => "rademacher",
            EntryDistribution::UniformScaled => "uniform",
        }
    }

    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            EntryDistribution::Gaussian => rng.sample(StandardNormal),
            EntryDistribution::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            EntryDistribution::UniformScaled => {
                let s = 3f64.sqrt();
                rng.random_range(-s..s)
            }
        }
    }
}

impl FromStr for EntryDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" | "normal" => Ok(EntryDistribution::Gaussian),
            "rademacher" | "sign" => Ok(EntryDistribution::Rademacher),
            "uniform" | "uniform_scaled" => Ok(EntryDistribution::UniformScaled),
            other => Err(invalid(format!("unknown entry distribution {other:?}"))),
        }
    }
}

impl fmt::Display for EntryDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The n x d matrix X of i.i.d. entries, filled row by row.
pub fn sample_entries(n: usize, d: usize, entry: EntryDistribution, seed: u64) -> Matrix {
    let mut rng = rng_from_seed(seed);
    let data = (0..n * d).map(|_| entry.draw(&mut rng)).collect();
    Matrix::from_vec(n, d, data).expect("length matches")
}

/// `Y = X S` with X drawn by [`sample_entries`].
pub fn sample(s: &SquareMatrix, n: usize, entry: EntryDistribution, seed: u64) -> Result<DataMatrix> {
    if n == 0 {
        return Err(invalid("sample count must be at least 1"));
    }
    let x = sample_entries(n, s.order(), entry, seed);
    if s.is_diagonal() {
        let d = s.order();
        let diag: Vec<f64> = (0..d).map(|j| s.get(j, j)).collect();
        let mut data = x.into_vec();
        for row in data.chunks_mut(d) {
            for (v, c) in row.iter_mut().zip(&diag) {
                *v *= c;
            }
        }
        return DataMatrix::new(Matrix::from_vec(n, d, data)?);
    }
    DataMatrix::new(x.matmul(s.matrix())?)
}

/// Draws `n` samples from `model`.
pub fn sample_model(model: &CovarianceModel, n: usize, entry: EntryDistribution, seed: u64) -> Result<DataMatrix> {
    sample(&model.factor()?, n, entry, seed)
}
