//! Unbiased spectral moment estimation from increasing cycles.
//!
//! With `A = Y Yᵀ` and `G` its strict upper triangle, the sum of
//! `A[σ1][σ2] A[σ2][σ3] ... A[σk][σ1]` over all index tuples
//! `σ1 < σ2 < ... < σk` equals `tr(G^(k-1) A)`. Each such product has
//! expectation `tr(Σ^k)`, so dividing by `d * C(n, k)` gives an unbiased
//! estimate of the k-th moment of the population spectral distribution.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{gram, strict_upper, DataMatrix, Matrix, SquareMatrix};
use crate::synth::{sample, trial_seed, CovarianceModel, EntryDistribution};

/// Limit on the number of tuples [`brute_force_increasing`] will visit.
pub const BRUTE_FORCE_LIMIT: f64 = 1e6;

/// Estimated moments `α̂_1..α̂_kmax` of the spectrum scaled by `1/scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub values: Vec<f64>,
    pub n: usize,
    pub d: usize,
    /// Eigenvalue bound `b` the data was divided by before estimation.
    pub scale: f64,
}

impl MomentEstimate {
    pub fn new(values: Vec<f64>, n: usize, d: usize, scale: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("at least one moment is required"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("moment estimate"));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(invalid(format!("scale must be positive, got {scale}")));
        }
        if n == 0 || d == 0 {
            return Err(invalid("n and d must be positive"));
        }
        Ok(Self { values, n, d, scale })
    }

    pub fn k_max(&self) -> usize {
        self.values.len()
    }

    /// The moments of the unscaled spectrum, `α̂_k * b^k`.
    pub fn unscaled(&self) -> Vec<f64> {
        self.values.iter().enumerate().map(|(i, v)| v * self.scale.powi(i as i32 + 1)).collect()
    }
}

/// `C(n, k)` in floating point.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (1..=k).fold(1.0, |acc, i| acc * (n - k + i) as f64 / i as f64)
}

/// `[tr(A), tr(G A), tr(G² A), ..., tr(G^(k_max-1) A)]`.
///
/// Powers of `G` stay strictly upper triangular, so each step only touches
/// the upper triangle.
pub fn cycle_traces(a: &SquareMatrix, k_max: usize) -> Result<Vec<f64>> {
    let n = a.order();
    let g = strict_upper(a);
    let mut out = Vec::with_capacity(k_max);
    if k_max == 0 {
        return Ok(out);
    }
    out.push(a.trace());
    let mut f = g.matrix().clone();
    for step in 2..=k_max {
        out.push(trace_of_product_sym(&f, a));
        if step < k_max {
            f = upper_mul(&f, g.matrix(), n);
        }
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("cycle trace"));
    }
    Ok(out)
}

/// `tr(F A)` for symmetric `A`: the sum of the elementwise product.
fn trace_of_product_sym(f: &Matrix, a: &SquareMatrix) -> f64 {
    let n = a.order();
    let row_sums: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| f.row(i)[i + 1..].iter().zip(&a.row(i)[i + 1..]).map(|(x, y)| x * y).sum())
        .collect();
    row_sums.iter().sum()
}

/// Product of two strictly upper triangular matrices.
fn upper_mul(f: &Matrix, g: &Matrix, n: usize) -> Matrix {
    let mut out = vec![0.0; n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(i, out_row)| {
        let f_row = f.row(i);
        for l in i + 1..n {
            let fl = f_row[l];
            if fl == 0.0 {
                continue;
            }
            let g_row = g.row(l);
            for j in l + 1..n {
                out_row[j] += fl * g_row[j];
            }
        }
    });
    Matrix::from_vec(n, n, out).expect("square")
}

fn check_order(k: usize, n: usize) -> Result<()> {
    if k == 0 {
        return Err(invalid("moment order k must be at least 1"));
    }
    if k > n {
        return Err(invalid(format!("moment order k = {k} exceeds sample count n = {n}; no increasing cycle exists")));
    }
    Ok(())
}

/// `tr(G^(k-1) A) / (d * C(n, k))`.
pub fn estimate_moment(y: &DataMatrix, k: usize) -> Result<f64> {
    check_order(k, y.n())?;
    let a = gram(y)?;
    let t = cycle_traces(&a, k)?[k - 1];
    Ok(t / (y.d() as f64 * binomial(y.n(), k)))
}

/// Estimates moments `1..=k_max` of the spectrum of `Σ / b`.
pub fn estimate_moments(y: &DataMatrix, k_max: usize, b: f64) -> Result<MomentEstimate> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(invalid(format!("eigenvalue bound b must be positive, got {b}")));
    }
    check_order(k_max, y.n())?;
    let scaled = y.scaled(1.0 / b.sqrt())?;
    let a = gram(&scaled)?;
    let traces = cycle_traces(&a, k_max)?;
    let (n, d) = (y.n(), y.d());
    let values = traces.iter().enumerate().map(|(i, t)| t / (d as f64 * binomial(n, i + 1))).collect();
    MomentEstimate::new(values, n, d, b)
}

/// `(1/d) tr((YᵀY / n)^k)`, the k-th moment of the empirical spectrum.
pub fn empirical_moment(y: &DataMatrix, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(invalid("moment order k must be at least 1"));
    }
    let (n, d) = (y.n(), y.d());
    // The nonzero spectra of YᵀY and YYᵀ coincide; use the smaller side.
    let m = if n <= d { gram(y)?.into_matrix() } else { y.transpose().matmul(y.matrix())? }.scaled(1.0 / n as f64);
    let mut p = m.clone();
    for _ in 1..k - 1 {
        p = p.matmul(&m)?;
    }
    let t = if k == 1 {
        (0..m.rows()).map(|i| m.get(i, i)).sum::<f64>()
    } else {
        // tr(P M) with M symmetric.
        p.as_slice().iter().zip(m.as_slice()).map(|(a, b)| a * b).sum()
    };
    if !t.is_finite() {
        return Err(Error::NonFinite("empirical moment"));
    }
    Ok(t / d as f64)
}

/// Sum of `A[σ1][σ2] ... A[σk][σ1]` over all `σ1 < ... < σk`, by enumeration.
pub fn brute_force_increasing(a: &SquareMatrix, k: usize) -> Result<f64> {
    let n = a.order();
    check_order(k, n)?;
    let count = binomial(n, k);
    if count > BRUTE_FORCE_LIMIT {
        return Err(Error::ResourceLimit(format!("C({n}, {k}) = {count:e} tuples exceeds {BRUTE_FORCE_LIMIT:e}")));
    }
    let mut idx: Vec<usize> = (0..k).collect();
    let mut total = 0.0;
    loop {
        let mut prod = 1.0;
        for w in 0..k {
            prod *= a.get(idx[w], idx[(w + 1) % k]);
        }
        total += prod;
        // Next combination in lexicographic order.
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return Ok(total);
        }
        i -= 1;
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Sample mean and unbiased sample variance over independent trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloStats {
    pub mean: f64,
    pub variance: f64,
    pub trials: usize,
}

impl MonteCarloStats {
    pub fn from_samples(xs: &[f64]) -> Self {
        let t = xs.len();
        let mean = xs.iter().sum::<f64>() / t as f64;
        let variance = if t > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (t - 1) as f64 } else { 0.0 };
        Self { mean, variance, trials: t }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        (self.variance / self.trials as f64).sqrt()
    }
}

/// Runs [`estimate_moment`] for orders `1..=k_max` on `trials` independent
/// draws from `model` and summarizes each order. Trial `i` uses seed
/// `seed ^ i`, so the result does not depend on the thread count.
pub fn monte_carlo_moments(
    model: &CovarianceModel,
    entry: EntryDistribution,
    n: usize,
    k_max: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<MonteCarloStats>> {
    if trials < 2 {
        return Err(invalid("at least two trials are needed for a variance"));
    }
    check_order(k_max, n)?;
    let s = model.factor()?;
    let d = model.d;
    let per_trial: Vec<Vec<f64>> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let y = sample(&s, n, entry, trial_seed(seed, i))?;
            let traces = cycle_traces(&gram(&y)?, k_max)?;
            Ok(traces.iter().enumerate().map(|(j, t)| t / (d as f64 * binomial(n, j + 1))).collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..k_max)
        .map(|j| {
            let xs: Vec<f64> = per_trial.iter().map(|v| v[j]).collect();
            MonteCarloStats::from_samples(&xs)
        })
        .collect())
}

/// Mean and variance of the order-`k` estimate across `trials` draws.
pub fn monte_carlo_variance(
    model: &CovarianceModel,
    entry: EntryDistribution,
    n: usize,
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloStats> {
    if trials < 100 {
        return Err(invalid(format!("at least 100 trials are required, got {trials}")));
    }
    Ok(monte_carlo_moments(model, entry, n, k, trials, seed)?[k - 1])
}

/// The variance bound on the cycle average with its constant factor left to
/// the caller: `f * max(d^(k-2)/n^k, d^(1/2-1/k)/n, 1/n) * tr(Σ^k)²`.
///
/// This bounds the average over cycles, which is `d` times the normalized
/// estimate returned by [`estimate_moment`].
pub fn variance_bound(n: usize, d: usize, k: usize, trace_power: f64, constant: f64) -> f64 {
    let (n, d, kf) = (n as f64, d as f64, k as f64);
    let rate = (d.powf(kf - 2.0) / n.powf(kf)).max(d.powf(0.5 - 1.0 / kf) / n).max(1.0 / n);
    constant * rate * trace_power * trace_power
}
