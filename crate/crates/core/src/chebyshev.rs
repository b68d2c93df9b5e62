//! Pairs of distributions with matching low-order moments but a large W₁
//! distance, built from the roots of the Chebyshev polynomial `T_k`.
//!
//! For any degree-k polynomial with distinct real roots `x_i`,
//! `Σ_i x_i^l / P'(x_i) = 0` for every `l <= k - 2`. Splitting the signed
//! measure with mass `1/T_k'(x_i)` at each root into its positive and
//! negative parts therefore yields two distributions whose first `k - 2`
//! moments agree.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::wasserstein::{w1, PointMassDistribution};

/// Roots of `T_k` in ascending order with signed weights `1/T_k'(x_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedMeasure {
    pub locations: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SignedMeasure {
    /// `x_i = -cos((2i - 1)π / 2k)` and
    /// `y_i = 1/T_k'(x_i) = 1/(k U_{k-1}(x_i))`, using
    /// `U_{k-1}(cos θ) = sin(kθ)/sin θ`.
    pub fn chebyshev(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(invalid("Chebyshev degree must be at least 2"));
        }
        let kf = k as f64;
        let (locations, weights) = (1..=k)
            .map(|i| {
                let theta = PI - (2 * i - 1) as f64 * PI / (2.0 * kf);
                let x = theta.cos();
                let u = (kf * theta).sin() / theta.sin();
                (x, 1.0 / (kf * u))
            })
            .unzip();
        Ok(Self { locations, weights })
    }

    /// `Σ_i y_i x_i^l`.
    pub fn power_sum(&self, l: u32) -> f64 {
        self.locations.iter().zip(&self.weights).map(|(x, y)| y * x.powi(l as i32)).sum()
    }

    pub fn positive_mass(&self) -> f64 {
        self.weights.iter().filter(|&&y| y > 0.0).sum()
    }

    pub fn negative_mass(&self) -> f64 {
        -self.weights.iter().filter(|&&y| y < 0.0).sum::<f64>()
    }

    fn part(&self, positive: bool) -> Result<PointMassDistribution> {
        let (loc, w): (Vec<f64>, Vec<f64>) = self
            .locations
            .iter()
            .zip(&self.weights)
            .filter(|(_, &y)| if positive { y > 0.0 } else { y < 0.0 })
            .map(|(&x, &y)| (x, y.abs()))
            .unzip();
        PointMassDistribution::from_weights(&loc, &w)
    }
}

/// The matched-moment pair and the measure it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevPair {
    pub k: usize,
    pub measure: SignedMeasure,
    /// Normalized positive part.
    pub p: PointMassDistribution,
    /// Normalized negative part.
    pub q: PointMassDistribution,
}

impl ChebyshevPair {
    /// `mom_i(p) - mom_i(q)` for `i = 1..=k-2`.
    pub fn moment_differences(&self) -> Vec<f64> {
        let a = moments_of(&self.p, self.k - 2);
        let b = moments_of(&self.q, self.k - 2);
        a.iter().zip(&b).map(|(x, y)| x - y).collect()
    }

    pub fn max_moment_difference(&self) -> f64 {
        self.moment_differences().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn w1(&self) -> f64 {
        w1(&self.p, &self.q)
    }

    /// The separation threshold `1/(2k)`.
    pub fn threshold(&self) -> f64 {
        1.0 / (2.0 * self.k as f64)
    }
}

pub fn chebyshev_construction(k: usize) -> Result<ChebyshevPair> {
    if k < 4 || !k.is_multiple_of(2) {
        return Err(invalid(format!("k must be an even integer >= 4, got {k}")));
    }
    let measure = SignedMeasure::chebyshev(k)?;
    let p = measure.part(true)?;
    let q = measure.part(false)?;
    Ok(ChebyshevPair { k, measure, p, q })
}

/// `Σ_j mass_j * loc_j^i` for `i = 1..=k`.
pub fn moments_of(dist: &PointMassDistribution, k: usize) -> Vec<f64> {
    dist.moments(k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub passed: bool,
    /// Smallest slack to either side of the bound over all checked indices;
    /// negative when violated.
    pub margin: f64,
    /// Observed range of the quantity after dividing out the bound's shape,
    /// e.g. `|y_i| k² / i`.
    pub observed_min: f64,
    pub observed_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub k: usize,
    pub checks: Vec<BoundCheck>,
}

impl BoundsReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&BoundCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn range_check(name: &str, values: impl Iterator<Item = (f64, f64, f64, f64)>) -> BoundCheck {
    // (value, lower, upper, normalizer)
    let mut margin = f64::INFINITY;
    let (mut lo_obs, mut hi_obs) = (f64::INFINITY, f64::NEG_INFINITY);
    for (v, lo, hi, norm) in values {
        margin = margin.min(v - lo).min(hi - v);
        lo_obs = lo_obs.min(v / norm);
        hi_obs = hi_obs.max(v / norm);
    }
    BoundCheck { name: name.into(), passed: margin >= 0.0, margin, observed_min: lo_obs, observed_max: hi_obs }
}

/// Checks, for `i <= k/2`:
/// * `weight`: `i/k² <= |y_i| <= iπ/k²`
/// * `spacing`: `5i/k² <= |x_{i+1} - x_i| <= 10i/k²`
/// * `half_mass`: total positive weight lies in `[1/4, 1/2]`
///
/// Since `y_1 < 0` for even `k`, the odd-indexed weights form the negative
/// part, so the half-mass check uses the magnitude of either part.
pub fn root_weight_bounds_check(k: usize) -> Result<BoundsReport> {
    if k < 4 || !k.is_multiple_of(2) {
        return Err(invalid(format!("k must be an even integer >= 4, got {k}")));
    }
    let m = SignedMeasure::chebyshev(k)?;
    let k2 = (k * k) as f64;
    let half = k / 2;
    let weight = range_check(
        "weight",
        (1..=half).map(|i| {
            let fi = i as f64;
            (m.weights[i - 1].abs(), fi / k2, fi * PI / k2, fi / k2)
        }),
    );
    let spacing = range_check(
        "spacing",
        (1..=half).map(|i| {
            let fi = i as f64;
            ((m.locations[i] - m.locations[i - 1]).abs(), 5.0 * fi / k2, 10.0 * fi / k2, fi / k2)
        }),
    );
    let pos = m.positive_mass();
    let half_mass = range_check("half_mass", std::iter::once((pos, 0.25, 0.5, 1.0)));
    Ok(BoundsReport { k, checks: vec![weight, spacing, half_mass] })
}
