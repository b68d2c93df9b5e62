//! From data to an estimated population spectrum.
//!
//! The pipeline divides the data by `√b`, estimates the first `k_max`
//! moments of the scaled spectrum, finds a distribution on a uniform mesh of
//! `[0, 1]` whose moments match them in weighted L1, rounds that
//! distribution to `d` equal masses at its `(d+1)`-quantiles and multiplies
//! back by `b`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{gram, scatter, sym_eigenvalues, DataMatrix, SquareMatrix};
use crate::lp::{self, SolveStatus, WeightedL1Problem};
use crate::moments::{estimate_moments, MomentEstimate};
use crate::wasserstein::{is_ascending, PointMassDistribution, MASS_TOL, QUANTILE_SLACK};

pub const DEFAULT_K_MAX: usize = 7;
pub const DEFAULT_MESH_CAP: usize = 4001;
/// Floor applied to moment estimates when they enter the LP weights.
pub const WEIGHT_FLOOR: f64 = 1e-6;

/// Sorted eigenvalue estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumVector(Vec<f64>);

impl SpectrumVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("spectrum"));
        }
        if values.iter().any(|&v| v < 0.0) {
            return Err(invalid("spectrum values must be nonnegative"));
        }
        if !is_ascending(&values) {
            return Err(invalid("spectrum must be sorted ascending"));
        }
        Ok(Self(values))
    }

    /// Sorts and clamps tiny negative rounding noise (down to `-tol`) to zero.
    pub fn from_unsorted(mut values: Vec<f64>, tol: f64) -> Result<Self> {
        values.sort_by(f64::total_cmp);
        for v in values.iter_mut() {
            if *v < 0.0 && *v >= -tol {
                *v = 0.0;
            }
        }
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn to_distribution(&self) -> PointMassDistribution {
        PointMassDistribution::uniform(&self.0).expect("non-empty finite spectrum")
    }

    /// W₁ between the two spectra viewed as uniform point masses, which is
    /// the mean absolute difference of the sorted values.
    pub fn w1(&self, other: &SpectrumVector) -> Result<f64> {
        let l1 = crate::wasserstein::l1_sorted(&self.0, &other.0)?;
        Ok(l1 / self.0.len() as f64)
    }
}

/// Point masses on an ascending mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDistribution {
    support: Vec<f64>,
    masses: Vec<f64>,
}

impl SpectralDistribution {
    pub fn new(support: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if support.len() != masses.len() {
            return Err(Error::DimensionMismatch { expected: support.len(), got: masses.len() });
        }
        if support.is_empty() {
            return Err(invalid("distribution needs at least one support point"));
        }
        if !is_ascending(&support) || support[0] < 0.0 {
            return Err(invalid("support must be nonnegative and ascending"));
        }
        if masses.iter().any(|&m| m.is_nan() || m < 0.0) {
            return Err(invalid("masses must be nonnegative"));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(invalid(format!("masses sum to {total}, not 1")));
        }
        Ok(Self { support, masses })
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn to_point_masses(&self) -> PointMassDistribution {
        PointMassDistribution::from_weights(&self.support, &self.masses).expect("valid distribution")
    }

    /// Multiplies every support point by `c > 0`.
    pub fn scaled(&self, c: f64) -> SpectralDistribution {
        Self { support: self.support.iter().map(|x| x * c).collect(), masses: self.masses.clone() }
    }

    /// `(x, F(x))` at each support point carrying mass.
    pub fn cdf(&self) -> Vec<(f64, f64)> {
        let mut acc = 0.0;
        self.support
            .iter()
            .zip(&self.masses)
            .filter(|(_, &m)| m > 0.0)
            .map(|(&x, &m)| {
                acc += m;
                (x, acc)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    /// `1 / (c_i α̂_i)` with `c_i` tracking the standard deviation of the
    /// i-th moment estimate.
    Theoretical,
    /// All ones.
    Uniform,
}

impl FromStr for WeightScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theoretical" => Ok(WeightScheme::Theoretical),
            "uniform" => Ok(WeightScheme::Uniform),
            other => Err(invalid(format!("unknown weight scheme {other:?}"))),
        }
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightScheme::Theoretical => "theoretical",
            WeightScheme::Uniform => "uniform",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConfig {
    pub k_max: usize,
    /// Upper bound on the population eigenvalues.
    pub b: f64,
    /// Mesh spacing on `[0, 1]`; `None` means `1 / max(d, n)`.
    pub mesh_step: Option<f64>,
    pub mesh_cap: usize,
    pub weight_scheme: WeightScheme,
}

impl RecoveryConfig {
    pub fn new(b: f64) -> Self {
        Self {
            k_max: DEFAULT_K_MAX,
            b,
            mesh_step: None,
            mesh_cap: DEFAULT_MESH_CAP,
            weight_scheme: WeightScheme::Theoretical,
        }
    }

    pub fn with_k_max(mut self, k_max: usize) -> Self {
        self.k_max = k_max;
        self
    }

    pub fn with_mesh_step(mut self, step: f64) -> Self {
        self.mesh_step = Some(step);
        self
    }

    pub fn with_mesh_cap(mut self, cap: usize) -> Self {
        self.mesh_cap = cap;
        self
    }

    pub fn with_weights(mut self, scheme: WeightScheme) -> Self {
        self.weight_scheme = scheme;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_max == 0 {
            return Err(invalid("k_max must be at least 1"));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(invalid(format!("eigenvalue bound b must be positive, got {}", self.b)));
        }
        if let Some(e) = self.mesh_step {
            if !(e > 0.0 && e.is_finite()) {
                return Err(invalid(format!("mesh step must be positive, got {e}")));
            }
        }
        if self.mesh_cap < 2 {
            return Err(invalid("mesh cap must be at least 2"));
        }
        Ok(())
    }

    pub fn resolved_step(&self, n: usize, d: usize) -> f64 {
        self.mesh_step.unwrap_or(1.0 / n.max(d).max(1) as f64)
    }
}

/// Uniform mesh of `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub points: Vec<f64>,
    /// Actual spacing.
    pub step: f64,
    pub requested_step: f64,
    /// True when the requested spacing would have exceeded the point cap.
    pub capped: bool,
}

/// `{0, ε, 2ε, ..., 1}`. When `1/ε` is not an integer the spacing is refined
/// to `1 / ceil(1/ε)` so both endpoints are present; when the mesh would
/// exceed `mesh_cap` points it is coarsened to `1 / (mesh_cap - 1)`.
pub fn build_mesh(step: f64, mesh_cap: usize) -> Result<Mesh> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(invalid(format!("mesh step must be positive, got {step}")));
    }
    if mesh_cap < 2 {
        return Err(invalid("mesh cap must be at least 2"));
    }
    let wanted = (1.0 / step - 1e-9).ceil().max(1.0);
    let capped = wanted + 1.0 > mesh_cap as f64;
    let intervals = if capped { mesh_cap - 1 } else { wanted as usize };
    let points = (0..=intervals).map(|i| i as f64 / intervals as f64).collect();
    Ok(Mesh { points, step: 1.0 / intervals as f64, requested_step: step, capped })
}

/// `w_i = 1 / (c_i * max(α̂_i, floor))` with
/// `c_i = (2i)^(2i) * max(d^(i/2-1), 1) / n^(i/2)`, evaluated in log space.
pub fn default_weights(n: usize, d: usize, k_max: usize, alpha: &MomentEstimate) -> Vec<f64> {
    let (ln_n, ln_d) = ((n as f64).ln(), (d as f64).ln());
    (1..=k_max)
        .map(|i| {
            let fi = i as f64;
            let ln_c = 2.0 * fi * (2.0 * fi).ln() + ((fi / 2.0 - 1.0) * ln_d).max(0.0) - fi / 2.0 * ln_n;
            let a = alpha.values.get(i - 1).copied().unwrap_or(WEIGHT_FLOOR).max(WEIGHT_FLOOR);
            (-ln_c - a.ln()).exp().clamp(f64::MIN_POSITIVE, f64::MAX)
        })
        .collect()
}

/// Distribution recovered from moments together with solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredDistribution {
    /// On the `[0, 1]` mesh, before rescaling by `b`.
    pub distribution: SpectralDistribution,
    pub mesh_step: f64,
    pub mesh_capped: bool,
    pub weights: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    pub iterations: usize,
}

pub fn recover_distribution(alpha: &MomentEstimate, cfg: &RecoveryConfig) -> Result<RecoveredDistribution> {
    cfg.validate()?;
    let k = cfg.k_max.min(alpha.k_max());
    let mesh = build_mesh(cfg.resolved_step(alpha.n, alpha.d), cfg.mesh_cap)?;
    let weights = match cfg.weight_scheme {
        WeightScheme::Theoretical => default_weights(alpha.n, alpha.d, k, alpha),
        WeightScheme::Uniform => vec![1.0; k],
    };
    let prob = WeightedL1Problem::new(mesh.points.clone(), alpha.values[..k].to_vec(), weights.clone())?;
    let sol = lp::solve(&prob)?;
    Ok(RecoveredDistribution {
        distribution: SpectralDistribution::new(mesh.points, sol.p)?,
        mesh_step: mesh.step,
        mesh_capped: mesh.capped,
        weights,
        objective: sol.objective,
        status: sol.status,
        iterations: sol.iterations,
    })
}

/// `λ̂_i = min { x_j : Σ_{l<=j} p_l >= i/(d+1) }` for `i = 1..=d`.
pub fn quantile_vector(dist: &SpectralDistribution, d: usize) -> Result<SpectrumVector> {
    if d == 0 {
        return Err(invalid("d must be at least 1"));
    }
    let xs = dist.support();
    let ps = dist.masses();
    let mut out = Vec::with_capacity(d);
    let mut j = 0;
    let mut cdf = ps[0];
    for i in 1..=d {
        let level = i as f64 / (d + 1) as f64;
        while cdf < level - QUANTILE_SLACK && j + 1 < xs.len() {
            j += 1;
            cdf += ps[j];
        }
        out.push(xs[j]);
    }
    SpectrumVector::new(out)
}

/// Everything produced by one run of the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEstimate {
    /// Eigenvalue estimates on the original scale.
    pub spectrum: SpectrumVector,
    pub moments: MomentEstimate,
    pub recovery: RecoveredDistribution,
}

impl SpectrumEstimate {
    /// The recovered distribution on the original scale.
    pub fn distribution(&self) -> SpectralDistribution {
        self.recovery.distribution.scaled(self.moments.scale)
    }
}

pub fn estimate_spectrum_detailed(y: &DataMatrix, cfg: &RecoveryConfig) -> Result<SpectrumEstimate> {
    cfg.validate()?;
    if cfg.k_max > y.n() {
        return Err(invalid(format!("k_max = {} exceeds sample count n = {}", cfg.k_max, y.n())));
    }
    let moments = estimate_moments(y, cfg.k_max, cfg.b)?;
    let recovery = recover_distribution(&moments, cfg)?;
    let unit = quantile_vector(&recovery.distribution, y.d())?;
    let spectrum = SpectrumVector::new(unit.values().iter().map(|v| (v * cfg.b).min(cfg.b)).collect())?;
    Ok(SpectrumEstimate { spectrum, moments, recovery })
}

/// Estimated population eigenvalues, ascending, in `[0, b]`.
pub fn estimate_spectrum(y: &DataMatrix, cfg: &RecoveryConfig) -> Result<SpectrumVector> {
    Ok(estimate_spectrum_detailed(y, cfg)?.spectrum)
}

/// Eigenvalues of the sample covariance `YᵀY / n` (length d).
pub fn empirical_spectrum(y: &DataMatrix) -> Result<SpectrumVector> {
    let (n, d) = (y.n(), y.d());
    let small = if n < d { gram(y)? } else { scatter(y)? };
    let scaled = SquareMatrix::new(small.matrix().scaled(1.0 / n as f64))?;
    let mut ev = sym_eigenvalues(&scaled)?;
    let tol = 1e-10 * ev.last().copied().unwrap_or(0.0).abs().max(1.0);
    ev.resize(d, 0.0);
    SpectrumVector::from_unsorted(ev.into_iter().map(|v| if v < 0.0 && v >= -tol { 0.0 } else { v }).collect(), tol)
}

/// Heuristic eigenvalue bound: twice the top eigenvalue of `YᵀY / n`, by
/// power iteration on the smaller Gram side. It carries no guarantee.
pub fn heuristic_bound(y: &DataMatrix) -> Result<f64> {
    let (n, d) = (y.n(), y.d());
    let small = if n < d { gram(y)? } else { scatter(y)? };
    let m = small.order();
    let mut v: Vec<f64> = (0..m).map(|i| 1.0 + (i as f64 * 0.618).fract()).collect();
    let mut lambda = 0.0;
    for _ in 0..1000 {
        let w: Vec<f64> = (0..m).map(|i| crate::linalg::dot(small.row(i), &v)).collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        let next = norm / v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = w.into_iter().map(|x| x / norm).collect();
        let done = (next - lambda).abs() <= 1e-9 * next;
        lambda = next;
        if done {
            break;
        }
    }
    let top = lambda / n as f64;
    if top > 0.0 {
        Ok(2.0 * top)
    } else {
        Err(invalid("data matrix is zero; no eigenvalue bound can be inferred"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::wasserstein::w1;

    fn exact_moments(dist: &PointMassDistribution, k: usize, n: usize, d: usize) -> MomentEstimate {
        MomentEstimate::new(dist.moments(k), n, d, 1.0).unwrap()
    }

    #[test]
    fn mesh_construction() {
        let m = build_mesh(0.5, 4001).unwrap();
        assert_eq!(m.points, vec![0.0, 0.5, 1.0]);
        assert!(!m.capped);
        let m = build_mesh(1.0 / 4096.0, 4001).unwrap();
        assert_eq!(m.points.len(), 4001);
        assert!(m.capped);
        assert_eq!(m.step, 1.0 / 4000.0);
        for step in [0.3, 0.01, 1.0, 2.0, 1e-3] {
            let m = build_mesh(step, 4001).unwrap();
            assert_eq!(m.points[0], 0.0);
            assert_eq!(*m.points.last().unwrap(), 1.0);
            assert!(m.step <= step + 1e-12);
        }
        assert!(build_mesh(0.0, 10).is_err());
        assert!(build_mesh(0.1, 1).is_err());
    }

    #[test]
    fn first_weight_formula() {
        let n = 400;
        let alpha = MomentEstimate::new(vec![0.25], n, n, 1.0).unwrap();
        let w = default_weights(n, n, 1, &alpha);
        let c1 = 4.0 / (n as f64).sqrt();
        assert!((w[0] - 1.0 / (c1 * 0.25)).abs() < 1e-12 * w[0]);
    }

    #[test]
    fn weights_decrease_with_order() {
        let alpha = MomentEstimate::new(vec![1.0; 7], 256, 256, 1.0).unwrap();
        let w = default_weights(256, 256, 7, &alpha);
        assert!(w.windows(2).all(|p| p[1] < p[0]), "{w:?}");
        // Independent evaluation of c_i.
        for (i, wi) in w.iter().enumerate() {
            let i = (i + 1) as f64;
            let c = (2.0 * i).powf(2.0 * i) * (256f64).powf(i / 2.0 - 1.0).max(1.0) / (256f64).powf(i / 2.0);
            assert!((wi * c - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn negative_moment_uses_floor() {
        let alpha = MomentEstimate::new(vec![0.5, -0.2, 0.0], 100, 50, 1.0).unwrap();
        let w = default_weights(100, 50, 3, &alpha);
        assert!(w.iter().all(|v| v.is_finite() && *v > 0.0));
        let floored = MomentEstimate::new(vec![0.5, WEIGHT_FLOOR, WEIGHT_FLOOR], 100, 50, 1.0).unwrap();
        assert_eq!(w, default_weights(100, 50, 3, &floored));
    }

    #[test]
    fn point_mass_feed_through() {
        let cfg = RecoveryConfig::new(1.0).with_mesh_step(0.01);
        let truth = PointMassDistribution::point(0.5);
        let rec = recover_distribution(&exact_moments(&truth, 7, 1000, 1000), &cfg).unwrap();
        assert!(w1(&rec.distribution.to_point_masses(), &truth) <= rec.mesh_step + 1e-12);
    }

    #[test]
    fn all_ones_moments_give_mass_at_one() {
        let cfg = RecoveryConfig::new(1.0).with_mesh_step(0.01);
        let alpha = MomentEstimate::new(vec![1.0; 7], 500, 500, 1.0).unwrap();
        let rec = recover_distribution(&alpha, &cfg).unwrap();
        assert!(w1(&rec.distribution.to_point_masses(), &PointMassDistribution::point(1.0)) <= rec.mesh_step);
    }

    #[test]
    fn two_spike_feed_through() {
        // Eigenvalues 1 and 2 divided by b = 2.
        let truth = PointMassDistribution::new(vec![0.5, 1.0], vec![0.5, 0.5]).unwrap();
        let cfg = RecoveryConfig::new(2.0).with_mesh_step(0.005);
        let rec = recover_distribution(&exact_moments(&truth, 7, 1000, 1000), &cfg).unwrap();
        assert!(w1(&rec.distribution.to_point_masses(), &truth) <= 0.05);
    }

    #[test]
    fn quantile_examples() {
        let d = SpectralDistribution::new(vec![0.0, 0.7, 1.0], vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(quantile_vector(&d, 3).unwrap().values(), &[0.7, 0.7, 0.7]);
        let d = SpectralDistribution::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(quantile_vector(&d, 2).unwrap().values(), &[0.0, 1.0]);
    }

    /// Direct scan: for each level, walk the CDF from the start.
    fn scan_quantiles(xs: &[f64], ps: &[f64], d: usize) -> Vec<f64> {
        (1..=d)
            .map(|i| {
                let level = i as f64 / (d + 1) as f64;
                let mut acc = 0.0;
                for (x, p) in xs.iter().zip(ps) {
                    acc += p;
                    if acc >= level - QUANTILE_SLACK {
                        return *x;
                    }
                }
                *xs.last().unwrap()
            })
            .collect()
    }

    #[test]
    fn uniform_mesh_quantiles() {
        let xs: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let ps = vec![1.0 / 11.0; 11];
        let dist = SpectralDistribution::new(xs.clone(), ps.clone()).unwrap();
        let got = quantile_vector(&dist, 10).unwrap();
        assert_eq!(got.values(), scan_quantiles(&xs, &ps, 10).as_slice());
        // In exact arithmetic the i-th quantile is x_(i-1).
        assert_eq!(got.values(), &xs[..10]);
    }

    #[test]
    fn quantiles_match_scan_on_random_distributions() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..1000 {
            let t = rng.random_range(1..30);
            let mut xs: Vec<f64> = (0..t).map(|_| rng.random_range(0.0..3.0)).collect();
            xs.sort_by(f64::total_cmp);
            let raw: Vec<f64> =
                (0..t).map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..1.0) }).collect();
            let total: f64 = raw.iter().sum();
            if total == 0.0 {
                continue;
            }
            let ps: Vec<f64> = raw.iter().map(|p| p / total).collect();
            let d = rng.random_range(1..40);
            let dist = SpectralDistribution::new(xs.clone(), ps.clone()).unwrap();
            assert_eq!(quantile_vector(&dist, d).unwrap().values(), scan_quantiles(&xs, &ps, d).as_slice());
        }
    }

    #[test]
    fn deterministic_output() {
        let s = crate::synth::CovarianceModel::two_spike(40).factor().unwrap();
        let y = crate::synth::sample(&s, 30, crate::synth::EntryDistribution::Gaussian, 3).unwrap();
        let cfg = RecoveryConfig::new(4.0);
        let a = estimate_spectrum(&y, &cfg).unwrap();
        let b = estimate_spectrum(&y, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 40);
        assert!(a.values().iter().all(|&v| (0.0..=4.0).contains(&v)));
    }

    #[test]
    fn diagonal_data_has_no_cycles() {
        // Y = √8 I: A = 8I is diagonal, so every cycle of length >= 2 vanishes
        // and the moment estimates are exactly (1, 0, ..., 0).
        let y = DataMatrix::new(Matrix::identity(8).scaled(8f64.sqrt())).unwrap();
        let cfg = RecoveryConfig::new(2.0);
        let est = estimate_spectrum_detailed(&y, &cfg).unwrap();
        assert!((est.moments.values[0] - 0.5).abs() < 1e-15);
        assert!(est.moments.values[1..].iter().all(|&v| v == 0.0));
        assert_eq!(est.spectrum.len(), 8);
        assert!(empirical_spectrum(&y).unwrap().values().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn k_max_larger_than_n_is_rejected() {
        let y = DataMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!(estimate_spectrum(&y, &RecoveryConfig::new(1.0)).is_err());
        assert!(estimate_spectrum(&y, &RecoveryConfig::new(1.0).with_k_max(0)).is_err());
    }

    #[test]
    fn empirical_and_bound() {
        let y = DataMatrix::from_rows(&[[2.0, 0.0, 0.0], [0.0, 2.0, 0.0]]).unwrap();
        assert_eq!(empirical_spectrum(&y).unwrap().values(), &[0.0, 2.0, 2.0]);
        assert!((heuristic_bound(&y).unwrap() - 4.0).abs() < 1e-9);
        let z = DataMatrix::from_rows(&[[0.0, 0.0]]).unwrap();
        assert!(heuristic_bound(&z).is_err());
    }
}
