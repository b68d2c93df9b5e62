//! One synthetic trial: draw data, estimate, and score against the truth and
//! against the sample-covariance spectrum.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::recovery::{
    empirical_spectrum, estimate_spectrum_detailed, heuristic_bound, RecoveryConfig, SpectrumVector,
};
use crate::synth::{sample, trial_seed, CovarianceModel, EntryDistribution};

/// How the eigenvalue bound `b` is chosen for each trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundChoice {
    Fixed(f64),
    /// Twice the top eigenvalue of the sample covariance of the trial's data.
    Heuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSettings {
    pub k_max: usize,
    pub bound: BoundChoice,
    pub mesh_cap: usize,
    pub mesh_step: Option<f64>,
    pub weight_scheme: crate::recovery::WeightScheme,
    pub entry: EntryDistribution,
}

impl Default for TrialSettings {
    fn default() -> Self {
        let cfg = RecoveryConfig::new(1.0);
        Self {
            k_max: cfg.k_max,
            bound: BoundChoice::Heuristic,
            mesh_cap: cfg.mesh_cap,
            mesh_step: None,
            weight_scheme: cfg.weight_scheme,
            entry: EntryDistribution::Gaussian,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: u64,
    pub seed: u64,
    pub b: f64,
    pub truth: SpectrumVector,
    pub recovered: SpectrumVector,
    pub empirical: SpectrumVector,
    pub w1_recovered: f64,
    pub w1_empirical: f64,
    pub runtime_ms: f64,
    pub mesh_capped: bool,
    pub lp_optimal: bool,
}

/// Runs trial `trial` of a run seeded with `seed`; the data uses seed
/// `seed ^ trial`.
pub fn run_trial(
    model: &CovarianceModel,
    n: usize,
    settings: &TrialSettings,
    seed: u64,
    trial: u64,
) -> Result<TrialResult> {
    let s = model.factor()?;
    let truth = model.true_spectrum()?;
    run_trial_with(&s, &truth, n, settings, seed, trial)
}

fn run_trial_with(
    factor: &crate::linalg::SquareMatrix,
    truth: &SpectrumVector,
    n: usize,
    settings: &TrialSettings,
    seed: u64,
    trial: u64,
) -> Result<TrialResult> {
    let ts = trial_seed(seed, trial);
    let y = sample(factor, n, settings.entry, ts)?;
    let start = Instant::now();
    let b = match settings.bound {
        BoundChoice::Fixed(b) => b,
        BoundChoice::Heuristic => heuristic_bound(&y)?,
    };
    let cfg = RecoveryConfig {
        k_max: settings.k_max,
        b,
        mesh_step: settings.mesh_step,
        mesh_cap: settings.mesh_cap,
        weight_scheme: settings.weight_scheme,
    };
    let est = estimate_spectrum_detailed(&y, &cfg)?;
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    let empirical = empirical_spectrum(&y)?;
    Ok(TrialResult {
        trial,
        seed: ts,
        b,
        w1_recovered: est.spectrum.w1(truth)?,
        w1_empirical: empirical.w1(truth)?,
        truth: truth.clone(),
        recovered: est.spectrum,
        empirical,
        runtime_ms,
        mesh_capped: est.recovery.mesh_capped,
        lp_optimal: est.recovery.status == crate::lp::SolveStatus::Optimal,
    })
}

/// Runs `trials` independent trials in parallel; results are in trial order.
pub fn run_cell(
    model: &CovarianceModel,
    n: usize,
    settings: &TrialSettings,
    trials: usize,
    seed: u64,
) -> Result<Vec<TrialResult>> {
    let s = model.factor()?;
    let truth = model.true_spectrum()?;
    (0..trials as u64).into_par_iter().map(|t| run_trial_with(&s, &truth, n, settings, seed, t)).collect()
}
