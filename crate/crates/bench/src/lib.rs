//! Shared inputs for the benchmarks.

use specest_core::lp::WeightedL1Problem;
use specest_core::recovery::build_mesh;
use specest_core::synth::{sample_model, CovarianceModel, EntryDistribution};
use specest_core::wasserstein::PointMassDistribution;
use specest_core::DataMatrix;

pub const SEED: u64 = 7;

pub fn two_spike_data(d: usize, n: usize) -> DataMatrix {
    sample_model(&CovarianceModel::two_spike(d), n, EntryDistribution::Gaussian, SEED).expect("valid model")
}

/// Moment-matching problem on a mesh of `points` points whose target is the
/// first `k` moments of a three-atom distribution, with uniform weights.
pub fn lp_problem(points: usize, k: usize) -> WeightedL1Problem {
    let mesh = build_mesh(1.0 / (points - 1) as f64, points).expect("valid mesh").points;
    let truth = PointMassDistribution::new(vec![0.2, 0.55, 0.9], vec![0.3, 0.3, 0.4]).expect("valid");
    WeightedL1Problem::new(mesh, truth.moments(k), vec![1.0; k]).expect("valid problem")
}
