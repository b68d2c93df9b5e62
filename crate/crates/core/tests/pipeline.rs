use specest_core::moments::monte_carlo_moments;
use specest_core::recovery::{recover_distribution, WeightScheme};
use specest_core::synth::{sample_model, CovarianceModel, EntryDistribution};
use specest_core::wasserstein::{w1, PointMassDistribution};
use specest_core::{
    empirical_spectrum, estimate_moments, estimate_spectrum, DataMatrix, MomentEstimate, RecoveryConfig,
};

fn mean_abs_error(values: &[f64], target: f64) -> f64 {
    values.iter().map(|v| (v - target).abs()).sum::<f64>() / values.len() as f64
}

#[test]
fn identity_beats_sample_covariance() {
    let model = CovarianceModel::identity(512);
    let y = sample_model(&model, 256, EntryDistribution::Gaussian, 17).unwrap();
    let est = estimate_spectrum(&y, &RecoveryConfig::new(2.0)).unwrap();
    let emp = empirical_spectrum(&y).unwrap();
    let err = mean_abs_error(est.values(), 1.0);
    assert!(err <= 0.15, "error {err}");
    assert!(err < mean_abs_error(emp.values(), 1.0));
}

#[test]
fn output_is_sorted_and_bounded() {
    for (model, b) in [(CovarianceModel::two_spike(40), 3.0), (CovarianceModel::toeplitz(40), 4.0)] {
        let y = sample_model(&model, 20, EntryDistribution::Rademacher, 3).unwrap();
        let s = estimate_spectrum(&y, &RecoveryConfig::new(b)).unwrap();
        assert_eq!(s.len(), 40);
        assert!(s.values().windows(2).all(|w| w[0] <= w[1]));
        assert!(s.values().iter().all(|&v| (0.0..=b).contains(&v)));
    }
}

#[test]
fn bound_scaling_is_consistent() {
    // Rescaling by 4 reweights the moments against each other, so individual
    // quantiles can jump across a gap; the distributions stay close.
    let b = 2.5;
    let coarse_step = 4.0 * b * 0.01;
    for model in [CovarianceModel::identity(200), CovarianceModel::two_spike(200), CovarianceModel::toeplitz(200)] {
        for seed in 0..4 {
            let y = sample_model(&model, 200, EntryDistribution::Gaussian, seed).unwrap();
            let cfg = RecoveryConfig::new(b).with_mesh_step(0.01);
            let lo = estimate_spectrum(&y, &cfg).unwrap();
            let hi = estimate_spectrum(&y, &RecoveryConfig { b: 4.0 * b, ..cfg }).unwrap();
            let dist = lo.w1(&hi).unwrap();
            assert!(dist <= 2.0 * coarse_step, "{} seed {seed}: {dist}", model.family);
        }
    }
}

#[test]
fn bound_scaling_with_exact_moments() {
    // Noise-free moments of a distribution on both meshes: the rescaled
    // recoveries coincide.
    let atoms = [0.5, 1.0, 2.0];
    let masses = [0.25, 0.25, 0.5];
    for b in [2.5, 10.0] {
        let truth = PointMassDistribution::new(atoms.iter().map(|x| x / b).collect(), masses.to_vec()).unwrap();
        let alpha = MomentEstimate::new(truth.moments(7), 100, 100, b).unwrap();
        let cfg = RecoveryConfig::new(b).with_mesh_step(0.0025).with_weights(WeightScheme::Uniform);
        let rec = recover_distribution(&alpha, &cfg).unwrap().distribution.scaled(b);
        let want = PointMassDistribution::new(atoms.to_vec(), masses.to_vec()).unwrap();
        assert!(w1(&want, &rec.to_point_masses()) <= 2.0 * b * 0.0025, "b = {b}");
    }
}

#[test]
fn diagonal_data_has_only_a_first_moment() {
    // Y = √8·I: the sample covariance is exactly I, but the Gram matrix is
    // diagonal so every cycle of length >= 2 is zero.
    let s = 8f64.sqrt();
    let rows: Vec<Vec<f64>> = (0..8).map(|i| (0..8).map(|j| if i == j { s } else { 0.0 }).collect()).collect();
    let y = DataMatrix::from_rows(&rows).unwrap();
    let m = estimate_moments(&y, 7, 1.0).unwrap();
    assert!((m.values[0] - 1.0).abs() < 1e-12);
    assert!(m.values[1..].iter().all(|&v| v == 0.0));
    assert!(empirical_spectrum(&y).unwrap().values().iter().all(|&v| (v - 1.0).abs() < 1e-12));
    let est = estimate_spectrum(&y, &RecoveryConfig::new(2.0)).unwrap();
    assert_eq!(est.len(), 8);
}

#[test]
fn three_atom_moments_recover_within_tolerance() {
    let truth = PointMassDistribution::new(vec![0.1, 0.45, 0.9], vec![0.3, 0.3, 0.4]).unwrap();
    for scheme in [WeightScheme::Uniform, WeightScheme::Theoretical] {
        let alpha = MomentEstimate::new(truth.moments(7), 200, 200, 1.0).unwrap();
        let cfg = RecoveryConfig::new(1.0).with_mesh_step(1.0 / 200.0).with_weights(scheme);
        let rec = recover_distribution(&alpha, &cfg).unwrap();
        assert_eq!(rec.distribution.support().len(), 201);
        let err = w1(&truth, &rec.distribution.to_point_masses());
        assert!(err <= 0.05, "{scheme}: {err}");
    }
}

#[test]
fn uniform_entries_are_unbiased() {
    let model = CovarianceModel::two_spike(8);
    let trace_moments = [1.5, 2.5, 4.5];
    let stats = monte_carlo_moments(&model, EntryDistribution::UniformScaled, 12, 3, 4000, 99).unwrap();
    for (s, want) in stats.iter().zip(trace_moments) {
        assert!((s.mean - want).abs() <= 4.0 * s.std_error(), "{} vs {want}", s.mean);
    }
}
