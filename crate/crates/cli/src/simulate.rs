//! The `simulate` command: a grid of (d, n) cells, several trials each.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use specest_core::experiment::{run_cell, BoundChoice, TrialResult, TrialSettings};
use specest_core::{CovarianceModel, EntryDistribution, Family, WeightScheme};

use crate::args::SimulateArgs;
use crate::cdf::{validate_curve, write_curve, CurveLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Cell {
    pub d: usize,
    pub n: usize,
}

/// Cells in (d, n) order, without duplicates. Ratios are rounded to the
/// nearest integer sample count, at least 1.
pub fn cells(ds: &[usize], ratios: &[f64], ns: &[usize]) -> Vec<Cell> {
    let mut out: Vec<Cell> = ds
        .iter()
        .flat_map(|&d| {
            let from_ratio = ratios.iter().map(move |r| ((d as f64 * r).round() as usize).max(1));
            from_ratio.chain(ns.iter().copied()).map(move |n| Cell { d, n })
        })
        .collect();
    out.sort();
    out.dedup();
    out
}

#[derive(Debug, Serialize)]
struct SummaryRow<'a> {
    family: &'a str,
    d: usize,
    n: usize,
    trial: u64,
    w1_recovered: f64,
    w1_empirical: f64,
    runtime_ms: f64,
}

#[derive(Debug, Serialize)]
struct CellReport {
    d: usize,
    n: usize,
    completed: bool,
    error: Option<String>,
    b: Vec<f64>,
    mesh_capped_trials: usize,
    lp_not_optimal_trials: usize,
}

#[derive(Debug, Serialize)]
struct Metadata {
    family: String,
    entry_dist: EntryDistribution,
    trials: usize,
    k: usize,
    b: Option<f64>,
    bound: &'static str,
    mesh_cap: usize,
    mesh_step: Option<f64>,
    weights: WeightScheme,
    seed: u64,
    cells: Vec<CellReport>,
}

pub fn curve_path(dir: &Path, family: &str, cell: Cell, trial: u64, label: CurveLabel) -> PathBuf {
    dir.join(format!("{family}_d{}_n{}_trial{trial}_{}.csv", cell.d, cell.n, label.as_str()))
}

/// Returns the failing cells with their errors; an `Err` means the output
/// itself could not be written.
pub fn simulate(args: &SimulateArgs) -> Result<Vec<String>> {
    let threads = args.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().context("cannot start thread pool")?;

    let cdf_dir = args.out.join("cdf");
    fs::create_dir_all(&cdf_dir).with_context(|| format!("cannot create {}", cdf_dir.display()))?;

    let settings = TrialSettings {
        k_max: args.recovery.k,
        bound: args.recovery.b.map_or(BoundChoice::Heuristic, BoundChoice::Fixed),
        mesh_cap: args.recovery.mesh_cap,
        mesh_step: args.recovery.mesh_step,
        weight_scheme: args.recovery.weights,
        entry: args.entry_dist,
    };
    if args.recovery.b.is_none() {
        eprintln!("note: --b not given; using 2 x top sample-covariance eigenvalue per trial (heuristic)");
    }
    let family = args.family.name();

    let mut summary = csv::Writer::from_path(args.out.join("summary.csv")).context("cannot create summary.csv")?;
    let mut failures = Vec::new();
    let mut reports = Vec::new();
    for cell in cells(&args.d, &args.n_ratio, &args.n) {
        let started = Instant::now();
        let result = CovarianceModel::new(args.family, cell.d)
            .and_then(|model| pool.install(|| run_cell(&model, cell.n, &settings, args.trials, args.seed)));
        let trials = match result {
            Ok(t) => t,
            Err(e) => {
                failures.push(format!("{family} d={} n={}: {e}", cell.d, cell.n));
                reports.push(CellReport {
                    d: cell.d,
                    n: cell.n,
                    completed: false,
                    error: Some(e.to_string()),
                    b: vec![],
                    mesh_capped_trials: 0,
                    lp_not_optimal_trials: 0,
                });
                continue;
            }
        };
        write_cell(&cdf_dir, family, cell, &trials)?;
        for t in &trials {
            summary.serialize(SummaryRow {
                family,
                d: cell.d,
                n: cell.n,
                trial: t.trial,
                w1_recovered: t.w1_recovered,
                w1_empirical: t.w1_empirical,
                runtime_ms: if args.no_timing { 0.0 } else { t.runtime_ms },
            })?;
        }
        let mean = |f: fn(&TrialResult) -> f64| trials.iter().map(f).sum::<f64>() / trials.len() as f64;
        eprintln!(
            "{family} d={} n={}: mean W1 recovered {:.4}, empirical {:.4} ({:.1?})",
            cell.d,
            cell.n,
            mean(|t| t.w1_recovered),
            mean(|t| t.w1_empirical),
            started.elapsed()
        );
        reports.push(CellReport {
            d: cell.d,
            n: cell.n,
            completed: true,
            error: None,
            b: trials.iter().map(|t| t.b).collect(),
            mesh_capped_trials: trials.iter().filter(|t| t.mesh_capped).count(),
            lp_not_optimal_trials: trials.iter().filter(|t| !t.lp_optimal).count(),
        });
    }
    summary.flush()?;

    let meta = Metadata {
        family: family_label(args.family),
        entry_dist: args.entry_dist,
        trials: args.trials,
        k: args.recovery.k,
        b: args.recovery.b,
        bound: if args.recovery.b.is_some() { "fixed" } else { "heuristic" },
        mesh_cap: args.recovery.mesh_cap,
        mesh_step: args.recovery.mesh_step,
        weights: args.recovery.weights,
        seed: args.seed,
        cells: reports,
    };
    fs::write(args.out.join("metadata.json"), serde_json::to_string_pretty(&meta)? + "\n")
        .context("cannot write metadata.json")?;
    Ok(failures)
}

fn family_label(f: Family) -> String {
    match f {
        Family::Identity => "identity".into(),
        Family::TwoSpike { low, high } => format!("two_spike(low={low}, high={high})"),
        Family::UniformSpectrum { max } => format!("uniform(max={max})"),
        Family::Toeplitz { rho } => format!("toeplitz(rho={rho})"),
    }
}

fn write_cell(dir: &Path, family: &str, cell: Cell, trials: &[TrialResult]) -> Result<()> {
    for t in trials {
        for label in CurveLabel::ALL {
            let values = match label {
                CurveLabel::True => t.truth.values(),
                CurveLabel::Empirical => t.empirical.values(),
                CurveLabel::Recovered => t.recovered.values(),
            };
            let path = curve_path(dir, family, cell, t.trial, label);
            write_curve(&path, values)?;
            validate_curve(&path)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_grid_is_sorted_and_deduplicated() {
        let c = cells(&[64, 32], &[0.5, 1.0 / 8.0], &[16]);
        let pairs: Vec<(usize, usize)> = c.iter().map(|c| (c.d, c.n)).collect();
        assert_eq!(pairs, vec![(32, 4), (32, 16), (64, 8), (64, 16), (64, 32)]);
        assert_eq!(cells(&[3], &[0.01], &[])[0].n, 1);
    }
}
