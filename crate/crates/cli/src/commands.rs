use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use specest_core::chebyshev::chebyshev_construction;
use specest_core::synth::sample_model;
use specest_core::{estimate_spectrum, heuristic_bound, read_csv, write_csv, CovarianceModel, RecoveryConfig};

use crate::args::{EstimateArgs, GenerateArgs, LowerBoundArgs};

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn estimate(args: &EstimateArgs) -> Result<()> {
    let file = File::open(&args.input).with_context(|| format!("cannot open {}", args.input.display()))?;
    let y = read_csv(BufReader::new(file)).with_context(|| format!("cannot parse {}", args.input.display()))?;
    let b = match args.recovery.b {
        Some(b) => b,
        None => {
            let b = heuristic_bound(&y)?;
            eprintln!("note: --b not given; using heuristic bound b = {b}");
            b
        }
    };
    let cfg = RecoveryConfig {
        k_max: args.recovery.k,
        b,
        mesh_step: args.recovery.mesh_step,
        mesh_cap: args.recovery.mesh_cap,
        weight_scheme: args.recovery.weights,
    };
    let spectrum = estimate_spectrum(&y, &cfg)?;
    let mut w = output(args.out.as_deref())?;
    for v in spectrum.values() {
        writeln!(w, "{v}")?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct Side {
    locations: Vec<f64>,
    masses: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct LowerBoundReport {
    k: usize,
    p: Side,
    q: Side,
    moment_differences: Vec<f64>,
    max_moment_difference: f64,
    w1: f64,
    threshold: f64,
    exceeds_threshold: bool,
}

pub fn lower_bound(args: &LowerBoundArgs) -> Result<()> {
    let pair = chebyshev_construction(args.k)?;
    let side = |d: &specest_core::PointMassDistribution| Side {
        locations: d.locations().to_vec(),
        masses: d.masses().to_vec(),
    };
    let report = LowerBoundReport {
        k: pair.k,
        p: side(&pair.p),
        q: side(&pair.q),
        moment_differences: pair.moment_differences(),
        max_moment_difference: pair.max_moment_difference(),
        w1: pair.w1(),
        threshold: pair.threshold(),
        exceeds_threshold: pair.w1() > pair.threshold(),
    };
    let mut w = output(args.out.as_deref())?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn generate(args: &GenerateArgs) -> Result<()> {
    let model = CovarianceModel::new(args.family, args.d)?;
    let y = sample_model(&model, args.n, args.entry_dist, args.seed)?;
    let mut w = output(args.out.as_deref())?;
    write_csv(&y, &mut w)?;
    w.flush()?;
    Ok(())
}
