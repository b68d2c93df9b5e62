use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use specest_core::{EntryDistribution, Family, WeightScheme};

#[derive(Debug, Parser)]
#[command(name = "specest", version, about = "Estimate covariance spectra from few samples")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run synthetic experiments and write CDF curves and a summary table.
    Simulate(SimulateArgs),
    /// Estimate the spectrum of a headerless n x d CSV of samples.
    Estimate(EstimateArgs),
    /// Report a pair of distributions with matching moments but far apart.
    LowerBound(LowerBoundArgs),
    /// Draw samples from a synthetic model and write them as CSV.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RecoveryArgs {
    /// Number of moments to estimate and match.
    #[arg(long = "k", default_value_t = 7, value_parser = parse_positive)]
    pub k: usize,
    /// Upper bound on the population eigenvalues. Defaults to twice the top
    /// eigenvalue of the sample covariance (a heuristic).
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long, default_value_t = specest_core::recovery::DEFAULT_MESH_CAP)]
    pub mesh_cap: usize,
    /// Mesh spacing on [0, 1]; defaults to 1/max(d, n).
    #[arg(long)]
    pub mesh_step: Option<f64>,
    #[arg(long, default_value = "theoretical", value_parser = parse_from_str::<WeightScheme>)]
    pub weights: WeightScheme,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, value_parser = parse_from_str::<Family>)]
    pub family: Family,
    /// Dimension; repeat for several.
    #[arg(long = "d", required = true)]
    pub d: Vec<usize>,
    /// Sample count as a fraction of d, e.g. 1/8 or 0.5; repeat for several.
    #[arg(long = "n-ratio", value_parser = parse_ratio, required_unless_present = "n")]
    pub n_ratio: Vec<f64>,
    /// Absolute sample count; repeat for several. Alternative to --n-ratio.
    #[arg(long = "n", conflicts_with = "n_ratio")]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 5, value_parser = parse_positive)]
    pub trials: usize,
    #[command(flatten)]
    pub recovery: RecoveryArgs,
    #[arg(long = "entry-dist", default_value = "gaussian", value_parser = parse_from_str::<EntryDistribution>)]
    pub entry_dist: EntryDistribution,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Write 0 in the runtime column so the summary is reproducible byte for byte.
    #[arg(long)]
    pub no_timing: bool,
    /// Worker threads for trials; defaults to the number of cores.
    #[arg(long, env = "SPECEST_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub recovery: RecoveryArgs,
    /// Write the spectrum here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct LowerBoundArgs {
    /// Even degree, at least 4.
    #[arg(long = "k", value_parser = parse_even_degree)]
    pub k: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long, value_parser = parse_from_str::<Family>)]
    pub family: Family,
    #[arg(long = "d")]
    pub d: usize,
    #[arg(long = "n", value_parser = parse_positive)]
    pub n: usize,
    #[arg(long = "entry-dist", default_value = "gaussian", value_parser = parse_from_str::<EntryDistribution>)]
    pub entry_dist: EntryDistribution,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_from_str<T: std::str::FromStr<Err = specest_core::Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: specest_core::Error| e.to_string())
}

fn parse_positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_even_degree(s: &str) -> Result<usize, String> {
    let k: usize = s.parse().map_err(|e: std::num::ParseIntError| e.to_string())?;
    if k < 4 || !k.is_multiple_of(2) {
        return Err(format!("k must be an even integer >= 4, got {k}"));
    }
    Ok(k)
}

/// Accepts `p/q` or a decimal.
pub fn parse_ratio(s: &str) -> Result<f64, String> {
    let v = match s.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().map_err(|_| format!("bad ratio {s:?}"))?;
            let q: f64 = q.trim().parse().map_err(|_| format!("bad ratio {s:?}"))?;
            p / q
        }
        None => s.trim().parse().map_err(|_| format!("bad ratio {s:?}"))?,
    };
    if !(v > 0.0 && v.is_finite()) {
        return Err(format!("ratio must be positive, got {s:?}"));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratios() {
        assert_eq!(parse_ratio("1/8").unwrap(), 0.125);
        assert_eq!(parse_ratio("2").unwrap(), 2.0);
        assert_eq!(parse_ratio(" 0.5 ").unwrap(), 0.5);
        assert!(parse_ratio("0").is_err());
        assert!(parse_ratio("1/0").is_err());
        assert!(parse_ratio("x").is_err());
    }

    #[test]
    fn degrees() {
        assert_eq!(parse_even_degree("8").unwrap(), 8);
        assert!(parse_even_degree("5").is_err());
        assert!(parse_even_degree("2").is_err());
        assert!(parse_positive("0").is_err());
    }

    #[test]
    fn cli_is_well_formed() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
