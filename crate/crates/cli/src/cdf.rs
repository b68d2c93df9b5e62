//! Step CDFs of spectra, written as `x,cdf` CSV files.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveLabel {
    True,
    Empirical,
    Recovered,
}

impl CurveLabel {
    pub const ALL: [CurveLabel; 3] = [CurveLabel::True, CurveLabel::Empirical, CurveLabel::Recovered];

    pub fn as_str(&self) -> &'static str {
        match self {
            CurveLabel::True => "true",
            CurveLabel::Empirical => "empirical",
            CurveLabel::Recovered => "recovered",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Row {
    x: f64,
    cdf: f64,
}

/// Breakpoints of the empirical CDF of `values` (which must be sorted):
/// one row per distinct value with the fraction of values at or below it.
pub fn breakpoints(values: &[f64]) -> Vec<(f64, f64)> {
    let d = values.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        let f = (i + 1) as f64 / d;
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = f,
            _ => out.push((v, f)),
        }
    }
    if let Some(last) = out.last_mut() {
        last.1 = 1.0;
    }
    out
}

pub fn write_curve(path: &Path, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    for (x, cdf) in breakpoints(values) {
        w.serialize(Row { x, cdf })?;
    }
    w.flush()?;
    Ok(())
}

/// Re-reads a curve and checks that `x` ascends and the CDF is nondecreasing
/// in `[0, 1]` and ends at exactly 1.
pub fn validate_curve(path: &Path) -> Result<()> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut prev: Option<Row> = None;
    for row in r.deserialize() {
        let row: Row = row.with_context(|| format!("malformed curve {}", path.display()))?;
        if !(0.0..=1.0).contains(&row.cdf) || !row.x.is_finite() {
            bail!("{}: value out of range at x = {}", path.display(), row.x);
        }
        if let Some(p) = &prev {
            if row.x <= p.x || row.cdf < p.cdf {
                bail!("{}: not monotone at x = {}", path.display(), row.x);
            }
        }
        prev = Some(row);
    }
    match prev {
        Some(last) if last.cdf == 1.0 => Ok(()),
        Some(last) => bail!("{}: CDF ends at {} instead of 1", path.display(), last.cdf),
        None => bail!("{}: empty curve", path.display()),
    }
}
