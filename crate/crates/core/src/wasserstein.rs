//! Earth mover's distance on the real line.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tolerance on the total mass of a distribution.
pub const MASS_TOL: f64 = 1e-9;

/// Finitely many point masses on the line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMassDistribution {
    locations: Vec<f64>,
    masses: Vec<f64>,
}

impl PointMassDistribution {
    /// Locations need not be sorted or distinct.
    pub fn new(locations: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if locations.len() != masses.len() {
            return Err(Error::DimensionMismatch { expected: locations.len(), got: masses.len() });
        }
        if locations.is_empty() {
            return Err(invalid("distribution needs at least one atom"));
        }
        if locations.iter().chain(&masses).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("distribution"));
        }
        if masses.iter().any(|&m| m <= 0.0) {
            return Err(invalid("masses must be positive"));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(invalid(format!("masses sum to {total}, not 1")));
        }
        Ok(Self { locations, masses })
    }

    /// Equal masses `1/len` at each value.
    pub fn uniform(values: &[f64]) -> Result<Self> {
        let m = 1.0 / values.len().max(1) as f64;
        Self::new(values.to_vec(), vec![m; values.len()])
    }

    pub fn point(c: f64) -> Self {
        Self { locations: vec![c], masses: vec![1.0] }
    }

    /// Drops zero (and tiny negative) masses, then renormalizes.
    pub fn from_weights(locations: &[f64], weights: &[f64]) -> Result<Self> {
        if locations.len() != weights.len() {
            return Err(Error::DimensionMismatch { expected: locations.len(), got: weights.len() });
        }
        let (loc, w): (Vec<f64>, Vec<f64>) =
            locations.iter().zip(weights).filter(|(_, &w)| w > 0.0).map(|(&x, &w)| (x, w)).unzip();
        let total: f64 = w.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return Err(invalid("weights have no positive mass"));
        }
        Self::new(loc, w.iter().map(|v| v / total).collect())
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn min_location(&self) -> f64 {
        self.locations.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_location(&self) -> f64 {
        self.locations.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Atoms sorted by location with coincident locations merged.
    pub fn merged(&self) -> Vec<(f64, f64)> {
        let mut atoms: Vec<(f64, f64)> = self.locations.iter().copied().zip(self.masses.iter().copied()).collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (x, m) in atoms {
            match out.last_mut() {
                Some(last) if last.0 == x => last.1 += m,
                _ => out.push((x, m)),
            }
        }
        out
    }

    /// `Σ mass * location^i` for `i = 1..=k`.
    pub fn moments(&self, k: usize) -> Vec<f64> {
        (1..=k).map(|i| self.locations.iter().zip(&self.masses).map(|(x, m)| m * x.powi(i as i32)).sum()).collect()
    }

    /// Smallest location whose CDF reaches `level`.
    pub fn quantile(&self, level: f64) -> f64 {
        let atoms = self.merged();
        let mut cdf = 0.0;
        for &(x, m) in &atoms {
            cdf += m;
            if cdf >= level - QUANTILE_SLACK {
                return x;
            }
        }
        atoms.last().expect("non-empty").0
    }
}

/// Rounding slack when comparing a running CDF with a quantile level, so
/// that a level hit exactly in exact arithmetic is not missed.
pub const QUANTILE_SLACK: f64 = 1e-12;

/// W₁ between two discrete distributions: `∫ |F_p - F_q| dx`.
pub fn w1(p: &PointMassDistribution, q: &PointMassDistribution) -> f64 {
    let a = p.merged();
    let b = q.merged();
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0f64, 0.0f64);
    let mut prev: Option<f64> = None;
    let mut total = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&(xa, _)), Some(&(xb, _))) => xa.min(xb),
            (Some(&(xa, _)), None) => xa,
            (None, Some(&(xb, _))) => xb,
            (None, None) => unreachable!(),
        };
        if let Some(px) = prev {
            total += (fa - fb).abs() * (x - px);
        }
        while i < a.len() && a[i].0 == x {
            fa += a[i].1;
            i += 1;
        }
        while j < b.len() && b[j].0 == x {
            fb += b[j].1;
            j += 1;
        }
        prev = Some(x);
    }
    total
}

/// `Σ |a_i - b_i|` for two ascending vectors of the same length.
pub fn l1_sorted(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    if !is_ascending(a) || !is_ascending(b) {
        return Err(invalid("inputs must be sorted ascending"));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum())
}

pub(crate) fn is_ascending(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] <= w[1])
}

/// Locations of the `d` quantiles of `p` at levels `i/(d+1)`.
pub fn quantile_locations(p: &PointMassDistribution, d: usize) -> Vec<f64> {
    let atoms = p.merged();
    let mut out = Vec::with_capacity(d);
    let mut cdf = 0.0;
    let mut idx = 0;
    for i in 1..=d {
        let level = i as f64 / (d + 1) as f64;
        while idx < atoms.len() {
            if cdf + atoms[idx].1 >= level - QUANTILE_SLACK {
                break;
            }
            cdf += atoms[idx].1;
            idx += 1;
        }
        out.push(atoms[idx.min(atoms.len() - 1)].0);
    }
    out
}

/// Replaces `p` by `d` equal masses at its `(d+1)`-quantiles.
pub fn quantize(p: &PointMassDistribution, d: usize) -> Result<PointMassDistribution> {
    if d == 0 {
        return Err(invalid("d must be at least 1"));
    }
    PointMassDistribution::uniform(&quantile_locations(p, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dist(locs: &[f64], masses: &[f64]) -> PointMassDistribution {
        PointMassDistribution::new(locs.to_vec(), masses.to_vec()).unwrap()
    }

    #[test]
    fn w1_basic_cases() {
        assert_eq!(w1(&PointMassDistribution::point(0.0), &PointMassDistribution::point(1.0)), 1.0);
        let p = dist(&[0.3, -1.0, 2.0], &[0.2, 0.5, 0.3]);
        assert_eq!(w1(&p, &p), 0.0);
        let half = dist(&[0.0, 1.0], &[0.5, 0.5]);
        assert!((w1(&half, &PointMassDistribution::point(0.5)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn coincident_atoms_merge() {
        let a = dist(&[1.0, 1.0, 0.0], &[0.25, 0.25, 0.5]);
        let b = dist(&[0.0, 1.0], &[0.5, 0.5]);
        assert_eq!(w1(&a, &b), 0.0);
        assert_eq!(a.merged(), vec![(0.0, 0.5), (1.0, 0.5)]);
    }

    #[test]
    fn validation() {
        assert!(PointMassDistribution::new(vec![0.0], vec![0.5]).is_err());
        assert!(PointMassDistribution::new(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
        assert!(PointMassDistribution::new(vec![], vec![]).is_err());
        assert!(PointMassDistribution::new(vec![0.0], vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn l1_cases() {
        assert_eq!(l1_sorted(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(l1_sorted(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 2.0);
        let p = PointMassDistribution::uniform(&[0.0, 0.0]).unwrap();
        let q = PointMassDistribution::uniform(&[1.0, 1.0]).unwrap();
        assert_eq!(w1(&p, &q), 1.0);
        assert!(matches!(l1_sorted(&[1.0], &[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
        assert!(l1_sorted(&[2.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn quantize_cases() {
        let q = quantize(&PointMassDistribution::point(0.7), 4).unwrap();
        assert_eq!(q.locations(), &[0.7; 4]);
        let p = dist(&[0.0, 1.0], &[0.5, 0.5]);
        let q = quantize(&p, 2).unwrap();
        assert_eq!(q.locations(), &[0.0, 1.0]);
        assert_eq!(w1(&p, &q), 0.0);
        assert!(quantize(&p, 0).is_err());
    }

    /// Exhaustive transport oracle: with atoms merged, the optimal 1-D plan is
    /// the monotone (north-west corner) coupling; enumerate it independently
    /// of the CDF sweep.
    fn northwest_cost(p: &PointMassDistribution, q: &PointMassDistribution) -> f64 {
        let a = p.merged();
        let b = q.merged();
        let (mut i, mut j) = (0, 0);
        let (mut ra, mut rb) = (a[0].1, b[0].1);
        let mut cost = 0.0;
        while i < a.len() && j < b.len() {
            let m = ra.min(rb);
            cost += m * (a[i].0 - b[j].0).abs();
            ra -= m;
            rb -= m;
            if ra <= 1e-15 {
                i += 1;
                if i < a.len() {
                    ra = a[i].1;
                }
            }
            if rb <= 1e-15 {
                j += 1;
                if j < b.len() {
                    rb = b[j].1;
                }
            }
        }
        cost
    }

    /// Brute-force transport on a discretized flow grid: masses are integer
    /// multiples of 1/units and every feasible integer flow is enumerated.
    fn brute_flow(a: &[(f64, u32)], b: &[(f64, u32)], units: u32) -> f64 {
        fn rec(a: &[(f64, u32)], b: &mut Vec<(f64, u32)>, i: usize, acc: f64, best: &mut f64, units: u32) {
            if acc >= *best {
                return;
            }
            if i == a.len() {
                *best = acc;
                return;
            }
            let (x, m) = a[i];
            split(a, b, i, x, m, 0, acc, best, units);
        }
        #[allow(clippy::too_many_arguments)]
        fn split(
            a: &[(f64, u32)],
            b: &mut Vec<(f64, u32)>,
            i: usize,
            x: f64,
            left: u32,
            j: usize,
            acc: f64,
            best: &mut f64,
            units: u32,
        ) {
            if left == 0 {
                rec(a, b, i + 1, acc, best, units);
                return;
            }
            if j == b.len() {
                return;
            }
            let cap = b[j].1.min(left);
            for f in 0..=cap {
                b[j].1 -= f;
                let c = acc + f as f64 / units as f64 * (x - b[j].0).abs();
                split(a, b, i, x, left - f, j + 1, c, best, units);
                b[j].1 += f;
            }
        }
        let mut best = f64::INFINITY;
        rec(a, &mut b.to_vec(), 0, 0.0, &mut best, units);
        best
    }

    #[test]
    fn w1_matches_flow_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let units = 12u32;
        for _ in 0..40 {
            let na = rng.random_range(1..=6);
            let nb = rng.random_range(1..=6);
            let mut gen = |atoms: usize| -> Vec<(f64, u32)> {
                // Split `units` into `atoms` positive integer parts.
                let mut cuts: Vec<u32> = (0..atoms - 1).map(|_| rng.random_range(1..units)).collect();
                cuts.sort();
                cuts.dedup();
                let mut parts = Vec::new();
                let mut prev = 0;
                for c in cuts.iter().chain(std::iter::once(&units)) {
                    parts.push(c - prev);
                    prev = *c;
                }
                parts.into_iter().map(|m| (rng.random_range(-2.0..2.0), m)).collect()
            };
            let a = gen(na);
            let b = gen(nb);
            let to_dist = |v: &[(f64, u32)]| {
                PointMassDistribution::new(
                    v.iter().map(|x| x.0).collect(),
                    v.iter().map(|x| x.1 as f64 / units as f64).collect(),
                )
                .unwrap()
            };
            let (p, q) = (to_dist(&a), to_dist(&b));
            let want = brute_flow(&a, &b, units);
            assert!((w1(&p, &q) - want).abs() < 1e-8, "{} vs {want}", w1(&p, &q));
            assert!((northwest_cost(&p, &q) - want).abs() < 1e-8);
        }
    }

    fn arb_dist(max_atoms: usize) -> impl Strategy<Value = PointMassDistribution> {
        prop::collection::vec((-5.0f64..5.0, 0.01f64..1.0), 1..=max_atoms).prop_map(|atoms| {
            let total: f64 = atoms.iter().map(|a| a.1).sum();
            PointMassDistribution::new(atoms.iter().map(|a| a.0).collect(), atoms.iter().map(|a| a.1 / total).collect())
                .unwrap()
        })
    }

    proptest! {
        #[test]
        fn metric_axioms(p in arb_dist(8), q in arb_dist(8), r in arb_dist(8)) {
            let pq = w1(&p, &q);
            prop_assert!(pq >= 0.0);
            prop_assert!((pq - w1(&q, &p)).abs() <= 1e-12);
            prop_assert!(pq <= w1(&p, &r) + w1(&r, &q) + 1e-12);
            prop_assert_eq!(w1(&p, &p), 0.0);
        }

        #[test]
        fn sorted_l1_is_d_times_w1(pairs in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..=64)) {
            let mut a: Vec<f64> = pairs.iter().map(|x| x.0).collect();
            let mut b: Vec<f64> = pairs.iter().map(|x| x.1).collect();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            let d = a.len() as f64;
            let lhs = l1_sorted(&a, &b).unwrap();
            let rhs = d * w1(&PointMassDistribution::uniform(&a).unwrap(), &PointMassDistribution::uniform(&b).unwrap());
            prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.max(1.0));
        }

        #[test]
        fn quantize_error_bound(p in arb_dist(20), d in prop::sample::select(vec![1usize, 2, 10, 100])) {
            let q = quantize(&p, d).unwrap();
            let range = p.max_location() - p.min_location();
            prop_assert!(w1(&p, &q) <= range / d as f64 + 1e-12);
        }
    }
}
