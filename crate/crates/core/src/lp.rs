//! Weighted-L1 moment matching over the probability simplex.
//!
//! ```text
//! minimize    Σ_i w_i |(V p)_i - α_i|
//! subject to  Σ_j p_j = 1,  p >= 0,      V[i][j] = x_j^(i+1)
//! ```
//!
//! Each residual is split as `(V p)_i - α_i = u_i - v_i` with `u, v >= 0`,
//! which gives a standard-form LP with `k + 1` rows and `t + 2k` columns. The
//! row count is tiny, so a revised simplex that refactors the basis every
//! iteration is both cheap and numerically robust.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;

/// Entries of `p` above this negative value are rounding noise and clamped.
pub const CLAMP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedL1Problem {
    mesh: Vec<f64>,
    /// `k x t` moment matrix.
    moments: Matrix,
    target: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedL1Problem {
    /// Builds the moment matrix `V[i][j] = mesh[j]^(i+1)` for `i < target.len()`.
    pub fn new(mesh: Vec<f64>, target: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let k = target.len();
        if mesh.is_empty() {
            return Err(invalid("mesh must contain at least one point"));
        }
        if mesh[0] < 0.0 || mesh.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("mesh must be nonnegative and strictly increasing"));
        }
        if mesh.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mesh"));
        }
        let t = mesh.len();
        let mut data = vec![0.0; k * t];
        for (j, &x) in mesh.iter().enumerate() {
            let mut pow = 1.0;
            for i in 0..k {
                pow *= x;
                data[i * t + j] = pow;
            }
        }
        Self::with_moment_matrix(mesh, Matrix::from_vec(k, t, data)?, target, weights)
    }

    pub fn with_moment_matrix(mesh: Vec<f64>, moments: Matrix, target: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let k = target.len();
        if k == 0 {
            return Err(invalid("at least one moment row is required"));
        }
        if weights.len() != k {
            return Err(Error::DimensionMismatch { expected: k, got: weights.len() });
        }
        if moments.rows() != k || moments.cols() != mesh.len() {
            return Err(Error::DimensionMismatch { expected: k * mesh.len(), got: moments.rows() * moments.cols() });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(invalid("weights must be positive and finite"));
        }
        if target.iter().any(|v| !v.is_finite()) || !moments.is_finite() {
            return Err(Error::NonFinite("lp data"));
        }
        Ok(Self { mesh, moments, target, weights })
    }

    pub fn mesh(&self) -> &[f64] {
        &self.mesh
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn moment_matrix(&self) -> &Matrix {
        &self.moments
    }

    pub fn num_moments(&self) -> usize {
        self.target.len()
    }

    pub fn num_points(&self) -> usize {
        self.mesh.len()
    }

    /// `Σ_i w_i |(V p)_i - α_i|`.
    pub fn objective(&self, p: &[f64]) -> f64 {
        self.residuals(p).iter().zip(&self.weights).map(|(r, w)| w * r.abs()).sum()
    }

    /// `(V p)_i - α_i`.
    pub fn residuals(&self, p: &[f64]) -> Vec<f64> {
        (0..self.num_moments())
            .map(|i| {
                let row = self.moments.row(i);
                row.iter().zip(p).map(|(v, q)| v * q).sum::<f64>() - self.target[i]
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexSolution {
    pub p: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Hard cap on pivots; `None` means `50 * (t + 2k) + 1000`.
    pub max_iterations: Option<usize>,
    /// Reduced costs above `-optimality_tol` (relative to the largest
    /// weight) count as nonnegative.
    pub optimality_tol: f64,
    /// Smallest admissible pivot element.
    pub pivot_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { max_iterations: None, optimality_tol: 1e-11, pivot_tol: 1e-9 }
    }
}

pub fn solve(prob: &WeightedL1Problem) -> Result<SimplexSolution> {
    solve_with(prob, &SolverOptions::default())
}

pub fn solve_with(prob: &WeightedL1Problem, opts: &SolverOptions) -> Result<SimplexSolution> {
    let mut s = Simplex::new(prob);
    let status = s.run(opts)?;
    let p = s.extract_p();
    Ok(SimplexSolution { objective: prob.objective(&p), p, status, iterations: s.iterations })
}

/// Column indices: `0..t` are `p`, `t..t+k` are `u`, `t+k..t+2k` are `v`.
struct Simplex<'a> {
    prob: &'a WeightedL1Problem,
    t: usize,
    k: usize,
    /// Slack costs normalized by the largest weight.
    cost: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    iterations: usize,
}

impl<'a> Simplex<'a> {
    fn new(prob: &'a WeightedL1Problem) -> Self {
        let (t, k) = (prob.num_points(), prob.num_moments());
        let wmax = prob.weights.iter().copied().fold(0.0, f64::max);
        let cost: Vec<f64> = prob.weights.iter().map(|w| w / wmax).collect();

        // Warm start at the single mesh point with the smallest objective.
        let start = (0..t)
            .map(|j| {
                let c: f64 = (0..k).map(|i| cost[i] * (prob.moments.get(i, j) - prob.target[i]).abs()).sum();
                (j, c)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|(j, _)| j)
            .expect("t >= 1");
        let mut basis = Vec::with_capacity(k + 1);
        basis.push(start);
        for i in 0..k {
            let gap = prob.target[i] - prob.moments.get(i, start);
            // v_i - u_i = gap; keep whichever is nonnegative basic.
            basis.push(if gap >= 0.0 { t + k + i } else { t + i });
        }
        let mut is_basic = vec![false; t + 2 * k];
        for &b in &basis {
            is_basic[b] = true;
        }
        let m = k + 1;
        Self { prob, t, k, cost, basis, is_basic, binv: vec![0.0; m * m], xb: vec![0.0; m], iterations: 0 }
    }

    fn m(&self) -> usize {
        self.k + 1
    }

    fn column(&self, j: usize, out: &mut [f64]) {
        out.fill(0.0);
        let (t, k) = (self.t, self.k);
        if j < t {
            out[0] = 1.0;
            for i in 0..k {
                out[i + 1] = self.prob.moments.get(i, j);
            }
        } else if j < t + k {
            out[j - t + 1] = -1.0;
        } else {
            out[j - t - k + 1] = 1.0;
        }
    }

    fn col_cost(&self, j: usize) -> f64 {
        let (t, k) = (self.t, self.k);
        if j < t {
            0.0
        } else if j < t + k {
            self.cost[j - t]
        } else {
            self.cost[j - t - k]
        }
    }

    fn rhs(&self) -> Vec<f64> {
        let mut b = Vec::with_capacity(self.m());
        b.push(1.0);
        b.extend_from_slice(&self.prob.target);
        b
    }

    /// Inverts the basis matrix by Gauss-Jordan elimination with partial
    /// pivoting and recomputes the basic solution.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m();
        let mut a = vec![0.0; m * m];
        let mut col = vec![0.0; m];
        for (c, &j) in self.basis.iter().enumerate() {
            self.column(j, &mut col);
            for r in 0..m {
                a[r * m + c] = col[r];
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let piv = (c..m).max_by(|&x, &y| a[x * m + c].abs().total_cmp(&a[y * m + c].abs())).expect("non-empty");
            if a[piv * m + c].abs() < 1e-300 {
                return Err(Error::NonFinite("singular simplex basis"));
            }
            if piv != c {
                for q in 0..m {
                    a.swap(piv * m + q, c * m + q);
                    inv.swap(piv * m + q, c * m + q);
                }
            }
            let d = a[c * m + c];
            for q in 0..m {
                a[c * m + q] /= d;
                inv[c * m + q] /= d;
            }
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = a[r * m + c];
                if f == 0.0 {
                    continue;
                }
                for q in 0..m {
                    a[r * m + q] -= f * a[c * m + q];
                    inv[r * m + q] -= f * inv[c * m + q];
                }
            }
        }
        self.binv = inv;
        let b = self.rhs();
        for r in 0..m {
            self.xb[r] = (0..m).map(|q| self.binv[r * m + q] * b[q]).sum();
        }
        Ok(())
    }

    fn objective_value(&self) -> f64 {
        self.basis.iter().zip(&self.xb).map(|(&j, x)| self.col_cost(j) * x).sum()
    }

    /// Duals `y = B⁻ᵀ c_B`.
    fn duals(&self) -> Vec<f64> {
        let m = self.m();
        (0..m).map(|q| (0..m).map(|r| self.col_cost(self.basis[r]) * self.binv[r * m + q]).sum()).collect()
    }

    /// Reduced cost of column `j` and the magnitude of the terms it was
    /// summed from. Weights can span many orders of magnitude, so optimality
    /// is judged relative to that magnitude rather than in absolute terms.
    fn reduced_cost(&self, j: usize, y: &[f64]) -> (f64, f64) {
        let (t, k) = (self.t, self.k);
        if j < t {
            let (mut s, mut mag) = (y[0], y[0].abs());
            for i in 0..k {
                let v = y[i + 1] * self.prob.moments.get(i, j);
                s += v;
                mag += v.abs();
            }
            (-s, mag)
        } else if j < t + k {
            let (c, yi) = (self.cost[j - t], y[j - t + 1]);
            (c + yi, c + yi.abs())
        } else {
            let (c, yi) = (self.cost[j - t - k], y[j - t - k + 1]);
            (c - yi, c + yi.abs())
        }
    }

    fn run(&mut self, opts: &SolverOptions) -> Result<SolveStatus> {
        let n_cols = self.t + 2 * self.k;
        let max_iter = opts.max_iterations.unwrap_or(50 * n_cols + 1000);
        let stall_limit = 10 * n_cols;
        let m = self.m();
        let mut col = vec![0.0; m];
        let mut dir = vec![0.0; m];

        self.refactor()?;
        let mut best = self.objective_value();
        let mut stalled = 0usize;
        let mut bland = false;

        loop {
            let y = self.duals();
            // Score = reduced cost relative to its magnitude; a column may
            // enter only if the score is below -optimality_tol.
            let score = |j: usize| {
                let (d, mag) = self.reduced_cost(j, &y);
                if mag > 0.0 {
                    d / mag
                } else {
                    0.0
                }
            };
            let entering = if bland {
                (0..n_cols).find(|&j| !self.is_basic[j] && score(j) < -opts.optimality_tol)
            } else {
                let mut pick = None;
                let mut most = -opts.optimality_tol;
                for j in 0..n_cols {
                    if self.is_basic[j] {
                        continue;
                    }
                    let d = score(j);
                    if d < most {
                        most = d;
                        pick = Some(j);
                    }
                }
                pick
            };
            let Some(q) = entering else {
                return Ok(SolveStatus::Optimal);
            };
            if self.iterations >= max_iter {
                return Ok(SolveStatus::IterationLimit);
            }

            self.column(q, &mut col);
            for r in 0..m {
                dir[r] = (0..m).map(|c| self.binv[r * m + c] * col[c]).sum();
            }
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..m {
                if dir[r] <= opts.pivot_tol {
                    continue;
                }
                let ratio = self.xb[r].max(0.0) / dir[r];
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((br, bratio)) => {
                        let better = if ratio < bratio - 1e-15 {
                            true
                        } else if ratio <= bratio + 1e-15 {
                            if bland {
                                self.basis[r] < self.basis[br]
                            } else {
                                dir[r] > dir[br]
                            }
                        } else {
                            false
                        };
                        if better {
                            Some((r, ratio))
                        } else {
                            Some((br, bratio))
                        }
                    }
                };
            }
            let Some((r, _)) = leave else {
                // The objective is bounded below by zero, so this only happens
                // when every admissible pivot is below tolerance.
                return Ok(SolveStatus::Optimal);
            };

            self.is_basic[self.basis[r]] = false;
            self.basis[r] = q;
            self.is_basic[q] = true;
            self.iterations += 1;
            self.refactor()?;

            let obj = self.objective_value();
            if obj < best - 1e-14 * best.abs().max(1e-300) {
                best = obj;
                stalled = 0;
            } else {
                stalled += 1;
                if stalled >= stall_limit {
                    bland = true;
                }
            }
        }
    }

    fn extract_p(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.t];
        for (r, &j) in self.basis.iter().enumerate() {
            if j < self.t {
                p[j] = self.xb[r];
            }
        }
        for v in p.iter_mut() {
            if *v < CLAMP_TOL {
                *v = v.max(0.0);
            }
        }
        let total: f64 = p.iter().sum();
        if total > 0.0 {
            for v in p.iter_mut() {
                *v /= total;
            }
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_mesh_point_target() {
        let mesh: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let x: f64 = 0.3;
        let target: Vec<f64> = (1..=4).map(|i| x.powi(i)).collect();
        let prob = WeightedL1Problem::new(mesh, target, vec![1.0; 4]).unwrap();
        let sol = solve(&prob).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.objective < 1e-9);
        for r in prob.residuals(&sol.p) {
            assert!(r.abs() < 1e-9);
        }
    }

    #[test]
    fn one_moment_two_points() {
        let prob = WeightedL1Problem::new(vec![0.0, 1.0], vec![0.3], vec![1.0]).unwrap();
        let sol = solve(&prob).unwrap();
        assert!((sol.p[0] - 0.7).abs() < 1e-12 && (sol.p[1] - 0.3).abs() < 1e-12);
        assert!(sol.objective < 1e-12);
    }

    #[test]
    fn infeasible_moments_leave_positive_objective() {
        // Mean 0.5 with second moment 0.1 < 0.25 is impossible.
        let mesh: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        let prob = WeightedL1Problem::new(mesh, vec![0.5, 0.1], vec![1.0, 1.0]).unwrap();
        let sol = solve(&prob).unwrap();
        assert!(sol.objective > 0.1);
        assert!((sol.p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn validation() {
        assert!(WeightedL1Problem::new(vec![], vec![1.0], vec![1.0]).is_err());
        assert!(WeightedL1Problem::new(vec![0.0, 0.0], vec![1.0], vec![1.0]).is_err());
        assert!(WeightedL1Problem::new(vec![-1.0, 0.0], vec![1.0], vec![1.0]).is_err());
        assert!(WeightedL1Problem::new(vec![0.0, 1.0], vec![1.0], vec![0.0]).is_err());
        assert!(WeightedL1Problem::new(vec![0.0, 1.0], vec![1.0], vec![1.0, 1.0]).is_err());
        assert!(WeightedL1Problem::new(vec![0.0, 1.0], vec![], vec![]).is_err());
    }

    #[test]
    fn iteration_limit_returns_feasible_point() {
        let mesh: Vec<f64> = (0..=50).map(|i| i as f64 / 50.0).collect();
        let prob = WeightedL1Problem::new(mesh, vec![0.4, 0.2, 0.11], vec![1.0; 3]).unwrap();
        let opts = SolverOptions { max_iterations: Some(1), ..Default::default() };
        let sol = solve_with(&prob, &opts).unwrap();
        assert_eq!(sol.status, SolveStatus::IterationLimit);
        assert!((sol.p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(sol.p.iter().all(|&v| v >= 0.0));
    }

    fn arb_problem() -> impl Strategy<Value = WeightedL1Problem> {
        (2usize..40, 1usize..6, any::<u64>()).prop_map(|(t, k, seed)| {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut mesh: Vec<f64> = (0..t).map(|_| rng.random_range(0.0..1.0)).collect();
            mesh.sort_by(f64::total_cmp);
            mesh.dedup();
            let target = (0..k).map(|_| rng.random_range(-0.2..1.0)).collect();
            let weights = (0..k).map(|_| rng.random_range(0.01..10.0)).collect();
            WeightedL1Problem::new(mesh, target, weights).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn output_is_feasible(prob in arb_problem()) {
            let sol = solve(&prob).unwrap();
            prop_assert!((sol.p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(sol.p.iter().all(|&v| v >= 0.0));
            prop_assert!((sol.objective - prob.objective(&sol.p)).abs() < 1e-9);
        }

        #[test]
        fn extra_mesh_points_never_hurt(prob in arb_problem(), extra in prop::collection::vec(0.0f64..1.0, 1..10)) {
            let base = solve(&prob).unwrap().objective;
            let mut mesh = prob.mesh().to_vec();
            mesh.extend(extra);
            mesh.sort_by(f64::total_cmp);
            mesh.dedup();
            let bigger = WeightedL1Problem::new(mesh, prob.target().to_vec(), prob.weights().to_vec()).unwrap();
            prop_assert!(solve(&bigger).unwrap().objective <= base + 1e-9);
        }

        #[test]
        fn weight_scaling(prob in arb_problem(), c in 0.01f64..100.0) {
            let a = solve(&prob).unwrap();
            let scaled_w: Vec<f64> = prob.weights().iter().map(|w| w * c).collect();
            let scaled = WeightedL1Problem::new(prob.mesh().to_vec(), prob.target().to_vec(), scaled_w).unwrap();
            let b = solve(&scaled).unwrap();
            prop_assert!((b.objective - c * a.objective).abs() <= 1e-9 * c.max(1.0));
            // Both solutions are optimal for either weighting.
            prop_assert!((prob.objective(&b.p) - a.objective).abs() <= 1e-9);
        }
    }
}
