//! Exact finite-MDP model and the closed-form solutions built on it.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::domain::{ActionId, Policy, RngStream};
use crate::envs::TabularTMaze;
use crate::error::{check_dim, Error, Result};
use crate::linalg;

/// State-action pairs are indexed `s * num_actions + a`.
#[derive(Clone, Debug)]
pub struct TabularMdpModel {
    pub num_states: usize,
    pub num_actions: usize,
    /// `P(s, a, s')`, rows sum to 1.
    pub p: DMatrix<f64>,
    /// `gamma(s, a, s')`.
    pub gamma: DMatrix<f64>,
    /// `Pi(s, (s, a)) = pi(a | s)`.
    pub pi: DMatrix<f64>,
    /// Expected immediate cumulant per state-action pair.
    pub r: DVector<f64>,
    /// Feature matrix, one row per state-action pair.
    pub x: DMatrix<f64>,
}

impl TabularMdpModel {
    pub fn num_pairs(&self) -> usize {
        self.num_states * self.num_actions
    }

    pub fn pair(&self, s: usize, a: usize) -> usize {
        s * self.num_actions + a
    }

    /// `P_gamma = P * gamma` elementwise.
    pub fn p_gamma(&self) -> DMatrix<f64> {
        self.p.component_mul(&self.gamma)
    }

    /// `P_gamma Pi`.
    pub fn discounted_transition(&self) -> DMatrix<f64> {
        self.p_gamma() * &self.pi
    }

    /// `I - lambda P_gamma Pi`.
    fn resolvent_matrix(&self, lambda: f64) -> DMatrix<f64> {
        let n = self.num_pairs();
        DMatrix::identity(n, n) - self.discounted_transition() * lambda
    }

    pub fn validate(&self) -> Result<()> {
        let (n, s) = (self.num_pairs(), self.num_states);
        check_dim(n, self.p.nrows())?;
        check_dim(s, self.p.ncols())?;
        check_dim(n, self.gamma.nrows())?;
        check_dim(s, self.gamma.ncols())?;
        check_dim(s, self.pi.nrows())?;
        check_dim(n, self.pi.ncols())?;
        check_dim(n, self.r.len())?;
        check_dim(n, self.x.nrows())?;
        for row in self.p.row_iter() {
            if (row.sum() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidConfig("transition rows must sum to 1".into()));
            }
        }
        for row in self.pi.row_iter() {
            if (row.sum() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidConfig("policy rows must sum to 1".into()));
            }
        }
        Ok(())
    }

    /// `Q = (I - P_gamma Pi)^-1 r`.
    pub fn true_q(&self) -> Result<DVector<f64>> {
        linalg::solve(self.resolvent_matrix(1.0), &self.r)
    }

    /// `Psi = (I - P_gamma Pi)^-1 X`.
    pub fn true_sf(&self) -> Result<DMatrix<f64>> {
        linalg::solve_matrix(self.resolvent_matrix(1.0), &self.x)
    }

    /// Closed-form LSTD(lambda) weights under state-action weighting `d`.
    pub fn lstd_solution(&self, lambda: f64, d: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.num_pairs(), d.len())?;
        let xt_d = self.x.transpose() * DMatrix::from_diagonal(d);
        let m = self.resolvent_matrix(lambda);
        // (I - lambda P Pi)^-1 applied to [(I - P Pi) X | r]
        let lhs = linalg::solve_matrix(m.clone(), &(self.resolvent_matrix(1.0) * &self.x))?;
        let rhs = linalg::solve(m, &self.r)?;
        linalg::solve(&xt_d * lhs, &(&xt_d * rhs))
    }

    /// Expected one-step TD error of `w` at every pair.
    pub fn expected_td_error(&self, w: &DVector<f64>) -> DVector<f64> {
        let q = &self.x * w;
        &self.r + self.discounted_transition() * &q - q
    }

    /// `E[delta x]^T C^-1 E[delta x]` with `C = X^T D X` (ridge 1e-10 added
    /// when `C` is singular).
    pub fn mspbe(&self, w: &DVector<f64>, d: &DVector<f64>) -> Result<f64> {
        check_dim(self.num_pairs(), d.len())?;
        let xt_d = self.x.transpose() * DMatrix::from_diagonal(d);
        let g = &xt_d * self.expected_td_error(w);
        let c = &xt_d * &self.x;
        let sol = match linalg::solve(c.clone(), &g) {
            Ok(s) => s,
            Err(Error::Singular { .. }) => {
                let k = c.nrows();
                linalg::solve(c + DMatrix::identity(k, k) * 1e-10, &g)?
            }
            Err(e) => return Err(e),
        };
        Ok(g.dot(&sol))
    }

    /// Stationary state-action distribution of the undiscounted chain under
    /// `pi`.
    pub fn on_policy_distribution(&self) -> DVector<f64> {
        let t = &self.p * &self.pi;
        let rows: Vec<Vec<(usize, f64)>> = t
            .row_iter()
            .map(|r| r.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, v)| (j, *v)).collect())
            .collect();
        let n = self.num_pairs();
        stationary_power(&rows, &vec![1.0 / n as f64; n], 1e-14, 1_000_000)
    }
}

/// Stationary distribution of a sparse chain by power iteration on the lazy
/// chain `(I + T) / 2`, which has the same fixed point and is aperiodic.
pub fn stationary_power(rows: &[Vec<(usize, f64)>], init: &[f64], tol: f64, max_iter: usize) -> DVector<f64> {
    let n = rows.len();
    let total: f64 = init.iter().sum();
    let mut d: Vec<f64> = init.iter().map(|v| v / total).collect();
    let mut next = vec![0.0; n];
    for _ in 0..max_iter {
        next.iter_mut().zip(&d).for_each(|(o, v)| *o = 0.5 * v);
        for (i, row) in rows.iter().enumerate() {
            let m = 0.5 * d[i];
            if m != 0.0 {
                for &(j, p) in row {
                    next[j] += m * p;
                }
            }
        }
        let diff: f64 = next.iter().zip(&d).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut d, &mut next);
        if diff < tol {
            break;
        }
    }
    let s: f64 = d.iter().sum();
    DVector::from_iterator(n, d.into_iter().map(|v| v / s))
}

/// Random model with `num_states` states, `num_actions` actions, `dim`
/// Gaussian features and a constant discount. Every transition row puts mass
/// on at most `branching` successors.
pub fn random_model(
    num_states: usize,
    num_actions: usize,
    dim: usize,
    discount: f64,
    branching: usize,
    rng: &mut RngStream,
) -> TabularMdpModel {
    let n = num_states * num_actions;
    let mut p = DMatrix::zeros(n, num_states);
    for i in 0..n {
        let mut total = 0.0;
        for _ in 0..branching.max(1) {
            let j = rng.random_range(0..num_states);
            let v: f64 = rng.random_range(0.05..1.0);
            p[(i, j)] += v;
            total += v;
        }
        for j in 0..num_states {
            p[(i, j)] /= total;
        }
    }
    let mut pi = DMatrix::zeros(num_states, n);
    for s in 0..num_states {
        let probs: Vec<f64> = (0..num_actions).map(|_| rng.random_range(0.05..1.0)).collect();
        let t: f64 = probs.iter().sum();
        for (a, v) in probs.iter().enumerate() {
            pi[(s, s * num_actions + a)] = v / t;
        }
    }
    let x = DMatrix::from_fn(n, dim, |_, _| rng.random_range(-1.0..1.0));
    let r = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    TabularMdpModel { num_states, num_actions, p, gamma: DMatrix::from_element(n, num_states, discount), pi, r, x }
}

/// Exact model of GVF `goal` in the tabular TMaze: entering any goal cell
/// restarts at the start cell; entering `goal` pays 1 and terminates.
/// Features are one-hot over state-action pairs.
pub fn tmaze_goal_model(maze: &TabularTMaze, goal: usize, discount: f64, policy: &dyn Policy) -> TabularMdpModel {
    let ns = maze.num_cells();
    let na = 4;
    let n = ns * na;
    let mut p = DMatrix::zeros(n, ns);
    let mut gamma = DMatrix::from_element(n, ns, discount);
    let mut r = DVector::zeros(n);
    let start = maze.start_cell();
    for s in 0..ns {
        for a in 0..na {
            let i = s * na + a;
            let landed = maze.move_cell(s, ActionId(a));
            match maze.goal_of_cell(landed) {
                Some(g) => {
                    p[(i, start)] = 1.0;
                    if g == goal {
                        gamma[(i, start)] = 0.0;
                        r[i] = 1.0;
                    }
                }
                None => p[(i, landed)] = 1.0,
            }
        }
    }
    let mut pi = DMatrix::zeros(ns, n);
    let mut probs = [0.0; 4];
    for s in 0..ns {
        policy.probs(&maze.cell_obs(s), &mut probs);
        for a in 0..na {
            pi[(s, s * na + a)] = probs[a];
        }
    }
    TabularMdpModel { num_states: ns, num_actions: na, p, gamma, pi, r, x: DMatrix::identity(n, n) }
}
