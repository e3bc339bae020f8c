//! Numeric verification suites for the value-error bound, the least-squares
//! rate and the SF-NR / LSTD(1) equivalence.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use serde_json::json;

use super::mdp::{random_model, stationary_power, TabularMdpModel};
use crate::domain::RngStream;
use crate::error::Result;
use crate::linalg;

/// Outcome of one verification suite.
#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub trials: usize,
    pub passed: bool,
    pub elapsed_secs: f64,
    pub details: serde_json::Value,
}

fn dense_stochastic(n: usize, rng: &mut RngStream) -> DMatrix<f64> {
    let mut p = DMatrix::from_fn(n, n, |_, _| rng.random_range(0.0..1.0f64).powi(3));
    for mut row in p.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    p
}

fn stationary_of(p: &DMatrix<f64>) -> DVector<f64> {
    let rows: Vec<Vec<(usize, f64)>> = p.row_iter().map(|r| r.iter().copied().enumerate().collect()).collect();
    let n = p.nrows();
    stationary_power(&rows, &vec![1.0; n], 1e-15, 1_000_000)
}

fn weighted_sq_norm(v: &DVector<f64>, d: &DVector<f64>) -> f64 {
    v.iter().zip(d.iter()).map(|(a, w)| w * a * a).sum()
}

/// Both sides of the value-error bound for state values:
/// `(1/2)|v - Psi w|_D^2` and `|r - X w|_D^2 / (2 (1 - gamma)^2)` with
/// `r = X w_star`.
pub fn value_error_bound_sides(
    p: &DMatrix<f64>,
    gamma: f64,
    x: &DMatrix<f64>,
    w_star: &DVector<f64>,
    w: &DVector<f64>,
    d: &DVector<f64>,
) -> Result<(f64, f64)> {
    let n = p.nrows();
    let m = DMatrix::identity(n, n) - p * gamma;
    let psi = linalg::solve_matrix(m, x)?;
    let v = &psi * w_star;
    let v_hat = &psi * w;
    let r_err = x * (w_star - w);
    let lhs = 0.5 * weighted_sq_norm(&(v - v_hat), d);
    let rhs = weighted_sq_norm(&r_err, d) / (2.0 * (1.0 - gamma).powi(2));
    Ok((lhs, rhs))
}

/// Random MDPs with `D` the on-policy stationary distribution.
pub fn check_value_bound(trials: usize, rng: &mut RngStream) -> Result<CheckReport> {
    let start = Instant::now();
    let mut violations = 0;
    let mut max_ratio: f64 = 0.0;
    let mut max_excess = f64::NEG_INFINITY;
    for k in 0..trials {
        let n = rng.random_range(1..=15);
        let dim = rng.random_range(1..=n.max(1));
        let gamma = rng.random_range(0.3..=0.95);
        let p = dense_stochastic(n, rng);
        let d = stationary_of(&p);
        let x = DMatrix::from_fn(n, dim, |_, _| rng.random_range(-1.0..1.0));
        let w_star = DVector::from_fn(dim, |_, _| rng.random_range(-3.0..3.0));
        // every tenth trial checks the exact-weights case
        let w = if k % 10 == 0 { w_star.clone() } else { DVector::from_fn(dim, |_, _| rng.random_range(-3.0..3.0)) };
        let (lhs, rhs) = value_error_bound_sides(&p, gamma, &x, &w_star, &w, &d)?;
        let excess = lhs - rhs;
        max_excess = max_excess.max(excess);
        if excess > 1e-12 * (1.0 + rhs) {
            violations += 1;
        }
        if rhs > 0.0 {
            max_ratio = max_ratio.max(lhs / rhs);
        }
    }
    Ok(CheckReport {
        check: "value-bound".into(),
        trials,
        passed: violations == 0,
        elapsed_secs: start.elapsed().as_secs_f64(),
        details: json!({ "violations": violations, "max_lhs_over_rhs": max_ratio, "max_lhs_minus_rhs": max_excess }),
    })
}

/// Fixed problem for the least-squares rate check: state values, state
/// features, two actions whose rewards differ but whose `pi`-average is
/// realizable.
#[derive(Clone, Debug)]
pub struct RateProblem {
    pub gamma: f64,
    pub p_pi: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub w_star: DVector<f64>,
    /// `r(s, a)`.
    pub reward: DMatrix<f64>,
    pub pi: DMatrix<f64>,
    pub d_pi: DVector<f64>,
    pub psi: DMatrix<f64>,
}

impl RateProblem {
    pub fn new(num_states: usize, dim: usize, rng: &mut RngStream) -> Result<Self> {
        let gamma = 0.9;
        let na = 2;
        let p_sa: Vec<DMatrix<f64>> = (0..na).map(|_| dense_stochastic(num_states, rng)).collect();
        let pi = DMatrix::from_fn(num_states, na, |_, _| rng.random_range(0.2..0.8f64));
        let pi = DMatrix::from_fn(num_states, na, |s, a| pi[(s, a)] / pi.row(s).sum());
        let p_pi = DMatrix::from_fn(num_states, num_states, |s, t| (0..na).map(|a| pi[(s, a)] * p_sa[a][(s, t)]).sum());
        let x = DMatrix::from_fn(num_states, dim, |_, _| rng.random_range(-1.0..1.0));
        let w_star = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
        let base = &x * &w_star;
        // action 0 gets +c / pi0, action 1 gets -c / pi1: zero mean under pi
        let reward = DMatrix::from_fn(num_states, na, |s, a| {
            let c = 0.5;
            base[s] + if a == 0 { c / pi[(s, 0)] } else { -c / pi[(s, 1)] }
        });
        let d_pi = stationary_of(&p_pi);
        let psi = linalg::solve_matrix(DMatrix::identity(num_states, num_states) - &p_pi * gamma, &x)?;
        Ok(RateProblem { gamma, p_pi, x, w_star, reward, pi, d_pi, psi })
    }

    /// Squared `d_pi`-weighted value error of `Psi w`.
    pub fn value_error(&self, w: &DVector<f64>) -> f64 {
        weighted_sq_norm(&(&self.psi * (&self.w_star - w)), &self.d_pi)
    }

    /// Average-iterate errors at every horizon in `horizons` (sorted) for
    /// one stream of `rho`-weighted samples with states from `d_mu` and
    /// actions from `mu`.
    pub fn rls_errors(&self, mu: &DMatrix<f64>, d_mu: &DVector<f64>, horizons: &[usize], noise: f64, rng: &mut RngStream) -> Vec<f64> {
        let dim = self.x.ncols();
        let n = self.x.nrows();
        let cdf: Vec<f64> = d_mu.iter().scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        }).collect();
        let normal = Normal::new(0.0, noise).unwrap();
        // inverse of (I + sum rho x x^T), maintained by Sherman-Morrison
        let mut inv = DMatrix::<f64>::identity(dim, dim);
        let mut b = DVector::<f64>::zeros(dim);
        let mut sum_w = DVector::<f64>::zeros(dim);
        let mut out = Vec::with_capacity(horizons.len());
        let mut next = 0;
        let last = *horizons.last().unwrap_or(&0);
        for t in 1..=last {
            let u: f64 = rng.random_range(0.0..1.0);
            let s = cdf.iter().position(|&c| u < c).unwrap_or(n - 1);
            let a = if rng.random_range(0.0..1.0) < mu[(s, 0)] { 0 } else { 1 };
            let rho = self.pi[(s, a)] / mu[(s, a)];
            let r = self.reward[(s, a)] + normal.sample(rng);
            let x = self.x.row(s).transpose();
            let ix = &inv * &x;
            let denom = 1.0 + rho * x.dot(&ix);
            inv -= (&ix * ix.transpose()) * (rho / denom);
            b += &x * (rho * r);
            sum_w += &inv * &b;
            if t == horizons[next] {
                out.push(self.value_error(&(&sum_w / t as f64)));
                next += 1;
            }
        }
        out
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Behavior action probabilities that put `mass` on the action `pi` likes
/// least, giving larger importance ratios as `mass` shrinks.
fn behavior_for(pi: &DMatrix<f64>, mass: f64) -> DMatrix<f64> {
    DMatrix::from_fn(pi.nrows(), 2, |s, a| {
        let fav = if pi[(s, 0)] >= pi[(s, 1)] { 0 } else { 1 };
        if a == fav {
            1.0 - mass
        } else {
            mass
        }
    })
}

/// Average-iterate recursive least squares on a fixed 10-state problem:
/// median error over `seeds` at each horizon, its log-log slope, and the
/// same for a more off-policy behavior.
pub fn check_rls_rate(horizons: &[usize], seeds: usize, rng: &mut RngStream) -> Result<CheckReport> {
    let start = Instant::now();
    let mut fixed = RngStream::new(0x9e37, 0);
    let prob = RateProblem::new(10, 4, &mut fixed)?;
    let mut horizons = horizons.to_vec();
    horizons.sort_unstable();
    horizons.dedup();
    let logt: Vec<f64> = horizons.iter().map(|&t| (t as f64).ln()).collect();
    // state sampling distribution: half on-policy, half uniform
    let d_mu = prob.d_pi.map(|v| 0.5 * v + 0.05);
    let d_mu = &d_mu / d_mu.sum();
    let run = |mass: f64, rng: &mut RngStream| -> (Vec<f64>, f64, f64) {
        let mu = behavior_for(&prob.pi, mass);
        let mut per_t: Vec<Vec<f64>> = vec![Vec::new(); horizons.len()];
        for _ in 0..seeds {
            let stream = rng.random::<u64>();
            let mut r = rng.fork(stream);
            let e = prob.rls_errors(&mu, &d_mu, &horizons, 0.5, &mut r);
            for (k, v) in e.into_iter().enumerate() {
                per_t[k].push(v);
            }
        }
        let med: Vec<f64> = per_t.into_iter().map(median).collect();
        let s = slope(&logt, &med.iter().map(|v| v.ln()).collect::<Vec<_>>());
        let norm: Vec<f64> = med.iter().zip(&horizons).map(|(e, &t)| (e * t as f64 / (1.0 + t as f64).ln()).ln()).collect();
        (med.clone(), s, slope(&logt, &norm))
    };
    let (med, s, norm_slope) = run(0.3, rng);
    let (med2, s2, _) = run(0.15, rng);
    let decreasing = med.windows(2).all(|w| w[1] < w[0]);
    let passed = s <= -0.8 && norm_slope <= 0.05 && decreasing;
    Ok(CheckReport {
        check: "rls-rate".into(),
        trials: seeds,
        passed,
        elapsed_secs: start.elapsed().as_secs_f64(),
        details: json!({
            "horizons": horizons,
            "median_error": med,
            "loglog_slope": s,
            "normalized_slope": norm_slope,
            "median_decreasing": decreasing,
            "off_policy_median_error": med2,
            "off_policy_loglog_slope": s2,
        }),
    })
}

fn projection_weights(x: &DMatrix<f64>, d: &DVector<f64>, target: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let xt_d = x.transpose() * DMatrix::from_diagonal(d);
    linalg::solve_matrix(&xt_d * x, &(&xt_d * target))
}

fn full_support_model(rng: &mut RngStream) -> TabularMdpModel {
    let ns = rng.random_range(3..=8);
    let na = rng.random_range(1..=3);
    let n = ns * na;
    let dim = rng.random_range(1..n.min(6).max(2));
    let gamma = rng.random_range(0.5..0.95);
    let mut m = random_model(ns, na, dim, gamma, ns, rng);
    // every next state reachable from every pair, so the on-policy
    // distribution has full support
    m.p = DMatrix::from_fn(n, ns, |_, _| rng.random_range(0.05..1.0));
    for mut row in m.p.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    // transition-dependent discounts
    m.gamma = DMatrix::from_fn(n, ns, |_, _| if rng.random_range(0.0..1.0) < 0.2 { 0.0 } else { gamma });
    m
}

/// SF-NR prediction `X W_psi w_c` against LSTD(1) prediction `X theta`.
pub fn sf_lstd_gap(m: &TabularMdpModel, phi: &DMatrix<f64>, d: &DVector<f64>) -> Result<f64> {
    let sf_model = TabularMdpModel { x: phi.clone(), ..m.clone() };
    let psi = sf_model.true_sf()?;
    let w_psi = projection_weights(&m.x, d, &psi)?;
    let w_c = projection_weights(phi, d, &DMatrix::from_column_slice(m.r.len(), 1, m.r.as_slice()))?;
    let sf_pred = &m.x * w_psi * w_c;
    let lstd_pred = &m.x * m.lstd_solution(1.0, d)?;
    Ok((sf_pred.column(0) - lstd_pred).amax())
}

/// One of the three reward constructions on `trials` random models.
pub fn check_lstd_equivalence(case: u8, trials: usize, rng: &mut RngStream) -> Result<CheckReport> {
    let start = Instant::now();
    let mut max_gap: f64 = 0.0;
    let mut min_gap = f64::INFINITY;
    for _ in 0..trials {
        let mut m = full_support_model(rng);
        let d = m.on_policy_distribution();
        let n = m.num_pairs();
        let phi = match case {
            2 => {
                let k = rng.random_range(1..=3);
                let mut phi = DMatrix::zeros(n, k);
                for i in 0..n {
                    if rng.random_range(0.0..1.0) < 0.4 {
                        phi[(i, rng.random_range(0..k))] = 1.0;
                    }
                }
                // every indicator is used at least once; rows stay one-hot
                for g in 0..k.min(n) {
                    phi.row_mut(g).fill(0.0);
                    phi[(g, g)] = 1.0;
                }
                phi
            }
            _ => m.x.clone(),
        };
        let w = DVector::from_fn(phi.ncols(), |_, _| rng.random_range(-5.0..5.0));
        m.r = &phi * &w;
        if case == 3 {
            // residual of a random vector after D-projection onto span(X)
            let u = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let coef = projection_weights(&m.x, &d, &DMatrix::from_column_slice(n, 1, u.as_slice()))?;
            let eta = &u - (&m.x * coef).column(0);
            m.r += eta;
        }
        let gap = sf_lstd_gap(&m, &phi, &d)?;
        max_gap = max_gap.max(gap);
        min_gap = min_gap.min(gap);
    }
    let passed = match case {
        1 | 2 => max_gap < 1e-8,
        _ => min_gap > 1e-8,
    };
    Ok(CheckReport {
        check: format!("lstd-equivalence-case{case}"),
        trials,
        passed,
        elapsed_secs: start.elapsed().as_secs_f64(),
        details: json!({ "max_gap": max_gap, "min_gap": min_gap }),
    })
}
