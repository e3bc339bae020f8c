//! Ground truth for the environment GVFs and the weightings used to score
//! predictions against it.
//!
//! Every GVF's cumulant is zero except on entry to its goal, so its value
//! factors as `q_i(s, a, t) = h_i(s, a) * E[C_i(t)]`, where `h_i` is the
//! expected product of discounts up to that entry. Only `h` is computed
//! here; the harness multiplies in the schedule's current expectation.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DVector;

use super::mdp::{stationary_power, tmaze_goal_model};
use crate::domain::{sample_index, ActionId, GvfQuestion, Observation, Policy, RngStream, MAX_ACTIONS};
use crate::envs::{ContinuousTMaze, Dynamics, EnvId, MountainCar, Open2DWorld, TabularTMaze};
use crate::error::{Error, Result};

/// State-action pairs at which predictions are scored, indexed
/// `point * num_actions + action`.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalSet {
    pub points: Vec<Observation>,
    pub num_actions: usize,
}

impl EvalSet {
    /// Non-goal cells (tabular), hallway points, a 20x20 grid or a 32x32
    /// position-velocity grid, crossed with every action.
    pub fn for_env(id: EnvId) -> EvalSet {
        match id {
            EnvId::TabularTmaze => {
                let maze = TabularTMaze::new();
                let points = (0..maze.num_cells()).filter(|&c| maze.goal_of_cell(c).is_none()).map(|c| maze.cell_obs(c)).collect();
                EvalSet { points, num_actions: 4 }
            }
            EnvId::ContinuousTmaze => EvalSet { points: ContinuousTMaze::hallway_points(20), num_actions: 4 },
            EnvId::Open2dWorld => EvalSet { points: Open2DWorld::grid_points(20), num_actions: 4 },
            EnvId::MountainCar => EvalSet { points: MountainCar::grid_points(32), num_actions: 3 },
        }
    }

    pub fn len(&self) -> usize {
        self.points.len() * self.num_actions
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn pair(&self, k: usize) -> (Observation, ActionId) {
        (self.points[k / self.num_actions], ActionId(k % self.num_actions))
    }

    pub fn pairs(&self) -> impl Iterator<Item = (Observation, ActionId)> + '_ {
        (0..self.len()).map(|k| self.pair(k))
    }

    /// Index of the evaluation point closest to `s`.
    pub fn nearest(&self, s: &Observation) -> usize {
        let d2 = |p: &Observation| (p.x() - s.x()).powi(2) + (p.y() - s.y()).powi(2);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = d2(p);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }
}

/// Unit-cumulant values `h[i][k]` of every GVF at every evaluation pair,
/// with Monte Carlo standard errors (zero for exact solves).
#[derive(Clone, Debug, PartialEq)]
pub struct Truth {
    pub h: Vec<Vec<f64>>,
    pub se: Vec<Vec<f64>>,
}

impl Truth {
    /// True values at the current schedule expectations.
    pub fn values(&self, gvf: usize, expected_cumulant: f64) -> impl Iterator<Item = f64> + '_ {
        self.h[gvf].iter().map(move |h| h * expected_cumulant)
    }
}

/// Exact `h` for the tabular maze by solving each GVF's teleporting MDP.
pub fn tabular_truth(maze: &TabularTMaze, gvfs: &[GvfQuestion], eval: &EvalSet) -> Result<Truth> {
    let na = eval.num_actions;
    let mut h = Vec::with_capacity(gvfs.len());
    for q in gvfs {
        let model = tmaze_goal_model(maze, q.goal, q.discount, q.policy.as_ref());
        let qv = model.true_q()?;
        h.push(eval.pairs().map(|(s, a)| qv[maze.cell_of(&s) * na + a.0]).collect());
    }
    let se = vec![vec![0.0; eval.len()]; gvfs.len()];
    Ok(Truth { h, se })
}

/// Steps after which the discount product falls below 1e-6; longer
/// rollouts contribute zero.
pub fn rollout_cap(discount: f64) -> usize {
    if discount <= 0.0 {
        1
    } else if discount >= 1.0 {
        100_000
    } else {
        ((1e-6f64).ln() / discount.ln()).ceil() as usize
    }
}

/// One rollout from `(s, a)` following the GVF's policy afterwards. Entry
/// into another goal restarts from the start distribution, as in the
/// environment.
fn discount_to_goal(dynamics: &dyn Dynamics, gvf: &GvfQuestion, s: Observation, a: ActionId, rng: &mut RngStream) -> f64 {
    let na = dynamics.num_actions();
    let mut probs = [0.0; MAX_ACTIONS];
    let mut s = s;
    let mut a = a;
    let mut prod = 1.0;
    for _ in 0..rollout_cap(gvf.discount) {
        let landed = dynamics.advance(&s, a, rng);
        match dynamics.goal_at(&landed) {
            Some(g) if g == gvf.goal => return prod,
            Some(_) => s = dynamics.reset(rng),
            None => s = landed,
        }
        prod *= gvf.discount;
        gvf.policy.probs(&s, &mut probs[..na]);
        a = sample_index(&probs[..na], rng);
    }
    0.0
}

/// Mean and standard error of the unit-cumulant return over `rollouts`
/// rollouts from every pair.
pub fn monte_carlo_truth(
    dynamics: &dyn Dynamics,
    gvf: &GvfQuestion,
    eval: &EvalSet,
    rollouts: usize,
    rng: &mut RngStream,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if rollouts == 0 {
        return Err(Error::InvalidConfig("rollouts must be at least 1".into()));
    }
    let mut mean = Vec::with_capacity(eval.len());
    let mut se = Vec::with_capacity(eval.len());
    for (s, a) in eval.pairs() {
        let samples: Vec<f64> = (0..rollouts).map(|_| discount_to_goal(dynamics, gvf, s, a, rng)).collect();
        let (m, e) = super::metrics::mean_se(&samples);
        mean.push(m);
        se.push(e);
    }
    Ok((mean, se))
}

/// Monte Carlo truth for every GVF, from a fixed stream of `seed`.
pub fn sampled_truth(dynamics: &dyn Dynamics, gvfs: &[GvfQuestion], eval: &EvalSet, rollouts: usize, seed: u64) -> Result<Truth> {
    let mut h = Vec::new();
    let mut se = Vec::new();
    for (i, q) in gvfs.iter().enumerate() {
        let mut rng = RngStream::new(seed, crate::domain::streams::TRUTH + 1000 * i as u64);
        let (m, e) = monte_carlo_truth(dynamics, q, eval, rollouts, &mut rng)?;
        h.push(m);
        se.push(e);
    }
    Ok(Truth { h, se })
}

type Cache = Mutex<HashMap<String, Arc<Truth>>>;

fn cache() -> &'static Cache {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Computes `make()` once per `key` for the life of the process. Truth is
/// expensive and shared by every run of an experiment.
pub fn cached_truth(key: &str, make: impl FnOnce() -> Result<Truth>) -> Result<Arc<Truth>> {
    if let Some(t) = cache().lock().unwrap().get(key) {
        return Ok(t.clone());
    }
    let t = Arc::new(make()?);
    cache().lock().unwrap().entry(key.to_string()).or_insert(t.clone());
    Ok(t)
}

/// Uniform weights over the evaluation set.
pub fn uniform_weights(n: usize) -> Vec<f64> {
    vec![1.0 / n.max(1) as f64; n]
}

/// Goals an episode starting at `s` may head for: the nearest ones.
pub fn nearest_goals(distances: &[f64]) -> Vec<usize> {
    let best = distances.iter().copied().fold(f64::INFINITY, f64::min);
    (0..distances.len()).filter(|&g| distances[g] <= best + 1e-9).collect()
}

/// Stationary `(cell, action)` distribution of the nearest-goal behavior in
/// the tabular maze. The chain runs on `(cell, chosen goal)`; every goal
/// entry restarts at the start cell with a fresh choice.
pub fn tabular_fixed_behavior_weights(maze: &TabularTMaze, policies: &[Arc<dyn Policy>], eval: &EvalSet) -> Vec<f64> {
    let ng = policies.len();
    let nc = maze.num_cells();
    let start = maze.start_cell();
    let start_dist: Vec<f64> = (0..ng).map(|g| maze.distance(g, start) as f64).collect();
    let choices = nearest_goals(&start_dist);
    let idx = |c: usize, g: usize| c * ng + g;
    let mut probs = [0.0; 4];
    let mut rows = vec![Vec::new(); nc * ng];
    for c in 0..nc {
        for g in 0..ng {
            policies[g].probs(&maze.cell_obs(c), &mut probs);
            for (a, &p) in probs.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let next = maze.move_cell(c, ActionId(a));
                if maze.goal_of_cell(next).is_some() {
                    for &g2 in &choices {
                        rows[idx(c, g)].push((idx(start, g2), p / choices.len() as f64));
                    }
                } else {
                    rows[idx(c, g)].push((idx(next, g), p));
                }
            }
        }
    }
    let mut init = vec![0.0; nc * ng];
    for &g in &choices {
        init[idx(start, g)] = 1.0;
    }
    let d = stationary_power(&rows, &init, 1e-14, 200_000);
    let mut w = vec![0.0; eval.len()];
    for (k, (s, a)) in eval.pairs().enumerate() {
        let c = maze.cell_of(&s);
        for g in 0..ng {
            w[k] += d[idx(c, g)] * policies[g].prob(&s, a);
        }
    }
    normalize(w)
}

/// Visit frequencies of `(state, action)` samples binned to the nearest
/// evaluation point.
pub fn empirical_weights(eval: &EvalSet, visits: impl IntoIterator<Item = (Observation, ActionId)>) -> Vec<f64> {
    let mut w = vec![0.0; eval.len()];
    for (s, a) in visits {
        w[eval.nearest(&s) * eval.num_actions + a.0] += 1.0;
    }
    normalize(w)
}

/// Interest times the visitation of the GVF's own policy, estimated from
/// `episodes` episodes from the start distribution (capped at the
/// discount horizon).
pub fn interest_weights(dynamics: &dyn Dynamics, gvf: &GvfQuestion, eval: &EvalSet, episodes: usize, rng: &mut RngStream) -> Vec<f64> {
    let na = dynamics.num_actions();
    let mut probs = [0.0; MAX_ACTIONS];
    let mut visits = Vec::new();
    for _ in 0..episodes {
        let mut s = dynamics.reset(rng);
        for _ in 0..rollout_cap(gvf.discount) {
            gvf.policy.probs(&s, &mut probs[..na]);
            let a = sample_index(&probs[..na], rng);
            visits.push((s, a));
            let landed = dynamics.advance(&s, a, rng);
            if dynamics.goal_at(&landed).is_some() {
                break;
            }
            s = landed;
        }
    }
    let mut w = empirical_weights(eval, visits);
    for (k, wk) in w.iter_mut().enumerate() {
        *wk *= gvf.interest_at(&eval.pair(k).0);
    }
    normalize(w)
}

fn normalize(mut w: Vec<f64>) -> Vec<f64> {
    let t: f64 = w.iter().sum();
    if t > 0.0 {
        w.iter_mut().for_each(|v| *v /= t);
    }
    w
}

/// `d` as a vector, for the matrix oracles.
pub fn as_dvector(w: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{streams, CumulantSchedule, Interest};
    use crate::envs::{gvf_suite, EnvOptions, GridPathPolicy, HallwayPolicy};

    fn tabular_suite() -> Vec<GvfQuestion> {
        gvf_suite(EnvId::TabularTmaze, &EnvOptions::default(), &mut RngStream::new(0, streams::CONSTANTS))
    }

    #[test]
    fn eval_set_sizes() {
        assert_eq!(EvalSet::for_env(EnvId::TabularTmaze).len(), 17 * 4);
        assert_eq!(EvalSet::for_env(EnvId::Open2dWorld).len(), 400 * 4);
        assert_eq!(EvalSet::for_env(EnvId::MountainCar).len(), 1024 * 3);
        let e = EvalSet::for_env(EnvId::ContinuousTmaze);
        assert!(e.points.iter().all(|p| ContinuousTMaze::distance_to_hallways(p) < 1e-9));
    }

    #[test]
    fn uniform_weights_sum_to_one() {
        let w = uniform_weights(68);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_matches_exact_tabular_values() {
        let maze = TabularTMaze::new();
        let gvfs = tabular_suite();
        let eval = EvalSet::for_env(EnvId::TabularTmaze);
        let exact = tabular_truth(&maze, &gvfs, &eval).unwrap();
        let mut rng = RngStream::new(9, streams::TRUTH);
        for (i, q) in gvfs.iter().enumerate().take(2) {
            let (m, se) = monte_carlo_truth(&maze, q, &eval, 10_000, &mut rng).unwrap();
            for k in 0..eval.len() {
                assert!((m[k] - exact.h[i][k]).abs() <= 3.0 * se[k] + 1e-12, "gvf {i} pair {k}: {} vs {}", m[k], exact.h[i][k]);
            }
        }
    }

    #[test]
    fn deterministic_path_gives_discount_power() {
        // the left-wall hallway policy from the crossbar junction going left:
        // no dynamics noise would make this exact, so use the tabular maze
        let maze = Arc::new(TabularTMaze::new());
        let q = GvfQuestion {
            name: "g".into(),
            policy: Arc::new(GridPathPolicy::new(maze.clone(), 2)),
            goal: 2,
            discount: 0.9,
            schedule: CumulantSchedule::Constant { value: 3.0 },
            interest: Interest::Uniform,
        };
        let start = maze.cell_obs(maze.start_cell());
        let eval = EvalSet { points: vec![start], num_actions: 4 };
        let (m, se) = monte_carlo_truth(maze.as_ref(), &q, &eval, 1, &mut RngStream::new(0, 0)).unwrap();
        // "up" from the start is on a 10-step shortest path
        assert!((m[0] - 0.9f64.powi(9)).abs() < 1e-12);
        assert_eq!(se[0], 0.0);
        let t = Truth { h: vec![m], se: vec![se] };
        let v: Vec<f64> = t.values(0, 3.0).collect();
        assert!((v[0] - 3.0 * 0.9f64.powi(9)).abs() < 1e-12);
        assert_eq!(t.values(0, 0.0).next(), Some(0.0));
    }

    #[test]
    fn zero_rollouts_rejected() {
        let maze = TabularTMaze::new();
        let gvfs = tabular_suite();
        let eval = EvalSet::for_env(EnvId::TabularTmaze);
        assert!(monte_carlo_truth(&maze, &gvfs[0], &eval, 0, &mut RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn fixed_behavior_covers_goal_adjacent_cells() {
        let maze = TabularTMaze::new();
        let policies: Vec<Arc<dyn Policy>> = tabular_suite().into_iter().map(|q| q.policy).collect();
        let eval = EvalSet::for_env(EnvId::TabularTmaze);
        let w = tabular_fixed_behavior_weights(&maze, &policies, &eval);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for g in 0..4 {
            let gc = maze.goal_cell(g);
            let adjacent: Vec<usize> = (0..4).map(|a| maze.move_cell(gc, ActionId(a))).filter(|&c| c != gc).collect();
            for c in adjacent {
                let p = eval.points.iter().position(|s| maze.cell_of(s) == c).unwrap();
                let mass: f64 = (0..4).map(|a| w[p * 4 + a]).sum();
                assert!(mass > 0.0, "cell next to goal {g} unvisited");
            }
        }
    }

    #[test]
    fn empirical_binning_and_interest() {
        let eval = EvalSet { points: vec![Observation::new(0.0, 0.0), Observation::new(1.0, 0.0)], num_actions: 2 };
        let w = empirical_weights(&eval, vec![(Observation::new(0.1, 0.0), ActionId(1)), (Observation::new(0.9, 0.0), ActionId(0))]);
        assert_eq!(w, vec![0.0, 0.5, 0.5, 0.0]);
        let dynamics = ContinuousTMaze::new();
        let q = GvfQuestion {
            name: "g".into(),
            policy: Arc::new(HallwayPolicy::new(0)),
            goal: 0,
            discount: 0.9,
            schedule: CumulantSchedule::Constant { value: 1.0 },
            interest: Interest::Region { lo: [0.0, 0.5], hi: [0.5, 1.0] },
        };
        let eval = EvalSet::for_env(EnvId::ContinuousTmaze);
        let w = interest_weights(&dynamics, &q, &eval, 20, &mut RngStream::new(0, 0));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for (k, v) in w.iter().enumerate() {
            if *v > 0.0 {
                assert_eq!(q.interest_at(&eval.pair(k).0), 1.0);
            }
        }
    }

    #[test]
    fn cache_computes_once() {
        let mut calls = 0;
        for _ in 0..3 {
            cached_truth("cache-test", || {
                calls += 1;
                Ok(Truth { h: vec![], se: vec![] })
            })
            .unwrap();
        }
        assert_eq!(calls, 1);
    }
}
