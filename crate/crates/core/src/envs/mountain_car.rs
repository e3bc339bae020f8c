use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;

use super::{Dynamics, EnvId};
use crate::domain::{epsilon_greedy_probs, sample_index, streams, ActionId, Observation, Policy, RngStream};
use crate::features::{Featurizer, SparseFeatures, TileCoder, TileCoderConfig};

pub const X_MIN: f64 = -1.2;
pub const X_MAX: f64 = 0.5;
pub const V_MAX: f64 = 0.07;

/// Classic Mountain Car. Observations are `(position, velocity)`; actions
/// 0, 1, 2 push with force -1, 0, +1. Goal 0 is the left wall, goal 1 the
/// hilltop.
#[derive(Clone, Debug, Default)]
pub struct MountainCar;

impl MountainCar {
    pub fn new() -> Self {
        MountainCar
    }

    pub fn bounds() -> ([f64; 2], [f64; 2]) {
        ([X_MIN, -V_MAX], [X_MAX, V_MAX])
    }

    /// Noise-free dynamics.
    pub fn physics(s: &Observation, a: ActionId) -> Observation {
        let force = a.0 as f64 - 1.0;
        let v = (s.y() + 0.001 * force - 0.0025 * (3.0 * s.x()).cos()).clamp(-V_MAX, V_MAX);
        let x = (s.x() + v).clamp(X_MIN, X_MAX);
        let v = if x <= X_MIN { 0.0 } else { v };
        Observation::new(x, v)
    }

    /// `n x n` grid of cell centers over the state box.
    pub fn grid_points(n: usize) -> Vec<Observation> {
        let (lo, hi) = Self::bounds();
        let h = [(hi[0] - lo[0]) / n as f64, (hi[1] - lo[1]) / n as f64];
        (0..n)
            .flat_map(|j| (0..n).map(move |i| Observation::new(lo[0] + (i as f64 + 0.5) * h[0], lo[1] + (j as f64 + 0.5) * h[1])))
            .collect()
    }
}

impl Dynamics for MountainCar {
    fn id(&self) -> EnvId {
        EnvId::MountainCar
    }

    fn num_actions(&self) -> usize {
        3
    }

    fn num_goals(&self) -> usize {
        2
    }

    fn reset(&self, rng: &mut RngStream) -> Observation {
        Observation::new(rng.random_range(-0.6..=-0.4), 0.0)
    }

    fn advance(&self, s: &Observation, a: ActionId, _rng: &mut RngStream) -> Observation {
        Self::physics(s, a)
    }

    fn goal_at(&self, s: &Observation) -> Option<usize> {
        if s.x() <= X_MIN {
            Some(0)
        } else if s.x() >= X_MAX {
            Some(1)
        } else {
            None
        }
    }

    fn gvf_discount(&self) -> f64 {
        0.99
    }

    fn step_penalty(&self) -> f64 {
        -0.01
    }
}

/// Greedy policy over tile-coded action values; ties split uniformly.
#[derive(Clone, Debug)]
pub struct GreedyTilePolicy {
    coder: TileCoder,
    weights: Vec<f64>,
}

impl GreedyTilePolicy {
    pub fn new(coder: TileCoder, weights: Vec<f64>) -> Self {
        GreedyTilePolicy { coder, weights }
    }

    fn values(&self, s: &Observation, out: &mut [f64]) {
        let mut f = SparseFeatures::with_dim(self.coder.dim());
        for (a, o) in out.iter_mut().enumerate().take(self.coder.num_actions()) {
            self.coder.featurize_into(s, ActionId(a), &mut f);
            *o = f.dot(&self.weights);
        }
    }
}

impl Policy for GreedyTilePolicy {
    fn num_actions(&self) -> usize {
        self.coder.num_actions()
    }

    fn probs(&self, s: &Observation, out: &mut [f64]) {
        let mut q = [0.0; 3];
        self.values(s, &mut q);
        epsilon_greedy_probs(&q, 0.0, &mut out[..3]);
    }
}

const PRETRAIN_EPSILON: f64 = 0.1;
const PRETRAIN_LAMBDA: f64 = 0.9;
const PRETRAIN_TILINGS: usize = 16;
const PRETRAIN_STEP: f64 = 0.1;
const PRETRAIN_EPISODE_CAP: usize = 5000;

fn pretrain_coder() -> TileCoder {
    let (lo, hi) = MountainCar::bounds();
    TileCoder::new(TileCoderConfig { tilings: PRETRAIN_TILINGS, tiles_per_dim: 2, lo, hi }, 3)
}

const CHECKPOINTS: usize = 10;
const SELECTION_EPISODES: usize = 50;
const SELECTION_HORIZON: usize = 500;

/// Fraction of start draws from which `policy` enters `goal` within the
/// horizon.
pub fn goal_success_rate(policy: &dyn Policy, goal: usize, episodes: usize, horizon: usize, rng: &mut RngStream) -> f64 {
    let env = MountainCar::new();
    let mut ok = 0;
    for _ in 0..episodes {
        let mut s = env.reset(rng);
        for _ in 0..horizon {
            s = env.advance(&s, policy.sample(&s, rng), rng);
            if let Some(g) = env.goal_at(&s) {
                ok += (g == goal) as usize;
                break;
            }
        }
    }
    ok as f64 / episodes as f64
}

/// ESARSA(lambda) on -1 per step until `goal` is entered. The greedy policy
/// is scored at evenly spaced checkpoints and the best one is kept (latest on
/// ties), since single snapshots of this coarse coding are erratic.
fn pretrain_one(goal: usize, steps: usize, rng: &mut RngStream, selection: &mut RngStream) -> GreedyTilePolicy {
    let env = MountainCar::new();
    let coder = pretrain_coder();
    let d = coder.dim();
    let alpha = PRETRAIN_STEP / PRETRAIN_TILINGS as f64;
    let mut w = vec![0.0; d];
    let mut z = vec![0.0; d];
    let mut f = SparseFeatures::with_dim(d);
    let q = |w: &[f64], f: &mut SparseFeatures, s: &Observation| -> [f64; 3] {
        std::array::from_fn(|a| {
            coder.featurize_into(s, ActionId(a), f);
            f.dot(w)
        })
    };
    let chunk = (steps / CHECKPOINTS).max(1);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut s = env.reset(rng);
    let mut episode_len = 0;
    for t in 0..steps {
        let qs = q(&w, &mut f, &s);
        let mut mu = [0.0; 3];
        epsilon_greedy_probs(&qs, PRETRAIN_EPSILON, &mut mu);
        let a = sample_index(&mu, rng);
        let landed = env.advance(&s, a, rng);
        let (next, terminal) = match env.goal_at(&landed) {
            Some(g) if g == goal => (env.reset(rng), true),
            Some(_) => (env.reset(rng), false),
            None => (landed, false),
        };
        let target = if terminal {
            -1.0
        } else {
            let qn = q(&w, &mut f, &next);
            let mut pn = [0.0; 3];
            epsilon_greedy_probs(&qn, PRETRAIN_EPSILON, &mut pn);
            -1.0 + pn.iter().zip(&qn).map(|(p, v)| p * v).sum::<f64>()
        };
        let delta = target - qs[a.0];
        z.iter_mut().for_each(|v| *v *= PRETRAIN_LAMBDA);
        coder.featurize_into(&s, a, &mut f);
        for (i, v) in f.iter() {
            z[i] += v;
        }
        for (wi, zi) in w.iter_mut().zip(&z) {
            *wi += alpha * delta * zi;
        }
        episode_len += 1;
        if terminal || episode_len >= PRETRAIN_EPISODE_CAP {
            z.iter_mut().for_each(|v| *v = 0.0);
            episode_len = 0;
            s = if terminal { next } else { env.reset(rng) };
        } else {
            s = next;
        }
        if (t + 1) % chunk == 0 && steps >= CHECKPOINTS {
            let p = GreedyTilePolicy::new(coder.clone(), w.clone());
            let score = goal_success_rate(&p, goal, SELECTION_EPISODES, SELECTION_HORIZON, selection);
            if best.as_ref().is_none_or(|(b, _)| score >= *b) {
                best = Some((score, w.clone()));
            }
        }
    }
    let w = best.map(|(_, w)| w).unwrap_or(w);
    GreedyTilePolicy::new(coder, w)
}

type PolicyPair = (Arc<GreedyTilePolicy>, Arc<GreedyTilePolicy>);

fn cache() -> &'static Mutex<HashMap<(usize, u64), PolicyPair>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64), PolicyPair>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Scripted offline learning of the two Mountain Car GVF policies
/// (reach the left wall, reach the hilltop). Results are memoized per
/// `(steps, seed)`.
pub fn mountain_car_pretrain(steps: usize, seed: u64) -> PolicyPair {
    if let Some(p) = cache().lock().unwrap().get(&(steps, seed)) {
        return p.clone();
    }
    let mut rng = RngStream::new(seed, streams::PRETRAIN);
    let mut selection = rng.fork(streams::PRETRAIN + 1000);
    let left = Arc::new(pretrain_one(0, steps, &mut rng, &mut selection));
    let hill = Arc::new(pretrain_one(1, steps, &mut rng, &mut selection));
    let pair = (left, hill);
    cache().lock().unwrap().insert((steps, seed), pair.clone());
    pair
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn throttle_from_rest() {
        let n = MountainCar::physics(&Observation::new(-0.5, 0.0), ActionId(2));
        let v = 0.001 - 0.0025 * (-1.5f64).cos();
        assert!((n.y() - v).abs() < 1e-15);
        assert!((n.y() - 0.00082316).abs() < 1e-8);
        assert!((n.x() - (-0.49917684)).abs() < 1e-8);
    }

    #[test]
    fn valley_bottom_is_a_fixed_point() {
        let x_star = -std::f64::consts::PI / 6.0;
        let mut s = Observation::new(x_star, 0.0);
        for _ in 0..10_000 {
            s = MountainCar::physics(&s, ActionId(1));
            assert!((s.x() - x_star).abs() <= 1e-9);
        }
    }

    #[test]
    fn left_wall_zeroes_velocity() {
        let s = MountainCar::physics(&Observation::new(-1.19, -0.07), ActionId(0));
        assert_eq!(s.x(), X_MIN);
        assert_eq!(s.y(), 0.0);
    }

    #[test]
    fn reset_at_rest() {
        let env = MountainCar::new();
        let mut rng = RngStream::new(0, 1);
        for _ in 0..1000 {
            let s = env.reset(&mut rng);
            assert_eq!(s.y(), 0.0);
            assert!((-0.6..=-0.4).contains(&s.x()));
        }
    }

    #[test]
    fn untrained_policy_is_uniform() {
        let (left, _) = mountain_car_pretrain(0, 9);
        let mut out = [0.0; 3];
        left.probs(&Observation::new(-0.5, 0.01), &mut out);
        for p in out {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    fn success_rate(p: &GreedyTilePolicy, goal: usize) -> f64 {
        goal_success_rate(p, goal, 100, 500, &mut RngStream::new(99, 1))
    }

    #[test]
    fn pretrained_policies_reach_their_goals() {
        let (left, hill) = mountain_car_pretrain(crate::envs::EnvOptions::default().pretrain_steps, 0x5eed);
        let l = success_rate(&left, 0);
        let h = success_rate(&hill, 1);
        assert!(l >= 0.95, "left-wall success {l}");
        assert!(h >= 0.95, "hilltop success {h}");
    }
}
