use rand::Rng;

use super::{Dynamics, EnvId};
use crate::domain::{ActionId, Interest, Observation, Policy, RngStream};

const SIZE: f64 = 10.0;
const STEP: f64 = 0.5;
const NOISE: f64 = 0.1;
const DRIFT: f64 = 0.001;
const GOAL_SIZE: f64 = 1.0;
/// Goal boxes `[x_lo, y_lo]` of unit size: top-left, bottom-left, top-right,
/// bottom-right.
const GOALS: [[f64; 2]; 4] = [[0.0, SIZE - GOAL_SIZE], [0.0, 0.0], [SIZE - GOAL_SIZE, SIZE - GOAL_SIZE], [SIZE - GOAL_SIZE, 0.0]];

/// Open square world with a goal box in every corner.
#[derive(Clone, Debug, Default)]
pub struct Open2DWorld;

impl Open2DWorld {
    pub fn new() -> Self {
        Open2DWorld
    }

    pub fn size() -> f64 {
        SIZE
    }

    /// Interest of GVF `g`: the quadrant containing its goal.
    pub fn quadrant_interest(g: usize) -> Interest {
        let half = SIZE / 2.0;
        let lo = [if GOALS[g][0] < half { 0.0 } else { half }, if GOALS[g][1] < half { 0.0 } else { half }];
        Interest::Region { lo, hi: [lo[0] + half, lo[1] + half] }
    }

    /// Cell centers of an `n x n` grid over the world.
    pub fn grid_points(n: usize) -> Vec<Observation> {
        let h = SIZE / n as f64;
        (0..n).flat_map(|j| (0..n).map(move |i| Observation::new((i as f64 + 0.5) * h, (j as f64 + 0.5) * h))).collect()
    }
}

fn in_goal(s: &Observation, g: usize) -> bool {
    let [x, y] = GOALS[g];
    s.x() >= x && s.x() <= x + GOAL_SIZE && s.y() >= y && s.y() <= y + GOAL_SIZE
}

impl Dynamics for Open2DWorld {
    fn id(&self) -> EnvId {
        EnvId::Open2dWorld
    }

    fn num_actions(&self) -> usize {
        4
    }

    fn num_goals(&self) -> usize {
        4
    }

    fn reset(&self, rng: &mut RngStream) -> Observation {
        Observation::new(rng.random_range(4.5..=5.5), rng.random_range(4.5..=5.5))
    }

    fn advance(&self, s: &Observation, a: ActionId, rng: &mut RngStream) -> Observation {
        let len = STEP + rng.random_range(-NOISE..=NOISE);
        let drift = rng.random_range(-DRIFT..=DRIFT);
        let (dx, dy) = match a.0 {
            0 => (drift, len),
            1 => (drift, -len),
            2 => (-len, drift),
            _ => (len, drift),
        };
        Observation::new((s.x() + dx).clamp(0.0, SIZE), (s.y() + dy).clamp(0.0, SIZE))
    }

    fn goal_at(&self, s: &Observation) -> Option<usize> {
        (0..4).find(|&g| in_goal(s, g))
    }

    fn gvf_discount(&self) -> f64 {
        0.95
    }

    fn step_penalty(&self) -> f64 {
        -0.05
    }
}

/// Uniform over the actions that shrink the remaining distance to a goal box.
#[derive(Clone, Debug)]
pub struct ReduceDistancePolicy {
    goal: usize,
}

impl ReduceDistancePolicy {
    pub fn new(goal: usize) -> Self {
        ReduceDistancePolicy { goal }
    }
}

impl Policy for ReduceDistancePolicy {
    fn num_actions(&self) -> usize {
        4
    }

    fn probs(&self, s: &Observation, out: &mut [f64]) {
        let [x, y] = GOALS[self.goal];
        let wanted = [s.y() < y, s.y() > y + GOAL_SIZE, s.x() > x + GOAL_SIZE, s.x() < x];
        let n = wanted.iter().filter(|&&w| w).count();
        for a in 0..4 {
            out[a] = if n == 0 {
                0.25
            } else if wanted[a] {
                1.0 / n as f64
            } else {
                0.0
            };
        }
    }
}
