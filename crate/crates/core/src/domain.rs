//! Shared domain types: observations, actions, transitions, policies, GVF
//! questions, cumulant schedules and seeded random streams.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Upper bound on the action count of every environment in the workbench.
pub const MAX_ACTIONS: usize = 4;

/// A two-coordinate observation. Grid environments store `(column, row)`,
/// the continuous worlds `(x, y)` and Mountain Car `(position, velocity)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation(pub [f64; 2]);

impl Observation {
    pub fn new(a: f64, b: f64) -> Self {
        Observation([a, b])
    }

    pub fn coords(&self) -> &[f64; 2] {
        &self.0
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.0[0]
    }

    #[inline]
    pub fn y(&self) -> f64 {
        self.0[1]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionId(pub usize);

impl ActionId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

/// One transition as seen by a single GVF learner.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub s: Observation,
    pub a: ActionId,
    pub s_next: Observation,
    pub cumulant: f64,
    /// Discount of the transition, in `[0, 1]`.
    pub discount_next: f64,
}

/// A stationary Markov policy over a finite action set.
pub trait Policy: Send + Sync {
    fn num_actions(&self) -> usize;

    /// Writes the action distribution at `s` into `out[..num_actions]`.
    fn probs(&self, s: &Observation, out: &mut [f64]);

    fn prob(&self, s: &Observation, a: ActionId) -> f64 {
        let mut buf = [0.0; MAX_ACTIONS];
        let n = self.num_actions();
        self.probs(s, &mut buf[..n]);
        buf[a.0]
    }

    fn sample(&self, s: &Observation, rng: &mut RngStream) -> ActionId {
        let mut buf = [0.0; MAX_ACTIONS];
        let n = self.num_actions();
        self.probs(s, &mut buf[..n]);
        sample_index(&buf[..n], rng)
    }
}

/// Inverse-CDF draw from a probability vector.
pub fn sample_index(probs: &[f64], rng: &mut RngStream) -> ActionId {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return ActionId(i);
        }
    }
    // Rounding can leave `acc` a hair below one; fall back to the last
    // action with positive mass.
    let last = probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1);
    ActionId(last)
}

/// Epsilon-greedy distribution over `values`; exact ties share the greedy
/// mass uniformly.
pub fn epsilon_greedy_probs(values: &[f64], epsilon: f64, out: &mut [f64]) {
    let n = values.len();
    let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ties = values.iter().filter(|&&v| v == best).count().max(1);
    let base = epsilon / n as f64;
    for (o, &v) in out.iter_mut().zip(values) {
        *o = base + if v == best { (1.0 - epsilon) / ties as f64 } else { 0.0 };
    }
}

/// Uniform random policy.
#[derive(Clone, Copy, Debug)]
pub struct UniformPolicy {
    pub num_actions: usize,
}

impl Policy for UniformPolicy {
    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn probs(&self, _s: &Observation, out: &mut [f64]) {
        let p = 1.0 / self.num_actions as f64;
        out[..self.num_actions].iter_mut().for_each(|o| *o = p);
    }
}

/// Per-goal cumulant process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CumulantSchedule {
    Constant { value: f64 },
    /// Fixed-mean Gaussian noise.
    Distractor { mean: f64, variance: f64 },
    /// Zero-mean Gaussian random walk; `value` is the current latent level.
    Drifter { variance: f64, value: f64 },
}

impl CumulantSchedule {
    pub fn drifter(variance: f64, initial: f64) -> Self {
        CumulantSchedule::Drifter { variance, value: initial }
    }

    pub fn role(&self) -> &'static str {
        match self {
            CumulantSchedule::Constant { .. } => "constant",
            CumulantSchedule::Distractor { .. } => "distractor",
            CumulantSchedule::Drifter { .. } => "drifter",
        }
    }

    /// Value emitted on a goal entry at the current time.
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match *self {
            CumulantSchedule::Constant { value } => value,
            CumulantSchedule::Distractor { mean, variance } => {
                Normal::new(mean, variance.sqrt()).expect("finite variance").sample(rng)
            }
            CumulantSchedule::Drifter { value, .. } => value,
        }
    }

    /// Advances the schedule by one environment step.
    pub fn step(&mut self, rng: &mut RngStream) {
        if let CumulantSchedule::Drifter { variance, value } = self {
            let inc: f64 = Normal::new(0.0, variance.sqrt()).expect("finite variance").sample(rng);
            *value += inc;
        }
    }

    pub fn expected(&self) -> f64 {
        match *self {
            CumulantSchedule::Constant { value } => value,
            CumulantSchedule::Distractor { mean, .. } => mean,
            CumulantSchedule::Drifter { value, .. } => value,
        }
    }
}

/// Non-negative interest over states.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Interest {
    Uniform,
    /// One inside the closed box `[lo, hi]`, zero elsewhere.
    Region { lo: [f64; 2], hi: [f64; 2] },
}

impl Interest {
    pub fn at(&self, s: &Observation) -> f64 {
        match self {
            Interest::Uniform => 1.0,
            Interest::Region { lo, hi } => {
                let inside = (0..2).all(|k| s.0[k] >= lo[k] && s.0[k] <= hi[k]);
                if inside {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// A prediction target: policy, transition discount, cumulant and interest.
///
/// The cumulant is zero except on transitions entering `goal`, where it is
/// drawn from `schedule`; the discount is zero exactly on those transitions.
#[derive(Clone)]
pub struct GvfQuestion {
    pub name: String,
    pub policy: Arc<dyn Policy>,
    pub goal: usize,
    pub discount: f64,
    pub schedule: CumulantSchedule,
    pub interest: Interest,
}

impl fmt::Debug for GvfQuestion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GvfQuestion")
            .field("name", &self.name)
            .field("goal", &self.goal)
            .field("discount", &self.discount)
            .field("schedule", &self.schedule)
            .field("interest", &self.interest)
            .finish()
    }
}

impl GvfQuestion {
    pub fn discount_for(&self, goal_hit: Option<usize>) -> f64 {
        if goal_hit == Some(self.goal) {
            0.0
        } else {
            self.discount
        }
    }

    pub fn cumulant_for(&self, goal_hit: Option<usize>, rng: &mut RngStream) -> f64 {
        if goal_hit == Some(self.goal) {
            self.schedule.sample(rng)
        } else {
            0.0
        }
    }

    pub fn interest_at(&self, s: &Observation) -> f64 {
        self.interest.at(s)
    }
}

/// A reproducible random stream: equal `(seed, stream)` pairs produce
/// identical draws.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Derives an independent stream from this stream's seed.
    pub fn fork(&self, stream: u64) -> RngStream {
        RngStream::new(self.seed, stream)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Stream ids used by a run; every consumer of randomness gets its own.
pub mod streams {
    pub const ENV: u64 = 1;
    pub const EXPLORATION: u64 = 2;
    pub const REPLAY: u64 = 3;
    pub const CONSTANTS: u64 = 4;
    pub const TRUTH: u64 = 5;
    pub const PRETRAIN: u64 = 6;
    /// Cumulant schedule `i` uses `SCHEDULE_BASE + i`.
    pub const SCHEDULE_BASE: u64 = 100;
}
