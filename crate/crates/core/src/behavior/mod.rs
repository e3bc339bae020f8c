//! Behavior policies: learned (GPI over successor features, Expected
//! Sarsa) and scripted (nearest goal, uniform random).
//!
//! Learned behaviors maximize an intrinsic reward, the summed L1 weight
//! change of the GVF learners plus a per-step penalty.

mod esarsa;
mod gpi;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use esarsa::EsarsaControl;
pub use gpi::{greedy_action, GpiBehavior};

use crate::domain::{epsilon_greedy_probs, sample_index, ActionId, Observation, Policy, RngStream, MAX_ACTIONS};
use crate::envs::Dynamics;
use crate::error::{Error, Result};
use crate::features::SparseFeatures;
use crate::learners::StepData;
use crate::optim::OptimizerKind;
use crate::oracle::truth::nearest_goals;

/// `sum_j deltas_j + step_penalty`.
pub fn intrinsic_reward(deltas: &[f64], step_penalty: f64) -> f64 {
    deltas.iter().sum::<f64>() + step_penalty
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BehaviorKind {
    Gpi,
    Esarsa,
    Fixed,
    Random,
}

impl BehaviorKind {
    pub const ALL: [BehaviorKind; 4] = [BehaviorKind::Gpi, BehaviorKind::Esarsa, BehaviorKind::Fixed, BehaviorKind::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            BehaviorKind::Gpi => "gpi",
            BehaviorKind::Esarsa => "esarsa",
            BehaviorKind::Fixed => "fixed",
            BehaviorKind::Random => "random",
        }
    }

    pub fn is_learned(self) -> bool {
        matches!(self, BehaviorKind::Gpi | BehaviorKind::Esarsa)
    }
}

impl fmt::Display for BehaviorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BehaviorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BehaviorKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::UnknownComponent { kind: "behavior", id: s.to_string() })
    }
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_threshold() -> f64 {
    10.0
}

/// Behavior configuration. Unset learning parameters fall back to the GVF
/// learners' values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorSpec {
    pub kind: BehaviorKind,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_threshold")]
    pub optimistic_threshold: f64,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub optimizer: Option<OptimizerKind>,
    #[serde(default)]
    pub initial_step: Option<f64>,
    #[serde(default)]
    pub meta_step: Option<f64>,
}

impl BehaviorSpec {
    pub fn new(kind: BehaviorKind) -> Self {
        BehaviorSpec {
            kind,
            epsilon: default_epsilon(),
            optimistic_threshold: default_threshold(),
            lambda: None,
            optimizer: None,
            initial_step: None,
            meta_step: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("behavior: {m}")));
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad("epsilon must lie in [0, 1]");
        }
        if !(self.optimistic_threshold >= 0.0) {
            return bad("optimistic_threshold must be non-negative");
        }
        if self.lambda.is_some_and(|l| !(0.0..=1.0).contains(&l)) {
            return bad("lambda must lie in [0, 1]");
        }
        if self.initial_step.is_some_and(|a| !(a > 0.0)) || self.meta_step.is_some_and(|m| !(m >= 0.0)) {
            return bad("step sizes must be positive");
        }
        Ok(())
    }
}

/// What a behavior needs to know about the run it is part of.
pub struct BehaviorContext {
    pub dynamics: Arc<dyn Dynamics>,
    /// The GVF target policies, in GVF order.
    pub policies: Vec<Arc<dyn Policy>>,
    /// State-action feature dimension and active count.
    pub dim: usize,
    pub active: usize,
    /// Behavior reward-feature dimension and active count.
    pub reward_dim: usize,
    pub reward_active: usize,
    /// Fallbacks for unset learning parameters.
    pub lambda: f64,
    pub optimizer: OptimizerKind,
    pub initial_step: f64,
    pub meta_step: f64,
}

/// One transition as seen by a learned behavior.
pub struct BehaviorStep<'a> {
    pub s: &'a Observation,
    pub a: ActionId,
    pub s_next: &'a Observation,
    /// State-action features of the transition and of every next action.
    pub data: &'a StepData,
    /// Behavior reward features of `(s, a)`.
    pub reward_features: &'a SparseFeatures,
    pub reward: f64,
    /// Behavior discount of the transition: zero on goal entry.
    pub discount: f64,
}

pub trait Behavior: Send {
    fn kind(&self) -> BehaviorKind;

    /// Action distribution at `s`; `xs[a]` are the features of `(s, a)`.
    fn probs(&self, s: &Observation, xs: &[SparseFeatures], out: &mut [f64]);

    /// Samples an action and returns it with its probability.
    fn act(&mut self, s: &Observation, xs: &[SparseFeatures], rng: &mut RngStream) -> (ActionId, f64) {
        let n = xs.len();
        let mut p = [0.0; MAX_ACTIONS];
        self.probs(s, xs, &mut p[..n]);
        let a = sample_index(&p[..n], rng);
        (a, p[a.0])
    }

    /// Called with the first state of every episode.
    fn start_episode(&mut self, _s: &Observation, _rng: &mut RngStream) {}

    fn update(&mut self, _step: &BehaviorStep) -> Result<()> {
        Ok(())
    }

    /// Called after a goal entry ends the episode.
    fn end_episode(&mut self) {}
}

/// Uniform over actions.
#[derive(Clone, Debug)]
pub struct RandomBehavior;

impl Behavior for RandomBehavior {
    fn kind(&self) -> BehaviorKind {
        BehaviorKind::Random
    }

    fn probs(&self, _s: &Observation, xs: &[SparseFeatures], out: &mut [f64]) {
        let p = 1.0 / xs.len() as f64;
        out.iter_mut().for_each(|o| *o = p);
    }
}

/// Heads for the nearest goal, chosen at the start of every episode with
/// ties broken uniformly, by following that goal's GVF policy.
pub struct FixedBehavior {
    dynamics: Arc<dyn Dynamics>,
    policies: Vec<Arc<dyn Policy>>,
    pub goal: usize,
}

impl FixedBehavior {
    pub fn new(dynamics: Arc<dyn Dynamics>, policies: Vec<Arc<dyn Policy>>) -> Result<Self> {
        let probe = dynamics.reset(&mut RngStream::new(0, 0));
        if dynamics.goal_distances(&probe).is_none() {
            return Err(Error::Unsupported(format!("fixed behavior needs goal distances, which {} does not provide", dynamics.id())));
        }
        Ok(FixedBehavior { dynamics, policies, goal: 0 })
    }
}

impl Behavior for FixedBehavior {
    fn kind(&self) -> BehaviorKind {
        BehaviorKind::Fixed
    }

    fn probs(&self, s: &Observation, _xs: &[SparseFeatures], out: &mut [f64]) {
        self.policies[self.goal].probs(s, out);
    }

    fn start_episode(&mut self, s: &Observation, rng: &mut RngStream) {
        let d = self.dynamics.goal_distances(s).expect("checked at construction");
        let choices = nearest_goals(&d[..self.policies.len()]);
        self.goal = choices[rng.random_range(0..choices.len())];
    }
}

/// Epsilon-greedy distribution for `values` into `out`.
pub(crate) fn greedy_probs(values: &[f64], epsilon: f64, out: &mut [f64]) {
    epsilon_greedy_probs(values, epsilon, out);
}

impl BehaviorSpec {
    pub fn build(&self, ctx: BehaviorContext) -> Result<Box<dyn Behavior>> {
        self.validate()?;
        Ok(match self.kind {
            BehaviorKind::Random => Box::new(RandomBehavior),
            BehaviorKind::Fixed => Box::new(FixedBehavior::new(ctx.dynamics, ctx.policies)?),
            BehaviorKind::Esarsa => Box::new(EsarsaControl::from_spec(self, &ctx)),
            BehaviorKind::Gpi => Box::new(GpiBehavior::from_spec(self, &ctx)),
        })
    }
}
