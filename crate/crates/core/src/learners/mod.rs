//! Off-policy GVF learners.
//!
//! Every learner sees the same per-step [`StepData`] (features computed once
//! by the caller) plus a per-question [`Target`]. Updates return the L1 norm
//! of the weight change, which feeds the behavior's intrinsic reward.

pub mod lstd;
pub mod replay;
pub mod sf;
pub mod tb;
pub mod trace;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{ActionId, GvfQuestion, Observation};
use crate::error::{Error, Result};
use crate::features::{Featurizer, RewardFeatureMap, SparseFeatures};
use crate::optim::{overshoot_entry, OptimizerKind};

pub use lstd::LstdLearner;
pub use replay::{ReplayBuffer, ReplaySpec};
pub use sf::{SfNrLearner, SuccessorFeatures};
pub use tb::TbLearner;
pub use trace::{SparseTrace, TbCore, TraceInputs, TraceKind};

/// Features of one transition, shared by all learners of a run.
#[derive(Clone, Debug)]
pub struct StepData {
    /// `x(S_t, A_t)`.
    pub x: SparseFeatures,
    /// `x(S_{t+1}, a')` for every action `a'`.
    pub x_next: Vec<SparseFeatures>,
    /// Reward features of the transition.
    pub reward: SparseFeatures,
    /// `b(A_t | S_t)` under the behavior at selection time.
    pub behavior_prob: f64,
}

impl StepData {
    pub fn new(dim: usize, num_actions: usize, reward_dim: usize) -> Self {
        StepData {
            x: SparseFeatures::with_dim(dim),
            x_next: vec![SparseFeatures::with_dim(dim); num_actions],
            reward: SparseFeatures::with_dim(reward_dim),
            behavior_prob: 1.0,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn fill(
        &mut self,
        features: &dyn Featurizer,
        reward_map: &RewardFeatureMap,
        s: &Observation,
        a: ActionId,
        s_next: &Observation,
        goal_hit: Option<usize>,
        behavior_prob: f64,
    ) {
        features.featurize_into(s, a, &mut self.x);
        for (b, f) in self.x_next.iter_mut().enumerate() {
            features.featurize_into(s_next, ActionId(b), f);
        }
        reward_map.features_into(s, a, goal_hit, &mut self.reward);
        self.behavior_prob = behavior_prob;
    }
}

/// Per-question quantities of one transition.
#[derive(Clone, Debug, Default)]
pub struct Target {
    pub cumulant: f64,
    /// `gamma_{t+1}`.
    pub discount: f64,
    /// `pi(A_t | S_t)`.
    pub pi_prob: f64,
    /// `pi(. | S_{t+1})`.
    pub pi_next: Vec<f64>,
    /// `I(S_t)`.
    pub interest: f64,
}

impl Target {
    pub fn new(num_actions: usize) -> Self {
        Target { pi_next: vec![0.0; num_actions], ..Default::default() }
    }

    pub fn fill(&mut self, gvf: &GvfQuestion, s: &Observation, a: ActionId, s_next: &Observation, cumulant: f64, discount: f64) {
        self.cumulant = cumulant;
        self.discount = discount;
        self.pi_prob = gvf.policy.prob(s, a);
        gvf.policy.probs(s_next, &mut self.pi_next);
        self.interest = gvf.interest_at(s);
    }

    pub(crate) fn trace_inputs(&self, behavior_prob: f64) -> TraceInputs {
        TraceInputs { pi_prob: self.pi_prob, behavior_prob, interest: self.interest }
    }
}

/// `sum_a' pi(a') <x(S', a'), w>`.
pub(crate) fn expected_next(x_next: &[SparseFeatures], pi_next: &[f64], w: &[f64]) -> f64 {
    let mut v = 0.0;
    for (f, &p) in x_next.iter().zip(pi_next) {
        if p != 0.0 {
            v += p * f.dot(w);
        }
    }
    v
}

/// Scratch for `x - gamma * sum_a' pi(a') x(S', a')` and the overshoot
/// vector built from it.
#[derive(Clone, Debug)]
pub(crate) struct Overshoot {
    diff: Vec<f64>,
    marked: Vec<bool>,
    touched: Vec<usize>,
    pub idx: Vec<usize>,
    pub phi: Vec<f64>,
    pub z: Vec<f64>,
}

impl Overshoot {
    pub fn new(dim: usize) -> Self {
        Overshoot { diff: vec![0.0; dim], marked: vec![false; dim], touched: Vec::new(), idx: Vec::new(), phi: Vec::new(), z: Vec::new() }
    }

    fn touch(&mut self, i: usize, v: f64) {
        if !self.marked[i] {
            self.marked[i] = true;
            self.touched.push(i);
        }
        self.diff[i] += v;
    }

    /// Loads `x - gamma * xbar'` into the scratch.
    pub fn load(&mut self, x: &SparseFeatures, x_next: &[SparseFeatures], pi_next: &[f64], gamma: f64) {
        self.reset();
        for (i, v) in x.iter() {
            self.touch(i, v);
        }
        if gamma != 0.0 {
            for (f, &p) in x_next.iter().zip(pi_next) {
                if p != 0.0 {
                    for (i, v) in f.iter() {
                        self.touch(i, -gamma * p * v);
                    }
                }
            }
        }
    }

    /// Sparse view of the loaded difference.
    pub fn diff_entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.touched.iter().map(|&i| (i, self.diff[i]))
    }

    /// Builds `idx`, `phi` and `z` from a trace.
    pub fn from_trace(&mut self, trace: &SparseTrace) {
        self.idx.clear();
        self.idx.extend_from_slice(trace.indices());
        trace.gather(&mut self.phi);
        self.z.clear();
        for (&i, &p) in self.idx.iter().zip(&self.phi) {
            self.z.push(overshoot_entry(p, self.diff[i]));
        }
    }

    /// Builds `idx`, `phi` and `z` for the one-step update with `phi = c x`.
    pub fn from_features(&mut self, x: &SparseFeatures, c: f64) {
        self.idx.clear();
        self.phi.clear();
        self.z.clear();
        for (i, v) in x.iter() {
            let p = c * v;
            self.idx.push(i);
            self.phi.push(p);
            self.z.push(overshoot_entry(p, self.diff[i]));
        }
    }

    pub fn reset(&mut self) {
        for &i in &self.touched {
            self.diff[i] = 0.0;
            self.marked[i] = false;
        }
        self.touched.clear();
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerKind {
    Tb,
    TbInterest,
    Etb,
    Sfnr,
    Lstd,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 5] =
        [LearnerKind::Tb, LearnerKind::TbInterest, LearnerKind::Etb, LearnerKind::Sfnr, LearnerKind::Lstd];

    pub fn as_str(self) -> &'static str {
        match self {
            LearnerKind::Tb => "tb",
            LearnerKind::TbInterest => "tb-interest",
            LearnerKind::Etb => "etb",
            LearnerKind::Sfnr => "sfnr",
            LearnerKind::Lstd => "lstd",
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LearnerKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::UnknownComponent { kind: "learner", id: s.to_string() })
    }
}

fn default_lambda() -> f64 {
    0.9
}

fn default_initial_step() -> f64 {
    0.1
}

fn default_meta_step() -> f64 {
    0.01
}

fn default_optimizer() -> OptimizerKind {
    OptimizerKind::Auto
}

/// Trace that SF-NR uses for its successor features.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SfTrace {
    #[default]
    Tb,
    TbInterest,
    Etb,
}

/// Serializable description of a GVF learner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_optimizer")]
    pub optimizer: OptimizerKind,
    /// Divided by the number of active features before use.
    #[serde(default = "default_initial_step")]
    pub initial_step: f64,
    #[serde(default = "default_meta_step")]
    pub meta_step: f64,
    /// Upper bound on the ETB emphasis before the `rho` factor.
    #[serde(default)]
    pub emphasis_clip: Option<f64>,
    /// Step size of the SF-NR cumulant regression (defaults to `initial_step`).
    #[serde(default)]
    pub cumulant_step: Option<f64>,
    /// Only meaningful for SF-NR.
    #[serde(default)]
    pub sf_trace: SfTrace,
}

impl LearnerSpec {
    pub fn new(kind: LearnerKind) -> Self {
        LearnerSpec {
            kind,
            lambda: default_lambda(),
            optimizer: default_optimizer(),
            initial_step: default_initial_step(),
            meta_step: default_meta_step(),
            emphasis_clip: None,
            cumulant_step: None,
            sf_trace: SfTrace::Tb,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda must lie in [0, 1]");
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return bad("initial_step must be positive");
        }
        if !(self.meta_step >= 0.0 && self.meta_step.is_finite()) {
            return bad("meta_step must be non-negative");
        }
        if self.emphasis_clip.is_some_and(|c| !(c > 0.0)) {
            return bad("emphasis_clip must be positive");
        }
        if self.cumulant_step.is_some_and(|c| !(c > 0.0)) {
            return bad("cumulant_step must be positive");
        }
        if self.sf_trace != SfTrace::Tb && self.kind != LearnerKind::Sfnr {
            return bad("sf_trace only applies to sfnr");
        }
        Ok(())
    }

    /// Constructs the learner for features of dimension `dim` with `active`
    /// nonzeros per query and reward features of dimension `reward_dim`.
    pub fn build(&self, dim: usize, active: usize, reward_dim: usize) -> Result<Box<dyn GvfLearner>> {
        self.validate()?;
        let step = self.initial_step / active.max(1) as f64;
        Ok(match self.kind {
            LearnerKind::Tb => Box::new(TbLearner::new(TraceKind::Tb, self.lambda, dim, self.optimizer, step, self.meta_step)),
            LearnerKind::TbInterest => {
                Box::new(TbLearner::new(TraceKind::TbInterest, self.lambda, dim, self.optimizer, step, self.meta_step))
            }
            LearnerKind::Etb => Box::new(TbLearner::new(
                TraceKind::Etb { clip: self.emphasis_clip },
                self.lambda,
                dim,
                self.optimizer,
                step,
                self.meta_step,
            )),
            LearnerKind::Sfnr => {
                let trace = match self.sf_trace {
                    SfTrace::Tb => TraceKind::Tb,
                    SfTrace::TbInterest => TraceKind::TbInterest,
                    SfTrace::Etb => TraceKind::Etb { clip: self.emphasis_clip },
                };
                let sf = SuccessorFeatures::new(trace, self.lambda, dim, reward_dim, self.optimizer, step, self.meta_step);
                Box::new(SfNrLearner::new(sf, self.optimizer, self.cumulant_step.unwrap_or(self.initial_step), self.meta_step))
            }
            LearnerKind::Lstd => Box::new(LstdLearner::new(self.lambda, dim)),
        })
    }
}

/// A linear action-value learner for one GVF.
pub trait GvfLearner: Send {
    fn kind(&self) -> LearnerKind;

    /// One online update; returns `||delta_w||_1`.
    fn update(&mut self, d: &StepData, t: &Target) -> Result<f64>;

    /// One-step update from a stored transition. Never touches the online
    /// trace. SF-NR only moves its successor features here.
    fn replay_update(&mut self, d: &StepData, t: &Target) -> Result<f64>;

    fn predict(&self, x: &SparseFeatures) -> f64;

    /// Clears traces at a behavior-episode boundary.
    fn end_episode(&mut self);

    /// Called before predictions are read for evaluation.
    fn prepare_eval(&mut self) -> Result<()> {
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod test_util {
    use super::*;

    pub fn one_hot(dim: usize, i: usize) -> SparseFeatures {
        let mut f = SparseFeatures::with_dim(dim);
        f.push(i, 1.0);
        f
    }

    pub fn empty(dim: usize) -> SparseFeatures {
        SparseFeatures::with_dim(dim)
    }
}
