//! Generalized policy improvement over the GVF policies.
//!
//! Each GVF policy gets its own successor features over the behavior's
//! reward features; one weight vector `theta` regresses the intrinsic
//! reward on those features. The action value is
//! `max_j <psi_j(s, a), theta>`.

use std::sync::Arc;

use super::{greedy_probs, Behavior, BehaviorContext, BehaviorKind, BehaviorSpec, BehaviorStep};
use crate::domain::{ActionId, Observation, Policy, MAX_ACTIONS};
use crate::error::{check_dim, Result};
use crate::features::SparseFeatures;
use crate::learners::{SuccessorFeatures, Target, TraceKind};
use crate::optim::{overshoot_entry, Optimizer, OptimizerKind};

pub struct GpiBehavior {
    pub sfs: Vec<SuccessorFeatures>,
    pub policies: Vec<Arc<dyn Policy>>,
    pub theta: Vec<f64>,
    pub theta_opt: Optimizer,
    pub epsilon: f64,
    active: usize,
    target: Target,
    idx: Vec<usize>,
    phi: Vec<f64>,
    z: Vec<f64>,
}

impl GpiBehavior {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        policies: Vec<Arc<dyn Policy>>,
        dim: usize,
        active: usize,
        reward_dim: usize,
        reward_active: usize,
        lambda: f64,
        epsilon: f64,
        opt: OptimizerKind,
        initial_step: f64,
        meta_step: f64,
    ) -> Self {
        let na = policies.first().map_or(1, |p| p.num_actions());
        let step = initial_step / active.max(1) as f64;
        let sfs = policies.iter().map(|_| SuccessorFeatures::new(TraceKind::Tb, lambda, dim, reward_dim, opt, step, meta_step)).collect();
        GpiBehavior {
            sfs,
            policies,
            theta: vec![0.0; reward_dim],
            theta_opt: Optimizer::new(opt, reward_dim, initial_step / reward_active.max(1) as f64, meta_step),
            epsilon,
            active: active.max(1),
            target: Target::new(na),
            idx: Vec::new(),
            phi: Vec::new(),
            z: Vec::new(),
        }
    }

    pub(super) fn from_spec(spec: &BehaviorSpec, ctx: &BehaviorContext) -> Self {
        let mut g = GpiBehavior::new(
            ctx.policies.clone(),
            ctx.dim,
            ctx.active,
            ctx.reward_dim,
            ctx.reward_active,
            spec.lambda.unwrap_or(ctx.lambda),
            spec.epsilon,
            spec.optimizer.unwrap_or(ctx.optimizer),
            spec.initial_step.unwrap_or(ctx.initial_step),
            spec.meta_step.unwrap_or(ctx.meta_step),
        );
        g.optimistic_init(spec.optimistic_threshold);
        g
    }

    /// `psi = 1` everywhere and `theta = threshold / reward_dim`.
    pub fn optimistic_init(&mut self, threshold: f64) {
        let v = 1.0 / self.active as f64;
        for sf in &mut self.sfs {
            sf.fill_weights(v);
        }
        let d = self.theta.len().max(1) as f64;
        self.theta.iter_mut().for_each(|t| *t = threshold / d);
    }

    /// `max_j <psi_j(x), theta>`.
    pub fn value(&self, x: &SparseFeatures) -> f64 {
        self.sfs.iter().map(|sf| sf.value(x, &self.theta)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action values for every action.
    pub fn values(&self, xs: &[SparseFeatures], out: &mut [f64]) {
        for (o, x) in out.iter_mut().zip(xs) {
            *o = self.value(x);
        }
    }

    /// `theta += alpha (R - <x_r, theta>) x_r`.
    fn reward_update(&mut self, xr: &SparseFeatures, reward: f64) -> Result<()> {
        check_dim(self.theta.len(), xr.dim)?;
        let delta = reward - xr.dot(&self.theta);
        self.idx.clear();
        self.phi.clear();
        self.z.clear();
        for (i, v) in xr.iter() {
            self.idx.push(i);
            self.phi.push(v);
            self.z.push(overshoot_entry(v, v));
        }
        self.theta_opt.step(&mut self.theta, delta, &self.idx, &self.phi, &self.z);
        Ok(())
    }
}

impl Behavior for GpiBehavior {
    fn kind(&self) -> BehaviorKind {
        BehaviorKind::Gpi
    }

    fn probs(&self, _s: &Observation, xs: &[SparseFeatures], out: &mut [f64]) {
        let mut q = [0.0; MAX_ACTIONS];
        self.values(xs, &mut q[..xs.len()]);
        greedy_probs(&q[..xs.len()], self.epsilon, out);
    }

    fn update(&mut self, step: &BehaviorStep) -> Result<()> {
        let d = step.data;
        for (sf, pol) in self.sfs.iter_mut().zip(&self.policies) {
            let t = &mut self.target;
            t.cumulant = 0.0;
            t.discount = step.discount;
            t.pi_prob = pol.prob(step.s, step.a);
            pol.probs(step.s_next, &mut t.pi_next);
            t.interest = 1.0;
            sf.update(&d.x, &d.x_next, step.reward_features, t, d.behavior_prob)?;
        }
        self.reward_update(step.reward_features, step.reward)
    }

    fn end_episode(&mut self) {
        for sf in &mut self.sfs {
            sf.end_episode();
        }
    }
}

/// Greedy GPI action ignoring exploration; ties go to the lowest index.
pub fn greedy_action(b: &GpiBehavior, xs: &[SparseFeatures]) -> ActionId {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (a, x) in xs.iter().enumerate() {
        let v = b.value(x);
        if v > best_v {
            best = a;
            best_v = v;
        }
    }
    ActionId(best)
}
