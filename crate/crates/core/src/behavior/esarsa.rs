//! Epsilon-greedy Expected Sarsa(lambda) with an accumulating trace.

use super::{greedy_probs, Behavior, BehaviorContext, BehaviorKind, BehaviorSpec, BehaviorStep};
use crate::domain::{Observation, MAX_ACTIONS};
use crate::error::{check_dim, Result};
use crate::features::SparseFeatures;
use crate::learners::{Overshoot, SparseTrace};
use crate::optim::{Optimizer, OptimizerKind};

#[derive(Clone, Debug)]
pub struct EsarsaControl {
    pub w: Vec<f64>,
    pub z: SparseTrace,
    pub lambda: f64,
    pub epsilon: f64,
    pub opt: Optimizer,
    active: usize,
    prev_discount: f64,
    scratch: Overshoot,
}

impl EsarsaControl {
    pub fn new(dim: usize, active: usize, lambda: f64, epsilon: f64, opt: OptimizerKind, initial_step: f64, meta_step: f64) -> Self {
        EsarsaControl {
            w: vec![0.0; dim],
            z: SparseTrace::new(dim),
            lambda,
            epsilon,
            opt: Optimizer::new(opt, dim, initial_step / active.max(1) as f64, meta_step),
            active: active.max(1),
            prev_discount: 0.0,
            scratch: Overshoot::new(dim),
        }
    }

    pub(super) fn from_spec(spec: &BehaviorSpec, ctx: &BehaviorContext) -> Self {
        let mut e = EsarsaControl::new(
            ctx.dim,
            ctx.active,
            spec.lambda.unwrap_or(ctx.lambda),
            spec.epsilon,
            spec.optimizer.unwrap_or(ctx.optimizer),
            spec.initial_step.unwrap_or(ctx.initial_step),
            spec.meta_step.unwrap_or(ctx.meta_step),
        );
        e.optimistic_init(spec.optimistic_threshold);
        e
    }

    /// Every weight `threshold / active`, so `q = threshold` everywhere.
    pub fn optimistic_init(&mut self, threshold: f64) {
        let v = threshold / self.active as f64;
        self.w.iter_mut().for_each(|w| *w = v);
    }

    pub fn q(&self, x: &SparseFeatures) -> f64 {
        x.dot(&self.w)
    }

    fn values(&self, xs: &[SparseFeatures], out: &mut [f64]) {
        for (o, x) in out.iter_mut().zip(xs) {
            *o = self.q(x);
        }
    }
}

impl Behavior for EsarsaControl {
    fn kind(&self) -> BehaviorKind {
        BehaviorKind::Esarsa
    }

    fn probs(&self, _s: &Observation, xs: &[SparseFeatures], out: &mut [f64]) {
        let mut q = [0.0; MAX_ACTIONS];
        self.values(xs, &mut q[..xs.len()]);
        greedy_probs(&q[..xs.len()], self.epsilon, out);
    }

    fn update(&mut self, step: &BehaviorStep) -> Result<()> {
        let d = step.data;
        check_dim(self.w.len(), d.x.dim)?;
        let na = d.x_next.len();
        let mut q = [0.0; MAX_ACTIONS];
        let mut mu = [0.0; MAX_ACTIONS];
        self.values(&d.x_next, &mut q[..na]);
        greedy_probs(&q[..na], self.epsilon, &mut mu[..na]);
        let next: f64 = (0..na).map(|b| mu[b] * q[b]).sum();
        let delta = step.reward + step.discount * next - self.q(&d.x);
        self.z.scale(self.prev_discount * self.lambda);
        self.z.add(&d.x, 1.0);
        self.scratch.load(&d.x, &d.x_next, &mu[..na], step.discount);
        self.scratch.from_trace(&self.z);
        self.opt.step(&mut self.w, delta, &self.scratch.idx, &self.scratch.phi, &self.scratch.z);
        self.prev_discount = step.discount;
        Ok(())
    }

    fn end_episode(&mut self) {
        self.z.clear();
        self.prev_discount = 0.0;
    }
}
