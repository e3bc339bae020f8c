//! TB(lambda), TB with interest, and emphatic TB(lambda).

use super::{expected_next, GvfLearner, LearnerKind, Overshoot, StepData, Target};
use crate::error::{check_dim, Result};
use crate::features::SparseFeatures;
use crate::learners::trace::{TbCore, TraceKind};
use crate::optim::{Optimizer, OptimizerKind};

#[derive(Clone, Debug)]
pub struct TbLearner {
    pub core: TbCore,
    pub w: Vec<f64>,
    pub opt: Optimizer,
    scratch: Overshoot,
}

impl TbLearner {
    pub fn new(kind: TraceKind, lambda: f64, dim: usize, opt: OptimizerKind, initial_step: f64, meta_step: f64) -> Self {
        TbLearner {
            core: TbCore::new(kind, lambda, dim),
            w: vec![0.0; dim],
            opt: Optimizer::new(opt, dim, initial_step, meta_step),
            scratch: Overshoot::new(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    fn td_error(&self, d: &StepData, t: &Target) -> f64 {
        t.cumulant + t.discount * expected_next(&d.x_next, &t.pi_next, &self.w) - d.x.dot(&self.w)
    }
}

impl GvfLearner for TbLearner {
    fn kind(&self) -> LearnerKind {
        match self.core.kind {
            TraceKind::Tb => LearnerKind::Tb,
            TraceKind::TbInterest => LearnerKind::TbInterest,
            TraceKind::Etb { .. } => LearnerKind::Etb,
        }
    }

    fn update(&mut self, d: &StepData, t: &Target) -> Result<f64> {
        check_dim(self.dim(), d.x.dim)?;
        let delta = self.td_error(d, t);
        self.core.accumulate(&d.x, t.trace_inputs(d.behavior_prob))?;
        self.core.finish(t.discount);
        self.scratch.load(&d.x, &d.x_next, &t.pi_next, t.discount);
        self.scratch.from_trace(&self.core.z);
        let s = &self.scratch;
        Ok(self.opt.step(&mut self.w, delta, &s.idx, &s.phi, &s.z))
    }

    /// One-step (lambda = 0) form. The trace coefficient is the interest for
    /// TB with interest and 1 otherwise.
    fn replay_update(&mut self, d: &StepData, t: &Target) -> Result<f64> {
        check_dim(self.dim(), d.x.dim)?;
        let delta = self.td_error(d, t);
        let coef = match self.core.kind {
            TraceKind::TbInterest => t.interest,
            _ => 1.0,
        };
        self.scratch.load(&d.x, &d.x_next, &t.pi_next, t.discount);
        self.scratch.from_features(&d.x, coef);
        let s = &self.scratch;
        Ok(self.opt.step(&mut self.w, delta, &s.idx, &s.phi, &s.z))
    }

    fn predict(&self, x: &SparseFeatures) -> f64 {
        x.dot(&self.w)
    }

    fn end_episode(&mut self) {
        self.core.reset();
    }
}
