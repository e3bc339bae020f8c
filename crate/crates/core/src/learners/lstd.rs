//! LSTD(lambda) with a tree-backup trace.

use nalgebra::{DMatrix, DVector};

use super::{GvfLearner, LearnerKind, Overshoot, StepData, Target};
use crate::error::{check_dim, Result};
use crate::features::SparseFeatures;
use crate::learners::trace::{TbCore, TraceKind};
use crate::linalg;

/// Ridge added to the averaged system before solving.
pub const RIDGE: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct LstdLearner {
    pub core: TbCore,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub samples: usize,
    pub w: Vec<f64>,
    pub ridge: f64,
    scratch: Overshoot,
}

impl LstdLearner {
    pub fn new(lambda: f64, dim: usize) -> Self {
        LstdLearner {
            core: TbCore::new(TraceKind::Tb, lambda, dim),
            a: DMatrix::zeros(dim, dim),
            b: DVector::zeros(dim),
            samples: 0,
            w: vec![0.0; dim],
            ridge: RIDGE,
            scratch: Overshoot::new(dim),
        }
    }

    /// `(A / t + ridge I)^-1 (b / t)`; zero when nothing has been seen.
    pub fn solve(&self) -> Result<Vec<f64>> {
        let d = self.w.len();
        if self.samples == 0 {
            return Ok(vec![0.0; d]);
        }
        let t = self.samples as f64;
        let a = &self.a / t + DMatrix::identity(d, d) * self.ridge;
        let b = &self.b / t;
        Ok(linalg::solve(a, &b)?.iter().copied().collect())
    }

    fn accumulate(&mut self, c: f64) {
        let s = &self.scratch;
        for (&i, &zi) in s.idx.iter().zip(&s.phi) {
            for (j, v) in s.diff_entries() {
                self.a[(i, j)] += zi * v;
            }
            self.b[i] += zi * c;
        }
        self.samples += 1;
    }
}

impl GvfLearner for LstdLearner {
    fn kind(&self) -> LearnerKind {
        LearnerKind::Lstd
    }

    /// Weights only move at solve time, so the reported change is 0.
    fn update(&mut self, d: &StepData, t: &Target) -> Result<f64> {
        check_dim(self.w.len(), d.x.dim)?;
        self.core.accumulate(&d.x, t.trace_inputs(d.behavior_prob))?;
        self.core.finish(t.discount);
        self.scratch.load(&d.x, &d.x_next, &t.pi_next, t.discount);
        self.scratch.from_trace(&self.core.z);
        self.accumulate(t.cumulant);
        Ok(0.0)
    }

    fn replay_update(&mut self, d: &StepData, t: &Target) -> Result<f64> {
        check_dim(self.w.len(), d.x.dim)?;
        self.scratch.load(&d.x, &d.x_next, &t.pi_next, t.discount);
        self.scratch.from_features(&d.x, 1.0);
        self.accumulate(t.cumulant);
        Ok(0.0)
    }

    fn predict(&self, x: &SparseFeatures) -> f64 {
        x.dot(&self.w)
    }

    fn end_episode(&mut self) {
        self.core.reset();
    }

    fn prepare_eval(&mut self) -> Result<()> {
        self.w = self.solve()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::test_util::{empty, one_hot};

    #[test]
    fn no_samples_solves_to_zero() {
        let l = LstdLearner::new(0.9, 3);
        assert_eq!(l.solve().unwrap(), vec![0.0; 3]);
    }

    /// Two-cell chain `s0 -> s1 -> goal` (cumulant 5 on entry), restarts at
    /// `s0`. True values: q(s1) = 5, q(s0) = 4.5.
    #[test]
    fn chain_with_full_traces_recovers_true_values() {
        chain(RIDGE, 1e-4);
        chain(1e-14, 1e-8);
    }

    fn chain(ridge: f64, tol: f64) {
        let mut l = LstdLearner::new(1.0, 2);
        l.ridge = ridge;
        let t0 = Target { cumulant: 0.0, discount: 0.9, pi_prob: 1.0, pi_next: vec![1.0], interest: 1.0 };
        let t1 = Target { cumulant: 5.0, discount: 0.0, ..t0.clone() };
        let d0 = StepData { x: one_hot(2, 0), x_next: vec![one_hot(2, 1)], reward: empty(1), behavior_prob: 1.0 };
        let d1 = StepData { x: one_hot(2, 1), x_next: vec![one_hot(2, 0)], reward: empty(1), behavior_prob: 1.0 };
        for _ in 0..50 {
            l.update(&d0, &t0).unwrap();
            l.update(&d1, &t1).unwrap();
            l.end_episode();
        }
        l.prepare_eval().unwrap();
        // the ridge biases the answer by roughly ridge * |w| / |A / t|
        assert!((l.w[0] - 4.5).abs() < tol, "{:?}", l.w);
        assert!((l.w[1] - 5.0).abs() < tol, "{:?}", l.w);
        assert_eq!(l.predict(&one_hot(2, 1)), l.w[1]);
    }
}
