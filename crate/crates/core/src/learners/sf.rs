//! Successor features and the SF-NR learner.
//!
//! `psi(s, a) = W^T x(s, a)` with one column of `W` per reward feature. All
//! rows share the gradient `x(s, a)`, so a single TB trace serves them all.

use super::{GvfLearner, LearnerKind, Overshoot, StepData, Target};
use crate::error::{check_dim, Result};
use crate::features::SparseFeatures;
use crate::learners::trace::{TbCore, TraceKind};
use crate::optim::{overshoot_entry, Layout, Optimizer, OptimizerKind};

#[derive(Clone, Debug)]
pub struct SuccessorFeatures {
    pub core: TbCore,
    /// Column-major: weight of state feature `i` for reward feature `m`
    /// lives at `i * reward_dim + m`.
    pub w: Vec<f64>,
    pub dim: usize,
    pub reward_dim: usize,
    pub opt: Optimizer,
    scratch: Overshoot,
    psi: Vec<f64>,
    psi_next: Vec<f64>,
    /// Number of updates applied to the SF weights, online or replayed.
    pub updates: usize,
}

impl SuccessorFeatures {
    pub fn new(
        kind: TraceKind,
        lambda: f64,
        dim: usize,
        reward_dim: usize,
        opt: OptimizerKind,
        initial_step: f64,
        meta_step: f64,
    ) -> Self {
        SuccessorFeatures {
            core: TbCore::new(kind, lambda, dim),
            w: vec![0.0; dim * reward_dim],
            dim,
            reward_dim,
            opt: Optimizer::new(opt, dim * reward_dim, initial_step, meta_step),
            scratch: Overshoot::new(dim),
            psi: vec![0.0; reward_dim],
            psi_next: vec![0.0; reward_dim],
            updates: 0,
        }
    }

    /// Sets every weight to `v`.
    pub fn fill_weights(&mut self, v: f64) {
        self.w.iter_mut().for_each(|w| *w = v);
    }

    pub fn psi_into(&self, x: &SparseFeatures, out: &mut [f64]) {
        psi_into(&self.w, self.reward_dim, x, out);
    }

    pub fn psi(&self, x: &SparseFeatures) -> Vec<f64> {
        let mut out = vec![0.0; self.reward_dim];
        self.psi_into(x, &mut out);
        out
    }

    /// `<psi(x), theta>` without materializing `psi`.
    pub fn value(&self, x: &SparseFeatures, theta: &[f64]) -> f64 {
        let d = self.reward_dim;
        let mut v = 0.0;
        for (i, xi) in x.iter() {
            let row = &self.w[i * d..(i + 1) * d];
            v += xi * row.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>();
        }
        v
    }

    fn load_errors(&mut self, x: &SparseFeatures, x_next: &[SparseFeatures], reward: &SparseFeatures, t: &Target) {
        psi_into(&self.w, self.reward_dim, x, &mut self.psi);
        self.psi_next.iter_mut().for_each(|v| *v = 0.0);
        if t.discount != 0.0 {
            for (f, &p) in x_next.iter().zip(&t.pi_next) {
                if p == 0.0 {
                    continue;
                }
                for (i, xi) in f.iter() {
                    let row = &self.w[i * self.reward_dim..(i + 1) * self.reward_dim];
                    for (o, wv) in self.psi_next.iter_mut().zip(row) {
                        *o += p * xi * wv;
                    }
                }
            }
        }
        // psi now holds delta_m = x_m + gamma psi'_m - psi_m
        for (d, n) in self.psi.iter_mut().zip(&self.psi_next) {
            *d = t.discount * n - *d;
        }
        for (m, r) in reward.iter() {
            self.psi[m] += r;
        }
    }

    fn apply(&mut self) -> f64 {
        let s = &self.scratch;
        let mut change = 0.0;
        for m in 0..self.reward_dim {
            let at = Layout { stride: self.reward_dim, offset: m };
            change += self.opt.step_at(&mut self.w, at, self.psi[m], &s.idx, &s.phi, &s.z);
        }
        self.updates += 1;
        change
    }

    /// TB(lambda) update of every SF component; returns the L1 change.
    pub fn update(&mut self, x: &SparseFeatures, x_next: &[SparseFeatures], reward: &SparseFeatures, t: &Target, behavior_prob: f64) -> Result<f64> {
        check_dim(self.dim, x.dim)?;
        check_dim(self.reward_dim, reward.dim)?;
        self.load_errors(x, x_next, reward, t);
        self.core.accumulate(x, t.trace_inputs(behavior_prob))?;
        self.core.finish(t.discount);
        self.scratch.load(x, x_next, &t.pi_next, t.discount);
        self.scratch.from_trace(&self.core.z);
        Ok(self.apply())
    }

    /// One-step update that leaves the trace untouched.
    pub fn replay_update(&mut self, x: &SparseFeatures, x_next: &[SparseFeatures], reward: &SparseFeatures, t: &Target) -> Result<f64> {
        check_dim(self.dim, x.dim)?;
        check_dim(self.reward_dim, reward.dim)?;
        self.load_errors(x, x_next, reward, t);
        self.scratch.load(x, x_next, &t.pi_next, t.discount);
        self.scratch.from_features(x, 1.0);
        Ok(self.apply())
    }

    pub fn end_episode(&mut self) {
        self.core.reset();
    }
}

fn psi_into(w: &[f64], d: usize, x: &SparseFeatures, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (i, xi) in x.iter() {
        for (o, wv) in out.iter_mut().zip(&w[i * d..(i + 1) * d]) {
            *o += xi * wv;
        }
    }
}

/// Successor features paired with a one-step regression of the cumulant on
/// the reward features: `Q(s, a) = <psi(s, a), w_c>`.
#[derive(Clone, Debug)]
pub struct SfNrLearner {
    pub sf: SuccessorFeatures,
    pub wc: Vec<f64>,
    pub wc_opt: Optimizer,
    /// Number of cumulant-regression updates that touched `wc`.
    pub wc_updates: usize,
    idx: Vec<usize>,
    phi: Vec<f64>,
    z: Vec<f64>,
}

impl SfNrLearner {
    pub fn new(sf: SuccessorFeatures, opt: OptimizerKind, initial_step: f64, meta_step: f64) -> Self {
        let d = sf.reward_dim;
        SfNrLearner {
            sf,
            wc: vec![0.0; d],
            wc_opt: Optimizer::new(opt, d, initial_step, meta_step),
            wc_updates: 0,
            idx: Vec::new(),
            phi: Vec::new(),
            z: Vec::new(),
        }
    }

    /// `w_c += alpha (C - <x_r, w_c>) x_r`.
    pub fn cumulant_update(&mut self, reward: &SparseFeatures, cumulant: f64) -> Result<f64> {
        check_dim(self.wc.len(), reward.dim)?;
        if reward.is_empty() {
            return Ok(0.0);
        }
        let delta = cumulant - reward.dot(&self.wc);
        self.idx.clear();
        self.phi.clear();
        self.z.clear();
        for (i, v) in reward.iter() {
            self.idx.push(i);
            self.phi.push(v);
            self.z.push(overshoot_entry(v, v));
        }
        self.wc_updates += 1;
        Ok(self.wc_opt.step(&mut self.wc, delta, &self.idx, &self.phi, &self.z))
    }
}

impl GvfLearner for SfNrLearner {
    fn kind(&self) -> LearnerKind {
        LearnerKind::Sfnr
    }

    fn update(&mut self, d: &StepData, t: &Target) -> Result<f64> {
        let a = self.sf.update(&d.x, &d.x_next, &d.reward, t, d.behavior_prob)?;
        let b = self.cumulant_update(&d.reward, t.cumulant)?;
        Ok(a + b)
    }

    fn replay_update(&mut self, d: &StepData, t: &Target) -> Result<f64> {
        self.sf.replay_update(&d.x, &d.x_next, &d.reward, t)
    }

    fn predict(&self, x: &SparseFeatures) -> f64 {
        self.sf.value(x, &self.wc)
    }

    fn end_episode(&mut self) {
        self.sf.end_episode();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::test_util::{empty, one_hot};

    fn sgd_sf(dim: usize, rd: usize, lambda: f64, alpha: f64) -> SuccessorFeatures {
        SuccessorFeatures::new(TraceKind::Tb, lambda, dim, rd, OptimizerKind::Sgd, alpha, 0.0)
    }

    fn target(c: f64, g: f64, pi_next: Vec<f64>) -> Target {
        Target { cumulant: c, discount: g, pi_prob: 1.0, pi_next, interest: 1.0 }
    }

    #[test]
    fn zero_reward_history_leaves_everything_at_zero() {
        let sf = sgd_sf(4, 2, 0.9, 0.5);
        let mut l = SfNrLearner::new(sf, OptimizerKind::Sgd, 0.5, 0.0);
        let d = StepData { x: one_hot(4, 0), x_next: vec![one_hot(4, 1)], reward: empty(2), behavior_prob: 1.0 };
        let ch = l.update(&d, &target(0.0, 0.9, vec![1.0])).unwrap();
        assert_eq!(ch, 0.0);
        assert!(l.sf.w.iter().all(|&w| w == 0.0));
        assert!(l.wc.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn prediction_is_inner_product() {
        let mut sf = sgd_sf(1, 4, 0.0, 0.1);
        sf.w = vec![0.0, 0.0, 1.0, 0.0];
        let mut l = SfNrLearner::new(sf, OptimizerKind::Sgd, 0.1, 0.0);
        assert_eq!(l.predict(&one_hot(1, 0)), 0.0);
        l.wc = vec![0.0, 0.0, 3.0, 0.0];
        assert_eq!(l.predict(&one_hot(1, 0)), 3.0);
    }

    /// Two-cell chain `s0 -> s1 -> G` with a single action; the goal entry
    /// restarts at `s0`.
    #[test]
    fn chain_converges_to_discounted_indicator() {
        let mut sf = sgd_sf(2, 1, 0.0, 0.5);
        let to_s1 = StepData { x: one_hot(2, 0), x_next: vec![one_hot(2, 1)], reward: empty(1), behavior_prob: 1.0 };
        let to_g = StepData { x: one_hot(2, 1), x_next: vec![one_hot(2, 0)], reward: one_hot(1, 0), behavior_prob: 1.0 };
        for _ in 0..200 {
            sf.update(&to_s1.x, &to_s1.x_next, &to_s1.reward, &target(0.0, 0.9, vec![1.0]), 1.0).unwrap();
            sf.update(&to_g.x, &to_g.x_next, &to_g.reward, &target(0.0, 0.0, vec![1.0]), 1.0).unwrap();
            sf.end_episode();
        }
        assert!((sf.psi(&one_hot(2, 1))[0] - 1.0).abs() < 1e-10);
        assert!((sf.psi(&one_hot(2, 0))[0] - 0.9).abs() < 1e-10);
    }

    #[test]
    fn cumulant_jump_only_moves_reward_weights() {
        let mut sf = sgd_sf(2, 1, 0.0, 0.5);
        sf.w = vec![0.9, 1.0];
        let mut l = SfNrLearner::new(sf, OptimizerKind::Sgd, 0.5, 0.0);
        l.wc = vec![5.0];
        let to_s1 = StepData { x: one_hot(2, 0), x_next: vec![one_hot(2, 1)], reward: empty(1), behavior_prob: 1.0 };
        let to_g = StepData { x: one_hot(2, 1), x_next: vec![one_hot(2, 0)], reward: one_hot(1, 0), behavior_prob: 1.0 };
        let mut steps = 0;
        while (l.predict(&one_hot(2, 1)) - 8.0).abs() >= 0.1 {
            l.update(&to_s1, &target(0.0, 0.9, vec![1.0])).unwrap();
            l.update(&to_g, &target(8.0, 0.0, vec![1.0])).unwrap();
            l.end_episode();
            steps += 1;
            assert!(steps < 100);
        }
        // a bare regression with step 0.5 halves the error per sample: 3 -> 0.09 in 5 samples
        assert_eq!(steps, 5);
        assert_eq!(l.sf.w, vec![0.9, 1.0]);
    }

    #[test]
    fn shared_trace_matches_per_row_learners() {
        // Each SF component equals a TB learner on the matching cumulant.
        use crate::domain::RngStream;
        use crate::learners::TbLearner;
        use rand::Rng;
        let (dim, rd) = (5, 3);
        let mut sf = sgd_sf(dim, rd, 0.7, 0.1);
        let mut rows: Vec<TbLearner> =
            (0..rd).map(|_| TbLearner::new(TraceKind::Tb, 0.7, dim, OptimizerKind::Sgd, 0.1, 0.0)).collect();
        let mut rng = RngStream::new(3, 1);
        for _ in 0..2000 {
            let x = one_hot(dim, rng.random_range(0..dim));
            let x_next = vec![one_hot(dim, rng.random_range(0..dim)), one_hot(dim, rng.random_range(0..dim))];
            let g = rng.random_range(0..rd + 1);
            let reward = if g < rd { one_hot(rd, g) } else { empty(rd) };
            let p: f64 = rng.random_range(0.0..1.0);
            let t = Target { cumulant: 0.0, discount: if g < rd { 0.0 } else { 0.9 }, pi_prob: p, pi_next: vec![p, 1.0 - p], interest: 1.0 };
            sf.update(&x, &x_next, &reward, &t, 0.5).unwrap();
            for (m, row) in rows.iter_mut().enumerate() {
                let mut tm = t.clone();
                tm.cumulant = if g == m { 1.0 } else { 0.0 };
                let d = StepData { x: x.clone(), x_next: x_next.clone(), reward: empty(1), behavior_prob: 0.5 };
                row.update(&d, &tm).unwrap();
            }
        }
        for (m, row) in rows.iter().enumerate() {
            for i in 0..dim {
                assert!((sf.w[i * rd + m] - row.w[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reward_dimension_is_checked() {
        let mut l = SfNrLearner::new(sgd_sf(2, 2, 0.0, 0.1), OptimizerKind::Sgd, 0.1, 0.0);
        let d = StepData { x: one_hot(2, 0), x_next: vec![one_hot(2, 1)], reward: one_hot(3, 0), behavior_prob: 1.0 };
        assert!(l.update(&d, &target(1.0, 0.9, vec![1.0])).is_err());
    }
}
