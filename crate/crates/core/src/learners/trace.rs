//! Eligibility traces for the tree-backup family.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::SparseFeatures;

/// Entries whose magnitude falls below this are dropped from the trace.
pub const PRUNE: f64 = 1e-8;

/// Dense trace storage with an explicit list of nonzero coordinates, so
/// decay and iteration cost scale with the active set.
#[derive(Clone, Debug)]
pub struct SparseTrace {
    values: Vec<f64>,
    active: Vec<usize>,
    member: Vec<bool>,
}

impl SparseTrace {
    pub fn new(dim: usize) -> Self {
        SparseTrace { values: vec![0.0; dim], active: Vec::new(), member: vec![false; dim] }
    }

    pub fn clear(&mut self) {
        for &i in &self.active {
            self.values[i] = 0.0;
            self.member[i] = false;
        }
        self.active.clear();
    }

    /// `z <- c * z`, pruning tiny entries.
    pub fn scale(&mut self, c: f64) {
        if c == 0.0 {
            self.clear();
            return;
        }
        let values = &mut self.values;
        let member = &mut self.member;
        self.active.retain(|&i| {
            values[i] *= c;
            if values[i].abs() < PRUNE {
                values[i] = 0.0;
                member[i] = false;
                false
            } else {
                true
            }
        });
    }

    /// `z <- z + c * x`.
    pub fn add(&mut self, x: &SparseFeatures, c: f64) {
        if c == 0.0 {
            return;
        }
        for (i, v) in x.iter() {
            self.values[i] += c * v;
            if !self.member[i] {
                self.member[i] = true;
                self.active.push(i);
            }
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.active
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Values parallel to [`SparseTrace::indices`].
    pub fn gather(&self, out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.active.iter().map(|&i| self.values[i]));
    }

    pub fn to_dense(&self) -> Vec<f64> {
        self.values.clone()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }
}

/// Which member of the tree-backup family builds the trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TraceKind {
    Tb,
    /// The trace accumulates `I_t * x` instead of `x`.
    TbInterest,
    /// Emphatic weighting with follow-on trace and optional emphasis clip.
    Etb { clip: Option<f64> },
}

/// Per-step inputs to a trace update.
#[derive(Clone, Copy, Debug)]
pub struct TraceInputs {
    /// `pi(A_t | S_t)`.
    pub pi_prob: f64,
    /// `b(A_t | S_t)`.
    pub behavior_prob: f64,
    /// `I_t`.
    pub interest: f64,
}

/// Trace state shared by TB, TB with interest and ETB.
#[derive(Clone, Debug)]
pub struct TbCore {
    pub kind: TraceKind,
    pub lambda: f64,
    pub z: SparseTrace,
    /// `gamma_t`: discount of the transition that led into `S_t`.
    prev_discount: f64,
    prev_rho: f64,
    /// Follow-on trace `F`.
    pub follow_on: f64,
    /// Emphasis `M` of the last update.
    pub emphasis: f64,
}

impl TbCore {
    pub fn new(kind: TraceKind, lambda: f64, dim: usize) -> Self {
        TbCore { kind, lambda, z: SparseTrace::new(dim), prev_discount: 0.0, prev_rho: 0.0, follow_on: 0.0, emphasis: 0.0 }
    }

    /// Starts a new episode: empty trace, no follow-on carry-over.
    pub fn reset(&mut self) {
        self.z.clear();
        self.prev_discount = 0.0;
        self.prev_rho = 0.0;
        self.follow_on = 0.0;
        self.emphasis = 0.0;
    }

    /// Folds `x(S_t, A_t)` into the trace.
    pub fn accumulate(&mut self, x: &SparseFeatures, inp: TraceInputs) -> Result<()> {
        let coef = match self.kind {
            TraceKind::Tb => 1.0,
            TraceKind::TbInterest => inp.interest,
            TraceKind::Etb { clip } => {
                if inp.behavior_prob <= 0.0 {
                    return Err(Error::ZeroBehaviorProbability);
                }
                let rho = inp.pi_prob / inp.behavior_prob;
                self.follow_on = self.prev_rho * self.prev_discount * self.follow_on + inp.interest;
                let lb = self.lambda * inp.behavior_prob;
                let mut m = lb * inp.interest + (1.0 - lb) * self.follow_on;
                if let Some(c) = clip {
                    m = m.min(c);
                }
                self.emphasis = rho * m;
                self.prev_rho = rho;
                self.emphasis
            }
        };
        self.z.scale(self.prev_discount * inp.pi_prob * self.lambda);
        self.z.add(x, coef);
        Ok(())
    }

    /// Records `gamma_{t+1}` for the next step's decay.
    pub fn finish(&mut self, discount_next: f64) {
        self.prev_discount = discount_next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(dim: usize, idx: &[usize]) -> SparseFeatures {
        let mut f = SparseFeatures::with_dim(dim);
        for &i in idx {
            f.push(i, 1.0);
        }
        f
    }

    fn inputs(pi: f64, b: f64, i: f64) -> TraceInputs {
        TraceInputs { pi_prob: pi, behavior_prob: b, interest: i }
    }

    #[test]
    fn tb_trace_decays_by_target_probability() {
        let mut c = TbCore::new(TraceKind::Tb, 0.5, 4);
        c.accumulate(&x(4, &[0]), inputs(1.0, 1.0, 1.0)).unwrap();
        c.finish(0.9);
        c.accumulate(&x(4, &[1]), inputs(0.5, 1.0, 1.0)).unwrap();
        assert!((c.z.get(0) - 0.9 * 0.5 * 0.5).abs() < 1e-15);
        assert_eq!(c.z.get(1), 1.0);
    }

    #[test]
    fn interest_zero_keeps_old_trace() {
        let mut c = TbCore::new(TraceKind::TbInterest, 0.9, 3);
        c.accumulate(&x(3, &[0]), inputs(1.0, 1.0, 1.0)).unwrap();
        c.finish(0.9);
        c.accumulate(&x(3, &[2]), inputs(1.0, 1.0, 0.0)).unwrap();
        assert!(c.z.get(0) > 0.0);
        assert_eq!(c.z.get(2), 0.0);
    }

    #[test]
    fn etb_terminal_step_is_importance_weighted() {
        // gamma_t = 0, I = 1: F = 1 and M = rho.
        let mut c = TbCore::new(TraceKind::Etb { clip: None }, 0.7, 2);
        c.accumulate(&x(2, &[0]), inputs(0.6, 0.3, 1.0)).unwrap();
        assert_eq!(c.follow_on, 1.0);
        assert!((c.emphasis - 2.0).abs() < 1e-12);
    }

    #[test]
    fn etb_on_policy_follow_on_recurrence() {
        let mut c = TbCore::new(TraceKind::Etb { clip: None }, 0.0, 1);
        let mut f = 0.0;
        for t in 0..20 {
            c.accumulate(&x(1, &[0]), inputs(1.0, 1.0, 1.0)).unwrap();
            f = if t == 0 { 1.0 } else { 0.9 * f + 1.0 };
            assert!((c.follow_on - f).abs() < 1e-12);
            assert!((c.emphasis - f).abs() < 1e-12);
            c.finish(0.9);
        }
    }

    #[test]
    fn etb_zero_target_probability() {
        let mut c = TbCore::new(TraceKind::Etb { clip: None }, 0.9, 2);
        c.accumulate(&x(2, &[0]), inputs(1.0, 0.5, 1.0)).unwrap();
        c.finish(0.9);
        let before = c.z.get(0);
        c.accumulate(&x(2, &[1]), inputs(0.0, 0.5, 1.0)).unwrap();
        assert_eq!(c.emphasis, 0.0);
        assert_eq!(c.z.get(1), 0.0);
        // pi = 0 also cuts the old trace.
        assert!(before > 0.0);
        assert_eq!(c.z.get(0), 0.0);
    }

    #[test]
    fn etb_rejects_zero_behavior_probability() {
        let mut c = TbCore::new(TraceKind::Etb { clip: None }, 0.9, 1);
        assert!(matches!(c.accumulate(&x(1, &[0]), inputs(1.0, 0.0, 1.0)), Err(Error::ZeroBehaviorProbability)));
    }

    #[test]
    fn etb_clip_bounds_emphasis() {
        let mut c = TbCore::new(TraceKind::Etb { clip: Some(1.0) }, 0.5, 1);
        for _ in 0..50 {
            c.accumulate(&x(1, &[0]), inputs(0.5, 0.25, 1.0)).unwrap();
            let rho = 2.0;
            assert!(c.emphasis <= rho * 1.0 + 1e-12);
            assert!(c.follow_on >= 0.0 && c.emphasis >= 0.0);
            c.finish(0.95);
        }
    }

    #[test]
    fn sparse_trace_prunes_and_clears() {
        let mut z = SparseTrace::new(3);
        z.add(&x(3, &[0, 2]), 1.0);
        z.scale(1e-9);
        assert!(z.is_empty());
        assert_eq!(z.to_dense(), vec![0.0; 3]);
        z.add(&x(3, &[1]), 2.0);
        assert_eq!(z.indices(), &[1]);
        z.scale(0.0);
        assert!(z.is_empty());
    }
}
