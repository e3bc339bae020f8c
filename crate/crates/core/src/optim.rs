//! Step-size machinery: fixed-step SGD and the Auto meta-descent optimizer.
//!
//! Learners hand the optimizer the active coordinates of the update vector
//! `phi` (usually an eligibility trace) together with the matching entries of
//! the overshoot vector `z`. Coordinates that are not listed have `phi = 0`
//! and are left untouched, which matches the dense algorithm exactly.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};

/// Normalizer time constant.
pub const TAU: f64 = 1e4;
/// Bound on the per-step log step-size change.
pub const M_DELTA: f64 = 1.0;
/// Step-size floor.
pub const KAPPA: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Sgd,
    Auto,
}

/// Plain LMS step: `w += alpha * delta * phi`.
#[derive(Clone, Debug)]
pub struct Sgd {
    pub step_size: f64,
}

impl Sgd {
    pub fn new(step_size: f64) -> Self {
        Sgd { step_size }
    }

    fn step(&mut self, w: &mut [f64], at: Layout, delta: f64, idx: &[usize], phi: &[f64]) -> f64 {
        let mut change = 0.0;
        for (&i, &p) in idx.iter().zip(phi) {
            let d = self.step_size * delta * p;
            w[at.pos(i)] += d;
            change += d.abs();
        }
        change
    }
}

/// Per-weight adaptive step sizes with normalization and an overshoot guard.
#[derive(Clone, Debug)]
pub struct Auto {
    pub meta_step: f64,
    pub alpha: Vec<f64>,
    pub h: Vec<f64>,
    pub n: Vec<f64>,
}

impl Auto {
    pub fn new(dim: usize, meta_step: f64, initial_step: f64) -> Self {
        Auto { meta_step, alpha: vec![initial_step; dim], h: vec![0.0; dim], n: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    /// One update restricted to `idx`; coordinate `i` lives at
    /// `i * stride + offset` in both `w` and the optimizer state.
    fn step(&mut self, w: &mut [f64], at: Layout, delta: f64, idx: &[usize], phi: &[f64], z: &[f64]) -> f64 {
        let mu = self.meta_step;
        for (&i, &p) in idx.iter().zip(phi) {
            if p == 0.0 {
                continue;
            }
            let k = at.pos(i);
            let g = delta * p;
            let a = self.alpha[k];
            let ap = p.abs();
            self.n[k] += a * ap / TAU * ((self.h[k] * g).abs() - self.n[k]);
            let dbeta = if self.n[k] > 0.0 { (self.h[k] * g / self.n[k]).clamp(-M_DELTA, M_DELTA) } else { 0.0 };
            self.alpha[k] = (a * (mu * dbeta).exp()).min(1.0 / ap).max(KAPPA);
        }

        let mut effective = 0.0;
        let mut z_l1 = 0.0;
        for (&i, &zi) in idx.iter().zip(z) {
            effective += self.alpha[at.pos(i)] * zi;
            z_l1 += zi.abs();
        }
        if effective > 1.0 {
            let cap = 1.0 / z_l1;
            for (&i, &zi) in idx.iter().zip(z) {
                if zi != 0.0 {
                    let k = at.pos(i);
                    self.alpha[k] = self.alpha[k].min(cap);
                }
            }
        }

        let mut change = 0.0;
        for (&i, &p) in idx.iter().zip(phi) {
            if p == 0.0 {
                continue;
            }
            let k = at.pos(i);
            let a = self.alpha[k];
            let d = a * delta * p;
            w[k] += d;
            change += d.abs();
            self.h[k] = self.h[k] * (1.0 - a * p.abs()) + d;
        }
        change
    }
}

/// Literal dense form of the Auto update over full-length vectors.
///
/// Kept as the reference the sparse path is tested against.
pub fn auto_update(opt: &mut Auto, w: &mut [f64], delta: f64, phi: &[f64], z: &[f64]) -> Result<f64> {
    let d = opt.dim();
    check_dim(d, w.len())?;
    check_dim(d, phi.len())?;
    check_dim(d, z.len())?;
    let mu = opt.meta_step;
    for j in 0..d {
        opt.n[j] += TAU.recip() * opt.alpha[j] * phi[j].abs() * ((opt.h[j] * delta * phi[j]).abs() - opt.n[j]);
    }
    for i in 0..d {
        if phi[i] != 0.0 {
            let dbeta =
                if opt.n[i] > 0.0 { (opt.h[i] * delta * phi[i] / opt.n[i]).clamp(-M_DELTA, M_DELTA) } else { 0.0 };
            opt.alpha[i] = (opt.alpha[i] * (mu * dbeta).exp()).min(1.0 / phi[i].abs()).max(KAPPA);
        }
    }
    let effective: f64 = opt.alpha.iter().zip(z).map(|(a, z)| a * z).sum();
    if effective > 1.0 {
        let l1: f64 = z.iter().map(|v| v.abs()).sum();
        for i in 0..d {
            if z[i] != 0.0 {
                opt.alpha[i] = opt.alpha[i].min(1.0 / l1);
            }
        }
    }
    let mut change = 0.0;
    for i in 0..d {
        let step = opt.alpha[i] * delta * phi[i];
        w[i] += step;
        change += step.abs();
    }
    for i in 0..d {
        opt.h[i] = opt.h[i] * (1.0 - opt.alpha[i] * phi[i].abs()) + opt.alpha[i] * delta * phi[i];
    }
    Ok(change)
}

/// `|phi| * max(|phi|, |x - gamma * x_next|)`, elementwise.
pub fn overshoot_vector(phi: &[f64], x: &[f64], x_next: &[f64], gamma: f64) -> Result<Vec<f64>> {
    check_dim(phi.len(), x.len())?;
    check_dim(phi.len(), x_next.len())?;
    Ok(phi
        .iter()
        .zip(x.iter().zip(x_next))
        .map(|(p, (a, b))| overshoot_entry(*p, a - gamma * b))
        .collect())
}

#[inline]
pub fn overshoot_entry(phi: f64, x_minus_gx: f64) -> f64 {
    phi.abs() * phi.abs().max(x_minus_gx.abs())
}

/// Dense SGD update; returns `||delta_w||_1`.
pub fn sgd_update(opt: &Sgd, w: &mut [f64], delta: f64, phi: &[f64]) -> Result<f64> {
    check_dim(w.len(), phi.len())?;
    let mut change = 0.0;
    for (wi, p) in w.iter_mut().zip(phi) {
        let d = opt.step_size * delta * p;
        *wi += d;
        change += d.abs();
    }
    Ok(change)
}

/// Either optimizer behind one interface.
#[derive(Clone, Debug)]
pub enum Optimizer {
    Sgd(Sgd),
    Auto(Auto),
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, dim: usize, initial_step: f64, meta_step: f64) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd(Sgd::new(initial_step)),
            OptimizerKind::Auto => Optimizer::Auto(Auto::new(dim, meta_step, initial_step)),
        }
    }

    /// Applies one update to the listed coordinates of `w` and returns the
    /// L1 norm of the weight change. `phi` and `z` are parallel to `idx`.
    pub fn step(&mut self, w: &mut [f64], delta: f64, idx: &[usize], phi: &[f64], z: &[f64]) -> f64 {
        self.step_at(w, Layout::DENSE, delta, idx, phi, z)
    }

    /// As [`Optimizer::step`] for weights stored with a stride, e.g. one
    /// row of a matrix kept column by column.
    pub fn step_at(&mut self, w: &mut [f64], at: Layout, delta: f64, idx: &[usize], phi: &[f64], z: &[f64]) -> f64 {
        debug_assert_eq!(idx.len(), phi.len());
        debug_assert_eq!(idx.len(), z.len());
        match self {
            Optimizer::Sgd(s) => s.step(w, at, delta, idx, phi),
            Optimizer::Auto(a) => a.step(w, at, delta, idx, phi, z),
        }
    }
}

/// Where coordinate `i` of an update lives: `i * stride + offset`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub stride: usize,
    pub offset: usize,
}

impl Layout {
    pub const DENSE: Layout = Layout { stride: 1, offset: 0 };

    #[inline]
    fn pos(self, i: usize) -> usize {
        i * self.stride + self.offset
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::RngStream;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn fresh_auto_first_update_is_plain_step() {
        let mut opt = Auto::new(3, 0.1, 0.05);
        let mut w = vec![0.0; 3];
        let phi = [1.0, 0.0, 2.0];
        let z = [0.1, 0.0, 0.1];
        auto_update(&mut opt, &mut w, 2.0, &phi, &z).unwrap();
        assert_eq!(opt.alpha, vec![0.05; 3]);
        assert_eq!(w, vec![0.1, 0.0, 0.2]);
    }

    #[test]
    fn inactive_features_leave_weights_alpha_and_n_unchanged() {
        let mut opt = Auto::new(2, 0.1, 0.05);
        opt.n = vec![0.3, 0.7];
        opt.h = vec![0.2, -0.1];
        let mut w = vec![1.0, -1.0];
        let change = auto_update(&mut opt, &mut w, 5.0, &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(change, 0.0);
        assert_eq!(w, vec![1.0, -1.0]);
        assert_eq!(opt.alpha, vec![0.05, 0.05]);
        // The normalizer line is scaled by |phi_j|, so it cannot move here.
        assert_eq!(opt.n, vec![0.3, 0.7]);
    }

    #[test]
    fn rescale_caps_effective_step() {
        let mut opt = Auto::new(3, 0.1, 0.9);
        let mut w = vec![0.0; 3];
        let phi = [1.0, 1.0, 1.0];
        let z = [1.0, 1.0, 1.0];
        let pre: f64 = opt.alpha.iter().zip(&z).map(|(a, z)| a * z).sum();
        assert!(pre > 1.0);
        auto_update(&mut opt, &mut w, 1.0, &phi, &z).unwrap();
        let post: f64 = opt.alpha.iter().zip(&z).map(|(a, z)| a * z).sum();
        assert!(post <= 1.0 + 1e-12, "post {post}");
    }

    #[test]
    fn n_zero_gives_finite_step_sizes() {
        let mut opt = Auto::new(1, 1.0, 0.1);
        opt.h = vec![5.0];
        let mut w = vec![0.0];
        // alpha * |phi| / tau is tiny so n stays essentially 0 after one update,
        // but a strictly zero n must not divide.
        opt.n = vec![0.0];
        auto_update(&mut opt, &mut w, 0.0, &[1.0], &[1.0]).unwrap();
        assert!(opt.alpha[0].is_finite());
        assert_eq!(opt.alpha[0], 0.1);
    }

    #[test]
    fn overshoot_examples() {
        let x = [1.0, 0.0, 1.0];
        assert_eq!(overshoot_vector(&x, &x, &[0.0; 3], 0.9).unwrap(), x.to_vec());
        assert_eq!(overshoot_vector(&[0.0; 3], &x, &x, 0.9).unwrap(), vec![0.0; 3]);
        let z = overshoot_vector(&[1.0], &[1.0], &[1.0], 0.9).unwrap();
        assert_eq!(z, vec![1.0]);
        assert!(overshoot_vector(&[1.0], &[1.0, 2.0], &[1.0], 0.9).is_err());
    }

    #[test]
    fn sgd_examples() {
        let sgd = Sgd::new(0.5);
        let mut w = vec![0.0; 4];
        assert_eq!(sgd_update(&sgd, &mut w, 0.0, &[1.0; 4]).unwrap(), 0.0);
        assert_eq!(w, vec![0.0; 4]);
        sgd_update(&sgd, &mut w, 1.0, &[0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(w[3], 0.5);

        let phi = [0.3, -1.2, 0.0, 2.0];
        let mut a = vec![0.1, 0.2, 0.3, 0.4];
        let mut b = a.clone();
        sgd_update(&sgd, &mut a, 0.25, &phi).unwrap();
        sgd_update(&sgd, &mut a, 0.25, &phi).unwrap();
        sgd_update(&sgd, &mut b, 0.5, &phi).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let mut opt = Auto::new(2, 0.1, 0.1);
        let mut w = vec![0.0; 3];
        assert!(auto_update(&mut opt, &mut w, 1.0, &[1.0; 3], &[1.0; 3]).is_err());
    }

    #[test]
    fn step_sizes_respect_floor_and_cap() {
        let mut rng = RngStream::new(21, 0);
        let d = 6;
        let mut opt = Auto::new(d, 0.5, 0.3);
        let mut w = vec![0.0; d];
        let mut touched = vec![false; d];
        for _ in 0..20_000 {
            let phi: Vec<f64> =
                (0..d).map(|_| if rng.random::<f64>() < 0.5 { 0.0 } else { rng.random_range(-3.0..3.0) }).collect();
            let z: Vec<f64> = phi.iter().map(|p| p * p).collect();
            let delta: f64 = StandardNormal.sample(&mut rng);
            auto_update(&mut opt, &mut w, delta, &phi, &z).unwrap();
            for i in 0..d {
                if phi[i] != 0.0 {
                    touched[i] = true;
                    assert!(opt.alpha[i] <= 1.0 / phi[i].abs() + 1e-15);
                }
                assert!(opt.alpha[i] > 0.0);
                if touched[i] {
                    assert!(opt.alpha[i] >= KAPPA);
                }
                assert!(opt.n[i] >= 0.0);
            }
        }
    }

    fn dense_case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<(f64, Vec<f64>)>)> {
        (1usize..8).prop_flat_map(|d| {
            (
                proptest::collection::vec(0.001f64..0.5, d),
                proptest::collection::vec(-1.0f64..1.0, d),
                proptest::collection::vec(
                    (-3.0f64..3.0, proptest::collection::vec(prop_oneof![Just(0.0), -2.0f64..2.0], d)),
                    1..30,
                ),
            )
        })
    }

    proptest! {
        #[test]
        fn sparse_path_matches_dense_reference((alpha0, w0, steps) in dense_case(), mu in 0.001f64..1.0) {
            let d = alpha0.len();
            let mut dense = Auto::new(d, mu, 0.0);
            dense.alpha = alpha0.clone();
            let mut sparse = Optimizer::Auto(dense.clone());
            let mut wd = w0.clone();
            let mut ws = w0.clone();
            for (delta, phi) in &steps {
                let z: Vec<f64> = phi.iter().map(|p| overshoot_entry(*p, 0.7 * p)).collect();
                let cd = auto_update(&mut dense, &mut wd, *delta, phi, &z).unwrap();
                let idx: Vec<usize> = (0..d).filter(|&i| phi[i] != 0.0).collect();
                let ph: Vec<f64> = idx.iter().map(|&i| phi[i]).collect();
                let zz: Vec<f64> = idx.iter().map(|&i| z[i]).collect();
                let cs = sparse.step(&mut ws, *delta, &idx, &ph, &zz);
                prop_assert!((cd - cs).abs() <= 1e-12 * (1.0 + cd.abs()));
            }
            let Optimizer::Auto(s) = &sparse else { unreachable!() };
            for i in 0..d {
                prop_assert!((wd[i] - ws[i]).abs() <= 1e-12 * (1.0 + wd[i].abs()));
                prop_assert!((dense.alpha[i] - s.alpha[i]).abs() <= 1e-12 * dense.alpha[i]);
                prop_assert!((dense.h[i] - s.h[i]).abs() <= 1e-12 * (1.0 + dense.h[i].abs()));
                prop_assert!((dense.n[i] - s.n[i]).abs() <= 1e-12 * (1.0 + dense.n[i].abs()));
            }
        }

        #[test]
        fn post_update_effective_step_at_most_one(
            alpha0 in proptest::collection::vec(0.01f64..1.0, 4),
            phi in proptest::collection::vec(0.1f64..2.0, 4),
            delta in -5.0f64..5.0,
        ) {
            let mut opt = Auto::new(4, 0.1, 0.0);
            opt.alpha = alpha0;
            let z: Vec<f64> = phi.iter().map(|p| overshoot_entry(*p, *p)).collect();
            let mut w = vec![0.0; 4];
            auto_update(&mut opt, &mut w, delta, &phi, &z).unwrap();
            let eff: f64 = opt.alpha.iter().zip(&z).map(|(a, z)| a * z).sum();
            prop_assert!(eff <= 1.0 + 1e-12);
        }
    }
}
