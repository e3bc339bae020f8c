//! Per-environment features, evaluation truth and weightings.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use super::config::{ExperimentConfig, WeightingKind};
use crate::behavior::{Behavior, FixedBehavior, RandomBehavior};
use crate::domain::{streams, GvfQuestion, Policy, RngStream};
use crate::envs::{ContinuousTMaze, Dynamics, EnvId, MountainCar, Open2DWorld, TabularTMaze};
use crate::error::{Error, Result};
use crate::features::{Featurizer, GridAggregation, RewardFeatureMap, SparseFeatures, TileCoder, TileCoderConfig};
use crate::oracle::truth::{self, EvalSet, Truth};

/// Feature maps of one environment.
pub struct FeatureSetup {
    /// State-action features shared by the GVF learners and the behavior.
    pub features: Arc<dyn Featurizer>,
    /// Goal indicators for SF-NR.
    pub gvf_reward: RewardFeatureMap,
    /// Reward features of the GPI behavior.
    pub behavior_reward: RewardFeatureMap,
    pub behavior_reward_active: usize,
}

fn tiles(tilings: usize, tiles_per_dim: usize, lo: [f64; 2], hi: [f64; 2], na: usize) -> TileCoder {
    TileCoder::new(TileCoderConfig { tilings, tiles_per_dim, lo, hi }, na)
}

impl FeatureSetup {
    /// Tabular one-hot in the tabular maze; 2 tilings of 8 tiles elsewhere.
    /// Behavior reward features: tabular, hallway thirds, 2x2 squares, or
    /// 8 tilings of 2 tiles.
    pub fn for_env(id: EnvId, num_goals: usize) -> FeatureSetup {
        let gvf_reward = RewardFeatureMap::GoalIndicator { num_goals };
        match id {
            EnvId::TabularTmaze => {
                let f: Arc<dyn Featurizer> = Arc::new(TabularTMaze::new().indexer(4));
                FeatureSetup { features: f.clone(), gvf_reward, behavior_reward: RewardFeatureMap::StateAction(f), behavior_reward_active: 1 }
            }
            EnvId::ContinuousTmaze => FeatureSetup {
                features: Arc::new(tiles(2, 8, [0.0, 0.0], [1.0, 1.0], 4)),
                gvf_reward,
                behavior_reward: RewardFeatureMap::StateAction(Arc::new(ContinuousTMaze::reward_aggregation(4))),
                behavior_reward_active: 1,
            },
            EnvId::Open2dWorld => {
                let s = Open2DWorld::size();
                FeatureSetup {
                    features: Arc::new(tiles(2, 8, [0.0, 0.0], [s, s], 4)),
                    gvf_reward,
                    behavior_reward: RewardFeatureMap::StateAction(Arc::new(GridAggregation::with_cell_size([0.0, 0.0], [s, s], [2.0, 2.0], 4))),
                    behavior_reward_active: 1,
                }
            }
            EnvId::MountainCar => {
                let (lo, hi) = MountainCar::bounds();
                FeatureSetup {
                    features: Arc::new(tiles(2, 8, lo, hi, 3)),
                    gvf_reward,
                    behavior_reward: RewardFeatureMap::StateAction(Arc::new(tiles(8, 2, lo, hi, 3))),
                    behavior_reward_active: 8,
                }
            }
        }
    }

    pub fn eval_features(&self, eval: &EvalSet) -> Vec<SparseFeatures> {
        eval.pairs().map(|(s, a)| self.features.featurize(&s, a)).collect()
    }
}

fn truth_key(cfg: &ExperimentConfig) -> String {
    format!("{}|{}|{}|{}", cfg.environment, cfg.truth_rollouts(), cfg.env_options.pretrain_steps, cfg.env_options.pretrain_seed)
}

/// Unit-cumulant truth for the configuration's environment, computed once
/// per process.
pub fn truth_for(cfg: &ExperimentConfig, dynamics: &dyn Dynamics, gvfs: &[GvfQuestion], eval: &EvalSet) -> Result<Arc<Truth>> {
    truth::cached_truth(&truth_key(cfg), || match cfg.environment {
        EnvId::TabularTmaze => truth::tabular_truth(&TabularTMaze::new(), gvfs, eval),
        _ => truth::sampled_truth(dynamics, gvfs, eval, cfg.truth_rollouts(), 0x7a7e),
    })
}

type WeightCache = Mutex<HashMap<String, Arc<Vec<Vec<f64>>>>>;

fn weight_cache() -> &'static WeightCache {
    static CACHE: OnceLock<WeightCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Steps of the rollout that estimates a scripted behavior's visitation in
/// continuous environments.
pub const VISITATION_STEPS: usize = 200_000;

/// Episodes per GVF for interest-weighted visitation.
pub const INTEREST_EPISODES: usize = 500;

fn behavior_visitation(cfg: &ExperimentConfig, dynamics: &Arc<dyn Dynamics>, policies: &[Arc<dyn Policy>], eval: &EvalSet) -> Result<Vec<f64>> {
    if cfg.environment == EnvId::TabularTmaze && cfg.behavior.kind == crate::behavior::BehaviorKind::Fixed {
        return Ok(truth::tabular_fixed_behavior_weights(&TabularTMaze::new(), policies, eval));
    }
    let mut b: Box<dyn Behavior> = match cfg.behavior.kind {
        crate::behavior::BehaviorKind::Fixed => Box::new(FixedBehavior::new(dynamics.clone(), policies.to_vec())?),
        crate::behavior::BehaviorKind::Random => Box::new(RandomBehavior),
        k => return Err(Error::Unsupported(format!("visitation weighting for learned behavior {k}"))),
    };
    let mut rng = RngStream::new(0x7a7e, streams::TRUTH);
    let na = dynamics.num_actions();
    let xs = vec![SparseFeatures::with_dim(0); na];
    let mut s = dynamics.reset(&mut rng);
    b.start_episode(&s, &mut rng);
    let mut visits = Vec::with_capacity(VISITATION_STEPS);
    for _ in 0..VISITATION_STEPS {
        let (a, _) = b.act(&s, &xs, &mut rng);
        visits.push((s, a));
        let landed = dynamics.advance(&s, a, &mut rng);
        if dynamics.goal_at(&landed).is_some() {
            s = dynamics.reset(&mut rng);
            b.start_episode(&s, &mut rng);
        } else {
            s = landed;
        }
    }
    Ok(truth::empirical_weights(eval, visits))
}

/// Per-GVF weights over the evaluation set. `gvfs` must carry the
/// environment's own interest functions.
pub fn weights_for(cfg: &ExperimentConfig, dynamics: &Arc<dyn Dynamics>, gvfs: &[GvfQuestion], eval: &EvalSet) -> Result<Arc<Vec<Vec<f64>>>> {
    let kind = cfg.weighting();
    let key = format!("{}|{:?}|{}|{}", truth_key(cfg), kind, cfg.behavior.kind, eval.len());
    if let Some(w) = weight_cache().lock().unwrap().get(&key) {
        return Ok(w.clone());
    }
    let n = gvfs.len();
    let w = match kind {
        WeightingKind::Uniform => vec![truth::uniform_weights(eval.len()); n],
        WeightingKind::Behavior => {
            let policies: Vec<Arc<dyn Policy>> = gvfs.iter().map(|q| q.policy.clone()).collect();
            vec![behavior_visitation(cfg, dynamics, &policies, eval)?; n]
        }
        WeightingKind::Interest => gvfs
            .iter()
            .enumerate()
            .map(|(i, q)| {
                let mut rng = RngStream::new(0x7a7e, streams::TRUTH + 7000 + i as u64);
                truth::interest_weights(dynamics.as_ref(), q, eval, INTEREST_EPISODES, &mut rng)
            })
            .collect(),
    };
    let w = Arc::new(w);
    weight_cache().lock().unwrap().entry(key).or_insert(w.clone());
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{gvf_suite, make_dynamics, EnvOptions};

    #[test]
    fn feature_dimensions() {
        let t = FeatureSetup::for_env(EnvId::TabularTmaze, 4);
        assert_eq!(t.features.dim(), t.behavior_reward.dim());
        assert_eq!(t.gvf_reward.dim(), 4);
        let c = FeatureSetup::for_env(EnvId::ContinuousTmaze, 4);
        assert_eq!(c.features.dim(), 2 * 64 * 4);
        assert_eq!(c.features.active_count(), 2);
        assert_eq!(c.behavior_reward.dim(), 21 * 4);
        let o = FeatureSetup::for_env(EnvId::Open2dWorld, 4);
        assert_eq!(o.behavior_reward.dim(), 25 * 4);
        let m = FeatureSetup::for_env(EnvId::MountainCar, 2);
        assert_eq!(m.features.dim(), 2 * 64 * 3);
        assert_eq!(m.behavior_reward.dim(), 8 * 4 * 3);
    }

    #[test]
    fn interest_weights_stay_in_each_quadrant() {
        let opts = EnvOptions::default();
        let gvfs = gvf_suite(EnvId::Open2dWorld, &opts, &mut RngStream::new(0, streams::CONSTANTS));
        let mut cfg = ExperimentConfig::new(EnvId::Open2dWorld, crate::behavior::BehaviorKind::Gpi, crate::learners::LearnerKind::Tb, 10);
        cfg.weighting = Some(WeightingKind::Interest);
        let eval = EvalSet::for_env(EnvId::Open2dWorld);
        let w = weights_for(&cfg, &make_dynamics(EnvId::Open2dWorld), &gvfs, &eval).unwrap();
        for (q, wi) in gvfs.iter().zip(w.iter()) {
            assert!((wi.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for (k, v) in wi.iter().enumerate() {
                if *v > 0.0 {
                    assert_eq!(q.interest_at(&eval.pair(k).0), 1.0);
                }
            }
        }
    }
}
