//! Experiment configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::behavior::{BehaviorKind, BehaviorSpec};
use crate::envs::{EnvId, EnvOptions};
use crate::error::{Error, Result};
use crate::learners::{LearnerKind, LearnerSpec, ReplaySpec, SfTrace};
use crate::optim::OptimizerKind;

/// State-action weighting used to score predictions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightingKind {
    /// Uniform over the evaluation set.
    Uniform,
    /// Stationary visitation of a non-learning behavior.
    Behavior,
    /// Each GVF's interest times the visitation of its own policy.
    Interest,
}

fn default_runs() -> usize {
    30
}

fn default_true() -> bool {
    true
}

/// One experiment. Only `environment`, `behavior`, `learner` and `steps`
/// are required in JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvId,
    pub behavior: BehaviorSpec,
    pub learner: LearnerSpec,
    #[serde(default)]
    pub replay: Option<ReplaySpec>,
    /// Keep the environment's interest functions; otherwise every GVF has
    /// uniform interest.
    #[serde(default = "default_true")]
    pub interest: bool,
    pub steps: usize,
    /// Steps between evaluations; defaults to 100 (tabular) or 500.
    #[serde(default)]
    pub eval_every: Option<usize>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    /// Run `r` of a sweep or batch uses seed `seed + r`.
    #[serde(default)]
    pub seed: u64,
    /// Defaults by behavior and environment when unset.
    #[serde(default)]
    pub weighting: Option<WeightingKind>,
    /// Monte Carlo rollouts per evaluation pair for continuous truth.
    #[serde(default)]
    pub truth_rollouts: Option<usize>,
    #[serde(default)]
    pub env_options: EnvOptions,
    #[serde(default)]
    pub out_dir: Option<String>,
}

impl ExperimentConfig {
    pub fn new(environment: EnvId, behavior: BehaviorKind, learner: LearnerKind, steps: usize) -> Self {
        ExperimentConfig {
            environment,
            behavior: BehaviorSpec::new(behavior),
            learner: LearnerSpec::new(learner),
            replay: None,
            interest: true,
            steps,
            eval_every: None,
            runs: default_runs(),
            seed: 0,
            weighting: None,
            truth_rollouts: None,
            env_options: EnvOptions::default(),
            out_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidConfig("steps must be positive".into()));
        }
        if self.runs == 0 {
            return Err(Error::InvalidConfig("runs must be at least 1".into()));
        }
        if self.eval_every == Some(0) {
            return Err(Error::InvalidConfig("eval_every must be positive".into()));
        }
        if self.truth_rollouts == Some(0) {
            return Err(Error::InvalidConfig("truth_rollouts must be positive".into()));
        }
        if let Some(r) = &self.replay {
            if r.capacity == 0 {
                return Err(Error::InvalidConfig("replay capacity must be positive".into()));
            }
        }
        if self.weighting == Some(WeightingKind::Behavior) && self.behavior.kind.is_learned() {
            return Err(Error::Unsupported("behavior weighting needs a non-learning behavior".into()));
        }
        self.learner.validate()?;
        self.behavior.validate()
    }

    pub fn eval_every(&self) -> usize {
        self.eval_every.unwrap_or(match self.environment {
            EnvId::TabularTmaze => 100,
            _ => 500,
        })
    }

    /// Fixed behaviors are scored under their own visitation, the open
    /// world under interest, everything else uniformly.
    pub fn weighting(&self) -> WeightingKind {
        self.weighting.unwrap_or(match (self.behavior.kind, self.environment) {
            (BehaviorKind::Fixed, _) => WeightingKind::Behavior,
            (_, EnvId::Open2dWorld) => WeightingKind::Interest,
            _ => WeightingKind::Uniform,
        })
    }

    pub fn truth_rollouts(&self) -> usize {
        self.truth_rollouts.unwrap_or(match self.environment {
            EnvId::MountainCar => 10,
            _ => 30,
        })
    }

    /// Hex SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Named configurations for the standard scenarios.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    use BehaviorKind as B;
    use EnvId as E;
    use LearnerKind as L;
    let mut c = match name {
        "tabular-fixed-sfnr" | "tabular-fixed-tb" | "tabular-fixed-lstd" => {
            let kind = match name {
                "tabular-fixed-sfnr" => L::Sfnr,
                "tabular-fixed-tb" => L::Tb,
                _ => L::Lstd,
            };
            let mut c = ExperimentConfig::new(E::TabularTmaze, B::Fixed, kind, 50_000);
            c.learner.initial_step = 1.0;
            c.learner.meta_step = 0.2;
            c
        }
        "tabular-gpi-sfnr" | "tabular-gpi-tb" => {
            let kind = if name.ends_with("sfnr") { L::Sfnr } else { L::Tb };
            let mut c = ExperimentConfig::new(E::TabularTmaze, B::Gpi, kind, 50_000);
            c.learner.initial_step = if kind == L::Sfnr { 1.0 } else { 0.1 };
            c.learner.meta_step = 0.04;
            c
        }
        "continuous-fixed-sfnr" | "continuous-fixed-tb" | "continuous-fixed-sfnr-replay" | "continuous-fixed-tb-replay" => {
            let kind = if name.contains("sfnr") { L::Sfnr } else { L::Tb };
            let mut c = ExperimentConfig::new(E::ContinuousTmaze, B::Fixed, kind, 100_000);
            c.learner.lambda = 0.0;
            c.learner.initial_step = 0.2;
            c.learner.meta_step = 0.04;
            if name.ends_with("replay") {
                c.replay = Some(ReplaySpec::default());
            }
            c
        }
        "continuous-gpi-sfnr" | "continuous-esarsa-tb" => {
            let (b, kind) = if name.contains("gpi") { (B::Gpi, L::Sfnr) } else { (B::Esarsa, L::Tb) };
            let mut c = ExperimentConfig::new(E::ContinuousTmaze, b, kind, 100_000);
            c.learner.initial_step = if b == B::Gpi { 0.2 } else { 0.1 };
            c.learner.meta_step = if b == B::Gpi { 0.008 } else { 0.04 };
            c
        }
        "open-world-tb" | "open-world-tb-interest" | "open-world-etb" => {
            // SF-NR agents that differ in the trace used for the successor features.
            let trace = match name {
                "open-world-tb" => SfTrace::Tb,
                "open-world-tb-interest" => SfTrace::TbInterest,
                _ => SfTrace::Etb,
            };
            let mut c = ExperimentConfig::new(E::Open2dWorld, B::Gpi, L::Sfnr, 200_000);
            c.learner.sf_trace = trace;
            c.interest = trace != SfTrace::Tb;
            c.learner.initial_step = 0.1;
            c.learner.meta_step = if trace == SfTrace::Etb { 0.008 } else { 0.04 };
            c.learner.emphasis_clip = (trace == SfTrace::Etb).then_some(1.0);
            c.behavior.meta_step = Some(match trace {
                SfTrace::Tb => 0.0016,
                _ => 0.2,
            });
            c
        }
        "mountain-car-gpi" | "mountain-car-esarsa" | "mountain-car-random" => {
            let b = match name {
                "mountain-car-gpi" => B::Gpi,
                "mountain-car-esarsa" => B::Esarsa,
                _ => B::Random,
            };
            let mut c = ExperimentConfig::new(E::MountainCar, b, L::Sfnr, 200_000);
            c.learner.optimizer = OptimizerKind::Sgd;
            c.learner.initial_step = if b == B::Random { 1.0 / 3.0 } else { 1.0 / 9.0 };
            c.behavior.optimizer = Some(OptimizerKind::Sgd);
            c.behavior.initial_step = Some(1.0);
            c
        }
        _ => return Err(Error::UnknownComponent { kind: "preset", id: name.to_string() }),
    };
    c.seed = 0;
    Ok(c)
}

pub const PRESETS: [&str; 17] = [
    "tabular-fixed-sfnr",
    "tabular-fixed-tb",
    "tabular-fixed-lstd",
    "tabular-gpi-sfnr",
    "tabular-gpi-tb",
    "continuous-fixed-sfnr",
    "continuous-fixed-tb",
    "continuous-fixed-sfnr-replay",
    "continuous-fixed-tb-replay",
    "continuous-gpi-sfnr",
    "continuous-esarsa-tb",
    "open-world-tb",
    "open-world-tb-interest",
    "open-world-etb",
    "mountain-car-gpi",
    "mountain-car-esarsa",
    "mountain-car-random",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_json_gets_defaults() {
        let c = ExperimentConfig::from_json(
            r#"{"environment":"tabular-tmaze","behavior":{"kind":"fixed"},"learner":{"kind":"sfnr"},"steps":1000}"#,
        )
        .unwrap();
        assert_eq!(c.runs, 30);
        assert_eq!(c.eval_every(), 100);
        assert_eq!(c.weighting(), WeightingKind::Behavior);
        assert!(c.interest);
    }

    #[test]
    fn invalid_configs_rejected() {
        let base = r#"{"environment":"tabular-tmaze","behavior":{"kind":"fixed"},"learner":{"kind":"sfnr"},"steps":0}"#;
        assert!(matches!(ExperimentConfig::from_json(base), Err(Error::InvalidConfig(_))));
        let unknown = r#"{"environment":"grid","behavior":{"kind":"fixed"},"learner":{"kind":"sfnr"},"steps":5}"#;
        assert!(ExperimentConfig::from_json(unknown).is_err());
        let extra = r#"{"environment":"tabular-tmaze","behavior":{"kind":"fixed"},"learner":{"kind":"sfnr"},"steps":5,"color":1}"#;
        assert!(ExperimentConfig::from_json(extra).is_err());
        let mut c = ExperimentConfig::new(EnvId::TabularTmaze, BehaviorKind::Gpi, LearnerKind::Tb, 10);
        c.weighting = Some(WeightingKind::Behavior);
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = preset("tabular-fixed-sfnr").unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.steps += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn presets_are_valid_and_round_trip() {
        for name in PRESETS {
            let c = preset(name).unwrap();
            c.validate().unwrap();
            let back = ExperimentConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
            assert_eq!(back, c);
        }
        assert!(preset("nope").is_err());
    }
}
