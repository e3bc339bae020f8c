//! Benchmark environments and their GVF suites.
//!
//! Every environment restarts from its start distribution right after a
//! goal entry. The transition that enters goal `i` terminates GVF `i`
//! (discount 0) and ends the behavior episode; every other GVF bootstraps
//! from the restarted state.

mod continuous_tmaze;
mod mountain_car;
mod open_world;
mod tabular_tmaze;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use continuous_tmaze::{ContinuousTMaze, HallwayPolicy};
pub use mountain_car::{goal_success_rate, mountain_car_pretrain, GreedyTilePolicy, MountainCar};
pub use open_world::{Open2DWorld, ReduceDistancePolicy};
pub use tabular_tmaze::{GridPathPolicy, TabularTMaze};

use crate::domain::{streams, ActionId, CumulantSchedule, GvfQuestion, Observation, RngStream};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvId {
    TabularTmaze,
    ContinuousTmaze,
    #[serde(rename = "open-2d-world")]
    Open2dWorld,
    MountainCar,
}

impl EnvId {
    pub const ALL: [EnvId; 4] = [EnvId::TabularTmaze, EnvId::ContinuousTmaze, EnvId::Open2dWorld, EnvId::MountainCar];

    pub fn as_str(self) -> &'static str {
        match self {
            EnvId::TabularTmaze => "tabular-tmaze",
            EnvId::ContinuousTmaze => "continuous-tmaze",
            EnvId::Open2dWorld => "open-2d-world",
            EnvId::MountainCar => "mountain-car",
        }
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvId::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::UnknownComponent { kind: "environment", id: s.to_string() })
    }
}

/// Raw dynamics of one environment, without cumulants or restarts.
pub trait Dynamics: Send + Sync {
    fn id(&self) -> EnvId;
    fn num_actions(&self) -> usize;
    fn num_goals(&self) -> usize;
    /// Draw from the start distribution.
    fn reset(&self, rng: &mut RngStream) -> Observation;
    /// Applies the action and the movement noise.
    fn advance(&self, s: &Observation, a: ActionId, rng: &mut RngStream) -> Observation;
    /// Goal region containing `s`, if any.
    fn goal_at(&self, s: &Observation) -> Option<usize>;
    /// Off-goal discount of every GVF.
    fn gvf_discount(&self) -> f64;
    /// Per-step penalty added to the intrinsic reward.
    fn step_penalty(&self) -> f64;
    /// Path length from `s` to every goal, if the environment supports the
    /// nearest-goal behavior.
    fn goal_distances(&self, _s: &Observation) -> Option<Vec<f64>> {
        None
    }
}

/// Result of one environment step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    /// Where the agent continues from: the landing point, or a fresh start
    /// draw after a goal entry.
    pub s_next: Observation,
    /// The point the dynamics moved to, before any restart.
    pub landed: Observation,
    pub goal_hit: Option<usize>,
    pub behavior_discount: f64,
    /// `(cumulant, discount)` for every GVF.
    pub gvf: Vec<(f64, f64)>,
}

/// Options that influence how an environment's GVF suite is built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvOptions {
    /// ESARSA steps used to script the Mountain Car GVF policies.
    pub pretrain_steps: usize,
    pub pretrain_seed: u64,
}

impl Default for EnvOptions {
    fn default() -> Self {
        EnvOptions { pretrain_steps: 500_000, pretrain_seed: 0x5eed }
    }
}

pub fn make_dynamics(id: EnvId) -> Arc<dyn Dynamics> {
    match id {
        EnvId::TabularTmaze => Arc::new(TabularTMaze::new()),
        EnvId::ContinuousTmaze => Arc::new(ContinuousTMaze::new()),
        EnvId::Open2dWorld => Arc::new(Open2DWorld::new()),
        EnvId::MountainCar => Arc::new(MountainCar::new()),
    }
}

fn draw_constant(rng: &mut RngStream) -> f64 {
    rng.random_range(-10.0..=10.0)
}

/// The GVF questions of an environment. Constant cumulants are drawn once
/// from `U[-10, 10]` using `constants`.
pub fn gvf_suite(id: EnvId, opts: &EnvOptions, constants: &mut RngStream) -> Vec<GvfQuestion> {
    match id {
        EnvId::TabularTmaze => {
            let maze = Arc::new(TabularTMaze::new());
            let roles = tmaze_roles(0.01, 25.0, constants);
            (0..4)
                .map(|g| GvfQuestion {
                    name: format!("goal-{}", g + 1),
                    policy: Arc::new(GridPathPolicy::new(maze.clone(), g)),
                    goal: g,
                    discount: 0.9,
                    schedule: roles[g].clone(),
                    interest: crate::domain::Interest::Uniform,
                })
                .collect()
        }
        EnvId::ContinuousTmaze => {
            let roles = tmaze_roles(0.01, 25.0, constants);
            (0..4)
                .map(|g| GvfQuestion {
                    name: format!("goal-{}", g + 1),
                    policy: Arc::new(HallwayPolicy::new(g)),
                    goal: g,
                    discount: 0.9,
                    schedule: roles[g].clone(),
                    interest: crate::domain::Interest::Uniform,
                })
                .collect()
        }
        EnvId::Open2dWorld => {
            let roles = tmaze_roles(0.005, 1.0, constants);
            (0..4)
                .map(|g| GvfQuestion {
                    name: format!("goal-{}", g + 1),
                    policy: Arc::new(ReduceDistancePolicy::new(g)),
                    goal: g,
                    discount: 0.95,
                    schedule: roles[g].clone(),
                    interest: Open2DWorld::quadrant_interest(g),
                })
                .collect()
        }
        EnvId::MountainCar => {
            let (left, hill) = mountain_car_pretrain(opts.pretrain_steps, opts.pretrain_seed);
            let names = ["left-wall", "hilltop"];
            let policies: [Arc<dyn crate::domain::Policy>; 2] = [left, hill];
            (0..2)
                .map(|g| GvfQuestion {
                    name: names[g].to_string(),
                    policy: policies[g].clone(),
                    goal: g,
                    discount: 0.99,
                    schedule: CumulantSchedule::Constant { value: 1.0 },
                    interest: crate::domain::Interest::Uniform,
                })
                .collect()
        }
    }
}

/// Goal roles shared by the TMaze variants and the open world: distractor,
/// drifter, then two constants.
fn tmaze_roles(drift_variance: f64, distractor_variance: f64, constants: &mut RngStream) -> [CumulantSchedule; 4] {
    [
        CumulantSchedule::Distractor { mean: 1.0, variance: distractor_variance },
        CumulantSchedule::drifter(drift_variance, 1.0),
        CumulantSchedule::Constant { value: draw_constant(constants) },
        CumulantSchedule::Constant { value: draw_constant(constants) },
    ]
}

/// Index of the GVF with a drifting cumulant, if any.
pub fn drifter_goal(gvfs: &[GvfQuestion]) -> Option<usize> {
    gvfs.iter().position(|q| matches!(q.schedule, CumulantSchedule::Drifter { .. }))
}

/// Index of the GVF with a distractor cumulant, if any.
pub fn distractor_goal(gvfs: &[GvfQuestion]) -> Option<usize> {
    gvfs.iter().position(|q| matches!(q.schedule, CumulantSchedule::Distractor { .. }))
}

/// An environment instance: dynamics, GVF questions and the random streams
/// of the cumulant schedules.
pub struct Environment {
    dynamics: Arc<dyn Dynamics>,
    gvfs: Vec<GvfQuestion>,
    schedule_rngs: Vec<RngStream>,
}

impl Environment {
    pub fn new(id: EnvId, seed: u64, opts: &EnvOptions) -> Self {
        let mut constants = RngStream::new(seed, streams::CONSTANTS);
        let gvfs = gvf_suite(id, opts, &mut constants);
        Self::from_parts(make_dynamics(id), gvfs, seed)
    }

    pub fn from_parts(dynamics: Arc<dyn Dynamics>, gvfs: Vec<GvfQuestion>, seed: u64) -> Self {
        let schedule_rngs = (0..gvfs.len()).map(|i| RngStream::new(seed, streams::SCHEDULE_BASE + i as u64)).collect();
        Environment { dynamics, gvfs, schedule_rngs }
    }

    pub fn id(&self) -> EnvId {
        self.dynamics.id()
    }

    pub fn dynamics(&self) -> &Arc<dyn Dynamics> {
        &self.dynamics
    }

    pub fn gvfs(&self) -> &[GvfQuestion] {
        &self.gvfs
    }

    pub fn num_actions(&self) -> usize {
        self.dynamics.num_actions()
    }

    pub fn reset(&self, rng: &mut RngStream) -> Observation {
        self.dynamics.reset(rng)
    }

    /// One environment step. Cumulants are emitted from the schedules'
    /// current values, then every schedule advances by one step.
    pub fn step(&mut self, s: &Observation, a: ActionId, rng: &mut RngStream) -> Result<StepOutcome> {
        let na = self.dynamics.num_actions();
        if a.0 >= na {
            return Err(Error::InvalidAction { action: a.0, num_actions: na });
        }
        let landed = self.dynamics.advance(s, a, rng);
        let goal_hit = self.dynamics.goal_at(&landed);
        let gvf = self
            .gvfs
            .iter()
            .zip(self.schedule_rngs.iter_mut())
            .map(|(q, r)| (q.cumulant_for(goal_hit, r), q.discount_for(goal_hit)))
            .collect();
        for (q, r) in self.gvfs.iter_mut().zip(self.schedule_rngs.iter_mut()) {
            q.schedule.step(r);
        }
        let (s_next, behavior_discount) = match goal_hit {
            Some(_) => (self.dynamics.reset(rng), 0.0),
            None => (landed, 1.0),
        };
        Ok(StepOutcome { s_next, landed, goal_hit, behavior_discount, gvf })
    }
}
