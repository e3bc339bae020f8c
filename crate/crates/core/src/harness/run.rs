//! One run of the multi-prediction loop.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use super::setup::{truth_for, weights_for, FeatureSetup};
use crate::behavior::{intrinsic_reward, BehaviorContext, BehaviorStep};
use crate::domain::{streams, RngStream};
use crate::envs::Environment;
use crate::error::Result;
use crate::features::SparseFeatures;
use crate::learners::{GvfLearner, ReplayBuffer, StepData, Target};
use crate::oracle::metrics::{rmsve, tail_total_error};
use crate::oracle::truth::EvalSet;

/// One evaluation row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogRow {
    pub step: usize,
    pub rmsve: Vec<f64>,
    /// Sum of every RMSVE logged so far, this row included.
    pub te: f64,
    /// Mean intrinsic reward since the previous row.
    pub mean_intrinsic_reward: f64,
    /// Cumulative goal entries.
    pub visits: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunLog {
    pub seed: u64,
    pub config_hash: String,
    pub rows: Vec<LogRow>,
}

impl RunLog {
    pub fn num_gvfs(&self) -> usize {
        self.rows.first().map_or(0, |r| r.rmsve.len())
    }

    pub fn num_goals(&self) -> usize {
        self.rows.first().map_or(0, |r| r.visits.len())
    }

    /// `history[t][i]`: RMSVE of GVF `i` at row `t`.
    pub fn history(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.rmsve.clone()).collect()
    }

    /// Total error over the last `fraction` of rows.
    pub fn tail_te(&self, fraction: f64) -> f64 {
        tail_total_error(&self.history(), fraction)
    }

    /// Mean over GVFs of the RMSVE averaged across the last `fraction` of rows.
    pub fn tail_rmsve(&self, fraction: f64) -> f64 {
        self.mean_rmsve(crate::oracle::metrics::tail_start(self.rows.len(), fraction), self.rows.len())
    }

    /// Mean over GVFs of the RMSVE averaged across the first `fraction` of rows.
    pub fn head_rmsve(&self, fraction: f64) -> f64 {
        let n = self.rows.len();
        let k = ((n as f64 * fraction).round() as usize).clamp(1, n.max(1));
        self.mean_rmsve(0, k.min(n))
    }

    fn mean_rmsve(&self, from: usize, to: usize) -> f64 {
        let rows = &self.rows[from..to];
        let cells = rows.len() * self.num_gvfs();
        if cells == 0 {
            return f64::NAN;
        }
        rows.iter().flat_map(|r| r.rmsve.iter()).sum::<f64>() / cells as f64
    }

    /// Per-goal entries after the first `1 - fraction` of rows.
    pub fn tail_visits(&self, fraction: f64) -> Vec<u64> {
        let Some(last) = self.rows.last() else { return Vec::new() };
        let start = crate::oracle::metrics::tail_start(self.rows.len(), fraction);
        match start.checked_sub(1) {
            Some(i) => last.visits.iter().zip(&self.rows[i].visits).map(|(a, b)| a - b).collect(),
            None => last.visits.clone(),
        }
    }

    pub fn total_visits(&self) -> Vec<u64> {
        self.rows.last().map_or_else(Vec::new, |r| r.visits.clone())
    }

    pub fn csv_header(num_gvfs: usize, num_goals: usize) -> Vec<String> {
        let mut h = vec!["step".to_string()];
        h.extend((1..=num_gvfs).map(|i| format!("rmsve_gvf_{i}")));
        h.push("te".into());
        h.push("mean_intrinsic_reward".into());
        h.extend((1..=num_goals).map(|i| format!("visits_goal_{i}")));
        h
    }

    fn csv_record(r: &LogRow) -> Vec<String> {
        let mut v = vec![r.step.to_string()];
        v.extend(r.rmsve.iter().map(|x| x.to_string()));
        v.push(r.te.to_string());
        v.push(r.mean_intrinsic_reward.to_string());
        v.extend(r.visits.iter().map(|x| x.to_string()));
        v
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(Self::csv_header(self.num_gvfs(), self.num_goals())).expect("in-memory write");
        for r in &self.rows {
            w.write_record(Self::csv_record(r)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }
}

/// Points in a step at which an observer is notified.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Act,
    GvfUpdate,
    Replay,
    BehaviorUpdate,
    Evaluate,
}

/// File names of a run's log and sidecar inside `dir`.
pub fn log_paths(dir: &Path, seed: u64) -> (PathBuf, PathBuf) {
    (dir.join(format!("run_{seed}.csv")), dir.join(format!("run_{seed}.json")))
}

struct CsvSink {
    w: csv::Writer<BufWriter<File>>,
}

impl CsvSink {
    fn open(path: &Path, num_gvfs: usize, num_goals: usize) -> Result<Self> {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        w.write_record(RunLog::csv_header(num_gvfs, num_goals)).map_err(csv_io)?;
        Ok(CsvSink { w })
    }

    fn row(&mut self, r: &LogRow) -> Result<()> {
        self.w.write_record(RunLog::csv_record(r)).map_err(csv_io)?;
        self.w.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

pub fn run_experiment(cfg: &ExperimentConfig, seed: u64) -> Result<RunLog> {
    run_observed(cfg, seed, cfg.out_dir.as_deref().map(Path::new), &mut |_, _| {})
}

/// Runs the loop, writing `run_<seed>.csv` and `run_<seed>.json` into
/// `out` when given, and calling `observer(step, phase)` as the step
/// progresses.
pub fn run_observed(cfg: &ExperimentConfig, seed: u64, out: Option<&Path>, observer: &mut dyn FnMut(usize, Phase)) -> Result<RunLog> {
    cfg.validate()?;
    let mut env = Environment::new(cfg.environment, seed, &cfg.env_options);
    let dynamics = env.dynamics().clone();
    let na = dynamics.num_actions();
    let num_goals = dynamics.num_goals();
    let gvfs_own = env.gvfs().to_vec();
    let n = gvfs_own.len();
    let setup = FeatureSetup::for_env(cfg.environment, num_goals);
    let eval = EvalSet::for_env(cfg.environment);
    let truth = truth_for(cfg, dynamics.as_ref(), &gvfs_own, &eval)?;
    let weights = weights_for(cfg, &dynamics, &gvfs_own, &eval)?;
    let eval_x = setup.eval_features(&eval);

    let dim = setup.features.dim();
    let active = setup.features.active_count();
    let mut learners: Vec<Box<dyn GvfLearner>> =
        (0..n).map(|_| cfg.learner.build(dim, active, setup.gvf_reward.dim())).collect::<Result<_>>()?;
    let ctx = BehaviorContext {
        dynamics: dynamics.clone(),
        policies: gvfs_own.iter().map(|q| q.policy.clone()).collect(),
        dim,
        active,
        reward_dim: setup.behavior_reward.dim(),
        reward_active: setup.behavior_reward_active,
        lambda: cfg.learner.lambda,
        optimizer: cfg.learner.optimizer,
        initial_step: cfg.learner.initial_step,
        meta_step: cfg.learner.meta_step,
    };
    let mut behavior = cfg.behavior.build(ctx)?;
    let mut replay = cfg.replay.map(|r| (ReplayBuffer::<(StepData, Vec<Target>)>::new(r.capacity), r.batch));

    let mut sink = match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let (csv_path, json_path) = log_paths(dir, seed);
            let meta = serde_json::json!({ "seed": seed, "config_hash": cfg.hash(), "config": cfg });
            fs::write(json_path, serde_json::to_string_pretty(&meta)?)?;
            Some(CsvSink::open(&csv_path, n, num_goals)?)
        }
        None => None,
    };

    let mut env_rng = RngStream::new(seed, streams::ENV);
    let mut act_rng = RngStream::new(seed, streams::EXPLORATION);
    let mut replay_rng = RngStream::new(seed, streams::REPLAY);

    let mut data = StepData::new(dim, na, setup.gvf_reward.dim());
    let mut targets: Vec<Target> = (0..n).map(|_| Target::new(na)).collect();
    let mut xs = vec![SparseFeatures::with_dim(dim); na];
    let mut xr = SparseFeatures::with_dim(setup.behavior_reward.dim());
    let mut deltas = vec![0.0; n];
    let mut pred = vec![0.0; eval.len()];
    let mut true_q = vec![0.0; eval.len()];

    let eval_every = cfg.eval_every();
    let mut rows = Vec::with_capacity(cfg.steps / eval_every + 1);
    let mut te = 0.0;
    let mut visits = vec![0u64; num_goals];
    let mut reward_sum = 0.0;
    let mut reward_count = 0usize;

    let mut s = env.reset(&mut env_rng);
    behavior.start_episode(&s, &mut act_rng);
    for t in 1..=cfg.steps {
        for (b, x) in xs.iter_mut().enumerate() {
            setup.features.featurize_into(&s, crate::domain::ActionId(b), x);
        }
        let (a, b_prob) = behavior.act(&s, &xs, &mut act_rng);
        observer(t, Phase::Act);
        let outcome = env.step(&s, a, &mut env_rng)?;
        data.fill(setup.features.as_ref(), &setup.gvf_reward, &s, a, &outcome.s_next, outcome.goal_hit, b_prob);
        for (i, tg) in targets.iter_mut().enumerate() {
            let (c, g) = outcome.gvf[i];
            tg.fill(&gvfs_own[i], &s, a, &outcome.s_next, c, g);
            if !cfg.interest {
                tg.interest = 1.0;
            }
        }
        for ((l, tg), d) in learners.iter_mut().zip(&targets).zip(deltas.iter_mut()) {
            *d = l.update(&data, tg)?;
        }
        observer(t, Phase::GvfUpdate);
        if let Some((buf, batch)) = replay.as_mut() {
            buf.push((data.clone(), targets.clone()));
            for _ in 0..*batch {
                let (d, ts) = buf.sample(&mut replay_rng).expect("buffer is nonempty");
                for (l, tg) in learners.iter_mut().zip(ts) {
                    l.replay_update(d, tg)?;
                }
            }
            observer(t, Phase::Replay);
        }
        let reward = intrinsic_reward(&deltas, dynamics.step_penalty());
        reward_sum += reward;
        reward_count += 1;
        setup.behavior_reward.features_into(&s, a, outcome.goal_hit, &mut xr);
        behavior.update(&BehaviorStep {
            s: &s,
            a,
            s_next: &outcome.s_next,
            data: &data,
            reward_features: &xr,
            reward,
            discount: dynamics.gvf_discount() * outcome.behavior_discount,
        })?;
        observer(t, Phase::BehaviorUpdate);

        if let Some(g) = outcome.goal_hit {
            visits[g] += 1;
            for l in learners.iter_mut() {
                l.end_episode();
            }
            behavior.end_episode();
            behavior.start_episode(&outcome.s_next, &mut act_rng);
        }
        s = outcome.s_next;

        if t % eval_every == 0 {
            let mut errs = Vec::with_capacity(n);
            for (i, l) in learners.iter_mut().enumerate() {
                l.prepare_eval()?;
                for (p, x) in pred.iter_mut().zip(&eval_x) {
                    *p = l.predict(x);
                }
                for (q, v) in true_q.iter_mut().zip(truth.values(i, env.gvfs()[i].schedule.expected())) {
                    *q = v;
                }
                errs.push(rmsve(&pred, &true_q, &weights[i])?);
            }
            te += errs.iter().sum::<f64>();
            let row = LogRow {
                step: t,
                rmsve: errs,
                te,
                mean_intrinsic_reward: if reward_count > 0 { reward_sum / reward_count as f64 } else { 0.0 },
                visits: visits.clone(),
            };
            reward_sum = 0.0;
            reward_count = 0;
            if let Some(sink) = sink.as_mut() {
                sink.row(&row)?;
            }
            rows.push(row);
            observer(t, Phase::Evaluate);
        }
    }
    if let Some(sink) = sink.as_mut() {
        sink.w.flush()?;
    }
    Ok(RunLog { seed, config_hash: cfg.hash(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behavior::BehaviorKind;
    use crate::envs::EnvId;
    use crate::learners::LearnerKind;

    fn small(kind: LearnerKind, b: BehaviorKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(EnvId::TabularTmaze, b, kind, 2_000);
        c.runs = 1;
        c
    }

    #[test]
    fn same_seed_same_csv() {
        let c = small(LearnerKind::Sfnr, BehaviorKind::Gpi);
        let a = run_experiment(&c, 3).unwrap();
        let b = run_experiment(&c, 3).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string());
        let other = run_experiment(&c, 4).unwrap();
        assert_ne!(a.to_csv_string(), other.to_csv_string());
    }

    #[test]
    fn rows_and_counters_are_monotone() {
        let log = run_experiment(&small(LearnerKind::Tb, BehaviorKind::Fixed), 1).unwrap();
        assert_eq!(log.rows.len(), 20);
        assert_eq!(log.num_gvfs(), 4);
        for w in log.rows.windows(2) {
            assert!(w[1].step > w[0].step);
            assert!(w[1].te >= w[0].te);
            assert!(w[1].visits.iter().zip(&w[0].visits).all(|(a, b)| a >= b));
        }
        assert!(log.total_visits().iter().sum::<u64>() > 0);
    }

    #[test]
    fn gvf_updates_precede_behavior_update_every_step() {
        let mut c = small(LearnerKind::Tb, BehaviorKind::Gpi);
        c.replay = Some(crate::learners::ReplaySpec { capacity: 100, batch: 2 });
        c.steps = 500;
        let mut seen = Vec::new();
        run_observed(&c, 0, None, &mut |t, p| seen.push((t, p))).unwrap();
        let mut last_step = 0;
        for chunk in seen.split(|(_, p)| *p == Phase::Evaluate) {
            for step in chunk.chunks(4) {
                let phases: Vec<Phase> = step.iter().map(|(_, p)| *p).collect();
                assert_eq!(phases, [Phase::Act, Phase::GvfUpdate, Phase::Replay, Phase::BehaviorUpdate]);
                assert!(step.iter().all(|(t, _)| *t == last_step + 1));
                last_step += 1;
            }
        }
        assert_eq!(last_step, 500);
    }

    #[test]
    fn writes_csv_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let c = small(LearnerKind::Lstd, BehaviorKind::Fixed);
        let log = run_observed(&c, 9, Some(dir.path()), &mut |_, _| {}).unwrap();
        let (csv_path, json_path) = log_paths(dir.path(), 9);
        assert_eq!(fs::read_to_string(csv_path).unwrap(), log.to_csv_string());
        let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(json_path).unwrap()).unwrap();
        assert_eq!(meta["seed"], 9);
        assert_eq!(meta["config_hash"], c.hash());
        let header = log.to_csv_string().lines().next().unwrap().to_string();
        assert_eq!(
            header,
            "step,rmsve_gvf_1,rmsve_gvf_2,rmsve_gvf_3,rmsve_gvf_4,te,mean_intrinsic_reward,visits_goal_1,visits_goal_2,visits_goal_3,visits_goal_4"
        );
    }

    #[test]
    fn tail_visit_arithmetic() {
        let row = |step, v: Vec<u64>| LogRow { step, rmsve: vec![0.0], te: 0.0, mean_intrinsic_reward: 0.0, visits: v };
        let log = RunLog {
            seed: 0,
            config_hash: String::new(),
            rows: vec![row(1, vec![1, 0]), row(2, vec![2, 1]), row(3, vec![4, 1]), row(4, vec![7, 2])],
        };
        assert_eq!(log.tail_visits(0.25), vec![3, 1]);
        assert_eq!(log.tail_visits(1.0), vec![7, 2]);
        assert_eq!(log.total_visits(), vec![7, 2]);
    }
}
