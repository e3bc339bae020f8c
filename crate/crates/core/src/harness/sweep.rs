//! Hyperparameter sweeps over a grid of dotted config paths.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use super::config::ExperimentConfig;
use super::run::{run_observed, RunLog};
use crate::error::{Error, Result};
use crate::oracle::metrics::mean_se;

/// Fraction of evaluations that selection looks at.
pub const SELECTION_TAIL: f64 = 0.1;

/// `{"learner.meta_step": [0.01, 0.1], ...}`; keys are dotted paths into the
/// config JSON.
pub type Grid = BTreeMap<String, Vec<Value>>;

pub fn parse_grid(text: &str) -> Result<Grid> {
    let g: Grid = serde_json::from_str(text)?;
    if g.is_empty() || g.values().any(Vec::is_empty) {
        return Err(Error::InvalidConfig("grid must have at least one value per key".into()));
    }
    Ok(g)
}

/// Cross product in key order, last key fastest.
pub fn cells(grid: &Grid) -> Vec<BTreeMap<String, Value>> {
    let mut out = vec![BTreeMap::new()];
    for (k, vs) in grid {
        out = out
            .into_iter()
            .flat_map(|c| {
                vs.iter().map(move |v| {
                    let mut c = c.clone();
                    c.insert(k.clone(), v.clone());
                    c
                })
            })
            .collect();
    }
    out
}

fn set_path(root: &mut Value, path: &str, v: Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, p) in parts.iter().enumerate() {
        let obj = cur.as_object_mut().ok_or_else(|| Error::InvalidConfig(format!("grid path {path} is not an object path")))?;
        if i + 1 == parts.len() {
            obj.insert(p.to_string(), v);
            return Ok(());
        }
        let next = obj.entry(p.to_string()).or_insert(Value::Null);
        if next.is_null() {
            *next = Value::Object(Default::default());
        }
        cur = next;
    }
    Ok(())
}

/// `base` with the cell's values substituted.
pub fn apply_cell(base: &ExperimentConfig, cell: &BTreeMap<String, Value>) -> Result<ExperimentConfig> {
    let mut v = serde_json::to_value(base)?;
    for (k, x) in cell {
        set_path(&mut v, k, x.clone())?;
    }
    let c: ExperimentConfig = serde_json::from_value(v)?;
    c.validate()?;
    Ok(c)
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub cell: usize,
    pub seed: u64,
    /// Total error over the last tenth of evaluations.
    pub tail_te: f64,
    pub te: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CellSummary {
    pub cell: usize,
    pub params: BTreeMap<String, Value>,
    pub mean_tail_te: f64,
    pub se_tail_te: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
    pub cells: Vec<CellSummary>,
    pub winner: usize,
}

impl SweepSummary {
    pub fn winner_cell(&self) -> &CellSummary {
        &self.cells[self.winner]
    }
}

/// Smallest mean, where non-finite means lose to every finite one.
fn argmin(xs: impl Iterator<Item = f64>) -> usize {
    let key = |x: f64| if x.is_finite() { x } else { f64::INFINITY };
    xs.enumerate().fold((0, f64::NAN), |(bi, bv), (i, x)| if bv.is_nan() || key(x) < key(bv) { (i, x) } else { (bi, bv) }).0
}

/// Runs every cell `runs` times with seeds `seed + r` and picks the cell
/// with the smallest mean last-tenth total error. Runs execute in
/// parallel; results do not depend on scheduling.
pub fn sweep(base: &ExperimentConfig, grid: &Grid, out: Option<&Path>) -> Result<SweepSummary> {
    sweep_with(base, grid, out, true)
}

pub fn sweep_with(base: &ExperimentConfig, grid: &Grid, out: Option<&Path>, parallel: bool) -> Result<SweepSummary> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("grid must be nonempty".into()));
    }
    let params = cells(grid);
    let configs: Vec<ExperimentConfig> = params.iter().map(|c| apply_cell(base, c)).collect::<Result<_>>()?;
    let jobs: Vec<(usize, u64)> = (0..configs.len()).flat_map(|c| (0..base.runs as u64).map(move |r| (c, base.seed + r))).collect();
    let run = |&(c, seed): &(usize, u64)| -> Result<RunLog> {
        let dir = out.map(|o| o.join(format!("cell_{c}")));
        run_observed(&configs[c], seed, dir.as_deref(), &mut |_, _| {})
    };
    let logs: Vec<RunLog> = if parallel {
        jobs.par_iter().map(run).collect::<Result<_>>()?
    } else {
        jobs.iter().map(run).collect::<Result<_>>()?
    };

    let rows: Vec<SweepRow> = jobs
        .iter()
        .zip(&logs)
        .map(|(&(cell, seed), l)| SweepRow { cell, seed, tail_te: l.tail_te(SELECTION_TAIL), te: l.rows.last().map_or(0.0, |r| r.te) })
        .collect();
    let cells: Vec<CellSummary> = params
        .into_iter()
        .enumerate()
        .map(|(cell, params)| {
            let xs: Vec<f64> = rows.iter().filter(|r| r.cell == cell).map(|r| r.tail_te).collect();
            let (m, se) = mean_se(&xs);
            CellSummary { cell, params, mean_tail_te: m, se_tail_te: se }
        })
        .collect();
    let winner = argmin(cells.iter().map(|c| c.mean_tail_te));
    let summary = SweepSummary { rows, cells, winner };
    if let Some(o) = out {
        write_summary(o, &summary)?;
    }
    Ok(summary)
}

fn write_summary(dir: &Path, s: &SweepSummary) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("summary.csv")).map_err(std::io::Error::other)?;
    w.write_record(["cell", "seed", "tail_te", "te"]).map_err(std::io::Error::other)?;
    for r in &s.rows {
        w.write_record([r.cell.to_string(), r.seed.to_string(), r.tail_te.to_string(), r.te.to_string()]).map_err(std::io::Error::other)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("cells.csv")).map_err(std::io::Error::other)?;
    w.write_record(["cell", "params", "mean_tail_te", "se_tail_te"]).map_err(std::io::Error::other)?;
    for c in &s.cells {
        w.write_record([c.cell.to_string(), serde_json::to_string(&c.params)?, c.mean_tail_te.to_string(), c.se_tail_te.to_string()])
            .map_err(std::io::Error::other)?;
    }
    w.flush()?;
    fs::write(dir.join("winner.json"), serde_json::to_string_pretty(s.winner_cell())?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behavior::BehaviorKind;
    use crate::envs::EnvId;
    use crate::learners::LearnerKind;
    use serde_json::json;

    fn base(runs: usize) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(EnvId::TabularTmaze, BehaviorKind::Fixed, LearnerKind::Tb, 1_000);
        c.runs = runs;
        c
    }

    #[test]
    fn cross_product_order() {
        let g = parse_grid(r#"{"a.b":[1,2],"c":[3,4,5]}"#).unwrap();
        let cs = cells(&g);
        assert_eq!(cs.len(), 6);
        assert_eq!(cs[0]["a.b"], json!(1));
        assert_eq!(cs[1]["c"], json!(4));
        assert_eq!(cs[3]["a.b"], json!(2));
        assert!(parse_grid("{}").is_err());
        assert!(parse_grid(r#"{"a":[]}"#).is_err());
    }

    #[test]
    fn apply_cell_sets_nested_fields() {
        let mut cell = BTreeMap::new();
        cell.insert("learner.meta_step".to_string(), json!(0.5));
        cell.insert("replay.batch".to_string(), json!(8));
        let c = apply_cell(&base(1), &cell).unwrap();
        assert_eq!(c.learner.meta_step, 0.5);
        assert_eq!(c.replay.unwrap().batch, 8);
        cell.insert("learner.nope".to_string(), json!(1));
        assert!(apply_cell(&base(1), &cell).is_err());
    }

    #[test]
    fn single_cell_wins_and_row_count() {
        let g = parse_grid(r#"{"learner.meta_step":[0.01]}"#).unwrap();
        let s = sweep(&base(3), &g, None).unwrap();
        assert_eq!(s.winner, 0);
        assert_eq!(s.rows.len(), 3);
        let g = parse_grid(r#"{"learner.meta_step":[0.01, 0.1],"learner.lambda":[0.0,0.9]}"#).unwrap();
        let s = sweep(&base(2), &g, None).unwrap();
        assert_eq!(s.rows.len(), 4 * 2);
        assert_eq!(s.cells.len(), 4);
    }

    #[test]
    fn parallel_matches_serial() {
        let dir_p = tempfile::tempdir().unwrap();
        let dir_s = tempfile::tempdir().unwrap();
        let g = parse_grid(r#"{"learner.initial_step":[0.05, 0.5]}"#).unwrap();
        let p = sweep_with(&base(2), &g, Some(dir_p.path()), true).unwrap();
        let s = sweep_with(&base(2), &g, Some(dir_s.path()), false).unwrap();
        assert_eq!(p.winner, s.winner);
        for c in 0..2 {
            for seed in 0..2 {
                let f = format!("cell_{c}/run_{seed}.csv");
                assert_eq!(fs::read(dir_p.path().join(&f)).unwrap(), fs::read(dir_s.path().join(&f)).unwrap());
            }
        }
        assert_eq!(fs::read(dir_p.path().join("summary.csv")).unwrap(), fs::read(dir_s.path().join("summary.csv")).unwrap());
    }

    #[test]
    fn non_finite_cells_never_win() {
        assert_eq!(argmin([f64::NAN, 2.0, 1.0].into_iter()), 2);
        assert_eq!(argmin([f64::INFINITY, 3.0].into_iter()), 1);
        assert_eq!(argmin([5.0].into_iter()), 0);
    }
}
