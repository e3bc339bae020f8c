//! State-action encoders (tabular one-hot, tile coding, state aggregation)
//! and reward-feature maps.
//!
//! Every encoder is action-sliced: the features of `(s, a)` live in the
//! index block `[a * per_action, (a + 1) * per_action)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{ActionId, Observation};

/// A sparse vector with strictly increasing indices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseFeatures {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    pub dim: usize,
}

impl SparseFeatures {
    pub fn with_dim(dim: usize) -> Self {
        SparseFeatures { indices: Vec::new(), values: Vec::new(), dim }
    }

    pub fn clear(&mut self) {
        self.indices.clear();
        self.values.clear();
    }

    pub fn push(&mut self, index: usize, value: f64) {
        debug_assert!(index < self.dim);
        debug_assert!(self.indices.last().is_none_or(|&l| l < index));
        self.indices.push(index);
        self.values.push(value);
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    #[inline]
    pub fn dot(&self, w: &[f64]) -> f64 {
        self.iter().map(|(i, v)| w[i] * v).sum()
    }

    pub fn l1(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim];
        for (i, v) in self.iter() {
            d[i] += v;
        }
        d
    }

    /// True when the invariants (strictly increasing, in range) hold.
    pub fn is_well_formed(&self) -> bool {
        self.indices.len() == self.values.len()
            && self.indices.windows(2).all(|w| w[0] < w[1])
            && self.indices.iter().all(|&i| i < self.dim)
    }
}

/// Maps `(s, a)` to a binary sparse feature vector with a fixed active count.
pub trait Featurizer: Send + Sync {
    fn dim(&self) -> usize;
    fn num_actions(&self) -> usize;
    /// Number of active indices per query.
    fn active_count(&self) -> usize;
    fn featurize_into(&self, s: &Observation, a: ActionId, out: &mut SparseFeatures);

    fn featurize(&self, s: &Observation, a: ActionId) -> SparseFeatures {
        let mut out = SparseFeatures::with_dim(self.dim());
        self.featurize_into(s, a, &mut out);
        out
    }
}

/// One-hot over `cells x actions` for grid worlds whose observations are
/// integer `(column, row)` pairs.
#[derive(Clone, Debug)]
pub struct TabularIndexer {
    width: usize,
    lookup: Vec<Option<usize>>,
    num_cells: usize,
    num_actions: usize,
}

impl TabularIndexer {
    /// `lookup[row * width + col]` holds the cell index of open cells.
    pub fn new(width: usize, lookup: Vec<Option<usize>>, num_actions: usize) -> Self {
        let num_cells = lookup.iter().flatten().count();
        TabularIndexer { width, lookup, num_cells, num_actions }
    }

    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    pub fn cell(&self, s: &Observation) -> usize {
        let col = s.x().round() as usize;
        let row = s.y().round() as usize;
        self.lookup[row * self.width + col].expect("observation is not an open cell")
    }
}

impl Featurizer for TabularIndexer {
    fn dim(&self) -> usize {
        self.num_cells * self.num_actions
    }

    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn active_count(&self) -> usize {
        1
    }

    fn featurize_into(&self, s: &Observation, a: ActionId, out: &mut SparseFeatures) {
        out.clear();
        out.dim = self.dim();
        out.push(a.0 * self.num_cells + self.cell(s), 1.0);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TileCoderConfig {
    pub tilings: usize,
    pub tiles_per_dim: usize,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

/// Grid tile coder over a 2-D box without hashing.
///
/// Tile width is `range / (tiles_per_dim - 1)` and tiling `k` is shifted by
/// `k / tilings` of a tile width, so every tiling covers the box with exactly
/// `tiles_per_dim` tiles per dimension.
#[derive(Clone, Debug)]
pub struct TileCoder {
    cfg: TileCoderConfig,
    width: [f64; 2],
    num_actions: usize,
}

impl TileCoder {
    pub fn new(cfg: TileCoderConfig, num_actions: usize) -> Self {
        assert!(cfg.tilings >= 1 && cfg.tiles_per_dim >= 1);
        let width = std::array::from_fn(|d| {
            let range = cfg.hi[d] - cfg.lo[d];
            if cfg.tiles_per_dim > 1 {
                range / (cfg.tiles_per_dim - 1) as f64
            } else {
                range * (1.0 + 1e-9)
            }
        });
        TileCoder { cfg, width, num_actions }
    }

    pub fn config(&self) -> &TileCoderConfig {
        &self.cfg
    }

    pub fn tilings(&self) -> usize {
        self.cfg.tilings
    }

    fn per_tiling(&self) -> usize {
        self.cfg.tiles_per_dim * self.cfg.tiles_per_dim
    }

    fn per_action(&self) -> usize {
        self.cfg.tilings * self.per_tiling()
    }
}

impl Featurizer for TileCoder {
    fn dim(&self) -> usize {
        self.per_action() * self.num_actions
    }

    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn active_count(&self) -> usize {
        self.cfg.tilings
    }

    fn featurize_into(&self, s: &Observation, a: ActionId, out: &mut SparseFeatures) {
        out.clear();
        out.dim = self.dim();
        let n = self.cfg.tiles_per_dim;
        let base = a.0 * self.per_action();
        let scaled: [f64; 2] = std::array::from_fn(|d| {
            let v = s.0[d].clamp(self.cfg.lo[d], self.cfg.hi[d]);
            (v - self.cfg.lo[d]) / self.width[d]
        });
        for k in 0..self.cfg.tilings {
            let shift = k as f64 / self.cfg.tilings as f64;
            let t: [usize; 2] = std::array::from_fn(|d| ((scaled[d] + shift).floor() as usize).min(n - 1));
            out.push(base + k * self.per_tiling() + t[1] * n + t[0], 1.0);
        }
    }
}

/// Uniform grid aggregation of a 2-D box.
#[derive(Clone, Debug)]
pub struct GridAggregation {
    lo: [f64; 2],
    hi: [f64; 2],
    cells: [usize; 2],
    num_actions: usize,
}

impl GridAggregation {
    /// Cells of side `cell_size` covering `[lo, hi]`.
    pub fn with_cell_size(lo: [f64; 2], hi: [f64; 2], cell_size: [f64; 2], num_actions: usize) -> Self {
        let cells = std::array::from_fn(|d| (((hi[d] - lo[d]) / cell_size[d]).ceil() as usize).max(1));
        GridAggregation { lo, hi, cells, num_actions }
    }

    fn cell(&self, s: &Observation) -> usize {
        let idx: [usize; 2] = std::array::from_fn(|d| {
            let u = (s.0[d].clamp(self.lo[d], self.hi[d]) - self.lo[d]) / (self.hi[d] - self.lo[d]);
            ((u * self.cells[d] as f64).floor() as usize).min(self.cells[d] - 1)
        });
        idx[1] * self.cells[0] + idx[0]
    }

    fn num_cells(&self) -> usize {
        self.cells[0] * self.cells[1]
    }
}

impl Featurizer for GridAggregation {
    fn dim(&self) -> usize {
        self.num_cells() * self.num_actions
    }

    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn active_count(&self) -> usize {
        1
    }

    fn featurize_into(&self, s: &Observation, a: ActionId, out: &mut SparseFeatures) {
        out.clear();
        out.dim = self.dim();
        out.push(a.0 * self.num_cells() + self.cell(s), 1.0);
    }
}

/// Aggregation along line segments: each segment is cut into `pieces` equal
/// arc-length cells and a point belongs to the nearest segment.
#[derive(Clone, Debug)]
pub struct SegmentAggregation {
    segments: Vec<([f64; 2], [f64; 2])>,
    pieces: usize,
    num_actions: usize,
}

impl SegmentAggregation {
    pub fn new(segments: Vec<([f64; 2], [f64; 2])>, pieces: usize, num_actions: usize) -> Self {
        SegmentAggregation { segments, pieces, num_actions }
    }

    fn num_cells(&self) -> usize {
        self.segments.len() * self.pieces
    }

    fn cell(&self, s: &Observation) -> usize {
        let mut best = (f64::INFINITY, 0usize, 0.0f64);
        for (k, (p0, p1)) in self.segments.iter().enumerate() {
            let d = [p1[0] - p0[0], p1[1] - p0[1]];
            let len2 = d[0] * d[0] + d[1] * d[1];
            let t = (((s.x() - p0[0]) * d[0] + (s.y() - p0[1]) * d[1]) / len2).clamp(0.0, 1.0);
            let q = [p0[0] + t * d[0], p0[1] + t * d[1]];
            let dist = (s.x() - q[0]).hypot(s.y() - q[1]);
            if dist < best.0 {
                best = (dist, k, t);
            }
        }
        let piece = ((best.2 * self.pieces as f64).floor() as usize).min(self.pieces - 1);
        best.1 * self.pieces + piece
    }
}

impl Featurizer for SegmentAggregation {
    fn dim(&self) -> usize {
        self.num_cells() * self.num_actions
    }

    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn active_count(&self) -> usize {
        1
    }

    fn featurize_into(&self, s: &Observation, a: ActionId, out: &mut SparseFeatures) {
        out.clear();
        out.dim = self.dim();
        out.push(a.0 * self.num_cells() + self.cell(s), 1.0);
    }
}

/// Reward features `x(s, a, s')`.
#[derive(Clone)]
pub enum RewardFeatureMap {
    /// One-hot over goals: index `i` is active iff the transition entered goal `i`.
    GoalIndicator { num_goals: usize },
    /// A state-action encoding of `(s, a)`.
    StateAction(Arc<dyn Featurizer>),
}

impl std::fmt::Debug for RewardFeatureMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RewardFeatureMap::GoalIndicator { num_goals } => write!(f, "GoalIndicator({num_goals})"),
            RewardFeatureMap::StateAction(e) => write!(f, "StateAction(dim={})", e.dim()),
        }
    }
}

impl RewardFeatureMap {
    pub fn dim(&self) -> usize {
        match self {
            RewardFeatureMap::GoalIndicator { num_goals } => *num_goals,
            RewardFeatureMap::StateAction(e) => e.dim(),
        }
    }

    pub fn features_into(&self, s: &Observation, a: ActionId, goal_hit: Option<usize>, out: &mut SparseFeatures) {
        match self {
            RewardFeatureMap::GoalIndicator { num_goals } => {
                out.clear();
                out.dim = *num_goals;
                if let Some(g) = goal_hit {
                    out.push(g, 1.0);
                }
            }
            RewardFeatureMap::StateAction(e) => e.featurize_into(s, a, out),
        }
    }

    pub fn features(&self, s: &Observation, a: ActionId, goal_hit: Option<usize>) -> SparseFeatures {
        let mut out = SparseFeatures::with_dim(self.dim());
        self.features_into(s, a, goal_hit, &mut out);
        out
    }
}
