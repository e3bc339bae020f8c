use std::collections::VecDeque;
use std::sync::Arc;

use super::{Dynamics, EnvId};
use crate::domain::{ActionId, Observation, Policy, RngStream};
use crate::features::TabularIndexer;

const WIDTH: usize = 9;
const HEIGHT: usize = 7;
const START: (usize, usize) = (4, 0);
/// Goal cells as `(column, row)`: top-left, lower-left, top-right, lower-right.
const GOALS: [(usize, usize); 4] = [(0, 6), (0, 2), (8, 6), (8, 2)];

/// Grid TMaze: a main hallway rising from the start into a crossbar, with a
/// side hallway at each end of the crossbar whose two tips are goals.
///
/// ```text
///   row 6  G . . . . . . . G
///   row 5  |               |
///   row 4  + - - - + - - - +
///   row 3  |       |       |
///   row 2  G       |       G
///   row 1          |
///   row 0          S
/// ```
#[derive(Clone, Debug)]
pub struct TabularTMaze {
    lookup: Vec<Option<usize>>,
    cells: Vec<(usize, usize)>,
    /// `dist[g][cell]`: shortest path length from `cell` to goal `g`.
    dist: Vec<Vec<u32>>,
}

impl Default for TabularTMaze {
    fn default() -> Self {
        Self::new()
    }
}

impl TabularTMaze {
    pub fn new() -> Self {
        let open = |c: usize, r: usize| r == 4 || (c == 4 && r < 4) || ((c == 0 || c == WIDTH - 1) && (2..=6).contains(&r));
        let mut lookup = vec![None; WIDTH * HEIGHT];
        let mut cells = Vec::new();
        for r in 0..HEIGHT {
            for c in 0..WIDTH {
                if open(c, r) {
                    lookup[r * WIDTH + c] = Some(cells.len());
                    cells.push((c, r));
                }
            }
        }
        let mut maze = TabularTMaze { lookup, cells, dist: Vec::new() };
        maze.dist = GOALS.iter().map(|&g| maze.bfs(maze.cell_at(g.0, g.1).unwrap())).collect();
        maze
    }

    fn bfs(&self, from: usize) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.cells.len()];
        dist[from] = 0;
        let mut queue = VecDeque::from([from]);
        while let Some(c) = queue.pop_front() {
            for a in 0..4 {
                let n = self.move_cell(c, ActionId(a));
                if dist[n] == u32::MAX {
                    dist[n] = dist[c] + 1;
                    queue.push_back(n);
                }
            }
        }
        dist
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    fn cell_at(&self, c: usize, r: usize) -> Option<usize> {
        if c < WIDTH && r < HEIGHT {
            self.lookup[r * WIDTH + c]
        } else {
            None
        }
    }

    pub fn cell_of(&self, s: &Observation) -> usize {
        self.cell_at(s.x().round() as usize, s.y().round() as usize).expect("observation is not an open cell")
    }

    pub fn cell_obs(&self, cell: usize) -> Observation {
        let (c, r) = self.cells[cell];
        Observation::new(c as f64, r as f64)
    }

    pub fn start_cell(&self) -> usize {
        self.cell_at(START.0, START.1).unwrap()
    }

    pub fn goal_cell(&self, g: usize) -> usize {
        self.cell_at(GOALS[g].0, GOALS[g].1).unwrap()
    }

    pub fn goal_of_cell(&self, cell: usize) -> Option<usize> {
        (0..GOALS.len()).find(|&g| self.goal_cell(g) == cell)
    }

    /// Deterministic move; blocked moves leave the agent in place.
    /// Actions: 0 up, 1 down, 2 left, 3 right.
    pub fn move_cell(&self, cell: usize, a: ActionId) -> usize {
        let (c, r) = self.cells[cell];
        let (nc, nr) = match a.0 {
            0 => (c as isize, r as isize + 1),
            1 => (c as isize, r as isize - 1),
            2 => (c as isize - 1, r as isize),
            _ => (c as isize + 1, r as isize),
        };
        if nc < 0 || nr < 0 {
            return cell;
        }
        self.cell_at(nc as usize, nr as usize).unwrap_or(cell)
    }

    pub fn distance(&self, goal: usize, cell: usize) -> u32 {
        self.dist[goal][cell]
    }

    pub fn indexer(&self, num_actions: usize) -> TabularIndexer {
        TabularIndexer::new(WIDTH, self.lookup.clone(), num_actions)
    }
}

impl Dynamics for TabularTMaze {
    fn id(&self) -> EnvId {
        EnvId::TabularTmaze
    }

    fn num_actions(&self) -> usize {
        4
    }

    fn num_goals(&self) -> usize {
        4
    }

    fn reset(&self, _rng: &mut RngStream) -> Observation {
        self.cell_obs(self.start_cell())
    }

    fn advance(&self, s: &Observation, a: ActionId, _rng: &mut RngStream) -> Observation {
        self.cell_obs(self.move_cell(self.cell_of(s), a))
    }

    fn goal_at(&self, s: &Observation) -> Option<usize> {
        self.goal_of_cell(self.cell_of(s))
    }

    fn gvf_discount(&self) -> f64 {
        0.9
    }

    fn step_penalty(&self) -> f64 {
        -0.01
    }

    fn goal_distances(&self, s: &Observation) -> Option<Vec<f64>> {
        let cell = self.cell_of(s);
        Some((0..GOALS.len()).map(|g| self.distance(g, cell) as f64).collect())
    }
}

/// Shortest path to one goal, uniform over the actions that make progress.
#[derive(Clone, Debug)]
pub struct GridPathPolicy {
    maze: Arc<TabularTMaze>,
    goal: usize,
}

impl GridPathPolicy {
    pub fn new(maze: Arc<TabularTMaze>, goal: usize) -> Self {
        GridPathPolicy { maze, goal }
    }
}

impl Policy for GridPathPolicy {
    fn num_actions(&self) -> usize {
        4
    }

    fn probs(&self, s: &Observation, out: &mut [f64]) {
        let cell = self.maze.cell_of(s);
        let here = self.maze.distance(self.goal, cell);
        let mut count = 0;
        for a in 0..4 {
            let n = self.maze.move_cell(cell, ActionId(a));
            let good = here > 0 && self.maze.distance(self.goal, n) + 1 == here;
            out[a] = if good { 1.0 } else { 0.0 };
            count += good as usize;
        }
        if count == 0 {
            out[..4].iter_mut().for_each(|o| *o = 0.25);
        } else {
            out[..4].iter_mut().for_each(|o| *o /= count as f64);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let m = TabularTMaze::new();
        assert_eq!(m.num_cells(), 21);
        for g in 0..4 {
            assert_eq!(m.distance(g, m.start_cell()), 10);
        }
    }

    #[test]
    fn wall_moves_are_noops() {
        let m = TabularTMaze::new();
        let s = m.start_cell();
        assert_eq!(m.move_cell(s, ActionId(1)), s);
        assert_eq!(m.move_cell(s, ActionId(2)), s);
        assert_eq!(m.move_cell(s, ActionId(3)), s);
        assert_ne!(m.move_cell(s, ActionId(0)), s);
    }

    #[test]
    fn path_policies_reach_their_goal() {
        let m = Arc::new(TabularTMaze::new());
        let mut rng = RngStream::new(0, 0);
        for g in 0..4 {
            let p = GridPathPolicy::new(m.clone(), g);
            for start in 0..m.num_cells() {
                if m.goal_of_cell(start).is_some() {
                    continue;
                }
                let mut c = start;
                let mut steps = 0;
                while m.goal_of_cell(c).is_none() {
                    let a = p.sample(&m.cell_obs(c), &mut rng);
                    c = m.move_cell(c, a);
                    steps += 1;
                    assert!(steps <= 20);
                }
                assert_eq!(m.goal_of_cell(c), Some(g));
                assert_eq!(steps, m.distance(g, start));
            }
        }
    }

    #[test]
    fn policy_probabilities_sum_to_one() {
        let m = Arc::new(TabularTMaze::new());
        let mut out = [0.0; 4];
        for g in 0..4 {
            let p = GridPathPolicy::new(m.clone(), g);
            for c in 0..m.num_cells() {
                p.probs(&m.cell_obs(c), &mut out);
                assert!((out.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                assert!(out.iter().all(|&v| v >= 0.0));
            }
        }
    }
}
