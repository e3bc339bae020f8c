use rand::Rng;

use super::{Dynamics, EnvId};
use crate::domain::{ActionId, Observation, Policy, RngStream};
use crate::features::SegmentAggregation;

/// Half-width of junction and goal boxes.
pub(crate) const EPS: f64 = 0.04;
const STEP: f64 = 0.08;
const NOISE: f64 = 0.01;
const CROSSBAR_Y: f64 = 0.8;
const MAIN_X: f64 = 0.5;
/// Goal centers: top-left, lower-left, top-right, lower-right.
const GOALS: [[f64; 2]; 4] = [[0.0, 1.0], [0.0, 0.6], [1.0, 1.0], [1.0, 0.6]];

/// Vertical segments as `(x, y_lo, y_hi)`.
const VERTICAL: [(f64, f64, f64); 3] = [(MAIN_X, 0.0, CROSSBAR_Y), (0.0, 0.6, 1.0), (1.0, 0.6, 1.0)];

/// TMaze made of line segments in the unit square.
///
/// The main hallway runs up `x = 0.5` from `y = 0` to the crossbar at
/// `y = 0.8`; the crossbar spans `x` in `[0, 1]`; side hallways at `x = 0` and
/// `x = 1` span `y` in `[0.6, 1]`, with a goal box at each end.
#[derive(Clone, Debug, Default)]
pub struct ContinuousTMaze;

impl ContinuousTMaze {
    pub fn new() -> Self {
        ContinuousTMaze
    }

    /// Distance from `s` to the nearest hallway segment.
    pub fn distance_to_hallways(s: &Observation) -> f64 {
        let mut best = (s.y() - CROSSBAR_Y).abs() + (s.x() - s.x().clamp(0.0, 1.0)).abs();
        for &(x, lo, hi) in &VERTICAL {
            let dy = s.y() - s.y().clamp(lo, hi);
            best = best.min((s.x() - x).hypot(dy));
        }
        best
    }

    /// The seven pieces the behavior's reward features aggregate over, cut
    /// into thirds.
    pub fn reward_aggregation(num_actions: usize) -> SegmentAggregation {
        let segments = vec![
            ([MAIN_X, 0.0], [MAIN_X, CROSSBAR_Y]),
            ([MAIN_X, CROSSBAR_Y], [0.0, CROSSBAR_Y]),
            ([MAIN_X, CROSSBAR_Y], [1.0, CROSSBAR_Y]),
            ([0.0, CROSSBAR_Y], [0.0, 1.0]),
            ([0.0, CROSSBAR_Y], [0.0, 0.6]),
            ([1.0, CROSSBAR_Y], [1.0, 1.0]),
            ([1.0, CROSSBAR_Y], [1.0, 0.6]),
        ];
        SegmentAggregation::new(segments, 3, num_actions)
    }

    /// Evenly spaced points along every hallway, `per_unit` per unit length.
    pub fn hallway_points(per_unit: usize) -> Vec<Observation> {
        let mut pts = Vec::new();
        let h = 1.0 / per_unit as f64;
        let mut y = h / 2.0;
        while y < CROSSBAR_Y - EPS {
            pts.push(Observation::new(MAIN_X, y));
            y += h;
        }
        let mut x = h / 2.0;
        while x < 1.0 {
            if (x - MAIN_X).abs() > 1e-9 {
                pts.push(Observation::new(x, CROSSBAR_Y));
            }
            x += h;
        }
        for side in [0.0, 1.0] {
            let mut y = 0.6 + EPS + h / 2.0;
            while y < 1.0 - EPS {
                if (y - CROSSBAR_Y).abs() > EPS {
                    pts.push(Observation::new(side, y));
                }
                y += h;
            }
        }
        pts
    }
}

fn on_crossbar(s: &Observation) -> bool {
    (s.y() - CROSSBAR_Y).abs() <= EPS + 1e-12
}

impl Dynamics for ContinuousTMaze {
    fn id(&self) -> EnvId {
        EnvId::ContinuousTmaze
    }

    fn num_actions(&self) -> usize {
        4
    }

    fn num_goals(&self) -> usize {
        4
    }

    fn reset(&self, rng: &mut RngStream) -> Observation {
        Observation::new(MAIN_X, rng.random_range(0.0..=0.1))
    }

    fn advance(&self, s: &Observation, a: ActionId, rng: &mut RngStream) -> Observation {
        let len = STEP + rng.random_range(-NOISE..=NOISE);
        match a.0 {
            0 | 1 => {
                let dy = if a.0 == 0 { len } else { -len };
                for &(x, lo, hi) in &VERTICAL {
                    let within = (s.x() - x).abs() <= EPS + 1e-12 && s.y() >= lo - EPS - 1e-12 && s.y() <= hi + EPS + 1e-12;
                    if within {
                        let y = (s.y() + dy).clamp((lo - EPS).max(0.0), (hi + EPS).min(1.0));
                        return Observation::new(x, y);
                    }
                }
                *s
            }
            _ => {
                if !on_crossbar(s) {
                    return *s;
                }
                let dx = if a.0 == 2 { -len } else { len };
                Observation::new((s.x() + dx).clamp(0.0, 1.0), CROSSBAR_Y)
            }
        }
    }

    fn goal_at(&self, s: &Observation) -> Option<usize> {
        GOALS.iter().position(|g| (s.x() - g[0]).abs() <= EPS + 1e-12 && (s.y() - g[1]).abs() <= EPS + 1e-12)
    }

    fn gvf_discount(&self) -> f64 {
        0.9
    }

    fn step_penalty(&self) -> f64 {
        -0.01
    }

    fn goal_distances(&self, s: &Observation) -> Option<Vec<f64>> {
        Some((0..4).map(|g| hallway_distance(s, g)).collect())
    }
}

/// Path length along the hallways from `s` to the center of goal `g`.
fn hallway_distance(s: &Observation, g: usize) -> f64 {
    let [gx, gy] = GOALS[g];
    let to_goal_from_crossbar_end = (gy - CROSSBAR_Y).abs();
    if on_crossbar(s) {
        return (s.x() - gx).abs() + to_goal_from_crossbar_end;
    }
    if (s.x() - MAIN_X).abs() <= EPS {
        return (CROSSBAR_Y - s.y()) + (MAIN_X - gx).abs() + to_goal_from_crossbar_end;
    }
    let side = if s.x() < MAIN_X { 0.0 } else { 1.0 };
    if side == gx && (s.y() - CROSSBAR_Y).signum() == (gy - CROSSBAR_Y).signum() {
        (s.y() - gy).abs()
    } else {
        (s.y() - CROSSBAR_Y).abs() + (side - gx).abs() + to_goal_from_crossbar_end
    }
}

/// Shortest route along the hallways to one goal.
#[derive(Clone, Debug)]
pub struct HallwayPolicy {
    goal: usize,
}

impl HallwayPolicy {
    pub fn new(goal: usize) -> Self {
        HallwayPolicy { goal }
    }

    pub fn action(&self, s: &Observation) -> ActionId {
        let [gx, gy] = GOALS[self.goal];
        let up = ActionId(0);
        let down = ActionId(1);
        let toward_side = if gx < MAIN_X { ActionId(2) } else { ActionId(3) };
        if on_crossbar(s) {
            if (s.x() - gx).abs() <= EPS {
                return if gy > CROSSBAR_Y { up } else { down };
            }
            return toward_side;
        }
        if (s.x() - MAIN_X).abs() <= EPS {
            return up;
        }
        let side = if s.x() < MAIN_X { 0.0 } else { 1.0 };
        let target = if side == gx && (s.y() - CROSSBAR_Y).signum() == (gy - CROSSBAR_Y).signum() { gy } else { CROSSBAR_Y };
        if target > s.y() {
            up
        } else {
            down
        }
    }
}

impl Policy for HallwayPolicy {
    fn num_actions(&self) -> usize {
        4
    }

    fn probs(&self, s: &Observation, out: &mut [f64]) {
        out[..4].iter_mut().for_each(|o| *o = 0.0);
        out[self.action(s).0] = 1.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reset_on_start_segment() {
        let env = ContinuousTMaze::new();
        let mut rng = RngStream::new(1, 1);
        for _ in 0..10_000 {
            let s = env.reset(&mut rng);
            assert_eq!(s.x(), MAIN_X);
            assert!((0.0..=0.1).contains(&s.y()));
        }
    }

    #[test]
    fn displacement_within_noise_band() {
        let env = ContinuousTMaze::new();
        let mut rng = RngStream::new(2, 1);
        for _ in 0..100_000 {
            let s = Observation::new(MAIN_X, rng.random_range(0.2..0.6));
            let a = ActionId(rng.random_range(0..2));
            let n = env.advance(&s, a, &mut rng);
            let d = (n.y() - s.y()).abs();
            assert!((0.07 - 1e-12..=0.09 + 1e-12).contains(&d), "{d}");
        }
    }

    #[test]
    fn perpendicular_moves_are_noops() {
        let env = ContinuousTMaze::new();
        let mut rng = RngStream::new(0, 0);
        let s = Observation::new(MAIN_X, 0.3);
        assert_eq!(env.advance(&s, ActionId(2), &mut rng), s);
        assert_eq!(env.advance(&s, ActionId(3), &mut rng), s);
        let c = Observation::new(0.25, CROSSBAR_Y);
        assert_eq!(env.advance(&c, ActionId(0), &mut rng), c);
    }

    #[test]
    fn random_walk_stays_on_hallways() {
        let env = ContinuousTMaze::new();
        let mut rng = RngStream::new(7, 1);
        let mut s = env.reset(&mut rng);
        for _ in 0..1_000_000 {
            let a = ActionId(rng.random_range(0..4));
            s = env.advance(&s, a, &mut rng);
            assert!(ContinuousTMaze::distance_to_hallways(&s) <= EPS + 1e-9, "{s:?}");
            if env.goal_at(&s).is_some() {
                s = env.reset(&mut rng);
            }
        }
    }

    #[test]
    fn hallway_policies_reach_their_goal() {
        let env = ContinuousTMaze::new();
        let mut rng = RngStream::new(3, 1);
        for g in 0..4 {
            let p = HallwayPolicy::new(g);
            for _ in 0..200 {
                let mut s = env.reset(&mut rng);
                let mut steps = 0;
                let hit = loop {
                    s = env.advance(&s, p.action(&s), &mut rng);
                    steps += 1;
                    if let Some(h) = env.goal_at(&s) {
                        break h;
                    }
                    assert!(steps < 100, "goal {g} stuck at {s:?}");
                };
                assert_eq!(hit, g);
            }
        }
    }

    #[test]
    fn start_is_equidistant() {
        let env = ContinuousTMaze::new();
        let d = env.goal_distances(&Observation::new(MAIN_X, 0.05)).unwrap();
        for v in &d {
            assert!((v - d[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn reward_aggregation_dimension() {
        use crate::features::Featurizer;
        let agg = ContinuousTMaze::reward_aggregation(4);
        assert_eq!(agg.dim(), 84);
    }
}
