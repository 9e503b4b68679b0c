//! 2-D point-mass navigation with wall segments.
//!
//! The agent's state is its `(x, y)` position and the action a velocity
//! vector with norm clipped to √2. A move whose path crosses a wall is
//! cancelled (the agent stays put) and penalized. The reward sums a
//! constant step penalty, the wall penalty when a collision happened, the
//! negative Euclidean distance to the goal, and a bonus on entering the
//! goal disc, which ends the episode.
//!
//! Two named layouts:
//! - `corridor`: a 10×2 corridor, start at one end, goal disc at the other.
//! - `room`: a 10×10 room split by an interior wall with a single gap,
//!   start and goal in opposite corners.

use super::{clip_norm, Env, EnvStep};
use crate::rng::SeededRng;

/// Axis-aligned or general wall segment from `a` to `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: (f64, f64),
    pub b: (f64, f64),
}

impl Segment {
    pub fn new(ax: f64, ay: f64, bx: f64, by: f64) -> Self {
        Self {
            a: (ax, ay),
            b: (bx, by),
        }
    }

    /// Distance from a point to this segment.
    pub fn distance_to(&self, p: (f64, f64)) -> f64 {
        let (dx, dy) = (self.b.0 - self.a.0, self.b.1 - self.a.1);
        let len2 = dx * dx + dy * dy;
        let t = if len2 == 0.0 {
            0.0
        } else {
            (((p.0 - self.a.0) * dx + (p.1 - self.a.1) * dy) / len2).clamp(0.0, 1.0)
        };
        let (cx, cy) = (self.a.0 + t * dx, self.a.1 + t * dy);
        ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
    }
}

fn cross(ox: f64, oy: f64, ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)
}

/// Whether segments `p0→p1` and `q0→q1` intersect (inclusive of touching).
fn segments_intersect(p0: (f64, f64), p1: (f64, f64), q0: (f64, f64), q1: (f64, f64)) -> bool {
    let d1 = cross(q0.0, q0.1, q1.0, q1.1, p0.0, p0.1);
    let d2 = cross(q0.0, q0.1, q1.0, q1.1, p1.0, p1.1);
    let d3 = cross(p0.0, p0.1, p1.0, p1.1, q0.0, q0.1);
    let d4 = cross(p0.0, p0.1, p1.0, p1.1, q1.0, q1.1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |d: f64, a: (f64, f64), b: (f64, f64), p: (f64, f64)| {
        d == 0.0
            && p.0 >= a.0.min(b.0)
            && p.0 <= a.0.max(b.0)
            && p.1 >= a.1.min(b.1)
            && p.1 <= a.1.max(b.1)
    };
    on(d1, q0, q1, p0) || on(d2, q0, q1, p1) || on(d3, p0, p1, q0) || on(d4, p0, p1, q1)
}

#[derive(Debug, Clone)]
pub struct GridWorld2D {
    pub walls: Vec<Segment>,
    pub start: (f64, f64),
    pub goal_center: (f64, f64),
    pub goal_radius: f64,
    pub step_penalty: f64,
    pub wall_penalty: f64,
    pub goal_bonus: f64,
    pub horizon: usize,
    label: String,
    pos: (f64, f64),
    t: usize,
    done: bool,
}

/// Buffer distance: ending a move this close to a wall counts as a hit.
const WALL_BUFFER: f64 = 1e-9;

impl GridWorld2D {
    pub fn new(
        label: &str,
        walls: Vec<Segment>,
        start: (f64, f64),
        goal_center: (f64, f64),
        goal_radius: f64,
        horizon: usize,
    ) -> Self {
        Self {
            walls,
            start,
            goal_center,
            goal_radius,
            step_penalty: -0.1,
            wall_penalty: -1.0,
            goal_bonus: 10.0,
            horizon,
            label: label.to_string(),
            pos: start,
            t: 0,
            done: false,
        }
    }

    /// 10×2 corridor: start at (1,1), goal disc of radius 0.5 at (9,1).
    pub fn corridor() -> Self {
        let walls = vec![
            Segment::new(0.0, 0.0, 10.0, 0.0),
            Segment::new(10.0, 0.0, 10.0, 2.0),
            Segment::new(10.0, 2.0, 0.0, 2.0),
            Segment::new(0.0, 2.0, 0.0, 0.0),
        ];
        Self::new("corridor", walls, (1.0, 1.0), (9.0, 1.0), 0.5, 300)
    }

    /// 10×10 room with an interior wall at x = 5 rising from the floor to
    /// y = 7, leaving a single gap at the top; start (1,1), goal disc of
    /// radius 0.5 at (9,9).
    pub fn room() -> Self {
        let walls = vec![
            Segment::new(0.0, 0.0, 10.0, 0.0),
            Segment::new(10.0, 0.0, 10.0, 10.0),
            Segment::new(10.0, 10.0, 0.0, 10.0),
            Segment::new(0.0, 10.0, 0.0, 0.0),
            Segment::new(5.0, 0.0, 5.0, 7.0),
        ];
        Self::new("room", walls, (1.0, 1.0), (9.0, 9.0), 0.5, 300)
    }

    pub fn in_goal(&self, p: (f64, f64)) -> bool {
        let (dx, dy) = (p.0 - self.goal_center.0, p.1 - self.goal_center.1);
        (dx * dx + dy * dy).sqrt() <= self.goal_radius
    }

    fn blocked(&self, from: (f64, f64), to: (f64, f64)) -> bool {
        self.walls.iter().any(|w| {
            segments_intersect(from, to, w.a, w.b) || w.distance_to(to) < WALL_BUFFER
        })
    }

    /// Pure transition from an explicit state; the environment only
    /// supplies geometry and reward constants.
    pub fn step_from(&self, state: (f64, f64), action: (f64, f64)) -> EnvStep {
        let mut a = [action.0, action.1];
        clip_norm(&mut a, std::f64::consts::SQRT_2);
        let proposed = (state.0 + a[0], state.1 + a[1]);
        let (next, hit) = if self.blocked(state, proposed) {
            (state, true)
        } else {
            (proposed, false)
        };
        let dist = ((next.0 - self.goal_center.0).powi(2) + (next.1 - self.goal_center.1).powi(2))
            .sqrt();
        let reached = self.in_goal(next);
        let mut reward = self.step_penalty - dist;
        if hit {
            reward += self.wall_penalty;
        }
        if reached {
            reward += self.goal_bonus;
        }
        EnvStep {
            next_state: vec![next.0, next.1],
            reward,
            terminal: reached,
        }
    }

    pub fn position(&self) -> (f64, f64) {
        self.pos
    }
}

impl Env for GridWorld2D {
    fn reset(&mut self, _rng: &mut SeededRng) -> Vec<f64> {
        self.pos = self.start;
        self.t = 0;
        self.done = false;
        vec![self.pos.0, self.pos.1]
    }

    fn step(&mut self, action: &[f64]) -> EnvStep {
        assert!(!self.done, "step called on a terminated episode");
        assert_eq!(action.len(), 2, "gridworld takes a 2-D velocity");
        let step = self.step_from(self.pos, (action[0], action[1]));
        self.pos = (step.next_state[0], step.next_state[1]);
        self.t += 1;
        self.done = step.terminal;
        step
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn action_bound(&self) -> f64 {
        1.0
    }

    fn name(&self) -> &str {
        &self.label
    }
}
