//! Windy and stormy gridworlds on a 7-row by 10-column grid.
//!
//! Positions are (row, col), 1-based, row 1 at the top; "upward" wind
//! decrements the row. Moves that would leave the grid clamp to the edge.
//! The goal is absorbing with reward 0; every other step costs -1 (or -10
//! when landing in a puddle in the stormy variant).

use crate::mdp::{ActionId, DiscreteDistribution, Mdp, NoiseOutcome, StateId};

pub const WIDTH: usize = 10;
pub const HEIGHT: usize = 7;

/// Upward wind intensity per column (1-based columns 1..=10).
const COLUMN_WIND: [i32; WIDTH] = [0, 0, 0, 1, 1, 1, 2, 2, 1, 0];
/// Horizontal wind intensity per row, top to bottom (stormy only).
const ROW_WIND: [i32; HEIGHT] = [0, 0, 1, 1, 1, 1, 0];

pub const UP: ActionId = ActionId(0);
pub const RIGHT: ActionId = ActionId(1);
pub const DOWN: ActionId = ActionId(2);
pub const LEFT: ActionId = ActionId(3);

/// 1-based grid position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridPos {
    pub row: usize,
    pub col: usize,
}

impl GridPos {
    pub fn state(self) -> StateId {
        StateId((self.row - 1) * WIDTH + (self.col - 1))
    }

    pub fn from_state(s: StateId) -> Self {
        GridPos {
            row: s.0 / WIDTH + 1,
            col: s.0 % WIDTH + 1,
        }
    }

    fn shifted(self, drow: i32, dcol: i32) -> Self {
        let row = (self.row as i32 + drow).clamp(1, HEIGHT as i32) as usize;
        let col = (self.col as i32 + dcol).clamp(1, WIDTH as i32) as usize;
        GridPos { row, col }
    }

    fn step(self, a: ActionId) -> Self {
        match a {
            UP => self.shifted(-1, 0),
            RIGHT => self.shifted(0, 1),
            DOWN => self.shifted(1, 0),
            LEFT => self.shifted(0, -1),
            _ => unreachable!("invalid action"),
        }
    }
}

/// Realized wind intensity: base column/row value plus a `{-1, 0, 1}` shock,
/// clamped at zero. Zero-wind columns and rows stay deterministic.
fn realized_intensity(base: i32, delta: i32) -> i32 {
    if base > 0 {
        (base + delta).max(0)
    } else {
        0
    }
}

pub struct WindyGridworld {
    gamma: f64,
    noise: DiscreteDistribution,
    start: GridPos,
    goal: GridPos,
}

pub fn make_windy_gridworld(gamma: Option<f64>) -> WindyGridworld {
    WindyGridworld {
        gamma: gamma.unwrap_or(0.9),
        // codes 0, 1, 2 decode to wind shocks -1, 0, +1
        noise: DiscreteDistribution::uniform(3),
        start: GridPos { row: 3, col: 1 },
        goal: GridPos { row: 3, col: 8 },
    }
}

impl WindyGridworld {
    fn advance(&self, s: StateId, a: ActionId, w: NoiseOutcome) -> StateId {
        let pos = GridPos::from_state(s);
        let delta = w.0 as i32 - 1;
        // wind strength comes from the column occupied before the move
        let shift = realized_intensity(COLUMN_WIND[pos.col - 1], delta);
        pos.step(a).shifted(-shift, 0).state()
    }
}

impl Mdp for WindyGridworld {
    fn name(&self) -> &str {
        "wg"
    }

    fn state_count(&self) -> usize {
        WIDTH * HEIGHT
    }

    fn action_count(&self) -> usize {
        4
    }

    fn discount(&self) -> f64 {
        self.gamma
    }

    fn reward_bound(&self) -> f64 {
        1.0
    }

    fn start_state(&self) -> StateId {
        self.start.state()
    }

    fn is_terminal(&self, s: StateId) -> bool {
        s == self.goal.state()
    }

    fn next_state(&self, s: StateId, a: ActionId, w: NoiseOutcome) -> StateId {
        if self.is_terminal(s) {
            s
        } else {
            self.advance(s, a, w)
        }
    }

    fn realized_reward(&self, s: StateId, _a: ActionId, _w: NoiseOutcome) -> f64 {
        if self.is_terminal(s) {
            0.0
        } else {
            -1.0
        }
    }

    fn expected_reward(&self, s: StateId, a: ActionId) -> f64 {
        self.realized_reward(s, a, NoiseOutcome(0))
    }

    fn noise_support(&self) -> Option<&DiscreteDistribution> {
        Some(&self.noise)
    }
}

/// Knobs for the ambiguous parts of the stormy dynamics.
#[derive(Debug, Clone, Copy)]
pub struct StormyConfig {
    /// Probability that the wind blows upward; the remaining mass splits
    /// evenly over the other three directions.
    pub upward_prob: f64,
    /// Marginal probability that it rains somewhere this step.
    pub rain_prob: f64,
}

impl Default for StormyConfig {
    fn default() -> Self {
        StormyConfig {
            upward_prob: 0.5,
            rain_prob: 0.5,
        }
    }
}

/// Cells eligible for rain: more than two cells away from every edge.
fn rain_cells() -> Vec<GridPos> {
    let mut cells = Vec::new();
    for row in 1..=HEIGHT {
        for col in 1..=WIDTH {
            if row > 3 && row <= HEIGHT - 3 && col > 3 && col <= WIDTH - 3 {
                cells.push(GridPos { row, col });
            }
        }
    }
    cells
}

pub struct StormyGridworld {
    gamma: f64,
    noise: DiscreteDistribution,
    rain: Vec<GridPos>,
    start: GridPos,
    goal: GridPos,
}

/// Stormy gridworld: multi-directional wind plus transient rain puddles.
///
/// Per step the noise carries a wind direction (upward with probability 1/2
/// by default, the other three directions 1/6 each), an intensity shock in
/// `{-1, 0, 1}`, and a rain outcome (no rain, or one eligible central cell).
/// Rain wets the drawn cell and its eight neighbours for this step only;
/// landing on a wet cell costs -10 instead of -1. Vertical wind uses the
/// per-column intensities, horizontal wind the per-row ones; the shift
/// applies after the action move, with clamping after each displacement.
pub fn make_stormy_gridworld(gamma: Option<f64>, config: StormyConfig) -> StormyGridworld {
    let rain = rain_cells();
    let dir_probs = [
        config.upward_prob,
        (1.0 - config.upward_prob) / 3.0,
        (1.0 - config.upward_prob) / 3.0,
        (1.0 - config.upward_prob) / 3.0,
    ];
    let rain_outcomes = rain.len() + 1; // index 0 = dry
    let mut outcomes = Vec::new();
    let mut probs = Vec::new();
    for dir in 0..4u64 {
        for delta in 0..3u64 {
            for rain_code in 0..rain_outcomes as u64 {
                outcomes.push(NoiseOutcome(
                    dir * 3 * rain_outcomes as u64 + delta * rain_outcomes as u64 + rain_code,
                ));
                let p_rain = if rain_code == 0 {
                    1.0 - config.rain_prob
                } else {
                    config.rain_prob / rain.len() as f64
                };
                probs.push(dir_probs[dir as usize] / 3.0 * p_rain);
            }
        }
    }
    StormyGridworld {
        gamma: gamma.unwrap_or(0.95),
        noise: DiscreteDistribution::new(outcomes, probs).unwrap(),
        rain,
        start: GridPos { row: 3, col: 1 },
        goal: GridPos { row: 3, col: 10 },
    }
}

struct StormyNoise {
    dir: usize, // 0 up, 1 right, 2 down, 3 left
    delta: i32,
    rain: Option<usize>, // index into rain cells
}

impl StormyGridworld {
    fn decode(&self, w: NoiseOutcome) -> StormyNoise {
        let rain_outcomes = (self.rain.len() + 1) as u64;
        let rain_code = w.0 % rain_outcomes;
        let delta = (w.0 / rain_outcomes) % 3;
        let dir = w.0 / (3 * rain_outcomes);
        StormyNoise {
            dir: dir as usize,
            delta: delta as i32 - 1,
            rain: if rain_code == 0 {
                None
            } else {
                Some(rain_code as usize - 1)
            },
        }
    }

    fn advance(&self, s: StateId, a: ActionId, n: &StormyNoise) -> GridPos {
        let pos = GridPos::from_state(s);
        let moved = pos.step(a);
        // intensity keyed to the position occupied before the move
        match n.dir {
            0 => moved.shifted(-realized_intensity(COLUMN_WIND[pos.col - 1], n.delta), 0),
            2 => moved.shifted(realized_intensity(COLUMN_WIND[pos.col - 1], n.delta), 0),
            1 => moved.shifted(0, realized_intensity(ROW_WIND[pos.row - 1], n.delta)),
            3 => moved.shifted(0, -realized_intensity(ROW_WIND[pos.row - 1], n.delta)),
            _ => unreachable!(),
        }
    }

    fn is_wet(&self, pos: GridPos, n: &StormyNoise) -> bool {
        match n.rain {
            None => false,
            Some(i) => {
                let c = self.rain[i];
                pos.row.abs_diff(c.row) <= 1 && pos.col.abs_diff(c.col) <= 1
            }
        }
    }
}

impl Mdp for StormyGridworld {
    fn name(&self) -> &str {
        "sg"
    }

    fn state_count(&self) -> usize {
        WIDTH * HEIGHT
    }

    fn action_count(&self) -> usize {
        4
    }

    fn discount(&self) -> f64 {
        self.gamma
    }

    fn reward_bound(&self) -> f64 {
        10.0
    }

    fn start_state(&self) -> StateId {
        self.start.state()
    }

    fn is_terminal(&self, s: StateId) -> bool {
        s == self.goal.state()
    }

    fn next_state(&self, s: StateId, a: ActionId, w: NoiseOutcome) -> StateId {
        if self.is_terminal(s) {
            s
        } else {
            self.advance(s, a, &self.decode(w)).state()
        }
    }

    fn realized_reward(&self, s: StateId, a: ActionId, w: NoiseOutcome) -> f64 {
        if self.is_terminal(s) {
            return 0.0;
        }
        let n = self.decode(w);
        if self.is_wet(self.advance(s, a, &n), &n) {
            -10.0
        } else {
            -1.0
        }
    }

    fn expected_reward(&self, s: StateId, a: ActionId) -> f64 {
        if self.is_terminal(s) {
            return 0.0;
        }
        self.noise
            .iter()
            .map(|(w, p)| p * self.realized_reward(s, a, w))
            .sum()
    }

    fn noise_support(&self) -> Option<&DiscreteDistribution> {
        Some(&self.noise)
    }
}
