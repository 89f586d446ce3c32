use std::path::Path;

use rand::Rng;

use super::{ActionId, EnvRng, EnvSpec, Environment, EpisodeClock, Observation, ObservationSpace, StepResult};
use crate::error::{Error, Result};

const STANDARD_MAP: &str = include_str!("../../data/wmaze.txt");
const SMALL_MAP: &str = include_str!("../../data/wmaze_small.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Wall,
    Free,
    Goal,
    Start,
}

/// Grid layout of a W-Maze: `#` wall, `.` free, `G` goal, `S` start cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WMazeMap {
    rows: usize,
    cols: usize,
    cells: Vec<Cell>,
}

impl WMazeMap {
    pub const ROWS: usize = 7;
    pub const COLS: usize = 11;

    /// Parses a map that must be exactly 7 rows by 11 columns.
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_shape(text, Self::ROWS, Self::COLS)
    }

    pub fn parse_with_shape(text: &str, rows: usize, cols: usize) -> Result<Self> {
        let lines: Vec<&str> = text.lines().map(str::trim_end).filter(|l| !l.is_empty()).collect();
        if lines.len() != rows {
            return Err(Error::parse("map", format!("expected {rows} rows, found {}", lines.len())));
        }
        let mut cells = Vec::with_capacity(rows * cols);
        for (r, line) in lines.iter().enumerate() {
            if line.chars().count() != cols {
                return Err(Error::parse(
                    format!("map row {r}"),
                    format!("expected {cols} columns, found {}", line.chars().count()),
                ));
            }
            for (c, ch) in line.chars().enumerate() {
                cells.push(match ch {
                    '#' => Cell::Wall,
                    '.' => Cell::Free,
                    'G' => Cell::Goal,
                    'S' => Cell::Start,
                    other => {
                        return Err(Error::parse(
                            format!("map row {r} col {c}"),
                            format!("unexpected character {other:?}"),
                        ))
                    }
                });
            }
        }
        let map = Self { rows, cols, cells };
        if map.goal_states().is_empty() {
            return Err(Error::parse("map", "no goal cell"));
        }
        if map.start_states().is_empty() {
            return Err(Error::parse("map", "no start cell"));
        }
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn standard() -> Self {
        Self::parse(STANDARD_MAP).expect("checked-in map is valid")
    }

    /// The reduced 3x5 layout used for exact oracle checks at larger delays.
    pub fn small() -> Self {
        Self::parse_with_shape(SMALL_MAP, 3, 5).expect("checked-in map is valid")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn state_count(&self) -> usize {
        self.cells.len()
    }

    pub fn cell(&self, state: usize) -> Cell {
        self.cells[state]
    }

    pub fn is_goal(&self, state: usize) -> bool {
        self.cells[state] == Cell::Goal
    }

    pub fn start_states(&self) -> Vec<usize> {
        self.states_where(Cell::Start)
    }

    pub fn goal_states(&self) -> Vec<usize> {
        self.states_where(Cell::Goal)
    }

    fn states_where(&self, kind: Cell) -> Vec<usize> {
        (0..self.cells.len()).filter(|&s| self.cells[s] == kind).collect()
    }

    /// Deterministic successor: UP, DOWN, LEFT, RIGHT for actions 0..4.
    /// Moves into walls or off the grid leave the agent in place.
    pub fn successor(&self, state: usize, action: usize) -> usize {
        let (r, c) = (state / self.cols, state % self.cols);
        let (nr, nc) = match action {
            0 => (r.wrapping_sub(1), c),
            1 => (r + 1, c),
            2 => (r, c.wrapping_sub(1)),
            3 => (r, c + 1),
            _ => panic!("W-Maze action {action} out of range"),
        };
        if nr >= self.rows || nc >= self.cols {
            return state;
        }
        let next = nr * self.cols + nc;
        if self.cells[next] == Cell::Wall {
            state
        } else {
            next
        }
    }

    /// Reward for entering `next`.
    pub fn reward(&self, next: usize) -> f64 {
        if self.is_goal(next) {
            WMaze::GOAL_REWARD
        } else {
            WMaze::STEP_REWARD
        }
    }
}

/// Grid world with four moves; +10 on reaching a goal, -1 per other step.
#[derive(Debug, Clone)]
pub struct WMaze {
    map: WMazeMap,
    state: usize,
    spec: EnvSpec,
    clock: EpisodeClock,
}

impl WMaze {
    pub const GOAL_REWARD: f64 = 10.0;
    pub const STEP_REWARD: f64 = -1.0;
    pub const HORIZON: usize = 400;

    pub fn new(map: WMazeMap) -> Self {
        let spec = EnvSpec {
            name: "wmaze".into(),
            action_count: 4,
            observation: ObservationSpace::Discrete { states: map.state_count() },
            max_episode_steps: Self::HORIZON,
            optimal_return_hint: None,
        };
        Self {
            state: map.start_states()[0],
            map,
            spec,
            clock: EpisodeClock::default(),
        }
    }

    pub fn standard() -> Self {
        Self::new(WMazeMap::standard())
    }

    pub fn small() -> Self {
        Self::new(WMazeMap::small())
    }

    pub fn map(&self) -> &WMazeMap {
        &self.map
    }

    pub fn state(&self) -> usize {
        self.state
    }
}

impl Environment for WMaze {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut EnvRng) -> Observation {
        self.clock.reset();
        let starts = self.map.start_states();
        self.state = starts[rng.random_range(0..starts.len())];
        Observation::Discrete(self.state)
    }

    fn step(&mut self, action: ActionId, _rng: &mut EnvRng) -> Result<StepResult> {
        let a = self.clock.check(&self.spec, action)?;
        let next = self.map.successor(self.state, a);
        self.state = next;
        let terminal = self.map.is_goal(next);
        let truncated = self.clock.finish(&self.spec, terminal);
        Ok(StepResult {
            observation: Observation::Discrete(next),
            reward: self.map.reward(next),
            terminal,
            truncated,
        })
    }

    fn box_clone(&self) -> Box<dyn Environment> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::rng_from_seed;

    #[test]
    fn starts_on_bottom_row() {
        let mut env = WMaze::standard();
        for seed in 0..50 {
            let obs = env.reset(&mut rng_from_seed(seed));
            let s = obs.as_discrete().unwrap();
            assert_eq!(s / WMazeMap::COLS, WMazeMap::ROWS - 1);
        }
    }

    #[test]
    fn reaching_goal_pays_ten_and_terminates() {
        let mut env = WMaze::standard();
        let mut rng = rng_from_seed(0);
        env.reset(&mut rng);
        // cell directly below the goal at (0, 5) is (1, 5), which is a wall in
        // the standard map; approach from the left instead.
        env.state = 4;
        let r = env.step(ActionId::new(3), &mut rng).unwrap();
        assert_eq!(r.observation, Observation::Discrete(5));
        assert_eq!(r.reward, 10.0);
        assert!(r.terminal && !r.truncated);
        assert!(env.step(ActionId::new(0), &mut rng).is_err());
    }

    #[test]
    fn walls_block_movement() {
        let map = WMazeMap::standard();
        // (1, 0) moving right hits the wall at (1, 1).
        assert_eq!(map.successor(11, 3), 11);
        // top-left corner moving up stays.
        assert_eq!(map.successor(0, 0), 0);
        assert_eq!(map.successor(0, 2), 0);
        assert_eq!(map.reward(11), -1.0);
    }

    #[test]
    fn rejects_malformed_maps() {
        assert!(WMazeMap::parse("G..\nS..").is_err());
        let mut bad = STANDARD_MAP.replace('G', ".");
        assert!(WMazeMap::parse(&bad).is_err());
        bad = STANDARD_MAP.replacen('.', "x", 1);
        assert!(WMazeMap::parse(&bad).is_err());
    }

    #[test]
    fn returns_are_bounded() {
        let mut env = WMaze::standard();
        let mut rng = rng_from_seed(3);
        for _ in 0..20 {
            env.reset(&mut rng);
            let mut ret = 0.0;
            loop {
                let a = ActionId::new(rng.random_range(0..4));
                let r = env.step(a, &mut rng).unwrap();
                ret += r.reward;
                if r.terminal || r.truncated {
                    break;
                }
            }
            assert!(ret <= 10.0 && ret >= -(WMaze::HORIZON as f64));
        }
    }
}
