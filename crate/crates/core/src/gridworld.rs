//! Deterministic grid MDP.
//!
//! A [`GridSpec`] is a rectangle of cells with one start, one absorbing goal
//! and an optional set of obstacle cells. Moves that would leave the grid or
//! enter an obstacle are clamped: the agent stays where it is and receives the
//! wall reward.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_STEP_REWARD: f64 = 0.0;
pub const DEFAULT_WALL_REWARD: f64 = -1.0;
pub const DEFAULT_GOAL_REWARD: f64 = 50.0;

/// A grid cell, 0-based, row 0 at the top.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct State {
    pub row: usize,
    pub col: usize,
}

impl State {
    pub const fn new(row: usize, col: usize) -> Self {
        State { row, col }
    }

    pub fn manhattan(self, other: State) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }
}

impl From<[usize; 2]> for State {
    fn from([row, col]: [usize; 2]) -> Self {
        State { row, col }
    }
}

impl From<State> for [usize; 2] {
    fn from(s: State) -> Self {
        [s.row, s.col]
    }
}

impl From<(usize, usize)> for State {
    fn from((row, col): (usize, usize)) -> Self {
        State { row, col }
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// The four moves. The declaration order is the greedy tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum Action {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
}

impl Action {
    pub const COUNT: usize = 4;
    pub const ALL: [Action; Action::COUNT] =
        [Action::Up, Action::Down, Action::Left, Action::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }

    fn offset(self) -> (isize, isize) {
        match self {
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Left => (0, -1),
            Action::Right => (0, 1),
        }
    }
}

/// How ordinary (non-goal, non-clamped) moves are rewarded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardMode {
    /// Every ordinary move pays `step`.
    #[default]
    Flat,
    /// An ordinary move pays `step + 1` when it reduces the Manhattan
    /// distance to the goal and `step - 1` when it increases it.
    Graded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rewards {
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_wall")]
    pub wall: f64,
    #[serde(default = "default_goal")]
    pub goal: f64,
    #[serde(default)]
    pub mode: RewardMode,
}

fn default_step() -> f64 {
    DEFAULT_STEP_REWARD
}
fn default_wall() -> f64 {
    DEFAULT_WALL_REWARD
}
fn default_goal() -> f64 {
    DEFAULT_GOAL_REWARD
}
fn default_true() -> bool {
    true
}

impl Default for Rewards {
    fn default() -> Self {
        Rewards {
            step: DEFAULT_STEP_REWARD,
            wall: DEFAULT_WALL_REWARD,
            goal: DEFAULT_GOAL_REWARD,
            mode: RewardMode::Flat,
        }
    }
}

impl Rewards {
    pub fn flat(step: f64, wall: f64, goal: f64) -> Self {
        Rewards {
            step,
            wall,
            goal,
            mode: RewardMode::Flat,
        }
    }

    pub fn graded(step: f64, wall: f64, goal: f64) -> Self {
        Rewards {
            mode: RewardMode::Graded,
            ..Rewards::flat(step, wall, goal)
        }
    }
}

/// Unvalidated grid description, as read from or written to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDoc {
    pub width: usize,
    pub height: usize,
    pub start: State,
    pub goal: State,
    #[serde(default)]
    pub obstacles: Vec<State>,
    #[serde(default)]
    pub rewards: Rewards,
    /// When set, every free cell must be reachable from the start.
    #[serde(default = "default_true")]
    pub solvable: bool,
}

impl GridDoc {
    pub fn new(
        width: usize,
        height: usize,
        start: impl Into<State>,
        goal: impl Into<State>,
    ) -> Self {
        GridDoc {
            width,
            height,
            start: start.into(),
            goal: goal.into(),
            obstacles: Vec::new(),
            rewards: Rewards::default(),
            solvable: true,
        }
    }

    pub fn with_rewards(mut self, rewards: Rewards) -> Self {
        self.rewards = rewards;
        self
    }

    pub fn with_obstacles<I, S>(mut self, obstacles: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<State>,
    {
        self.obstacles = obstacles.into_iter().map(Into::into).collect();
        self
    }

    pub fn unsolvable(mut self) -> Self {
        self.solvable = false;
        self
    }

    pub fn build(self) -> Result<GridSpec> {
        GridSpec::try_from(self)
    }
}

/// A validated, immutable gridworld.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    width: usize,
    height: usize,
    start: State,
    goal: State,
    obstacles: BTreeSet<State>,
    rewards: Rewards,
    solvable: bool,
    /// Free cells in row-major order.
    states: Vec<State>,
    /// Cell (row * width + col) to position in `states`.
    index: Vec<Option<usize>>,
}

/// One experience tuple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: State,
    pub action: Action,
    pub reward: f64,
    pub next: State,
    pub terminal: bool,
}

impl TryFrom<GridDoc> for GridSpec {
    type Error = Error;

    fn try_from(doc: GridDoc) -> Result<Self> {
        if doc.width == 0 {
            return Err(Error::field("width", "must be positive"));
        }
        if doc.height == 0 {
            return Err(Error::field("height", "must be positive"));
        }
        let in_bounds = |s: State| s.row < doc.height && s.col < doc.width;
        if !in_bounds(doc.start) {
            return Err(Error::field(
                "start",
                format!("{} is outside the grid", doc.start),
            ));
        }
        if !in_bounds(doc.goal) {
            return Err(Error::field(
                "goal",
                format!("{} is outside the grid", doc.goal),
            ));
        }
        if doc.start == doc.goal {
            return Err(Error::field("goal", "coincides with start"));
        }
        let mut obstacles = BTreeSet::new();
        for &o in &doc.obstacles {
            if !in_bounds(o) {
                return Err(Error::field(
                    "obstacles",
                    format!("{o} is outside the grid"),
                ));
            }
            obstacles.insert(o);
        }
        if obstacles.contains(&doc.start) {
            return Err(Error::field("start", "lies on an obstacle"));
        }
        if obstacles.contains(&doc.goal) {
            return Err(Error::field("goal", "lies on an obstacle"));
        }
        for (field, v) in [
            ("rewards.step", doc.rewards.step),
            ("rewards.wall", doc.rewards.wall),
            ("rewards.goal", doc.rewards.goal),
        ] {
            if !v.is_finite() {
                return Err(Error::field(field, "must be finite"));
            }
        }

        let mut states = Vec::with_capacity(doc.width * doc.height - obstacles.len());
        let mut index = vec![None; doc.width * doc.height];
        for row in 0..doc.height {
            for col in 0..doc.width {
                let s = State::new(row, col);
                if !obstacles.contains(&s) {
                    index[row * doc.width + col] = Some(states.len());
                    states.push(s);
                }
            }
        }

        let spec = GridSpec {
            width: doc.width,
            height: doc.height,
            start: doc.start,
            goal: doc.goal,
            obstacles,
            rewards: doc.rewards,
            solvable: doc.solvable,
            states,
            index,
        };
        if spec.solvable {
            if let Some(cut_off) = spec.first_unreachable() {
                return Err(Error::field(
                    "obstacles",
                    format!("cell {cut_off} is unreachable from start"),
                ));
            }
        }
        Ok(spec)
    }
}

impl GridSpec {
    /// Obstacle-free grid with default rewards.
    pub fn open(
        width: usize,
        height: usize,
        start: impl Into<State>,
        goal: impl Into<State>,
    ) -> Result<Self> {
        GridDoc::new(width, height, start, goal).build()
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let doc: GridDoc = serde_json::from_str(json)?;
        doc.build()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("grid documents always serialize")
    }

    pub fn to_doc(&self) -> GridDoc {
        GridDoc {
            width: self.width,
            height: self.height,
            start: self.start,
            goal: self.goal,
            obstacles: self.obstacles.iter().copied().collect(),
            rewards: self.rewards,
            solvable: self.solvable,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn start(&self) -> State {
        self.start
    }

    pub fn goal(&self) -> State {
        self.goal
    }

    pub fn rewards(&self) -> &Rewards {
        &self.rewards
    }

    pub fn obstacles(&self) -> impl Iterator<Item = State> + '_ {
        self.obstacles.iter().copied()
    }

    pub fn is_obstacle(&self, s: State) -> bool {
        self.obstacles.contains(&s)
    }

    pub fn in_bounds(&self, s: State) -> bool {
        s.row < self.height && s.col < self.width
    }

    /// All free cells in row-major order.
    pub fn states(&self) -> &[State] {
        &self.states
    }

    /// Position of `s` in [`GridSpec::states`], `None` for obstacles and
    /// out-of-bounds cells.
    pub fn state_index(&self, s: State) -> Option<usize> {
        if !self.in_bounds(s) {
            return None;
        }
        self.index[s.row * self.width + s.col]
    }

    /// Smallest and largest reward `step` can emit.
    pub fn reward_bounds(&self) -> (f64, f64) {
        let r = &self.rewards;
        let (lo, hi) = match r.mode {
            RewardMode::Flat => (r.step, r.step),
            RewardMode::Graded => (r.step - 1.0, r.step + 1.0),
        };
        (lo.min(r.wall).min(r.goal), hi.max(r.wall).max(r.goal))
    }

    /// Where `a` leads from `s`, and whether the move was clamped.
    fn successor(&self, s: State, a: Action) -> (State, bool) {
        let (dr, dc) = a.offset();
        let row = s.row.checked_add_signed(dr);
        let col = s.col.checked_add_signed(dc);
        match (row, col) {
            (Some(row), Some(col)) => {
                let t = State::new(row, col);
                if self.in_bounds(t) && !self.is_obstacle(t) {
                    (t, false)
                } else {
                    (s, true)
                }
            }
            _ => (s, true),
        }
    }

    /// Apply `a` in `s`.
    pub fn step(&self, s: State, a: Action) -> Result<Transition> {
        if !self.in_bounds(s) {
            return Err(Error::InvalidState {
                state: s,
                reason: "outside the grid",
            });
        }
        if self.is_obstacle(s) {
            return Err(Error::InvalidState {
                state: s,
                reason: "obstacle cell",
            });
        }
        if s == self.goal {
            return Err(Error::InvalidState {
                state: s,
                reason: "goal is absorbing",
            });
        }
        let (next, clamped) = self.successor(s, a);
        let terminal = next == self.goal;
        let reward = if terminal {
            self.rewards.goal
        } else if clamped {
            self.rewards.wall
        } else {
            match self.rewards.mode {
                RewardMode::Flat => self.rewards.step,
                RewardMode::Graded => {
                    if next.manhattan(self.goal) < s.manhattan(self.goal) {
                        self.rewards.step + 1.0
                    } else {
                        self.rewards.step - 1.0
                    }
                }
            }
        };
        Ok(Transition {
            state: s,
            action: a,
            reward,
            next,
            terminal,
        })
    }

    fn first_unreachable(&self) -> Option<State> {
        let mut seen = vec![false; self.states.len()];
        let mut queue = VecDeque::from([self.start]);
        seen[self.state_index(self.start)?] = true;
        while let Some(s) = queue.pop_front() {
            for a in Action::ALL {
                let (t, clamped) = self.successor(s, a);
                if clamped {
                    continue;
                }
                let i = self.state_index(t).expect("successor is a free cell");
                if !seen[i] {
                    seen[i] = true;
                    queue.push_back(t);
                }
            }
        }
        seen.iter().position(|&v| !v).map(|i| self.states[i])
    }
}

/// Free cells of `spec` in row-major order.
pub fn enumerate_states(spec: &GridSpec) -> Vec<State> {
    spec.states().to_vec()
}
