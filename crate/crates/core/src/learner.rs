//! Conventional and relative-reward Q-learning.
//!
//! Both algorithms share one episode loop. They differ only in the reward
//! fed into the TD target: the relative rule uses the larger of the current
//! reward and the reward observed on the previous step of the same episode.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridworld::{GridSpec, Transition};
use crate::qtable::{seeded_rng, QTable, Rng};

pub const DEFAULT_ALPHA: f64 = 0.8;
pub const DEFAULT_GAMMA: f64 = 0.8;
pub const DEFAULT_EPSILON: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Conventional,
    Relative,
}

impl Algorithm {
    pub const ALL: [Algorithm; 2] = [Algorithm::Conventional, Algorithm::Relative];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Conventional => "conventional",
            Algorithm::Relative => "relative",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conventional" => Ok(Algorithm::Conventional),
            "relative" => Ok(Algorithm::Relative),
            other => Err(Error::field(
                "algorithm",
                format!("expected `conventional` or `relative`, got `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentParams {
    /// Learning rate, in (0, 1].
    pub alpha: f64,
    /// Discount factor, in [0, 1).
    pub gamma: f64,
    /// Exploration probability, in [0, 1].
    pub epsilon: f64,
    pub seed: u64,
    pub max_steps_per_episode: usize,
    pub algorithm: Algorithm,
}

impl AgentParams {
    /// Defaults sized for `grid`: α = γ = 0.8, ε = 0.2, step cap 4·width·height.
    pub fn for_grid(grid: &GridSpec, algorithm: Algorithm) -> Self {
        AgentParams {
            alpha: DEFAULT_ALPHA,
            gamma: DEFAULT_GAMMA,
            epsilon: DEFAULT_EPSILON,
            seed: 0,
            max_steps_per_episode: default_step_cap(grid),
            algorithm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::field(
                "alpha",
                format!("must lie in (0, 1], got {}", self.alpha),
            ));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::field(
                "gamma",
                format!("must lie in [0, 1), got {}", self.gamma),
            ));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::field(
                "epsilon",
                format!("must lie in [0, 1], got {}", self.epsilon),
            ));
        }
        if self.max_steps_per_episode == 0 {
            return Err(Error::field("max_steps_per_episode", "must be positive"));
        }
        Ok(())
    }
}

pub fn default_step_cap(grid: &GridSpec) -> usize {
    4 * grid.width() * grid.height()
}

/// Reward observed on the previous step of the current episode.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RelativeMemory {
    pub prev_reward: Option<f64>,
}

impl RelativeMemory {
    pub fn reset(&mut self) {
        self.prev_reward = None;
    }
}

fn apply_td(table: &mut QTable, t: &Transition, reward: f64, alpha: f64, gamma: f64) -> f64 {
    let bootstrap = if t.terminal {
        0.0
    } else {
        table.max_q(t.next).expect("successor indexed by table")
    };
    let current = table
        .get(t.state, t.action)
        .expect("state indexed by table");
    let delta = alpha * (reward + gamma * bootstrap - current);
    table.add(t.state, t.action, delta);
    delta
}

/// One-step Q-learning update. Returns the signed increment applied to
/// Q(s, a).
pub fn update_conventional(table: &mut QTable, t: &Transition, alpha: f64, gamma: f64) -> f64 {
    apply_td(table, t, t.reward, alpha, gamma)
}

/// Relative-reward update: the TD target uses `max(r, prev_reward)`. The raw
/// reward `r` is remembered for the next step.
pub fn update_relative(
    table: &mut QTable,
    t: &Transition,
    mem: &mut RelativeMemory,
    alpha: f64,
    gamma: f64,
) -> f64 {
    let effective = match mem.prev_reward {
        Some(prev) => t.reward.max(prev),
        None => t.reward,
    };
    let delta = apply_td(table, t, effective, alpha, gamma);
    mem.prev_reward = Some(t.reward);
    delta
}

/// Σ γ^k · rewards[k].
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    rewards.iter().rev().fold(0.0, |acc, r| r + gamma * acc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub steps: usize,
    pub rewards: Vec<f64>,
    /// Largest |ΔQ| applied during the episode.
    pub max_q_delta: f64,
    pub reached_goal: bool,
}

/// Run one episode from the grid's start state, updating `table` in place.
pub fn run_episode(
    grid: &GridSpec,
    table: &mut QTable,
    params: &AgentParams,
    rng: &mut Rng,
) -> Result<EpisodeResult> {
    run_episode_observed(grid, table, params, rng, |_, _, _| {})
}

/// [`run_episode`] with a hook called after every update with the
/// transition, the applied ΔQ and the updated table.
pub fn run_episode_observed<F>(
    grid: &GridSpec,
    table: &mut QTable,
    params: &AgentParams,
    rng: &mut Rng,
    mut on_step: F,
) -> Result<EpisodeResult>
where
    F: FnMut(&Transition, f64, &QTable),
{
    if !table.is_bound_to(grid) {
        return Err(Error::MismatchedTables);
    }
    let mut state = grid.start();
    let mut memory = RelativeMemory::default();
    let mut rewards = Vec::new();
    let mut max_q_delta = 0.0f64;
    let mut reached_goal = false;

    while rewards.len() < params.max_steps_per_episode {
        let action = table.select_action(state, params.epsilon, rng)?;
        let t = grid.step(state, action)?;
        let delta = match params.algorithm {
            Algorithm::Conventional => update_conventional(table, &t, params.alpha, params.gamma),
            Algorithm::Relative => {
                update_relative(table, &t, &mut memory, params.alpha, params.gamma)
            }
        };
        on_step(&t, delta, table);
        max_q_delta = max_q_delta.max(delta.abs());
        rewards.push(t.reward);
        if t.terminal {
            reached_goal = true;
            break;
        }
        state = t.next;
    }

    Ok(EpisodeResult {
        steps: rewards.len(),
        rewards,
        max_q_delta,
        reached_goal,
    })
}

/// Per-episode metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    /// 1-based.
    pub episode: usize,
    pub steps: usize,
    pub discounted_return: f64,
    pub max_q_delta: f64,
    pub sum_q: f64,
    pub reached_goal: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LearningCurve {
    pub records: Vec<EpisodeRecord>,
}

impl LearningCurve {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn max_q_deltas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.max_q_delta).collect()
    }

    /// CSV with header `episode,steps,return,max_q_delta,sum_q`.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::from("episode,steps,return,max_q_delta,sum_q\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.episode, r.steps, r.discounted_return, r.max_q_delta, r.sum_q
            );
        }
        out
    }
}

/// A training run in progress: one persistent table, one random stream.
#[derive(Debug, Clone)]
pub struct Trainer {
    grid: GridSpec,
    params: AgentParams,
    table: QTable,
    rng: Rng,
    episodes_done: usize,
}

impl Trainer {
    /// Fresh zero table, random stream seeded from `params.seed`.
    pub fn new(grid: &GridSpec, params: AgentParams) -> Result<Self> {
        Trainer::with_rng(grid, params, seeded_rng(params.seed))
    }

    pub fn with_rng(grid: &GridSpec, params: AgentParams, rng: Rng) -> Result<Self> {
        params.validate()?;
        Ok(Trainer {
            grid: grid.clone(),
            params,
            table: QTable::new(grid),
            rng,
            episodes_done: 0,
        })
    }

    pub fn table(&self) -> &QTable {
        &self.table
    }

    pub fn into_table(self) -> QTable {
        self.table
    }

    pub fn params(&self) -> &AgentParams {
        &self.params
    }

    pub fn episodes_done(&self) -> usize {
        self.episodes_done
    }

    pub fn run_episode(&mut self) -> Result<EpisodeRecord> {
        self.run_episode_observed(|_, _, _| {})
    }

    pub fn run_episode_observed<F>(&mut self, on_step: F) -> Result<EpisodeRecord>
    where
        F: FnMut(&Transition, f64, &QTable),
    {
        let result = run_episode_observed(
            &self.grid,
            &mut self.table,
            &self.params,
            &mut self.rng,
            on_step,
        )?;
        self.episodes_done += 1;
        Ok(EpisodeRecord {
            episode: self.episodes_done,
            steps: result.steps,
            discounted_return: discounted_return(&result.rewards, self.params.gamma),
            max_q_delta: result.max_q_delta,
            sum_q: self.table.sum(),
            reached_goal: result.reached_goal,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub curve: LearningCurve,
    pub table: QTable,
}

/// Run `episodes` consecutive episodes against one table.
pub fn run_training(
    grid: &GridSpec,
    params: &AgentParams,
    episodes: usize,
    rng: Rng,
) -> Result<TrainingRun> {
    if episodes == 0 {
        return Err(Error::field("episodes", "must be at least 1"));
    }
    let mut trainer = Trainer::with_rng(grid, *params, rng)?;
    let records = (0..episodes)
        .map(|_| trainer.run_episode())
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainingRun {
        curve: LearningCurve { records },
        table: trainer.into_table(),
    })
}

/// Follow the greedy policy from the start. Returns the visited states
/// (start excluded) if the goal is reached within `max_steps`.
pub fn greedy_path(table: &QTable, max_steps: usize) -> Option<Vec<crate::gridworld::State>> {
    let grid = table.grid();
    let mut s = grid.start();
    let mut path = Vec::new();
    for _ in 0..max_steps {
        let a = table.argmax_action(s).ok()?;
        let t = grid.step(s, a).ok()?;
        path.push(t.next);
        if t.terminal {
            return Some(path);
        }
        s = t.next;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::{Action, GridDoc, Rewards, State};

    fn grid() -> GridSpec {
        GridSpec::open(5, 5, (0, 0), (4, 4)).unwrap()
    }

    fn transition(s: State, a: Action, reward: f64, next: State, terminal: bool) -> Transition {
        Transition {
            state: s,
            action: a,
            reward,
            next,
            terminal,
        }
    }

    #[test]
    fn conventional_terminal_update() {
        let g = grid();
        let mut q = QTable::new(&g);
        let t = g.step(State::new(3, 4), Action::Down).unwrap();
        let d = update_conventional(&mut q, &t, 0.8, 0.8);
        assert!((d - 40.0).abs() < 1e-12);
        assert!((q.get(State::new(3, 4), Action::Down).unwrap() - 40.0).abs() < 1e-12);
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let g = grid();
        let mut q = QTable::new(&g);
        q.set(State::new(1, 1), Action::Up, 3.0).unwrap();
        let before = q.clone();
        let t = g.step(State::new(1, 1), Action::Up).unwrap();
        assert_eq!(update_conventional(&mut q, &t, 0.0, 0.8), 0.0);
        assert_eq!(q, before);
    }

    #[test]
    fn conventional_bootstrapped_update() {
        let g = grid();
        let mut q = QTable::new(&g);
        let (s, n) = (State::new(1, 1), State::new(1, 2));
        q.set(s, Action::Right, 10.0).unwrap();
        q.set(n, Action::Down, 10.0).unwrap();
        let t = transition(s, Action::Right, 0.0, n, false);
        let d = update_conventional(&mut q, &t, 0.5, 0.8);
        assert!((d + 1.0).abs() < 1e-12);
        assert!((q.get(s, Action::Right).unwrap() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn relative_uses_previous_reward() {
        let g = grid();
        let mut q = QTable::new(&g);
        let (s, n) = (State::new(1, 1), State::new(1, 2));
        q.set(n, Action::Up, 5.0).unwrap();
        let t = transition(s, Action::Right, 2.0, n, false);
        let mut mem = RelativeMemory {
            prev_reward: Some(10.0),
        };
        update_relative(&mut q, &t, &mut mem, 0.8, 0.8);
        assert!((q.get(s, Action::Right).unwrap() - 11.2).abs() < 1e-12);
        assert_eq!(mem.prev_reward, Some(2.0));
    }

    #[test]
    fn relative_first_step_matches_conventional() {
        let g = grid();
        let t = g.step(State::new(0, 0), Action::Up).unwrap();
        assert_eq!(t.reward, -1.0);
        let mut a = QTable::new(&g);
        let mut b = QTable::new(&g);
        let mut mem = RelativeMemory::default();
        let da = update_relative(&mut a, &t, &mut mem, 0.8, 0.8);
        let db = update_conventional(&mut b, &t, 0.8, 0.8);
        assert_eq!(da, db);
        assert_eq!(a, b);
    }

    #[test]
    fn relative_with_better_current_reward_matches_conventional() {
        let g = grid();
        let t = g.step(State::new(3, 4), Action::Down).unwrap();
        let mut a = QTable::new(&g);
        let mut b = QTable::new(&g);
        let mut mem = RelativeMemory {
            prev_reward: Some(-1.0),
        };
        assert_eq!(
            update_relative(&mut a, &t, &mut mem, 0.8, 0.8),
            update_conventional(&mut b, &t, 0.8, 0.8)
        );
        assert_eq!(a, b);
    }

    #[test]
    fn discounted_return_examples() {
        assert!((discounted_return(&[1.0, 1.0, 1.0], 0.5) - 1.75).abs() < 1e-12);
        assert_eq!(discounted_return(&[], 0.9), 0.0);
        assert_eq!(discounted_return(&[3.0, 7.0, -2.0], 0.0), 3.0);
        assert_eq!(discounted_return(&[], 0.0), 0.0);
        // 2·(1 − 0.9^10)/(1 − 0.9)
        let r = discounted_return(&[2.0; 10], 0.9);
        assert!((r - 13.026431198).abs() < 1e-9, "{r}");
    }

    #[test]
    fn fixed_point_gives_zero_delta() {
        let g = grid();
        let mut q = QTable::new(&g);
        let (s, n) = (State::new(2, 2), State::new(2, 3));
        q.set(n, Action::Right, 10.0).unwrap();
        q.set(s, Action::Right, 0.0 + 0.8 * 10.0).unwrap();
        let t = g.step(s, Action::Right).unwrap();
        assert_eq!(update_conventional(&mut q, &t, 0.7, 0.8), 0.0);
    }

    #[test]
    fn one_step_episode_into_adjacent_goal() {
        let g = GridSpec::open(3, 3, (1, 1), (1, 2)).unwrap();
        let mut q = QTable::new(&g);
        q.set(State::new(1, 1), Action::Right, 40.0).unwrap();
        let params = AgentParams {
            epsilon: 0.0,
            ..AgentParams::for_grid(&g, Algorithm::Conventional)
        };
        let r = run_episode(&g, &mut q, &params, &mut seeded_rng(1)).unwrap();
        assert_eq!(r.steps, 1);
        assert_eq!(r.rewards, vec![50.0]);
        assert!(r.reached_goal);
    }

    #[test]
    fn zero_table_greedy_walks_up_until_cap() {
        let g = GridSpec::open(4, 4, (2, 1), (3, 3)).unwrap();
        let mut q = QTable::new(&g);
        let params = AgentParams {
            epsilon: 0.0,
            max_steps_per_episode: 12,
            ..AgentParams::for_grid(&g, Algorithm::Conventional)
        };
        let r = run_episode(&g, &mut q, &params, &mut seeded_rng(0)).unwrap();
        assert_eq!(r.steps, 12);
        assert!(!r.reached_goal);
        // Two real moves up, then the wall.
        assert_eq!(&r.rewards[..3], &[0.0, 0.0, -1.0]);
        // Once Up has gone negative at the top row the tie-break moves on.
        assert!(q.get(State::new(0, 1), Action::Up).unwrap() < 0.0);
    }

    #[test]
    fn zero_table_greedy_reaches_goal_when_up_leads_there() {
        let g = GridSpec::open(3, 3, (2, 0), (0, 0)).unwrap();
        let mut q = QTable::new(&g);
        let params = AgentParams {
            epsilon: 0.0,
            ..AgentParams::for_grid(&g, Algorithm::Conventional)
        };
        let r = run_episode(&g, &mut q, &params, &mut seeded_rng(0)).unwrap();
        assert_eq!(r.steps, 2);
        assert!(r.reached_goal);
    }

    #[test]
    fn unsolvable_grid_hits_cap() {
        let g = GridDoc::new(3, 3, (0, 0), (2, 2))
            .with_obstacles([(1, 2), (2, 1)])
            .unsolvable()
            .build()
            .unwrap();
        let mut q = QTable::new(&g);
        let params = AgentParams {
            max_steps_per_episode: 50,
            ..AgentParams::for_grid(&g, Algorithm::Relative)
        };
        let r = run_episode(&g, &mut q, &params, &mut seeded_rng(3)).unwrap();
        assert_eq!(r.steps, 50);
        assert!(!r.reached_goal);
    }

    #[test]
    fn episode_is_deterministic() {
        let g = grid();
        let params = AgentParams::for_grid(&g, Algorithm::Conventional);
        let run = || {
            let mut q = QTable::new(&g);
            run_episode(&g, &mut q, &params, &mut seeded_rng(11)).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn training_curve_length_and_indices() {
        let g = grid();
        let params = AgentParams::for_grid(&g, Algorithm::Relative);
        let run = run_training(&g, &params, 1, seeded_rng(0)).unwrap();
        assert_eq!(run.curve.len(), 1);
        let run = run_training(&g, &params, 25, seeded_rng(0)).unwrap();
        let idx: Vec<_> = run.curve.records.iter().map(|r| r.episode).collect();
        assert_eq!(idx, (1..=25).collect::<Vec<_>>());
        assert!(run_training(&g, &params, 0, seeded_rng(0)).is_err());
    }

    #[test]
    fn learned_greedy_path_is_shortest() {
        let g = grid();
        let params = AgentParams {
            epsilon: 0.3,
            ..AgentParams::for_grid(&g, Algorithm::Conventional)
        };
        let run = run_training(&g, &params, 2000, seeded_rng(5)).unwrap();
        let path = greedy_path(&run.table, 100).unwrap();
        assert_eq!(path.len(), g.start().manhattan(g.goal()));
    }

    #[test]
    fn equal_rewards_make_algorithms_coincide() {
        let g = GridDoc::new(5, 5, (0, 0), (4, 4))
            .with_rewards(Rewards::flat(1.0, 1.0, 1.0))
            .build()
            .unwrap();
        let conv = AgentParams::for_grid(&g, Algorithm::Conventional);
        let rel = AgentParams::for_grid(&g, Algorithm::Relative);
        let a = run_training(&g, &conv, 300, seeded_rng(4)).unwrap();
        let b = run_training(&g, &rel, 300, seeded_rng(4)).unwrap();
        assert_eq!(a.table, b.table);
        assert_eq!(a.curve, b.curve);
    }

    #[test]
    fn params_validation() {
        let g = grid();
        let base = AgentParams::for_grid(&g, Algorithm::Conventional);
        assert_eq!(base.max_steps_per_episode, 100);
        base.validate().unwrap();
        for (p, field) in [
            (AgentParams { alpha: 0.0, ..base }, "alpha"),
            (AgentParams { alpha: 1.2, ..base }, "alpha"),
            (AgentParams { gamma: 1.0, ..base }, "gamma"),
            (
                AgentParams {
                    epsilon: 2.0,
                    ..base
                },
                "epsilon",
            ),
            (
                AgentParams {
                    max_steps_per_episode: 0,
                    ..base
                },
                "max_steps_per_episode",
            ),
        ] {
            match p.validate() {
                Err(Error::InvalidField { field: f, .. }) => assert_eq!(f, field),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn rejects_table_for_other_grid() {
        let g = grid();
        let mut q = QTable::new(&GridSpec::open(4, 4, (0, 0), (3, 3)).unwrap());
        let params = AgentParams::for_grid(&g, Algorithm::Conventional);
        assert!(matches!(
            run_episode(&g, &mut q, &params, &mut seeded_rng(0)),
            Err(Error::MismatchedTables)
        ));
    }
}
