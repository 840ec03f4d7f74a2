//! Dense Q(s, a) storage and action selection.

use std::fmt::Write as _;

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gridworld::{Action, GridSpec, State};

/// Deterministic random stream used for exploration. ChaCha output does not
/// depend on the host platform, so a seed pins the whole run.
pub type Rng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One row of four action values per free cell, in the grid's enumeration
/// order. The goal row is pinned to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    grid: GridSpec,
    values: Vec<[f64; Action::COUNT]>,
}

impl QTable {
    pub fn new(grid: &GridSpec) -> Self {
        QTable {
            grid: grid.clone(),
            values: vec![[0.0; Action::COUNT]; grid.states().len()],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Whether both tables index the same set of states with the same goal.
    pub fn same_layout(&self, other: &QTable) -> bool {
        self.grid.states() == other.grid.states() && self.grid.goal() == other.grid.goal()
    }

    pub fn is_bound_to(&self, grid: &GridSpec) -> bool {
        self.grid.states() == grid.states() && self.grid.goal() == grid.goal()
    }

    fn slot(&self, s: State) -> Result<usize> {
        self.grid.state_index(s).ok_or(Error::UnindexedState(s))
    }

    pub fn row(&self, s: State) -> Result<&[f64; Action::COUNT]> {
        Ok(&self.values[self.slot(s)?])
    }

    pub fn get(&self, s: State, a: Action) -> Result<f64> {
        Ok(self.row(s)?[a.index()])
    }

    /// Overwrite one entry. The goal row cannot be written.
    pub fn set(&mut self, s: State, a: Action, value: f64) -> Result<()> {
        let i = self.slot(s)?;
        if s == self.grid.goal() {
            return Err(Error::InvalidState {
                state: s,
                reason: "goal row is fixed at zero",
            });
        }
        self.values[i][a.index()] = value;
        Ok(())
    }

    pub fn set_row(&mut self, s: State, row: [f64; Action::COUNT]) -> Result<()> {
        for a in Action::ALL {
            self.set(s, a, row[a.index()])?;
        }
        Ok(())
    }

    /// Add `delta` to Q(s, a). The caller guarantees `s` is indexed and not
    /// the goal.
    pub(crate) fn add(&mut self, s: State, a: Action, delta: f64) {
        let i = self.grid.state_index(s).expect("state indexed by table");
        debug_assert_ne!(s, self.grid.goal());
        self.values[i][a.index()] += delta;
    }

    pub fn max_q(&self, s: State) -> Result<f64> {
        let row = self.row(s)?;
        if s == self.grid.goal() {
            return Ok(0.0);
        }
        Ok(row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    /// Greedy action; ties go to the earliest action in `Action::ALL`.
    pub fn argmax_action(&self, s: State) -> Result<Action> {
        let row = self.row(s)?;
        let mut best = 0;
        for i in 1..Action::COUNT {
            if row[i] > row[best] {
                best = i;
            }
        }
        Ok(Action::ALL[best])
    }

    /// ε-greedy choice. Draws one uniform for the exploration test and a
    /// second only when exploring.
    pub fn select_action(&self, s: State, epsilon: f64, rng: &mut Rng) -> Result<Action> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::InvalidEpsilon(epsilon));
        }
        let greedy = self.argmax_action(s)?;
        if rng.gen::<f64>() < epsilon {
            let i = rng.gen_range(0..Action::COUNT as u32) as usize;
            Ok(Action::ALL[i])
        } else {
            Ok(greedy)
        }
    }

    /// Sum of every entry.
    pub fn sum(&self) -> f64 {
        self.values.iter().flatten().sum()
    }

    /// Rows in enumeration order.
    pub fn iter(&self) -> impl Iterator<Item = (State, &[f64; Action::COUNT])> + '_ {
        self.grid.states().iter().copied().zip(self.values.iter())
    }

    pub fn entries(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().flatten().copied()
    }

    /// CSV with header `row,col,up,down,left,right`, six decimals per value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col,up,down,left,right\n");
        for (s, row) in self.iter() {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{:.6}",
                s.row, s.col, row[0], row[1], row[2], row[3]
            );
        }
        out
    }
}
