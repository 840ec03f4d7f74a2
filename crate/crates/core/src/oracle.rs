//! Exact Q* by value iteration.
//!
//! Synchronous sweeps of the backup Q(s, a) = r(s, a) + γ·max Q(s', ·) over
//! every non-goal pair, with the goal row held at zero. For γ < 1 the backup
//! is a γ-contraction in the sup norm, so the sweep residual shrinks
//! geometrically.

use crate::error::{Error, Result};
use crate::gridworld::{Action, GridSpec, Transition};
use crate::qtable::QTable;

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Largest |Q_{k+1} - Q_k| of one sweep.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct BellmanResidual {
    pub sup_norm: f64,
}

#[derive(Debug, Clone)]
pub struct ValueIteration {
    pub table: QTable,
    /// Residual of each sweep, in order.
    pub residuals: Vec<BellmanResidual>,
}

impl ValueIteration {
    pub fn sweeps(&self) -> usize {
        self.residuals.len()
    }
}

/// Q* for `grid` to within `tol` sweep residual.
pub fn value_iteration(grid: &GridSpec, gamma: f64, tol: f64) -> Result<QTable> {
    Ok(solve(grid, gamma, tol)?.table)
}

/// Like [`value_iteration`], also returning the residual history.
pub fn solve(grid: &GridSpec, gamma: f64, tol: f64) -> Result<ValueIteration> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::field(
            "gamma",
            format!("must lie in [0, 1), got {gamma}"),
        ));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidTolerance(tol));
    }

    // Transitions are fixed, so compute them once.
    let transitions: Vec<Transition> = grid
        .states()
        .iter()
        .filter(|&&s| s != grid.goal())
        .flat_map(|&s| Action::ALL.map(|a| grid.step(s, a).expect("free non-goal state")))
        .collect();

    let mut current = QTable::new(grid);
    let mut residuals = Vec::new();
    loop {
        let mut next = current.clone();
        let mut sup_norm = 0.0f64;
        for t in &transitions {
            let bootstrap = if t.terminal {
                0.0
            } else {
                current.max_q(t.next)?
            };
            let backed_up = t.reward + gamma * bootstrap;
            let old = current.get(t.state, t.action)?;
            sup_norm = sup_norm.max((backed_up - old).abs());
            next.set(t.state, t.action, backed_up)?;
        }
        current = next;
        residuals.push(BellmanResidual { sup_norm });
        if sup_norm < tol {
            break;
        }
    }

    Ok(ValueIteration {
        table: current,
        residuals,
    })
}

/// max over all (s, a) of |a - b|.
pub fn sup_norm_distance(a: &QTable, b: &QTable) -> Result<f64> {
    if !a.same_layout(b) {
        return Err(Error::MismatchedTables);
    }
    Ok(a.entries()
        .zip(b.entries())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}
