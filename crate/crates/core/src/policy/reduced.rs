//! Per-relay decomposition: each relay is scheduled as if it were the only
//! relay in the cell, then the schedules are evaluated jointly.

use rayon::prelude::*;

use super::{evaluate_as, strictly_better, Algorithm, Choice, RelayTables, SleepPolicy, ValueTable};
use crate::error::Result;
use crate::model::Problem;

fn relay_table(problem: &Problem, tables: &RelayTables, n: usize) -> ValueTable {
    let levels = problem.grid.levels();
    let horizon = problem.horizon();
    let mut values = vec![vec![0.0; levels]; horizon + 1];
    let mut argmin = vec![vec![0u32; levels]; horizon];
    for i in (0..horizon).rev() {
        for k in 0..levels {
            let choices = &tables.choices[i][n][k];
            let (v, a) = pick(choices, |c| problem.relay_cost(i, n, c.sleep) + values[i + 1][c.next]);
            values[i][k] = v;
            argmin[i][k] = a;
        }
    }
    ValueTable {
        values,
        argmin,
        levels,
        relays: 1,
    }
}

/// First minimum in ascending sleep order, ignoring sub-tolerance gains.
fn pick(choices: &[Choice], score: impl Fn(&Choice) -> f64) -> (f64, u32) {
    let mut best = (score(&choices[0]), 0u32);
    for (j, c) in choices.iter().enumerate().skip(1) {
        let s = score(c);
        if strictly_better(s, best.0) {
            best = (s, j as u32);
        }
    }
    best
}

/// One single-relay value table per relay.
pub fn reduced_dp_tables(problem: &Problem) -> Result<Vec<ValueTable>> {
    let tables = RelayTables::build(problem)?;
    Ok((0..problem.relays())
        .into_par_iter()
        .map(|n| relay_table(problem, &tables, n))
        .collect())
}

/// Schedules each relay by its own backward induction.
pub fn reduced_dp(problem: &Problem) -> Result<SleepPolicy> {
    let tables = RelayTables::build(problem)?;
    let per_relay: Vec<ValueTable> = (0..problem.relays())
        .into_par_iter()
        .map(|n| relay_table(problem, &tables, n))
        .collect();
    let mut levels = vec![problem.initial_index; problem.relays()];
    let mut sleep = vec![vec![0.0; problem.relays()]; problem.horizon()];
    for (i, row) in sleep.iter_mut().enumerate() {
        for (n, table) in per_relay.iter().enumerate() {
            let c = tables.choices[i][n][levels[n]][table.argmin[i][levels[n]] as usize];
            row[n] = c.sleep;
            levels[n] = c.next;
        }
    }
    evaluate_as(problem, &sleep, Algorithm::ReducedDp)
}

/// Minimises each relay's own slot cost, slot by slot, with no look-ahead.
pub fn greedy(problem: &Problem) -> Result<SleepPolicy> {
    let tables = RelayTables::build(problem)?;
    let mut levels = vec![problem.initial_index; problem.relays()];
    let mut sleep = vec![vec![0.0; problem.relays()]; problem.horizon()];
    for (i, row) in sleep.iter_mut().enumerate() {
        for n in 0..problem.relays() {
            let choices = &tables.choices[i][n][levels[n]];
            let (_, a) = pick(choices, |c| problem.relay_cost(i, n, c.sleep));
            let c = choices[a as usize];
            row[n] = c.sleep;
            levels[n] = c.next;
        }
    }
    evaluate_as(problem, &sleep, Algorithm::Greedy)
}
