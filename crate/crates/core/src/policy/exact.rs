//! Backward induction over the joint battery grid of all relays.

use rayon::prelude::*;

use super::{evaluate_as, strictly_better, Algorithm, Choice, RelayTables, SleepPolicy, ValueTable};
use crate::error::{Error, Result};
use crate::model::Problem;

/// Joint candidate evaluations the DP performs: `Σ_i Π_n Σ_k |A_n(i, k)|`.
fn required_work(tables: &RelayTables) -> u128 {
    tables
        .choices
        .iter()
        .map(|stage| {
            stage
                .iter()
                .map(|relay| relay.iter().map(|c| c.len() as u128).sum::<u128>())
                .fold(1u128, |acc, x| acc.saturating_mul(x))
        })
        .fold(0u128, |acc, x| acc.saturating_add(x))
}

/// Optimal cost-to-go over every joint battery state.
pub fn exact_dp_table(problem: &Problem) -> Result<ValueTable> {
    let tables = RelayTables::build(problem)?;
    let required = required_work(&tables);
    let budget = problem.dp_budget as u128;
    if required > budget {
        return Err(Error::StateSpaceBudgetExceeded { required, budget });
    }

    let levels = problem.grid.levels();
    let relays = problem.relays();
    let states = levels.pow(relays as u32);
    let horizon = problem.horizon();
    let mut values = vec![Vec::new(); horizon + 1];
    let mut argmin = vec![Vec::new(); horizon];
    values[horizon] = vec![0.0; states];

    for i in (0..horizon).rev() {
        let next_values = &values[i + 1];
        let stage = &tables.choices[i];
        let solved: Vec<(f64, u32)> = (0..states)
            .into_par_iter()
            .map(|state| best_joint(problem, i, state, levels, stage, next_values))
            .collect();
        let (v, a) = solved.into_iter().unzip();
        values[i] = v;
        argmin[i] = a;
    }

    Ok(ValueTable {
        values,
        argmin,
        levels,
        relays,
    })
}

/// Joint choices enumerated lexicographically in the per-relay sleep ratios,
/// relay 0 slowest.
fn best_joint(
    problem: &Problem,
    i: usize,
    state: usize,
    levels: usize,
    stage: &[Vec<Vec<Choice>>],
    next_values: &[f64],
) -> (f64, u32) {
    let relays = stage.len();
    let lists: Vec<&[Choice]> = (0..relays)
        .map(|n| stage[n][(state / levels.pow(n as u32)) % levels].as_slice())
        .collect();
    let mut idx = vec![0usize; relays];
    let mut sleep = vec![0.0; relays];
    let mut best = (f64::INFINITY, 0u32);
    let mut flat = 0u32;
    loop {
        let mut next = 0usize;
        let mut stride = 1usize;
        for n in 0..relays {
            let c = lists[n][idx[n]];
            sleep[n] = c.sleep;
            next += c.next * stride;
            stride *= levels;
        }
        let total = problem.joint_cost(i, &sleep) + next_values[next];
        if flat == 0 || strictly_better(total, best.0) {
            best = (total, flat);
        }
        flat += 1;

        let mut n = relays;
        loop {
            if n == 0 {
                return best;
            }
            n -= 1;
            idx[n] += 1;
            if idx[n] < lists[n].len() {
                break;
            }
            idx[n] = 0;
        }
    }
}

fn decode_choice(flat: u32, lists: &[&[Choice]]) -> Vec<Choice> {
    let mut rem = flat as usize;
    let mut out = vec![lists[0][0]; lists.len()];
    for n in (0..lists.len()).rev() {
        out[n] = lists[n][rem % lists[n].len()];
        rem /= lists[n].len();
    }
    out
}

/// Jointly optimal schedule on the battery grid.
pub fn exact_dp(problem: &Problem) -> Result<SleepPolicy> {
    let table = exact_dp_table(problem)?;
    let tables = RelayTables::build(problem)?;
    let mut levels = vec![problem.initial_index; problem.relays()];
    let start = table.state_index(&levels);
    let mut sleep = Vec::with_capacity(problem.horizon());
    for i in 0..problem.horizon() {
        let state = table.state_index(&levels);
        let lists: Vec<&[Choice]> = levels
            .iter()
            .enumerate()
            .map(|(n, &k)| tables.choices[i][n][k].as_slice())
            .collect();
        let picked = decode_choice(table.argmin[i][state], &lists);
        sleep.push(picked.iter().map(|c| c.sleep).collect::<Vec<_>>());
        levels = picked.iter().map(|c| c.next).collect();
    }
    let mut policy = evaluate_as(problem, &sleep, Algorithm::ExactDp)?;
    policy.dp_value = Some(table.values[0][start]);
    Ok(policy)
}
