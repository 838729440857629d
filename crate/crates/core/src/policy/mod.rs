//! Sleep policies: stage cost, forward evaluation and the three solvers.
//!
//! Every solver returns its decisions re-evaluated through
//! [`evaluate_policy`], so reported costs are always the true joint cost
//! regardless of how the solver scored its candidates.

mod exact;
mod reduced;

use serde::{Deserialize, Serialize};

use crate::energy::{enumerate_actions, forced_shutdown, grid_transition, EnergyLedger, Transition};
use crate::error::{Error, Result};
use crate::model::{Problem, SlotOutcome};

pub use exact::{exact_dp, exact_dp_table};
pub use reduced::{greedy, reduced_dp, reduced_dp_tables};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    ExactDp,
    ReducedDp,
    Greedy,
    FixedPolicy,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::ExactDp => "exact-dp",
            Algorithm::ReducedDp => "reduced-dp",
            Algorithm::Greedy => "greedy",
            Algorithm::FixedPolicy => "fixed-policy",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact-dp" => Ok(Algorithm::ExactDp),
            "reduced-dp" => Ok(Algorithm::ReducedDp),
            "greedy" => Ok(Algorithm::Greedy),
            "fixed-policy" => Ok(Algorithm::FixedPolicy),
            other => Err(Error::InvalidArgument(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Per-slot record of an evaluated policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotRecord {
    pub slot: usize,
    pub length: f64,
    pub requested_sleep: Vec<f64>,
    /// Sleep ratios actually applied after feasibility clamping.
    pub sleep: Vec<f64>,
    pub clamped: Vec<bool>,
    pub forced: Vec<bool>,
    pub battery_start: Vec<f64>,
    pub battery_end: Vec<f64>,
    pub rs_energy: Vec<f64>,
    pub ledger: Vec<EnergyLedger>,
    pub outcome: SlotOutcome,
}

/// A sleep schedule with its per-slot metrics and totals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SleepPolicy {
    pub algorithm: Algorithm,
    pub slots: Vec<SlotRecord>,
    pub total_cost: f64,
    pub total_bs_energy: f64,
    pub total_time: f64,
    pub mean_blocking: f64,
    /// Cost-to-go at the initial state, for DP solvers.
    pub dp_value: Option<f64>,
}

impl SleepPolicy {
    /// Applied sleep ratios, `[slot][relay]`.
    pub fn sleep_matrix(&self) -> Vec<Vec<f64>> {
        self.slots.iter().map(|s| s.sleep.clone()).collect()
    }

    /// Mean BS draw over the horizon (W).
    pub fn mean_grid_power(&self) -> f64 {
        self.total_bs_energy / self.total_time
    }

    pub fn any_clamped(&self) -> bool {
        self.slots.iter().any(|s| s.clamped.iter().any(|c| *c))
    }
}

/// One relay decision on the battery grid, already checked for feasibility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Choice {
    pub sleep: f64,
    pub next: usize,
}

/// Applies a requested sleep ratio from grid level `level`. Infeasible
/// ratios are raised to the smallest affordable one; when even full sleep is
/// unaffordable the relay is shut down for the slot.
pub(crate) fn relay_step(problem: &Problem, i: usize, n: usize, level: usize, requested: f64) -> (Transition, bool) {
    let slot = &problem.slots[i].relays[n].slot;
    let battery = problem.grid.level(level);
    if let Some(t) = grid_transition(battery, requested, slot, &problem.grid) {
        return (t, false);
    }
    let floor = ((slot.active_power - (battery / slot.length + slot.harvest)) / (slot.active_power - slot.sleep_power))
        .clamp(requested, 1.0);
    let t = grid_transition(battery, floor, slot, &problem.grid)
        .or_else(|| grid_transition(battery, 1.0, slot, &problem.grid))
        .unwrap_or_else(|| forced_shutdown(battery, slot));
    (t, !(t.forced && requested == 1.0))
}

/// Feasible relay choices at grid level `level`, by ascending sleep ratio.
pub(crate) fn relay_choices(problem: &Problem, i: usize, n: usize, level: usize) -> Result<Vec<Choice>> {
    let slot = &problem.slots[i].relays[n].slot;
    let battery = problem.grid.level(level);
    let set = enumerate_actions(battery, slot, problem.grid.unit())?;
    let mut out: Vec<Choice> = Vec::with_capacity(set.actions.len());
    for a in &set.actions {
        let (t, _) = relay_step(problem, i, n, level, a.sleep);
        if out.last().is_some_and(|c| c.sleep == t.sleep) {
            continue;
        }
        out.push(Choice {
            sleep: t.sleep,
            next: t.next_index,
        });
    }
    Ok(out)
}

/// Choice tables for every `(slot, relay, level)`.
pub(crate) struct RelayTables {
    /// `[slot][relay][level]`
    pub choices: Vec<Vec<Vec<Vec<Choice>>>>,
}

impl RelayTables {
    pub fn build(problem: &Problem) -> Result<Self> {
        let levels = problem.grid.levels();
        let choices = (0..problem.horizon())
            .map(|i| {
                (0..problem.relays())
                    .map(|n| (0..levels).map(|k| relay_choices(problem, i, n, k)).collect())
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { choices })
    }
}

/// Relative tolerance below which two candidate costs count as tied; ties go
/// to the smaller sleep ratio.
pub(crate) const TIE_TOLERANCE: f64 = 1e-12;

pub(crate) fn strictly_better(candidate: f64, best: f64) -> bool {
    candidate < best - TIE_TOLERANCE * best.abs().max(1.0)
}

/// `E0 + ψ ω Pblk` for slot `i`. Each relay's ratio must be affordable from
/// its battery level, or be full sleep when nothing is affordable.
pub fn stage_cost(problem: &Problem, i: usize, battery: &[f64], sleep: &[f64]) -> Result<f64> {
    check_len("battery levels", battery.len(), problem.relays())?;
    check_len("sleep ratios", sleep.len(), problem.relays())?;
    if i >= problem.horizon() {
        return Err(Error::InvalidArgument(format!("slot {i} out of range")));
    }
    for (n, (&b, &p)) in battery.iter().zip(sleep).enumerate() {
        let slot = &problem.slots[i].relays[n].slot;
        let consumed = slot.consumption(p);
        let pre = b + slot.harvest * slot.length - consumed;
        if grid_transition(b, p, slot, &problem.grid).is_none()
            && !(p == 1.0 && grid_transition(b, 1.0, slot, &problem.grid).is_none())
        {
            return Err(Error::InfeasibleAction { pre_clamp: pre });
        }
    }
    Ok(problem.joint_cost(i, sleep))
}

fn check_len(what: &'static str, actual: usize, expected: usize) -> Result<()> {
    if actual != expected {
        return Err(Error::DimensionMismatch { what, expected, actual });
    }
    Ok(())
}

/// Forward re-simulation of a `[slot][relay]` sleep matrix from the initial
/// battery. Unaffordable entries are raised to the smallest feasible ratio
/// and flagged in [`SlotRecord::clamped`].
pub fn evaluate_policy(problem: &Problem, sleep: &[Vec<f64>]) -> Result<SleepPolicy> {
    evaluate_as(problem, sleep, Algorithm::FixedPolicy)
}

pub(crate) fn evaluate_as(problem: &Problem, sleep: &[Vec<f64>], algorithm: Algorithm) -> Result<SleepPolicy> {
    let n = problem.relays();
    check_len("policy slots", sleep.len(), problem.horizon())?;
    for row in sleep {
        check_len("policy relays", row.len(), n)?;
        if let Some(p) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidArgument(format!("sleep ratio {p} outside [0, 1]")));
        }
    }

    let mut levels = vec![problem.initial_index; n];
    let mut slots = Vec::with_capacity(problem.horizon());
    for (i, requested) in sleep.iter().enumerate() {
        let slot = &problem.slots[i];
        let mut record = SlotRecord {
            slot: i,
            length: slot.length,
            requested_sleep: requested.clone(),
            sleep: Vec::with_capacity(n),
            clamped: Vec::with_capacity(n),
            forced: Vec::with_capacity(n),
            battery_start: Vec::with_capacity(n),
            battery_end: Vec::with_capacity(n),
            rs_energy: Vec::with_capacity(n),
            ledger: Vec::with_capacity(n),
            outcome: problem.evaluate_slot(i, requested),
        };
        for (r, &p) in requested.iter().enumerate() {
            let (t, clamped) = relay_step(problem, i, r, levels[r], p);
            record.battery_start.push(problem.grid.level(levels[r]));
            record.battery_end.push(t.next);
            record.sleep.push(t.sleep);
            record.clamped.push(clamped);
            record.forced.push(t.forced);
            record.rs_energy.push(slot.relays[r].slot.consumption(t.sleep));
            record.ledger.push(t.ledger);
            levels[r] = t.next_index;
        }
        record.outcome = problem.evaluate_slot(i, &record.sleep);
        slots.push(record);
    }

    let total_cost = slots.iter().map(|s| s.outcome.cost).sum();
    let total_bs_energy = slots.iter().map(|s| s.outcome.bs_energy).sum();
    let total_time = slots.iter().map(|s| s.length).sum();
    let mean_blocking = slots.iter().map(|s| s.outcome.system_blocking).sum::<f64>() / slots.len() as f64;
    Ok(SleepPolicy {
        algorithm,
        slots,
        total_cost,
        total_bs_energy,
        total_time,
        mean_blocking,
        dp_value: None,
    })
}

/// Runs `algorithm`. `fixed` supplies the matrix for [`Algorithm::FixedPolicy`].
pub fn solve(problem: &Problem, algorithm: Algorithm, fixed: Option<&[Vec<f64>]>) -> Result<SleepPolicy> {
    match algorithm {
        Algorithm::ExactDp => exact_dp(problem),
        Algorithm::ReducedDp => reduced_dp(problem),
        Algorithm::Greedy => greedy(problem),
        Algorithm::FixedPolicy => {
            let zeros;
            let sleep = match fixed {
                Some(m) => m,
                None => {
                    zeros = vec![vec![0.0; problem.relays()]; problem.horizon()];
                    &zeros
                }
            };
            evaluate_policy(problem, sleep)
        }
    }
}

/// Cost-to-go table over battery grid states.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    /// `values[i][state]`, with `values[horizon]` identically zero.
    pub values: Vec<Vec<f64>>,
    /// Index of the argmin choice at `[i][state]`.
    pub argmin: Vec<Vec<u32>>,
    /// Grid levels per relay.
    pub levels: usize,
    pub relays: usize,
}

impl ValueTable {
    pub fn state_index(&self, levels: &[usize]) -> usize {
        levels.iter().rev().fold(0, |acc, &k| acc * self.levels + k)
    }

    pub fn state_levels(&self, mut state: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.relays);
        for _ in 0..self.relays {
            out.push(state % self.levels);
            state /= self.levels;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{diurnal_scenario, DiurnalSpec};

    fn small(relays: usize) -> Problem {
        let s = diurnal_scenario(&DiurnalSpec {
            relays,
            grid_unit_j: 20_000.0,
            ..DiurnalSpec::default()
        });
        Problem::new(&s).unwrap()
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in [
            Algorithm::ExactDp,
            Algorithm::ReducedDp,
            Algorithm::Greedy,
            Algorithm::FixedPolicy,
        ] {
            assert_eq!(a.as_str().parse::<Algorithm>().unwrap(), a);
        }
        assert!("dp".parse::<Algorithm>().is_err());
    }

    #[test]
    fn psi_zero_cost_is_bs_energy() {
        let mut p = small(2);
        p.psi = 0.0;
        let c = stage_cost(&p, 12, &[p.initial_battery(); 2], &[0.0, 0.0]).unwrap();
        assert_eq!(c, p.evaluate_slot(12, &[0.0, 0.0]).bs_energy);
    }

    #[test]
    fn large_psi_orders_by_blocking() {
        let mut p = small(1);
        p.psi = 1e15;
        let b = [p.initial_battery()];
        let awake = stage_cost(&p, 20, &b, &[0.0]).unwrap();
        let asleep = stage_cost(&p, 20, &b, &[1.0]).unwrap();
        let pa = p.evaluate_slot(20, &[0.0]).system_blocking;
        let pb = p.evaluate_slot(20, &[1.0]).system_blocking;
        assert!(pa < pb);
        assert!(awake < asleep);
    }

    #[test]
    fn stage_cost_hand_value() {
        // E0 = 1e5 J, Pblk = 0.2, ψ = 1e6, ω = 1/24.
        let expected: f64 = 1e5 + 1e6 * 0.2 / 24.0;
        assert!((expected - 108_333.333_333).abs() < 1e-3);
        let mut p = small(1);
        p.psi = 1e6;
        let o = p.evaluate_slot(3, &[0.0]);
        let c = stage_cost(&p, 3, &[p.initial_battery()], &[0.0]).unwrap();
        assert_eq!(c, o.bs_energy + 1e6 * (1.0 / 24.0) * o.system_blocking);
    }

    #[test]
    fn stage_cost_rejects_unaffordable_action() {
        let p = small(1);
        // Night slot, empty battery, fully active: cannot be paid for.
        let err = stage_cost(&p, 1, &[0.0], &[0.0]).unwrap_err();
        assert!(matches!(err, Error::InfeasibleAction { .. }));
        // Full sleep with nothing stored is the forced shutdown and is allowed.
        assert!(stage_cost(&p, 1, &[0.0], &[1.0]).is_ok());
        assert!(matches!(
            stage_cost(&p, 1, &[0.0, 0.0], &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn evaluate_rejects_bad_shapes() {
        let p = small(2);
        assert!(matches!(
            evaluate_policy(&p, &vec![vec![0.0; 2]; 23]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            evaluate_policy(&p, &vec![vec![0.0; 3]; 24]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(evaluate_policy(&p, &vec![vec![1.5; 2]; 24]).is_err());
    }

    #[test]
    fn all_asleep_blocks_every_relay_user() {
        let p = small(2);
        let pol = evaluate_policy(&p, &vec![vec![1.0; 2]; 24]).unwrap();
        for s in &pol.slots {
            assert_eq!(s.outcome.rs_blocking, vec![1.0, 1.0]);
        }
    }

    #[test]
    fn awake_with_ample_harvest_fills_battery() {
        let mut s = diurnal_scenario(&DiurnalSpec {
            relays: 2,
            grid_unit_j: 20_000.0,
            ..DiurnalSpec::default()
        });
        for row in &mut s.profiles.harvest_w {
            row.iter_mut().for_each(|h| *h = 1_000.0);
        }
        let p = Problem::new(&s).unwrap();
        let pol = evaluate_policy(&p, &vec![vec![0.0; 2]; 24]).unwrap();
        assert!(!pol.any_clamped());
        let mut last = p.initial_battery();
        for rec in &pol.slots {
            assert!(rec.battery_end[0] >= last);
            last = rec.battery_end[0];
            assert_eq!(rec.sleep, vec![0.0, 0.0]);
        }
        assert_eq!(last, p.grid.capacity());
    }

    #[test]
    fn unaffordable_entries_are_clamped_and_flagged() {
        let p = small(1);
        let pol = evaluate_policy(&p, &vec![vec![0.0]; 24]).unwrap();
        assert!(pol.any_clamped());
        for rec in &pol.slots {
            if rec.clamped[0] {
                assert!(rec.sleep[0] > 0.0);
            }
        }
    }

    #[test]
    fn evaluation_is_idempotent() {
        let p = small(2);
        let m: Vec<Vec<f64>> = (0..24).map(|i| vec![(i % 5) as f64 / 4.0, 0.5]).collect();
        let a = evaluate_policy(&p, &m).unwrap();
        let b = evaluate_policy(&p, &a.sleep_matrix()).unwrap();
        assert_eq!(a.total_cost, b.total_cost);
        assert_eq!(a.sleep_matrix(), b.sleep_matrix());
    }
}
