#![allow(dead_code)]

use rand::Rng;
use relaysleep::energy::{enumerate_actions, forced_shutdown, grid_transition};
use relaysleep::scenario::{diurnal_scenario, DiurnalSpec};
use relaysleep::{Problem, Scenario};

/// A small random scenario: coarse battery grid, half-hour slots.
pub fn small_scenario<R: Rng>(rng: &mut R, relays: usize, slots: usize) -> Scenario {
    let mut s = diurnal_scenario(&DiurnalSpec {
        relays,
        ..DiurnalSpec::default()
    });
    let unit = 10_000.0;
    let levels = rng.random_range(3..8);
    s.slots.lengths_s = vec![1800.0; slots];
    s.profiles.bs_arrivals = (0..slots).map(|_| rng.random_range(1.0..25.0)).collect();
    s.profiles.rs_arrivals = (0..slots)
        .map(|_| (0..relays).map(|_| rng.random_range(0.2..6.0)).collect())
        .collect();
    s.profiles.harvest_w = (0..slots)
        .map(|_| {
            (0..relays)
                .map(|_| {
                    if rng.random_bool(0.3) {
                        0.0
                    } else {
                        rng.random_range(0.0..120.0)
                    }
                })
                .collect()
        })
        .collect();
    s.battery.grid_unit_j = unit;
    s.battery.capacity_j = unit * levels as f64;
    s.battery.initial_j = Some(unit * rng.random_range(0..=levels) as f64);
    s.weights.psi = 10f64.powf(rng.random_range(5.0..8.5));
    s.weights.omega = None;
    s.validate().unwrap();
    s
}

/// Relay transition written against the public energy API: the requested
/// ratio if affordable, else full sleep, else forced shutdown.
pub fn step(problem: &Problem, i: usize, n: usize, battery: f64, sleep: f64) -> (f64, f64) {
    let slot = &problem.slots[i].relays[n].slot;
    let t = grid_transition(battery, sleep, slot, &problem.grid)
        .or_else(|| grid_transition(battery, 1.0, slot, &problem.grid))
        .unwrap_or_else(|| forced_shutdown(battery, slot));
    (t.sleep, t.next)
}

/// Minimum total cost over every action sequence, by exhaustive search.
pub fn brute_force(problem: &Problem) -> f64 {
    fn go(problem: &Problem, i: usize, battery: &[f64]) -> f64 {
        if i == problem.horizon() {
            return 0.0;
        }
        let per_relay: Vec<Vec<(f64, f64)>> = battery
            .iter()
            .enumerate()
            .map(|(n, &b)| {
                let slot = &problem.slots[i].relays[n].slot;
                enumerate_actions(b, slot, problem.grid.unit())
                    .unwrap()
                    .actions
                    .iter()
                    .map(|a| step(problem, i, n, b, a.sleep))
                    .collect()
            })
            .collect();
        let mut best = f64::INFINITY;
        let mut idx = vec![0usize; battery.len()];
        loop {
            let sleep: Vec<f64> = idx.iter().enumerate().map(|(n, &k)| per_relay[n][k].0).collect();
            let next: Vec<f64> = idx.iter().enumerate().map(|(n, &k)| per_relay[n][k].1).collect();
            best = best.min(problem.joint_cost(i, &sleep) + go(problem, i + 1, &next));
            let mut n = 0;
            loop {
                if n == idx.len() {
                    return best;
                }
                idx[n] += 1;
                if idx[n] < per_relay[n].len() {
                    break;
                }
                idx[n] = 0;
                n += 1;
            }
        }
    }
    go(problem, 0, &vec![problem.initial_battery(); problem.relays()])
}

/// Largest per-stage joint action count along any reachable state.
pub fn max_joint_actions(problem: &Problem) -> usize {
    (0..problem.horizon())
        .map(|i| {
            (0..problem.relays())
                .map(|n| {
                    (0..problem.grid.levels())
                        .map(|k| {
                            let slot = &problem.slots[i].relays[n].slot;
                            enumerate_actions(problem.grid.level(k), slot, problem.grid.unit())
                                .unwrap()
                                .actions
                                .len()
                        })
                        .max()
                        .unwrap()
                })
                .product::<usize>()
        })
        .max()
        .unwrap()
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}
