//! A scenario compiled into per-slot quantities that do not depend on the
//! sleep decision, plus the slot evaluation that does.

use serde::Serialize;

use crate::energy::{BatteryGrid, PowerParams, RelaySlot};
use crate::error::{Error, Result};
use crate::loadmodel::{
    admission_threshold, blocking_geometric, expected_utilization, resource_split, station_load, DemandKernels,
    ResourceSplit, SlotTraffic,
};
use crate::scenario::Scenario;
use crate::topology::CellLayout;

/// Relay-side slot constants.
#[derive(Debug, Clone, PartialEq)]
pub struct RelayLoad {
    pub arrivals: f64,
    pub load: f64,
    pub limit: f64,
    pub threshold: f64,
    /// Resource-only blocking `ρn^⌈Wnth/γn⌉`.
    pub resource_blocking: f64,
    pub utilization: f64,
    pub saturated: bool,
    pub slot: RelaySlot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotModel {
    pub index: usize,
    pub length: f64,
    pub omega: f64,
    pub traffic: SlotTraffic,
    pub split: ResourceSplit,
    pub relays: Vec<RelayLoad>,
}

/// Everything a slot produces for a given sleep vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotOutcome {
    pub effective_bs_arrivals: f64,
    pub bs_gamma: f64,
    pub bs_load: f64,
    pub bs_threshold: f64,
    pub bs_limit: f64,
    pub bs_utilization: f64,
    pub bs_saturated: bool,
    pub bs_energy: f64,
    pub bs_blocking: f64,
    pub rs_blocking: Vec<f64>,
    pub system_blocking: f64,
    pub cost: f64,
}

/// A validated scenario ready for the solvers.
#[derive(Debug, Clone)]
pub struct Problem {
    pub layout: CellLayout,
    pub power: PowerParams,
    pub kernels: DemandKernels,
    pub slots: Vec<SlotModel>,
    pub grid: BatteryGrid,
    pub initial_index: usize,
    pub psi: f64,
    pub dp_budget: u64,
}

impl Problem {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let layout = scenario.layout()?;
        let power = scenario.power_params();
        let kernels = DemandKernels::new(&layout, &scenario.link)?;
        let grid = BatteryGrid::new(scenario.battery.grid_unit_j, scenario.battery.capacity_j)?;
        let omega = scenario.omega();
        let gamma_n = kernels.gamma_n(scenario.traffic.rate_requirement_bps);

        let mut slots = Vec::with_capacity(scenario.slots());
        for (i, &length) in scenario.slots.lengths_s.iter().enumerate() {
            let traffic = SlotTraffic {
                bs_arrivals: scenario.profiles.bs_arrivals[i],
                rs_arrivals: scenario.profiles.rs_arrivals[i].clone(),
                service_rate: scenario.traffic.service_rate,
                rate_requirement: scenario.traffic.rate_requirement_bps,
            };
            if !(traffic.bs_arrivals > 0.0) {
                return Err(Error::InfeasibleScenario(format!(
                    "slot {i}: the BS-region arrival rate must be positive"
                )));
            }
            let split = resource_split(&traffic, scenario.traffic.total_bandwidth_hz)
                .map_err(|e| Error::InfeasibleScenario(format!("slot {i}: {e}")))?;
            let relays = traffic
                .rs_arrivals
                .iter()
                .zip(&split.rs_limits)
                .zip(&scenario.profiles.harvest_w[i])
                .map(|((&arrivals, &limit), &harvest)| {
                    let load = station_load(arrivals, traffic.service_rate);
                    let u = expected_utilization(load, gamma_n, limit);
                    let util = if limit > 0.0 { u.bandwidth / limit } else { 0.0 };
                    RelayLoad {
                        arrivals,
                        load,
                        limit,
                        threshold: admission_threshold(limit, gamma_n),
                        resource_blocking: blocking_geometric(load, limit, gamma_n),
                        utilization: u.bandwidth,
                        saturated: u.saturated,
                        slot: RelaySlot {
                            harvest,
                            active_power: power.rs_active_power(util),
                            sleep_power: power.rs_sleep_w,
                            length,
                        },
                    }
                })
                .collect();
            slots.push(SlotModel {
                index: i,
                length,
                omega: omega[i],
                traffic,
                split,
                relays,
            });
        }

        let initial_index = grid.floor_index(scenario.initial_battery());
        Ok(Self {
            layout,
            power,
            kernels,
            slots,
            grid,
            initial_index,
            psi: scenario.weights.psi,
            dp_budget: scenario.solver.dp_budget,
        })
    }

    pub fn relays(&self) -> usize {
        self.layout.relays()
    }

    pub fn horizon(&self) -> usize {
        self.slots.len()
    }

    pub fn initial_battery(&self) -> f64 {
        self.grid.level(self.initial_index)
    }

    /// Full joint evaluation of slot `i` under sleep vector `sleep`.
    pub fn evaluate_slot(&self, i: usize, sleep: &[f64]) -> SlotOutcome {
        let slot = &self.slots[i];
        let rs_blocking: Vec<f64> = slot
            .relays
            .iter()
            .zip(sleep)
            .map(|(r, &p)| rs_blocking(p, r.resource_blocking))
            .collect();
        self.joint(i, sleep, rs_blocking)
    }

    /// Stage cost of slot `i`; equal to `evaluate_slot(i, sleep).cost`.
    pub fn joint_cost(&self, i: usize, sleep: &[f64]) -> f64 {
        self.joint(i, sleep, Vec::new()).cost
    }

    fn joint(&self, i: usize, sleep: &[f64], per_relay: Vec<f64>) -> SlotOutcome {
        let slot = &self.slots[i];
        let t = &slot.traffic;
        let lambda_eff = t.bs_arrivals
            + t.rs_arrivals
                .iter()
                .zip(sleep)
                .zip(&self.kernels.gains)
                .map(|((l, p), j)| l * (1.0 - p) / j + l * p)
                .sum::<f64>();
        let gamma = self.kernels.gamma0(t, sleep);
        let relayed: f64 = slot
            .relays
            .iter()
            .zip(sleep)
            .map(|(r, &p)| r.arrivals * rs_blocking(p, r.resource_blocking))
            .sum();
        self.finish(slot, lambda_eff, gamma, t.total_arrivals(), relayed, per_relay)
    }

    /// Slot evaluation with relay `n` as the only relay in the cell: the
    /// per-relay cost used by the reduced DP and the greedy rule.
    pub fn relay_cost(&self, i: usize, n: usize, sleep: f64) -> f64 {
        let slot = &self.slots[i];
        let t = &slot.traffic;
        let r = &slot.relays[n];
        let lambda_eff = t.bs_arrivals + (r.arrivals * (1.0 - sleep) / self.kernels.gains[n] + r.arrivals * sleep);
        let gamma = self.kernels.gamma0_single(t, n, sleep);
        let p_n = rs_blocking(sleep, r.resource_blocking);
        self.finish(
            slot,
            lambda_eff,
            gamma,
            t.bs_arrivals + r.arrivals,
            r.arrivals * p_n,
            Vec::new(),
        )
        .cost
    }

    fn finish(
        &self,
        slot: &SlotModel,
        lambda_eff: f64,
        gamma: f64,
        arrivals: f64,
        relayed_blocked: f64,
        rs_blocking: Vec<f64>,
    ) -> SlotOutcome {
        let t = &slot.traffic;
        let limit = slot.split.bs_limit;
        let load = station_load(lambda_eff, t.service_rate);
        let u = expected_utilization(load, gamma, limit);
        let bs_blocking = blocking_geometric(load, limit, gamma);
        let bs_energy = self.power.bs_power(u.bandwidth / limit) * slot.length;
        let system_blocking = (t.bs_arrivals * bs_blocking + relayed_blocked) / arrivals;
        SlotOutcome {
            effective_bs_arrivals: lambda_eff,
            bs_gamma: gamma,
            bs_load: load,
            bs_threshold: admission_threshold(limit, gamma),
            bs_limit: limit,
            bs_utilization: u.bandwidth,
            bs_saturated: u.saturated,
            bs_energy,
            bs_blocking,
            rs_blocking,
            system_blocking,
            cost: bs_energy + self.psi * slot.omega * system_blocking,
        }
    }
}

fn rs_blocking(sleep: f64, resource_blocking: f64) -> f64 {
    sleep + (1.0 - sleep) * resource_blocking
}
