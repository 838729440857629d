//! Station energy accounting, battery dynamics and the relay action grid.
//!
//! Battery quantities are energies in joules, harvest and station draw are
//! powers in watts; slot lengths convert between the two explicitly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear load-dependent power model for the BS and the relays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerParams {
    pub bs_static_w: f64,
    pub bs_load_slope: f64,
    pub bs_tx_power_w: f64,
    pub rs_static_w: f64,
    pub rs_load_slope: f64,
    pub rs_tx_power_w: f64,
    pub rs_sleep_w: f64,
}

impl Default for PowerParams {
    fn default() -> Self {
        Self {
            bs_static_w: 750.0,
            bs_load_slope: 19.3,
            bs_tx_power_w: 40.0,
            rs_static_w: 40.0,
            rs_load_slope: 9.6,
            rs_tx_power_w: 40.0,
            rs_sleep_w: 10.0,
        }
    }
}

impl PowerParams {
    /// BS draw at bandwidth utilisation ratio `util` (W).
    pub fn bs_power(&self, util: f64) -> f64 {
        self.bs_static_w + self.bs_load_slope * self.bs_tx_power_w * util
    }

    /// Active relay draw at utilisation ratio `util` (W).
    pub fn rs_active_power(&self, util: f64) -> f64 {
        self.rs_static_w + self.rs_load_slope * self.rs_tx_power_w * util
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let all = [
            self.bs_static_w,
            self.bs_load_slope,
            self.bs_tx_power_w,
            self.rs_static_w,
            self.rs_load_slope,
            self.rs_tx_power_w,
            self.rs_sleep_w,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidScenario(
                "power parameters must be finite and non-negative".into(),
            ));
        }
        if !(self.rs_sleep_w > 0.0) {
            return Err(Error::InvalidScenario("rs_sleep_w must be positive".into()));
        }
        if !(self.rs_static_w > self.rs_sleep_w) {
            return Err(Error::DegeneratePowers {
                active: self.rs_static_w,
                sleep: self.rs_sleep_w,
            });
        }
        Ok(())
    }
}

/// Ratio `W / Wth`, with an idle station at zero limit reported as 0.
pub fn utilization_ratio(used: f64, limit: f64) -> Result<f64> {
    if limit > 0.0 {
        Ok(used / limit)
    } else if used <= 0.0 {
        Ok(0.0)
    } else {
        Err(Error::ZeroBandwidthLimit)
    }
}

/// BS energy over a slot of `length` seconds.
pub fn bs_slot_energy(used: f64, limit: f64, params: &PowerParams, length: f64) -> Result<f64> {
    if !(limit > 0.0) {
        return Err(Error::ZeroBandwidthLimit);
    }
    Ok(params.bs_power(used / limit) * length)
}

/// Relay energy over a slot, sleeping a fraction `sleep` of it.
pub fn rs_slot_energy(used: f64, limit: f64, sleep: f64, params: &PowerParams, length: f64) -> Result<f64> {
    if !(limit > 0.0) {
        return Err(Error::ZeroBandwidthLimit);
    }
    let active = params.rs_active_power(used / limit);
    Ok(((1.0 - sleep) * active + sleep * params.rs_sleep_w) * length)
}

/// Largest sleep ratio the relay must accept when it can spend `draw` joules
/// from its battery on top of harvesting `harvest` watts.
pub fn max_sleep_ratio(draw: f64, harvest: f64, active: f64, sleep_power: f64, length: f64) -> Result<f64> {
    if !(active > sleep_power) {
        return Err(Error::DegeneratePowers {
            active,
            sleep: sleep_power,
        });
    }
    let ratio = (active - (draw / length + harvest)) / (active - sleep_power);
    Ok(ratio.clamp(0.0, 1.0))
}

/// Where a slot's relay energy went. All fields in joules.
///
/// `harvested + drawn == consumed + stored + spilled + quantized`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub harvested: f64,
    pub drawn: f64,
    pub consumed: f64,
    pub stored: f64,
    /// Surplus lost because the battery was full.
    pub spilled: f64,
    /// Energy lost rounding the battery down to its metering grid.
    pub quantized: f64,
    /// Demand that could not be met at all (forced shutdown); not in the identity.
    pub shortfall: f64,
}

impl EnergyLedger {
    pub fn residual(&self) -> f64 {
        (self.harvested + self.drawn) - (self.consumed + self.stored + self.spilled + self.quantized)
    }
}

/// Battery level after one slot, clamped to `[0, capacity]`.
pub fn battery_step(
    battery: f64,
    harvest: f64,
    sleep: f64,
    active: f64,
    sleep_power: f64,
    length: f64,
    capacity: f64,
) -> Result<f64> {
    let consumed = ((1.0 - sleep) * active + sleep * sleep_power) * length;
    let pre = battery + harvest * length - consumed;
    if pre < -feasibility_slack(battery, consumed) {
        return Err(Error::InfeasibleAction { pre_clamp: pre });
    }
    Ok(pre.clamp(0.0, capacity))
}

fn feasibility_slack(battery: f64, consumed: f64) -> f64 {
    1e-9 * (1.0 + battery.abs() + consumed.abs())
}

/// Battery metering grid: levels are integer multiples of `unit` up to the
/// largest multiple not exceeding the capacity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryGrid {
    unit: f64,
    top: usize,
}

impl BatteryGrid {
    pub fn new(unit: f64, capacity: f64) -> Result<Self> {
        if !(unit > 0.0) || !unit.is_finite() {
            return Err(Error::InvalidScenario("battery grid unit must be positive".into()));
        }
        if !(capacity >= 0.0) {
            return Err(Error::InvalidScenario("battery capacity must be non-negative".into()));
        }
        let top = (capacity / unit + 1e-9).floor() as usize;
        Ok(Self { unit, top })
    }

    pub fn unit(&self) -> f64 {
        self.unit
    }

    /// Number of grid levels, `0..=top`.
    pub fn levels(&self) -> usize {
        self.top + 1
    }

    pub fn capacity(&self) -> f64 {
        self.level(self.top)
    }

    pub fn level(&self, index: usize) -> f64 {
        index as f64 * self.unit
    }

    /// Largest grid index whose level does not exceed `energy`.
    pub fn floor_index(&self, energy: f64) -> usize {
        if energy <= 0.0 {
            return 0;
        }
        ((energy / self.unit + 1e-9).floor() as usize).min(self.top)
    }
}

/// Relay conditions for one slot that the action grid depends on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaySlot {
    pub harvest: f64,
    pub active_power: f64,
    pub sleep_power: f64,
    pub length: f64,
}

impl RelaySlot {
    pub fn consumption(&self, sleep: f64) -> f64 {
        ((1.0 - sleep) * self.active_power + sleep * self.sleep_power) * self.length
    }
}

/// One candidate relay decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action {
    /// Energy taken from the battery (negative when charging).
    pub draw: f64,
    pub sleep: f64,
}

/// Outcome of a relay slot on the battery grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    /// Sleep ratio actually applied.
    pub sleep: f64,
    pub next: f64,
    pub next_index: usize,
    pub ledger: EnergyLedger,
    /// Even full sleep exceeded the stored energy.
    pub forced: bool,
}

/// Applies sleep ratio `sleep` to a relay holding `battery` joules, snapping
/// the result down onto `grid`. Returns `None` when the battery cannot cover
/// the slot at this ratio.
pub fn grid_transition(battery: f64, sleep: f64, slot: &RelaySlot, grid: &BatteryGrid) -> Option<Transition> {
    let harvested = slot.harvest * slot.length;
    let consumed = slot.consumption(sleep);
    let next = battery_step(
        battery,
        slot.harvest,
        sleep,
        slot.active_power,
        slot.sleep_power,
        slot.length,
        grid.capacity(),
    )
    .ok()?;
    let pre = battery + harvested - consumed;
    let next_index = grid.floor_index(next);
    let snapped = grid.level(next_index);
    let ledger = EnergyLedger {
        harvested,
        drawn: (battery - snapped).max(0.0),
        consumed,
        stored: (snapped - battery).max(0.0),
        spilled: (pre - grid.capacity()).max(0.0),
        quantized: next - snapped + pre.min(0.0),
        shortfall: 0.0,
    };
    Some(Transition {
        sleep,
        next: snapped,
        next_index,
        ledger,
        forced: false,
    })
}

/// The relay sleeps the whole slot and drains whatever is stored; the
/// remaining sleep demand is unmet.
pub fn forced_shutdown(battery: f64, slot: &RelaySlot) -> Transition {
    let harvested = slot.harvest * slot.length;
    let demand = slot.consumption(1.0);
    let consumed = (battery + harvested).min(demand);
    Transition {
        sleep: 1.0,
        next: 0.0,
        next_index: 0,
        ledger: EnergyLedger {
            harvested,
            drawn: battery,
            consumed,
            stored: 0.0,
            spilled: 0.0,
            quantized: 0.0,
            shortfall: demand - consumed,
        },
        forced: true,
    }
}

/// Candidate actions for a relay holding `battery` joules.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSet {
    /// Sorted by ascending sleep ratio (descending draw).
    pub actions: Vec<Action>,
    /// No action is feasible; the relay is forced fully asleep.
    pub forced: bool,
}

/// Enumerates battery draws from full sleep (`-(H - Ps) L`) up to
/// `min(B, (Pn - H) L)`. Interior draws are multiples of `unit`, so grid
/// levels map to grid levels; both endpoints are always included.
pub fn enumerate_actions(battery: f64, slot: &RelaySlot, unit: f64) -> Result<ActionSet> {
    if !(unit > 0.0) {
        return Err(Error::InvalidArgument("action grid unit must be positive".into()));
    }
    if !(slot.active_power > slot.sleep_power) {
        return Err(Error::DegeneratePowers {
            active: slot.active_power,
            sleep: slot.sleep_power,
        });
    }
    let lower = (slot.sleep_power - slot.harvest) * slot.length;
    let upper = battery.min((slot.active_power - slot.harvest) * slot.length);
    if upper < lower - feasibility_slack(battery, lower.abs()) {
        return Ok(ActionSet {
            actions: vec![Action {
                draw: lower,
                sleep: 1.0,
            }],
            forced: true,
        });
    }
    let upper = upper.max(lower);

    let mut draws = vec![upper];
    let top = (upper / unit).ceil() as i64 - 1;
    let bottom = (lower / unit).floor() as i64 + 1;
    let mut k = top;
    while k >= bottom {
        let d = k as f64 * unit;
        if d < upper && d > lower {
            draws.push(d);
        }
        k -= 1;
    }
    if lower < upper {
        draws.push(lower);
    }

    let mut actions: Vec<Action> = Vec::with_capacity(draws.len());
    for draw in draws {
        let sleep = max_sleep_ratio(draw, slot.harvest, slot.active_power, slot.sleep_power, slot.length)?;
        // Near the endpoints the ratio is exactly 0 or 1; snap rounding noise.
        let sleep = if (sleep - 1.0).abs() < 1e-12 {
            1.0
        } else if sleep < 1e-12 {
            0.0
        } else {
            sleep
        };
        if actions.last().is_some_and(|a| a.sleep == sleep) {
            continue;
        }
        actions.push(Action { draw, sleep });
    }
    Ok(ActionSet { actions, forced: false })
}
