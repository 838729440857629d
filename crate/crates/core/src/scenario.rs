//! Scenario files: a single JSON document holding geometry, link and power
//! parameters, per-slot profiles, battery settings and cost weights.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::energy::PowerParams;
use crate::error::{Error, Result};
use crate::topology::{CellLayout, LinkModel};

/// Bundled 24-hour scenario.
pub const DEFAULT_SCENARIO_JSON: &str = include_str!("../data/default_scenario.json");

/// Default joint DP budget, in (state, joint action) evaluations.
pub const DEFAULT_DP_BUDGET: u64 = 50_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub geometry: Geometry,
    pub link: LinkModel,
    pub power: PowerConfig,
    pub traffic: TrafficConfig,
    pub slots: SlotGrid,
    pub profiles: Profiles,
    pub battery: BatteryConfig,
    pub weights: Weights,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub bs_radius_m: f64,
    pub rs_radius_m: f64,
    pub relays: usize,
}

/// Power model constants. Transmit powers come from the link section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerConfig {
    pub bs_static_w: f64,
    pub bs_load_slope: f64,
    pub rs_static_w: f64,
    pub rs_load_slope: f64,
    pub rs_sleep_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficConfig {
    pub service_rate: f64,
    pub rate_requirement_bps: f64,
    pub total_bandwidth_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotGrid {
    pub lengths_s: Vec<f64>,
}

/// Per-slot inputs. Relay-indexed profiles are `[slot][relay]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Profiles {
    pub bs_arrivals: Vec<f64>,
    pub rs_arrivals: Vec<Vec<f64>>,
    pub harvest_w: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryConfig {
    pub capacity_j: f64,
    /// Defaults to half the capacity.
    #[serde(default)]
    pub initial_j: Option<f64>,
    /// Battery metering and action grid unit.
    pub grid_unit_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    /// Joules per unit of blocking probability.
    pub psi: f64,
    /// Per-slot blocking sensitivity; uniform `1 / I` when absent.
    #[serde(default)]
    pub omega: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_budget")]
    pub dp_budget: u64,
}

fn default_budget() -> u64 {
    DEFAULT_DP_BUDGET
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dp_budget: DEFAULT_DP_BUDGET,
        }
    }
}

impl Scenario {
    pub fn bundled_default() -> Self {
        Self::from_json(DEFAULT_SCENARIO_JSON).expect("bundled scenario parses")
    }

    /// Parses and validates a scenario document.
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::Json {
            context: "scenario".into(),
            source: e,
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Json { source, .. } => Error::Json {
                context: path.display().to_string(),
                source,
            },
            other => other,
        })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }

    pub fn slots(&self) -> usize {
        self.slots.lengths_s.len()
    }

    pub fn relays(&self) -> usize {
        self.geometry.relays
    }

    pub fn layout(&self) -> Result<CellLayout> {
        CellLayout::new(
            self.geometry.bs_radius_m,
            self.geometry.rs_radius_m,
            self.geometry.relays,
        )
    }

    pub fn power_params(&self) -> PowerParams {
        PowerParams {
            bs_static_w: self.power.bs_static_w,
            bs_load_slope: self.power.bs_load_slope,
            bs_tx_power_w: self.link.bs_tx_power_w,
            rs_static_w: self.power.rs_static_w,
            rs_load_slope: self.power.rs_load_slope,
            rs_tx_power_w: self.link.rs_tx_power_w,
            rs_sleep_w: self.power.rs_sleep_w,
        }
    }

    pub fn omega(&self) -> Vec<f64> {
        match &self.weights.omega {
            Some(w) => w.clone(),
            None => vec![1.0 / self.slots() as f64; self.slots()],
        }
    }

    pub fn initial_battery(&self) -> f64 {
        self.battery.initial_j.unwrap_or(0.5 * self.battery.capacity_j)
    }

    /// Copy with every arrival rate multiplied by `scale`.
    pub fn with_traffic_scale(&self, scale: f64) -> Self {
        let mut s = self.clone();
        s.profiles.bs_arrivals.iter_mut().for_each(|l| *l *= scale);
        s.profiles.rs_arrivals.iter_mut().flatten().for_each(|l| *l *= scale);
        s
    }

    pub fn with_psi(&self, psi: f64) -> Self {
        let mut s = self.clone();
        s.weights.psi = psi;
        s
    }

    /// Replaces the profiles with the columns of a CSV file:
    /// `slot, length_s, bs_arrivals, rs_arrivals_1..N, harvest_w_1..N`.
    pub fn with_profiles_csv(&self, path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::Reader::from_reader(file);
        let n = self.relays();
        let mut s = self.clone();
        s.slots.lengths_s.clear();
        s.profiles = Profiles {
            bs_arrivals: Vec::new(),
            rs_arrivals: Vec::new(),
            harvest_w: Vec::new(),
        };
        let expected = 3 + 2 * n;
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() != expected {
                return Err(Error::InvalidScenario(format!(
                    "{}: line {}: expected {expected} columns, found {}",
                    path.display(),
                    row + 2,
                    record.len()
                )));
            }
            let values = record
                .iter()
                .enumerate()
                .map(|(col, v)| {
                    v.trim().parse::<f64>().map_err(|_| {
                        Error::InvalidScenario(format!(
                            "{}: line {}, column {}: not a number: {v:?}",
                            path.display(),
                            row + 2,
                            col + 1
                        ))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            s.slots.lengths_s.push(values[1]);
            s.profiles.bs_arrivals.push(values[2]);
            s.profiles.rs_arrivals.push(values[3..3 + n].to_vec());
            s.profiles.harvest_w.push(values[3 + n..].to_vec());
        }
        s.weights.omega = None;
        s.validate()?;
        Ok(s)
    }

    /// Schema and physical-range checks; runs before any computation.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        let i = self.slots();
        let n = self.relays();
        if i == 0 {
            return bad("slots.lengths_s: at least one slot is required".into());
        }
        if n == 0 {
            return bad("geometry.relays: at least one relay is required".into());
        }
        self.layout()?;
        self.link.validate()?;
        self.power_params().validate()?;

        if let Some(k) = self.slots.lengths_s.iter().position(|l| !(l.is_finite() && *l > 0.0)) {
            return bad(format!("slots.lengths_s[{k}]: slot length must be positive"));
        }
        let t = &self.traffic;
        if !(t.service_rate > 0.0 && t.service_rate.is_finite()) {
            return bad("traffic.service_rate: must be positive".into());
        }
        if !(t.rate_requirement_bps >= 0.0 && t.rate_requirement_bps.is_finite()) {
            return bad("traffic.rate_requirement_bps: must be non-negative".into());
        }
        if !(t.total_bandwidth_hz > 0.0 && t.total_bandwidth_hz.is_finite()) {
            return bad("traffic.total_bandwidth_hz: must be positive".into());
        }

        let p = &self.profiles;
        check_len("profiles.bs_arrivals", p.bs_arrivals.len(), i)?;
        check_len("profiles.rs_arrivals", p.rs_arrivals.len(), i)?;
        check_len("profiles.harvest_w", p.harvest_w.len(), i)?;
        for k in 0..i {
            check_len(&format!("profiles.rs_arrivals[{k}]"), p.rs_arrivals[k].len(), n)?;
            check_len(&format!("profiles.harvest_w[{k}]"), p.harvest_w[k].len(), n)?;
        }
        let non_negative = |name: &str, v: &[f64]| -> Result<()> {
            match v.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
                Some(k) => Err(Error::InvalidScenario(format!(
                    "{name}[{k}]: must be finite and non-negative"
                ))),
                None => Ok(()),
            }
        };
        non_negative("profiles.bs_arrivals", &p.bs_arrivals)?;
        for k in 0..i {
            non_negative(&format!("profiles.rs_arrivals[{k}]"), &p.rs_arrivals[k])?;
            non_negative(&format!("profiles.harvest_w[{k}]"), &p.harvest_w[k])?;
        }

        let b = &self.battery;
        if !(b.capacity_j >= 0.0 && b.capacity_j.is_finite()) {
            return bad("battery.capacity_j: must be non-negative".into());
        }
        if !(b.grid_unit_j > 0.0 && b.grid_unit_j.is_finite()) {
            return bad("battery.grid_unit_j: must be positive".into());
        }
        if let Some(b0) = b.initial_j {
            if !(0.0..=b.capacity_j).contains(&b0) {
                return bad("battery.initial_j: must lie in [0, capacity_j]".into());
            }
        }

        let w = &self.weights;
        if !(w.psi >= 0.0 && w.psi.is_finite()) {
            return bad("weights.psi: must be non-negative".into());
        }
        if let Some(omega) = &w.omega {
            check_len("weights.omega", omega.len(), i)?;
            non_negative("weights.omega", omega)?;
            let sum: f64 = omega.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return bad(format!("weights.omega: must sum to 1, sums to {sum}"));
            }
        }
        if self.solver.dp_budget == 0 {
            return bad("solver.dp_budget: must be positive".into());
        }
        Ok(())
    }
}

fn check_len(field: &str, actual: usize, expected: usize) -> Result<()> {
    if actual != expected {
        return Err(Error::InvalidScenario(format!(
            "{field}: expected {expected} entries, found {actual}"
        )));
    }
    Ok(())
}

/// Diurnal traffic shape in `[trough, 1]`: minimum at 04:00, maximum at
/// 20:00, raised-cosine on both the 16 h rise and the 8 h fall.
pub fn diurnal_traffic(hour: f64, trough: f64) -> f64 {
    let h = hour.rem_euclid(24.0);
    let phase = if (4.0..20.0).contains(&h) {
        (h - 4.0) / 16.0
    } else {
        1.0 - (h - 20.0).rem_euclid(24.0) / 8.0
    };
    trough + (1.0 - trough) * 0.5 * (1.0 - (PI * phase).cos())
}

/// Solar harvest shape `max(0, sin(π (t - 6) / 12))`.
pub fn solar_harvest(hour: f64) -> f64 {
    let h = hour.rem_euclid(24.0);
    (PI * (h - 6.0) / 12.0).sin().max(0.0)
}

/// Parameters of the bundled diurnal scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct DiurnalSpec {
    pub relays: usize,
    pub peak_bs_arrivals: f64,
    pub peak_rs_arrivals: f64,
    pub trough_fraction: f64,
    pub peak_harvest_w: f64,
    pub capacity_j: f64,
    pub grid_unit_j: f64,
    pub psi: f64,
}

impl Default for DiurnalSpec {
    fn default() -> Self {
        Self {
            relays: 6,
            peak_bs_arrivals: 20.0,
            peak_rs_arrivals: 5.0,
            trough_fraction: 0.1,
            peak_harvest_w: 150.0,
            capacity_j: 1.8e6,
            grid_unit_j: 5_000.0,
            psi: 2.0e7,
        }
    }
}

/// Builds 24 one-hour slots, sampling the shapes at slot midpoints.
pub fn diurnal_scenario(spec: &DiurnalSpec) -> Scenario {
    let hours: Vec<f64> = (0..24).map(|h| h as f64 + 0.5).collect();
    let traffic: Vec<f64> = hours
        .iter()
        .map(|&h| diurnal_traffic(h, spec.trough_fraction))
        .collect();
    Scenario {
        geometry: Geometry {
            bs_radius_m: 800.0,
            rs_radius_m: 100.0,
            relays: spec.relays,
        },
        link: LinkModel::default(),
        power: PowerConfig {
            bs_static_w: 750.0,
            bs_load_slope: 19.3,
            rs_static_w: 40.0,
            rs_load_slope: 9.6,
            rs_sleep_w: 10.0,
        },
        traffic: TrafficConfig {
            service_rate: 1.0,
            rate_requirement_bps: 200e3,
            total_bandwidth_hz: 30e6,
        },
        slots: SlotGrid {
            lengths_s: vec![3600.0; 24],
        },
        profiles: Profiles {
            bs_arrivals: traffic.iter().map(|f| f * spec.peak_bs_arrivals).collect(),
            rs_arrivals: traffic
                .iter()
                .map(|f| vec![f * spec.peak_rs_arrivals; spec.relays])
                .collect(),
            harvest_w: hours
                .iter()
                .map(|&h| vec![solar_harvest(h) * spec.peak_harvest_w; spec.relays])
                .collect(),
        },
        battery: BatteryConfig {
            capacity_j: spec.capacity_j,
            initial_j: None,
            grid_unit_j: spec.grid_unit_j,
        },
        weights: Weights {
            psi: spec.psi,
            omega: None,
        },
        solver: SolverConfig::default(),
        seed: 2026,
    }
}
