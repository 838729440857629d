//! Cell geometry and the distance-only link rate model.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson, DEFAULT_TOLERANCE};

/// A BS cell of radius `bs_radius` with `relays` edge relays, each covering
/// a disc of radius `rs_radius` centred `bs_radius - 2 * rs_radius` from the BS.
#[derive(Debug, Clone, PartialEq)]
pub struct CellLayout {
    bs_radius: f64,
    rs_radius: f64,
    relays: usize,
    rs_distance: f64,
    rs_angles: Vec<f64>,
}

impl CellLayout {
    pub fn new(bs_radius: f64, rs_radius: f64, relays: usize) -> Result<Self> {
        if !(rs_radius > 0.0) || !(bs_radius > 2.0 * rs_radius) || !bs_radius.is_finite() {
            return Err(Error::InvalidGeometry(format!(
                "need R > 2r > 0, got R = {bs_radius}, r = {rs_radius}"
            )));
        }
        if relays == 0 {
            return Err(Error::InvalidGeometry("need at least one relay".into()));
        }
        if relays as f64 * rs_radius * rs_radius >= bs_radius * bs_radius {
            return Err(Error::InvalidGeometry(format!(
                "{relays} relay discs of radius {rs_radius} m cover the whole cell"
            )));
        }
        let rs_angles = (0..relays).map(|k| 2.0 * PI * k as f64 / relays as f64).collect();
        Ok(Self {
            bs_radius,
            rs_radius,
            relays,
            rs_distance: bs_radius - 2.0 * rs_radius,
            rs_angles,
        })
    }

    pub fn bs_radius(&self) -> f64 {
        self.bs_radius
    }

    pub fn rs_radius(&self) -> f64 {
        self.rs_radius
    }

    pub fn relays(&self) -> usize {
        self.relays
    }

    /// BS-to-relay distance, `R - 2r`.
    pub fn rs_distance(&self) -> f64 {
        self.rs_distance
    }

    pub fn rs_angles(&self) -> &[f64] {
        &self.rs_angles
    }

    /// Cartesian relay centres with the BS at the origin.
    pub fn rs_positions(&self) -> Vec<(f64, f64)> {
        self.rs_angles
            .iter()
            .map(|a| (self.rs_distance * a.cos(), self.rs_distance * a.sin()))
            .collect()
    }

    /// Area of one relay disc.
    pub fn relay_area(&self) -> f64 {
        PI * self.rs_radius * self.rs_radius
    }

    /// Area served only by the BS.
    pub fn bs_only_area(&self) -> f64 {
        PI * self.bs_radius * self.bs_radius - self.relays as f64 * self.relay_area()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    /// BS to user.
    Direct,
    /// Relay to user.
    Access,
    /// BS to relay.
    Backhaul,
}

/// Path loss `A + B log10(d)` in dB, `d` in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLoss {
    pub intercept_db: f64,
    pub slope_db: f64,
}

impl PathLoss {
    pub fn gain(&self, distance: f64) -> f64 {
        10f64.powf(-(self.intercept_db + self.slope_db * distance.log10()) / 10.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LinkInterference {
    #[serde(default)]
    pub direct: f64,
    #[serde(default)]
    pub access: f64,
    #[serde(default)]
    pub backhaul: f64,
}

/// Link budget parameters shared by every link kind.
///
/// Noise power is `10^((N0 - 30) / 10) * noise_bandwidth_hz` watts. The
/// reference band is fixed per model, so efficiency depends on distance only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkModel {
    pub direct: PathLoss,
    pub access: PathLoss,
    pub backhaul: PathLoss,
    pub bs_tx_power_w: f64,
    /// Listed as 40 W alongside the BS value; kept separate so it can differ.
    pub rs_tx_power_w: f64,
    pub noise_density_dbm_hz: f64,
    #[serde(default = "default_noise_bandwidth")]
    pub noise_bandwidth_hz: f64,
    #[serde(default)]
    pub interference_w: LinkInterference,
}

fn default_noise_bandwidth() -> f64 {
    1.0
}

impl Default for LinkModel {
    fn default() -> Self {
        Self {
            direct: PathLoss {
                intercept_db: 91.3,
                slope_db: 3.4,
            },
            access: PathLoss {
                intercept_db: 76.8,
                slope_db: 7.4,
            },
            backhaul: PathLoss {
                intercept_db: 88.3,
                slope_db: 3.1,
            },
            bs_tx_power_w: 40.0,
            rs_tx_power_w: 40.0,
            noise_density_dbm_hz: -64.5,
            noise_bandwidth_hz: default_noise_bandwidth(),
            interference_w: LinkInterference::default(),
        }
    }
}

impl LinkModel {
    pub fn path_loss(&self, kind: LinkKind) -> PathLoss {
        match kind {
            LinkKind::Direct => self.direct,
            LinkKind::Access => self.access,
            LinkKind::Backhaul => self.backhaul,
        }
    }

    pub fn tx_power(&self, kind: LinkKind) -> f64 {
        match kind {
            LinkKind::Access => self.rs_tx_power_w,
            LinkKind::Direct | LinkKind::Backhaul => self.bs_tx_power_w,
        }
    }

    pub fn interference(&self, kind: LinkKind) -> f64 {
        match kind {
            LinkKind::Direct => self.interference_w.direct,
            LinkKind::Access => self.interference_w.access,
            LinkKind::Backhaul => self.interference_w.backhaul,
        }
    }

    pub fn noise_power_w(&self) -> f64 {
        10f64.powf((self.noise_density_dbm_hz - 30.0) / 10.0) * self.noise_bandwidth_hz
    }

    pub fn sinr(&self, kind: LinkKind, distance: f64) -> Result<f64> {
        if !(distance > 0.0) {
            return Err(Error::NonPositiveDistance(distance));
        }
        let signal = self.tx_power(kind) * self.path_loss(kind).gain(distance);
        Ok(signal / (self.noise_power_w() + self.interference(kind)))
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let checks = [
            (self.bs_tx_power_w > 0.0, "bs_tx_power_w must be positive"),
            (self.rs_tx_power_w > 0.0, "rs_tx_power_w must be positive"),
            (self.noise_bandwidth_hz > 0.0, "noise_bandwidth_hz must be positive"),
            (
                self.noise_density_dbm_hz.is_finite(),
                "noise_density_dbm_hz must be finite",
            ),
            (
                self.interference_w.direct >= 0.0
                    && self.interference_w.access >= 0.0
                    && self.interference_w.backhaul >= 0.0,
                "interference must be non-negative",
            ),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::InvalidScenario(format!("link: {msg}")));
            }
        }
        Ok(())
    }
}

/// Spectral efficiency `log2(1 + SINR)` in bit/s/Hz.
pub fn link_rate(kind: LinkKind, distance: f64, model: &LinkModel) -> Result<f64> {
    let sinr = model.sinr(kind, distance)?;
    Ok(sinr.ln_1p() / std::f64::consts::LN_2)
}

/// Bandwidth (Hz) a user with rate requirement `rate_bps` needs on this link.
pub fn bandwidth_demand(kind: LinkKind, distance: f64, rate_bps: f64, model: &LinkModel) -> Result<f64> {
    let c = link_rate(kind, distance, model)?;
    if c <= 0.0 {
        return Err(Error::ZeroRateLink { distance });
    }
    Ok(rate_bps / c)
}

/// `∫ l / C(l) dl` over `[l_lo, l_hi]`, the radial kernel behind every
/// mean-demand term of the load model. The integrand is taken as 0 at `l = 0`.
pub fn radial_inverse_rate_integral(kind: LinkKind, l_lo: f64, l_hi: f64, model: &LinkModel) -> Result<f64> {
    if !(l_lo >= 0.0) || !(l_hi > l_lo) {
        return Err(Error::InvalidArgument(format!(
            "integration range must satisfy 0 <= lo < hi, got [{l_lo}, {l_hi}]"
        )));
    }
    let integrand = |l: f64| -> Result<f64> {
        if l == 0.0 {
            return Ok(0.0);
        }
        let c = link_rate(kind, l, model)?;
        if c <= 0.0 {
            return Err(Error::IntegrandSingularity { lo: l_lo, hi: l_hi });
        }
        Ok(l / c)
    };
    adaptive_simpson(integrand, l_lo, l_hi, DEFAULT_TOLERANCE)
}
