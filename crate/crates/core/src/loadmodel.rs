//! Bandwidth shares, effective loads and blocking probabilities.
//!
//! Each station is a processor-sharing queue with Poisson arrivals. Its
//! user count is geometric with parameter `ρ = λ / (λ + μ)`, so the mean
//! count is `λ / μ` and the tail `P(K ≥ k)` is `ρ^k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{link_rate, radial_inverse_rate_integral, CellLayout, LinkKind, LinkModel};

/// Arrival rates for one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotTraffic {
    /// Arrivals in the BS-only region (users/s).
    pub bs_arrivals: f64,
    /// Arrivals in each relay disc (users/s).
    pub rs_arrivals: Vec<f64>,
    /// Reciprocal of the mean transmission duration (1/s).
    pub service_rate: f64,
    /// Per-user rate requirement (bit/s).
    pub rate_requirement: f64,
}

impl SlotTraffic {
    pub fn total_arrivals(&self) -> f64 {
        self.bs_arrivals + self.rs_arrivals.iter().sum::<f64>()
    }

    pub fn relays(&self) -> usize {
        self.rs_arrivals.len()
    }
}

/// Per-station bandwidth limits for one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceSplit {
    pub bs_limit: f64,
    pub rs_limits: Vec<f64>,
    pub total: f64,
}

/// Splits `total` Hz between the stations in proportion to their arrival rates.
pub fn resource_split(traffic: &SlotTraffic, total: f64) -> Result<ResourceSplit> {
    let lambda = traffic.total_arrivals();
    if !(lambda > 0.0) {
        return Err(Error::ZeroTotalTraffic);
    }
    Ok(ResourceSplit {
        bs_limit: total * traffic.bs_arrivals / lambda,
        rs_limits: traffic.rs_arrivals.iter().map(|l| total * l / lambda).collect(),
        total,
    })
}

/// How many times more BS bandwidth relay `n`'s users need when served over
/// the direct link instead of through the backhaul.
pub fn relay_gain(layout: &CellLayout, link: &LinkModel, n: usize) -> Result<f64> {
    if n >= layout.relays() {
        return Err(Error::InvalidArgument(format!(
            "relay index {n} out of range for {} relays",
            layout.relays()
        )));
    }
    // Every relay sits at the same distance, so the gain is the same for all n.
    let d = layout.rs_distance();
    let outer = radial_inverse_rate_integral(LinkKind::Direct, d, layout.bs_radius(), link)?;
    relay_gain_from(layout, link, outer)
}

fn relay_gain_from(layout: &CellLayout, link: &LinkModel, outer_integral: f64) -> Result<f64> {
    let d = layout.rs_distance();
    let backhaul = link_rate(LinkKind::Backhaul, d, link)?;
    if backhaul <= 0.0 {
        return Err(Error::ZeroRateLink { distance: d });
    }
    let radial = 0.5 * (layout.bs_radius().powi(2) - d * d);
    Ok(outer_integral / (radial / backhaul))
}

/// `λ0' = λ0 + Σ λn (1 - φn) / Jn + Σ λn φn`: users carried by the BS, with
/// backhauled users counted at `1 / Jn` of a direct user.
pub fn effective_bs_arrival(traffic: &SlotTraffic, sleep: &[f64], gains: &[f64]) -> f64 {
    let relayed: f64 = traffic
        .rs_arrivals
        .iter()
        .zip(sleep)
        .zip(gains)
        .map(|((l, p), j)| l * (1.0 - p) / j + l * p)
        .sum();
    traffic.bs_arrivals + relayed
}

/// Mean per-user demand of relay users on the access link (Hz).
pub fn gamma_n(layout: &CellLayout, link: &LinkModel, rate_requirement: f64) -> Result<f64> {
    let r = layout.rs_radius();
    let inner = radial_inverse_rate_integral(LinkKind::Access, 0.0, r, link)?;
    Ok(2.0 * rate_requirement / (r * r) * inner)
}

/// Mean per-user demand at the BS (Hz), for the three user populations it
/// carries: its own region, backhauled relay users and users of sleeping relays.
pub fn gamma0(
    layout: &CellLayout,
    link: &LinkModel,
    traffic: &SlotTraffic,
    sleep: &[f64],
    gains: &[f64],
    rate_requirement: f64,
) -> Result<f64> {
    let kernels = DemandKernels::with_gains(layout, link, gains.to_vec())?;
    Ok(kernels.gamma0_with_rate(traffic, sleep, rate_requirement))
}

/// `ρ = λ / (λ + μ)`.
pub fn station_load(arrivals: f64, service_rate: f64) -> f64 {
    if arrivals <= 0.0 {
        return 0.0;
    }
    arrivals / (arrivals + service_rate)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Utilization {
    /// Expected occupied bandwidth, clamped to the station limit (Hz).
    pub bandwidth: f64,
    /// The unclamped mean exceeded the limit, or the load is unstable.
    pub saturated: bool,
}

/// Mean occupied bandwidth `min(Wth, γ ρ / (1 - ρ))`.
pub fn expected_utilization(load: f64, gamma: f64, limit: f64) -> Utilization {
    if load >= 1.0 {
        return Utilization {
            bandwidth: limit,
            saturated: true,
        };
    }
    let mean = gamma * load / (1.0 - load);
    if mean > limit {
        Utilization {
            bandwidth: limit,
            saturated: true,
        }
    } else {
        Utilization {
            bandwidth: mean,
            saturated: false,
        }
    }
}

/// Admission threshold `⌈Wth / γ⌉`, in users.
pub fn admission_threshold(limit: f64, gamma: f64) -> f64 {
    if limit <= 0.0 {
        0.0
    } else if gamma <= 0.0 {
        f64::INFINITY
    } else {
        (limit / gamma).ceil()
    }
}

/// `ρ^⌈Wth/γ⌉`, pinned to 1 for an unstable load.
pub fn blocking_geometric(load: f64, limit: f64, gamma: f64) -> f64 {
    if load >= 1.0 {
        return 1.0;
    }
    load.powf(admission_threshold(limit, gamma))
}

/// Blocking seen by users of a relay that sleeps a fraction `sleep` of the slot.
pub fn rs_blocking(sleep: f64, load: f64, limit: f64, gamma: f64) -> f64 {
    sleep + (1.0 - sleep) * blocking_geometric(load, limit, gamma)
}

/// Arrival-weighted mixture of per-region blocking probabilities.
pub fn system_blocking(traffic: &SlotTraffic, bs_blocking: f64, rs_blocking: &[f64]) -> Result<f64> {
    if rs_blocking.len() != traffic.relays() {
        return Err(Error::DimensionMismatch {
            what: "relay blocking probabilities",
            expected: traffic.relays(),
            actual: rs_blocking.len(),
        });
    }
    let lambda = traffic.total_arrivals();
    if !(lambda > 0.0) {
        return Err(Error::ZeroTotalTraffic);
    }
    let relayed: f64 = traffic.rs_arrivals.iter().zip(rs_blocking).map(|(l, p)| l * p).sum();
    Ok((traffic.bs_arrivals * bs_blocking + relayed) / lambda)
}

/// Geometry-dependent integrals, computed once per scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandKernels {
    /// `∫_0^{R-2r} l / C_DL(l) dl`
    pub inner_direct: f64,
    /// `∫_{R-2r}^{R} l / C_DL(l) dl`
    pub outer_direct: f64,
    /// `∫_0^{r} l / C_AL(l) dl`
    pub access: f64,
    /// Backhaul efficiency at the relay distance.
    pub backhaul_rate: f64,
    /// Per-relay gain `Jn`.
    pub gains: Vec<f64>,
    rs_distance: f64,
    rs_radius: f64,
    relays: usize,
}

impl DemandKernels {
    pub fn new(layout: &CellLayout, link: &LinkModel) -> Result<Self> {
        let mut k = Self::with_gains(layout, link, Vec::new())?;
        let gain = relay_gain_from(layout, link, k.outer_direct)?;
        k.gains = vec![gain; layout.relays()];
        Ok(k)
    }

    fn with_gains(layout: &CellLayout, link: &LinkModel, gains: Vec<f64>) -> Result<Self> {
        let d = layout.rs_distance();
        let backhaul_rate = link_rate(LinkKind::Backhaul, d, link)?;
        if backhaul_rate <= 0.0 {
            return Err(Error::ZeroRateLink { distance: d });
        }
        Ok(Self {
            inner_direct: radial_inverse_rate_integral(LinkKind::Direct, 0.0, d, link)?,
            outer_direct: radial_inverse_rate_integral(LinkKind::Direct, d, layout.bs_radius(), link)?,
            access: radial_inverse_rate_integral(LinkKind::Access, 0.0, layout.rs_radius(), link)?,
            backhaul_rate,
            gains,
            rs_distance: d,
            rs_radius: layout.rs_radius(),
            relays: layout.relays(),
        })
    }

    pub fn relays(&self) -> usize {
        self.relays
    }

    /// Demand of one BS-region user (Hz per unit rate requirement, times `r0`).
    pub fn bs_region_demand(&self, rate_requirement: f64) -> f64 {
        2.0 * rate_requirement / (self.rs_distance * self.rs_distance) * self.inner_direct
    }

    pub fn gamma_n(&self, rate_requirement: f64) -> f64 {
        2.0 * rate_requirement / (self.rs_radius * self.rs_radius) * self.access
    }

    /// BS mean demand `W0 / K0'`, evaluated from the unnormalised sums so a
    /// zero BS-region arrival rate is still well defined.
    pub fn gamma0(&self, traffic: &SlotTraffic, sleep: &[f64]) -> f64 {
        self.gamma0_with_rate(traffic, sleep, traffic.rate_requirement)
    }

    fn gamma0_with_rate(&self, traffic: &SlotTraffic, sleep: &[f64], r0: f64) -> f64 {
        let mut demand = traffic.bs_arrivals * self.bs_region_demand(r0);
        let mut users = traffic.bs_arrivals;
        let sleeping_demand = 2.0 * r0 / (self.relays as f64 * self.rs_radius * self.rs_radius) * self.outer_direct;
        for ((l, p), j) in traffic.rs_arrivals.iter().zip(sleep).zip(&self.gains) {
            demand += r0 * l * (1.0 - p) / (j * self.backhaul_rate) + sleeping_demand * l * p;
            users += l * (1.0 - p) / j + l * p;
        }
        if users > 0.0 {
            demand / users
        } else {
            self.bs_region_demand(r0)
        }
    }

    /// Single-relay version of [`gamma0`](Self::gamma0): only relay `n`
    /// contributes alongside the BS region.
    pub fn gamma0_single(&self, traffic: &SlotTraffic, n: usize, sleep: f64) -> f64 {
        let r0 = traffic.rate_requirement;
        let l = traffic.rs_arrivals[n];
        let j = self.gains[n];
        let sleeping_demand = 2.0 * r0 / (self.relays as f64 * self.rs_radius * self.rs_radius) * self.outer_direct;
        // Same association order as `gamma0`, so one relay gives identical bits.
        let demand = traffic.bs_arrivals * self.bs_region_demand(r0)
            + (r0 * l * (1.0 - sleep) / (j * self.backhaul_rate) + sleeping_demand * l * sleep);
        let users = traffic.bs_arrivals + (l * (1.0 - sleep) / j + l * sleep);
        if users > 0.0 {
            demand / users
        } else {
            self.bs_region_demand(r0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn traffic(bs: f64, rs: &[f64]) -> SlotTraffic {
        SlotTraffic {
            bs_arrivals: bs,
            rs_arrivals: rs.to_vec(),
            service_rate: 1.0,
            rate_requirement: 200e3,
        }
    }

    #[test]
    fn split_examples() {
        let s = resource_split(&traffic(3.0, &[1.0, 2.0]), 30e6).unwrap();
        assert_relative_eq!(s.bs_limit, 15e6);
        let s = resource_split(&traffic(5.0, &[0.0, 0.0]), 30e6).unwrap();
        assert_eq!(s.bs_limit, 30e6);
        let s = resource_split(&traffic(1.0, &[1.0, 2.0]), 4.0).unwrap();
        assert_eq!((s.bs_limit, s.rs_limits.clone()), (1.0, vec![1.0, 2.0]));
        assert!(matches!(
            resource_split(&traffic(0.0, &[0.0]), 1.0),
            Err(Error::ZeroTotalTraffic)
        ));
    }

    #[test]
    fn effective_arrival_examples() {
        let t = traffic(1.0, &[2.0, 3.0]);
        assert_eq!(effective_bs_arrival(&t, &[1.0, 1.0], &[4.0, 4.0]), 6.0);
        assert_eq!(effective_bs_arrival(&t, &[0.0, 0.0], &[1.0, 1.0]), 6.0);
        let t = traffic(1.0, &[2.0]);
        assert_relative_eq!(effective_bs_arrival(&t, &[0.5], &[4.0]), 2.25);
    }

    #[test]
    fn load_examples() {
        assert_eq!(station_load(0.0, 1.0), 0.0);
        assert_eq!(station_load(2.0, 2.0), 0.5);
        assert_eq!(station_load(3.0, 1.0), 0.75);
    }

    #[test]
    fn utilization_examples() {
        assert_eq!(expected_utilization(0.0, 1.0, 10.0).bandwidth, 0.0);
        let u = expected_utilization(0.5, 1.0, 10.0);
        assert_relative_eq!(u.bandwidth, 1.0);
        assert!(!u.saturated);
        let u = expected_utilization(0.9, 2.0, 10.0);
        assert_eq!(u.bandwidth, 10.0);
        assert!(u.saturated);
        let u = expected_utilization(1.0, 2.0, 10.0);
        assert_eq!(u.bandwidth, 10.0);
        assert!(u.saturated);
    }

    #[test]
    fn geometric_blocking_examples() {
        assert_eq!(blocking_geometric(0.0, 10.0, 1.0), 0.0);
        assert_relative_eq!(blocking_geometric(0.5, 4.0, 1.0), 0.0625);
        assert_eq!(blocking_geometric(0.5, 0.0, 1.0), 1.0);
        assert_eq!(blocking_geometric(0.0, 0.0, 1.0), 1.0);
        assert_eq!(blocking_geometric(1.0, 5.0, 1.0), 1.0);
        // An exact integer ratio is its own ceiling.
        assert_eq!(admission_threshold(8.0, 2.0), 4.0);
        assert_eq!(admission_threshold(8.5, 2.0), 5.0);
    }

    #[test]
    fn relay_blocking_examples() {
        assert_eq!(rs_blocking(1.0, 0.3, 5.0, 1.0), 1.0);
        assert_relative_eq!(rs_blocking(0.0, 0.5, 4.0, 1.0), 0.0625);
        assert_relative_eq!(rs_blocking(0.5, 0.5, 4.0, 1.0), 0.53125);
    }

    #[test]
    fn system_blocking_examples() {
        let t = traffic(2.0, &[1.0, 3.0]);
        assert_relative_eq!(system_blocking(&t, 0.4, &[0.4, 0.4]).unwrap(), 0.4);
        let t = traffic(2.0, &[0.0]);
        assert_relative_eq!(system_blocking(&t, 0.7, &[0.1]).unwrap(), 0.7);
        let t = traffic(1.0, &[1.0]);
        assert_relative_eq!(system_blocking(&t, 0.1, &[0.3]).unwrap(), 0.2);
        assert!(matches!(
            system_blocking(&t, 0.1, &[0.3, 0.3]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            system_blocking(&traffic(0.0, &[0.0]), 0.1, &[0.3]),
            Err(Error::ZeroTotalTraffic)
        ));
    }

    fn flat_link(efficiency: f64) -> LinkModel {
        let flat = crate::topology::PathLoss {
            intercept_db: 0.0,
            slope_db: 0.0,
        };
        let mut m = LinkModel {
            direct: flat,
            access: flat,
            backhaul: flat,
            ..LinkModel::default()
        };
        m.bs_tx_power_w = (2f64.powf(efficiency) - 1.0) * m.noise_power_w();
        m.rs_tx_power_w = m.bs_tx_power_w;
        m
    }

    #[test]
    fn gain_is_one_for_identical_kernels() {
        let layout = CellLayout::new(800.0, 100.0, 3).unwrap();
        let link = flat_link(2.5);
        assert_relative_eq!(relay_gain(&layout, &link, 0).unwrap(), 1.0, max_relative = 1e-10);
        assert!(relay_gain(&layout, &link, 3).is_err());
    }

    #[test]
    fn gain_is_two_for_half_rate_direct_link() {
        let layout = CellLayout::new(800.0, 100.0, 3).unwrap();
        let mut link = flat_link(2.0);
        // Backhaul at 2 bit/s/Hz, direct at 1 bit/s/Hz.
        let noise = link.noise_power_w();
        link.direct.intercept_db = -10.0 * (1.0 / 3.0f64).log10();
        assert_relative_eq!(link.bs_tx_power_w, 3.0 * noise, max_relative = 1e-12);
        assert_relative_eq!(relay_gain(&layout, &link, 1).unwrap(), 2.0, max_relative = 1e-10);
    }

    #[test]
    fn gamma_closed_forms() {
        let layout = CellLayout::new(800.0, 100.0, 2).unwrap();
        let c = 3.0;
        let link = flat_link(c);
        let t = traffic(5.0, &[0.0, 0.0]);
        let g0 = gamma0(&layout, &link, &t, &[0.3, 0.7], &[1.0, 1.0], 200e3).unwrap();
        assert_relative_eq!(g0, 200e3 / c, max_relative = 1e-9);
        assert_relative_eq!(gamma_n(&layout, &link, 200e3).unwrap(), 200e3 / c, max_relative = 1e-9);
        assert_eq!(gamma_n(&layout, &link, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn gamma0_large_gain_limit() {
        let layout = CellLayout::new(800.0, 100.0, 2).unwrap();
        let link = LinkModel::default();
        let k = DemandKernels::new(&layout, &link).unwrap();
        let t = traffic(5.0, &[3.0, 4.0]);
        let g0 = gamma0(&layout, &link, &t, &[0.0, 0.0], &[1e15, 1e15], 200e3).unwrap();
        assert_relative_eq!(g0, k.bs_region_demand(200e3), max_relative = 1e-9);
    }

    #[test]
    fn gamma0_matches_normalised_form() {
        let layout = CellLayout::new(800.0, 100.0, 6).unwrap();
        let link = LinkModel::default();
        let k = DemandKernels::new(&layout, &link).unwrap();
        let t = traffic(40.0, &[10.0, 5.0, 8.0, 12.0, 3.0, 7.0]);
        let sleep = [0.1, 0.9, 0.5, 0.0, 1.0, 0.3];
        let (r0, l0, n, r, d) = (200e3, 40.0, 6.0, 100.0, 600.0);
        let mut num = 2.0 * r0 / (d * d) * k.inner_direct;
        let mut den = 1.0;
        for ((l, p), j) in t.rs_arrivals.iter().zip(&sleep).zip(&k.gains) {
            num += r0 / l0 * l * (1.0 - p) / (j * k.backhaul_rate);
            num += 2.0 * r0 / (n * r * r * l0) * l * k.outer_direct * p;
            den += l * (1.0 - p) / (l0 * j) + l * p / l0;
        }
        assert_relative_eq!(k.gamma0(&t, &sleep), num / den, max_relative = 1e-13);
    }

    #[test]
    fn gamma0_without_bs_region_traffic() {
        let layout = CellLayout::new(800.0, 100.0, 1).unwrap();
        let link = LinkModel::default();
        let k = DemandKernels::new(&layout, &link).unwrap();
        let t = traffic(0.0, &[4.0]);
        let g = k.gamma0(&t, &[1.0]);
        let sleeping = 2.0 * 200e3 / (100.0 * 100.0) * k.outer_direct;
        assert_relative_eq!(g, sleeping, max_relative = 1e-12);
    }

    #[test]
    fn single_relay_view_matches_full_for_one_relay() {
        let layout = CellLayout::new(800.0, 100.0, 1).unwrap();
        let link = LinkModel::default();
        let k = DemandKernels::new(&layout, &link).unwrap();
        let t = traffic(20.0, &[7.0]);
        for p in [0.0, 0.25, 1.0] {
            assert_eq!(k.gamma0(&t, &[p]), k.gamma0_single(&t, 0, p));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn probabilities_in_unit_interval(
            rho in 0.0f64..0.999,
            limit in 0.0f64..1e7,
            gamma in 1.0f64..1e6,
            sleep in 0.0f64..=1.0,
            l0 in 0.0f64..50.0,
            l1 in 0.0f64..50.0,
            extra in 0.01f64..10.0,
        ) {
            let p = blocking_geometric(rho, limit, gamma);
            prop_assert!((0.0..=1.0).contains(&p));
            let q = rs_blocking(sleep, rho, limit, gamma);
            prop_assert!((0.0..=1.0).contains(&q));
            let t = traffic(l0 + extra, &[l1]);
            let s = system_blocking(&t, p, &[q]).unwrap();
            prop_assert!((-1e-15..=1.0 + 1e-15).contains(&s));
        }

        #[test]
        fn geometric_blocking_monotone(
            rho in 0.0f64..0.99,
            drho in 0.0f64..0.5,
            limit in 0.0f64..1e6,
            dlimit in 0.0f64..1e6,
            gamma in 10.0f64..1e5,
        ) {
            let rho2 = (rho + drho).min(0.999);
            prop_assert!(blocking_geometric(rho2, limit, gamma) >= blocking_geometric(rho, limit, gamma));
            prop_assert!(blocking_geometric(rho, limit + dlimit, gamma) <= blocking_geometric(rho, limit, gamma));
        }

        #[test]
        fn relay_blocking_monotone_in_sleep(
            s in 0.0f64..=1.0,
            ds in 0.0f64..=1.0,
            rho in 0.0f64..0.999,
            limit in 0.0f64..1e6,
            gamma in 10.0f64..1e5,
        ) {
            let s2 = (s + ds).min(1.0);
            prop_assert!(rs_blocking(s2, rho, limit, gamma) >= rs_blocking(s, rho, limit, gamma) - 1e-15);
        }

        #[test]
        fn effective_arrival_monotone_in_sleep(
            l0 in 0.0f64..100.0,
            ls in proptest::collection::vec(0.0f64..50.0, 1..6),
            j in 1.0f64..5.0,
            idx in 0usize..6,
            base in 0.0f64..=1.0,
            bump in 0.0f64..=1.0,
        ) {
            let n = ls.len();
            let t = traffic(l0, &ls);
            let gains = vec![j; n];
            let lo = vec![base; n];
            let mut hi = lo.clone();
            hi[idx % n] = (base + bump).min(1.0);
            prop_assert!(effective_bs_arrival(&t, &hi, &gains) >= effective_bs_arrival(&t, &lo, &gains) - 1e-12);
        }
    }
}
