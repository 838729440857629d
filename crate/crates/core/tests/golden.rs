//! Reference values from `tests/oracles/golden.py`, an independent numpy
//! implementation (dB arithmetic, 10^6-point trapezoid rule).

use approx::assert_relative_eq;
use relaysleep::loadmodel::{DemandKernels, SlotTraffic};
use relaysleep::topology::{link_rate, radial_inverse_rate_integral, CellLayout, LinkKind, LinkModel};

const RATE_TOL: f64 = 1e-12;
// Trapezoid error at 10^6 points is far below this.
const INTEGRAL_TOL: f64 = 1e-7;

fn setup() -> (CellLayout, LinkModel) {
    (CellLayout::new(800.0, 100.0, 6).unwrap(), LinkModel::default())
}

#[test]
fn link_rates() {
    let (_, link) = setup();
    assert_relative_eq!(
        link_rate(LinkKind::Direct, 700.0, &link).unwrap(),
        3.3233756507525296,
        max_relative = RATE_TOL
    );
    assert_relative_eq!(
        link_rate(LinkKind::Backhaul, 600.0, &link).unwrap(),
        4.582114229843242,
        max_relative = RATE_TOL
    );
}

#[test]
fn radial_integrals() {
    let (_, link) = setup();
    let cases = [
        (LinkKind::Direct, 600.0, 800.0, 42149.32182323084),
        (LinkKind::Direct, 0.0, 600.0, 49947.325499001745),
        (LinkKind::Access, 0.0, 100.0, 735.6906364863448),
    ];
    for (kind, lo, hi, expected) in cases {
        let got = radial_inverse_rate_integral(kind, lo, hi, &link).unwrap();
        assert_relative_eq!(got, expected, max_relative = INTEGRAL_TOL);
    }
}

#[test]
fn demand_kernels() {
    let (layout, link) = setup();
    let k = DemandKernels::new(&layout, &link).unwrap();
    assert_relative_eq!(k.gains[0], 1.3795214807462024, max_relative = INTEGRAL_TOL);
    assert_relative_eq!(k.gamma_n(200e3), 29427.625459453793, max_relative = INTEGRAL_TOL);

    let traffic = SlotTraffic {
        bs_arrivals: 40.0,
        rs_arrivals: vec![10.0; 6],
        service_rate: 1.0,
        rate_requirement: 200e3,
    };
    assert_relative_eq!(
        k.gamma0(&traffic, &[0.5; 6]),
        126423.59091088435,
        max_relative = INTEGRAL_TOL
    );
}
