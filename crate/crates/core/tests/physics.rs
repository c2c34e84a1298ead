use std::f64::consts::LN_2;

use freechain::entanglement::{entropy_thermo, finite_chain_report, thermo_entropies};
use freechain::scaling::sweep;
use freechain::{ChainSpec, Parity};

#[test]
fn two_sites_at_zero_field_are_maximally_entangled() {
    let r = finite_chain_report(&ChainSpec::ising(2, 0.0), 1).unwrap();
    assert_eq!(r.rho_eigs.len(), 2);
    assert!(r.rho_eigs.iter().all(|p| (p - 0.5).abs() < 1e-14));
    assert!((r.entropy - LN_2).abs() < 1e-14);
    assert!((r.entropy_bits() - 1.0).abs() < 1e-14);
    assert!(r.schmidt_gap.abs() < 1e-14);
}

#[test]
fn schmidt_gap_closes_with_size_in_ordered_phase() {
    let template = ChainSpec::ising(10, 0.5).periodic(Parity::Even);
    let res = sweep(&[10, 20, 50, 100], &[0.5], &template).unwrap();
    let gaps: Vec<f64> = res.rows.iter().map(|r| r.schmidt_gap).collect();
    assert!(gaps.windows(2).all(|w| w[1] <= w[0]), "{gaps:?}");
    assert!(gaps[3] < gaps[0]);
}

#[test]
fn gap_curve_n10_opens_past_critical_point() {
    let template = ChainSpec::ising(10, 1.0).periodic(Parity::Even);
    let lambdas: Vec<f64> = (0..=40).map(|i| 0.05 * i as f64).collect();
    let res = sweep(&[10], &lambdas, &template).unwrap();
    let gap = |lam: f64| {
        res.rows
            .iter()
            .find(|r| (r.lambda - lam).abs() < 1e-9)
            .unwrap()
            .schmidt_gap
    };
    assert!(gap(0.1) < 1e-3);
    assert!(gap(1.5) > 0.5);
    assert!(gap(2.0) > gap(1.5));
}

#[test]
fn finite_chain_approaches_infinite_chain() {
    // a long ring in the paramagnetic phase has short-range correlations
    let spec = ChainSpec::xy(200, 1.5, 0.7).periodic(Parity::Even);
    for l in [4, 10] {
        let finite = finite_chain_report(&spec, l).unwrap().entropy;
        let thermo = entropy_thermo(1.5, 0.7, l, 4096).unwrap();
        assert!((finite - thermo).abs() < 1e-8, "L={l}: {finite} vs {thermo}");
    }
}

#[test]
fn critical_entropy_keeps_growing() {
    let s = thermo_entropies(1.0, 1.0, &[16, 64, 256], 4096).unwrap();
    // (c/3) ln 4 per quadrupling with c = 1/2
    let step = LN_2 * 2.0 / 6.0;
    assert!((s[1] - s[0] - step).abs() < 5e-3);
    assert!((s[2] - s[1] - step).abs() < 5e-3);
}
