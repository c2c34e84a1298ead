//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, LN_2};
use std::time::{Duration, Instant};

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use freechain::algebraic_states::{
    close_algebra, gns, m2_lambda, matrix_units, purity_report, two_fermion, AlgState,
};
use freechain::ed_oracle::{
    build_spin_hamiltonian, ground_energy, ground_state, partial_trace, sector_ground_state,
};
use freechain::entanglement::{
    entanglement_spectrum, finite_chain_report, fit_central_charge, majorana_coefficients,
    restrict, thermo_entropies, MajoranaBlock, DEFAULT_QUADRATURE_POINTS,
};
use freechain::free_fermion::{best_ground_energy, physical_ground_state};
use freechain::quantum_probability::{
    all_assignments, bell_check, maximize_chsh, standard_bell_angles, TSIRELSON,
};
use freechain::scaling::{collapse, grid, sweep, SearchBox, SweepResult, SweepRow};
use freechain::{binary_entropy, BogoliubovSolution, ChainSpec, Parity};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Largest CAR residual seen across the solves of criteria 2 and 3.
#[derive(Default)]
struct CarLog {
    solves: usize,
    worst: f64,
}

impl CarLog {
    fn record(&mut self, sol: &BogoliubovSolution) {
        let (a, b) = sol.car_residuals();
        self.solves += 1;
        self.worst = self.worst.max(a).max(b);
    }
}

fn specs(n: usize, lambda: f64, gammas: &[f64]) -> Vec<ChainSpec> {
    let mut out = vec![
        ChainSpec::ising(n, lambda),
        ChainSpec::ising(n, lambda).periodic(Parity::Even),
    ];
    for &g in gammas {
        out.push(ChainSpec::xy(n, lambda, g));
        out.push(ChainSpec::xy(n, lambda, g).periodic(Parity::Even));
    }
    out
}

fn c1_two_site() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for i in 0..50 {
        let lambda = 3.0 * i as f64 / 49.0;
        let alpha = (1.0 + 4.0 * lambda * lambda).sqrt();
        let expect = [0.5 + lambda / alpha, 0.5 - lambda / alpha];
        let r = finite_chain_report(&ChainSpec::ising(2, lambda), 1).unwrap();
        for (k, e) in expect.iter().enumerate() {
            worst = worst.max((r.rho_eigs.get(k).copied().unwrap_or(0.0) - e).abs());
        }
    }
    let t = start.elapsed();
    outcome(
        worst < 1e-12 && t < Duration::from_secs(1),
        format!("max err {worst:.2e}, {t:.2?}"),
    )
}

fn c2_energies(car: &mut CarLog) -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut cases = 0;
    for n in [4, 8, 10, 12] {
        for lambda in [0.3, 1.0, 1.7] {
            for spec in specs(n, lambda, &[0.5, 1.0]) {
                let ed = ground_energy(&build_spin_hamiltonian(&spec).unwrap()).unwrap();
                let ff = best_ground_energy(&spec).unwrap();
                worst = worst.max((ff - ed).abs() / ed.abs().max(1e-300));
                match spec.sector() {
                    Some(_) => {
                        for p in [Parity::Even, Parity::Odd] {
                            car.record(&physical_ground_state(&spec.with_parity(p)).unwrap().solution);
                        }
                    }
                    None => car.record(&physical_ground_state(&spec).unwrap().solution),
                }
                cases += 1;
            }
        }
    }
    let t = start.elapsed();
    outcome(
        worst < 1e-9 && t < Duration::from_secs(120),
        format!("{cases} chains, max rel err {worst:.2e}, {t:.2?}"),
    )
}

fn c3_spectra(car: &mut CarLog) -> Outcome {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for lambda in [0.5, 1.0, 1.5] {
        for spec in specs(10, lambda, &[0.5]) {
            let h = build_spin_hamiltonian(&spec).unwrap();
            let (_, psi) = match spec.sector() {
                Some(p) => sector_ground_state(&h, p).unwrap(),
                None => ground_state(&h).unwrap(),
            };
            let gs = physical_ground_state(&spec).unwrap();
            car.record(&gs.solution);
            let corr = gs.correlations();
            for l in [3, 5] {
                let mut ed = partial_trace(&psi, 0..l).unwrap().eigenvalues().unwrap();
                ed.sort_by(|a, b| b.total_cmp(a));
                let ff = entanglement_spectrum(&restrict(&corr, l).unwrap()).unwrap();
                for (k, e) in ed.iter().enumerate() {
                    worst = worst.max((e - ff.rho_eigs.get(k).copied().unwrap_or(0.0)).abs());
                }
                cases += 1;
            }
        }
    }
    outcome(worst < 1e-8, format!("{cases} blocks, max err {worst:.2e}"))
}

fn c4_car(car: &CarLog) -> Outcome {
    outcome(
        car.worst < 1e-10 && car.solves > 0,
        format!("{} solves, max residual {:.2e}", car.solves, car.worst),
    )
}

fn c5_central_charge() -> Outcome {
    let start = Instant::now();
    let ls: Vec<usize> = (1..=16).map(|k| 16 * k).collect();
    let fit = |lambda: f64, gamma: f64| {
        let s = thermo_entropies(lambda, gamma, &ls, DEFAULT_QUADRATURE_POINTS).unwrap();
        let pts: Vec<(f64, f64)> = ls.iter().zip(&s).map(|(&l, &s)| (l as f64, s)).collect();
        fit_central_charge(&pts).unwrap().c
    };
    let ising = fit(1.0, 1.0);
    let xx = fit(0.5, 0.0);
    let t = start.elapsed();
    outcome(
        (ising - 0.5).abs() <= 0.05 && (xx - 1.0).abs() <= 0.05 && t < Duration::from_secs(300),
        format!("Ising c = {ising:.4}, XX c = {xx:.4}, {t:.2?}"),
    )
}

fn c6_saturation() -> Outcome {
    let s = thermo_entropies(0.5, 0.5, &[50, 100], DEFAULT_QUADRATURE_POINTS).unwrap();
    let d = s[1] - s[0];
    outcome(d < 1e-3, format!("S(50) = {:.6}, S(100) = {:.6}, diff {d:.2e}", s[0], s[1]))
}

fn c7_schmidt_gap() -> Outcome {
    let template = ChainSpec::ising(10, 0.5).periodic(Parity::Even);
    let small = sweep(&[10], &[0.5], &template).unwrap().rows[0].schmidt_gap;
    let large = sweep(&[100], &[0.5], &template).unwrap().rows[0].schmidt_gap;
    let lambdas = grid(1.2, 2.0, 0.05).unwrap();
    let curve = sweep(&[100], &lambdas, &template).unwrap();
    let gaps: Vec<f64> = curve.rows.iter().map(|r| r.schmidt_gap).collect();
    let monotone = curve.failures.is_empty() && gaps.windows(2).all(|w| w[1] >= w[0]);
    outcome(
        large < 0.2 * small && monotone,
        format!(
            "gap(N=10) = {small:.4e}, gap(N=100) = {large:.4e}, λ>1.2 curve {:.4}..{:.4} monotone={monotone}",
            gaps[0],
            gaps[gaps.len() - 1]
        ),
    )
}

fn synthetic(mu1: f64, mu2: f64) -> SweepResult {
    let lambdas = grid(0.9, 1.1, 0.005).unwrap();
    let mut rows = Vec::new();
    for n in [64usize, 128, 256, 512] {
        for &l in &lambdas {
            let x = (l - 1.0) * (n as f64).powf(mu2);
            let f = 0.2 + 0.6 / (1.0 + (-1.3 * x).exp()) + 0.03 * x.atan();
            rows.push(SweepRow {
                n,
                lambda: l,
                schmidt_gap: f * (n as f64).powf(-mu1),
                entropy: 0.0,
                ground_energy: 0.0,
            });
        }
    }
    SweepResult {
        rows,
        failures: vec![],
        metadata: vec![],
    }
}

fn c8_collapse() -> (Outcome, Outcome) {
    let fit = collapse(&synthetic(0.125, 1.0), 1.0, &SearchBox::default()).unwrap();
    let a = outcome(
        (fit.mu1 - 0.125).abs() <= 0.01 && (fit.mu2 - 1.0).abs() <= 0.01,
        format!("planted (0.125, 1), recovered ({:.4}, {:.4})", fit.mu1, fit.mu2),
    );

    let start = Instant::now();
    let lambdas = grid(0.9, 1.1, 0.005).unwrap();
    let data = sweep(&[64, 128, 256, 512], &lambdas, &ChainSpec::ising(64, 1.0)).unwrap();
    let fit = collapse(&data, 1.0, &SearchBox::default()).unwrap();
    let t = start.elapsed();
    let b = outcome(
        data.failures.is_empty()
            && (0.8..=1.2).contains(&fit.nu_est)
            && (0.10..=0.15).contains(&fit.beta_est)
            && t < Duration::from_secs(900),
        format!(
            "open Ising N=64..512: ν = {:.4}, β = {:.4}, cost {:.2e}, {t:.2?}",
            fit.nu_est, fit.beta_est, fit.cost
        ),
    );
    (a, b)
}

fn c9_bell() -> Outcome {
    let (phis, thetas) = standard_bell_angles();
    let b = bell_check(phis, thetas);
    let angles_ok = (b.lhs - 1.0).abs() <= 1e-15 && (b.rhs - 0.75).abs() <= 1e-15 && b.violated;
    let classical_ok = all_assignments()
        .iter()
        .all(|a| a.bell_implication() && a.chsh().abs() <= 2.0);
    let best = maximize_chsh(0.5, 8, 0).unwrap().value;
    outcome(
        angles_ok && classical_ok && (best - TSIRELSON).abs() <= 1e-6,
        format!(
            "lhs = {}, rhs = {}, deterministic ok = {classical_ok}, max CHSH = {best:.12}",
            b.lhs, b.rhs
        ),
    )
}

fn random_density(rng: &mut ChaCha8Rng, pure: bool) -> Array2<Complex64> {
    let mut vec = || {
        let v: Vec<Complex64> = (0..2)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.into_iter().map(|z| z / n).collect::<Vec<_>>()
    };
    let u = vec();
    let w = if pure { 1.0 } else { rng.gen_range(0.05..0.95) };
    // second vector orthogonal to u
    let perp = [-u[1].conj(), u[0].conj()];
    Array2::from_shape_fn((2, 2), |(i, j)| {
        u[i] * u[j].conj() * w + perp[i] * perp[j].conj() * (1.0 - w)
    })
}

fn c10_gns() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    for (lambda, dim) in [(0.0, 2), (1.0, 2), (0.3, 4), (0.5, 4), (0.8, 4)] {
        let (alg, state) = m2_lambda(lambda).unwrap();
        let g = gns(&alg, &state).unwrap();
        ok &= g.hilbert_dim == dim;
        let err = (g.entropy - binary_entropy(lambda)).abs();
        ok &= err < 1e-10;
        if lambda == 0.3 {
            notes.push(format!("M2 λ=0.3 dim {} S err {err:.1e}", g.hilbert_dim));
        }
    }

    let mut tf = [0.0; 3];
    for (slot, theta) in [0.0, FRAC_PI_2, FRAC_PI_4].into_iter().enumerate() {
        let (alg, state) = two_fermion::restricted(theta).unwrap();
        tf[slot] = gns(&alg, &state).unwrap().entropy;
    }
    ok &= tf[0].abs() < 1e-10 && tf[1].abs() < 1e-10;
    ok &= tf[2] > 0.1 && (tf[2] - LN_2).abs() < 1e-10;
    notes.push(format!(
        "two-fermion S(0) = {:.1e}, S(π/2) = {:.1e}, S(π/4) = {:.12}",
        tf[0], tf[1], tf[2]
    ));

    let alg = close_algebra(&matrix_units(2)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0010);
    let mut bad = 0;
    for i in 0..1000 {
        let rho = random_density(&mut rng, i % 2 == 0);
        let state = AlgState::from_density(&alg, &rho).unwrap();
        let g = gns(&alg, &state).unwrap();
        if (g.entropy.abs() < 1e-10) != purity_report(&g).is_irreducible {
            bad += 1;
        }
    }
    ok &= bad == 0;
    notes.push(format!("purity fuzz counterexamples {bad}/1000"));
    outcome(ok, notes.join(", "))
}

fn c11_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0011);
    let (mut sym, mut neg, mut norm, mut nu_out) = (0.0f64, 0.0f64, 0.0f64, 0usize);
    let draws = 200;
    for _ in 0..draws {
        let n = rng.gen_range(2..=12);
        let lambda = rng.gen_range(0.0..2.5);
        let gamma = rng.gen_range(0.0..1.0);
        let mut spec = if rng.gen_bool(0.5) {
            ChainSpec::ising(n, lambda)
        } else {
            ChainSpec::xy(n, lambda, gamma)
        };
        if rng.gen_bool(0.5) {
            spec = spec.periodic(if rng.gen_bool(0.5) { Parity::Even } else { Parity::Odd });
        }
        let corr = physical_ground_state(&spec).unwrap().correlations();
        for l in 1..n {
            let a = entanglement_spectrum(&restrict(&corr, l).unwrap()).unwrap();
            let b = {
                // complement block: last n−l sites, taken by reversing the chain
                let rev = |m: &Array2<f64>| {
                    Array2::from_shape_fn((n, n), |(i, j)| m[[n - 1 - i, n - 1 - j]])
                };
                let mut c = corr.clone();
                c.c = rev(&corr.c);
                c.f = rev(&corr.f);
                entanglement_spectrum(&restrict(&c, n - l).unwrap()).unwrap()
            };
            sym = sym.max((a.entropy - b.entropy).abs());
            neg = neg.min(a.entropy);
            norm = norm.max((a.rho_eigs.iter().sum::<f64>() + a.truncated_mass - 1.0).abs());
        }
    }
    for (lambda, gamma) in [(1.0, 1.0), (0.5, 0.0), (0.5, 0.5), (1.3, 0.2)] {
        let g = majorana_coefficients(lambda, gamma, 63, DEFAULT_QUADRATURE_POINTS).unwrap();
        for l in [1, 8, 32, 64] {
            let b = MajoranaBlock::new(&g, l).unwrap();
            nu_out += b.nus.iter().filter(|&&v| !(0.0..=1.0).contains(&v)).count();
        }
    }
    outcome(
        sym < 1e-8 && neg >= 0.0 && norm < 1e-10 && nu_out == 0,
        format!(
            "{draws} chains: max |S(L)−S(N−L)| {sym:.1e}, min S {neg:.1e}, max |Σp−1| {norm:.1e}, ν outside [0,1]: {nu_out}"
        ),
    )
}

fn main() {
    let mut car = CarLog::default();
    let mut results: Vec<(&str, Outcome)> = vec![
        ("1 two-site closed form", c1_two_site()),
        ("2 energies vs ED", c2_energies(&mut car)),
        ("3 reduced spectra vs ED", c3_spectra(&mut car)),
    ];
    results.push(("4 CAR identities", c4_car(&car)));
    results.push(("5 central charge", c5_central_charge()));
    results.push(("6 off-critical saturation", c6_saturation()));
    results.push(("7 Schmidt gap", c7_schmidt_gap()));
    let (a, b) = c8_collapse();
    results.push(("8a synthetic collapse", a));
    results.push(("8b chain collapse", b));
    results.push(("9 Bell and CHSH", c9_bell()));
    results.push(("10 GNS suite", c10_gns()));
    results.push(("11 property suite", c11_properties()));

    let mut failed = 0;
    for (name, o) in &results {
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
