//! Two-photon polarization correlations, Bell's inequality and CHSH.
//!
//! Single-qubit basis: index 0 is `|x⟩` (also written `|+⟩`, the `σ₃ = +1`
//! state), index 1 is `|y⟩ = |−⟩`. Two-qubit index is `2·left + right`.
//! Every quantum expectation is evaluated as an explicit 4×4 matrix sandwich;
//! closed forms are kept alongside as checks.

use ndarray::{array, Array2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::optimize::NelderMead;
use crate::{Error, Result};

pub type Vec3 = [f64; 3];

const UNIT_TOL: f64 = 1e-10;
const AGREEMENT_TOL: f64 = 1e-12;

pub const TSIRELSON: f64 = 2.0 * std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolarizerSetup {
    pub phi: f64,
    pub theta: f64,
}

impl PolarizerSetup {
    /// Angles reduced to `[0, π)`; a polarizer axis has no orientation.
    pub fn reduced(&self) -> (f64, f64) {
        let r = |a: f64| a.rem_euclid(std::f64::consts::PI);
        (r(self.phi), r(self.theta))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitState {
    pub amplitudes: [Complex64; 4],
}

impl TwoQubitState {
    pub fn new(amplitudes: [Complex64; 4]) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > AGREEMENT_TOL {
            return Err(Error::InvalidInput(format!("state norm² is {norm}, not 1")));
        }
        Ok(Self { amplitudes })
    }

    /// `⟨ψ|op|ψ⟩`.
    pub fn expect(&self, op: &Array2<Complex64>) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..4 {
            for j in 0..4 {
                acc += self.amplitudes[i].conj() * op[[i, j]] * self.amplitudes[j];
            }
        }
        acc
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `(|x⟩⊗|y⟩ − |y⟩⊗|x⟩)/√2`.
pub fn photon_pair_state() -> TwoQubitState {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    TwoQubitState {
        amplitudes: [c(0.0), c(r), c(-r), c(0.0)],
    }
}

/// `√λ|+−⟩ − √(1−λ)|−+⟩`.
pub fn psi_lambda(lambda: f64) -> Result<TwoQubitState> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidInput(format!("λ = {lambda} outside [0, 1]")));
    }
    Ok(TwoQubitState {
        amplitudes: [c(0.0), c(lambda.sqrt()), c(-(1.0 - lambda).sqrt()), c(0.0)],
    })
}

pub fn kron(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    Array2::from_shape_fn((ra * rb, ca * cb), |(i, j)| a[[i / rb, j / cb]] * b[[i % rb, j % cb]])
}

pub fn identity2() -> Array2<Complex64> {
    Array2::eye(2)
}

/// Projector onto `cos α|x⟩ + sin α|y⟩`.
pub fn polarizer(alpha: f64) -> Array2<Complex64> {
    let (s, co) = alpha.sin_cos();
    array![[c(co * co), c(co * s)], [c(co * s), c(s * s)]]
}

pub fn pauli() -> [Array2<Complex64>; 3] {
    let i = Complex64::new(0.0, 1.0);
    [
        array![[c(0.0), c(1.0)], [c(1.0), c(0.0)]],
        array![[c(0.0), -i], [i, c(0.0)]],
        array![[c(1.0), c(0.0)], [c(0.0), c(-1.0)]],
    ]
}

/// `E(a) = a·σ`.
pub fn spin_observable(a: &Vec3) -> Array2<Complex64> {
    let [sx, sy, sz] = pauli();
    sx * c(a[0]) + sy * c(a[1]) + sz * c(a[2])
}

/// `P(a) = (1 + a·σ)/2`.
pub fn spin_projector(a: &Vec3) -> Array2<Complex64> {
    (identity2() + spin_observable(a)) * c(0.5)
}

fn check_unit(v: &Vec3) -> Result<()> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::InvalidInput(format!("vector {v:?} has norm {norm}, not 1")));
    }
    Ok(())
}

fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// `⟨ψ|P_A(φ) P_B(θ)|ψ⟩` for the photon pair.
pub fn joint_prob(setup: &PolarizerSetup) -> f64 {
    let op = kron(&polarizer(setup.phi), &polarizer(setup.theta));
    photon_pair_state().expect(&op).re
}

/// Closed form `½ sin²(φ − θ)`.
pub fn joint_prob_closed(setup: &PolarizerSetup) -> f64 {
    0.5 * (setup.phi - setup.theta).sin().powi(2)
}

/// `(⟨P_A(φ)⟩, ⟨P_B(θ)⟩)`.
pub fn marginals(setup: &PolarizerSetup) -> (f64, f64) {
    let psi = photon_pair_state();
    let a = psi.expect(&kron(&polarizer(setup.phi), &identity2())).re;
    let b = psi.expect(&kron(&identity2(), &polarizer(setup.theta))).re;
    (a, b)
}

/// Probability that both photons agree (both pass or both absorbed).
pub fn coincidence_prob(setup: &PolarizerSetup) -> f64 {
    let one = identity2();
    let pa = polarizer(setup.phi);
    let pb = polarizer(setup.theta);
    let both = kron(&pa, &pb);
    let neither = kron(&(&one - &pa), &(&one - &pb));
    photon_pair_state().expect(&(both + neither)).re
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BellCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub violated: bool,
}

/// `sin²(φ₁−θ₁) ≤ sin²(φ₁−θ₂) + sin²(φ₂−θ₂) + sin²(φ₂−θ₁)`.
pub fn bell_check(phis: (f64, f64), thetas: (f64, f64)) -> BellCheck {
    let s = |a: f64, b: f64| (a - b).sin().powi(2);
    let lhs = s(phis.0, thetas.0);
    let rhs = s(phis.0, thetas.1) + s(phis.1, thetas.1) + s(phis.1, thetas.0);
    BellCheck {
        lhs,
        rhs,
        violated: lhs > rhs + 1e-12,
    }
}

/// The angles `φ = (0, π/3)`, `θ = (π/2, π/6)`.
pub fn standard_bell_angles() -> ((f64, f64), (f64, f64)) {
    use std::f64::consts::PI;
    ((0.0, PI / 3.0), (PI / 2.0, PI / 6.0))
}

/// One deterministic truth assignment of `(A₁, A₂, B₁, B₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Assignment {
    pub a: [bool; 2],
    pub b: [bool; 2],
}

pub fn all_assignments() -> Vec<Assignment> {
    (0..16u8)
        .map(|m| Assignment {
            a: [m & 1 != 0, m & 2 != 0],
            b: [m & 4 != 0, m & 8 != 0],
        })
        .collect()
}

/// `f(A, B) = AB + ĀB̄`.
pub fn coincidence(a: bool, b: bool) -> bool {
    a == b
}

impl Assignment {
    /// `f(A₁,B₁) ⇒ f(A₁,B₂) ∨ f(A₂,B₂) ∨ f(A₂,B₁)`.
    pub fn bell_implication(&self) -> bool {
        let f = |i: usize, j: usize| coincidence(self.a[i], self.b[j]);
        !f(0, 0) || f(0, 1) || f(1, 1) || f(1, 0)
    }

    /// `a(b + b') + a'(b − b')` with true ↦ +1, false ↦ −1.
    pub fn chsh(&self) -> f64 {
        let s = |x: bool| if x { 1.0 } else { -1.0 };
        let (a, a2, b, b2) = (s(self.a[0]), s(self.a[1]), s(self.b[0]), s(self.b[1]));
        a * (b + b2) + a2 * (b - b2)
    }
}

/// Bell's inequality for a probability mixture of the 16 assignments:
/// `(p(f₁₁), p(f₁₂) + p(f₂₂) + p(f₂₁))`.
pub fn classical_bell_sides(weights: &[f64; 16]) -> (f64, f64) {
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for (w, asg) in weights.iter().zip(all_assignments()) {
        let f = |i: usize, j: usize| if coincidence(asg.a[i], asg.b[j]) { *w } else { 0.0 };
        lhs += f(0, 0);
        rhs += f(0, 1) + f(1, 1) + f(1, 0);
    }
    (lhs, rhs)
}

/// CHSH expectation of a probability mixture of the 16 assignments.
pub fn classical_chsh(weights: &[f64; 16]) -> f64 {
    weights
        .iter()
        .zip(all_assignments())
        .map(|(w, asg)| w * asg.chsh())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Correlators {
    /// `⟨E(a) ⊗ E(b)⟩`.
    pub ee: f64,
    /// `⟨P(a) ⊗ P(b)⟩`.
    pub pp: f64,
}

/// Closed forms for `ψ_λ`.
pub fn psi_lambda_correlators_closed(lambda: f64, a: &Vec3, b: &Vec3) -> Correlators {
    let mix = 2.0 * (lambda * (1.0 - lambda)).sqrt();
    let ee = -a[2] * b[2] - mix * (a[0] * b[0] + a[1] * b[1]);
    let pp = 0.25 * (1.0 + (2.0 * lambda - 1.0) * (a[2] - b[2]) + ee);
    Correlators { ee, pp }
}

/// Correlators of `ψ_λ` from the 4×4 matrices, checked against the closed
/// forms.
pub fn psi_lambda_correlators(lambda: f64, a: &Vec3, b: &Vec3) -> Result<Correlators> {
    check_unit(a)?;
    check_unit(b)?;
    let psi = psi_lambda(lambda)?;
    let ee = psi.expect(&kron(&spin_observable(a), &spin_observable(b))).re;
    let pp = psi.expect(&kron(&spin_projector(a), &spin_projector(b))).re;
    let closed = psi_lambda_correlators_closed(lambda, a, b);
    let gap = (closed.ee - ee).abs().max((closed.pp - pp).abs());
    if gap > AGREEMENT_TOL {
        return Err(Error::Internal(format!(
            "closed-form correlators disagree with matrix route by {gap:e}"
        )));
    }
    Ok(Correlators { ee, pp })
}

/// `⟨E(a)⊗(E(b)+E(b')) + E(a')⊗(E(b)−E(b'))⟩` in `ψ_λ`.
pub fn chsh_value(lambda: f64, a: &Vec3, a2: &Vec3, b: &Vec3, b2: &Vec3) -> Result<f64> {
    for v in [a, a2, b, b2] {
        check_unit(v)?;
    }
    let psi = psi_lambda(lambda)?;
    let (ea, ea2) = (spin_observable(a), spin_observable(a2));
    let (eb, eb2) = (spin_observable(b), spin_observable(b2));
    let op = kron(&ea, &(&eb + &eb2)) + kron(&ea2, &(&eb - &eb2));
    Ok(psi.expect(&op).re)
}

/// At `λ = ½` the state is a singlet, `⟨E(a)⊗E(b)⟩ = −a·b`, so the CHSH
/// value is `−(a·b + a·b' + a'·b − a'·b')`.
pub fn chsh_singlet_closed(a: &Vec3, a2: &Vec3, b: &Vec3, b2: &Vec3) -> f64 {
    -(dot(a, b) + dot(a, b2) + dot(a2, b) - dot(a2, b2))
}

/// Largest `|CHSH|` for `ψ_λ`: `2√(1 + 4λ(1−λ))`.
pub fn chsh_bound(lambda: f64) -> f64 {
    2.0 * (1.0 + 4.0 * lambda * (1.0 - lambda)).sqrt()
}

pub fn unit_from_angles(theta: f64, phi: f64) -> Vec3 {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [st * cp, st * sp, ct]
}

#[derive(Debug, Clone, Serialize)]
pub struct ChshMaximum {
    /// Largest `|CHSH|` found.
    pub value: f64,
    pub a: Vec3,
    pub a_prime: Vec3,
    pub b: Vec3,
    pub b_prime: Vec3,
}

/// Maximise `|CHSH|` over the four unit vectors: seeded random starts, each
/// refined by a simplex search over the eight spherical angles.
pub fn maximize_chsh(lambda: f64, starts: usize, seed: u64) -> Result<ChshMaximum> {
    psi_lambda(lambda)?;
    let vectors = |x: &[f64]| {
        [
            unit_from_angles(x[0], x[1]),
            unit_from_angles(x[2], x[3]),
            unit_from_angles(x[4], x[5]),
            unit_from_angles(x[6], x[7]),
        ]
    };
    let objective = |x: &[f64]| {
        let [a, a2, b, b2] = vectors(x);
        -chsh_value(lambda, &a, &a2, &b, &b2).map_or(0.0, f64::abs)
    };
    let nm = NelderMead {
        step: 0.4,
        f_tol: 1e-15,
        x_tol: 1e-10,
        max_iter: 20_000,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..starts.max(1) {
        let x0: Vec<f64> = (0..8).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
        let mut m = nm.minimize(objective, &x0);
        // restart once from the end point to escape a collapsed simplex
        m = nm.minimize(objective, &m.x);
        if best.as_ref().is_none_or(|(v, _)| m.value < *v) {
            best = Some((m.value, m.x));
        }
    }
    let (value, x) = best.ok_or_else(|| Error::Internal("no CHSH start".into()))?;
    let [a, a_prime, b, b_prime] = vectors(&x);
    Ok(ChshMaximum {
        value: -value,
        a,
        a_prime,
        b,
        b_prime,
    })
}
