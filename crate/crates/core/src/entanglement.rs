//! Entanglement of a contiguous block of `L` sites.
//!
//! Finite chains go through the ground-state two-point functions: the
//! restriction of `C`, `F` to the block gives the single-particle
//! entanglement energies from
//! `(2C − 1 − 2F)(2C − 1 + 2F)|φ_l⟩ = tanh²(ε_l/2)|φ_l⟩`, and the reduced
//! density matrix is the product state `⊗_l diag((1+e^{−ε_l})⁻¹, (1+e^{ε_l})⁻¹)`.
//!
//! Infinite chains go through the Majorana correlation matrix `Γ_L`, a block
//! Toeplitz matrix of `2×2` blocks `Π_l = [[0, g_l], [−g_{−l}, 0]]` with
//! `g_l = (1/2π)∫ e^{−ilφ} (cos φ − λ − iγ sin φ)/|cos φ − λ − iγ sin φ| dφ`.
//! The positive eigenvalues `ν_m` of `iΓ_L` are the singular values of the
//! `L×L` Toeplitz matrix `g_{j−i}` and give `S = Σ_m H((1+ν_m)/2)`.
//!
//! All entropies use the natural log.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use ndarray::{s, Array2};
use ndarray_linalg::SVD;
use serde::Serialize;

use crate::chain_model::ChainSpec;
use crate::free_fermion::{physical_ground_state, CorrelationPair};
use crate::linalg::{eigh_sym, symmetrize};
use crate::{binary_entropy, xlogx, Error, Result};

/// Guard keeping `artanh` finite.
pub const ARTANH_GUARD: f64 = 1e-14;
/// Cap on `|ε|`.
pub const EPSILON_CAP: f64 = 70.0;
/// Reduced-density eigenvalues below this are not generated.
pub const RHO_EIG_FLOOR: f64 = 1e-16;
/// Blocks up to this many modes get the full `2^L` product spectrum
/// (minus entries under [`RHO_EIG_FLOOR`]).
pub const FULL_SPECTRUM_MODES: usize = 16;
/// Larger blocks keep at most this many of the largest eigenvalues.
pub const TRUNCATED_SPECTRUM_LEN: usize = 1 << 16;
/// Default node count for the `g_l` integral.
pub const DEFAULT_QUADRATURE_POINTS: usize = 4096;
/// Smallest accepted node count.
pub const MIN_QUADRATURE_POINTS: usize = 512;

#[derive(Debug, Clone, Serialize)]
pub struct EntanglementReport {
    /// Single-particle entanglement energies, ascending `|ε|`.
    pub epsilons: Vec<f64>,
    /// Reduced-density eigenvalues, descending.
    pub rho_eigs: Vec<f64>,
    /// Weight of the eigenvalues left out of `rho_eigs`.
    pub truncated_mass: f64,
    /// Von Neumann entropy (nats).
    pub entropy: f64,
    /// Difference of the two largest reduced-density eigenvalues.
    pub schmidt_gap: f64,
}

impl EntanglementReport {
    /// `−Σ p ln p` over `rho_eigs`. Agrees with `entropy` up to the weight
    /// of the dropped tail.
    pub fn entropy_from_rho(&self) -> f64 {
        self.rho_eigs.iter().copied().map(xlogx).sum()
    }

    pub fn entropy_bits(&self) -> f64 {
        self.entropy / std::f64::consts::LN_2
    }
}

/// Leading `L×L` blocks of `C` and `F`.
pub fn restrict(corr: &CorrelationPair, l: usize) -> Result<CorrelationPair> {
    let n = corr.n();
    if l == 0 || l > n {
        return Err(Error::InvalidInput(format!(
            "block length {l} outside 1..={n}"
        )));
    }
    Ok(CorrelationPair {
        c: corr.c.slice(s![..l, ..l]).to_owned(),
        f: corr.f.slice(s![..l, ..l]).to_owned(),
    })
}

/// Largest-to-smallest per-mode weights `(p, q)` with `p ≥ ½`.
fn mode_weights(t: &[f64]) -> Vec<(f64, f64)> {
    t.iter().map(|&t| ((1.0 + t) / 2.0, (1.0 - t) / 2.0)).collect()
}

#[derive(PartialEq)]
struct Node {
    value: f64,
    without_last: f64,
    last: usize,
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value.total_cmp(&other.value)
    }
}

/// Products `Π_l (p_l or q_l)`, descending, floored and capped.
fn product_spectrum(weights: &[(f64, f64)], cap: usize) -> Vec<f64> {
    let top: f64 = weights.iter().map(|w| w.0).product();
    let mut ratios: Vec<f64> = weights.iter().map(|&(p, q)| q / p).collect();
    ratios.sort_by(|a, b| b.total_cmp(a));
    let mut out = vec![top];
    let mut heap = BinaryHeap::new();
    if let Some(&r0) = ratios.first() {
        heap.push(Node {
            value: top * r0,
            without_last: top,
            last: 0,
        });
    }
    // Every subset of modes is reached once: from {.., j} either append
    // j+1 or replace j by j+1. Children never exceed their parent.
    while let Some(node) = heap.pop() {
        if out.len() >= cap || node.value < RHO_EIG_FLOOR {
            break;
        }
        out.push(node.value);
        let next = node.last + 1;
        if next < ratios.len() {
            heap.push(Node {
                value: node.value * ratios[next],
                without_last: node.value,
                last: next,
            });
            heap.push(Node {
                value: node.without_last * ratios[next],
                without_last: node.without_last,
                last: next,
            });
        }
    }
    out
}

pub fn entanglement_spectrum(block: &CorrelationPair) -> Result<EntanglementReport> {
    let l = block.n();
    if l == 0 {
        return Err(Error::InvalidInput("empty block".into()));
    }
    let g = &block.c * 2.0 - Array2::<f64>::eye(l);
    let t_plus = &g + &(&block.f * 2.0);
    let t_minus = &g - &(&block.f * 2.0);
    // (G − 2F)(G + 2F) = TᵗT is symmetric positive semi-definite
    let product = symmetrize(t_minus.dot(&t_plus).view());
    let (vals, vecs) = eigh_sym(product.view())?;
    let mut modes = Vec::with_capacity(l);
    for (k, &v) in vals.iter().enumerate() {
        if v > 1.0 + 1e-8 {
            return Err(Error::Numerical(format!(
                "entanglement eigenvalue {v} exceeds 1"
            )));
        }
        let t = v.clamp(0.0, 1.0 - ARTANH_GUARD).sqrt();
        let eps = (2.0 * t.atanh()).min(EPSILON_CAP);
        // occupation above ½ means ε < 0
        let phi = vecs.column(k);
        let occupation_bias = phi.dot(&g.dot(&phi));
        let eps = if occupation_bias > 0.0 { -eps } else { eps };
        modes.push((eps, t));
    }
    modes.sort_by(|a, b| a.0.abs().total_cmp(&b.0.abs()));
    let t: Vec<f64> = modes.iter().map(|m| m.1).collect();
    let weights = mode_weights(&t);
    let cap = if l <= FULL_SPECTRUM_MODES {
        1 << l
    } else {
        TRUNCATED_SPECTRUM_LEN
    };
    let rho_eigs = product_spectrum(&weights, cap);
    let kept: f64 = rho_eigs.iter().sum();
    let entropy = t.iter().map(|&t| binary_entropy((1.0 + t) / 2.0)).sum();
    let top = rho_eigs[0];
    let max_ratio = weights
        .iter()
        .map(|&(p, q)| q / p)
        .fold(0.0_f64, f64::max);
    Ok(EntanglementReport {
        epsilons: modes.iter().map(|m| m.0).collect(),
        truncated_mass: (1.0 - kept).max(0.0),
        rho_eigs,
        entropy,
        schmidt_gap: top * (1.0 - max_ratio),
    })
}

/// Ground state of `spec`, first `l` sites.
pub fn finite_chain_report(spec: &ChainSpec, l: usize) -> Result<EntanglementReport> {
    let corr = physical_ground_state(spec)?.correlations();
    entanglement_spectrum(&restrict(&corr, l)?)
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            dp = n as f64 * (z * p - p0) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

const PANEL_ORDER: usize = 16;

/// Points where `cos φ − λ − iγ sin φ` vanishes on `[0, 2π)`.
fn symbol_zeros(lambda: f64, gamma: f64) -> Vec<f64> {
    let mut zeros = Vec::new();
    if gamma == 0.0 {
        if lambda.abs() <= 1.0 {
            let a = lambda.acos();
            zeros.push(a);
            if a > 0.0 && a < PI {
                zeros.push(2.0 * PI - a);
            }
        }
    } else if lambda == 1.0 {
        zeros.push(0.0);
    } else if lambda == -1.0 {
        zeros.push(PI);
    }
    zeros.sort_by(f64::total_cmp);
    zeros
}

/// Quadrature nodes and weights for `∫₀^{2π}`: uniform midpoints for a
/// smooth periodic symbol, composite Gauss–Legendre on each arc between
/// zeros of the symbol otherwise.
fn quadrature(lambda: f64, gamma: f64, points: usize) -> (Vec<f64>, Vec<f64>) {
    let zeros = symbol_zeros(lambda, gamma);
    if zeros.is_empty() {
        let h = 2.0 * PI / points as f64;
        let nodes = (0..points).map(|k| (k as f64 + 0.5) * h).collect();
        return (nodes, vec![h; points]);
    }
    let (gx, gw) = gauss_legendre(PANEL_ORDER);
    let panels_total = (points / PANEL_ORDER).max(zeros.len());
    let mut nodes = Vec::with_capacity(points);
    let mut weights = Vec::with_capacity(points);
    for (k, &a) in zeros.iter().enumerate() {
        let b = if k + 1 < zeros.len() {
            zeros[k + 1]
        } else {
            zeros[0] + 2.0 * PI
        };
        let panels = ((panels_total as f64 * (b - a) / (2.0 * PI)).round() as usize).max(1);
        let width = (b - a) / panels as f64;
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * width;
            for (x, w) in gx.iter().zip(&gw) {
                nodes.push(mid + 0.5 * width * x);
                weights.push(0.5 * width * w);
            }
        }
    }
    (nodes, weights)
}

/// `g_l` for `l = −(L−1) ..= L−1`.
#[derive(Debug, Clone)]
pub struct MajoranaCoefficients {
    pub max_lag: usize,
    values: Vec<f64>,
    /// Largest `|Im g_l|` seen; expected below `1e-10`.
    pub max_imag: f64,
}

impl MajoranaCoefficients {
    pub fn get(&self, lag: i64) -> f64 {
        self.values[(lag + self.max_lag as i64) as usize]
    }

    pub fn is_real(&self) -> bool {
        self.max_imag < 1e-10
    }
}

pub fn majorana_coefficients(
    lambda: f64,
    gamma: f64,
    max_lag: usize,
    quadrature_points: usize,
) -> Result<MajoranaCoefficients> {
    if !lambda.is_finite() || !gamma.is_finite() {
        return Err(Error::InvalidInput("non-finite chain parameter".into()));
    }
    if quadrature_points < MIN_QUADRATURE_POINTS {
        return Err(Error::InvalidInput(format!(
            "need at least {MIN_QUADRATURE_POINTS} quadrature points"
        )));
    }
    let (nodes, weights) = quadrature(lambda, gamma, quadrature_points);
    let mut symbol = Vec::with_capacity(nodes.len());
    for &phi in &nodes {
        let re = phi.cos() - lambda;
        let im = -gamma * phi.sin();
        let modulus = re.hypot(im);
        if modulus == 0.0 {
            return Err(Error::Numerical(format!(
                "symbol vanishes at quadrature node φ = {phi}"
            )));
        }
        symbol.push((re / modulus, im / modulus));
    }
    let mut values = Vec::with_capacity(2 * max_lag + 1);
    let mut max_imag = 0.0_f64;
    for lag in -(max_lag as i64)..=(max_lag as i64) {
        let (mut re, mut im) = (0.0, 0.0);
        for ((&phi, &w), &(fr, fi)) in nodes.iter().zip(&weights).zip(&symbol) {
            let (s, c) = (lag as f64 * phi).sin_cos();
            // e^{−ilφ} f = (c − i s)(fr + i fi)
            re += w * (c * fr + s * fi);
            im += w * (c * fi - s * fr);
        }
        values.push(re / (2.0 * PI));
        max_imag = max_imag.max((im / (2.0 * PI)).abs());
    }
    Ok(MajoranaCoefficients {
        max_lag,
        values,
        max_imag,
    })
}

#[derive(Debug, Clone)]
pub struct MajoranaBlock {
    pub gamma_l: Array2<f64>,
    /// Positive eigenvalues of `iΓ_L`, descending, clamped to `[0, 1]`.
    pub nus: Vec<f64>,
}

impl MajoranaBlock {
    pub fn new(g: &MajoranaCoefficients, l: usize) -> Result<Self> {
        if l == 0 || l > g.max_lag + 1 {
            return Err(Error::InvalidInput(format!(
                "block length {l} needs lags up to {}",
                l.saturating_sub(1)
            )));
        }
        let mut gamma_l = Array2::<f64>::zeros((2 * l, 2 * l));
        let mut toeplitz = Array2::<f64>::zeros((l, l));
        for i in 0..l {
            for j in 0..l {
                let lag = j as i64 - i as i64;
                gamma_l[[2 * i, 2 * j + 1]] = g.get(lag);
                gamma_l[[2 * i + 1, 2 * j]] = -g.get(-lag);
                toeplitz[[i, j]] = g.get(lag);
            }
        }
        let (_, sv, _) = toeplitz.svd(false, false)?;
        let mut nus = Vec::with_capacity(l);
        for &nu in sv.iter() {
            if nu > 1.0 + 1e-9 {
                return Err(Error::Numerical(format!("Majorana eigenvalue {nu} exceeds 1")));
            }
            nus.push(nu.min(1.0));
        }
        Ok(Self { gamma_l, nus })
    }

    pub fn entropy(&self) -> f64 {
        self.nus
            .iter()
            .map(|&nu| binary_entropy((1.0 + nu) / 2.0))
            .sum()
    }
}

/// Block entropy of the infinite chain.
pub fn entropy_thermo(lambda: f64, gamma: f64, l: usize, quadrature_points: usize) -> Result<f64> {
    Ok(thermo_entropies(lambda, gamma, &[l], quadrature_points)?[0])
}

/// Block entropies for several `L`, sharing one set of `g_l`.
pub fn thermo_entropies(
    lambda: f64,
    gamma: f64,
    ls: &[usize],
    quadrature_points: usize,
) -> Result<Vec<f64>> {
    let max_l = ls.iter().copied().max().unwrap_or(0);
    if max_l == 0 || ls.contains(&0) {
        return Err(Error::InvalidInput("block lengths must be positive".into()));
    }
    let g = majorana_coefficients(lambda, gamma, max_l - 1, quadrature_points)?;
    ls.iter()
        .map(|&l| MajoranaBlock::new(&g, l).map(|b| b.entropy()))
        .collect()
}

/// Least-squares fit of `S = (c/3) ln L + b`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CentralChargeFit {
    pub c: f64,
    pub intercept: f64,
    pub rms_residual: f64,
}

pub fn fit_central_charge(points: &[(f64, f64)]) -> Result<CentralChargeFit> {
    if points.len() < 5 {
        return Err(Error::InvalidInput(format!(
            "central-charge fit needs at least 5 points, got {}",
            points.len()
        )));
    }
    if points.windows(2).any(|w| !(w[0].0 < w[1].0)) || points[0].0 <= 0.0 {
        return Err(Error::InvalidInput(
            "block lengths must be positive and strictly ascending".into(),
        ));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(points).map(|(x, p)| (x - mx) * (p.1 - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(points)
        .map(|(x, p)| (p.1 - slope * x - intercept).powi(2))
        .sum();
    Ok(CentralChargeFit {
        c: 3.0 * slope,
        intercept,
        rms_residual: (ss / n).sqrt(),
    })
}
