//! Brute-force exact diagonalization in the `2^N` spin basis.
//!
//! Basis convention: site 1 is the most significant bit of the basis index,
//! bit value 0 is spin up (`σᶻ = +1`, empty fermion mode) and 1 is spin down.
//! All index maps go through [`site_mask`].
//!
//! The Hamiltonian is assembled term by term from the printed spin
//! operators. The ground state is found by dense diagonalization of the
//! blocks of `H` that are invariant under the two exact symmetries of both
//! chains: the spin flip parity `P = Π σᶻ` and the mirror `i ↦ N + 1 − i`.
//! Energies of periodic chains use translation blocks instead, one per
//! momentum and parity. Each block is diagonalized densely; the blocks only
//! cut the cost.

use std::ops::Range;

use ndarray::{s, Array1, Array2};
use ndarray_linalg::SVD;
use num_complex::Complex64;

use crate::chain_model::{Boundary, ChainSpec, Model, Parity};
use crate::linalg::{eigh_herm, eigh_sym, eigvalsh_sym};
use crate::{xlogx, Error, Result};

/// Largest chain the oracle accepts (a 16384² real matrix is ~2 GB).
pub const MAX_SITES: usize = 14;

/// Bit mask of `site` (0-based) in an `n`-site basis index.
pub fn site_mask(n: usize, site: usize) -> usize {
    1 << (n - 1 - site)
}

#[derive(Debug, Clone)]
pub struct DenseHamiltonian {
    pub matrix: Array2<f64>,
    pub spec: ChainSpec,
}

/// Reduced density matrix on a contiguous block of sites.
#[derive(Debug, Clone)]
pub struct ReducedDensity {
    pub rho: Array2<f64>,
}

impl ReducedDensity {
    /// Eigenvalues ascending, negatives above −1e-12 clamped to zero.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let vals = eigvalsh_sym(self.rho.view())?;
        let mut out = Vec::with_capacity(vals.len());
        for v in vals {
            if v < -1e-12 {
                return Err(Error::Numerical(format!("density eigenvalue {v:e} < 0")));
            }
            out.push(v.max(0.0));
        }
        Ok(out)
    }

    pub fn trace(&self) -> f64 {
        self.rho.diag().sum()
    }
}

pub fn build_spin_hamiltonian(spec: &ChainSpec) -> Result<DenseHamiltonian> {
    spec.validate()?;
    let n = spec.n_sites;
    if n > MAX_SITES {
        return Err(Error::ResourceGuard(format!(
            "exact diagonalization is capped at {MAX_SITES} sites, got {n}"
        )));
    }
    // coefficients of σˣσˣ, σʸσʸ and σᶻ
    let (cxx, cyy, cz) = match spec.model {
        Model::Ising => (-1.0, 0.0, -spec.lambda),
        Model::XY => (
            -0.25 * (1.0 + spec.gamma),
            -0.25 * (1.0 - spec.gamma),
            -0.5 * spec.lambda,
        ),
    };
    let mut bonds: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
    if spec.boundary == Boundary::Periodic {
        bonds.push((n - 1, 0));
    }
    let dim = 1usize << n;
    let mut h = Array2::<f64>::zeros((dim, dim));
    for state in 0..dim {
        let mut diag = 0.0;
        for site in 0..n {
            let up = state & site_mask(n, site) == 0;
            diag += if up { cz } else { -cz };
        }
        h[[state, state]] += diag;
        for &(i, j) in &bonds {
            let (mi, mj) = (site_mask(n, i), site_mask(n, j));
            let flipped = state ^ mi ^ mj;
            // σʸσʸ|b_i b_j⟩ = −|flipped⟩ for equal bits, +|flipped⟩ otherwise
            let same = ((state & mi) == 0) == ((state & mj) == 0);
            let yy = if same { -cyy } else { cyy };
            h[[flipped, state]] += cxx + yy;
        }
    }
    Ok(DenseHamiltonian {
        matrix: h,
        spec: *spec,
    })
}

/// Diagonal of `Π σᶻ` in the spin basis.
pub fn parity_diagonal(n: usize) -> Vec<f64> {
    (0..1usize << n)
        .map(|s| if s.count_ones() % 2 == 0 { 1.0 } else { -1.0 })
        .collect()
}

fn reflect(state: usize, n: usize) -> usize {
    let mut out = 0;
    for site in 0..n {
        if state & site_mask(n, site) != 0 {
            out |= site_mask(n, n - 1 - site);
        }
    }
    out
}

/// One symmetry block: columns of the isometry as sparse (index, weight) lists.
struct SymmetryBlock {
    columns: Vec<Vec<(usize, f64)>>,
}

impl SymmetryBlock {
    fn project(&self, h: &Array2<f64>) -> Array2<f64> {
        let m = self.columns.len();
        let mut out = Array2::<f64>::zeros((m, m));
        for (a, ca) in self.columns.iter().enumerate() {
            for (b, cb) in self.columns.iter().enumerate().skip(a) {
                let mut v = 0.0;
                for &(i, wi) in ca {
                    for &(j, wj) in cb {
                        v += wi * wj * h[[i, j]];
                    }
                }
                out[[a, b]] = v;
                out[[b, a]] = v;
            }
        }
        out
    }

    fn embed(&self, coeffs: ndarray::ArrayView1<f64>, dim: usize) -> Array1<f64> {
        let mut v = Array1::<f64>::zeros(dim);
        for (col, &c) in self.columns.iter().zip(coeffs.iter()) {
            for &(i, w) in col {
                v[i] += c * w;
            }
        }
        v
    }
}

/// Blocks ordered (even, +), (even, −), (odd, +), (odd, −).
fn symmetry_blocks(n: usize) -> Vec<(bool, SymmetryBlock)> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut blocks = Vec::new();
    for even in [true, false] {
        for mirror_even in [true, false] {
            let mut columns = Vec::new();
            for s in 0..1usize << n {
                if (s.count_ones() % 2 == 0) != even {
                    continue;
                }
                let t = reflect(s, n);
                if t < s {
                    continue;
                }
                if t == s {
                    if mirror_even {
                        columns.push(vec![(s, 1.0)]);
                    }
                } else {
                    let sign = if mirror_even { 1.0 } else { -1.0 };
                    columns.push(vec![(s, r), (t, sign * r)]);
                }
            }
            if !columns.is_empty() {
                blocks.push((even, SymmetryBlock { columns }));
            }
        }
    }
    blocks
}

/// Cyclic shift of every site by one.
fn translate(state: usize, n: usize) -> usize {
    (state >> 1) | ((state & 1) << (n - 1))
}

/// Translation block: columns `(1/√P) Σ_j e^{ikj} |T^j r⟩` over orbit
/// representatives `r` of period `P` compatible with momentum `k`.
struct MomentumBlock {
    columns: Vec<Vec<(usize, Complex64)>>,
}

impl MomentumBlock {
    fn project(&self, h: &Array2<f64>) -> Array2<Complex64> {
        let m = self.columns.len();
        let mut out = Array2::<Complex64>::zeros((m, m));
        for (a, ca) in self.columns.iter().enumerate() {
            for (b, cb) in self.columns.iter().enumerate().skip(a) {
                let mut v = Complex64::new(0.0, 0.0);
                for &(i, wi) in ca {
                    for &(j, wj) in cb {
                        let hij = h[[i, j]];
                        if hij != 0.0 {
                            v += wi.conj() * wj * hij;
                        }
                    }
                }
                out[[a, b]] = v;
                out[[b, a]] = v.conj();
            }
        }
        out
    }
}

fn momentum_blocks(n: usize) -> Vec<(bool, MomentumBlock)> {
    let mut orbits: Vec<(usize, usize)> = Vec::new();
    for s in 0..1usize << n {
        let mut t = translate(s, n);
        let mut period = 1;
        let mut is_rep = true;
        while t != s {
            if t < s {
                is_rep = false;
                break;
            }
            t = translate(t, n);
            period += 1;
        }
        if is_rep {
            orbits.push((s, period));
        }
    }
    let mut blocks = Vec::new();
    for even in [true, false] {
        for m in 0..n {
            let k = 2.0 * std::f64::consts::PI * m as f64 / n as f64;
            let mut columns = Vec::new();
            for &(r, period) in &orbits {
                if (r.count_ones() % 2 == 0) != even || (m * period) % n != 0 {
                    continue;
                }
                let norm = 1.0 / (period as f64).sqrt();
                let mut col = Vec::with_capacity(period);
                let mut t = r;
                for j in 0..period {
                    col.push((t, Complex64::from_polar(norm, k * j as f64)));
                    t = translate(t, n);
                }
                columns.push(col);
            }
            if !columns.is_empty() {
                blocks.push((even, MomentumBlock { columns }));
            }
        }
    }
    blocks
}

/// Lowest energies in the even and odd spin-parity sectors.
pub fn parity_ground_energies(h: &DenseHamiltonian) -> Result<(f64, f64)> {
    let mut even = f64::INFINITY;
    let mut odd = f64::INFINITY;
    let mut keep = |is_even: bool, e0: f64| {
        let slot = if is_even { &mut even } else { &mut odd };
        *slot = slot.min(e0);
    };
    if h.spec.boundary == Boundary::Periodic {
        for (is_even, block) in momentum_blocks(h.spec.n_sites) {
            keep(is_even, eigh_herm(block.project(&h.matrix).view())?.0[0]);
        }
    } else {
        for (is_even, block) in symmetry_blocks(h.spec.n_sites) {
            keep(is_even, eigvalsh_sym(block.project(&h.matrix).view())?[0]);
        }
    }
    Ok((even, odd))
}

/// Ground energy (eigenvalues only).
pub fn ground_energy(h: &DenseHamiltonian) -> Result<f64> {
    let (even, odd) = parity_ground_energies(h)?;
    Ok(even.min(odd))
}

/// Lowest eigenpair. The vector is normalised and its largest-magnitude
/// amplitude is positive. Exact degeneracies across symmetry blocks resolve
/// to the first block in the order (even, mirror-even), (even, mirror-odd),
/// (odd, …).
pub fn ground_state(h: &DenseHamiltonian) -> Result<(f64, Array1<f64>)> {
    lowest_in_blocks(h, None)
}

/// Lowest eigenpair among states of spin parity `Π σᶻ = parity`.
pub fn sector_ground_state(h: &DenseHamiltonian, parity: Parity) -> Result<(f64, Array1<f64>)> {
    lowest_in_blocks(h, Some(parity))
}

fn lowest_in_blocks(h: &DenseHamiltonian, parity: Option<Parity>) -> Result<(f64, Array1<f64>)> {
    let n = h.spec.n_sites;
    let mut best: Option<(f64, Array1<f64>)> = None;
    for (even, block) in symmetry_blocks(n) {
        if parity.is_some_and(|p| (p == Parity::Even) != even) {
            continue;
        }
        let (vals, vecs) = eigh_sym(block.project(&h.matrix).view())?;
        if best.as_ref().is_none_or(|(e, _)| vals[0] < *e - 1e-12) {
            best = Some((vals[0], block.embed(vecs.column(0), 1 << n)));
        }
    }
    let (energy, mut v) = best.ok_or_else(|| Error::Internal("empty Hilbert space".into()))?;
    let norm = v.dot(&v).sqrt();
    v /= norm;
    let pivot = v
        .iter()
        .copied()
        .fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    if pivot < 0.0 {
        v.mapv_inplace(|x| -x);
    }
    Ok((energy, v))
}

/// `Tr_complement |ψ⟩⟨ψ|` for the contiguous sites `keep` (0-based).
pub fn partial_trace(vector: &Array1<f64>, keep: Range<usize>) -> Result<ReducedDensity> {
    let dim = vector.len();
    if !dim.is_power_of_two() || dim < 2 {
        return Err(Error::InvalidInput("state length must be 2^N".into()));
    }
    let n = dim.trailing_zeros() as usize;
    if keep.end > n || keep.start > keep.end {
        return Err(Error::InvalidInput(format!(
            "site range {keep:?} outside a {n}-site chain"
        )));
    }
    let left = 1usize << keep.start;
    let mid = 1usize << (keep.end - keep.start);
    let right = 1usize << (n - keep.end);
    let psi = vector
        .view()
        .into_shape_with_order((left, mid, right))
        .map_err(|e| Error::Internal(e.to_string()))?;
    let mut rho = Array2::<f64>::zeros((mid, mid));
    for l in 0..left {
        let slab = psi.slice(s![l, .., ..]);
        rho += &slab.dot(&slab.t());
    }
    Ok(ReducedDensity { rho })
}

/// `−Σ p ln p` over the clamped spectrum.
pub fn vn_entropy(rho: &ReducedDensity) -> Result<f64> {
    Ok(rho.eigenvalues()?.into_iter().map(xlogx).sum())
}

/// Squared singular values of the amplitude matrix across the cut after
/// `cut` sites, descending.
pub fn schmidt_coefficients(vector: &Array1<f64>, cut: usize) -> Result<Vec<f64>> {
    let dim = vector.len();
    let n = dim.trailing_zeros() as usize;
    if cut > n {
        return Err(Error::InvalidInput("cut beyond chain end".into()));
    }
    let m = vector
        .view()
        .into_shape_with_order((1usize << cut, 1usize << (n - cut)))
        .map_err(|e| Error::Internal(e.to_string()))?
        .to_owned();
    let (_, sv, _) = m.svd(false, false)?;
    Ok(sv.iter().map(|x| x * x).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn two_site_ground_state_closed_form() {
        for &lambda in &[0.0, 0.5, 1.0, 2.0] {
            let h = build_spin_hamiltonian(&ChainSpec::ising(2, lambda)).unwrap();
            let (e, v) = ground_state(&h).unwrap();
            let alpha = (1.0 + 4.0 * lambda * lambda).sqrt();
            assert!((e + alpha).abs() < 1e-12);
            if lambda > 0.0 {
                let norm = 1.0 / (2.0 * alpha * (alpha - 2.0 * lambda)).sqrt();
                let want = array![norm, 0.0, 0.0, norm * (alpha - 2.0 * lambda)];
                for (a, b) in v.iter().zip(want.iter()) {
                    assert!((a - b).abs() < 1e-12, "{v} vs {want}");
                }
            }
        }
    }

    #[test]
    fn momentum_blocks_agree_with_mirror_blocks() {
        for spec in [
            ChainSpec::ising(6, 0.7).periodic(Parity::Even),
            ChainSpec::xy(7, 0.3, 0.5).periodic(Parity::Even),
            ChainSpec::xy(8, 1.1, 0.2).periodic(Parity::Even),
        ] {
            let h = build_spin_hamiltonian(&spec).unwrap();
            let n = spec.n_sites;
            let total: usize = momentum_blocks(n).iter().map(|(_, b)| b.columns.len()).sum();
            assert_eq!(total, 1 << n);
            let (even, odd) = parity_ground_energies(&h).unwrap();
            for (parity, e) in [(Parity::Even, even), (Parity::Odd, odd)] {
                let (e_mirror, _) = sector_ground_state(&h, parity).unwrap();
                assert!((e - e_mirror).abs() < 1e-11, "{spec:?} {parity:?}: {e} vs {e_mirror}");
            }
        }
    }

    #[test]
    fn zero_field_two_site_energy() {
        // H = −σˣσˣ has eigenvalues ±1
        let h = build_spin_hamiltonian(&ChainSpec::ising(2, 0.0)).unwrap();
        assert!((ground_energy(&h).unwrap() + 1.0).abs() < 1e-14);
    }

    #[test]
    fn parity_commutes_periodic() {
        for spec in [
            ChainSpec::ising(3, 0.7).periodic(Parity::Even),
            ChainSpec::xy(4, 0.3, 0.5).periodic(Parity::Even),
        ] {
            let h = build_spin_hamiltonian(&spec).unwrap();
            let p = parity_diagonal(spec.n_sites);
            let dim = p.len();
            for i in 0..dim {
                for j in 0..dim {
                    let comm = h.matrix[[i, j]] * (p[j] - p[i]);
                    assert_eq!(comm, 0.0);
                }
            }
            assert_eq!(h.matrix, h.matrix.t());
        }
    }

    #[test]
    fn strong_field_polarizes() {
        let h = build_spin_hamiltonian(&ChainSpec::ising(4, 100.0)).unwrap();
        let (_, v) = ground_state(&h).unwrap();
        assert!(v[0] * v[0] > 1.0 - 1e-3);
    }

    #[test]
    fn product_and_bell_states() {
        // |+−⟩ with the first site up
        let product = array![0.0, 1.0, 0.0, 0.0];
        let rho = partial_trace(&product, 0..1).unwrap();
        assert!(vn_entropy(&rho).unwrap().abs() < 1e-14);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let bell = array![0.0, r, -r, 0.0];
        let rho = partial_trace(&bell, 0..1).unwrap();
        assert!((rho.rho[[0, 0]] - 0.5).abs() < 1e-15);
        assert!(rho.rho[[0, 1]].abs() < 1e-15);
        assert!((vn_entropy(&rho).unwrap() - 2f64.ln()).abs() < 1e-14);
        let full = partial_trace(&bell, 0..2).unwrap();
        assert!((full.trace() - 1.0).abs() < 1e-15);
        let empty = partial_trace(&bell, 1..1).unwrap();
        assert_eq!(empty.rho.dim(), (1, 1));
    }

    #[test]
    fn rho_two_site_closed_form() {
        for &lambda in &[0.2, 1.0, 2.3] {
            let h = build_spin_hamiltonian(&ChainSpec::ising(2, lambda)).unwrap();
            let (_, v) = ground_state(&h).unwrap();
            let rho = partial_trace(&v, 1..2).unwrap();
            let alpha = (1.0 + 4.0 * lambda * lambda).sqrt();
            assert!((rho.rho[[0, 0]] - (0.5 + lambda / alpha)).abs() < 1e-12);
            assert!((rho.rho[[1, 1]] - (0.5 - lambda / alpha)).abs() < 1e-12);
            assert!(rho.rho[[0, 1]].abs() < 1e-12);
        }
    }

    #[test]
    fn resource_guard() {
        assert!(matches!(
            build_spin_hamiltonian(&ChainSpec::ising(15, 1.0)),
            Err(Error::ResourceGuard(_))
        ));
    }
}
