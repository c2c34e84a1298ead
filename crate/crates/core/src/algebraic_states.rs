//! Finite-dimensional *-algebras, states on them and the GNS construction.
//!
//! An algebra is stored as a basis of `d×d` complex matrices that is
//! orthonormal for the Hilbert–Schmidt product `⟨a, b⟩ = Tr(a†b)`, so
//! coordinates are plain inner products. A state is stored by its values on
//! that basis.
//!
//! GNS: the Gram matrix `G_ab = ω(e_a* e_b)` is diagonalized, directions
//! with eigenvalue below [`NULL_TOL`] span the null ideal, and the rest are
//! rescaled into an orthonormal basis `w_k` of the quotient. Left
//! multiplication then reads `π(x) = W†G L(x) W`.
//!
//! Invariant subspaces come from the commutant `π(A)'`. The orthogonal
//! projection `D` of `|[1]⟩⟨[1]|` onto the commutant is diagonalized first;
//! its eigenspaces are invariant and do not depend on any basis choice.
//! Eigenspaces that are still reducible (an irreducible type repeated with
//! equal weight) are split by a seeded random Hermitian element of the
//! commutant. Any such split gives the same `ρ_ω` spectrum, because `D` is a
//! multiple of the identity on the piece being split.

use ndarray::{s, Array1, Array2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::linalg::{adjoint, cluster_ascending, eigh_herm, hermitize, hs_inner};
use crate::{xlogx, Error, Result};

pub type CMatrix = Array2<Complex64>;

/// Residual norm above which a product counts as a new direction.
pub const CLOSURE_TOL: f64 = 1e-10;
/// Gram eigenvalues below this span the null ideal.
pub const NULL_TOL: f64 = 1e-10;
/// Gram eigenvalues below `−STATE_TOL` make a functional invalid.
pub const STATE_TOL: f64 = 1e-8;
const BLOCK_SEED: u64 = 0x6e5_5eed;
const BLOCK_RETRIES: u64 = 3;

fn cz(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Debug, Clone)]
pub struct FiniteAlgebra {
    pub ambient_dim: usize,
    /// Hilbert–Schmidt orthonormal basis.
    pub basis: Vec<CMatrix>,
}

impl FiniteAlgebra {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Coordinates of `x` and the norm of the part of `x` outside the span.
    pub fn coords(&self, x: &CMatrix) -> (Vec<Complex64>, f64) {
        let mut rest = x.clone();
        let coords: Vec<Complex64> = self
            .basis
            .iter()
            .map(|e| {
                let c = hs_inner(e.view(), x.view());
                rest.scaled_add(-c, e);
                c
            })
            .collect();
        (coords, frobenius(&rest))
    }

    pub fn contains(&self, x: &CMatrix) -> bool {
        self.coords(x).1 <= CLOSURE_TOL * frobenius(x).max(1.0)
    }

    /// Largest residual of basis products and adjoints outside the span.
    pub fn closure_residual(&self) -> f64 {
        let mut worst = 0.0_f64;
        for a in &self.basis {
            worst = worst.max(self.coords(&adjoint(a.view())).1);
            for b in &self.basis {
                worst = worst.max(self.coords(&a.dot(b)).1);
            }
        }
        worst
    }
}

/// Adds `x` to an orthonormal list if it has a component outside the span.
fn extend_basis(basis: &mut Vec<CMatrix>, x: &CMatrix) -> bool {
    let mut r = x.clone();
    for _ in 0..2 {
        for e in basis.iter() {
            let c = hs_inner(e.view(), r.view());
            r.scaled_add(-c, e);
        }
    }
    let norm = frobenius(&r);
    if norm > CLOSURE_TOL {
        basis.push(r.mapv(|z| z / norm));
        true
    } else {
        false
    }
}

/// The unital *-algebra generated by `generators` (identity added).
pub fn close_algebra(generators: &[CMatrix]) -> Result<FiniteAlgebra> {
    let d = generators
        .first()
        .map(|g| g.nrows())
        .ok_or_else(|| Error::InvalidInput("no generators".into()))?;
    if generators.iter().any(|g| g.dim() != (d, d)) {
        return Err(Error::InvalidInput("generators must be square and equal-sized".into()));
    }
    let mut basis: Vec<CMatrix> = Vec::new();
    extend_basis(&mut basis, &CMatrix::eye(d));
    for g in generators {
        extend_basis(&mut basis, g);
        extend_basis(&mut basis, &adjoint(g.view()));
    }
    for _ in 0..=d * d {
        let mut grew = false;
        let snapshot = basis.clone();
        for a in &snapshot {
            for b in &snapshot {
                grew |= extend_basis(&mut basis, &a.dot(b));
            }
        }
        if !grew {
            return Ok(FiniteAlgebra {
                ambient_dim: d,
                basis,
            });
        }
        if basis.len() > d * d {
            break;
        }
    }
    Err(Error::Internal("algebra closure did not stabilise".into()))
}

/// Matrix units `|i⟩⟨j|` of `M_d`.
pub fn matrix_units(d: usize) -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            let mut m = CMatrix::zeros((d, d));
            m[[i, j]] = cz(1.0);
            out.push(m);
        }
    }
    out
}

/// A linear functional given by its values on the algebra basis.
#[derive(Debug, Clone)]
pub struct AlgState {
    pub values: Vec<Complex64>,
}

impl AlgState {
    /// `ω(x) = Tr(ρ x)`.
    pub fn from_density(alg: &FiniteAlgebra, rho: &CMatrix) -> Result<Self> {
        if rho.dim() != (alg.ambient_dim, alg.ambient_dim) {
            return Err(Error::InvalidInput("density matrix size mismatch".into()));
        }
        let values = alg
            .basis
            .iter()
            .map(|e| rho.dot(e).diag().sum())
            .collect();
        let state = Self { values };
        state.validate(alg)?;
        Ok(state)
    }

    /// `ω(x) = ⟨ψ|x|ψ⟩` for a unit vector `ψ`.
    pub fn from_vector(alg: &FiniteAlgebra, psi: &Array1<Complex64>) -> Result<Self> {
        let rho = Array2::from_shape_fn((psi.len(), psi.len()), |(i, j)| psi[i] * psi[j].conj());
        Self::from_density(alg, &rho)
    }

    /// Value on an element of the algebra.
    pub fn eval(&self, alg: &FiniteAlgebra, x: &CMatrix) -> Result<Complex64> {
        let (coords, residual) = alg.coords(x);
        if residual > CLOSURE_TOL * frobenius(x).max(1.0) {
            return Err(Error::InvalidInput(format!(
                "element lies outside the algebra (residual {residual:e})"
            )));
        }
        Ok(coords.iter().zip(&self.values).map(|(c, v)| c * v).sum())
    }

    /// `G_ab = ω(e_a* e_b)`.
    pub fn gram(&self, alg: &FiniteAlgebra) -> CMatrix {
        let n = alg.dim();
        let mut g = CMatrix::zeros((n, n));
        for a in 0..n {
            let ea = adjoint(alg.basis[a].view());
            for b in a..n {
                let (coords, _) = alg.coords(&ea.dot(&alg.basis[b]));
                let v: Complex64 = coords.iter().zip(&self.values).map(|(c, w)| c * w).sum();
                g[[a, b]] = v;
                g[[b, a]] = v.conj();
            }
        }
        g
    }

    /// Normalisation and positivity.
    pub fn validate(&self, alg: &FiniteAlgebra) -> Result<()> {
        if self.values.len() != alg.dim() {
            return Err(Error::InvalidState("functional size mismatch".into()));
        }
        let one = self.eval(alg, &CMatrix::eye(alg.ambient_dim))?;
        if (one - cz(1.0)).norm() > 1e-12 {
            return Err(Error::InvalidState(format!("ω(1) = {one}, not 1")));
        }
        let (vals, _) = eigh_herm(self.gram(alg).view())?;
        if vals[0] < -STATE_TOL {
            return Err(Error::InvalidState(format!(
                "functional is not positive (Gram eigenvalue {:e})",
                vals[0]
            )));
        }
        Ok(())
    }
}

/// `ω` on `big` evaluated on the basis of `sub`.
pub fn restrict_state(big: &FiniteAlgebra, state: &AlgState, sub: &FiniteAlgebra) -> Result<AlgState> {
    if big.ambient_dim != sub.ambient_dim {
        return Err(Error::InvalidInput("algebras live in different matrix spaces".into()));
    }
    let values = sub
        .basis
        .iter()
        .map(|e| state.eval(big, e))
        .collect::<Result<Vec<_>>>()?;
    let restricted = AlgState { values };
    restricted.validate(sub).map_err(|e| match e {
        Error::InvalidState(msg) => Error::InvalidState(format!("restriction failed: {msg}")),
        other => other,
    })?;
    Ok(restricted)
}

#[derive(Debug, Clone)]
pub struct GnsResult {
    pub hilbert_dim: usize,
    /// `π(e_a)` for every basis element.
    pub rep_matrices: Vec<CMatrix>,
    /// `|[1]⟩` in the orthonormal GNS basis.
    pub cyclic_vector: Array1<Complex64>,
    pub block_projectors: Vec<CMatrix>,
    pub rho_omega: CMatrix,
    /// Von Neumann entropy of `ρ_ω` (nats).
    pub entropy: f64,
    pub commutant_dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PurityReport {
    pub is_irreducible: bool,
    pub commutant_dim: usize,
}

pub fn purity_report(result: &GnsResult) -> PurityReport {
    PurityReport {
        is_irreducible: result.commutant_dim == 1,
        commutant_dim: result.commutant_dim,
    }
}

/// Orthonormal basis (HS) of `{X : [X, m] = 0 for all m}`.
fn commutant_basis(mats: &[CMatrix], dim: usize) -> Result<Vec<CMatrix>> {
    let n2 = dim * dim;
    let mut normal = CMatrix::zeros((n2, n2));
    // row-major vec: vec(XM − MX) = (1⊗Mᵗ − M⊗1) vec(X)
    for m in mats {
        let mut k = CMatrix::zeros((n2, n2));
        for i in 0..dim {
            for j in 0..dim {
                for l in 0..dim {
                    k[[i * dim + j, i * dim + l]] += m[[l, j]];
                    k[[i * dim + j, l * dim + j]] -= m[[i, l]];
                }
            }
        }
        normal = normal + adjoint(k.view()).dot(&k);
    }
    let (vals, vecs) = eigh_herm(normal.view())?;
    let scale = vals.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    Ok((0..n2)
        .filter(|&c| vals[c] < 1e-9 * scale)
        .map(|c| {
            let col = vecs.column(c);
            Array2::from_shape_fn((dim, dim), |(i, j)| col[i * dim + j])
        })
        .collect())
}

/// Dimension of `{P K P}` for `K` in the commutant, `P = V V†`.
fn compressed_dim(commutant: &[CMatrix], v: &CMatrix) -> usize {
    let vh = adjoint(v.view());
    let mut span: Vec<CMatrix> = Vec::new();
    for k in commutant {
        let c = vh.dot(k).dot(v);
        let mut r = c.clone();
        for _ in 0..2 {
            for e in &span {
                let coef = hs_inner(e.view(), r.view());
                r.scaled_add(-coef, e);
            }
        }
        let norm = frobenius(&r);
        if norm > 1e-8 {
            span.push(r.mapv(|z| z / norm));
        }
    }
    span.len()
}

/// Splits the column span of `v` into eigenspaces of `V† K V`.
fn split_by(k: &CMatrix, v: &CMatrix) -> Result<Vec<CMatrix>> {
    let compressed = adjoint(v.view()).dot(k).dot(v);
    let (vals, vecs) = eigh_herm(compressed.view())?;
    let vals: Vec<f64> = vals.to_vec();
    let spread = vals.iter().fold(0.0_f64, |a, x| a.max(x.abs())).max(1.0);
    Ok(cluster_ascending(&vals, 1e-8 * spread)
        .into_iter()
        .map(|r| v.dot(&vecs.slice(s![.., r]).to_owned()))
        .collect())
}

fn random_hermitian(commutant: &[CMatrix], seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = commutant[0].nrows();
    let mut k = CMatrix::zeros((dim, dim));
    for c in commutant {
        let w = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        k.scaled_add(w, c);
    }
    hermitize(k.view())
}

pub fn gns(alg: &FiniteAlgebra, state: &AlgState) -> Result<GnsResult> {
    state.validate(alg)?;
    let n = alg.dim();
    let g = state.gram(alg);
    let (mu, u) = eigh_herm(g.view())?;
    let kept: Vec<usize> = (0..n).filter(|&k| mu[k] > NULL_TOL).collect();
    let m = kept.len();
    let w = Array2::from_shape_fn((n, m), |(a, k)| u[[a, kept[k]]] / mu[kept[k]].sqrt());
    let wh_g = adjoint(w.view()).dot(&g);

    let mut rep_matrices = Vec::with_capacity(n);
    for x in &alg.basis {
        // L(x)_{cb} = coords_c(x e_b)
        let mut left = CMatrix::zeros((n, n));
        for (b, eb) in alg.basis.iter().enumerate() {
            let (coords, _) = alg.coords(&x.dot(eb));
            for (c, z) in coords.into_iter().enumerate() {
                left[[c, b]] = z;
            }
        }
        rep_matrices.push(wh_g.dot(&left).dot(&w));
    }
    let (one_coords, _) = alg.coords(&CMatrix::eye(alg.ambient_dim));
    let cyclic_vector = wh_g.dot(&Array1::from(one_coords));

    let commutant = commutant_basis(&rep_matrices, m)?;
    let projector_one = Array2::from_shape_fn((m, m), |(i, j)| cyclic_vector[i] * cyclic_vector[j].conj());
    let mut d = CMatrix::zeros((m, m));
    for k in &commutant {
        d.scaled_add(hs_inner(k.view(), projector_one.view()), k);
    }
    let coarse = split_by(&hermitize(d.view()), &CMatrix::eye(m))?;

    let mut blocks: Vec<CMatrix> = Vec::new();
    for v in coarse {
        if compressed_dim(&commutant, &v) == 1 {
            blocks.push(v);
            continue;
        }
        let mut done = false;
        for attempt in 0..BLOCK_RETRIES {
            let pieces = split_by(&random_hermitian(&commutant, BLOCK_SEED + attempt), &v)?;
            if pieces.iter().all(|p| compressed_dim(&commutant, p) == 1) {
                blocks.extend(pieces);
                done = true;
                break;
            }
        }
        if !done {
            return Err(Error::Numerical(
                "could not split the GNS space into irreducible blocks".into(),
            ));
        }
    }

    let block_projectors: Vec<CMatrix> = blocks.iter().map(|v| v.dot(&adjoint(v.view()))).collect();
    let mut rho_omega = CMatrix::zeros((m, m));
    for p in &block_projectors {
        let pv = p.dot(&cyclic_vector);
        for i in 0..m {
            for j in 0..m {
                rho_omega[[i, j]] += pv[i] * pv[j].conj();
            }
        }
    }
    let (rho_vals, _) = eigh_herm(rho_omega.view())?;
    let entropy = rho_vals.iter().map(|&p| xlogx(p.max(0.0))).sum();
    Ok(GnsResult {
        hilbert_dim: m,
        rep_matrices,
        cyclic_vector,
        block_projectors,
        rho_omega,
        entropy,
        commutant_dim: commutant.len(),
    })
}

/// `M₂` with `ω_λ(a) = λ a₁₁ + (1−λ) a₂₂`.
pub fn m2_lambda(lambda: f64) -> Result<(FiniteAlgebra, AlgState)> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidInput(format!("λ = {lambda} outside [0, 1]")));
    }
    let alg = close_algebra(&matrix_units(2))?;
    let mut rho = CMatrix::zeros((2, 2));
    rho[[0, 0]] = cz(lambda);
    rho[[1, 1]] = cz(1.0 - lambda);
    let state = AlgState::from_density(&alg, &rho)?;
    Ok((alg, state))
}

/// Two fermions with four single-particle modes `a₁, a₂, b₁, b₂`.
pub mod two_fermion {
    use super::*;

    const MODES: usize = 4;
    pub const A1: usize = 0;
    pub const A2: usize = 1;
    pub const B1: usize = 2;
    pub const B2: usize = 3;

    /// Creation operator on the 16-dimensional Fock space (bit k = mode k).
    fn creation(mode: usize) -> CMatrix {
        let dim = 1 << MODES;
        let mut c = CMatrix::zeros((dim, dim));
        for n in 0..dim {
            if n >> mode & 1 == 0 {
                let sign = if (n & ((1 << mode) - 1)).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
                c[[n | 1 << mode, n]] = cz(sign);
            }
        }
        c
    }

    fn annihilation(mode: usize) -> CMatrix {
        adjoint(creation(mode).view())
    }

    /// Columns: `a₁†a₂†, b₁†b₂†, a₁†b₂†, a₂†b₁†, a₁†b₁†, a₂†b₂†` applied to `|Ω⟩`.
    pub fn isometry() -> CMatrix {
        let mut vacuum = Array1::<Complex64>::zeros(1 << MODES);
        vacuum[0] = cz(1.0);
        let pairs = [(A1, A2), (B1, B2), (A1, B2), (A2, B1), (A1, B1), (A2, B2)];
        let mut v = CMatrix::zeros((1 << MODES, pairs.len()));
        for (k, &(p, q)) in pairs.iter().enumerate() {
            let state = creation(p).dot(&creation(q).dot(&vacuum));
            v.column_mut(k).assign(&state);
        }
        v
    }

    fn compress(op: &CMatrix) -> CMatrix {
        let v = isometry();
        adjoint(v.view()).dot(op).dot(&v)
    }

    /// `1, n₁₂, N_a, T₁, T₂, T₃` on the two-particle space.
    pub fn generators() -> Vec<CMatrix> {
        let n = |m: usize| creation(m).dot(&annihilation(m));
        let n12 = n(A1).dot(&n(A2));
        let na = n(A1) + n(A2);
        let a = [A1, A2];
        let mut out = vec![CMatrix::eye(6), compress(&n12), compress(&na)];
        for sigma in crate::quantum_probability::pauli() {
            let mut t = CMatrix::zeros((1 << MODES, 1 << MODES));
            for (l, &ml) in a.iter().enumerate() {
                for (lp, &mlp) in a.iter().enumerate() {
                    t.scaled_add(sigma[[l, lp]] * 0.5, &creation(ml).dot(&annihilation(mlp)));
                }
            }
            out.push(compress(&t));
        }
        out
    }

    /// `(cos θ a₁†b₂† + sin θ a₂†b₁†)|Ω⟩` in the two-particle basis.
    pub fn psi_theta(theta: f64) -> Array1<Complex64> {
        let mut v = Array1::<Complex64>::zeros(6);
        v[2] = cz(theta.cos());
        v[3] = cz(theta.sin());
        v
    }

    /// The one-particle algebra at the left location and `ω_θ` restricted to it.
    pub fn restricted(theta: f64) -> Result<(FiniteAlgebra, AlgState)> {
        let full = close_algebra(&matrix_units(6))?;
        let omega = AlgState::from_vector(&full, &psi_theta(theta))?;
        let sub = close_algebra(&generators())?;
        let restricted = restrict_state(&full, &omega, &sub)?;
        Ok((sub, restricted))
    }
}
