//! Quadratic-form representation of the Ising and XY chains.
//!
//! After the Jordan-Wigner map a chain Hamiltonian reads
//!
//! ```text
//! H = Σ_ij [ a_i† A_ij a_j + ½ (a_i† B_ij a_j† − a_i B_ij a_j) ] + offset
//! ```
//!
//! with `A` symmetric and `B` antisymmetric. The Ising chain
//! `H = −Σ σˣσˣ − λ Σ σᶻ` gives `A = 2λ·1 − hop`, `B = −(upper − lower)` and
//! `offset = −λN`. The XY chain is stored exactly as
//! `H = −½ Σ [ (1+γ)/2 σˣσˣ + (1−γ)/2 σʸσʸ + λ σᶻ ]`, so the overall factor ½
//! sits inside `A`, `B` and the offset (`λ` on the diagonal, `−½` hopping,
//! `∓γ/2` pairing, `offset = −λN/2`). The single-particle energies of the XY
//! form are then `√((λ − cos φ)² + γ² sin² φ)` without a prefactor.
//!
//! Periodic chains split into fermion-parity sectors `σ = ±1`; the sector
//! enters through the corner entries `A_1N = A_N1 = σ·t`, `B_1N = −σ·p`,
//! `B_N1 = σ·p` (`t`, `p` the hopping and pairing amplitudes).

use std::f64::consts::PI;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Ising,
    XY,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
}

/// Fermion-parity sector of a periodic chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    /// `σ = +1`, antiperiodic fermions.
    Even,
    /// `σ = −1`, periodic fermions.
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    pub fn from_sign(sign: f64) -> Self {
        if sign >= 0.0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// One Hamiltonian instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub model: Model,
    pub n_sites: usize,
    pub lambda: f64,
    /// Anisotropy; ignored for [`Model::Ising`].
    pub gamma: f64,
    pub boundary: Boundary,
    /// Parity sector. Must be `None` for open chains; a periodic chain
    /// without an explicit sector uses [`Parity::Even`].
    pub parity: Option<Parity>,
}

impl ChainSpec {
    pub fn ising(n_sites: usize, lambda: f64) -> Self {
        ChainSpec {
            model: Model::Ising,
            n_sites,
            lambda,
            gamma: 1.0,
            boundary: Boundary::Open,
            parity: None,
        }
    }

    pub fn xy(n_sites: usize, lambda: f64, gamma: f64) -> Self {
        ChainSpec {
            model: Model::XY,
            n_sites,
            lambda,
            gamma,
            boundary: Boundary::Open,
            parity: None,
        }
    }

    pub fn open(mut self) -> Self {
        self.boundary = Boundary::Open;
        self.parity = None;
        self
    }

    pub fn periodic(mut self, parity: Parity) -> Self {
        self.boundary = Boundary::Periodic;
        self.parity = Some(parity);
        self
    }

    pub fn with_parity(mut self, parity: Parity) -> Self {
        self.parity = Some(parity);
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return Err(Error::InvalidSpec(format!(
                "chain needs at least 2 sites, got {}",
                self.n_sites
            )));
        }
        if !self.lambda.is_finite() || !self.gamma.is_finite() {
            return Err(Error::InvalidSpec("non-finite model parameter".into()));
        }
        if self.boundary == Boundary::Open && self.parity.is_some() {
            return Err(Error::InvalidSpec(
                "open chains have no parity sector".into(),
            ));
        }
        Ok(())
    }

    /// Effective anisotropy: 1 for Ising.
    pub fn anisotropy(&self) -> f64 {
        match self.model {
            Model::Ising => 1.0,
            Model::XY => self.gamma,
        }
    }

    /// Sector of a periodic chain (`Even` when unset), `None` when open.
    pub fn sector(&self) -> Option<Parity> {
        match self.boundary {
            Boundary::Open => None,
            Boundary::Periodic => Some(self.parity.unwrap_or(Parity::Even)),
        }
    }

    /// Energy scale relative to the Ising normalisation (`½` for XY).
    fn scale(&self) -> f64 {
        match self.model {
            Model::Ising => 1.0,
            Model::XY => 0.5,
        }
    }
}

/// `H = a†Aa + ½(a†Ba† − aBa) + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    pub a: Array2<f64>,
    pub b: Array2<f64>,
    pub offset: f64,
}

impl QuadraticForm {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Checks the structural invariants (square, matching, `A = Aᵗ`, `B = −Bᵗ`).
    pub fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        if self.a.ncols() != n || self.b.dim() != (n, n) || n == 0 {
            return Err(Error::InvalidInput("A and B must be equal square matrices".into()));
        }
        for i in 0..n {
            for j in 0..n {
                if self.a[[i, j]] != self.a[[j, i]] || self.b[[i, j]] != -self.b[[j, i]] {
                    return Err(Error::InvalidInput(
                        "A must be symmetric and B antisymmetric".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Angles of the periodic-chain Fourier modes, stored in `(0, 2π]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumGrid {
    pub phis: Vec<f64>,
    pub sector: Parity,
}

pub fn build_quadratic_form(spec: &ChainSpec) -> Result<QuadraticForm> {
    spec.validate()?;
    let n = spec.n_sites;
    let s = spec.scale();
    let hop = s;
    let pair = s * spec.anisotropy();
    let mut a = Array2::<f64>::zeros((n, n));
    let mut b = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        a[[i, i]] = 2.0 * s * spec.lambda;
    }
    let mut bond = |i: usize, j: usize, sign: f64| {
        a[[i, j]] -= sign * hop;
        a[[j, i]] -= sign * hop;
        b[[i, j]] -= sign * pair;
        b[[j, i]] += sign * pair;
    };
    for i in 0..n - 1 {
        bond(i, i + 1, 1.0);
    }
    if let Some(parity) = spec.sector() {
        // a_{N+1} = −σ a_1 turns the wrap-around bond (N, N+1) into a (N, 1)
        // bond with sign −σ.
        bond(n - 1, 0, -parity.sign());
    }
    Ok(QuadraticForm {
        a,
        b,
        offset: -s * spec.lambda * n as f64,
    })
}

/// Closed-form single-particle energy at momentum `phi`.
pub fn dispersion(spec: &ChainSpec, phi: f64) -> f64 {
    let l = spec.lambda;
    match spec.model {
        Model::Ising => 2.0 * (l * l + 1.0 - 2.0 * l * phi.cos()).max(0.0).sqrt(),
        Model::XY => {
            let g = spec.gamma;
            ((l - phi.cos()).powi(2) + g * g * phi.sin().powi(2)).sqrt()
        }
    }
}

pub fn momentum_grid(spec: &ChainSpec) -> Result<MomentumGrid> {
    spec.validate()?;
    let sector = spec.sector().ok_or_else(|| {
        Error::NotApplicable("momentum grid requires a periodic chain".into())
    })?;
    let n = spec.n_sites as f64;
    let shift = match sector {
        Parity::Even => 1.0,
        Parity::Odd => 2.0,
    };
    let phis = (0..spec.n_sites)
        .map(|k| (2.0 * k as f64 + shift) * PI / n)
        .collect();
    Ok(MomentumGrid { phis, sector })
}

/// Number of grid brackets per site for the open-chain root search.
pub const ROOT_BRACKETS_PER_SITE: usize = 64;

/// Real roots `k ∈ (0, π)` of `sin(kN) = λ sin(k(N+1))`.
///
/// Roots are bracketed on a uniform grid and refined by bisection. For
/// `|λ| < N/(N+1)` one mode has left the real axis (the edge mode) and fewer
/// than `N` roots are returned.
pub fn open_bc_real_roots(spec: &ChainSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    if spec.model != Model::Ising || spec.boundary != Boundary::Open {
        return Err(Error::NotApplicable(
            "the transcendental root condition applies to the open Ising chain".into(),
        ));
    }
    if spec.lambda == 0.0 {
        return Err(Error::NotApplicable(
            "root condition requires a non-zero field".into(),
        ));
    }
    let n = spec.n_sites as f64;
    let lambda = spec.lambda;
    let f = |k: f64| (k * n).sin() - lambda * (k * (n + 1.0)).sin();

    let brackets = ROOT_BRACKETS_PER_SITE * spec.n_sites;
    let step = PI / brackets as f64;
    let mut roots = Vec::new();
    let mut lo = step;
    let mut f_lo = f(lo);
    for j in 2..brackets {
        let hi = j as f64 * step;
        let f_hi = f(hi);
        if f_lo == 0.0 {
            roots.push(lo);
        } else if f_lo * f_hi < 0.0 {
            roots.push(bisect(&f, lo, hi, f_lo));
        }
        lo = hi;
        f_lo = f_hi;
    }
    Ok(roots)
}

fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut f_lo: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if f_lo * f_mid < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    // pick the endpoint with the smaller residual
    if f(lo).abs() <= f(hi).abs() {
        lo
    } else {
        hi
    }
}
