//! Python bindings for `freechain`.
//!
//! Results come back as plain floats, lists and dicts.

use freechain::algebraic_states::{self, two_fermion};
use freechain::chain_model::{Boundary, ChainSpec, Model, Parity};
use freechain::{entanglement, free_fermion, quantum_probability as qp, scaling, Error};
use pyo3::exceptions::{PyArithmeticError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidSpec(_)
        | Error::InvalidInput(_)
        | Error::NotApplicable(_)
        | Error::ResourceGuard(_)
        | Error::InvalidState(_) => PyValueError::new_err(e.to_string()),
        Error::Numerical(_) | Error::Linalg(_) => PyArithmeticError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// A spin chain instance.
#[pyclass(name = "Chain", module = "freechain_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Chain {
    spec: ChainSpec,
}

#[pymethods]
impl Chain {
    #[new]
    #[pyo3(signature = (n, lam, model = "ising", gamma = 1.0, boundary = "periodic", parity = None))]
    fn new(
        n: usize,
        lam: f64,
        model: &str,
        gamma: f64,
        boundary: &str,
        parity: Option<&str>,
    ) -> PyResult<Self> {
        let model = match model {
            "ising" => Model::Ising,
            "xy" => Model::XY,
            other => return Err(PyValueError::new_err(format!("unknown model {other:?}"))),
        };
        let parity = match parity {
            None => None,
            Some("even") => Some(Parity::Even),
            Some("odd") => Some(Parity::Odd),
            Some(other) => return Err(PyValueError::new_err(format!("unknown parity {other:?}"))),
        };
        let boundary = match boundary {
            "open" => Boundary::Open,
            "periodic" => Boundary::Periodic,
            other => return Err(PyValueError::new_err(format!("unknown boundary {other:?}"))),
        };
        let parity = match (boundary, parity) {
            (Boundary::Periodic, None) => Some(Parity::Even),
            (_, p) => p,
        };
        let spec = ChainSpec {
            model,
            n_sites: n,
            lambda: lam,
            gamma: if model == Model::Ising { 1.0 } else { gamma },
            boundary,
            parity,
        };
        spec.validate().map_err(to_py)?;
        Ok(Chain { spec })
    }

    #[getter]
    fn n(&self) -> usize {
        self.spec.n_sites
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.spec.lambda
    }

    /// Single-particle energies, ascending.
    fn single_particle_energies(&self) -> PyResult<Vec<f64>> {
        let qf = freechain::chain_model::build_quadratic_form(&self.spec).map_err(to_py)?;
        let sol = free_fermion::solve(&qf).map_err(to_py)?;
        Ok(sol.lambdas.to_vec())
    }

    /// Ground energy; the lower parity sector for periodic chains.
    fn ground_energy(&self) -> PyResult<f64> {
        free_fermion::best_ground_energy(&self.spec).map_err(to_py)
    }

    /// `(even, odd)` sector energies of a periodic chain.
    fn sector_energies(&self) -> PyResult<(f64, f64)> {
        let s = free_fermion::ground_energy_check(&self.spec).map_err(to_py)?;
        Ok((s.even, s.odd))
    }

    /// Entanglement of the first `l` sites.
    fn entanglement<'py>(&self, py: Python<'py>, l: usize) -> PyResult<Bound<'py, PyDict>> {
        let r = entanglement::finite_chain_report(&self.spec, l).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("epsilons", r.epsilons.clone())?;
        d.set_item("rho_eigs", r.rho_eigs.clone())?;
        d.set_item("truncated_mass", r.truncated_mass)?;
        d.set_item("entropy", r.entropy)?;
        d.set_item("schmidt_gap", r.schmidt_gap)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "Chain(n={}, lam={}, model={:?}, gamma={}, boundary={:?}, parity={:?})",
            self.spec.n_sites,
            self.spec.lambda,
            self.spec.model,
            self.spec.gamma,
            self.spec.boundary,
            self.spec.parity
        )
    }
}

/// Block entropy of the infinite chain.
#[pyfunction]
#[pyo3(signature = (lam, gamma, l, points = entanglement::DEFAULT_QUADRATURE_POINTS))]
fn entropy_thermo(lam: f64, gamma: f64, l: usize, points: usize) -> PyResult<f64> {
    entanglement::entropy_thermo(lam, gamma, l, points).map_err(to_py)
}

/// Fit `S = c/3 ln L + b` to `(L, S)` pairs; returns `(c, b, rms)`.
#[pyfunction]
fn fit_central_charge(points: Vec<(f64, f64)>) -> PyResult<(f64, f64, f64)> {
    let fit = entanglement::fit_central_charge(&points).map_err(to_py)?;
    Ok((fit.c, fit.intercept, fit.rms_residual))
}

type SweepOutput<'py> = (Vec<Bound<'py, PyDict>>, Vec<(usize, f64, String)>);

/// Schmidt-gap sweep over sizes and couplings; returns `(rows, failures)`.
#[pyfunction]
fn sweep<'py>(
    py: Python<'py>,
    ns: Vec<usize>,
    lambdas: Vec<f64>,
    chain: &Chain,
) -> PyResult<SweepOutput<'py>> {
    let res = scaling::sweep(&ns, &lambdas, &chain.spec).map_err(to_py)?;
    let mut rows = Vec::with_capacity(res.rows.len());
    for r in &res.rows {
        let d = PyDict::new(py);
        d.set_item("N", r.n)?;
        d.set_item("lambda", r.lambda)?;
        d.set_item("schmidt_gap", r.schmidt_gap)?;
        d.set_item("entropy", r.entropy)?;
        d.set_item("ground_energy", r.ground_energy)?;
        rows.push(d);
    }
    let failures = res.failures.into_iter().map(|f| (f.n, f.lambda, f.error)).collect();
    Ok((rows, failures))
}

/// Data collapse of a sweep CSV; returns `{mu1, mu2, cost, nu, beta}`.
#[pyfunction]
#[pyo3(signature = (csv, lambda_c = 1.0, window = 0.1))]
fn collapse<'py>(py: Python<'py>, csv: &str, lambda_c: f64, window: f64) -> PyResult<Bound<'py, PyDict>> {
    let data = scaling::SweepResult::from_csv(csv).map_err(to_py)?;
    let search = scaling::SearchBox {
        window,
        ..Default::default()
    };
    let fit = scaling::collapse(&data, lambda_c, &search).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("mu1", fit.mu1)?;
    d.set_item("mu2", fit.mu2)?;
    d.set_item("cost", fit.cost)?;
    d.set_item("nu", fit.nu_est)?;
    d.set_item("beta", fit.beta_est)?;
    Ok(d)
}

/// Joint probability that both photons pass polarizers at `phi`, `theta`.
#[pyfunction]
fn joint_prob(phi: f64, theta: f64) -> f64 {
    qp::joint_prob(&qp::PolarizerSetup { phi, theta })
}

/// Bell inequality check; returns `(lhs, rhs, violated)`.
#[pyfunction]
fn bell_check(phis: (f64, f64), thetas: (f64, f64)) -> (f64, f64, bool) {
    let b = qp::bell_check(phis, thetas);
    (b.lhs, b.rhs, b.violated)
}

/// CHSH combination in `|ψ_λ⟩` for four unit vectors.
#[pyfunction]
fn chsh_value(lam: f64, a: [f64; 3], a2: [f64; 3], b: [f64; 3], b2: [f64; 3]) -> PyResult<f64> {
    qp::chsh_value(lam, &a, &a2, &b, &b2).map_err(to_py)
}

/// Largest `|CHSH|` found by a seeded multi-start search.
#[pyfunction]
#[pyo3(signature = (lam, starts = 16, seed = 0))]
fn maximize_chsh(lam: f64, starts: usize, seed: u64) -> PyResult<f64> {
    Ok(qp::maximize_chsh(lam, starts, seed).map_err(to_py)?.value)
}

fn gns_dict<'py>(
    py: Python<'py>,
    alg: &algebraic_states::FiniteAlgebra,
    state: &algebraic_states::AlgState,
) -> PyResult<Bound<'py, PyDict>> {
    let g = algebraic_states::gns(alg, state).map_err(to_py)?;
    let purity = algebraic_states::purity_report(&g);
    let d = PyDict::new(py);
    d.set_item("algebra_dim", alg.dim())?;
    d.set_item("hilbert_dim", g.hilbert_dim)?;
    d.set_item("blocks", g.block_projectors.len())?;
    d.set_item("commutant_dim", g.commutant_dim)?;
    d.set_item("irreducible", purity.is_irreducible)?;
    d.set_item("entropy", g.entropy)?;
    Ok(d)
}

/// GNS construction for the state `diag(λ, 1−λ)` on 2×2 matrices.
#[pyfunction]
fn gns_m2<'py>(py: Python<'py>, lam: f64) -> PyResult<Bound<'py, PyDict>> {
    let (alg, state) = algebraic_states::m2_lambda(lam).map_err(to_py)?;
    gns_dict(py, &alg, &state)
}

/// GNS construction for the two-fermion state restricted to the
/// even-parity pair algebra.
#[pyfunction]
fn gns_two_fermion<'py>(py: Python<'py>, theta: f64) -> PyResult<Bound<'py, PyDict>> {
    let (alg, state) = two_fermion::restricted(theta).map_err(to_py)?;
    gns_dict(py, &alg, &state)
}

#[pymodule]
fn freechain_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Chain>()?;
    m.add_function(wrap_pyfunction!(entropy_thermo, m)?)?;
    m.add_function(wrap_pyfunction!(fit_central_charge, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(collapse, m)?)?;
    m.add_function(wrap_pyfunction!(joint_prob, m)?)?;
    m.add_function(wrap_pyfunction!(bell_check, m)?)?;
    m.add_function(wrap_pyfunction!(chsh_value, m)?)?;
    m.add_function(wrap_pyfunction!(maximize_chsh, m)?)?;
    m.add_function(wrap_pyfunction!(gns_m2, m)?)?;
    m.add_function(wrap_pyfunction!(gns_two_fermion, m)?)?;
    Ok(())
}
