//! Python bindings: models, the virtual-space engine, gate and readout
//! simulations, and the dense-oracle conformance check. Matrices cross the
//! boundary as nested lists of Python `complex`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use spt_mbqc::channel::VirtualEngine;
use spt_mbqc::gates::{finite_rotation, generator_set, lie_closure, rotation_step_channel, target_unitary, GateStep, PathMode, ReadoutSchedule};
use spt_mbqc::linalg::{self, CMat, C64};
use spt_mbqc::measurement::{self, Eigenphases, MeasurementBasis, VirtualRegister};
use spt_mbqc::model::{self, DEFAULT_K_MAX};
use spt_mbqc::oracle::{self, Scenario};
use spt_mbqc::trajectory::{self, Procedure};

fn to_py(e: spt_mbqc::Error) -> PyErr {
    if e.is_numerical() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn rows(m: &CMat) -> Vec<Vec<C64>> {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect()).collect()
}

fn from_rows(rows: &[Vec<C64>]) -> PyResult<CMat> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(PyValueError::new_err("matrix rows must be non-empty and of equal length"));
    }
    Ok(CMat::from_fn(n, rows[0].len(), |r, c| rows[r][c]))
}

fn schedule(name: &str) -> PyResult<ReadoutSchedule> {
    match name {
        "cos_sin" => Ok(ReadoutSchedule::CosSin),
        "cos_only" => Ok(ReadoutSchedule::CosOnly),
        "tuned" => Ok(ReadoutSchedule::Tuned),
        other => Err(PyValueError::new_err(format!("unknown schedule {other:?}; use cos_sin, cos_only or tuned"))),
    }
}

/// A resource-state model: byproducts `C_i` on the logical space and junk tensors.
#[pyclass(name = "PhasePoint", module = "spt_mbqc_py", frozen)]
pub struct PyPhasePoint {
    inner: model::PhasePoint,
}

#[pymethods]
impl PyPhasePoint {
    /// Cluster point of `Z_dim × Z_dim`.
    #[staticmethod]
    fn cluster(dim: usize) -> PyResult<Self> {
        if dim < 2 {
            return Err(PyValueError::new_err("dim must be at least 2"));
        }
        Ok(Self { inner: model::build_cluster_point(dim) })
    }

    /// Symmetry-respecting random perturbation of this model.
    #[pyo3(signature = (strength=0.3, junk_dim=2, seed=7))]
    fn perturbed(&self, strength: f64, junk_dim: usize, seed: u64) -> PyResult<Self> {
        Ok(Self { inner: model::perturb_point(&self.inner, strength, junk_dim, seed).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: model::from_json(text).map_err(to_py)? })
    }

    fn to_json(&self) -> String {
        model::to_json(&self.inner)
    }

    /// Raises `ValueError` listing every violated invariant.
    fn validate(&self) -> PyResult<()> {
        self.inner.validate(DEFAULT_K_MAX).map_err(to_py)
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label().to_string()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn logical_dim(&self) -> usize {
        self.inner.logical_dim()
    }

    #[getter]
    fn junk_dim(&self) -> usize {
        self.inner.junk_dim()
    }

    fn byproduct(&self, i: usize) -> PyResult<Vec<Vec<C64>>> {
        if i >= self.inner.d() {
            return Err(PyValueError::new_err(format!("byproduct index {i} out of range")));
        }
        Ok(rows(self.inner.byproduct(i)))
    }

    /// Dimension of the real Lie algebra generated by the rotation generators.
    fn lie_closure_dim(&self) -> PyResult<usize> {
        Ok(lie_closure(&generator_set(&self.inner), 1e-10, 4 * self.inner.logical_dim().pow(2), true).map_err(to_py)?.dim)
    }

    fn __repr__(&self) -> String {
        format!("PhasePoint({:?}, d={}, D={}, junk={})", self.inner.label(), self.inner.d(), self.inner.logical_dim(), self.inner.junk_dim())
    }
}

#[pyclass(name = "FiniteRotation", module = "spt_mbqc_py", frozen, get_all)]
pub struct PyFiniteRotation {
    distance: f64,
    process_fidelity: f64,
}

#[pyclass(name = "BornStatistics", module = "spt_mbqc_py", frozen, get_all)]
pub struct PyBornStatistics {
    eigenphases: Vec<f64>,
    frequencies: Vec<f64>,
    reference: Vec<f64>,
    max_z_score: f64,
    out_of_range: u64,
}

/// Exact channel engine on logical ⊗ junk for one model.
#[pyclass(name = "Engine", module = "spt_mbqc_py", frozen)]
pub struct PyEngine {
    inner: VirtualEngine,
}

#[pymethods]
impl PyEngine {
    #[new]
    fn new(point: &PyPhasePoint) -> PyResult<Self> {
        Ok(Self { inner: VirtualEngine::new(&point.inner).map_err(to_py)? })
    }

    #[getter]
    fn correlation_length(&self) -> f64 {
        self.inner.correlation_length()
    }

    #[getter]
    fn default_wire_len(&self) -> usize {
        self.inner.default_wire_len()
    }

    /// Junk fixed point `ρ_fix`.
    fn fixed_point(&self) -> Vec<Vec<C64>> {
        rows(&self.inner.fixed_point().rho)
    }

    /// Junk overlap matrix `ν_ij = tr[ℓ B_i ρ_fix B_j†]` of the junk tensors `B_i`.
    fn nu(&self) -> Vec<Vec<C64>> {
        rows(self.inner.nu().matrix())
    }

    /// Outcome-`k` filter value at eigenphase `phi` for the basis `ℬ(α, β)` on `pair`.
    fn filter(&self, pair: (usize, usize), alpha: f64, beta: f64, k: usize, phi: f64) -> f64 {
        measurement::filter_function(self.inner.nu(), &MeasurementBasis::general(pair, alpha, beta), k, phi)
    }

    /// Superoperator distance (Frobenius over `D`) of one small-angle step to its target rotation.
    #[pyo3(signature = (pair, dalpha, beta=0.0, wire_n=None))]
    fn step_distance(&self, pair: (usize, usize), dalpha: f64, beta: f64, wire_n: Option<usize>) -> PyResult<f64> {
        let step = GateStep { pair, dalpha, beta, wire_n: wire_n.unwrap_or(self.inner.default_wire_len()) };
        let ch = rotation_step_channel(&self.inner, &step, PathMode::Deterministic).map_err(to_py)?;
        let u = target_unitary(self.inner.nu(), self.inner.point().byproducts(), pair, dalpha, beta, PathMode::Deterministic);
        Ok(ch.distance_to_unitary(&u))
    }

    /// `n` repeated steps of `α/n` against the exact rotation by `α`.
    #[pyo3(signature = (pair, alpha, n, beta=0.0, wire_n=None, heralded=false))]
    fn finite_rotation(&self, pair: (usize, usize), alpha: f64, n: usize, beta: f64, wire_n: Option<usize>, heralded: bool) -> PyResult<PyFiniteRotation> {
        let mode = if heralded { PathMode::Heralded } else { PathMode::Deterministic };
        let r = finite_rotation(&self.inner, pair, alpha, beta, n, wire_n.unwrap_or(self.inner.default_wire_len()), mode).map_err(to_py)?;
        Ok(PyFiniteRotation { distance: r.distance, process_fidelity: r.process_fidelity })
    }

    /// Readout frequencies of `C_i^{-1}C_j` on a register prepared with the
    /// given eigenspace `weights`, compared with their Born probabilities.
    #[pyo3(signature = (pair, weights, trials=1000, n_m=100, alpha=std::f64::consts::FRAC_PI_4, schedule_name="cos_sin", seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn born_statistics(
        &self,
        py: Python<'_>,
        pair: (usize, usize),
        weights: Vec<f64>,
        trials: u64,
        n_m: usize,
        alpha: f64,
        schedule_name: &str,
        seed: u64,
    ) -> PyResult<PyBornStatistics> {
        let sched = schedule(schedule_name)?;
        let eig = Eigenphases::of_pair(self.inner.point().byproducts(), pair);
        if weights.len() > eig.projectors.len() {
            return Err(PyValueError::new_err(format!("{} weights for {} eigenspaces", weights.len(), eig.projectors.len())));
        }
        let dl = self.inner.logical_dim();
        let sigma = eig.projectors.iter().zip(&weights).fold(CMat::zeros(dl, dl), |acc, (p, &w)| acc + p * C64::from(w / p.trace().re));
        let engine = &self.inner;
        let stats = py
            .detach(|| {
                let reg = VirtualRegister::new(engine, &sigma, engine.default_wire_len())?;
                measurement::born_statistics(&reg, engine.nu(), pair, trials, n_m, alpha, sched, seed)
            })
            .map_err(to_py)?;
        Ok(PyBornStatistics {
            max_z_score: stats.max_z_score(),
            eigenphases: stats.eigenphases,
            frequencies: stats.frequencies,
            reference: stats.reference,
            out_of_range: stats.out_of_range,
        })
    }

    /// Total-variation distance of the last-site law between the reversed
    /// boundary and an open boundary behind `runway` traced sites.
    #[pyo3(signature = (runway=None, seed=0))]
    fn boundary_tv(&self, runway: Option<usize>, seed: u64) -> PyResult<f64> {
        let e = &self.inner;
        let runway = match runway {
            Some(r) => r,
            None => trajectory::default_runway(e).map_err(to_py)?,
        };
        let mut rng = measurement::trial_rng(seed, 0);
        let left = e.conditioned(&linalg::random_density(e.logical_dim(), &mut rng)).into_rho();
        let right = linalg::random_state(e.point().bond_dim(), &mut rng);
        let sites = vec![MeasurementBasis::general((0, 1), 0.2, 0.7), MeasurementBasis::wire(), MeasurementBasis::real((0, 1), 0.6)];
        let tilde = trajectory::final_site_distribution(e, &sites, &left, &trajectory::Boundary::Tilde, runway).map_err(to_py)?;
        let open = trajectory::final_site_distribution(e, &sites, &left, &trajectory::Boundary::Runway { right }, runway).map_err(to_py)?;
        Ok(0.5 * tilde.iter().zip(&open).map(|(a, b)| (a - b).abs()).sum::<f64>())
    }

    /// Largest deviation between the channel engine and the dense oracle over
    /// the wire procedures and one tilted step on `sites` sites.
    #[pyo3(signature = (sites=4, seed=0))]
    fn conformance(&self, py: Python<'_>, sites: usize, seed: u64) -> PyResult<Vec<(String, f64)>> {
        let scenarios = [
            ("wire_procedure_i", Scenario::Wire { procedure: Procedure::I, sites }),
            ("wire_procedure_ii", Scenario::Wire { procedure: Procedure::II, sites }),
            ("wire_procedure_iii", Scenario::Wire { procedure: Procedure::III, sites }),
            ("gate_step", Scenario::GateStep { basis: MeasurementBasis::general((0, 1), 0.3, 0.8), wire_n: sites.saturating_sub(1) }),
        ];
        let engine = &self.inner;
        py.detach(|| {
            scenarios
                .iter()
                .map(|(name, s)| oracle::compare_channel_vs_oracle(engine, s, seed, oracle::DEFAULT_CAP).map(|r| (name.to_string(), r.deviation)))
                .collect::<spt_mbqc::Result<Vec<_>>>()
        })
        .map_err(to_py)
    }
}

/// Cosine estimates from weak readouts of an eigenphase ladder register
/// (`C_1 = diag(e^{2πik/levels})`, completely mixed input).
#[pyfunction]
#[pyo3(signature = (nu, levels=8, n_m=1600, alpha=0.5, trials=50, seed=0))]
fn ladder_readout(py: Python<'_>, nu: Vec<Vec<C64>>, levels: usize, n_m: usize, alpha: f64, trials: u64, seed: u64) -> PyResult<Vec<f64>> {
    let nu = spt_mbqc::channel::NuMatrix::new(from_rows(&nu)?).map_err(to_py)?;
    let ladder = measurement::eigenphase_ladder(nu.clone(), levels).map_err(to_py)?;
    py.detach(|| {
        (0..trials)
            .map(|t| {
                let mut reg = ladder.clone();
                measurement::measure_observable(&mut reg, &nu, (0, 1), n_m, alpha, ReadoutSchedule::CosOnly, &mut measurement::trial_rng(seed, t))
                    .map(|r| r.cos_estimate)
            })
            .collect::<spt_mbqc::Result<Vec<_>>>()
    })
    .map_err(to_py)
}

#[pymodule]
fn spt_mbqc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPhasePoint>()?;
    m.add_class::<PyEngine>()?;
    m.add_class::<PyFiniteRotation>()?;
    m.add_class::<PyBornStatistics>()?;
    m.add_function(wrap_pyfunction!(ladder_readout, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_rows_round_trip() {
        let m = linalg::random_unitary(3, &mut measurement::trial_rng(1, 0));
        assert_eq!(from_rows(&rows(&m)).unwrap(), m);
        assert!(from_rows(&[vec![C64::from(1.0)], vec![]]).is_err());
    }

    #[test]
    fn schedule_names() {
        assert!(matches!(schedule("cos_only"), Ok(ReadoutSchedule::CosOnly)));
        assert!(schedule("both").is_err());
    }
}
