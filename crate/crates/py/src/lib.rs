//! Python bindings: the tower, the symbolic construction, gap estimates and
//! certificates. Parameters cross the boundary as strings such as `"5/6"`;
//! structured results come back as plain dicts.

use num_complex::Complex64;
use pyo3::exceptions::{PyIndexError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

use tauer_path::certificates::{
    anticommutation_check, block_orthogonality_check, cutdown_equality_check, gamma_commutator_check,
    gamma_continuity_report, singularity_certificate_to,
};
use tauer_path::expectation::{gap_estimate, path_distance_bound};
use tauer_path::{BlockUnitary, Error, GapOptions, SeedingRule, TowerRational};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::IndexOutOfRange { .. } | Error::LevelOutOfRange { .. } => PyIndexError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn seeding(name: &str) -> PyResult<SeedingRule> {
    match name {
        "blockwise" => Ok(SeedingRule::Blockwise),
        "literal" => Ok(SeedingRule::Literal),
        other => Err(PyValueError::new_err(format!("unknown seeding rule {other:?}"))),
    }
}

fn block_unitary(name: &str) -> PyResult<BlockUnitary> {
    match name {
        "trace-free" => Ok(BlockUnitary::TraceFree),
        "random-phases" => Ok(BlockUnitary::RandomPhases),
        "projection" => Ok(BlockUnitary::Projection),
        other => Err(PyValueError::new_err(format!("unknown block unitary {other:?}"))),
    }
}

/// The prime tower `k_1 = 2, k_{r+1} = K_r + 1` and its grids.
#[pyclass(frozen)]
struct PrimeTower {
    inner: tauer_path::PrimeTower,
}

#[pymethods]
impl PrimeTower {
    #[new]
    fn new(depth: usize) -> PyResult<Self> {
        Ok(PrimeTower { inner: tauer_path::PrimeTower::build(depth).map_err(py_err)? })
    }

    #[getter]
    fn depth(&self) -> usize {
        self.inner.depth()
    }

    /// Primes as decimal strings, since they outgrow machine integers.
    #[getter]
    fn primes(&self) -> Vec<String> {
        self.inner.primes().iter().map(ToString::to_string).collect()
    }

    #[getter]
    fn products(&self) -> Vec<String> {
        self.inner.products().iter().map(ToString::to_string).collect()
    }

    /// `m / K_n` for `m = 0..=K_n`, in lowest terms.
    fn grid(&self, n: usize) -> PyResult<Vec<String>> {
        Ok(self.inner.grid(n).map_err(py_err)?.iter().map(ToString::to_string).collect())
    }

    fn canonical_level(&self, t: &str) -> PyResult<usize> {
        Ok(self.inner.parse_rational(t).map_err(py_err)?.canonical_level())
    }

    fn __repr__(&self) -> String {
        format!("PrimeTower(primes={:?})", self.primes())
    }
}

/// Approximants `A_n(t)` as lists of labels `(m_1,l_1)(m_2,l_2)…`.
#[pyclass(frozen)]
struct Construction {
    inner: tauer_path::Construction,
}

impl Construction {
    fn param(&self, t: &str) -> PyResult<TowerRational> {
        self.inner.parse(t).map_err(py_err)
    }
}

#[pymethods]
impl Construction {
    #[new]
    #[pyo3(signature = (depth = 4, seeding = "blockwise"))]
    fn new(depth: usize, seeding: &str) -> PyResult<Self> {
        let rule = self::seeding(seeding)?;
        Ok(Construction { inner: tauer_path::Construction::new(depth).map_err(py_err)?.with_seeding(rule) })
    }

    #[getter]
    fn depth(&self) -> usize {
        self.inner.depth()
    }

    #[getter]
    fn seeding(&self) -> &'static str {
        match self.inner.seeding() {
            SeedingRule::Blockwise => "blockwise",
            SeedingRule::Literal => "literal",
        }
    }

    #[getter]
    fn tower(&self) -> PrimeTower {
        PrimeTower { inner: self.inner.tower().clone() }
    }

    /// `t·K_n`.
    fn cut(&self, t: &str, n: usize) -> PyResult<usize> {
        self.inner.cut(&self.param(t)?, n).map_err(py_err)
    }

    fn approximant(&self, t: &str, n: usize) -> PyResult<Vec<String>> {
        let a = self.inner.approximant(&self.param(t)?, n).map_err(py_err)?;
        Ok(a.labels().iter().map(ToString::to_string).collect())
    }

    /// Label `m` of `A_n(t)` without enumerating the approximant.
    fn label_at(&self, t: &str, n: usize, m: usize) -> PyResult<String> {
        Ok(self.inner.label_at(&self.param(t)?, n, m).map_err(py_err)?.to_string())
    }

    /// Labels below the cut, summing to a projection of trace `t`.
    fn gamma_projection(&self, t: &str, n: usize) -> PyResult<Vec<String>> {
        let labels = self.inner.gamma_projection(&self.param(t)?, n).map_err(py_err)?;
        Ok(labels.iter().map(ToString::to_string).collect())
    }

    /// Largest normalized trace pairing between distinct labels; zero for a masa.
    fn max_cross_pairing(&self, t: &str, n: usize) -> PyResult<f64> {
        let a = self.inner.approximant(&self.param(t)?, n).map_err(py_err)?;
        self.inner.max_cross_pairing(a.labels()).map_err(py_err)
    }

    /// Dense sum of the first `count` minimal projections (all by default),
    /// as rows of complex entries.
    #[pyo3(signature = (t, n, count = None))]
    fn materialize(&self, t: &str, n: usize, count: Option<usize>) -> PyResult<Vec<Vec<Complex64>>> {
        let a = self.inner.approximant(&self.param(t)?, n).map_err(py_err)?;
        let labels = &a.labels()[..count.unwrap_or(a.labels().len()).min(a.labels().len())];
        let m = self.inner.materialize(labels).map_err(py_err)?;
        Ok((0..m.dim()).map(|i| (0..m.dim()).map(|j| m.get(i, j)).collect()).collect())
    }

    #[pyo3(signature = (s, t, n, probes = 16, iterations = 500, seed = 0))]
    #[allow(clippy::too_many_arguments)]
    fn gap_estimate<'py>(
        &self,
        py: Python<'py>,
        s: &str,
        t: &str,
        n: usize,
        probes: usize,
        iterations: usize,
        seed: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let (s, t) = (self.param(s)?, self.param(t)?);
        let options = GapOptions { probes, iterations, seed, ..Default::default() };
        let gap = py.detach(|| gap_estimate(&self.inner, &s, &t, n, options)).map_err(py_err)?;
        let out = to_dict(py, &gap)?;
        let continuity = gamma_continuity_report(&s, &t, n, &gap);
        out.cast::<PyDict>()?.set_item("continuity", to_dict(py, &continuity)?)?;
        Ok(out)
    }

    #[pyo3(signature = (t, n1, n2 = None, eps = 1e-10))]
    fn singularity<'py>(
        &self,
        py: Python<'py>,
        t: &str,
        n1: usize,
        n2: Option<usize>,
        eps: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let t = self.param(t)?;
        let cert = singularity_certificate_to(&self.inner, &t, n1, n2.unwrap_or(n1 + 1), eps).map_err(py_err)?;
        to_dict(py, &cert)
    }

    fn block_orthogonality<'py>(
        &self,
        py: Python<'py>,
        t: &str,
        n: usize,
        m: usize,
        m2: usize,
        n1: usize,
    ) -> PyResult<Bound<'py, PyAny>> {
        let cert = block_orthogonality_check(&self.inner, &self.param(t)?, n, m, m2, n1).map_err(py_err)?;
        to_dict(py, &cert)
    }

    #[pyo3(signature = (t, n, samples = 8, seed = 0))]
    fn gamma_commutator<'py>(
        &self,
        py: Python<'py>,
        t: &str,
        n: usize,
        samples: usize,
        seed: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let t = self.param(t)?;
        let cert = py.detach(|| gamma_commutator_check(&self.inner, &t, n, samples, seed)).map_err(py_err)?;
        to_dict(py, &cert)
    }

    /// `unitary` is one of `"trace-free"`, `"random-phases"`, `"projection"`.
    #[pyo3(signature = (t, n, selection, unitary = "trace-free", seed = 0))]
    fn anticommutation<'py>(
        &self,
        py: Python<'py>,
        t: &str,
        n: usize,
        selection: Vec<usize>,
        unitary: &str,
        seed: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let unitary = block_unitary(unitary)?;
        let cert =
            anticommutation_check(&self.inner, &self.param(t)?, n, &selection, unitary, seed).map_err(py_err)?;
        to_dict(py, &cert)
    }

    fn cutdown<'py>(&self, py: Python<'py>, s: &str, t: &str, n: usize) -> PyResult<Bound<'py, PyAny>> {
        let cert = cutdown_equality_check(&self.inner, &self.param(s)?, &self.param(t)?, n).map_err(py_err)?;
        to_dict(py, &cert)
    }

    fn __repr__(&self) -> String {
        format!("Construction(depth={}, seeding={:?})", self.depth(), self.seeding())
    }
}

/// `2√|s−t|`.
#[pyfunction]
#[pyo3(signature = (s, t, depth = 4))]
fn distance_bound(s: &str, t: &str, depth: usize) -> PyResult<f64> {
    let tower = tauer_path::PrimeTower::build(depth).map_err(py_err)?;
    let parse = |x: &str| tower.parse_rational(x).map_err(py_err);
    Ok(path_distance_bound(&parse(s)?, &parse(t)?))
}

#[pymodule(name = "tauer_path")]
fn python_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PrimeTower>()?;
    m.add_class::<Construction>()?;
    m.add_function(wrap_pyfunction!(distance_bound, m)?)?;
    Ok(())
}
