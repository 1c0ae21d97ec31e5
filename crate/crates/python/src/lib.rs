//! Python bindings for `factorial-neyman`.
//!
//! Exact quantities come back as `fractions.Fraction`; estimator outputs are floats.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use ::factorial_neyman as fneyman;
use ::factorial_neyman::oracle::{self, verify};
use ::factorial_neyman::sim::{self, SimConfig};
use ::factorial_neyman::{finite_population as fp, neymanian, Exact};

fn to_py_err(e: fneyman::Error) -> PyErr {
    match e {
        fneyman::Error::Refused { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn fraction<'py>(py: Python<'py>, v: &Exact) -> PyResult<Bound<'py, PyAny>> {
    let cls = PyModule::import(py, "fractions")?.getattr("Fraction")?;
    cls.call1((*v.numer(), *v.denom()))
}

fn exact_from(obj: &Bound<'_, PyAny>) -> PyResult<Exact> {
    let num: i128 = obj.getattr("numerator")?.extract()?;
    let den: i128 = obj.getattr("denominator")?.extract()?;
    if den == 0 {
        return Err(PyValueError::new_err("zero denominator"));
    }
    Ok(Exact::new(num, den))
}

/// The 2^K model matrix.
#[pyclass(name = "ModelMatrix", frozen)]
struct PyModelMatrix {
    inner: fneyman::ModelMatrix,
}

#[pymethods]
impl PyModelMatrix {
    #[new]
    fn new(k: u32) -> PyResult<Self> {
        Ok(PyModelMatrix {
            inner: fneyman::ModelMatrix::new(k).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn factors(&self) -> u32 {
        self.inner.factors()
    }

    #[getter]
    fn arms(&self) -> usize {
        self.inner.arms()
    }

    fn column(&self, l: usize) -> PyResult<Vec<i8>> {
        if l >= self.inner.arms() {
            return Err(PyValueError::new_err(format!("column {l} out of range")));
        }
        Ok(self.inner.column(l).to_vec())
    }

    /// Effect labels for columns 1..J.
    fn labels(&self) -> Vec<String> {
        (1..self.inner.arms())
            .map(|l| self.inner.label(l).to_string())
            .collect()
    }

    fn treatment_combinations(&self) -> Vec<Vec<i8>> {
        self.inner
            .treatment_combinations()
            .into_iter()
            .map(|z| z.levels().to_vec())
            .collect()
    }

    /// Rows of the matrix as lists.
    fn to_rows(&self) -> Vec<Vec<i8>> {
        (0..self.inner.arms())
            .map(|j| {
                (0..self.inner.arms())
                    .map(|l| self.inner.entry(j, l))
                    .collect()
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!("ModelMatrix(k={})", self.inner.factors())
    }
}

/// Binary science table, one row of potential outcomes per unit.
#[pyclass(name = "PotentialOutcomeTable", frozen)]
struct PyTable {
    inner: fneyman::PotentialOutcomeTable,
}

#[pymethods]
impl PyTable {
    #[new]
    fn new(rows: Vec<Vec<u8>>) -> PyResult<Self> {
        Ok(PyTable {
            inner: fneyman::PotentialOutcomeTable::new(rows).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn units(&self) -> usize {
        self.inner.units()
    }

    #[getter]
    fn arms(&self) -> usize {
        self.inner.arms()
    }

    fn rows(&self) -> Vec<Vec<u8>> {
        self.inner.rows().map(<[u8]>::to_vec).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "PotentialOutcomeTable(units={}, arms={})",
            self.inner.units(),
            self.inner.arms()
        )
    }
}

/// Population effects tau_bar_l for l = 1..J-1.
#[pyfunction]
fn population_effects<'py>(
    py: Python<'py>,
    table: &PyTable,
    matrix: &PyModelMatrix,
) -> PyResult<Vec<Bound<'py, PyAny>>> {
    let eff = fp::population_effects(&table.inner, &matrix.inner).map_err(to_py_err)?;
    eff.averages().iter().map(|v| fraction(py, v)).collect()
}

#[pyfunction]
fn s2_effect_direct<'py>(
    py: Python<'py>,
    table: &PyTable,
    matrix: &PyModelMatrix,
    l: usize,
) -> PyResult<Bound<'py, PyAny>> {
    fraction(
        py,
        &fp::s2_effect_direct(&table.inner, &matrix.inner, l).map_err(to_py_err)?,
    )
}

#[pyfunction]
fn s2_effect_closed_form<'py>(
    py: Python<'py>,
    table: &PyTable,
    matrix: &PyModelMatrix,
    l: usize,
) -> PyResult<Bound<'py, PyAny>> {
    fraction(
        py,
        &fp::s2_effect_closed_form(&table.inner, &matrix.inner, l).map_err(to_py_err)?,
    )
}

#[pyfunction]
fn sharp_lower_bound<'py>(
    py: Python<'py>,
    tau_bar: &Bound<'py, PyAny>,
    k: u32,
    n: usize,
) -> PyResult<Bound<'py, PyAny>> {
    if k == 0 || n < 2 {
        return Err(PyValueError::new_err("need k >= 1 and n >= 2"));
    }
    fraction(py, &fp::sharp_lower_bound(exact_from(tau_bar)?, k, n))
}

/// One of "decreasing", "increasing", "both", "neither".
#[pyfunction]
fn boundary_condition(table: &PyTable, matrix: &PyModelMatrix, l: usize) -> PyResult<&'static str> {
    Ok(
        match fp::boundary_condition(&table.inner, &matrix.inner, l).map_err(to_py_err)? {
            fp::BoundaryCondition::Decreasing => "decreasing",
            fp::BoundaryCondition::Increasing => "increasing",
            fp::BoundaryCondition::Both => "both",
            fp::BoundaryCondition::Neither => "neither",
        },
    )
}

#[pyfunction]
fn true_sampling_variance<'py>(
    py: Python<'py>,
    table: &PyTable,
    matrix: &PyModelMatrix,
    sizes: Vec<usize>,
    l: usize,
) -> PyResult<Bound<'py, PyAny>> {
    fraction(
        py,
        &fp::true_sampling_variance(&table.inner, &matrix.inner, &sizes, l).map_err(to_py_err)?,
    )
}

fn observed(sizes: Vec<u64>, successes: Vec<u64>) -> PyResult<neymanian::ObservedData> {
    neymanian::ObservedData::new(sizes, successes).map_err(to_py_err)
}

#[pyfunction]
fn estimate_effects(
    sizes: Vec<u64>,
    successes: Vec<u64>,
    matrix: &PyModelMatrix,
) -> PyResult<Vec<f64>> {
    neymanian::estimate_effects(&observed(sizes, successes)?, &matrix.inner).map_err(to_py_err)
}

#[pyfunction]
fn variance_classic(sizes: Vec<u64>, successes: Vec<u64>, k: u32) -> PyResult<f64> {
    neymanian::variance_classic(&observed(sizes, successes)?, k).map_err(to_py_err)
}

/// Per-effect analysis records as dicts.
#[pyfunction]
#[pyo3(signature = (sizes, successes, matrix, level = 0.95))]
fn analyze<'py>(
    py: Python<'py>,
    sizes: Vec<u64>,
    successes: Vec<u64>,
    matrix: &PyModelMatrix,
    level: f64,
) -> PyResult<Bound<'py, PyList>> {
    let records = neymanian::analyze(&observed(sizes, successes)?, &matrix.inner, level)
        .map_err(to_py_err)?;
    let out = PyList::empty(py);
    for r in records {
        let d = PyDict::new(py);
        d.set_item("label", r.label)?;
        d.set_item("estimate", r.estimate)?;
        d.set_item("var_classic", r.var_classic)?;
        d.set_item("correction", r.correction)?;
        d.set_item("var_improved", r.var_improved)?;
        d.set_item("clamped", r.clamped)?;
        d.set_item("ci_lower", r.ci_lower)?;
        d.set_item("ci_upper", r.ci_upper)?;
        out.append(d)?;
    }
    Ok(out)
}

/// (mean of estimate, variance of estimate, mean of classic estimator), exact.
#[pyfunction]
fn exact_randomization_moments<'py>(
    py: Python<'py>,
    table: &PyTable,
    matrix: &PyModelMatrix,
    sizes: Vec<usize>,
    l: usize,
) -> PyResult<(Bound<'py, PyAny>, Bound<'py, PyAny>, Bound<'py, PyAny>)> {
    let design = neymanian::Design::new(sizes).map_err(to_py_err)?;
    let mo = oracle::exact_randomization_moments(
        &table.inner,
        &matrix.inner,
        &design,
        l,
        oracle::DEFAULT_CAP,
    )
    .map_err(to_py_err)?;
    Ok((
        fraction(py, &mo.mean_estimate)?,
        fraction(py, &mo.variance_estimate)?,
        fraction(py, &mo.mean_classic)?,
    ))
}

/// Minimum S^2 over all couplings of the margins, with a witness table.
#[pyfunction]
fn min_s2_over_couplings<'py>(
    py: Python<'py>,
    units: usize,
    margins: Vec<usize>,
    matrix: &PyModelMatrix,
    l: usize,
) -> PyResult<(Bound<'py, PyAny>, PyTable)> {
    let spec = oracle::MarginSpec::new(units, margins).map_err(to_py_err)?;
    let (min, witness) =
        oracle::min_s2_over_couplings(&spec, &matrix.inner, l, oracle::DEFAULT_CAP)
            .map_err(to_py_err)?;
    Ok((fraction(py, &min)?, PyTable { inner: witness }))
}

/// Run the ratio simulation; returns the summary dict with a `ratios` list.
#[pyfunction]
#[pyo3(signature = (k = 3, units = 400, reps = 5000, seed = 1, obs_max = None, workers = None))]
fn simulate<'py>(
    py: Python<'py>,
    k: u32,
    units: usize,
    reps: usize,
    seed: u64,
    obs_max: Option<u64>,
    workers: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = SimConfig {
        factors: k,
        units,
        reps,
        seed,
        obs_max,
        workers,
        ..SimConfig::default()
    };
    let res = py
        .detach(|| sim::run_ratio_simulation(&cfg))
        .map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("min", res.summary.min)?;
    d.set_item("max", res.summary.max)?;
    d.set_item("mean", res.summary.mean)?;
    d.set_item(
        "frac_improvement_gt_10pct",
        res.summary.frac_improvement_gt_10pct,
    )?;
    d.set_item("n_clamped", res.summary.n_clamped)?;
    d.set_item("n_truncated", res.summary.n_truncated)?;
    d.set_item(
        "ratios",
        res.replicates.iter().map(|r| r.ratio).collect::<Vec<_>>(),
    )?;
    Ok(d)
}

/// Run the property suite; returns a list of (property, status, checked, failures).
#[pyfunction]
#[pyo3(signature = (k, n, fuzz = None, seed = 0, margins = None))]
fn verify_properties(
    py: Python<'_>,
    k: u32,
    n: usize,
    fuzz: Option<usize>,
    seed: u64,
    margins: Option<Vec<usize>>,
) -> PyResult<Vec<(String, String, u64, u64)>> {
    let source = match fuzz {
        Some(reps) => verify::TableSource::Fuzz { reps, seed },
        None => verify::TableSource::Exhaustive,
    };
    let mut cfg = verify::VerifyConfig::new(k, n, source);
    cfg.margins = margins;
    let results = py
        .detach(|| verify::run_verification(&cfg))
        .map_err(to_py_err)?;
    Ok(results
        .into_iter()
        .map(|r| {
            let status = match r.status {
                verify::Status::Pass => "pass",
                verify::Status::Fail => "fail",
                verify::Status::Skipped => "skipped",
            };
            (
                r.property.to_string(),
                status.to_string(),
                r.checked,
                r.failures,
            )
        })
        .collect())
}

#[pymodule(name = "factorial_neyman")]
fn py_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelMatrix>()?;
    m.add_class::<PyTable>()?;
    m.add_function(wrap_pyfunction!(population_effects, m)?)?;
    m.add_function(wrap_pyfunction!(s2_effect_direct, m)?)?;
    m.add_function(wrap_pyfunction!(s2_effect_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(sharp_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(boundary_condition, m)?)?;
    m.add_function(wrap_pyfunction!(true_sampling_variance, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_effects, m)?)?;
    m.add_function(wrap_pyfunction!(variance_classic, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(exact_randomization_moments, m)?)?;
    m.add_function(wrap_pyfunction!(min_s2_over_couplings, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(verify_properties, m)?)?;
    Ok(())
}
