use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use sparse_dfrc::array::{self, Beamformer, SelectionVector};
use sparse_dfrc::scenario::{parse_scenario, parse_scenario_str};
use sparse_dfrc::selection;
use sparse_dfrc::signaling::{self, ChannelModel, SymbolDictionary};
use sparse_dfrc::workflow;
use sparse_dfrc::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::Dimension { .. } | Error::Json(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Candidate antenna grid: integer positions times a spacing in wavelengths.
#[pyclass(name = "ArrayGeometry", module = "pydfrc", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGeometry {
    inner: array::ArrayGeometry,
}

#[pymethods]
impl PyGeometry {
    #[new]
    fn new(spacing: f64, positions: Vec<usize>) -> PyResult<Self> {
        Ok(Self {
            inner: array::ArrayGeometry::new(spacing, positions).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn ula(n: usize, spacing: f64) -> PyResult<Self> {
        Ok(Self {
            inner: array::ArrayGeometry::ula(n, spacing).map_err(to_py)?,
        })
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.inner.spacing()
    }

    #[getter]
    fn positions(&self) -> Vec<usize> {
        self.inner.positions().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn steering_vector(&self, theta_deg: f64) -> PyResult<Vec<Complex64>> {
        self.inner.steering_vector(theta_deg).map_err(to_py)
    }

    /// `w^H a(θ)` at each angle.
    fn pattern(&self, weights: Vec<Complex64>, angles: Vec<f64>) -> PyResult<Vec<Complex64>> {
        array::pattern_at_angles(&weights, &self.inner, &angles).map_err(to_py)
    }

    fn aperture_efficiency(&self, weights: Vec<Complex64>) -> PyResult<f64> {
        array::aperture_efficiency(&weights, &self.inner).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "ArrayGeometry(spacing={}, n={})",
            self.inner.spacing(),
            self.inner.len()
        )
    }
}

/// Communication symbol dictionary in natural binary order.
#[pyclass(name = "SymbolDictionary", module = "pydfrc", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDictionary {
    inner: SymbolDictionary,
}

#[pymethods]
impl PyDictionary {
    #[staticmethod]
    fn am(levels: Vec<f64>) -> PyResult<Self> {
        SymbolDictionary::am(&levels).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn pm(amplitude: f64, phases: Vec<f64>) -> PyResult<Self> {
        SymbolDictionary::pm(amplitude, &phases)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    fn ask2(high: f64, low: f64) -> PyResult<Self> {
        SymbolDictionary::ask2(high, low)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    fn bpsk(amplitude: f64) -> PyResult<Self> {
        SymbolDictionary::bpsk(amplitude)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    fn qpsk(amplitude: f64) -> PyResult<Self> {
        SymbolDictionary::qpsk(amplitude)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[getter]
    fn symbols(&self) -> Vec<Complex64> {
        self.inner.symbols().to_vec()
    }

    #[getter]
    fn bits_per_symbol(&self) -> usize {
        self.inner.bits_per_symbol()
    }

    /// Bits of the nearest entry to `(gain, phase)`.
    #[pyo3(signature = (gain, phase, scale = 1.0))]
    fn demap(&self, gain: f64, phase: f64, scale: f64) -> Vec<bool> {
        signaling::demap((gain, phase), &self.inner, scale)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyfunction]
fn estimate_symbol(y: Complex64, beta: Complex64) -> PyResult<(f64, f64)> {
    signaling::estimate_symbol(y, beta).map_err(to_py)
}

/// Simulated BER for the transmit gains of a symbol bank.
#[pyfunction]
#[pyo3(signature = (gains, dictionary, snr_db, trials, seed = 0, waveforms = 1))]
fn ber_curve(
    gains: Vec<Complex64>,
    dictionary: &PyDictionary,
    snr_db: Vec<f64>,
    trials: usize,
    seed: u64,
    waveforms: usize,
) -> PyResult<Vec<f64>> {
    signaling::ber_curve(
        &gains,
        &dictionary.inner,
        &ChannelModel::default(),
        &snr_db,
        waveforms,
        trials,
        seed,
    )
    .map(|c| c.ber)
    .map_err(to_py)
}

/// One swap step: returns the new 0/1 string and the swapped pair.
#[pyfunction]
fn swap_update(weights: Vec<Complex64>, bits: &str) -> PyResult<(String, Option<usize>, Option<usize>)> {
    let r = SelectionVector::parse_bits(bits).map_err(to_py)?;
    let s = selection::swap_update(&Beamformer::new(weights), &r).map_err(to_py)?;
    Ok((s.selection.to_bit_string(), s.p1, s.p2))
}

/// Parses a scenario file and runs the array design into `out`.
#[pyfunction]
#[pyo3(signature = (scenario, out, seed = None, starts = None))]
fn run_design<'py>(
    py: Python<'py>,
    scenario: PathBuf,
    out: PathBuf,
    seed: Option<u64>,
    starts: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let s = parse_scenario(&scenario).map_err(to_py)?;
    let opts = workflow::RunOptions {
        seed,
        starts,
        trials: None,
    };
    let s = opts.apply(&s).map_err(to_py)?;
    let o = py.detach(|| workflow::run_design(&s, &out)).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("selection", o.result.selection.to_bit_string())?;
    d.set_item("alpha", o.result.alpha)?;
    d.set_item("psl_db", o.result.psl_db)?;
    d.set_item("converged", o.converged())?;
    let metrics = PyDict::new(py);
    for m in &o.metrics {
        let e = PyDict::new(py);
        e.set_item("psl_db", m.psl_db)?;
        e.set_item("comm_gain", m.comm_gain)?;
        e.set_item("hpbw_deg", m.hpbw_deg)?;
        e.set_item("ripple_db", m.ripple_db)?;
        e.set_item("aperture_efficiency", m.aperture_efficiency)?;
        metrics.set_item(&m.label, e)?;
    }
    d.set_item("metrics", metrics)?;
    Ok(d)
}

/// Validates scenario JSON text; returns the scenario name.
#[pyfunction]
fn check_scenario(text: &str) -> PyResult<String> {
    parse_scenario_str(text).map(|s| s.name).map_err(to_py)
}

#[pymodule]
fn pydfrc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGeometry>()?;
    m.add_class::<PyDictionary>()?;
    m.add_function(wrap_pyfunction!(estimate_symbol, m)?)?;
    m.add_function(wrap_pyfunction!(ber_curve, m)?)?;
    m.add_function(wrap_pyfunction!(swap_update, m)?)?;
    m.add_function(wrap_pyfunction!(run_design, m)?)?;
    m.add_function(wrap_pyfunction!(check_scenario, m)?)?;
    Ok(())
}
