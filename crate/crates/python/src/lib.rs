//! Python bindings: parameters, presets, grids, simulation and diagnostics.
//! Fields cross the boundary as plain lists of floats.

use kabc_core::diagnostics::{self, Side};
use kabc_core::dynamics::{self, SimulationError};
use kabc_core::exact::{self, PeakonSpec, Shape};
use kabc_core::params::{self, Preset};
use kabc_core::spectral;
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(kabc, BlowUpError, PyRuntimeError, "The solution stopped being finite.");

fn err(e: kabc_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(module = "kabc", frozen, eq, skip_from_py_object)]
#[derive(Clone, Copy, PartialEq)]
pub struct Params(params::Params);

#[pymethods]
impl Params {
    #[new]
    fn new(k: i64, a: f64, b: f64, c: f64) -> PyResult<Self> {
        params::validate(k, a, b, c).map(Params).map_err(err)
    }

    /// Named preset; `ab` takes `a, b`, `gkbch` takes `k, b`, `bfam` takes `b`.
    #[staticmethod]
    #[pyo3(signature = (name, *, k=None, a=None, b=None))]
    fn preset(name: &str, k: Option<i64>, a: Option<f64>, b: Option<f64>) -> PyResult<Self> {
        let need = |v: Option<f64>, key: &str| v.ok_or_else(|| PyValueError::new_err(format!("preset `{name}` needs `{key}`")));
        let p = match name.parse::<params::PresetName>().map_err(err)? {
            params::PresetName::Ch => Preset::Ch,
            params::PresetName::Dp => Preset::Dp,
            params::PresetName::Novikov => Preset::Novikov,
            params::PresetName::Forq => Preset::Forq,
            params::PresetName::Ab => Preset::Ab { a: need(a, "a")?, b: need(b, "b")? },
            params::PresetName::Gkbch => Preset::Gkbch {
                k: k.ok_or_else(|| PyValueError::new_err("preset `gkbch` needs `k`"))?,
                b: need(b, "b")?,
            },
            params::PresetName::Bfam => Preset::Bfam { b: need(b, "b")? },
        };
        p.params().map(Params).map_err(err)
    }

    #[getter]
    fn k(&self) -> u32 {
        self.0.k()
    }

    #[getter]
    fn a(&self) -> f64 {
        self.0.a()
    }

    #[getter]
    fn b(&self) -> f64 {
        self.0.b()
    }

    #[getter]
    fn c(&self) -> f64 {
        self.0.c()
    }

    fn h1_conserved(&self) -> bool {
        params::h1_conserved(&self.0)
    }

    fn periodic_peakon_admissible(&self) -> bool {
        params::periodic_peakon_admissible(&self.0)
    }

    fn is_gkbch(&self) -> bool {
        self.0.is_gkbch()
    }

    fn __repr__(&self) -> String {
        format!("Params(k={}, a={}, b={}, c={})", self.0.k(), self.0.a(), self.0.b(), self.0.c())
    }
}

#[pyclass(module = "kabc", frozen, eq, skip_from_py_object)]
#[derive(Clone, Copy, PartialEq)]
pub struct Grid(spectral::Grid);

#[pymethods]
impl Grid {
    #[new]
    fn new(n: usize, length: f64) -> PyResult<Self> {
        spectral::Grid::new(n, length).map(Grid).map_err(err)
    }

    /// Periodic box of length 40π.
    #[staticmethod]
    fn line(n: usize) -> PyResult<Self> {
        spectral::Grid::line(n).map(Grid).map_err(err)
    }

    /// Circle of circumference 2π.
    #[staticmethod]
    fn circle(n: usize) -> PyResult<Self> {
        spectral::Grid::circle(n).map(Grid).map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn length(&self) -> f64 {
        self.0.length()
    }

    #[getter]
    fn dx(&self) -> f64 {
        self.0.dx()
    }

    #[getter]
    fn center(&self) -> f64 {
        self.0.center()
    }

    fn nodes(&self) -> Vec<f64> {
        self.0.nodes()
    }

    fn __repr__(&self) -> String {
        format!("Grid(n={}, length={})", self.0.n(), self.0.length())
    }
}

fn field(grid: &Grid, values: Vec<f64>) -> PyResult<spectral::Field> {
    spectral::Field::new(grid.0, values).map_err(err)
}

#[pyclass(module = "kabc", frozen)]
pub struct Trajectory(dynamics::Trajectory);

#[pymethods]
impl Trajectory {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.0.times.clone()
    }

    #[getter]
    fn snapshots(&self) -> Vec<Vec<f64>> {
        self.0.snapshots.iter().map(|f| f.values().to_vec()).collect()
    }

    /// `(t, dt, hs_norm, h1_sq)` per accepted step.
    #[getter]
    fn steps(&self) -> Vec<(f64, f64, f64, f64)> {
        self.0.steps.iter().map(|s| (s.t, s.dt, s.hs_norm, s.h1_sq)).collect()
    }

    #[getter]
    fn hs_bound(&self) -> f64 {
        self.0.hs_bound
    }

    #[getter]
    fn hs_bound_exceeded_at(&self) -> Option<f64> {
        self.0.hs_bound_exceeded_at
    }

    fn hs_sup(&self) -> f64 {
        self.0.hs_sup()
    }

    fn final_snapshot(&self) -> Vec<f64> {
        self.0.final_snapshot().values().to_vec()
    }

    fn h1_drift(&self) -> PyResult<f64> {
        diagnostics::h1_drift(&self.0).map_err(err)
    }

    fn crest_speed(&self) -> PyResult<f64> {
        diagnostics::crest_track(&self.0).map(|t| t.speed).map_err(err)
    }

    /// Particle paths and stretches from `seeds`, as `(times, paths, stretch)`.
    fn advect(&self, seeds: Vec<f64>) -> PyResult<(Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let ps = kabc_core::lagrangian::advect(&self.0, &seeds).map_err(err)?;
        Ok((ps.times, ps.paths, ps.stretch))
    }

    /// Largest relative residual of the momentum invariant along `seeds`.
    fn invariant_residual(&self, seeds: Vec<f64>) -> PyResult<f64> {
        let ps = kabc_core::lagrangian::advect(&self.0, &seeds).map_err(err)?;
        kabc_core::lagrangian::conservation_check(&self.0, &ps, &self.0.params).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.times.len()
    }
}

#[pyfunction]
#[pyo3(signature = (params, grid, u0, t_end, *, cfl_safety=0.4, dt_max=1e-2, output_stride=1, filter=false))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    params: &Params,
    grid: &Grid,
    u0: Vec<f64>,
    t_end: f64,
    cfl_safety: f64,
    dt_max: f64,
    output_stride: usize,
    filter: bool,
) -> PyResult<Trajectory> {
    let u0 = field(grid, u0)?;
    let cfg = dynamics::SimConfig {
        cfl_safety,
        dt_max,
        output_stride,
        filter: filter.then(spectral::SpectralFilter::default),
        ..dynamics::SimConfig::new(params.0, grid.0, t_end)
    };
    match py.detach(|| dynamics::simulate(&cfg, &u0)) {
        Ok(t) => Ok(Trajectory(t)),
        Err(SimulationError::BlowUp { time, last_good_time, .. }) => {
            Err(BlowUpError::new_err(format!("blow-up at t = {time} (last good state at t = {last_good_time})")))
        }
        Err(SimulationError::Config(e)) => Err(err(e)),
    }
}

/// The time derivative `u_t` of the nonlocal form.
#[pyfunction]
fn rhs(params: &Params, grid: &Grid, u: Vec<f64>) -> PyResult<Vec<f64>> {
    dynamics::rhs(&field(grid, u)?, &params.0, 0.0).map(|f| f.into_values()).map_err(err)
}

/// Gaussian-mollified peakon `γ e^{-|x - L/2|}`; width defaults to 3 dx.
#[pyfunction]
#[pyo3(signature = (gamma, grid, moll_width=None))]
fn peakon_profile(gamma: f64, grid: &Grid, moll_width: Option<f64>) -> PyResult<Vec<f64>> {
    let w = moll_width.unwrap_or_else(|| exact::default_moll_width(&grid.0));
    exact::mollified_profile(Shape::Peakon { gamma }, w, &grid.0).map(|f| f.into_values()).map_err(err)
}

/// Peakon speed on the line (`circle=False`) or the 2π circle.
#[pyfunction]
#[pyo3(signature = (gamma, params, circle=false))]
fn peakon_speed(gamma: f64, params: &Params, circle: bool) -> PyResult<f64> {
    let spec = if circle { PeakonSpec::circle(gamma, params.0) } else { PeakonSpec::line(gamma, params.0) };
    spec.map(|s| s.speed()).map_err(err)
}

#[pyfunction]
fn sobolev_norm(grid: &Grid, u: Vec<f64>, s: f64) -> PyResult<f64> {
    Ok(diagnostics::sobolev_norm(&field(grid, u)?, s))
}

/// Exponential fit of one tail over `window` (distances from the centre).
#[pyfunction]
#[pyo3(signature = (grid, u, window, side="right"))]
fn decay_fit<'py>(py: Python<'py>, grid: &Grid, u: Vec<f64>, window: (f64, f64), side: &str) -> PyResult<Bound<'py, PyDict>> {
    let side = match side {
        "right" => Side::Right,
        "left" => Side::Left,
        other => return Err(PyValueError::new_err(format!("side must be left or right, got {other:?}"))),
    };
    let fit = diagnostics::decay_fit(&field(grid, u)?, window, side).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("theta_hat", fit.theta_hat)?;
    d.set_item("amplitude", fit.amplitude)?;
    d.set_item("r2", fit.r2)?;
    d.set_item("floor_hit", fit.floor_hit)?;
    d.set_item("window", fit.window)?;
    d.set_item("samples", fit.samples)?;
    Ok(d)
}

#[pymodule]
fn kabc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Params>()?;
    m.add_class::<Grid>()?;
    m.add_class::<Trajectory>()?;
    m.add("BlowUpError", m.py().get_type::<BlowUpError>())?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(rhs, m)?)?;
    m.add_function(wrap_pyfunction!(peakon_profile, m)?)?;
    m.add_function(wrap_pyfunction!(peakon_speed, m)?)?;
    m.add_function(wrap_pyfunction!(sobolev_norm, m)?)?;
    m.add_function(wrap_pyfunction!(decay_fit, m)?)?;
    Ok(())
}
