use pyo3::exceptions::{PyArithmeticError, PyIOError, PyValueError};
use pyo3::prelude::*;

use ris_ising::baselines;
use ris_ising::channel::{channel_gain_db, composite_channel_from_coefficients, ChannelSet, PhaseConfig, PhaseLevel, C64};
use ris_ising::harness::{self, DistanceRange, Method, OptimizeOptions};
use ris_ising::ising::{self, SpinConfig};
use ris_ising::reduction;
use ris_ising::scenario;
use ris_ising::scene::{build_geometry, ApertureModel, PropagationVariant, SceneConfig};
use ris_ising::solvers::{self, BifurcationParams, SaParams};
use ris_ising::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        Error::Numerical(_) | Error::DegenerateGeometry(_) => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn level_from(levels: usize) -> PyResult<PhaseLevel> {
    PhaseLevel::from_count(levels).map_err(py_err)
}

/// Scene description (geometry and channel-model options).
#[pyclass(name = "Scene", from_py_object)]
#[derive(Clone)]
struct PyScene {
    cfg: SceneConfig,
}

#[pymethods]
impl PyScene {
    /// Reference deployment with an `ris_side` x `ris_side` RIS.
    #[staticmethod]
    #[pyo3(signature = (ris_side, los=false))]
    fn reference(ris_side: usize, los: bool) -> Self {
        PyScene {
            cfg: SceneConfig::reference(ris_side, los),
        }
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyScene {
            cfg: scenario::load_scenario(path).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(PyScene {
            cfg: scenario::parse_scenario(text).map_err(py_err)?,
        })
    }

    #[getter]
    fn n_ris(&self) -> usize {
        self.cfg.n_ris()
    }

    #[getter]
    fn n_bs(&self) -> usize {
        self.cfg.n_bs()
    }

    #[getter]
    fn wavelength(&self) -> f64 {
        self.cfg.wavelength()
    }

    #[getter]
    fn los(&self) -> bool {
        self.cfg.los_enabled
    }

    #[setter]
    fn set_los(&mut self, los: bool) {
        self.cfg.los_enabled = los;
    }

    #[getter]
    fn ue_position(&self) -> [f64; 3] {
        self.cfg.ue_position.into()
    }

    #[setter]
    fn set_ue_position(&mut self, p: [f64; 3]) {
        self.cfg.ue_position = p.into();
    }

    #[getter]
    fn aperture(&self) -> &'static str {
        match self.cfg.aperture_model {
            ApertureModel::Flat => "flat",
            ApertureModel::CosineProjected => "cosine_projected",
        }
    }

    #[setter]
    fn set_aperture(&mut self, name: &str) -> PyResult<()> {
        self.cfg.aperture_model = match name {
            "flat" => ApertureModel::Flat,
            "cosine_projected" => ApertureModel::CosineProjected,
            _ => return Err(PyValueError::new_err(format!("unknown aperture model '{name}'"))),
        };
        Ok(())
    }

    #[getter]
    fn propagation(&self) -> &'static str {
        match self.cfg.propagation_variant {
            PropagationVariant::FriisSquared => "friis_squared",
            PropagationVariant::PaperPrinted => "paper_printed",
        }
    }

    #[setter]
    fn set_propagation(&mut self, name: &str) -> PyResult<()> {
        self.cfg.propagation_variant = match name {
            "friis_squared" => PropagationVariant::FriisSquared,
            "paper_printed" => PropagationVariant::PaperPrinted,
            _ => return Err(PyValueError::new_err(format!("unknown propagation variant '{name}'"))),
        };
        Ok(())
    }

    fn scene_hash(&self) -> String {
        harness::scene_hash(&self.cfg)
    }

    /// Channels at the scene's UE position.
    fn channels(&self) -> PyResult<PyChannels> {
        let geo = build_geometry(&self.cfg).map_err(py_err)?;
        Ok(PyChannels {
            ch: ChannelSet::synthesize(&self.cfg, &geo).map_err(py_err)?,
        })
    }

    /// Binary Fresnel-zone mask as phase indices.
    fn fresnel(&self) -> PyResult<Vec<u8>> {
        let geo = build_geometry(&self.cfg).map_err(py_err)?;
        Ok(baselines::fresnel_zone(&geo, self.cfg.wavelength()).indices)
    }

    fn __repr__(&self) -> String {
        format!(
            "Scene(n_ris={}, n_bs={}, los={}, ue={:?})",
            self.cfg.n_ris(),
            self.cfg.n_bs(),
            self.cfg.los_enabled,
            <[f64; 3]>::from(self.cfg.ue_position)
        )
    }
}

#[pyclass(name = "Channels")]
struct PyChannels {
    ch: ChannelSet,
}

#[pymethods]
impl PyChannels {
    #[getter]
    fn direct(&self) -> Vec<C64> {
        self.ch.direct.clone()
    }

    /// Row `n` of the cascade matrix.
    fn cascade_row(&self, n: usize) -> PyResult<Vec<C64>> {
        if n >= self.ch.n_ris() {
            return Err(PyValueError::new_err(format!("row {n} out of range")));
        }
        Ok(self.ch.cascade.row(n).to_vec())
    }

    #[getter]
    fn n_ris(&self) -> usize {
        self.ch.n_ris()
    }

    #[getter]
    fn n_bs(&self) -> usize {
        self.ch.n_bs()
    }

    /// Gain in dB for discrete phase indices at the given level.
    #[pyo3(signature = (indices, level=2))]
    fn gain_db(&self, indices: Vec<u8>, level: usize) -> PyResult<f64> {
        let phases = PhaseConfig::new(level_from(level)?, indices).map_err(py_err)?;
        self.gain_db_coefficients(phases.coefficients())
    }

    /// Gain in dB for arbitrary reflection coefficients.
    fn gain_db_coefficients(&self, coefficients: Vec<C64>) -> PyResult<f64> {
        let h = composite_channel_from_coefficients(&self.ch.direct, &self.ch.cascade, &coefficients).map_err(py_err)?;
        Ok(channel_gain_db(&h))
    }

    #[pyo3(signature = (indices, level=2, max_sweeps=100))]
    fn successive_refinement(&self, indices: Vec<u8>, level: usize, max_sweeps: usize) -> PyResult<Vec<u8>> {
        let level = level_from(level)?;
        let init = PhaseConfig::new(level, indices).map_err(py_err)?;
        baselines::successive_refinement(&self.ch.direct, &self.ch.cascade, level, &init, max_sweeps)
            .map(|p| p.indices)
            .map_err(py_err)
    }

    /// Returns `(gain_db, coefficients)`.
    #[pyo3(signature = (max_sweeps=1000))]
    fn continuous_reference(&self, max_sweeps: usize) -> PyResult<(f64, Vec<C64>)> {
        let r = baselines::continuous_reference(&self.ch.direct, &self.ch.cascade, max_sweeps).map_err(py_err)?;
        Ok((r.gain_db, r.coefficients))
    }

    fn binary_model(&self) -> PyResult<PyIsingModel> {
        ising::build_binary_ising(&self.ch.direct, &self.ch.cascade)
            .map(|model| PyIsingModel { model })
            .map_err(py_err)
    }

    fn quaternary_model(&self) -> PyResult<PyIsingModel> {
        ising::build_quaternary_ising(&self.ch.direct, &self.ch.cascade)
            .map(|model| PyIsingModel { model })
            .map_err(py_err)
    }
}

#[pyclass(name = "IsingModel", from_py_object)]
#[derive(Clone)]
struct PyIsingModel {
    model: ising::IsingModel,
}

#[pymethods]
impl PyIsingModel {
    /// Dense model from a row-major `n*n` coupling list.
    #[staticmethod]
    #[pyo3(signature = (n, couplings, fields, offset=0.0))]
    fn from_dense(n: usize, couplings: Vec<f64>, fields: Vec<f64>, offset: f64) -> PyResult<Self> {
        ising::IsingModel::from_dense(n, couplings, fields, offset)
            .map(|model| PyIsingModel { model })
            .map_err(py_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.model.n()
    }

    #[getter]
    fn fields(&self) -> Vec<f64> {
        self.model.fields().to_vec()
    }

    #[getter]
    fn offset(&self) -> f64 {
        self.model.offset()
    }

    fn coupling(&self, i: usize, j: usize) -> PyResult<f64> {
        if i >= self.model.n() || j >= self.model.n() {
            return Err(PyValueError::new_err("spin index out of range"));
        }
        Ok(self.model.coupling(i, j))
    }

    fn energy(&self, spins: Vec<i8>) -> PyResult<f64> {
        self.model.energy(&spins).map_err(py_err)
    }

    fn local_field(&self, spins: Vec<i8>) -> PyResult<Vec<f64>> {
        self.model.local_field(&spins).map_err(py_err)
    }

    /// Spins to phase indices.
    fn decode(&self, spins: Vec<i8>) -> PyResult<Vec<u8>> {
        ising::decode(&self.model, &spins).map(|p| p.indices).map_err(py_err)
    }

    fn encode(&self, indices: Vec<u8>) -> PyResult<Vec<i8>> {
        let level = match self.model.encoding() {
            ising::Encoding::Quaternary => PhaseLevel::Quaternary,
            _ => PhaseLevel::Binary,
        };
        let phases = PhaseConfig::new(level, indices).map_err(py_err)?;
        ising::encode(&self.model, &phases).map(SpinConfig::into_inner).map_err(py_err)
    }

    #[pyo3(signature = (bits=8))]
    fn quantized(&self, bits: u32) -> PyResult<Self> {
        ising::quantize_couplings(&self.model, bits)
            .map(|model| PyIsingModel { model })
            .map_err(py_err)
    }

    fn dump(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        ising::write_model_dump(&self.model, &mut buf).map_err(py_err)?;
        Ok(String::from_utf8(buf).expect("dump is ASCII"))
    }

    fn __repr__(&self) -> String {
        format!("IsingModel(n={}, factored={})", self.model.n(), self.model.is_factored())
    }
}

#[pyclass(name = "SolveReport", get_all)]
struct PySolveReport {
    best_spins: Vec<i8>,
    best_energy: f64,
    gain_db: f64,
    solver_name: String,
    seed: u64,
    steps: usize,
    wall_time: f64,
    replica_count: usize,
}

#[pymethods]
impl PySolveReport {
    fn __repr__(&self) -> String {
        format!(
            "SolveReport(solver={}, energy={:e}, gain_db={:.3})",
            self.solver_name, self.best_energy, self.gain_db
        )
    }
}

impl From<solvers::SolveReport> for PySolveReport {
    fn from(r: solvers::SolveReport) -> Self {
        PySolveReport {
            best_spins: r.best_spins.into_inner(),
            best_energy: r.best_energy,
            gain_db: r.gain_db,
            solver_name: r.solver_name,
            seed: r.seed,
            steps: r.steps,
            wall_time: r.wall_time,
            replica_count: r.replica_count,
        }
    }
}

#[pyfunction]
#[pyo3(signature = (model, seed=0, sweeps=200, replicas=8, t0=None, t_end=None))]
fn solve_sa(
    py: Python<'_>,
    model: &PyIsingModel,
    seed: u64,
    sweeps: usize,
    replicas: usize,
    t0: Option<f64>,
    t_end: Option<f64>,
) -> PyResult<PySolveReport> {
    let params = SaParams {
        t0,
        t_end,
        sweeps,
        seed,
        replicas,
        ..SaParams::default()
    };
    py.detach(|| solvers::solve_sa(&model.model, &params))
        .map(Into::into)
        .map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (model, seed=0, steps=1000, dt=1.25, replicas=8))]
fn solve_bifurcation(
    py: Python<'_>,
    model: &PyIsingModel,
    seed: u64,
    steps: usize,
    dt: f64,
    replicas: usize,
) -> PyResult<PySolveReport> {
    let params = BifurcationParams {
        steps,
        dt,
        seed,
        replicas,
        ..BifurcationParams::default()
    };
    py.detach(|| solvers::solve_bifurcation(&model.model, &params))
        .map(Into::into)
        .map_err(py_err)
}

#[pyfunction]
fn solve_exhaustive(py: Python<'_>, model: &PyIsingModel) -> PyResult<PySolveReport> {
    py.detach(|| solvers::solve_exhaustive(&model.model))
        .map(Into::into)
        .map_err(py_err)
}

#[pyclass(name = "Reduction", get_all)]
struct PyReduction {
    predetermined: Vec<usize>,
    fixed_spins: Vec<i8>,
    free: Vec<usize>,
    reduced_model: Py<PyIsingModel>,
    removal_fraction: f64,
    threshold: f64,
}

#[pymethods]
impl PyReduction {
    /// Full configuration from a solution of the reduced model.
    fn merge(&self, reduced_spins: Vec<i8>) -> PyResult<Vec<i8>> {
        reduction::merge_solution(&reduced_spins, &self.predetermined, &self.fixed_spins)
            .map(SpinConfig::into_inner)
            .map_err(py_err)
    }
}

#[pyfunction]
fn flip_susceptibility(model: &PyIsingModel) -> Vec<f64> {
    reduction::flip_susceptibility(&model.model)
}

#[pyfunction]
#[pyo3(signature = (model, threshold_scale=1.0))]
fn reduce(py: Python<'_>, model: &PyIsingModel, threshold_scale: f64) -> PyResult<PyReduction> {
    let r = reduction::reduce(&model.model, threshold_scale).map_err(py_err)?;
    let removal_fraction = r.removal_fraction();
    Ok(PyReduction {
        predetermined: r.predetermined,
        fixed_spins: r.fixed_spins,
        free: r.free,
        reduced_model: Py::new(py, PyIsingModel { model: r.reduced_model })?,
        removal_fraction,
        threshold: r.threshold,
    })
}

#[pyclass(name = "Optimized", get_all)]
struct PyOptimized {
    method: String,
    gain_db: f64,
    /// Phase indices; empty for the continuous reference.
    indices: Vec<u8>,
    angles: Vec<f64>,
    coefficients: Vec<C64>,
    best_energy: Option<f64>,
    wall_time: f64,
}

#[pymethods]
impl PyOptimized {
    fn __repr__(&self) -> String {
        format!("Optimized(method={}, gain_db={:.3})", self.method, self.gain_db)
    }
}

/// Optimizes the mask at the scene's UE position.
#[pyfunction]
#[pyo3(signature = (scene, method="cim-sa", level=2, seed=0, reduce=false, quantize_bits=None))]
fn optimize(
    py: Python<'_>,
    scene: &PyScene,
    method: &str,
    level: usize,
    seed: u64,
    reduce: bool,
    quantize_bits: Option<u32>,
) -> PyResult<PyOptimized> {
    let opts = OptimizeOptions {
        method: method.parse::<Method>().map_err(PyValueError::new_err)?,
        level: level_from(level)?,
        seed,
        reduce,
        quantize_bits,
        ..OptimizeOptions::default()
    };
    let run = py.detach(|| harness::optimize(&scene.cfg, &opts)).map_err(py_err)?;
    Ok(PyOptimized {
        method: run.method.label().to_string(),
        gain_db: run.gain_db,
        indices: run.phases.as_ref().map(|p| p.indices.clone()).unwrap_or_default(),
        angles: run.angles(),
        best_energy: run.report.as_ref().map(|r| r.best_energy),
        coefficients: run.coefficients,
        wall_time: run.wall_time,
    })
}

/// Gains (dB) of a fixed mask at UE distances `start..=stop` along y.
/// Returns `(distances, gains_db)`.
#[pyfunction]
#[pyo3(signature = (scene, coefficients, start=0.0, stop=100.0, step=0.25))]
fn sweep(
    py: Python<'_>,
    scene: &PyScene,
    coefficients: Vec<C64>,
    start: f64,
    stop: f64,
    step: f64,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let range = DistanceRange { start, stop, step };
    let mut r = py
        .detach(|| harness::run_sweep(&scene.cfg, &coefficients, range))
        .map_err(py_err)?;
    Ok((r.distances, r.columns.remove(0).gains_db))
}

#[pymodule]
#[pyo3(name = "ris_ising")]
fn py_ris_ising(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScene>()?;
    m.add_class::<PyChannels>()?;
    m.add_class::<PyIsingModel>()?;
    m.add_class::<PySolveReport>()?;
    m.add_class::<PyReduction>()?;
    m.add_class::<PyOptimized>()?;
    m.add_function(wrap_pyfunction!(solve_sa, m)?)?;
    m.add_function(wrap_pyfunction!(solve_bifurcation, m)?)?;
    m.add_function(wrap_pyfunction!(solve_exhaustive, m)?)?;
    m.add_function(wrap_pyfunction!(flip_susceptibility, m)?)?;
    m.add_function(wrap_pyfunction!(reduce, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    Ok(())
}
