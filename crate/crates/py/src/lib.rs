//! Python bindings: fibre layout generation, UD meshing, config-driven
//! solves, and the material-point driver.
//!
//! Build `librvehom_py.so` with cargo and load it directly (see
//! `python/smoke_test.py`); no Python build backend is required.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use rvehom::config::RunConfig;
use rvehom::layout::{generate_layout, FibreLayout, GenParams};
use rvehom::mesh;
use rvehom::plasticity::{MatrixParams, PointDriver};
use rvehom::udmesh;
use std::path::Path;

fn err(e: rvehom::Error) -> PyErr {
    match e {
        rvehom::Error::Params(_) | rvehom::Error::Config(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// A tetrahedral RVE mesh with optional cohesive interface elements and
/// periodic node pairs.
#[pyclass(name = "Mesh")]
struct PyMesh {
    inner: mesh::Mesh,
}

#[pymethods]
impl PyMesh {
    #[getter]
    fn n_nodes(&self) -> usize {
        self.inner.nodes.len()
    }

    #[getter]
    fn n_tets(&self) -> usize {
        self.inner.tets.len()
    }

    #[getter]
    fn n_cohesive(&self) -> usize {
        self.inner.cohesive.len()
    }

    #[getter]
    fn n_periodic_pairs(&self) -> usize {
        self.inner.periodic.len()
    }

    #[getter]
    fn volume(&self) -> f64 {
        self.inner.total_volume()
    }

    /// Node coordinates as a list of (x, y, z).
    fn nodes(&self) -> Vec<(f64, f64, f64)> {
        self.inner.nodes.iter().map(|n| (n.x, n.y, n.z)).collect()
    }

    /// Tets as (n0, n1, n2, n3, region).
    fn tets(&self) -> Vec<(usize, usize, usize, usize, u32)> {
        self.inner
            .tets
            .iter()
            .map(|t| (t.nodes[0], t.nodes[1], t.nodes[2], t.nodes[3], t.region))
            .collect()
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        std::fs::write(path, mesh::serialise_mesh(&self.inner))
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Ok(Self { inner: mesh::parse_mesh(&text).map_err(err)? })
    }

    /// Splits the faces shared by two regions with zero-thickness cohesive
    /// element pairs, returning a new mesh.
    fn with_cohesive(&self, region_a: u32, region_b: u32) -> PyResult<Self> {
        Ok(Self { inner: udmesh::insert_cohesive(&self.inner, (region_a, region_b)).map_err(err)? })
    }

    fn __repr__(&self) -> String {
        format!(
            "Mesh(nodes={}, tets={}, cohesive={}, periodic_pairs={})",
            self.inner.nodes.len(),
            self.inner.tets.len(),
            self.inner.cohesive.len(),
            self.inner.periodic.len()
        )
    }
}

/// A periodic random fibre layout in a rectangular cell.
#[pyclass(name = "Layout")]
struct PyLayout {
    inner: FibreLayout,
}

#[pymethods]
impl PyLayout {
    #[getter]
    fn cell(&self) -> (f64, f64) {
        self.inner.cell
    }

    /// Fibres as (x, y, r).
    fn fibres(&self) -> Vec<(f64, f64, f64)> {
        self.inner.fibres.clone()
    }

    /// Achieved fibre volume (area) fraction.
    fn vf(&self) -> f64 {
        self.inner.vf()
    }

    /// Smallest surface-to-surface distance under the periodic metric.
    fn min_gap(&self) -> f64 {
        self.inner.min_surface_gap()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    /// Extrudes the cross-section into a conforming periodic tet mesh:
    /// `lz` deep, `nz` layers, in-plane edge near `edge`.
    fn mesh(&self, lz: f64, nz: usize, edge: f64) -> PyResult<PyMesh> {
        Ok(PyMesh { inner: udmesh::mesh_ud_rve(&self.inner, lz, nz, edge).map_err(err)? })
    }

    fn __repr__(&self) -> String {
        format!(
            "Layout(cell=({}, {}), fibres={}, vf={:.4})",
            self.inner.cell.0,
            self.inner.cell.1,
            self.inner.fibres.len(),
            self.inner.vf()
        )
    }
}

/// Generates a periodic fibre layout. Deterministic for a given seed.
#[pyfunction]
#[pyo3(signature = (radius, target_vf, cell, seed=0, min_gap=None, max_attempts=500_000))]
fn generate(
    radius: f64,
    target_vf: f64,
    cell: (f64, f64),
    seed: u64,
    min_gap: Option<f64>,
    max_attempts: usize,
) -> PyResult<PyLayout> {
    let p = GenParams {
        radius,
        target_vf,
        min_gap: min_gap.unwrap_or(0.07 * radius),
        seed,
        max_attempts,
    };
    Ok(PyLayout { inner: generate_layout(&p, cell).map_err(err)? })
}

/// Uniaxial-stress response of the elasto-plastic matrix at a material
/// point: strains `eps_max/steps * k`, returns [(eps, sig)].
#[pyfunction]
#[pyo3(signature = (e, nu, nu_plas, sigma_t0, sigma_c0, ht, hc, nt, nc, eps_max, steps=200))]
#[allow(clippy::too_many_arguments)]
fn uniaxial_curve(
    e: f64,
    nu: f64,
    nu_plas: f64,
    sigma_t0: f64,
    sigma_c0: f64,
    ht: f64,
    hc: f64,
    nt: f64,
    nc: f64,
    eps_max: f64,
    steps: usize,
) -> PyResult<Vec<(f64, f64)>> {
    let params = MatrixParams { e, nu, nu_plas, sigma_t0, sigma_c0, ht, hc, nt, nc };
    params.validate().map_err(err)?;
    let mut driver = PointDriver::new(params);
    let mut out = Vec::with_capacity(steps);
    for k in 1..=steps {
        let eps = eps_max * k as f64 / steps as f64;
        let (sig, _) = driver.step(&[(0, eps)]).map_err(err)?;
        out.push((eps, sig[0]));
    }
    Ok(out)
}

/// Runs a config file through the full pipeline; returns the curve as
/// [(step, [eps; 6], [sig; 6])] and writes the configured outputs.
#[pyfunction]
fn run_config(path: &str) -> PyResult<Vec<(usize, [f64; 6], [f64; 6])>> {
    let (cfg, base) = RunConfig::load(Path::new(path)).map_err(err)?;
    let summary = rvehom::driver::run(&cfg, &base).map_err(err)?;
    Ok(summary
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| (i + 1, r.eps_bar.into(), r.sigma_bar.into()))
        .collect())
}

/// Validates a mesh-model file and returns the statistics report.
#[pyfunction]
fn check_mesh(path: &str) -> PyResult<String> {
    rvehom::driver::check_mesh(Path::new(path)).map_err(err)
}

#[pymodule]
fn rvehom_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMesh>()?;
    m.add_class::<PyLayout>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(uniaxial_curve, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(check_mesh, m)?)?;
    Ok(())
}
