//! Python bindings for homcap.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use homcap::mlp::{init_model, train, Architecture, MlpModel, TrainConfig};
use homcap::ph::{rips_persistence, threshold_features_detailed, PersistenceDiagram, PointCloud, ThresholdPolicy};
use homcap::region::{mask_betti, rasterize, DecisionMask};
use homcap::select::{select, ClassCombine, PhaseEstimator, SelectOptions, FITTED_C};
use homcap::synth::{homology_spec, sample_dataset, verify_ground_truth, SuiteLayout};
use homcap::{Error, LabeledPointCloud};

fn to_py(e: Error) -> PyErr {
    let msg = format!("[{}] {e}", e.code());
    match e {
        Error::Io(_) | Error::CacheIntegrity { .. } | Error::Network(_) => PyIOError::new_err(msg),
        Error::Divergence { .. } | Error::BudgetExceeded { .. } | Error::RejectionStall { .. } => {
            PyRuntimeError::new_err(msg)
        }
        _ => PyValueError::new_err(msg),
    }
}

fn cloud(points: Vec<Vec<f64>>) -> PyResult<PointCloud> {
    PointCloud::new(&points).map_err(to_py)
}

/// Persistence pairs of a Vietoris-Rips filtration.
#[pyclass(name = "PersistenceDiagram", module = "homcap", from_py_object)]
#[derive(Clone)]
struct PyDiagram {
    inner: PersistenceDiagram,
}

#[pymethods]
impl PyDiagram {
    /// `(dim, birth, death)` with `death = None` for infinite pairs.
    fn pairs(&self) -> Vec<(usize, f64, Option<f64>)> {
        self.inner.pairs().map(|p| (p.dim, p.birth, p.death)).collect()
    }

    fn betti_at(&self, eps: f64, p: usize) -> usize {
        self.inner.betti_at(eps, p)
    }

    /// Betti numbers kept by a policy: `two-sigma`, `absolute:<eps>` or `top-k:<k>`.
    #[pyo3(signature = (policy = "two-sigma"))]
    fn threshold(&self, policy: &str) -> PyResult<Vec<usize>> {
        let policy = ThresholdPolicy::parse(policy).map_err(to_py)?;
        Ok(threshold_features_detailed(&self.inner, policy).map_err(to_py)?.profile.betti)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py)
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        Ok(Self {
            inner: PersistenceDiagram::from_json(s).map_err(to_py)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.pairs().count()
    }

    fn __repr__(&self) -> String {
        format!(
            "PersistenceDiagram(eps_max={}, pairs={})",
            self.inner.eps_max,
            self.inner.pairs().count()
        )
    }
}

/// Points in R^d with binary labels.
#[pyclass(name = "LabeledPointCloud", module = "homcap", from_py_object)]
#[derive(Clone)]
struct PyCloud {
    inner: LabeledPointCloud,
}

#[pymethods]
impl PyCloud {
    #[new]
    fn new(points: Vec<Vec<f64>>, labels: Vec<u8>) -> PyResult<Self> {
        Ok(Self {
            inner: LabeledPointCloud::new(cloud(points)?, labels).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: LabeledPointCloud::load(path.as_ref()).map_err(to_py)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path.as_ref()).map_err(to_py)
    }

    #[getter]
    fn points(&self) -> Vec<Vec<f64>> {
        self.inner.points.to_vecs()
    }

    #[getter]
    fn labels(&self) -> Vec<u8> {
        self.inner.labels.clone()
    }

    #[getter]
    fn ground_truth(&self) -> Option<Vec<usize>> {
        self.inner.ground_truth.as_ref().map(|g| g.betti.clone())
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// A trained or freshly initialized ReLU classifier.
#[pyclass(name = "MlpModel", module = "homcap", from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: MlpModel,
}

#[pymethods]
impl PyModel {
    fn predict(&self, points: Vec<Vec<f64>>) -> PyResult<Vec<u8>> {
        self.inner.predict(&cloud(points)?).map_err(to_py)
    }

    fn logits(&self, points: Vec<Vec<f64>>) -> PyResult<Vec<[f64; 2]>> {
        self.inner.forward(&cloud(points)?).map_err(to_py)
    }

    /// `(β_0, β_1)` of the positive decision region over a 2-D box.
    #[pyo3(signature = (bbox, resolution = 256))]
    fn region_betti(&self, bbox: [[f64; 2]; 2], resolution: usize) -> PyResult<(usize, usize)> {
        let m = rasterize(&self.inner, bbox, resolution).map_err(to_py)?;
        let b = mask_betti(&m);
        Ok((b.b0(), b.b1()))
    }

    #[getter]
    fn num_params(&self) -> usize {
        self.inner.params().len()
    }
}

#[pyfunction]
#[pyo3(signature = (points, eps_max, max_dim = 2))]
fn persistence(points: Vec<Vec<f64>>, eps_max: f64, max_dim: usize) -> PyResult<PyDiagram> {
    Ok(PyDiagram {
        inner: rips_persistence(&cloud(points)?, eps_max, max_dim).map_err(to_py)?,
    })
}

/// Synthetic disks and annuli with homology `(beta0, beta1)`.
#[pyfunction]
#[pyo3(signature = (beta0, beta1, n = 5000, seed = 0))]
fn make_dataset(beta0: usize, beta1: usize, n: usize, seed: u64) -> PyResult<PyCloud> {
    let layout = SuiteLayout {
        n_points: n,
        ..SuiteLayout::default()
    };
    let spec = homology_spec(beta0, beta1, seed, &layout).map_err(to_py)?;
    Ok(PyCloud {
        inner: sample_dataset(&spec).map_err(to_py)?,
    })
}

/// Betti numbers recovered from the positive class of a synthetic cloud.
#[pyfunction]
#[pyo3(signature = (data, eps_max = 0.375))]
fn recover_homology(data: &PyCloud, eps_max: f64) -> PyResult<Vec<usize>> {
    Ok(verify_ground_truth(&data.inner, eps_max).map_err(to_py)?.betti)
}

/// Trains `(ell, h0)` and returns `(model, summary dict)`.
#[pyfunction]
#[pyo3(signature = (data, ell, h0, trunk_width = None, seed = 0, max_steps = 20000))]
fn train_model(
    py: Python<'_>,
    data: &PyCloud,
    ell: usize,
    h0: usize,
    trunk_width: Option<usize>,
    seed: u64,
    max_steps: usize,
) -> PyResult<(PyModel, Py<PyAny>)> {
    let beta0 = data.inner.ground_truth.as_ref().map_or(1, |g| g.b0().max(1));
    let arch = Architecture::new(ell, h0, trunk_width.unwrap_or(beta0)).map_err(to_py)?;
    let model = init_model(arch, data.inner.dim(), beta0, seed).map_err(to_py)?;
    let cfg = TrainConfig {
        seed,
        max_steps,
        ..TrainConfig::default()
    };
    let inner = data.inner.clone();
    let result = py
        .detach(move || train(model, &inner, &cfg))
        .map_err(to_py)?;
    let summary = pyo3::types::PyDict::new(py);
    summary.set_item("best_error", result.best_error)?;
    summary.set_item("final_error", result.final_error())?;
    summary.set_item("converged_at", result.converged_at)?;
    summary.set_item("steps", result.steps)?;
    summary.set_item("error_curve", result.error_curve.clone())?;
    Ok((
        PyModel {
            inner: result.final_model,
        },
        summary.into_any().unbind(),
    ))
}

/// `(β_0, β_1)` of a boolean mask (rows listed bottom first).
#[pyfunction]
fn mask_homology(grid: Vec<Vec<bool>>) -> PyResult<(usize, usize)> {
    let rows = grid.len();
    let cols = grid.first().map_or(0, Vec::len);
    let mask = DecisionMask::from_grid(rows, cols, grid.into_iter().flatten().collect()).map_err(to_py)?;
    let b = mask_betti(&mask);
    Ok((b.b0(), b.b1()))
}

/// Architecture selection report as a JSON string.
#[pyfunction]
#[pyo3(signature = (data, eps_max = 0.375, policy = "two-sigma", c = FITTED_C, combine = "max"))]
fn select_architecture(data: &PyCloud, eps_max: f64, policy: &str, c: f64, combine: &str) -> PyResult<String> {
    let combine = match combine {
        "max" => ClassCombine::Max,
        "positive" => ClassCombine::Positive,
        other => return Err(PyValueError::new_err(format!("unknown combine rule {other:?}"))),
    };
    let opts = SelectOptions {
        eps_max,
        policy: ThresholdPolicy::parse(policy).map_err(to_py)?,
        combine,
        subsample: None,
    };
    let est = PhaseEstimator::new(c, 1).map_err(to_py)?;
    select(&data.inner, &opts, &[est]).map_err(to_py)?.to_json().map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (points, k_neighbors = 120, target_dim = 3))]
fn lle_embed(points: Vec<Vec<f64>>, k_neighbors: usize, target_dim: usize) -> PyResult<Vec<Vec<f64>>> {
    let spec = homcap::lle::EmbeddingSpec {
        k_neighbors,
        target_dim,
    };
    Ok(homcap::lle::lle_embed(&cloud(points)?, &spec).map_err(to_py)?.to_vecs())
}

#[pymodule]
fn homcap_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDiagram>()?;
    m.add_class::<PyCloud>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(persistence, m)?)?;
    m.add_function(wrap_pyfunction!(make_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(recover_homology, m)?)?;
    m.add_function(wrap_pyfunction!(train_model, m)?)?;
    m.add_function(wrap_pyfunction!(mask_homology, m)?)?;
    m.add_function(wrap_pyfunction!(select_architecture, m)?)?;
    m.add_function(wrap_pyfunction!(lle_embed, m)?)?;
    m.add("FITTED_C", FITTED_C)?;
    Ok(())
}
