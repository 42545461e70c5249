//! Python bindings: `import renorm`.

use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use renorm::cli::PipelineConfig;
use renorm::convex::{ConvexBody, Subspace};
use renorm::projection::{project as newton_project, ProjectionProblem};
use renorm::smooth::{Norm, NormSpec};
use renorm::smoothing;
use renorm::{RenormError, Vector};

fn err(e: RenormError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn vector(x: Vec<f64>) -> Vector {
    Vector::from_vec(x)
}

/// Minkowski gauge of the symmetric hull of `vertices` at `x`.
#[pyfunction]
fn gauge(vertices: Vec<Vec<f64>>, x: Vec<f64>) -> PyResult<f64> {
    let body = ConvexBody::symmetric_hull(vertices.into_iter().map(vector).collect()).map_err(err)?;
    body.minkowski_gauge(&vector(x)).map_err(err)
}

/// A smooth norm from a JSON description, e.g.
/// `{"kind": "perturbed", "base": {"kind": "pnorm", "p": 4}, "epsilon": 0.1}`.
#[pyclass(frozen)]
struct SmoothNorm {
    inner: Arc<dyn Norm>,
}

#[pymethods]
impl SmoothNorm {
    #[new]
    fn new(spec: &str, dim: usize) -> PyResult<Self> {
        let spec: NormSpec = serde_json::from_str(spec).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self {
            inner: spec.build(dim).map_err(err)?,
        })
    }

    /// Euclidean norm perturbed along the standard basis.
    #[staticmethod]
    fn perturbed_euclidean(dim: usize, epsilon: f64) -> PyResult<Self> {
        let spec = NormSpec::Perturbed {
            base: Box::new(NormSpec::Euclidean),
            epsilon,
            basis: None,
        };
        Ok(Self {
            inner: spec.build(dim).map_err(err)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, x: Vec<f64>) -> f64 {
        self.inner.value(&vector(x))
    }

    fn gradient(&self, x: Vec<f64>) -> Vec<f64> {
        self.inner.gradient(&vector(x)).iter().copied().collect()
    }
}

/// Closest point of `span(subspace)` to `x`; returns `(coords, point, residual)`.
#[pyfunction]
fn project(norm: &SmoothNorm, subspace: Vec<Vec<f64>>, x: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>, f64)> {
    let d = norm.inner.dim();
    let sub = Subspace::from_vectors(d, subspace.into_iter().map(vector).collect()).map_err(err)?;
    let r = newton_project(&ProjectionProblem::new(norm.inner.clone(), sub, vector(x))).map_err(err)?;
    Ok((r.coords.iter().copied().collect(), r.point.iter().copied().collect(), r.residual))
}

#[pyclass(frozen)]
struct PlaneNorm {
    inner: smoothing::PlaneNorm,
}

#[pymethods]
impl PlaneNorm {
    #[new]
    #[pyo3(signature = (width = 1.0))]
    fn new(width: f64) -> PyResult<Self> {
        Ok(Self {
            inner: smoothing::PlaneNorm::new(width).map_err(err)?,
        })
    }

    fn value(&self, a: f64, b: f64) -> f64 {
        self.inner.value(a, b)
    }

    fn gradient(&self, a: f64, b: f64) -> (f64, f64) {
        let (_, ga, gb) = self.inner.value_gradient(a, b);
        (ga, gb)
    }
}

#[pyclass(frozen)]
struct Schedule {
    inner: smoothing::Schedule,
}

#[pymethods]
impl Schedule {
    #[new]
    fn new(lambda1: f64) -> PyResult<Self> {
        Ok(Self {
            inner: smoothing::Schedule::new(lambda1).map_err(err)?,
        })
    }

    fn delta(&self, k: u64) -> f64 {
        self.inner.delta(k)
    }

    fn lam(&self, k: u64) -> f64 {
        self.inner.lambda(k)
    }

    /// `(A_k, B_k, C_k)`.
    fn thresholds(&self, k: u64) -> (f64, f64, f64) {
        let e = self.inner.entry(k);
        (e.a, e.b, e.c)
    }

    fn term(&self, k: u64, f: f64) -> f64 {
        self.inner.term(k, f).0
    }
}

#[pyclass(frozen)]
struct SmoothedNorm {
    inner: smoothing::SmoothedNorm,
}

#[pymethods]
impl SmoothedNorm {
    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn num_slabs(&self) -> u64 {
        self.inner.num_slabs()
    }

    fn gauge(&self, py: Python<'_>, x: Vec<f64>) -> PyResult<f64> {
        let x = vector(x);
        py.detach(|| self.inner.gauge(&x)).map_err(err)
    }

    fn gradient(&self, py: Python<'_>, x: Vec<f64>) -> PyResult<Vec<f64>> {
        let x = vector(x);
        let g = py.detach(|| self.inner.gauge_gradient(&x)).map_err(err)?;
        Ok(g.iter().copied().collect())
    }

    fn g_value(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.g_value(&vector(x)).map_err(err)
    }
}

/// Runs the pipeline on a JSON config; returns the smoothed norm and the
/// report as JSON text.
#[pyfunction]
fn approximate_norm(py: Python<'_>, config: &str) -> PyResult<(SmoothedNorm, String)> {
    let config = PipelineConfig::from_json_str(config).map_err(err)?;
    let approx = py
        .detach(|| -> renorm::Result<_> {
            let target = config.target_body()?;
            let base = config.base_norm.build(config.dimension)?;
            smoothing::approximate_norm(&target, base, config.epsilon, config.lambda1, &config.options())
        })
        .map_err(err)?;
    let report = serde_json::to_string(&approx.report).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok((SmoothedNorm { inner: approx.smoothed }, report))
}

#[pymodule]
#[pyo3(name = "renorm")]
fn renorm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(gauge, m)?)?;
    m.add_function(wrap_pyfunction!(project, m)?)?;
    m.add_function(wrap_pyfunction!(approximate_norm, m)?)?;
    m.add_class::<SmoothNorm>()?;
    m.add_class::<PlaneNorm>()?;
    m.add_class::<Schedule>()?;
    m.add_class::<SmoothedNorm>()?;
    Ok(())
}
