//! Smooth functions with analytic derivatives, smooth base norms, the
//! quadratic perturbation `|||x|||^2 = ||x||^2 + eps sum 2^-i x_i*(x)^2`, and a
//! finite-difference derivative checker.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::convex::BiorthogonalSystem;
use crate::{Matrix, RenormError, Result, Vector};

/// A scalar function on `R^d` with gradient and Hessian.
pub trait SmoothFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;
    fn hessian(&self, x: &Vector) -> Matrix;

    /// True when the function is only known to be smooth off the origin.
    fn smooth_away_from_origin(&self) -> bool {
        true
    }
}

/// A norm given as a smooth function, with direct access to its square.
///
/// The square is what Newton projection minimizes; the defaults derive it
/// from the norm itself, implementations override when the square is the
/// natural quantity.
pub trait Norm: SmoothFunction {
    fn sq_value(&self, x: &Vector) -> f64 {
        let v = self.value(x);
        v * v
    }

    fn sq_gradient(&self, x: &Vector) -> Vector {
        self.gradient(x) * (2.0 * self.value(x))
    }

    fn sq_hessian(&self, x: &Vector) -> Matrix {
        let g = self.gradient(x);
        (&g * g.transpose() + self.hessian(x) * self.value(x)) * 2.0
    }

    /// Hessian of the square split into a base part and a perturbation part.
    fn split_sq_hessian(&self, x: &Vector) -> (Matrix, Matrix) {
        let h = self.sq_hessian(x);
        let zero = Matrix::zeros(h.nrows(), h.ncols());
        (h, zero)
    }
}

/// Concrete smooth norm families.
#[derive(Clone, Debug, PartialEq)]
pub enum NormKind {
    Euclidean,
    /// `sqrt(x^T Q x)` for a symmetric positive definite `Q`.
    QuadraticForm(Matrix),
    /// `(sum x_i^p)^(1/p)` for an even integer `p >= 2`.
    PNorm(u32),
}

#[derive(Clone, Debug)]
pub struct BaseNorm {
    kind: NormKind,
    dim: usize,
}

impl BaseNorm {
    pub fn new(kind: NormKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(RenormError::invalid("dimension must be positive"));
        }
        match &kind {
            NormKind::Euclidean => {}
            NormKind::QuadraticForm(q) => {
                if q.nrows() != dim || q.ncols() != dim {
                    return Err(RenormError::DimensionMismatch {
                        expected: dim,
                        got: q.nrows(),
                    });
                }
                if (q - q.transpose()).amax() > 1e-12 * q.amax().max(1.0) {
                    return Err(RenormError::invalid("quadratic form is not symmetric"));
                }
                if q.clone().cholesky().is_none() {
                    let min = q.clone().symmetric_eigen().eigenvalues.min();
                    return Err(RenormError::NotPositiveDefinite { min_eigenvalue: min });
                }
            }
            NormKind::PNorm(p) => {
                if *p < 2 || p % 2 != 0 {
                    return Err(RenormError::invalid(format!(
                        "p-norm exponent must be an even integer >= 2, got {p}"
                    )));
                }
            }
        }
        Ok(Self { kind, dim })
    }

    pub fn euclidean(dim: usize) -> Self {
        Self {
            kind: NormKind::Euclidean,
            dim,
        }
    }

    pub fn kind(&self) -> &NormKind {
        &self.kind
    }
}

fn is_zero(x: &Vector) -> bool {
    x.iter().all(|v| *v == 0.0)
}

impl SmoothFunction for BaseNorm {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &Vector) -> f64 {
        match &self.kind {
            NormKind::Euclidean => x.norm(),
            NormKind::QuadraticForm(q) => x.dot(&(q * x)).max(0.0).sqrt(),
            NormKind::PNorm(p) => {
                let scale = x.amax();
                if scale == 0.0 {
                    return 0.0;
                }
                let s: f64 = x.iter().map(|v| (v / scale).powi(*p as i32)).sum();
                scale * s.powf(1.0 / *p as f64)
            }
        }
    }

    fn gradient(&self, x: &Vector) -> Vector {
        if is_zero(x) {
            return Vector::zeros(self.dim);
        }
        let n = self.value(x);
        match &self.kind {
            NormKind::Euclidean => x / n,
            NormKind::QuadraticForm(q) => q * x / n,
            NormKind::PNorm(p) => x.map(|v| (v / n).powi(*p as i32 - 1)),
        }
    }

    fn hessian(&self, x: &Vector) -> Matrix {
        if is_zero(x) {
            return Matrix::zeros(self.dim, self.dim);
        }
        let n = self.value(x);
        let g = self.gradient(x);
        match &self.kind {
            NormKind::Euclidean => (Matrix::identity(self.dim, self.dim) - &g * g.transpose()) / n,
            NormKind::QuadraticForm(q) => (q - &g * g.transpose()) / n,
            NormKind::PNorm(p) => {
                let diag = Matrix::from_diagonal(&x.map(|v| (v / n).powi(*p as i32 - 2)));
                (diag - &g * g.transpose()) * ((*p as f64 - 1.0) / n)
            }
        }
    }
}

impl Norm for BaseNorm {
    fn sq_value(&self, x: &Vector) -> f64 {
        match &self.kind {
            NormKind::Euclidean => x.norm_squared(),
            NormKind::QuadraticForm(q) => x.dot(&(q * x)),
            NormKind::PNorm(_) => self.value(x).powi(2),
        }
    }

    fn sq_gradient(&self, x: &Vector) -> Vector {
        match &self.kind {
            NormKind::Euclidean => x * 2.0,
            NormKind::QuadraticForm(q) => q * x * 2.0,
            NormKind::PNorm(_) => self.gradient(x) * (2.0 * self.value(x)),
        }
    }

    fn sq_hessian(&self, x: &Vector) -> Matrix {
        match &self.kind {
            NormKind::Euclidean => Matrix::identity(self.dim, self.dim) * 2.0,
            NormKind::QuadraticForm(q) => q * 2.0,
            NormKind::PNorm(_) => {
                let g = self.gradient(x);
                (&g * g.transpose() + self.hessian(x) * self.value(x)) * 2.0
            }
        }
    }
}

/// `|||x|||` with `|||x|||^2 = ||x||^2 + eps sum_i 2^-i x_i*(x)^2`, `i = 1..d`.
#[derive(Clone)]
pub struct PerturbedNorm {
    base: Arc<dyn Norm>,
    system: BiorthogonalSystem,
    epsilon: f64,
}

impl std::fmt::Debug for PerturbedNorm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PerturbedNorm")
            .field("dim", &self.system.dim())
            .field("epsilon", &self.epsilon)
            .finish()
    }
}

impl PerturbedNorm {
    pub fn new(base: Arc<dyn Norm>, system: BiorthogonalSystem, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(RenormError::invalid(format!(
                "perturbation epsilon must be positive, got {epsilon}"
            )));
        }
        if base.dim() != system.dim() {
            return Err(RenormError::DimensionMismatch {
                expected: system.dim(),
                got: base.dim(),
            });
        }
        Ok(Self {
            base,
            system,
            epsilon,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn system(&self) -> &BiorthogonalSystem {
        &self.system
    }

    pub fn base(&self) -> &Arc<dyn Norm> {
        &self.base
    }

    /// Weight `eps 2^-i` of the `i`-th (1-based) coordinate square.
    pub fn weight(&self, i: usize) -> f64 {
        self.epsilon * 0.5f64.powi(i as i32)
    }

    /// Hessian of the perturbation term alone: `2 sum_i eps 2^-i x_i* x_i*^T`.
    pub fn perturbation_hessian(&self) -> Matrix {
        let d = self.system.dim();
        let mut h = Matrix::zeros(d, d);
        for (i, f) in self.system.duals().iter().enumerate() {
            h += f * f.transpose() * (2.0 * self.weight(i + 1));
        }
        h
    }
}

impl SmoothFunction for PerturbedNorm {
    fn dim(&self) -> usize {
        self.system.dim()
    }

    fn value(&self, x: &Vector) -> f64 {
        self.sq_value(x).max(0.0).sqrt()
    }

    fn gradient(&self, x: &Vector) -> Vector {
        let v = self.value(x);
        if v == 0.0 {
            return Vector::zeros(self.dim());
        }
        self.sq_gradient(x) / (2.0 * v)
    }

    fn hessian(&self, x: &Vector) -> Matrix {
        let v = self.value(x);
        if v == 0.0 {
            return Matrix::zeros(self.dim(), self.dim());
        }
        let g = self.gradient(x);
        (self.sq_hessian(x) * 0.5 - &g * g.transpose()) / v
    }
}

impl Norm for PerturbedNorm {
    fn sq_value(&self, x: &Vector) -> f64 {
        let mut s = self.base.sq_value(x);
        for (i, f) in self.system.duals().iter().enumerate() {
            s += self.weight(i + 1) * f.dot(x).powi(2);
        }
        s
    }

    fn sq_gradient(&self, x: &Vector) -> Vector {
        let mut g = self.base.sq_gradient(x);
        for (i, f) in self.system.duals().iter().enumerate() {
            g.axpy(2.0 * self.weight(i + 1) * f.dot(x), f, 1.0);
        }
        g
    }

    fn sq_hessian(&self, x: &Vector) -> Matrix {
        self.base.sq_hessian(x) + self.perturbation_hessian()
    }

    fn split_sq_hessian(&self, x: &Vector) -> (Matrix, Matrix) {
        (self.base.sq_hessian(x), self.perturbation_hessian())
    }
}

/// Smooth function `x -> n(x)^2` of a norm `n`.
pub struct Squared(pub Arc<dyn Norm>);

impl SmoothFunction for Squared {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn value(&self, x: &Vector) -> f64 {
        self.0.sq_value(x)
    }
    fn gradient(&self, x: &Vector) -> Vector {
        self.0.sq_gradient(x)
    }
    fn hessian(&self, x: &Vector) -> Matrix {
        self.0.sq_hessian(x)
    }
    fn smooth_away_from_origin(&self) -> bool {
        false
    }
}

/// JSON norm description: `{"kind": "euclidean" | "qform" | "pnorm" | "perturbed", ...}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum NormSpec {
    Euclidean,
    Qform {
        matrix: Vec<Vec<f64>>,
    },
    Pnorm {
        p: u32,
    },
    /// Perturbation of `base`; `basis` defaults to the standard basis.
    Perturbed {
        base: Box<NormSpec>,
        epsilon: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        basis: Option<Vec<Vec<f64>>>,
    },
}

impl NormSpec {
    pub fn build(&self, d: usize) -> Result<Arc<dyn Norm>> {
        Ok(match self {
            NormSpec::Euclidean => Arc::new(BaseNorm::new(NormKind::Euclidean, d)?),
            NormSpec::Qform { matrix } => {
                if matrix.len() != d || matrix.iter().any(|r| r.len() != d) {
                    return Err(RenormError::invalid(format!(
                        "qform matrix must be {d}x{d}"
                    )));
                }
                let m = Matrix::from_fn(d, d, |r, c| matrix[r][c]);
                Arc::new(BaseNorm::new(NormKind::QuadraticForm(m), d)?)
            }
            NormSpec::Pnorm { p } => Arc::new(BaseNorm::new(NormKind::PNorm(*p), d)?),
            NormSpec::Perturbed {
                base,
                epsilon,
                basis,
            } => {
                let system = match basis {
                    None => BiorthogonalSystem::standard(d),
                    Some(rows) => BiorthogonalSystem::from_basis(
                        rows.iter().map(|r| Vector::from_vec(r.clone())).collect(),
                    )?,
                };
                Arc::new(PerturbedNorm::new(base.build(d)?, system, *epsilon)?)
            }
        })
    }
}

/// Max-norm discrepancies between analytic and central-difference derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FdReport {
    pub grad_error: f64,
    pub hess_error: f64,
}

/// Compares `gradient` and `hessian` with central first and second
/// differences of `value` at step `h`.
pub fn fd_check(f: &dyn SmoothFunction, x: &Vector, h: f64) -> Result<FdReport> {
    if !(1e-6..=1e-2).contains(&h) {
        return Err(RenormError::Precondition(format!(
            "step {h} outside [1e-6, 1e-2]"
        )));
    }
    if x.len() != f.dim() {
        return Err(RenormError::DimensionMismatch {
            expected: f.dim(),
            got: x.len(),
        });
    }
    if f.smooth_away_from_origin() && is_zero(x) {
        return Err(RenormError::Precondition(
            "derivatives are undefined at the origin".into(),
        ));
    }
    let d = x.len();
    let at = |pairs: &[(usize, f64)]| {
        let mut y = x.clone();
        for (i, s) in pairs {
            y[*i] += s;
        }
        f.value(&y)
    };
    let grad = f.gradient(x);
    let hess = f.hessian(x);
    let mut grad_error: f64 = 0.0;
    let mut hess_error: f64 = 0.0;
    for i in 0..d {
        let fd = (at(&[(i, h)]) - at(&[(i, -h)])) / (2.0 * h);
        grad_error = grad_error.max((fd - grad[i]).abs());
        for j in 0..d {
            let fd2 = if i == j {
                (at(&[(i, h)]) - 2.0 * f.value(x) + at(&[(i, -h)])) / (h * h)
            } else {
                (at(&[(i, h), (j, h)]) - at(&[(i, h), (j, -h)]) - at(&[(i, -h), (j, h)])
                    + at(&[(i, -h), (j, -h)]))
                    / (4.0 * h * h)
            };
            hess_error = hess_error.max((fd2 - hess[(i, j)]).abs());
        }
    }
    Ok(FdReport {
        grad_error,
        hess_error,
    })
}
