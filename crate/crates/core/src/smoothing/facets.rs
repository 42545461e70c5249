//! Facet functionals `F_j(x) = g_j(x) + eps N_j(x)` with
//! `N_j(x) = N(a_j |||P_n x|||, q_n(x))`, where `q_n` is the quotient norm
//! modulo `E_n = [x_1, ..., x_n]`.

use std::sync::Arc;

use crate::convex::{direction_grid, BiorthogonalSystem, Subspace};
use crate::projection::quotient_eval;
use crate::smooth::{Norm, PerturbedNorm, SmoothFunction};
use crate::smoothing::plane::PlaneNorm;
use crate::{RenormError, Result, Vector};

/// Shared ingredients of every facet functional.
#[derive(Clone)]
pub struct FacetSetup {
    norm: Arc<PerturbedNorm>,
    ambient: Arc<dyn Norm>,
    plane: PlaneNorm,
    epsilon: f64,
    a1: f64,
    subspaces: Vec<Subspace>,
}

/// `|||P_n x|||` and `q_n(x)` with their gradients.
#[derive(Clone, Debug)]
pub struct Level {
    pub p: f64,
    pub grad_p: Vector,
    pub q: f64,
    pub grad_q: Vector,
}

/// Everything the facet functionals need at one point, for all levels
/// `n = 0..=d`. Values are 1-homogeneous and gradients 0-homogeneous in the
/// point, so a context also serves every point of the ray through it.
#[derive(Clone, Debug)]
pub struct PointContext {
    pub x: Vector,
    pub levels: Vec<Level>,
}

impl FacetSetup {
    pub fn new(norm: Arc<PerturbedNorm>, plane: PlaneNorm, epsilon: f64, a1: f64) -> Result<Self> {
        if !(a1 >= 0.0 && a1.is_finite()) {
            return Err(RenormError::invalid(format!("a1 must be non-negative, got {a1}")));
        }
        if !(epsilon > 0.0) {
            return Err(RenormError::invalid("epsilon must be positive"));
        }
        let system = norm.system().clone();
        let subspaces = (0..=system.dim())
            .map(|n| Subspace::leading(&system, n))
            .collect::<Result<_>>()?;
        let ambient: Arc<dyn Norm> = norm.clone();
        Ok(Self {
            norm,
            ambient,
            plane,
            epsilon,
            a1,
            subspaces,
        })
    }

    pub fn dim(&self) -> usize {
        self.norm.dim()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }

    pub fn plane(&self) -> &PlaneNorm {
        &self.plane
    }

    pub fn norm(&self) -> &Arc<PerturbedNorm> {
        &self.norm
    }

    pub fn system(&self) -> &BiorthogonalSystem {
        self.norm.system()
    }

    /// `a_j = a_1 2^(1-j)` for 1-based `j`.
    pub fn a(&self, j: u64) -> f64 {
        if j > 1100 {
            0.0
        } else {
            self.a1 / 2f64.powi(j as i32 - 1)
        }
    }

    pub fn context(&self, x: &Vector) -> Result<PointContext> {
        let d = self.dim();
        if x.len() != d {
            return Err(RenormError::DimensionMismatch {
                expected: d,
                got: x.len(),
            });
        }
        let full = self.norm.value(x);
        let full_grad = self.norm.gradient(x);
        let zero = Vector::zeros(d);
        let mut levels = Vec::with_capacity(d + 1);
        levels.push(Level {
            p: 0.0,
            grad_p: zero.clone(),
            q: full,
            grad_q: full_grad.clone(),
        });
        for n in 1..d {
            let px = self.system().project_leading(n, x);
            let grad_at = self.norm.gradient(&px);
            let quotient = quotient_eval(self.ambient.clone(), &self.subspaces[n], x)?;
            levels.push(Level {
                p: self.norm.value(&px),
                grad_p: self.system().project_leading_adjoint(n, &grad_at),
                q: quotient.value,
                grad_q: quotient.gradient,
            });
        }
        levels.push(Level {
            p: full,
            grad_p: full_grad,
            q: 0.0,
            grad_q: zero,
        });
        Ok(PointContext {
            x: x.clone(),
            levels,
        })
    }

    /// `N_j` at `s * ctx.x` for level `n` and weight `a`.
    pub fn n_value(&self, ctx: &PointContext, s: f64, n: usize, a: f64) -> f64 {
        let l = &ctx.levels[n];
        if n == self.dim() {
            return a * s * l.p;
        }
        self.plane.value(a * s * l.p, s * l.q)
    }

    /// Upper bound of `N_j` over all weights up to `a`.
    pub fn n_bound(&self, ctx: &PointContext, s: f64, n: usize, a: f64) -> f64 {
        let l = &ctx.levels[n];
        if n == self.dim() {
            return a * s * l.p;
        }
        2.0 * s * (a * l.p).max(l.q)
    }

    /// Gradient of `N_j` at `s * ctx.x`.
    pub fn n_gradient(&self, ctx: &PointContext, s: f64, n: usize, a: f64) -> Vector {
        let l = &ctx.levels[n];
        if n == self.dim() {
            return &l.grad_p * a;
        }
        let (_, na, nb) = self.plane.value_gradient(a * s * l.p, s * l.q);
        &l.grad_p * (na * a) + &l.grad_q * nb
    }

    /// Sampled Hausdorff distance between the polar of the `N_j` ball and the
    /// slice of the dual unit ball by the annihilator of `E_n`: the largest
    /// `N_j(u) - q_n(u)` over Euclidean unit directions.
    pub fn polar_slice_distance(&self, n: usize, a: f64, directions: usize) -> Result<f64> {
        if self.dim() > 4 {
            return Err(RenormError::Precondition(
                "polar slice distance is sampled only up to dimension 4".into(),
            ));
        }
        if n > self.dim() {
            return Err(RenormError::invalid("level exceeds the dimension"));
        }
        let mut worst: f64 = 0.0;
        for u in direction_grid(self.dim(), directions) {
            let ctx = self.context(&u)?;
            worst = worst.max(self.n_value(&ctx, 1.0, n, a) - ctx.levels[n].q);
        }
        Ok(worst)
    }
}

/// One facet functional `x -> g(x) + eps N(a |||P_n x|||, q_n(x))`.
#[derive(Clone)]
pub struct FacetFunctional {
    pub g: Vector,
    pub n: usize,
    pub a: f64,
    setup: Arc<FacetSetup>,
}

impl FacetFunctional {
    pub fn new(setup: Arc<FacetSetup>, g: Vector, n: usize, a: f64) -> Result<Self> {
        if g.len() != setup.dim() || n > setup.dim() {
            return Err(RenormError::invalid("facet data does not match the dimension"));
        }
        Ok(Self { g, n, a, setup })
    }

    pub fn value(&self, x: &Vector) -> Result<f64> {
        let ctx = self.setup.context(x)?;
        Ok(self.g.dot(x) + self.setup.epsilon * self.setup.n_value(&ctx, 1.0, self.n, self.a))
    }

    pub fn gradient(&self, x: &Vector) -> Result<Vector> {
        let ctx = self.setup.context(x)?;
        Ok(&self.g + self.setup.n_gradient(&ctx, 1.0, self.n, self.a) * self.setup.epsilon)
    }

    /// `N_j(x)` alone.
    pub fn plane_part(&self, x: &Vector) -> Result<f64> {
        let ctx = self.setup.context(x)?;
        Ok(self.setup.n_value(&ctx, 1.0, self.n, self.a))
    }

    /// Quotient seminorm `q_n(x)`.
    pub fn quotient_part(&self, x: &Vector) -> Result<f64> {
        let ctx = self.setup.context(x)?;
        Ok(ctx.levels[self.n].q)
    }

    /// Largest Euclidean gradient norm over a direction grid, a sampled
    /// Lipschitz constant.
    pub fn lipschitz_estimate(&self, directions: usize) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for u in direction_grid(self.setup.dim(), directions) {
            worst = worst.max(self.gradient(&u)?.norm());
        }
        Ok(worst)
    }
}
