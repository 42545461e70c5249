//! Closest points onto a subspace under a strictly convex smooth norm and the
//! induced quotient norm.
//!
//! The closest point `rho(x) = sum a_i y_i` solves `grad_a |||x - B a|||^2 = 0`;
//! it is found by damped Newton iteration on the coordinates `a`.

use std::sync::Arc;

use crate::convex::Subspace;
use crate::smooth::Norm;
use crate::{Matrix, RenormError, Result, Vector};

const ARMIJO_C: f64 = 1e-4;

/// Input of [`project`].
#[derive(Clone)]
pub struct ProjectionProblem {
    pub norm: Arc<dyn Norm>,
    pub subspace: Subspace,
    pub x: Vector,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl ProjectionProblem {
    pub fn new(norm: Arc<dyn Norm>, subspace: Subspace, x: Vector) -> Self {
        Self {
            norm,
            subspace,
            x,
            tolerance: 1e-10,
            max_iterations: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionResult {
    /// Coordinates of the minimizer in the subspace basis.
    pub coords: Vector,
    /// The minimizer itself.
    pub point: Vector,
    /// Euclidean norm of the restricted gradient at the minimizer.
    pub residual: f64,
    pub iterations: usize,
    pub hessian_min_eigenvalue: f64,
    /// Restricted-gradient norm before each Newton step and at the end.
    pub residual_history: Vec<f64>,
}

/// Restricted Hessian `M = M1 + M2` of `a -> |||x - B a|||^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct RestrictedHessian {
    pub m: Matrix,
    /// Contribution of the base norm.
    pub m1: Matrix,
    /// Contribution of the perturbation term.
    pub m2: Matrix,
    pub min_eigenvalue: f64,
}

fn min_eigenvalue(m: &Matrix) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    m.clone().symmetric_eigen().eigenvalues.min()
}

/// Restricted Hessian at the point `y` of the subspace (given as a vector).
pub fn restricted_hessian(
    norm: &dyn Norm,
    subspace: &Subspace,
    x: &Vector,
    y: &Vector,
) -> Result<RestrictedHessian> {
    check_dims(norm, subspace, x)?;
    let b = subspace.basis_matrix();
    let (h1, h2) = norm.split_sq_hessian(&(x - y));
    let m1 = b.transpose() * h1 * &b;
    let m2 = b.transpose() * h2 * &b;
    let m = &m1 + &m2;
    Ok(RestrictedHessian {
        min_eigenvalue: min_eigenvalue(&m),
        m,
        m1,
        m2,
    })
}

fn check_dims(norm: &dyn Norm, subspace: &Subspace, x: &Vector) -> Result<()> {
    if norm.dim() != subspace.ambient_dim() || x.len() != norm.dim() {
        return Err(RenormError::DimensionMismatch {
            expected: norm.dim(),
            got: if x.len() != norm.dim() {
                x.len()
            } else {
                subspace.ambient_dim()
            },
        });
    }
    Ok(())
}

/// Damped Newton solve of the closest-point problem.
///
/// Starts at the Euclidean orthogonal projection and backtracks on the
/// squared norm with the Armijo rule. A full step that halves the gradient
/// is accepted even when rounding hides the decrease of the objective.
pub fn project(problem: &ProjectionProblem) -> Result<ProjectionResult> {
    let ProjectionProblem {
        norm,
        subspace,
        x,
        tolerance,
        max_iterations,
    } = problem;
    check_dims(norm.as_ref(), subspace, x)?;
    if !(*tolerance > 0.0) {
        return Err(RenormError::invalid("tolerance must be positive"));
    }
    let m = subspace.dim();
    if m >= subspace.ambient_dim() {
        return Err(RenormError::Precondition(format!(
            "subspace dimension {m} must be below the ambient dimension {}",
            subspace.ambient_dim()
        )));
    }
    if m == 0 {
        return Ok(ProjectionResult {
            coords: Vector::zeros(0),
            point: Vector::zeros(x.len()),
            residual: 0.0,
            iterations: 0,
            hessian_min_eigenvalue: f64::INFINITY,
            residual_history: vec![0.0],
        });
    }
    let b = subspace.basis_matrix();
    let bt = b.transpose();
    let objective = |a: &Vector| norm.sq_value(&(x - &b * a));
    let gradient = |a: &Vector| -(&bt * norm.sq_gradient(&(x - &b * a)));

    let mut a = subspace.orthogonal_coords(x);
    let mut g = gradient(&a);
    let mut history = Vec::new();
    for iteration in 0..=*max_iterations {
        let r = g.norm();
        history.push(r);
        if r <= *tolerance {
            let y = &b * &a;
            let min_eig = restricted_hessian(norm.as_ref(), subspace, x, &y)?.min_eigenvalue;
            if !(min_eig > 0.0) {
                return Err(RenormError::NotPositiveDefinite {
                    min_eigenvalue: min_eig,
                });
            }
            return Ok(ProjectionResult {
                coords: a,
                point: y,
                residual: r,
                iterations: iteration,
                hessian_min_eigenvalue: min_eig,
                residual_history: history,
            });
        }
        if iteration == *max_iterations {
            break;
        }
        let hess = &bt * norm.sq_hessian(&(x - &b * &a)) * &b;
        let chol = hess.clone().cholesky().ok_or_else(|| RenormError::NotPositiveDefinite {
            min_eigenvalue: min_eigenvalue(&hess),
        })?;
        let step = -chol.solve(&g);
        let slope = g.dot(&step);
        let f0 = objective(&a);

        let full = &a + &step;
        let g_full = gradient(&full);
        let (next, g_next) = if objective(&full) <= f0 + ARMIJO_C * slope
            || g_full.norm() <= 0.5 * r
        {
            (full, g_full)
        } else {
            let mut t = 0.5;
            loop {
                let cand = &a + &step * t;
                if objective(&cand) <= f0 + ARMIJO_C * t * slope {
                    let gc = gradient(&cand);
                    break (cand, gc);
                }
                t *= 0.5;
                if t < 1e-30 {
                    return Err(RenormError::NoConvergence {
                        iterations: iteration,
                        residual: r,
                    });
                }
            }
        };
        a = next;
        g = g_next;
    }
    Err(RenormError::NoConvergence {
        iterations: *max_iterations,
        residual: g.norm(),
    })
}

/// Quotient norm value with its gradient and the underlying projection.
#[derive(Clone, Debug)]
pub struct QuotientEval {
    pub value: f64,
    /// Gradient of `x -> |||x - rho(x)|||`, equal to the norm gradient at
    /// `x - rho(x)` because the correction term is stationary.
    pub gradient: Vector,
    pub projection: ProjectionResult,
}

pub fn quotient_eval(norm: Arc<dyn Norm>, subspace: &Subspace, x: &Vector) -> Result<QuotientEval> {
    let problem = ProjectionProblem::new(norm.clone(), subspace.clone(), x.clone());
    let projection = project(&problem)?;
    let r = x - &projection.point;
    Ok(QuotientEval {
        value: norm.value(&r),
        gradient: norm.gradient(&r),
        projection,
    })
}

/// `|||x - rho(x)|||`.
pub fn quotient_norm(norm: Arc<dyn Norm>, subspace: &Subspace, x: &Vector) -> Result<f64> {
    Ok(quotient_eval(norm, subspace, x)?.value)
}

/// Closest-point coordinates by grid search, refined from a coarse grid down
/// to spacing `step`. An independent oracle for subspaces of dimension <= 3.
pub fn grid_projection(norm: &dyn Norm, subspace: &Subspace, x: &Vector, step: f64) -> Result<Vector> {
    let m = subspace.dim();
    if m > 3 {
        return Err(RenormError::Precondition("grid search needs dim E <= 3".into()));
    }
    if !(step > 0.0) {
        return Err(RenormError::invalid("grid step must be positive"));
    }
    if m == 0 {
        return Ok(Vector::zeros(0));
    }
    const HALF: i64 = 10;
    let b = subspace.basis_matrix();
    let f = |a: &Vector| norm.value(&(x - &b * a));
    let mut center = subspace.orthogonal_coords(x);
    let mut best = f(&center);
    let mut h = (x.norm().max(step) / 4.0).max(step);
    loop {
        // Re-centre until the minimum is interior to the local grid.
        for _ in 0..64 {
            let mut improved = None;
            let mut idx = vec![-HALF; m];
            'grid: loop {
                let a = Vector::from_iterator(m, (0..m).map(|i| center[i] + idx[i] as f64 * h));
                let v = f(&a);
                if v < best {
                    best = v;
                    improved = Some((a, idx.iter().any(|k| k.abs() == HALF)));
                }
                for i in 0..m {
                    if idx[i] < HALF {
                        idx[i] += 1;
                        continue 'grid;
                    }
                    idx[i] = -HALF;
                }
                break;
            }
            match improved {
                Some((a, on_edge)) => {
                    center = a;
                    if !on_edge {
                        break;
                    }
                }
                None => break,
            }
        }
        if h <= step {
            return Ok(center);
        }
        h = (h / 8.0).max(step);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::BiorthogonalSystem;
    use crate::smooth::{BaseNorm, NormKind, PerturbedNorm};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn v(x: &[f64]) -> Vector {
        Vector::from_vec(x.to_vec())
    }

    fn qform(rows: &[f64]) -> Arc<dyn Norm> {
        let d = (rows.len() as f64).sqrt() as usize;
        Arc::new(BaseNorm::new(NormKind::QuadraticForm(Matrix::from_row_slice(d, d, rows)), d).unwrap())
    }

    fn e1() -> Subspace {
        Subspace::leading(&BiorthogonalSystem::standard(2), 1).unwrap()
    }

    #[test]
    fn diagonal_form_decouples() {
        let p = project(&ProjectionProblem::new(
            qform(&[1.5, 0.0, 0.0, 1.25]),
            e1(),
            v(&[0.7, -2.0]),
        ))
        .unwrap();
        assert_relative_eq!(p.point[0], 0.7, epsilon = 1e-12);
        assert_eq!(p.point[1], 0.0);
    }

    #[test]
    fn coupled_form_example() {
        // Hand oracle: minimize 2t^2 - 2t + 2 over t.
        let norm = qform(&[2.0, 1.0, 1.0, 2.0]);
        let p = project(&ProjectionProblem::new(norm.clone(), e1(), v(&[0.0, 1.0]))).unwrap();
        assert_relative_eq!(p.point[0], 0.5, epsilon = 1e-12);
        let q = quotient_norm(norm, &e1(), &v(&[0.0, 1.0])).unwrap();
        assert_relative_eq!(q, 1.5f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn points_of_the_subspace_are_fixed() {
        let norm = qform(&[2.0, 1.0, 1.0, 2.0]);
        let p = project(&ProjectionProblem::new(norm.clone(), e1(), v(&[3.0, 0.0]))).unwrap();
        assert_eq!(p.point, v(&[3.0, 0.0]));
        assert_eq!(p.residual, 0.0);
        assert_eq!(quotient_norm(norm, &e1(), &v(&[3.0, 0.0])).unwrap(), 0.0);
    }

    #[test]
    fn restricted_hessian_examples() {
        let m = restricted_hessian(qform(&[4.0, 2.0, 2.0, 4.0]).as_ref(), &e1(), &v(&[0.3, 1.0]), &v(&[0.1, 0.0]))
            .unwrap();
        assert_relative_eq!(m.m[(0, 0)], 8.0, epsilon = 1e-12);

        let pert = PerturbedNorm::new(
            Arc::new(BaseNorm::euclidean(2)),
            BiorthogonalSystem::standard(2),
            1.0,
        )
        .unwrap();
        let m = restricted_hessian(&pert, &e1(), &v(&[0.3, 1.0]), &v(&[0.0, 0.0])).unwrap();
        assert_relative_eq!(m.m[(0, 0)], 3.0, epsilon = 1e-12);

        let eps = 0.1;
        let sys = BiorthogonalSystem::standard(3);
        let pert = PerturbedNorm::new(Arc::new(BaseNorm::euclidean(3)), sys.clone(), eps).unwrap();
        let e = Subspace::leading(&sys, 2).unwrap();
        let m = restricted_hessian(&pert, &e, &v(&[0.3, 1.0, 2.0]), &Vector::zeros(3)).unwrap();
        assert_relative_eq!(m.m2, Matrix::from_diagonal(&v(&[eps, eps / 2.0])), epsilon = 1e-15);
        assert!(m.min_eigenvalue > 0.0);
    }

    #[test]
    fn indefinite_objective_is_rejected() {
        struct Saddle;
        impl crate::smooth::SmoothFunction for Saddle {
            fn dim(&self) -> usize {
                2
            }
            fn value(&self, x: &Vector) -> f64 {
                x[1].abs()
            }
            fn gradient(&self, x: &Vector) -> Vector {
                v(&[0.0, x[1].signum()])
            }
            fn hessian(&self, _: &Vector) -> Matrix {
                Matrix::zeros(2, 2)
            }
        }
        impl Norm for Saddle {}
        let err = project(&ProjectionProblem::new(Arc::new(Saddle), e1(), v(&[1.0, 1.0]))).unwrap_err();
        assert!(matches!(err, RenormError::NotPositiveDefinite { .. }), "{err:?}");
    }

    #[test]
    fn newton_converges_quadratically() {
        let base = Arc::new(BaseNorm::new(NormKind::PNorm(4), 3).unwrap());
        let norm: Arc<dyn Norm> = Arc::new(
            PerturbedNorm::new(base, BiorthogonalSystem::standard(3), 0.05).unwrap(),
        );
        let e = Subspace::from_vectors(3, vec![v(&[1.0, 0.5, 0.0]), v(&[0.0, 1.0, -1.0])]).unwrap();
        let mut problem = ProjectionProblem::new(norm, e, v(&[2.0, -1.0, 0.7]));
        problem.tolerance = 1e-14;
        let p = project(&problem).unwrap();
        let h = &p.residual_history;
        assert!(h.len() >= 3, "{h:?}");
        let n = h.len();
        // Last contraction r_{k+1} <= C r_k^2 with a modest C.
        let (r0, r1) = (h[n - 3], h[n - 2]);
        assert!(r1 <= 10.0 * r0 * r0 + 1e-15, "{h:?}");
    }

    fn arb_vec(d: usize) -> impl Strategy<Value = Vector> {
        prop::collection::vec(-2.0f64..2.0, d).prop_map(Vector::from_vec)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn translation_and_homogeneity(x in arb_vec(3), s in -2.0f64..2.0, t in 0.1f64..10.0) {
            let base = Arc::new(BaseNorm::new(NormKind::PNorm(4), 3).unwrap());
            let norm: Arc<dyn Norm> = Arc::new(
                PerturbedNorm::new(base, BiorthogonalSystem::standard(3), 0.1).unwrap(),
            );
            let e = Subspace::from_vectors(3, vec![v(&[1.0, 0.5, 0.0])]).unwrap();
            let shift = v(&[1.0, 0.5, 0.0]) * s;
            let p = project(&ProjectionProblem::new(norm.clone(), e.clone(), x.clone())).unwrap();
            let q = project(&ProjectionProblem::new(norm.clone(), e.clone(), &x + &shift)).unwrap();
            prop_assert!((&q.point - (&p.point + &shift)).amax() < 1e-8);
            let qx = quotient_norm(norm.clone(), &e, &x).unwrap();
            let qtx = quotient_norm(norm, &e, &(&x * t)).unwrap();
            prop_assert!((qtx - t * qx).abs() <= 1e-9 * (t * qx).max(1e-12));
            prop_assert!(p.hessian_min_eigenvalue > 0.0);
        }
    }

    #[test]
    fn grid_oracle_agrees_with_newton() {
        let norm = qform(&[2.0, 0.3, 0.3, 1.0]);
        let sub = e1();
        let x = v(&[0.4, -1.1]);
        let p = project(&ProjectionProblem::new(norm.clone(), sub.clone(), x.clone())).unwrap();
        let g = grid_projection(norm.as_ref(), &sub, &x, 1e-3).unwrap();
        assert!((g - &p.coords).amax() <= 1e-3);
    }
}
