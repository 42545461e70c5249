//! Small linear programs over symmetric point sets, backed by `minilp`.
//!
//! The only program needed is the gauge of a symmetric V-polytope:
//! `min sum(l) s.t. sum(l_j v_j) = x, l >= 0`. Its dual is the support function
//! of the polar H-polytope, so the same routine serves both.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::DMatrix;

use crate::{RenormError, Result, Vector};

/// Gauge of `conv(points)` at `x`, where `points` is closed under negation.
///
/// The simplex answer is polished by re-solving the linear system on its
/// support, which brings the result to near machine precision.
pub fn vertex_gauge(points: &[Vector], x: &Vector) -> Result<f64> {
    let d = x.len();
    if x.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = points
        .iter()
        .map(|_| problem.add_var(1.0, (0.0, f64::INFINITY)))
        .collect();
    for row in 0..d {
        let expr: Vec<_> = vars
            .iter()
            .zip(points)
            .map(|(v, p)| (*v, p[row]))
            .collect();
        problem.add_constraint(expr.as_slice(), ComparisonOp::Eq, x[row]);
    }
    let solution = problem
        .solve()
        .map_err(|e| RenormError::LinearProgram(e.to_string()))?;
    let raw = solution.objective();

    let scale = raw.max(1e-300);
    let support: Vec<usize> = vars
        .iter()
        .enumerate()
        .filter(|(_, v)| solution[**v] > 1e-9 * scale)
        .map(|(i, _)| i)
        .collect();
    if support.is_empty() || support.len() > d {
        return Ok(raw);
    }
    let basis = DMatrix::from_fn(d, support.len(), |r, c| points[support[c]][r]);
    let svd = basis.clone().svd(true, true);
    match svd.solve(x, 1e-13) {
        Ok(coeffs) => {
            if coeffs.iter().any(|c| *c < -1e-9 * scale) {
                return Ok(raw);
            }
            let residual = (&basis * &coeffs - x).norm();
            let polished: f64 = coeffs.iter().sum();
            if residual <= 1e-10 * x.norm().max(1.0) && (polished - raw).abs() <= 1e-6 * scale {
                Ok(polished)
            } else {
                Ok(raw)
            }
        }
        Err(_) => Ok(raw),
    }
}
