//! Geometric substrate: biorthogonal systems, subspaces, symmetric convex
//! bodies, gauges, support functions, polars and Hausdorff distances.
//!
//! Functionals are identified with vectors through the dot product, so a
//! polytope given by vertices and one given by functionals share storage.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::lp::vertex_gauge;
use crate::smooth::SmoothFunction;
use crate::{Matrix, RenormError, Result, Vector};

const BIORTHOGONAL_TOL: f64 = 1e-12;
const DIRECTION_SEED: u64 = 0x5eed_d1e5;

/// Basis vectors `x_i` with coordinate functionals `x_i*` such that
/// `x_i*(x_j) = [i == j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BiorthogonalSystem {
    basis: Vec<Vector>,
    duals: Vec<Vector>,
}

impl BiorthogonalSystem {
    pub fn standard(d: usize) -> Self {
        let basis: Vec<Vector> = (0..d).map(|i| unit(d, i)).collect();
        Self {
            duals: basis.clone(),
            basis,
        }
    }

    /// Builds the system from a basis; the duals are the rows of the inverse
    /// change-of-basis matrix.
    pub fn from_basis(basis: Vec<Vector>) -> Result<Self> {
        let d = basis.len();
        if d == 0 {
            return Err(RenormError::invalid("empty basis"));
        }
        for b in &basis {
            if b.len() != d {
                return Err(RenormError::DimensionMismatch {
                    expected: d,
                    got: b.len(),
                });
            }
        }
        let m = DMatrix::from_fn(d, d, |r, c| basis[c][r]);
        let inv = m
            .clone()
            .try_inverse()
            .ok_or_else(|| RenormError::invalid("basis is singular"))?;
        let duals = (0..d).map(|i| inv.row(i).transpose()).collect();
        Self::from_parts(basis, duals)
    }

    pub fn from_parts(basis: Vec<Vector>, duals: Vec<Vector>) -> Result<Self> {
        let d = basis.len();
        if duals.len() != d {
            return Err(RenormError::DimensionMismatch {
                expected: d,
                got: duals.len(),
            });
        }
        for (i, f) in duals.iter().enumerate() {
            for (j, x) in basis.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                if (f.dot(x) - target).abs() > BIORTHOGONAL_TOL {
                    return Err(RenormError::invalid(format!(
                        "x*_{}(x_{}) = {} is not biorthogonal",
                        i + 1,
                        j + 1,
                        f.dot(x)
                    )));
                }
            }
        }
        Ok(Self { basis, duals })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vector] {
        &self.basis
    }

    pub fn duals(&self) -> &[Vector] {
        &self.duals
    }

    /// `x_i*(x)` for a 0-based index `i`.
    pub fn coordinate(&self, i: usize, x: &Vector) -> f64 {
        self.duals[i].dot(x)
    }

    /// `P_n(x) = sum_{i<n} x_i*(x) x_i`.
    pub fn project_leading(&self, n: usize, x: &Vector) -> Vector {
        let mut out = Vector::zeros(x.len());
        for i in 0..n.min(self.dim()) {
            out.axpy(self.coordinate(i, x), &self.basis[i], 1.0);
        }
        out
    }

    /// `Q_n(x) = x - P_n(x)`.
    pub fn project_tail(&self, n: usize, x: &Vector) -> Vector {
        x - self.project_leading(n, x)
    }

    /// Adjoint of `P_n` acting on a functional: `sum_{i<n} f(x_i) x_i*`.
    pub fn project_leading_adjoint(&self, n: usize, f: &Vector) -> Vector {
        let mut out = Vector::zeros(f.len());
        for i in 0..n.min(self.dim()) {
            out.axpy(f.dot(&self.basis[i]), &self.duals[i], 1.0);
        }
        out
    }

    /// Linear combination `sum_i coeffs[i] x_i*`.
    pub fn functional(&self, coeffs: &[f64]) -> Vector {
        let mut out = Vector::zeros(self.dim());
        for (c, f) in coeffs.iter().zip(&self.duals) {
            out.axpy(*c, f, 1.0);
        }
        out
    }
}

/// A linear subspace given by independent spanning vectors.
#[derive(Clone, Debug)]
pub struct Subspace {
    ambient: usize,
    basis: Vec<Vector>,
    leading: Option<usize>,
}

impl Subspace {
    pub fn from_vectors(ambient: usize, basis: Vec<Vector>) -> Result<Self> {
        for b in &basis {
            if b.len() != ambient {
                return Err(RenormError::DimensionMismatch {
                    expected: ambient,
                    got: b.len(),
                });
            }
        }
        if !basis.is_empty() {
            let m = DMatrix::from_fn(ambient, basis.len(), |r, c| basis[c][r]);
            if m.rank(1e-10) < basis.len() {
                return Err(RenormError::invalid("subspace vectors are dependent"));
            }
        }
        Ok(Self {
            ambient,
            basis,
            leading: None,
        })
    }

    /// `E = [x_1, ..., x_n]` for the given system.
    pub fn leading(system: &BiorthogonalSystem, n: usize) -> Result<Self> {
        if n > system.dim() {
            return Err(RenormError::invalid(format!(
                "cannot take {n} leading vectors of a {}-dimensional system",
                system.dim()
            )));
        }
        Ok(Self {
            ambient: system.dim(),
            basis: system.basis()[..n].to_vec(),
            leading: Some(n),
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vector] {
        &self.basis
    }

    /// Number of leading system vectors spanning this subspace, when it was
    /// built with [`Subspace::leading`].
    pub fn leading_count(&self) -> Option<usize> {
        self.leading
    }

    /// `d x m` matrix with the spanning vectors as columns.
    pub fn basis_matrix(&self) -> Matrix {
        DMatrix::from_fn(self.ambient, self.basis.len(), |r, c| self.basis[c][r])
    }

    pub fn point(&self, coords: &Vector) -> Vector {
        self.basis_matrix() * coords
    }

    /// Coordinates of the Euclidean orthogonal projection of `x` onto the span.
    pub fn orthogonal_coords(&self, x: &Vector) -> Vector {
        let b = self.basis_matrix();
        let gram = b.transpose() * &b;
        let rhs = b.transpose() * x;
        gram.cholesky()
            .map(|c| c.solve(&rhs))
            .unwrap_or_else(|| Vector::zeros(self.dim()))
    }
}

/// Which representation a [`ConvexBody`] carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "V")]
    Vertices,
    #[serde(rename = "H")]
    Functionals,
}

/// A symmetric convex body with the origin in its interior.
#[derive(Clone)]
pub enum ConvexBody {
    /// `conv{v_j}` with the list closed under negation.
    VPolytope { dim: usize, points: Vec<Vector> },
    /// `{x : |f_j(x)| <= 1 for all j}`.
    HPolytope { dim: usize, functionals: Vec<Vector> },
    /// `{x : mu(x) <= 1}` for a smooth gauge `mu`.
    Gauge {
        dim: usize,
        handle: Arc<dyn SmoothFunction>,
    },
}

impl fmt::Debug for ConvexBody {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConvexBody::VPolytope { dim, points } => f
                .debug_struct("VPolytope")
                .field("dim", dim)
                .field("points", &points.len())
                .finish(),
            ConvexBody::HPolytope { dim, functionals } => f
                .debug_struct("HPolytope")
                .field("dim", dim)
                .field("functionals", &functionals.len())
                .finish(),
            ConvexBody::Gauge { dim, .. } => f.debug_struct("Gauge").field("dim", dim).finish(),
        }
    }
}

/// Value of a support function, flagged when it comes from a sampled search
/// that did not reach its stopping tolerance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Support {
    pub value: f64,
    pub approximate: bool,
}

/// JSON form of a polytope: `{"dim": d, "variant": "V"|"H", "points": [...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolytopeJson {
    pub dim: usize,
    pub variant: Variant,
    pub points: Vec<Vec<f64>>,
}

impl ConvexBody {
    /// V-polytope from a list that must already be closed under negation.
    pub fn v_polytope(points: Vec<Vector>) -> Result<Self> {
        let dim = check_points(&points)?;
        for p in &points {
            let neg = -p;
            if !points.iter().any(|q| *q == neg) {
                return Err(RenormError::invalid(
                    "vertex list is not closed under negation",
                ));
            }
        }
        Ok(ConvexBody::VPolytope { dim, points })
    }

    /// V-polytope `conv{+-p}` over the given points.
    pub fn symmetric_hull(points: Vec<Vector>) -> Result<Self> {
        check_points(&points)?;
        let mut all: Vec<Vector> = Vec::with_capacity(2 * points.len());
        for p in points {
            let neg = -&p;
            if !all.contains(&p) {
                all.push(p);
            }
            if !all.contains(&neg) {
                all.push(neg);
            }
        }
        Self::v_polytope(all)
    }

    pub fn h_polytope(functionals: Vec<Vector>) -> Result<Self> {
        let dim = check_points(&functionals)?;
        Ok(ConvexBody::HPolytope { dim, functionals })
    }

    pub fn gauge(handle: Arc<dyn SmoothFunction>) -> Self {
        ConvexBody::Gauge {
            dim: handle.dim(),
            handle,
        }
    }

    /// Unit cube `[-1, 1]^d` by its `2^d` vertices.
    pub fn cube(d: usize) -> Self {
        let points = (0..1usize << d)
            .map(|mask| {
                Vector::from_fn(d, |i, _| if mask >> i & 1 == 1 { 1.0 } else { -1.0 })
            })
            .collect();
        ConvexBody::VPolytope { dim: d, points }
    }

    /// Cross-polytope `conv{+-e_i}`.
    pub fn cross(d: usize) -> Self {
        let mut points = Vec::with_capacity(2 * d);
        for i in 0..d {
            points.push(unit(d, i));
            points.push(-unit(d, i));
        }
        ConvexBody::VPolytope { dim: d, points }
    }

    /// Symmetric hull of `count / 2` random points with radii in `[0.6, 1.4]`.
    pub fn random_polytope(d: usize, count: usize, seed: u64) -> Result<Self> {
        if count < 2 * d || count % 2 != 0 {
            return Err(RenormError::invalid(format!(
                "random polytope needs an even vertex count >= {}, got {count}",
                2 * d
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        loop {
            let pts: Vec<Vector> = (0..count / 2)
                .map(|_| {
                    let dir = gaussian_unit(d, &mut rng);
                    let r = 0.6 + 0.8 * rand::Rng::random::<f64>(&mut rng);
                    dir * r
                })
                .collect();
            let m = DMatrix::from_fn(d, pts.len(), |r, c| pts[c][r]);
            if m.rank(1e-6) == d {
                return Self::symmetric_hull(pts);
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexBody::VPolytope { dim, .. }
            | ConvexBody::HPolytope { dim, .. }
            | ConvexBody::Gauge { dim, .. } => *dim,
        }
    }

    pub fn is_polytope(&self) -> bool {
        !matches!(self, ConvexBody::Gauge { .. })
    }

    /// `r * body`.
    pub fn scaled(&self, r: f64) -> Result<Self> {
        if r <= 0.0 {
            return Err(RenormError::invalid("scale must be positive"));
        }
        Ok(match self {
            ConvexBody::VPolytope { dim, points } => ConvexBody::VPolytope {
                dim: *dim,
                points: points.iter().map(|p| p * r).collect(),
            },
            ConvexBody::HPolytope { dim, functionals } => ConvexBody::HPolytope {
                dim: *dim,
                functionals: functionals.iter().map(|f| f / r).collect(),
            },
            ConvexBody::Gauge { .. } => {
                return Err(RenormError::UnsupportedRepresentation(
                    "scaling a gauge body".into(),
                ))
            }
        })
    }

    /// Minkowski gauge `inf{t > 0 : x / t in body}`; zero at the origin.
    pub fn minkowski_gauge(&self, x: &Vector) -> Result<f64> {
        self.check_dim(x)?;
        match self {
            ConvexBody::HPolytope { functionals, .. } => Ok(functionals
                .iter()
                .map(|f| f.dot(x).abs())
                .fold(0.0, f64::max)),
            ConvexBody::VPolytope { points, .. } => vertex_gauge(points, x),
            ConvexBody::Gauge { handle, .. } => {
                if x.iter().all(|v| *v == 0.0) {
                    Ok(0.0)
                } else {
                    Ok(handle.value(x))
                }
            }
        }
    }

    /// Support function `max_{y in body} <u, y>`.
    pub fn support_function(&self, u: &Vector) -> Result<Support> {
        self.check_dim(u)?;
        match self {
            ConvexBody::VPolytope { points, .. } => Ok(Support {
                value: points.iter().map(|p| p.dot(u)).fold(f64::MIN, f64::max),
                approximate: false,
            }),
            ConvexBody::HPolytope { functionals, .. } => {
                let sym: Vec<Vector> = functionals
                    .iter()
                    .flat_map(|f| [f.clone(), -f])
                    .collect();
                Ok(Support {
                    value: vertex_gauge(&sym, u)?,
                    approximate: false,
                })
            }
            ConvexBody::Gauge { handle, dim } => Ok(gauge_support(handle.as_ref(), *dim, u)),
        }
    }

    /// Polar body; exchanges the vertex and functional descriptions.
    pub fn polar(&self) -> Result<Self> {
        match self {
            ConvexBody::VPolytope { dim, points } => Ok(ConvexBody::HPolytope {
                dim: *dim,
                functionals: points.clone(),
            }),
            ConvexBody::HPolytope { functionals, .. } => Self::symmetric_hull(functionals.clone()),
            ConvexBody::Gauge { .. } => Err(RenormError::UnsupportedRepresentation(
                "polar of a gauge body".into(),
            )),
        }
    }

    pub fn to_json(&self) -> Result<PolytopeJson> {
        let (dim, variant, pts) = match self {
            ConvexBody::VPolytope { dim, points } => (*dim, Variant::Vertices, points),
            ConvexBody::HPolytope { dim, functionals } => (*dim, Variant::Functionals, functionals),
            ConvexBody::Gauge { .. } => {
                return Err(RenormError::UnsupportedRepresentation(
                    "gauge bodies have no polytope JSON".into(),
                ))
            }
        };
        Ok(PolytopeJson {
            dim,
            variant,
            points: pts.iter().map(|p| p.iter().copied().collect()).collect(),
        })
    }

    pub fn from_json(json: &PolytopeJson) -> Result<Self> {
        let pts: Vec<Vector> = json
            .points
            .iter()
            .map(|p| Vector::from_vec(p.clone()))
            .collect();
        if pts.iter().any(|p| p.len() != json.dim) {
            return Err(RenormError::invalid("point length differs from dim"));
        }
        match json.variant {
            Variant::Vertices => Self::v_polytope(pts),
            Variant::Functionals => Self::h_polytope(pts),
        }
    }

    fn check_dim(&self, x: &Vector) -> Result<()> {
        if x.len() != self.dim() {
            return Err(RenormError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }
}

fn check_points(points: &[Vector]) -> Result<usize> {
    let dim = points
        .first()
        .map(|p| p.len())
        .ok_or_else(|| RenormError::invalid("empty point list"))?;
    if dim == 0 {
        return Err(RenormError::invalid("zero-dimensional points"));
    }
    if points.iter().any(|p| p.len() != dim) {
        return Err(RenormError::invalid("points of mixed dimension"));
    }
    if points.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
        return Err(RenormError::invalid("non-finite coordinate"));
    }
    let m = DMatrix::from_fn(dim, points.len(), |r, c| points[c][r]);
    if m.rank(1e-12) < dim {
        return Err(RenormError::invalid(
            "points do not span the space; the origin would not be interior",
        ));
    }
    Ok(dim)
}

/// Sampled support of a smooth gauge body: best direction from a sphere grid,
/// then projected gradient ascent of `<u, v> / mu(v)` on the unit sphere.
fn gauge_support(handle: &dyn SmoothFunction, dim: usize, u: &Vector) -> Support {
    let ratio = |v: &Vector| u.dot(v) / handle.value(v);
    let grid = direction_grid(dim, if dim <= 2 { 720 } else { 4096 });
    let mut v = grid
        .into_iter()
        .max_by(|a, b| ratio(a).total_cmp(&ratio(b)))
        .expect("non-empty grid");
    let mut best = ratio(&v);
    let mut step = 1.0;
    for _ in 0..2000 {
        let mu = handle.value(&v);
        let grad_mu = handle.gradient(&v);
        let g = (u * mu - grad_mu * u.dot(&v)) / (mu * mu);
        let tangent = &g - &v * g.dot(&v);
        let tnorm = tangent.norm();
        if tnorm <= 1e-13 * best.abs().max(1e-300) {
            return Support {
                value: best,
                approximate: false,
            };
        }
        let mut moved = false;
        while step > 1e-18 {
            let cand = (&v + &tangent * step).normalize();
            let r = ratio(&cand);
            if r > best {
                v = cand;
                best = r;
                step *= 2.0;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            return Support {
                value: best,
                approximate: tnorm > 1e-8 * best.abs().max(1e-300),
            };
        }
    }
    Support {
        value: best,
        approximate: true,
    }
}

/// Deterministic quasi-uniform unit directions: uniform angles in 2D, a
/// Fibonacci sphere in 3D, seeded normalized Gaussians otherwise.
pub fn direction_grid(d: usize, count: usize) -> Vec<Vector> {
    match d {
        1 => vec![unit(1, 0), -unit(1, 0)],
        2 => (0..count)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / count as f64;
                Vector::from_vec(vec![t.cos(), t.sin()])
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - (2.0 * k as f64 + 1.0) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * k as f64;
                    Vector::from_vec(vec![r * phi.cos(), r * phi.sin(), z])
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(DIRECTION_SEED);
            (0..count).map(|_| gaussian_unit(d, &mut rng)).collect()
        }
    }
}

pub fn gaussian_unit<R: rand::Rng>(d: usize, rng: &mut R) -> Vector {
    loop {
        let v = Vector::from_fn(d, |_, _| StandardNormal.sample(rng));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

pub fn unit(d: usize, i: usize) -> Vector {
    let mut v = Vector::zeros(d);
    v[i] = 1.0;
    v
}

/// Symmetric Hausdorff distance `max_u |h_a(u) - h_b(u)|` over Euclidean unit
/// directions.
///
/// Uses a deterministic grid of `directions` points. For two planar
/// V-polytopes the grid is augmented with every direction where the maximum
/// can occur (tie lines of either support function and critical points of the
/// difference), which makes the result exact.
pub fn hausdorff_distance(a: &ConvexBody, b: &ConvexBody, directions: usize) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(RenormError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    if directions == 0 {
        return Err(RenormError::invalid("need at least one direction"));
    }
    let d = a.dim();
    let mut dirs = direction_grid(d, directions);
    if let (
        ConvexBody::VPolytope { points: pa, .. },
        ConvexBody::VPolytope { points: pb, .. },
    ) = (a, b)
    {
        if d == 2 {
            dirs.extend(planar_critical_directions(pa, pb));
        }
    }
    let mut worst: f64 = 0.0;
    for u in &dirs {
        let ha = a.support_function(u)?.value;
        let hb = b.support_function(u)?.value;
        worst = worst.max((ha - hb).abs());
    }
    Ok(worst)
}

fn planar_critical_directions(pa: &[Vector], pb: &[Vector]) -> Vec<Vector> {
    let mut out = Vec::new();
    let mut push = |v: Vector| {
        let n = v.norm();
        if n > 1e-300 {
            out.push(&v / n);
            out.push(-&v / n);
        }
    };
    for set in [pa, pb] {
        for i in 0..set.len() {
            for j in i + 1..set.len() {
                let e = &set[i] - &set[j];
                push(Vector::from_vec(vec![-e[1], e[0]]));
            }
        }
    }
    for p in pa {
        for q in pb {
            push(p - q);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smooth::{BaseNorm, NormKind};
    use approx::assert_relative_eq;

    fn v(x: &[f64]) -> Vector {
        Vector::from_vec(x.to_vec())
    }

    fn square_h() -> ConvexBody {
        ConvexBody::h_polytope(vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap()
    }

    #[test]
    fn gauge_examples() {
        assert_eq!(square_h().minkowski_gauge(&v(&[2.0, 1.0])).unwrap(), 2.0);
        assert_relative_eq!(
            ConvexBody::cube(2).minkowski_gauge(&v(&[2.0, 1.0])).unwrap(),
            2.0,
            epsilon = 1e-12
        );
        for body in [square_h(), ConvexBody::cross(2), ConvexBody::cube(2)] {
            assert_eq!(body.minkowski_gauge(&Vector::zeros(2)).unwrap(), 0.0);
        }
        let q = BaseNorm::new(
            NormKind::QuadraticForm(Matrix::from_row_slice(2, 2, &[1.5, 0.0, 0.0, 1.25])),
            2,
        )
        .unwrap();
        let body = ConvexBody::gauge(Arc::new(q));
        assert_relative_eq!(
            body.minkowski_gauge(&v(&[1.0, 0.0])).unwrap(),
            1.5f64.sqrt(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn support_examples() {
        let u = v(&[1.0, 1.0]);
        assert_eq!(ConvexBody::cross(2).support_function(&u).unwrap().value, 1.0);
        assert_eq!(ConvexBody::cube(2).support_function(&u).unwrap().value, 2.0);
        assert_relative_eq!(
            square_h().support_function(&u).unwrap().value,
            2.0,
            epsilon = 1e-12
        );
        let ball = ConvexBody::gauge(Arc::new(BaseNorm::euclidean(2)));
        let s = ball.support_function(&v(&[3.0, 4.0])).unwrap();
        assert!(!s.approximate);
        assert_relative_eq!(s.value, 5.0, epsilon = 1e-10);
    }

    #[test]
    fn polar_examples() {
        let cross = square_h().polar().unwrap();
        for x in [v(&[0.3, -0.2]), v(&[1.0, 1.0]), v(&[-2.0, 0.5])] {
            assert_relative_eq!(
                cross.minkowski_gauge(&x).unwrap(),
                x[0].abs() + x[1].abs(),
                epsilon = 1e-12
            );
        }
        let back = ConvexBody::cross(2).polar().unwrap();
        assert_eq!(back.minkowski_gauge(&v(&[0.3, -0.7])).unwrap(), 0.7);

        let half_cross = ConvexBody::cube(2).scaled(2.0).unwrap().polar().unwrap();
        for x in [v(&[0.3, -0.2]), v(&[1.0, 2.0])] {
            assert_relative_eq!(
                half_cross.minkowski_gauge(&x).unwrap(),
                2.0 * (x[0].abs() + x[1].abs()),
                epsilon = 1e-12
            );
        }
        let ball = ConvexBody::gauge(Arc::new(BaseNorm::euclidean(2)));
        assert!(matches!(
            ball.polar(),
            Err(RenormError::UnsupportedRepresentation(_))
        ));
    }

    #[test]
    fn hausdorff_examples() {
        let ball = ConvexBody::gauge(Arc::new(BaseNorm::euclidean(2)));
        let big = ConvexBody::gauge(Arc::new(
            BaseNorm::new(NormKind::QuadraticForm(Matrix::identity(2, 2) / 1.21), 2).unwrap(),
        ));
        assert_relative_eq!(hausdorff_distance(&ball, &big, 64).unwrap(), 0.1, epsilon = 1e-9);
        assert_eq!(
            hausdorff_distance(&ConvexBody::cube(2), &ConvexBody::cube(2), 64).unwrap(),
            0.0
        );
        // Dense sweep oracle: max over 10^5 angles of |max(|c|+|s|) - 1|.
        let oracle = (0..100_000)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / 100_000.0;
                (t.cos().abs() + t.sin().abs() - 1.0).abs()
            })
            .fold(0.0, f64::max);
        let got = hausdorff_distance(&ConvexBody::cube(2), &ball, 720).unwrap();
        assert_relative_eq!(got, oracle, epsilon = 1e-9);
        assert_relative_eq!(got, 2f64.sqrt() - 1.0, epsilon = 1e-9);
        assert!(matches!(
            hausdorff_distance(&ConvexBody::cube(2), &ConvexBody::cube(3), 8),
            Err(RenormError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn planar_polytope_distance_is_exact_on_a_coarse_grid() {
        // Square vs cross: the worst direction is a diagonal, which a
        // three-direction grid misses.
        let got = hausdorff_distance(&ConvexBody::cube(2), &ConvexBody::cross(2), 3).unwrap();
        assert_relative_eq!(got, 2f64.sqrt() - 1.0 / 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn system_from_basis_is_biorthogonal() {
        let sys =
            BiorthogonalSystem::from_basis(vec![v(&[1.0, 0.5]), v(&[0.2, 1.0])]).unwrap();
        let x = v(&[0.7, -1.3]);
        let p = sys.project_leading(1, &x);
        assert_relative_eq!(sys.coordinate(0, &p), sys.coordinate(0, &x), epsilon = 1e-14);
        assert!(sys.coordinate(1, &p).abs() < 1e-14);
        assert!(BiorthogonalSystem::from_basis(vec![v(&[1.0, 1.0]), v(&[2.0, 2.0])]).is_err());
    }

    #[test]
    fn vertex_lists_must_be_symmetric_and_spanning() {
        assert!(ConvexBody::v_polytope(vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])]).is_err());
        assert!(ConvexBody::symmetric_hull(vec![v(&[1.0, 0.0])]).is_err());
        assert!(ConvexBody::symmetric_hull(vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])]).is_ok());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let body = ConvexBody::random_polytope(3, 10, 7).unwrap();
        let text = serde_json::to_string(&body.to_json().unwrap()).unwrap();
        let parsed: PolytopeJson = serde_json::from_str(&text).unwrap();
        let back = ConvexBody::from_json(&parsed).unwrap();
        let (ConvexBody::VPolytope { points: a, .. }, ConvexBody::VPolytope { points: b, .. }) =
            (&body, &back)
        else {
            panic!("variant changed");
        };
        for (p, q) in a.iter().zip(b) {
            for (x, y) in p.iter().zip(q.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        assert!(text.contains("\"variant\":\"V\""));
    }
}
