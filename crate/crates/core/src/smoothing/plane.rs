//! The flat plane norm `N(a, b)`: the gauge of `{psi(a) + psi(b) <= 1}` for a
//! profile `psi` that vanishes on `[-1/2, 1/2]`.
//!
//! Flatness gives `N(a, b) = max(|a|, |b|)` whenever the smaller coordinate is
//! at most half the larger one.

use crate::profile::{big_psi, big_psi_d1, big_psi_d2};
use crate::smooth::SmoothFunction;
use crate::{Matrix, RenormError, Result, Vector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaneNorm {
    w: f64,
    norm: f64,
}

impl Default for PlaneNorm {
    fn default() -> Self {
        Self::new(1.0).expect("unit width is valid")
    }
}

impl PlaneNorm {
    /// Profile `psi(t) = Psi((2|t| - 1) / w) / Psi(1 / w)`.
    pub fn new(w: f64) -> Result<Self> {
        if !(w > 0.0 && w.is_finite()) {
            return Err(RenormError::invalid(format!(
                "plane profile width must be positive, got {w}"
            )));
        }
        let norm = big_psi(1.0 / w);
        if !(norm > 0.0) {
            return Err(RenormError::invalid(format!(
                "plane profile width {w} underflows the profile"
            )));
        }
        Ok(Self { w, norm })
    }

    pub fn width(&self) -> f64 {
        self.w
    }

    pub fn psi(&self, t: f64) -> f64 {
        big_psi((2.0 * t.abs() - 1.0) / self.w) / self.norm
    }

    pub fn psi_d1(&self, t: f64) -> f64 {
        t.signum() * 2.0 / self.w * big_psi_d1((2.0 * t.abs() - 1.0) / self.w) / self.norm
    }

    pub fn psi_d2(&self, t: f64) -> f64 {
        4.0 / (self.w * self.w) * big_psi_d2((2.0 * t.abs() - 1.0) / self.w) / self.norm
    }

    /// `N(a, b)`.
    pub fn value(&self, a: f64, b: f64) -> f64 {
        let (m, s) = (a.abs().max(b.abs()), a.abs().min(b.abs()));
        if m == 0.0 || !m.is_finite() {
            return m;
        }
        if s <= 0.5 * m {
            return m;
        }
        m * self.solve_unit(s / m)
    }

    /// Scale `tau` in `[1, 2]` with `psi(1 / tau) + psi(r / tau) = 1`.
    fn solve_unit(&self, r: f64) -> f64 {
        let phi = |t: f64| self.psi(1.0 / t) + self.psi(r / t) - 1.0;
        let dphi = |t: f64| -(self.psi_d1(1.0 / t) + r * self.psi_d1(r / t)) / (t * t);
        let (mut lo, mut hi) = (1.0f64, 2.0f64);
        let mut t = 1.5;
        for _ in 0..200 {
            let v = phi(t);
            if v == 0.0 {
                return t;
            }
            if v > 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let dv = dphi(t);
            let newton = t - v / dv;
            let next = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - t).abs() <= 2.0 * f64::EPSILON * t || hi - lo <= 2.0 * f64::EPSILON * hi {
                return next;
            }
            t = next;
        }
        t
    }

    /// `(N, dN/da, dN/db)`.
    pub fn value_gradient(&self, a: f64, b: f64) -> (f64, f64, f64) {
        let n = self.value(a, b);
        if n == 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let (u, v) = (a / n, b / n);
        let (pu, pv) = (self.psi_d1(u), self.psi_d1(v));
        let den = a * pu + b * pv;
        if !(den > 0.0) {
            return if a.abs() >= b.abs() {
                (n, a.signum(), 0.0)
            } else {
                (n, 0.0, b.signum())
            };
        }
        (n, pu * n / den, pv * n / den)
    }

    /// Hessian of `N` in `(a, b)` by implicit differentiation of
    /// `psi(a / N) + psi(b / N) = 1`.
    pub fn hessian(&self, a: f64, b: f64) -> [[f64; 2]; 2] {
        let (n, na, nb) = self.value_gradient(a, b);
        if n == 0.0 {
            return [[0.0; 2]; 2];
        }
        let (u, v) = (a / n, b / n);
        let (p1u, p1v) = (self.psi_d1(u), self.psi_d1(v));
        let (p2u, p2v) = (self.psi_d2(u), self.psi_d2(v));
        let phi_n = -(u * p1u + v * p1v) / n;
        if !(phi_n < 0.0) {
            return [[0.0; 2]; 2];
        }
        let n2 = n * n;
        let phi_ab = [[p2u / n2, 0.0], [0.0, p2v / n2]];
        let phi_xn = [-(u * p2u + p1u) / n2, -(v * p2v + p1v) / n2];
        let phi_nn = (u * u * p2u + v * v * p2v + 2.0 * (u * p1u + v * p1v)) / n2;
        let grad = [na, nb];
        let mut h = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                h[i][j] = -(phi_ab[i][j]
                    + phi_xn[i] * grad[j]
                    + phi_xn[j] * grad[i]
                    + phi_nn * grad[i] * grad[j])
                    / phi_n;
            }
        }
        h
    }
}

impl SmoothFunction for PlaneNorm {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, x: &Vector) -> f64 {
        PlaneNorm::value(self, x[0], x[1])
    }

    fn gradient(&self, x: &Vector) -> Vector {
        let (_, ga, gb) = self.value_gradient(x[0], x[1]);
        Vector::from_vec(vec![ga, gb])
    }

    fn hessian(&self, x: &Vector) -> Matrix {
        let h = PlaneNorm::hessian(self, x[0], x[1]);
        Matrix::from_row_slice(2, 2, &[h[0][0], h[0][1], h[1][0], h[1][1]])
    }
}
