//! The bump schedule `delta_k = delta_1 2^(1-k)` with
//! `lambda_k = (1 + k/(k+2) delta_k) / (1 + delta_k)`, and the bumps `phi_k`.
//!
//! Entries are computed on demand since a family can have very many members.
//! Bump values are evaluated through `c_k = delta_k / ((k+2)(1+delta_k))`,
//! kept as a mantissa and a power of two so that indices far beyond the
//! exponent range keep exact zero zones.

use serde::Serialize;

use crate::profile::{big_psi, big_psi_d1, big_psi_d2, bump_scale, bump_shape};
use crate::smooth::SmoothFunction;
use crate::{Matrix, RenormError, Result, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Schedule {
    lambda1: f64,
    delta1: f64,
}

/// Numbers attached to index `k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScheduleEntry {
    pub k: u64,
    pub delta: f64,
    pub lambda: f64,
    /// Edge of the zero zone.
    pub a: f64,
    /// Point where the bump equals 1.
    pub b: f64,
    /// Point where the bump equals 3.
    pub c: f64,
    /// Locality radius.
    pub r: f64,
    /// Bump width `w_k = (B_k - A_k) / u*`.
    pub width: f64,
    /// Bump height scale `s = 1 / Psi(u*)`.
    pub scale: f64,
}

/// `2^e` saturating to infinity.
fn pow2(e: u64) -> f64 {
    if e > 1100 {
        f64::INFINITY
    } else {
        2f64.powi(e as i32)
    }
}

impl Schedule {
    /// Requires `1/3 < lambda1 < 1`; `delta_1 = 3 (1 - lambda1) / (3 lambda1 - 1)`.
    pub fn new(lambda1: f64) -> Result<Self> {
        if !(lambda1 > 1.0 / 3.0 && lambda1 < 1.0) {
            return Err(RenormError::invalid(format!(
                "lambda1 must lie in (1/3, 1), got {lambda1}"
            )));
        }
        Ok(Self {
            lambda1,
            delta1: 3.0 * (1.0 - lambda1) / (3.0 * lambda1 - 1.0),
        })
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn delta1(&self) -> f64 {
        self.delta1
    }

    /// `delta_k`, 1-based.
    pub fn delta(&self, k: u64) -> f64 {
        self.delta1 / pow2(k - 1)
    }

    /// Mantissa `m_k` with `c_k = m_k 2^(1-k)`.
    fn c_mantissa(&self, k: u64) -> f64 {
        self.delta1 / ((k as f64 + 2.0) * (1.0 + self.delta(k)))
    }

    /// `c_k = delta_k / ((k+2)(1+delta_k))`; `lambda_k = 1 - 2 c_k`.
    pub fn c(&self, k: u64) -> f64 {
        self.c_mantissa(k) / pow2(k - 1)
    }

    pub fn lambda(&self, k: u64) -> f64 {
        if k == 1 {
            return self.lambda1;
        }
        1.0 - 2.0 * self.c(k)
    }

    pub fn entry(&self, k: u64) -> ScheduleEntry {
        let delta = self.delta(k);
        let kf = k as f64;
        let a = 1.0 + kf / (kf + 2.0) * delta;
        let b = 1.0 + (kf + 1.0) / (kf + 2.0) * delta;
        ScheduleEntry {
            k,
            delta,
            lambda: self.lambda(k),
            a,
            b,
            c: 1.0 + delta,
            r: delta / (4.0 * (kf + 2.0) * (1.0 + delta)),
            width: (b - a) / bump_shape(),
            scale: bump_scale(),
        }
    }

    pub fn entries(&self, count: u64) -> Vec<ScheduleEntry> {
        (1..=count).map(|k| self.entry(k)).collect()
    }

    /// Argument `(h_k - A_k) / w_k` of the profile for `h_k = (1+delta_k) F`,
    /// written as `u* (2 - (1 - F) / c_k)`.
    fn argument(&self, k: u64, f: f64) -> f64 {
        let e = 1.0 - f;
        let ratio = if e == 0.0 {
            0.0
        } else {
            e / self.c_mantissa(k) * pow2(k - 1)
        };
        bump_shape() * (2.0 - ratio)
    }

    /// Whether `phi_k((1 + delta_k) f)` vanishes, i.e. `f <= lambda_k`.
    pub fn in_zero_zone(&self, k: u64, f: f64) -> bool {
        !(self.argument(k, f) > 0.0)
    }

    /// `phi_k((1 + delta_k) f)` for `f >= 0` side terms, with its derivative
    /// in `f`; zero for `f <= lambda_k`.
    pub fn term(&self, k: u64, f: f64) -> (f64, f64) {
        let r = self.argument(k, f);
        if !(r > 0.0) {
            return (0.0, 0.0);
        }
        let s = bump_scale();
        let value = s * big_psi(r);
        let slope = bump_shape() * pow2(k - 1) / self.c_mantissa(k);
        let d1 = big_psi_d1(r);
        let deriv = if d1 == 0.0 { 0.0 } else { s * d1 * slope };
        (value, deriv)
    }
}

/// `phi_k(t) = s Psi((|t| - A_k) / w_k)` as a one-dimensional smooth function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bump {
    pub entry: ScheduleEntry,
}

impl Bump {
    pub fn new(schedule: &Schedule, k: u64) -> Result<Self> {
        if k == 0 {
            return Err(RenormError::invalid("bump indices start at 1"));
        }
        let entry = schedule.entry(k);
        if !(entry.width > 0.0) {
            return Err(RenormError::invalid(format!(
                "bump {k} is below floating-point resolution"
            )));
        }
        Ok(Self { entry })
    }

    fn arg(&self, t: f64) -> f64 {
        (t.abs() - self.entry.a) / self.entry.width
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.entry.scale * big_psi(self.arg(t))
    }

    pub fn eval_d1(&self, t: f64) -> f64 {
        t.signum() * self.entry.scale * big_psi_d1(self.arg(t)) / self.entry.width
    }

    pub fn eval_d2(&self, t: f64) -> f64 {
        self.entry.scale * big_psi_d2(self.arg(t)) / (self.entry.width * self.entry.width)
    }
}

impl SmoothFunction for Bump {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, x: &Vector) -> f64 {
        self.eval(x[0])
    }
    fn gradient(&self, x: &Vector) -> Vector {
        Vector::from_element(1, self.eval_d1(x[0]))
    }
    fn hessian(&self, x: &Vector) -> Matrix {
        Matrix::from_element(1, 1, self.eval_d2(x[0]))
    }
    fn smooth_away_from_origin(&self) -> bool {
        false
    }
}
