//! The smooth profile `Psi(u) = int_0^u exp(-1/v) dv` and the bump shape
//! constant `u*`.
//!
//! `Psi` vanishes to infinite order at 0, is strictly convex on `(0, inf)`,
//! and grows like `u - ln u` at infinity.

use std::sync::OnceLock;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `Psi(u)`; zero for `u <= 0`.
pub fn big_psi(u: f64) -> f64 {
    if !(u > 0.0) {
        return 0.0;
    }
    if u.is_infinite() {
        return f64::INFINITY;
    }
    let x = 1.0 / u;
    if u <= 1.0 {
        // int_x^inf e^{-w} / w^2 dw through a continued fraction for the
        // tail of E1.
        let terms = (10.0 + 110.0 / x).ceil() as usize;
        let mut t = 0.0;
        for k in (2..=terms).rev() {
            let kf = k as f64;
            t = kf * kf / (x + 2.0 * kf + 1.0 - t);
        }
        let tau = 1.0 / (x + 3.0 - t);
        (-x).exp() * (1.0 - tau) / (x * (x + 1.0 - tau))
    } else {
        u * (-x).exp() - e1_series(x)
    }
}

/// `Psi'(u) = exp(-1/u)`.
pub fn big_psi_d1(u: f64) -> f64 {
    if u > 0.0 {
        (-1.0 / u).exp()
    } else {
        0.0
    }
}

/// `Psi''(u) = exp(-1/u) / u^2`.
pub fn big_psi_d2(u: f64) -> f64 {
    if u > 0.0 && u.is_finite() {
        (-1.0 / u).exp() / (u * u)
    } else {
        0.0
    }
}

/// Exponential integral `E1(x)` for `0 < x <= 1` by its power series.
fn e1_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0;
    for n in 1..60 {
        let nf = n as f64;
        term *= x / nf;
        let add = if n % 2 == 1 { term / nf } else { -term / nf };
        sum += add;
        if add.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    -EULER_GAMMA - x.ln() + sum
}

/// Shape constant `u*` with `Psi(2 u*) = 3 Psi(u*)`.
///
/// A bump `s Psi(h / w)` with `w = (B - A) / u*` and `s = 1 / Psi(u*)` takes
/// the value 1 at `h = B` and 3 at `h = 2B - A`.
pub fn bump_shape() -> f64 {
    static CELL: OnceLock<f64> = OnceLock::new();
    *CELL.get_or_init(|| {
        let f = |u: f64| big_psi(2.0 * u) - 3.0 * big_psi(u);
        let (mut lo, mut hi) = (1.0, 10.0);
        // The ratio Psi(2u)/Psi(u) decreases from infinity towards 2.
        debug_assert!(f(lo) > 0.0 && f(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    })
}

/// `1 / Psi(u*)`.
pub fn bump_scale() -> f64 {
    static CELL: OnceLock<f64> = OnceLock::new();
    *CELL.get_or_init(|| 1.0 / big_psi(bump_shape()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    // 20-digit reference values from an arbitrary-precision quadrature.
    const REFERENCE: [(f64, f64); 9] = [
        (0.05, 4.7024282154290802152e-12),
        (0.1, 3.8302404656316112818e-7),
        (0.25, 0.00079955731233463859455),
        (0.5, 0.01876713091024522638),
        (1.0, 0.14849550677592204792),
        (1.5, 0.37171668547860805652),
        (2.0, 0.65328772464910603546),
        (5.0, 2.871003221206016205),
        (20.0, 16.556690001504305812),
    ];

    #[test]
    fn matches_reference_values() {
        for (u, want) in REFERENCE {
            assert_relative_eq!(big_psi(u), want, max_relative = 1e-13);
        }
    }

    #[test]
    fn vanishes_off_the_positive_axis() {
        assert_eq!(big_psi(0.0), 0.0);
        assert_eq!(big_psi(-3.0), 0.0);
        assert_eq!(big_psi_d1(-1.0), 0.0);
        assert!(big_psi(0.005) >= 0.0 && big_psi(0.005) < 1e-80);
    }

    #[test]
    fn shape_constant() {
        assert_relative_eq!(bump_shape(), 2.3632112918859243228, max_relative = 1e-14);
        assert_relative_eq!(bump_scale(), 1.0 / 0.88276143427081713149, max_relative = 1e-13);
        let u = bump_shape();
        assert_relative_eq!(big_psi(2.0 * u) / big_psi(u), 3.0, max_relative = 1e-13);
    }

    #[test]
    fn branches_agree_at_the_switch() {
        let below = big_psi(1.0 - 1e-12);
        let above = big_psi(1.0 + 1e-12);
        assert!((above - below - 2e-12 * big_psi_d1(1.0)).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn derivative_matches_difference_quotient(u in 0.08f64..30.0) {
            let h = 1e-5 * u;
            let fd = (big_psi(u + h) - big_psi(u - h)) / (2.0 * h);
            prop_assert!((fd - big_psi_d1(u)).abs() <= 1e-7 * big_psi_d1(u).max(1e-12));
            let fd2 = (big_psi_d1(u + h) - big_psi_d1(u - h)) / (2.0 * h);
            prop_assert!((fd2 - big_psi_d2(u)).abs() <= 1e-6 * big_psi_d2(u).max(1e-12));
        }

        #[test]
        fn convex_and_increasing(u in 0.01f64..40.0, v in 0.01f64..40.0) {
            let m = 0.5 * (u + v);
            let tol = 1e-14 * (1.0 + big_psi(u.max(v)));
            prop_assert!(big_psi(m) <= 0.5 * (big_psi(u) + big_psi(v)) + tol);
            if u < v {
                prop_assert!(big_psi(u) <= big_psi(v));
            }
        }

    }
}
