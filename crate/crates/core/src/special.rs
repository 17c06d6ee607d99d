//! Normal density/tails and the constants that recur in the moment formulas.

use std::f64::consts::LN_2;

/// ζ(3), Apéry's constant, to 17 significant digits.
pub const ZETA3: f64 = 1.202_056_903_159_594_3;

/// `2 log 2 - 5/4`, the normaliser of the fourth basic estimator.
pub fn hl_normalizer() -> f64 {
    2.0 * LN_2 - 1.25
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
#[inline]
pub fn phi(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Second derivative of the standard normal density, `(x² - 1) φ(x)`.
#[inline]
pub fn phi_dd(x: f64) -> f64 {
    (x * x - 1.0) * phi(x)
}

/// Standard normal CDF.
pub fn big_phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper tail `1 - Φ(x)`, accurate far into the tail.
pub fn big_phi_upper(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// ζ(3) by direct summation of `Σ 1/k³`.
///
/// Terms are added smallest first with Kahan compensation until the term
/// falls below `1e-16`; the dropped tail is closed with its Euler–Maclaurin
/// expansion `1/(2K²) - 1/(2K³) + 1/(4K⁴)`.
pub fn zeta3_series() -> f64 {
    // 1/k³ < 1e-16  <=>  k > 1e16^(1/3)
    let last = (1e16f64).cbrt().ceil() as u64;
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for k in (1..=last).rev() {
        let kf = k as f64;
        let y = 1.0 / (kf * kf * kf) - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    let n = last as f64;
    let tail = 1.0 / (2.0 * n * n) - 1.0 / (2.0 * n * n * n) + 1.0 / (4.0 * n * n * n * n);
    sum + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta3_series_matches_constant() {
        assert!((zeta3_series() - ZETA3).abs() < 1e-14);
    }

    #[test]
    fn normal_tails() {
        assert!((big_phi(0.0) - 0.5).abs() < 1e-16);
        assert!((big_phi(1.959963984540054) - 0.975).abs() < 1e-12);
        assert!((big_phi_upper(8.0) - 6.220960574271785e-16).abs() < 1e-27);
        assert!((big_phi(-3.0) + big_phi_upper(-3.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn phi_dd_matches_finite_difference() {
        for &x in &[-2.5, -0.3, 0.0, 1.0, 3.2] {
            let h = 1e-4;
            let fd = (phi(x + h) - 2.0 * phi(x) + phi(x - h)) / (h * h);
            assert!((fd - phi_dd(x)).abs() < 1e-7, "x={x}");
        }
        assert!(((2.0 * std::f64::consts::PI).sqrt() * INV_SQRT_2PI - 1.0).abs() < 1e-15);
    }

    #[test]
    fn normalizer_positive() {
        let d = hl_normalizer();
        assert!(d > 0.0 && (d - 0.136_294_361_119_890_6).abs() < 1e-15);
    }
}
