//! Scalar numerical kernel: Gaussian upper tail and its exponential bound,
//! the chi-square tail bound, and a bracketing bisection root finder.

use crate::{Error, Result};

/// Default argument tolerance for root finding.
pub const ROOT_TOL: f64 = 1e-12;

/// A probability value, guaranteed in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::invalid(
                "probability",
                format!("{value} not in [0, 1]"),
            ));
        }
        Ok(Probability(value))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Standard Gaussian upper-tail probability Q(x) = P{N(0,1) > x}.
///
/// Computed through the complementary error function so the far tail
/// (x up to about 8 and beyond) keeps full relative accuracy instead of
/// cancelling against 1.
pub fn q_function(x: f64) -> Probability {
    debug_assert!(x.is_finite());
    Probability(0.5 * libm::erfc(x / std::f64::consts::SQRT_2))
}

/// The exponential tail bound Q(x) <= (1/2) exp(-x^2/2), valid for x >= 0.
pub fn q_exponential_bound(x: f64) -> Result<Probability> {
    if x < 0.0 {
        return Err(Error::invalid(
            "x",
            format!("{x} < 0: bound only holds for x >= 0"),
        ));
    }
    Ok(Probability(0.5 * (-0.5 * x * x).exp()))
}

/// Chi-square tail bound: P{chi^2_k > x} <= exp(-x/2 + (k/2) ln(e x / k)),
/// valid for k >= 1 and x >= k.
pub fn chi_square_tail_bound(k: u32, x: f64) -> Result<Probability> {
    if k < 1 {
        return Err(Error::invalid("k", "degrees of freedom must be >= 1"));
    }
    let kf = f64::from(k);
    if x < kf {
        return Err(Error::invalid(
            "x",
            format!("{x} < k = {k}: bound is only valid for x >= k"),
        ));
    }
    let exponent = -0.5 * x + 0.5 * kf * (std::f64::consts::E * x / kf).ln();
    // exponent <= 0 on the valid domain, so this is a probability.
    Ok(Probability(exponent.exp()))
}

/// Result of a bisection search.
#[derive(Debug, Clone, Copy)]
pub struct BracketedRoot {
    pub lo: f64,
    pub hi: f64,
    pub root: f64,
    pub residual: f64,
}

/// Bisection on a sign-changing bracket. Shrinks `[lo, hi]` below `tol` in
/// argument and returns the midpoint with its forward residual.
pub fn bracket_and_bisect<F>(f: F, lo: f64, hi: f64, tol: f64) -> Result<BracketedRoot>
where
    F: Fn(f64) -> f64,
{
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "tolerance must be positive"));
    }
    let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(BracketedRoot {
            lo,
            hi: lo,
            root: lo,
            residual: 0.0,
        });
    }
    if fhi == 0.0 {
        return Ok(BracketedRoot {
            lo: hi,
            hi,
            root: hi,
            residual: 0.0,
        });
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NoSignChange { lo, hi });
    }
    let mut flo = flo;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // bracket at floating-point resolution
        }
        let fmid = f(mid);
        if fmid == 0.0 {
            return Ok(BracketedRoot {
                lo,
                hi,
                root: mid,
                residual: 0.0,
            });
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    Ok(BracketedRoot {
        lo,
        hi,
        root,
        residual: f(root),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Reference values computed with 30-digit arithmetic from erfc.
    const Q_REFERENCE: &[(f64, f64)] = &[
        (0.5, 0.30853753872598689636),
        (1.0, 0.15865525393145705141),
        (2.0, 0.0227501319481792072),
        (3.0, 0.0013498980316300945267),
        (4.0, 3.1671241833119921254e-5),
        (5.0, 2.8665157187919391167e-7),
        (6.0, 9.865876450376981407e-10),
        (7.0, 1.2798125438858350044e-12),
        (8.0, 6.2209605742717841235e-16),
    ];

    #[test]
    fn q_at_zero_is_half() {
        assert_eq!(q_function(0.0).value(), 0.5);
    }

    #[test]
    fn q_matches_reference_to_1e12_relative() {
        for &(x, expected) in Q_REFERENCE {
            let got = q_function(x).value();
            let rel = ((got - expected) / expected).abs();
            assert!(
                rel <= 1e-12,
                "Q({x}): got {got}, want {expected}, rel {rel}"
            );
            // negative side via symmetry
            let neg = q_function(-x).value();
            assert!(((neg - (1.0 - expected)) / (1.0 - expected)).abs() <= 1e-12);
        }
    }

    #[test]
    fn q_at_five_percent_quantile() {
        assert!((q_function(1.6448536).value() - 0.05).abs() <= 1e-7);
    }

    #[test]
    fn q_bound_examples() {
        assert_eq!(q_exponential_bound(0.0).unwrap().value(), 0.5);
        let b2 = q_exponential_bound(2.0).unwrap().value();
        assert!((b2 - 0.5 * (-2.0f64).exp()).abs() < 1e-15);
        assert!((b2 - 0.0676676416183063).abs() < 1e-12);
        assert!(q_function(2.0).value() <= b2);
        let b4 = q_exponential_bound(4.0).unwrap().value();
        assert!((b4 - 1.6773131395125591e-4).abs() < 1e-12);
        assert!(q_function(4.0).value() <= b4);
        assert!(q_exponential_bound(-0.1).is_err());
    }

    #[test]
    fn q_bound_dominates_on_grid() {
        for i in 0..=8000 {
            let x = i as f64 * 1e-3;
            assert!(q_function(x).value() <= q_exponential_bound(x).unwrap().value() + 1e-18);
        }
    }

    #[test]
    fn chi_square_bound_examples() {
        assert_eq!(chi_square_tail_bound(1, 1.0).unwrap().value(), 1.0);
        let v = chi_square_tail_bound(2, 10.0).unwrap().value();
        assert!((v - 0.0915781944436709).abs() < 1e-10);
        assert!(chi_square_tail_bound(3, 2.9).is_err());
    }

    /// Simpson quadrature of the chi-square density over [x, x + span].
    fn chi_square_tail_quadrature(k: u32, x: f64) -> f64 {
        let kf = f64::from(k);
        // ln density: (k/2 - 1) ln t - t/2 - ln Gamma(k/2) - (k/2) ln 2
        let ln_norm = statrs::function::gamma::ln_gamma(kf / 2.0) + (kf / 2.0) * 2.0f64.ln();
        let pdf = |t: f64| ((kf / 2.0 - 1.0) * t.ln() - t / 2.0 - ln_norm).exp();
        let span = (10.0 * kf + 200.0).max(200.0);
        let steps = 200_000;
        let h = span / steps as f64;
        let mut acc = pdf(x) + pdf(x + span);
        for i in 1..steps {
            let t = x + i as f64 * h;
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * pdf(t);
        }
        acc * h / 3.0
    }

    #[test]
    fn chi_square_bound_dominates_quadrature() {
        for &k in &[1u32, 2, 3, 5, 10, 25, 50] {
            for &m in &[1.0, 1.5, 3.0, 10.0] {
                let x = f64::from(k) * m;
                let bound = chi_square_tail_bound(k, x).unwrap().value();
                let truth = chi_square_tail_quadrature(k, x);
                assert!(
                    bound >= truth - 1e-9,
                    "k={k} x={x}: bound {bound} < tail {truth}"
                );
            }
        }
    }

    #[test]
    fn chi_square_bound_at_k3_x30_dominates() {
        let bound = chi_square_tail_bound(3, 30.0).unwrap().value();
        let truth = chi_square_tail_quadrature(3, 30.0);
        assert!(bound >= truth);
    }

    #[test]
    fn bisect_linear() {
        let r = bracket_and_bisect(|x| x - 1.0, 0.0, 2.0, 1e-10).unwrap();
        assert!((r.root - 1.0).abs() <= 1e-10);
        assert!(r.lo <= r.root && r.root <= r.hi);
    }

    #[test]
    fn bisect_no_sign_change_rejected() {
        assert!(matches!(
            bracket_and_bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-10),
            Err(Error::NoSignChange { .. })
        ));
    }

    fn alpha_star(s: f64) -> f64 {
        3.0 * s * s / (4.0 * (s * s - 2.0 * s + 4.0))
    }

    #[test]
    fn bisect_inverts_alpha_star_endpoints() {
        let r = bracket_and_bisect(|s| alpha_star(s) - 0.25, 0.0, 1.0, 1e-12).unwrap();
        assert!((r.root - 1.0).abs() <= 1e-11);
        let r =
            bracket_and_bisect(|s| alpha_star(s) - 0.057692307692307696, 0.0, 1.0, 1e-12).unwrap();
        assert!((r.root - 0.5).abs() <= 1e-11);
    }

    proptest! {
        #[test]
        fn q_symmetry(x in -8.0f64..8.0) {
            let s = q_function(x).value() + q_function(-x).value();
            prop_assert!((s - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn bisect_residual_small(a in 0.1f64..5.0, b in -2.0f64..2.0) {
            // monotone cubic with a root at b
            let f = move |x: f64| a * (x - b).powi(3) + (x - b);
            let r = bracket_and_bisect(f, -10.0, 10.0, 1e-12).unwrap();
            prop_assert!((r.root - b).abs() <= 1e-11);
            prop_assert!(r.residual.abs() <= 1e-9);
        }
    }
}
