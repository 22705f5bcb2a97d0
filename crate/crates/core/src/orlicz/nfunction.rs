//! The complementary N-function pair
//!
//! ```text
//!   P(t)  = e^|t| - 1 - |t|            p(s)  = P'(s)  = sgn(s)(e^|s| - 1)
//!   P*(t) = (1+|t|)ln(1+|t|) - |t|     p̄(s) = P*'(s) = sgn(s)ln(1+|s|)
//! ```
//!
//! p and p̄ are mutual inverses, so Young's inequality
//! `x·y ≤ P(x) + P*(y)` holds with equality exactly on the curve `y = p(x)`.
//!
//! Everything here is generic over the float type; evaluation goes through
//! `exp_m1`/`ln_1p` so the gap computations keep full precision near the
//! equality curve (naive `exp(x) - 1 - x` loses all digits for small x).

use num_traits::Float;

/// `P(t) = e^|t| - 1 - |t|`.
///
/// Below 1e-5 the direct form cancels (both terms ≈ |t|, difference ≈ t²/2),
/// so the Taylor tail Σ t^n/n! takes over; its truncation error there is
/// below one ulp of the leading t²/2 term.
pub fn p<T: Float>(t: T) -> T {
    let a = t.abs();
    if a < T::from(1e-5).unwrap() {
        let c6 = T::from(720.0).unwrap();
        let c5 = T::from(120.0).unwrap();
        let c4 = T::from(24.0).unwrap();
        let c3 = T::from(6.0).unwrap();
        let c2 = T::from(2.0).unwrap();
        return a * a * (T::one() / c2 + a * (T::one() / c3 + a * (T::one() / c4 + a * (T::one() / c5 + a / c6))));
    }
    a.exp_m1() - a
}

/// `P*(t) = (1+|t|)ln(1+|t|) - |t|`.
///
/// Same cancellation guard as [`p`]: the alternating tail
/// Σ (-1)^n t^(n+1)/(n(n+1)) is used for small |t|.
pub fn p_star<T: Float>(t: T) -> T {
    let a = t.abs();
    if a < T::from(1e-5).unwrap() {
        let c2 = T::from(2.0).unwrap();
        let c6 = T::from(6.0).unwrap();
        let c12 = T::from(12.0).unwrap();
        let c20 = T::from(20.0).unwrap();
        return a * a * (T::one() / c2 - a * (T::one() / c6 - a * (T::one() / c12 - a / c20)));
    }
    let l = a.ln_1p();
    (T::one() + a) * l - a
}

/// `p(s) = sgn(s)(e^|s| - 1)`, the derivative of P.
pub fn dp<T: Float>(s: T) -> T {
    s.signum() * s.abs().exp_m1()
}

/// `p̄(s) = sgn(s)ln(1+|s|)`, the derivative of P*.
pub fn dp_star<T: Float>(s: T) -> T {
    s.signum() * s.abs().ln_1p()
}

/// Young gap `P(x) + P*(y) - x·y ≥ 0`; zero exactly when `y = p(x)`.
pub fn young_gap<T: Float>(x: T, y: T) -> T {
    p(x) + p_star(y) - x * y
}

fn monotone_inverse<T: Float>(f: impl Fn(T) -> T, df: impl Fn(T) -> T, y: T) -> T {
    if y <= T::zero() {
        return T::zero();
    }
    // Bracket [lo, hi] with f(hi) >= y, then safeguarded Newton.
    let two = T::one() + T::one();
    let mut hi = T::one();
    let mut guard = 0;
    while f(hi) < y && guard < 2000 {
        hi = hi * two;
        guard += 1;
    }
    let mut lo = T::zero();
    let mut t = hi / two;
    let tol = T::epsilon() * (T::one() + T::one() + T::one() + T::one());
    for _ in 0..200 {
        let ft = f(t) - y;
        if ft > T::zero() {
            hi = t;
        } else {
            lo = t;
        }
        let d = df(t);
        let newton = t - ft / d;
        t = if newton > lo && newton < hi {
            newton
        } else {
            (lo + hi) / two
        };
        if (hi - lo) <= tol * t.max(T::one()) {
            break;
        }
    }
    t
}

/// Inverse of P on `[0, ∞)`: solves `e^t - 1 - t = y`.
pub fn p_inverse<T: Float>(y: T) -> T {
    monotone_inverse(p, |t: T| t.exp_m1(), y)
}

/// Inverse of P* on `[0, ∞)`: solves `(1+t)ln(1+t) - t = y`.
pub fn p_star_inverse<T: Float>(y: T) -> T {
    monotone_inverse(p_star, |t: T| t.ln_1p(), y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn values_at_zero() {
        assert_eq!(p(0.0_f64), 0.0);
        assert_eq!(p_star(0.0_f64), 0.0);
        assert_eq!(young_gap(0.0_f64, 0.0), 0.0);
    }

    #[test]
    fn known_equality_point() {
        // p(ln 2) = 1, so the gap vanishes at (ln 2, 1).
        let g: f64 = young_gap(2.0_f64.ln(), 1.0);
        assert!(g.abs() < 1e-15, "gap {g}");
    }

    #[test]
    fn gap_cross_check_direct_forms() {
        // Direct closed-form evaluation, no exp_m1/ln_1p, as the oracle.
        let (x, y) = (1.0_f64, 3.0);
        let direct = (x.exp() - 1.0 - x) + (4.0 * 4.0_f64.ln() - 3.0) - 3.0;
        let gap = young_gap(x, y);
        assert!(gap > 0.0);
        assert!((gap - direct).abs() < 1e-12);
    }

    #[test]
    fn inverses_roundtrip() {
        for &y in &[1e-8, 0.01, 1.0, 6.0, 1e4, 1e8] {
            let t = p_inverse(y);
            assert!((p(t) - y).abs() <= 1e-12 * y.max(1.0), "P at {y}");
            let s = p_star_inverse(y);
            assert!((p_star(s) - y).abs() <= 1e-12 * y.max(1.0), "P* at {y}");
        }
        // The constant-field oracle root: e^t - 1 - t = 6.
        let t = p_inverse(6.0_f64);
        assert!((t - 2.2214).abs() < 1e-3);
    }

    #[test]
    fn works_in_single_precision() {
        let t = p_inverse(6.0_f32);
        assert!((p(t) - 6.0).abs() < 1e-4);
        assert!(young_gap(1.5_f32, dp(1.5_f32)) < 1e-5);
    }

    proptest! {
        #[test]
        fn gap_nonnegative(x in -30.0_f64..30.0, y in -30.0_f64..30.0) {
            prop_assert!(young_gap(x, y) >= -1e-12);
        }

        #[test]
        fn gap_vanishes_on_equality_curve(x in -10.0_f64..10.0) {
            prop_assert!(young_gap(x, dp(x)).abs() <= 1e-9);
        }

        #[test]
        fn derivatives_are_mutual_inverses(x in -20.0_f64..20.0) {
            prop_assert!((dp_star(dp(x)) - x).abs() <= 1e-12 * x.abs().max(1.0));
        }

        #[test]
        fn p_star_sandwich(a in prop::sample::select(vec![0.0_f64, 1e-6, 1e-3, 0.5, 1.0, 7.0, 1e2, 1e4, 1e6]),
                           jitter in 0.5_f64..2.0, sign in prop::bool::ANY) {
            let a = a * jitter * if sign { 1.0 } else { -1.0 };
            let low = a.abs() * a.abs().ln_1p() / 2.0;
            let high = a.abs() * a.abs().ln_1p();
            let v = p_star(a);
            prop_assert!(v >= low - 1e-12 && v <= high + 1e-12,
                "sandwich fails at {a}: {low} ≤ {v} ≤ {high}");
        }

        #[test]
        fn both_convex_midpoint(x in -20.0_f64..20.0, y in -20.0_f64..20.0) {
            let mid = (x + y) / 2.0;
            prop_assert!(p(mid) <= (p(x) + p(y)) / 2.0 + 1e-9 * (p(x) + p(y)).max(1.0));
            prop_assert!(p_star(mid) <= (p_star(x) + p_star(y)) / 2.0 + 1e-9);
        }
    }
}
