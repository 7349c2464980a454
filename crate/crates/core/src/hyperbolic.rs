//! Hyperbolic ratios that stay accurate when the arguments are large.
//!
//! The slab has a·k ≈ 17.5 at nominal data, and some adjoint closed forms
//! carry arguments up to 2a·k ≈ 35. Ratios of hyperbolic functions are
//! rewritten in exponential form past [`LARGE_ARGUMENT`] so that neither
//! overflow nor cancellation between `cosh` and `sinh` eats the result.

/// Threshold past which the exponential forms are used.
pub const LARGE_ARGUMENT: f64 = 30.0;

/// `cosh(p) / cosh(q)`.
pub fn cosh_ratio(p: f64, q: f64) -> f64 {
    let (p, q) = (p.abs(), q.abs());
    if p.max(q) > LARGE_ARGUMENT {
        (p - q).exp() * (1.0 + (-2.0 * p).exp()) / (1.0 + (-2.0 * q).exp())
    } else {
        p.cosh() / q.cosh()
    }
}

/// `sinh(p) / sinh(q)` for `q > 0`.
pub fn sinh_ratio(p: f64, q: f64) -> f64 {
    debug_assert!(q > 0.0);
    if p.abs().max(q) > LARGE_ARGUMENT {
        let pa = p.abs();
        p.signum() * (pa - q).exp() * (1.0 - (-2.0 * pa).exp()) / (1.0 - (-2.0 * q).exp())
    } else {
        p.sinh() / q.sinh()
    }
}

/// `sinh(p) / cosh(q)`.
pub fn sinh_cosh_ratio(p: f64, q: f64) -> f64 {
    let q = q.abs();
    if p.abs().max(q) > LARGE_ARGUMENT {
        let pa = p.abs();
        p.signum() * (pa - q).exp() * (1.0 - (-2.0 * pa).exp()) / (1.0 + (-2.0 * q).exp())
    } else {
        p.sinh() / q.cosh()
    }
}

/// `sinh(u) · sinh(v) / sinh(w)` for `w > 0`.
pub fn sinh_product_ratio(u: f64, v: f64, w: f64) -> f64 {
    debug_assert!(w > 0.0);
    if u.abs().max(v.abs()).max(w) > LARGE_ARGUMENT {
        let (ua, va) = (u.abs(), v.abs());
        let sign = u.signum() * v.signum();
        if ua == 0.0 || va == 0.0 {
            return 0.0;
        }
        sign * 0.5
            * (ua + va - w).exp()
            * (1.0 - (-2.0 * ua).exp())
            * (1.0 - (-2.0 * va).exp())
            / (1.0 - (-2.0 * w).exp())
    } else {
        u.sinh() * v.sinh() / w.sinh()
    }
}

/// `f(u) · g(v) / sinh(w)` for `w > 0`, where `f` is sinh and `g` is sinh or
/// cosh. Evaluated through logarithms so no factor overflows on its own.
pub fn hyperbolic_product_ratio(u: f64, v: f64, v_is_cosh: bool, w: f64) -> f64 {
    debug_assert!(w > 0.0);
    if u == 0.0 || (!v_is_cosh && v == 0.0) {
        return 0.0;
    }
    fn ln_sinh(z: f64) -> f64 {
        z + (-(-2.0 * z).exp_m1()).ln() - std::f64::consts::LN_2
    }
    fn ln_cosh(z: f64) -> f64 {
        z + (-2.0 * z).exp().ln_1p() - std::f64::consts::LN_2
    }
    let (ua, va) = (u.abs(), v.abs());
    let ln_g = if v_is_cosh { ln_cosh(va) } else { ln_sinh(va) };
    let sign = u.signum() * if v_is_cosh { 1.0 } else { v.signum() };
    sign * (ln_sinh(ua) + ln_g - ln_sinh(w)).exp()
}

/// `sinh(z) − cosh(z)`, which is exactly `−exp(−z)`.
pub fn sinh_minus_cosh(z: f64) -> f64 {
    -(-z).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn ratios_match_naive_below_threshold() {
        for &(p, q) in &[(0.0_f64, 1.0_f64), (3.5, 17.5), (-12.0, 17.5), (29.0, 29.9)] {
            assert!(rel(cosh_ratio(p, q), p.cosh() / q.cosh()) < 1e-14);
            if p != 0.0 {
                assert!(rel(sinh_cosh_ratio(p, q), p.sinh() / q.cosh()) < 1e-14);
            }
        }
    }

    #[test]
    fn ratios_are_continuous_across_threshold() {
        // same quantity evaluated on both sides of the switch
        let q = LARGE_ARGUMENT + 1e-9;
        let below = 20.0_f64.cosh() / (LARGE_ARGUMENT - 1e-9).cosh();
        assert!(rel(cosh_ratio(20.0, q), below) < 1e-8);
        let w = 35.0_f64;
        let naive = 3.0_f64.sinh() * 31.0_f64.sinh() / w.sinh();
        assert!(rel(sinh_product_ratio(3.0, 31.0, w), naive) < 1e-13);
        assert!(rel(sinh_product_ratio(-3.0, 31.0, w), -naive) < 1e-13);
    }

    #[test]
    fn huge_arguments_do_not_overflow() {
        let r = cosh_ratio(800.0, 801.0);
        assert!(rel(r, (-1.0_f64).exp()) < 1e-14);
        let s = sinh_product_ratio(700.0, 700.0, 1400.0);
        assert!(rel(s, 0.5) < 1e-14);
        assert!(sinh_cosh_ratio(-900.0, 900.0) < -0.99);
    }

    #[test]
    fn product_ratio_matches_naive() {
        for &(u, v, w) in &[(-5.5_f64, 21.0_f64, 35.0_f64), (3.0, -2.0, 17.5), (0.1, 0.2, 0.3)] {
            let s = u.sinh() * v.sinh() / w.sinh();
            let c = u.sinh() * v.cosh() / w.sinh();
            assert!(rel(hyperbolic_product_ratio(u, v, false, w), s) < 1e-13);
            assert!(rel(hyperbolic_product_ratio(u, v, true, w), c) < 1e-13);
        }
        assert_eq!(hyperbolic_product_ratio(0.0, 3.0, true, 1.0), 0.0);
        assert!(hyperbolic_product_ratio(-400.0, 500.0, true, 800.0).is_finite());
    }

    #[test]
    fn sinh_minus_cosh_is_exact() {
        for &z in &[0.0_f64, 1.0, 17.5, 35.0] {
            let naive = z.sinh() - z.cosh();
            assert!((sinh_minus_cosh(z) - naive).abs() <= 1e-15 * z.cosh());
        }
        assert!(sinh_minus_cosh(40.0) < 0.0 && sinh_minus_cosh(40.0) > -1e-17);
    }
}
