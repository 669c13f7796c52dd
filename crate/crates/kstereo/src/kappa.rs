//! Curvature-parametric scalar kernels.
//!
//! The four kernels `tan_k`, `arctan_k`, `sin_k`, `arcsin_k` interpolate
//! between circular (kappa > 0) and hyperbolic (kappa < 0) trigonometry.
//! Near kappa = 0 the analytic forms `kappa^{-1/2} f(x sqrt(kappa))` lose all
//! significance in the kappa-derivative, so each kernel switches to a
//! degree-11 Taylor polynomial in `t = kappa * x^2` whenever
//! `|kappa| <= SWITCH_THRESHOLD`. The polynomial is a single expression valid
//! on both sides of zero, which is what makes the curvature gradient well
//! defined there.

use crate::error::GeometryError;

/// Branch switch point on `|kappa|`. Below this the analytic kernels suffer
/// catastrophic cancellation in d/dkappa while the degree-11 polynomial is
/// accurate to ~1e-28 for |x| <= 2.
pub const SWITCH_THRESHOLD: f64 = 1e-5;

/// Arguments of `tan` this close to `pi/2 + m*pi` are rejected as poles.
pub const POLE_TOL: f64 = 1e-12;

/// Which formula a kernel evaluation will use for a given curvature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchKind {
    /// `kappa > SWITCH_THRESHOLD`: circular functions.
    Positive,
    /// `|kappa| <= SWITCH_THRESHOLD`: shared Taylor polynomial.
    TaylorZero,
    /// `kappa < -SWITCH_THRESHOLD`: hyperbolic functions.
    Negative,
}

/// Branch decision together with the threshold it was made at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaBranch {
    pub kind: BranchKind,
    pub switch_threshold: f64,
}

impl KappaBranch {
    pub fn for_kappa(kappa: f64) -> Self {
        let kind = if kappa.abs() <= SWITCH_THRESHOLD {
            BranchKind::TaylorZero
        } else if kappa > 0.0 {
            BranchKind::Positive
        } else {
            BranchKind::Negative
        };
        KappaBranch {
            kind,
            switch_threshold: SWITCH_THRESHOLD,
        }
    }
}

/// The four kernels, used to select a function in [`eval_with_partials`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KappaFn {
    TanK,
    ArcTanK,
    SinK,
    ArcSinK,
}

/// Value and exact branch partials of a kernel evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarEval {
    pub value: f64,
    pub d_dx: f64,
    pub d_dkappa: f64,
}

// Taylor coefficients of P(t) where f(x, kappa) = x * P(kappa * x^2).
// tan:    P = 1 + t/3 + 2t^2/15 + 17t^3/315 + 62t^4/2835 + 1382t^5/155925
// arctan: P = 1 - t/3 + t^2/5 - t^3/7 + t^4/9 - t^5/11
// sin:    P = 1 - t/6 + t^2/120 - t^3/5040 + t^4/362880 - t^5/39916800
// arcsin: P = 1 + t/6 + 3t^2/40 + 5t^3/112 + 35t^4/1152 + 63t^5/2816
const TAN_P: [f64; 6] = [
    1.0,
    1.0 / 3.0,
    2.0 / 15.0,
    17.0 / 315.0,
    62.0 / 2835.0,
    1382.0 / 155925.0,
];
const ATAN_P: [f64; 6] = [
    1.0,
    -1.0 / 3.0,
    1.0 / 5.0,
    -1.0 / 7.0,
    1.0 / 9.0,
    -1.0 / 11.0,
];
const SIN_P: [f64; 6] = [
    1.0,
    -1.0 / 6.0,
    1.0 / 120.0,
    -1.0 / 5040.0,
    1.0 / 362880.0,
    -1.0 / 39916800.0,
];
const ASIN_P: [f64; 6] = [
    1.0,
    1.0 / 6.0,
    3.0 / 40.0,
    5.0 / 112.0,
    35.0 / 1152.0,
    63.0 / 2816.0,
];

// d/dx f = Q(t): differentiate x * P(kappa x^2) in x.
const TAN_DX: [f64; 6] = [
    1.0,
    1.0,
    2.0 / 3.0,
    17.0 / 45.0,
    62.0 / 315.0,
    1382.0 / 14175.0,
];
const ATAN_DX: [f64; 6] = [1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
const SIN_DX: [f64; 6] = [
    1.0,
    -1.0 / 2.0,
    1.0 / 24.0,
    -1.0 / 720.0,
    1.0 / 40320.0,
    -1.0 / 3628800.0,
];
const ASIN_DX: [f64; 6] = [
    1.0,
    1.0 / 2.0,
    3.0 / 8.0,
    5.0 / 16.0,
    35.0 / 128.0,
    63.0 / 256.0,
];

// d/dkappa f = x^3 * R(t): differentiate x * P(kappa x^2) in kappa.
const TAN_DK: [f64; 5] = [
    1.0 / 3.0,
    4.0 / 15.0,
    17.0 / 105.0,
    248.0 / 2835.0,
    1382.0 / 31185.0,
];
const ATAN_DK: [f64; 5] = [-1.0 / 3.0, 2.0 / 5.0, -3.0 / 7.0, 4.0 / 9.0, -5.0 / 11.0];
const SIN_DK: [f64; 5] = [
    -1.0 / 6.0,
    1.0 / 60.0,
    -1.0 / 1680.0,
    1.0 / 90720.0,
    -1.0 / 7983360.0,
];
const ASIN_DK: [f64; 5] = [
    1.0 / 6.0,
    3.0 / 20.0,
    15.0 / 112.0,
    35.0 / 288.0,
    315.0 / 2816.0,
];

fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

fn pole_distance(s: f64) -> f64 {
    let m = ((s - std::f64::consts::FRAC_PI_2) / std::f64::consts::PI).round();
    (s - (std::f64::consts::FRAC_PI_2 + m * std::f64::consts::PI)).abs()
}

fn check_tan_pole(x: f64, kappa: f64) -> Result<(), GeometryError> {
    let s = x * kappa.sqrt();
    if pole_distance(s) <= POLE_TOL {
        return Err(GeometryError::Pole {
            arg: s,
            kappa,
            tol: POLE_TOL,
        });
    }
    Ok(())
}

/// tan-like kernel: `kappa^{-1/2} tan(x sqrt(kappa))` for kappa > 0,
/// `|kappa|^{-1/2} tanh(x sqrt(|kappa|))` for kappa < 0, Taylor around 0.
pub fn tan_k(x: f64, kappa: f64) -> Result<f64, GeometryError> {
    match KappaBranch::for_kappa(kappa).kind {
        BranchKind::Positive => {
            check_tan_pole(x, kappa)?;
            let sk = kappa.sqrt();
            Ok((x * sk).tan() / sk)
        }
        BranchKind::TaylorZero => Ok(tan_k_taylor(x, kappa)),
        BranchKind::Negative => {
            let sk = (-kappa).sqrt();
            Ok((x * sk).tanh() / sk)
        }
    }
}

/// Inverse of [`tan_k`] on the principal branch.
pub fn arctan_k(x: f64, kappa: f64) -> Result<f64, GeometryError> {
    match KappaBranch::for_kappa(kappa).kind {
        BranchKind::Positive => {
            let sk = kappa.sqrt();
            Ok((x * sk).atan() / sk)
        }
        BranchKind::TaylorZero => Ok(arctan_k_taylor(x, kappa)),
        BranchKind::Negative => {
            let sk = (-kappa).sqrt();
            if (x * sk).abs() >= 1.0 {
                return Err(GeometryError::Domain {
                    func: "arctan_k",
                    detail: format!("|x| sqrt(|kappa|) = {} must be < 1", (x * sk).abs()),
                });
            }
            Ok((x * sk).atanh() / sk)
        }
    }
}

/// sin-like kernel.
pub fn sin_k(x: f64, kappa: f64) -> f64 {
    match KappaBranch::for_kappa(kappa).kind {
        BranchKind::Positive => {
            let sk = kappa.sqrt();
            (x * sk).sin() / sk
        }
        BranchKind::TaylorZero => sin_k_taylor(x, kappa),
        BranchKind::Negative => {
            let sk = (-kappa).sqrt();
            (x * sk).sinh() / sk
        }
    }
}

/// Inverse of [`sin_k`].
pub fn arcsin_k(x: f64, kappa: f64) -> Result<f64, GeometryError> {
    match KappaBranch::for_kappa(kappa).kind {
        BranchKind::Positive => {
            let sk = kappa.sqrt();
            if (x * sk).abs() > 1.0 {
                return Err(GeometryError::Domain {
                    func: "arcsin_k",
                    detail: format!("|x| sqrt(kappa) = {} must be <= 1", (x * sk).abs()),
                });
            }
            Ok((x * sk).asin() / sk)
        }
        BranchKind::TaylorZero => Ok(arcsin_k_taylor(x, kappa)),
        BranchKind::Negative => {
            let sk = (-kappa).sqrt();
            Ok((x * sk).asinh() / sk)
        }
    }
}

// Taylor-branch values, exposed crate-internally so the self-check suite can
// compare branches right at the switch threshold.

pub(crate) fn tan_k_taylor(x: f64, kappa: f64) -> f64 {
    x * horner(&TAN_P, kappa * x * x)
}

pub(crate) fn arctan_k_taylor(x: f64, kappa: f64) -> f64 {
    x * horner(&ATAN_P, kappa * x * x)
}

pub(crate) fn sin_k_taylor(x: f64, kappa: f64) -> f64 {
    x * horner(&SIN_P, kappa * x * x)
}

pub(crate) fn arcsin_k_taylor(x: f64, kappa: f64) -> f64 {
    x * horner(&ASIN_P, kappa * x * x)
}

pub(crate) fn analytic_value(f: KappaFn, x: f64, kappa: f64) -> Result<f64, GeometryError> {
    debug_assert!(kappa != 0.0);
    if kappa > 0.0 {
        let sk = kappa.sqrt();
        let s = x * sk;
        match f {
            KappaFn::TanK => {
                check_tan_pole(x, kappa)?;
                Ok(s.tan() / sk)
            }
            KappaFn::ArcTanK => Ok(s.atan() / sk),
            KappaFn::SinK => Ok(s.sin() / sk),
            KappaFn::ArcSinK => {
                if s.abs() > 1.0 {
                    return Err(GeometryError::Domain {
                        func: "arcsin_k",
                        detail: format!("|x| sqrt(kappa) = {} must be <= 1", s.abs()),
                    });
                }
                Ok(s.asin() / sk)
            }
        }
    } else {
        let sk = (-kappa).sqrt();
        let s = x * sk;
        match f {
            KappaFn::TanK => Ok(s.tanh() / sk),
            KappaFn::ArcTanK => {
                if s.abs() >= 1.0 {
                    return Err(GeometryError::Domain {
                        func: "arctan_k",
                        detail: format!("|x| sqrt(|kappa|) = {} must be < 1", s.abs()),
                    });
                }
                Ok(s.atanh() / sk)
            }
            KappaFn::SinK => Ok(s.sinh() / sk),
            KappaFn::ArcSinK => Ok(s.asinh() / sk),
        }
    }
}

pub(crate) fn taylor_value(f: KappaFn, x: f64, kappa: f64) -> f64 {
    match f {
        KappaFn::TanK => tan_k_taylor(x, kappa),
        KappaFn::ArcTanK => arctan_k_taylor(x, kappa),
        KappaFn::SinK => sin_k_taylor(x, kappa),
        KappaFn::ArcSinK => arcsin_k_taylor(x, kappa),
    }
}

/// Evaluate a kernel together with its exact branch partials in `x` and
/// `kappa`. On the Taylor branch the partials are those of the polynomial;
/// on the analytic branches they are closed forms. For every kernel the
/// analytic kappa-partial collapses to `(x * d_dx - value) / (2 kappa)`.
pub fn eval_with_partials(f: KappaFn, x: f64, kappa: f64) -> Result<ScalarEval, GeometryError> {
    let branch = KappaBranch::for_kappa(kappa).kind;
    if branch == BranchKind::TaylorZero {
        let t = kappa * x * x;
        let (p, dx, dk) = match f {
            KappaFn::TanK => (&TAN_P, &TAN_DX, &TAN_DK),
            KappaFn::ArcTanK => (&ATAN_P, &ATAN_DX, &ATAN_DK),
            KappaFn::SinK => (&SIN_P, &SIN_DX, &SIN_DK),
            KappaFn::ArcSinK => (&ASIN_P, &ASIN_DX, &ASIN_DK),
        };
        return Ok(ScalarEval {
            value: x * horner(p, t),
            d_dx: horner(dx, t),
            d_dkappa: x * x * x * horner(dk, t),
        });
    }

    let value = analytic_value(f, x, kappa)?;
    let d_dx = match f {
        KappaFn::TanK => 1.0 + kappa * value * value,
        KappaFn::ArcTanK => 1.0 / (1.0 + kappa * x * x),
        KappaFn::SinK => {
            if kappa > 0.0 {
                (x * kappa.sqrt()).cos()
            } else {
                (x * (-kappa).sqrt()).cosh()
            }
        }
        KappaFn::ArcSinK => {
            let w = 1.0 - kappa * x * x;
            if w <= 0.0 {
                return Err(GeometryError::Domain {
                    func: "arcsin_k",
                    detail: "derivative undefined at |x| sqrt(kappa) = 1".to_string(),
                });
            }
            1.0 / w.sqrt()
        }
    };
    let d_dkappa = (x * d_dx - value) / (2.0 * kappa);
    Ok(ScalarEval {
        value,
        d_dx,
        d_dkappa,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FRAC_PI_4: f64 = std::f64::consts::FRAC_PI_4;
    const FRAC_PI_2: f64 = std::f64::consts::FRAC_PI_2;

    #[test]
    fn tan_k_examples() {
        assert_eq!(tan_k(0.5, 0.0).unwrap(), 0.5);
        assert!((tan_k(FRAC_PI_4, 1.0).unwrap() - 1.0).abs() < 1e-15);
        // frozen reference: tanh(0.5) at extended precision
        assert!((tan_k(0.5, -1.0).unwrap() - 0.46211715726000974).abs() < 1e-16);
    }

    #[test]
    fn tan_k_pole_is_error() {
        let err = tan_k(FRAC_PI_2, 1.0).unwrap_err();
        assert!(matches!(err, GeometryError::Pole { .. }));
        // poles repeat with period pi
        assert!(tan_k(FRAC_PI_2 + std::f64::consts::PI, 1.0).is_err());
        // away from a pole is fine
        assert!(tan_k(FRAC_PI_2 - 1e-3, 1.0).is_ok());
    }

    #[test]
    fn arctan_k_examples() {
        assert_eq!(arctan_k(0.5, 0.0).unwrap(), 0.5);
        assert!((arctan_k(1.0, 1.0).unwrap() - FRAC_PI_4).abs() < 1e-15);
        // frozen reference: tanh(0.3) = 0.2913126124515909
        assert!((arctan_k(0.2913126124515909, -1.0).unwrap() - 0.3).abs() < 1e-10);
    }

    #[test]
    fn arctan_k_domain_error() {
        assert!(arctan_k(1.0, -1.0).is_err());
        assert!(arctan_k(1.5, -1.0).is_err());
        assert!(arctan_k(0.999, -1.0).is_ok());
    }

    #[test]
    fn sin_k_examples() {
        assert_eq!(sin_k(0.7, 0.0), 0.7);
        assert!((sin_k(FRAC_PI_2, 1.0) - 1.0).abs() < 1e-15);
        // frozen reference: sinh(0.5) = 0.5210953054937474
        assert!((sin_k(0.5, -1.0) - 0.5210953054937474).abs() < 1e-16);
    }

    #[test]
    fn arcsin_k_examples() {
        assert_eq!(arcsin_k(0.2, 0.0).unwrap(), 0.2);
        assert!((arcsin_k(1.0, 1.0).unwrap() - FRAC_PI_2).abs() < 1e-15);
        // frozen reference: sinh(0.4) = 0.4107523258028155
        assert!((arcsin_k(0.4107523258028155, -1.0).unwrap() - 0.4).abs() < 1e-10);
        assert!(arcsin_k(1.0 + 1e-9, 1.0).is_err());
    }

    #[test]
    fn branch_selection() {
        assert_eq!(
            KappaBranch::for_kappa(0.0).kind,
            BranchKind::TaylorZero
        );
        assert_eq!(
            KappaBranch::for_kappa(SWITCH_THRESHOLD).kind,
            BranchKind::TaylorZero
        );
        assert_eq!(
            KappaBranch::for_kappa(-SWITCH_THRESHOLD).kind,
            BranchKind::TaylorZero
        );
        assert_eq!(
            KappaBranch::for_kappa(SWITCH_THRESHOLD * 1.001).kind,
            BranchKind::Positive
        );
        assert_eq!(
            KappaBranch::for_kappa(-1.0).kind,
            BranchKind::Negative
        );
    }

    #[test]
    fn partials_at_zero_curvature() {
        // d/dkappa tan_k(x, 0) = x^3 / 3
        let e = eval_with_partials(KappaFn::TanK, 0.5, 0.0).unwrap();
        assert_eq!(e.value, 0.5);
        assert_eq!(e.d_dx, 1.0);
        assert!((e.d_dkappa - 0.5f64.powi(3) / 3.0).abs() < 1e-17);
    }

    #[test]
    fn partials_match_finite_differences() {
        // central differences in x and kappa, h = 1e-6
        let h = 1e-6;
        let cases = [
            (KappaFn::TanK, 0.3, -0.5),
            (KappaFn::TanK, 0.7, 0.8),
            (KappaFn::ArcTanK, 0.4, 0.9),
            (KappaFn::ArcTanK, 0.4, -0.9),
            (KappaFn::SinK, 0.3, -0.5),
            (KappaFn::SinK, 1.1, 0.6),
            (KappaFn::ArcSinK, 0.5, 0.7),
            (KappaFn::ArcSinK, 0.5, -0.7),
        ];
        for (f, x, k) in cases {
            let e = eval_with_partials(f, x, k).unwrap();
            let fd_x = (analytic_value(f, x + h, k).unwrap()
                - analytic_value(f, x - h, k).unwrap())
                / (2.0 * h);
            let fd_k = (analytic_value(f, x, k + h).unwrap()
                - analytic_value(f, x, k - h).unwrap())
                / (2.0 * h);
            assert!(
                (e.d_dx - fd_x).abs() / fd_x.abs().max(1e-8) < 1e-6,
                "{f:?} d_dx mismatch at ({x}, {k}): {} vs {}",
                e.d_dx,
                fd_x
            );
            assert!(
                (e.d_dkappa - fd_k).abs() / fd_k.abs().max(1e-8) < 1e-6,
                "{f:?} d_dkappa mismatch at ({x}, {k}): {} vs {}",
                e.d_dkappa,
                fd_k
            );
        }
    }

    #[test]
    fn taylor_partials_match_polynomial_differences() {
        // inside the Taylor zone the partials must be those of the polynomial
        let h = 1e-9;
        for f in [
            KappaFn::TanK,
            KappaFn::ArcTanK,
            KappaFn::SinK,
            KappaFn::ArcSinK,
        ] {
            let (x, k) = (0.8, 3e-6);
            let e = eval_with_partials(f, x, k).unwrap();
            let fd_x = (taylor_value(f, x + h, k) - taylor_value(f, x - h, k)) / (2.0 * h);
            assert!((e.d_dx - fd_x).abs() < 1e-6, "{f:?} taylor d_dx");
        }
    }

    #[test]
    fn inverse_round_trips() {
        for &k in &[-1.0, -0.1, 0.0, 0.1, 1.0] {
            for i in 0..21 {
                let x = -1.0 + 0.1 * i as f64;
                let t = tan_k(x, k).unwrap();
                assert!(
                    (arctan_k(t, k).unwrap() - x).abs() < 1e-10,
                    "tan round trip x={x} k={k}"
                );
                let s = sin_k(x, k);
                assert!(
                    (arcsin_k(s, k).unwrap() - x).abs() < 1e-10,
                    "sin round trip x={x} k={k}"
                );
            }
        }
    }

    #[test]
    fn smooth_interpolation_in_kappa() {
        // kappa -> tan_k(x, kappa) is monotone non-decreasing at fixed x in (0,1)
        for &x in &[0.25, 0.5, 0.9] {
            let mut prev = f64::NEG_INFINITY;
            for i in 0..=1000 {
                let k = -1.0 + 2.0 * i as f64 / 1000.0;
                let v = tan_k(x, k).unwrap();
                assert!(v >= prev - 1e-14, "non-monotone at x={x}, kappa={k}");
                prev = v;
            }
        }
    }
}
