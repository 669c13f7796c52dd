//! Manifold operations composed from tape primitives.
//!
//! These mirror [`crate::manifold::Stereographic`] but run on [`Tape`] nodes,
//! so a single backward pass yields gradients with respect to both point
//! coordinates and the curvature leaf. Domain violations (poles, singular
//! Mobius denominators, inverse-kernel ranges) surface at record time.

use super::{Tape, Var};
use crate::error::GeometryError;
use crate::kappa::KappaFn;
use crate::manifold::SINGULARITY_TOL;

/// Conformal factor `2 / (1 + k ||x||^2)` as a tape node.
pub fn conformal_factor(t: &mut Tape, x: Var, k: Var) -> Result<Var, GeometryError> {
    let xx = t.dot(x, x);
    let kxx = t.mul(k, xx);
    let den = t.affine_const(kxx, 1.0, 1.0);
    if t.value(den) <= 0.0 {
        return Err(GeometryError::Domain {
            func: "conformal_factor",
            detail: "point outside the ball".to_string(),
        });
    }
    let r = t.recip(den);
    Ok(t.affine_const(r, 2.0, 0.0))
}

/// Mobius addition `x (+) y` with curvature node `k`.
pub fn mobius_add(t: &mut Tape, x: Var, y: Var, k: Var) -> Result<Var, GeometryError> {
    let xy = t.dot(x, y);
    let xx = t.dot(x, x);
    let yy = t.dot(y, y);
    let kxy = t.mul(k, xy);
    let kxx = t.mul(k, xx);
    let kyy = t.mul(k, yy);
    let one_m2 = t.affine_const(kxy, -2.0, 1.0);
    let ca = t.sub(one_m2, kyy);
    let cb = t.affine_const(kxx, 1.0, 1.0);
    let prod = t.mul(kxx, kyy);
    let den = t.add(one_m2, prod);
    if t.value(den).abs() < SINGULARITY_TOL {
        return Err(GeometryError::Singularity {
            denom: t.value(den),
        });
    }
    let rden = t.recip(den);
    let sx = t.scale(x, ca);
    let sy = t.scale(y, cb);
    let num = t.add(sx, sy);
    Ok(t.scale(num, rden))
}

/// Gyration `gyr[u, v] w`.
pub fn gyration(t: &mut Tape, u: Var, v: Var, w: Var, k: Var) -> Result<Var, GeometryError> {
    let uv = mobius_add(t, u, v, k)?;
    let vw = mobius_add(t, v, w, k)?;
    let inner = mobius_add(t, u, vw, k)?;
    let neg_uv = t.affine_const(uv, -1.0, 0.0);
    mobius_add(t, neg_uv, inner, k)
}

/// Exponential map at `x`; returns `x` itself for a zero tangent.
pub fn exp_map(t: &mut Tape, x: Var, u: Var, k: Var) -> Result<Var, GeometryError> {
    let un = t.norm2(u);
    if t.value(un) == 0.0 {
        return Ok(x);
    }
    let lam = conformal_factor(t, x, k)?;
    let lu = t.mul(lam, un);
    let arg = t.affine_const(lu, 0.5, 0.0);
    let tk = t.kappa_fn(KappaFn::TanK, arg, k)?;
    let run = t.recip(un);
    let coef = t.mul(tk, run);
    let su = t.scale(u, coef);
    mobius_add(t, x, su, k)
}

/// Exponential map at the origin; the identity map at `kappa = 0`. Mirrors
/// the plain op's boundary margin for negative curvature. When tanh
/// saturates, the magnitude is replaced by `(1 - eps_b) / sqrt(-kappa)`
/// built from `tan_k` at a huge argument: tanh evaluates to exactly 1 there,
/// so the node's value is the projection radius and its kappa-partial is the
/// radius derivative. Dropping that partial instead would make saturated
/// states absorbing (no restoring force on kappa).
pub fn exp_map_origin(t: &mut Tape, u: Var, k: Var) -> Result<Var, GeometryError> {
    let un = t.norm2(u);
    if t.value(un) == 0.0 {
        return Ok(u);
    }
    let kv = t.value(k);
    let tk = t.kappa_fn(KappaFn::TanK, un, k)?;
    let cap = if kv < 0.0 {
        (1.0 - crate::manifold::BOUNDARY_EPS) / (-kv).sqrt()
    } else {
        f64::INFINITY
    };
    let mag = if t.value(tk) <= cap {
        tk
    } else if kv < -crate::kappa::SWITCH_THRESHOLD {
        let big = t.lift(1e9);
        let radius = t.kappa_fn(KappaFn::TanK, big, k)?;
        t.affine_const(radius, 1.0 - crate::manifold::BOUNDARY_EPS, 0.0)
    } else {
        // inside the Taylor zone the radius exceeds 3e2; reaching it is
        // already degenerate and the restoring gradient is negligible
        t.affine_const(tk, 0.0, cap)
    };
    let run = t.recip(un);
    let coef = t.mul(mag, run);
    Ok(t.scale(u, coef))
}

/// Parallel transport of `v` from `x` to `y`.
pub fn parallel_transport(
    t: &mut Tape,
    x: Var,
    y: Var,
    v: Var,
    k: Var,
) -> Result<Var, GeometryError> {
    let neg_x = t.affine_const(x, -1.0, 0.0);
    let g = gyration(t, y, neg_x, v, k)?;
    let lx = conformal_factor(t, x, k)?;
    let ly = conformal_factor(t, y, k)?;
    let rly = t.recip(ly);
    let ratio = t.mul(lx, rly);
    Ok(t.scale(g, ratio))
}

/// Geodesic distance `2 arctan_k(||(-x) (+) y||)`.
pub fn distance(t: &mut Tape, x: Var, y: Var, k: Var) -> Result<Var, GeometryError> {
    let neg_x = t.affine_const(x, -1.0, 0.0);
    let delta = mobius_add(t, neg_x, y, k)?;
    let n = t.norm2(delta);
    let a = t.kappa_fn(KappaFn::ArcTanK, n, k)?;
    Ok(t.affine_const(a, 2.0, 0.0))
}

/// Gromov product at reference `r`.
pub fn gromov_product(
    t: &mut Tape,
    x: Var,
    y: Var,
    r: Var,
    k: Var,
) -> Result<Var, GeometryError> {
    let dxr = distance(t, x, r, k)?;
    let dyr = distance(t, y, r, k)?;
    let dxy = distance(t, x, y, k)?;
    let s1 = t.mul(dxr, dxr);
    let s2 = t.mul(dyr, dyr);
    let s3 = t.mul(dxy, dxy);
    let sum = t.add(s1, s2);
    let diff = t.sub(sum, s3);
    Ok(t.affine_const(diff, 0.5, 0.0))
}

/// Distance from `x` to the hyperplane through `p` with tangent normal `a`.
/// `signed = false` applies the absolute value of the score.
pub fn hyperplane_distance(
    t: &mut Tape,
    x: Var,
    normal: Var,
    base: Var,
    k: Var,
    signed: bool,
) -> Result<Var, GeometryError> {
    let neg_p = t.affine_const(base, -1.0, 0.0);
    let m = mobius_add(t, neg_p, x, k)?;
    let ip = t.dot(m, normal);
    let mut num = t.affine_const(ip, 2.0, 0.0);
    if !signed {
        num = t.abs(num);
    }
    let mm = t.dot(m, m);
    let kmm = t.mul(k, mm);
    let c = t.affine_const(kmm, 1.0, 1.0);
    let an = t.norm2(normal);
    let den = t.mul(c, an);
    let rden = t.recip(den);
    let arg = t.mul(num, rden);
    t.kappa_fn(KappaFn::ArcSinK, arg, k)
}

/// l2 combination of per-factor distances; one factor returns the plain
/// distance node so the value matches the non-product path exactly.
pub fn product_distance(
    t: &mut Tape,
    xs: &[Var],
    ys: &[Var],
    ks: &[Var],
) -> Result<Var, GeometryError> {
    assert_eq!(xs.len(), ys.len());
    assert_eq!(xs.len(), ks.len());
    if xs.len() == 1 {
        return distance(t, xs[0], ys[0], ks[0]);
    }
    let mut parts = Vec::with_capacity(xs.len());
    for i in 0..xs.len() {
        parts.push(distance(t, xs[i], ys[i], ks[i])?);
    }
    let packed = t.pack(&parts);
    Ok(t.norm2(packed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::finite_diff_check;
    use crate::manifold::Stereographic;

    #[test]
    fn tape_values_match_plain_ops() {
        let x = [0.2, -0.1, 0.3];
        let y = [-0.15, 0.25, 0.05];
        for kappa in [-1.0, -0.1, 0.0, 0.1, 1.0] {
            let m = Stereographic::new(kappa);
            let mut t = Tape::new();
            let xv = t.lift_vec(&x);
            let yv = t.lift_vec(&y);
            let kv = t.lift(kappa);

            let add = mobius_add(&mut t, xv, yv, kv).unwrap();
            let plain = m.mobius_add(&x, &y).unwrap();
            for (a, b) in t.value_vec(add).iter().zip(&plain) {
                assert!((a - b).abs() < 1e-12, "mobius kappa={kappa}");
            }

            let d = distance(&mut t, xv, yv, kv).unwrap();
            assert!(
                (t.value(d) - m.distance(&x, &y).unwrap()).abs() < 1e-12,
                "distance kappa={kappa}"
            );

            let lam = conformal_factor(&mut t, xv, kv).unwrap();
            assert!((t.value(lam) - m.conformal_factor(&x).unwrap()).abs() < 1e-14);

            let e = exp_map(&mut t, xv, yv, kv).unwrap();
            let plain = m.exp_map(&x, &y).unwrap();
            for (a, b) in t.value_vec(e).iter().zip(&plain) {
                assert!((a - b).abs() < 1e-12, "exp kappa={kappa}");
            }
        }
    }

    #[test]
    fn distance_kappa_gradient_at_zero_matches_finite_difference() {
        let x = [0.2, -0.1];
        let y = [-0.3, 0.4];
        let leaves: Vec<f64> = [0.0].to_vec();
        let mut t = Tape::new();
        let xv = t.lift_vec(&x);
        let yv = t.lift_vec(&y);
        let kv = t.lift(0.0);
        let d = distance(&mut t, xv, yv, kv).unwrap();
        let g = t.backward(d);
        let ad = [g.scalar(kv)];
        let f = |leaf: &[f64]| {
            let mut t = Tape::new();
            let xv = t.lift_vec(&x);
            let yv = t.lift_vec(&y);
            let kv = t.lift(leaf[0]);
            let d = distance(&mut t, xv, yv, kv)?;
            Ok(t.value(d))
        };
        let worst = finite_diff_check(f, &leaves, &ad).unwrap();
        assert!(worst < 1e-5, "d(distance)/dkappa at 0: rel err {worst}");
    }

    #[test]
    fn kappa_zero_reduction_is_exact_on_tape() {
        let x = [0.4, -0.2];
        let y = [0.1, 0.7];
        let mut t = Tape::new();
        let xv = t.lift_vec(&x);
        let yv = t.lift_vec(&y);
        let kv = t.lift(0.0);
        let s = mobius_add(&mut t, xv, yv, kv).unwrap();
        assert_eq!(t.value_vec(s), &[x[0] + y[0], x[1] + y[1]]);
        let u = exp_map_origin(&mut t, yv, kv).unwrap();
        assert_eq!(t.value_vec(u), &y);
    }

    #[test]
    fn product_distance_single_factor_equals_distance() {
        let mut t = Tape::new();
        let x = t.lift_vec(&[0.1, 0.2]);
        let y = t.lift_vec(&[-0.2, 0.3]);
        let k = t.lift(-0.5);
        let d1 = product_distance(&mut t, &[x], &[y], &[k]).unwrap();
        let d2 = distance(&mut t, x, y, k).unwrap();
        assert_eq!(t.value(d1), t.value(d2));
    }

    #[test]
    fn distance_gradient_bounded_near_coincidence() {
        // separations down to 1e-9 must yield finite gradients
        for sep in [1e-3, 1e-6, 1e-9] {
            let mut t = Tape::new();
            let x = t.lift_vec(&[0.2, 0.1]);
            let y = t.lift_vec(&[0.2 + sep, 0.1]);
            let k = t.lift(-1.0);
            let d = distance(&mut t, x, y, k).unwrap();
            let g = t.backward(d);
            for v in [x, y] {
                for c in g.vec(v) {
                    assert!(c.is_finite(), "sep {sep}: gradient {c}");
                }
            }
            assert!(g.scalar(k).is_finite());
        }
    }

    #[test]
    fn hyperplane_score_sign() {
        let mut t = Tape::new();
        let x = t.lift_vec(&[0.3, 0.0]);
        let a = t.lift_vec(&[1.0, 0.0]);
        let p = t.lift_vec(&[0.0, 0.0]);
        let k = t.lift(-1.0);
        let s = hyperplane_distance(&mut t, x, a, p, k, true).unwrap();
        assert!(t.value(s) > 0.0);
        let x2 = t.lift_vec(&[-0.3, 0.0]);
        let s2 = hyperplane_distance(&mut t, x2, a, p, k, true).unwrap();
        assert!(t.value(s2) < 0.0);
        let u2 = hyperplane_distance(&mut t, x2, a, p, k, false).unwrap();
        assert_eq!(t.value(u2), -t.value(s2));
    }
}
