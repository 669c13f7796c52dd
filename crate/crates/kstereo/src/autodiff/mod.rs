//! Reverse-mode differentiation over a fixed primitive set.
//!
//! The tape is a flat arena: node metadata lives in one `Vec`, all values in
//! a single `f64` buffer, adjoints in a parallel buffer. Recording an op
//! computes its value immediately; `backward` replays the records once in
//! reverse. The embedding loss rebuilds its tape every iteration, so
//! [`Tape::reset`] keeps the allocations around.
//!
//! Every manifold operation is composed from these primitives (see
//! [`geometry`]); no composite op has a hand-written adjoint. Curvature
//! enters only through the four scalar kernels, whose exact partials are
//! cached on the tape at record time, so gradients stay correct straight
//! through `kappa = 0`.

pub mod geometry;

use crate::error::GeometryError;
use crate::kappa::{eval_with_partials, KappaFn};

/// Handle to a tape node. Only valid for the tape that created it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Leaf,
    Add,
    Sub,
    Mul,
    Scale,
    AffineConst,
    Dot,
    Norm2,
    Recip,
    Abs,
    Pack,
    Kappa(KappaFn),
}

#[derive(Clone, Copy)]
struct Rec {
    kind: Kind,
    a: u32,
    b: u32,
    off: u32,
    len: u32,
    l0: f64,
    l1: f64,
}

/// Append-only record of primitive operations.
#[derive(Default)]
pub struct Tape {
    recs: Vec<Rec>,
    vals: Vec<f64>,
    adj: Vec<f64>,
    pack_inputs: Vec<u32>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    /// Discard all nodes but keep buffer capacity.
    pub fn reset(&mut self) {
        self.recs.clear();
        self.vals.clear();
        self.pack_inputs.clear();
    }

    pub fn len(&self) -> usize {
        self.recs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recs.is_empty()
    }

    fn push(&mut self, kind: Kind, a: u32, b: u32, len: usize, l0: f64, l1: f64) -> Var {
        let off = self.vals.len() as u32;
        self.recs.push(Rec {
            kind,
            a,
            b,
            off,
            len: len as u32,
            l0,
            l1,
        });
        Var(self.recs.len() as u32 - 1)
    }

    fn slot(&self, v: Var) -> (usize, usize) {
        let r = &self.recs[v.0 as usize];
        (r.off as usize, r.len as usize)
    }

    /// Value of a scalar node.
    pub fn value(&self, v: Var) -> f64 {
        let (off, len) = self.slot(v);
        debug_assert_eq!(len, 1, "value() on a vector node");
        self.vals[off]
    }

    /// Value slice of a vector node.
    pub fn value_vec(&self, v: Var) -> &[f64] {
        let (off, len) = self.slot(v);
        &self.vals[off..off + len]
    }

    pub fn lift(&mut self, value: f64) -> Var {
        let v = self.push(Kind::Leaf, 0, 0, 1, 0.0, 0.0);
        self.vals.push(value);
        v
    }

    pub fn lift_vec(&mut self, value: &[f64]) -> Var {
        let v = self.push(Kind::Leaf, 0, 0, value.len(), 0.0, 0.0);
        self.vals.extend_from_slice(value);
        v
    }

    /// Elementwise `a + b` (operands of equal length).
    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (ao, al) = self.slot(a);
        let (bo, bl) = self.slot(b);
        debug_assert_eq!(al, bl);
        let v = self.push(Kind::Add, a.0, b.0, al, 0.0, 0.0);
        for i in 0..al {
            self.vals.push(self.vals[ao + i] + self.vals[bo + i]);
        }
        v
    }

    /// Elementwise `a - b`.
    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let (ao, al) = self.slot(a);
        let (bo, bl) = self.slot(b);
        debug_assert_eq!(al, bl);
        let v = self.push(Kind::Sub, a.0, b.0, al, 0.0, 0.0);
        for i in 0..al {
            self.vals.push(self.vals[ao + i] - self.vals[bo + i]);
        }
        v
    }

    /// Elementwise `a * b` (scalars are length-1 vectors).
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (ao, al) = self.slot(a);
        let (bo, bl) = self.slot(b);
        debug_assert_eq!(al, bl);
        let v = self.push(Kind::Mul, a.0, b.0, al, 0.0, 0.0);
        for i in 0..al {
            self.vals.push(self.vals[ao + i] * self.vals[bo + i]);
        }
        v
    }

    /// Vector `a` scaled by scalar node `s`.
    pub fn scale(&mut self, a: Var, s: Var) -> Var {
        let (ao, al) = self.slot(a);
        let (so, sl) = self.slot(s);
        debug_assert_eq!(sl, 1);
        let sv = self.vals[so];
        let v = self.push(Kind::Scale, a.0, s.0, al, 0.0, 0.0);
        for i in 0..al {
            self.vals.push(self.vals[ao + i] * sv);
        }
        v
    }

    /// Elementwise `c0 * a + c1` with the constants cached as locals.
    pub fn affine_const(&mut self, a: Var, c0: f64, c1: f64) -> Var {
        let (ao, al) = self.slot(a);
        let v = self.push(Kind::AffineConst, a.0, 0, al, c0, c1);
        for i in 0..al {
            self.vals.push(c0 * self.vals[ao + i] + c1);
        }
        v
    }

    /// Inner product of two equal-length vectors.
    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        let (ao, al) = self.slot(a);
        let (bo, bl) = self.slot(b);
        debug_assert_eq!(al, bl);
        let mut acc = 0.0;
        for i in 0..al {
            acc += self.vals[ao + i] * self.vals[bo + i];
        }
        let v = self.push(Kind::Dot, a.0, b.0, 1, 0.0, 0.0);
        self.vals.push(acc);
        v
    }

    /// Euclidean norm of a vector node.
    pub fn norm2(&mut self, a: Var) -> Var {
        let (ao, al) = self.slot(a);
        let mut acc = 0.0;
        for i in 0..al {
            acc += self.vals[ao + i] * self.vals[ao + i];
        }
        let v = self.push(Kind::Norm2, a.0, 0, 1, 0.0, 0.0);
        self.vals.push(acc.sqrt());
        v
    }

    /// Scalar reciprocal.
    pub fn recip(&mut self, a: Var) -> Var {
        let (ao, al) = self.slot(a);
        debug_assert_eq!(al, 1);
        let val = 1.0 / self.vals[ao];
        let v = self.push(Kind::Recip, a.0, 0, 1, 0.0, 0.0);
        self.vals.push(val);
        v
    }

    /// Scalar absolute value (subgradient 0 at the kink).
    pub fn abs(&mut self, a: Var) -> Var {
        let (ao, al) = self.slot(a);
        debug_assert_eq!(al, 1);
        let val = self.vals[ao].abs();
        let v = self.push(Kind::Abs, a.0, 0, 1, 0.0, 0.0);
        self.vals.push(val);
        v
    }

    /// Gather scalar nodes into one vector node.
    pub fn pack(&mut self, parts: &[Var]) -> Var {
        let start = self.pack_inputs.len() as u32;
        for p in parts {
            debug_assert_eq!(self.slot(*p).1, 1);
            self.pack_inputs.push(p.0);
        }
        let v = self.push(Kind::Pack, start, parts.len() as u32, parts.len(), 0.0, 0.0);
        for p in parts {
            let (po, _) = self.slot(*p);
            self.vals.push(self.vals[po]);
        }
        v
    }

    /// One of the four curvature kernels applied to scalar nodes `x`, `k`.
    /// The exact branch partials are cached as locals; domain violations
    /// surface here, at record time.
    pub fn kappa_fn(&mut self, f: KappaFn, x: Var, k: Var) -> Result<Var, GeometryError> {
        let xv = self.value(x);
        let kv = self.value(k);
        let e = eval_with_partials(f, xv, kv)?;
        let v = self.push(Kind::Kappa(f), x.0, k.0, 1, e.d_dx, e.d_dkappa);
        self.vals.push(e.value);
        Ok(v)
    }

    /// Reverse accumulation from a scalar loss. Deterministic for a fixed
    /// tape: one visit per node, in strict reverse record order.
    pub fn backward(&mut self, loss: Var) -> Gradients<'_> {
        let (loff, llen) = self.slot(loss);
        assert_eq!(llen, 1, "backward needs a scalar loss");
        self.adj.clear();
        self.adj.resize(self.vals.len(), 0.0);
        self.adj[loff] = 1.0;

        for idx in (0..self.recs.len()).rev() {
            let r = self.recs[idx];
            let off = r.off as usize;
            let len = r.len as usize;
            match r.kind {
                Kind::Leaf => {}
                Kind::Add => {
                    let (ao, _) = self.slot(Var(r.a));
                    let (bo, _) = self.slot(Var(r.b));
                    for i in 0..len {
                        let g = self.adj[off + i];
                        self.adj[ao + i] += g;
                        self.adj[bo + i] += g;
                    }
                }
                Kind::Sub => {
                    let (ao, _) = self.slot(Var(r.a));
                    let (bo, _) = self.slot(Var(r.b));
                    for i in 0..len {
                        let g = self.adj[off + i];
                        self.adj[ao + i] += g;
                        self.adj[bo + i] -= g;
                    }
                }
                Kind::Mul => {
                    let (ao, _) = self.slot(Var(r.a));
                    let (bo, _) = self.slot(Var(r.b));
                    for i in 0..len {
                        let g = self.adj[off + i];
                        self.adj[ao + i] += g * self.vals[bo + i];
                        self.adj[bo + i] += g * self.vals[ao + i];
                    }
                }
                Kind::Scale => {
                    let (ao, _) = self.slot(Var(r.a));
                    let (so, _) = self.slot(Var(r.b));
                    let s = self.vals[so];
                    let mut acc = 0.0;
                    for i in 0..len {
                        let g = self.adj[off + i];
                        self.adj[ao + i] += g * s;
                        acc += g * self.vals[ao + i];
                    }
                    self.adj[so] += acc;
                }
                Kind::AffineConst => {
                    let (ao, _) = self.slot(Var(r.a));
                    for i in 0..len {
                        self.adj[ao + i] += self.adj[off + i] * r.l0;
                    }
                }
                Kind::Dot => {
                    let (ao, al) = self.slot(Var(r.a));
                    let (bo, _) = self.slot(Var(r.b));
                    let g = self.adj[off];
                    for i in 0..al {
                        self.adj[ao + i] += g * self.vals[bo + i];
                        self.adj[bo + i] += g * self.vals[ao + i];
                    }
                }
                Kind::Norm2 => {
                    let out = self.vals[off];
                    if out > 1e-12 {
                        let (ao, al) = self.slot(Var(r.a));
                        let c = self.adj[off] / out;
                        for i in 0..al {
                            self.adj[ao + i] += c * self.vals[ao + i];
                        }
                    }
                }
                Kind::Recip => {
                    let (ao, _) = self.slot(Var(r.a));
                    let out = self.vals[off];
                    self.adj[ao] -= self.adj[off] * out * out;
                }
                Kind::Abs => {
                    let (ao, _) = self.slot(Var(r.a));
                    let s = self.vals[ao];
                    if s != 0.0 {
                        self.adj[ao] += self.adj[off] * s.signum();
                    }
                }
                Kind::Pack => {
                    for i in 0..len {
                        let input = self.pack_inputs[r.a as usize + i];
                        let (io, _) = self.slot(Var(input));
                        self.adj[io] += self.adj[off + i];
                    }
                }
                Kind::Kappa(_) => {
                    let (xo, _) = self.slot(Var(r.a));
                    let (ko, _) = self.slot(Var(r.b));
                    let g = self.adj[off];
                    self.adj[xo] += g * r.l0;
                    self.adj[ko] += g * r.l1;
                }
            }
        }
        Gradients { tape: self }
    }
}

/// Read-only view of the adjoints produced by [`Tape::backward`].
pub struct Gradients<'t> {
    tape: &'t Tape,
}

impl Gradients<'_> {
    pub fn scalar(&self, v: Var) -> f64 {
        let (off, len) = self.tape.slot(v);
        debug_assert_eq!(len, 1);
        self.tape.adj[off]
    }

    pub fn vec(&self, v: Var) -> &[f64] {
        let (off, len) = self.tape.slot(v);
        &self.tape.adj[off..off + len]
    }
}

/// Central-difference verification of reverse-mode gradients.
///
/// `f` re-evaluates the scalar function at a perturbed flat leaf vector;
/// `ad_grad` is the gradient `backward` produced for the same leaves. Per
/// coordinate the base step is `1e-6 * max(1, |leaf|)`, shrunk by 10x (up to
/// 3 retries) when a perturbation leaves the function's domain. A single
/// step cannot serve every regime — partials that vanish near kappa = 0
/// drown in f64 rounding at small h, while stiff kappa-curvature truncates
/// at large h — so each coordinate is scored at the best rung of an
/// h-ladder. A systematically wrong gradient fails at every rung. Returns
/// the worst relative error, denominators floored at 1e-8.
pub fn finite_diff_check<F>(
    f: F,
    leaves: &[f64],
    ad_grad: &[f64],
) -> Result<f64, GeometryError>
where
    F: Fn(&[f64]) -> Result<f64, GeometryError>,
{
    assert_eq!(leaves.len(), ad_grad.len());
    let mut worst: f64 = 0.0;
    let mut x = leaves.to_vec();
    for i in 0..leaves.len() {
        let h0 = 1e-6 * leaves[i].abs().max(1.0);
        let mut best_rel: Option<f64> = None;
        let mut last_err = None;
        let mut prev_fd: Option<f64> = None;
        let score = |fd: f64| {
            let denom = ad_grad[i].abs().max(fd.abs()).max(1e-8);
            (ad_grad[i] - fd).abs() / denom
        };
        'ladder: for rung in 0..7 {
            let mut h = h0 * 10f64.powi(rung);
            for _shrink in 0..4 {
                x[i] = leaves[i] + h;
                let fp = f(&x);
                x[i] = leaves[i] - h;
                let fm = f(&x);
                x[i] = leaves[i];
                match (fp, fm) {
                    (Ok(p), Ok(m)) => {
                        let fd = (p - m) / (2.0 * h);
                        let mut rel = score(fd);
                        // Richardson combination of adjacent rungs removes
                        // the h^2 truncation term while keeping the larger
                        // rung's lower rounding noise
                        if let Some(prev) = prev_fd {
                            rel = rel.min(score((100.0 * prev - fd) / 99.0));
                        }
                        prev_fd = Some(fd);
                        best_rel = Some(best_rel.map_or(rel, |b: f64| b.min(rel)));
                        if rel <= 1e-6 {
                            break 'ladder;
                        }
                        break;
                    }
                    (Err(e), _) | (_, Err(e)) => {
                        last_err = Some(e);
                        h *= 0.1;
                        prev_fd = None;
                    }
                }
            }
        }
        match best_rel {
            Some(rel) => worst = worst.max(rel),
            None => return Err(last_err.expect("ladder ran")),
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaf_adjoint_is_one() {
        let mut t = Tape::new();
        let x = t.lift(3.0);
        let g = t.backward(x);
        assert_eq!(g.scalar(x), 1.0);
    }

    #[test]
    fn lifts_are_distinct_nodes() {
        let mut t = Tape::new();
        let a = t.lift(2.0);
        let b = t.lift(2.0);
        assert_ne!(a, b);
        let s = t.add(a, b);
        let g = t.backward(s);
        assert_eq!(g.scalar(a), 1.0);
        assert_eq!(g.scalar(b), 1.0);
    }

    #[test]
    fn vector_leaf_has_per_component_slots() {
        let mut t = Tape::new();
        let x = t.lift_vec(&[1.0, 2.0, 3.0]);
        let n = t.dot(x, x);
        let g = t.backward(n);
        assert_eq!(g.vec(x), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn constant_loss_gives_zero_adjoints() {
        let mut t = Tape::new();
        let x = t.lift(5.0);
        let c = t.lift(7.0);
        let g = t.backward(c);
        assert_eq!(g.scalar(x), 0.0);
    }

    #[test]
    fn norm2_adjoint_is_unit_direction() {
        let mut t = Tape::new();
        let x = t.lift_vec(&[3.0, 4.0]);
        let n = t.norm2(x);
        assert_eq!(t.value(n), 5.0);
        let g = t.backward(n);
        for (got, want) in g.vec(x).iter().zip([0.6, 0.8]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn chain_of_primitives() {
        // f(x) = 1 / (2 x . x + 1), df/dx = -4x / (2 x.x + 1)^2
        let mut t = Tape::new();
        let x = t.lift_vec(&[0.5, -1.0]);
        let d = t.dot(x, x);
        let a = t.affine_const(d, 2.0, 1.0);
        let r = t.recip(a);
        let g = t.backward(r);
        let den = (2.0 * 1.25 + 1.0f64).powi(2);
        let want = [-4.0 * 0.5 / den, -4.0 * -1.0 / den];
        for (got, want) in g.vec(x).iter().zip(want) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn pack_scatters_adjoints() {
        let mut t = Tape::new();
        let a = t.lift(1.0);
        let b = t.lift(2.0);
        let v = t.pack(&[a, b]);
        let n = t.dot(v, v);
        let g = t.backward(n);
        assert_eq!(g.scalar(a), 2.0);
        assert_eq!(g.scalar(b), 4.0);
    }

    #[test]
    fn kappa_node_uses_cached_partials() {
        let mut t = Tape::new();
        let x = t.lift(0.5);
        let k = t.lift(0.0);
        let y = t.kappa_fn(KappaFn::TanK, x, k).unwrap();
        assert_eq!(t.value(y), 0.5);
        let g = t.backward(y);
        assert_eq!(g.scalar(x), 1.0);
        assert!((g.scalar(k) - 0.125 / 3.0).abs() < 1e-17);
    }

    #[test]
    fn finite_diff_on_linear_function_is_exact() {
        let f = |x: &[f64]| Ok(3.0 * x[0] - 2.0 * x[1] + 0.5);
        let worst = finite_diff_check(f, &[1.0, 2.0], &[3.0, -2.0]).unwrap();
        assert!(worst <= 1e-10, "linear fd error {worst}");
    }

    #[test]
    fn finite_diff_detects_wrong_gradient() {
        let f = |x: &[f64]| Ok(x[0] * x[0]);
        let worst = finite_diff_check(f, &[3.0], &[5.9]).unwrap();
        assert!(worst > 1e-2);
    }

    #[test]
    fn backward_is_deterministic() {
        let run = || {
            let mut t = Tape::new();
            let x = t.lift_vec(&[0.3, 0.7, -0.2]);
            let k = t.lift(-0.4);
            let d = t.dot(x, x);
            let kd = t.mul(k, d);
            let a = t.affine_const(kd, 1.0, 1.0);
            let r = t.recip(a);
            let n = t.norm2(x);
            let tk = t.kappa_fn(KappaFn::ArcTanK, n, k).unwrap();
            let loss = t.mul(r, tk);
            let g = t.backward(loss);
            (g.vec(x).to_vec(), g.scalar(k))
        };
        let (g1, k1) = run();
        let (g2, k2) = run();
        assert_eq!(g1, g2);
        assert_eq!(k1.to_bits(), k2.to_bits());
    }

    #[test]
    fn reset_reuses_the_arena() {
        let mut t = Tape::new();
        let x = t.lift(2.0);
        let y = t.mul(x, x);
        let g = t.backward(y);
        assert_eq!(g.scalar(x), 4.0);
        t.reset();
        assert!(t.is_empty());
        let x = t.lift(3.0);
        let y = t.mul(x, x);
        let g = t.backward(y);
        assert_eq!(g.scalar(x), 6.0);
    }
}
