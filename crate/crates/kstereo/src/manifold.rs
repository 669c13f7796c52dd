//! Vector operations of the constant-curvature stereographic model.
//!
//! For curvature `kappa` the model is the open ball of radius
//! `1/sqrt(-kappa)` when `kappa < 0` and all of R^n when `kappa >= 0`, with
//! conformal factor `lambda(x) = 2 / (1 + kappa ||x||^2)`. Mobius addition is
//! the gyrogroup operation replacing `+`; every op below reduces exactly to
//! its Euclidean counterpart at `kappa = 0`.

use crate::error::GeometryError;
use crate::kappa::{arcsin_k, arctan_k, tan_k};

/// Margin kept between points and the ball boundary by [`Stereographic::project_to_domain`].
pub const BOUNDARY_EPS: f64 = 1e-5;

/// Mobius denominators smaller than this are treated as singular.
pub const SINGULARITY_TOL: f64 = 1e-15;

/// A learnable sectional curvature with its gradient slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curvature {
    pub value: f64,
    pub grad: f64,
    pub frozen: bool,
}

impl Curvature {
    pub fn new(value: f64) -> Self {
        Curvature {
            value,
            grad: 0.0,
            frozen: false,
        }
    }

    pub fn frozen(value: f64) -> Self {
        Curvature {
            value,
            grad: 0.0,
            frozen: true,
        }
    }
}

/// One constant-curvature factor of a product manifold.
#[derive(Debug, Clone)]
pub struct Factor {
    pub dim: usize,
    pub curvature: Curvature,
}

impl Factor {
    pub fn new(dim: usize, curvature: Curvature) -> Self {
        assert!(dim >= 1, "factor dimension must be >= 1");
        Factor { dim, curvature }
    }

    pub fn space(&self) -> Stereographic {
        Stereographic {
            kappa: self.curvature.value,
        }
    }
}

/// Ordered product of constant-curvature factors.
#[derive(Debug, Clone)]
pub struct ProductManifold {
    pub factors: Vec<Factor>,
}

impl ProductManifold {
    pub fn new(factors: Vec<Factor>) -> Self {
        assert!(!factors.is_empty(), "product manifold needs >= 1 factor");
        ProductManifold { factors }
    }

    pub fn ambient_dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim).sum()
    }

    /// l2 combination of per-factor distances; a single factor is returned
    /// verbatim so it equals [`Stereographic::distance`] bit for bit.
    pub fn product_distance(
        &self,
        x: &[Vec<f64>],
        y: &[Vec<f64>],
    ) -> Result<f64, GeometryError> {
        assert_eq!(x.len(), self.factors.len());
        assert_eq!(y.len(), self.factors.len());
        if self.factors.len() == 1 {
            return self.factors[0].space().distance(&x[0], &y[0]);
        }
        let mut sum = 0.0;
        for (i, f) in self.factors.iter().enumerate() {
            let d = f.space().distance(&x[i], &y[i])?;
            sum += d * d;
        }
        Ok(sum.sqrt())
    }
}

/// A geodesic hyperplane through `base` with tangent normal `normal`.
#[derive(Debug, Clone)]
pub struct Hyperplane {
    pub normal: Vec<f64>,
    pub base: Vec<f64>,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// A single constant-curvature stereographic factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stereographic {
    pub kappa: f64,
}

impl Stereographic {
    pub fn new(kappa: f64) -> Self {
        Stereographic { kappa }
    }

    /// Ball radius for negative curvature, infinite otherwise.
    pub fn ball_radius(&self) -> f64 {
        if self.kappa < 0.0 {
            1.0 / (-self.kappa).sqrt()
        } else {
            f64::INFINITY
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.kappa >= 0.0 || norm(x) < self.ball_radius()
    }

    /// Conformal factor `lambda(x) = 2 / (1 + kappa ||x||^2)`.
    pub fn conformal_factor(&self, x: &[f64]) -> Result<f64, GeometryError> {
        let den = 1.0 + self.kappa * dot(x, x);
        if den <= 0.0 {
            return Err(GeometryError::Domain {
                func: "conformal_factor",
                detail: format!("point norm {} outside the ball", norm(x)),
            });
        }
        Ok(2.0 / den)
    }

    /// Mobius addition `x (+) y`.
    pub fn mobius_add(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>, GeometryError> {
        debug_assert_eq!(x.len(), y.len());
        let k = self.kappa;
        let xy = dot(x, y);
        let xx = dot(x, x);
        let yy = dot(y, y);
        let den = 1.0 - 2.0 * k * xy + k * k * xx * yy;
        if den.abs() < SINGULARITY_TOL {
            return Err(GeometryError::Singularity { denom: den });
        }
        let ca = (1.0 - 2.0 * k * xy - k * yy) / den;
        let cb = (1.0 + k * xx) / den;
        let mut out: Vec<f64> = x
            .iter()
            .zip(y)
            .map(|(&xi, &yi)| ca * xi + cb * yi)
            .collect();
        if k < 0.0 {
            self.project_in_place(&mut out);
        }
        Ok(out)
    }

    /// Gyration operator `gyr[u, v] w`; an orthogonal map for any curvature,
    /// the identity at `kappa = 0`.
    pub fn gyration(&self, u: &[f64], v: &[f64], w: &[f64]) -> Result<Vec<f64>, GeometryError> {
        if self.kappa == 0.0 {
            return Ok(w.to_vec());
        }
        let uv = self.mobius_add(u, v)?;
        let vw = self.mobius_add(v, w)?;
        let inner = self.mobius_add(u, &vw)?;
        let neg_uv: Vec<f64> = uv.iter().map(|c| -c).collect();
        self.mobius_add(&neg_uv, &inner)
    }

    /// Exponential map at `x` of the tangent vector `u`, where the tangent
    /// norm is the Riemannian one `lambda(x) ||u||`.
    pub fn exp_map(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>, GeometryError> {
        let un = norm(u);
        if un == 0.0 {
            return Ok(x.to_vec());
        }
        let lam = self.conformal_factor(x)?;
        let coef = tan_k(lam * un / 2.0, self.kappa)? / un;
        let scaled: Vec<f64> = u.iter().map(|c| c * coef).collect();
        self.mobius_add(x, &scaled)
    }

    /// Exponential map at the origin; the identity at `kappa = 0`. For
    /// negative curvature the image keeps the same boundary margin as
    /// [`Stereographic::project_to_domain`], so a tanh that saturates in
    /// floating point cannot round a point onto the boundary itself.
    pub fn exp_map_origin(&self, u: &[f64]) -> Result<Vec<f64>, GeometryError> {
        let un = norm(u);
        if un == 0.0 {
            return Ok(u.to_vec());
        }
        let mut mag = tan_k(un, self.kappa)?;
        if self.kappa < 0.0 {
            mag = mag.min((1.0 - BOUNDARY_EPS) * self.ball_radius());
        }
        let coef = mag / un;
        Ok(u.iter().map(|c| c * coef).collect())
    }

    /// Parallel transport of `v` from `x` to `y`:
    /// `gyr[y, -x] v * lambda(x) / lambda(y)`.
    pub fn parallel_transport(
        &self,
        x: &[f64],
        y: &[f64],
        v: &[f64],
    ) -> Result<Vec<f64>, GeometryError> {
        let neg_x: Vec<f64> = x.iter().map(|c| -c).collect();
        let g = self.gyration(y, &neg_x, v)?;
        let ratio = self.conformal_factor(x)? / self.conformal_factor(y)?;
        Ok(g.iter().map(|c| c * ratio).collect())
    }

    /// Geodesic distance `2 arctan_k(||(-x) (+) y||)`.
    pub fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64, GeometryError> {
        let neg_x: Vec<f64> = x.iter().map(|c| -c).collect();
        let delta = self.mobius_add(&neg_x, y)?;
        Ok(2.0 * arctan_k(norm(&delta), self.kappa)?)
    }

    /// Gromov product `(d(x,r)^2 + d(y,r)^2 - d(x,y)^2) / 2` at reference `r`.
    pub fn gromov_product(
        &self,
        x: &[f64],
        y: &[f64],
        r: &[f64],
    ) -> Result<f64, GeometryError> {
        let dxr = self.distance(x, r)?;
        let dyr = self.distance(y, r)?;
        let dxy = self.distance(x, y)?;
        Ok((dxr * dxr + dyr * dyr - dxy * dxy) / 2.0)
    }

    fn hyperplane_argument(
        &self,
        x: &[f64],
        h: &Hyperplane,
    ) -> Result<f64, GeometryError> {
        let an = norm(&h.normal);
        if an == 0.0 {
            return Err(GeometryError::Domain {
                func: "hyperplane_distance",
                detail: "hyperplane normal must be nonzero".to_string(),
            });
        }
        let neg_p: Vec<f64> = h.base.iter().map(|c| -c).collect();
        let m = self.mobius_add(&neg_p, x)?;
        let den = (1.0 + self.kappa * dot(&m, &m)) * an;
        Ok(2.0 * dot(&m, &h.normal) / den)
    }

    /// Distance from `x` to the geodesic hyperplane `h` (non-negative).
    pub fn hyperplane_distance(&self, x: &[f64], h: &Hyperplane) -> Result<f64, GeometryError> {
        let arg = self.hyperplane_argument(x, h)?;
        arcsin_k(arg.abs(), self.kappa)
    }

    /// Signed variant of [`Stereographic::hyperplane_distance`], used as a
    /// classification score; the sign tells which side of the hyperplane `x`
    /// falls on.
    pub fn hyperplane_distance_signed(
        &self,
        x: &[f64],
        h: &Hyperplane,
    ) -> Result<f64, GeometryError> {
        let arg = self.hyperplane_argument(x, h)?;
        arcsin_k(arg, self.kappa)
    }

    /// Pull points that drifted onto the boundary back inside the ball.
    pub fn project_to_domain(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        self.project_in_place(&mut out);
        out
    }

    pub fn project_in_place(&self, x: &mut [f64]) {
        if self.kappa >= 0.0 {
            return;
        }
        let max_norm = (1.0 - BOUNDARY_EPS) * self.ball_radius();
        let n = norm(x);
        if n < max_norm {
            return;
        }
        let scale = max_norm / n;
        for c in x.iter_mut() {
            *c *= scale;
        }
    }
}
