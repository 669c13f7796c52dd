//! Constant-curvature (kappa-stereographic) geometry with learnable
//! curvature, reverse-mode differentiation, Riemannian optimizers and a
//! graph distortion-embedding pipeline.
//!
//! The model unifies the open ball (kappa < 0), flat space (kappa = 0) and
//! the stereographic sphere (kappa > 0) in one parametrization whose scalar
//! kernels are differentiable in the curvature itself, including straight
//! through zero. That makes the curvature sign a trainable quantity: graph
//! embeddings can start flat and drift hyperbolic or spherical as the data
//! demands.
//!
//! Module map:
//! - [`kappa`]: the four curvature-parametric scalar kernels with Taylor
//!   branches and exact partials.
//! - [`manifold`]: Mobius addition, gyration, exp map, parallel transport,
//!   distances, hyperplane scores, domain projection, product manifolds.
//! - [`autodiff`]: a flat reverse-mode tape over a fixed primitive set, the
//!   manifold ops composed on it, and a finite-difference harness.
//! - [`optim`]: Riemannian SGD with momentum and the curvature-update
//!   strategies (joint in both orders, alternating, tangent-space
//!   reparametrization, Euclidean warmstart).
//! - [`graph`] / [`embed`]: edge-list ingestion, all-pairs shortest paths,
//!   the average relative distortion loss and its training loop.
//! - [`selfcheck`]: sampled verification suites shared by tests and the CLI.

pub mod autodiff;
pub mod embed;
pub mod error;
pub mod graph;
pub mod kappa;
pub mod manifold;
pub mod optim;
pub mod rng;
pub mod selfcheck;

pub use error::{GeometryError, GraphError, TrainError};
pub use kappa::{arcsin_k, arctan_k, eval_with_partials, sin_k, tan_k, KappaFn, ScalarEval};
pub use manifold::{Curvature, Factor, Hyperplane, ProductManifold, Stereographic};
pub use optim::{OptimConfig, Strategy};
