//! Error types shared across the geometry, autodiff and training layers.

use thiserror::Error;

/// Numerical-domain failures raised by the curvature kernels and manifold ops.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    /// The argument of `tan_k` with positive curvature landed on a pole.
    #[error("tan_k pole: argument {arg} is within {tol} of pi/2 + m*pi (kappa = {kappa})")]
    Pole { arg: f64, kappa: f64, tol: f64 },

    /// Input outside the domain of the function (e.g. outside the ball,
    /// or outside the range of an inverse kernel).
    #[error("domain error in {func}: {detail}")]
    Domain { func: &'static str, detail: String },

    /// Mobius addition denominator vanished (antipodal configuration).
    #[error("mobius addition denominator {denom} below singularity threshold")]
    Singularity { denom: f64 },
}

/// Graph ingestion and shortest-path failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error("edge list produced an empty graph")]
    EmptyGraph,

    #[error("graph is disconnected: node {a} cannot reach node {b}")]
    Disconnected { a: usize, b: usize },
}

/// Training-loop failures.
#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),

    #[error(transparent)]
    Graph(#[from] GraphError),

    #[error("aborted at iteration {iter}: {rejected} consecutive optimizer steps rejected ({last})")]
    RepeatedRejections {
        iter: usize,
        rejected: usize,
        last: GeometryError,
    },
}
