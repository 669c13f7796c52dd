//! Graph distortion embedding.
//!
//! Nodes get one point per manifold factor; training minimizes the average
//! relative distortion between graph hop distances and manifold distances,
//!
//! ```text
//! D_avg = mean over pairs of (d_ij / d_M(v_i, v_j) - 1)^2
//! ```
//!
//! built on the tape so gradients reach both coordinates and curvatures.

use crate::autodiff::{geometry, Tape, Var};
use crate::error::{GeometryError, TrainError};
use crate::graph::{all_pairs_shortest_paths, DistanceMatrix, Graph};
use crate::manifold::{Curvature, ProductManifold, Stereographic};
use crate::optim::{apply_step, FactorParams, GradSet, OptimConfig, ParamState, Params};
use crate::rng::Rng;

/// Guard added to the embedded distance in the loss ratio denominator.
pub const EPS_DENOM: f64 = 1e-9;

/// Scale of the normal tangent initialization. The ratio loss needs initial
/// embedded distances on the order of the hop distances: a much tighter
/// cloud makes the first gradients ~ (d_ij / d_M)^2 / d_M, violent enough to
/// blast every point past its target and stall training on the d_M >> d_ij
/// plateau.
pub const SIGMA_INIT: f64 = 1.0;

/// Abort training after this many consecutive rejected steps.
const MAX_CONSECUTIVE_REJECTS: usize = 10;

/// Training hyperparameters.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_pairs: usize,
    pub eval_every: usize,
    pub sigma_init: f64,
    pub optim: OptimConfig,
}

impl TrainConfig {
    /// Defaults: 20000 iterations, batch of min(4096, all pairs), full-batch
    /// evaluation every 500 iterations.
    pub fn new(optim: OptimConfig) -> Self {
        TrainConfig {
            iterations: 20_000,
            batch_pairs: 4096,
            eval_every: 500,
            sigma_init: SIGMA_INIT,
            optim,
        }
    }
}

/// Final embedding: per factor, the curvature and one point per node.
#[derive(Debug, Clone)]
pub struct FactorEmbedding {
    pub dim: usize,
    pub kappa: f64,
    pub points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct EmbeddingState {
    pub factors: Vec<FactorEmbedding>,
}

impl EmbeddingState {
    pub fn node_count(&self) -> usize {
        self.factors.first().map_or(0, |f| f.points.len())
    }
}

/// Training output: final embedding, evaluation history as
/// `(iteration, full-batch D_avg)` pairs, and the final metric.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub state: EmbeddingState,
    pub history: Vec<(usize, f64)>,
    pub final_d_avg: f64,
    pub iterations_run: usize,
}

/// Draw initial parameters: per node per factor an i.i.d. normal tangent
/// vector of scale `sigma`, mapped through `exp_0` (kept as the raw tangent
/// vector in tangent mode). Deterministic in the rng state.
pub fn init_params(
    node_count: usize,
    manifold: &ProductManifold,
    tangent_mode: bool,
    sigma: f64,
    rng: &mut Rng,
) -> Result<Params, GeometryError> {
    let mut factors = Vec::with_capacity(manifold.factors.len());
    for f in &manifold.factors {
        factors.push(FactorParams {
            dim: f.dim,
            kappa: f.curvature,
            vectors: Vec::with_capacity(node_count),
        });
    }
    for _node in 0..node_count {
        for (fi, f) in manifold.factors.iter().enumerate() {
            let tangent: Vec<f64> = (0..f.dim).map(|_| sigma * rng.next_normal()).collect();
            let v = if tangent_mode {
                tangent
            } else {
                f.space().exp_map_origin(&tangent)?
            };
            factors[fi].vectors.push(v);
        }
    }
    Ok(Params {
        factors,
        tangent_mode,
    })
}

/// Convert parameters to explicit points (mapping tangents through `exp_0`).
pub fn params_to_state(params: &Params) -> Result<EmbeddingState, GeometryError> {
    let mut factors = Vec::with_capacity(params.factors.len());
    for f in &params.factors {
        let space = Stereographic::new(f.kappa.value);
        let mut points = Vec::with_capacity(f.vectors.len());
        for v in &f.vectors {
            points.push(if params.tangent_mode {
                space.exp_map_origin(v)?
            } else {
                v.clone()
            });
        }
        factors.push(FactorEmbedding {
            dim: f.dim,
            kappa: f.kappa.value,
            points,
        });
    }
    Ok(EmbeddingState { factors })
}

/// Parameter leaves lifted onto a tape: per-factor curvature nodes and
/// per-node per-factor point nodes (tangent parameters are already mapped
/// through `exp_0`, so `points[f][i]` is always a point of the factor).
pub struct LiftedParams {
    pub kappas: Vec<Var>,
    pub vectors: Vec<Vec<Var>>,
    pub points: Vec<Vec<Var>>,
}

/// Lift every parameter onto the tape.
pub fn lift_params(tape: &mut Tape, params: &Params) -> Result<LiftedParams, GeometryError> {
    let mut kappas = Vec::with_capacity(params.factors.len());
    let mut vectors = Vec::with_capacity(params.factors.len());
    let mut points = Vec::with_capacity(params.factors.len());
    for f in &params.factors {
        let k = tape.lift(f.kappa.value);
        kappas.push(k);
        let vs: Vec<Var> = f.vectors.iter().map(|v| tape.lift_vec(v)).collect();
        let ps = if params.tangent_mode {
            let mut mapped = Vec::with_capacity(vs.len());
            for &v in &vs {
                mapped.push(geometry::exp_map_origin(tape, v, k)?);
            }
            mapped
        } else {
            vs.clone()
        };
        vectors.push(vs);
        points.push(ps);
    }
    Ok(LiftedParams {
        kappas,
        vectors,
        points,
    })
}

/// Average relative distortion over the given node pairs, as a tape node.
pub fn d_avg_loss(
    tape: &mut Tape,
    lifted: &LiftedParams,
    dmat: &DistanceMatrix,
    pairs: &[(u32, u32)],
) -> Result<Var, GeometryError> {
    assert!(!pairs.is_empty(), "loss needs at least one pair");
    let nf = lifted.kappas.len();
    let mut xs: Vec<Var> = Vec::with_capacity(nf);
    let mut ys: Vec<Var> = Vec::with_capacity(nf);
    let mut acc: Option<Var> = None;
    for &(i, j) in pairs {
        debug_assert_ne!(i, j);
        xs.clear();
        ys.clear();
        for f in 0..nf {
            xs.push(lifted.points[f][i as usize]);
            ys.push(lifted.points[f][j as usize]);
        }
        let dm = geometry::product_distance(tape, &xs, &ys, &lifted.kappas)?;
        let den = tape.affine_const(dm, 1.0, EPS_DENOM);
        let rden = tape.recip(den);
        let term = tape.affine_const(rden, dmat.dist(i as usize, j as usize), -1.0);
        let sq = tape.mul(term, term);
        acc = Some(match acc {
            None => sq,
            Some(a) => tape.add(a, sq),
        });
    }
    Ok(tape.affine_const(acc.unwrap(), 1.0 / pairs.len() as f64, 0.0))
}

fn d_avg_plain(
    points: &[Vec<Vec<f64>>],
    kappas: &[f64],
    dmat: &DistanceMatrix,
) -> Result<f64, GeometryError> {
    let n = points.first().map_or(0, |f| f.len());
    if n < 2 {
        return Ok(0.0);
    }
    let spaces: Vec<Stereographic> = kappas.iter().map(|&k| Stereographic::new(k)).collect();
    let single = points.len() == 1;
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            let dm = if single {
                spaces[0].distance(&points[0][i], &points[0][j])?
            } else {
                let mut ss = 0.0;
                for (f, space) in spaces.iter().enumerate() {
                    let d = space.distance(&points[f][i], &points[f][j])?;
                    ss += d * d;
                }
                ss.sqrt()
            };
            let ratio = dmat.dist(i, j) / (dm + EPS_DENOM);
            sum += (ratio - 1.0) * (ratio - 1.0);
            count += 1;
        }
    }
    Ok(sum / count as f64)
}

/// Full-batch D_avg of an embedding. Pure and deterministic.
pub fn evaluate(state: &EmbeddingState, dmat: &DistanceMatrix) -> Result<f64, GeometryError> {
    let points: Vec<Vec<Vec<f64>>> = state.factors.iter().map(|f| f.points.clone()).collect();
    let kappas: Vec<f64> = state.factors.iter().map(|f| f.kappa).collect();
    d_avg_plain(&points, &kappas, dmat)
}

/// Full-batch D_avg straight from training parameters.
pub fn evaluate_params(params: &Params, dmat: &DistanceMatrix) -> Result<f64, GeometryError> {
    evaluate(&params_to_state(params)?, dmat)
}

/// Train embeddings for a connected graph (reduce to the largest component
/// first). See [`train_traced`] for a per-iteration hook.
pub fn train(
    graph: &Graph,
    manifold: &ProductManifold,
    cfg: &TrainConfig,
) -> Result<TrainResult, TrainError> {
    train_traced(graph, manifold, cfg, |_, _| {})
}

/// [`train`] with a callback invoked after every iteration.
pub fn train_traced(
    graph: &Graph,
    manifold: &ProductManifold,
    cfg: &TrainConfig,
    mut on_iter: impl FnMut(usize, &Params),
) -> Result<TrainResult, TrainError> {
    let n = graph.node_count();
    let dmat = all_pairs_shortest_paths(graph)?;
    let mut rng = Rng::new(cfg.optim.seed);

    // strategy-driven normalization of the starting curvatures
    let mut manifold = manifold.clone();
    if cfg.optim.strategy.starts_at_zero_kappa() {
        for f in &mut manifold.factors {
            f.curvature.value = 0.0;
            if cfg.optim.strategy == crate::optim::Strategy::EuclideanFixed {
                f.curvature = Curvature::frozen(0.0);
            }
        }
    }

    let tangent = cfg.optim.strategy.tangent_mode();
    let mut params = init_params(n, &manifold, tangent, cfg.sigma_init, &mut rng)?;
    let mut state = ParamState::new(&params);
    let mut grads = GradSet::zeroed(&params);

    let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n as u32 {
        for j in (i + 1)..n as u32 {
            pairs.push((i, j));
        }
    }
    let batch = cfg.batch_pairs.min(pairs.len()).max(1).min(pairs.len());

    let mut history = vec![(0usize, evaluate_params(&params, &dmat)?)];
    let mut tape = Tape::new();
    let mut rejects = 0usize;

    for iter in 0..cfg.iterations {
        rng.partial_shuffle(&mut pairs, batch);

        let step_result = (|| -> Result<(), GeometryError> {
            tape.reset();
            let lifted = lift_params(&mut tape, &params)?;
            let loss = d_avg_loss(&mut tape, &lifted, &dmat, &pairs[..batch])?;
            let g = tape.backward(loss);
            for (fi, f) in lifted.kappas.iter().enumerate() {
                grads.kappa[fi] = g.scalar(*f);
            }
            for (fi, fvars) in lifted.vectors.iter().enumerate() {
                for (pi, v) in fvars.iter().enumerate() {
                    grads.vectors[fi][pi].copy_from_slice(g.vec(*v));
                }
            }
            let plan = cfg.optim.strategy.plan(iter);
            apply_step(plan, &mut params, &grads, &mut state, &cfg.optim)
        })();

        match step_result {
            Ok(()) => rejects = 0,
            Err(e) => {
                rejects += 1;
                if rejects > MAX_CONSECUTIVE_REJECTS {
                    return Err(TrainError::RepeatedRejections {
                        iter,
                        rejected: rejects,
                        last: e,
                    });
                }
            }
        }

        if cfg.eval_every > 0 && (iter + 1) % cfg.eval_every == 0 {
            history.push((iter + 1, evaluate_params(&params, &dmat)?));
        }
        on_iter(iter, &params);
    }

    let final_d_avg = evaluate_params(&params, &dmat)?;
    if history.last().map(|h| h.0) != Some(cfg.iterations) {
        history.push((cfg.iterations, final_d_avg));
    }
    Ok(TrainResult {
        state: params_to_state(&params)?,
        history,
        final_d_avg,
        iterations_run: cfg.iterations,
    })
}
