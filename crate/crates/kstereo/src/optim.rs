//! Riemannian SGD with momentum and the curvature-update strategies.
//!
//! Point parameters live on their factor and step along geodesics: the
//! Euclidean gradient is rescaled by the inverse metric (`1/lambda^2`),
//! folded into a momentum buffer, applied through the exponential map, and
//! the buffer is parallel-transported to the new base point. Curvatures are
//! plain scalars updated by momentum SGD, followed by re-projection of every
//! point on the factor (a kappa step can shrink the ball under them).
//!
//! Strategies differ only in which updates run on which iteration and in
//! which order; the tangent reparametrization instead stores unconstrained
//! vectors and pushes them through `exp_0` inside the loss, so plain SGD
//! applies to everything and no projection is ever needed.

use crate::error::GeometryError;
use crate::kappa::{POLE_TOL, SWITCH_THRESHOLD};
use crate::manifold::{Curvature, Factor, ProductManifold, Stereographic};

/// How curvature is optimized alongside the point parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Curvatures pinned to zero; plain (metric-scaled) SGD on points.
    EuclideanFixed,
    /// One backward pass per iteration; points step first, then kappa.
    JointParamsFirst,
    /// Same pass; kappa steps first, then points.
    JointKappaFirst,
    /// Even iterations update points, odd iterations update kappa.
    Alternating,
    /// Parameters stored as tangent vectors at the origin, mapped through
    /// `exp_0` in the forward pass; everything is plain SGD.
    TangentReparam,
    /// EuclideanFixed until `switch_iter`, JointParamsFirst afterwards.
    Warmstart { switch_iter: usize },
}

/// What a single iteration should update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepPlan {
    PointsOnly,
    KappaOnly,
    PointsThenKappa,
    KappaThenPoints,
    Tangent,
}

impl Strategy {
    pub fn plan(&self, iter: usize) -> StepPlan {
        match self {
            Strategy::EuclideanFixed => StepPlan::PointsOnly,
            Strategy::JointParamsFirst => StepPlan::PointsThenKappa,
            Strategy::JointKappaFirst => StepPlan::KappaThenPoints,
            Strategy::Alternating => {
                if iter.is_multiple_of(2) {
                    StepPlan::PointsOnly
                } else {
                    StepPlan::KappaOnly
                }
            }
            Strategy::TangentReparam => StepPlan::Tangent,
            Strategy::Warmstart { switch_iter } => {
                if iter < *switch_iter {
                    StepPlan::PointsOnly
                } else {
                    StepPlan::PointsThenKappa
                }
            }
        }
    }

    /// Whether parameters are stored as origin-tangent vectors.
    pub fn tangent_mode(&self) -> bool {
        matches!(self, Strategy::TangentReparam)
    }

    /// Whether curvatures must start at exactly zero.
    pub fn starts_at_zero_kappa(&self) -> bool {
        matches!(self, Strategy::EuclideanFixed | Strategy::Warmstart { .. })
    }
}

/// Optimizer hyperparameters.
#[derive(Debug, Clone)]
pub struct OptimConfig {
    pub lr_points: f64,
    pub lr_kappa: f64,
    pub momentum: f64,
    pub strategy: Strategy,
    pub seed: u64,
}

impl OptimConfig {
    /// Defaults: momentum 0.9, kappa learning rate a thousandth of the point
    /// rate. Curvature gradients of the distortion loss grow cubically with
    /// the distance scale, so a single scalar coupling every pair needs a
    /// far smaller step than the coordinates do.
    pub fn new(strategy: Strategy, lr_points: f64, seed: u64) -> Self {
        OptimConfig {
            lr_points,
            lr_kappa: lr_points / 1000.0,
            momentum: 0.9,
            strategy,
            seed,
        }
    }
}

/// One factor's parameters: its curvature and one vector per point. In
/// tangent mode the vectors are unconstrained `p~`; otherwise they are points
/// of the factor and satisfy the ball invariant.
#[derive(Debug, Clone)]
pub struct FactorParams {
    pub dim: usize,
    pub kappa: Curvature,
    pub vectors: Vec<Vec<f64>>,
}

/// Full parameter set of an embedding problem.
#[derive(Debug, Clone)]
pub struct Params {
    pub factors: Vec<FactorParams>,
    pub tangent_mode: bool,
}

impl Params {
    pub fn manifold(&self) -> ProductManifold {
        ProductManifold::new(
            self.factors
                .iter()
                .map(|f| Factor::new(f.dim, f.kappa))
                .collect(),
        )
    }

    pub fn point_count(&self) -> usize {
        self.factors.first().map_or(0, |f| f.vectors.len())
    }
}

/// Gradients for every parameter, same shape as [`Params`].
#[derive(Debug, Clone)]
pub struct GradSet {
    pub kappa: Vec<f64>,
    pub vectors: Vec<Vec<Vec<f64>>>,
}

impl GradSet {
    pub fn zeroed(params: &Params) -> Self {
        GradSet {
            kappa: vec![0.0; params.factors.len()],
            vectors: params
                .factors
                .iter()
                .map(|f| f.vectors.iter().map(|v| vec![0.0; v.len()]).collect())
                .collect(),
        }
    }
}

/// Momentum buffers. Point buffers are re-based by parallel transport every
/// step, so their base point is always the parameter's current value.
type ScratchSlots = Vec<Vec<(Vec<f64>, Vec<f64>)>>;

#[derive(Debug, Clone)]
pub struct ParamState {
    pub momentum: Vec<Vec<Vec<f64>>>,
    pub kappa_momentum: Vec<f64>,
    scratch: ScratchSlots,
}

impl ParamState {
    pub fn new(params: &Params) -> Self {
        let momentum: Vec<Vec<Vec<f64>>> = params
            .factors
            .iter()
            .map(|f| f.vectors.iter().map(|v| vec![0.0; v.len()]).collect())
            .collect();
        let scratch = params
            .factors
            .iter()
            .map(|f| {
                f.vectors
                    .iter()
                    .map(|v| (vec![0.0; v.len()], vec![0.0; v.len()]))
                    .collect()
            })
            .collect();
        ParamState {
            momentum,
            kappa_momentum: vec![0.0; params.factors.len()],
            scratch,
        }
    }
}

/// Euclidean-to-Riemannian gradient rescale `g / lambda(x)^2`.
pub fn riemannian_grad(
    euclid_grad: &[f64],
    x: &[f64],
    space: Stereographic,
) -> Result<Vec<f64>, GeometryError> {
    let lam = space.conformal_factor(x)?;
    let inv = 1.0 / (lam * lam);
    Ok(euclid_grad.iter().map(|g| g * inv).collect())
}

/// Momentum-SGD step of every point parameter along geodesics. Atomic: a
/// pole or domain error anywhere leaves params and momentum untouched.
pub fn step_points(
    params: &mut Params,
    grads: &GradSet,
    state: &mut ParamState,
    cfg: &OptimConfig,
) -> Result<(), GeometryError> {
    debug_assert!(!params.tangent_mode);
    let beta = cfg.momentum;
    // compute every candidate first, commit only if all succeed
    for (fi, f) in params.factors.iter().enumerate() {
        let space = f.space_at_current_kappa();
        for (pi, p) in f.vectors.iter().enumerate() {
            let lam = space.conformal_factor(p)?;
            let inv = 1.0 / (lam * lam);
            let m = &state.momentum[fi][pi];
            let g = &grads.vectors[fi][pi];
            let new_m: Vec<f64> = m
                .iter()
                .zip(g)
                .map(|(mi, gi)| beta * mi + gi * inv)
                .collect();
            let step: Vec<f64> = new_m.iter().map(|mi| -cfg.lr_points * mi).collect();
            let mut p_new = space.exp_map(p, &step)?;
            let m_new = space.parallel_transport(p, &p_new, &new_m)?;
            if space.kappa < 0.0 {
                space.project_in_place(&mut p_new);
            }
            let slot = &mut state.scratch[fi][pi];
            slot.0.copy_from_slice(&p_new);
            slot.1.copy_from_slice(&m_new);
        }
    }
    for (fi, f) in params.factors.iter_mut().enumerate() {
        for (pi, p) in f.vectors.iter_mut().enumerate() {
            let slot = &state.scratch[fi][pi];
            p.copy_from_slice(&slot.0);
            state.momentum[fi][pi].copy_from_slice(&slot.1);
        }
    }
    Ok(())
}

impl FactorParams {
    fn space_at_current_kappa(&self) -> Stereographic {
        Stereographic::new(self.kappa.value)
    }
}

/// Momentum-SGD step of every unfrozen curvature, then re-projection of the
/// factor's points into the (possibly smaller) new ball.
pub fn step_kappa(
    params: &mut Params,
    grads: &GradSet,
    state: &mut ParamState,
    cfg: &OptimConfig,
) {
    let beta = cfg.momentum;
    for (fi, f) in params.factors.iter_mut().enumerate() {
        if f.kappa.frozen || cfg.lr_kappa == 0.0 {
            continue;
        }
        let m = beta * state.kappa_momentum[fi] + grads.kappa[fi];
        state.kappa_momentum[fi] = m;
        f.kappa.value -= cfg.lr_kappa * m;
        f.kappa.grad = grads.kappa[fi];
        if !params.tangent_mode && f.kappa.value < 0.0 {
            let space = Stereographic::new(f.kappa.value);
            for p in f.vectors.iter_mut() {
                space.project_in_place(p);
            }
        }
    }
}

fn pole_risk(v: &[f64], kappa: f64) -> bool {
    if kappa <= SWITCH_THRESHOLD {
        return false;
    }
    let s = crate::manifold::norm(v) * kappa.sqrt();
    let m = ((s - std::f64::consts::FRAC_PI_2) / std::f64::consts::PI).round();
    (s - (std::f64::consts::FRAC_PI_2 + m * std::f64::consts::PI)).abs() <= POLE_TOL
}

/// Plain momentum-SGD on tangent vectors and curvatures. A candidate vector
/// that would land `exp_0` on a pole retries once with half the step, then
/// keeps the old value.
pub fn step_tangent(
    params: &mut Params,
    grads: &GradSet,
    state: &mut ParamState,
    cfg: &OptimConfig,
) {
    debug_assert!(params.tangent_mode);
    let beta = cfg.momentum;
    for (fi, f) in params.factors.iter_mut().enumerate() {
        if !f.kappa.frozen && cfg.lr_kappa > 0.0 {
            let m = beta * state.kappa_momentum[fi] + grads.kappa[fi];
            state.kappa_momentum[fi] = m;
            f.kappa.value -= cfg.lr_kappa * m;
            f.kappa.grad = grads.kappa[fi];
        }
        let kappa = f.kappa.value;
        for (pi, p) in f.vectors.iter_mut().enumerate() {
            let m = &mut state.momentum[fi][pi];
            for (mi, gi) in m.iter_mut().zip(&grads.vectors[fi][pi]) {
                *mi = beta * *mi + gi;
            }
            let mut lr = cfg.lr_points;
            for _attempt in 0..2 {
                let candidate: Vec<f64> =
                    p.iter().zip(m.iter()).map(|(pi, mi)| pi - lr * mi).collect();
                if !pole_risk(&candidate, kappa) {
                    p.copy_from_slice(&candidate);
                    break;
                }
                lr *= 0.5;
            }
        }
    }
}

/// Run the updates an iteration's plan calls for.
pub fn apply_step(
    plan: StepPlan,
    params: &mut Params,
    grads: &GradSet,
    state: &mut ParamState,
    cfg: &OptimConfig,
) -> Result<(), GeometryError> {
    match plan {
        StepPlan::PointsOnly => step_points(params, grads, state, cfg),
        StepPlan::KappaOnly => {
            step_kappa(params, grads, state, cfg);
            Ok(())
        }
        StepPlan::PointsThenKappa => {
            step_points(params, grads, state, cfg)?;
            step_kappa(params, grads, state, cfg);
            Ok(())
        }
        StepPlan::KappaThenPoints => {
            step_kappa(params, grads, state, cfg);
            step_points(params, grads, state, cfg)
        }
        StepPlan::Tangent => {
            step_tangent(params, grads, state, cfg);
            Ok(())
        }
    }
}
