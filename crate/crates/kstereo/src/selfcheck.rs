//! Built-in verification suites.
//!
//! Each suite samples its property and reports the worst observed error
//! against a fixed threshold. The CLI `selfcheck` subcommand runs them all;
//! the test suites assert on the same reports.

use crate::autodiff::{finite_diff_check, geometry, Tape, Var};
use crate::error::GeometryError;
use crate::graph::{all_pairs_shortest_paths, Graph};
use crate::kappa::{analytic_value, taylor_value, KappaFn, SWITCH_THRESHOLD};
use crate::manifold::{dot, norm, Stereographic};
use crate::rng::Rng;

/// Outcome of one verification suite.
#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: String,
    pub worst: f64,
    pub threshold: f64,
    pub passed: bool,
    pub detail: String,
}

impl SuiteReport {
    fn new(name: impl Into<String>, worst: f64, threshold: f64, detail: impl Into<String>) -> Self {
        SuiteReport {
            name: name.into(),
            worst,
            threshold,
            passed: worst <= threshold,
            detail: detail.into(),
        }
    }
}

/// Analytic and Taylor branches must agree at the switch threshold:
/// grid of 1000 x in [-2, 2] at kappa = +-SWITCH_THRESHOLD, all four kernels.
pub fn branch_continuity_suite() -> SuiteReport {
    let mut worst: f64 = 0.0;
    let fns = [
        KappaFn::TanK,
        KappaFn::ArcTanK,
        KappaFn::SinK,
        KappaFn::ArcSinK,
    ];
    for f in fns {
        for sign in [1.0, -1.0] {
            let k = sign * SWITCH_THRESHOLD;
            for i in 0..1000 {
                let x = -2.0 + 4.0 * i as f64 / 999.0;
                let a = match analytic_value(f, x, k) {
                    Ok(v) => v,
                    Err(_) => continue, // arctan_k domain shrinks for kappa < 0
                };
                let t = taylor_value(f, x, k);
                worst = worst.max((a - t).abs());
            }
        }
    }
    SuiteReport::new(
        "branch-continuity",
        worst,
        1e-9,
        "analytic vs Taylor at |kappa| = switch threshold, x in [-2, 2]",
    )
}

/// Signature of a Mobius addition implementation, so the suite can also be
/// run against deliberately broken variants in tests.
pub type MobiusAddFn<'a> = &'a dyn Fn(&[f64], &[f64], f64) -> Result<Vec<f64>, GeometryError>;

fn sample_in_ball(rng: &mut Rng, dim: usize, radius: f64) -> Vec<f64> {
    let bound = radius / (dim as f64).sqrt();
    (0..dim)
        .map(|_| bound * (2.0 * rng.next_f64() - 1.0))
        .collect()
}

/// Gyrogroup axioms for Mobius addition over random triples:
/// left identity, left inverse, gyroassociativity, left loop property.
pub fn gyrogroup_suite(samples_per_kappa: usize, seed: u64) -> SuiteReport {
    let add = |x: &[f64], y: &[f64], k: f64| Stereographic::new(k).mobius_add(x, y);
    gyrogroup_suite_with(&add, samples_per_kappa, seed)
}

pub fn gyrogroup_suite_with(
    add: MobiusAddFn<'_>,
    samples_per_kappa: usize,
    seed: u64,
) -> SuiteReport {
    let gyr = |u: &[f64], v: &[f64], w: &[f64], k: f64| -> Result<Vec<f64>, GeometryError> {
        let uv = add(u, v, k)?;
        let vw = add(v, w, k)?;
        let inner = add(u, &vw, k)?;
        let neg_uv: Vec<f64> = uv.iter().map(|c| -c).collect();
        add(&neg_uv, &inner, k)
    };
    let max_abs_diff = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };

    let mut rng = Rng::new(seed);
    let mut worst: f64 = 0.0;
    let dim = 3;
    for &kappa in &[-1.0, -0.1, 0.1, 1.0] {
        let radius = 0.9 / f64::sqrt(f64::abs(kappa));
        for _ in 0..samples_per_kappa {
            let u = sample_in_ball(&mut rng, dim, radius);
            let v = sample_in_ball(&mut rng, dim, radius);
            let w = sample_in_ball(&mut rng, dim, radius);
            let zero = vec![0.0; dim];

            let r = (|| -> Result<f64, GeometryError> {
                // left identity: 0 (+) x = x
                let li = add(&zero, &u, kappa)?;
                let mut e = max_abs_diff(&li, &u);
                // left inverse: (-x) (+) x = 0
                let neg: Vec<f64> = u.iter().map(|c| -c).collect();
                let inv = add(&neg, &u, kappa)?;
                e = e.max(max_abs_diff(&inv, &zero));
                // gyroassociativity: u (+) (v (+) w) = (u (+) v) (+) gyr[u,v]w
                let lhs = {
                    let vw = add(&v, &w, kappa)?;
                    add(&u, &vw, kappa)?
                };
                let rhs = {
                    let uv = add(&u, &v, kappa)?;
                    let g = gyr(&u, &v, &w, kappa)?;
                    add(&uv, &g, kappa)?
                };
                e = e.max(max_abs_diff(&lhs, &rhs));
                // left loop: gyr[u (+) v, v] w = gyr[u, v] w
                let uv = add(&u, &v, kappa)?;
                let g1 = gyr(&uv, &v, &w, kappa)?;
                let g2 = gyr(&u, &v, &w, kappa)?;
                e = e.max(max_abs_diff(&g1, &g2));
                // orthogonality: || gyr[u,v] w || = || w ||
                e = e.max((norm(&g2) - norm(&w)).abs());
                Ok(e)
            })()
            .unwrap_or(f64::INFINITY); // a broken (+) may blow up outright
            worst = worst.max(r);
        }
    }
    SuiteReport::new(
        "gyrogroup",
        worst,
        1e-8,
        format!("{samples_per_kappa} triples per kappa in {{-1, -0.1, 0.1, 1}}"),
    )
}

/// Geodesic-length and transport-isometry identities over random samples.
pub fn geometry_identities_suite(samples: usize, seed: u64) -> SuiteReport {
    let mut rng = Rng::new(seed);
    let mut worst: f64 = 0.0;
    let dim = 3;
    let kappas = [-1.0, -0.1, 0.1, 1.0];
    for i in 0..samples {
        let kappa = kappas[i % kappas.len()];
        let m = Stereographic::new(kappa);
        let radius = 0.6 / f64::sqrt(f64::abs(kappa));
        let x = sample_in_ball(&mut rng, dim, radius);
        let y = sample_in_ball(&mut rng, dim, radius);
        let u = sample_in_ball(&mut rng, dim, 0.2);
        let v = sample_in_ball(&mut rng, dim, 0.8);

        // d(x, exp_x(u)) = lambda(x) ||u||
        let lam_x = m.conformal_factor(&x).unwrap();
        let reach = m.exp_map(&x, &u).unwrap();
        let d = m.distance(&x, &reach).unwrap();
        worst = worst.max((d - lam_x * norm(&u)).abs());

        // lambda(y) ||P(v)|| = lambda(x) ||v||
        let t = m.parallel_transport(&x, &y, &v).unwrap();
        let lam_y = m.conformal_factor(&y).unwrap();
        worst = worst.max((lam_y * norm(&t) - lam_x * norm(&v)).abs());
    }
    SuiteReport::new(
        "geometry-identities",
        worst,
        1e-8,
        format!("geodesic length and transport isometry, {samples} samples"),
    )
}

/// Exactness of the kappa = 0 reductions, measured in units of 4 ulp of the
/// operand scale.
pub fn kappa_zero_reduction_suite(samples: usize, seed: u64) -> SuiteReport {
    let mut rng = Rng::new(seed);
    let m = Stereographic::new(0.0);
    let mut worst: f64 = 0.0;
    let dim = 3;
    let tol_of = |scale: f64| 4.0 * f64::EPSILON * scale.max(1.0);
    for _ in 0..samples {
        let x = sample_in_ball(&mut rng, dim, 0.8);
        let y = sample_in_ball(&mut rng, dim, 0.8);
        let v = sample_in_ball(&mut rng, dim, 1.5);

        // (+)_0 = +
        let s = m.mobius_add(&x, &y).unwrap();
        for i in 0..dim {
            worst = worst.max((s[i] - (x[i] + y[i])).abs() / tol_of(1.0));
        }
        // d_0 = 2 ||y - x||
        let diff: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
        let d = m.distance(&x, &y).unwrap();
        worst = worst.max((d - 2.0 * norm(&diff)).abs() / tol_of(1.0));
        // transport = identity
        let t = m.parallel_transport(&x, &y, &v).unwrap();
        for i in 0..dim {
            worst = worst.max((t[i] - v[i]).abs() / tol_of(1.0));
        }
        // exp at origin = identity
        let e = m.exp_map_origin(&v).unwrap();
        for i in 0..dim {
            worst = worst.max((e[i] - v[i]).abs() / tol_of(1.0));
        }
        // hyperplane distance = 2 euclidean point-plane distance
        let h = crate::manifold::Hyperplane {
            normal: sample_in_ball(&mut rng, dim, 1.0),
            base: sample_in_ball(&mut rng, dim, 0.5),
        };
        if norm(&h.normal) > 1e-3 {
            let hd = m.hyperplane_distance(&x, &h).unwrap();
            let dxp: Vec<f64> = x.iter().zip(&h.base).map(|(a, b)| a - b).collect();
            let eu = 2.0 * dot(&dxp, &h.normal).abs() / norm(&h.normal);
            worst = worst.max((hd - eu).abs() / tol_of(eu));
        }
    }
    SuiteReport::new(
        "kappa-zero-reductions",
        worst,
        1.0,
        format!("reductions exact to <= 4 ulp over {samples} samples"),
    )
}

const KAPPA_GRID: [f64; 7] = [-1.0, -0.1, -1e-7, 0.0, 1e-7, 0.1, 1.0];

type BuildFn = Box<dyn Fn(&mut Tape, &[Var]) -> Result<Var, GeometryError>>;

struct GradCase {
    name: &'static str,
    /// leaf block sizes, kappa blocks last
    blocks: Vec<usize>,
    values: Vec<f64>,
    build: BuildFn,
}

fn lift_blocks(tape: &mut Tape, blocks: &[usize], values: &[f64]) -> Vec<Var> {
    let mut vars = Vec::with_capacity(blocks.len());
    let mut off = 0;
    for &b in blocks {
        if b == 1 {
            vars.push(tape.lift(values[off]));
        } else {
            vars.push(tape.lift_vec(&values[off..off + b]));
        }
        off += b;
    }
    vars
}

fn run_grad_case(case: &GradCase) -> Result<f64, GeometryError> {
    let mut tape = Tape::new();
    let vars = lift_blocks(&mut tape, &case.blocks, &case.values);
    let loss = (case.build)(&mut tape, &vars)?;
    let g = tape.backward(loss);
    let mut flat = Vec::with_capacity(case.values.len());
    for (bi, &b) in case.blocks.iter().enumerate() {
        if b == 1 {
            flat.push(g.scalar(vars[bi]));
        } else {
            flat.extend_from_slice(g.vec(vars[bi]));
        }
    }
    let blocks = case.blocks.clone();
    let f = |leaves: &[f64]| -> Result<f64, GeometryError> {
        let mut tape = Tape::new();
        let vars = lift_blocks(&mut tape, &blocks, leaves);
        let loss = (case.build)(&mut tape, &vars)?;
        Ok(tape.value(loss))
    };
    finite_diff_check(f, &case.values, &flat)
}

// Sample radius per curvature. The floor keeps coordinates O(1) for the
// near-flat kappa values, which is the regime training actually visits;
// without it the Taylor-branch argument kappa*x^2 leaves its accurate range.
fn point_scale(kappa: f64) -> f64 {
    0.45 / f64::sqrt(f64::abs(kappa).max(0.01))
}

fn separated_points(
    rng: &mut Rng,
    count: usize,
    dim: usize,
    radius: f64,
    min_sep: f64,
) -> Vec<Vec<f64>> {
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(count);
    'outer: for _attempt in 0..1000 {
        let p = sample_in_ball(rng, dim, radius);
        for q in &pts {
            let d: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
            if d.sqrt() < min_sep {
                continue 'outer;
            }
        }
        pts.push(p);
        if pts.len() == count {
            break;
        }
    }
    assert_eq!(pts.len(), count, "separation sampling failed");
    pts
}

fn grad_cases_for(config_index: usize, rng: &mut Rng) -> Vec<GradCase> {
    let kappa = KAPPA_GRID[config_index % KAPPA_GRID.len()];
    let d = 3usize;
    let r = point_scale(kappa);
    let mut cases: Vec<GradCase> = Vec::new();

    let pts = separated_points(rng, 4, d, r, 0.05 * r);
    let (x, y, z) = (pts[0].clone(), pts[1].clone(), pts[2].clone());
    let w = sample_in_ball(rng, d, 1.0); // scalarization weight
    let tangent = sample_in_ball(rng, d, 0.15 * r.min(1.0));
    let carried = sample_in_ball(rng, d, 0.6);

    let mut push = |name: &'static str, blocks: Vec<usize>, values: Vec<f64>, build: BuildFn| {
        cases.push(GradCase {
            name,
            blocks,
            values,
            build,
        });
    };

    let flat = |vs: &[&[f64]]| -> Vec<f64> { vs.iter().flat_map(|v| v.iter().copied()).collect() };

    push(
        "conformal_factor",
        vec![d, 1],
        flat(&[&x, &[kappa]]),
        Box::new(|t, v| geometry::conformal_factor(t, v[0], v[1])),
    );
    push(
        "mobius_add",
        vec![d, d, d, 1],
        flat(&[&x, &y, &w, &[kappa]]),
        Box::new(|t, v| {
            let s = geometry::mobius_add(t, v[0], v[1], v[3])?;
            Ok(t.dot(s, v[2]))
        }),
    );
    push(
        "gyration",
        vec![d, d, d, d, 1],
        flat(&[&x, &y, &z, &w, &[kappa]]),
        Box::new(|t, v| {
            let g = geometry::gyration(t, v[0], v[1], v[2], v[4])?;
            Ok(t.dot(g, v[3]))
        }),
    );
    push(
        "exp_map",
        vec![d, d, d, 1],
        flat(&[&x, &tangent, &w, &[kappa]]),
        Box::new(|t, v| {
            let e = geometry::exp_map(t, v[0], v[1], v[3])?;
            Ok(t.dot(e, v[2]))
        }),
    );
    push(
        "exp_map_origin",
        vec![d, d, 1],
        flat(&[&tangent, &w, &[kappa]]),
        Box::new(|t, v| {
            let e = geometry::exp_map_origin(t, v[0], v[2])?;
            Ok(t.dot(e, v[1]))
        }),
    );
    push(
        "parallel_transport",
        vec![d, d, d, d, 1],
        flat(&[&x, &y, &carried, &w, &[kappa]]),
        Box::new(|t, v| {
            let p = geometry::parallel_transport(t, v[0], v[1], v[2], v[4])?;
            Ok(t.dot(p, v[3]))
        }),
    );
    push(
        "distance",
        vec![d, d, 1],
        flat(&[&x, &y, &[kappa]]),
        Box::new(|t, v| geometry::distance(t, v[0], v[1], v[2])),
    );
    push(
        "gromov_product",
        vec![d, d, d, 1],
        flat(&[&x, &y, &z, &[kappa]]),
        Box::new(|t, v| geometry::gromov_product(t, v[0], v[1], v[2], v[3])),
    );

    // hyperplane scores: keep the inner product away from the |.| kink
    let mut normal = sample_in_ball(rng, d, 1.0);
    while norm(&normal) < 0.3 {
        normal = sample_in_ball(rng, d, 1.0);
    }
    let base = pts[3].clone();
    let score_arg = {
        let m = Stereographic::new(kappa);
        let neg_p: Vec<f64> = base.iter().map(|c| -c).collect();
        let mm = m.mobius_add(&neg_p, &x).unwrap();
        dot(&mm, &normal).abs()
    };
    if score_arg > 0.02 {
        push(
            "hyperplane_distance",
            vec![d, d, d, 1],
            flat(&[&x, &normal, &base, &[kappa]]),
            Box::new(|t, v| geometry::hyperplane_distance(t, v[0], v[1], v[2], v[3], false)),
        );
        push(
            "hyperplane_signed",
            vec![d, d, d, 1],
            flat(&[&x, &normal, &base, &[kappa]]),
            Box::new(|t, v| geometry::hyperplane_distance(t, v[0], v[1], v[2], v[3], true)),
        );
    }

    // product across two factors with different curvatures
    let kappa2 = KAPPA_GRID[(config_index + 3) % KAPPA_GRID.len()];
    let r2 = point_scale(kappa2);
    let x2 = sample_in_ball(rng, 2, r2);
    let mut y2 = sample_in_ball(rng, 2, r2);
    if y2.iter().zip(&x2).map(|(a, b)| (a - b).abs()).sum::<f64>() < 0.01 * r2 {
        y2[0] += 0.1 * r2;
    }
    push(
        "product_distance",
        vec![d, d, 2, 2, 1, 1],
        flat(&[&x, &y, &x2, &y2, &[kappa], &[kappa2]]),
        Box::new(|t, v| {
            geometry::product_distance(t, &[v[0], v[2]], &[v[1], v[3]], &[v[4], v[5]])
        }),
    );

    cases
}

/// Reverse-mode gradients vs central finite differences for every exported
/// manifold operation, over `configs` random configurations spanning the
/// kappa grid {-1, -0.1, -1e-7, 0, 1e-7, 0.1, 1}.
pub fn gradient_suite(configs: usize, seed: u64) -> Vec<SuiteReport> {
    let mut rng = Rng::new(seed);
    let mut worst: std::collections::BTreeMap<&'static str, f64> = Default::default();
    for ci in 0..configs {
        for case in grad_cases_for(ci, &mut rng) {
            let err = run_grad_case(&case).unwrap_or(f64::INFINITY);
            let slot = worst.entry(case.name).or_insert(0.0);
            *slot = slot.max(err);
        }
    }
    let mut reports: Vec<SuiteReport> = worst
        .into_iter()
        .map(|(name, w)| {
            SuiteReport::new(
                format!("gradients/{name}"),
                w,
                1e-5,
                format!("{configs} configs across the kappa grid"),
            )
        })
        .collect();
    reports.push(d_avg_gradient_report(configs.clamp(20, 200), seed ^ 0x5EED));
    reports
}

/// Gradient check of the full distortion loss on a 5-node graph.
pub fn d_avg_gradient_report(configs: usize, seed: u64) -> SuiteReport {
    let graph = Graph::path(5);
    let dmat = all_pairs_shortest_paths(&graph).unwrap();
    let pairs: Vec<(u32, u32)> = (0..5u32)
        .flat_map(|i| ((i + 1)..5u32).map(move |j| (i, j)))
        .collect();
    let mut rng = Rng::new(seed);
    let mut worst: f64 = 0.0;
    let d = 2usize;
    for ci in 0..configs {
        let kappa = KAPPA_GRID[ci % KAPPA_GRID.len()];
        let r = point_scale(kappa);
        let pts = separated_points(&mut rng, 5, d, r, 0.1 * r);
        let mut values: Vec<f64> = pts.iter().flat_map(|p| p.iter().copied()).collect();
        values.push(kappa);
        let blocks = vec![d, d, d, d, d, 1];
        let dmat = dmat.clone();
        let pairs = pairs.clone();
        let case = GradCase {
            name: "d_avg",
            blocks,
            values,
            build: Box::new(move |t, v| {
                let lifted = crate::embed::LiftedParams {
                    kappas: vec![v[5]],
                    vectors: vec![v[..5].to_vec()],
                    points: vec![v[..5].to_vec()],
                };
                crate::embed::d_avg_loss(t, &lifted, &dmat, &pairs)
            }),
        };
        let err = run_grad_case(&case).unwrap_or(f64::INFINITY);
        worst = worst.max(err);
    }
    SuiteReport::new(
        "gradients/d_avg",
        worst,
        1e-5,
        format!("{configs} configs, 5-node path graph, all pairs"),
    )
}

/// Run every suite with default sample counts.
pub fn run_all(seed: u64) -> Vec<SuiteReport> {
    let mut reports = vec![branch_continuity_suite()];
    reports.extend(gradient_suite(1000, seed));
    reports.push(gyrogroup_suite(10_000, seed ^ 1));
    reports.push(geometry_identities_suite(10_000, seed ^ 2));
    reports.push(kappa_zero_reduction_suite(2_000, seed ^ 3));
    reports
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branch_continuity_holds() {
        let r = branch_continuity_suite();
        assert!(r.passed, "{}: worst {} > {}", r.name, r.worst, r.threshold);
    }

    #[test]
    fn gyrogroup_axioms_hold_on_small_sample() {
        let r = gyrogroup_suite(500, 42);
        assert!(r.passed, "worst {}", r.worst);
    }

    #[test]
    fn broken_mobius_fails_the_gyrogroup_suite() {
        // flipped sign on the 2k<x,y> numerator term
        let broken = |x: &[f64], y: &[f64], k: f64| -> Result<Vec<f64>, GeometryError> {
            let xy = dot(x, y);
            let xx = dot(x, x);
            let yy = dot(y, y);
            let den = 1.0 - 2.0 * k * xy + k * k * xx * yy;
            let ca = (1.0 + 2.0 * k * xy - k * yy) / den;
            let cb = (1.0 + k * xx) / den;
            Ok(x.iter().zip(y).map(|(&a, &b)| ca * a + cb * b).collect())
        };
        let r = gyrogroup_suite_with(&broken, 200, 42);
        assert!(!r.passed, "sign error must be caught, worst {}", r.worst);
    }

    #[test]
    fn geometry_identities_hold_on_small_sample() {
        let r = geometry_identities_suite(500, 42);
        assert!(r.passed, "worst {}", r.worst);
    }

    #[test]
    fn reductions_are_exact() {
        let r = kappa_zero_reduction_suite(200, 42);
        assert!(r.passed, "worst {} x 4ulp", r.worst);
    }

    #[test]
    fn gradient_suite_small_sample() {
        for r in gradient_suite(30, 42) {
            assert!(r.passed, "{}: worst {} > {}", r.name, r.worst, r.threshold);
        }
    }
}
