//! Acceptance suite: every shipped claim about kernels, geometry, gradients
//! and the embedding benchmarks, each with its tolerance pinned in the
//! assertion. Tests share one lock so the timed benchmarks get the machine
//! to themselves; seed batteries parallelize across worker threads inside.

use kstereo::embed::{train, train_traced, TrainConfig, TrainResult};
use kstereo::graph::Graph;
use kstereo::manifold::{Curvature, Factor, ProductManifold};
use kstereo::optim::{OptimConfig, Strategy};
use kstereo::selfcheck;
use std::sync::Mutex;
use std::time::Instant;

static GATE: Mutex<()> = Mutex::new(());

fn gate() -> std::sync::MutexGuard<'static, ()> {
    GATE.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

fn manifold_2x1() -> ProductManifold {
    ProductManifold::new(vec![Factor::new(2, Curvature::new(0.0))])
}

fn manifold_5x2() -> ProductManifold {
    ProductManifold::new(vec![
        Factor::new(5, Curvature::new(0.0)),
        Factor::new(5, Curvature::new(0.0)),
    ])
}

/// Run one training configuration per seed on two worker threads.
fn run_seeds(
    graph: &Graph,
    manifold: &ProductManifold,
    seeds: &[u64],
    make_cfg: impl Fn(u64) -> TrainConfig + Sync,
) -> Vec<TrainResult> {
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results: Vec<Mutex<Option<TrainResult>>> =
        seeds.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..2 {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= seeds.len() {
                    break;
                }
                let cfg = make_cfg(seeds[i]);
                let r = train(graph, manifold, &cfg).expect("benchmark run trains");
                *results[i].lock().unwrap() = Some(r);
            });
        }
    });
    results
        .into_iter()
        .map(|m| m.into_inner().unwrap().unwrap())
        .collect()
}

fn bench_config(strategy: Strategy, seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig::new(OptimConfig::new(strategy, 0.01, seed));
    cfg.iterations = 5000;
    cfg
}

#[test]
fn criterion_01_gradient_suite() {
    let _g = gate();
    let started = Instant::now();

    // the analytic kappa-partial of tan_k at kappa = 0 is x^3 / 3
    for x in [0.25, 0.5, 1.3] {
        let e = kstereo::eval_with_partials(kstereo::KappaFn::TanK, x, 0.0).unwrap();
        assert!(
            (e.d_dkappa - x * x * x / 3.0).abs() <= 1e-15 * x.abs().powi(3),
            "tan_k kappa-partial at 0: {} vs {}",
            e.d_dkappa,
            x * x * x / 3.0
        );
    }

    let reports = selfcheck::gradient_suite(1000, 0xACCE97);
    assert!(reports.len() >= 12, "expected every exported op plus d_avg");
    for r in &reports {
        assert!(
            r.worst <= 1e-5,
            "{}: worst relative error {} exceeds 1e-5",
            r.name,
            r.worst
        );
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "gradient suite took {elapsed:.1}s");
    println!("criterion 1 PASS: gradients within 1e-5 over 1000 configs/op ({elapsed:.1}s)");
}

#[test]
fn criterion_02_gyrogroup_axioms() {
    let _g = gate();
    let started = Instant::now();
    let r = selfcheck::gyrogroup_suite(10_000, 0xACCE97);
    assert!(
        r.worst <= 1e-8,
        "gyrogroup axioms worst error {} exceeds 1e-8",
        r.worst
    );
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "gyrogroup suite took {elapsed:.1}s");
    println!("criterion 2 PASS: gyrogroup axioms within 1e-8 over 1e4 triples/kappa ({elapsed:.1}s)");
}

#[test]
fn criterion_03_branch_continuity() {
    let _g = gate();
    let r = selfcheck::branch_continuity_suite();
    assert!(
        r.worst <= 1e-9,
        "branch mismatch {} exceeds 1e-9 at the switch threshold",
        r.worst
    );
    println!("criterion 3 PASS: analytic and Taylor branches agree to {:.2e}", r.worst);
}

#[test]
fn criterion_04_geometry_identities() {
    let _g = gate();
    let r = selfcheck::geometry_identities_suite(10_000, 0xACCE97);
    assert!(
        r.worst <= 1e-8,
        "geodesic/transport identity error {} exceeds 1e-8",
        r.worst
    );
    println!("criterion 4 PASS: geodesic length and transport isometry within 1e-8");
}

#[test]
fn criterion_05_zero_curvature_reductions() {
    let _g = gate();
    let r = selfcheck::kappa_zero_reduction_suite(2_000, 0xACCE97);
    assert!(
        r.worst <= 1.0,
        "kappa = 0 reductions off by {} x 4ulp",
        r.worst
    );
    println!("criterion 5 PASS: kappa = 0 reductions exact to rounding (<= 4 ulp)");
}

#[test]
fn criterion_06_tree_benchmark() {
    let _g = gate();
    let started = Instant::now();
    let tree = Graph::complete_binary_tree(5);
    assert_eq!(tree.node_count(), 63);
    let m = manifold_2x1();
    let seeds: Vec<u64> = (1..=10).collect();

    let euclid = run_seeds(&tree, &m, &seeds, |s| bench_config(Strategy::EuclideanFixed, s));
    let joint = run_seeds(&tree, &m, &seeds, |s| {
        bench_config(Strategy::JointParamsFirst, s)
    });

    let mut wins = 0;
    for (e, j) in euclid.iter().zip(&joint) {
        let kappa = j.state.factors[0].kappa;
        if kappa < 0.0 && j.final_d_avg <= 0.9 * e.final_d_avg {
            wins += 1;
        }
    }
    assert!(
        wins >= 7,
        "learnable kappa beat the Euclidean baseline in only {wins}/10 seeds"
    );

    // long-window trend: D_avg non-increasing between evaluations, with a
    // small allowance for stochastic transients
    let mut rises = 0usize;
    let mut windows = 0usize;
    for j in &joint {
        for w in j.history.windows(2) {
            windows += 1;
            if w[1].1 > w[0].1 {
                rises += 1;
            }
        }
    }
    assert!(
        rises * 20 <= windows,
        "history rose in {rises}/{windows} windows"
    );

    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 120.0, "tree benchmark took {elapsed:.1}s");
    println!(
        "criterion 6 PASS: tree depth 5, kappa < 0 and >= 10% improvement in {wins}/10 seeds ({elapsed:.0}s)"
    );
}

#[test]
fn criterion_07_cycle_benchmark() {
    let _g = gate();
    let started = Instant::now();
    let cycle = Graph::cycle(32);
    let m = manifold_2x1();
    let seeds: Vec<u64> = (1..=10).collect();

    // the spherical optimum of a cycle is exact at kappa = (2 pi / n)^2;
    // an overdispersed start makes the early curvature signal point toward
    // it, and the tangent parametrization keeps the climb stable
    let lr = 0.05;
    let sigma = 6.0;
    let euclid = run_seeds(&cycle, &m, &seeds, |s| {
        let mut cfg = bench_config(Strategy::EuclideanFixed, s);
        cfg.optim.lr_points = lr;
        cfg.sigma_init = sigma;
        cfg
    });
    let tangent = run_seeds(&cycle, &m, &seeds, |s| {
        let mut cfg = bench_config(Strategy::TangentReparam, s);
        cfg.optim.lr_points = lr;
        cfg.optim.lr_kappa = 1e-4;
        cfg.sigma_init = sigma;
        cfg
    });

    let mut wins = 0;
    for (e, t) in euclid.iter().zip(&tangent) {
        let kappa = t.state.factors[0].kappa;
        if kappa > 0.0 && t.final_d_avg < e.final_d_avg {
            wins += 1;
        }
    }
    assert!(
        wins >= 7,
        "spherical curvature emerged in only {wins}/10 seeds"
    );
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 120.0, "cycle benchmark took {elapsed:.1}s");
    println!(
        "criterion 7 PASS: C32 ends kappa > 0 and beats Euclidean in {wins}/10 seeds ({elapsed:.0}s)"
    );
}

#[test]
fn criterion_08_strategy_trend() {
    let _g = gate();
    let started = Instant::now();
    let tree = Graph::complete_binary_tree(5);
    let m = manifold_5x2();
    let seeds: Vec<u64> = (1..=10).collect();

    let joint = run_seeds(&tree, &m, &seeds, |s| {
        bench_config(Strategy::JointParamsFirst, s)
    });
    let tangent = run_seeds(&tree, &m, &seeds, |s| {
        bench_config(Strategy::TangentReparam, s)
    });

    let mut wins = 0;
    for (j, t) in joint.iter().zip(&tangent) {
        if t.final_d_avg <= j.final_d_avg {
            wins += 1;
        }
    }
    assert!(
        wins >= 7,
        "tangent reparametrization beat joint in only {wins}/10 paired seeds"
    );
    let elapsed = started.elapsed().as_secs_f64();
    println!(
        "criterion 8 PASS: tangent <= joint on the 5x2 tree in {wins}/10 paired seeds ({elapsed:.0}s)"
    );
}

#[test]
fn criterion_09_cli_determinism() {
    let _g = gate();
    let dir = std::env::temp_dir().join(format!("kstereo-accept-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let graph_path = dir.join("tree.txt");
    let tree = Graph::complete_binary_tree(4);
    let mut text = String::new();
    for &(u, v) in tree.edges() {
        text.push_str(&format!("{} {}\n", tree.label(u as usize), tree.label(v as usize)));
    }
    std::fs::write(&graph_path, text).unwrap();

    let run_once = |tag: &str| -> (Vec<u8>, String) {
        let emb = dir.join(format!("emb-{tag}.tsv"));
        let man = dir.join(format!("run-{tag}.json"));
        let out = std::process::Command::new(env!("CARGO_BIN_EXE_kstereo"))
            .args([
                "embed",
                "--graph",
                graph_path.to_str().unwrap(),
                "--manifold",
                "2x2@-0.5,3x1",
                "--strategy",
                "tangent",
                "--iters",
                "300",
                "--seed",
                "7",
                "--out",
                emb.to_str().unwrap(),
                "--metrics",
                man.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        (
            std::fs::read(&emb).unwrap(),
            std::fs::read_to_string(&man).unwrap(),
        )
    };

    let (emb1, man1) = run_once("a");
    let (emb2, man2) = run_once("b");
    assert_eq!(emb1, emb2, "embedding files must be byte-identical");

    let strip_wall = |m: &str| -> String {
        m.split(", \"wall_time_s\"").next().unwrap().to_string()
    };
    assert_eq!(strip_wall(&man1), strip_wall(&man2), "manifests differ beyond wall time");
    println!("criterion 9 PASS: identical flags and seed reproduce identical artifacts");
}

#[test]
fn criterion_10_warmstart_regime() {
    let _g = gate();
    let g = Graph::complete_binary_tree(4);
    let m = manifold_2x1();
    let switch = 60usize;

    let mut euclid_trace: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut cfg = TrainConfig::new(OptimConfig::new(Strategy::EuclideanFixed, 0.01, 11));
    cfg.iterations = switch;
    cfg.eval_every = 0;
    train_traced(&g, &m, &cfg, |_, p| euclid_trace.push(p.factors[0].vectors.clone())).unwrap();

    let mut warm_trace: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut warm_kappas: Vec<f64> = Vec::new();
    let mut cfg = TrainConfig::new(OptimConfig::new(
        Strategy::Warmstart { switch_iter: switch },
        0.01,
        11,
    ));
    cfg.iterations = switch + 40;
    cfg.eval_every = 0;
    train_traced(&g, &m, &cfg, |_, p| {
        warm_trace.push(p.factors[0].vectors.clone());
        warm_kappas.push(p.factors[0].kappa.value);
    })
    .unwrap();

    for (iter, k) in warm_kappas[..switch].iter().enumerate() {
        assert!(*k == 0.0, "kappa nonzero at warmstart iteration {iter}: {k}");
    }
    for step in 0..switch {
        for (pa, pb) in euclid_trace[step].iter().zip(&warm_trace[step]) {
            for (ca, cb) in pa.iter().zip(pb) {
                assert!(
                    (ca - cb).abs() <= 1e-12,
                    "warmstart diverged from EuclideanFixed at step {step}: {ca} vs {cb}"
                );
            }
        }
    }
    assert!(
        warm_kappas[switch..].iter().any(|&k| k != 0.0),
        "kappa never unfroze after the switch"
    );
    println!(
        "criterion 10 PASS: warmstart tracks EuclideanFixed to 1e-12/step for {switch} iterations, then learns kappa"
    );
}
