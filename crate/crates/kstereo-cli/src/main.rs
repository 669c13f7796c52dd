//! Command-line interface: graph embedding with learnable curvature,
//! evaluation, shortest-path export, and the built-in verification suites.

mod args;
mod emb_io;
mod spec;

use args::{ArgError, Args};
use kstereo::embed::{evaluate, train, TrainConfig};
use kstereo::graph::{all_pairs_shortest_paths, largest_connected_component, load_edge_list};
use kstereo::optim::{OptimConfig, Strategy};
use spec::parse_manifold_spec;
use std::path::Path;
use std::time::Instant;

const EXIT_USAGE: i32 = 1;
const EXIT_DATA: i32 = 2;
const EXIT_SELFCHECK: i32 = 3;

const USAGE: &str = "kstereo <command> [flags]

commands:
  embed      train node embeddings for a graph
  eval       recompute the distortion metric of an embeddings file
  apsp       export the all-pairs hop-distance matrix
  selfcheck  run the built-in verification suites

embed flags:
  --graph PATH        edge-list file (two node tokens per line, # comments)
  --manifold SPEC     product spec, e.g. 2x5 or 5x2@-1! (DIMxCOUNT[@K][!])
  --strategy NAME     euclidean | joint | joint-kappa-first | alternating |
                      tangent | warmstart     (default joint)
  --iters N           gradient iterations     (default 20000)
  --switch-iter N     warmstart switch point  (required for warmstart)
  --lr X              point learning rate     (default 0.01)
  --lr-kappa X        curvature learning rate (default lr/1000)
  --momentum X        momentum coefficient    (default 0.9)
  --batch-pairs N     pairs per iteration     (default min(4096, all pairs))
  --eval-every N      metric cadence          (default 500)
  --seed N            rng seed                (default 0)
  --out PATH          embeddings TSV output
  --metrics PATH      run manifest (JSON) output

eval flags:
  --graph PATH --embeddings PATH

apsp flags:
  --graph PATH --out PATH [--lcc]

selfcheck flags:
  [--suite NAME] [--samples N] [--seed N]
  suites: gradients gyrogroup branches geometry reductions

exit codes: 0 ok, 1 usage error, 2 data error, 3 self-check failure
";

fn main() {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    std::process::exit(run(&argv));
}

fn run(argv: &[String]) -> i32 {
    let Some(cmd) = argv.first() else {
        eprint!("{USAGE}");
        return EXIT_USAGE;
    };
    let rest = &argv[1..];
    let result = match cmd.as_str() {
        "embed" => cmd_embed(rest),
        "eval" => cmd_eval(rest),
        "apsp" => cmd_apsp(rest),
        "selfcheck" => cmd_selfcheck(rest),
        "help" | "--help" | "-h" => {
            print!("{USAGE}");
            return 0;
        }
        other => {
            eprintln!("unknown command {other:?}");
            eprint!("{USAGE}");
            return EXIT_USAGE;
        }
    };
    match result {
        Ok(code) => code,
        Err(ArgError::Help) => {
            print!("{USAGE}");
            0
        }
        Err(ArgError::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
    }
}

fn data_err(msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    EXIT_DATA
}

fn load_lcc(path: &str) -> Result<(kstereo::graph::Graph, usize), String> {
    let report = load_edge_list(Path::new(path)).map_err(|e| e.to_string())?;
    if report.self_loops_dropped > 0 {
        eprintln!("warning: dropped {} self-loop(s)", report.self_loops_dropped);
    }
    let (graph, dropped) = largest_connected_component(&report.graph);
    if dropped > 0 {
        eprintln!("warning: kept largest connected component, dropped {dropped} node(s)");
    }
    Ok((graph, dropped))
}

fn parse_strategy(name: &str, switch_iter: Option<usize>) -> Result<Strategy, ArgError> {
    match name {
        "euclidean" => Ok(Strategy::EuclideanFixed),
        "joint" => Ok(Strategy::JointParamsFirst),
        "joint-kappa-first" => Ok(Strategy::JointKappaFirst),
        "alternating" => Ok(Strategy::Alternating),
        "tangent" => Ok(Strategy::TangentReparam),
        "warmstart" => {
            let switch_iter = switch_iter.ok_or_else(|| {
                ArgError::Usage("--strategy warmstart requires --switch-iter".to_string())
            })?;
            Ok(Strategy::Warmstart { switch_iter })
        }
        other => Err(ArgError::Usage(format!("unknown strategy {other:?}"))),
    }
}

fn cmd_embed(argv: &[String]) -> Result<i32, ArgError> {
    let a = Args::parse(
        argv,
        &[
            "graph",
            "manifold",
            "strategy",
            "iters",
            "switch-iter",
            "lr",
            "lr-kappa",
            "momentum",
            "batch-pairs",
            "eval-every",
            "seed",
            "out",
            "metrics",
        ],
        &["lcc"],
    )?;
    let graph_path = a.required("graph")?;
    let spec_text = a.required("manifold")?;
    let spec = parse_manifold_spec(spec_text).map_err(|e| ArgError::Usage(e.to_string()))?;

    let switch_iter = match a.get("switch-iter") {
        Some(s) => Some(
            s.parse::<usize>()
                .map_err(|_| ArgError::Usage(format!("--switch-iter: cannot parse {s:?}")))?,
        ),
        None => None,
    };
    let strategy = parse_strategy(a.get("strategy").unwrap_or("joint"), switch_iter)?;
    let lr: f64 = a.parse_num("lr", 0.01)?;
    let seed: u64 = a.parse_num("seed", 0)?;
    let mut optim = OptimConfig::new(strategy, lr, seed);
    optim.lr_kappa = a.parse_num("lr-kappa", optim.lr_kappa)?;
    optim.momentum = a.parse_num("momentum", optim.momentum)?;

    let mut cfg = TrainConfig::new(optim);
    cfg.iterations = a.parse_num("iters", cfg.iterations)?;
    cfg.batch_pairs = a.parse_num("batch-pairs", cfg.batch_pairs)?;
    cfg.eval_every = a.parse_num("eval-every", cfg.eval_every)?;

    let started = Instant::now();
    let (graph, dropped) = match load_lcc(graph_path) {
        Ok(g) => g,
        Err(e) => return Ok(data_err(e)),
    };
    let manifold = spec.to_manifold();
    let n = graph.node_count();
    let total_pairs = n * (n - 1) / 2;
    let effective_batch = cfg.batch_pairs.min(total_pairs);

    let result = match train(&graph, &manifold, &cfg) {
        Ok(r) => r,
        Err(e) => return Ok(data_err(e)),
    };

    if let Some(out) = a.get("out") {
        let text = emb_io::render_embeddings(&result.state, graph.labels());
        if let Err(e) = std::fs::write(out, text) {
            return Ok(data_err(format!("cannot write {out}: {e}")));
        }
    }
    if let Some(metrics) = a.get("metrics") {
        let kappas: Vec<f64> = result.state.factors.iter().map(|f| f.kappa).collect();
        let manifest = emb_io::render_manifest(&emb_io::ManifestInput {
            graph: graph_path,
            manifold: &spec.render(),
            strategy: a.get("strategy").unwrap_or("joint"),
            iters: cfg.iterations,
            switch_iter,
            lr: cfg.optim.lr_points,
            lr_kappa: cfg.optim.lr_kappa,
            momentum: cfg.optim.momentum,
            batch_pairs: effective_batch,
            eval_every: cfg.eval_every,
            seed,
            node_count: n,
            dropped_nodes: dropped,
            kappas: &kappas,
            final_d_avg: result.final_d_avg,
            iterations_run: result.iterations_run,
            wall_time_s: started.elapsed().as_secs_f64(),
        });
        if let Err(e) = std::fs::write(metrics, manifest) {
            return Ok(data_err(format!("cannot write {metrics}: {e}")));
        }
    }
    println!(
        "nodes {} | iterations {} | final D_avg {}",
        n,
        result.iterations_run,
        format_sig(result.final_d_avg, 6)
    );
    for (i, f) in result.state.factors.iter().enumerate() {
        println!("factor {i}: dim {} kappa {}", f.dim, f.kappa);
    }
    Ok(0)
}

fn cmd_eval(argv: &[String]) -> Result<i32, ArgError> {
    let a = Args::parse(argv, &["graph", "embeddings"], &[])?;
    let graph_path = a.required("graph")?;
    let emb_path = a.required("embeddings")?;
    let (graph, _) = match load_lcc(graph_path) {
        Ok(g) => g,
        Err(e) => return Ok(data_err(e)),
    };
    let text = match std::fs::read_to_string(emb_path) {
        Ok(t) => t,
        Err(e) => return Ok(data_err(format!("cannot read {emb_path}: {e}"))),
    };
    let parsed = match emb_io::parse_embeddings(&text) {
        Ok(p) => p,
        Err(e) => return Ok(data_err(e)),
    };
    let state = match emb_io::state_from_parsed(&parsed, graph.labels()) {
        Ok(s) => s,
        Err(e) => return Ok(data_err(e)),
    };
    let dmat = match all_pairs_shortest_paths(&graph) {
        Ok(d) => d,
        Err(e) => return Ok(data_err(e)),
    };
    match evaluate(&state, &dmat) {
        Ok(d) => {
            println!("{}", format_sig(d, 6));
            Ok(0)
        }
        Err(e) => Ok(data_err(e)),
    }
}

fn cmd_apsp(argv: &[String]) -> Result<i32, ArgError> {
    let a = Args::parse(argv, &["graph", "out"], &["lcc"])?;
    let graph_path = a.required("graph")?;
    let out = a.required("out")?;
    let report = match load_edge_list(Path::new(graph_path)) {
        Ok(r) => r,
        Err(e) => return Ok(data_err(e)),
    };
    let graph = if a.has("lcc") {
        let (g, dropped) = largest_connected_component(&report.graph);
        if dropped > 0 {
            eprintln!("warning: kept largest connected component, dropped {dropped} node(s)");
        }
        g
    } else {
        report.graph
    };
    let dmat = match all_pairs_shortest_paths(&graph) {
        Ok(d) => d,
        Err(e) => return Ok(data_err(e)),
    };
    let n = graph.node_count();
    let mut text = String::new();
    for label in graph.labels() {
        text.push('\t');
        text.push_str(label);
    }
    text.push('\n');
    for i in 0..n {
        text.push_str(graph.label(i));
        for j in 0..n {
            text.push('\t');
            text.push_str(&dmat.hops(i, j).to_string());
        }
        text.push('\n');
    }
    if let Err(e) = std::fs::write(out, text) {
        return Ok(data_err(format!("cannot write {out}: {e}")));
    }
    Ok(0)
}

fn cmd_selfcheck(argv: &[String]) -> Result<i32, ArgError> {
    let a = Args::parse(argv, &["suite", "samples", "seed"], &[])?;
    let seed: u64 = a.parse_num("seed", 42)?;
    let samples: Option<usize> = match a.get("samples") {
        None => None,
        Some(s) => Some(
            s.parse()
                .map_err(|_| ArgError::Usage(format!("--samples: cannot parse {s:?}")))?,
        ),
    };
    let suites = ["gradients", "gyrogroup", "branches", "geometry", "reductions"];
    let selected: Vec<&str> = match a.get("suite") {
        None => suites.to_vec(),
        Some(s) if suites.contains(&s) => vec![suites[suites.iter().position(|x| *x == s).unwrap()]],
        Some(other) => {
            return Err(ArgError::Usage(format!(
                "unknown suite {other:?}; expected one of {suites:?}"
            )))
        }
    };

    let mut reports = Vec::new();
    for suite in &selected {
        match *suite {
            "gradients" => reports.extend(kstereo::selfcheck::gradient_suite(
                samples.unwrap_or(1000),
                seed,
            )),
            "gyrogroup" => reports.push(kstereo::selfcheck::gyrogroup_suite(
                samples.unwrap_or(10_000),
                seed ^ 1,
            )),
            "branches" => reports.push(kstereo::selfcheck::branch_continuity_suite()),
            "geometry" => reports.push(kstereo::selfcheck::geometry_identities_suite(
                samples.unwrap_or(10_000),
                seed ^ 2,
            )),
            "reductions" => reports.push(kstereo::selfcheck::kappa_zero_reduction_suite(
                samples.unwrap_or(2_000),
                seed ^ 3,
            )),
            _ => unreachable!(),
        }
    }
    let mut failed = false;
    for r in &reports {
        println!(
            "{}: {} (worst {:.3e}, threshold {:.1e}) - {}",
            r.name,
            if r.passed { "pass" } else { "FAIL" },
            r.worst,
            r.threshold,
            r.detail
        );
        failed |= !r.passed;
    }
    Ok(if failed { EXIT_SELFCHECK } else { 0 })
}

/// Fixed-point formatting with `sig` significant digits (more decimal
/// places for values below 1, like the distortion metric). The denominator
/// guard in the loss leaves an O(1e-18) residue even for exact embeddings,
/// so anything below numerical zero prints as plain zero.
fn format_sig(v: f64, sig: usize) -> String {
    if v.abs() < 1e-12 || !v.is_finite() {
        return format!("{:.*}", sig, if v.is_finite() { 0.0 } else { v });
    }
    let exponent = v.abs().log10().floor() as i32;
    let decimals = (sig as i32 - 1 - exponent).max(0) as usize;
    format!("{:.*}", decimals, v)
}
