//! Embedding TSV and run-manifest serialization.
//!
//! The embeddings file starts with one comment line per factor
//! (`# factor <i> dim <d> kappa <final kappa>`), then one row per node:
//! the node id followed by all coordinates, factors concatenated in spec
//! order, printed with 17 significant digits so evaluation round-trips
//! losslessly. The manifest is one flat JSON object with a fixed key order;
//! every field except `wall_time_s` is a deterministic function of the
//! configuration and seed.

use kstereo::embed::EmbeddingState;
use std::fmt::Write as _;

pub fn render_embeddings(state: &EmbeddingState, labels: &[String]) -> String {
    let mut out = String::new();
    for (i, f) in state.factors.iter().enumerate() {
        writeln!(out, "# factor {} dim {} kappa {:.16e}", i, f.dim, f.kappa).unwrap();
    }
    for (node, label) in labels.iter().enumerate() {
        out.push_str(label);
        for f in &state.factors {
            for c in &f.points[node] {
                write!(out, "\t{:.16e}", c).unwrap();
            }
        }
        out.push('\n');
    }
    out
}

pub struct ParsedEmbeddings {
    pub dims: Vec<usize>,
    pub kappas: Vec<f64>,
    pub rows: Vec<(String, Vec<f64>)>,
}

pub fn parse_embeddings(text: &str) -> Result<ParsedEmbeddings, String> {
    let mut dims = Vec::new();
    let mut kappas = Vec::new();
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let toks: Vec<&str> = rest.split_whitespace().collect();
            match toks.as_slice() {
                ["factor", idx, "dim", d, "kappa", k] => {
                    let idx: usize = idx
                        .parse()
                        .map_err(|_| format!("line {}: bad factor index", lineno + 1))?;
                    if idx != dims.len() {
                        return Err(format!("line {}: factor header out of order", lineno + 1));
                    }
                    dims.push(
                        d.parse()
                            .map_err(|_| format!("line {}: bad dim", lineno + 1))?,
                    );
                    kappas.push(
                        k.parse()
                            .map_err(|_| format!("line {}: bad kappa", lineno + 1))?,
                    );
                }
                _ => return Err(format!("line {}: unrecognized header", lineno + 1)),
            }
            continue;
        }
        let mut toks = line.split('\t');
        let label = toks
            .next()
            .ok_or_else(|| format!("line {}: empty row", lineno + 1))?
            .to_string();
        let coords: Result<Vec<f64>, _> = toks.map(|t| t.parse::<f64>()).collect();
        let coords = coords.map_err(|_| format!("line {}: bad coordinate", lineno + 1))?;
        rows.push((label, coords));
    }
    if dims.is_empty() {
        return Err("no factor headers found".to_string());
    }
    let ambient: usize = dims.iter().sum();
    for (label, coords) in &rows {
        if coords.len() != ambient {
            return Err(format!(
                "node {label:?} has {} coordinates, expected {ambient}",
                coords.len()
            ));
        }
    }
    Ok(ParsedEmbeddings {
        dims,
        kappas,
        rows,
    })
}

/// Rebuild an [`EmbeddingState`] ordered like `labels`; errors if the node
/// sets differ.
pub fn state_from_parsed(
    parsed: &ParsedEmbeddings,
    labels: &[String],
) -> Result<EmbeddingState, String> {
    if parsed.rows.len() != labels.len() {
        return Err(format!(
            "embeddings have {} nodes, graph has {}",
            parsed.rows.len(),
            labels.len()
        ));
    }
    let index: std::collections::HashMap<&str, usize> = parsed
        .rows
        .iter()
        .enumerate()
        .map(|(i, (l, _))| (l.as_str(), i))
        .collect();
    let mut factors: Vec<kstereo::embed::FactorEmbedding> = parsed
        .dims
        .iter()
        .zip(&parsed.kappas)
        .map(|(&dim, &kappa)| kstereo::embed::FactorEmbedding {
            dim,
            kappa,
            points: Vec::with_capacity(labels.len()),
        })
        .collect();
    for label in labels {
        let Some(&row) = index.get(label.as_str()) else {
            return Err(format!("graph node {label:?} missing from embeddings"));
        };
        let coords = &parsed.rows[row].1;
        let mut off = 0;
        for f in factors.iter_mut() {
            f.points.push(coords[off..off + f.dim].to_vec());
            off += f.dim;
        }
    }
    Ok(EmbeddingState { factors })
}

pub struct ManifestInput<'a> {
    pub graph: &'a str,
    pub manifold: &'a str,
    pub strategy: &'a str,
    pub iters: usize,
    pub switch_iter: Option<usize>,
    pub lr: f64,
    pub lr_kappa: f64,
    pub momentum: f64,
    pub batch_pairs: usize,
    pub eval_every: usize,
    pub seed: u64,
    pub node_count: usize,
    pub dropped_nodes: usize,
    pub kappas: &'a [f64],
    pub final_d_avg: f64,
    pub iterations_run: usize,
    pub wall_time_s: f64,
}

pub fn render_manifest(m: &ManifestInput<'_>) -> String {
    let mut out = String::from("{");
    let field = |out: &mut String, key: &str, value: String| {
        if out.len() > 1 {
            out.push_str(", ");
        }
        write!(out, "{:?}: {}", key, value).unwrap();
    };
    field(&mut out, "graph", format!("{:?}", m.graph));
    field(&mut out, "manifold", format!("{:?}", m.manifold));
    field(&mut out, "strategy", format!("{:?}", m.strategy));
    field(&mut out, "iters", m.iters.to_string());
    field(
        &mut out,
        "switch_iter",
        m.switch_iter.map_or("null".to_string(), |v| v.to_string()),
    );
    field(&mut out, "lr", format!("{}", m.lr));
    field(&mut out, "lr_kappa", format!("{}", m.lr_kappa));
    field(&mut out, "momentum", format!("{}", m.momentum));
    field(&mut out, "batch_pairs", m.batch_pairs.to_string());
    field(&mut out, "eval_every", m.eval_every.to_string());
    field(&mut out, "seed", m.seed.to_string());
    field(&mut out, "node_count", m.node_count.to_string());
    field(&mut out, "dropped_nodes", m.dropped_nodes.to_string());
    for (i, k) in m.kappas.iter().enumerate() {
        field(&mut out, &format!("kappa_{i}"), format!("{}", k));
    }
    field(&mut out, "final_d_avg", format!("{}", m.final_d_avg));
    field(&mut out, "iterations_run", m.iterations_run.to_string());
    field(&mut out, "wall_time_s", format!("{}", m.wall_time_s));
    out.push('}');
    out.push('\n');
    out
}
