//! Graph ingestion and all-pairs shortest paths.

use crate::error::GraphError;
use std::collections::HashMap;
use std::path::Path;

/// Undirected simple graph with string node labels.
#[derive(Debug, Clone)]
pub struct Graph {
    labels: Vec<String>,
    edges: Vec<(u32, u32)>,
    adj: Vec<Vec<u32>>,
}

impl Graph {
    /// Build from labels and edges, dropping self-loops and duplicates.
    pub fn from_edges(labels: Vec<String>, edges: &[(u32, u32)]) -> Result<Graph, GraphError> {
        if labels.is_empty() {
            return Err(GraphError::EmptyGraph);
        }
        let n = labels.len() as u32;
        let mut seen = std::collections::HashSet::new();
        let mut kept = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            assert!(u < n && v < n, "edge index out of range");
            if u == v {
                continue;
            }
            let key = (u.min(v), u.max(v));
            if seen.insert(key) {
                kept.push(key);
            }
        }
        let mut adj = vec![Vec::new(); labels.len()];
        for &(u, v) in &kept {
            adj[u as usize].push(v);
            adj[v as usize].push(u);
        }
        Ok(Graph {
            labels,
            edges: kept,
            adj,
        })
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.adj[i]
    }

    /// Path graph 0 - 1 - ... - (n-1).
    pub fn path(n: usize) -> Graph {
        let labels = (0..n).map(|i| i.to_string()).collect();
        let edges: Vec<(u32, u32)> = (1..n as u32).map(|i| (i - 1, i)).collect();
        Graph::from_edges(labels, &edges).expect("n >= 1")
    }

    /// Cycle graph C_n.
    pub fn cycle(n: usize) -> Graph {
        assert!(n >= 3);
        let labels = (0..n).map(|i| i.to_string()).collect();
        let mut edges: Vec<(u32, u32)> = (1..n as u32).map(|i| (i - 1, i)).collect();
        edges.push((n as u32 - 1, 0));
        Graph::from_edges(labels, &edges).expect("n >= 3")
    }

    /// Complete binary tree with `depth` edge levels (depth 0 is one node).
    pub fn complete_binary_tree(depth: u32) -> Graph {
        let n = (1usize << (depth + 1)) - 1;
        let labels = (0..n).map(|i| i.to_string()).collect();
        let mut edges = Vec::with_capacity(n - 1);
        for child in 1..n as u32 {
            edges.push(((child - 1) / 2, child));
        }
        Graph::from_edges(labels, &edges).expect("n >= 1")
    }
}

/// Outcome of parsing an edge-list file.
#[derive(Debug)]
pub struct LoadReport {
    pub graph: Graph,
    pub self_loops_dropped: usize,
    pub duplicate_edges: usize,
}

/// Parse the edge-list format: one edge per line as two whitespace-separated
/// node tokens, `#` starting a comment line, blank lines ignored. Node ids
/// map to dense indices in first-seen order.
pub fn parse_edge_list(text: &str) -> Result<LoadReport, GraphError> {
    fn intern(tok: &str, ids: &mut HashMap<String, u32>, labels: &mut Vec<String>) -> u32 {
        if let Some(&i) = ids.get(tok) {
            return i;
        }
        let i = labels.len() as u32;
        labels.push(tok.to_string());
        ids.insert(tok.to_string(), i);
        i
    }

    let mut ids: HashMap<String, u32> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut raw_edges: Vec<(u32, u32)> = Vec::new();
    let mut self_loops = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let a = tokens.next();
        let b = tokens.next();
        let extra = tokens.next();
        let (a, b) = match (a, b, extra) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(GraphError::Parse {
                    line: lineno + 1,
                    detail: format!("expected two node tokens, got {trimmed:?}"),
                })
            }
        };
        let ai = intern(a, &mut ids, &mut labels);
        let bi = intern(b, &mut ids, &mut labels);
        if ai == bi {
            self_loops += 1;
            continue;
        }
        raw_edges.push((ai, bi));
    }
    if labels.is_empty() {
        return Err(GraphError::EmptyGraph);
    }
    let before = raw_edges.len();
    let graph = Graph::from_edges(labels, &raw_edges)?;
    Ok(LoadReport {
        duplicate_edges: before - graph.edge_count(),
        graph,
        self_loops_dropped: self_loops,
    })
}

/// Read and parse an edge-list file.
pub fn load_edge_list(path: &Path) -> Result<LoadReport, GraphError> {
    let text = std::fs::read_to_string(path).map_err(|e| GraphError::Parse {
        line: 0,
        detail: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_edge_list(&text)
}

/// Induced subgraph of the largest connected component (ties broken by the
/// component containing the smallest node index) plus the dropped-node count.
pub fn largest_connected_component(g: &Graph) -> (Graph, usize) {
    let n = g.node_count();
    let mut comp = vec![usize::MAX; n];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut queue = std::collections::VecDeque::from([start]);
        let mut members = vec![];
        comp[start] = id;
        while let Some(u) = queue.pop_front() {
            members.push(u);
            for &v in g.neighbors(u) {
                if comp[v as usize] == usize::MAX {
                    comp[v as usize] = id;
                    queue.push_back(v as usize);
                }
            }
        }
        comps.push(members);
    }
    // components are discovered in order of their smallest node index, so the
    // first maximal one wins ties
    let best = comps
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| a.len().cmp(&b.len()).then(ib.cmp(ia)))
        .map(|(i, _)| i)
        .unwrap();
    let mut members = comps[best].clone();
    members.sort_unstable();
    let mut remap = vec![u32::MAX; n];
    for (new, &old) in members.iter().enumerate() {
        remap[old] = new as u32;
    }
    let labels = members.iter().map(|&i| g.label(i).to_string()).collect();
    let edges: Vec<(u32, u32)> = g
        .edges()
        .iter()
        .filter(|(u, v)| remap[*u as usize] != u32::MAX && remap[*v as usize] != u32::MAX)
        .map(|&(u, v)| (remap[u as usize], remap[v as usize]))
        .collect();
    let dropped = n - members.len();
    (
        Graph::from_edges(labels, &edges).expect("component is non-empty"),
        dropped,
    )
}

/// Exact hop-count distances between all node pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    hops: Vec<u32>,
}

impl DistanceMatrix {
    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn hops(&self, i: usize, j: usize) -> u32 {
        self.hops[i * self.n + j]
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.hops(i, j) as f64
    }
}

const UNREACHED: u32 = u32::MAX;

/// Hop distances from one source (the BFS oracle, also the production path
/// for large graphs).
pub fn bfs_distances(g: &Graph, src: usize) -> Vec<u32> {
    let n = g.node_count();
    let mut dist = vec![UNREACHED; n];
    dist[src] = 0;
    let mut queue = std::collections::VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        for &v in g.neighbors(u) {
            if dist[v as usize] == UNREACHED {
                dist[v as usize] = dist[u] + 1;
                queue.push_back(v as usize);
            }
        }
    }
    dist
}

/// All-pairs shortest paths: Floyd-Warshall up to 1024 nodes, per-source BFS
/// beyond that (identical results, better asymptotics for sparse graphs).
pub fn all_pairs_shortest_paths(g: &Graph) -> Result<DistanceMatrix, GraphError> {
    let n = g.node_count();
    let mut hops;
    if n <= 1024 {
        const INF: u32 = u32::MAX / 2;
        hops = vec![INF; n * n];
        for i in 0..n {
            hops[i * n + i] = 0;
        }
        for &(u, v) in g.edges() {
            hops[u as usize * n + v as usize] = 1;
            hops[v as usize * n + u as usize] = 1;
        }
        for k in 0..n {
            for i in 0..n {
                let dik = hops[i * n + k];
                if dik == INF {
                    continue;
                }
                for j in 0..n {
                    let cand = dik + hops[k * n + j];
                    if cand < hops[i * n + j] {
                        hops[i * n + j] = cand;
                    }
                }
            }
        }
        if let Some(bad) = hops.iter().position(|&h| h >= INF) {
            return Err(GraphError::Disconnected {
                a: bad / n,
                b: bad % n,
            });
        }
    } else {
        hops = vec![0; n * n];
        for src in 0..n {
            let d = bfs_distances(g, src);
            if let Some(bad) = d.iter().position(|&h| h == UNREACHED) {
                return Err(GraphError::Disconnected { a: src, b: bad });
            }
            hops[src * n..(src + 1) * n].copy_from_slice(&d);
        }
    }
    Ok(DistanceMatrix { n, hops })
}
