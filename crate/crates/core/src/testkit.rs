//! Independent brute-force oracle, random graphs and query generation.
//!
//! Nothing here calls into the enumeration engine: the oracle is a plain
//! depth-first search over the raw adjacency and returns bare vertex
//! vectors.

use std::collections::{HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{load_edge_list, DirectedGraph, Direction, VertexId};
use crate::query::{parse_queries, resolve_queries, Query};

/// Every simple path from `s` to `t` with at most `k` hops, in
/// lexicographic order.
pub fn brute_force_paths(g: &DirectedGraph, s: VertexId, t: VertexId, k: u32) -> Vec<Vec<VertexId>> {
    let mut out = Vec::new();
    if s == t {
        return out;
    }
    let mut visited = vec![false; g.vertex_count()];
    let mut path = vec![s];
    visited[s as usize] = true;
    fn go(
        g: &DirectedGraph,
        t: VertexId,
        k: u32,
        visited: &mut [bool],
        path: &mut Vec<VertexId>,
        out: &mut Vec<Vec<VertexId>>,
    ) {
        let v = *path.last().unwrap();
        if v == t {
            out.push(path.clone());
            return;
        }
        if path.len() as u32 > k {
            return;
        }
        for &u in g.out_neighbors(v) {
            if !visited[u as usize] {
                visited[u as usize] = true;
                path.push(u);
                go(g, t, k, visited, path, out);
                path.pop();
                visited[u as usize] = false;
            }
        }
    }
    go(g, t, k, &mut visited, &mut path, &mut out);
    out
}

/// Plain BFS distances from `src` along `direction`, cut off at `cap`.
pub fn truncated_bfs(g: &DirectedGraph, src: VertexId, direction: Direction, cap: u32) -> Vec<Option<u32>> {
    let mut dist = vec![None; g.vertex_count()];
    dist[src as usize] = Some(0);
    let mut queue = VecDeque::from([src]);
    while let Some(v) = queue.pop_front() {
        let d = dist[v as usize].unwrap();
        if d == cap {
            continue;
        }
        for &u in g.neighbors(v, direction) {
            if dist[u as usize].is_none() {
                dist[u as usize] = Some(d + 1);
                queue.push_back(u);
            }
        }
    }
    dist
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SimilarityMode {
    None,
    /// The first `ceil(rho * count)` queries are copies of one base query.
    DuplicateFraction(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenSpec {
    pub count: usize,
    /// Inclusive hop-constraint range, within `1..=15`.
    pub k_range: (u32, u32),
    pub seed: u64,
    pub similarity: SimilarityMode,
}

impl GenSpec {
    pub fn new(count: usize, k_range: (u32, u32), seed: u64) -> Self {
        GenSpec {
            count,
            k_range,
            seed,
            similarity: SimilarityMode::None,
        }
    }

    pub fn with_duplicates(mut self, rho: f64) -> Self {
        self.similarity = SimilarityMode::DuplicateFraction(rho);
        self
    }
}

const ATTEMPTS_PER_QUERY: usize = 1000;

fn draw_query(g: &DirectedGraph, spec: &GenSpec, rng: &mut ChaCha8Rng, id: u64) -> Result<Query> {
    let n = g.vertex_count();
    for _ in 0..ATTEMPTS_PER_QUERY {
        let k = rng.gen_range(spec.k_range.0..=spec.k_range.1);
        let s = rng.gen_range(0..n) as VertexId;
        let dist = truncated_bfs(g, s, Direction::Forward, k);
        let reachable: Vec<VertexId> = (0..n as VertexId)
            .filter(|&v| matches!(dist[v as usize], Some(d) if d >= 1))
            .collect();
        if let Some(&t) = reachable.choose(rng) {
            return Ok(Query::new(id, s, t, k));
        }
    }
    Err(Error::Generation(format!(
        "no reachable pair found after {ATTEMPTS_PER_QUERY} attempts"
    )))
}

/// Seeded random queries `(s, t, k)` with `t` reachable from `s` within `k`
/// hops.
pub fn generate_queries(g: &DirectedGraph, spec: &GenSpec) -> Result<Vec<Query>> {
    let (lo, hi) = spec.k_range;
    if !(1 <= lo && lo <= hi && hi <= 15) {
        return Err(Error::InvalidParameter(format!(
            "k range [{lo}, {hi}] must lie within [1, 15]"
        )));
    }
    if spec.count == 0 {
        return Ok(Vec::new());
    }
    if g.vertex_count() == 0 {
        return Err(Error::Generation("graph has no vertices".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let duplicates = match spec.similarity {
        SimilarityMode::None => 0,
        SimilarityMode::DuplicateFraction(rho) => {
            if !(0.0..=1.0).contains(&rho) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate fraction must lie in [0, 1], got {rho}"
                )));
            }
            ((rho * spec.count as f64 - 1e-9).ceil().max(0.0) as usize).min(spec.count)
        }
    };
    let mut out = Vec::with_capacity(spec.count);
    if duplicates > 0 {
        let base = draw_query(g, spec, &mut rng, 0)?;
        for id in 0..duplicates {
            out.push(Query { id: id as u64, ..base });
        }
    }
    for id in duplicates..spec.count {
        out.push(draw_query(g, spec, &mut rng, id as u64)?);
    }
    Ok(out)
}

/// Directed G(n, m) with `m = round(n * avg_degree)` distinct edges and no
/// self-loops.
pub fn erdos_renyi(n: usize, avg_degree: f64, seed: u64) -> DirectedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if n < 2 {
        return DirectedGraph::from_edges(n, std::iter::empty());
    }
    let max_edges = n * (n - 1);
    let m = ((n as f64 * avg_degree).round() as usize).min(max_edges);
    let mut seen = HashSet::with_capacity(m);
    let mut edges = Vec::with_capacity(m);
    while edges.len() < m {
        let u = rng.gen_range(0..n) as VertexId;
        let v = rng.gen_range(0..n) as VertexId;
        if u != v && seen.insert((u, v)) {
            edges.push((u, v));
        }
    }
    DirectedGraph::from_edges(n, edges)
}

/// Preferential attachment: each new vertex links to `per_vertex` existing
/// vertices chosen with probability proportional to degree, each link
/// pointing either way with equal chance.
pub fn preferential_attachment(n: usize, per_vertex: usize, seed: u64) -> DirectedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_vertex = per_vertex.max(1);
    let seed_size = (per_vertex + 1).min(n);
    let mut edges = Vec::new();
    let mut endpoints: Vec<VertexId> = Vec::new();
    for u in 0..seed_size as VertexId {
        for v in 0..u {
            edges.push(if rng.gen() { (u, v) } else { (v, u) });
            endpoints.extend([u, v]);
        }
    }
    if endpoints.is_empty() && n > 0 {
        endpoints.push(0);
    }
    for u in seed_size as VertexId..n as VertexId {
        let mut chosen: Vec<VertexId> = Vec::with_capacity(per_vertex);
        while chosen.len() < per_vertex.min(u as usize) {
            let v = endpoints[rng.gen_range(0..endpoints.len())];
            if !chosen.contains(&v) {
                chosen.push(v);
            }
        }
        for v in chosen {
            edges.push(if rng.gen() { (u, v) } else { (v, u) });
            endpoints.extend([u, v]);
        }
    }
    DirectedGraph::from_edges(n, edges)
}

const PAPER_GRAPH: &str = include_str!("../fixtures/paper_g.txt");
const PAPER_QUERIES: &str = include_str!("../fixtures/paper_queries.txt");

/// The 16-vertex running-example graph.
pub fn paper_graph() -> DirectedGraph {
    load_edge_list(PAPER_GRAPH.as_bytes()).expect("fixture graph parses")
}

/// The five fixture queries `q0..q4` on [`paper_graph`].
pub fn paper_queries() -> Vec<Query> {
    let raw = parse_queries(PAPER_QUERIES.as_bytes()).expect("fixture queries parse");
    let (ok, unknown) = resolve_queries(&paper_graph(), &raw);
    assert!(unknown.is_empty());
    ok
}
