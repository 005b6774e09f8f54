//! Immutable directed graph in CSR form with both adjacency views.

use std::io::{BufRead, Write};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Dense vertex identifier in `[0, vertex_count)`.
pub type VertexId = u32;

/// Which adjacency a traversal follows: out-edges of `G` or out-edges of
/// the reverse graph `G_r` (the in-edges of `G`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn opposite(self) -> Direction {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        }
    }
}

/// Unweighted directed graph with sorted, duplicate-free neighbour lists.
///
/// The reverse graph is the in-view of the same structure, so a search on
/// `G_r` is a search over [`DirectedGraph::in_neighbors`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirectedGraph {
    out_offsets: Vec<usize>,
    out_targets: Vec<VertexId>,
    in_offsets: Vec<usize>,
    in_sources: Vec<VertexId>,
    // Original input ids, ascending. `None` means identity.
    labels: Option<Vec<u64>>,
}

impl DirectedGraph {
    /// Builds a graph over `vertex_count` vertices. Parallel edges collapse.
    ///
    /// Panics if an endpoint is out of range.
    pub fn from_edges<I>(vertex_count: usize, edges: I) -> Self
    where
        I: IntoIterator<Item = (VertexId, VertexId)>,
    {
        let mut pairs: Vec<(VertexId, VertexId)> = edges.into_iter().collect();
        for &(u, v) in &pairs {
            assert!(
                (u as usize) < vertex_count && (v as usize) < vertex_count,
                "edge ({u}, {v}) out of range for {vertex_count} vertices"
            );
        }
        pairs.sort_unstable();
        pairs.dedup();

        let (out_offsets, out_targets) = csr(vertex_count, pairs.iter().copied());
        let mut reversed: Vec<(VertexId, VertexId)> = pairs.iter().map(|&(u, v)| (v, u)).collect();
        reversed.sort_unstable();
        let (in_offsets, in_sources) = csr(vertex_count, reversed.into_iter());

        DirectedGraph {
            out_offsets,
            out_targets,
            in_offsets,
            in_sources,
            labels: None,
        }
    }

    fn with_labels(mut self, labels: Vec<u64>) -> Self {
        debug_assert_eq!(labels.len(), self.vertex_count());
        debug_assert!(labels.windows(2).all(|w| w[0] < w[1]));
        let identity = labels.iter().enumerate().all(|(i, &l)| i as u64 == l);
        self.labels = if identity { None } else { Some(labels) };
        self
    }

    pub fn vertex_count(&self) -> usize {
        self.out_offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.out_targets.len()
    }

    pub fn out_neighbors(&self, v: VertexId) -> &[VertexId] {
        let v = v as usize;
        &self.out_targets[self.out_offsets[v]..self.out_offsets[v + 1]]
    }

    pub fn in_neighbors(&self, v: VertexId) -> &[VertexId] {
        let v = v as usize;
        &self.in_sources[self.in_offsets[v]..self.in_offsets[v + 1]]
    }

    #[inline]
    pub fn neighbors(&self, v: VertexId, direction: Direction) -> &[VertexId] {
        match direction {
            Direction::Forward => self.out_neighbors(v),
            Direction::Backward => self.in_neighbors(v),
        }
    }

    pub fn out_degree(&self, v: VertexId) -> usize {
        self.out_neighbors(v).len()
    }

    pub fn in_degree(&self, v: VertexId) -> usize {
        self.in_neighbors(v).len()
    }

    pub fn has_edge(&self, u: VertexId, v: VertexId) -> bool {
        self.out_neighbors(u).binary_search(&v).is_ok()
    }

    /// All edges in `(source, target)` order.
    pub fn edges(&self) -> impl Iterator<Item = (VertexId, VertexId)> + '_ {
        (0..self.vertex_count() as VertexId).flat_map(move |u| self.out_neighbors(u).iter().map(move |&v| (u, v)))
    }

    /// The reverse graph as a standalone value (views swapped).
    pub fn transpose(&self) -> DirectedGraph {
        DirectedGraph {
            out_offsets: self.in_offsets.clone(),
            out_targets: self.in_sources.clone(),
            in_offsets: self.out_offsets.clone(),
            in_sources: self.out_targets.clone(),
            labels: self.labels.clone(),
        }
    }

    /// Original input id of a dense vertex.
    pub fn label(&self, v: VertexId) -> u64 {
        match &self.labels {
            None => v as u64,
            Some(labels) => labels[v as usize],
        }
    }

    /// Dense vertex for an original input id, if the graph has it.
    pub fn vertex_of_label(&self, label: u64) -> Option<VertexId> {
        match &self.labels {
            None => (label < self.vertex_count() as u64).then_some(label as VertexId),
            Some(labels) => labels.binary_search(&label).ok().map(|i| i as VertexId),
        }
    }

    /// Writes an `n m` header followed by one `u v` line per edge, using
    /// original labels.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.vertex_count(), self.edge_count())?;
        for (u, v) in self.edges() {
            writeln!(out, "{} {}", self.label(u), self.label(v))?;
        }
        Ok(())
    }
}

fn csr<I>(n: usize, sorted_pairs: I) -> (Vec<usize>, Vec<VertexId>)
where
    I: Iterator<Item = (VertexId, VertexId)>,
{
    let mut offsets = vec![0usize; n + 1];
    let mut targets = Vec::new();
    for (u, v) in sorted_pairs {
        offsets[u as usize + 1] += 1;
        targets.push(v);
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    (offsets, targets)
}

// Ids are kept verbatim unless the id range is much larger than the number
// of ids actually used.
fn is_sparse(max_id: u64, distinct: usize) -> bool {
    max_id >= u32::MAX as u64 || max_id + 1 > 4 * distinct as u64 + 64
}

fn parse_id(token: &str, line: usize) -> Result<u64> {
    token.parse::<u64>().map_err(|_| {
        if token.starts_with('-') && token[1..].parse::<u64>().is_ok() {
            Error::parse(line, format!("negative vertex id {token}"))
        } else {
            Error::parse(line, format!("expected an integer vertex id, found {token:?}"))
        }
    })
}

/// Reads a whitespace-separated edge list.
///
/// Lines starting with `#` or `%` are comments. The first data line is read
/// as an `n m` header when exactly `m` edge lines follow and every id in them
/// is below `n`; otherwise it is an ordinary edge. Without a header the graph
/// has `1 + max id` vertices, unless that range is very sparse, in which case
/// the ids are compacted in ascending order and kept as labels.
pub fn load_edge_list<R: BufRead>(reader: R) -> Result<DirectedGraph> {
    let mut rows: Vec<(usize, u64, u64)> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('%') {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let (a, b) = match (fields.next(), fields.next(), fields.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(Error::parse(
                    line_no,
                    format!("expected two vertex ids, found {trimmed:?}"),
                ))
            }
        };
        rows.push((line_no, parse_id(a, line_no)?, parse_id(b, line_no)?));
    }

    let header = rows.first().copied().filter(|&(_, n, m)| {
        let rest = &rows[1..];
        rest.len() as u64 == m && rest.iter().all(|&(_, u, v)| u < n && v < n)
    });
    if let Some((line_no, n, _)) = header {
        if n > u32::MAX as u64 {
            return Err(Error::parse(line_no, format!("vertex count {n} too large")));
        }
        let edges = rows[1..].iter().map(|&(_, u, v)| (u as VertexId, v as VertexId));
        return Ok(DirectedGraph::from_edges(n as usize, edges));
    }

    let mut ids: Vec<u64> = rows.iter().flat_map(|&(_, u, v)| [u, v]).collect();
    ids.sort_unstable();
    ids.dedup();
    let max_id = ids.last().copied();
    match max_id {
        None => Ok(DirectedGraph::from_edges(0, std::iter::empty())),
        Some(max_id) if !is_sparse(max_id, ids.len()) => {
            let edges = rows.iter().map(|&(_, u, v)| (u as VertexId, v as VertexId));
            Ok(DirectedGraph::from_edges(max_id as usize + 1, edges))
        }
        Some(_) => {
            let dense = |label: u64| ids.binary_search(&label).unwrap() as VertexId;
            let edges: Vec<_> = rows.iter().map(|&(_, u, v)| (dense(u), dense(v))).collect();
            Ok(DirectedGraph::from_edges(ids.len(), edges).with_labels(ids))
        }
    }
}

/// Induced subgraph on a seeded uniform sample of `max(1, round(fraction * n))`
/// vertices, relabelled densely in ascending original order.
///
/// Fails when `fraction` is outside `(0, 1]`.
pub fn induce_sample(graph: &DirectedGraph, fraction: f64, seed: u64) -> Result<DirectedGraph> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "sample fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let n = graph.vertex_count();
    if n == 0 {
        return Ok(graph.clone());
    }
    let keep = ((fraction * n as f64).round() as usize).clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept = sample(&mut rng, n, keep).into_vec();
    kept.sort_unstable();

    let mut new_id = vec![VertexId::MAX; n];
    for (i, &old) in kept.iter().enumerate() {
        new_id[old] = i as VertexId;
    }
    let edges: Vec<(VertexId, VertexId)> = graph
        .edges()
        .filter_map(|(u, v)| {
            let (nu, nv) = (new_id[u as usize], new_id[v as usize]);
            (nu != VertexId::MAX && nv != VertexId::MAX).then_some((nu, nv))
        })
        .collect();
    let labels = kept.iter().map(|&old| graph.label(old as VertexId)).collect();
    Ok(DirectedGraph::from_edges(keep, edges).with_labels(labels))
}
