//! HC-s-t query type and the `id s t k` query-file format.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, VertexId};

/// Enumerate every simple path from `s` to `t` with at most `k` hops.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Query {
    pub id: u64,
    pub s: VertexId,
    pub t: VertexId,
    pub k: u32,
}

impl Query {
    pub fn new(id: u64, s: VertexId, t: VertexId, k: u32) -> Self {
        Query { id, s, t, k }
    }

    /// Depth of the forward half, `ceil(k / 2)`.
    pub fn forward_budget(&self) -> u32 {
        self.k.div_ceil(2)
    }

    /// Depth of the backward half, `floor(k / 2)`.
    pub fn backward_budget(&self) -> u32 {
        self.k / 2
    }
}

/// A query line before its endpoints are resolved against a graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RawQuery {
    pub id: u64,
    pub s: u64,
    pub t: u64,
    pub k: u32,
}

/// Parses `id s t k` lines. Blank lines and `#`/`%` comments are skipped.
pub fn parse_queries<R: BufRead>(reader: R) -> Result<Vec<RawQuery>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::parse(line_no, format!("expected `id s t k`, found {trimmed:?}")));
        }
        let num = |token: &str, what: &str| {
            token
                .parse::<u64>()
                .map_err(|_| Error::parse(line_no, format!("invalid {what} {token:?}")))
        };
        let id = num(fields[0], "query id")?;
        let s = num(fields[1], "source")?;
        let t = num(fields[2], "target")?;
        let k = num(fields[3], "hop constraint")?;
        if k == 0 || k > u16::MAX as u64 {
            return Err(Error::parse(
                line_no,
                format!("hop constraint must be in 1..={}, got {k}", u16::MAX),
            ));
        }
        out.push(RawQuery { id, s, t, k: k as u32 });
    }
    Ok(out)
}

/// Maps raw labels to dense vertices. Queries naming a label the graph does
/// not have are returned separately.
pub fn resolve_queries(graph: &DirectedGraph, raw: &[RawQuery]) -> (Vec<Query>, Vec<RawQuery>) {
    let mut ok = Vec::with_capacity(raw.len());
    let mut unknown = Vec::new();
    for r in raw {
        match (graph.vertex_of_label(r.s), graph.vertex_of_label(r.t)) {
            (Some(s), Some(t)) => ok.push(Query::new(r.id, s, t, r.k)),
            _ => unknown.push(*r),
        }
    }
    (ok, unknown)
}

/// Writes one `id s t k` line per query, using the graph's original labels.
pub fn write_queries<W: Write>(graph: &DirectedGraph, queries: &[Query], mut out: W) -> std::io::Result<()> {
    for q in queries {
        writeln!(out, "{} {} {} {}", q.id, graph.label(q.s), graph.label(q.t), q.k)?;
    }
    Ok(())
}
