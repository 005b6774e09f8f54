//! Hop-distance index shared by a batch of queries.
//!
//! All anchors of one direction are searched together by a bit-parallel
//! multi-source BFS: each vertex carries one bit per anchor for "seen" and
//! one for "in the current frontier", so a vertex reached by many anchors in
//! the same round is expanded once. An anchor whose cap is below the batch
//! maximum joins late, at round `k_max - cap`, so it runs exactly `cap`
//! rounds.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, Direction, VertexId};
use crate::query::Query;

/// Returned by [`DistanceMap::lookup`] for vertices beyond the cap. Large
/// enough to exceed any hop constraint, small enough that adding a few
/// path lengths cannot overflow.
pub const UNREACHABLE: u32 = u32::MAX / 4;

const ABSENT: u16 = u16::MAX;
const DUMP_VERSION: u8 = 1;

/// Truncated BFS distances from one anchor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistanceMap {
    anchor: VertexId,
    direction: Direction,
    cap: u32,
    dist: Vec<u16>,
    // Ordered by (distance, vertex).
    reached: Vec<VertexId>,
}

impl DistanceMap {
    fn empty(anchor: VertexId, direction: Direction, cap: u32, n: usize) -> Self {
        DistanceMap {
            anchor,
            direction,
            cap,
            dist: vec![ABSENT; n],
            reached: Vec::new(),
        }
    }

    fn set(&mut self, v: VertexId, hops: u32) {
        debug_assert_eq!(self.dist[v as usize], ABSENT);
        self.dist[v as usize] = hops as u16;
        self.reached.push(v);
    }

    // Reorders `reached` by (distance, vertex) with one counting pass.
    fn canonicalize(&mut self) {
        let mut starts = vec![0usize; self.cap as usize + 2];
        for &v in &self.reached {
            starts[self.dist[v as usize] as usize + 1] += 1;
        }
        for d in 1..starts.len() {
            starts[d] += starts[d - 1];
        }
        let mut order = vec![0; self.reached.len()];
        if self.reached.len() * 8 >= self.dist.len() {
            for (v, &d) in self.dist.iter().enumerate() {
                if d != ABSENT {
                    order[starts[d as usize]] = v as VertexId;
                    starts[d as usize] += 1;
                }
            }
        } else {
            self.reached.sort_unstable();
            for &v in &self.reached {
                let d = self.dist[v as usize] as usize;
                order[starts[d]] = v;
                starts[d] += 1;
            }
        }
        self.reached = order;
    }

    pub fn anchor(&self) -> VertexId {
        self.anchor
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    pub fn vertex_count(&self) -> usize {
        self.dist.len()
    }

    /// Hop distance from the anchor, or [`UNREACHABLE`] beyond the cap.
    #[inline]
    pub fn lookup(&self, v: VertexId) -> u32 {
        match self.dist[v as usize] {
            ABSENT => UNREACHABLE,
            d => d as u32,
        }
    }

    pub fn get(&self, v: VertexId) -> Option<u32> {
        match self.dist[v as usize] {
            ABSENT => None,
            d => Some(d as u32),
        }
    }

    /// Number of stored entries, the anchor included.
    pub fn len(&self) -> usize {
        self.reached.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reached.is_empty()
    }

    /// `(vertex, hops)` by increasing distance, ties by vertex id.
    pub fn iter(&self) -> impl Iterator<Item = (VertexId, u32)> + '_ {
        self.reached.iter().map(|&v| (v, self.dist[v as usize] as u32))
    }

    /// Vertices within `k` hops, in canonical order.
    pub fn within_slice(&self, k: u32) -> &[VertexId] {
        let end = self.reached.partition_point(|&v| self.dist[v as usize] as u32 <= k);
        &self.reached[..end]
    }

    /// Bitset over all vertices of those within `k` hops.
    pub fn within_bits(&self, k: u32) -> Vec<u64> {
        let k = k.min(ABSENT as u32 - 1) as u16;
        let pack = |chunk: &[u16]| {
            chunk
                .iter()
                .enumerate()
                .fold(0u64, |w, (i, &d)| w | (((d <= k) as u64) << i))
        };
        let mut chunks = self.dist.chunks_exact(64);
        let mut out: Vec<u64> = chunks
            .by_ref()
            .map(|c| {
                let c: &[u16; 64] = c.try_into().unwrap();
                let mut w = 0u64;
                for (i, &d) in c.iter().enumerate() {
                    w |= ((d <= k) as u64) << i;
                }
                w
            })
            .collect();
        if !chunks.remainder().is_empty() {
            out.push(pack(chunks.remainder()));
        }
        out
    }

    /// Iterator form of [`DistanceMap::within_slice`].
    pub fn within(&self, k: u32) -> impl Iterator<Item = VertexId> + '_ {
        self.iter().take_while(move |&(_, d)| d <= k).map(|(v, _)| v)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct SideStats {
    rounds: u32,
    touches: u64,
}

/// Forward maps keyed by query source, backward maps keyed by query target.
#[derive(Clone, Debug)]
pub struct BatchIndex {
    vertex_count: usize,
    k_max: u32,
    forward: BTreeMap<VertexId, DistanceMap>,
    backward: BTreeMap<VertexId, DistanceMap>,
    forward_stats: SideStats,
    backward_stats: SideStats,
}

impl BatchIndex {
    pub fn k_max(&self) -> u32 {
        self.k_max
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn forward(&self, source: VertexId) -> Option<&DistanceMap> {
        self.forward.get(&source)
    }

    pub fn backward(&self, target: VertexId) -> Option<&DistanceMap> {
        self.backward.get(&target)
    }

    /// Map anchored at `anchor` and searched along `direction`.
    pub fn map(&self, direction: Direction, anchor: VertexId) -> Option<&DistanceMap> {
        match direction {
            Direction::Forward => self.forward(anchor),
            Direction::Backward => self.backward(anchor),
        }
    }

    pub fn maps(&self, direction: Direction) -> impl Iterator<Item = &DistanceMap> + '_ {
        match direction {
            Direction::Forward => self.forward.values(),
            Direction::Backward => self.backward.values(),
        }
    }

    /// Frontier rounds the construction ran on one side.
    pub fn rounds(&self, direction: Direction) -> u32 {
        self.stats(direction).rounds
    }

    /// Frontier vertices expanded plus edges scanned on one side.
    pub fn touches(&self, direction: Direction) -> u64 {
        self.stats(direction).touches
    }

    fn stats(&self, direction: Direction) -> &SideStats {
        match direction {
            Direction::Forward => &self.forward_stats,
            Direction::Backward => &self.backward_stats,
        }
    }

    /// Same anchors, caps and distances; construction counters are ignored.
    pub fn same_distances(&self, other: &BatchIndex) -> bool {
        self.vertex_count == other.vertex_count
            && self.k_max == other.k_max
            && self.forward == other.forward
            && self.backward == other.backward
    }

    /// Binary dump: version byte, `n`, `k_max`, then for each direction
    /// the anchor count and per anchor `(anchor, cap, entries)` followed by
    /// its `(vertex, hops)` pairs sorted by vertex. Little-endian; ids are
    /// 32-bit and caps and hops are 16-bit.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&[DUMP_VERSION])?;
        out.write_all(&(self.vertex_count as u32).to_le_bytes())?;
        out.write_all(&self.k_max.to_le_bytes())?;
        for maps in [&self.forward, &self.backward] {
            out.write_all(&(maps.len() as u32).to_le_bytes())?;
            for map in maps.values() {
                out.write_all(&map.anchor.to_le_bytes())?;
                out.write_all(&(map.cap as u16).to_le_bytes())?;
                out.write_all(&(map.len() as u32).to_le_bytes())?;
                let mut entries: Vec<(VertexId, u32)> = map.iter().collect();
                entries.sort_unstable();
                for (v, d) in entries {
                    out.write_all(&v.to_le_bytes())?;
                    out.write_all(&(d as u16).to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<BatchIndex> {
        let version = read_u8(&mut input)?;
        if version != DUMP_VERSION {
            return Err(Error::IndexFormat(format!("unsupported version {version}")));
        }
        let n = read_u32(&mut input)? as usize;
        let k_max = read_u32(&mut input)?;
        let mut sides = Vec::with_capacity(2);
        for direction in [Direction::Forward, Direction::Backward] {
            let count = read_u32(&mut input)?;
            let mut maps = BTreeMap::new();
            for _ in 0..count {
                let anchor = read_u32(&mut input)?;
                let cap = read_u16(&mut input)? as u32;
                let entries = read_u32(&mut input)?;
                if anchor as usize >= n || cap > k_max {
                    return Err(Error::IndexFormat(format!("bad anchor record {anchor}")));
                }
                let mut map = DistanceMap::empty(anchor, direction, cap, n);
                for _ in 0..entries {
                    let v = read_u32(&mut input)?;
                    let d = read_u16(&mut input)? as u32;
                    if v as usize >= n || d > cap || map.get(v).is_some() {
                        return Err(Error::IndexFormat(format!("bad entry ({v}, {d}) for anchor {anchor}")));
                    }
                    map.set(v, d);
                }
                if map.get(anchor) != Some(0) {
                    return Err(Error::IndexFormat(format!("anchor {anchor} lacks distance 0")));
                }
                map.canonicalize();
                if maps.insert(anchor, map).is_some() {
                    return Err(Error::IndexFormat(format!("duplicate anchor {anchor}")));
                }
            }
            sides.push(maps);
        }
        let backward = sides.pop().unwrap();
        let forward = sides.pop().unwrap();
        Ok(BatchIndex {
            vertex_count: n,
            k_max,
            forward,
            backward,
            forward_stats: SideStats::default(),
            backward_stats: SideStats::default(),
        })
    }
}

fn read_exact<const N: usize, R: Read>(input: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    input.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::IndexFormat("truncated dump".into()),
        _ => Error::Io(e),
    })?;
    Ok(buf)
}

fn read_u8<R: Read>(input: &mut R) -> Result<u8> {
    Ok(read_exact::<1, _>(input)?[0])
}

fn read_u16<R: Read>(input: &mut R) -> Result<u16> {
    Ok(u16::from_le_bytes(read_exact(input)?))
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_exact(input)?))
}

/// Builds forward maps for every distinct source and backward maps for every
/// distinct target. Each map's cap is the largest `k` anchored there.
pub fn build_batch_index(graph: &DirectedGraph, queries: &[Query]) -> BatchIndex {
    let n = graph.vertex_count();
    for q in queries {
        assert!(
            (q.s as usize) < n && (q.t as usize) < n,
            "query {} endpoint out of range",
            q.id
        );
        assert!(q.k >= 1 && q.k < ABSENT as u32, "query {} has invalid k", q.id);
    }
    let k_max = queries.iter().map(|q| q.k).max().unwrap_or(0);
    let mut caps_f: BTreeMap<VertexId, u32> = BTreeMap::new();
    let mut caps_b: BTreeMap<VertexId, u32> = BTreeMap::new();
    for q in queries {
        let f = caps_f.entry(q.s).or_default();
        *f = (*f).max(q.k);
        let b = caps_b.entry(q.t).or_default();
        *b = (*b).max(q.k);
    }
    let ((forward, forward_stats), (backward, backward_stats)) = rayon::join(
        || multi_source_bfs(graph, Direction::Forward, &caps_f, k_max),
        || multi_source_bfs(graph, Direction::Backward, &caps_b, k_max),
    );
    BatchIndex {
        vertex_count: n,
        k_max,
        forward,
        backward,
        forward_stats,
        backward_stats,
    }
}

fn multi_source_bfs(
    graph: &DirectedGraph,
    direction: Direction,
    caps: &BTreeMap<VertexId, u32>,
    k_max: u32,
) -> (BTreeMap<VertexId, DistanceMap>, SideStats) {
    let n = graph.vertex_count();
    let anchors: Vec<(VertexId, u32)> = caps.iter().map(|(&a, &c)| (a, c)).collect();
    let mut maps: Vec<DistanceMap> = anchors
        .iter()
        .map(|&(a, c)| DistanceMap::empty(a, direction, c, n))
        .collect();
    let mut stats = SideStats::default();
    if anchors.is_empty() {
        return (BTreeMap::new(), stats);
    }

    if anchors.len() <= 64 {
        narrow_bfs(graph, direction, &anchors, k_max, &mut maps, &mut stats);
        return (finish(maps), stats);
    }
    let words = anchors.len().div_ceil(64);
    let mut seen = vec![0u64; n * words];
    let mut cur = vec![0u64; n * words];
    let mut next = vec![0u64; n * words];
    let mut cur_list: Vec<VertexId> = Vec::new();
    let mut next_list: Vec<VertexId> = Vec::new();
    let join_round: Vec<u32> = anchors.iter().map(|&(_, c)| k_max - c).collect();
    let mut new_bits = vec![0u64; words];

    for round in 0..k_max {
        // Anchors whose cap equals the remaining rounds enter now.
        for (i, &(a, _)) in anchors.iter().enumerate() {
            if join_round[i] != round {
                continue;
            }
            let row = a as usize * words;
            let (w, bit) = (i / 64, 1u64 << (i % 64));
            if cur[row..row + words].iter().all(|&x| x == 0) {
                cur_list.push(a);
            }
            seen[row + w] |= bit;
            cur[row + w] |= bit;
            maps[i].set(a, 0);
        }

        for &v in &cur_list {
            let neighbors = graph.neighbors(v, direction);
            stats.touches += 1 + neighbors.len() as u64;
            let vrow = v as usize * words;
            for &u in neighbors {
                let urow = u as usize * words;
                let mut any = false;
                for w in 0..words {
                    let bits = cur[vrow + w] & !seen[urow + w];
                    new_bits[w] = bits;
                    any |= bits != 0;
                }
                if !any {
                    continue;
                }
                if next[urow..urow + words].iter().all(|&x| x == 0) {
                    next_list.push(u);
                }
                for w in 0..words {
                    next[urow + w] |= new_bits[w];
                    seen[urow + w] |= new_bits[w];
                }
            }
        }

        for &v in &cur_list {
            let row = v as usize * words;
            cur[row..row + words].fill(0);
        }
        cur_list.clear();
        sort_frontier(&mut next_list, n, |u| {
            next[u * words..(u + 1) * words].iter().any(|&x| x != 0)
        });
        for &u in &next_list {
            let row = u as usize * words;
            for w in 0..words {
                let mut bits = next[row + w];
                while bits != 0 {
                    let i = w * 64 + bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    maps[i].set(u, round + 1 - join_round[i]);
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
        std::mem::swap(&mut cur_list, &mut next_list);
        stats.rounds += 1;
    }

    (finish(maps), stats)
}

// Sorts a frontier, rebuilding it from a vertex scan when it is dense.
fn sort_frontier(list: &mut Vec<VertexId>, n: usize, member: impl Fn(usize) -> bool) {
    if list.len() * 16 < n {
        list.sort_unstable();
    } else {
        list.clear();
        list.extend((0..n).filter(|&u| member(u)).map(|u| u as VertexId));
    }
}

// Each round assigns distances in ascending vertex order, so `reached` is
// already canonical.
fn finish(maps: Vec<DistanceMap>) -> BTreeMap<VertexId, DistanceMap> {
    maps.into_iter()
        .map(|m| {
            debug_assert!(m
                .iter()
                .zip(m.iter().skip(1))
                .all(|((a, da), (b, db))| (da, a) < (db, b)));
            (m.anchor, m)
        })
        .collect()
}

// Same rounds as the general loop with one machine word per vertex.
fn narrow_bfs(
    graph: &DirectedGraph,
    direction: Direction,
    anchors: &[(VertexId, u32)],
    k_max: u32,
    maps: &mut [DistanceMap],
    stats: &mut SideStats,
) {
    let n = graph.vertex_count();
    let mut seen = vec![0u64; n];
    let mut cur = vec![0u64; n];
    let mut next = vec![0u64; n];
    let mut cur_list: Vec<VertexId> = Vec::new();
    let mut next_list: Vec<VertexId> = Vec::new();
    let join_round: Vec<u32> = anchors.iter().map(|&(_, c)| k_max - c).collect();
    for round in 0..k_max {
        for (i, &(a, _)) in anchors.iter().enumerate() {
            if join_round[i] == round {
                if cur[a as usize] == 0 {
                    cur_list.push(a);
                }
                seen[a as usize] |= 1 << i;
                cur[a as usize] |= 1 << i;
                maps[i].set(a, 0);
            }
        }
        for &v in &cur_list {
            let neighbors = graph.neighbors(v, direction);
            stats.touches += 1 + neighbors.len() as u64;
            let bits = cur[v as usize];
            for &u in neighbors {
                let fresh = bits & !seen[u as usize];
                if fresh != 0 {
                    if next[u as usize] == 0 {
                        next_list.push(u);
                    }
                    next[u as usize] |= fresh;
                    seen[u as usize] |= fresh;
                }
            }
            cur[v as usize] = 0;
        }
        cur_list.clear();
        sort_frontier(&mut next_list, n, |u| next[u] != 0);
        for &u in &next_list {
            let mut bits = next[u as usize];
            while bits != 0 {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                maps[i].set(u, round + 1 - join_round[i]);
            }
        }
        std::mem::swap(&mut cur, &mut next);
        std::mem::swap(&mut cur_list, &mut next_list);
        stats.rounds += 1;
    }
}
