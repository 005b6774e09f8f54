//! Single-query bidirectional enumeration: two pruned half searches joined
//! at a canonical split point.

use crate::graph::{DirectedGraph, Direction, VertexId};
use crate::index::{BatchIndex, DistanceMap};
use crate::path::{NodeIx, Path, PathStore};
use crate::query::Query;

/// A consumer bound for the pruning test: a step to `v` at depth `d` is
/// admitted when `offset + d + dist(v, target) <= total_k`, with the
/// distance taken on the opposite side's map anchored at `target`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PruneTarget {
    pub target: VertexId,
    pub total_k: u32,
    pub offset: u32,
}

/// Work counters shared by the baseline and the batch engine.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EnumCounters {
    /// Edges scanned by depth-first search.
    pub dfs_expansions: u64,
    /// Trie nodes copied out of cached stores.
    pub grafted_nodes: u64,
    /// Forward/backward pairings examined by joins.
    pub join_candidates: u64,
}

impl EnumCounters {
    pub fn add(&mut self, other: &EnumCounters) {
        self.dfs_expansions += other.dfs_expansions;
        self.grafted_nodes += other.grafted_nodes;
        self.join_candidates += other.join_candidates;
    }
}

/// Per-vertex marks valid for the current epoch only.
struct Stamps {
    mark: Vec<u32>,
    epoch: u32,
}

impl Stamps {
    fn new(n: usize) -> Self {
        Stamps {
            mark: vec![0; n],
            epoch: 0,
        }
    }

    fn next(&mut self) -> u32 {
        if self.epoch == u32::MAX {
            self.mark.fill(0);
            self.epoch = 0;
        }
        self.epoch += 1;
        self.epoch
    }

    fn set(&mut self, v: VertexId) {
        self.mark[v as usize] = self.epoch;
    }

    fn has(&self, v: VertexId) -> bool {
        self.mark[v as usize] == self.epoch
    }
}

/// Per-thread buffers sized to the graph.
pub(crate) struct Scratch {
    on_path: Vec<bool>,
    join: Stamps,
    anchors: Stamps,
}

impl Scratch {
    pub(crate) fn new(n: usize) -> Self {
        Scratch {
            on_path: vec![false; n],
            join: Stamps::new(n),
            anchors: Stamps::new(n),
        }
    }
}

/// A step to `v` at depth `d` passes when `d + map.lookup(v) <= slack`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Bound<'a> {
    pub map: &'a DistanceMap,
    pub slack: u32,
}

pub(crate) fn resolve_bounds<'a>(
    index: &'a BatchIndex,
    direction: Direction,
    targets: &[PruneTarget],
) -> Vec<Bound<'a>> {
    let mut by_target: Vec<(VertexId, i64)> = targets
        .iter()
        .map(|t| (t.target, t.total_k as i64 - t.offset as i64))
        .collect();
    by_target.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
    by_target.dedup_by_key(|t| t.0);
    // Loosest first so admitted steps stop early.
    by_target.sort_by_key(|t| std::cmp::Reverse(t.1));
    by_target
        .into_iter()
        .filter(|&(_, slack)| slack >= 0)
        .map(|(target, slack)| Bound {
            map: index
                .map(direction.opposite(), target)
                .unwrap_or_else(|| panic!("index has no {:?} map for {target}", direction.opposite())),
            slack: slack as u32,
        })
        .collect()
}

pub(crate) struct HalfSearch<'a> {
    pub graph: &'a DirectedGraph,
    /// Required when pruning.
    pub index: Option<&'a BatchIndex>,
    pub direction: Direction,
    pub prune: bool,
}

impl HalfSearch<'_> {
    /// Depth-first search from `start` recording every admitted prefix.
    ///
    /// `suppliers` are sealed stores whose paths may stand in for a
    /// subtree: stepping onto a supplier's anchor with at most its budget
    /// left copies its paths instead of recursing. A supplier anchored at
    /// `start` with enough budget replaces the whole search.
    pub(crate) fn run(
        &self,
        start: VertexId,
        budget: u32,
        targets: &[PruneTarget],
        suppliers: &[&PathStore],
        scratch: &mut Scratch,
        counters: &mut EnumCounters,
    ) -> PathStore {
        let bounds = if self.prune {
            let index = self.index.expect("pruning needs an index");
            resolve_bounds(index, self.direction, targets)
        } else {
            Vec::new()
        };
        self.run_bounded(start, budget, &bounds, suppliers, scratch, counters)
    }

    /// [`HalfSearch::run`] with the targets already resolved; a step
    /// passes if any bound admits it.
    pub(crate) fn run_bounded(
        &self,
        start: VertexId,
        budget: u32,
        bounds: &[Bound],
        suppliers: &[&PathStore],
        scratch: &mut Scratch,
        counters: &mut EnumCounters,
    ) -> PathStore {
        let mut store = PathStore::new(self.direction, start, budget);
        let Scratch { on_path, anchors, .. } = scratch;
        on_path[start as usize] = true;

        let admits = |v: VertexId, depth: u32| -> bool {
            !self.prune || bounds.iter().any(|b| depth.saturating_add(b.map.lookup(v)) <= b.slack)
        };

        if let Some(root) = suppliers
            .iter()
            .filter(|s| s.anchor() == start && s.budget() >= budget)
            .min_by_key(|s| s.budget())
        {
            counters.grafted_nodes += graft(&mut store, PathStore::ROOT, 0, root, budget, on_path, &admits);
            on_path[start as usize] = false;
            store.seal();
            return store;
        }
        anchors.next();
        for s in suppliers {
            anchors.set(s.anchor());
        }

        // (node, vertex, next neighbour position)
        let mut stack: Vec<(NodeIx, VertexId, usize)> = vec![(PathStore::ROOT, start, 0)];
        while let Some(&(node, v, pos)) = stack.last() {
            let depth = (stack.len() - 1) as u32;
            let neighbors = self.graph.neighbors(v, self.direction);
            if depth == budget || pos == neighbors.len() {
                on_path[v as usize] = false;
                stack.pop();
                continue;
            }
            stack.last_mut().unwrap().2 += 1;
            counters.dfs_expansions += 1;
            let u = neighbors[pos];
            let child_depth = depth + 1;
            if on_path[u as usize] || !admits(u, child_depth) {
                continue;
            }
            let child = store.push(u, node);
            let remaining = budget - child_depth;
            if anchors.has(u) {
                if let Some(sup) = suppliers
                    .iter()
                    .filter(|s| s.anchor() == u && s.budget() >= remaining)
                    .min_by_key(|s| s.budget())
                {
                    counters.grafted_nodes += graft(&mut store, child, child_depth, sup, remaining, on_path, &admits);
                    continue;
                }
            }
            on_path[u as usize] = true;
            stack.push((child, u, 0));
        }
        store.seal();
        store
    }
}

/// Copies `supplier`'s paths of at most `max_depth` hops under node `at`,
/// which sits at depth `base`. Subtrees reaching a vertex marked in
/// `blocked` or rejected by `admits` are skipped.
pub(crate) fn graft(
    out: &mut PathStore,
    at: NodeIx,
    base: u32,
    supplier: &PathStore,
    max_depth: u32,
    blocked: &[bool],
    admits: &impl Fn(VertexId, u32) -> bool,
) -> u64 {
    debug_assert_eq!(out.vertex(at), supplier.anchor());
    let mut parents: Vec<NodeIx> = vec![at; max_depth as usize + 1];
    let mut copied = 0;
    let mut i: NodeIx = 1;
    let len = supplier.len() as NodeIx;
    while i < len {
        let depth = supplier.depth(i);
        let v = supplier.vertex(i);
        if depth > max_depth || blocked[v as usize] || !admits(v, base + depth) {
            i = supplier.subtree_end(i);
            continue;
        }
        let node = out.push(v, parents[depth as usize - 1]);
        parents[depth as usize] = node;
        copied += 1;
        i += 1;
    }
    copied
}

/// All simple paths from `start` of at most `budget` hops, every prefix
/// included, searched along `direction` and pruned against `targets`.
pub fn search_half(
    graph: &DirectedGraph,
    index: &BatchIndex,
    direction: Direction,
    start: VertexId,
    budget: u32,
    targets: &[PruneTarget],
) -> PathStore {
    let search = HalfSearch {
        graph,
        index: Some(index),
        direction,
        prune: true,
    };
    let mut scratch = Scratch::new(graph.vertex_count());
    search.run(start, budget, targets, &[], &mut scratch, &mut EnumCounters::default())
}

/// [`search_half`] without pruning: every simple path from `start` of at
/// most `budget` hops.
pub fn search_half_exhaustive(graph: &DirectedGraph, direction: Direction, start: VertexId, budget: u32) -> PathStore {
    let search = HalfSearch {
        graph,
        index: None,
        direction,
        prune: false,
    };
    let mut scratch = Scratch::new(graph.vertex_count());
    search.run(start, budget, &[], &[], &mut scratch, &mut EnumCounters::default())
}

/// Joins a forward store from `s` and a backward store from `t` into the
/// simple `s`-`t` paths of at most `k` hops.
///
/// Each result is split once: its forward part has `ceil(k/2)` hops, or the
/// whole path is forward when it is shorter than that.
pub(crate) fn join_with<F>(
    forward: &PathStore,
    backward: &PathStore,
    k: u32,
    scratch: &mut Scratch,
    counters: &mut EnumCounters,
    mut sink: F,
) -> u64
where
    F: FnMut(&[VertexId]),
{
    debug_assert_eq!(forward.side(), Direction::Forward);
    debug_assert_eq!(backward.side(), Direction::Backward);
    let split = k.div_ceil(2);
    let t = backward.anchor();
    let mut buf: Vec<VertexId> = Vec::with_capacity(k as usize + 1);
    let mut emitted = 0;
    for f in 0..forward.len() as NodeIx {
        let depth = forward.depth(f);
        let x = forward.vertex(f);
        let partners: &[NodeIx] = if depth == split {
            backward.bucket(x)
        } else if depth < split && x == t {
            &[PathStore::ROOT]
        } else {
            continue;
        };
        if partners.is_empty() {
            continue;
        }
        scratch.join.next();
        buf.clear();
        for v in forward.chain(f) {
            scratch.join.set(v);
            buf.push(v);
        }
        buf.reverse();
        let head = buf.len();
        for &b in partners {
            counters.join_candidates += 1;
            if depth + backward.depth(b) > k {
                continue;
            }
            buf.truncate(head);
            let simple = backward.chain(b).skip(1).all(|v| {
                buf.push(v);
                !scratch.join.has(v)
            });
            if simple {
                emitted += 1;
                sink(&buf);
            }
        }
    }
    emitted
}

/// Materializing form of the canonical-split join.
pub fn join_halves(forward: &PathStore, backward: &PathStore, k: u32) -> Vec<Path> {
    let n = forward
        .paths()
        .iter()
        .chain(backward.paths().iter())
        .flat_map(|p| p.vertices().to_vec())
        .max()
        .map_or(0, |m| m as usize + 1);
    let mut scratch = Scratch::new(n);
    let mut out = Vec::new();
    join_with(forward, backward, k, &mut scratch, &mut EnumCounters::default(), |p| {
        out.push(Path::new(p.to_vec()))
    });
    out
}

/// Runs both baseline half searches for `q` and joins them into `sink`.
pub(crate) fn enumerate_into<F>(
    graph: &DirectedGraph,
    index: &BatchIndex,
    q: &Query,
    prune: bool,
    scratch: &mut Scratch,
    counters: &mut EnumCounters,
    sink: F,
) -> u64
where
    F: FnMut(&[VertexId]),
{
    if q.s == q.t {
        return 0;
    }
    let forward = HalfSearch {
        graph,
        index: Some(index),
        direction: Direction::Forward,
        prune,
    }
    .run(
        q.s,
        q.forward_budget(),
        &[PruneTarget {
            target: q.t,
            total_k: q.k,
            offset: 0,
        }],
        &[],
        scratch,
        counters,
    );
    let backward = HalfSearch {
        graph,
        index: Some(index),
        direction: Direction::Backward,
        prune,
    }
    .run(
        q.t,
        q.backward_budget(),
        &[PruneTarget {
            target: q.s,
            total_k: q.k,
            offset: 0,
        }],
        &[],
        scratch,
        counters,
    );
    join_with(&forward, &backward, q.k, scratch, counters, sink)
}

/// All simple `q.s`-`q.t` paths with at most `q.k` hops.
pub fn enumerate_single(graph: &DirectedGraph, index: &BatchIndex, q: &Query) -> Vec<Path> {
    let mut scratch = Scratch::new(graph.vertex_count());
    let mut out = Vec::new();
    enumerate_into(graph, index, q, true, &mut scratch, &mut EnumCounters::default(), |p| {
        out.push(Path::new(p.to_vec()))
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::build_batch_index;

    fn p(v: &[u32]) -> Path {
        Path::new(v.to_vec())
    }

    fn sorted(mut v: Vec<Path>) -> Vec<Path> {
        v.sort();
        v
    }

    #[test]
    fn budget_zero_is_root_only() {
        let g = DirectedGraph::from_edges(3, [(0, 1), (1, 2)]);
        let q = Query::new(0, 0, 2, 1);
        let idx = build_batch_index(&g, &[q]);
        let store = search_half(&g, &idx, Direction::Backward, 2, 0, &[]);
        assert_eq!(store.paths(), vec![p(&[2])]);
    }

    #[test]
    fn single_edge_emitted_once() {
        let g = DirectedGraph::from_edges(2, [(0, 1)]);
        for k in 1..=4 {
            let q = Query::new(0, 0, 1, k);
            let idx = build_batch_index(&g, &[q]);
            assert_eq!(enumerate_single(&g, &idx, &q), vec![p(&[0, 1])], "k={k}");
        }
    }

    #[test]
    fn same_endpoints_and_unreachable() {
        let g = DirectedGraph::from_edges(3, [(0, 1), (1, 0)]);
        let q = Query::new(0, 0, 0, 4);
        let idx = build_batch_index(&g, &[q]);
        assert!(enumerate_single(&g, &idx, &q).is_empty());
        let q = Query::new(1, 0, 2, 4);
        let idx = build_batch_index(&g, &[q]);
        assert!(enumerate_single(&g, &idx, &q).is_empty());
    }

    #[test]
    fn complete_digraph_k4() {
        let edges: Vec<_> = (0..4u32)
            .flat_map(|u| (0..4u32).filter(move |&v| v != u).map(move |v| (u, v)))
            .collect();
        let g = DirectedGraph::from_edges(4, edges);
        let q = Query::new(0, 0, 1, 3);
        let idx = build_batch_index(&g, &[q]);
        let got = sorted(enumerate_single(&g, &idx, &q));
        assert_eq!(
            got,
            vec![
                p(&[0, 1]),
                p(&[0, 2, 1]),
                p(&[0, 2, 3, 1]),
                p(&[0, 3, 1]),
                p(&[0, 3, 2, 1])
            ]
        );
    }

    #[test]
    fn join_rejects_repeats() {
        // 0 -> 1 -> 2 -> 1 is not simple; 0 -> 2 -> 1 is.
        let g = DirectedGraph::from_edges(3, [(0, 1), (1, 2), (2, 1), (0, 2)]);
        let q = Query::new(0, 0, 1, 3);
        let idx = build_batch_index(&g, &[q]);
        let got = sorted(enumerate_single(&g, &idx, &q));
        assert_eq!(got, vec![p(&[0, 1]), p(&[0, 2, 1])]);
    }

    #[test]
    fn graft_truncates_and_blocks() {
        let mut sup = PathStore::new(Direction::Forward, 5, 3);
        let a = sup.push(6, PathStore::ROOT);
        let b = sup.push(7, a);
        sup.push(8, b);
        sup.push(9, PathStore::ROOT);
        sup.seal();
        let mut out = PathStore::new(Direction::Forward, 1, 3);
        let at = out.push(5, PathStore::ROOT);
        let mut blocked = vec![false; 10];
        blocked[9] = true;
        let copied = graft(&mut out, at, 1, &sup, 2, &blocked, &|_, _| true);
        assert_eq!(copied, 2);
        out.seal();
        assert_eq!(out.maximal_paths(), vec![p(&[1, 5, 6, 7])]);
    }

    #[test]
    fn graft_skips_rejected_subtrees() {
        let mut sup = PathStore::new(Direction::Forward, 5, 3);
        let a = sup.push(6, PathStore::ROOT);
        sup.push(7, a);
        sup.push(9, PathStore::ROOT);
        sup.seal();
        let mut out = PathStore::new(Direction::Forward, 1, 3);
        let at = out.push(5, PathStore::ROOT);
        let blocked = vec![false; 10];
        let copied = graft(&mut out, at, 1, &sup, 2, &blocked, &|v, d| v != 6 && d <= 2);
        assert_eq!(copied, 1);
        out.seal();
        assert_eq!(out.maximal_paths(), vec![p(&[1, 5, 9])]);
    }
}
