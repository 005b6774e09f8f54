//! Detection of shared single-source sub-queries inside a query group.
//!
//! Each half of each query is a single-source query `(anchor, budget)`: all
//! simple paths of at most `budget` hops from `anchor` on one side's graph.
//! Detection sweeps the queries of a group outward together, one level of
//! remaining budget at a time. Where several of them arrive at the same
//! vertex with the same remaining budget, one new node anchored there is
//! created and enumerated on their behalf. The result is a DAG per side,
//! with edges running from the node whose cached paths are reused to the
//! node that reuses them.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};
use std::fmt::Write as _;

use rustc_hash::{FxHashMap, FxHashSet};

use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, Direction, VertexId};
use crate::index::{BatchIndex, DistanceMap, UNREACHABLE};
use crate::query::Query;
use crate::single::PruneTarget;

pub type NodeId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Origin {
    /// One half of a query in the group.
    Initial,
    /// Created where several nodes meet.
    Detected,
}

/// Single-source query: every simple path of at most `budget` hops from
/// `anchor` along `side`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HcsQuery {
    pub anchor: VertexId,
    pub budget: u32,
    pub side: Direction,
    pub origin: Origin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SharingNode {
    Hcs(HcsQuery),
    /// The s-t query at this position of the group.
    Target(usize),
}

/// Endpoint data a target node needs for pruning.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct TargetInfo {
    far: VertexId,
    k: u32,
    half: u32,
}

/// One side of the sharing graph of a group.
#[derive(Clone, Debug)]
pub struct SharingGraph {
    side: Direction,
    nodes: Vec<SharingNode>,
    out_edges: Vec<Vec<NodeId>>,
    in_edges: Vec<Vec<NodeId>>,
    targets: Vec<TargetInfo>,
    target_nodes: Vec<NodeId>,
    touches: u64,
    // Reused by cycle checks.
    walk: Vec<u64>,
    walk_epoch: u64,
    walk_stack: Vec<NodeId>,
}

/// True when `qa` is a sub-query of `qb`: `qa.budget <= qb.budget - dist`,
/// with `dist` the hop distance from `qb.anchor` to `qa.anchor`.
pub fn dominates<F>(qa: &HcsQuery, qb: &HcsQuery, dist: F) -> bool
where
    F: FnOnce(VertexId, VertexId) -> u32,
{
    let d = dist(qb.anchor, qa.anchor);
    d != UNREACHABLE && qa.budget as u64 + d as u64 <= qb.budget as u64
}

impl SharingGraph {
    fn new(side: Direction) -> Self {
        SharingGraph {
            side,
            nodes: Vec::new(),
            out_edges: Vec::new(),
            in_edges: Vec::new(),
            targets: Vec::new(),
            target_nodes: Vec::new(),
            touches: 0,
            walk: Vec::new(),
            walk_epoch: 0,
            walk_stack: Vec::new(),
        }
    }

    fn add_node(&mut self, node: SharingNode) -> NodeId {
        self.nodes.push(node);
        self.out_edges.push(Vec::new());
        self.in_edges.push(Vec::new());
        self.nodes.len() - 1
    }

    fn has_edge(&self, from: NodeId, to: NodeId) -> bool {
        self.out_edges[from].contains(&to)
    }

    fn add_edge(&mut self, from: NodeId, to: NodeId) {
        debug_assert_ne!(from, to);
        if !self.has_edge(from, to) {
            self.out_edges[from].push(to);
            self.in_edges[to].push(from);
        }
    }

    fn reaches(&mut self, from: NodeId, to: NodeId) -> bool {
        self.walk.resize(self.nodes.len(), 0);
        self.walk_epoch += 1;
        let epoch = self.walk_epoch;
        let mut stack = std::mem::take(&mut self.walk_stack);
        stack.clear();
        stack.push(from);
        self.walk[from] = epoch;
        let mut found = false;
        while let Some(x) = stack.pop() {
            if x == to {
                found = true;
                break;
            }
            for &y in &self.out_edges[x] {
                if self.walk[y] != epoch {
                    self.walk[y] = epoch;
                    stack.push(y);
                }
            }
        }
        self.walk_stack = stack;
        found
    }

    /// Adds `from -> to` unless that would close a cycle.
    fn try_add_edge(&mut self, from: NodeId, to: NodeId) -> bool {
        if from == to || self.reaches(to, from) {
            return false;
        }
        self.add_edge(from, to);
        true
    }

    pub fn side(&self) -> Direction {
        self.side
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &SharingNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[SharingNode] {
        &self.nodes
    }

    pub fn hcs(&self, id: NodeId) -> Option<&HcsQuery> {
        match &self.nodes[id] {
            SharingNode::Hcs(h) => Some(h),
            SharingNode::Target(_) => None,
        }
    }

    pub fn out_neighbors(&self, id: NodeId) -> &[NodeId] {
        &self.out_edges[id]
    }

    pub fn in_neighbors(&self, id: NodeId) -> &[NodeId] {
        &self.in_edges[id]
    }

    pub fn edge_count(&self) -> usize {
        self.out_edges.iter().map(Vec::len).sum()
    }

    /// Target node of the query at group position `pos`.
    pub fn target_node(&self, pos: usize) -> NodeId {
        self.target_nodes[pos]
    }

    /// Initial half node feeding the query at group position `pos`.
    pub fn initial_node(&self, pos: usize) -> NodeId {
        self.in_edges[self.target_nodes[pos]][0]
    }

    pub fn detected_nodes(&self) -> impl Iterator<Item = (NodeId, &HcsQuery)> + '_ {
        self.nodes.iter().enumerate().filter_map(|(i, n)| match n {
            SharingNode::Hcs(h) if h.origin == Origin::Detected => Some((i, h)),
            _ => None,
        })
    }

    pub fn hcs_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, SharingNode::Hcs(_))).count()
    }

    /// Vertex-and-edge work done by detection on this side.
    pub fn touches(&self) -> u64 {
        self.touches
    }

    /// Kahn's algorithm, smallest ready id first.
    pub fn topological_order(&self) -> Result<Vec<NodeId>> {
        let mut indegree: Vec<usize> = self.in_edges.iter().map(Vec::len).collect();
        let mut ready: BinaryHeap<Reverse<NodeId>> = indegree
            .iter()
            .enumerate()
            .filter(|&(_, &d)| d == 0)
            .map(|(i, _)| Reverse(i))
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(Reverse(x)) = ready.pop() {
            order.push(x);
            for &y in &self.out_edges[x] {
                indegree[y] -= 1;
                if indegree[y] == 0 {
                    ready.push(Reverse(y));
                }
            }
        }
        if order.len() != self.nodes.len() {
            return Err(Error::Invariant(format!(
                "{} sharing graph has a cycle",
                self.side.as_str()
            )));
        }
        Ok(order)
    }

    /// Group positions of the queries downstream of each node.
    pub fn consumers(&self) -> Result<Vec<Vec<usize>>> {
        let order = self.topological_order()?;
        let mut sets: Vec<Vec<usize>> = vec![Vec::new(); self.nodes.len()];
        for &x in order.iter().rev() {
            let mut set = match self.nodes[x] {
                SharingNode::Target(pos) => vec![pos],
                SharingNode::Hcs(_) => Vec::new(),
            };
            for &y in &self.out_edges[x] {
                set.extend_from_slice(&sets[y]);
            }
            set.sort_unstable();
            set.dedup();
            sets[x] = set;
        }
        Ok(sets)
    }

    /// Far endpoint, hop constraint and half budget of the query at group
    /// position `pos`.
    pub(crate) fn target_info(&self, pos: usize) -> (VertexId, u32, u32) {
        let t = self.targets[pos];
        (t.far, t.k, t.half)
    }

    pub(crate) fn query_count(&self) -> usize {
        self.targets.len()
    }

    /// Per-consumer pruning bounds for an HC-s node, given its downstream
    /// queries.
    pub fn prune_targets(&self, id: NodeId, consumers: &[usize]) -> Vec<PruneTarget> {
        let budget = self.hcs(id).map_or(0, |h| h.budget);
        let mut out: Vec<PruneTarget> = consumers
            .iter()
            .map(|&pos| {
                let t = self.targets[pos];
                PruneTarget {
                    target: t.far,
                    total_k: t.k,
                    offset: t.half.saturating_sub(budget),
                }
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Structural checks: acyclic; HC-s nodes on this side; at most one
    /// detected node per anchor; each target fed by exactly one initial
    /// node; no HC-s node without a consumer.
    pub fn check_invariants(&self) -> Result<()> {
        self.topological_order()?;
        let mut detected_anchors = FxHashSet::default();
        for (id, node) in self.nodes.iter().enumerate() {
            match node {
                SharingNode::Hcs(h) => {
                    if h.side != self.side {
                        return Err(Error::Invariant(format!("node {id} is on the wrong side")));
                    }
                    if h.origin == Origin::Detected && !detected_anchors.insert(h.anchor) {
                        return Err(Error::Invariant(format!("two detected nodes anchored at {}", h.anchor)));
                    }
                    if self.out_edges[id].is_empty() {
                        return Err(Error::Invariant(format!("node {id} has no consumer")));
                    }
                }
                SharingNode::Target(_) => {
                    let ins = &self.in_edges[id];
                    let ok = ins.len() == 1
                        && matches!(
                            self.nodes[ins[0]],
                            SharingNode::Hcs(HcsQuery {
                                origin: Origin::Initial,
                                ..
                            })
                        );
                    if !ok || !self.out_edges[id].is_empty() {
                        return Err(Error::Invariant(format!("target node {id} is miswired")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Graphviz rendering. `label` maps dense vertices to printed ids and
    /// `query_id` group positions to query ids.
    pub fn to_dot<L, Q>(&self, name: &str, label: L, query_id: Q) -> String
    where
        L: Fn(VertexId) -> u64,
        Q: Fn(usize) -> u64,
    {
        let mut s = String::new();
        let _ = writeln!(s, "digraph \"{name}\" {{");
        for (id, node) in self.nodes.iter().enumerate() {
            let _ = match node {
                SharingNode::Hcs(h) => writeln!(
                    s,
                    "  n{id} [label=\"v{} b={}\"{}];",
                    label(h.anchor),
                    h.budget,
                    if h.origin == Origin::Detected {
                        " style=bold"
                    } else {
                        ""
                    }
                ),
                SharingNode::Target(pos) => {
                    writeln!(s, "  n{id} [label=\"q{}\" shape=box];", query_id(*pos))
                }
            };
        }
        for (from, outs) in self.out_edges.iter().enumerate() {
            for to in outs {
                let _ = writeln!(s, "  n{from} -> n{to};");
            }
        }
        s.push_str("}\n");
        s
    }
}

/// Builds one side of the sharing graph for `group`.
pub fn detect_common_queries(
    graph: &DirectedGraph,
    index: &BatchIndex,
    group: &[Query],
    side: Direction,
) -> SharingGraph {
    Detector::new(graph, index, group, side).run()
}

struct Detector<'a> {
    graph: &'a DirectedGraph,
    index: &'a BatchIndex,
    group: &'a [Query],
    side: Direction,
    psi: SharingGraph,
    consumers: Vec<Vec<usize>>,
    // Per group position: the opposite-side map of the far endpoint.
    far_maps: Vec<Option<&'a DistanceMap>>,
    // Distances from an HC-s node's anchor, for the domination test.
    reach: FxHashMap<NodeId, FxHashMap<VertexId, u32>>,
}

impl<'a> Detector<'a> {
    fn new(graph: &'a DirectedGraph, index: &'a BatchIndex, group: &'a [Query], side: Direction) -> Self {
        let far_maps = group
            .iter()
            .map(|q| {
                let far = match side {
                    Direction::Forward => q.t,
                    Direction::Backward => q.s,
                };
                index.map(side.opposite(), far)
            })
            .collect();
        Detector {
            graph,
            index,
            group,
            side,
            psi: SharingGraph::new(side),
            consumers: Vec::new(),
            far_maps,
            reach: FxHashMap::default(),
        }
    }

    fn half(&self, q: &Query) -> u32 {
        match self.side {
            Direction::Forward => q.forward_budget(),
            Direction::Backward => q.backward_budget(),
        }
    }

    fn near_far(&self, q: &Query) -> (VertexId, VertexId) {
        match self.side {
            Direction::Forward => (q.s, q.t),
            Direction::Backward => (q.t, q.s),
        }
    }

    fn add_hcs(&mut self, anchor: VertexId, budget: u32, origin: Origin, consumers: Vec<usize>) -> NodeId {
        let id = self.psi.add_node(SharingNode::Hcs(HcsQuery {
            anchor,
            budget,
            side: self.side,
            origin,
        }));
        self.consumers.push(consumers);
        id
    }

    fn hcs(&self, id: NodeId) -> HcsQuery {
        *self.psi.hcs(id).expect("HC-s node")
    }

    fn absorb_consumers(&mut self, into: NodeId, from: NodeId) {
        let extra = self.consumers[from].clone();
        let set = &mut self.consumers[into];
        set.extend(extra);
        set.sort_unstable();
        set.dedup();
    }

    /// Hop distance from `y`'s anchor to `v`, bounded by `y`'s budget.
    fn dist_from(&mut self, y: NodeId, v: VertexId) -> u32 {
        let h = self.hcs(y);
        if let Some(map) = self.index.map(self.side, h.anchor) {
            if map.cap() >= h.budget {
                return map.lookup(v);
            }
        }
        let graph = self.graph;
        let side = self.side;
        let ball = self.reach.entry(y).or_insert_with(|| {
            let mut dist = FxHashMap::from_iter([(h.anchor, 0u32)]);
            let mut queue = VecDeque::from([h.anchor]);
            while let Some(u) = queue.pop_front() {
                let d = dist[&u];
                if d == h.budget {
                    continue;
                }
                for &w in graph.neighbors(u, side) {
                    dist.entry(w).or_insert_with(|| {
                        queue.push_back(w);
                        d + 1
                    });
                }
            }
            dist
        });
        ball.get(&v).copied().unwrap_or(UNREACHABLE)
    }

    fn x_dominates_y(&mut self, x: NodeId, y: NodeId) -> bool {
        let (hx, hy) = (self.hcs(x), self.hcs(y));
        let d = self.dist_from(y, hx.anchor);
        dominates(&hx, &hy, |_, _| d)
    }

    // Some downstream query can still use a step to `v` with `remaining`
    // budget left before the step.
    fn useful(&self, x: NodeId, v: VertexId, remaining: u32) -> bool {
        self.consumers[x].iter().any(|&pos| {
            let q = &self.group[pos];
            let Some(map) = self.far_maps[pos] else {
                return true;
            };
            let depth = (self.half(q) + 1).saturating_sub(remaining) as u64;
            depth + map.lookup(v) as u64 <= q.k as u64
        })
    }

    fn run(mut self) -> SharingGraph {
        let n = self.graph.vertex_count();
        let m = self.graph.edge_count() as u64;

        // Initial nodes, one per distinct (anchor, budget).
        let mut initial: BTreeMap<(VertexId, u32), NodeId> = BTreeMap::new();
        let mut initial_of = Vec::with_capacity(self.group.len());
        for (pos, q) in self.group.iter().enumerate() {
            let key = (self.near_far(q).0, self.half(q));
            let id = match initial.get(&key) {
                Some(&id) => {
                    self.consumers[id].push(pos);
                    id
                }
                None => {
                    let id = self.add_hcs(key.0, key.1, Origin::Initial, vec![pos]);
                    initial.insert(key, id);
                    id
                }
            };
            initial_of.push(id);
        }
        for (pos, q) in self.group.iter().enumerate() {
            let target = self.psi.add_node(SharingNode::Target(pos));
            self.consumers.push(vec![pos]);
            self.psi.add_edge(initial_of[pos], target);
            self.psi.targets.push(TargetInfo {
                far: self.near_far(q).1,
                k: q.k,
                half: self.half(q),
            });
            self.psi.target_nodes.push(target);
        }

        let k_max = initial.keys().map(|&(_, b)| b).max().unwrap_or(0);
        let mut levels: Vec<BTreeMap<VertexId, Vec<NodeId>>> = vec![BTreeMap::new(); k_max as usize + 1];
        let mut visited: FxHashSet<(NodeId, VertexId)> = FxHashSet::default();
        for (&(anchor, budget), &id) in &initial {
            visited.insert((id, anchor));
            if budget >= 1 {
                levels[budget as usize].entry(anchor).or_default().push(id);
            }
        }

        let cap = self.group.len() as u32;
        let mut anchored: FxHashMap<VertexId, NodeId> = FxHashMap::default();
        let mut detected: FxHashMap<VertexId, NodeId> = FxHashMap::default();
        let mut extended = vec![0u32; n];

        for r in (1..=k_max).rev() {
            let level = std::mem::take(&mut levels[r as usize]);
            let mut anchored_now: Vec<(VertexId, NodeId)> = Vec::new();
            for (v, mut members) in level {
                members.sort_unstable();
                members.dedup();
                let mut extend: Vec<NodeId> = Vec::new();
                if members.len() == 1 {
                    let x = members[0];
                    let h = self.hcs(x);
                    if h.anchor == v && h.budget == r {
                        anchored_now.push((v, x));
                    }
                    extend.push(x);
                } else {
                    let own = members.iter().copied().find(|&x| {
                        let h = self.hcs(x);
                        h.anchor == v && h.budget == r
                    });
                    let (shared, fresh) = match (own, detected.get(&v).copied()) {
                        (Some(y), _) => {
                            anchored_now.push((v, y));
                            (y, false)
                        }
                        (None, Some(d)) => (d, false),
                        (None, None) => {
                            let d = self.add_hcs(v, r, Origin::Detected, Vec::new());
                            visited.insert((d, v));
                            detected.insert(v, d);
                            (d, true)
                        }
                    };
                    for &x in &members {
                        if x == shared {
                            continue;
                        }
                        if self.psi.try_add_edge(shared, x) {
                            self.absorb_consumers(shared, x);
                        } else {
                            extend.push(x);
                        }
                    }
                    // A fresh node whose anchor already holds a larger
                    // enumeration copies it instead of walking on.
                    let mut supplied = false;
                    if fresh {
                        if let Some(&y) = anchored.get(&v) {
                            supplied = self.hcs(y).budget >= r && self.psi.try_add_edge(y, shared);
                        }
                    }
                    if own.is_some() || (fresh && !supplied) {
                        extend.push(shared);
                    }
                }

                if r < 2 {
                    continue;
                }
                for x in extend {
                    if extended[v as usize] >= cap {
                        continue;
                    }
                    extended[v as usize] += 1;
                    let neighbors = self.graph.neighbors(v, self.side);
                    self.psi.touches += 1 + neighbors.len() as u64;
                    for &u in neighbors {
                        if visited.contains(&(x, u)) || !self.useful(x, u, r) {
                            continue;
                        }
                        visited.insert((x, u));
                        if let Some(&y) = anchored.get(&u) {
                            if y != x
                                && self.hcs(y).budget >= r - 1
                                && !self.x_dominates_y(x, y)
                                && self.psi.try_add_edge(y, x)
                            {
                                continue;
                            }
                        }
                        levels[r as usize - 1].entry(u).or_default().push(x);
                    }
                }
            }
            for (v, x) in anchored_now {
                anchored.insert(v, x);
            }
        }
        debug_assert!(self.psi.touches <= self.group.len() as u64 * (n as u64 + m));
        self.psi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::build_batch_index;

    fn hcs(anchor: VertexId, budget: u32) -> HcsQuery {
        HcsQuery {
            anchor,
            budget,
            side: Direction::Forward,
            origin: Origin::Detected,
        }
    }

    #[test]
    fn domination_rule() {
        let a = hcs(1, 2);
        assert!(dominates(&a, &a, |_, _| 0));
        assert!(dominates(&a, &hcs(0, 3), |_, _| 1));
        assert!(!dominates(&a, &hcs(0, 2), |_, _| 1));
        assert!(!dominates(&a, &hcs(0, 9), |_, _| UNREACHABLE));
    }

    #[test]
    fn singleton_group() {
        let g = DirectedGraph::from_edges(3, [(0, 1), (1, 2)]);
        let q = [Query::new(0, 0, 2, 2)];
        let idx = build_batch_index(&g, &q);
        for side in [Direction::Forward, Direction::Backward] {
            let psi = detect_common_queries(&g, &idx, &q, side);
            assert_eq!(psi.len(), 2);
            assert_eq!(psi.edge_count(), 1);
            assert_eq!(psi.initial_node(0), 0);
            psi.check_invariants().unwrap();
            assert_eq!(psi.topological_order().unwrap(), vec![0, 1]);
        }
    }

    #[test]
    fn identical_queries_share_one_initial_node() {
        let g = DirectedGraph::from_edges(4, [(0, 1), (1, 2), (2, 3)]);
        let q = [Query::new(0, 0, 3, 3), Query::new(1, 0, 3, 3), Query::new(2, 0, 3, 3)];
        let idx = build_batch_index(&g, &q);
        let psi = detect_common_queries(&g, &idx, &q, Direction::Forward);
        assert_eq!(psi.hcs_count(), 1);
        assert_eq!(psi.out_neighbors(0).len(), 3);
        psi.check_invariants().unwrap();
    }

    #[test]
    fn converging_sources_get_a_detected_node() {
        // 0 -> 2, 1 -> 2, 2 -> 3 -> 4
        let g = DirectedGraph::from_edges(5, [(0, 2), (1, 2), (2, 3), (3, 4)]);
        let q = [Query::new(0, 0, 4, 6), Query::new(1, 1, 4, 6)];
        let idx = build_batch_index(&g, &q);
        let psi = detect_common_queries(&g, &idx, &q, Direction::Forward);
        let det: Vec<_> = psi.detected_nodes().map(|(_, h)| (h.anchor, h.budget)).collect();
        assert_eq!(det, vec![(2, 2)]);
        let (d, _) = psi.detected_nodes().next().unwrap();
        assert_eq!(psi.out_neighbors(d), &[0, 1]);
        let order = psi.topological_order().unwrap();
        assert_eq!(order[0], d);
        assert_eq!(psi.consumers().unwrap()[d], vec![0, 1]);
        psi.check_invariants().unwrap();
        let dot = psi.to_dot("g", |v| v as u64, |p| p as u64);
        assert!(dot.contains("v2 b=2"));
    }

    #[test]
    fn cycle_is_reported() {
        let mut psi = SharingGraph::new(Direction::Forward);
        let a = psi.add_node(SharingNode::Hcs(hcs(0, 1)));
        let b = psi.add_node(SharingNode::Hcs(hcs(1, 1)));
        psi.add_edge(a, b);
        assert!(!psi.try_add_edge(b, a));
        psi.add_edge(b, a);
        assert!(matches!(psi.topological_order(), Err(Error::Invariant(_))));
    }
}
