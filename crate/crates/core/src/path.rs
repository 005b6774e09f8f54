//! Paths and the prefix-closed path store produced by one half search.

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::graph::{Direction, VertexId};

/// A vertex sequence. Its length is counted in hops.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path(Vec<VertexId>);

impl Path {
    pub fn new(vertices: Vec<VertexId>) -> Self {
        assert!(!vertices.is_empty(), "a path has at least one vertex");
        Path(vertices)
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.0
    }

    pub fn into_vertices(self) -> Vec<VertexId> {
        self.0
    }

    pub fn hops(&self) -> usize {
        self.0.len() - 1
    }

    pub fn first(&self) -> VertexId {
        self.0[0]
    }

    pub fn last(&self) -> VertexId {
        *self.0.last().unwrap()
    }

    pub fn reversed(&self) -> Path {
        let mut v = self.0.clone();
        v.reverse();
        Path(v)
    }

    pub fn is_simple(&self) -> bool {
        let mut seen = self.0.clone();
        seen.sort_unstable();
        seen.windows(2).all(|w| w[0] != w[1])
    }
}

impl From<Vec<VertexId>> for Path {
    fn from(v: Vec<VertexId>) -> Self {
        Path::new(v)
    }
}

/// Concatenates every `a` ending where some `b` starts, writing the shared
/// vertex once. No simplicity filtering.
pub fn concat_paths(a: &[Path], b: &[Path]) -> Vec<Path> {
    let mut by_first: HashMap<VertexId, Vec<&Path>> = HashMap::new();
    for p in b {
        by_first.entry(p.first()).or_default().push(p);
    }
    let mut out = Vec::new();
    for pa in a {
        if let Some(matches) = by_first.get(&pa.last()) {
            for pb in matches {
                let mut v = pa.0.clone();
                v.extend_from_slice(&pb.0[1..]);
                out.push(Path(v));
            }
        }
    }
    out
}

pub(crate) type NodeIx = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct TrieNode {
    vertex: VertexId,
    parent: NodeIx,
    depth: u16,
}

/// Every path found by a half search from `anchor`, stored as a prefix
/// trie. Each trie node stands for the path from the root down to it, so
/// the store is prefix-closed by construction.
///
/// Nodes are kept in depth-first preorder, which makes every subtree a
/// contiguous range. Backward stores hold paths in reverse-graph
/// orientation; walking a node's parent chain reads the path in the
/// original orientation.
#[derive(Clone, Debug)]
pub struct PathStore {
    side: Direction,
    anchor: VertexId,
    budget: u32,
    nodes: Vec<TrieNode>,
    // Built on first lookup.
    ends: OnceLock<EndIndex>,
}

// Node ids sorted by (end vertex, id), with the end vertex of each entry.
#[derive(Clone, Debug)]
struct EndIndex {
    nodes: Vec<NodeIx>,
    keys: Vec<VertexId>,
}

impl PathStore {
    pub(crate) const ROOT: NodeIx = 0;

    pub(crate) fn new(side: Direction, anchor: VertexId, budget: u32) -> Self {
        PathStore {
            side,
            anchor,
            budget,
            nodes: vec![TrieNode {
                vertex: anchor,
                parent: NodeIx::MAX,
                depth: 0,
            }],
            ends: OnceLock::new(),
        }
    }

    /// Appends a child of `parent`. Callers add nodes in preorder.
    #[inline]
    pub(crate) fn push(&mut self, vertex: VertexId, parent: NodeIx) -> NodeIx {
        let depth = self.nodes[parent as usize].depth + 1;
        debug_assert!(depth as u32 <= self.budget);
        self.nodes.push(TrieNode { vertex, parent, depth });
        (self.nodes.len() - 1) as NodeIx
    }

    /// Marks the store complete; lookups by end vertex are rebuilt lazily.
    pub(crate) fn seal(&mut self) {
        self.ends = OnceLock::new();
    }

    fn ends(&self) -> &EndIndex {
        self.ends.get_or_init(|| {
            let mut keyed: Vec<u64> = self
                .nodes
                .iter()
                .enumerate()
                .map(|(i, node)| (node.vertex as u64) << 32 | i as u64)
                .collect();
            keyed.sort_unstable();
            EndIndex {
                nodes: keyed.iter().map(|&x| x as NodeIx).collect(),
                keys: keyed.iter().map(|&x| (x >> 32) as VertexId).collect(),
            }
        })
    }

    pub fn side(&self) -> Direction {
        self.side
    }

    pub fn anchor(&self) -> VertexId {
        self.anchor
    }

    pub fn budget(&self) -> u32 {
        self.budget
    }

    /// Number of stored paths, the zero-length one included. Also the
    /// number of stored vertices, since paths share prefixes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Length of the longest stored path.
    pub fn max_depth(&self) -> u32 {
        self.nodes.iter().map(|n| n.depth as u32).max().unwrap_or(0)
    }

    #[inline]
    pub(crate) fn vertex(&self, i: NodeIx) -> VertexId {
        self.nodes[i as usize].vertex
    }

    #[inline]
    pub(crate) fn depth(&self, i: NodeIx) -> u32 {
        self.nodes[i as usize].depth as u32
    }

    #[inline]
    pub(crate) fn parent(&self, i: NodeIx) -> Option<NodeIx> {
        match self.nodes[i as usize].parent {
            NodeIx::MAX => None,
            p => Some(p),
        }
    }

    /// One past the last node of `i`'s subtree.
    #[inline]
    pub(crate) fn subtree_end(&self, i: NodeIx) -> NodeIx {
        let depth = self.nodes[i as usize].depth;
        let rest = &self.nodes[i as usize + 1..];
        i + 1 + rest.iter().position(|n| n.depth <= depth).unwrap_or(rest.len()) as NodeIx
    }

    /// Node ids whose path ends at `v`, in preorder.
    pub(crate) fn bucket(&self, v: VertexId) -> &[NodeIx] {
        let ends = self.ends();
        let lo = ends.keys.partition_point(|&x| x < v);
        let hi = lo + ends.keys[lo..].partition_point(|&x| x <= v);
        &ends.nodes[lo..hi]
    }

    /// Vertices of node `i`'s path from its end back to the anchor.
    pub(crate) fn chain(&self, i: NodeIx) -> impl Iterator<Item = VertexId> + '_ {
        let mut cur = Some(i);
        std::iter::from_fn(move || {
            let node = cur?;
            cur = self.parent(node);
            Some(self.vertex(node))
        })
    }

    /// Node `i`'s path in search orientation, anchor first.
    pub(crate) fn path(&self, i: NodeIx) -> Path {
        let mut v: Vec<VertexId> = self.chain(i).collect();
        v.reverse();
        Path(v)
    }

    /// All stored paths in search orientation, in preorder.
    pub fn paths(&self) -> Vec<Path> {
        (0..self.nodes.len() as NodeIx).map(|i| self.path(i)).collect()
    }

    /// Stored paths of exactly `hops` hops.
    pub fn paths_of_length(&self, hops: u32) -> Vec<Path> {
        (0..self.nodes.len() as NodeIx)
            .filter(|&i| self.depth(i) == hops)
            .map(|i| self.path(i))
            .collect()
    }

    /// Stored paths that are not a proper prefix of another stored path.
    pub fn maximal_paths(&self) -> Vec<Path> {
        let mut has_child = vec![false; self.nodes.len()];
        for n in &self.nodes[1..] {
            has_child[n.parent as usize] = true;
        }
        (0..self.nodes.len() as NodeIx)
            .filter(|&i| !has_child[i as usize])
            .map(|i| self.path(i))
            .collect()
    }

    /// Stored paths ending at `v`.
    pub fn paths_ending_at(&self, v: VertexId) -> Vec<Path> {
        self.bucket(v).iter().map(|&i| self.path(i)).collect()
    }
}
