//! Grouping of queries by overlap of their hop-bounded neighbourhoods.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::graph::VertexId;
use crate::index::{BatchIndex, DistanceMap};
use crate::query::Query;

/// Vertex set stored as a sorted list, or as a bitset once it covers at
/// least one vertex in 64.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborSet {
    len: usize,
    sorted: Vec<VertexId>,
    bits: Option<Vec<u64>>,
}

impl NeighborSet {
    pub fn new(vertices: Vec<VertexId>, vertex_count: usize) -> Self {
        Self::from_slice(&vertices, vertex_count)
    }

    fn within(map: &DistanceMap, k: u32) -> Self {
        let slice = map.within_slice(k);
        let n = map.vertex_count();
        if n > 0 && slice.len() * 64 >= n {
            return NeighborSet {
                len: slice.len(),
                sorted: Vec::new(),
                bits: Some(map.within_bits(k)),
            };
        }
        Self::from_slice(slice, n)
    }

    fn from_slice(vertices: &[VertexId], vertex_count: usize) -> Self {
        if vertex_count > 0 && vertices.len() * 64 >= vertex_count {
            let mut bits = vec![0u64; vertex_count.div_ceil(64)];
            for &v in vertices {
                bits[v as usize / 64] |= 1 << (v % 64);
            }
            let len = bits.iter().map(|w| w.count_ones() as usize).sum();
            return NeighborSet {
                len,
                sorted: Vec::new(),
                bits: Some(bits),
            };
        }
        let mut sorted = vertices.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        NeighborSet {
            len: sorted.len(),
            sorted,
            bits: None,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Members in ascending order.
    pub fn to_vec(&self) -> Vec<VertexId> {
        match &self.bits {
            None => self.sorted.clone(),
            Some(bits) => {
                let mut out = Vec::with_capacity(self.len);
                for (w, &word) in bits.iter().enumerate() {
                    let mut rest = word;
                    while rest != 0 {
                        out.push((w * 64) as VertexId + rest.trailing_zeros());
                        rest &= rest - 1;
                    }
                }
                out
            }
        }
    }

    pub fn contains(&self, v: VertexId) -> bool {
        match &self.bits {
            Some(bits) => bits.get(v as usize / 64).is_some_and(|w| w & (1 << (v % 64)) != 0),
            None => self.sorted.binary_search(&v).is_ok(),
        }
    }

    pub fn intersection_len(&self, other: &NeighborSet) -> usize {
        match (&self.bits, &other.bits) {
            (Some(a), Some(b)) => a.iter().zip(b).map(|(x, y)| (x & y).count_ones() as usize).sum(),
            (None, Some(_)) => self.sorted.iter().filter(|&&v| other.contains(v)).count(),
            (Some(_), None) => other.sorted.iter().filter(|&&v| self.contains(v)).count(),
            (None, None) => {
                let (small, large) = if self.len <= other.len {
                    (&self.sorted, &other.sorted)
                } else {
                    (&other.sorted, &self.sorted)
                };
                if small.len() * 8 < large.len() {
                    return small.iter().filter(|v| large.binary_search(v).is_ok()).count();
                }
                let (mut i, mut j, mut count) = (0, 0, 0);
                while i < small.len() && j < large.len() {
                    match small[i].cmp(&large[j]) {
                        std::cmp::Ordering::Less => i += 1,
                        std::cmp::Ordering::Greater => j += 1,
                        std::cmp::Ordering::Equal => {
                            count += 1;
                            i += 1;
                            j += 1;
                        }
                    }
                }
                count
            }
        }
    }
}

/// Vertices within `k` hops of the source on `G` and of the target on
/// the reverse graph, endpoints included.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborProfile {
    pub query_id: u64,
    pub forward: NeighborSet,
    pub backward: NeighborSet,
}

/// Reads a query's neighbourhoods from the index.
///
/// Panics if the index lacks either anchor.
pub fn hop_neighbors(index: &BatchIndex, q: &Query) -> NeighborProfile {
    let fwd = index
        .forward(q.s)
        .unwrap_or_else(|| panic!("index has no forward map for query {}", q.id));
    let bwd = index
        .backward(q.t)
        .unwrap_or_else(|| panic!("index has no backward map for query {}", q.id));
    assert!(
        fwd.cap() >= q.k && bwd.cap() >= q.k,
        "index cap below k of query {}",
        q.id
    );
    NeighborProfile {
        query_id: q.id,
        forward: NeighborSet::within(fwd, q.k),
        backward: NeighborSet::within(bwd, q.k),
    }
}

fn overlap_term(a: &NeighborSet, b: &NeighborSet) -> Option<f64> {
    let common = a.intersection_len(b);
    (common > 0).then(|| a.len().min(b.len()) as f64 / common as f64)
}

/// Similarity in `[0, 1]`: two over the sum of the per-side ratios
/// `min(|A|, |B|) / |A ∩ B|`. A side with no overlap adds nothing; no overlap
/// on either side gives 0.
pub fn query_similarity(a: &NeighborProfile, b: &NeighborProfile) -> f64 {
    match (
        overlap_term(&a.forward, &b.forward),
        overlap_term(&a.backward, &b.backward),
    ) {
        (None, None) => 0.0,
        (f, r) => (2.0 / (f.unwrap_or(0.0) + r.unwrap_or(0.0))).min(1.0),
    }
}

/// Pairwise similarity table, symmetric with ones on the diagonal.
pub fn similarity_table(profiles: &[NeighborProfile]) -> Vec<Vec<f64>> {
    let n = profiles.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| query_similarity(&profiles[i], &profiles[j]))
                .collect()
        })
        .collect();
    let mut table = vec![vec![1.0; n]; n];
    for (i, row) in upper.iter().enumerate() {
        for (off, &sim) in row.iter().enumerate() {
            let j = i + 1 + off;
            table[i][j] = sim;
            table[j][i] = sim;
        }
    }
    table
}

/// Mean of the cross-pair similarities of two groups.
pub fn group_similarity(a: &[usize], b: &[usize], table: &[Vec<f64>]) -> f64 {
    let sum: f64 = a.iter().flat_map(|&i| b.iter().map(move |&j| table[i][j])).sum();
    sum / (a.len() * b.len()) as f64
}

/// Indices of the queries placed together, ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryGroup {
    pub members: Vec<usize>,
}

/// Average-linkage agglomeration: repeatedly merges the most similar pair
/// of groups while that similarity exceeds `gamma`. Ties go to the first
/// pair in scan order.
pub fn cluster_profiles(profiles: &[NeighborProfile], gamma: f64) -> Vec<QueryGroup> {
    let table = similarity_table(profiles);
    cluster_table(&table, gamma)
}

pub(crate) fn cluster_table(table: &[Vec<f64>], gamma: f64) -> Vec<QueryGroup> {
    let mut groups: Vec<Vec<usize>> = (0..table.len()).map(|i| vec![i]).collect();
    // cross[i][j]: sum of similarities between groups i and j.
    let mut cross: Vec<Vec<f64>> = table.to_vec();
    loop {
        let mut best = 0.0;
        let mut pair = None;
        for i in 0..groups.len() {
            for j in i + 1..groups.len() {
                let sim = cross[i][j] / (groups[i].len() * groups[j].len()) as f64;
                if sim > best {
                    best = sim;
                    pair = Some((i, j));
                }
            }
        }
        let Some((i, j)) = pair.filter(|_| best > gamma) else {
            break;
        };
        let absorbed = groups.remove(j);
        groups[i].extend(absorbed);
        groups[i].sort_unstable();
        let row_j = cross.remove(j);
        for row in cross.iter_mut() {
            row.remove(j);
        }
        for (x, v) in row_j.iter().enumerate().filter(|&(x, _)| x != j) {
            let x = if x > j { x - 1 } else { x };
            cross[i][x] += v;
            if x != i {
                cross[x][i] += v;
            }
        }
    }
    groups.into_iter().map(|members| QueryGroup { members }).collect()
}

/// Profiles every query from the index, then clusters them. Queries with
/// the same endpoint and bound share one neighbourhood set.
pub fn cluster_queries(index: &BatchIndex, queries: &[Query], gamma: f64) -> Vec<QueryGroup> {
    let mut slot: HashMap<(VertexId, VertexId, u32), usize> = HashMap::new();
    let mut distinct = Vec::new();
    let which: Vec<usize> = queries
        .iter()
        .map(|q| {
            *slot.entry((q.s, q.t, q.k)).or_insert_with(|| {
                distinct.push(hop_neighbors(index, q));
                distinct.len() - 1
            })
        })
        .collect();
    let small = similarity_table(&distinct);
    let table: Vec<Vec<f64>> = which
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            which
                .iter()
                .enumerate()
                .map(|(j, &b)| if i == j { 1.0 } else { small[a][b] })
                .collect()
        })
        .collect();
    cluster_table(&table, gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(fwd: &[u32], bwd: &[u32]) -> NeighborProfile {
        NeighborProfile {
            query_id: 0,
            forward: NeighborSet::new(fwd.to_vec(), 100),
            backward: NeighborSet::new(bwd.to_vec(), 100),
        }
    }

    #[test]
    fn identical_and_disjoint() {
        let a = profile(&[1, 2, 3], &[7, 8]);
        assert_eq!(query_similarity(&a, &a), 1.0);
        let b = profile(&[4, 5], &[9]);
        assert_eq!(query_similarity(&a, &b), 0.0);
    }

    #[test]
    fn one_sided_overlap_is_clamped() {
        // Only the forward side overlaps, fully: 2 / (1 + 0) clamps to 1.
        let a = profile(&[1, 2], &[7]);
        let b = profile(&[1, 2, 3], &[8]);
        assert_eq!(query_similarity(&a, &b), 1.0);
        // Forward ratio 2/1, backward ratio 1/1: 2 / 3.
        let c = profile(&[1, 2], &[7]);
        let d = profile(&[1, 5], &[7]);
        assert!((query_similarity(&c, &d) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn bitset_and_sorted_paths_agree() {
        let a = NeighborSet::new((0..40).collect(), 64);
        let b = NeighborSet::new((20..60).collect(), 64);
        let c = NeighborSet::new(vec![25, 30, 61], 10_000);
        assert!(a.bits.is_some() && c.bits.is_none());
        assert_eq!(a.intersection_len(&b), 20);
        assert_eq!(a.intersection_len(&c), 2);
        assert_eq!(c.intersection_len(&b), 2);
    }

    #[test]
    fn merge_follows_average_linkage() {
        // 0 and 1 are near twins, 2 is closer to 1 than to 0.
        let table = vec![vec![1.0, 0.9, 0.6], vec![0.9, 1.0, 0.8], vec![0.6, 0.8, 1.0]];
        let g = cluster_table(&table, 0.75);
        assert_eq!(
            g,
            vec![QueryGroup { members: vec![0, 1] }, QueryGroup { members: vec![2] }]
        );
        let g = cluster_table(&table, 0.65);
        assert_eq!(g, vec![QueryGroup { members: vec![0, 1, 2] }]);
        assert_eq!(cluster_table(&table, 1.0).len(), 3);
        assert!((group_similarity(&[2], &[0, 1], &table) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn ties_take_first_pair() {
        let table = vec![
            vec![1.0, 0.5, 0.0, 0.0],
            vec![0.5, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.5],
            vec![0.0, 0.0, 0.5, 1.0],
        ];
        let g = cluster_table(&table, 0.0);
        assert_eq!(
            g,
            vec![QueryGroup { members: vec![0, 1] }, QueryGroup { members: vec![2, 3] }]
        );
    }
}
