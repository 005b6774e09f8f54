//! Batch execution: index, cluster, detect, then enumerate each group's
//! sharing graph in dependency order with a reference-counted path cache.

use std::collections::hash_map::Entry;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use rustc_hash::FxHashMap;

use crate::cluster::{cluster_queries, QueryGroup};
use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, Direction, VertexId};
use crate::index::{build_batch_index, BatchIndex, DistanceMap};
use crate::path::{Path, PathStore};
use crate::query::Query;
use crate::share::{detect_common_queries, NodeId, SharingGraph};
use crate::single::{enumerate_into, join_with, resolve_bounds, Bound, EnumCounters, HalfSearch, PruneTarget, Scratch};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OutputMode {
    #[default]
    Paths,
    Counts,
}

#[derive(Clone, Debug)]
pub struct BatchOptions {
    /// Clustering threshold in `[0, 1]`.
    pub gamma: f64,
    pub output: OutputMode,
    /// Worker threads for independent groups; 1 runs inline.
    pub threads: usize,
    /// Cap on trie nodes held by one group's cache. Exceeding it switches
    /// that group to per-query enumeration.
    pub max_cached_vertices: Option<usize>,
    /// Validate sharing graphs and cache state; breaches trigger the
    /// per-query path.
    pub check_invariants: bool,
    /// Distance-based pruning in half searches.
    pub prune: bool,
    /// Keep every group's sharing graphs in the result.
    pub collect_sharing_graphs: bool,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions {
            gamma: 0.5,
            output: OutputMode::Paths,
            threads: 1,
            max_cached_vertices: None,
            check_invariants: cfg!(debug_assertions),
            prune: true,
            collect_sharing_graphs: false,
        }
    }
}

/// Result for one query, in batch order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryOutcome {
    pub id: u64,
    pub count: u64,
    /// `None` in count mode.
    pub paths: Option<Vec<Path>>,
}

#[derive(Clone, Debug, Default)]
pub struct BatchStats {
    pub build_index: Duration,
    pub cluster: Duration,
    pub detect: Duration,
    pub enumerate: Duration,
    pub total: Duration,
    pub counters: EnumCounters,
    pub group_count: usize,
    pub fallback_groups: usize,
    /// HC-s nodes over all sharing graphs, and how many were detected.
    pub hcs_nodes: usize,
    pub detected_nodes: usize,
    pub detect_touches: u64,
    /// Groups whose detection touched more than `|group| * (n + m)`.
    pub touch_bound_violations: usize,
    pub index_rounds: [u32; 2],
    pub index_touches: [u64; 2],
    /// Peak entries and peak trie nodes held by any one group's cache.
    pub cache_peak_entries: usize,
    pub cache_peak_paths: usize,
    /// Groups whose cache was not empty when they finished.
    pub cache_leaks: usize,
    /// Times the cache held more entries than nodes with pending consumers.
    pub cache_bound_violations: usize,
}

#[derive(Clone, Debug)]
pub struct BatchResult {
    pub outcomes: Vec<QueryOutcome>,
    pub groups: Vec<QueryGroup>,
    pub stats: BatchStats,
    /// Forward and backward sharing graph per group, when collected.
    pub sharing_graphs: Vec<(SharingGraph, SharingGraph)>,
}

/// Cached path stores of HC-s nodes, each released once all its consumers
/// in the sharing graph have been processed.
#[derive(Debug, Default)]
pub struct ResultCache {
    entries: FxHashMap<(Direction, NodeId), PathStore>,
    pending: FxHashMap<(Direction, NodeId), usize>,
    // Nodes whose pending count is positive.
    live: usize,
    stored: usize,
    peak_entries: usize,
    peak_stored: usize,
    bound_violations: usize,
}

impl ResultCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records the consumer count of every HC-s node of `psi`.
    pub fn register(&mut self, psi: &SharingGraph) {
        for id in 0..psi.len() {
            if psi.hcs(id).is_some() {
                let consumers = psi.out_neighbors(id).len();
                let old = self.pending.insert((psi.side(), id), consumers);
                self.live += (consumers > 0) as usize;
                self.live -= old.is_some_and(|c| c > 0) as usize;
            }
        }
    }

    pub fn insert(&mut self, side: Direction, id: NodeId, store: PathStore) {
        let key = (side, id);
        if self.pending.get(&key).copied().unwrap_or(0) == 0 {
            return;
        }
        self.stored += store.len();
        if let Some(old) = self.entries.insert(key, store) {
            self.stored -= old.len();
        }
        self.peak_entries = self.peak_entries.max(self.entries.len());
        self.peak_stored = self.peak_stored.max(self.stored);
        if self.entries.len() > self.live {
            self.bound_violations += 1;
        }
    }

    pub fn get(&self, side: Direction, id: NodeId) -> Option<&PathStore> {
        self.entries.get(&(side, id))
    }

    /// Marks `processed` done: every in-neighbour loses one pending
    /// consumer and is dropped when none remain.
    pub fn evict_completed(&mut self, psi: &SharingGraph, processed: NodeId) {
        for &sup in psi.in_neighbors(processed) {
            let key = (psi.side(), sup);
            if let Some(c) = self.pending.get_mut(&key) {
                if *c == 0 {
                    continue;
                }
                *c -= 1;
                if *c == 0 {
                    self.live -= 1;
                    if let Some(store) = self.entries.remove(&key) {
                        self.stored -= store.len();
                    }
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Trie nodes currently held.
    pub fn stored_vertices(&self) -> usize {
        self.stored
    }

    pub fn peak_entries(&self) -> usize {
        self.peak_entries
    }

    pub fn peak_stored_vertices(&self) -> usize {
        self.peak_stored
    }
}

/// Enumerates an HC-s node, reusing the cached stores of its in-neighbours.
#[allow(clippy::too_many_arguments)]
pub fn search_with_reuse(
    graph: &DirectedGraph,
    index: &BatchIndex,
    psi: &SharingGraph,
    node: NodeId,
    cache: &ResultCache,
    targets: &[PruneTarget],
    prune: bool,
    counters: &mut EnumCounters,
) -> Result<PathStore> {
    let mut scratch = Scratch::new(graph.vertex_count());
    let bounds = if prune {
        resolve_bounds(index, psi.side(), targets)
    } else {
        Vec::new()
    };
    search_node(graph, psi, node, cache, &bounds, prune, &mut scratch, counters)
}

#[allow(clippy::too_many_arguments)]
fn search_node(
    graph: &DirectedGraph,
    psi: &SharingGraph,
    node: NodeId,
    cache: &ResultCache,
    bounds: &[Bound],
    prune: bool,
    scratch: &mut Scratch,
    counters: &mut EnumCounters,
) -> Result<PathStore> {
    let h = psi
        .hcs(node)
        .ok_or_else(|| Error::Invariant(format!("node {node} is not an HC-s node")))?;
    let suppliers = psi
        .in_neighbors(node)
        .iter()
        .map(|&s| {
            cache.get(psi.side(), s).ok_or_else(|| {
                Error::Invariant(format!(
                    "{} supplier {s} of node {node} is not cached",
                    psi.side().as_str()
                ))
            })
        })
        .collect::<Result<Vec<&PathStore>>>()?;
    let search = HalfSearch {
        graph,
        index: None,
        direction: psi.side(),
        prune,
    };
    Ok(search.run_bounded(h.anchor, h.budget, bounds, &suppliers, scratch, counters))
}

/// Pruning bounds for the HC-s nodes of one side, with each query's
/// far-endpoint map looked up once.
struct BoundTable<'a> {
    slot_of: Vec<usize>,
    maps: Vec<&'a DistanceMap>,
    best: Vec<i64>,
    touched: Vec<usize>,
}

impl<'a> BoundTable<'a> {
    fn new(index: &'a BatchIndex, psi: &SharingGraph) -> Result<Self> {
        let mut slots: FxHashMap<VertexId, usize> = FxHashMap::default();
        let mut maps = Vec::new();
        let mut slot_of = Vec::with_capacity(psi.query_count());
        for pos in 0..psi.query_count() {
            let (far, _, _) = psi.target_info(pos);
            let slot = match slots.get(&far) {
                Some(&slot) => slot,
                None => {
                    let map = index
                        .map(psi.side().opposite(), far)
                        .ok_or_else(|| Error::Invariant(format!("index has no map for {far}")))?;
                    maps.push(map);
                    slots.insert(far, maps.len() - 1);
                    maps.len() - 1
                }
            };
            slot_of.push(slot);
        }
        Ok(BoundTable {
            slot_of,
            best: vec![i64::MIN; maps.len()],
            maps,
            touched: Vec::new(),
        })
    }

    /// Same bounds as [`SharingGraph::prune_targets`] yields, loosest first.
    fn bounds(&mut self, psi: &SharingGraph, id: NodeId, consumers: &[usize]) -> Vec<Bound<'a>> {
        let budget = psi.hcs(id).map_or(0, |h| h.budget);
        for &pos in consumers {
            let (_, k, half) = psi.target_info(pos);
            let slack = k as i64 - half.saturating_sub(budget) as i64;
            let slot = self.slot_of[pos];
            if self.best[slot] == i64::MIN {
                self.touched.push(slot);
            }
            self.best[slot] = self.best[slot].max(slack);
        }
        let mut out: Vec<Bound<'a>> = Vec::with_capacity(self.touched.len());
        for slot in self.touched.drain(..) {
            let slack = std::mem::replace(&mut self.best[slot], i64::MIN);
            if slack >= 0 {
                out.push(Bound {
                    map: self.maps[slot],
                    slack: slack as u32,
                });
            }
        }
        out.sort_by_key(|b| std::cmp::Reverse(b.slack));
        out
    }
}

struct GroupRun {
    outcomes: Vec<(usize, QueryOutcome)>,
    counters: EnumCounters,
    fallback: bool,
    cache_peak_entries: usize,
    cache_peak_paths: usize,
    cache_leak: bool,
    cache_bound_violations: usize,
}

struct Planned {
    members: Vec<usize>,
    psi: Option<(SharingGraph, SharingGraph)>,
    touches: u64,
    touch_violation: bool,
}

fn finish_outcome(id: u64, mode: OutputMode, paths: Vec<Path>, count: u64) -> QueryOutcome {
    QueryOutcome {
        id,
        count,
        paths: (mode == OutputMode::Paths).then_some(paths),
    }
}

fn run_basic_query(
    graph: &DirectedGraph,
    index: &BatchIndex,
    q: &Query,
    options: &BatchOptions,
    scratch: &mut Scratch,
    counters: &mut EnumCounters,
) -> QueryOutcome {
    let mut paths = Vec::new();
    let want = options.output == OutputMode::Paths;
    let count = enumerate_into(graph, index, q, options.prune, scratch, counters, |p| {
        if want {
            paths.push(Path::new(p.to_vec()));
        }
    });
    finish_outcome(q.id, options.output, paths, count)
}

#[allow(clippy::too_many_arguments)]
fn run_shared(
    graph: &DirectedGraph,
    index: &BatchIndex,
    queries: &[Query],
    members: &[usize],
    psi: &(SharingGraph, SharingGraph),
    options: &BatchOptions,
    scratch: &mut Scratch,
    counters: &mut EnumCounters,
    cache: &mut ResultCache,
) -> Result<Vec<(usize, QueryOutcome)>> {
    let sides = [&psi.0, &psi.1];
    for side in sides {
        if options.check_invariants {
            side.check_invariants()?;
        }
        cache.register(side);
    }
    for side in sides {
        let consumers = side.consumers()?;
        let mut table = BoundTable::new(index, side)?;
        for id in side.topological_order()? {
            if side.hcs(id).is_none() {
                continue;
            }
            let bounds = if options.prune {
                table.bounds(side, id, &consumers[id])
            } else {
                Vec::new()
            };
            let store = search_node(graph, side, id, cache, &bounds, options.prune, scratch, counters)?;
            if options.check_invariants {
                let budget = side.hcs(id).unwrap().budget;
                if store.max_depth() > budget {
                    return Err(Error::Invariant(format!("store of node {id} exceeds its budget")));
                }
            }
            cache.insert(side.side(), id, store);
            cache.evict_completed(side, id);
            if let Some(limit) = options.max_cached_vertices {
                if cache.stored_vertices() > limit {
                    return Err(Error::Invariant(format!(
                        "cache holds {} vertices, limit {limit}",
                        cache.stored_vertices()
                    )));
                }
            }
        }
    }

    let (fwd, bwd) = (&psi.0, &psi.1);
    // Queries whose halves come from the same two nodes under the same bound
    // have identical joins; each such join runs once.
    let key = |pos: usize| (fwd.initial_node(pos), bwd.initial_node(pos), queries[members[pos]].k);
    let mut uses: FxHashMap<(NodeId, NodeId, u32), usize> = FxHashMap::default();
    for pos in 0..members.len() {
        *uses.entry(key(pos)).or_default() += 1;
    }
    let mut joined: FxHashMap<(NodeId, NodeId, u32), (u64, Vec<Path>)> = FxHashMap::default();
    let want = options.output == OutputMode::Paths;
    let mut out = Vec::with_capacity(members.len());
    for (pos, &qi) in members.iter().enumerate() {
        let q = &queries[qi];
        let f = cache.get(Direction::Forward, fwd.initial_node(pos));
        let b = cache.get(Direction::Backward, bwd.initial_node(pos));
        let (Some(f), Some(b)) = (f, b) else {
            return Err(Error::Invariant(format!("halves of query {} not cached", q.id)));
        };
        let k = key(pos);
        if let Entry::Vacant(slot) = joined.entry(k) {
            let mut paths = Vec::new();
            let count = if q.s == q.t {
                0
            } else {
                join_with(f, b, q.k, scratch, counters, |p| {
                    if want {
                        paths.push(Path::new(p.to_vec()));
                    }
                })
            };
            slot.insert((count, paths));
        }
        let left = uses.get_mut(&k).unwrap();
        *left -= 1;
        let (count, paths) = if *left == 0 {
            joined.remove(&k).unwrap()
        } else {
            joined[&k].clone()
        };
        out.push((qi, finish_outcome(q.id, options.output, paths, count)));
        cache.evict_completed(fwd, fwd.target_node(pos));
        cache.evict_completed(bwd, bwd.target_node(pos));
    }
    Ok(out)
}

fn run_group(
    graph: &DirectedGraph,
    index: &BatchIndex,
    queries: &[Query],
    plan: &Planned,
    options: &BatchOptions,
) -> GroupRun {
    let mut scratch = Scratch::new(graph.vertex_count());
    let mut counters = EnumCounters::default();
    let mut cache = ResultCache::new();
    let shared = match &plan.psi {
        Some(psi) => run_shared(
            graph,
            index,
            queries,
            &plan.members,
            psi,
            options,
            &mut scratch,
            &mut counters,
            &mut cache,
        ),
        None => Err(Error::Invariant("sharing graph unavailable".into())),
    };
    let cache_leak = shared.is_ok() && !cache.is_empty();
    let (outcomes, fallback) = match shared {
        Ok(out) if !cache_leak => (out, false),
        _ => {
            let out = plan
                .members
                .iter()
                .map(|&qi| {
                    let o = run_basic_query(graph, index, &queries[qi], options, &mut scratch, &mut counters);
                    (qi, o)
                })
                .collect();
            (out, true)
        }
    };
    GroupRun {
        outcomes,
        counters,
        fallback,
        cache_peak_entries: cache.peak_entries(),
        cache_peak_paths: cache.peak_stored_vertices(),
        cache_leak,
        cache_bound_violations: cache.bound_violations,
    }
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    if threads <= 1 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

fn map_maybe_parallel<T, R, F>(threads: usize, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if threads <= 1 {
        items.iter().map(f).collect()
    } else {
        items.par_iter().map(f).collect()
    }
}

fn validate(graph: &DirectedGraph, queries: &[Query], options: &BatchOptions) -> Result<()> {
    if !(0.0..=1.0).contains(&options.gamma) {
        return Err(Error::InvalidParameter(format!(
            "gamma must lie in [0, 1], got {}",
            options.gamma
        )));
    }
    let n = graph.vertex_count();
    for q in queries {
        if q.s as usize >= n || q.t as usize >= n {
            return Err(Error::InvalidParameter(format!("query {} endpoint out of range", q.id)));
        }
        if q.k == 0 || q.k >= u16::MAX as u32 {
            return Err(Error::InvalidParameter(format!("query {} has invalid k {}", q.id, q.k)));
        }
    }
    Ok(())
}

/// Answers every query of the batch, sharing work within similar groups.
pub fn batch_enumerate(graph: &DirectedGraph, queries: &[Query], options: &BatchOptions) -> Result<BatchResult> {
    validate(graph, queries, options)?;
    let threads = options.threads.max(1);
    with_pool(threads, || {
        let total = Instant::now();
        let mut stats = BatchStats::default();

        let t = Instant::now();
        let index = build_batch_index(graph, queries);
        stats.build_index = t.elapsed();
        for (i, dir) in [Direction::Forward, Direction::Backward].into_iter().enumerate() {
            stats.index_rounds[i] = index.rounds(dir);
            stats.index_touches[i] = index.touches(dir);
        }

        let t = Instant::now();
        let groups = cluster_queries(&index, queries, options.gamma);
        stats.cluster = t.elapsed();
        stats.group_count = groups.len();

        let t = Instant::now();
        let bound_per_query = graph.vertex_count() as u64 + graph.edge_count() as u64;
        let plans: Vec<Planned> = map_maybe_parallel(threads, &groups, |g| {
            let group: Vec<Query> = g.members.iter().map(|&i| queries[i]).collect();
            let fwd = detect_common_queries(graph, &index, &group, Direction::Forward);
            let bwd = detect_common_queries(graph, &index, &group, Direction::Backward);
            let touches = fwd.touches() + bwd.touches();
            let limit = group.len() as u64 * bound_per_query;
            Planned {
                members: g.members.clone(),
                touch_violation: fwd.touches() > limit || bwd.touches() > limit,
                touches,
                psi: Some((fwd, bwd)),
            }
        });
        stats.detect = t.elapsed();
        for p in &plans {
            stats.detect_touches += p.touches;
            stats.touch_bound_violations += p.touch_violation as usize;
            if let Some((f, b)) = &p.psi {
                stats.hcs_nodes += f.hcs_count() + b.hcs_count();
                stats.detected_nodes += f.detected_nodes().count() + b.detected_nodes().count();
            }
        }

        let t = Instant::now();
        let runs: Vec<GroupRun> =
            map_maybe_parallel(threads, &plans, |p| run_group(graph, &index, queries, p, options));
        stats.enumerate = t.elapsed();

        let mut slots: Vec<Option<QueryOutcome>> = vec![None; queries.len()];
        for run in runs {
            stats.counters.add(&run.counters);
            stats.fallback_groups += run.fallback as usize;
            stats.cache_peak_entries = stats.cache_peak_entries.max(run.cache_peak_entries);
            stats.cache_peak_paths = stats.cache_peak_paths.max(run.cache_peak_paths);
            stats.cache_leaks += run.cache_leak as usize;
            stats.cache_bound_violations += run.cache_bound_violations;
            for (qi, o) in run.outcomes {
                slots[qi] = Some(o);
            }
        }
        let outcomes = slots
            .into_iter()
            .map(|o| o.ok_or_else(|| Error::Invariant("query left unanswered".into())))
            .collect::<Result<Vec<_>>>()?;
        stats.total = total.elapsed();
        let sharing_graphs = if options.collect_sharing_graphs {
            plans.into_iter().filter_map(|p| p.psi).collect()
        } else {
            Vec::new()
        };
        Ok(BatchResult {
            outcomes,
            groups,
            stats,
            sharing_graphs,
        })
    })
}

/// Per-query baseline over the whole batch: one shared index, then an
/// independent bidirectional enumeration per query.
pub fn basic_enumerate(graph: &DirectedGraph, queries: &[Query], options: &BatchOptions) -> Result<BatchResult> {
    validate(graph, queries, options)?;
    let threads = options.threads.max(1);
    with_pool(threads, || {
        let total = Instant::now();
        let mut stats = BatchStats::default();
        let t = Instant::now();
        let index = build_batch_index(graph, queries);
        stats.build_index = t.elapsed();
        for (i, dir) in [Direction::Forward, Direction::Backward].into_iter().enumerate() {
            stats.index_rounds[i] = index.rounds(dir);
            stats.index_touches[i] = index.touches(dir);
        }

        let t = Instant::now();
        let chunk = queries.len().div_ceil(threads.max(1)).max(1);
        let chunks: Vec<&[Query]> = queries.chunks(chunk).collect();
        let parts: Vec<(Vec<QueryOutcome>, EnumCounters)> = map_maybe_parallel(threads, &chunks, |qs| {
            let mut scratch = Scratch::new(graph.vertex_count());
            let mut counters = EnumCounters::default();
            let out = qs
                .iter()
                .map(|q| run_basic_query(graph, &index, q, options, &mut scratch, &mut counters))
                .collect();
            (out, counters)
        });
        stats.enumerate = t.elapsed();
        let mut outcomes = Vec::with_capacity(queries.len());
        for (out, counters) in parts {
            outcomes.extend(out);
            stats.counters.add(&counters);
        }
        stats.total = total.elapsed();
        Ok(BatchResult {
            outcomes,
            groups: Vec::new(),
            stats,
            sharing_graphs: Vec::new(),
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(o: &QueryOutcome) -> Vec<Path> {
        let mut p = o.paths.clone().unwrap();
        p.sort();
        p
    }

    fn diamond_chain() -> DirectedGraph {
        DirectedGraph::from_edges(7, [(0, 2), (1, 2), (2, 3), (2, 4), (3, 5), (4, 5), (5, 6), (3, 6)])
    }

    #[test]
    fn batch_matches_basic() {
        let g = diamond_chain();
        let qs = vec![
            Query::new(0, 0, 6, 4),
            Query::new(1, 1, 6, 4),
            Query::new(2, 0, 5, 3),
            Query::new(3, 2, 2, 3),
            Query::new(4, 0, 6, 1),
        ];
        for gamma in [0.0, 0.5, 1.0] {
            let opts = BatchOptions {
                gamma,
                check_invariants: true,
                ..Default::default()
            };
            let b = batch_enumerate(&g, &qs, &opts).unwrap();
            let s = basic_enumerate(&g, &qs, &opts).unwrap();
            assert_eq!(b.stats.fallback_groups, 0);
            assert_eq!(b.stats.cache_leaks, 0);
            for (x, y) in b.outcomes.iter().zip(&s.outcomes) {
                assert_eq!(x.id, y.id);
                assert_eq!(sorted(x), sorted(y), "query {} gamma {gamma}", x.id);
                assert_eq!(x.count, y.count);
            }
        }
    }

    #[test]
    fn count_mode_skips_paths() {
        let g = diamond_chain();
        let qs = vec![Query::new(0, 0, 6, 4)];
        let opts = BatchOptions {
            output: OutputMode::Counts,
            ..Default::default()
        };
        let b = batch_enumerate(&g, &qs, &opts).unwrap();
        assert_eq!(b.outcomes[0].paths, None);
        assert_eq!(b.outcomes[0].count, 3);
    }

    #[test]
    fn memory_guard_falls_back() {
        let g = diamond_chain();
        let qs = vec![Query::new(0, 0, 6, 4), Query::new(1, 1, 6, 4)];
        let opts = BatchOptions {
            max_cached_vertices: Some(1),
            ..Default::default()
        };
        let b = batch_enumerate(&g, &qs, &opts).unwrap();
        assert!(b.stats.fallback_groups >= 1);
        assert_eq!(b.outcomes[0].count, 3);
    }

    #[test]
    fn rejects_bad_gamma() {
        let g = diamond_chain();
        let opts = BatchOptions {
            gamma: 1.5,
            ..Default::default()
        };
        assert!(matches!(
            batch_enumerate(&g, &[], &opts),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn threads_do_not_change_results() {
        let g = diamond_chain();
        let qs: Vec<_> = (0..6)
            .map(|i| Query::new(i, (i % 3) as u32, 6, 3 + (i % 2) as u32))
            .collect();
        let one = batch_enumerate(
            &g,
            &qs,
            &BatchOptions {
                gamma: 0.0,
                ..Default::default()
            },
        )
        .unwrap();
        let four = batch_enumerate(
            &g,
            &qs,
            &BatchOptions {
                gamma: 0.0,
                threads: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(one.outcomes, four.outcomes);
    }

    #[test]
    fn bound_table_matches_prune_targets() {
        let g = crate::testkit::preferential_attachment(300, 3, 5);
        let qs: Vec<_> = (0..24u64)
            .map(|i| Query::new(i, (i % 5) as u32 * 7, 100 + (i % 4) as u32 * 11, 3 + (i % 4) as u32))
            .collect();
        let index = build_batch_index(&g, &qs);
        let key = |b: &[Bound]| {
            let mut v: Vec<_> = b.iter().map(|b| (b.map.anchor(), b.slack)).collect();
            v.sort();
            v
        };
        let mut checked = 0;
        for dir in [Direction::Forward, Direction::Backward] {
            let psi = detect_common_queries(&g, &index, &qs, dir);
            let consumers = psi.consumers().unwrap();
            let mut table = BoundTable::new(&index, &psi).unwrap();
            for (id, cons) in consumers.iter().enumerate() {
                if psi.hcs(id).is_none() {
                    continue;
                }
                let got = table.bounds(&psi, id, cons);
                assert!(got.windows(2).all(|w| w[0].slack >= w[1].slack));
                let want = resolve_bounds(&index, dir, &psi.prune_targets(id, cons));
                assert_eq!(key(&got), key(&want), "{dir:?} node {id}");
                checked += 1;
            }
        }
        assert!(checked > 10);
    }
}
