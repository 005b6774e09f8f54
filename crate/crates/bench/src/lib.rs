//! Workload builders and a basic-versus-batch timing harness shared by the
//! criterion benches, the speedup example and the acceptance suite.

use std::time::Duration;

use hcpath::testkit::{erdos_renyi, generate_queries, preferential_attachment, GenSpec};
use hcpath::{basic_enumerate, batch_enumerate, BatchOptions, BatchResult, DirectedGraph, OutputMode, Query};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphKind {
    ErdosRenyi,
    /// Attachment edges with a random orientation each.
    PreferentialAttachment,
    /// Attachment edges present in both orientations.
    MutualPreferentialAttachment,
}

impl GraphKind {
    /// A graph on `n` vertices with about `n * avg_degree` arcs.
    pub fn build(self, n: usize, avg_degree: f64, seed: u64) -> DirectedGraph {
        match self {
            GraphKind::ErdosRenyi => erdos_renyi(n, avg_degree, seed),
            GraphKind::PreferentialAttachment => preferential_attachment(n, avg_degree.round() as usize, seed),
            GraphKind::MutualPreferentialAttachment => {
                let base = preferential_attachment(n, (avg_degree / 2.0).round() as usize, seed);
                let arcs: Vec<_> = base.edges().flat_map(|(u, v)| [(u, v), (v, u)]).collect();
                DirectedGraph::from_edges(n, arcs)
            }
        }
    }
}

pub struct Workload {
    pub graph: DirectedGraph,
    pub queries: Vec<Query>,
}

/// `count` queries of hop constraint `k` on a fresh random graph, a
/// fraction `rho` of them copies of one base query.
pub fn duplicate_workload(
    kind: GraphKind,
    n: usize,
    avg_degree: f64,
    count: usize,
    rho: f64,
    k: u32,
    seed: u64,
) -> Workload {
    let graph = kind.build(n, avg_degree, seed);
    let spec = GenSpec::new(count, (k, k), seed.wrapping_add(1)).with_duplicates(rho);
    let queries = generate_queries(&graph, &spec).expect("random graph has reachable pairs");
    Workload { graph, queries }
}

/// Best-of-`reps` totals of both engines on one workload.
#[derive(Clone, Debug)]
pub struct Comparison {
    pub basic_total: Duration,
    pub batch_total: Duration,
    pub basic: BatchResult,
    pub batch: BatchResult,
}

impl Comparison {
    pub fn time_ratio(&self) -> f64 {
        self.batch_total.as_secs_f64() / self.basic_total.as_secs_f64()
    }

    pub fn expansion_ratio(&self) -> f64 {
        self.batch.stats.counters.dfs_expansions as f64 / self.basic.stats.counters.dfs_expansions.max(1) as f64
    }
}

/// Counts-only runs without invariant checks, alternating the engines.
pub fn compare(w: &Workload, reps: usize) -> Comparison {
    let opts = BatchOptions {
        output: OutputMode::Counts,
        check_invariants: false,
        ..Default::default()
    };
    let mut best: Option<Comparison> = None;
    for _ in 0..reps.max(1) {
        let basic = basic_enumerate(&w.graph, &w.queries, &opts).expect("valid workload");
        let batch = batch_enumerate(&w.graph, &w.queries, &opts).expect("valid workload");
        let (bt, ct) = (basic.stats.total, batch.stats.total);
        match &mut best {
            None => {
                best = Some(Comparison {
                    basic_total: bt,
                    batch_total: ct,
                    basic,
                    batch,
                })
            }
            Some(c) => {
                if bt < c.basic_total {
                    c.basic_total = bt;
                    c.basic = basic;
                }
                if ct < c.batch_total {
                    c.batch_total = ct;
                    c.batch = batch;
                }
            }
        }
    }
    best.unwrap()
}
