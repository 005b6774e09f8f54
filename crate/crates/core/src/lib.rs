//! Batch enumeration of hop-constrained s-t simple paths.
//!
//! A query `q(s, t, k)` asks for every simple path from `s` to `t` with at
//! most `k` hops. Answering a batch of such queries one by one repeats a lot
//! of traversal: queries whose sources (or targets) sit close together walk
//! the same sub-paths. This crate answers the batch by
//!
//! 1. building one hop-distance index for all sources and targets with a
//!    shared multi-source BFS ([`index`]),
//! 2. grouping queries whose hop-bounded neighbourhoods overlap
//!    ([`cluster`]),
//! 3. detecting, per group and per direction, single-source sub-queries that
//!    several queries would otherwise enumerate independently ([`share`]),
//! 4. enumerating those sub-queries once in dependency order, caching their
//!    path sets and joining forward and backward halves into final results
//!    ([`batch`]).
//!
//! [`single`] holds the per-query bidirectional baseline the batch engine is
//! measured against, and [`testkit`] an independent brute-force oracle plus
//! random instance and query generators.

pub mod batch;
pub mod cluster;
pub mod error;
pub mod graph;
pub mod index;
pub mod path;
pub mod query;
pub mod share;
pub mod single;
pub mod testkit;

pub use batch::{
    basic_enumerate, batch_enumerate, search_with_reuse, BatchOptions, BatchResult, BatchStats, OutputMode,
    QueryOutcome, ResultCache,
};
pub use cluster::{cluster_queries, NeighborProfile, QueryGroup};
pub use error::{Error, Result};
pub use graph::{induce_sample, load_edge_list, DirectedGraph, Direction, VertexId};
pub use index::{build_batch_index, BatchIndex, DistanceMap, UNREACHABLE};
pub use path::{concat_paths, Path, PathStore};
pub use query::{parse_queries, resolve_queries, write_queries, Query, RawQuery};
pub use share::{detect_common_queries, dominates, HcsQuery, NodeId, Origin, SharingGraph, SharingNode};
pub use single::{enumerate_single, join_halves, search_half, search_half_exhaustive, EnumCounters, PruneTarget};
