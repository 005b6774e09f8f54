#![allow(dead_code)]

use hcpath::testkit::{erdos_renyi, preferential_attachment};
use hcpath::{DirectedGraph, Path, Query};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_graph(pa: bool, n: usize, degree: usize, seed: u64) -> DirectedGraph {
    if pa {
        preferential_attachment(n, degree.max(1), seed)
    } else {
        erdos_renyi(n, degree as f64, seed)
    }
}

/// Arbitrary endpoints, reachable or not; some share a source or target and
/// a few have `s == t`.
pub fn random_queries(g: &DirectedGraph, count: usize, k_max: u32, seed: u64) -> Vec<Query> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = g.vertex_count() as u32;
    let hubs: Vec<u32> = (0..3).map(|_| rng.gen_range(0..n)).collect();
    (0..count)
        .map(|i| {
            let pick = |rng: &mut ChaCha8Rng| {
                if rng.gen_bool(0.4) {
                    hubs[rng.gen_range(0..hubs.len())]
                } else {
                    rng.gen_range(0..n)
                }
            };
            let s = pick(&mut rng);
            let t = if rng.gen_bool(0.03) { s } else { pick(&mut rng) };
            Query::new(i as u64, s, t, rng.gen_range(1..=k_max))
        })
        .collect()
}

pub fn oracle(g: &DirectedGraph, q: &Query) -> Vec<Path> {
    hcpath::testkit::brute_force_paths(g, q.s, q.t, q.k)
        .into_iter()
        .map(Path::new)
        .collect()
}

pub fn sorted(mut v: Vec<Path>) -> Vec<Path> {
    v.sort();
    v
}
