//! Prints batch versus per-query timings on mid-size random graphs.
//!
//! Usage: `speedup [er|pa|mpa] [rho] [seeds] [n] [avg_degree] [queries] [k] [reps]`

use hcpath_bench::{compare, duplicate_workload, GraphKind};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let kind = match args.first().map(String::as_str) {
        Some("er") => GraphKind::ErdosRenyi,
        Some("pa") => GraphKind::PreferentialAttachment,
        _ => GraphKind::MutualPreferentialAttachment,
    };
    let arg = |i: usize, d: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let rho = arg(1, 0.9);
    let seeds = arg(2, 5.0) as u64;
    let (n, deg, count, k) = (
        arg(3, 50_000.0) as usize,
        arg(4, 10.0),
        arg(5, 100.0) as usize,
        arg(6, 6.0) as u32,
    );
    let (mut basic, mut batch) = (0.0, 0.0);
    for seed in 1..=seeds {
        let w = duplicate_workload(kind, n, deg, count, rho, k, seed);
        let c = compare(&w, arg(7, 3.0) as usize);
        let paths: u64 = c.basic.outcomes.iter().map(|o| o.count).sum();
        let s = &c.batch.stats;
        println!(
            "seed {seed}: m={} paths={paths} basic {:.1}ms (index {:.1}, enum {:.1}) batch {:.1}ms (index {:.1}, cluster {:.1}, detect {:.1}, enum {:.1}) groups={} time {:.3} expansions {:.3}",
            w.graph.edge_count(),
            c.basic_total.as_secs_f64() * 1e3,
            c.basic.stats.build_index.as_secs_f64() * 1e3,
            c.basic.stats.enumerate.as_secs_f64() * 1e3,
            c.batch_total.as_secs_f64() * 1e3,
            s.build_index.as_secs_f64() * 1e3,
            s.cluster.as_secs_f64() * 1e3,
            s.detect.as_secs_f64() * 1e3,
            s.enumerate.as_secs_f64() * 1e3,
            s.group_count,
            c.time_ratio(),
            c.expansion_ratio(),
        );
        basic += c.basic_total.as_secs_f64();
        batch += c.batch_total.as_secs_f64();
    }
    println!("aggregate time ratio {:.3}", batch / basic);
}
