//! The `hcpath` command line: answer query batches, generate query files and
//! time the per-query and batch engines against each other.
//!
//! [`main_with`] is the whole program behind an argument list and two output
//! streams, so integration tests can drive it in-process.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path as FsPath, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hcpath::testkit::{brute_force_paths, generate_queries, GenSpec};
use hcpath::{
    basic_enumerate, batch_enumerate, load_edge_list, parse_queries, resolve_queries, write_queries, BatchOptions,
    BatchResult, DirectedGraph, OutputMode, Query, QueryOutcome,
};

/// Graphs above this many vertices plus edges trigger a warning in oracle mode.
pub const ORACLE_SIZE_WARNING: usize = 20_000;

#[derive(Parser, Debug)]
#[command(
    name = "hcpath",
    version,
    about = "Batch hop-constrained s-t simple path enumeration"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Answer every query in a query file.
    Run(RunArgs),
    /// Write a random query file for a graph.
    Gen(GenArgs),
    /// Time the engines on one batch and print a CSV report.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Batch,
    Basic,
    Oracle,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Batch => "batch",
            Mode::Basic => "basic",
            Mode::Oracle => "oracle",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Output {
    Paths,
    Counts,
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// Edge list, one `u v` arc per line.
    #[arg(long)]
    pub graph: PathBuf,
    /// Query file, one `id s t k` line per query.
    #[arg(long)]
    pub queries: PathBuf,
    /// Clustering threshold in [0, 1].
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    #[arg(long, value_enum, default_value_t = Mode::Batch)]
    pub mode: Mode,
    #[arg(long, value_enum, default_value_t = Output::Paths)]
    pub output: Output,
    /// Result file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Write every group's sharing graphs as Graphviz to this file.
    #[arg(long)]
    pub dump_sharing_graph: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct GenArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Query file to write; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 4)]
    pub k_min: u32,
    #[arg(long, default_value_t = 7)]
    pub k_max: u32,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Fraction of queries that copy one base query.
    #[arg(long)]
    pub dup_fraction: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct BenchArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Query file; queries are generated from the flags below when absent.
    #[arg(long)]
    pub queries: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    /// Engine to time; both basic and batch when absent.
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// CSV file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long, default_value_t = 3)]
    pub bench_reps: usize,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 4)]
    pub k_min: u32,
    #[arg(long, default_value_t = 7)]
    pub k_max: u32,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub dup_fraction: Option<f64>,
}

/// A failure with its process exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Invariant(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Input(m) | CliError::Invariant(m) => m,
        }
    }
}

impl From<hcpath::Error> for CliError {
    fn from(e: hcpath::Error) -> Self {
        match e {
            hcpath::Error::InvalidParameter(_) => CliError::Usage(e.to_string()),
            hcpath::Error::Invariant(_) => CliError::Invariant(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

fn io_error(path: &FsPath, e: io::Error) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, stdout, stderr),
        Command::Gen(a) => cmd_gen(a, stdout),
        Command::Bench(a) => cmd_bench(a, stdout, stderr),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            e.exit_code()
        }
    }
}

pub fn load_graph(path: &FsPath) -> Result<DirectedGraph, CliError> {
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    load_edge_list(BufReader::new(file)).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Reads and resolves a query file, warning about queries whose endpoints
/// the graph does not contain.
pub fn load_queries(graph: &DirectedGraph, path: &FsPath, stderr: &mut dyn Write) -> Result<Vec<Query>, CliError> {
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    let raw = parse_queries(BufReader::new(file)).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let (ok, unknown) = resolve_queries(graph, &raw);
    for r in unknown {
        let _ = writeln!(
            stderr,
            "warning: query {} names a vertex not in the graph ({} -> {}); skipped",
            r.id, r.s, r.t
        );
    }
    Ok(ok)
}

fn check_gamma(gamma: f64) -> Result<(), CliError> {
    if (0.0..=1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--gamma must lie in [0, 1], got {gamma}")))
    }
}

fn check_threads(threads: usize) -> Result<(), CliError> {
    if threads == 0 {
        Err(CliError::Usage("--threads must be at least 1".into()))
    } else {
        Ok(())
    }
}

fn with_sink<F>(out: Option<&FsPath>, stdout: &mut dyn Write, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| io_error(path, e))?;
            let mut w = BufWriter::new(file);
            body(&mut w).and_then(|_| w.flush()).map_err(|e| io_error(path, e))
        }
        None => {
            let mut w = BufWriter::new(stdout);
            body(&mut w)
                .and_then(|_| w.flush())
                .map_err(|e| CliError::Input(format!("stdout: {e}")))
        }
    }
}

/// Per-query answers in original labels, paths sorted.
struct Answer {
    id: u64,
    count: u64,
    paths: Option<Vec<Vec<u64>>>,
}

fn labelled(graph: &DirectedGraph, o: QueryOutcome) -> Answer {
    let paths = o.paths.map(|ps| {
        let mut v: Vec<Vec<u64>> = ps
            .iter()
            .map(|p| p.vertices().iter().map(|&x| graph.label(x)).collect())
            .collect();
        v.sort_unstable();
        v
    });
    Answer {
        id: o.id,
        count: o.count,
        paths,
    }
}

fn oracle_answers(graph: &DirectedGraph, queries: &[Query], output: Output) -> Vec<Answer> {
    queries
        .iter()
        .map(|q| {
            let found = brute_force_paths(graph, q.s, q.t, q.k);
            let paths = (output == Output::Paths).then(|| {
                let mut v: Vec<Vec<u64>> = found
                    .iter()
                    .map(|p| p.iter().map(|&x| graph.label(x)).collect())
                    .collect();
                v.sort_unstable();
                v
            });
            Answer {
                id: q.id,
                count: found.len() as u64,
                paths,
            }
        })
        .collect()
}

fn engine_options(gamma: f64, output: Output, threads: usize) -> BatchOptions {
    BatchOptions {
        gamma,
        output: match output {
            Output::Paths => OutputMode::Paths,
            Output::Counts => OutputMode::Counts,
        },
        threads,
        ..Default::default()
    }
}

fn write_answers(w: &mut dyn Write, answers: &[Answer], output: Output) -> io::Result<()> {
    for a in answers {
        match output {
            Output::Counts => writeln!(w, "{} {}", a.id, a.count)?,
            Output::Paths => {
                writeln!(w, "q {} {}", a.id, a.count)?;
                for p in a.paths.as_deref().unwrap_or_default() {
                    let mut line = String::new();
                    for (i, v) in p.iter().enumerate() {
                        if i > 0 {
                            line.push(' ');
                        }
                        let _ = write!(line, "{v}");
                    }
                    writeln!(w, "{line}")?;
                }
            }
        }
    }
    Ok(())
}

fn sharing_dot(graph: &DirectedGraph, queries: &[Query], result: &BatchResult) -> String {
    let mut s = String::new();
    for (g, (fwd, bwd)) in result.groups.iter().zip(&result.sharing_graphs) {
        let id = |pos: usize| queries[g.members[pos]].id;
        for psi in [fwd, bwd] {
            let name = format!(
                "group{}_{}",
                g.members.first().map_or(0, |&m| queries[m].id),
                psi.side().as_str()
            );
            s.push_str(&psi.to_dot(&name, |v| graph.label(v), id));
        }
    }
    s
}

pub fn cmd_run(args: &RunArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    check_gamma(args.gamma)?;
    check_threads(args.threads)?;
    let graph = load_graph(&args.graph)?;
    let queries = load_queries(&graph, &args.queries, stderr)?;
    if args.mode != Mode::Batch && args.dump_sharing_graph.is_some() {
        let _ = writeln!(stderr, "warning: --dump-sharing-graph only applies to batch mode");
    }
    let answers = match args.mode {
        Mode::Oracle => {
            if graph.vertex_count() + graph.edge_count() > ORACLE_SIZE_WARNING {
                let _ = writeln!(
                    stderr,
                    "warning: oracle mode on a graph with {} vertices and {} edges may take very long",
                    graph.vertex_count(),
                    graph.edge_count()
                );
            }
            oracle_answers(&graph, &queries, args.output)
        }
        Mode::Basic | Mode::Batch => {
            let mut opts = engine_options(args.gamma, args.output, args.threads);
            let result = if args.mode == Mode::Basic {
                basic_enumerate(&graph, &queries, &opts)?
            } else {
                opts.collect_sharing_graphs = args.dump_sharing_graph.is_some();
                let result = batch_enumerate(&graph, &queries, &opts)?;
                if let Some(path) = &args.dump_sharing_graph {
                    std::fs::write(path, sharing_dot(&graph, &queries, &result)).map_err(|e| io_error(path, e))?;
                }
                if result.stats.fallback_groups > 0 {
                    let _ = writeln!(
                        stderr,
                        "warning: {} group(s) fell back to per-query enumeration",
                        result.stats.fallback_groups
                    );
                }
                result
            };
            result.outcomes.into_iter().map(|o| labelled(&graph, o)).collect()
        }
    };
    with_sink(args.out.as_deref(), stdout, |w| write_answers(w, &answers, args.output))
}

fn gen_spec(count: usize, k_min: u32, k_max: u32, seed: u64, dup: Option<f64>) -> GenSpec {
    let spec = GenSpec::new(count, (k_min, k_max), seed);
    match dup {
        Some(rho) => spec.with_duplicates(rho),
        None => spec,
    }
}

pub fn cmd_gen(args: &GenArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let graph = load_graph(&args.graph)?;
    let spec = gen_spec(args.count, args.k_min, args.k_max, args.seed, args.dup_fraction);
    let queries = generate_queries(&graph, &spec)?;
    with_sink(args.out.as_deref(), stdout, |w| write_queries(&graph, &queries, w))
}

/// One CSV row, averaged over repetitions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BenchRow {
    pub mode: String,
    pub group_count: usize,
    pub build_index_ms: f64,
    pub cluster_ms: f64,
    pub detect_ms: f64,
    pub enumerate_ms: f64,
    pub total_ms: f64,
    pub dfs_expansions: u64,
    pub cache_peak_paths: usize,
}

pub const BENCH_HEADER: &str =
    "mode,group_count,build_index_ms,cluster_ms,detect_ms,enumerate_ms,total_ms,dfs_expansions,cache_peak_paths";

impl BenchRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{:.3},{:.3},{:.3},{:.3},{:.3},{},{}",
            self.mode,
            self.group_count,
            self.build_index_ms,
            self.cluster_ms,
            self.detect_ms,
            self.enumerate_ms,
            self.total_ms,
            self.dfs_expansions,
            self.cache_peak_paths
        )
    }
}

fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Runs `mode` `reps` times in counts mode and averages the timings.
pub fn bench_mode(
    graph: &DirectedGraph,
    queries: &[Query],
    mode: Mode,
    opts: &BatchOptions,
    reps: usize,
) -> Result<BenchRow, CliError> {
    let mut row = BenchRow {
        mode: mode.name().to_string(),
        ..Default::default()
    };
    for _ in 0..reps {
        let r = match mode {
            Mode::Batch => batch_enumerate(graph, queries, opts)?,
            Mode::Basic => basic_enumerate(graph, queries, opts)?,
            Mode::Oracle => return Err(CliError::Usage("bench times the basic and batch engines only".into())),
        };
        let s = &r.stats;
        row.build_index_ms += ms(s.build_index);
        row.cluster_ms += ms(s.cluster);
        row.detect_ms += ms(s.detect);
        row.enumerate_ms += ms(s.enumerate);
        row.total_ms += ms(s.total);
        row.group_count = s.group_count;
        row.dfs_expansions = s.counters.dfs_expansions;
        row.cache_peak_paths = s.cache_peak_paths;
    }
    let n = reps as f64;
    for t in [
        &mut row.build_index_ms,
        &mut row.cluster_ms,
        &mut row.detect_ms,
        &mut row.enumerate_ms,
        &mut row.total_ms,
    ] {
        *t /= n;
    }
    Ok(row)
}

pub fn cmd_bench(args: &BenchArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    check_gamma(args.gamma)?;
    check_threads(args.threads)?;
    if args.bench_reps == 0 {
        return Err(CliError::Usage("--bench-reps must be at least 1".into()));
    }
    let graph = load_graph(&args.graph)?;
    let (queries, source) = match &args.queries {
        Some(path) => (
            load_queries(&graph, path, stderr)?,
            format!("queries from {}", path.display()),
        ),
        None => {
            let spec = gen_spec(args.count, args.k_min, args.k_max, args.seed, args.dup_fraction);
            let similarity = match args.dup_fraction {
                Some(rho) => format!(", duplicate fraction {rho} as the similarity stand-in"),
                None => String::new(),
            };
            (
                generate_queries(&graph, &spec)?,
                format!(
                    "{} generated queries, k in [{}, {}], seed {}{similarity}",
                    args.count, args.k_min, args.k_max, args.seed
                ),
            )
        }
    };
    let opts = BatchOptions {
        check_invariants: false,
        ..engine_options(args.gamma, Output::Counts, args.threads)
    };
    let modes = match args.mode {
        Some(m) => vec![m],
        None => vec![Mode::Basic, Mode::Batch],
    };
    let rows = modes
        .into_iter()
        .map(|m| bench_mode(&graph, &queries, m, &opts, args.bench_reps))
        .collect::<Result<Vec<_>, _>>()?;
    with_sink(args.out.as_deref(), stdout, |w| {
        writeln!(
            w,
            "# {} vertices, {} edges; {source}; gamma {}; times are means of {} run(s)",
            graph.vertex_count(),
            graph.edge_count(),
            args.gamma,
            args.bench_reps
        )?;
        writeln!(w, "{BENCH_HEADER}")?;
        for r in &rows {
            writeln!(w, "{}", r.csv())?;
        }
        Ok(())
    })
}
