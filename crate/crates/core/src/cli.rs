//! The `umet` command line.
//!
//! Exit codes: 0 on success or when the checked property holds, 1 when it
//! fails, 2 on invalid input or usage.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{input, Error, Result};
use crate::graph::{self, AdjacencyMatrix};
use crate::growth::{sample_ensemble, EntryLaw, GammaSpec, GrowthChain};
use crate::io::{self, InputHash, Manifest};
use crate::matrix::{DistanceMatrix, ValidationReport, DEFAULT_TOL};
use crate::mdist::{self, ColumnSource, MatrixDistribution, MetricTriple};
use crate::pmetric::{self, PExponent};
use crate::polytope;
use crate::spectra;
use crate::universality::{self, Targets};

#[derive(Parser, Debug)]
#[command(name = "umet", version, about = "Random distance matrices and finite universal metric spaces")]
pub struct Cli {
    /// Master seed.
    #[arg(long, global = true, env = "UMET_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all logical cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Tolerance for triangle inequalities, scaled by the largest entry.
    #[arg(long, global = true, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Output file (stdout if absent). A manifest is written next to it.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Suppress the manifest and diagnostics on stderr
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample growth chains as JSON lines.
    Gen(GenArgs),
    /// Check the triangle inequalities of a matrix.
    Check {
        #[arg(long = "in")]
        input: PathBuf,
        /// Check as a p-metric instead.
        #[arg(long)]
        p: Option<PExponent>,
    },
    /// Vertices and rays of the admissible polyhedron of a matrix.
    Vertices {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Universality defect curves for an ensemble, as CSV.
    Universality {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 2)]
        prefix: usize,
        #[arg(long, default_value_t = 200)]
        targets: usize,
        /// Comma-separated matrix sizes (default: the full matrix).
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        /// Keep targets inside [0, bound].
        #[arg(long)]
        bound: Option<f64>,
    },
    /// Deterministic approximately universal matrix.
    Construct {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.0625)]
        delta: f64,
        #[arg(long)]
        bound: Option<f64>,
    },
    /// Matrix distributions of metric measure spaces
    #[command(subcommand)]
    Mdist(MdistCommand),
    /// Graph universality and the graph metric bridge
    #[command(subcommand)]
    Graph(GraphCommand),
    /// Growth chains and checks for p-metrics
    #[command(subcommand)]
    Pmetric(PmetricCommand),
    /// Bulk spectrum of an ensemble: histogram CSV and JSON statistics.
    Spectrum {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 40)]
        bins: usize,
    },
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// unif:a,b | unif:b | exp:rate | halfnorm:scale
    #[arg(long, default_value = "halfnorm:1")]
    pub gamma: GammaSpec,
    /// Cap every distance at this value.
    #[arg(long)]
    pub bound: Option<f64>,
}

#[derive(Subcommand, Debug)]
pub enum MdistCommand {
    /// Sampled law of the k-point matrix of a triple.
    Sample {
        #[arg(long)]
        triple: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1000)]
        count: usize,
    },
    /// Exact law of the k-point matrix of a finite triple.
    Exact {
        #[arg(long)]
        triple: PathBuf,
        #[arg(long)]
        k: usize,
    },
    /// Recover a finite triple from an exact law.
    Reconstruct {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Covering check on the columns of a matrix, a triple, or a product law.
    Cond4 {
        #[arg(long = "in", conflicts_with_all = ["triple", "product"])]
        input: Option<PathBuf>,
        #[arg(long, conflicts_with = "product")]
        triple: Option<PathBuf>,
        /// unif:a,b or point:x
        #[arg(long)]
        product: Option<String>,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 100)]
        n_max: usize,
        #[arg(long, default_value_t = 1000)]
        horizon: usize,
        /// Exit with 1 if no N passes.
        #[arg(long)]
        assert: bool,
    },
    /// Two-half consistency of the column prefixes of a matrix.
    Regularity {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 2)]
        prefix: usize,
        #[arg(long, default_value_t = 100)]
        cap: usize,
        #[arg(long, default_value_t = 0.01)]
        level: f64,
    },
}

#[derive(Subcommand, Debug)]
pub enum GraphCommand {
    /// Random graph (--p) or the deterministic universal graph (--universal).
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long, conflicts_with = "universal", required_unless_present = "universal")]
        p: Option<f64>,
        #[arg(long)]
        universal: bool,
    },
    /// Word universality, optionally with an exhaustive extension scan.
    Check {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        depth: usize,
        /// Scan all U, V inside the first this-many vertices.
        #[arg(long)]
        scan_within: Option<usize>,
        #[arg(long, default_value_t = 4)]
        scan_size: usize,
    },
    /// The {1,2}-valued metric of a graph of diameter at most 2.
    Bridge {
        #[arg(long = "in")]
        input: PathBuf,
        /// Add a vertex joined to all others first.
        #[arg(long)]
        apex: bool,
    },
}

#[derive(Subcommand, Debug)]
pub enum PmetricCommand {
    Gen {
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long, default_value = "1")]
        p: PExponent,
    },
    Check {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        p: PExponent,
    },
}

struct Ctx {
    seed: u64,
    tol: f64,
    out: Option<PathBuf>,
    quiet: bool,
    inputs: Vec<InputHash>,
    outputs: Vec<PathBuf>,
}

impl Ctx {
    fn input(&mut self, path: &Path) -> Result<()> {
        let sha256 = io::hash_file(path)?;
        self.inputs.push(InputHash { path: path.to_path_buf(), sha256 });
        Ok(())
    }

    fn emit(&mut self, bytes: &[u8]) -> Result<()> {
        match self.out.clone() {
            Some(p) => self.emit_to(&p, bytes),
            None => {
                use std::io::Write;
                std::io::stdout().write_all(bytes)?;
                Ok(())
            }
        }
    }

    fn emit_to(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        io::atomic_write(path, bytes)?;
        self.outputs.push(path.to_path_buf());
        Ok(())
    }

    fn emit_json<T: Serialize>(&mut self, value: &T) -> Result<()> {
        self.emit(io::json_line(value)?.as_bytes())
    }

    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn matrix(&mut self, path: &Path) -> Result<DistanceMatrix> {
        self.input(path)?;
        io::read_matrix(path)
    }

    fn json<T: serde::de::DeserializeOwned>(&mut self, path: &Path) -> Result<T> {
        self.input(path)?;
        Ok(serde_json::from_str(&io::read_text(path)?)?)
    }

    fn ensemble(&mut self, path: &Path) -> Result<Vec<DistanceMatrix>> {
        self.input(path)?;
        io::read_ensemble(path)
    }
}

fn parse_entry_law(s: &str) -> Result<EntryLaw> {
    let bad = || Error::Input(format!("bad entry law {s:?}; expected unif:a,b or point:x"));
    let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
    let nums = rest.split(',').map(|t| t.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<Vec<f64>>>()?;
    match (kind, nums.as_slice()) {
        ("unif", &[low, high]) => Ok(EntryLaw::Uniform { low, high }),
        ("point", &[x]) => Ok(EntryLaw::Point(x)),
        _ => Err(bad()),
    }
}

fn report_violations(ctx: &Ctx, rep: &ValidationReport) {
    for v in rep.violations.iter().take(20) {
        ctx.note(format!("violation: d({},{}) exceeds the path through {} by {}", v.i, v.j, v.via, -v.slack));
    }
    if rep.violations.len() > 20 {
        ctx.note(format!("... {} violations in total", rep.violations.len()));
    }
}

fn gen_chains(ctx: &Ctx, g: &GenArgs, p: PExponent) -> Result<Vec<GrowthChain>> {
    if g.count == 0 {
        return input("count must be positive");
    }
    match p {
        PExponent::Finite(q) if q == 1.0 => sample_ensemble(g.n, g.count, g.gamma, g.bound, ctx.seed),
        _ => {
            use rayon::prelude::*;
            (0..g.count as u64)
                .into_par_iter()
                .map(|c| pmetric::sample_p_metric(g.n, p, g.gamma, g.bound, ctx.seed, c))
                .collect()
        }
    }
}

#[derive(Serialize)]
struct VertexOutput<'a> {
    vertices: &'a [Vec<f64>],
    rays: &'a [Vec<f64>],
}

#[derive(Serialize)]
struct GraphCheckOutput {
    words: graph::WordReport,
    scan: Option<graph::ExtensionScan>,
}

fn dispatch(ctx: &mut Ctx, command: &Command) -> Result<i32> {
    match command {
        Command::Gen(g) => {
            let chains = gen_chains(ctx, g, PExponent::Finite(1.0))?;
            ctx.emit(io::chains_to_jsonl(&chains)?.as_bytes())?;
            Ok(0)
        }
        Command::Check { input, p } => {
            let m = ctx.matrix(input)?;
            let rep = match p {
                Some(p) => pmetric::validate_p(&m, *p, ctx.tol),
                None => m.validate(ctx.tol),
            };
            report_violations(ctx, &rep);
            ctx.emit_json(&rep)?;
            Ok(if rep.ok { 0 } else { 1 })
        }
        Command::Vertices { input } => {
            let m = ctx.matrix(input)?;
            let vs = polytope::extreme_points(&m)?;
            ctx.emit_json(&VertexOutput { vertices: &vs.vertices, rays: &vs.rays })?;
            Ok(0)
        }
        Command::Universality { input, prefix, targets, sizes, bound } => {
            let ms = ctx.ensemble(input)?;
            let mut csv = String::from("chain,N,prefix,defect\n");
            for (c, m) in ms.iter().enumerate() {
                let sizes = if sizes.is_empty() { vec![m.n()] } else { sizes.clone() };
                let t = Targets::Sampled { count: *targets, bound: *bound };
                let seed = crate::rng::derive_seed(ctx.seed, c as u64);
                for rep in universality::defect_curve(m, *prefix, &t, &sizes, seed)? {
                    csv.push_str(&format!("{c},{},{},{}\n", rep.columns_used, rep.prefix, rep.defect));
                }
            }
            ctx.emit(csv.as_bytes())?;
            Ok(0)
        }
        Command::Construct { n, delta, bound } => {
            let m = universality::construct_universal(*n, *delta, *bound, ctx.seed)?;
            let bytes = io::matrix_bytes(&m, ctx.out.as_deref())?;
            ctx.emit(&bytes)?;
            Ok(0)
        }
        Command::Mdist(cmd) => mdist_command(ctx, cmd),
        Command::Graph(cmd) => graph_command(ctx, cmd),
        Command::Pmetric(PmetricCommand::Gen { gen, p }) => {
            let chains = gen_chains(ctx, gen, *p)?;
            ctx.emit(io::chains_to_jsonl(&chains)?.as_bytes())?;
            Ok(0)
        }
        Command::Pmetric(PmetricCommand::Check { input, p }) => {
            let m = ctx.matrix(input)?;
            let rep = pmetric::validate_p(&m, *p, ctx.tol);
            report_violations(ctx, &rep);
            ctx.emit_json(&rep)?;
            Ok(if rep.ok { 0 } else { 1 })
        }
        Command::Spectrum { input, bins } => {
            let ms = ctx.ensemble(input)?;
            let rows: Vec<Vec<Vec<f64>>> = ms.iter().map(|m| m.to_full()).collect();
            let rep = spectra::spectrum_stats(&rows, *bins)?;
            match ctx.out.clone() {
                Some(out) => {
                    ctx.emit_to(&out, rep.histogram_csv().as_bytes())?;
                    let mut stats = out.into_os_string();
                    stats.push(".stats.json");
                    ctx.emit_to(Path::new(&stats), io::json_line(&rep)?.as_bytes())?;
                }
                None => ctx.emit_json(&rep)?,
            }
            if rep.degenerate {
                ctx.note("bulk spectrum is degenerate");
            }
            Ok(0)
        }
    }
}

fn mdist_command(ctx: &mut Ctx, cmd: &MdistCommand) -> Result<i32> {
    match cmd {
        MdistCommand::Sample { triple, k, count } => {
            let t: MetricTriple = ctx.json(triple)?;
            t.check()?;
            ctx.emit_json(&mdist::sample_matrix_distribution(&t, *k, *count, ctx.seed)?)?;
            Ok(0)
        }
        MdistCommand::Exact { triple, k } => {
            let t: MetricTriple = ctx.json(triple)?;
            t.check()?;
            ctx.emit_json(&mdist::exact_matrix_distribution(&t, *k)?)?;
            Ok(0)
        }
        MdistCommand::Reconstruct { input } => {
            let e: MatrixDistribution = ctx.json(input)?;
            match mdist::reconstruct_finite(&e, 1e-9) {
                Ok(rec) => {
                    ctx.emit_json(&rec)?;
                    Ok(0)
                }
                Err(Error::NotIdentifiable(msg)) => {
                    ctx.note(format!("not identifiable: {msg}"));
                    Ok(1)
                }
                Err(e) => Err(e),
            }
        }
        MdistCommand::Cond4 { input, triple, product, eps, n_max, horizon, assert } => {
            let source = match (input, triple, product) {
                (Some(p), None, None) => ColumnSource::Matrix(ctx.matrix(p)?),
                (None, Some(p), None) => ColumnSource::Triple { triple: ctx.json(p)?, seed: ctx.seed },
                (None, None, Some(s)) => ColumnSource::Product { law: parse_entry_law(s)?, seed: ctx.seed },
                _ => return crate::error::input("give exactly one of --in, --triple, --product"),
            };
            let rep = mdist::condition4_check(&source, *eps, *n_max, *horizon)?;
            ctx.emit_json(&rep)?;
            if rep.passing_n.is_none() {
                ctx.note(format!("no N <= {n_max} passes at eps = {eps}"));
            }
            Ok(if *assert && rep.passing_n.is_none() { 1 } else { 0 })
        }
        MdistCommand::Regularity { input, prefix, cap, level } => {
            let m = ctx.matrix(input)?;
            let rep = mdist::regularity_report(&m, *prefix, *cap, *level, ctx.seed)?;
            ctx.emit_json(&rep)?;
            Ok(if rep.consistent { 0 } else { 1 })
        }
    }
}

fn graph_command(ctx: &mut Ctx, cmd: &GraphCommand) -> Result<i32> {
    match cmd {
        GraphCommand::Gen { n, p, universal } => {
            let g = if *universal {
                graph::construct_universal_graph(*n)?
            } else {
                graph::sample_er(*n, p.expect("required by the parser"), ctx.seed)?
            };
            ctx.emit_json(&g)?;
            Ok(0)
        }
        GraphCommand::Check { input, depth, scan_within, scan_size } => {
            let g: AdjacencyMatrix = ctx.json(input)?;
            let words = graph::word_universality_depth(&g, *depth)?;
            let scan = scan_within.map(|w| graph::extension_scan(&g, w, *scan_size)).transpose()?;
            let ok = words.universal && scan.as_ref().is_none_or(|s| s.failure_count == 0);
            if !words.universal {
                ctx.note(format!("{} words missing, first: {:?}", words.missing_count, words.missing.first()));
            }
            ctx.emit_json(&GraphCheckOutput { words, scan })?;
            Ok(if ok { 0 } else { 1 })
        }
        GraphCommand::Bridge { input, apex } => {
            let g: AdjacencyMatrix = ctx.json(input)?;
            let g = if *apex { g.with_apex() } else { g };
            let m = graph::graph_to_distance(&g)?;
            let bytes = io::matrix_bytes(&m, ctx.out.as_deref())?;
            ctx.emit(&bytes)?;
            Ok(0)
        }
    }
}

/// Run the command line and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let start = Instant::now();
    let mut ctx = Ctx { seed: cli.seed, tol: cli.tol, out: cli.out.clone(), quiet: cli.quiet, inputs: Vec::new(), outputs: Vec::new() };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        pool = pool.num_threads(j);
    }
    let outcome = match pool.build() {
        Ok(pool) => pool.install(|| dispatch(&mut ctx, &cli.command)),
        Err(e) => Err(Error::Input(format!("cannot start {:?} workers: {e}", cli.jobs))),
    };
    let code = match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    };
    let manifest = Manifest {
        command: args.iter().map(|a| a.to_string_lossy().into_owned()).collect(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: ctx.seed,
        inputs: ctx.inputs,
        outputs: ctx.outputs,
        exit_code: code,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    let written = match (&cli.out, serde_json::to_string_pretty(&manifest)) {
        (Some(out), Ok(text)) => io::atomic_write(&io::manifest_path(out), text.as_bytes()),
        (None, Ok(text)) => {
            if !cli.quiet {
                eprintln!("{text}");
            }
            Ok(())
        }
        (_, Err(e)) => Err(e.into()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write manifest: {e}");
        return 2;
    }
    code
}
