//! `geoembed` command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use geoembed::embedding::EmbeddingOptions;
use geoembed::eval::{self, EvalError};
use geoembed::geodesic::DistanceField;
use geoembed::mesh::{Mesh, MeshError};
use geoembed::par::{exec_for_threads, Exec};
use geoembed::persist::{self, PersistError};
use geoembed::pipeline::{PipelineError, Precomputation};
use geoembed::query::QueryError;
use geoembed::svg::SvgParams;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "geoembed", version, about = "Geodesic distance queries on triangle meshes")]
pub struct Cli {
    /// Worker threads; 1 forces the sequential path.
    #[arg(long, global = true, env = "GE_THREADS")]
    pub threads: Option<usize>,
    /// Progress messages on stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the SVG and saddle embedding and save them.
    Precompute(PrecomputeArgs),
    /// Distance between two vertices.
    Query(QueryArgs),
    /// Distances from one vertex to every vertex, one "index distance" per line.
    Ssad(SsadArgs),
    /// Error against exact geodesics over random vertex pairs.
    Eval(EvalArgs),
    /// Header of a precomputation file.
    Info(InfoArgs),
}

#[derive(Debug, Args)]
pub struct PrecomputeArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Euclidean dimension m.
    #[arg(long, default_value_t = 8)]
    pub dim: usize,
    /// Cascade rounds l.
    #[arg(long, default_value_t = 46)]
    pub rounds: usize,
    /// Neighbor cap K.
    #[arg(long, default_value_t = 60)]
    pub k: usize,
    /// Saddle neighbor cap K_S.
    #[arg(long, default_value_t = 20)]
    pub ks: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct LoadArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long)]
    pub pre: PathBuf,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[command(flatten)]
    pub load: LoadArgs,
    #[arg(long)]
    pub src: usize,
    #[arg(long)]
    pub dst: usize,
}

#[derive(Debug, Args)]
pub struct SsadArgs {
    #[command(flatten)]
    pub load: LoadArgs,
    #[arg(long)]
    pub src: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub load: LoadArgs,
    #[arg(long, default_value_t = 1000)]
    pub pairs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Optional per-pair CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Timed passes over the sample.
    #[arg(long, default_value_t = 1)]
    pub repetitions: usize,
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    #[arg(long)]
    pub pre: PathBuf,
    /// Full JSON dump; with --mesh it includes histories and sample rows.
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub mesh: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Persist(#[from] PersistError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

struct Log(u8);

impl Log {
    fn info(&self, msg: impl FnOnce() -> String) {
        if self.0 > 0 {
            eprintln!("{}", msg());
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let mut stdout = std::io::stdout().lock();
    match run(cli, &mut stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn load(args: &LoadArgs) -> Result<(Mesh, Precomputation), CliError> {
    let mesh = Mesh::load(&args.mesh)?;
    let pre = persist::load_precomputation(&args.pre, &mesh)?;
    Ok((mesh, pre))
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let log = Log(cli.verbose);
    let stdout_err = |source| CliError::Write {
        path: PathBuf::from("<stdout>"),
        source,
    };
    match cli.command {
        Command::Precompute(a) => {
            let exec = exec_for_threads(cli.threads);
            let mesh = Mesh::load(&a.mesh)?;
            let params = SvgParams::new(a.k, a.ks).map_err(PipelineError::from)?;
            let mut opts = EmbeddingOptions {
                m: a.dim,
                l: a.rounds,
                seed: a.seed,
                exec,
                ..EmbeddingOptions::default()
            };
            opts.stress.exec = exec;
            opts.cascade.exec = exec;
            log.info(|| format!("{} vertices, {} faces", mesh.num_vertices(), mesh.num_faces()));
            let start = Instant::now();
            let pre = Precomputation::build(&mesh, params, &opts)?;
            log.info(|| {
                format!(
                    "{} saddles, {} SVG edges, final objective {:?} ({:.1} s)",
                    pre.embedding.len(),
                    pre.svg.num_edges(),
                    pre.embedding.objective_history.last(),
                    start.elapsed().as_secs_f64()
                )
            });
            persist::save_precomputation(&a.out, &mesh, &pre)?;
        }
        Command::Query(a) => {
            let (mesh, pre) = load(&a.load)?;
            let ctx = pre.context(&mesh)?;
            let r = ctx.query(a.src, a.dst)?;
            log.info(|| format!("case {}{}", r.case.name(), if r.clamped { ", clamped" } else { "" }));
            writeln!(out, "{}", r.distance).map_err(stdout_err)?;
        }
        Command::Ssad(a) => {
            let (mesh, pre) = load(&a.load)?;
            let ctx = pre.context(&mesh)?;
            let start = Instant::now();
            let distances = (0..mesh.num_vertices())
                .map(|v| ctx.query_distance(a.src, v))
                .collect::<Result<Vec<_>, _>>()?;
            log.info(|| format!("{} queries in {:.3} s", distances.len(), start.elapsed().as_secs_f64()));
            let field = DistanceField {
                source: a.src,
                distances,
            };
            write_file(&a.out, &field.to_text())?;
        }
        Command::Eval(a) => {
            let exec = match cli.threads {
                Some(_) => exec_for_threads(cli.threads),
                None => Exec::Serial,
            };
            let (mesh, pre) = load(&a.load)?;
            let ctx = pre.context(&mesh)?;
            let sample = eval::sample_pairs(&mesh, a.pairs, a.seed)?;
            log.info(|| format!("exact distances for {} pairs", sample.len()));
            let truth = eval::exact_pair_distances(&mesh, &sample, exec)?;
            let mut report = eval::evaluate_queries(&ctx, &sample, &truth)?;
            let bench = eval::benchmark_queries(&ctx, &sample, a.repetitions.max(1))?;
            report.timing = Some(bench.timing);
            write_file(&a.out, &report.to_json())?;
            if let Some(csv) = &a.csv {
                write_file(csv, &report.to_csv())?;
            }
            writeln!(
                out,
                "mean relative error {:.4}% over {} pairs, mean query {:.3} us",
                100.0 * report.mean_relative_error,
                sample.len() - report.excluded,
                1e6 * bench.timing.mean
            )
            .map_err(stdout_err)?;
        }
        Command::Info(a) => {
            let (header, metadata) = persist::read_info(&a.pre)?;
            if a.json {
                let pre = match &a.mesh {
                    Some(path) => Some(persist::load_precomputation(&a.pre, &Mesh::load(path)?)?),
                    None => None,
                };
                writeln!(out, "{}", persist::debug_json(&header, &metadata, pre.as_ref())).map_err(stdout_err)?;
            } else {
                let lines = [
                    ("version", header.version.to_string()),
                    ("mesh_checksum", format!("{:#018x}", header.mesh_checksum)),
                    ("n", header.num_vertices.to_string()),
                    ("saddles", header.num_saddles.to_string()),
                    ("m", header.m.to_string()),
                    ("l", header.l.to_string()),
                    ("K", header.k.to_string()),
                    ("K_S", header.k_saddle.to_string()),
                    ("svg_adjacency", header.num_adjacency.to_string()),
                    ("seed", metadata.embedding.seed.to_string()),
                ];
                for (k, v) in lines {
                    writeln!(out, "{k} {v}").map_err(stdout_err)?;
                }
            }
        }
    }
    Ok(())
}
