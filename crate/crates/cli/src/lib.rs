//! Command-line experiments for general graph random features.
//!
//! Every subcommand writes one JSON document (inputs, seed, version and
//! metrics) to stdout or `--output`, plus optional CSV side files.
//! Exit codes: 0 success, 1 usage or input error, 2 numerical failure.

pub mod bench;
mod commands;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ggrf_core::{datasets, load_edge_list, normalized_adjacency, Graph, KernelSpec};
use serde::Serialize;
use serde_json::{json, Value};

pub use bench::{fit_exponent, run_sweep, BenchRow, GraphFamily, SweepConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] ggrf_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use ggrf_core::Error as E;
        match self {
            CliError::Core(E::Singular(_) | E::Divergent { .. } | E::NonFinite(_)) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "ggrf",
    version,
    about = "General graph random features: kernel estimation, graph ODEs, clustering, regression and learned modulation"
)]
pub struct Cli {
    /// Worker threads for walk sampling (results do not depend on it).
    #[arg(long, global = true, env = "GGRF_THREADS")]
    pub threads: Option<usize>,

    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    /// Omit wall-clock timings so that repeated runs are byte-identical.
    #[arg(long, global = true)]
    pub no_timing: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate a kernel Gram matrix and compare it with the exact one.
    Estimate(commands::EstimateArgs),
    /// Monte Carlo solution of a linear graph ODE.
    Ode(commands::OdeArgs),
    /// Kernel k-means on exact and estimated kernels.
    Cluster(commands::ClusterArgs),
    /// Predict masked node vectors by kernel regression.
    Regress(commands::RegressArgs),
    /// Train a neural modulation function.
    TrainMod(commands::TrainArgs),
    /// Time exact and random-feature kernel evaluation over graph sizes.
    Bench(bench::BenchArgs),
    /// Write a generated graph as an edge list.
    GenGraph(commands::GenGraphArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GraphArgs {
    /// Edge-list file, or `karate` / `lesmis` for the bundled graphs.
    #[arg(long)]
    pub graph: String,
    /// Treat each line as a single directed edge.
    #[arg(long)]
    pub directed: bool,
}

impl GraphArgs {
    pub fn load(&self) -> CliResult<Graph> {
        load_graph(&self.graph, self.directed)
    }
}

/// Loads an edge list, falling back to the bundled graphs by name.
pub fn load_graph(spec: &str, directed: bool) -> CliResult<Graph> {
    let path = Path::new(spec);
    if !path.exists() {
        match spec {
            "karate" => return Ok(datasets::karate()),
            "lesmis" => return Ok(datasets::lesmis()),
            _ => {}
        }
    }
    let file = open(path)?;
    Ok(load_edge_list(BufReader::new(file), directed)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelChoice {
    #[value(alias = "d-reg", alias = "regularised-laplacian")]
    DRegularisedLaplacian,
    #[value(alias = "p-step")]
    PStepRandomWalk,
    Diffusion,
    #[value(alias = "inverse_cosine")]
    InverseCosine,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct KernelArgs {
    #[arg(long, value_enum, default_value = "diffusion")]
    pub kernel: KernelChoice,
    /// Kernel regulariser sigma (default 0.8 for the regularised Laplacian, 1 for diffusion).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Power d of the regularised Laplacian.
    #[arg(long, default_value_t = 2)]
    pub power: u32,
    /// Number of steps p of the random-walk kernel.
    #[arg(long, default_value_t = 2)]
    pub steps: u32,
    /// Regulariser alpha of the random-walk kernel.
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
}

impl KernelArgs {
    pub fn spec(&self) -> CliResult<KernelSpec> {
        let spec = match self.kernel {
            KernelChoice::DRegularisedLaplacian => {
                KernelSpec::d_regularised_laplacian(self.power, self.sigma.unwrap_or(0.8))
            }
            KernelChoice::PStepRandomWalk => {
                if self.sigma.is_some() {
                    return Err(CliError::Usage(
                        "--sigma does not apply to the random-walk kernel".into(),
                    ));
                }
                KernelSpec::p_step_random_walk(self.steps, self.alpha)
            }
            KernelChoice::Diffusion => KernelSpec::diffusion(self.sigma.unwrap_or(1.0)),
            KernelChoice::InverseCosine => {
                if self.sigma.is_some() {
                    return Err(CliError::Usage(
                        "--sigma does not apply to the inverse cosine kernel".into(),
                    ));
                }
                KernelSpec::inverse_cosine()
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Which matrix the kernel is a power series of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixChoice {
    /// `D^{-1/2} W D^{-1/2}`.
    #[default]
    Normalized,
    /// The weighted adjacency matrix as loaded.
    Adjacency,
}

impl MatrixChoice {
    pub fn apply(self, g: &Graph) -> CliResult<Graph> {
        Ok(match self {
            MatrixChoice::Normalized => normalized_adjacency(g)?,
            MatrixChoice::Adjacency => g.clone(),
        })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct WalkArgs {
    /// Walks per node.
    #[arg(long, default_value_t = 16)]
    pub walks: usize,
    /// Per-step termination probability.
    #[arg(long, default_value_t = 0.5)]
    pub p_halt: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub(crate) fn open(path: &Path) -> CliResult<File> {
    File::open(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_file(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> CliResult<()> {
    let io_err = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    f(&mut w).and_then(|_| w.flush()).map_err(io_err)
}

/// Wall-clock timings, collected only when requested.
#[derive(Debug, Default)]
pub(crate) struct Timings {
    entries: Vec<(&'static str, f64)>,
}

impl Timings {
    pub fn time<T>(&mut self, name: &'static str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.entries.push((name, start.elapsed().as_secs_f64()));
        out
    }

    fn to_json(&self) -> Value {
        Value::Object(
            self.entries
                .iter()
                .map(|(k, v)| (k.to_string(), json!(v)))
                .collect(),
        )
    }
}

/// What a subcommand hands back for the result document.
pub struct Outcome {
    pub seed: Option<u64>,
    pub inputs: Value,
    pub metrics: Value,
    pub(crate) timings: Timings,
}

impl Cli {
    fn command_name(&self) -> &'static str {
        match self.command {
            Command::Estimate(_) => "estimate",
            Command::Ode(_) => "ode",
            Command::Cluster(_) => "cluster",
            Command::Regress(_) => "regress",
            Command::TrainMod(_) => "train-mod",
            Command::Bench(_) => "bench",
            Command::GenGraph(_) => "gen-graph",
        }
    }

    fn dispatch(&self) -> CliResult<Outcome> {
        match &self.command {
            Command::Estimate(a) => commands::estimate(a),
            Command::Ode(a) => commands::ode(a),
            Command::Cluster(a) => commands::cluster(a),
            Command::Regress(a) => commands::regress(a),
            Command::TrainMod(a) => commands::train_mod(a),
            Command::Bench(a) => bench::bench(a),
            Command::GenGraph(a) => commands::gen_graph(a),
        }
    }

    /// Runs the command (inside a sized thread pool when `--threads` is
    /// given) and builds the result document.
    pub fn execute(&self) -> CliResult<Value> {
        let outcome = match self.threads {
            Some(0) => return Err(CliError::Usage("--threads must be at least 1".into())),
            Some(t) => rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?
                .install(|| self.dispatch())?,
            None => self.dispatch()?,
        };
        let mut doc = json!({
            "command": self.command_name(),
            "version": VERSION,
            "seed": outcome.seed,
            "inputs": outcome.inputs,
            "metrics": outcome.metrics,
        });
        if !self.no_timing {
            doc["timing_seconds"] = outcome.timings.to_json();
            doc["threads"] = json!(self.threads.unwrap_or_else(rayon::current_num_threads));
        }
        Ok(doc)
    }
}

/// Parses `args` (including the program name), runs, writes the JSON
/// document and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = cli.execute().and_then(|doc| {
        let text = serde_json::to_string_pretty(&doc)?;
        match &cli.output {
            Some(path) => write_file(path, |w| writeln!(w, "{text}")),
            // A closed pipe (e.g. `| head`) is not an error.
            None => match writeln!(std::io::stdout().lock(), "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io {
                    path: PathBuf::from("<stdout>"),
                    source: e,
                }),
                _ => Ok(()),
            },
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
