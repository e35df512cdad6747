use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use ggrf_core::applications::{read_attributes, write_labels_csv};
use ggrf_core::generate::{binary_tree, d_regular, erdos_renyi, torus_mesh, triangulated_grid};
use ggrf_core::modulation::{taylor_coeffs_to_tolerance, DEFAULT_TAIL_TOL};
use ggrf_core::ode::relative_l2_error;
use ggrf_core::{
    angular_error, clustering_error, estimate_gram, implied_coefficients, kernel_kmeans_restarts,
    kernel_regression_predict, kernel_regression_predict_dense, laplacian_as_operator,
    normalized_adjacency, normalized_kernel, random_mask, relative_frobenius_error,
    sample_feature_pair, simulate_exact, simulate_grf, symmetric_modulation, taylor_kernel,
    train_modulation, AffineOperator, DenseMatrix, Drive, Graph, GrfOdeConfig, KernelSpec,
    ModParams, ModulationFn, OdeProblem, TrainConfig, TrainLoss, WalkConfig,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::{
    load_graph, open, write_file, CliError, CliResult, GraphArgs, KernelArgs, KernelChoice,
    MatrixChoice, Outcome, Timings, WalkArgs,
};

/// A trained modulation function together with the walker scale it was
/// trained under.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LearnedModulation {
    pub params: ModParams,
    pub walker_sigma: f64,
    pub p_halt: f64,
    pub walks: usize,
}

impl LearnedModulation {
    pub fn read(path: &std::path::Path) -> CliResult<Self> {
        Ok(serde_json::from_reader(BufReader::new(open(path)?))?)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModulationArgs {
    /// Use a modulation function written by `train-mod --params-out`.
    #[arg(long)]
    pub learned: Option<PathBuf>,
    /// Scale applied to the matrix by the walker (default 1, or the
    /// training scale for a learned function).
    #[arg(long)]
    pub walker_sigma: Option<f64>,
}

struct Modulation {
    f1: ModulationFn,
    f2: ModulationFn,
    walker_sigma: f64,
    source: &'static str,
}

impl ModulationArgs {
    fn resolve(&self, spec: &KernelSpec) -> CliResult<Modulation> {
        match &self.learned {
            Some(path) => {
                let learned = LearnedModulation::read(path)?;
                let (f1, f2) = learned.params.modulation_fns();
                Ok(Modulation {
                    f1,
                    f2,
                    walker_sigma: self.walker_sigma.unwrap_or(learned.walker_sigma),
                    source: "learned",
                })
            }
            None => {
                let f = symmetric_modulation(spec)?;
                Ok(Modulation {
                    f1: f.clone(),
                    f2: f,
                    walker_sigma: self.walker_sigma.unwrap_or(1.0),
                    source: if spec.has_closed_form() {
                        "closed-form"
                    } else {
                        "iterative"
                    },
                })
            }
        }
    }
}

/// `sum_k alpha_k M^k` for the chosen matrix `M`.
fn reference_kernel(g: &Graph, spec: &KernelSpec, matrix: MatrixChoice) -> CliResult<DenseMatrix> {
    Ok(match matrix {
        MatrixChoice::Normalized => normalized_kernel(g, spec)?,
        MatrixChoice::Adjacency => {
            let coeffs = taylor_coeffs_to_tolerance(spec, DEFAULT_TAIL_TOL);
            taylor_kernel(&g.to_dense(), &coeffs, DEFAULT_TAIL_TOL)?.matrix
        }
    })
}

fn write_matrix_csv(path: &std::path::Path, m: &DenseMatrix) -> CliResult<()> {
    write_file(path, |w| m.write_csv(w))
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, value_enum, default_value = "normalized")]
    pub matrix: MatrixChoice,
    #[command(flatten)]
    #[serde(flatten)]
    pub walk: WalkArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub modulation: ModulationArgs,
    /// Report `(K + K^T) / 2` instead of the raw estimate.
    #[arg(long)]
    pub symmetrize: bool,
    /// Write the estimated Gram matrix as CSV.
    #[arg(long)]
    pub gram_csv: Option<PathBuf>,
    /// Write the exact Gram matrix as CSV.
    #[arg(long)]
    pub exact_csv: Option<PathBuf>,
    /// Write the first feature matrix in binary form.
    #[arg(long)]
    pub features: Option<PathBuf>,
}

pub fn estimate(a: &EstimateArgs) -> CliResult<Outcome> {
    let g = a.graph.load()?;
    let spec = a.kernel.spec()?;
    let w = a.matrix.apply(&g)?;
    let modulation = a.modulation.resolve(&spec)?;
    let cfg = WalkConfig::new(
        a.walk.p_halt,
        a.walk.walks,
        modulation.walker_sigma,
        a.walk.seed,
    );
    let mut timings = Timings::default();
    let (phi1, phi2) = timings.time("features", || {
        sample_feature_pair(&w, &modulation.f1, &modulation.f2, &cfg)
    })?;
    let k_hat = timings.time("gram", || estimate_gram(&phi1, &phi2, a.symmetrize))?;
    let exact = timings.time("exact", || reference_kernel(&g, &spec, a.matrix))?;
    let err = relative_frobenius_error(&exact, &k_hat)?;
    if let Some(p) = &a.gram_csv {
        write_matrix_csv(p, &k_hat)?;
    }
    if let Some(p) = &a.exact_csv {
        write_matrix_csv(p, &exact)?;
    }
    if let Some(p) = &a.features {
        write_file(p, |w| phi1.write_binary(w))?;
    }
    Ok(Outcome {
        seed: Some(a.walk.seed),
        inputs: json!(a),
        metrics: json!({
            "nodes": g.num_nodes(),
            "kernel": spec,
            "modulation": modulation.source,
            "walker_sigma": modulation.walker_sigma,
            "nnz": phi1.nnz() + phi2.nnz(),
            "relative_frobenius_error": err,
        }),
        timings,
    })
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorChoice {
    /// `W = -(I - W~)`: heat diffusion.
    NegLaplacian,
    /// `W = I - W~`.
    Laplacian,
    /// `W = W~`.
    Normalized,
}

#[derive(Debug, Args, Serialize)]
pub struct OdeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArgs,
    #[arg(long, value_enum, default_value = "neg-laplacian")]
    pub operator: OperatorChoice,
    /// Constant unit source at this node (ignored with `--drive`).
    #[arg(long, default_value_t = 0)]
    pub source: usize,
    /// CSV drive series, one `t,y_0,...,y_{N-1}` row per time.
    #[arg(long)]
    pub drive: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    /// Monte Carlo time samples.
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    /// Quadrature intervals for the exact reference.
    #[arg(long, default_value_t = 2000)]
    pub quad: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub walk: WalkArgs,
    /// Pass the source through this kernel of the operator's adjacency part.
    #[arg(long, value_enum)]
    pub drive_kernel: Option<KernelChoice>,
    #[arg(long)]
    pub drive_sigma: Option<f64>,
    /// Write `node,exact,estimate` CSV.
    #[arg(long)]
    pub state_csv: Option<PathBuf>,
}

fn read_drive(path: &std::path::Path, n: usize) -> CliResult<Drive> {
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (idx, line) in BufReader::new(open(path)?).lines().enumerate() {
        let line = line.map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parsed: Result<Vec<f64>, _> =
            line.split(',').map(|t| t.trim().parse::<f64>()).collect();
        let row = match parsed {
            Ok(r) => r,
            Err(_) if idx == 0 => continue,
            Err(e) => {
                return Err(CliError::Usage(format!(
                    "{}:{}: {e}",
                    path.display(),
                    idx + 1
                )))
            }
        };
        if row.len() != n + 1 {
            return Err(CliError::Usage(format!(
                "{}:{}: expected {} columns, found {}",
                path.display(),
                idx + 1,
                n + 1,
                row.len()
            )));
        }
        times.push(row[0]);
        values.push(row[1..].to_vec());
    }
    Ok(Drive::Series { times, values })
}

pub fn ode(a: &OdeArgs) -> CliResult<Outcome> {
    let g = a.graph.load()?;
    let n = g.num_nodes();
    let operator = match a.operator {
        OperatorChoice::NegLaplacian => laplacian_as_operator(&g)?.negated(),
        OperatorChoice::Laplacian => laplacian_as_operator(&g)?,
        OperatorChoice::Normalized => AffineOperator::raw(normalized_adjacency(&g)?),
    };
    let drive = match &a.drive {
        Some(p) => read_drive(p, n)?,
        None => {
            if a.source >= n {
                return Err(CliError::Usage(format!(
                    "--source {} out of range for {n} nodes",
                    a.source
                )));
            }
            let mut y = vec![0.0; n];
            y[a.source] = 1.0;
            Drive::Constant(y)
        }
    };
    let drive_spec = a
        .drive_kernel
        .map(|kernel| {
            KernelArgs {
                kernel,
                sigma: a.drive_sigma,
                power: 2,
                steps: 2,
                alpha: 2.0,
            }
            .spec()
        })
        .transpose()?;
    let problem = OdeProblem::new(operator, drive, a.horizon, a.samples)?;
    let cfg = GrfOdeConfig {
        m: a.walk.walks,
        p_halt: a.walk.p_halt,
        seed: a.walk.seed,
    };
    let mut timings = Timings::default();
    let estimate = timings.time("grf", || simulate_grf(&problem, &cfg, drive_spec.as_ref()))?;
    let exact = timings.time("exact", || {
        simulate_exact(&problem, a.quad, drive_spec.as_ref())
    })?;
    let err = relative_l2_error(&estimate, &exact)?;
    if let Some(p) = &a.state_csv {
        write_file(p, |w| {
            writeln!(w, "node,exact,estimate")?;
            for (i, (x, y)) in exact.iter().zip(&estimate).enumerate() {
                writeln!(w, "{i},{x},{y}")?;
            }
            Ok(())
        })?;
    }
    Ok(Outcome {
        seed: Some(a.walk.seed),
        inputs: json!(a),
        metrics: json!({
            "nodes": n,
            "relative_l2_error": err,
        }),
        timings,
    })
}

#[derive(Debug, Args, Serialize)]
pub struct ClusterArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, value_enum, default_value = "normalized")]
    pub matrix: MatrixChoice,
    #[command(flatten)]
    #[serde(flatten)]
    pub walk: WalkArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub modulation: ModulationArgs,
    #[arg(long, default_value_t = 3)]
    pub clusters: usize,
    #[arg(long, default_value_t = ggrf_core::applications::DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    /// Independent k-means++ restarts; the lowest objective is kept.
    #[arg(long, default_value_t = ggrf_core::applications::DEFAULT_RESTARTS)]
    pub restarts: usize,
    /// Write `node,label` CSVs: `<path>` for the estimate, `<path>.exact` for the exact kernel.
    #[arg(long)]
    pub labels_csv: Option<PathBuf>,
}

pub fn cluster(a: &ClusterArgs) -> CliResult<Outcome> {
    let g = a.graph.load()?;
    let spec = a.kernel.spec()?;
    let w = a.matrix.apply(&g)?;
    let modulation = a.modulation.resolve(&spec)?;
    let cfg = WalkConfig::new(
        a.walk.p_halt,
        a.walk.walks,
        modulation.walker_sigma,
        a.walk.seed,
    );
    let mut timings = Timings::default();
    let (phi1, phi2) = timings.time("features", || {
        sample_feature_pair(&w, &modulation.f1, &modulation.f2, &cfg)
    })?;
    let k_hat = estimate_gram(&phi1, &phi2, false)?;
    let exact = timings.time("exact", || reference_kernel(&g, &spec, a.matrix))?;
    let on_exact =
        kernel_kmeans_restarts(&exact, a.clusters, a.max_iters, a.walk.seed, a.restarts)?;
    let on_estimate =
        kernel_kmeans_restarts(&k_hat, a.clusters, a.max_iters, a.walk.seed, a.restarts)?;
    let err = clustering_error(&on_exact.labels, &on_estimate.labels)?;
    if let Some(p) = &a.labels_csv {
        write_file(p, |w| write_labels_csv(w, &on_estimate.labels))?;
        let mut exact_path = p.clone().into_os_string();
        exact_path.push(".exact");
        write_file(&PathBuf::from(exact_path), |w| {
            write_labels_csv(w, &on_exact.labels)
        })?;
    }
    Ok(Outcome {
        seed: Some(a.walk.seed),
        inputs: json!(a),
        metrics: json!({
            "nodes": g.num_nodes(),
            "modulation": modulation.source,
            "clustering_error": err,
            "exact": { "iterations": on_exact.iterations, "converged": on_exact.converged },
            "estimate": { "iterations": on_estimate.iterations, "converged": on_estimate.converged },
        }),
        timings,
    })
}

/// A graph with one 3-vector per node: either a file pair or a generated torus.
#[derive(Debug, Clone, Args, Serialize)]
pub struct MeshArgs {
    /// Edge-list file (or bundled graph name).
    #[arg(long, conflicts_with = "torus")]
    pub graph: Option<String>,
    #[arg(long)]
    pub directed: bool,
    /// Node vectors, one `x y z` line per node.
    #[arg(long, requires = "graph")]
    pub attrs: Option<PathBuf>,
    /// Generated torus mesh `ROWSxCOLS` with analytic normals.
    #[arg(long)]
    pub torus: Option<String>,
    #[arg(long, default_value_t = 2.0)]
    pub major: f64,
    #[arg(long, default_value_t = 0.7)]
    pub minor: f64,
}

fn parse_dims(s: &str) -> CliResult<(usize, usize)> {
    let bad = || CliError::Usage(format!("expected ROWSxCOLS, got `{s}`"));
    let (r, c) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((
        r.trim().parse().map_err(|_| bad())?,
        c.trim().parse().map_err(|_| bad())?,
    ))
}

impl MeshArgs {
    fn load(&self, need_attrs: bool) -> CliResult<(Graph, Option<Vec<[f64; 3]>>)> {
        if let Some(t) = &self.torus {
            let (rows, cols) = parse_dims(t)?;
            let mesh = torus_mesh(rows, cols, self.major, self.minor)?;
            return Ok((mesh.graph, Some(mesh.normals)));
        }
        let Some(graph) = &self.graph else {
            return Err(CliError::Usage(
                "one of --graph or --torus is required".into(),
            ));
        };
        let g = load_graph(graph, self.directed)?;
        let attrs = match &self.attrs {
            Some(p) => {
                let attrs = read_attributes(BufReader::new(open(p)?))?;
                if attrs.len() != g.num_nodes() {
                    return Err(CliError::Usage(format!(
                        "{} has {} rows but the graph has {} nodes",
                        p.display(),
                        attrs.len(),
                        g.num_nodes()
                    )));
                }
                Some(attrs)
            }
            None if need_attrs => {
                return Err(CliError::Usage("--attrs is required with --graph".into()))
            }
            None => None,
        };
        Ok((g, attrs))
    }
}

#[derive(Debug, Args, Serialize)]
pub struct RegressArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub mesh: MeshArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, value_enum, default_value = "normalized")]
    pub matrix: MatrixChoice,
    #[command(flatten)]
    #[serde(flatten)]
    pub walk: WalkArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub modulation: ModulationArgs,
    /// Fraction of nodes whose vectors are hidden and predicted.
    #[arg(long, default_value_t = 0.05)]
    pub mask_fraction: f64,
    /// Seed for the mask (defaults to `--seed`).
    #[arg(long)]
    pub mask_seed: Option<u64>,
    /// Write `node,x,y,z` predictions for masked nodes.
    #[arg(long)]
    pub predictions_csv: Option<PathBuf>,
}

pub fn regress(a: &RegressArgs) -> CliResult<Outcome> {
    let (g, attrs) = a.mesh.load(true)?;
    let attrs = attrs.expect("attributes are loaded when required");
    let spec = a.kernel.spec()?;
    let w = a.matrix.apply(&g)?;
    let modulation = a.modulation.resolve(&spec)?;
    let mask_seed = a.mask_seed.unwrap_or(a.walk.seed);
    let mask = random_mask(g.num_nodes(), a.mask_fraction, mask_seed)?;
    let cfg = WalkConfig::new(
        a.walk.p_halt,
        a.walk.walks,
        modulation.walker_sigma,
        a.walk.seed,
    );
    let mut timings = Timings::default();
    let pred = timings.time("grf", || -> CliResult<_> {
        let (phi1, phi2) = sample_feature_pair(&w, &modulation.f1, &modulation.f2, &cfg)?;
        Ok(kernel_regression_predict(&phi1, &phi2, &attrs, &mask)?)
    })?;
    let err = angular_error(&pred, &attrs, &mask)?;
    // A learned function estimates a different kernel; skip the exact comparison.
    let exact_err = if modulation.source == "learned"
        || g.num_nodes() > ggrf_core::estimator::MAX_DENSE_NODES
    {
        None
    } else {
        let k = timings.time("exact", || reference_kernel(&g, &spec, a.matrix))?;
        Some(angular_error(
            &kernel_regression_predict_dense(&k, &attrs, &mask)?,
            &attrs,
            &mask,
        )?)
    };
    if let Some(p) = &a.predictions_csv {
        write_file(p, |w| {
            writeln!(w, "node,x,y,z")?;
            for (i, v) in pred.iter().enumerate().filter(|(i, _)| mask[*i]) {
                writeln!(w, "{i},{},{},{}", v[0], v[1], v[2])?;
            }
            Ok(())
        })?;
    }
    let masked: Vec<usize> = (0..mask.len()).filter(|i| mask[*i]).collect();
    Ok(Outcome {
        seed: Some(a.walk.seed),
        inputs: json!(a),
        metrics: json!({
            "nodes": g.num_nodes(),
            "modulation": modulation.source,
            "mask_seed": mask_seed,
            "masked_nodes": masked,
            "angular_error": err,
            "angular_error_exact_kernel": exact_err,
        }),
        timings,
    })
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossChoice {
    /// Relative Frobenius error against the exact kernel.
    Frobenius,
    /// Angular error of masked-node regression.
    Angular,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long, value_enum, default_value = "frobenius")]
    pub loss: LossChoice,
    #[command(flatten)]
    #[serde(flatten)]
    pub mesh: MeshArgs,
    /// Target kernel for the Frobenius loss.
    #[command(flatten)]
    #[serde(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, value_enum, default_value = "normalized")]
    pub matrix: MatrixChoice,
    #[command(flatten)]
    #[serde(flatten)]
    pub walk: WalkArgs,
    /// Walker scale (default: the target kernel's geometric ratio for the
    /// Frobenius loss, so that a constant function is unbiased for the
    /// regularised Laplacian with power 2; 1 for the angular loss).
    #[arg(long)]
    pub walker_sigma: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    /// Per-epoch learning-rate decay factor.
    #[arg(long, default_value_t = 0.975)]
    pub gamma: f64,
    /// Train an independent pair instead of one shared function.
    #[arg(long)]
    pub asymmetric: bool,
    #[arg(long, default_value_t = 0.05)]
    pub mask_fraction: f64,
    #[arg(long)]
    pub mask_seed: Option<u64>,
    /// Write the trained function (JSON, usable with `--learned`).
    #[arg(long)]
    pub params_out: Option<PathBuf>,
    /// Write `epoch,loss` CSV.
    #[arg(long)]
    pub trace_csv: Option<PathBuf>,
}

pub fn train_mod(a: &TrainArgs) -> CliResult<Outcome> {
    let need_attrs = matches!(a.loss, LossChoice::Angular);
    let (g, attrs) = a.mesh.load(need_attrs)?;
    let w = a.matrix.apply(&g)?;
    let spec = a.kernel.spec()?;
    let (loss, default_sigma, mask_seed) = match a.loss {
        LossChoice::Frobenius => (
            TrainLoss::Frobenius {
                target: reference_kernel(&g, &spec, a.matrix)?,
            },
            spec.power_ratio(),
            None,
        ),
        LossChoice::Angular => {
            let mask_seed = a.mask_seed.unwrap_or(a.walk.seed);
            let mask = random_mask(g.num_nodes(), a.mask_fraction, mask_seed)?;
            (
                TrainLoss::Angular {
                    attrs: attrs.expect("attributes are loaded when required"),
                    mask,
                },
                1.0,
                Some(mask_seed),
            )
        }
    };
    let walker_sigma = a.walker_sigma.unwrap_or(default_sigma);
    let mut cfg = TrainConfig::new(loss, a.walk.walks, a.walk.p_halt, walker_sigma, a.walk.seed);
    cfg.epochs = a.epochs;
    cfg.learning_rate = a.lr;
    cfg.gamma = a.gamma;
    if a.asymmetric {
        cfg = cfg.asymmetric();
    }
    let mut timings = Timings::default();
    let result = timings.time("train", || train_modulation(&w, &cfg))?;
    let learned = LearnedModulation {
        params: result.params,
        walker_sigma,
        p_halt: a.walk.p_halt,
        walks: a.walk.walks,
    };
    if let Some(p) = &a.params_out {
        let text = serde_json::to_string_pretty(&learned)?;
        write_file(p, |w| writeln!(w, "{text}"))?;
    }
    if let Some(p) = &a.trace_csv {
        write_file(p, |w| result.write_trace_csv(w))?;
    }
    let window = |r: std::ops::Range<usize>| {
        let s = &result.trace[r];
        (!s.is_empty()).then(|| s.iter().sum::<f64>() / s.len() as f64)
    };
    let t = result.trace.len();
    let (f1, f2) = result.params.modulation_fns();
    Ok(Outcome {
        seed: Some(a.walk.seed),
        inputs: json!(a),
        metrics: json!({
            "nodes": g.num_nodes(),
            "walker_sigma": walker_sigma,
            "mask_seed": mask_seed,
            "params": learned.params,
            "f1": f1.prefix(11),
            "f2": f2.prefix(11),
            "implied_coefficients": implied_coefficients(&learned.params, 10),
            "final_loss": result.trace.last(),
            "loss_first_50": window(0..t.min(50)),
            "loss_last_50": window(t.saturating_sub(50)..t),
        }),
        timings,
    })
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Er,
    Tree,
    Regular,
    Grid,
    Torus,
}

#[derive(Debug, Args, Serialize)]
pub struct GenGraphArgs {
    #[arg(long, value_enum)]
    pub family: Family,
    /// Node count (er, tree, regular).
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Edge probability (er).
    #[arg(long)]
    pub p_edge: Option<f64>,
    /// Degree (regular).
    #[arg(long)]
    pub degree: Option<usize>,
    /// Grid or torus rows.
    #[arg(long)]
    pub rows: Option<usize>,
    /// Grid or torus columns.
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long, default_value_t = 2.0)]
    pub major: f64,
    #[arg(long, default_value_t = 0.7)]
    pub minor: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Edge-list destination.
    #[arg(long)]
    pub out: PathBuf,
    /// Vertex normals destination (torus only).
    #[arg(long)]
    pub normals_out: Option<PathBuf>,
}

fn required<T: Copy>(v: Option<T>, flag: &str, family: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::Usage(format!("--{flag} is required for --family {family}")))
}

pub fn gen_graph(a: &GenGraphArgs) -> CliResult<Outcome> {
    let mut normals = None;
    let g = match a.family {
        Family::Er => erdos_renyi(
            required(a.nodes, "nodes", "er")?,
            required(a.p_edge, "p-edge", "er")?,
            a.seed,
        )?,
        Family::Tree => binary_tree(required(a.nodes, "nodes", "tree")?),
        Family::Regular => d_regular(
            required(a.nodes, "nodes", "regular")?,
            required(a.degree, "degree", "regular")?,
            a.seed,
        )?,
        Family::Grid => triangulated_grid(
            required(a.rows, "rows", "grid")?,
            required(a.cols, "cols", "grid")?,
        ),
        Family::Torus => {
            let mesh = torus_mesh(
                required(a.rows, "rows", "torus")?,
                required(a.cols, "cols", "torus")?,
                a.major,
                a.minor,
            )?;
            normals = Some(mesh.normals);
            mesh.graph
        }
    };
    write_file(&a.out, |w| g.write_undirected_edge_list(w))?;
    match (&a.normals_out, &normals) {
        (Some(p), Some(n)) => write_file(p, |w| ggrf_core::applications::write_attributes(w, n))?,
        (Some(_), None) => {
            return Err(CliError::Usage(
                "--normals-out applies to --family torus only".into(),
            ))
        }
        _ => {}
    }
    Ok(Outcome {
        seed: Some(a.seed),
        inputs: json!(a),
        metrics: json!({
            "nodes": g.num_nodes(),
            "undirected_edges": g.num_edges() / 2,
        }),
        timings: Timings::default(),
    })
}
