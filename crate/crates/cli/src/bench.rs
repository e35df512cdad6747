//! Timing sweep of exact versus random-feature kernel evaluation.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, ValueEnum};
use ggrf_core::generate::{binary_tree, d_regular, erdos_renyi, triangulated_grid};
use ggrf_core::ode::relative_l2_error;
use ggrf_core::walker::splitmix64;
use ggrf_core::{
    kernel_matvec, normalized_adjacency, normalized_kernel, sample_feature_pair,
    symmetric_modulation, Graph, KernelSpec, WalkConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::{write_file, CliError, CliResult, KernelArgs, Outcome, Timings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphFamily {
    /// Erdos-Renyi with fixed expected degree.
    Er,
    /// Complete binary tree.
    Tree,
    /// Random regular graph.
    Regular,
    /// Square triangulated grid (sizes rounded to a square).
    Grid,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub family: GraphFamily,
    pub sizes: Vec<usize>,
    pub degree: usize,
    pub kernel: KernelSpec,
    pub walks: usize,
    pub p_halt: f64,
    pub seed: u64,
    /// Each timing is the minimum over this many runs.
    pub repeats: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchRow {
    pub nodes: usize,
    pub exact_seconds: f64,
    pub grf_seconds: f64,
    /// `||K_hat v - K v|| / ||K v||` for a fixed random `v`.
    pub error: f64,
}

fn generate(family: GraphFamily, n: usize, degree: usize, seed: u64) -> CliResult<Graph> {
    Ok(match family {
        GraphFamily::Er => erdos_renyi(n, (degree as f64 / (n as f64 - 1.0)).min(1.0), seed)?,
        GraphFamily::Tree => binary_tree(n),
        GraphFamily::Regular => d_regular(n, degree, seed)?,
        GraphFamily::Grid => {
            let side = (n as f64).sqrt().round().max(2.0) as usize;
            triangulated_grid(side, side)
        }
    })
}

fn min_time<T>(repeats: usize, mut f: impl FnMut() -> CliResult<T>) -> CliResult<(T, f64)> {
    let mut best = f64::INFINITY;
    let mut out = None;
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        let v = f()?;
        best = best.min(start.elapsed().as_secs_f64());
        out = Some(v);
    }
    Ok((out.expect("at least one repeat"), best))
}

/// Times the exact dense kernel and the random-feature kernel-vector
/// product on graphs of each size.
pub fn run_sweep(cfg: &SweepConfig) -> CliResult<Vec<BenchRow>> {
    let f = symmetric_modulation(&cfg.kernel)?;
    let mut rows = Vec::with_capacity(cfg.sizes.len());
    for (idx, &n) in cfg.sizes.iter().enumerate() {
        let graph_seed = splitmix64(cfg.seed ^ idx as u64);
        let g = generate(cfg.family, n, cfg.degree, graph_seed)?;
        let n = g.num_nodes();
        let w = normalized_adjacency(&g)?;
        let mut rng = ChaCha8Rng::seed_from_u64(graph_seed);
        let v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        let walk = WalkConfig::new(cfg.p_halt, cfg.walks, 1.0, cfg.seed);
        let (kv_hat, grf_seconds) = min_time(cfg.repeats, || {
            let (a, b) = sample_feature_pair(&w, &f, &f, &walk)?;
            Ok(kernel_matvec(&a, &b, &v)?)
        })?;
        let (kv, exact_seconds) = min_time(cfg.repeats, || {
            let k = normalized_kernel(&g, &cfg.kernel)?;
            Ok(k.matvec(&v)?)
        })?;
        rows.push(BenchRow {
            nodes: n,
            exact_seconds,
            grf_seconds,
            error: relative_l2_error(&kv_hat, &kv)?,
        });
    }
    Ok(rows)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_exponent(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `a..b` (doubling from `a` while `<= b`), `a,b,c`, or a single size.
pub fn parse_sizes(s: &str) -> CliResult<Vec<usize>> {
    let bad = || {
        CliError::Usage(format!(
            "invalid --nodes `{s}`; use 100..1600 or 100,200,400"
        ))
    };
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    let sizes = if let Some((a, b)) = s.split_once("..") {
        let (mut a, b) = (num(a)?, num(b)?);
        if a < 2 || b < a {
            return Err(bad());
        }
        let mut out = Vec::new();
        while a <= b {
            out.push(a);
            a *= 2;
        }
        out
    } else {
        s.split(',').map(num).collect::<CliResult<Vec<_>>>()?
    };
    if sizes.is_empty() || sizes.iter().any(|n| *n < 2) {
        return Err(bad());
    }
    Ok(sizes)
}

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value = "er")]
    pub graph_family: GraphFamily,
    /// Sizes: `100..1600` doubles from 100; or a comma list.
    #[arg(long, default_value = "100..1600")]
    pub nodes: String,
    /// Expected (er) or exact (regular) degree.
    #[arg(long, default_value_t = 10)]
    pub degree: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, default_value_t = 16)]
    pub walks: usize,
    #[arg(long, default_value_t = 0.5)]
    pub p_halt: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Write the sweep as CSV `nodes,exact_seconds,grf_seconds,error`.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

pub fn write_rows_csv<W: Write>(mut w: W, rows: &[BenchRow]) -> std::io::Result<()> {
    writeln!(w, "nodes,exact_seconds,grf_seconds,error")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{}",
            r.nodes, r.exact_seconds, r.grf_seconds, r.error
        )?;
    }
    Ok(())
}

pub(crate) fn bench(a: &BenchArgs) -> CliResult<Outcome> {
    let cfg = SweepConfig {
        family: a.graph_family,
        sizes: parse_sizes(&a.nodes)?,
        degree: a.degree,
        kernel: a.kernel.spec()?,
        walks: a.walks,
        p_halt: a.p_halt,
        seed: a.seed,
        repeats: a.repeats,
    };
    let rows = run_sweep(&cfg)?;
    if let Some(p) = &a.csv {
        write_file(p, |w| write_rows_csv(w, &rows))?;
    }
    let exp = |f: fn(&BenchRow) -> f64| {
        fit_exponent(
            &rows
                .iter()
                .map(|r| (r.nodes as f64, f(r)))
                .collect::<Vec<_>>(),
        )
    };
    Ok(Outcome {
        seed: Some(a.seed),
        inputs: json!(a),
        metrics: json!({
            "rows": rows,
            "exact_time_exponent": exp(|r| r.exact_seconds),
            "grf_time_exponent": exp(|r| r.grf_seconds),
        }),
        timings: Timings::default(),
    })
}
