//! The g-GRF random-walk sampler.
//!
//! Every walk records `(node, length, load)` deposits without the modulation
//! function applied; a [`LengthFeatureTensor`] keeps those per-length sums and
//! a [`FeatureMatrix`] is obtained by contracting them with `f`. Because
//! [`sample_features`] is literally that contraction, the reconstruction
//! identity holds bit-exactly.
//!
//! Randomness: walk `w` from node `i` draws from a ChaCha8 stream keyed by
//! the seed, with stream id `i` and word offset `w << 32`. Rows are sampled
//! in parallel and collected in node order, so results do not depend on the
//! number of threads.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::modulation::{min_batch_size, ModulationFn};

const MAGIC: &[u8; 8] = b"GGRFFEAT";

/// Sampling configuration shared by a feature matrix and its metadata.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkConfig {
    pub p_halt: f64,
    pub m: usize,
    /// Multiplies every traversed weight.
    pub sigma: f64,
    pub seed: u64,
}

impl WalkConfig {
    pub fn new(p_halt: f64, m: usize, sigma: f64, seed: u64) -> Self {
        Self {
            p_halt,
            m,
            sigma,
            seed,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_halt > 0.0 && self.p_halt < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "p_halt must lie in (0, 1), got {}",
                self.p_halt
            )));
        }
        if self.m == 0 {
            return Err(Error::InvalidArgument("m must be at least 1".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    /// Default truncation for per-length bookkeeping.
    pub fn default_l_max(&self, n: usize) -> usize {
        min_batch_size((self.m * n.max(1)).max(1), self.p_halt, 1e-4).unwrap_or(64)
    }
}

/// The SplitMix64 finaliser, used to derive independent seeds.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Two distinct seeds derived from one; SplitMix64 is a bijection so they never collide.
pub fn derive_pair_seeds(seed: u64) -> (u64, u64) {
    (
        splitmix64(seed.wrapping_mul(2)),
        splitmix64(seed.wrapping_mul(2).wrapping_add(1)),
    )
}

/// Sparse `N x N` matrix of random features: row `i` is `phi(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n: usize,
    config: WalkConfig,
    offsets: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn config(&self) -> WalkConfig {
        self.config
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(indices, values)` of row `i`, indices ascending.
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let r = self.offsets[i]..self.offsets[i + 1];
        (&self.indices[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (idx, vals) = self.row(i);
        idx.binary_search(&(j as u32)).map_or(0.0, |k| vals[k])
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (idx, vals) = self.row(i);
            for (j, v) in idx.iter().zip(vals) {
                d.set(i, *j as usize, *v);
            }
        }
        d
    }

    /// `Phi v`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: v.len(),
            });
        }
        Ok((0..self.n)
            .into_par_iter()
            .map(|i| {
                let (idx, vals) = self.row(i);
                idx.iter().zip(vals).map(|(j, x)| x * v[*j as usize]).sum()
            })
            .collect())
    }

    /// `Phi^T v`, accumulated serially in row order.
    pub fn transpose_matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: v.len(),
            });
        }
        let mut out = vec![0.0; self.n];
        for (i, vi) in v.iter().enumerate() {
            if *vi == 0.0 {
                continue;
            }
            let (idx, vals) = self.row(i);
            for (j, x) in idx.iter().zip(vals) {
                out[*j as usize] += x * vi;
            }
        }
        Ok(out)
    }

    /// Binary container: magic, `N`, `m`, `p_halt`, `sigma`, `seed`, `nnz`,
    /// row offsets, column indices and values, all little-endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        for x in [self.n as u64, self.config.m as u64] {
            w.write_all(&x.to_le_bytes())?;
        }
        for x in [self.config.p_halt, self.config.sigma] {
            w.write_all(&x.to_le_bytes())?;
        }
        w.write_all(&self.config.seed.to_le_bytes())?;
        w.write_all(&(self.values.len() as u64).to_le_bytes())?;
        for o in &self.offsets {
            w.write_all(&(*o as u64).to_le_bytes())?;
        }
        for j in &self.indices {
            w.write_all(&j.to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let bad = |msg: &str| Error::Parse {
            line: 0,
            message: format!("feature container: {msg}"),
        };
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(bad("bad magic"));
        }
        let u64s = |r: &mut R| -> std::io::Result<u64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(u64::from_le_bytes(b))
        };
        let n = u64s(&mut r)? as usize;
        let m = u64s(&mut r)? as usize;
        let p_halt = f64::from_bits(u64s(&mut r)?);
        let sigma = f64::from_bits(u64s(&mut r)?);
        let seed = u64s(&mut r)?;
        let nnz = u64s(&mut r)? as usize;
        let mut offsets = Vec::with_capacity(n + 1);
        for _ in 0..=n {
            offsets.push(u64s(&mut r)? as usize);
        }
        if offsets.first() != Some(&0)
            || offsets.last() != Some(&nnz)
            || offsets.windows(2).any(|w| w[0] > w[1])
        {
            return Err(bad("inconsistent row offsets"));
        }
        let mut indices = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            let j = u32::from_le_bytes(b);
            if j as usize >= n {
                return Err(bad("column index out of range"));
            }
            indices.push(j);
        }
        let mut values = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            let v = f64::from_bits(u64s(&mut r)?);
            if !v.is_finite() {
                return Err(bad("non-finite value"));
            }
            values.push(v);
        }
        Ok(Self {
            n,
            config: WalkConfig::new(p_halt, m, sigma, seed),
            offsets,
            indices,
            values,
        })
    }

    /// Dense CSV, one row per node.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        self.to_dense().write_csv(w)
    }
}

/// Per-length deposits of one sampling run, before modulation.
///
/// Row `i` holds entries `(v, l, t)` sorted by `(v, l)`, where `t` is the
/// total load deposited at `v` at walk length `l` over all walks from `i`,
/// divided by `m`, with the regulariser left out. The per-length matrix
/// `Phi^(l)` is `sigma^l * t`, whose expectation is `(sigma W)^l`.
#[derive(Debug, Clone, PartialEq)]
pub struct LengthFeatureTensor {
    n: usize,
    config: WalkConfig,
    l_max: usize,
    overflow: usize,
    max_len: usize,
    offsets: Vec<usize>,
    nodes: Vec<u32>,
    lengths: Vec<u32>,
    values: Vec<f64>,
}

impl LengthFeatureTensor {
    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn config(&self) -> WalkConfig {
        self.config
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    /// Number of deposits made at lengths beyond `l_max`.
    pub fn overflow_steps(&self) -> usize {
        self.overflow
    }

    /// Longest walk length observed.
    pub fn max_length(&self) -> usize {
        self.max_len
    }

    /// `(node, length, sigma-free value)` entries of row `i`.
    pub fn row_entries(&self, i: usize) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (self.offsets[i]..self.offsets[i + 1]).map(move |k| {
            (
                self.nodes[k] as usize,
                self.lengths[k] as usize,
                self.values[k],
            )
        })
    }

    /// `sigma^l` for `l = 0..=max_length`.
    pub fn sigma_powers(&self) -> Vec<f64> {
        (0..=self.max_len)
            .map(|l| self.config.sigma.powi(l as i32))
            .collect()
    }

    /// Dense `Phi^(l)`.
    pub fn length_matrix(&self, l: usize) -> DenseMatrix {
        let s = self.config.sigma.powi(l as i32);
        let mut d = DenseMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (v, len, t) in self.row_entries(i) {
                if len == l {
                    d.set(i, v, s * t);
                }
            }
        }
        d
    }

    /// `sum_l f(l) Phi^(l)`; this is exactly what [`sample_features`] returns.
    pub fn combine(&self, f: &ModulationFn) -> FeatureMatrix {
        let mut coeff = f.prefix(self.l_max.min(self.max_len) + 1);
        for l in coeff.len()..=self.max_len {
            coeff.push(f.eval(l));
        }
        let sigma = self.config.sigma;
        for (l, c) in coeff.iter_mut().enumerate() {
            *c *= sigma.powi(l as i32);
        }
        self.combine_with(&coeff)
    }

    /// Contraction with explicit per-length coefficients (regulariser
    /// already folded in); lengths past the end of `coeff` contribute zero.
    pub fn combine_with(&self, coeff: &[f64]) -> FeatureMatrix {
        let rows: Vec<(Vec<u32>, Vec<f64>)> = (0..self.n)
            .into_par_iter()
            .map(|i| {
                let mut idx = Vec::new();
                let mut vals = Vec::new();
                let range = self.offsets[i]..self.offsets[i + 1];
                let mut k = range.start;
                while k < range.end {
                    let node = self.nodes[k];
                    let mut acc = 0.0;
                    while k < range.end && self.nodes[k] == node {
                        let l = self.lengths[k] as usize;
                        if let Some(c) = coeff.get(l) {
                            acc += c * self.values[k];
                        }
                        k += 1;
                    }
                    if acc != 0.0 {
                        idx.push(node);
                        vals.push(acc);
                    }
                }
                (idx, vals)
            })
            .collect();
        let mut offsets = Vec::with_capacity(self.n + 1);
        offsets.push(0);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (idx, vals) in rows {
            indices.extend(idx);
            values.extend(vals);
            offsets.push(indices.len());
        }
        FeatureMatrix {
            n: self.n,
            config: self.config,
            offsets,
            indices,
            values,
        }
    }
}

struct RowDeposits {
    nodes: Vec<u32>,
    lengths: Vec<u32>,
    values: Vec<f64>,
    max_len: usize,
}

fn walk_row(g: &Graph, start: usize, cfg: &WalkConfig, base: &ChaCha8Rng) -> RowDeposits {
    let mut raw: Vec<(u32, u32, f64)> = Vec::with_capacity(cfg.m * 4);
    let inv_continue = 1.0 / (1.0 - cfg.p_halt);
    let mut rng = base.clone();
    rng.set_stream(start as u64);
    for w in 0..cfg.m {
        rng.set_word_pos((w as u128) << 32);
        let mut node = start;
        let mut load = 1.0f64;
        let mut len = 0u32;
        loop {
            raw.push((node as u32, len, load));
            len += 1;
            let nbrs = g.neighbors(node);
            if nbrs.is_empty() {
                break;
            }
            let k = rng.gen_range(0..nbrs.len());
            load *= nbrs.len() as f64 * inv_continue * g.neighbor_weights(node)[k];
            node = nbrs[k];
            if rng.gen::<f64>() < cfg.p_halt {
                break;
            }
        }
    }
    // Stable sort keeps walk order within each (node, length) group.
    raw.sort_by_key(|&(v, l, _)| (v, l));
    let inv_m = 1.0 / cfg.m as f64;
    let mut out = RowDeposits {
        nodes: Vec::new(),
        lengths: Vec::new(),
        values: Vec::new(),
        max_len: 0,
    };
    let mut k = 0;
    while k < raw.len() {
        let (v, l, _) = raw[k];
        let mut sum = 0.0;
        while k < raw.len() && raw[k].0 == v && raw[k].1 == l {
            sum += raw[k].2;
            k += 1;
        }
        out.nodes.push(v);
        out.lengths.push(l);
        out.values.push(sum * inv_m);
        out.max_len = out.max_len.max(l as usize);
    }
    out
}

/// Runs the walks for every node and keeps deposits resolved by length.
pub fn sample_length_features(
    g: &Graph,
    cfg: &WalkConfig,
    l_max: usize,
) -> Result<LengthFeatureTensor> {
    cfg.validate()?;
    let n = g.num_nodes();
    if n > u32::MAX as usize {
        return Err(Error::TooLarge(n));
    }
    let base = ChaCha8Rng::seed_from_u64(cfg.seed);
    let rows: Vec<RowDeposits> = (0..n)
        .into_par_iter()
        .map(|i| walk_row(g, i, cfg, &base))
        .collect();
    let total: usize = rows.iter().map(|r| r.values.len()).sum();
    let mut t = LengthFeatureTensor {
        n,
        config: *cfg,
        l_max,
        overflow: 0,
        max_len: 0,
        offsets: Vec::with_capacity(n + 1),
        nodes: Vec::with_capacity(total),
        lengths: Vec::with_capacity(total),
        values: Vec::with_capacity(total),
    };
    t.offsets.push(0);
    for r in rows {
        t.overflow += r.lengths.iter().filter(|l| **l as usize > l_max).count();
        t.max_len = t.max_len.max(r.max_len);
        t.nodes.extend(r.nodes);
        t.lengths.extend(r.lengths);
        t.values.extend(r.values);
        t.offsets.push(t.nodes.len());
    }
    Ok(t)
}

/// Features `phi_f(i)` for every node of `g`.
pub fn sample_features(g: &Graph, f: &ModulationFn, cfg: &WalkConfig) -> Result<FeatureMatrix> {
    let l_max = cfg.default_l_max(g.num_nodes());
    Ok(sample_length_features(g, cfg, l_max)?.combine(f))
}

/// Two feature matrices on independent walks, with seeds derived from `cfg.seed`.
pub fn sample_feature_pair(
    g: &Graph,
    f1: &ModulationFn,
    f2: &ModulationFn,
    cfg: &WalkConfig,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let (s1, s2) = derive_pair_seeds(cfg.seed);
    Ok((
        sample_features(g, f1, &cfg.with_seed(s1))?,
        sample_features(g, f2, &cfg.with_seed(s2))?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::load_edge_list;
    use crate::modulation::{closed_form_modulation, KernelSpec};

    fn triangle_plus_isolated() -> Graph {
        Graph::from_edges(
            4,
            [
                (0, 1, 1.0),
                (1, 2, 1.0),
                (2, 0, 1.0),
                (1, 0, 1.0),
                (2, 1, 1.0),
                (0, 2, 1.0),
            ],
        )
        .unwrap()
    }

    fn path(n: usize) -> Graph {
        let text: String = (0..n - 1).map(|i| format!("{i} {}\n", i + 1)).collect();
        load_edge_list(text.as_bytes(), false).unwrap()
    }

    #[test]
    fn isolated_node_deposits_f0_only() {
        let g = Graph::empty(3);
        let f = ModulationFn::tabulated(vec![0.7, 3.0, 5.0]);
        for seed in 0..5 {
            let phi = sample_features(&g, &f, &WalkConfig::new(0.3, 17, 1.0, seed)).unwrap();
            for i in 0..3 {
                assert_eq!(phi.row(i), (&[i as u32][..], &[0.7][..]));
            }
        }
    }

    #[test]
    fn lazy_walker_gives_identity() {
        let g = path(6);
        let phi =
            sample_features(&g, &ModulationFn::lazy(), &WalkConfig::new(0.2, 9, 0.7, 3)).unwrap();
        assert_eq!(phi.to_dense(), DenseMatrix::identity(6));
    }

    #[test]
    fn first_length_matrix_is_identity() {
        let g = path(5);
        let t = sample_length_features(&g, &WalkConfig::new(0.4, 8, 1.3, 11), 10).unwrap();
        assert_eq!(t.length_matrix(0), DenseMatrix::identity(5));
    }

    #[test]
    fn reconstruction_is_bit_exact() {
        let g = path(7);
        let cfg = WalkConfig::new(0.25, 20, 0.9, 5);
        let f = closed_form_modulation(&KernelSpec::diffusion(1.1)).unwrap();
        let t = sample_length_features(&g, &cfg, cfg.default_l_max(7)).unwrap();
        assert_eq!(t.combine(&f), sample_features(&g, &f, &cfg).unwrap());
        // A tiny l_max changes only the bookkeeping.
        let short = sample_length_features(&g, &cfg, 1).unwrap();
        assert!(short.overflow_steps() > 0);
        assert_eq!(short.combine(&f), sample_features(&g, &f, &cfg).unwrap());
    }

    #[test]
    fn scaling_matches_geometric_modulation() {
        let g = path(8);
        let f = closed_form_modulation(&KernelSpec::d_regularised_laplacian(3, 0.9)).unwrap();
        for (sigma, beta) in [(1.0, 0.6), (0.5, 1.7), (2.0, 0.3)] {
            let a = sample_features(&g, &f, &WalkConfig::new(0.3, 12, sigma * beta, 2)).unwrap();
            let b =
                sample_features(&g, &f.scaled(beta), &WalkConfig::new(0.3, 12, sigma, 2)).unwrap();
            assert_eq!(a.to_dense(), b.to_dense());
        }
    }

    #[test]
    fn binary_round_trip() {
        let g = triangle_plus_isolated();
        let f = ModulationFn::tabulated(vec![1.0, 0.5, 0.25]);
        let phi = sample_features(&g, &f, &WalkConfig::new(0.5, 4, 0.8, 99)).unwrap();
        let mut buf = Vec::new();
        phi.write_binary(&mut buf).unwrap();
        assert_eq!(FeatureMatrix::read_binary(buf.as_slice()).unwrap(), phi);
        buf[0] = b'X';
        assert!(FeatureMatrix::read_binary(buf.as_slice()).is_err());
    }

    #[test]
    fn rejects_bad_config() {
        let g = path(3);
        let f = ModulationFn::lazy();
        assert!(sample_features(&g, &f, &WalkConfig::new(1.0, 1, 1.0, 0)).is_err());
        assert!(sample_features(&g, &f, &WalkConfig::new(0.5, 0, 1.0, 0)).is_err());
        assert!(sample_features(&g, &f, &WalkConfig::new(0.5, 1, 0.0, 0)).is_err());
    }

    #[test]
    fn pair_seeds_differ() {
        for s in [0u64, 1, u64::MAX, 12345] {
            let (a, b) = derive_pair_seeds(s);
            assert_ne!(a, b);
        }
    }

    #[test]
    fn matvec_and_transpose_match_dense() {
        let g = path(6);
        let f = closed_form_modulation(&KernelSpec::diffusion(1.0)).unwrap();
        let phi = sample_features(&g, &f, &WalkConfig::new(0.3, 5, 1.0, 1)).unwrap();
        let d = phi.to_dense();
        let v: Vec<f64> = (0..6).map(|i| i as f64 - 2.5).collect();
        let want = d.matvec(&v).unwrap();
        let got = phi.matvec(&v).unwrap();
        for (a, b) in want.iter().zip(&got) {
            assert!((a - b).abs() < 1e-12);
        }
        let want_t = d.transpose().matvec(&v).unwrap();
        for (a, b) in want_t.iter().zip(phi.transpose_matvec(&v).unwrap()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
