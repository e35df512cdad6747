//! Sparse weighted directed graphs.
//!
//! A [`Graph`] stores out-edges in compressed sparse row form, each row sorted
//! by target. It is immutable after construction; regularisers such as
//! `W -> sigma W` are applied by the consumer (the walker folds sigma into its
//! load update) so one file always maps to one canonical graph.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    num_nodes: usize,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
    weighted_degree: Vec<f64>,
}

impl Graph {
    /// Builds a graph from directed `(source, target, weight)` triples.
    pub fn from_edges<I>(num_nodes: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let edges: Vec<(usize, usize, f64, usize)> = edges
            .into_iter()
            .enumerate()
            .map(|(k, (s, t, w))| (s, t, w, k + 1))
            .collect();
        Self::build(num_nodes, edges)
    }

    /// `edges` carry the 1-based line (or ordinal) they came from for error reporting.
    fn build(num_nodes: usize, mut edges: Vec<(usize, usize, f64, usize)>) -> Result<Self> {
        for &(s, t, w, line) in &edges {
            if s >= num_nodes || t >= num_nodes {
                return Err(Error::Parse {
                    line,
                    message: format!("node id out of range 0..{num_nodes}"),
                });
            }
            if !w.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("non-finite weight {w}"),
                });
            }
        }
        edges.sort_by(|a, b| (a.0, a.1, a.3).cmp(&(b.0, b.1, b.3)));
        for pair in edges.windows(2) {
            if pair[0].0 == pair[1].0 && pair[0].1 == pair[1].1 {
                return Err(Error::DuplicateEdge {
                    source_node: pair[1].0,
                    target: pair[1].1,
                    line: pair[1].3,
                });
            }
        }
        let mut offsets = vec![0usize; num_nodes + 1];
        for &(s, ..) in &edges {
            offsets[s + 1] += 1;
        }
        for i in 0..num_nodes {
            offsets[i + 1] += offsets[i];
        }
        let targets = edges.iter().map(|e| e.1).collect();
        let weights: Vec<f64> = edges.iter().map(|e| e.2).collect();
        let weighted_degree = (0..num_nodes)
            .map(|i| weights[offsets[i]..offsets[i + 1]].iter().sum())
            .collect();
        Ok(Self {
            num_nodes,
            offsets,
            targets,
            weights,
            weighted_degree,
        })
    }

    /// Graph with `n` nodes and no edges.
    pub fn empty(n: usize) -> Self {
        Self {
            num_nodes: n,
            offsets: vec![0; n + 1],
            targets: Vec::new(),
            weights: Vec::new(),
            weighted_degree: vec![0.0; n],
        }
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of directed edges.
    #[inline]
    pub fn num_edges(&self) -> usize {
        self.targets.len()
    }

    /// Number of out-neighbours of `i`.
    #[inline]
    pub fn unweighted_degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// Sum of out-edge weights of `i`.
    #[inline]
    pub fn weighted_degree(&self, i: usize) -> f64 {
        self.weighted_degree[i]
    }

    /// Out-neighbour ids of `i`, ascending.
    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Weights aligned with [`Graph::neighbors`].
    #[inline]
    pub fn neighbor_weights(&self, i: usize) -> &[f64] {
        &self.weights[self.offsets[i]..self.offsets[i + 1]]
    }

    /// The `k`-th out-edge of `i` as `(target, weight)`.
    #[inline]
    pub fn out_edge(&self, i: usize, k: usize) -> (usize, f64) {
        let e = self.offsets[i] + k;
        (self.targets[e], self.weights[e])
    }

    pub fn out_edges(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.neighbors(i)
            .iter()
            .copied()
            .zip(self.neighbor_weights(i).iter().copied())
    }

    /// All directed edges in (source, target) order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.num_nodes).flat_map(move |i| self.out_edges(i).map(move |(j, w)| (i, j, w)))
    }

    /// Weight of edge `i -> j`, zero when absent.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        match self.neighbors(i).binary_search(&j) {
            Ok(k) => self.neighbor_weights(i)[k],
            Err(_) => 0.0,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.edges().all(|(i, j, w)| self.weight(j, i) == w)
    }

    pub fn has_negative_weights(&self) -> bool {
        self.weights.iter().any(|w| *w < 0.0)
    }

    /// Same topology with every weight mapped through `f(source, target, w)`.
    pub fn map_weights(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.num_nodes {
            for e in self.offsets[i]..self.offsets[i + 1] {
                out.weights[e] = f(i, self.targets[e], self.weights[e]);
            }
        }
        out.weighted_degree = (0..self.num_nodes)
            .map(|i| out.weights[out.offsets[i]..out.offsets[i + 1]].iter().sum())
            .collect();
        out
    }

    /// Dense weighted adjacency matrix `W`.
    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.num_nodes, self.num_nodes);
        for (i, j, w) in self.edges() {
            m.set(i, j, w);
        }
        m
    }

    /// `y = W x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.num_nodes {
            return Err(Error::DimensionMismatch {
                expected: self.num_nodes,
                found: x.len(),
            });
        }
        Ok((0..self.num_nodes)
            .map(|i| self.out_edges(i).map(|(j, w)| w * x[j]).sum())
            .collect())
    }

    /// Writes a `# nodes N` header and every directed edge as `src dst weight`.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# nodes {}", self.num_nodes())?;
        for (i, j, wt) in self.edges() {
            writeln!(w, "{i} {j} {wt}")?;
        }
        Ok(())
    }

    /// As [`Graph::write_edge_list`] but each symmetric pair once (`i <= j`),
    /// for reloading with `directed == false`.
    pub fn write_undirected_edge_list<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        if !self.is_symmetric() {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                "graph is not symmetric",
            ));
        }
        writeln!(w, "# nodes {}", self.num_nodes())?;
        for (i, j, wt) in self.edges().filter(|(i, j, _)| i <= j) {
            writeln!(w, "{i} {j} {wt}")?;
        }
        Ok(())
    }
}

/// Parses a whitespace-separated edge list: `<src> <dst> [weight]` per line,
/// 0-indexed, `#` starting a comment. A `# nodes N` comment sets a lower
/// bound on the node count so trailing isolated nodes survive a round trip.
/// With `directed == false` every line materialises both directions (a self
/// loop only once).
pub fn load_edge_list<R: BufRead>(reader: R, directed: bool) -> Result<Graph> {
    let mut edges = Vec::new();
    let mut max_id: Option<usize> = None;
    let mut declared = 0;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let (content, comment) = line.split_once('#').unwrap_or((&line, ""));
        let content = content.trim();
        if let Some(n) = comment
            .trim()
            .strip_prefix("nodes")
            .and_then(|r| r.trim().parse::<usize>().ok())
        {
            declared = declared.max(n);
        }
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(Error::Parse {
                line: lineno,
                message: format!(
                    "expected `<src> <dst> [weight]`, got {} fields",
                    fields.len()
                ),
            });
        }
        let parse_id = |s: &str| -> Result<usize> {
            let v: i64 = s.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("invalid node id `{s}`"),
            })?;
            usize::try_from(v).map_err(|_| Error::Parse {
                line: lineno,
                message: format!("negative node id {v}"),
            })
        };
        let src = parse_id(fields[0])?;
        let dst = parse_id(fields[1])?;
        let weight = match fields.get(2) {
            Some(s) => s.parse::<f64>().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("invalid weight `{s}`"),
            })?,
            None => 1.0,
        };
        if !weight.is_finite() {
            return Err(Error::Parse {
                line: lineno,
                message: format!("non-finite weight {weight}"),
            });
        }
        max_id = Some(max_id.map_or(src.max(dst), |m| m.max(src).max(dst)));
        edges.push((src, dst, weight, lineno));
        if !directed && src != dst {
            edges.push((dst, src, weight, lineno));
        }
    }
    let n = max_id.map_or(0, |m| m + 1).max(declared);
    Graph::build(n, edges)
}

/// `W~ = [w_ij / sqrt(d_i d_j)]` with weighted degrees. Entries touching a
/// node of zero weighted degree become zero (topology is kept), so isolated
/// nodes have all-zero rows and columns.
pub fn normalized_adjacency(g: &Graph) -> Result<Graph> {
    if g.has_negative_weights() {
        return Err(Error::InvalidArgument(
            "normalised adjacency requires non-negative weights".into(),
        ));
    }
    Ok(g.map_weights(|i, j, w| {
        let d = g.weighted_degree(i) * g.weighted_degree(j);
        if d > 0.0 {
            w / d.sqrt()
        } else {
            0.0
        }
    }))
}

/// The operator `identity_coeff * I + adjacency_coeff * A` over a sparse `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineOperator {
    pub identity_coeff: f64,
    pub adjacency_coeff: f64,
    pub adjacency: Graph,
}

impl AffineOperator {
    /// `W` itself.
    pub fn raw(g: Graph) -> Self {
        Self {
            identity_coeff: 0.0,
            adjacency_coeff: 1.0,
            adjacency: g,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.num_nodes()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = self.adjacency.to_dense().scale(self.adjacency_coeff);
        m.add_identity(self.identity_coeff);
        m
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let ax = self.adjacency.matvec(x)?;
        Ok(ax
            .iter()
            .zip(x)
            .map(|(a, xi)| self.adjacency_coeff * a + self.identity_coeff * xi)
            .collect())
    }

    pub fn negated(&self) -> Self {
        Self {
            identity_coeff: -self.identity_coeff,
            adjacency_coeff: -self.adjacency_coeff,
            adjacency: self.adjacency.clone(),
        }
    }
}

/// `L = I - W~` as an implicit identity plus the normalised adjacency.
pub fn laplacian_as_operator(g: &Graph) -> Result<AffineOperator> {
    Ok(AffineOperator {
        identity_coeff: 1.0,
        adjacency_coeff: -1.0,
        adjacency: normalized_adjacency(g)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralRadius {
    pub estimate: f64,
    pub iterations: usize,
    /// False when `max_iters` was exhausted before the change fell below `tol`.
    pub converged: bool,
}

/// Power iteration on `|W|` from the normalised all-ones vector. Returns the
/// norm ratio `||A x|| / ||x||` once successive estimates differ by < `tol`.
pub fn spectral_radius(g: &Graph, tol: f64, max_iters: usize) -> Result<SpectralRadius> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tol must be positive, got {tol}"
        )));
    }
    let n = g.num_nodes();
    if n == 0 {
        return Ok(SpectralRadius {
            estimate: 0.0,
            iterations: 0,
            converged: true,
        });
    }
    let abs = g.map_weights(|_, _, w| w.abs());
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut prev = f64::INFINITY;
    for it in 1..=max_iters {
        let y = abs.matvec(&x)?;
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(SpectralRadius {
                estimate: 0.0,
                iterations: it,
                converged: true,
            });
        }
        if (norm - prev).abs() < tol {
            return Ok(SpectralRadius {
                estimate: norm,
                iterations: it,
                converged: true,
            });
        }
        prev = norm;
        x = y.into_iter().map(|v| v / norm).collect();
    }
    Ok(SpectralRadius {
        estimate: prev,
        iterations: max_iters,
        converged: false,
    })
}

/// Undirected edge set helper used by generators: each `{u, v}` becomes two
/// directed unit-weight edges.
pub(crate) fn undirected_unit_graph(n: usize, pairs: &HashSet<(usize, usize)>) -> Graph {
    let mut sorted: Vec<_> = pairs.iter().copied().collect();
    sorted.sort_unstable();
    let edges = sorted
        .into_iter()
        .flat_map(|(u, v)| [(u, v, 1.0), (v, u, 1.0)]);
    Graph::from_edges(n, edges).expect("generator produced an invalid edge set")
}
