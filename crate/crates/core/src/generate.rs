//! Seeded graph generators for experiments: Erdos-Renyi, complete binary
//! trees, random d-regular graphs, triangulated grids and a triangulated
//! torus mesh with analytic vertex normals.

use std::collections::HashSet;
use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{undirected_unit_graph, Graph};

/// G(n, p): every unordered pair is an edge independently with probability `p_edge`.
pub fn erdos_renyi(n: usize, p_edge: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p_edge) {
        return Err(Error::InvalidArgument(format!(
            "p_edge must be in [0, 1], got {p_edge}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = HashSet::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen::<f64>() < p_edge {
                pairs.insert((u, v));
            }
        }
    }
    Ok(undirected_unit_graph(n, &pairs))
}

/// Complete binary tree on `n` nodes in heap order (children of `i` are `2i+1`, `2i+2`).
pub fn binary_tree(n: usize) -> Graph {
    let pairs = (1..n).map(|c| ((c - 1) / 2, c)).collect();
    undirected_unit_graph(n, &pairs)
}

/// Uniform-ish random d-regular graph by the pairing model with restarts.
pub fn d_regular(n: usize, d: usize, seed: u64) -> Result<Graph> {
    if d >= n || (n * d) % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "no simple {d}-regular graph on {n} nodes"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    'attempt: for _ in 0..10_000 {
        let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat(v).take(d)).collect();
        stubs.shuffle(&mut rng);
        let mut pairs = HashSet::new();
        for pair in stubs.chunks(2) {
            let (u, v) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if u == v || !pairs.insert((u, v)) {
                continue 'attempt;
            }
        }
        return Ok(undirected_unit_graph(n, &pairs));
    }
    Err(Error::InvalidArgument(format!(
        "failed to sample a {d}-regular graph on {n} nodes"
    )))
}

/// Planar `rows x cols` grid where every square is split by its down-right diagonal.
pub fn triangulated_grid(rows: usize, cols: usize) -> Graph {
    let id = |r: usize, c: usize| r * cols + c;
    let mut pairs = HashSet::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                pairs.insert((id(r, c), id(r, c + 1)));
            }
            if r + 1 < rows {
                pairs.insert((id(r, c), id(r + 1, c)));
                if c + 1 < cols {
                    pairs.insert((id(r, c), id(r + 1, c + 1)));
                }
            }
        }
    }
    undirected_unit_graph(rows * cols, &pairs)
}

/// A triangulated surface together with per-vertex unit normals.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub graph: Graph,
    pub normals: Vec<[f64; 3]>,
}

/// Torus with major radius `major` and tube radius `minor`, sampled on a
/// periodic `rows x cols` grid (rows around the tube, cols around the axis)
/// and triangulated like [`triangulated_grid`]. Normals are exact:
/// `n(u, v) = (cos v cos u, cos v sin u, sin v)`.
pub fn torus_mesh(rows: usize, cols: usize, major: f64, minor: f64) -> Result<Mesh> {
    if rows < 3 || cols < 3 {
        return Err(Error::InvalidArgument(
            "torus needs at least 3x3 vertices".into(),
        ));
    }
    if !(major > minor && minor > 0.0) {
        return Err(Error::InvalidArgument(
            "torus requires major > minor > 0".into(),
        ));
    }
    let id = |r: usize, c: usize| (r % rows) * cols + (c % cols);
    let mut pairs = HashSet::new();
    for r in 0..rows {
        for c in 0..cols {
            for (a, b) in [
                (id(r, c), id(r, c + 1)),
                (id(r, c), id(r + 1, c)),
                (id(r, c), id(r + 1, c + 1)),
            ] {
                pairs.insert((a.min(b), a.max(b)));
            }
        }
    }
    let mut normals = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let v = TAU * r as f64 / rows as f64;
        for c in 0..cols {
            let u = TAU * c as f64 / cols as f64;
            normals.push([v.cos() * u.cos(), v.cos() * u.sin(), v.sin()]);
        }
    }
    Ok(Mesh {
        graph: undirected_unit_graph(rows * cols, &pairs),
        normals,
    })
}
