//! Kernelised k-means node clustering and attribute regression.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::estimator::kernel_matvec;
use crate::walker::{splitmix64, FeatureMatrix};

pub const DEFAULT_MAX_ITERS: usize = 300;
pub const DEFAULT_RESTARTS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    /// Sum of squared kernel distances from each point to its centroid.
    pub objective: f64,
}

/// First index of the minimum; NaN never wins.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (c, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = c;
        }
    }
    best
}

/// Kernelised Lloyd iteration on the symmetric part of `k_hat`.
///
/// Seeding is k-means++ on kernel distances with a ChaCha8 stream from
/// `seed`; if every remaining point is at distance zero the lowest unused
/// index becomes the next centre. Ties in assignment go to the lowest
/// cluster index. A cluster that empties is re-seeded with the point
/// farthest from its current centroid, provided that distance is positive.
pub fn kernel_kmeans(
    k_hat: &DenseMatrix,
    k: usize,
    max_iters: usize,
    seed: u64,
) -> Result<KMeansResult> {
    if !k_hat.is_square() {
        return Err(Error::DimensionMismatch {
            expected: k_hat.rows(),
            found: k_hat.cols(),
        });
    }
    let n = k_hat.rows();
    if k < 2 || k > n {
        return Err(Error::InvalidArgument(format!(
            "need 2 <= k <= N, got k={k}, N={n}"
        )));
    }
    let kern = k_hat.symmetrized();
    let diag: Vec<f64> = (0..n).map(|i| kern.get(i, i)).collect();
    let point_dist = |i: usize, j: usize| (diag[i] - 2.0 * kern.get(i, j) + diag[j]).max(0.0);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centres = vec![rng.gen_range(0..n)];
    let mut nearest: Vec<f64> = (0..n).map(|i| point_dist(i, centres[0])).collect();
    while centres.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, d) in nearest.iter().enumerate() {
                if *d > 0.0 && target < *d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            while nearest[pick] == 0.0 {
                pick -= 1;
            }
            pick
        } else {
            (0..n).find(|i| !centres.contains(i)).expect("k <= n")
        };
        centres.push(next);
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(point_dist(i, next));
        }
    }
    let mut labels: Vec<usize> = (0..n)
        .map(|i| {
            let d: Vec<f64> = centres.iter().map(|c| point_dist(i, *c)).collect();
            argmin(&d)
        })
        .collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        iterations += 1;
        let dist = centroid_distances(&kern, &diag, &labels, k);
        let mut next: Vec<usize> = dist.par_iter().map(|row| argmin(row)).collect();
        for c in 0..k {
            if next.contains(&c) {
                continue;
            }
            let (far, d) =
                (0..n)
                    .map(|i| (i, dist[i][next[i]]))
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |best, x| if x.1 > best.1 { x } else { best },
                    );
            let donor_size = next.iter().filter(|l| **l == next[far]).count();
            if d > 0.0 && donor_size > 1 {
                next[far] = c;
            }
        }
        if next == labels {
            converged = true;
            break;
        }
        labels = next;
    }
    let dist = centroid_distances(&kern, &diag, &labels, k);
    let objective = labels.iter().zip(&dist).map(|(l, row)| row[*l]).sum();
    Ok(KMeansResult {
        labels,
        iterations,
        converged,
        objective,
    })
}

/// Runs [`kernel_kmeans`] `restarts` times and keeps the lowest objective
/// (earliest restart on ties). Restart 0 uses `seed` itself, restart `r`
/// uses `splitmix64(seed ^ splitmix64(r))`.
pub fn kernel_kmeans_restarts(
    k_hat: &DenseMatrix,
    k: usize,
    max_iters: usize,
    seed: u64,
    restarts: usize,
) -> Result<KMeansResult> {
    if restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be at least 1".into()));
    }
    let mut best = kernel_kmeans(k_hat, k, max_iters, seed)?;
    for r in 1..restarts {
        let run = kernel_kmeans(k_hat, k, max_iters, splitmix64(seed ^ splitmix64(r as u64)))?;
        if run.objective < best.objective {
            best = run;
        }
    }
    Ok(best)
}

/// `d(i, c)^2 = K_ii - 2 mean_{j in c} K_ij + mean_{j, j' in c} K_jj'`;
/// empty clusters are at infinite distance.
fn centroid_distances(
    kern: &DenseMatrix,
    diag: &[f64],
    labels: &[usize],
    k: usize,
) -> Vec<Vec<f64>> {
    let n = labels.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, l) in labels.iter().enumerate() {
        members[*l].push(i);
    }
    let self_term: Vec<f64> = members
        .iter()
        .map(|m| {
            if m.is_empty() {
                return 0.0;
            }
            let s: f64 = m
                .iter()
                .map(|a| m.iter().map(|b| kern.get(*a, *b)).sum::<f64>())
                .sum();
            s / (m.len() * m.len()) as f64
        })
        .collect();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let row = kern.row(i);
            members
                .iter()
                .zip(&self_term)
                .map(|(m, st)| {
                    if m.is_empty() {
                        f64::INFINITY
                    } else {
                        let cross = m.iter().map(|j| row[*j]).sum::<f64>() / m.len() as f64;
                        (diag[i] - 2.0 * cross + st).max(0.0)
                    }
                })
                .collect()
        })
        .collect()
}

/// Fraction of unordered pairs whose same-cluster status differs.
pub fn clustering_error(labels_a: &[usize], labels_b: &[usize]) -> Result<f64> {
    if labels_a.len() != labels_b.len() {
        return Err(Error::DimensionMismatch {
            expected: labels_a.len(),
            found: labels_b.len(),
        });
    }
    let n = labels_a.len();
    if n < 2 {
        return Ok(0.0);
    }
    let mut wrong = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            if (labels_a[i] == labels_a[j]) != (labels_b[i] == labels_b[j]) {
                wrong += 1;
            }
        }
    }
    Ok(wrong as f64 / (n * (n - 1) / 2) as f64)
}

fn masked_columns(attrs: &[[f64; 3]], mask: &[bool]) -> Result<[Vec<f64>; 3]> {
    if attrs.len() != mask.len() {
        return Err(Error::DimensionMismatch {
            expected: mask.len(),
            found: attrs.len(),
        });
    }
    if mask.iter().all(|m| *m) {
        return Err(Error::InvalidArgument("every node is masked".into()));
    }
    Ok(std::array::from_fn(|c| {
        attrs
            .iter()
            .zip(mask)
            .map(|(a, m)| if *m { 0.0 } else { a[c] })
            .collect()
    }))
}

fn stack(cols: [Vec<f64>; 3]) -> Vec<[f64; 3]> {
    (0..cols[0].len())
        .map(|i| [cols[0][i], cols[1][i], cols[2][i]])
        .collect()
}

/// `v^(i) = sum_{j unmasked} K(i, j) v^(j)` for every node, with
/// `K = phi1 phi2^T` applied column by column. Rows of unmasked nodes are
/// returned too but are only meaningful for masked ones.
pub fn kernel_regression_predict(
    phi1: &FeatureMatrix,
    phi2: &FeatureMatrix,
    attrs: &[[f64; 3]],
    mask: &[bool],
) -> Result<Vec<[f64; 3]>> {
    let cols = masked_columns(attrs, mask)?;
    let mut out: [Vec<f64>; 3] = Default::default();
    for c in 0..3 {
        out[c] = kernel_matvec(phi1, phi2, &cols[c])?;
    }
    Ok(stack(out))
}

/// As [`kernel_regression_predict`] with an explicit kernel matrix.
pub fn kernel_regression_predict_dense(
    k: &DenseMatrix,
    attrs: &[[f64; 3]],
    mask: &[bool],
) -> Result<Vec<[f64; 3]>> {
    let cols = masked_columns(attrs, mask)?;
    let mut out: [Vec<f64>; 3] = Default::default();
    for c in 0..3 {
        out[c] = k.matvec(&cols[c])?;
    }
    Ok(stack(out))
}

/// `1 - cos(theta)` for one pair; a zero vector scores 1.
pub fn angular_distance(pred: &[f64; 3], truth: &[f64; 3]) -> f64 {
    let dot: f64 = pred.iter().zip(truth).map(|(a, b)| a * b).sum();
    let np = pred.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nt = truth.iter().map(|a| a * a).sum::<f64>().sqrt();
    if np == 0.0 || nt == 0.0 {
        1.0
    } else {
        1.0 - (dot / (np * nt)).clamp(-1.0, 1.0)
    }
}

/// Mean of `1 - cos(theta_i)` over masked nodes.
pub fn angular_error(pred: &[[f64; 3]], truth: &[[f64; 3]], mask: &[bool]) -> Result<f64> {
    if pred.len() != truth.len() || pred.len() != mask.len() {
        return Err(Error::DimensionMismatch {
            expected: mask.len(),
            found: pred.len().min(truth.len()),
        });
    }
    let (sum, count) = pred
        .iter()
        .zip(truth)
        .zip(mask)
        .filter(|(_, m)| **m)
        .fold((0.0, 0usize), |(s, c), ((p, t), _)| {
            (s + angular_distance(p, t), c + 1)
        });
    if count == 0 {
        return Err(Error::InvalidArgument("no masked nodes to score".into()));
    }
    Ok(sum / count as f64)
}

/// A mask hiding `round(fraction * n)` nodes (at least one), chosen by `seed`.
pub fn random_mask(n: usize, fraction: f64, seed: u64) -> Result<Vec<bool>> {
    if !(fraction > 0.0 && fraction < 1.0) || n < 2 {
        return Err(Error::InvalidArgument(
            "mask fraction must lie in (0, 1) and N must be at least 2".into(),
        ));
    }
    let hidden = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut mask = vec![false; n];
    for i in &idx[..hidden] {
        mask[*i] = true;
    }
    Ok(mask)
}

/// One `<x> <y> <z>` line per node; `#` starts a comment.
pub fn read_attributes<R: BufRead>(reader: R) -> Result<Vec<[f64; 3]>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            line: idx + 1,
            message,
        };
        let vals: Vec<f64> = content
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| err(format!("invalid number `{t}`")))
            })
            .collect::<Result<_>>()?;
        if vals.len() != 3 {
            return Err(err(format!("expected 3 values, found {}", vals.len())));
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(err("non-finite attribute".into()));
        }
        out.push([vals[0], vals[1], vals[2]]);
    }
    Ok(out)
}

pub fn write_attributes<W: Write>(mut w: W, attrs: &[[f64; 3]]) -> std::io::Result<()> {
    for a in attrs {
        writeln!(w, "{} {} {}", a[0], a[1], a[2])?;
    }
    Ok(())
}

/// `node,label` CSV with a header.
pub fn write_labels_csv<W: Write>(mut w: W, labels: &[usize]) -> std::io::Result<()> {
    writeln!(w, "node,label")?;
    for (i, l) in labels.iter().enumerate() {
        writeln!(w, "{i},{l}")?;
    }
    Ok(())
}
