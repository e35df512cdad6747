//! Non-homogeneous linear graph ODEs `dx/dt = W x + y(t)` with `x(0) = 0`,
//! whose solution is `x(t) = int_0^t exp(W (t - tau)) y(tau) dtau`.
//!
//! [`simulate_grf`] estimates the integral by Monte Carlo over `tau`, with
//! each matrix exponential replaced by a low-rank g-GRF estimate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::estimator::{kernel_matvec, MAX_DENSE_NODES};
use crate::graph::AffineOperator;
use crate::modulation::{
    closed_form_modulation, symmetric_modulation, taylor_coeffs_to_tolerance, KernelSpec,
    DEFAULT_TAIL_TOL,
};
use crate::oracle::{operator_exponential, taylor_kernel};
use crate::walker::{sample_feature_pair, splitmix64, WalkConfig};

/// Source term `y(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Drive {
    Constant(Vec<f64>),
    /// Piecewise-linear interpolation between samples; constant outside.
    Series {
        times: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

impl Drive {
    pub fn dim(&self) -> usize {
        match self {
            Drive::Constant(y) => y.len(),
            Drive::Series { values, .. } => values.first().map_or(0, Vec::len),
        }
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        match self {
            Drive::Constant(y) => y.clone(),
            Drive::Series { times, values } => {
                let k = times.partition_point(|s| *s <= t);
                if k == 0 {
                    return values[0].clone();
                }
                if k == times.len() {
                    return values[k - 1].clone();
                }
                let (t0, t1) = (times[k - 1], times[k]);
                let w = (t - t0) / (t1 - t0);
                values[k - 1]
                    .iter()
                    .zip(&values[k])
                    .map(|(a, b)| a + w * (b - a))
                    .collect()
            }
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if let Drive::Series { times, values } = self {
            if times.is_empty() || times.len() != values.len() {
                return Err(Error::InvalidArgument(
                    "drive series needs one value vector per time".into(),
                ));
            }
            if times.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::InvalidArgument("drive times must increase".into()));
            }
            if let Some(v) = values.iter().find(|v| v.len() != n) {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: v.len(),
                });
            }
        }
        if self.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

/// Sampling density for `tau` on `[0, t]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum TauDensity {
    #[default]
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeProblem {
    pub operator: AffineOperator,
    pub drive: Drive,
    pub horizon: f64,
    pub n_samples: usize,
    pub density: TauDensity,
}

impl OdeProblem {
    pub fn new(
        operator: AffineOperator,
        drive: Drive,
        horizon: f64,
        n_samples: usize,
    ) -> Result<Self> {
        let p = Self {
            operator,
            drive,
            horizon,
            n_samples,
            density: TauDensity::Uniform,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        if self.n_samples == 0 {
            return Err(Error::InvalidArgument(
                "n_samples must be at least 1".into(),
            ));
        }
        self.drive.validate(self.operator.num_nodes())
    }

    fn density_at(&self, _tau: f64) -> f64 {
        match self.density {
            TauDensity::Uniform => 1.0 / self.horizon,
        }
    }

    fn sample_tau(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self.density {
            TauDensity::Uniform => rng.gen::<f64>() * self.horizon,
        }
    }
}

fn drive_matrix(op: &AffineOperator, spec: &KernelSpec) -> Result<DenseMatrix> {
    let coeffs = taylor_coeffs_to_tolerance(spec, DEFAULT_TAIL_TOL);
    Ok(taylor_kernel(&op.adjacency.to_dense(), &coeffs, DEFAULT_TAIL_TOL)?.matrix)
}

/// Trapezoidal quadrature of the convolution integral on `n_quad` equal
/// intervals. With `drive_kernel`, the source is first mapped through
/// `Z = sum_k alpha_k A^k` for the operator's sparse part `A`.
pub fn simulate_exact(
    p: &OdeProblem,
    n_quad: usize,
    drive_kernel: Option<&KernelSpec>,
) -> Result<Vec<f64>> {
    p.validate()?;
    if n_quad == 0 {
        return Err(Error::InvalidArgument("n_quad must be at least 1".into()));
    }
    let n = p.operator.num_nodes();
    if n > MAX_DENSE_NODES {
        return Err(Error::TooLarge(n));
    }
    let z = drive_kernel
        .map(|s| drive_matrix(&p.operator, s))
        .transpose()?;
    let h = p.horizon / n_quad as f64;
    let step = operator_exponential(&p.operator, h)?;
    // acc_k = E acc_{k-1} + w_k y(tau_k) leaves sum_k w_k E^{n-k} y(tau_k).
    let mut acc = vec![0.0; n];
    for k in 0..=n_quad {
        if k > 0 {
            acc = step.matvec(&acc)?;
        }
        let mut y = p.drive.at(k as f64 * h);
        if let Some(z) = &z {
            y = z.matvec(&y)?;
        }
        let w = if k == 0 || k == n_quad { h / 2.0 } else { h };
        for (a, yi) in acc.iter_mut().zip(&y) {
            *a += w * yi;
        }
    }
    Ok(acc)
}

/// Walk parameters for [`simulate_grf`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrfOdeConfig {
    pub m: usize,
    pub p_halt: f64,
    pub seed: u64,
}

/// `x^(t) = (1/n) sum_j phi1_j (phi2_j^T y(tau_j)) / p(tau_j)`, where each
/// pair estimates `exp(W (t - tau_j))` with the diffusion modulation
/// function scaled by `(t - tau_j)`.
///
/// The `tau` draws depend only on `seed`, so runs that differ only in `m`
/// see the same sample times.
pub fn simulate_grf(
    p: &OdeProblem,
    cfg: &GrfOdeConfig,
    drive_kernel: Option<&KernelSpec>,
) -> Result<Vec<f64>> {
    p.validate()?;
    let n = p.operator.num_nodes();
    let walk = WalkConfig::new(cfg.p_halt, cfg.m, 1.0, cfg.seed);
    walk.validate()?;
    // f(i) = 1 / (2^i i!), so that f * f = 1 / k!.
    let unit_exp = closed_form_modulation(&KernelSpec::diffusion(std::f64::consts::SQRT_2))?;
    let drive_f = drive_kernel.map(symmetric_modulation).transpose()?;
    let graph = &p.operator.adjacency;
    let mut tau_rng = ChaCha8Rng::seed_from_u64(splitmix64(cfg.seed));
    let mut x = vec![0.0; n];
    for j in 0..p.n_samples {
        let tau = p.sample_tau(&mut tau_rng);
        let mut y = p.drive.at(tau);
        if y.iter().all(|v| *v == 0.0) {
            continue;
        }
        let sample_seed = splitmix64(cfg.seed ^ splitmix64(j as u64 + 1));
        if let Some(fz) = &drive_f {
            let zcfg = walk.with_seed(splitmix64(sample_seed ^ 0x5A5A_5A5A_5A5A_5A5A));
            let (z1, z2) = sample_feature_pair(graph, fz, fz, &zcfg)?;
            y = kernel_matvec(&z1, &z2, &y)?;
        }
        let s = p.horizon - tau;
        let f = unit_exp.scaled(p.operator.adjacency_coeff * s);
        let (phi1, phi2) = sample_feature_pair(graph, &f, &f, &walk.with_seed(sample_seed))?;
        let v = kernel_matvec(&phi1, &phi2, &y)?;
        let weight = (p.operator.identity_coeff * s).exp() / p.density_at(tau);
        for (xi, vi) in x.iter_mut().zip(&v) {
            *xi += weight * vi;
        }
    }
    let inv_n = 1.0 / p.n_samples as f64;
    Ok(x.into_iter().map(|v| v * inv_n).collect())
}

/// `||a - b||_2 / ||b||_2`.
pub fn relative_l2_error(estimate: &[f64], reference: &[f64]) -> Result<f64> {
    if estimate.len() != reference.len() {
        return Err(Error::DimensionMismatch {
            expected: reference.len(),
            found: estimate.len(),
        });
    }
    let norm = reference.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidArgument(
            "reference vector has zero norm".into(),
        ));
    }
    let diff = estimate
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(diff / norm)
}
