//! The four-parameter neural modulation function
//! `f(x) = softplus(w2 relu(w1 x + b1) + b2)` and its training.
//!
//! Features are linear in `f`: `Phi = sum_l f(l) sigma^l T^(l)`, so the
//! gradient of any loss of `K = Phi1 Phi2^T` follows from `dL/dK` and the
//! per-length inner products `<A, T^(l)>`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::modulation::{convolve, ModulationFn};
use crate::walker::{
    derive_pair_seeds, sample_length_features, splitmix64, LengthFeatureTensor, WalkConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuralModParams {
    pub w1: f64,
    pub b1: f64,
    pub w2: f64,
    pub b2: f64,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Default for NeuralModParams {
    /// A gently decreasing positive function.
    fn default() -> Self {
        Self::new(-0.5, 1.0, 1.0, 0.0)
    }
}

impl NeuralModParams {
    pub fn new(w1: f64, b1: f64, w2: f64, b2: f64) -> Self {
        Self { w1, b1, w2, b2 }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.w1, self.b1, self.w2, self.b2]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn eval(&self, x: usize) -> f64 {
        let h = self.w1 * x as f64 + self.b1;
        softplus(self.w2 * h.max(0.0) + self.b2)
    }

    /// `(f(x), [df/dw1, df/db1, df/dw2, df/db2])`.
    pub fn eval_with_grad(&self, x: usize) -> (f64, [f64; 4]) {
        let xf = x as f64;
        let h = self.w1 * xf + self.b1;
        let active = if h > 0.0 { 1.0 } else { 0.0 };
        let r = h.max(0.0);
        let z = self.w2 * r + self.b2;
        let s = sigmoid(z);
        (
            softplus(z),
            [s * self.w2 * active * xf, s * self.w2 * active, s * r, s],
        )
    }
}

/// One shared function or an independent pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModParams {
    Symmetric(NeuralModParams),
    Pair(NeuralModParams, NeuralModParams),
}

impl ModParams {
    pub fn first(&self) -> NeuralModParams {
        match self {
            Self::Symmetric(p) | Self::Pair(p, _) => *p,
        }
    }

    pub fn second(&self) -> NeuralModParams {
        match self {
            Self::Symmetric(p) | Self::Pair(_, p) => *p,
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            Self::Symmetric(p) => p.to_array().to_vec(),
            Self::Pair(a, b) => a.to_array().iter().chain(&b.to_array()).copied().collect(),
        }
    }

    pub fn with_values(&self, v: &[f64]) -> Self {
        match self {
            Self::Symmetric(_) => Self::Symmetric(NeuralModParams::new(v[0], v[1], v[2], v[3])),
            Self::Pair(..) => Self::Pair(
                NeuralModParams::new(v[0], v[1], v[2], v[3]),
                NeuralModParams::new(v[4], v[5], v[6], v[7]),
            ),
        }
    }

    pub fn modulation_fns(&self) -> (ModulationFn, ModulationFn) {
        (
            ModulationFn::neural(self.first()),
            ModulationFn::neural(self.second()),
        )
    }
}

/// Kernel implied by the learned functions: `convolve(f1, f2)` up to `k_max`.
pub fn implied_coefficients(params: &ModParams, k_max: usize) -> Vec<f64> {
    let (f1, f2) = params.modulation_fns();
    convolve(&f1, &f2, k_max)
}

/// What the trainer minimises.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainLoss {
    /// `||K_hat - K||_F / ||K||_F` against a fixed target Gram matrix.
    Frobenius { target: DenseMatrix },
    /// Mean `1 - cos` of masked-node attribute predictions.
    Angular {
        attrs: Vec<[f64; 3]>,
        mask: Vec<bool>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub gamma: f64,
    pub epochs: usize,
    pub m: usize,
    pub p_halt: f64,
    pub sigma: f64,
    pub seed: u64,
    pub loss: TrainLoss,
    pub init: ModParams,
}

impl TrainConfig {
    pub fn new(loss: TrainLoss, m: usize, p_halt: f64, sigma: f64, seed: u64) -> Self {
        Self {
            learning_rate: 0.01,
            gamma: 0.975,
            epochs: 1000,
            m,
            p_halt,
            sigma,
            seed,
            loss,
            init: ModParams::Symmetric(NeuralModParams::default()),
        }
    }

    /// Switches to an independent pair starting from a flat `f1` and a
    /// nearly lazy `f2`.
    pub fn asymmetric(mut self) -> Self {
        self.init = ModParams::Pair(asymmetric_init().0, asymmetric_init().1);
        self
    }

    fn validate(&self, n: usize) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(
                "learning rate must be positive".into(),
            ));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidArgument("gamma must lie in (0, 1]".into()));
        }
        WalkConfig::new(self.p_halt, self.m, self.sigma, self.seed).validate()?;
        match &self.loss {
            TrainLoss::Frobenius { target } => {
                if target.rows() != n || target.cols() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: target.rows(),
                    });
                }
                if target.frobenius_norm() == 0.0 {
                    return Err(Error::InvalidArgument("target kernel has zero norm".into()));
                }
            }
            TrainLoss::Angular { attrs, mask } => {
                if attrs.len() != n || mask.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: attrs.len().min(mask.len()),
                    });
                }
                if !mask.iter().any(|m| *m) || mask.iter().all(|m| *m) {
                    return Err(Error::InvalidArgument(
                        "mask must hide some but not all nodes".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Inverse of softplus.
fn softplus_inv(y: f64) -> f64 {
    y.exp_m1().ln()
}

/// `(flat f1, lazy-ish f2)`: `f1 = 1` everywhere; `f2(0) = 1` and
/// `f2(l) = 0.2` for `l >= 1`. A smaller tail saturates the softplus and
/// leaves `f2` with no gradient to grow from.
pub fn asymmetric_init() -> (NeuralModParams, NeuralModParams) {
    let one = softplus_inv(1.0);
    let tail = softplus_inv(0.2);
    (
        NeuralModParams::new(0.0, 1.0, 0.0, one),
        NeuralModParams::new(-10.0, 1.0, one - tail, tail),
    )
}

/// Walk tensors for both sides of the estimator.
#[derive(Debug, Clone)]
pub struct TensorPair {
    pub first: LengthFeatureTensor,
    pub second: LengthFeatureTensor,
}

impl TensorPair {
    pub fn sample(g: &Graph, m: usize, p_halt: f64, sigma: f64, seed: u64) -> Result<Self> {
        let (s1, s2) = derive_pair_seeds(seed);
        let cfg = WalkConfig::new(p_halt, m, sigma, s1);
        let l_max = cfg.default_l_max(g.num_nodes());
        Ok(Self {
            first: sample_length_features(g, &cfg, l_max)?,
            second: sample_length_features(g, &cfg.with_seed(s2), l_max)?,
        })
    }
}

fn coefficient_table(p: &NeuralModParams, len: usize, sigma: f64) -> (Vec<f64>, Vec<[f64; 4]>) {
    (0..len)
        .map(|l| {
            let (f, g) = p.eval_with_grad(l);
            let s = sigma.powi(l as i32);
            (f * s, g.map(|x| x * s))
        })
        .unzip()
}

/// `sum_{entries} a[i][v] * t` grouped by length.
fn length_inner_products(t: &LengthFeatureTensor, a: &DenseMatrix) -> Vec<f64> {
    let mut out = vec![0.0; t.max_length() + 1];
    for i in 0..t.num_nodes() {
        let row = a.row(i);
        for (v, l, val) in t.row_entries(i) {
            out[l] += row[v] * val;
        }
    }
    out
}

/// Loss and its gradient with respect to [`ModParams::to_vec`], on fixed walks.
pub fn loss_and_gradient(
    tensors: &TensorPair,
    params: &ModParams,
    loss: &TrainLoss,
) -> Result<(f64, Vec<f64>)> {
    let sigma = tensors.first.config().sigma;
    let len = tensors.first.max_length().max(tensors.second.max_length()) + 1;
    let (c1, g1) = coefficient_table(&params.first(), len, sigma);
    let (c2, g2) = coefficient_table(&params.second(), len, sigma);
    let phi1 = tensors.first.combine_with(&c1).to_dense();
    let phi2 = tensors.second.combine_with(&c2).to_dense();
    let k_hat = phi1.matmul(&phi2.transpose())?;
    let (value, dk) = match loss {
        TrainLoss::Frobenius { target } => {
            let e = k_hat.sub(target)?;
            let (en, kn) = (e.frobenius_norm(), target.frobenius_norm());
            let value = en / kn;
            let scale = if en > 0.0 { 1.0 / (en * kn) } else { 0.0 };
            (value, e.scale(scale))
        }
        TrainLoss::Angular { attrs, mask } => angular_loss_and_kernel_grad(&k_hat, attrs, mask)?,
    };
    if !value.is_finite() {
        return Err(Error::NonFinite(format!("training loss {value}")));
    }
    // <dK, dPhi1 Phi2^T> = <dK Phi2, dPhi1>, <dK, Phi1 dPhi2^T> = <dK^T Phi1, dPhi2>
    let a1 = dk.matmul(&phi2)?;
    let a2 = dk.transpose().matmul(&phi1)?;
    let ip1 = length_inner_products(&tensors.first, &a1);
    let ip2 = length_inner_products(&tensors.second, &a2);
    let side = |g: &[[f64; 4]], ip: &[f64]| -> [f64; 4] {
        let mut out = [0.0; 4];
        for (gl, x) in g.iter().zip(ip) {
            for k in 0..4 {
                out[k] += gl[k] * x;
            }
        }
        out
    };
    let d1 = side(&g1, &ip1);
    let d2 = side(&g2, &ip2);
    let grad = match params {
        ModParams::Symmetric(_) => (0..4).map(|k| d1[k] + d2[k]).collect(),
        ModParams::Pair(..) => d1.iter().chain(&d2).copied().collect(),
    };
    Ok((value, grad))
}

fn angular_loss_and_kernel_grad(
    k_hat: &DenseMatrix,
    attrs: &[[f64; 3]],
    mask: &[bool],
) -> Result<(f64, DenseMatrix)> {
    let n = attrs.len();
    let v = DenseMatrix::from_fn(n, 3, |j, c| if mask[j] { 0.0 } else { attrs[j][c] });
    let pred = k_hat.matmul(&v)?;
    let count = mask.iter().filter(|m| **m).count() as f64;
    let mut value = 0.0;
    let mut g = DenseMatrix::zeros(n, 3);
    for i in (0..n).filter(|i| mask[*i]) {
        let p = pred.row(i);
        let t = &attrs[i];
        let pn = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        let tn = t.iter().map(|x| x * x).sum::<f64>().sqrt();
        if pn == 0.0 || tn == 0.0 {
            value += 1.0;
            continue;
        }
        let dot: f64 = p.iter().zip(t).map(|(a, b)| a * b).sum();
        let cos = dot / (pn * tn);
        value += 1.0 - cos;
        for c in 0..3 {
            let d = -(t[c] / (pn * tn) - cos * p[c] / (pn * pn));
            g.set(i, c, d / count);
        }
    }
    // dL/dK = G V^T
    Ok((value / count, g.matmul(&v.transpose())?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub params: ModParams,
    /// Loss at each epoch, evaluated before that epoch's update.
    pub trace: Vec<f64>,
}

impl TrainResult {
    /// `epoch,loss` CSV.
    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "epoch,loss")?;
        for (e, l) in self.trace.iter().enumerate() {
            writeln!(w, "{e},{l}")?;
        }
        Ok(())
    }
}

/// Adam with learning rate `lr * gamma^epoch`, resampling walks every epoch
/// from a seed derived from `cfg.seed` and the epoch index.
pub fn train_modulation(g: &Graph, cfg: &TrainConfig) -> Result<TrainResult> {
    cfg.validate(g.num_nodes())?;
    let (beta1, beta2, eps) = (0.9, 0.999, 1e-8);
    let mut theta = cfg.init.to_vec();
    let mut m1 = vec![0.0; theta.len()];
    let mut m2 = vec![0.0; theta.len()];
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut lr = cfg.learning_rate;
    for epoch in 0..cfg.epochs {
        let seed = splitmix64(cfg.seed ^ splitmix64(epoch as u64));
        let tensors = TensorPair::sample(g, cfg.m, cfg.p_halt, cfg.sigma, seed)?;
        let params = cfg.init.with_values(&theta);
        let (loss, grad) = loss_and_gradient(&tensors, &params, &cfg.loss)?;
        trace.push(loss);
        let t = (epoch + 1) as i32;
        for k in 0..theta.len() {
            m1[k] = beta1 * m1[k] + (1.0 - beta1) * grad[k];
            m2[k] = beta2 * m2[k] + (1.0 - beta2) * grad[k] * grad[k];
            let mh = m1[k] / (1.0 - f64::powi(beta1, t));
            let vh = m2[k] / (1.0 - f64::powi(beta2, t));
            theta[k] -= lr * mh / (vh.sqrt() + eps);
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("parameters after epoch {epoch}")));
        }
        lr *= cfg.gamma;
    }
    Ok(TrainResult {
        params: cfg.init.with_values(&theta),
        trace,
    })
}
