//! Taylor coefficients of graph kernels and the modulation functions that
//! realise them.
//!
//! A kernel `K = sum_k alpha_k W^k` is estimated without bias by a pair of
//! modulation functions whose discrete convolution equals `alpha`. For
//! symmetric pairs the solution is unique up to sign and is computed either
//! from a closed form or by the iterative square-root recursion in
//! [`symmetric_from_coeffs`].

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, LN_2};
use std::io::{BufRead, Write};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::NeuralModParams;

/// Default stopping rule for truncated series.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;
/// Hard cap on the number of Taylor terms.
pub const MAX_TERMS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelKind {
    /// `(I + sigma^2 L)^-d`
    DRegularisedLaplacian { d: u32 },
    /// `(alpha I - L)^p`, `alpha >= 2`
    PStepRandomWalk { p: u32, alpha: f64 },
    /// `exp(-sigma^2 L / 2)`
    Diffusion,
    /// `cos(pi L / 4)`
    InverseCosine,
}

/// A kernel from the standard family, as a function of the normalised
/// Laplacian `L = I - W~`. `sigma` is the regulariser used by the
/// d-regularised Laplacian and diffusion kernels; the p-step kernel is
/// regularised by its own `alpha` and the inverse cosine has none.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub sigma: f64,
}

impl KernelSpec {
    pub fn d_regularised_laplacian(d: u32, sigma: f64) -> Self {
        Self {
            kind: KernelKind::DRegularisedLaplacian { d },
            sigma,
        }
    }

    pub fn p_step_random_walk(p: u32, alpha: f64) -> Self {
        Self {
            kind: KernelKind::PStepRandomWalk { p, alpha },
            sigma: 1.0,
        }
    }

    pub fn diffusion(sigma: f64) -> Self {
        Self {
            kind: KernelKind::Diffusion,
            sigma,
        }
    }

    pub fn inverse_cosine() -> Self {
        Self {
            kind: KernelKind::InverseCosine,
            sigma: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        match self.kind {
            KernelKind::DRegularisedLaplacian { d } if d == 0 => {
                Err(Error::InvalidArgument("d must be positive".into()))
            }
            KernelKind::PStepRandomWalk { p, .. } if p == 0 => {
                Err(Error::InvalidArgument("p must be positive".into()))
            }
            KernelKind::PStepRandomWalk { alpha, .. } if !(alpha >= 2.0) => Err(
                Error::InvalidArgument(format!("p-step kernel needs alpha >= 2, got {alpha}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            KernelKind::DRegularisedLaplacian { .. } => "d_regularised_laplacian",
            KernelKind::PStepRandomWalk { .. } => "p_step_random_walk",
            KernelKind::Diffusion => "diffusion",
            KernelKind::InverseCosine => "inverse_cosine",
        }
    }

    /// The factor `r` that appears as `r^k` in `alpha_k`. Scaling the walked
    /// matrix by `beta` is equivalent to replacing `r` by `r * beta`.
    pub fn power_ratio(&self) -> f64 {
        match self.kind {
            KernelKind::DRegularisedLaplacian { .. } => 1.0 / (1.0 + self.sigma.powi(-2)),
            KernelKind::PStepRandomWalk { alpha, .. } => 1.0 / (alpha - 1.0),
            KernelKind::Diffusion => self.sigma * self.sigma / 2.0,
            KernelKind::InverseCosine => FRAC_PI_4,
        }
    }

    /// Constant `c` with `Form(L) = c * sum_k alpha_k W~^k`.
    pub fn normalization(&self) -> f64 {
        match self.kind {
            KernelKind::DRegularisedLaplacian { d } => {
                (1.0 + self.sigma * self.sigma).powi(-(d as i32))
            }
            KernelKind::PStepRandomWalk { p, alpha } => (alpha - 1.0).powi(p as i32),
            KernelKind::Diffusion => (-self.sigma * self.sigma / 2.0).exp(),
            KernelKind::InverseCosine => FRAC_1_SQRT_2,
        }
    }

    /// Whether a closed-form symmetric modulation function exists.
    pub fn has_closed_form(&self) -> bool {
        !matches!(self.kind, KernelKind::InverseCosine)
    }
}

/// `ln |binom(x, k)|` and its sign for real `x`; `None` when it is exactly zero.
fn ln_binom_signed(x: f64, k: usize) -> Option<(f64, f64)> {
    let mut ln = 0.0;
    let mut sign = 1.0;
    for j in 0..k {
        let num = x - j as f64;
        if num == 0.0 {
            return None;
        }
        if num < 0.0 {
            sign = -sign;
        }
        ln += num.abs().ln() - ((j + 1) as f64).ln();
    }
    Some((ln, sign))
}

fn ln_factorial(k: usize) -> f64 {
    (1..=k).map(|j| (j as f64).ln()).sum()
}

fn signed_exp(parts: Option<(f64, f64)>) -> f64 {
    parts.map_or(0.0, |(ln, sign)| sign * ln.exp())
}

/// Taylor coefficient `alpha_k` of `spec`, computed in log space.
pub fn taylor_coeff(spec: &KernelSpec, k: usize) -> f64 {
    let ln_r = spec.power_ratio().ln();
    let kf = k as f64;
    let parts = match spec.kind {
        KernelKind::DRegularisedLaplacian { d } => {
            ln_binom_signed(d as f64 + kf - 1.0, k).map(|(ln, s)| (ln + kf * ln_r, s))
        }
        KernelKind::PStepRandomWalk { p, .. } => {
            if k > p as usize {
                None
            } else {
                ln_binom_signed(p as f64, k).map(|(ln, s)| (ln + kf * ln_r, s))
            }
        }
        KernelKind::Diffusion => Some((kf * ln_r - ln_factorial(k), 1.0)),
        KernelKind::InverseCosine => {
            let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            Some((kf * ln_r - ln_factorial(k), sign))
        }
    };
    signed_exp(parts)
}

/// Closed-form symmetric modulation value `f(i)` including the `r^i` factor.
fn closed_form_value(spec: &KernelSpec, i: usize) -> Option<f64> {
    let ln_r = spec.power_ratio().ln();
    let fi = i as f64;
    let parts = match spec.kind {
        // (d-2+2i)!! / ((2i)!! (d-2)!!) = binom(d/2 + i - 1, i)
        KernelKind::DRegularisedLaplacian { d } => {
            ln_binom_signed(d as f64 / 2.0 + fi - 1.0, i).map(|(ln, s)| (ln + fi * ln_r, s))
        }
        KernelKind::PStepRandomWalk { p, .. } => {
            ln_binom_signed(p as f64 / 2.0, i).map(|(ln, s)| (ln + fi * ln_r, s))
        }
        KernelKind::Diffusion => Some((fi * ln_r - fi * LN_2 - ln_factorial(i), 1.0)),
        KernelKind::InverseCosine => return None,
    };
    Some(signed_exp(parts))
}

/// Normalised Taylor coefficients `(alpha_0 = 1, ..., alpha_k_max)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffSeq(Vec<f64>);

impl CoeffSeq {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        match values.first() {
            Some(a0) if (a0 - 1.0).abs() <= 1e-12 => {}
            Some(a0) => return Err(Error::NotNormalised(*a0)),
            None => return Err(Error::NotNormalised(f64::NAN)),
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Taylor coefficient".into()));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn k_max(&self) -> usize {
        self.0.len() - 1
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn taylor_coeffs(spec: &KernelSpec, k_max: usize) -> CoeffSeq {
    CoeffSeq((0..=k_max).map(|k| taylor_coeff(spec, k)).collect())
}

/// Coefficients up to the first index whose magnitude (and every later one
/// within a look-ahead window) falls below `tail_tol`, capped at [`MAX_TERMS`].
pub fn taylor_coeffs_to_tolerance(spec: &KernelSpec, tail_tol: f64) -> CoeffSeq {
    let mut values = Vec::new();
    for k in 0..MAX_TERMS {
        let a = taylor_coeff(spec, k);
        values.push(a);
        if k > 0 && a.abs() < tail_tol {
            let quiet = (k + 1..k + 8).all(|j| taylor_coeff(spec, j).abs() < tail_tol);
            if quiet {
                break;
            }
        }
    }
    CoeffSeq(values)
}

/// Where modulation values come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModulationSource {
    ClosedForm(KernelSpec),
    /// Explicit values; zero beyond the end of the table.
    Tabulated {
        values: Vec<f64>,
    },
    Neural(NeuralModParams),
    /// `f(i) * beta^i`
    Geometric {
        inner: Box<ModulationSource>,
        beta: f64,
    },
}

impl ModulationSource {
    fn value(&self, i: usize) -> f64 {
        match self {
            Self::ClosedForm(spec) => closed_form_value(spec, i).unwrap_or(f64::NAN),
            Self::Tabulated { values } => values.get(i).copied().unwrap_or(0.0),
            Self::Neural(p) => p.eval(i),
            Self::Geometric { inner, beta } => {
                let v = inner.value(i);
                if v == 0.0 {
                    0.0
                } else {
                    v * beta.powi(i as i32)
                }
            }
        }
    }
}

/// A modulation function `f: N -> R` with a lazily grown prefix cache.
///
/// Evaluation is deterministic and safe from many threads; the walker
/// snapshots a prefix before sampling and only falls back to [`eval`] for
/// unusually long walks.
///
/// [`eval`]: ModulationFn::eval
#[derive(Debug)]
pub struct ModulationFn {
    source: ModulationSource,
    cache: RwLock<Vec<f64>>,
}

impl Clone for ModulationFn {
    fn clone(&self) -> Self {
        Self {
            source: self.source.clone(),
            cache: RwLock::new(self.cache.read().expect("cache lock").clone()),
        }
    }
}

impl PartialEq for ModulationFn {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl ModulationFn {
    pub fn new(source: ModulationSource) -> Self {
        Self {
            source,
            cache: RwLock::new(Vec::new()),
        }
    }

    pub fn tabulated(values: Vec<f64>) -> Self {
        Self::new(ModulationSource::Tabulated { values })
    }

    /// The lazy walker `f(i) = [i == 0]`.
    pub fn lazy() -> Self {
        Self::tabulated(vec![1.0])
    }

    pub fn neural(params: NeuralModParams) -> Self {
        Self::new(ModulationSource::Neural(params))
    }

    pub fn source(&self) -> &ModulationSource {
        &self.source
    }

    /// `i -> f(i) beta^i`: the same estimator as walking `beta W`.
    pub fn scaled(&self, beta: f64) -> Self {
        Self::new(ModulationSource::Geometric {
            inner: Box::new(self.source.clone()),
            beta,
        })
    }

    pub fn eval(&self, i: usize) -> f64 {
        if let Some(v) = self.cache.read().expect("cache lock").get(i) {
            return *v;
        }
        let mut cache = self.cache.write().expect("cache lock");
        let target = (i + 1).max(2 * cache.len());
        for j in cache.len()..target {
            let v = self.source.value(j);
            cache.push(v);
        }
        cache[i]
    }

    /// `(f(0), ..., f(len - 1))`, growing the cache as needed.
    pub fn prefix(&self, len: usize) -> Vec<f64> {
        if len == 0 {
            return Vec::new();
        }
        self.eval(len - 1);
        self.cache.read().expect("cache lock")[..len].to_vec()
    }

    pub fn cached_len(&self) -> usize {
        self.cache.read().expect("cache lock").len()
    }

    /// Writes `f(0..len)` one value per line.
    pub fn write_tabulated<W: Write>(&self, mut w: W, len: usize) -> std::io::Result<()> {
        for v in self.prefix(len) {
            writeln!(w, "{v}")?;
        }
        Ok(())
    }
}

/// Reads a one-value-per-line tabulated modulation function (`#` comments allowed).
pub fn read_tabulated<R: BufRead>(reader: R) -> Result<ModulationFn> {
    let mut values = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let v: f64 = content.parse().map_err(|_| Error::Parse {
            line: idx + 1,
            message: format!("invalid modulation value `{content}`"),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                line: idx + 1,
                message: "non-finite modulation value".into(),
            });
        }
        values.push(v);
    }
    Ok(ModulationFn::tabulated(values))
}

/// Closed-form symmetric modulation function of `spec`, with the kernel's
/// `r^i` regulariser factor folded in.
pub fn closed_form_modulation(spec: &KernelSpec) -> Result<ModulationFn> {
    spec.validate()?;
    if !spec.has_closed_form() {
        return Err(Error::NoClosedForm(format!(
            "{} has no closed form; use symmetric_from_coeffs",
            spec.name()
        )));
    }
    Ok(ModulationFn::new(ModulationSource::ClosedForm(*spec)))
}

/// Positive-branch solution of `f * f = alpha`:
/// `f(0) = 1`, `f(i+1) = (alpha_{i+1} - sum_{p=0}^{i-1} f(i-p) f(p+1)) / 2`.
pub fn symmetric_sequence(alpha: &[f64]) -> Result<Vec<f64>> {
    let a0 = *alpha.first().ok_or(Error::NotNormalised(f64::NAN))?;
    if (a0 - 1.0).abs() > 1e-12 {
        return Err(Error::NotNormalised(a0));
    }
    let mut f = Vec::with_capacity(alpha.len());
    f.push(1.0);
    for i in 0..alpha.len() - 1 {
        let cross: f64 = (0..i).map(|p| f[i - p] * f[p + 1]).sum();
        f.push((alpha[i + 1] - cross) / (2.0 * f[0]));
    }
    Ok(f)
}

pub fn symmetric_from_coeffs(coeffs: &CoeffSeq) -> Result<ModulationFn> {
    Ok(ModulationFn::tabulated(symmetric_sequence(
        coeffs.values(),
    )?))
}

/// Symmetric modulation for any spec: the closed form when one exists,
/// otherwise the iterative solver on coefficients truncated at `DEFAULT_TAIL_TOL`.
///
/// For the inverse cosine kernel the exact square root decays only like
/// `k^(-3/2)` (its generating function vanishes at `x = -1`), which gives
/// the walk estimator unbounded variance. Truncating keeps the variance
/// finite; `f * f` then equals `alpha` only up to the truncation length.
pub fn symmetric_modulation(spec: &KernelSpec) -> Result<ModulationFn> {
    if spec.has_closed_form() {
        closed_form_modulation(spec)
    } else {
        spec.validate()?;
        symmetric_from_coeffs(&taylor_coeffs_to_tolerance(spec, DEFAULT_TAIL_TOL))
    }
}

/// `(sum_{p=0}^k f1(k-p) f2(p))` for `k = 0..=k_max`.
pub fn convolve(f1: &ModulationFn, f2: &ModulationFn, k_max: usize) -> Vec<f64> {
    let a = f1.prefix(k_max + 1);
    let b = f2.prefix(k_max + 1);
    convolve_slices(&a, &b)
}

pub fn convolve_slices(a: &[f64], b: &[f64]) -> Vec<f64> {
    let len = a.len().min(b.len());
    (0..len)
        .map(|k| (0..=k).map(|p| a[k - p] * b[p]).sum())
        .collect()
}

/// Smallest `b` such that `m` geometric walks with halting probability
/// `p_halt` are all shorter than `b` with probability at least `1 - delta`:
/// `(1 - (1 - p)^b)^m >= 1 - delta`.
pub fn min_batch_size(m: usize, p_halt: f64, delta: f64) -> Result<usize> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    if !(p_halt > 0.0 && p_halt < 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(
            "p_halt and delta must lie in (0, 1)".into(),
        ));
    }
    let mf = m as f64;
    let q = 1.0 - p_halt;
    // 1 - (1 - delta)^(1/m), computed without cancellation.
    let tail = -((1.0 - delta).ln() / mf).exp_m1();
    let b = (tail.ln() / q.ln()).ceil().max(1.0) as usize;
    let ok = |b: usize| mf * (-(q.powi(b as i32))).ln_1p() >= (1.0 - delta).ln();
    let mut b = b;
    while !ok(b) {
        b += 1;
    }
    while b > 1 && ok(b - 1) {
        b -= 1;
    }
    Ok(b)
}

/// `sqrt((1/m) sum_i bound_i rho^i)`, the empirical Rademacher complexity
/// bound for kernels whose Taylor coefficients satisfy `|alpha_i| <= bound_i`.
pub fn rademacher_bound(coeff_bounds: &[f64], rho: f64, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    if !(rho >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "rho must be non-negative, got {rho}"
        )));
    }
    if coeff_bounds.iter().any(|b| !(*b >= 0.0)) {
        return Err(Error::InvalidArgument(
            "coefficient bounds must be non-negative".into(),
        ));
    }
    let mut sum = 0.0;
    let mut power = 1.0;
    let mut last = 0.0;
    for b in coeff_bounds {
        last = b * power;
        sum += last;
        power *= rho;
    }
    if !sum.is_finite() || last >= DEFAULT_TAIL_TOL * sum.max(1.0) {
        return Err(Error::Divergent {
            terms: coeff_bounds.len(),
            last_term: last,
        });
    }
    Ok((sum / m as f64).sqrt())
}
