//! Dense ground truth for the standard kernels and for arbitrary truncated
//! power series of a matrix.

use crate::dense::{expm, DenseMatrix, Lu};
use crate::error::{Error, Result};
use crate::estimator::MAX_DENSE_NODES;
use crate::graph::{normalized_adjacency, AffineOperator, Graph};
use crate::modulation::{
    taylor_coeffs_to_tolerance, CoeffSeq, KernelKind, KernelSpec, DEFAULT_TAIL_TOL,
};

/// A truncated power series and the number of terms that were summed.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorKernel {
    pub matrix: DenseMatrix,
    pub terms: usize,
}

/// `sum_k alpha_k W^k`, stopping once `||W^k||_F * max_{j >= k} |alpha_j|`
/// drops below `tail_tol`.
pub fn taylor_kernel(w: &DenseMatrix, coeffs: &CoeffSeq, tail_tol: f64) -> Result<TaylorKernel> {
    if !w.is_square() {
        return Err(Error::DimensionMismatch {
            expected: w.rows(),
            found: w.cols(),
        });
    }
    if !(tail_tol > 0.0) {
        return Err(Error::InvalidArgument("tail_tol must be positive".into()));
    }
    let alpha = coeffs.values();
    // suffix_max[k] = max_{j >= k} |alpha_j|
    let mut suffix_max = vec![0.0f64; alpha.len() + 1];
    for k in (0..alpha.len()).rev() {
        suffix_max[k] = suffix_max[k + 1].max(alpha[k].abs());
    }
    let n = w.rows();
    let mut sum = DenseMatrix::identity(n).scale(alpha[0]);
    let mut power = DenseMatrix::identity(n);
    let mut term_norms = vec![alpha[0].abs() * power.frobenius_norm()];
    for k in 1..alpha.len() {
        power = power.matmul(w)?;
        let pn = power.frobenius_norm();
        if pn * suffix_max[k] < tail_tol {
            return Ok(TaylorKernel {
                matrix: sum,
                terms: k,
            });
        }
        if !pn.is_finite() {
            return Err(Error::Divergent {
                terms: k,
                last_term: pn,
            });
        }
        if alpha[k] != 0.0 {
            sum.axpy(alpha[k], &power)?;
        }
        term_norms.push(alpha[k].abs() * pn);
    }
    let terms = alpha.len();
    if terms >= 2 {
        let last = term_norms[terms - 1];
        if last > tail_tol && last >= term_norms[terms - 2] && term_norms[terms - 2] > 0.0 {
            return Err(Error::Divergent {
                terms,
                last_term: last,
            });
        }
    }
    Ok(TaylorKernel { matrix: sum, terms })
}

fn check_size(g: &Graph) -> Result<()> {
    if g.num_nodes() > MAX_DENSE_NODES {
        return Err(Error::TooLarge(g.num_nodes()));
    }
    Ok(())
}

/// The closed "Form" of `spec` evaluated at `L = I - W~`, where `W~` is the
/// normalised adjacency of `g`.
pub fn exact_kernel(g: &Graph, spec: &KernelSpec) -> Result<DenseMatrix> {
    spec.validate()?;
    check_size(g)?;
    let wt = normalized_adjacency(g)?.to_dense();
    let n = g.num_nodes();
    let s2 = spec.sigma * spec.sigma;
    match spec.kind {
        KernelKind::DRegularisedLaplacian { d } => {
            // I + sigma^2 L = (1 + sigma^2) I - sigma^2 W~
            let mut a = wt.scale(-s2);
            a.add_identity(1.0 + s2);
            let lu = Lu::factor(&a)?;
            let mut x = DenseMatrix::identity(n);
            for _ in 0..d {
                x = lu.solve(&x)?;
            }
            Ok(x)
        }
        KernelKind::PStepRandomWalk { p, alpha } => {
            // alpha I - L = (alpha - 1) I + W~
            let mut base = wt.clone();
            base.add_identity(alpha - 1.0);
            let mut x = base.clone();
            for _ in 1..p {
                x = x.matmul(&base)?;
            }
            Ok(x)
        }
        KernelKind::Diffusion => {
            let mut a = wt.scale(s2 / 2.0);
            a.add_identity(-s2 / 2.0);
            expm(&a)
        }
        KernelKind::InverseCosine => {
            let coeffs = taylor_coeffs_to_tolerance(spec, DEFAULT_TAIL_TOL);
            Ok(taylor_kernel(&wt, &coeffs, DEFAULT_TAIL_TOL)?
                .matrix
                .scale(spec.normalization()))
        }
    }
}

/// `sum_k alpha_k W~^k`, the matrix that g-GRFs built from the Taylor
/// coefficients of `spec` estimate. Equals `exact_kernel / normalization`.
pub fn normalized_kernel(g: &Graph, spec: &KernelSpec) -> Result<DenseMatrix> {
    Ok(exact_kernel(g, spec)?.scale(1.0 / spec.normalization()))
}

/// `exp(s * (c0 I + c1 A))` for an affine operator.
pub fn operator_exponential(op: &AffineOperator, s: f64) -> Result<DenseMatrix> {
    if op.num_nodes() > MAX_DENSE_NODES {
        return Err(Error::TooLarge(op.num_nodes()));
    }
    let a = op.adjacency.to_dense().scale(op.adjacency_coeff * s);
    Ok(expm(&a)?.scale((op.identity_coeff * s).exp()))
}
