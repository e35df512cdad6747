//! Kernel estimates from pairs of feature matrices.

use rayon::prelude::*;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::walker::FeatureMatrix;

/// Largest `N` for which a full Gram matrix may be materialised.
pub const MAX_DENSE_NODES: usize = 4096;

fn check_pair(phi1: &FeatureMatrix, phi2: &FeatureMatrix) -> Result<()> {
    if phi1.num_nodes() != phi2.num_nodes() {
        return Err(Error::DimensionMismatch {
            expected: phi1.num_nodes(),
            found: phi2.num_nodes(),
        });
    }
    if phi1.seed() == phi2.seed() {
        return Err(Error::SeedCollision(phi1.seed()));
    }
    Ok(())
}

/// `K_ij = phi1(i) . phi2(j)`, optionally replaced by `(K + K^T) / 2`.
pub fn estimate_gram(
    phi1: &FeatureMatrix,
    phi2: &FeatureMatrix,
    symmetrize: bool,
) -> Result<DenseMatrix> {
    check_pair(phi1, phi2)?;
    let n = phi1.num_nodes();
    if n > MAX_DENSE_NODES {
        return Err(Error::TooLarge(n));
    }
    let b = phi2.to_dense().transpose();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut out = vec![0.0; n];
            let (idx, vals) = phi1.row(i);
            for (k, a) in idx.iter().zip(vals) {
                for (o, bk) in out.iter_mut().zip(b.row(*k as usize)) {
                    *o += a * bk;
                }
            }
            out
        })
        .collect();
    let k = DenseMatrix::new(n, n, rows.concat())?;
    Ok(if symmetrize { k.symmetrized() } else { k })
}

/// `phi1 (phi2^T v)` without forming the Gram matrix.
pub fn kernel_matvec(phi1: &FeatureMatrix, phi2: &FeatureMatrix, v: &[f64]) -> Result<Vec<f64>> {
    check_pair(phi1, phi2)?;
    phi1.matvec(&phi2.transpose_matvec(v)?)
}

/// `||K - K_hat||_F / ||K||_F`.
pub fn relative_frobenius_error(k: &DenseMatrix, k_hat: &DenseMatrix) -> Result<f64> {
    if k.rows() != k_hat.rows() || k.cols() != k_hat.cols() {
        return Err(Error::DimensionMismatch {
            expected: k.rows() * k.cols(),
            found: k_hat.rows() * k_hat.cols(),
        });
    }
    let norm = k.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::InvalidArgument(
            "reference matrix has zero norm".into(),
        ));
    }
    Ok(k.sub(k_hat)?.frobenius_norm() / norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::erdos_renyi;
    use crate::modulation::{closed_form_modulation, KernelSpec, ModulationFn};
    use crate::walker::{sample_feature_pair, sample_features, WalkConfig};

    #[test]
    fn lazy_pair_gives_identity() {
        let g = erdos_renyi(9, 0.4, 1).unwrap();
        let f = ModulationFn::lazy();
        let (a, b) = sample_feature_pair(&g, &f, &f, &WalkConfig::new(0.5, 3, 1.0, 4)).unwrap();
        assert_eq!(
            estimate_gram(&a, &b, false).unwrap(),
            DenseMatrix::identity(9)
        );
    }

    #[test]
    fn shared_seed_is_rejected() {
        let g = erdos_renyi(5, 0.5, 1).unwrap();
        let phi =
            sample_features(&g, &ModulationFn::lazy(), &WalkConfig::new(0.5, 2, 1.0, 8)).unwrap();
        assert!(matches!(
            estimate_gram(&phi, &phi, false),
            Err(Error::SeedCollision(8))
        ));
        assert!(kernel_matvec(&phi, &phi, &[0.0; 5]).is_err());
    }

    #[test]
    fn matvec_matches_gram() {
        let g = erdos_renyi(20, 0.2, 3).unwrap();
        let f = closed_form_modulation(&KernelSpec::diffusion(1.0)).unwrap();
        let (a, b) = sample_feature_pair(&g, &f, &f, &WalkConfig::new(0.2, 10, 0.3, 5)).unwrap();
        let k = estimate_gram(&a, &b, false).unwrap();
        let v: Vec<f64> = (0..20).map(|i| ((i * 7) % 5) as f64 - 1.5).collect();
        let want = k.matvec(&v).unwrap();
        let got = kernel_matvec(&a, &b, &v).unwrap();
        let scale = want.iter().map(|x| x.abs()).fold(0.0, f64::max);
        for (x, y) in want.iter().zip(&got) {
            assert!((x - y).abs() <= 1e-10 * scale);
        }
        assert!(kernel_matvec(&a, &b, &vec![0.0; 20])
            .unwrap()
            .iter()
            .all(|x| *x == 0.0));
    }

    #[test]
    fn symmetrize_flag() {
        let g = erdos_renyi(8, 0.5, 2).unwrap();
        let f = closed_form_modulation(&KernelSpec::diffusion(1.0)).unwrap();
        let (a, b) = sample_feature_pair(&g, &f, &f, &WalkConfig::new(0.3, 4, 0.5, 1)).unwrap();
        let k = estimate_gram(&a, &b, true).unwrap();
        assert_eq!(k, k.transpose());
    }

    #[test]
    fn frobenius_examples() {
        let i2 = DenseMatrix::identity(2);
        assert_eq!(relative_frobenius_error(&i2, &i2).unwrap(), 0.0);
        assert_eq!(
            relative_frobenius_error(&i2, &DenseMatrix::zeros(2, 2)).unwrap(),
            1.0
        );
        assert_eq!(relative_frobenius_error(&i2, &i2.scale(2.0)).unwrap(), 1.0);
        assert!(relative_frobenius_error(&DenseMatrix::zeros(2, 2), &i2).is_err());
    }
}
