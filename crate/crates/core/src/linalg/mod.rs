//! Dense and sparse linear-algebra kernels.

mod dense;
mod eig;
mod power;
mod sparse;

pub use dense::DenseMatrix;
pub use eig::{spd_power, sym_eig, sym_eigenvalues, SymmetricEig, SYMMETRY_TOL};
pub use power::{
    lambda_max, lambda_max_gram, lambda_max_warm, power_iteration, POWER_MAX_ITER, POWER_TOL,
};
pub use sparse::{sparse_apply_right, sparse_apply_right_t, SparseMatrix};

pub(crate) use dense::{dot, gemm_into, gram_of_cols};
pub(crate) use eig::spd_power_from_eig;

use crate::error::{Error, Result};

/// Thin singular value decomposition `x = U diag(σ) Vᵀ` with `σ` descending.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: DenseMatrix,
    pub singular_values: Vec<f64>,
    pub v: DenseMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> DenseMatrix {
        self.reconstruct_with(|s| s)
    }

    /// `U diag(f(σ)) Vᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        let mut us = self.u.clone();
        for (k, &s) in self.singular_values.iter().enumerate() {
            let fs = f(s);
            us.col_mut(k).iter_mut().for_each(|x| *x *= fs);
        }
        us.matmul(&self.v.transpose()).expect("consistent factors")
    }
}

/// Singular value decomposition, backed by nalgebra's bidiagonal SVD.
pub fn svd(x: &DenseMatrix) -> Result<Svd> {
    if !x.is_finite() {
        return Err(Error::NonFinite("svd input".into()));
    }
    let dec = x.to_nalgebra().svd(true, true);
    let u = dec.u.expect("requested U");
    let vt = dec.v_t.expect("requested Vᵀ");
    let k = dec.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| dec.singular_values[b].total_cmp(&dec.singular_values[a]));

    let mut uo = DenseMatrix::zeros(x.rows(), k);
    let mut vo = DenseMatrix::zeros(x.cols(), k);
    let mut s = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        s.push(dec.singular_values[src].max(0.0));
        for i in 0..x.rows() {
            uo[(i, dst)] = u[(i, src)];
        }
        for j in 0..x.cols() {
            vo[(j, dst)] = vt[(src, j)];
        }
    }
    Ok(Svd {
        u: uo,
        singular_values: s,
        v: vo,
    })
}

/// `‖x‖_* = Σ σ_i`.
pub fn nuclear_norm(x: &DenseMatrix) -> Result<f64> {
    Ok(svd(x)?.singular_values.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn svd_of_diagonal() {
        let s = svd(&DenseMatrix::from_diag(&[5.0, 0.0])).unwrap();
        assert_eq!(s.singular_values, vec![5.0, 0.0]);
    }

    #[test]
    fn svd_of_unit_outer_product() {
        let u = [0.6, 0.8, 0.0];
        let v = [0.0, 1.0, 0.0, 0.0];
        let x = DenseMatrix::from_fn(3, 4, |i, j| u[i] * v[j]);
        let s = svd(&x).unwrap();
        assert!((s.singular_values[0] - 1.0).abs() < 1e-14);
        assert!(s.singular_values[1..].iter().all(|&v| v < 1e-14));
    }

    #[test]
    fn svd_reconstructs_and_matches_gram_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = DenseMatrix::from_fn(6, 10, |_, _| rng.random_range(-1.0..1.0));
        let s = svd(&x).unwrap();
        assert!(s.reconstruct().sub(&x).unwrap().frobenius_norm() <= 1e-8 * x.frobenius_norm());
        assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
        let lam = sym_eigenvalues(&x.gram()).unwrap();
        for (sv, l) in s.singular_values.iter().zip(&lam) {
            assert!(
                (sv * sv - l).abs() <= 1e-9 * l.abs().max(1e-300),
                "{sv}² vs {l}"
            );
        }
    }

    #[test]
    fn svd_wide_and_tall() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (m, n) in [(3, 12), (12, 3), (1, 4), (4, 1)] {
            let x = DenseMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
            let s = svd(&x).unwrap();
            assert_eq!(s.singular_values.len(), m.min(n));
            assert!(s.reconstruct().sub(&x).unwrap().frobenius_norm() <= 1e-10);
        }
    }

    #[test]
    fn nuclear_norm_values() {
        assert!((nuclear_norm(&DenseMatrix::from_diag(&[3.0, 4.0])).unwrap() - 7.0).abs() < 1e-14);
        assert_eq!(nuclear_norm(&DenseMatrix::zeros(3, 3)).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = DenseMatrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
        let s: f64 = svd(&x).unwrap().singular_values.iter().sum();
        assert_eq!(nuclear_norm(&x).unwrap(), s);
    }
}
