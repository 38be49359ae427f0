//! Symmetric eigendecomposition by Householder tridiagonalization followed by
//! the implicit QL algorithm with Wilkinson-style shifts.

use crate::error::{Error, Result};
use crate::linalg::dense::DenseMatrix;

/// Relative symmetry tolerance accepted by [`sym_eig`].
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order and
/// eigenvectors stored as the columns of `vectors`.
#[derive(Clone, Debug)]
pub struct SymmetricEig {
    pub vectors: DenseMatrix,
    pub values: Vec<f64>,
}

impl SymmetricEig {
    /// `U f(Λ) Uᵀ`, symmetrized.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        let n = self.values.len();
        let u = &self.vectors;
        let mut out = DenseMatrix::zeros(n, n);
        for (k, &lam) in self.values.iter().enumerate() {
            let fk = f(lam);
            if fk == 0.0 {
                continue;
            }
            let uk = u.col(k);
            for j in 0..n {
                let s = fk * uk[j];
                if s == 0.0 {
                    continue;
                }
                for i in 0..=j {
                    out[(i, j)] += s * uk[i];
                }
            }
        }
        for j in 0..n {
            for i in 0..j {
                out[(j, i)] = out[(i, j)];
            }
        }
        out
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        self.reconstruct_with(|l| l)
    }

    pub fn max(&self) -> f64 {
        self.values[0]
    }

    pub fn min(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }
}

pub(crate) fn check_symmetric(a: &DenseMatrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::dim(format!(
            "expected a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let dev = a.asymmetry();
    if dev > SYMMETRY_TOL * a.max_abs().max(f64::MIN_POSITIVE) {
        return Err(Error::Asymmetric { deviation: dev });
    }
    Ok(())
}

/// Full eigendecomposition of a symmetric matrix.
pub fn sym_eig(a: &DenseMatrix) -> Result<SymmetricEig> {
    check_symmetric(a)?;
    let n = a.rows();
    let mut v = a.clone();
    v.symmetrize();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut v, &mut d, &mut e);
    ql_implicit(&mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].total_cmp(&d[i]));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.col_mut(dst).copy_from_slice(v.col(src));
    }
    Ok(SymmetricEig { vectors, values })
}

// Householder reduction to tridiagonal form. On exit `v` holds the
// accumulated orthogonal transform, `d` the diagonal and `e[1..]` the
// sub-diagonal.
fn tridiagonalize(v: &mut DenseMatrix, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let scale: f64 = d[..i].iter().map(|x| x.abs()).sum();
        let mut h = 0.0;
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for dk in d[..i].iter_mut() {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            e[..i].iter_mut().for_each(|x| *x = 0.0);
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n.saturating_sub(1) {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    v[(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

fn ql_implicit(v: &mut DenseMatrix, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let max_sweeps = 64 * n.max(1);
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > max_sweeps {
                    return Err(Error::Convergence { iterations: iter });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[(k, i + 1)];
                        v[(k, i + 1)] = s * v[(k, i)] + c * h;
                        v[(k, i)] = c * v[(k, i)] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Eigenvalues of a symmetric matrix in descending order.
pub fn sym_eigenvalues(a: &DenseMatrix) -> Result<Vec<f64>> {
    Ok(sym_eig(a)?.values)
}

/// `A^p = U Λ^p Uᵀ` for symmetric positive-definite `A`.
pub fn spd_power(a: &DenseMatrix, p: f64) -> Result<DenseMatrix> {
    let eig = sym_eig(a)?;
    spd_power_from_eig(&eig, p)
}

pub(crate) fn spd_power_from_eig(eig: &SymmetricEig, p: f64) -> Result<DenseMatrix> {
    let top = eig.max();
    let bottom = eig.min();
    if top <= 0.0 || bottom < 1e-14 * top {
        return Err(Error::Singular { eigenvalue: bottom });
    }
    if p == 0.0 {
        return Ok(DenseMatrix::identity(eig.values.len()));
    }
    Ok(eig.reconstruct_with(|l| l.powf(p)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = DenseMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        a.symmetrize();
        a
    }

    fn orthogonality_residual(u: &DenseMatrix) -> f64 {
        u.t_matmul(u)
            .unwrap()
            .sub(&DenseMatrix::identity(u.cols()))
            .unwrap()
            .frobenius_norm()
    }

    #[test]
    fn diagonal_input() {
        let eig = sym_eig(&DenseMatrix::from_diag(&[3.0, 1.0])).unwrap();
        assert_eq!(eig.values, vec![3.0, 1.0]);
        assert!(
            eig.vectors
                .sub(&DenseMatrix::identity(2))
                .unwrap()
                .max_abs()
                < 1e-15
        );
    }

    #[test]
    fn classic_two_by_two() {
        let a = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let eig = sym_eig(&a).unwrap();
        assert!((eig.values[0] - 3.0).abs() < 1e-14);
        assert!((eig.values[1] - 1.0).abs() < 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let u0 = eig.vectors.col(0);
        let u1 = eig.vectors.col(1);
        assert!((u0[0].abs() - h).abs() < 1e-14 && (u0[0] - u0[1]).abs() < 1e-14);
        assert!((u1[0].abs() - h).abs() < 1e-14 && (u1[0] + u1[1]).abs() < 1e-14);
    }

    #[test]
    fn random_eight_by_eight_reconstructs() {
        let a = random_symmetric(8, 1);
        let eig = sym_eig(&a).unwrap();
        let res = eig.reconstruct().sub(&a).unwrap().frobenius_norm();
        assert!(res <= 1e-10 * a.frobenius_norm(), "residual {res}");
        assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn reconstruction_and_orthogonality_up_to_64() {
        for (n, seed) in [(1, 3), (2, 4), (5, 5), (17, 6), (33, 7), (64, 8)] {
            let a = random_symmetric(n, seed);
            let eig = sym_eig(&a).unwrap();
            let scale = a.frobenius_norm();
            assert!(eig.reconstruct().sub(&a).unwrap().frobenius_norm() <= 1e-8 * scale);
            assert!(orthogonality_residual(&eig.vectors) <= 1e-8 * (n as f64).sqrt());
            assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn repeated_and_zero_eigenvalues() {
        let eig = sym_eig(&DenseMatrix::zeros(4, 4)).unwrap();
        assert_eq!(eig.values, vec![0.0; 4]);
        let eig = sym_eig(&DenseMatrix::identity(5).scaled(2.0)).unwrap();
        assert!(eig.values.iter().all(|&l| (l - 2.0).abs() < 1e-14));
    }

    #[test]
    fn rejects_bad_input() {
        let rect = DenseMatrix::zeros(2, 3);
        assert!(matches!(sym_eig(&rect), Err(Error::Dimension(_))));
        let asym = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(sym_eig(&asym), Err(Error::Asymmetric { .. })));
    }

    #[test]
    fn fractional_powers() {
        let a = DenseMatrix::from_diag(&[4.0, 9.0]);
        let half = spd_power(&a, 0.5).unwrap();
        assert!(
            half.sub(&DenseMatrix::from_diag(&[2.0, 3.0]))
                .unwrap()
                .max_abs()
                < 1e-14
        );

        let b = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(spd_power(&b, 0.0).unwrap(), DenseMatrix::identity(2));
        assert!(spd_power(&b, 1.0).unwrap().sub(&b).unwrap().max_abs() < 1e-14);

        // inverse square root from the eigenpairs (3, (1,1)/√2) and (1, (1,-1)/√2)
        let s3 = 3f64.powf(-0.5);
        let expected = DenseMatrix::from_rows(&[
            vec![0.5 * (s3 + 1.0), 0.5 * (s3 - 1.0)],
            vec![0.5 * (s3 - 1.0), 0.5 * (s3 + 1.0)],
        ])
        .unwrap();
        let got = spd_power(&b, -0.5).unwrap();
        assert!(got.sub(&expected).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn power_of_singular_matrix_fails() {
        let a = DenseMatrix::from_diag(&[1.0, 0.0]);
        assert!(matches!(spd_power(&a, 0.5), Err(Error::Singular { .. })));
        let a = DenseMatrix::from_diag(&[1.0, -1.0]);
        assert!(matches!(spd_power(&a, 0.5), Err(Error::Singular { .. })));
    }

    #[test]
    fn group_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = DenseMatrix::from_fn(6, 10, |_, _| rng.random_range(-1.0..1.0));
        let mut a = x.gram();
        for i in 0..6 {
            a[(i, i)] += 0.5;
        }
        let exps = [-0.5, 0.5, 1.0];
        for &p in &exps {
            for &q in &exps {
                let lhs = spd_power(&a, p)
                    .unwrap()
                    .matmul(&spd_power(&a, q).unwrap())
                    .unwrap();
                let rhs = spd_power(&a, p + q).unwrap();
                let err = lhs.sub(&rhs).unwrap().frobenius_norm();
                assert!(err <= 1e-7 * rhs.frobenius_norm(), "p={p} q={q} err={err}");
            }
        }
        let root = spd_power(&a, 0.5).unwrap();
        let back = spd_power(&root, 2.0).unwrap();
        assert!(back.sub(&a).unwrap().frobenius_norm() <= 1e-8 * a.frobenius_norm());
    }
}
