use crate::error::{Error, Result};
use crate::linalg::dense::{dot, DenseMatrix};
use crate::linalg::eig::check_symmetric;
use crate::linalg::sparse::{sparse_apply_right, sparse_apply_right_t, SparseMatrix};

pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITER: usize = 10_000;

/// Largest eigenvalue of a symmetric PSD operator by power iteration.
///
/// The Rayleigh quotient increases geometrically toward `λ_max`; iteration
/// stops once the remaining tail of that geometric sequence (estimated from
/// the ratio of successive increments) is below `POWER_TOL` relative and the
/// eigen-residual `‖Av − ρv‖` is below `√POWER_TOL · ρ`. The default start
/// vector is all ones; if the operator annihilates it, a fixed perturbed start
/// is used instead.
pub fn power_iteration(
    n: usize,
    mut apply: impl FnMut(&[f64], &mut [f64]),
    start: Option<&[f64]>,
) -> Result<(f64, Vec<f64>)> {
    let primary = match start {
        Some(s) if s.len() == n && s.iter().any(|&x| x != 0.0) => s.to_vec(),
        _ => vec![1.0; n],
    };
    let fallback: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * ((i as f64) * 1.618_033_988_7 + 0.3).sin())
        .collect();

    for mut v in [primary, fallback] {
        normalize(&mut v);
        let mut w = vec![0.0; n];
        apply(&v, &mut w);
        if norm(&w) == 0.0 {
            continue;
        }
        let mut rho = dot(&v, &w);
        let mut prev_delta = f64::INFINITY;
        for iter in 1..=POWER_MAX_ITER {
            v.copy_from_slice(&w);
            let wn = normalize(&mut v);
            if wn == 0.0 {
                return Ok((0.0, v));
            }
            apply(&v, &mut w);
            let next = dot(&v, &w);
            let residual = w
                .iter()
                .zip(&v)
                .map(|(wi, vi)| (wi - next * vi).powi(2))
                .sum::<f64>()
                .sqrt();
            let delta = (next - rho).abs();
            let ratio = if prev_delta.is_finite() && prev_delta > 0.0 {
                (delta / prev_delta).min(0.999_999)
            } else {
                0.0
            };
            let tail = delta * (1.0 + ratio / (1.0 - ratio));
            let settled = tail <= POWER_TOL * next.abs();
            prev_delta = delta;
            rho = next;
            if settled && residual <= POWER_TOL.sqrt() * rho.abs() {
                return Ok((rho, v));
            }
            if iter == POWER_MAX_ITER {
                return Err(Error::Convergence { iterations: iter });
            }
        }
    }
    // operator annihilates two generic vectors: treat as the zero operator
    Ok((0.0, vec![0.0; n]))
}

/// Largest eigenvalue of a dense symmetric PSD matrix.
pub fn lambda_max(a: &DenseMatrix) -> Result<f64> {
    lambda_max_warm(a, None).map(|(l, _)| l)
}

/// As [`lambda_max`], starting from `start` and returning the eigenvector so
/// later calls can warm-start.
pub fn lambda_max_warm(a: &DenseMatrix, start: Option<&[f64]>) -> Result<(f64, Vec<f64>)> {
    check_symmetric(a)?;
    let n = a.rows();
    power_iteration(
        n,
        |v, out| {
            out.iter_mut().for_each(|o| *o = 0.0);
            for (j, &vj) in v.iter().enumerate() {
                if vj != 0.0 {
                    for (o, aij) in out.iter_mut().zip(a.col(j)) {
                        *o += aij * vj;
                    }
                }
            }
        },
        start,
    )
}

/// `λ_max(G Gᵀ)`, computed on the smaller `Gᵀ G` side without forming either
/// product.
pub fn lambda_max_gram(g: &SparseMatrix) -> Result<f64> {
    let n = g.cols();
    power_iteration(
        n,
        |v, out| {
            let row = DenseMatrix::from_col_major(1, n, v.to_vec()).expect("finite probe");
            let gv = sparse_apply_right_t(&row, g).expect("shape");
            let gtgv = sparse_apply_right(&gv, g).expect("shape");
            out.copy_from_slice(gtgv.as_slice());
        },
        None,
    )
    .map(|(l, _)| l)
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}
