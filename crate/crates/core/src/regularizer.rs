//! Smooth Schatten-p function `tr((XXᵀ + τI)^{p/2})`, its variational form
//! and the approximate-rank analyzer.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::HsImage;
use crate::linalg::{
    dot, gram_of_cols, spd_power, spd_power_from_eig, sym_eig, sym_eigenvalues, DenseMatrix,
};
use crate::patching::{grid_layout, to_patch_order};

/// Default cumulative-energy threshold for [`approx_rank`].
pub const DEFAULT_ENERGY_THRESHOLD: f64 = 0.9999;

/// Shape parameters `p ∈ (0, 1]` and smoothing `τ > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchattenParams {
    pub p: f64,
    pub tau: f64,
}

impl Default for SchattenParams {
    fn default() -> Self {
        Self { p: 0.5, tau: 1.0 }
    }
}

impl SchattenParams {
    pub fn new(p: f64, tau: f64) -> Result<Self> {
        let params = Self { p, tau };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::config(format!(
                "p must lie in (0, 1], got {}",
                self.p
            )));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::config(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        Ok(())
    }

    /// Exponent `p/2 − 1` of the weight matrix.
    pub fn weight_exponent(&self) -> f64 {
        0.5 * self.p - 1.0
    }

    /// `φ(0) / M = τ^{p/2}`.
    pub fn floor(&self) -> f64 {
        self.tau.powf(0.5 * self.p)
    }
}

/// Minimizer `W = (XXᵀ + τI)^{p/2−1}` of the variational form.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMatrix {
    pub w: DenseMatrix,
    /// `λ_min(XXᵀ) + τ`
    pub lambda_min_shifted: f64,
    /// `λ_max(W) = (λ_min(XXᵀ) + τ)^{p/2−1}`
    pub lambda_max_w: f64,
}

// φ from the nonzero-side Gram eigenvalues, padded to `m` terms.
fn phi_from_gram_eigs(eigs: &[f64], m: usize, params: &SchattenParams) -> f64 {
    let half = 0.5 * params.p;
    let active: f64 = eigs
        .iter()
        .map(|&l| (l.max(0.0) + params.tau).powf(half))
        .sum();
    active + (m - eigs.len()) as f64 * params.floor()
}

/// `φ` of the column-major block `data` with `rows` rows, evaluated on
/// whichever Gram side is smaller.
pub(crate) fn phi_cols(rows: usize, data: &[f64], params: &SchattenParams) -> Result<f64> {
    let cols = data.len() / rows;
    let eigs = if cols < rows {
        let mut g = DenseMatrix::zeros(cols, cols);
        for j in 0..cols {
            let cj = &data[j * rows..(j + 1) * rows];
            for i in 0..=j {
                let v = dot(&data[i * rows..(i + 1) * rows], cj);
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        sym_eigenvalues(&g)?
    } else {
        sym_eigenvalues(&gram_of_cols(rows, data))?
    };
    Ok(phi_from_gram_eigs(&eigs, rows, params))
}

/// `φ_{p,τ}(X) = Σ_{i=1}^{M} (σ_i² + τ)^{p/2}`, where `σ_i = 0` for
/// `i > min(M, L)`.
pub fn phi(x: &DenseMatrix, params: &SchattenParams) -> Result<f64> {
    phi_cols(x.rows(), x.as_slice(), params)
}

/// Variational form `(p/2) tr(W(XXᵀ + τI)) + ((2−p)/2) tr(W^{p/(p−2)})`.
///
/// Bounded below by `φ(X)` for every SPD `W`, with equality at
/// [`weight`]`(X)`.
pub fn psi(x: &DenseMatrix, w: &DenseMatrix, params: &SchattenParams) -> Result<f64> {
    let m = x.rows();
    if w.shape() != (m, m) {
        return Err(Error::dim(format!(
            "{}x{} weight for {m} rows",
            w.rows(),
            w.cols()
        )));
    }
    let p = params.p;
    let mut a = x.gram();
    for i in 0..m {
        a[(i, i)] += params.tau;
    }
    let quad: f64 = w
        .as_slice()
        .iter()
        .zip(a.as_slice())
        .map(|(u, v)| u * v)
        .sum();
    let conj = spd_power(w, p / (p - 2.0))
        .map_err(|e| Error::Model(format!("weight is not positive definite: {e}")))?;
    Ok(0.5 * p * quad + 0.5 * (2.0 - p) * conj.trace())
}

/// Weight matrix and `φ` from the Gram matrix `XXᵀ` of a block.
pub(crate) fn weight_from_gram(
    gram: &DenseMatrix,
    params: &SchattenParams,
) -> Result<(WeightMatrix, f64)> {
    let mut eig = sym_eig(gram)?;
    for l in &mut eig.values {
        *l = l.max(0.0) + params.tau;
    }
    let phi: f64 = eig.values.iter().map(|l| l.powf(0.5 * params.p)).sum();
    let lambda_min_shifted = eig.min();
    let exponent = params.weight_exponent();
    let w = spd_power_from_eig(&eig, exponent)?;
    Ok((
        WeightMatrix {
            w,
            lambda_min_shifted,
            lambda_max_w: lambda_min_shifted.powf(exponent),
        },
        phi,
    ))
}

/// `W* = (XXᵀ + τI)^{p/2−1}`.
pub fn weight(x: &DenseMatrix, params: &SchattenParams) -> Result<WeightMatrix> {
    weight_from_gram(&x.gram(), params).map(|(w, _)| w)
}

fn check_threshold(threshold: f64) -> Result<()> {
    if threshold > 0.0 && threshold <= 1.0 {
        Ok(())
    } else {
        Err(Error::config(format!(
            "energy threshold must lie in (0, 1], got {threshold}"
        )))
    }
}

// σ² of a column block, descending, from the smaller Gram side.
fn squared_singular_values(rows: usize, data: &[f64]) -> Result<Vec<f64>> {
    let cols = data.len() / rows;
    let block = DenseMatrix::from_col_major(rows, cols, data.to_vec())?;
    let g = if cols < rows {
        block.gram_t()
    } else {
        block.gram()
    };
    Ok(sym_eigenvalues(&g)?
        .into_iter()
        .map(|l| l.max(0.0))
        .collect())
}

fn rank_from_energies(energies: &[f64], threshold: f64) -> usize {
    let total: f64 = energies.iter().sum();
    if total <= 0.0 {
        return 0;
    }
    let mut acc = 0.0;
    for (r, e) in energies.iter().enumerate() {
        acc += e;
        if acc / total >= threshold {
            return r + 1;
        }
    }
    energies.len()
}

/// Smallest `r` whose leading `r` squared singular values hold at least
/// `threshold` of the total energy. The zero matrix has rank 0.
pub fn approx_rank(x: &DenseMatrix, threshold: f64) -> Result<usize> {
    check_threshold(threshold)?;
    let energies = squared_singular_values(x.rows(), x.as_slice())?;
    Ok(rank_from_energies(&energies, threshold))
}

/// One row of the local-rank table: a `grid × grid` partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub grid: usize,
    /// Mean pixel count per patch, rounded.
    pub patch_pixels: usize,
    pub mean_rank: f64,
    /// Sample standard deviation across patches (zero for one patch).
    pub std_rank: f64,
    pub global_rank: usize,
}

/// Local approximate ranks of `image` for each `g × g` patch grid in `grids`.
pub fn rank_table(image: &HsImage, grids: &[usize], threshold: f64) -> Result<Vec<RankRow>> {
    check_threshold(threshold)?;
    let x = image.matrix();
    let global_rank = approx_rank(x, threshold)?;
    let mut rows = Vec::with_capacity(grids.len());
    for &g in grids {
        let layout = grid_layout(image.width(), image.height(), g, g)?;
        let ordered = to_patch_order(x, &layout)?;
        let ranks = (0..layout.len())
            .into_par_iter()
            .map(|i| {
                let block = ordered.col_block_slice(layout.range(i));
                squared_singular_values(x.rows(), block)
                    .map(|e| rank_from_energies(&e, threshold) as f64)
            })
            .collect::<Result<Vec<f64>>>()?;
        let n = ranks.len() as f64;
        let mean = ranks.iter().sum::<f64>() / n;
        let std = if ranks.len() > 1 {
            (ranks.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        rows.push(RankRow {
            grid: g,
            patch_pixels: (image.pixels() as f64 / n).round() as usize,
            mean_rank: mean,
            std_rank: std,
            global_rank,
        });
    }
    Ok(rows)
}

pub fn write_rank_table_csv(path: &Path, rows: &[RankRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
