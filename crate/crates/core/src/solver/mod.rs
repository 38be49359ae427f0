//! Global-local low-rank fusion: the objective, its iteratively reweighted
//! quadratic majorant and the solvers built on it.
//!
//! All matrices handled by [`Problem`] are in patch order (see
//! [`crate::patching`]); [`Problem::to_patch_order`] and
//! [`Problem::to_raster`] convert at the boundary.

mod config;
mod drivers;

pub use config::{default_gamma, write_trace_csv, SolverConfig, SolverKind};
pub use drivers::{
    exact_mm_solve, gloria_solve, nnm_optimality_residual, nnm_solve, nominal_pg_solve, solve, svt,
    Init, InnerStop, SolveReport, SolverState, StopReason, StopRule,
};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::{HsImage, SpatialResponse, SpectralResponse};
use crate::linalg::{
    dot, gemm_into, gram_of_cols, lambda_max, lambda_max_gram, lambda_max_warm, sparse_apply_right,
    sparse_apply_right_t, sym_eig, sym_eigenvalues, DenseMatrix, SparseMatrix,
};
use crate::patching::{from_patch_order, to_patch_order, PatchLayout};
use crate::regularizer::{weight_from_gram, SchattenParams, WeightMatrix};

/// Relative inflation applied to the Lipschitz bound so that power-iteration
/// error can never make the step too long.
pub const LIPSCHITZ_SAFETY: f64 = 1.0 + 1e-9;

/// `γ_0 = … = γ_P = gamma`, optionally overriding the global weight.
pub fn uniform_gammas(gamma: f64, patches: usize, global: Option<f64>) -> Vec<f64> {
    let mut g = vec![gamma; patches + 1];
    if let Some(g0) = global {
        g[0] = g0;
    }
    g
}

/// A fusion instance `Y_M = F X + V_M`, `Y_H = X G + V_H` with global and
/// per-patch smooth Schatten-p regularization.
#[derive(Clone, Debug)]
pub struct Problem {
    y_m: DenseMatrix,
    y_h: DenseMatrix,
    f: DenseMatrix,
    g: SparseMatrix,
    layout: PatchLayout,
    params: SchattenParams,
    gammas: Vec<f64>,
    ftf: DenseMatrix,
    fty: DenseMatrix,
    yhgt: DenseMatrix,
    lambda_ftf: f64,
    lambda_gg: f64,
}

/// Weight matrices `W_0, …, W_P` evaluated at a reference point, with the
/// blockwise curvature `p(γ_0 W_0 + γ_i W_i)` and `φ` values they imply.
#[derive(Clone, Debug)]
pub struct Weights {
    pub global: WeightMatrix,
    pub local: Vec<WeightMatrix>,
    /// `φ(X̄_0)` followed by `φ(X̄_i)`.
    pub phi: Vec<f64>,
    combined: Vec<DenseMatrix>,
}

impl Weights {
    /// `p(γ_0 W_0 + γ_i W_i)`, the curvature applied to patch `i`.
    pub fn combined(&self, i: usize) -> &DenseMatrix {
        &self.combined[i]
    }
}

impl Problem {
    /// Builds a problem from raster-order observations. `gammas` holds
    /// `γ_0` (global) followed by one weight per patch.
    pub fn new(
        y_m: &DenseMatrix,
        y_h: &DenseMatrix,
        f: &DenseMatrix,
        g: &SparseMatrix,
        layout: PatchLayout,
        params: SchattenParams,
        gammas: Vec<f64>,
    ) -> Result<Self> {
        params.validate()?;
        let (mm, m) = f.shape();
        let l = layout.pixels();
        if y_m.shape() != (mm, l) {
            return Err(Error::dim(format!(
                "Y_M is {}x{}, expected {mm}x{l}",
                y_m.rows(),
                y_m.cols()
            )));
        }
        if g.rows() != l {
            return Err(Error::dim(format!(
                "G has {} rows for {l} pixels",
                g.rows()
            )));
        }
        if y_h.shape() != (m, g.cols()) {
            return Err(Error::dim(format!(
                "Y_H is {}x{}, expected {m}x{}",
                y_h.rows(),
                y_h.cols(),
                g.cols()
            )));
        }
        if gammas.len() != layout.len() + 1 {
            return Err(Error::config(format!(
                "{} regularization weights for {} patches",
                gammas.len(),
                layout.len()
            )));
        }
        if gammas.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::config(
                "regularization weights must be finite and ≥ 0",
            ));
        }
        let y_m = to_patch_order(y_m, &layout)?;
        let g = g.permute_rows(layout.forward())?;
        let ftf = f.t_matmul(f)?;
        let fty = f.t_matmul(&y_m)?;
        let yhgt = sparse_apply_right_t(y_h, &g)?;
        let lambda_ftf = lambda_max(&ftf)?;
        let lambda_gg = lambda_max_gram(&g)?;
        Ok(Self {
            y_m,
            y_h: y_h.clone(),
            f: f.clone(),
            g,
            layout,
            params,
            gammas,
            ftf,
            fty,
            yhgt,
            lambda_ftf,
            lambda_gg,
        })
    }

    /// Convenience constructor from simulated observations.
    pub fn from_observations(
        y_m: &HsImage,
        y_h: &HsImage,
        f: &SpectralResponse,
        g: &SpatialResponse,
        layout: PatchLayout,
        params: SchattenParams,
        gammas: Vec<f64>,
    ) -> Result<Self> {
        if (y_m.width(), y_m.height()) != (layout.width(), layout.height()) {
            return Err(Error::dim("layout does not match the MS image"));
        }
        Self::new(
            y_m.matrix(),
            y_h.matrix(),
            f.matrix(),
            g.matrix(),
            layout,
            params,
            gammas,
        )
    }

    /// Number of hyperspectral bands `M`.
    pub fn bands(&self) -> usize {
        self.f.cols()
    }

    /// Number of high-resolution pixels `L`.
    pub fn pixels(&self) -> usize {
        self.layout.pixels()
    }

    pub fn layout(&self) -> &PatchLayout {
        &self.layout
    }

    pub fn params(&self) -> &SchattenParams {
        &self.params
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn spectral(&self) -> &DenseMatrix {
        &self.f
    }

    /// `G` with rows in patch order.
    pub fn spatial(&self) -> &SparseMatrix {
        &self.g
    }

    /// `Y_M` in patch order.
    pub fn y_m(&self) -> &DenseMatrix {
        &self.y_m
    }

    pub fn y_h(&self) -> &DenseMatrix {
        &self.y_h
    }

    /// `λ_max(FᵀF)`.
    pub fn lambda_ftf(&self) -> f64 {
        self.lambda_ftf
    }

    /// `λ_max(GGᵀ)`, computed once at construction.
    pub fn lambda_gg(&self) -> f64 {
        self.lambda_gg
    }

    /// Same data with different regularization weights.
    pub fn with_gammas(&self, gammas: Vec<f64>) -> Result<Self> {
        if gammas.len() != self.layout.len() + 1 || gammas.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::config("invalid regularization weights"));
        }
        Ok(Self {
            gammas,
            ..self.clone()
        })
    }

    pub fn to_patch_order(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        to_patch_order(x, &self.layout)
    }

    pub fn to_raster(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        from_patch_order(x, &self.layout)
    }

    fn check_x(&self, x: &DenseMatrix) -> Result<()> {
        if x.shape() != (self.bands(), self.pixels()) {
            return Err(Error::dim(format!(
                "X is {}x{}, expected {}x{}",
                x.rows(),
                x.cols(),
                self.bands(),
                self.pixels()
            )));
        }
        Ok(())
    }

    fn fx(&self, x: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.f.rows(), x.cols());
        gemm_into(&self.f, x.as_slice(), x.cols(), out.as_mut_slice());
        out
    }

    /// `ℓ(X) = ½‖Y_M − FX‖² + ½‖Y_H − XG‖²`.
    pub fn loss(&self, x: &DenseMatrix) -> Result<f64> {
        self.check_x(x)?;
        let rm = self.y_m.sub(&self.fx(x))?;
        let rh = self.y_h.sub(&sparse_apply_right(x, &self.g)?)?;
        Ok(0.5 * (rm.frobenius_norm_sq() + rh.frobenius_norm_sq()))
    }

    /// `∇ℓ(X) = FᵀFX − FᵀY_M + XGGᵀ − Y_HGᵀ`.
    pub fn grad_loss(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_x(x)?;
        let xg = sparse_apply_right(x, &self.g)?;
        let mut out = sparse_apply_right_t(&xg, &self.g)?;
        gemm_into(&self.ftf, x.as_slice(), x.cols(), out.as_mut_slice());
        out.axpy(-1.0, &self.fty);
        out.axpy(-1.0, &self.yhgt);
        Ok(out)
    }

    // XᵢXᵢᵀ for every patch, in patch order.
    fn patch_grams(&self, x: &DenseMatrix) -> Vec<DenseMatrix> {
        let m = x.rows();
        (0..self.layout.len())
            .into_par_iter()
            .map(|i| gram_of_cols(m, x.col_block_slice(self.layout.range(i))))
            .collect()
    }

    fn global_gram(grams: &[DenseMatrix]) -> DenseMatrix {
        let mut total = grams[0].clone();
        for g in &grams[1..] {
            total.axpy(1.0, g);
        }
        total
    }

    /// `φ(X_0), φ(X_1), …, φ(X_P)`.
    pub fn phi_values(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        self.check_x(x)?;
        let grams = self.patch_grams(x);
        let global = Self::global_gram(&grams);
        let half = 0.5 * self.params.p;
        let tau = self.params.tau;
        let phi_of = |g: &DenseMatrix| -> Result<f64> {
            Ok(sym_eigenvalues(g)?
                .into_iter()
                .map(|l| (l.max(0.0) + tau).powf(half))
                .sum())
        };
        let mut out = vec![phi_of(&global)?];
        let local = grams.par_iter().map(phi_of).collect::<Result<Vec<_>>>()?;
        out.extend(local);
        Ok(out)
    }

    /// `f(X) = ℓ(X) + Σ_{i=0}^{P} γ_i φ(X_i)`.
    pub fn objective(&self, x: &DenseMatrix) -> Result<f64> {
        let loss = self.loss(x)?;
        let phis = self.phi_values(x)?;
        Ok(loss + dot(&self.gammas, &phis))
    }

    /// Weight matrices at the reference point `z`.
    pub fn weights(&self, z: &DenseMatrix) -> Result<Weights> {
        self.check_x(z)?;
        let grams = self.patch_grams(z);
        let (global, phi0) = weight_from_gram(&Self::global_gram(&grams), &self.params)?;
        let local = grams
            .par_iter()
            .map(|g| weight_from_gram(g, &self.params))
            .collect::<Result<Vec<_>>>()?;
        let p = self.params.p;
        let g0 = self.gammas[0];
        let combined = local
            .par_iter()
            .enumerate()
            .map(|(i, (w, _))| {
                let mut c = global.w.scaled(p * g0);
                c.axpy(p * self.gammas[i + 1], &w.w);
                c
            })
            .collect();
        let mut phi = vec![phi0];
        let mut local_w = Vec::with_capacity(local.len());
        for (w, v) in local {
            phi.push(v);
            local_w.push(w);
        }
        Ok(Weights {
            global,
            local: local_w,
            phi,
            combined,
        })
    }

    fn check_weights(&self, w: &Weights) -> Result<()> {
        if w.local.len() != self.layout.len() || w.global.w.rows() != self.bands() {
            return Err(Error::dim("weights do not match the problem"));
        }
        Ok(())
    }

    /// `∇g_k(X) = ∇ℓ(X) + p(γ_0 W_0 X + [γ_1 W_1 X_1, …, γ_P W_P X_P])`.
    pub fn majorant_gradient(&self, x: &DenseMatrix, weights: &Weights) -> Result<DenseMatrix> {
        self.check_weights(weights)?;
        let mut out = self.grad_loss(x)?;
        for i in 0..self.layout.len() {
            let r = self.layout.range(i);
            let cols = r.len();
            let src = x.col_block_slice(r.clone());
            gemm_into(weights.combined(i), src, cols, out.col_block_slice_mut(r));
        }
        Ok(out)
    }

    /// Majorant `g(X; X̄) = ℓ(X) + Σ γ_i ψ(X_i, W_i(X̄))`, with `weights`
    /// evaluated at `X̄`. Equals `f(X̄)` at `X = X̄` and bounds `f` above.
    pub fn majorant_value(&self, x: &DenseMatrix, weights: &Weights) -> Result<f64> {
        self.check_weights(weights)?;
        let loss = self.loss(x)?;
        let p = self.params.p;
        let tau = self.params.tau;
        // Σ_i ⟨C_i X_i, X_i⟩ = Σ_i pγ_i tr(W_i X_i X_iᵀ), including the global term
        let quad: f64 = (0..self.layout.len())
            .into_par_iter()
            .map(|i| {
                let r = self.layout.range(i);
                let cols = r.len();
                let src = x.col_block_slice(r);
                let mut cx = vec![0.0; src.len()];
                gemm_into(weights.combined(i), src, cols, &mut cx);
                dot(&cx, src)
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum();
        let mut constant = self.gammas[0]
            * (0.5 * p * tau * weights.global.w.trace() + 0.5 * (2.0 - p) * weights.phi[0]);
        for (i, w) in weights.local.iter().enumerate() {
            constant += self.gammas[i + 1]
                * (0.5 * p * tau * w.w.trace() + 0.5 * (2.0 - p) * weights.phi[i + 1]);
        }
        Ok(loss + 0.5 * quad + constant)
    }

    /// Gradient of the objective, `∇f(X) = ∇g(X; X)`.
    pub fn objective_gradient(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let w = self.weights(x)?;
        self.majorant_gradient(x, &w)
    }

    /// `L = λ_max(FᵀF + pγ_0W_0) + λ_max(GGᵀ) + p max_i γ_i λ_max(W_i)`.
    pub fn lipschitz(&self, weights: &Weights) -> Result<f64> {
        self.lipschitz_warm(weights, &mut None)
    }

    /// As [`Problem::lipschitz`], warm-starting the power iteration from
    /// `start` and storing the new eigenvector there.
    pub fn lipschitz_warm(&self, weights: &Weights, start: &mut Option<Vec<f64>>) -> Result<f64> {
        self.check_weights(weights)?;
        let p = self.params.p;
        let mut a = self.ftf.clone();
        a.axpy(p * self.gammas[0], &weights.global.w);
        a.symmetrize();
        let top = match lambda_max_warm(&a, start.as_deref()) {
            Ok((l, v)) => {
                *start = Some(v);
                l
            }
            Err(_) => {
                *start = None;
                sym_eig(&a)?.max()
            }
        };
        let local = weights
            .local
            .iter()
            .zip(&self.gammas[1..])
            .map(|(w, g)| g * w.lambda_max_w)
            .fold(0.0, f64::max);
        Ok(LIPSCHITZ_SAFETY * (top + self.lambda_gg + p * local))
    }

    /// `‖X − Π(X − ∇f(X)/L)‖_F / ‖X‖_F` with `L` the Lipschitz bound at `X`.
    pub fn projected_gradient_residual(&self, x: &DenseMatrix) -> Result<f64> {
        let w = self.weights(x)?;
        let grad = self.majorant_gradient(x, &w)?;
        let l = self.lipschitz(&w)?;
        let mut step = x.clone();
        step.axpy(-1.0 / l, &grad);
        project_box(&mut step);
        Ok(step.sub(x)?.frobenius_norm() / x.frobenius_norm().max(f64::MIN_POSITIVE))
    }
}

/// Clips every entry to `[0, 1]` in place.
pub fn project_box(x: &mut DenseMatrix) {
    for v in x.as_mut_slice() {
        *v = v.clamp(0.0, 1.0);
    }
}

/// Returns the clipped copy of `x`.
pub fn projected(x: &DenseMatrix) -> DenseMatrix {
    let mut out = x.clone();
    project_box(&mut out);
    out
}

/// One step of `ξ_j = (1 + √(1 + 4ξ_{j−1}²)) / 2`, `α_j = (ξ_{j−1} − 1) / ξ_j`.
pub fn extrapolation_next(xi_prev: f64) -> (f64, f64) {
    let xi = 0.5 * (1.0 + (1.0 + 4.0 * xi_prev * xi_prev).sqrt());
    (xi, (xi_prev - 1.0) / xi)
}
