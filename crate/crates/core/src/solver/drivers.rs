use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{extrapolation_next, project_box, Problem, SolverKind, Weights};
use crate::error::{Error, Result};
use crate::linalg::{svd, DenseMatrix};

/// Abort once the objective exceeds this multiple of its starting value.
const DIVERGENCE_FACTOR: f64 = 1e6;

/// Outer stopping rule: relative objective change below `tol`, or
/// `max_iter` iterations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            tol: 1e-5,
            max_iter: 100,
        }
    }
}

/// Stopping rule for the inner APG loop of exact MM.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerStop {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for InnerStop {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 500,
        }
    }
}

/// Starting point of a solve.
#[derive(Clone, Debug)]
pub enum Init {
    /// I.i.d. uniform entries on `[0, 1)` from the given seed.
    Uniform(u64),
    /// Explicit raster-order matrix.
    Given(DenseMatrix),
}

impl Init {
    fn materialize(&self, problem: &Problem) -> Result<DenseMatrix> {
        match self {
            Init::Uniform(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let x = DenseMatrix::from_fn(problem.bands(), problem.pixels(), |_, _| {
                    rng.random::<f64>()
                });
                problem.to_patch_order(&x)
            }
            Init::Given(x) => problem.to_patch_order(x),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    MaxIter,
}

/// Result of a solver run.
#[derive(Clone, Debug)]
pub struct SolveReport {
    /// Estimate in raster order.
    pub x_est: DenseMatrix,
    pub iterations: usize,
    pub final_objective: f64,
    /// `f(X^0), …, f(X^k)`; length `iterations + 1`.
    pub objective_trace: Vec<f64>,
    /// Step size `1/L` of each iteration; entry 0 (the start) is 0.
    pub step_sizes: Vec<f64>,
    /// Milliseconds elapsed at each trace entry.
    pub wall_ms: Vec<f64>,
    /// Cumulative gradient steps taken at each trace entry. Equal to the
    /// iteration index except for exact MM, which counts inner steps.
    pub gradient_steps: Vec<usize>,
    pub wall_time: f64,
    pub stop_reason: StopReason,
}

impl SolveReport {
    /// Gradient steps needed before the objective first comes within
    /// `rel` of `target`, if it ever does.
    pub fn steps_to_reach(&self, target: f64, rel: f64) -> Option<usize> {
        let bound = target + rel * target.abs();
        self.objective_trace
            .iter()
            .position(|&f| f <= bound)
            .map(|k| self.gradient_steps[k])
    }
}

/// Iterate state shared by the accelerated schemes.
#[derive(Clone, Debug)]
pub struct SolverState {
    pub x_k: DenseMatrix,
    pub x_km1: DenseMatrix,
    pub xi_k: f64,
    pub k: usize,
    pub objective_trace: Vec<f64>,
    pub weights: Option<Weights>,
}

impl SolverState {
    fn new(x0: DenseMatrix, f0: f64) -> Self {
        Self {
            x_km1: x0.clone(),
            x_k: x0,
            xi_k: 0.0,
            k: 0,
            objective_trace: vec![f0],
            weights: None,
        }
    }

    /// Advances the extrapolation sequence and returns
    /// `Z = X^k + α_k (X^k − X^{k−1})`.
    fn extrapolate(&mut self, accelerate: bool) -> DenseMatrix {
        let (xi, alpha) = extrapolation_next(self.xi_k);
        self.xi_k = xi;
        let mut z = self.x_k.clone();
        if accelerate && alpha != 0.0 {
            let diff = self.x_k.sub(&self.x_km1).expect("same shape");
            z.axpy(alpha, &diff);
        }
        z
    }

    fn accept(&mut self, x: DenseMatrix, f: f64) {
        self.x_km1 = std::mem::replace(&mut self.x_k, x);
        self.objective_trace.push(f);
        self.k += 1;
    }
}

// Shared bookkeeping for a run: trace, timing and stop tests.
struct Recorder {
    start: Instant,
    f0: f64,
    trace: Vec<f64>,
    steps: Vec<f64>,
    wall: Vec<f64>,
    grads: Vec<usize>,
}

impl Recorder {
    fn new(f0: f64) -> Result<Self> {
        if !f0.is_finite() {
            return Err(Error::NonFinite("initial objective".into()));
        }
        Ok(Self {
            start: Instant::now(),
            f0,
            trace: vec![f0],
            steps: vec![0.0],
            wall: vec![0.0],
            grads: vec![0],
        })
    }

    fn elapsed_ms(&self) -> f64 {
        self.start.elapsed().as_secs_f64() * 1e3
    }

    /// Records one iteration and reports whether the tolerance was met.
    fn push(&mut self, f: f64, step: f64, grad_steps: usize, tol: f64) -> Result<bool> {
        let prev = *self.trace.last().expect("nonempty");
        self.trace.push(f);
        self.steps.push(step);
        self.wall.push(self.elapsed_ms());
        self.grads
            .push(self.grads.last().expect("nonempty") + grad_steps);
        if !f.is_finite() || f > DIVERGENCE_FACTOR * self.f0.abs().max(f64::MIN_POSITIVE) {
            return Err(Error::Divergence {
                iteration: self.trace.len() - 1,
                objective: f,
                trace: self.trace.clone(),
            });
        }
        Ok((f - prev).abs() / prev.abs().max(1e-30) < tol)
    }

    fn finish(
        self,
        problem: &Problem,
        x: &DenseMatrix,
        stop_reason: StopReason,
    ) -> Result<SolveReport> {
        let wall_time = self.start.elapsed().as_secs_f64();
        Ok(SolveReport {
            x_est: problem.to_raster(x)?,
            iterations: self.trace.len() - 1,
            final_objective: *self.trace.last().expect("nonempty"),
            objective_trace: self.trace,
            step_sizes: self.steps,
            wall_ms: self.wall,
            gradient_steps: self.grads,
            wall_time,
            stop_reason,
        })
    }
}

fn inexact_mm(
    problem: &Problem,
    init: &Init,
    stop: StopRule,
    accelerate: bool,
) -> Result<SolveReport> {
    let x0 = init.materialize(problem)?;
    let f0 = problem.objective(&x0)?;
    let mut rec = Recorder::new(f0)?;
    let mut state = SolverState::new(x0, f0);
    let mut warm = None;
    let mut reason = StopReason::MaxIter;
    while state.k < stop.max_iter {
        let z = state.extrapolate(accelerate);
        let weights = problem.weights(&z)?;
        let grad = problem.majorant_gradient(&z, &weights)?;
        let l = problem.lipschitz_warm(&weights, &mut warm)?;
        let mut next = z;
        next.axpy(-1.0 / l, &grad);
        project_box(&mut next);
        let f = problem.objective(&next)?;
        state.weights = Some(weights);
        state.accept(next, f);
        if rec.push(f, 1.0 / l, 1, stop.tol)? {
            reason = StopReason::Tolerance;
            break;
        }
    }
    rec.finish(problem, &state.x_k, reason)
}

/// Inexact MM with one extrapolated projected-gradient step per majorant.
pub fn gloria_solve(problem: &Problem, init: &Init, stop: StopRule) -> Result<SolveReport> {
    inexact_mm(problem, init, stop, true)
}

/// Inexact MM with plain projected-gradient steps (`α_k = 0`).
pub fn nominal_pg_solve(problem: &Problem, init: &Init, stop: StopRule) -> Result<SolveReport> {
    inexact_mm(problem, init, stop, false)
}

// Minimizes the majorant built at `x` over the box by APG; returns the best
// iterate seen (never worse than `x` itself) and the number of steps taken.
fn solve_majorant(
    problem: &Problem,
    x: &DenseMatrix,
    weights: &Weights,
    l: f64,
    inner: InnerStop,
) -> Result<(DenseMatrix, usize)> {
    let g0 = problem.majorant_value(x, weights)?;
    let mut best = (x.clone(), g0);
    let mut state = SolverState::new(x.clone(), g0);
    let mut prev = g0;
    while state.k < inner.max_iter {
        let z = state.extrapolate(true);
        let grad = problem.majorant_gradient(&z, weights)?;
        let mut next = z;
        next.axpy(-1.0 / l, &grad);
        project_box(&mut next);
        let g = problem.majorant_value(&next, weights)?;
        if !g.is_finite() {
            return Err(Error::NonFinite("majorant value".into()));
        }
        if g < best.1 {
            best = (next.clone(), g);
        }
        state.accept(next, g);
        if (g - prev).abs() / prev.abs().max(1e-30) < inner.tol {
            break;
        }
        prev = g;
    }
    Ok((best.0, state.k))
}

/// Exact MM: each majorant is minimized by an inner APG loop before the
/// weights are refreshed.
pub fn exact_mm_solve(
    problem: &Problem,
    init: &Init,
    stop: StopRule,
    inner: InnerStop,
) -> Result<SolveReport> {
    let mut x = init.materialize(problem)?;
    let mut rec = Recorder::new(problem.objective(&x)?)?;
    let mut warm = None;
    let mut reason = StopReason::MaxIter;
    for _ in 0..stop.max_iter {
        let weights = problem.weights(&x)?;
        let l = problem.lipschitz_warm(&weights, &mut warm)?;
        let (next, steps) = solve_majorant(problem, &x, &weights, l, inner)?;
        x = next;
        let f = problem.objective(&x)?;
        if rec.push(f, 1.0 / l, steps, stop.tol)? {
            reason = StopReason::Tolerance;
            break;
        }
    }
    rec.finish(problem, &x, reason)
}

/// Singular value soft-thresholding; returns the shrunk matrix and its
/// nuclear norm.
pub fn svt(x: &DenseMatrix, threshold: f64) -> Result<(DenseMatrix, f64)> {
    let dec = svd(x)?;
    let shrunk: f64 = dec
        .singular_values
        .iter()
        .map(|s| (s - threshold).max(0.0))
        .sum();
    Ok((dec.reconstruct_with(|s| (s - threshold).max(0.0)), shrunk))
}

/// Nuclear-norm baseline: accelerated proximal gradient on
/// `ℓ(X) + γ‖X‖_*` without a box constraint. Regularization weights stored
/// in `problem` are ignored.
pub fn nnm_solve(
    problem: &Problem,
    gamma: f64,
    init: &Init,
    stop: StopRule,
) -> Result<SolveReport> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::config(format!("NNM needs gamma > 0, got {gamma}")));
    }
    let l = problem.lambda_ftf() + problem.lambda_gg();
    let x0 = init.materialize(problem)?;
    let f0 = problem.loss(&x0)? + gamma * svd(&x0)?.singular_values.iter().sum::<f64>();
    let mut rec = Recorder::new(f0)?;
    let mut state = SolverState::new(x0, f0);
    let mut reason = StopReason::MaxIter;
    while state.k < stop.max_iter {
        let mut z = state.extrapolate(true);
        let grad = problem.grad_loss(&z)?;
        z.axpy(-1.0 / l, &grad);
        let (next, nuclear) = svt(&z, gamma / l)?;
        let f = problem.loss(&next)? + gamma * nuclear;
        state.accept(next, f);
        if rec.push(f, 1.0 / l, 1, stop.tol)? {
            reason = StopReason::Tolerance;
            break;
        }
    }
    rec.finish(problem, &state.x_k, reason)
}

/// First-order optimality residual of `x` (raster order) for
/// `min ℓ(X) + γ‖X‖_*`.
///
/// With `X = U_r Σ V_rᵀ` and `S = −∇ℓ(X)/γ`, optimality requires
/// `U_rᵀ S V_r = I`, `U_rᵀ S (I − V_rV_rᵀ) = 0`, `(I − U_rU_rᵀ) S V_r = 0`
/// and `‖(I − U_rU_rᵀ) S (I − V_rV_rᵀ)‖₂ ≤ 1`. Returns the sum of the
/// Frobenius violations plus the spectral-norm excess.
pub fn nnm_optimality_residual(problem: &Problem, gamma: f64, x: &DenseMatrix) -> Result<f64> {
    let xp = problem.to_patch_order(x)?;
    let mut s = problem.grad_loss(&xp)?;
    s.scale(-1.0 / gamma);
    let dec = svd(&xp)?;
    let cutoff = 1e-10 * dec.singular_values.first().copied().unwrap_or(0.0).max(1.0);
    let r = dec.singular_values.iter().filter(|&&v| v > cutoff).count();
    let (m, n) = xp.shape();
    let u = DenseMatrix::from_fn(m, r.max(1), |i, j| if j < r { dec.u[(i, j)] } else { 0.0 });
    let v = DenseMatrix::from_fn(n, r.max(1), |i, j| if j < r { dec.v[(i, j)] } else { 0.0 });
    // S V_r and U_rᵀ S
    let sv = s.matmul(&v)?;
    let uts = u.t_matmul(&s)?;
    let core = u.t_matmul(&sv)?;
    let mut eye = DenseMatrix::zeros(core.rows(), core.cols());
    for k in 0..r {
        eye[(k, k)] = 1.0;
    }
    let core_err = core.sub(&eye)?.frobenius_norm();
    // U_rᵀ S (I − V V ᵀ) = U_rᵀS − (U_rᵀ S V) Vᵀ
    let left = uts.sub(&core.matmul(&v.transpose())?)?.frobenius_norm();
    // (I − U Uᵀ) S V = SV − U (Uᵀ S V)
    let right = sv.sub(&u.matmul(&core)?)?.frobenius_norm();
    // (I − UUᵀ) S (I − VVᵀ)
    let mut w = s.sub(&u.matmul(&uts)?)?;
    let wv = w.matmul(&v)?;
    w = w.sub(&wv.matmul(&v.transpose())?)?;
    let spectral = svd(&w)?.singular_values.first().copied().unwrap_or(0.0);
    Ok(core_err + left + right + (spectral - 1.0).max(0.0))
}

/// Dispatches to the solver named by `kind`. `gamma` is only used by NNM.
pub fn solve(
    problem: &Problem,
    kind: SolverKind,
    init: &Init,
    stop: StopRule,
    inner: InnerStop,
    nnm_gamma: f64,
) -> Result<SolveReport> {
    match kind {
        SolverKind::Gloria => gloria_solve(problem, init, stop),
        SolverKind::NominalPg => nominal_pg_solve(problem, init, stop),
        SolverKind::ExactMm => exact_mm_solve(problem, init, stop, inner),
        SolverKind::Nnm => nnm_solve(problem, nnm_gamma, init, stop),
    }
}
