//! Synthetic ground-truth scenes: per-patch linear mixtures `X_i = A_i S_i`
//! with patch-level endmember variability and sparse local activity.

use std::f64::consts::PI;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::HsImage;
use crate::linalg::{dot, DenseMatrix};
use crate::patching::{from_patch_order, random_rect_layout, PatchLayout};

/// Largest allowed cosine similarity between two base endmembers.
pub const MAX_ENDMEMBER_COSINE: f64 = 0.995;
const ENDMEMBER_RETRIES: usize = 1000;

// Stream ids keep the generators of different stages independent.
const STREAM_ENDMEMBERS: u64 = 0;
const STREAM_EV_BASE: u64 = 1 << 32;
const STREAM_ABUNDANCE_BASE: u64 = 2 << 32;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / (dot(a, a).sqrt() * dot(b, b).sqrt())
}

fn smooth_spectrum(bands: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let m = bands as f64;
    let bumps = rng.random_range(3..=6);
    let mut s = vec![0.0; bands];
    for _ in 0..bumps {
        let centre = rng.random_range(0.0..m);
        let width = rng.random_range(m / 20.0..m / 4.0).max(0.5);
        let amp = rng.random_range(0.2..1.0);
        for (b, v) in s.iter_mut().enumerate() {
            let d = (b as f64 - centre) / width;
            *v += amp * (-0.5 * d * d).exp();
        }
    }
    let peak = s.iter().cloned().fold(0.0, f64::max);
    let target = rng.random_range(0.5..0.9);
    s.iter_mut().for_each(|v| *v *= target / peak);
    s
}

/// `count` smooth spectra in `[0, 0.9]`, each a sum of 3 to 6 Gaussian
/// bumps, with pairwise cosine similarity at most [`MAX_ENDMEMBER_COSINE`].
/// Returns a `bands × count` matrix.
pub fn gen_endmembers(bands: usize, count: usize, seed: u64) -> Result<DenseMatrix> {
    if count == 0 || count >= bands {
        return Err(Error::config(format!(
            "need 0 < endmembers < bands, got {count} and {bands}"
        )));
    }
    let mut rng = stream(seed, STREAM_ENDMEMBERS);
    let mut accepted: Vec<Vec<f64>> = Vec::with_capacity(count);
    while accepted.len() < count {
        let mut found = None;
        for _ in 0..ENDMEMBER_RETRIES {
            let s = smooth_spectrum(bands, &mut rng);
            if accepted
                .iter()
                .all(|a| cosine(a, &s) <= MAX_ENDMEMBER_COSINE)
            {
                found = Some(s);
                break;
            }
        }
        let s = found.ok_or_else(|| {
            Error::Generation(format!(
                "no spectrum with cosine ≤ {MAX_ENDMEMBER_COSINE} after {ENDMEMBER_RETRIES} draws"
            ))
        })?;
        accepted.push(s);
    }
    Ok(DenseMatrix::from_fn(bands, count, |i, j| accepted[j][i]))
}

/// Smooth spectral perturbation profiles `cos(kπ b/(M−1))`, `k = 1, 2`.
fn ev_profiles(bands: usize) -> [Vec<f64>; 2] {
    let denom = (bands.max(2) - 1) as f64;
    [1.0, 2.0].map(|k| {
        (0..bands)
            .map(|b| (k * PI * b as f64 / denom).cos())
            .collect()
    })
}

/// Per-patch endmember variants
/// `clip(a ⊙ (1 + magnitude·(u₁ψ₁ + u₂ψ₂)), 0, 1)` with `u ~ U(−½, ½)²`
/// drawn per patch and endmember. Every variant of endmember `j` lies in
/// the span of `a_j`, `a_j ⊙ ψ₁` and `a_j ⊙ ψ₂` (before clipping).
pub fn apply_ev(
    base: &DenseMatrix,
    patches: usize,
    magnitude: f64,
    seed: u64,
) -> Result<Vec<DenseMatrix>> {
    if !(0.0..=0.5).contains(&magnitude) {
        return Err(Error::config(format!(
            "variation magnitude must lie in [0, 0.5], got {magnitude}"
        )));
    }
    let (m, n) = base.shape();
    let [psi1, psi2] = ev_profiles(m);
    Ok((0..patches)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, STREAM_EV_BASE + i as u64);
            let mut a = base.clone();
            for j in 0..n {
                let u1 = rng.random_range(-0.5..0.5);
                let u2 = rng.random_range(-0.5..0.5);
                for (b, v) in a.col_mut(j).iter_mut().enumerate() {
                    let s = u1 * psi1[b] + u2 * psi2[b];
                    *v = (*v * (1.0 + magnitude * s)).clamp(0.0, 1.0);
                }
            }
            a
        })
        .collect())
}

/// Abundance generation knobs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbundanceConfig {
    /// Smallest number of active endmembers in a patch.
    pub active_min: usize,
    /// Largest number of active endmembers in a patch.
    pub active_max: usize,
    /// Dirichlet concentration.
    pub concentration: f64,
    /// Side of the Gaussian smoothing window in pixels; 1 disables smoothing.
    pub smoothing_window: usize,
}

impl Default for AbundanceConfig {
    fn default() -> Self {
        Self {
            active_min: 1,
            active_max: 2,
            concentration: 1.0,
            smoothing_window: 5,
        }
    }
}

/// Per-patch abundance matrices `S_i` (`N × L_i`, patch raster order) and
/// the active endmembers of each patch.
#[derive(Clone, Debug, PartialEq)]
pub struct AbundanceField {
    pub patches: Vec<DenseMatrix>,
    pub active: Vec<Vec<usize>>,
}

// Normalized Gaussian smoothing of one patch, row by row; each output column
// is a convex combination of input columns.
fn smooth_patch(s: &DenseMatrix, width: usize, height: usize, window: usize) -> DenseMatrix {
    if window <= 1 {
        return s.clone();
    }
    let half = (window / 2) as isize;
    let sigma = window as f64 / 4.0;
    let mut out = DenseMatrix::zeros(s.rows(), s.cols());
    for y in 0..height as isize {
        for x in 0..width as isize {
            let mut total = 0.0;
            let dst = (y as usize) * width + x as usize;
            for dy in -half..=half {
                for dx in -half..=half {
                    let (qx, qy) = (x + dx, y + dy);
                    if qx < 0 || qy < 0 || qx >= width as isize || qy >= height as isize {
                        continue;
                    }
                    let w = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp();
                    total += w;
                    let src = (qy as usize) * width + qx as usize;
                    for r in 0..s.rows() {
                        out[(r, dst)] += w * s[(r, src)];
                    }
                }
            }
            out.col_mut(dst).iter_mut().for_each(|v| *v /= total);
        }
    }
    out
}

/// Dirichlet abundances over a random active set per patch, smoothed within
/// the patch and renormalized onto the simplex.
pub fn gen_abundances(
    layout: &PatchLayout,
    endmembers: usize,
    config: &AbundanceConfig,
    seed: u64,
) -> Result<AbundanceField> {
    let AbundanceConfig {
        active_min,
        active_max,
        concentration,
        smoothing_window,
    } = *config;
    if active_min == 0 || active_min > active_max || active_max > endmembers {
        return Err(Error::config(format!(
            "active range {active_min}..={active_max} invalid for {endmembers} endmembers"
        )));
    }
    let gamma = Gamma::new(concentration, 1.0)
        .map_err(|e| Error::config(format!("Dirichlet concentration: {e}")))?;
    let results: Vec<(DenseMatrix, Vec<usize>)> = layout
        .blocks()
        .par_iter()
        .enumerate()
        .map(|(i, block)| {
            let mut rng = stream(seed, STREAM_ABUNDANCE_BASE + i as u64);
            let k = rng.random_range(active_min..=active_max);
            let mut active = sample(&mut rng, endmembers, k).into_vec();
            active.sort_unstable();
            let mut s = DenseMatrix::zeros(endmembers, block.area());
            for c in 0..block.area() {
                let draws: Vec<f64> = (0..k).map(|_| gamma.sample(&mut rng)).collect();
                let total: f64 = draws.iter().sum();
                for (&j, d) in active.iter().zip(&draws) {
                    s[(j, c)] = if total > 0.0 {
                        d / total
                    } else {
                        1.0 / k as f64
                    };
                }
            }
            let mut s = smooth_patch(&s, block.width, block.height, smoothing_window);
            for c in 0..s.cols() {
                let col = s.col_mut(c);
                let total: f64 = col.iter().sum();
                col.iter_mut().for_each(|v| *v /= total);
            }
            (s, active)
        })
        .collect();
    let (patches, active) = results.into_iter().unzip();
    Ok(AbundanceField { patches, active })
}

/// Scene generation parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub bands: usize,
    pub width: usize,
    pub height: usize,
    pub endmembers: usize,
    /// Number of random rectangular patches carrying their own variants.
    pub patches: usize,
    pub ev_magnitude: f64,
    pub abundances: AbundanceConfig,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            bands: 30,
            width: 48,
            height: 48,
            endmembers: 4,
            patches: 16,
            ev_magnitude: 0.1,
            abundances: AbundanceConfig::default(),
        }
    }
}

/// Everything needed to regenerate or interpret a synthetic scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneMetadata {
    pub seed: u64,
    pub config: SceneConfig,
    pub layout: PatchLayout,
    /// Base spectra, one inner vector per endmember.
    pub endmembers: Vec<Vec<f64>>,
    pub active_sets: Vec<Vec<usize>>,
}

impl SceneMetadata {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Clone, Debug)]
pub struct Scene {
    pub image: HsImage,
    pub variants: Vec<DenseMatrix>,
    pub abundances: AbundanceField,
    pub metadata: SceneMetadata,
}

/// Generates `X` with `X_i = A_i S_i` on a random rectangular partition.
pub fn gen_scene(config: &SceneConfig, seed: u64) -> Result<Scene> {
    let layout = random_rect_layout(config.width, config.height, config.patches, seed)?;
    gen_scene_on(config, layout, seed)
}

/// As [`gen_scene`] with an explicit partition.
pub fn gen_scene_on(config: &SceneConfig, layout: PatchLayout, seed: u64) -> Result<Scene> {
    if (layout.width(), layout.height()) != (config.width, config.height) {
        return Err(Error::dim("layout does not match the scene size"));
    }
    let base = gen_endmembers(config.bands, config.endmembers, seed)?;
    let variants = apply_ev(&base, layout.len(), config.ev_magnitude, seed)?;
    let abundances = gen_abundances(&layout, config.endmembers, &config.abundances, seed)?;
    let mut ordered = DenseMatrix::zeros(config.bands, layout.pixels());
    for (i, (a, s)) in variants.iter().zip(&abundances.patches).enumerate() {
        let block = a.matmul(s)?;
        ordered
            .col_block_slice_mut(layout.range(i))
            .copy_from_slice(block.as_slice());
    }
    for v in ordered.as_mut_slice() {
        *v = v.clamp(0.0, 1.0);
    }
    let x = from_patch_order(&ordered, &layout)?;
    let image = HsImage::new(config.width, config.height, x)?;
    let metadata = SceneMetadata {
        seed,
        config: config.clone(),
        layout,
        endmembers: (0..base.cols()).map(|j| base.col(j).to_vec()).collect(),
        active_sets: abundances.active.clone(),
    };
    Ok(Scene {
        image,
        variants,
        abundances,
        metadata,
    })
}
