//! Spectral and spatial degradation operators and the Wald-protocol
//! simulation that produces a multispectral / hyperspectral pair from a
//! ground-truth cube.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sparse_apply_right, DenseMatrix, SparseMatrix};

/// A spectral cube flattened to a `bands × (width·height)` matrix whose
/// columns are pixel spectra in raster (row-major) order.
#[derive(Clone, Debug, PartialEq)]
pub struct HsImage {
    width: usize,
    height: usize,
    matrix: DenseMatrix,
}

impl HsImage {
    pub fn new(width: usize, height: usize, matrix: DenseMatrix) -> Result<Self> {
        if width * height != matrix.cols() {
            return Err(Error::dim(format!(
                "{width}x{height} image needs {} pixel columns, got {}",
                width * height,
                matrix.cols()
            )));
        }
        Ok(Self {
            width,
            height,
            matrix,
        })
    }

    pub fn bands(&self) -> usize {
        self.matrix.rows()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> usize {
        self.matrix.cols()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.matrix
    }

    /// Spectrum of the pixel at column `x`, row `y`.
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        self.matrix.col(y * self.width + x)
    }

    pub fn is_reflectance(&self) -> bool {
        self.matrix
            .as_slice()
            .iter()
            .all(|v| (0.0..=1.0).contains(v))
    }
}

/// How synthetic spectral response rows are shaped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SpectralMode {
    /// Contiguous, equal-weight band groups.
    #[default]
    Boxcar,
    /// Gaussian bandpasses centred on each group.
    Gaussian,
}

/// Relative spectral bandpass responses `F` (`ms_bands × hs_bands`), rows
/// nonnegative and summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralResponse {
    matrix: DenseMatrix,
    groups: Vec<Vec<usize>>,
}

impl SpectralResponse {
    /// Validates and row-normalizes a tabulated response.
    pub fn from_matrix(raw: DenseMatrix) -> Result<Self> {
        let (ms, hs) = raw.shape();
        if ms >= hs {
            return Err(Error::Model(format!(
                "multispectral bands ({ms}) must be fewer than hyperspectral bands ({hs})"
            )));
        }
        if raw.as_slice().iter().any(|&v| v < 0.0) {
            return Err(Error::Model("negative spectral response".into()));
        }
        let mut matrix = raw;
        let mut groups = Vec::with_capacity(ms);
        for i in 0..ms {
            let sum: f64 = (0..hs).map(|j| matrix[(i, j)]).sum();
            if sum <= 0.0 {
                return Err(Error::Model(format!("spectral response row {i} is zero")));
            }
            for j in 0..hs {
                matrix[(i, j)] /= sum;
            }
            groups.push((0..hs).filter(|&j| matrix[(i, j)] > 0.0).collect());
        }
        Ok(Self { matrix, groups })
    }

    /// Loads a headerless CSV of `ms_bands` rows by `hs_bands` columns.
    pub fn from_csv(path: &Path) -> Result<Self> {
        Self::from_matrix(crate::io::read_dense_csv(path)?)
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    /// Hyperspectral bands contributing to each multispectral band.
    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn ms_bands(&self) -> usize {
        self.matrix.rows()
    }

    pub fn hs_bands(&self) -> usize {
        self.matrix.cols()
    }
}

/// Synthesizes `F` for `hs_bands → ms_bands`.
pub fn build_spectral_response(
    hs_bands: usize,
    ms_bands: usize,
    mode: SpectralMode,
) -> Result<SpectralResponse> {
    if ms_bands == 0 || ms_bands >= hs_bands {
        return Err(Error::Model(format!(
            "need 0 < ms_bands < hs_bands, got {ms_bands} and {hs_bands}"
        )));
    }
    let edge = |k: usize| k * hs_bands / ms_bands;
    let raw = match mode {
        SpectralMode::Boxcar => DenseMatrix::from_fn(ms_bands, hs_bands, |i, j| {
            if (edge(i)..edge(i + 1)).contains(&j) {
                1.0
            } else {
                0.0
            }
        }),
        SpectralMode::Gaussian => {
            let width = hs_bands as f64 / ms_bands as f64;
            let sigma = 0.5 * width;
            DenseMatrix::from_fn(ms_bands, hs_bands, |i, j| {
                let centre = (edge(i) + edge(i + 1)) as f64 / 2.0 - 0.5;
                let d = j as f64 - centre;
                let w = (-d * d / (2.0 * sigma * sigma)).exp();
                // cut the tails so the band assignment stays local
                if d.abs() <= 1.5 * width {
                    w
                } else {
                    0.0
                }
            })
        }
    };
    SpectralResponse::from_matrix(raw)
}

/// Blur-and-downsample operator `G` (`L × L_h`), applied from the right.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialResponse {
    matrix: SparseMatrix,
    kernel_size: usize,
    variance: f64,
    factor: usize,
    width: usize,
    height: usize,
}

impl SpatialResponse {
    /// Wraps an existing operator, e.g. one read back from disk.
    pub fn from_matrix(matrix: SparseMatrix, width: usize, height: usize) -> Result<Self> {
        if matrix.rows() != width * height {
            return Err(Error::dim(format!(
                "operator has {} rows for a {width}x{height} image",
                matrix.rows()
            )));
        }
        Ok(Self {
            matrix,
            kernel_size: 0,
            variance: 0.0,
            factor: 0,
            width,
            height,
        })
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn factor(&self) -> usize {
        self.factor
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn low_width(&self) -> usize {
        self.width.div_ceil(self.factor.max(1))
    }

    pub fn low_height(&self) -> usize {
        self.height.div_ceil(self.factor.max(1))
    }
}

/// Gaussian point-spread blur of size `kernel_size` (odd) and variance
/// `variance`, sampled every `factor` pixels.
///
/// Low-resolution pixel `(i, j)` is centred on high-resolution pixel
/// `(factor·i + ⌊factor/2⌋, factor·j + ⌊factor/2⌋)`, clamped to the image.
/// Kernel taps falling outside the image are dropped and the remaining
/// weights renormalized, so every column of `G` sums to one.
pub fn build_spatial_response(
    width: usize,
    height: usize,
    kernel_size: usize,
    variance: f64,
    factor: usize,
) -> Result<SpatialResponse> {
    if kernel_size.is_multiple_of(2) {
        return Err(Error::config(format!(
            "kernel size {kernel_size} must be odd"
        )));
    }
    if factor == 0 || factor > width.min(height) {
        return Err(Error::config(format!(
            "downsampling factor {factor} invalid for a {width}x{height} image"
        )));
    }
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::config("kernel variance must be positive"));
    }
    let half = (kernel_size / 2) as isize;
    let low_w = width.div_ceil(factor);
    let low_h = height.div_ceil(factor);
    let mut triplets = Vec::with_capacity(low_w * low_h * kernel_size * kernel_size);
    for li in 0..low_h {
        for lj in 0..low_w {
            let col = li * low_w + lj;
            let cy = (factor * li + factor / 2).min(height - 1) as isize;
            let cx = (factor * lj + factor / 2).min(width - 1) as isize;
            let mut taps = Vec::new();
            for dy in -half..=half {
                for dx in -half..=half {
                    let (y, x) = (cy + dy, cx + dx);
                    if y < 0 || x < 0 || y >= height as isize || x >= width as isize {
                        continue;
                    }
                    let w = (-((dx * dx + dy * dy) as f64) / (2.0 * variance)).exp();
                    taps.push((y as usize * width + x as usize, w));
                }
            }
            let total: f64 = taps.iter().map(|t| t.1).sum();
            triplets.extend(taps.into_iter().map(|(row, w)| (row, col, w / total)));
        }
    }
    Ok(SpatialResponse {
        matrix: SparseMatrix::from_triplets(width * height, low_w * low_h, triplets)?,
        kernel_size,
        variance,
        factor,
        width,
        height,
    })
}

/// Serde adapter writing an infinite SNR as `null` and reading `null` back
/// as `+∞`, since JSON has no infinity.
pub mod snr_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Signal-to-noise ratios (dB) of the two observations; `+∞` means
/// noiseless.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(with = "snr_serde")]
    pub snr_m_db: f64,
    #[serde(with = "snr_serde")]
    pub snr_h_db: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn noiseless() -> Self {
        Self {
            snr_m_db: f64::INFINITY,
            snr_h_db: f64::INFINITY,
            seed: 0,
        }
    }
}

/// Per-element noise variance `‖signal‖² / (n · 10^(snr/10))`.
pub fn noise_variance(signal: &DenseMatrix, snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        return 0.0;
    }
    let n = signal.as_slice().len() as f64;
    signal.frobenius_norm_sq() / (n * 10f64.powf(snr_db / 10.0))
}

fn add_noise(signal: &mut DenseMatrix, snr_db: f64, rng: &mut ChaCha8Rng) {
    let sigma = noise_variance(signal, snr_db).sqrt();
    if sigma == 0.0 {
        return;
    }
    for v in signal.as_mut_slice() {
        let z: f64 = StandardNormal.sample(rng);
        *v += sigma * z;
    }
}

/// `Y_M = F X + V_M`, `Y_H = X G + V_H` with SNR-calibrated i.i.d. Gaussian
/// noise. The multispectral noise is drawn from stream 0 and the
/// hyperspectral noise from stream 1 of a ChaCha8 generator seeded with
/// `noise.seed`.
pub fn degrade(
    x: &HsImage,
    f: &SpectralResponse,
    g: &SpatialResponse,
    noise: &NoiseSpec,
) -> Result<(HsImage, HsImage)> {
    if f.hs_bands() != x.bands() {
        return Err(Error::dim(format!(
            "spectral response expects {} bands, image has {}",
            f.hs_bands(),
            x.bands()
        )));
    }
    if g.width() != x.width() || g.height() != x.height() {
        return Err(Error::dim(format!(
            "spatial response built for {}x{}, image is {}x{}",
            g.width(),
            g.height(),
            x.width(),
            x.height()
        )));
    }
    let mut y_m = f.matrix().matmul(x.matrix())?;
    let mut y_h = sparse_apply_right(x.matrix(), g.matrix())?;

    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    add_noise(&mut y_m, noise.snr_m_db, &mut rng);
    rng.set_stream(1);
    add_noise(&mut y_h, noise.snr_h_db, &mut rng);

    Ok((
        HsImage::new(x.width(), x.height(), y_m)?,
        HsImage::new(g.low_width(), g.low_height(), y_h)?,
    ))
}

/// Degradation settings of the Wald protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaldConfig {
    pub ms_bands: usize,
    pub spectral_mode: SpectralMode,
    pub kernel_size: usize,
    pub variance: f64,
    pub factor: usize,
    #[serde(with = "snr_serde")]
    pub snr_m_db: f64,
    #[serde(with = "snr_serde")]
    pub snr_h_db: f64,
}

impl Default for WaldConfig {
    fn default() -> Self {
        Self {
            ms_bands: 6,
            spectral_mode: SpectralMode::Boxcar,
            kernel_size: 11,
            variance: 1.7 * 1.7,
            factor: 4,
            snr_m_db: 25.0,
            snr_h_db: 25.0,
        }
    }
}

/// The simulated observations together with the exact operators used.
#[derive(Clone, Debug)]
pub struct WaldOutput {
    pub y_m: HsImage,
    pub y_h: HsImage,
    pub f: SpectralResponse,
    pub g: SpatialResponse,
}

pub fn wald_simulate(ground_truth: &HsImage, config: &WaldConfig, seed: u64) -> Result<WaldOutput> {
    let f = build_spectral_response(ground_truth.bands(), config.ms_bands, config.spectral_mode)?;
    wald_simulate_with(ground_truth, f, config, seed)
}

/// As [`wald_simulate`] with a caller-supplied spectral response.
pub fn wald_simulate_with(
    ground_truth: &HsImage,
    f: SpectralResponse,
    config: &WaldConfig,
    seed: u64,
) -> Result<WaldOutput> {
    if !ground_truth.is_reflectance() {
        return Err(Error::Model("ground truth must lie in [0, 1]".into()));
    }
    let g = build_spatial_response(
        ground_truth.width(),
        ground_truth.height(),
        config.kernel_size,
        config.variance,
        config.factor,
    )?;
    let noise = NoiseSpec {
        snr_m_db: config.snr_m_db,
        snr_h_db: config.snr_h_db,
        seed,
    };
    let (y_m, y_h) = degrade(ground_truth, &f, &g, &noise)?;
    Ok(WaldOutput { y_m, y_h, f, g })
}
