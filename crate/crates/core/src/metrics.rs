//! Reconstruction quality: PSNR, SAM, ERGAS and UIQI, plus SAM-map export.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::HsImage;
use crate::linalg::{dot, DenseMatrix};

/// PSNR reported for an exact reconstruction, and the per-band ceiling.
pub const PSNR_SENTINEL_DB: f64 = 300.0;
/// Spectra with a norm at or below this are treated as degenerate by SAM.
pub const SAM_DEGENERATE_NORM: f64 = 1e-12;
pub const DEFAULT_SAM_CAP_DEG: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricOptions {
    /// Use a peak of 1 for every band instead of the reference band maximum.
    pub unit_peak: bool,
    /// Leave degenerate pixels out of the mean SAM instead of counting them
    /// as 0°.
    pub exclude_degenerate: bool,
    /// HS-to-SR resolution ratio used by ERGAS.
    pub resolution_ratio: f64,
    /// Angle mapped to white in the SAM map.
    pub sam_cap_deg: f64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            unit_peak: false,
            exclude_degenerate: false,
            resolution_ratio: 4.0,
            sam_cap_deg: DEFAULT_SAM_CAP_DEG,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub psnr_db: f64,
    pub sam_deg: f64,
    pub ergas: f64,
    pub uiqi: f64,
    pub per_band_psnr: Vec<f64>,
    /// Per-pixel spectral angle in degrees, raster order.
    pub sam_map: Vec<f64>,
}

fn check_pair(reference: &DenseMatrix, estimate: &DenseMatrix) -> Result<()> {
    if reference.shape() != estimate.shape() {
        return Err(Error::dim(format!(
            "reference {}x{} vs estimate {}x{}",
            reference.rows(),
            reference.cols(),
            estimate.rows(),
            estimate.cols()
        )));
    }
    Ok(())
}

fn row(m: &DenseMatrix, i: usize) -> impl Iterator<Item = f64> + '_ {
    (0..m.cols()).map(move |j| m[(i, j)])
}

/// Mean PSNR over bands and the per-band values, in dB.
///
/// `PSNR_m = 10 log10(peak_m² L / ‖x_m − x̂_m‖²)` with `peak_m` the
/// reference band maximum (or 1 with `unit_peak`). Values are capped at
/// [`PSNR_SENTINEL_DB`], which is also reported for an exact match.
pub fn psnr(
    reference: &DenseMatrix,
    estimate: &DenseMatrix,
    unit_peak: bool,
) -> Result<(f64, Vec<f64>)> {
    check_pair(reference, estimate)?;
    let l = reference.cols() as f64;
    let mut per_band = Vec::with_capacity(reference.rows());
    for i in 0..reference.rows() {
        let peak = if unit_peak {
            1.0
        } else {
            row(reference, i).fold(f64::NEG_INFINITY, f64::max)
        };
        if peak <= 0.0 {
            return Err(Error::Metric(format!(
                "band {i} has nonpositive peak {peak}"
            )));
        }
        let sse: f64 = row(reference, i)
            .zip(row(estimate, i))
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        let value = if sse == 0.0 {
            PSNR_SENTINEL_DB
        } else {
            (10.0 * (peak * peak * l / sse).log10()).min(PSNR_SENTINEL_DB)
        };
        per_band.push(value);
    }
    let mean = per_band.iter().sum::<f64>() / per_band.len() as f64;
    Ok((mean, per_band))
}

// arccos(⟨x,y⟩/(‖x‖‖y‖)) evaluated as 2·atan2(‖x̂ − ŷ‖, ‖x̂ + ŷ‖), which stays
// accurate for nearly parallel spectra.
fn unit_angle(x: &[f64], nx: f64, y: &[f64], ny: f64) -> f64 {
    let (mut diff, mut sum) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (u, v) = (a / nx, b / ny);
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt())
}

/// Mean spectral angle in degrees and the per-pixel angle map.
pub fn sam(
    reference: &DenseMatrix,
    estimate: &DenseMatrix,
    exclude_degenerate: bool,
) -> Result<(f64, Vec<f64>)> {
    check_pair(reference, estimate)?;
    let mut map = Vec::with_capacity(reference.cols());
    let mut total = 0.0;
    let mut counted = 0usize;
    for j in 0..reference.cols() {
        let (x, y) = (reference.col(j), estimate.col(j));
        let (nx, ny) = (dot(x, x).sqrt(), dot(y, y).sqrt());
        if nx <= SAM_DEGENERATE_NORM || ny <= SAM_DEGENERATE_NORM {
            map.push(0.0);
            if !exclude_degenerate {
                counted += 1;
            }
            continue;
        }
        let angle = unit_angle(x, nx, y, ny).to_degrees();
        map.push(angle);
        total += angle;
        counted += 1;
    }
    let mean = if counted == 0 {
        0.0
    } else {
        total / counted as f64
    };
    Ok((mean, map))
}

/// `(100/r) √(mean_m (RMSE_m / μ_m)²)` with `μ_m` the reference band mean.
pub fn ergas(reference: &DenseMatrix, estimate: &DenseMatrix, ratio: f64) -> Result<f64> {
    check_pair(reference, estimate)?;
    if !(ratio > 0.0) {
        return Err(Error::Metric(format!(
            "resolution ratio must be positive, got {ratio}"
        )));
    }
    let l = reference.cols() as f64;
    let mut acc = 0.0;
    for i in 0..reference.rows() {
        let mu = row(reference, i).sum::<f64>() / l;
        if mu == 0.0 {
            return Err(Error::Metric(format!("band {i} has zero mean")));
        }
        let mse = row(reference, i)
            .zip(row(estimate, i))
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / l;
        acc += mse / (mu * mu);
    }
    Ok(100.0 / ratio * (acc / reference.rows() as f64).sqrt())
}

/// Whole-band universal image quality index averaged over bands. A band
/// whose denominator vanishes contributes 0.
pub fn uiqi(reference: &DenseMatrix, estimate: &DenseMatrix) -> Result<f64> {
    check_pair(reference, estimate)?;
    let l = reference.cols() as f64;
    let mut total = 0.0;
    for i in 0..reference.rows() {
        let mx = row(reference, i).sum::<f64>() / l;
        let my = row(estimate, i).sum::<f64>() / l;
        let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
        for (a, b) in row(reference, i).zip(row(estimate, i)) {
            vx += (a - mx) * (a - mx);
            vy += (b - my) * (b - my);
            cxy += (a - mx) * (b - my);
        }
        let (vx, vy, cxy) = (vx / l, vy / l, cxy / l);
        let den = (vx + vy) * (mx * mx + my * my);
        if den != 0.0 {
            total += 4.0 * cxy * mx * my / den;
        }
    }
    Ok(total / reference.rows() as f64)
}

/// All four metrics for a reference/estimate pair of equal geometry.
pub fn evaluate(
    reference: &HsImage,
    estimate: &HsImage,
    options: &MetricOptions,
) -> Result<MetricsReport> {
    if (reference.width(), reference.height()) != (estimate.width(), estimate.height()) {
        return Err(Error::dim("reference and estimate differ in spatial size"));
    }
    let (x, y) = (reference.matrix(), estimate.matrix());
    let (psnr_db, per_band_psnr) = psnr(x, y, options.unit_peak)?;
    let (sam_deg, sam_map) = sam(x, y, options.exclude_degenerate)?;
    Ok(MetricsReport {
        psnr_db,
        sam_deg,
        ergas: ergas(x, y, options.resolution_ratio)?,
        uiqi: uiqi(x, y)?,
        per_band_psnr,
        sam_map,
    })
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `metric,value` rows: the four summary metrics, then one
    /// `psnr_band_<m>` row per band.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["metric", "value"])?;
        for (name, v) in [
            ("psnr_db", self.psnr_db),
            ("sam_deg", self.sam_deg),
            ("ergas", self.ergas),
            ("uiqi", self.uiqi),
        ] {
            w.write_record([name.to_string(), format!("{v:?}")])?;
        }
        for (m, v) in self.per_band_psnr.iter().enumerate() {
            w.write_record([format!("psnr_band_{m}"), format!("{v:?}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Encodes a SAM map as a binary 8-bit PGM, mapping 0° to black and
/// `cap_deg` (or more) to white.
pub fn sam_map_pgm(map: &[f64], width: usize, height: usize, cap_deg: f64) -> Result<Vec<u8>> {
    if map.len() != width * height {
        return Err(Error::dim(format!(
            "{} angles for a {width}x{height} map",
            map.len()
        )));
    }
    if !(cap_deg > 0.0) {
        return Err(Error::Metric(format!(
            "SAM cap must be positive, got {cap_deg}"
        )));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(
        map.iter()
            .map(|a| ((a / cap_deg).clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    Ok(out)
}

pub fn sam_map_export(
    map: &[f64],
    width: usize,
    height: usize,
    cap_deg: f64,
    path: &Path,
) -> Result<()> {
    let bytes = sam_map_pgm(map, width, height, cap_deg)?;
    std::fs::File::create(path)?.write_all(&bytes)?;
    Ok(())
}
