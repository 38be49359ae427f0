use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{InnerStop, SolveReport, StopRule};
use crate::error::{Error, Result};
use crate::regularizer::SchattenParams;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    #[default]
    Gloria,
    ExactMm,
    NominalPg,
    Nnm,
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gloria" => Ok(Self::Gloria),
            "exact_mm" => Ok(Self::ExactMm),
            "nominal_pg" => Ok(Self::NominalPg),
            "nnm" => Ok(Self::Nnm),
            other => Err(Error::config(format!("unknown solver {other:?}"))),
        }
    }
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Gloria => "gloria",
            Self::ExactMm => "exact_mm",
            Self::NominalPg => "nominal_pg",
            Self::Nnm => "nnm",
        }
    }
}

/// Regularization weight used when none is configured: `40/(SNR_M + SNR_H)`
/// for synthetic scenes and `20/(SNR_M + SNR_H)` otherwise (SNRs in dB).
pub fn default_gamma(snr_m_db: f64, snr_h_db: f64, synthetic: bool) -> f64 {
    let num = if synthetic { 40.0 } else { 20.0 };
    num / (snr_m_db + snr_h_db)
}

/// Solver section of a run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub p: f64,
    pub tau: f64,
    /// Patch weight `γ_i`; derived from the SNRs when absent.
    pub gamma: Option<f64>,
    /// Override for the global weight `γ_0`.
    pub gamma_global: Option<f64>,
    pub patch_rows: usize,
    pub patch_cols: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    pub solver: SolverKind,
    pub inner_max_iter: usize,
    pub inner_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let stop = StopRule::default();
        let inner = InnerStop::default();
        Self {
            p: 0.5,
            tau: 1.0,
            gamma: None,
            gamma_global: None,
            patch_rows: 4,
            patch_cols: 4,
            max_iter: stop.max_iter,
            tol: stop.tol,
            seed: 0,
            solver: SolverKind::Gloria,
            inner_max_iter: inner.max_iter,
            inner_tol: inner.tol,
        }
    }
}

impl SolverConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        if self.patch_rows == 0 || self.patch_cols == 0 {
            return Err(Error::config("patch grid must be at least 1x1"));
        }
        if self.inner_max_iter == 0 {
            return Err(Error::config("inner iteration limit must be positive"));
        }
        if !(self.tol >= 0.0) || !(self.inner_tol >= 0.0) {
            return Err(Error::config("tolerances must be nonnegative"));
        }
        for g in [self.gamma, self.gamma_global].into_iter().flatten() {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::config(format!("invalid gamma {g}")));
            }
        }
        Ok(())
    }

    pub fn params(&self) -> Result<SchattenParams> {
        SchattenParams::new(self.p, self.tau)
    }

    pub fn stop(&self) -> StopRule {
        StopRule {
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }

    pub fn inner_stop(&self) -> InnerStop {
        InnerStop {
            tol: self.inner_tol,
            max_iter: self.inner_max_iter,
        }
    }
}

#[derive(Serialize)]
struct TraceRow {
    iter: usize,
    objective: f64,
    step_size: f64,
    wall_ms: f64,
}

/// Writes `iter,objective,step_size,wall_ms` rows for every trace entry.
pub fn write_trace_csv(path: &Path, report: &SolveReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (k, &objective) in report.objective_trace.iter().enumerate() {
        w.serialize(TraceRow {
            iter: k,
            objective,
            step_size: report.step_sizes[k],
            wall_ms: report.wall_ms[k],
        })?;
    }
    w.flush()?;
    Ok(())
}
