//! Batch commands behind the `gloria` binary: simulate, fuse, evaluate and
//! rank-table. Each command reads and writes files in a run directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{wald_simulate, HsImage, SpatialResponse, SpectralResponse, WaldConfig};
use crate::io::{read_image, read_sparse, write_dense_csv, write_image, write_sparse};
use crate::metrics::{evaluate, sam_map_export, MetricOptions, MetricsReport};
use crate::patching::grid_layout;
use crate::regularizer::{rank_table, write_rank_table_csv, RankRow, DEFAULT_ENERGY_THRESHOLD};
use crate::solver::{
    default_gamma, solve, uniform_gammas, write_trace_csv, Init, Problem, SolveReport,
    SolverConfig, SolverKind, StopReason,
};
use crate::synth::{gen_scene, SceneConfig, SceneMetadata};

pub const X_TRUE: &str = "x_true.hsrm";
pub const Y_M: &str = "y_m.hsrm";
pub const Y_H: &str = "y_h.hsrm";
pub const F_CSV: &str = "F.csv";
pub const G_SPARSE: &str = "G.sparse";
pub const SCENE_JSON: &str = "scene.json";
pub const X_EST: &str = "x_est.hsrm";
pub const TRACE_CSV: &str = "trace.csv";
pub const REPORT_JSON: &str = "report.json";
pub const TIMING_JSON: &str = "timing.json";
pub const METRICS_JSON: &str = "metrics.json";
pub const METRICS_CSV: &str = "metrics.csv";
pub const SAM_MAP_PGM: &str = "sam_map.pgm";
pub const RANK_TABLE_CSV: &str = "rank_table.csv";

/// Offset separating the noise stream from the scene stream of one seed.
const NOISE_SEED_OFFSET: u64 = 0x5eed_0000_0000;

/// Shared configuration document of all subcommands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Directory receiving every output file.
    pub out_dir: PathBuf,
    /// Directory holding the observations for `fuse`; defaults to `out_dir`.
    pub input_dir: Option<PathBuf>,
    /// Ground-truth cube for `simulate`; a synthetic scene is generated
    /// when absent.
    pub input: Option<PathBuf>,
    pub seed: u64,
    pub scene: SceneConfig,
    pub simulation: WaldConfig,
    pub solver: SolverConfig,
    pub metrics: MetricOptions,
    pub rank_table: RankTableConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("."),
            input_dir: None,
            input: None,
            seed: 0,
            scene: SceneConfig::default(),
            simulation: WaldConfig::default(),
            solver: SolverConfig::default(),
            metrics: MetricOptions::default(),
            rank_table: RankTableConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankTableConfig {
    pub grids: Vec<usize>,
    pub threshold: f64,
}

impl Default for RankTableConfig {
    fn default() -> Self {
        Self {
            grids: vec![1, 2, 4, 8],
            threshold: DEFAULT_ENERGY_THRESHOLD,
        }
    }
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&at(path, fs::read_to_string(path).map_err(Error::from))?)
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        for snr in [self.simulation.snr_m_db, self.simulation.snr_h_db] {
            if snr.is_nan() {
                return Err(Error::config("SNR must be a number or null"));
            }
        }
        if !(self.metrics.resolution_ratio > 0.0) || !(self.metrics.sam_cap_deg > 0.0) {
            return Err(Error::config(
                "resolution ratio and SAM cap must be positive",
            ));
        }
        if self.rank_table.grids.contains(&0) {
            return Err(Error::config("rank-table grids must be positive"));
        }
        Ok(())
    }

    pub fn input_dir(&self) -> &Path {
        self.input_dir.as_deref().unwrap_or(&self.out_dir)
    }
}

/// Provenance of a simulated observation pair, written as `scene.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub synthetic: bool,
    pub seed: u64,
    pub noise_seed: u64,
    pub bands: usize,
    pub width: usize,
    pub height: usize,
    pub simulation: WaldConfig,
    /// Ground-truth source file for non-synthetic runs.
    pub input: Option<PathBuf>,
    pub scene: Option<SceneMetadata>,
}

/// Reproducible part of a fusion run, written as `report.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuseReport {
    pub solver: SolverKind,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub final_objective: f64,
    pub initial_objective: f64,
    pub gamma: f64,
    pub gamma_global: f64,
    pub p: f64,
    pub tau: f64,
    pub patch_rows: usize,
    pub patch_cols: usize,
    pub patches: usize,
    pub seed: u64,
}

/// Wall-clock figures of a fusion run, kept apart from the report so the
/// latter stays byte-identical across reruns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub solve_s: f64,
    pub total_s: f64,
}

// Prefixes I/O failures with the offending path.
fn at<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(
            io.kind(),
            format!("{}: {io}", path.display()),
        )),
        other => other,
    })
}

fn load_image(path: &Path) -> Result<HsImage> {
    at(path, read_image(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    at(path, fs::write(path, s).map_err(Error::from))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = at(path, fs::read_to_string(path).map_err(Error::from))?;
    Ok(serde_json::from_str(&text)?)
}

/// Generates (or loads) the ground truth and writes the degraded pair with
/// the operators that produced it.
pub fn cmd_simulate(config: &RunConfig) -> Result<SceneRecord> {
    config.validate()?;
    let (truth, meta) = match &config.input {
        Some(path) => (load_image(path)?, None),
        None => {
            let scene = gen_scene(&config.scene, config.seed)?;
            (scene.image, Some(scene.metadata))
        }
    };
    let noise_seed = config.seed.wrapping_add(NOISE_SEED_OFFSET);
    let obs = wald_simulate(&truth, &config.simulation, noise_seed)?;
    let out = &config.out_dir;
    fs::create_dir_all(out)?;
    write_image(&out.join(X_TRUE), &truth)?;
    write_image(&out.join(Y_M), &obs.y_m)?;
    write_image(&out.join(Y_H), &obs.y_h)?;
    write_dense_csv(&out.join(F_CSV), obs.f.matrix())?;
    write_sparse(&out.join(G_SPARSE), obs.g.matrix())?;
    let record = SceneRecord {
        synthetic: meta.is_some(),
        seed: config.seed,
        noise_seed,
        bands: truth.bands(),
        width: truth.width(),
        height: truth.height(),
        simulation: config.simulation.clone(),
        input: config.input.clone(),
        scene: meta,
    };
    write_json(&out.join(SCENE_JSON), &record)?;
    Ok(record)
}

/// Regularization weight for a fusion run: the configured value, or the
/// SNR-based default using the scene record when one is present.
pub fn resolve_gamma(config: &RunConfig, scene: Option<&SceneRecord>) -> f64 {
    if let Some(g) = config.solver.gamma {
        return g;
    }
    let (sim, synthetic) = match scene {
        Some(s) => (&s.simulation, s.synthetic),
        None => (&config.simulation, false),
    };
    default_gamma(sim.snr_m_db, sim.snr_h_db, synthetic)
}

/// Observation files of a simulated run.
pub struct Observations {
    pub y_m: HsImage,
    pub y_h: HsImage,
    pub f: SpectralResponse,
    pub g: SpatialResponse,
    pub scene: Option<SceneRecord>,
}

pub fn load_observations(dir: &Path) -> Result<Observations> {
    let y_m = load_image(&dir.join(Y_M))?;
    let y_h = load_image(&dir.join(Y_H))?;
    let f_path = dir.join(F_CSV);
    let f = at(&f_path, SpectralResponse::from_csv(&f_path))?;
    let g_path = dir.join(G_SPARSE);
    let g = SpatialResponse::from_matrix(
        at(&g_path, read_sparse(&g_path))?,
        y_m.width(),
        y_m.height(),
    )?;
    let scene_path = dir.join(SCENE_JSON);
    let scene = if scene_path.exists() {
        Some(read_json(&scene_path)?)
    } else {
        None
    };
    Ok(Observations {
        y_m,
        y_h,
        f,
        g,
        scene,
    })
}

/// Runs the configured solver on the observations in the input directory.
pub fn cmd_fuse(config: &RunConfig) -> Result<(FuseReport, SolveReport)> {
    config.validate()?;
    let start = Instant::now();
    let obs = load_observations(config.input_dir())?;
    let sc = &config.solver;
    let layout = grid_layout(
        obs.y_m.width(),
        obs.y_m.height(),
        sc.patch_rows,
        sc.patch_cols,
    )?;
    let patches = layout.len();
    let gamma = resolve_gamma(config, obs.scene.as_ref());
    let gammas = uniform_gammas(gamma, patches, sc.gamma_global);
    let gamma_global = gammas[0];
    let problem = Problem::from_observations(
        &obs.y_m,
        &obs.y_h,
        &obs.f,
        &obs.g,
        layout,
        sc.params()?,
        gammas,
    )?;
    let solve_start = Instant::now();
    let report = solve(
        &problem,
        sc.solver,
        &Init::Uniform(sc.seed),
        sc.stop(),
        sc.inner_stop(),
        gamma,
    )?;
    let solve_s = solve_start.elapsed().as_secs_f64();

    let out = &config.out_dir;
    fs::create_dir_all(out)?;
    let estimate = HsImage::new(obs.y_m.width(), obs.y_m.height(), report.x_est.clone())?;
    write_image(&out.join(X_EST), &estimate)?;
    write_trace_csv(&out.join(TRACE_CSV), &report)?;
    let summary = FuseReport {
        solver: sc.solver,
        iterations: report.iterations,
        stop_reason: report.stop_reason,
        final_objective: report.final_objective,
        initial_objective: report.objective_trace[0],
        gamma,
        gamma_global,
        p: sc.p,
        tau: sc.tau,
        patch_rows: sc.patch_rows,
        patch_cols: sc.patch_cols,
        patches,
        seed: sc.seed,
    };
    write_json(&out.join(REPORT_JSON), &summary)?;
    let timing = Timing {
        solve_s,
        total_s: start.elapsed().as_secs_f64(),
    };
    write_json(&out.join(TIMING_JSON), &timing)?;
    Ok((summary, report))
}

/// Compares an estimate with a reference cube.
pub fn cmd_evaluate(
    reference: &Path,
    estimate: &Path,
    options: &MetricOptions,
    out_dir: &Path,
) -> Result<MetricsReport> {
    let x = load_image(reference)?;
    let y = load_image(estimate)?;
    let report = evaluate(&x, &y, options)?;
    fs::create_dir_all(out_dir)?;
    let mut json = report.to_json()?;
    json.push('\n');
    fs::write(out_dir.join(METRICS_JSON), json)?;
    report.write_csv(&out_dir.join(METRICS_CSV))?;
    sam_map_export(
        &report.sam_map,
        x.width(),
        x.height(),
        options.sam_cap_deg,
        &out_dir.join(SAM_MAP_PGM),
    )?;
    Ok(report)
}

/// Parses a comma-separated list of positive grid sizes such as `1,2,4`.
pub fn parse_grids(s: &str) -> Result<Vec<usize>> {
    let grids = s
        .split(',')
        .map(|t| match t.trim().parse::<usize>() {
            Ok(g) if g > 0 => Ok(g),
            _ => Err(Error::config(format!("malformed grid list {s:?}"))),
        })
        .collect::<Result<Vec<_>>>()?;
    if grids.is_empty() {
        return Err(Error::config("empty grid list"));
    }
    Ok(grids)
}

pub fn cmd_rank_table(
    image: &Path,
    grids: &[usize],
    threshold: f64,
    out_dir: &Path,
) -> Result<Vec<RankRow>> {
    if grids.is_empty() || grids.contains(&0) {
        return Err(Error::config(
            "grids must be a nonempty list of positive sizes",
        ));
    }
    let x = load_image(image)?;
    let rows = rank_table(&x, grids, threshold)?;
    fs::create_dir_all(out_dir)?;
    write_rank_table_csv(&out_dir.join(RANK_TABLE_CSV), &rows)?;
    Ok(rows)
}
