use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gloria::cli::{self, RunConfig};
use gloria::solver::SolverKind;
use gloria::{Error, Result};

#[derive(Parser)]
#[command(
    name = "gloria",
    version,
    about = "Hyperspectral super-resolution by global-local low-rank estimation"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the run seed and the solver initialization seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the solver: gloria, exact_mm, nominal_pg or nnm.
    #[arg(long, global = true)]
    solver: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or load a ground truth and write degraded observations.
    Simulate,
    /// Reconstruct the super-resolved image from observations.
    Fuse {
        /// Directory holding the observations (defaults to the output directory).
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Compare an estimate with a reference image.
    Evaluate {
        reference: PathBuf,
        estimate: PathBuf,
        /// Use a unit peak for every band in PSNR.
        #[arg(long)]
        unit_peak: bool,
        /// Leave zero-norm pixels out of the mean SAM.
        #[arg(long)]
        exclude_degenerate: bool,
        /// HS-to-SR resolution ratio for ERGAS.
        #[arg(long)]
        ratio: Option<f64>,
    },
    /// Tabulate local approximate ranks over patch grids.
    RankTable {
        image: PathBuf,
        /// Comma-separated grid sizes, e.g. 1,2,4,8.
        #[arg(long)]
        grids: Option<String>,
        /// Energy threshold in (0, 1].
        #[arg(long)]
        threshold: Option<f64>,
    },
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
        config.solver.seed = seed;
    }
    if let Some(name) = &common.solver {
        config.solver.solver = name.parse::<SolverKind>()?;
    }
    if let Some(out) = &common.out {
        config.out_dir = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    let mut config = load_config(&cli.common)?;
    match cli.command {
        Command::Simulate => {
            let rec = cli::cmd_simulate(&config)?;
            eprintln!(
                "simulated {} bands, {}x{} pixels into {}",
                rec.bands,
                rec.width,
                rec.height,
                config.out_dir.display()
            );
        }
        Command::Fuse { input } => {
            if input.is_some() {
                config.input_dir = input;
            }
            let (report, _) = cli::cmd_fuse(&config)?;
            eprintln!(
                "{}: {} iterations ({:?}), objective {:.6e}",
                report.solver.name(),
                report.iterations,
                report.stop_reason,
                report.final_objective
            );
        }
        Command::Evaluate {
            reference,
            estimate,
            unit_peak,
            exclude_degenerate,
            ratio,
        } => {
            let mut options = config.metrics;
            options.unit_peak |= unit_peak;
            options.exclude_degenerate |= exclude_degenerate;
            if let Some(r) = ratio {
                if r.is_nan() || r <= 0.0 {
                    return Err(Error::Config(format!("invalid resolution ratio {r}")));
                }
                options.resolution_ratio = r;
            }
            let m = cli::cmd_evaluate(&reference, &estimate, &options, &config.out_dir)?;
            println!(
                "PSNR {:.4} dB  SAM {:.4} deg  ERGAS {:.4}  UIQI {:.4}",
                m.psnr_db, m.sam_deg, m.ergas, m.uiqi
            );
        }
        Command::RankTable {
            image,
            grids,
            threshold,
        } => {
            let grids = match grids {
                Some(s) => cli::parse_grids(&s)?,
                None => config.rank_table.grids.clone(),
            };
            let threshold = threshold.unwrap_or(config.rank_table.threshold);
            for row in cli::cmd_rank_table(&image, &grids, threshold, &config.out_dir)? {
                println!(
                    "grid {:>3}  pixels {:>6}  local {:.2} ± {:.2}  global {}",
                    row.grid, row.patch_pixels, row.mean_rank, row.std_rank, row.global_rank
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
