//! Synthetic fusion benchmark: PSNR of GLORIA on 16 and 1 patches against
//! nuclear-norm minimization, and the gradient steps each MM scheme needs
//! to come within 1% of the best objective.
//!
//! Usage: `cargo run --release --example benchmark [seeds] [snr_db]`

use std::time::Instant;

use gloria::imaging::{wald_simulate, WaldConfig};
use gloria::metrics::psnr;
use gloria::patching::grid_layout;
use gloria::regularizer::SchattenParams;
use gloria::solver::{
    default_gamma, exact_mm_solve, gloria_solve, nnm_solve, nominal_pg_solve, uniform_gammas, Init,
    InnerStop, Problem, StopRule,
};
use gloria::synth::{gen_scene, SceneConfig};

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, var.sqrt())
}

fn main() -> gloria::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);
    let snr: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(15.0);
    let scene = SceneConfig::default();
    let wald = WaldConfig {
        snr_m_db: snr,
        snr_h_db: snr,
        ..WaldConfig::default()
    };
    let gamma = default_gamma(snr, snr, true);
    let stop = StopRule::default();

    let names = ["GLORIA P=16", "GLORIA P=1", "NNM"];
    let mut scores = vec![Vec::new(); 3];
    let schemes = ["GLORIA", "nominal PG", "exact MM"];
    let mut steps = vec![Vec::new(); 3];
    let mut secs = vec![Vec::new(); 3];
    for seed in 0..seeds {
        let s = gen_scene(&scene, seed)?;
        let obs = wald_simulate(&s.image, &wald, seed.wrapping_add(1000))?;
        let problem = |grid: usize| {
            let layout = grid_layout(scene.width, scene.height, grid, grid)?;
            let gammas = uniform_gammas(gamma, layout.len(), None);
            Problem::from_observations(
                &obs.y_m,
                &obs.y_h,
                &obs.f,
                &obs.g,
                layout,
                SchattenParams::default(),
                gammas,
            )
        };
        let (p16, p1) = (problem(4)?, problem(1)?);
        let init = Init::Uniform(seed);
        let score = |x: &gloria::linalg::DenseMatrix| psnr(s.image.matrix(), x, false).map(|v| v.0);

        let runs = [
            gloria_solve(&p16, &init, stop)?,
            nominal_pg_solve(&p16, &init, stop)?,
            exact_mm_solve(&p16, &init, stop, InnerStop::default())?,
        ];
        let best = runs
            .iter()
            .map(|r| r.final_objective)
            .fold(f64::INFINITY, f64::min);
        for (k, r) in runs.iter().enumerate() {
            let n = r.steps_to_reach(best, 0.01).map_or(f64::NAN, |n| n as f64);
            steps[k].push(n);
            secs[k].push(r.wall_time);
        }
        let t = Instant::now();
        scores[0].push(score(&runs[0].x_est)?);
        scores[1].push(score(&gloria_solve(&p1, &init, stop)?.x_est)?);
        scores[2].push(score(&nnm_solve(&p1, gamma, &init, stop)?.x_est)?);
        eprintln!(
            "seed {seed:>3}: PSNR {:.2} / {:.2} / {:.2} dB ({:.2} s)",
            scores[0][seed as usize],
            scores[1][seed as usize],
            scores[2][seed as usize],
            t.elapsed().as_secs_f64()
        );
    }

    println!("{seeds} seeds, {snr} dB, gamma {gamma:.4}");
    println!("{:<14} {:>16}", "method", "PSNR (dB)");
    for (name, v) in names.iter().zip(&scores) {
        let (m, s) = mean_std(v);
        println!("{name:<14} {m:>9.2} ± {s:<5.2}");
    }
    println!("{:<14} {:>16} {:>12}", "scheme", "steps to 1%", "time (s)");
    for ((name, n), t) in schemes.iter().zip(&steps).zip(&secs) {
        let (m, s) = mean_std(n);
        println!("{name:<14} {m:>9.1} ± {s:<5.1} {:>12.3}", mean_std(t).0);
    }
    Ok(())
}
