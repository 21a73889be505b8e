//! Desk-scale version of the repeated-trial robustness protocol: train a
//! small Poisson prior, then run many independent seeded guided samples at
//! one coefficient and report mean and standard deviation of the percent
//! relative L2 error. Takes a few minutes.
//!
//!     cargo run --release --example robustness_stats

use pdediff::data::{generate_dataset, normalize, EquationKind};
use pdediff::diffusion::{train, TrainConfig};
use pdediff::eval::robustness;
use pdediff::grid::GridSpec;
use pdediff::nn::ArchConfig;
use pdediff::problem::PdeProblem;
use pdediff::sampler::GuidanceConfig;
use pdediff::solve::reference_solution;
use pdediff::Result;

fn main() -> Result<()> {
    let grid = GridSpec::unit_square(32)?;
    println!("training a small Poisson prior...");
    let dataset = normalize(generate_dataset(
        EquationKind::Poisson,
        512,
        1.0,
        2.0,
        grid,
        21,
    )?)?;
    let cfg = TrainConfig {
        epochs: 40,
        batch_size: 16,
        seed: 5,
        ..TrainConfig::default()
    };
    let (model, _) = train(&dataset, ArchConfig::smoke(8), 1000, &cfg)?;
    let schedule = model.schedule()?;

    let sample_cfg = GuidanceConfig {
        steps: 750,
        scale: model.meta.scale,
        ..GuidanceConfig::guided_default(EquationKind::Poisson)
    };
    for coef in [1.35, 1.65] {
        let problem = PdeProblem::poisson(coef, grid)?;
        let reference = reference_solution(&problem)?;
        let summary = robustness(&model, &problem, &sample_cfg, &schedule, &reference, 12, 100)?;
        println!(
            "kappa = {coef}: mean {:.3}% +/- {:.3}% over {} trials ({} failures)",
            summary.mean_pct, summary.std_pct, summary.trials, summary.failures
        );
    }
    Ok(())
}
