//! The full pipeline at desk scale: generate a Poisson dataset, train a
//! small denoiser with no physics in the loop, then sample with and without
//! physics guidance and compare both against the reference solver.
//!
//! Writes heatmaps of the guided prediction, the reference, and the error
//! map into `target/example-out/`. Takes a few minutes on a laptop.
//!
//!     cargo run --release --example train_and_sample_poisson

use pdediff::data::{generate_dataset, normalize, EquationKind};
use pdediff::diffusion::{train, TrainConfig};
use pdediff::eval::{evaluate, Section};
use pdediff::grid::GridSpec;
use pdediff::nn::ArchConfig;
use pdediff::plot::heatmap;
use pdediff::problem::PdeProblem;
use pdediff::sampler::{sample_with_schedule, GuidanceConfig, GuidanceMode};
use pdediff::solve::reference_solution;
use pdediff::Result;
use std::time::Instant;

fn main() -> Result<()> {
    let grid = GridSpec::unit_square(32)?;
    let out_dir = std::path::Path::new("target/example-out");
    std::fs::create_dir_all(out_dir)?;

    println!("generating 512 Poisson solutions with kappa ~ U[1, 2]...");
    let dataset = normalize(generate_dataset(
        EquationKind::Poisson,
        512,
        1.0,
        2.0,
        grid,
        21,
    )?)?;

    println!("training a width-8 denoiser for 40 epochs (physics-free)...");
    let t0 = Instant::now();
    let cfg = TrainConfig {
        epochs: 40,
        batch_size: 16,
        seed: 5,
        ..TrainConfig::default()
    };
    let (model, trace) = train(&dataset, ArchConfig::smoke(8), 1000, &cfg)?;
    println!(
        "  {} parameters, {} iterations, loss {:.3} -> {:.4} in {:.0}s",
        model.param_count(),
        trace.len(),
        trace.first().unwrap().loss,
        trace.last().unwrap().loss,
        t0.elapsed().as_secs_f64()
    );

    // An interpolation coefficient the training set never saw exactly.
    let kappa = 1.35;
    let problem = PdeProblem::poisson(kappa, grid)?;
    let reference = reference_solution(&problem)?;
    let schedule = model.schedule()?;

    let guided_cfg = GuidanceConfig {
        steps: 750,
        scale: model.meta.scale,
        seed: 3,
        ..GuidanceConfig::guided_default(EquationKind::Poisson)
    };
    let (guided, _) = sample_with_schedule(&model, &problem, &guided_cfg, &schedule, None)?;
    let unguided_cfg = GuidanceConfig {
        mode: GuidanceMode::Unguided,
        ..guided_cfg.clone()
    };
    let (unguided, _) = sample_with_schedule(&model, &problem, &unguided_cfg, &schedule, None)?;

    let gr = evaluate(&guided, &reference, Section::default_for(&problem))?;
    let ur = evaluate(&unguided, &reference, Section::default_for(&problem))?;
    println!("kappa = {kappa}:");
    println!(
        "  guided   relative L2 = {:.4}  (max abs {:.4})",
        gr.relative_l2, gr.max_abs_error
    );
    println!(
        "  unguided relative L2 = {:.4}  (max abs {:.4})",
        ur.relative_l2, ur.max_abs_error
    );

    heatmap(&guided, &out_dir.join("poisson_guided.png"))?;
    heatmap(&reference, &out_dir.join("poisson_reference.png"))?;
    heatmap(&gr.error_field, &out_dir.join("poisson_error.png"))?;
    println!("heatmaps written to {}", out_dir.display());
    Ok(())
}
