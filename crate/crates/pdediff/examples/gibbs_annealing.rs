//! The stochastic side of physics-only solving: with a fixed noise
//! temperature epsilon the iteration samples a stationary distribution
//! concentrated around the PDE solution, and the spread shrinks as epsilon
//! drops. Annealing epsilon to zero recovers the deterministic solver.
//!
//!     cargo run --release --example gibbs_annealing

use pdediff::data::EquationKind;
use pdediff::grid::{relative_l2, GridSpec};
use pdediff::problem::PdeProblem;
use pdediff::sampler::{physics_only_solve, GuidanceConfig};
use pdediff::solve::reference_solution;
use pdediff::Result;

fn main() -> Result<()> {
    let grid = GridSpec::unit_square(32)?;
    let problem = PdeProblem::poisson(1.0, grid)?;
    let reference = reference_solution(&problem)?;

    println!("fixed-temperature runs (8 seeds each):");
    println!("{:>10} {:>14} {:>14}", "epsilon", "mean rel L2", "std rel L2");
    for eps in [1e-4, 1e-6, 1e-8] {
        let vals: Vec<f64> = (0..8)
            .map(|k| {
                let cfg = GuidanceConfig {
                    guidance_dt: 2.0e-4,
                    sigma: 0.0,
                    iterations: 8000,
                    epsilon_init: eps,
                    epsilon_anneal: false,
                    seed: 50 + k,
                    snapshot_stride: 0,
                    ..GuidanceConfig::physics_only_default(EquationKind::Poisson)
                };
                let (u, _) = physics_only_solve(&problem, &cfg, None)?;
                relative_l2(&u, &reference)
            })
            .collect::<Result<_>>()?;
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let std = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / vals.len() as f64)
            .sqrt();
        println!("{eps:>10.1e} {mean:>14.4e} {std:>14.4e}");
    }

    // Linear annealing to zero: the noise vanishes and the run lands on the
    // deterministic solution.
    let cfg = GuidanceConfig {
        guidance_dt: 2.0e-4,
        sigma: 0.0,
        iterations: 12000,
        epsilon_init: 1e-4,
        epsilon_anneal: true,
        seed: 99,
        snapshot_stride: 0,
        ..GuidanceConfig::physics_only_default(EquationKind::Poisson)
    };
    let (u, _) = physics_only_solve(&problem, &cfg, None)?;
    println!(
        "annealed 1e-4 -> 0: final rel L2 = {:.4e}",
        relative_l2(&u, &reference)?
    );
    Ok(())
}
