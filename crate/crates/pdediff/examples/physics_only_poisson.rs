//! Solve a Poisson problem with no learned model at all: start from pure
//! noise and run projected residual descent (the zero-temperature limit of
//! the physics-guided sampler). Prints the energy trace and compares the
//! result against the finite-difference reference.
//!
//!     cargo run --release --example physics_only_poisson

use pdediff::data::EquationKind;
use pdediff::eval::{evaluate, Section};
use pdediff::grid::GridSpec;
use pdediff::problem::PdeProblem;
use pdediff::sampler::{physics_only_solve, GuidanceConfig};
use pdediff::solve::reference_solution;
use pdediff::Result;

fn main() -> Result<()> {
    let grid = GridSpec::unit_square(64)?;
    let kappa = 0.9;
    let problem = PdeProblem::poisson(kappa, grid)?;
    let reference = reference_solution(&problem)?;

    // dt just below the explicit stability limit h^2 / (4 kappa).
    let cfg = GuidanceConfig {
        guidance_dt: 7.0e-5,
        sigma: 0.0,
        iterations: 60_000,
        snapshot_stride: 5_000,
        seed: 1,
        ..GuidanceConfig::physics_only_default(EquationKind::Poisson)
    };
    println!("descending the residual energy from noise (kappa = {kappa})...");
    let (field, trace) = physics_only_solve(&problem, &cfg, Some(&reference))?;

    println!("{:>10} {:>14} {:>14}", "iteration", "energy", "rel_l2");
    for s in &trace.snapshots {
        println!(
            "{:>10} {:>14.6e} {:>14.6e}",
            s.step,
            s.energy,
            s.rel_l2.unwrap_or(f64::NAN)
        );
    }

    let report = evaluate(&field, &reference, Section::default_for(&problem))?;
    println!(
        "final: relative L2 = {:.3e}, max abs error = {:.3e}",
        report.relative_l2, report.max_abs_error
    );
    Ok(())
}
