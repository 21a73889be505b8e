//! Nonlinear Burgers flow with a standing interior shock, recovered from
//! noise by physics-only descent on the space-time residual energy. The
//! initial profile sin(2 pi x) steepens into a shock at x = 0.5 whose
//! viscous thickness is set by nu.
//!
//!     cargo run --release --example burgers_shock

use pdediff::data::EquationKind;
use pdediff::grid::{relative_l2, GridSpec};
use pdediff::plot::{heatmap, profile_plot};
use pdediff::problem::PdeProblem;
use pdediff::sampler::{physics_only_solve, GuidanceConfig};
use pdediff::solve::reference_solution;
use pdediff::Result;

fn main() -> Result<()> {
    let grid = GridSpec::unit_square(32)?;
    let nu = 0.03;
    let problem = PdeProblem::burgers(nu, grid)?;
    let out_dir = std::path::Path::new("target/example-out");
    std::fs::create_dir_all(out_dir)?;

    println!("solving the refined-grid upwind reference (nu = {nu})...");
    let reference = reference_solution(&problem)?;

    let cfg = GuidanceConfig {
        guidance_dt: 4.0e-5,
        sigma: 0.0,
        adjoint_direction: true,
        iterations: 150_000,
        snapshot_stride: 30_000,
        seed: 4,
        ..GuidanceConfig::physics_only_default(EquationKind::Burgers)
    };
    println!("descending the nonlinear residual energy from noise...");
    let (field, trace) = physics_only_solve(&problem, &cfg, Some(&reference))?;
    for s in &trace.snapshots {
        println!(
            "  iter {:>7}: energy {:.3e}, rel L2 {:.3e}",
            s.step,
            s.energy,
            s.rel_l2.unwrap_or(f64::NAN)
        );
    }
    println!(
        "final rel L2 vs reference = {:.3e}",
        relative_l2(&field, &reference)?
    );

    // The shock is easiest to see in the final-time slice.
    let j = grid.ny - 1;
    profile_plot(
        &[
            ("descent", &field.profile_at_y(j)),
            ("reference", &reference.profile_at_y(j)),
        ],
        &out_dir.join("burgers_final_slice.png"),
    )?;
    heatmap(&field, &out_dir.join("burgers_space_time.png"))?;
    heatmap(&reference, &out_dir.join("burgers_reference.png"))?;
    println!("plots in {}", out_dir.display());
    Ok(())
}
