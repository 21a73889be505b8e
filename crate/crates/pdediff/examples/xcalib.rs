// Scratch calibration runs (deleted before release).
use pdediff::data::{generate_dataset, normalize, EquationKind};
use pdediff::diffusion::{train, NoiseSchedule, TrainConfig};
use pdediff::grid::{relative_l2, GridSpec};
use pdediff::nn::ArchConfig;
use pdediff::problem::PdeProblem;
use pdediff::sampler::{sample_with_schedule, GuidanceConfig, GuidanceMode};
use pdediff::solve::reference_solution;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

fn medians(
    model: &pdediff::diffusion::Denoiser,
    schedule: &NoiseSchedule,
    problem: &PdeProblem,
    reference: &pdediff::grid::Field,
    base: &GuidanceConfig,
) -> (f64, f64) {
    let runs = |mode: GuidanceMode| -> Vec<f64> {
        (0..5u64)
            .map(|seed| {
                let cfg = GuidanceConfig {
                    mode,
                    seed,
                    snapshot_stride: 0,
                    ..base.clone()
                };
                match sample_with_schedule(model, problem, &cfg, schedule, None) {
                    Ok((u, _)) => relative_l2(&u, reference).unwrap(),
                    Err(_) => f64::INFINITY,
                }
            })
            .collect()
    };
    (median(runs(GuidanceMode::Guided)), median(runs(GuidanceMode::Unguided)))
}

fn main() {
    let g32 = GridSpec::unit_square(32).unwrap();
    let schedule = NoiseSchedule::linear(1000).unwrap();
    let arch = ArchConfig::smoke(8);

    // Burgers margin hunt.
    let dsb = normalize(generate_dataset(EquationKind::Burgers, 384, 0.01, 0.03, g32, 23).unwrap())
        .unwrap();
    for epochs in [65usize, 75] {
        let cfgb = TrainConfig {
            epochs,
            batch_size: 16,
            seed: 8,
            ..TrainConfig::default()
        };
        let (mb, _) = train(&dsb, arch, 1000, &cfgb).unwrap();
        let pbb = PdeProblem::burgers(0.03, g32).unwrap();
        let br = reference_solution(&pbb).unwrap();
        for (dt, sigma) in [(6.0e-3, 0.3), (7.0e-3, 0.3), (6.0e-3, 0.2), (7.0e-3, 0.2)] {
            let base = GuidanceConfig {
                steps: 1000,
                guidance_dt: dt,
                sigma,
                ..GuidanceConfig::guided_default(EquationKind::Burgers)
            };
            let (g, u) = medians(&mb, &schedule, &pbb, &br, &base);
            println!(
                "burg ep={epochs} dt={dt:.1e} sig={sigma}: guided={g:.4} unguided={u:.4} ratio={:.2}",
                u / g
            );
        }
    }

    // Poisson fixture exactly as the acceptance suite trains it.
    let dsp = normalize(generate_dataset(EquationKind::Poisson, 512, 1.0, 2.0, g32, 21).unwrap())
        .unwrap();
    let cfgp = TrainConfig {
        epochs: 94,
        batch_size: 16,
        seed: 5,
        ..TrainConfig::default()
    };
    let (mp, trp) = train(&dsp, arch, 1000, &cfgp).unwrap();
    println!(
        "poisson 94ep: {} iters, loss head {:.4} tail {:.4}",
        trp.len(),
        trp[..500].iter().map(|r| r.loss).sum::<f64>() / 500.0,
        trp[2500..3000].iter().map(|r| r.loss).sum::<f64>() / 500.0
    );
    let base = GuidanceConfig {
        steps: 750,
        guidance_dt: 6.7e-4,
        ..GuidanceConfig::guided_default(EquationKind::Poisson)
    };
    for kappa in [1.35, 2.05] {
        let pp = PdeProblem::poisson(kappa, g32).unwrap();
        let pr = reference_solution(&pp).unwrap();
        let (g, u) = medians(&mp, &schedule, &pp, &pr, &base);
        println!("poisson k={kappa}: guided={g:.4} unguided={u:.4} ratio={:.2}", u / g);
    }
    // B9 std over 20 trials.
    let pp = PdeProblem::poisson(1.35, g32).unwrap();
    let pr = reference_solution(&pp).unwrap();
    let s = pdediff::eval::robustness(&mp, &pp, &base, &schedule, &pr, 20, 1000).unwrap();
    println!(
        "poisson B9: mean={:.3}% std={:.3}% failures={}",
        s.mean_pct, s.std_pct, s.failures
    );

    // Heat fixture exactly as the suite trains it.
    let dsh = normalize(generate_dataset(EquationKind::Heat, 384, 0.02, 0.05, g32, 22).unwrap())
        .unwrap();
    let cfgh = TrainConfig {
        epochs: 50,
        batch_size: 16,
        seed: 6,
        ..TrainConfig::default()
    };
    let (mh, _) = train(&dsh, arch, 1000, &cfgh).unwrap();
    let phh = PdeProblem::heat(0.031, g32).unwrap();
    let hr = reference_solution(&phh).unwrap();
    let base = GuidanceConfig {
        steps: 750,
        guidance_dt: 8.0e-4,
        ..GuidanceConfig::guided_default(EquationKind::Heat)
    };
    let (g, u) = medians(&mh, &schedule, &phh, &hr, &base);
    println!("heat a=0.031: guided={g:.4} unguided={u:.4} ratio={:.2}", u / g);
}
