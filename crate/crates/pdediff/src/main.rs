//! Batch command-line entry point. Every capability lives in the library
//! (see `examples/` for runnable walkthroughs); this binary wraps them as
//! subcommands for scripted pipelines:
//!
//! `gen` -> `train` -> `sample` -> `eval`, plus `bench` (robustness
//! statistics), `ablate` (smoothing stability table), and `plot`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data/format error,
//! 4 numeric instability, 5 I/O error.

use clap::{Args, Parser, Subcommand};
use pdediff::data::{
    atomic_write, generate_dataset, load_dataset, load_field, normalize, save_dataset, save_field,
    EquationKind,
};
use pdediff::diffusion::{train, Denoiser, NoiseSchedule, TrainConfig, T_TRAIN_DEFAULT};
use pdediff::error::{Error, ErrorCategory};
use pdediff::eval::{
    ablate_smoothing, convergence_trace_export, evaluate, max_stable_dt, robustness,
    write_ablation_csv, write_summary_csv, write_trials_csv, Section,
};
use pdediff::grid::GridSpec;
use pdediff::nn::ArchConfig;
use pdediff::plot::{heatmap, profile_plot};
use pdediff::sampler::{sample_with_schedule, GuidanceConfig, GuidanceMode};
use pdediff::solve::reference_solution;
use pdediff::Result;
use serde::Serialize;
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(name = "pdediff", version, about = "Physics-guided diffusion PDE solving")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON file with defaults for this command's flags (flags win).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a normalized training dataset of solver outputs.
    Gen {
        #[arg(long)]
        equation: EquationKind,
        #[arg(long, default_value_t = 4000)]
        n: usize,
        #[arg(long)]
        coef_min: Option<f64>,
        #[arg(long)]
        coef_max: Option<f64>,
        /// Nodes per axis of the square grid.
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train the denoiser on a dataset directory.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Defaults to the per-equation setting (400/200/300).
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long, default_value_t = 64)]
        batch_size: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 64)]
        base_width: usize,
        /// Diffusion steps the schedule is trained over.
        #[arg(long, default_value_t = T_TRAIN_DEFAULT)]
        t_train: usize,
        #[arg(long)]
        out: PathBuf,
        /// Loss trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Sample one field by reverse diffusion (or physics-only descent).
    Sample {
        /// Checkpoint path; optional in physics-only mode.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        equation: EquationKind,
        /// Equation coefficient (kappa, alpha, or nu).
        #[arg(long)]
        coef: f64,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        guidance_dt: Option<f64>,
        #[arg(long, default_value_t = 0.9)]
        sigma: f64,
        #[arg(long, value_enum, default_value_t = ModeArg::Guided)]
        mode: ModeArg,
        /// Grid nodes per axis (physics-only mode without a model).
        #[arg(long)]
        grid: Option<usize>,
        /// Physics-only iteration count.
        #[arg(long)]
        iterations: Option<usize>,
        /// Physics-only initial noise temperature.
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        #[arg(long)]
        out: PathBuf,
        /// Convergence trace CSV (step, energy, residual norm, rel L2).
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Compare a sampled field against the reference solver.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        equation: EquationKind,
        #[arg(long)]
        coef: f64,
        #[arg(long)]
        report: PathBuf,
        /// Directory for the error-map and profile PNGs.
        #[arg(long)]
        plots: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Repeated-trial robustness statistics for a list of coefficients.
    Bench {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        equation: EquationKind,
        /// Comma-separated coefficient list.
        #[arg(long, value_delimiter = ',')]
        coefs: Vec<f64>,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        guidance_dt: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Smoothing-ablation stability table over a dt grid.
    Ablate {
        #[arg(long, default_value = "poisson")]
        equation: EquationKind,
        #[arg(long, default_value_t = 0.90)]
        coef: f64,
        /// Comma-separated increasing dt values; a built-in grid spanning
        /// the documented thresholds is used when omitted.
        #[arg(long, value_delimiter = ',')]
        dt_grid: Vec<f64>,
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[arg(long, default_value_t = 0.9)]
        sigma_on: f64,
        #[arg(long, default_value_t = 20000)]
        iterations: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Render a field file as a heatmap (plus optional profile vs a
    /// reference field).
    Plot {
        #[arg(long, name = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, name = "ref")]
        reference: Option<PathBuf>,
        /// Fractional y position of the profile cut.
        #[arg(long, default_value_t = 0.5)]
        section_y: f64,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(clap::ValueEnum, Clone, Copy, PartialEq)]
enum ModeArg {
    Guided,
    Unguided,
    PhysicsOnly,
}

impl From<ModeArg> for GuidanceMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Guided => GuidanceMode::Guided,
            ModeArg::Unguided => GuidanceMode::Unguided,
            ModeArg::PhysicsOnly => GuidanceMode::PhysicsOnly,
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e.category() {
                ErrorCategory::Config => 2,
                ErrorCategory::Data => 3,
                ErrorCategory::NumericInstability => 4,
                ErrorCategory::Io => 5,
            };
            std::process::exit(code);
        }
    }
}

/// Load `--config` JSON (if any) and overlay the effective flag values,
/// then write the merged result next to the output as `<out>.config.json`.
fn echo_config<T: Serialize>(common: &Common, effective: &T, out: &Path) -> Result<()> {
    let mut merged = match &common.config {
        Some(path) => {
            let v: Value = serde_json::from_slice(&std::fs::read(path)?)?;
            if !v.is_object() {
                return Err(Error::InvalidParameter(
                    "--config must contain a JSON object".into(),
                ));
            }
            v
        }
        None => Value::Object(Default::default()),
    };
    let eff = serde_json::to_value(effective)?;
    if let (Value::Object(m), Value::Object(e)) = (&mut merged, eff) {
        for (k, v) in e {
            m.insert(k, v);
        }
    }
    let sidecar = out.with_extension(format!(
        "{}config.json",
        out.extension()
            .map(|e| format!("{}.", e.to_string_lossy()))
            .unwrap_or_default()
    ));
    atomic_write(&sidecar, &serde_json::to_vec_pretty(&merged)?)?;
    Ok(())
}

/// Read one optional override from the `--config` JSON object.
fn config_value<T: serde::de::DeserializeOwned>(common: &Common, key: &str) -> Result<Option<T>> {
    let Some(path) = &common.config else {
        return Ok(None);
    };
    let v: Value = serde_json::from_slice(&std::fs::read(path)?)?;
    match v.get(key) {
        Some(x) => Ok(Some(serde_json::from_value(x.clone())?)),
        None => Ok(None),
    }
}

fn default_epochs(eq: EquationKind) -> usize {
    match eq {
        EquationKind::Poisson => 400,
        EquationKind::Heat => 200,
        EquationKind::Burgers => 300,
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen {
            equation,
            n,
            coef_min,
            coef_max,
            grid,
            out,
            common,
        } => {
            let (dmin, dmax) = equation.default_coef_range();
            let coef_min = match coef_min {
                Some(v) => v,
                None => config_value(&common, "coef_min")?.unwrap_or(dmin),
            };
            let coef_max = match coef_max {
                Some(v) => v,
                None => config_value(&common, "coef_max")?.unwrap_or(dmax),
            };
            let spec = GridSpec::unit_square(grid)?;
            let dataset = normalize(generate_dataset(
                equation, n, coef_min, coef_max, spec, common.seed,
            )?)?;
            save_dataset(&dataset, &out)?;
            #[derive(Serialize)]
            struct Echo {
                equation: EquationKind,
                n: usize,
                coef_min: f64,
                coef_max: f64,
                grid: usize,
                seed: u64,
                scale: f64,
            }
            echo_config(
                &common,
                &Echo {
                    equation,
                    n,
                    coef_min,
                    coef_max,
                    grid,
                    seed: common.seed,
                    scale: dataset.scale,
                },
                &out.join("dataset"),
            )?;
            println!(
                "generated {} {} samples on {}x{} (scale {:.6})",
                dataset.len(),
                equation.name(),
                grid,
                grid,
                dataset.scale
            );
            Ok(())
        }
        Command::Train {
            data,
            epochs,
            batch_size,
            lr,
            base_width,
            t_train,
            out,
            trace,
            common,
        } => {
            let dataset = load_dataset(&data)?;
            let epochs = match epochs {
                Some(e) => e,
                None => config_value(&common, "epochs")?.unwrap_or(default_epochs(dataset.equation)),
            };
            let cfg = TrainConfig {
                epochs,
                batch_size,
                learning_rate: lr,
                lr_halve_every: 100,
                seed: common.seed,
                threads: rayon::current_num_threads(),
            };
            let arch = if base_width == 64 {
                ArchConfig::default()
            } else {
                ArchConfig::smoke(base_width)
            };
            let t0 = Instant::now();
            let (model, rows) = train(&dataset, arch, t_train, &cfg)?;
            model.save(&out)?;
            if let Some(tpath) = &trace {
                pdediff::diffusion::write_trace_csv(&rows, tpath)?;
            }
            echo_config(&common, &cfg, &out)?;
            println!(
                "trained {} parameters for {} iterations in {:.1}s (final loss {:.4e}) -> {}",
                model.param_count(),
                rows.len(),
                t0.elapsed().as_secs_f64(),
                rows.last().map(|r| r.loss).unwrap_or(f64::NAN),
                out.display()
            );
            Ok(())
        }
        Command::Sample {
            model,
            equation,
            coef,
            steps,
            guidance_dt,
            sigma,
            mode,
            grid,
            iterations,
            epsilon,
            out,
            trace,
            common,
        } => {
            let mode: GuidanceMode = mode.into();
            let t0 = Instant::now();
            let (problem, schedule, scale, denoiser) = match (&model, mode) {
                (Some(path), _) => {
                    let d = Denoiser::load(path)?;
                    let g = d.meta.grid;
                    (equation.problem(coef, g)?, d.schedule()?, d.meta.scale, Some(d))
                }
                (None, GuidanceMode::PhysicsOnly) => {
                    let g = GridSpec::unit_square(grid.unwrap_or(64))?;
                    (
                        equation.problem(coef, g)?,
                        NoiseSchedule::linear(T_TRAIN_DEFAULT)?,
                        1.0,
                        None,
                    )
                }
                (None, _) => {
                    return Err(Error::InvalidParameter(
                        "--model is required unless --mode physics-only".into(),
                    ))
                }
            };
            let mut cfg = match mode {
                GuidanceMode::PhysicsOnly => GuidanceConfig::physics_only_for(&problem),
                _ => GuidanceConfig::guided_default(equation),
            };
            cfg.mode = mode;
            cfg.scale = scale;
            cfg.seed = common.seed;
            cfg.sigma = sigma;
            cfg.snapshot_stride = 25;
            if let Some(s) = steps {
                cfg.steps = s;
            }
            if let Some(dt) = guidance_dt {
                cfg.guidance_dt = dt;
            }
            if let Some(it) = iterations {
                cfg.iterations = it;
            }
            cfg.epsilon_init = epsilon;
            let reference = reference_solution(&problem).ok();
            let (field, run_trace) = match (&denoiser, mode) {
                (_, GuidanceMode::PhysicsOnly) => {
                    pdediff::sampler::physics_only_solve(&problem, &cfg, reference.as_ref())?
                }
                (Some(d), _) => {
                    sample_with_schedule(d, &problem, &cfg, &schedule, reference.as_ref())?
                }
                (None, _) => unreachable!("checked above"),
            };
            save_field(&field, &out)?;
            if let Some(tpath) = &trace {
                convergence_trace_export(&run_trace, tpath)?;
            }
            echo_config(&common, &cfg, &out)?;
            println!(
                "sampled {} coef {} in {:.1}s -> {}",
                equation.name(),
                coef,
                t0.elapsed().as_secs_f64(),
                out.display()
            );
            Ok(())
        }
        Command::Eval {
            pred,
            equation,
            coef,
            report,
            plots,
            common,
        } => {
            let field = load_field(&pred)?;
            let problem = equation.problem(coef, field.spec())?;
            let reference = reference_solution(&problem)?;
            let t0 = Instant::now();
            let mut rep = evaluate(&field, &reference, Section::default_for(&problem))?;
            rep.runtime_seconds = t0.elapsed().as_secs_f64();
            rep.write_csv(&report)?;
            if let Some(dir) = &plots {
                std::fs::create_dir_all(dir)?;
                heatmap(&field, &dir.join("prediction.png"))?;
                heatmap(&reference, &dir.join("reference.png"))?;
                heatmap(&rep.error_field, &dir.join("error.png"))?;
                profile_plot(
                    &[
                        ("predicted", &rep.cross_section.predicted),
                        ("reference", &rep.cross_section.reference),
                    ],
                    &dir.join("profile.png"),
                )?;
            }
            #[derive(Serialize)]
            struct Echo {
                equation: EquationKind,
                coef: f64,
                relative_l2: f64,
                max_abs_error: f64,
            }
            echo_config(
                &common,
                &Echo {
                    equation,
                    coef,
                    relative_l2: rep.relative_l2,
                    max_abs_error: rep.max_abs_error,
                },
                &report,
            )?;
            println!(
                "relative_l2 {:.4e}, max_abs_error {:.4e}",
                rep.relative_l2, rep.max_abs_error
            );
            Ok(())
        }
        Command::Bench {
            model,
            equation,
            coefs,
            trials,
            steps,
            guidance_dt,
            out,
            common,
        } => {
            if coefs.is_empty() {
                return Err(Error::InvalidParameter("--coefs must be nonempty".into()));
            }
            let d = Denoiser::load(&model)?;
            let schedule = d.schedule()?;
            let mut cfg = GuidanceConfig::guided_default(equation);
            cfg.scale = d.meta.scale;
            if let Some(s) = steps {
                cfg.steps = s;
            }
            if let Some(dt) = guidance_dt {
                cfg.guidance_dt = dt;
            }
            let mut summaries = Vec::new();
            for &coef in &coefs {
                let problem = equation.problem(coef, d.meta.grid)?;
                let reference = reference_solution(&problem)?;
                let s = robustness(&d, &problem, &cfg, &schedule, &reference, trials, common.seed)?;
                println!(
                    "coef {}: mean {:.3}% std {:.3}% over {} trials ({} failed)",
                    coef, s.mean_pct, s.std_pct, s.trials, s.failures
                );
                summaries.push(s);
            }
            write_summary_csv(&summaries, &out)?;
            let trials_path = out.with_extension("trials.csv");
            write_trials_csv(&summaries, &trials_path)?;
            echo_config(&common, &cfg, &out)?;
            Ok(())
        }
        Command::Ablate {
            equation,
            coef,
            dt_grid,
            grid,
            sigma_on,
            iterations,
            out,
            common,
        } => {
            let spec = GridSpec::unit_square(grid)?;
            let problem = equation.problem(coef, spec)?;
            let reference = reference_solution(&problem)?;
            let dt_grid = if dt_grid.is_empty() {
                // Brackets the documented thresholds at kappa = 0.9, 64x64.
                vec![3.5e-5, 7.0e-5, 1.5e-4, 3.0e-4, 6.7e-4, 7.5e-4, 1.5e-3]
            } else {
                dt_grid
            };
            let base = GuidanceConfig {
                iterations,
                // The ablation measures the literal smoothing composite.
                project_guidance_argument: false,
                seed: common.seed,
                ..GuidanceConfig::physics_only_default(equation)
            };
            let rows = ablate_smoothing(&problem, &reference, &base, &dt_grid, sigma_on, 0.0)?;
            write_ablation_csv(&rows, &out)?;
            echo_config(&common, &base, &out)?;
            for smoothed in [false, true] {
                println!(
                    "max stable dt ({}): {}",
                    if smoothed { "smoothed" } else { "unsmoothed" },
                    max_stable_dt(&rows, smoothed)
                        .map(|v| format!("{v:.2e}"))
                        .unwrap_or_else(|| "none".into())
                );
            }
            Ok(())
        }
        Command::Plot {
            input,
            out,
            reference,
            section_y,
            common,
        } => {
            let field = load_field(&input)?;
            heatmap(&field, &out)?;
            if let Some(ref_path) = &reference {
                let ref_field = load_field(ref_path)?;
                field.same_grid(&ref_field)?;
                let j = ((field.spec().ny - 1) as f64 * section_y).round() as usize;
                let pred = field.profile_at_y(j);
                let refp = ref_field.profile_at_y(j);
                let profile_out = out.with_extension("profile.png");
                profile_plot(&[("predicted", &pred), ("reference", &refp)], &profile_out)?;
            }
            #[derive(Serialize)]
            struct Echo {
                section_y: f64,
                seed: u64,
            }
            echo_config(
                &common,
                &Echo {
                    section_y,
                    seed: common.seed,
                },
                &out,
            )?;
            Ok(())
        }
    }
}
