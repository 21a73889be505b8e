//! Evaluation protocol: error reports with cross-sections, repeated-trial
//! robustness statistics, the smoothing-ablation stability table, and the
//! convergence-trace CSV export.

use crate::data::atomic_write;
use crate::diffusion::{NoisePredictor, NoiseSchedule};
use crate::error::{Error, Result};
use crate::grid::{max_abs_error, relative_l2, Field};
use crate::problem::PdeProblem;
use crate::sampler::{physics_only_solve, sample_with_schedule, GuidanceConfig, SamplerTrace};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Where a 1D profile is cut out of a field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Section {
    /// Profile along x at a fixed y node.
    AtY(usize),
    /// Profile along y at a fixed x node.
    AtX(usize),
}

impl Section {
    /// Default cut for an equation: the mid-height row for steady problems,
    /// the final-time column for space-time problems.
    pub fn default_for(p: &PdeProblem) -> Section {
        if p.equation.is_space_time() {
            Section::AtY(p.grid.ny - 1)
        } else {
            // y = 0.5 has no exact node on even grids; round to the nearest
            // node and report its actual coordinate.
            Section::AtY(((p.grid.ny - 1) as f64 * 0.5).round() as usize)
        }
    }
}

/// Extracted cross-section pair.
#[derive(Debug, Clone)]
pub struct CrossSection {
    pub section: Section,
    /// Physical coordinate of the cut (the fixed axis value).
    pub coordinate: f64,
    pub predicted: Vec<f64>,
    pub reference: Vec<f64>,
}

/// Full error report for one predicted field.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub relative_l2: f64,
    pub max_abs_error: f64,
    pub error_field: Field,
    pub cross_section: CrossSection,
    pub runtime_seconds: f64,
    pub config_echo: String,
}

impl EvalReport {
    /// Two-column CSV of the scalar metrics plus the profile pair.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str("metric,value\n");
        out.push_str(&format!("relative_l2,{:.10e}\n", self.relative_l2));
        out.push_str(&format!("max_abs_error,{:.10e}\n", self.max_abs_error));
        out.push_str(&format!(
            "section_coordinate,{:.10e}\n",
            self.cross_section.coordinate
        ));
        out.push_str(&format!("runtime_seconds,{:.6}\n", self.runtime_seconds));
        out.push_str("index,predicted,reference\n");
        for (i, (p, r)) in self
            .cross_section
            .predicted
            .iter()
            .zip(&self.cross_section.reference)
            .enumerate()
        {
            out.push_str(&format!("{i},{p:.10e},{r:.10e}\n"));
        }
        atomic_write(path, out.as_bytes())
    }
}

/// Compare a prediction against a reference field.
pub fn evaluate(pred: &Field, reference: &Field, section: Section) -> Result<EvalReport> {
    pred.same_grid(reference)?;
    let rel = relative_l2(pred, reference)?;
    let mae = max_abs_error(pred, reference)?;
    let error_field = pred.zip(reference, |a, b| (a - b).abs())?;
    let spec = pred.spec();
    let (coordinate, predicted, reference_profile) = match section {
        Section::AtY(j) => {
            if j >= spec.ny {
                return Err(Error::InvalidParameter(format!(
                    "section row {j} outside grid with ny = {}",
                    spec.ny
                )));
            }
            (spec.y(j), pred.profile_at_y(j), reference.profile_at_y(j))
        }
        Section::AtX(i) => {
            if i >= spec.nx {
                return Err(Error::InvalidParameter(format!(
                    "section column {i} outside grid with nx = {}",
                    spec.nx
                )));
            }
            (spec.x(i), pred.profile_at_x(i), reference.profile_at_x(i))
        }
    };
    Ok(EvalReport {
        relative_l2: rel,
        max_abs_error: mae,
        error_field,
        cross_section: CrossSection {
            section,
            coordinate,
            predicted,
            reference: reference_profile,
        },
        runtime_seconds: 0.0,
        config_echo: String::new(),
    })
}

/// Mean/spread of percent relative L2 over repeated seeded inference runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobustnessSummary {
    pub coefficient: f64,
    pub trials: usize,
    pub failures: usize,
    /// Percent relative L2 per successful trial, in trial order.
    pub values_pct: Vec<f64>,
    pub mean_pct: f64,
    /// Population standard deviation (a single trial reports 0).
    pub std_pct: f64,
}

impl RobustnessSummary {
    fn from_values(coefficient: f64, trials: usize, failures: usize, values_pct: Vec<f64>) -> Self {
        let n = values_pct.len().max(1) as f64;
        let mean = values_pct.iter().sum::<f64>() / n;
        let var = values_pct.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self {
            coefficient,
            trials,
            failures,
            values_pct,
            mean_pct: mean,
            std_pct: var.sqrt(),
        }
    }
}

/// Run `n_trials` independent seeded samples of one problem and summarize
/// the percent relative L2 against `reference`. Trials run in parallel;
/// trial `i` uses seed `base_seed + i`, so the summary is deterministic.
/// Unstable trials are counted as failures, not fatal errors.
pub fn robustness(
    model: &impl NoisePredictor,
    problem: &PdeProblem,
    cfg: &GuidanceConfig,
    schedule: &NoiseSchedule,
    reference: &Field,
    n_trials: usize,
    base_seed: u64,
) -> Result<RobustnessSummary> {
    if n_trials == 0 {
        return Err(Error::InvalidParameter("robustness needs >= 1 trial".into()));
    }
    let outcomes: Vec<Option<f64>> = (0..n_trials)
        .into_par_iter()
        .map(|i| {
            let trial_cfg = GuidanceConfig {
                seed: base_seed + i as u64,
                snapshot_stride: 0,
                ..cfg.clone()
            };
            match sample_with_schedule(model, problem, &trial_cfg, schedule, None) {
                Ok((field, _)) => relative_l2(&field, reference).ok().map(|r| 100.0 * r),
                Err(_) => None,
            }
        })
        .collect();
    let failures = outcomes.iter().filter(|o| o.is_none()).count();
    let values: Vec<f64> = outcomes.into_iter().flatten().collect();
    if values.is_empty() {
        return Err(Error::GuidanceInstability {
            step: 0,
            last_energy: f64::NAN,
        });
    }
    Ok(RobustnessSummary::from_values(
        problem.coefficient(),
        n_trials,
        failures,
        values,
    ))
}

/// Write per-trial rows (`coefficient,trial,rel_l2_pct`).
pub fn write_trials_csv(summaries: &[RobustnessSummary], path: &Path) -> Result<()> {
    let mut out = String::from("coefficient,trial,rel_l2_pct\n");
    for s in summaries {
        for (i, v) in s.values_pct.iter().enumerate() {
            out.push_str(&format!("{},{},{:.6}\n", s.coefficient, i, v));
        }
    }
    atomic_write(path, out.as_bytes())
}

/// Write the per-coefficient summary table
/// (`coefficient,trials,failures,mean_pct,std_pct`).
pub fn write_summary_csv(summaries: &[RobustnessSummary], path: &Path) -> Result<()> {
    let mut out = String::from("coefficient,trials,failures,mean_pct,std_pct\n");
    for s in summaries {
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6}\n",
            s.coefficient, s.trials, s.failures, s.mean_pct, s.std_pct
        ));
    }
    atomic_write(path, out.as_bytes())
}

/// One cell of the smoothing ablation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub dt: f64,
    pub smoothed: bool,
    pub stable: bool,
    pub final_rel_l2: Option<f64>,
}

/// For each `dt` in the grid, run physics-only inference with and without
/// smoothing and classify stability: the run must finish with finite values
/// and a final relative L2 below 1.
pub fn ablate_smoothing(
    problem: &PdeProblem,
    reference: &Field,
    base: &GuidanceConfig,
    dt_grid: &[f64],
    sigma_on: f64,
    sigma_off: f64,
) -> Result<Vec<AblationRow>> {
    if dt_grid.is_empty() || dt_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "ablation needs a strictly increasing dt grid".into(),
        ));
    }
    let cells: Vec<(f64, bool)> = dt_grid
        .iter()
        .flat_map(|&dt| [(dt, true), (dt, false)])
        .collect();
    let rows: Vec<AblationRow> = cells
        .par_iter()
        .map(|&(dt, smoothed)| {
            let cfg = GuidanceConfig {
                guidance_dt: dt,
                sigma: if smoothed { sigma_on } else { sigma_off },
                snapshot_stride: 0,
                ..base.clone()
            };
            match physics_only_solve(problem, &cfg, None) {
                Ok((field, _)) => {
                    let rel = relative_l2(&field, reference).ok();
                    let stable = rel.map(|r| r.is_finite() && r < 1.0).unwrap_or(false);
                    AblationRow {
                        dt,
                        smoothed,
                        stable,
                        final_rel_l2: rel,
                    }
                }
                Err(_) => AblationRow {
                    dt,
                    smoothed,
                    stable: false,
                    final_rel_l2: None,
                },
            }
        })
        .collect();
    Ok(rows)
}

/// Largest dt classified stable in one arm of an ablation table.
pub fn max_stable_dt(rows: &[AblationRow], smoothed: bool) -> Option<f64> {
    rows.iter()
        .filter(|r| r.smoothed == smoothed && r.stable)
        .map(|r| r.dt)
        .fold(None, |acc, dt| Some(acc.map_or(dt, |a: f64| a.max(dt))))
}

pub fn write_ablation_csv(rows: &[AblationRow], path: &Path) -> Result<()> {
    let mut out = String::from("dt,smoothed,stable,final_rel_l2\n");
    for r in rows {
        out.push_str(&format!(
            "{:.6e},{},{},{}\n",
            r.dt,
            r.smoothed,
            r.stable,
            r.final_rel_l2
                .map(|v| format!("{v:.6e}"))
                .unwrap_or_else(|| "nan".into())
        ));
    }
    atomic_write(path, out.as_bytes())
}

/// Export a sampling trace as `step,energy,residual_norm,rel_l2` CSV.
pub fn convergence_trace_export(trace: &SamplerTrace, path: &Path) -> Result<()> {
    let mut out = String::from("step,energy,residual_norm,rel_l2\n");
    for s in &trace.snapshots {
        out.push_str(&format!(
            "{},{:.10e},{:.10e},{}\n",
            s.step,
            s.energy,
            s.residual_norm,
            s.rel_l2
                .map(|v| format!("{v:.10e}"))
                .unwrap_or_default()
        ));
    }
    atomic_write(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::EquationKind;
    use crate::grid::GridSpec;
    use crate::problem::PdeProblem;
    use crate::rng::rng_from_seed;
    use crate::sampler::{GuidanceMode, Snapshot};
    use crate::solve::reference_solution;

    struct ZeroModel;
    impl NoisePredictor for ZeroModel {
        fn predict_noise(&self, u: &Field, _t: usize) -> Result<Field> {
            Ok(Field::zeros(u.spec()))
        }
    }

    #[test]
    fn evaluate_perfect_prediction_is_all_zero() {
        let spec = GridSpec::unit_square(8).unwrap();
        let mut rng = rng_from_seed(1);
        let f = Field::standard_normal(spec, &mut rng);
        let r = evaluate(&f, &f, Section::AtY(4)).unwrap();
        assert_eq!(r.relative_l2, 0.0);
        assert_eq!(r.max_abs_error, 0.0);
        assert_eq!(r.error_field.linf_norm(), 0.0);
        assert_eq!(r.cross_section.predicted, r.cross_section.reference);
    }

    #[test]
    fn evaluate_swap_safety() {
        let spec = GridSpec::unit_square(8).unwrap();
        let mut rng = rng_from_seed(2);
        let a = Field::standard_normal(spec, &mut rng);
        let b = Field::standard_normal(spec, &mut rng);
        let r1 = evaluate(&a, &b, Section::AtY(0)).unwrap();
        let r2 = evaluate(&b, &a, Section::AtY(0)).unwrap();
        assert_eq!(r1.max_abs_error, r2.max_abs_error);
        assert_ne!(r1.relative_l2, r2.relative_l2);
    }

    #[test]
    fn default_section_rounds_to_node_32_on_64_grid() {
        let p = PdeProblem::poisson(1.0, GridSpec::unit_square(64).unwrap()).unwrap();
        match Section::default_for(&p) {
            Section::AtY(j) => {
                assert_eq!(j, 32);
                assert!((p.grid.y(j) - 0.5079).abs() < 1e-3);
            }
            _ => panic!("poisson default must cut at fixed y"),
        }
        let ph = PdeProblem::heat(0.03, GridSpec::unit_square(64).unwrap()).unwrap();
        assert_eq!(Section::default_for(&ph), Section::AtY(63));
    }

    #[test]
    fn robustness_single_trial_has_zero_std_and_self_consistent_mean() {
        let grid = GridSpec::unit_square(16).unwrap();
        let p = PdeProblem::poisson(1.35, grid).unwrap();
        let reference = reference_solution(&p).unwrap();
        let schedule = NoiseSchedule::linear(20).unwrap();
        let cfg = GuidanceConfig {
            steps: 20,
            ..GuidanceConfig::guided_default(EquationKind::Poisson)
        };
        let s = robustness(&ZeroModel, &p, &cfg, &schedule, &reference, 1, 7).unwrap();
        assert_eq!(s.trials, 1);
        assert_eq!(s.std_pct, 0.0);
        let s3 = robustness(&ZeroModel, &p, &cfg, &schedule, &reference, 3, 7).unwrap();
        let mean = s3.values_pct.iter().sum::<f64>() / s3.values_pct.len() as f64;
        assert!((s3.mean_pct - mean).abs() < 1e-12);
        // Deterministic given the base seed.
        let s3b = robustness(&ZeroModel, &p, &cfg, &schedule, &reference, 3, 7).unwrap();
        assert_eq!(s3.values_pct, s3b.values_pct);
    }

    #[test]
    fn ablation_classifies_the_stability_split() {
        // Small grid for speed: thresholds scale with h^2; at 16x16 and
        // kappa 0.9 the unsmoothed explicit limit is h^2/(4 kappa) ~ 1.2e-3.
        let grid = GridSpec::unit_square(16).unwrap();
        let p = PdeProblem::poisson(0.9, grid).unwrap();
        let reference = reference_solution(&p).unwrap();
        let base = GuidanceConfig {
            mode: GuidanceMode::PhysicsOnly,
            iterations: 4000,
            ..GuidanceConfig::physics_only_default(EquationKind::Poisson)
        };
        let rows = ablate_smoothing(&p, &reference, &base, &[8.0e-4, 2.4e-3], 0.9, 0.0).unwrap();
        assert_eq!(rows.len(), 4);
        let off_low = rows.iter().find(|r| !r.smoothed && r.dt == 8.0e-4).unwrap();
        let off_high = rows.iter().find(|r| !r.smoothed && r.dt == 2.4e-3).unwrap();
        let on_high = rows.iter().find(|r| r.smoothed && r.dt == 2.4e-3).unwrap();
        assert!(off_low.stable);
        assert!(!off_high.stable);
        assert!(on_high.stable);
        assert_eq!(max_stable_dt(&rows, false), Some(8.0e-4));
        assert_eq!(max_stable_dt(&rows, true), Some(2.4e-3));
        // Deterministic classification.
        let rows2 = ablate_smoothing(&p, &reference, &base, &[8.0e-4, 2.4e-3], 0.9, 0.0).unwrap();
        for (a, b) in rows.iter().zip(&rows2) {
            assert_eq!(a.stable, b.stable);
            assert_eq!(a.final_rel_l2, b.final_rel_l2);
        }
    }

    #[test]
    fn trace_export_row_counts() {
        let dir = std::env::temp_dir().join(format!("pdediff-eval-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("trace.csv");
        let empty = SamplerTrace::default();
        convergence_trace_export(&empty, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1, "header-only for an empty trace");
        let spec = GridSpec::unit_square(8).unwrap();
        let mut trace = SamplerTrace::default();
        for k in 0..5 {
            trace.snapshots.push(Snapshot {
                step: 5 - k,
                field: Field::zeros(spec),
                energy: k as f64,
                residual_norm: (2.0 * k as f64).sqrt(),
                rel_l2: None,
            });
        }
        convergence_trace_export(&trace, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 6);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn ablation_rejects_untidy_grid() {
        let grid = GridSpec::unit_square(8).unwrap();
        let p = PdeProblem::poisson(1.0, grid).unwrap();
        let reference = reference_solution(&p).unwrap();
        let base = GuidanceConfig::physics_only_default(EquationKind::Poisson);
        assert!(ablate_smoothing(&p, &reference, &base, &[], 0.9, 0.0).is_err());
        assert!(ablate_smoothing(&p, &reference, &base, &[2e-4, 1e-4], 0.9, 0.0).is_err());
    }
}
