//! Reverse-diffusion sampling with physics-guided inference, the unguided
//! ablation sampler, and the physics-only annealed Langevin / residual
//! descent solver.
//!
//! One guided step composes, in order:
//! 1. the learned reverse update
//!    `u <- (u - beta_t / sqrt(1 - abar_t) * eps(u, t)) / sqrt(alpha_t)
//!    + sqrt(beta_t) * xi`,
//! 2. Gaussian smoothing (of the state itself, or only of the argument the
//!    residual is evaluated at — see [`SmoothingTarget`]),
//! 3. residual descent `u <- u - (dt / s) * R(s * u)` in de-normalized
//!    units,
//! 4. hard boundary projection.
//!
//! The sampler state lives in the normalized space of the training data
//! (scale `s`); physics always sees physical units.

use crate::data::EquationKind;
use crate::diffusion::{NoisePredictor, NoiseSchedule};
use crate::error::{Error, Result};
use crate::grid::{gaussian_smooth, project_boundary, relative_l2, Field, SmoothingKernel};
use crate::problem::{energy, residual, residual_adjoint, PdeProblem};
use crate::rng::{rng_from_seed, SeedRng};
use serde::{Deserialize, Serialize};

/// How the sampler treats the learned prior and the physics term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuidanceMode {
    Guided,
    Unguided,
    PhysicsOnly,
}

/// What Gaussian smoothing is applied to inside a guided step.
///
/// `State` replaces the running state with its smoothed version before the
/// physics update. `GradientArgument` evaluates the residual at the
/// smoothed field but applies the update to the unsmoothed state; this is
/// the variant whose linear stability limit matches the observed smoothed
/// threshold (see the stability tests), and is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmoothingTarget {
    State,
    GradientArgument,
}

/// Inference controls for all three modes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GuidanceConfig {
    pub mode: GuidanceMode,
    /// Reverse steps; must not exceed the trained schedule length. When
    /// smaller, the chain starts from pure noise at `t = steps` and runs the
    /// tail of the schedule.
    pub steps: usize,
    /// Physics step size (the realized guidance scale).
    pub guidance_dt: f64,
    /// Smoothing width in grid cells; 0 disables smoothing.
    pub sigma: f64,
    pub smoothing_target: SmoothingTarget,
    /// Global max-abs scale of the training data.
    pub scale: f64,
    pub seed: u64,
    /// Add the `sqrt(beta_1) xi` kick on the final reverse step too.
    pub final_step_noise: bool,
    /// Trace capture stride; 0 records only the endpoints.
    pub snapshot_stride: usize,
    /// Descend along the transposed-linearization direction instead of the
    /// raw residual.
    pub adjoint_direction: bool,
    /// Project the (smoothed) residual argument onto the boundary data
    /// before differentiating it. Smoothing with reflect padding leaks
    /// interior values onto the boundary; projecting the argument removes
    /// the resulting fixed-point bias. Disable to measure the literal
    /// smoothing composite, whose stability threshold the ablation
    /// protocol reproduces.
    #[serde(default = "default_true")]
    pub project_guidance_argument: bool,
    /// Physics-only mode: iteration count.
    pub iterations: usize,
    /// Physics-only mode: initial noise temperature.
    pub epsilon_init: f64,
    /// Physics-only mode: anneal epsilon linearly to zero (false keeps it
    /// fixed).
    pub epsilon_anneal: bool,
}

fn default_true() -> bool {
    true
}

impl GuidanceConfig {
    /// Guided-sampling defaults per equation family. The Poisson step is
    /// the documented smoothed-stable value on the 64x64 unit square; the
    /// space-time steps come from the desk-scale stability sweep (32x32)
    /// and generally need re-bracketing when the grid changes (the
    /// explicit limits scale like h^2).
    pub fn guided_default(equation: EquationKind) -> Self {
        let (steps, dt) = match equation {
            EquationKind::Poisson => (1000, 6.7e-4),
            EquationKind::Heat => (750, 8.0e-4),
            EquationKind::Burgers => (1000, 5.0e-3),
        };
        Self {
            mode: GuidanceMode::Guided,
            steps,
            guidance_dt: dt,
            sigma: 0.9,
            smoothing_target: SmoothingTarget::GradientArgument,
            scale: 1.0,
            seed: 0,
            final_step_noise: false,
            snapshot_stride: 100,
            adjoint_direction: false,
            project_guidance_argument: true,
            iterations: 0,
            epsilon_init: 0.0,
            epsilon_anneal: true,
        }
    }

    /// Physics-only defaults per equation family (64x64 scale). Prefer
    /// [`GuidanceConfig::physics_only_for`], which sizes the step to the
    /// actual grid and coefficient.
    pub fn physics_only_default(equation: EquationKind) -> Self {
        let (dt, iterations) = match equation {
            EquationKind::Poisson => (6.0e-5, 200_000),
            EquationKind::Heat => (6.0e-5, 100_000),
            EquationKind::Burgers => (4.0e-5, 150_000),
        };
        Self {
            mode: GuidanceMode::PhysicsOnly,
            steps: 0,
            guidance_dt: dt,
            sigma: 0.0,
            smoothing_target: SmoothingTarget::GradientArgument,
            scale: 1.0,
            seed: 0,
            final_step_noise: false,
            snapshot_stride: 1000,
            adjoint_direction: !matches!(equation, EquationKind::Poisson),
            project_guidance_argument: true,
            iterations,
            epsilon_init: 0.0,
            epsilon_anneal: true,
        }
    }

    /// Stability-aware physics-only configuration for one concrete problem.
    ///
    /// Poisson descends the raw residual (Richardson iteration) at 0.8x the
    /// explicit limit `2 / (kappa * lambda_max)`. Space-time problems
    /// descend the exact energy gradient (adjoint direction) — the raw
    /// residual's transport part is neutrally unstable under explicit
    /// stepping — with the step sized from an operator-norm bound on the
    /// linearized residual. Iteration counts are sized to relax from noise.
    pub fn physics_only_for(p: &PdeProblem) -> Self {
        let grid = p.grid;
        let (hx, hy) = (grid.hx(), grid.hy());
        let mut cfg = Self::physics_only_default(match p.equation {
            crate::problem::Equation::Poisson { .. } => EquationKind::Poisson,
            crate::problem::Equation::Heat { .. } => EquationKind::Heat,
            crate::problem::Equation::Burgers { .. } => EquationKind::Burgers,
        });
        match &p.equation {
            crate::problem::Equation::Poisson { kappa, .. } => {
                let lambda_max = 4.0 / (hx * hx) + 4.0 / (hy * hy);
                cfg.guidance_dt = 0.8 * 2.0 / (kappa * lambda_max);
                let rate = cfg.guidance_dt * kappa * 2.0 * std::f64::consts::PI.powi(2);
                cfg.iterations = ((20.0 / rate).ceil() as usize).clamp(20_000, 400_000);
            }
            crate::problem::Equation::Heat { alpha } => {
                let norm = 1.0 / hy + 4.0 * alpha / (hx * hx);
                cfg.guidance_dt = 1.2 / (norm * norm);
                cfg.iterations = ((6.0 / cfg.guidance_dt).ceil() as usize).clamp(20_000, 2_000_000);
            }
            crate::problem::Equation::Burgers { nu } => {
                let umax = p
                    .bc
                    .initial()
                    .map(|h| h.iter().fold(0.0f64, |m, v| m.max(v.abs())))
                    .unwrap_or(1.0)
                    .max(1e-3);
                let norm = (1.0 + 2.0 * umax) / hx.min(hy) + 4.0 * nu / (hx * hx);
                cfg.guidance_dt = 1.2 / (norm * norm);
                cfg.iterations = ((6.0 / cfg.guidance_dt).ceil() as usize).clamp(20_000, 2_000_000);
            }
        }
        cfg
    }

    fn validate(&self) -> Result<()> {
        if self.mode != GuidanceMode::Unguided && !(self.guidance_dt > 0.0) {
            return Err(Error::InvalidParameter(
                "guidance_dt must be positive in guided/physics-only modes".into(),
            ));
        }
        if self.sigma < 0.0 || !self.sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigma must be >= 0, got {}",
                self.sigma
            )));
        }
        if !(self.scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "scale must be positive, got {}",
                self.scale
            )));
        }
        if self.epsilon_init < 0.0 {
            return Err(Error::InvalidParameter("epsilon_init must be >= 0".into()));
        }
        Ok(())
    }

    fn kernel(&self) -> Result<Option<SmoothingKernel>> {
        if self.sigma > 0.0 {
            Ok(Some(SmoothingKernel::new(self.sigma)?))
        } else {
            Ok(None)
        }
    }
}

/// One recorded point of a sampling run.
#[derive(Debug, Clone)]
pub struct Snapshot {
    /// Reverse timestep for diffusion runs (decreasing), iteration index
    /// for physics-only runs (increasing).
    pub step: usize,
    /// State in physical units.
    pub field: Field,
    pub energy: f64,
    pub residual_norm: f64,
    pub rel_l2: Option<f64>,
}

/// Trajectory capture of a sampling run.
#[derive(Debug, Clone, Default)]
pub struct SamplerTrace {
    pub snapshots: Vec<Snapshot>,
}

impl SamplerTrace {
    fn record(
        &mut self,
        step: usize,
        state: &Field,
        scale: f64,
        problem: &PdeProblem,
        reference: Option<&Field>,
    ) -> Result<f64> {
        let phys = if scale == 1.0 {
            state.clone()
        } else {
            state.scaled(scale)
        };
        let e = energy(problem, &phys)?;
        let rel = match reference {
            Some(r) => Some(relative_l2(&phys, r)?),
            None => None,
        };
        self.snapshots.push(Snapshot {
            step,
            field: phys,
            energy: e,
            residual_norm: (2.0 * e).sqrt(),
            rel_l2: rel,
        });
        Ok(e)
    }
}

/// One plain reverse-diffusion update. `add_noise = false` drops the
/// `sqrt(beta_t) xi` term (used on the final step).
pub fn reverse_step(
    model: &impl NoisePredictor,
    u: &Field,
    t: usize,
    s: &NoiseSchedule,
    rng: &mut SeedRng,
    add_noise: bool,
) -> Result<Field> {
    if t == 0 || t > s.len() {
        return Err(Error::InvalidParameter(format!(
            "reverse step t = {t} outside schedule 1..={}",
            s.len()
        )));
    }
    let eps = model.predict_noise(u, t)?;
    let coef = s.beta(t) / (1.0 - s.alpha_bar(t)).sqrt();
    let inv_sqrt_alpha = 1.0 / s.alpha(t).sqrt();
    let mut next = u.add_scaled(&eps, -coef)?.scaled(inv_sqrt_alpha);
    if add_noise {
        let xi = Field::standard_normal(u.spec(), rng);
        next = next.add_scaled(&xi, s.sigma(t))?;
    }
    next.ensure_finite(&format!("reverse step at t = {t}"))?;
    Ok(next)
}

/// Physics descent direction at `state` (normalized units): evaluates the
/// residual of `scale * arg` and rescales, honoring the smoothing target
/// and the adjoint option. Returns (direction, physical residual energy).
///
/// The argument handed to the differential operators is first projected
/// onto the boundary data: it stands in for the solution, and smoothing
/// with reflect padding would otherwise leak interior values onto the
/// boundary and bias the guidance fixed point.
fn physics_direction(
    state: &Field,
    problem: &PdeProblem,
    cfg: &GuidanceConfig,
    kernel: Option<&SmoothingKernel>,
) -> Result<(Field, f64)> {
    let arg = match kernel {
        Some(k) => gaussian_smooth(state, k)?,
        None => state.clone(),
    };
    let phys = if cfg.scale == 1.0 {
        arg
    } else {
        arg.scaled(cfg.scale)
    };
    let phys = if cfg.project_guidance_argument {
        project_boundary(&phys, &problem.bc)?
    } else {
        phys
    };
    let r = if cfg.adjoint_direction {
        residual_adjoint(problem, &phys)?
    } else {
        residual(problem, &phys)?
    };
    let e = {
        // For the raw direction the residual is already in hand.
        if cfg.adjoint_direction {
            energy(problem, &phys)?
        } else {
            0.5 * problem.grid.hx() * problem.grid.hy()
                * r.values().iter().map(|v| v * v).sum::<f64>()
        }
    };
    Ok((r, e))
}

/// One full guided reverse step: learned update, smoothing, residual
/// descent in physical units, boundary projection.
#[allow(clippy::too_many_arguments)]
pub fn guided_reverse_step(
    model: &impl NoisePredictor,
    u: &Field,
    t: usize,
    problem: &PdeProblem,
    cfg: &GuidanceConfig,
    s: &NoiseSchedule,
    kernel: Option<&SmoothingKernel>,
    bc_scaled: &crate::grid::BoundarySpec,
    rng: &mut SeedRng,
) -> Result<Field> {
    let add_noise = t > 1 || cfg.final_step_noise;
    let mut state = reverse_step(model, u, t, s, rng, add_noise)?;
    if let (Some(k), SmoothingTarget::State) = (kernel, cfg.smoothing_target) {
        state = gaussian_smooth(&state, k)?;
    }
    let step_kernel = match cfg.smoothing_target {
        SmoothingTarget::State => None,
        SmoothingTarget::GradientArgument => kernel,
    };
    let (dir, _e) = physics_direction(&state, problem, cfg, step_kernel)?;
    let state = state.add_scaled(&dir, -cfg.guidance_dt / cfg.scale)?;
    project_boundary(&state, bc_scaled)
}

/// Run the reverse chain from pure noise down to `t = 1` and return the
/// de-normalized, boundary-projected field plus the captured trace.
///
/// Uses the default training schedule length; `cfg.steps` below it starts
/// the chain partway down the schedule (truncated start). `reference`, when
/// given, adds a relative-L2 column to the trace.
pub fn sample(
    model: &impl NoisePredictor,
    problem: &PdeProblem,
    cfg: &GuidanceConfig,
    reference: Option<&Field>,
) -> Result<(Field, SamplerTrace)> {
    if cfg.mode == GuidanceMode::PhysicsOnly {
        return physics_only_solve(problem, cfg, reference);
    }
    cfg.validate()?;
    let t_train = crate::diffusion::T_TRAIN_DEFAULT.max(cfg.steps);
    let schedule = NoiseSchedule::linear_range(
        t_train,
        crate::diffusion::BETA_MIN,
        crate::diffusion::BETA_MAX,
    )?;
    sample_with_schedule(model, problem, cfg, &schedule, reference)
}

/// Like [`sample`] but against an explicit trained schedule (the checkpoint
/// schedule). `cfg.steps <= schedule.len()` starts the chain at
/// `t = cfg.steps` and runs the tail of the schedule down to 1.
pub fn sample_with_schedule(
    model: &impl NoisePredictor,
    problem: &PdeProblem,
    cfg: &GuidanceConfig,
    schedule: &NoiseSchedule,
    reference: Option<&Field>,
) -> Result<(Field, SamplerTrace)> {
    if cfg.mode == GuidanceMode::PhysicsOnly {
        return physics_only_solve(problem, cfg, reference);
    }
    cfg.validate()?;
    if cfg.steps == 0 || cfg.steps > schedule.len() {
        return Err(Error::InvalidParameter(format!(
            "steps {} must be in 1..={}",
            cfg.steps,
            schedule.len()
        )));
    }
    let kernel = cfg.kernel()?;
    let bc_scaled = problem.bc.scaled(cfg.scale);
    let mut rng = rng_from_seed(cfg.seed);
    let mut u = Field::standard_normal(problem.grid, &mut rng);
    let mut trace = SamplerTrace::default();
    let mut last_energy = trace.record(cfg.steps, &u, cfg.scale, problem, reference)?;

    for t in (1..=cfg.steps).rev() {
        let stepped = match cfg.mode {
            GuidanceMode::Guided => guided_reverse_step(
                model,
                &u,
                t,
                problem,
                cfg,
                schedule,
                kernel.as_ref(),
                &bc_scaled,
                &mut rng,
            ),
            GuidanceMode::Unguided => {
                let add_noise = t > 1 || cfg.final_step_noise;
                reverse_step(model, &u, t, schedule, &mut rng, add_noise)
            }
            GuidanceMode::PhysicsOnly => unreachable!(),
        };
        u = stepped.map_err(|e| wrap_instability(e, t, last_energy))?;
        let capture = cfg.snapshot_stride > 0 && t % cfg.snapshot_stride == 0 && t > 1;
        if capture {
            last_energy = trace
                .record(t, &u, cfg.scale, problem, reference)
                .map_err(|e| wrap_instability(e, t, last_energy))?;
        } else if cfg.mode == GuidanceMode::Guided {
            // Cheap energy bookkeeping so instability errors carry the last
            // finite value even between snapshots.
            if let Ok(e) = energy(problem, &u.scaled(cfg.scale)) {
                if e.is_finite() {
                    last_energy = e;
                }
            }
        }
    }

    // De-normalize and enforce boundaries in physical units.
    let mut final_field = u.scaled(cfg.scale);
    final_field = project_boundary(&final_field, &problem.bc)?;
    final_field.ensure_finite("final sample")?;
    trace.record(1, &final_field, 1.0, problem, reference)?;
    Ok((final_field, trace))
}

fn wrap_instability(e: Error, step: usize, last_energy: f64) -> Error {
    match e {
        Error::NonFinite { .. } => Error::GuidanceInstability { step, last_energy },
        other => other,
    }
}

/// Annealed Langevin / deterministic residual descent with hard boundary
/// projection, starting from pure noise in physical units. With
/// `epsilon_init = 0` this is plain projected residual descent.
pub fn physics_only_solve(
    problem: &PdeProblem,
    cfg: &GuidanceConfig,
    reference: Option<&Field>,
) -> Result<(Field, SamplerTrace)> {
    cfg.validate()?;
    if cfg.iterations == 0 {
        return Err(Error::InvalidParameter(
            "physics-only mode needs iterations >= 1".into(),
        ));
    }
    let kernel = cfg.kernel()?;
    let mut rng = rng_from_seed(cfg.seed);
    let mut u = Field::standard_normal(problem.grid, &mut rng);
    u = project_boundary(&u, &problem.bc)?;
    let phys_cfg = GuidanceConfig {
        scale: 1.0,
        ..cfg.clone()
    };
    let mut trace = SamplerTrace::default();
    let mut last_energy = trace.record(0, &u, 1.0, problem, reference)?;

    let dt = cfg.guidance_dt;
    for k in 0..cfg.iterations {
        let (dir, e) = physics_direction(&u, problem, &phys_cfg, kernel.as_ref())
            .map_err(|err| wrap_instability(err, k, last_energy))?;
        if e.is_finite() {
            last_energy = e;
        }
        let mut next = u.add_scaled(&dir, -dt)?;
        let eps_k = if cfg.epsilon_anneal {
            cfg.epsilon_init * (1.0 - (k as f64 + 1.0) / cfg.iterations as f64)
        } else {
            cfg.epsilon_init
        };
        if eps_k > 0.0 {
            let xi = Field::standard_normal(problem.grid, &mut rng);
            next = next.add_scaled(&xi, (2.0 * eps_k * dt).sqrt())?;
        }
        u = project_boundary(&next, &problem.bc)?;
        if cfg.snapshot_stride > 0 && (k + 1) % cfg.snapshot_stride == 0 {
            last_energy = trace
                .record(k + 1, &u, 1.0, problem, reference)
                .map_err(|err| wrap_instability(err, k + 1, last_energy))?;
        }
    }
    u.ensure_finite("physics-only result")
        .map_err(|err| wrap_instability(err, cfg.iterations, last_energy))?;
    trace.record(cfg.iterations, &u, 1.0, problem, reference)?;
    Ok((u, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::NoiseSchedule;
    use crate::grid::GridSpec;
    use crate::solve::reference_solution;

    struct ZeroModel;
    impl NoisePredictor for ZeroModel {
        fn predict_noise(&self, u: &Field, _t: usize) -> Result<Field> {
            Ok(Field::zeros(u.spec()))
        }
    }

    fn grid64() -> GridSpec {
        GridSpec::unit_square(64).unwrap()
    }

    #[test]
    fn reverse_step_reduces_to_scaling_for_zero_model() {
        let spec = GridSpec::unit_square(8).unwrap();
        let s = NoiseSchedule::linear(1000).unwrap();
        let mut rng = rng_from_seed(3);
        let u = Field::standard_normal(spec, &mut rng);
        let out = reverse_step(&ZeroModel, &u, 500, &s, &mut rng, false).unwrap();
        let want = u.scaled(1.0 / s.alpha(500).sqrt());
        assert!(out.add_scaled(&want, -1.0).unwrap().linf_norm() < 1e-14);
    }

    #[test]
    fn reverse_coefficient_at_t1000() {
        let s = NoiseSchedule::linear(1000).unwrap();
        let coef = s.beta(1000) / (1.0 - s.alpha_bar(1000)).sqrt();
        assert!((coef - 0.0200).abs() < 1e-4, "coef {coef:.6}");
    }

    #[test]
    fn final_step_is_deterministic_without_noise() {
        let spec = GridSpec::unit_square(8).unwrap();
        let s = NoiseSchedule::linear(100).unwrap();
        let mut r1 = rng_from_seed(1);
        let mut r2 = rng_from_seed(999);
        let u = Field::standard_normal(spec, &mut rng_from_seed(5));
        let a = reverse_step(&ZeroModel, &u, 1, &s, &mut r1, false).unwrap();
        let b = reverse_step(&ZeroModel, &u, 1, &s, &mut r2, false).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn guided_step_without_physics_is_reverse_plus_projection() {
        // Zero residual (zero field, zero source) and smoothing off: the
        // guided step must equal reverse_step followed by projection.
        let spec = GridSpec::unit_square(8).unwrap();
        let p = PdeProblem::new(
            spec,
            crate::problem::Equation::Poisson {
                kappa: 1.0,
                source: crate::problem::SourceSpec::Zero,
            },
            crate::grid::BoundarySpec::dirichlet_zero(spec),
        )
        .unwrap();
        let s = NoiseSchedule::linear(100).unwrap();
        let mut cfg = GuidanceConfig::guided_default(EquationKind::Poisson);
        cfg.sigma = 0.0;
        cfg.steps = 100;
        let bc = p.bc.scaled(cfg.scale);
        let u = Field::standard_normal(spec, &mut rng_from_seed(8));
        let got = guided_reverse_step(
            &ZeroModel,
            &u,
            1,
            &p,
            &cfg,
            &s,
            None,
            &bc,
            &mut rng_from_seed(0),
        )
        .unwrap();
        // With a zero model the reverse step is pure scaling; the residual
        // of the scaled noise is nonzero, so guidance must nudge the
        // interior. Instead check against the manual composition.
        let manual = {
            let r = reverse_step(&ZeroModel, &u, 1, &s, &mut rng_from_seed(0), false).unwrap();
            let (dir, _) = physics_direction(&r, &p, &cfg, None).unwrap();
            let r = r.add_scaled(&dir, -cfg.guidance_dt / cfg.scale).unwrap();
            project_boundary(&r, &bc).unwrap()
        };
        assert_eq!(got, manual);
    }

    #[test]
    fn physics_only_poisson_converges_to_fdm_solution() {
        // Projected residual descent on the Poisson system is damped
        // Richardson iteration; it must land on the discrete solution.
        let p = PdeProblem::poisson(0.9, grid64()).unwrap();
        let fdm = reference_solution(&p).unwrap();
        let mut cfg = GuidanceConfig::physics_only_default(EquationKind::Poisson);
        cfg.guidance_dt = 7.0e-5;
        cfg.iterations = 60_000;
        cfg.sigma = 0.0;
        cfg.seed = 12;
        cfg.snapshot_stride = 0;
        let (u, _) = physics_only_solve(&p, &cfg, None).unwrap();
        let err = relative_l2(&u, &fdm).unwrap();
        assert!(err < 1e-3, "physics-only Poisson err {err:.3e}");
    }

    #[test]
    fn fdm_solution_is_a_fixed_point() {
        let p = PdeProblem::poisson(1.35, grid64()).unwrap();
        let fdm = reference_solution(&p).unwrap();
        let cfg = GuidanceConfig {
            sigma: 0.0,
            ..GuidanceConfig::physics_only_default(EquationKind::Poisson)
        };
        let (dir, _) = physics_direction(&fdm, &p, &cfg, None).unwrap();
        let moved = fdm.add_scaled(&dir, -cfg.guidance_dt).unwrap();
        let rel = relative_l2(&moved, &fdm).unwrap();
        assert!(rel < 1e-10, "fixed point moved by {rel:.3e}");
    }

    #[test]
    fn energy_descends_monotonically_for_poisson() {
        let p = PdeProblem::poisson(0.9, grid64()).unwrap();
        let mut rng = rng_from_seed(4);
        let mut u = project_boundary(&Field::standard_normal(grid64(), &mut rng), &p.bc).unwrap();
        let cfg = GuidanceConfig {
            sigma: 0.0,
            guidance_dt: 6.0e-5,
            ..GuidanceConfig::physics_only_default(EquationKind::Poisson)
        };
        let mut prev = energy(&p, &u).unwrap();
        for _ in 0..1000 {
            let (dir, _) = physics_direction(&u, &p, &cfg, None).unwrap();
            u = project_boundary(&u.add_scaled(&dir, -cfg.guidance_dt).unwrap(), &p.bc).unwrap();
            let e = energy(&p, &u).unwrap();
            let rnorm = (2.0 * e).sqrt();
            if rnorm > 1e-12 {
                assert!(e < prev, "energy rose: {e:.6e} >= {prev:.6e}");
            }
            prev = e;
        }
    }

    #[test]
    fn boundary_nodes_are_exact_after_every_guided_step() {
        let p = PdeProblem::heat(0.031, grid64()).unwrap();
        let s = NoiseSchedule::linear(50).unwrap();
        let cfg = GuidanceConfig {
            steps: 50,
            scale: 2.0,
            ..GuidanceConfig::guided_default(EquationKind::Heat)
        };
        let kernel = cfg.kernel().unwrap();
        let bc_scaled = p.bc.scaled(cfg.scale);
        let mut rng = rng_from_seed(10);
        let mut u = Field::standard_normal(grid64(), &mut rng);
        for t in (40..=50).rev() {
            u = guided_reverse_step(
                &ZeroModel,
                &u,
                t,
                &p,
                &cfg,
                &s,
                kernel.as_ref(),
                &bc_scaled,
                &mut rng,
            )
            .unwrap();
            let projected = project_boundary(&u, &bc_scaled).unwrap();
            assert_eq!(u, projected, "boundary drifted at t = {t}");
        }
    }

    #[test]
    fn seeded_runs_reproduce_and_differ_across_seeds() {
        let p = PdeProblem::poisson(1.35, GridSpec::unit_square(16).unwrap()).unwrap();
        let s = NoiseSchedule::linear(30).unwrap();
        let cfg = GuidanceConfig {
            steps: 30,
            seed: 42,
            snapshot_stride: 10,
            ..GuidanceConfig::guided_default(EquationKind::Poisson)
        };
        let (a, ta) = sample_with_schedule(&ZeroModel, &p, &cfg, &s, None).unwrap();
        let (b, tb) = sample_with_schedule(&ZeroModel, &p, &cfg, &s, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta.snapshots.len(), tb.snapshots.len());
        let cfg2 = GuidanceConfig { seed: 43, ..cfg };
        let (c, _) = sample_with_schedule(&ZeroModel, &p, &cfg2, &s, None).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn trace_steps_decrease_and_energies_are_finite() {
        let p = PdeProblem::poisson(1.0, GridSpec::unit_square(16).unwrap()).unwrap();
        let s = NoiseSchedule::linear(40).unwrap();
        let cfg = GuidanceConfig {
            steps: 40,
            snapshot_stride: 7,
            ..GuidanceConfig::guided_default(EquationKind::Poisson)
        };
        let (_u, trace) = sample_with_schedule(&ZeroModel, &p, &cfg, &s, None).unwrap();
        assert!(trace.snapshots.len() > 2);
        for pair in trace.snapshots.windows(2) {
            assert!(pair[0].step >= pair[1].step);
        }
        assert!(trace.snapshots.iter().all(|s| s.energy.is_finite()));
    }

    #[test]
    fn unguided_mode_skips_physics() {
        let p = PdeProblem::poisson(1.0, GridSpec::unit_square(8).unwrap()).unwrap();
        let s = NoiseSchedule::linear(20).unwrap();
        let cfg = GuidanceConfig {
            mode: GuidanceMode::Unguided,
            steps: 20,
            guidance_dt: 0.0,
            snapshot_stride: 0,
            ..GuidanceConfig::guided_default(EquationKind::Poisson)
        };
        // guidance_dt = 0 is fine in unguided mode.
        let (u, _) = sample_with_schedule(&ZeroModel, &p, &cfg, &s, None).unwrap();
        assert!(u.is_finite());
        // Final projection still applies in physical units.
        for j in 0..8 {
            assert_eq!(u.get(0, j), 0.0);
        }
    }

    #[test]
    fn instability_is_reported_with_step_and_energy() {
        // kappa = 0.9 at dt = 1.5e-4 without smoothing exceeds the explicit
        // stability limit h^2/(4 kappa); the run must abort with the typed
        // error rather than exploding silently.
        let p = PdeProblem::poisson(0.9, grid64()).unwrap();
        let cfg = GuidanceConfig {
            guidance_dt: 1.5e-4,
            sigma: 0.0,
            iterations: 5000,
            snapshot_stride: 0,
            ..GuidanceConfig::physics_only_default(EquationKind::Poisson)
        };
        match physics_only_solve(&p, &cfg, None) {
            Err(Error::GuidanceInstability { step, last_energy }) => {
                assert!(step > 0);
                assert!(last_energy.is_finite());
            }
            other => panic!("expected instability, got {other:?}"),
        }
    }

    #[test]
    fn heat_energy_descends_after_burn_in() {
        // Space-time heat descent along the exact energy gradient: energy
        // non-increasing once the first iterations have shaken out the
        // projection of the initial noise.
        let p = PdeProblem::heat(0.031, GridSpec::unit_square(16).unwrap()).unwrap();
        let cfg = GuidanceConfig {
            guidance_dt: 2.0e-4,
            sigma: 0.0,
            adjoint_direction: true,
            iterations: 3000,
            snapshot_stride: 50,
            seed: 6,
            ..GuidanceConfig::physics_only_default(crate::data::EquationKind::Heat)
        };
        let (_u, trace) = physics_only_solve(&p, &cfg, None).unwrap();
        let energies: Vec<f64> = trace
            .snapshots
            .iter()
            .filter(|s| s.step >= 50)
            .map(|s| s.energy)
            .collect();
        assert!(energies.len() > 10);
        for w in energies.windows(2) {
            assert!(
                w[1] <= w[0] * (1.0 + 1e-9),
                "heat energy rose after burn-in: {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn stability_aware_config_converges_across_grids() {
        // The sized configuration must stay stable and reach the reference
        // on grids the fixed defaults were not tuned for.
        for (n, kappa) in [(16usize, 2.05), (24, 1.35)] {
            let g = GridSpec::unit_square(n).unwrap();
            let p = PdeProblem::poisson(kappa, g).unwrap();
            let fdm = reference_solution(&p).unwrap();
            let mut cfg = GuidanceConfig::physics_only_for(&p);
            cfg.iterations = cfg.iterations.min(40_000);
            cfg.snapshot_stride = 0;
            cfg.seed = 3;
            let (u, _) = physics_only_solve(&p, &cfg, None).unwrap();
            let err = relative_l2(&u, &fdm).unwrap();
            assert!(err < 1e-6, "{n}x{n} kappa={kappa}: rel {err:.3e}");
        }
        // Space-time problems get the adjoint direction automatically.
        let p = PdeProblem::heat(0.04, GridSpec::unit_square(16).unwrap()).unwrap();
        let cfg = GuidanceConfig::physics_only_for(&p);
        assert!(cfg.adjoint_direction);
        let reference = reference_solution(&p).unwrap();
        let (u, _) = physics_only_solve(&p, &cfg, None).unwrap();
        let err = relative_l2(&u, &reference).unwrap();
        assert!(err < 5e-2, "heat 16x16: rel {err:.3e}");
    }

    #[test]
    fn gibbs_noise_widens_with_epsilon() {
        // With fixed epsilon the stationary spread around the solution
        // grows with temperature; the across-run std of the final error
        // shrinks as epsilon decreases.
        let p = PdeProblem::poisson(1.0, GridSpec::unit_square(16).unwrap()).unwrap();
        let fdm = reference_solution(&p).unwrap();
        let spread = |eps: f64| {
            let vals: Vec<f64> = (0..6)
                .map(|k| {
                    let cfg = GuidanceConfig {
                        guidance_dt: 2.0e-4,
                        sigma: 0.0,
                        iterations: 8000,
                        epsilon_init: eps,
                        epsilon_anneal: false,
                        seed: 100 + k,
                        snapshot_stride: 0,
                        ..GuidanceConfig::physics_only_default(EquationKind::Poisson)
                    };
                    let (u, _) = physics_only_solve(&p, &cfg, None).unwrap();
                    relative_l2(&u, &fdm).unwrap()
                })
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64).sqrt()
        };
        let s_hi = spread(1e-4);
        let s_mid = spread(1e-6);
        let s_lo = spread(1e-8);
        assert!(
            s_hi > s_mid && s_mid > s_lo,
            "spread ladder not monotone: {s_hi:.3e}, {s_mid:.3e}, {s_lo:.3e}"
        );
    }
}
