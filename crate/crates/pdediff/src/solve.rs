//! Finite-difference ground-truth solvers.
//!
//! * Poisson: conjugate gradient on the SPD 5-point system with Dirichlet
//!   elimination.
//! * Heat: Crank-Nicolson marching along the temporal axis with substep
//!   refinement, sampled back onto the output columns.
//! * Burgers: explicit first-order upwind advection plus central diffusion
//!   on a refined space-time grid, restricted to the output grid by
//!   subsampling. The substep count is raised automatically until both the
//!   advective CFL and the viscous limit hold.
//!
//! All solvers are deterministic: same inputs, bit-identical outputs.

use crate::error::{Error, Result};
use crate::grid::{BoundarySpec, EdgeCondition, Field, GridSpec};
use crate::problem::SourceSpec;

/// Default relative-residual tolerance for the Poisson solve.
pub const POISSON_TOL: f64 = 1e-10;

/// Crank-Nicolson substeps per output interval for the heat solve.
pub const HEAT_SUBSTEPS: usize = 8;

/// Refinement of the Burgers space-time solve relative to the output grid.
#[derive(Debug, Clone, Copy)]
pub struct BurgersOptions {
    /// Fine spatial cells per coarse cell.
    pub spatial_refine: usize,
    /// Minimum substeps per coarse temporal interval; raised automatically
    /// when the stability limit demands more.
    pub temporal_refine: usize,
}

impl Default for BurgersOptions {
    fn default() -> Self {
        Self {
            spatial_refine: 16,
            temporal_refine: 128,
        }
    }
}

fn dirichlet_edges(bc: &BoundarySpec, spec: GridSpec) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    bc.validate(spec)?;
    let need = |c: &EdgeCondition, name: &str| -> Result<Vec<f64>> {
        match c {
            EdgeCondition::Dirichlet(v) => Ok(v.clone()),
            _ => Err(Error::InvalidParameter(format!(
                "poisson solver supports Dirichlet boundaries only ({name} is not Dirichlet)"
            ))),
        }
    };
    Ok((
        need(&bc.x0, "x0")?,
        need(&bc.x1, "x1")?,
        need(&bc.y0, "y0")?,
        need(&bc.y1, "y1")?,
    ))
}

/// Steady Poisson solve `-kappa * Lap u = f` with Dirichlet data, by
/// conjugate gradient on interior unknowns. Stops when the relative
/// residual drops below `tol`.
pub fn solve_poisson(
    kappa: f64,
    source: &SourceSpec,
    bc: &BoundarySpec,
    spec: GridSpec,
    tol: f64,
) -> Result<Field> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "kappa must be positive, got {kappa}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    let (gx0, gx1, gy0, gy1) = dirichlet_edges(bc, spec)?;
    let (nx, ny) = (spec.nx, spec.ny);
    let (mx, my) = (nx - 2, ny - 2); // interior extents
    let ihx2 = 1.0 / (spec.hx() * spec.hx());
    let ihy2 = 1.0 / (spec.hy() * spec.hy());

    // Interior flattening: (i-1)*my + (j-1).
    let iidx = |i: usize, j: usize| (i - 1) * my + (j - 1);

    // Right-hand side: f plus eliminated boundary contributions.
    let mut b = vec![0.0; mx * my];
    for i in 1..nx - 1 {
        for j in 1..ny - 1 {
            let mut v = source.eval(spec.x(i), spec.y(j));
            if i == 1 {
                v += kappa * ihx2 * gx0[j];
            }
            if i == nx - 2 {
                v += kappa * ihx2 * gx1[j];
            }
            if j == 1 {
                v += kappa * ihy2 * gy0[i];
            }
            if j == ny - 2 {
                v += kappa * ihy2 * gy1[i];
            }
            b[iidx(i, j)] = v;
        }
    }

    // A x with A = -kappa * Lap_h on interior (zero Dirichlet halo).
    let apply = |x: &[f64], out: &mut [f64]| {
        for i in 1..nx - 1 {
            for j in 1..ny - 1 {
                let k = iidx(i, j);
                let c = x[k];
                let xm = if i > 1 { x[iidx(i - 1, j)] } else { 0.0 };
                let xp = if i < nx - 2 { x[iidx(i + 1, j)] } else { 0.0 };
                let ym = if j > 1 { x[iidx(i, j - 1)] } else { 0.0 };
                let yp = if j < ny - 2 { x[iidx(i, j + 1)] } else { 0.0 };
                out[k] = -kappa * ((xm - 2.0 * c + xp) * ihx2 + (ym - 2.0 * c + yp) * ihy2);
            }
        }
    };

    let dot = |a: &[f64], c: &[f64]| a.iter().zip(c).map(|(x, y)| x * y).sum::<f64>();
    let bnorm = dot(&b, &b).sqrt();
    let n_unknowns = mx * my;
    let mut x = vec![0.0; n_unknowns];
    if bnorm > 0.0 {
        let mut r = b.clone();
        let mut p = r.clone();
        let mut ap = vec![0.0; n_unknowns];
        let mut rs = dot(&r, &r);
        let max_iters = 20 * (mx + my).max(100);
        let mut converged = false;
        for _ in 0..max_iters {
            apply(&p, &mut ap);
            let alpha = rs / dot(&p, &ap);
            for k in 0..n_unknowns {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            let rs_new = dot(&r, &r);
            if rs_new.sqrt() <= tol * bnorm {
                converged = true;
                break;
            }
            let beta = rs_new / rs;
            rs = rs_new;
            for k in 0..n_unknowns {
                p[k] = r[k] + beta * p[k];
            }
        }
        if !converged {
            return Err(Error::SolverDiverged {
                iterations: max_iters,
                residual: rs.sqrt() / bnorm,
            });
        }
    }

    // Assemble the full field with boundary data.
    let mut v = vec![0.0; spec.len()];
    for i in 1..nx - 1 {
        for j in 1..ny - 1 {
            v[spec.idx(i, j)] = x[iidx(i, j)];
        }
    }
    for j in 0..ny {
        v[spec.idx(0, j)] = gx0[j];
        v[spec.idx(nx - 1, j)] = gx1[j];
    }
    for i in 0..nx {
        v[spec.idx(i, 0)] = gy0[i];
        v[spec.idx(i, ny - 1)] = gy1[i];
    }
    // Corner priority mirrors projection: y-edges written last.
    Field::from_values(spec, v)
}

fn space_time_sides(bc: &BoundarySpec, spec: GridSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    bc.validate(spec)?;
    let side = |c: &EdgeCondition, name: &str| -> Result<Vec<f64>> {
        match c {
            EdgeCondition::Dirichlet(v) => Ok(v.clone()),
            _ => Err(Error::InvalidParameter(format!(
                "space-time marching needs Dirichlet side walls ({name} is not Dirichlet)"
            ))),
        }
    };
    Ok((side(&bc.x0, "x0")?, side(&bc.x1, "x1")?))
}

/// Linear interpolation of edge samples between output columns.
fn side_value(samples: &[f64], y_frac: f64) -> f64 {
    let last = samples.len() - 1;
    let pos = y_frac * last as f64;
    let j0 = pos.floor().min((last - 1) as f64).max(0.0) as usize;
    let t = pos - j0 as f64;
    samples[j0] * (1.0 - t) + samples[j0 + 1] * t
}

/// Space-time heat field by Crank-Nicolson marching along `y` with
/// `substeps` refinements per output interval.
pub fn solve_heat_refined(
    alpha: f64,
    h: &[f64],
    bc: &BoundarySpec,
    spec: GridSpec,
    substeps: usize,
) -> Result<Field> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    if h.len() != spec.nx {
        return Err(Error::BoundaryLength {
            edge: "y0",
            expected: spec.nx,
            got: h.len(),
        });
    }
    if substeps == 0 {
        return Err(Error::InvalidParameter("substeps must be >= 1".into()));
    }
    let (gx0, gx1) = space_time_sides(bc, spec)?;
    let (nx, ny) = (spec.nx, spec.ny);
    let dy = spec.hy() / substeps as f64;
    let r = alpha * dy / (2.0 * spec.hx() * spec.hx());

    // Interior tridiagonal system (I - r D_xx) u_new = (I + r D_xx) u_old,
    // constant coefficients: diag 1+2r, off-diag -r.
    let m = nx - 2;
    let mut state = h.to_vec();
    let mut out = vec![0.0; spec.len()];
    for i in 0..nx {
        out[spec.idx(i, 0)] = h[i];
    }

    let mut rhs = vec![0.0; m];
    let mut cp = vec![0.0; m];
    let mut dp = vec![0.0; m];
    for j in 1..ny {
        for s in 0..substeps {
            let y_new = ((j - 1) * substeps + s + 1) as f64 * dy / spec.ly;
            let (b0_new, b1_new) = (side_value(&gx0, y_new), side_value(&gx1, y_new));
            for k in 0..m {
                let i = k + 1;
                rhs[k] = state[i] + r * (state[i - 1] - 2.0 * state[i] + state[i + 1]);
            }
            rhs[0] += r * b0_new;
            rhs[m - 1] += r * b1_new;
            // Thomas sweep with constant coefficients.
            let diag = 1.0 + 2.0 * r;
            cp[0] = -r / diag;
            dp[0] = rhs[0] / diag;
            for k in 1..m {
                let denom = diag + r * cp[k - 1];
                cp[k] = -r / denom;
                dp[k] = (rhs[k] + r * dp[k - 1]) / denom;
            }
            state[m] = dp[m - 1];
            for k in (0..m - 1).rev() {
                state[k + 1] = dp[k] - cp[k] * state[k + 2];
            }
            state[0] = b0_new;
            state[nx - 1] = b1_new;
        }
        for i in 0..nx {
            out[spec.idx(i, j)] = state[i];
        }
    }
    let f = Field::from_values(spec, out)?;
    f.ensure_finite("heat solve output")?;
    Ok(f)
}

/// Space-time heat field at the default temporal refinement.
pub fn solve_heat(alpha: f64, h: &[f64], bc: &BoundarySpec, spec: GridSpec) -> Result<Field> {
    solve_heat_refined(alpha, h, bc, spec, HEAT_SUBSTEPS)
}

/// Catmull-Rom interpolation of coarse initial samples onto the fine grid.
fn interpolate_samples(coarse: &[f64], refine: usize) -> Vec<f64> {
    let n = coarse.len();
    let fine_n = refine * (n - 1) + 1;
    let get = |i: isize| -> f64 {
        let i = i.clamp(0, n as isize - 1) as usize;
        coarse[i]
    };
    let mut out = Vec::with_capacity(fine_n);
    for k in 0..fine_n {
        let pos = k as f64 / refine as f64;
        let i = pos.floor() as isize;
        let t = pos - i as f64;
        if t == 0.0 {
            out.push(get(i));
            continue;
        }
        let (p0, p1, p2, p3) = (get(i - 1), get(i), get(i + 1), get(i + 2));
        let v = 0.5
            * ((2.0 * p1)
                + (-p0 + p2) * t
                + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t
                + (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t * t * t);
        out.push(v);
    }
    out
}

/// Godunov flux for the Burgers flux function `u^2 / 2`.
#[inline]
fn godunov_flux(a: f64, b: f64) -> f64 {
    let f = |u: f64| 0.5 * u * u;
    if a <= b {
        // Rarefaction range: minimum of f over [a, b].
        if a > 0.0 {
            f(a)
        } else if b < 0.0 {
            f(b)
        } else {
            0.0
        }
    } else {
        f(a).max(f(b))
    }
}

/// Space-time Burgers field on a refined grid, restricted to `spec` by
/// subsampling. Conservative first-order upwind (Godunov) advection with
/// explicit central diffusion; the substep count per coarse interval is
/// `max(temporal_refine, stability requirement)`.
pub fn solve_burgers_with(
    nu: f64,
    h: &[f64],
    bc: &BoundarySpec,
    spec: GridSpec,
    options: BurgersOptions,
) -> Result<Field> {
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::InvalidParameter(format!("nu must be positive, got {nu}")));
    }
    if h.len() != spec.nx {
        return Err(Error::BoundaryLength {
            edge: "y0",
            expected: spec.nx,
            got: h.len(),
        });
    }
    if options.spatial_refine == 0 || options.temporal_refine == 0 {
        return Err(Error::InvalidParameter(
            "burgers refinement factors must be >= 1".into(),
        ));
    }
    let (gx0, gx1) = space_time_sides(bc, spec)?;
    let rx = options.spatial_refine;
    let fine_nx = rx * (spec.nx - 1) + 1;
    let dx = spec.lx / (fine_nx - 1) as f64;
    let mut state = interpolate_samples(h, rx);

    // Stability: dt * (max|u|/dx + 2 nu/dx^2) <= 1 with a safety margin.
    // |u| is bounded by the initial/boundary data for Burgers.
    let umax = state
        .iter()
        .chain(gx0.iter())
        .chain(gx1.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-12);
    let rate = umax / dx + 2.0 * nu / (dx * dx);
    let dy_coarse = spec.hy();
    let needed = (dy_coarse * rate / 0.8).ceil() as usize;
    let substeps = options.temporal_refine.max(needed.max(1));
    let dt = dy_coarse / substeps as f64;
    let limit = 1.0 / rate;
    if dt > limit {
        return Err(Error::CflViolation { dt, limit });
    }

    let mut out = vec![0.0; spec.len()];
    for i in 0..spec.nx {
        out[spec.idx(i, 0)] = state[i * rx];
    }

    let idif = nu / (dx * dx);
    let mut next = vec![0.0; fine_nx];
    for j in 1..spec.ny {
        for s in 0..substeps {
            // Per-step CFL check against the contract; umax cannot grow for
            // Burgers but the check keeps the invariant explicit.
            let step_umax = state.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let step_rate = step_umax / dx + 2.0 * idif;
            if dt * step_rate > 1.0 + 1e-9 {
                return Err(Error::CflViolation {
                    dt,
                    limit: 1.0 / step_rate,
                });
            }
            let y_new = ((j - 1) * substeps + s + 1) as f64 * dt / spec.ly;
            for i in 1..fine_nx - 1 {
                let fl = godunov_flux(state[i - 1], state[i]);
                let fr = godunov_flux(state[i], state[i + 1]);
                next[i] = state[i] - dt * (fr - fl) / dx
                    + dt * idif * (state[i - 1] - 2.0 * state[i] + state[i + 1]);
            }
            next[0] = side_value(&gx0, y_new);
            next[fine_nx - 1] = side_value(&gx1, y_new);
            std::mem::swap(&mut state, &mut next);
        }
        for i in 0..spec.nx {
            out[spec.idx(i, j)] = state[i * rx];
        }
    }
    let f = Field::from_values(spec, out)?;
    f.ensure_finite("burgers solve output")?;
    Ok(f)
}

/// Space-time Burgers field at the default refinement.
pub fn solve_burgers(nu: f64, h: &[f64], bc: &BoundarySpec, spec: GridSpec) -> Result<Field> {
    solve_burgers_with(nu, h, bc, spec, BurgersOptions::default())
}

/// Reference field for a whole problem description.
pub fn reference_solution(p: &crate::problem::PdeProblem) -> Result<Field> {
    match &p.equation {
        crate::problem::Equation::Poisson { kappa, source } => {
            solve_poisson(*kappa, source, &p.bc, p.grid, POISSON_TOL)
        }
        crate::problem::Equation::Heat { alpha } => {
            let h = p.bc.initial().ok_or_else(|| {
                Error::InvalidParameter("heat problem lacks initial data".into())
            })?;
            solve_heat(*alpha, &h.to_vec(), &p.bc, p.grid)
        }
        crate::problem::Equation::Burgers { nu } => {
            let h = p.bc.initial().ok_or_else(|| {
                Error::InvalidParameter("burgers problem lacks initial data".into())
            })?;
            solve_burgers(*nu, &h.to_vec(), &p.bc, p.grid)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{max_abs_error, relative_l2};
    use crate::problem::{analytic_solution, residual, PdeProblem};
    use std::f64::consts::PI;

    fn grid64() -> GridSpec {
        GridSpec::unit_square(64).unwrap()
    }

    #[test]
    fn poisson_zero_source_gives_zero() {
        let spec = grid64();
        let bc = BoundarySpec::dirichlet_zero(spec);
        let u = solve_poisson(1.0, &SourceSpec::Zero, &bc, spec, POISSON_TOL).unwrap();
        assert_eq!(u.linf_norm(), 0.0);
    }

    #[test]
    fn poisson_matches_analytic_solution() {
        for kappa in [1.0, 2.0] {
            let p = PdeProblem::poisson(kappa, grid64()).unwrap();
            let u = reference_solution(&p).unwrap();
            let exact = analytic_solution(&p).unwrap();
            let err = relative_l2(&u, &exact).unwrap();
            assert!(err < 1e-3, "kappa={kappa}: rel L2 {err:.3e}");
        }
    }

    #[test]
    fn poisson_solution_scales_linearly_in_kappa() {
        let spec = grid64();
        let p1 = PdeProblem::poisson(1.0, spec).unwrap();
        let p2 = PdeProblem::poisson(2.0, spec).unwrap();
        let u1 = reference_solution(&p1).unwrap();
        let u2 = reference_solution(&p2).unwrap();
        let err = relative_l2(&u1.scaled(0.5), &u2).unwrap();
        assert!(err < 1e-8, "linear scaling violated: {err:.3e}");
    }

    #[test]
    fn poisson_residual_is_solver_tolerance_small() {
        // Same stencil on both sides: plugging the discrete solution into
        // the residual operator reproduces the CG stopping criterion.
        let p = PdeProblem::poisson(1.35, grid64()).unwrap();
        let u = reference_solution(&p).unwrap();
        let r = residual(&p, &u).unwrap();
        let f_inf = 2.0 * PI * PI;
        assert!(
            r.linf_norm() < 10.0 * POISSON_TOL * f_inf,
            "residual {:.3e} vs bound {:.3e}",
            r.linf_norm(),
            10.0 * POISSON_TOL * f_inf
        );
    }

    #[test]
    fn heat_matches_analytic_solution() {
        for alpha in [0.02, 0.05] {
            let p = PdeProblem::heat(alpha, grid64()).unwrap();
            let u = reference_solution(&p).unwrap();
            let exact = analytic_solution(&p).unwrap();
            let err = relative_l2(&u, &exact).unwrap();
            assert!(err < 1e-3, "alpha={alpha}: rel L2 {err:.3e}");
        }
    }

    #[test]
    fn heat_zero_initial_stays_zero_and_max_decays() {
        let spec = grid64();
        let bc = BoundarySpec::space_time(spec, vec![0.0; spec.nx], 0.0).unwrap();
        let u = solve_heat(0.03, &vec![0.0; spec.nx], &bc, spec).unwrap();
        assert_eq!(u.linf_norm(), 0.0);

        let p = PdeProblem::heat(0.04, spec).unwrap();
        let u = reference_solution(&p).unwrap();
        let colmax = |j: usize| (0..spec.nx).fold(0.0f64, |m, i| m.max(u.get(i, j).abs()));
        for j in 1..spec.ny {
            assert!(colmax(j) <= colmax(j - 1) + 1e-12, "max principle at column {j}");
        }
    }

    #[test]
    fn heat_self_convergence_in_substeps() {
        let p = PdeProblem::heat(0.05, grid64()).unwrap();
        let h = p.bc.initial().unwrap().to_vec();
        let a = solve_heat_refined(0.05, &h, &p.bc, p.grid, HEAT_SUBSTEPS).unwrap();
        let b = solve_heat_refined(0.05, &h, &p.bc, p.grid, 2 * HEAT_SUBSTEPS).unwrap();
        let err = relative_l2(&a, &b).unwrap();
        assert!(err < 1e-3, "self-convergence {err:.3e}");
    }

    #[test]
    fn burgers_zero_initial_stays_zero() {
        let spec = GridSpec::unit_square(32).unwrap();
        let bc = BoundarySpec::space_time(spec, vec![0.0; spec.nx], 0.0).unwrap();
        let u = solve_burgers(0.02, &vec![0.0; spec.nx], &bc, spec).unwrap();
        assert_eq!(u.linf_norm(), 0.0);
    }

    #[test]
    fn burgers_odd_symmetry() {
        let p = PdeProblem::burgers(0.02, grid64()).unwrap();
        let u = reference_solution(&p).unwrap();
        let spec = p.grid;
        let mut worst: f64 = 0.0;
        for i in 0..spec.nx {
            for j in 0..spec.ny {
                let mirrored = -u.get(spec.nx - 1 - i, j);
                worst = worst.max((u.get(i, j) - mirrored).abs());
            }
        }
        assert!(worst < 1e-10, "odd symmetry violated by {worst:.3e}");
    }

    #[test]
    fn burgers_self_convergence_in_substeps() {
        let p = PdeProblem::burgers(0.02, grid64()).unwrap();
        let h = p.bc.initial().unwrap().to_vec();
        let base = BurgersOptions::default();
        let a = solve_burgers_with(0.02, &h, &p.bc, p.grid, base).unwrap();
        let b = solve_burgers_with(
            0.02,
            &h,
            &p.bc,
            p.grid,
            BurgersOptions {
                temporal_refine: 2 * base.temporal_refine,
                ..base
            },
        )
        .unwrap();
        let err = relative_l2(&a, &b).unwrap();
        assert!(err < 1e-3, "self-convergence {err:.3e}");
    }

    #[test]
    fn burgers_large_viscosity_matches_heat_in_linear_regime() {
        // At nu = 1 diffusion dominates advection; over the early strip the
        // field should track the linear heat solution with the same data.
        let spec = grid64();
        let h: Vec<f64> = (0..spec.nx)
            .map(|i| (2.0 * PI * spec.x(i)).sin())
            .collect();
        let bc = BoundarySpec::space_time(spec, h.clone(), 0.0).unwrap();
        let ub = solve_burgers(1.0, &h, &bc, spec).unwrap();
        let uh = solve_heat(1.0, &h, &bc, spec).unwrap();
        // Restrict both to columns with y <= 0.1.
        let jmax = (0.1 / spec.hy()).floor() as usize;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..spec.nx {
            for j in 0..=jmax {
                let d = ub.get(i, j) - uh.get(i, j);
                num += d * d;
                den += uh.get(i, j) * uh.get(i, j);
            }
        }
        let err = (num / den).sqrt();
        assert!(err < 0.05, "linear-limit mismatch {err:.3e}");
    }

    #[test]
    fn solvers_are_deterministic() {
        let p = PdeProblem::burgers(0.017, GridSpec::unit_square(32).unwrap()).unwrap();
        let a = reference_solution(&p).unwrap();
        let b = reference_solution(&p).unwrap();
        assert_eq!(a, b);
        let ph = PdeProblem::heat(0.031, GridSpec::unit_square(32).unwrap()).unwrap();
        assert_eq!(reference_solution(&ph).unwrap(), reference_solution(&ph).unwrap());
    }

    #[test]
    fn poisson_rejects_non_dirichlet_and_bad_params() {
        let spec = grid64();
        let bc = BoundarySpec::space_time(spec, vec![0.0; spec.nx], 0.0).unwrap();
        assert!(solve_poisson(1.0, &SourceSpec::Zero, &bc, spec, POISSON_TOL).is_err());
        let bc = BoundarySpec::dirichlet_zero(spec);
        assert!(solve_poisson(-1.0, &SourceSpec::Zero, &bc, spec, POISSON_TOL).is_err());
        assert!(solve_poisson(1.0, &SourceSpec::Zero, &bc, spec, 0.0).is_err());
    }

    #[test]
    fn interpolation_is_exact_at_coarse_nodes() {
        let coarse: Vec<f64> = (0..9).map(|i| ((i as f64) * 0.7).sin()).collect();
        let fine = interpolate_samples(&coarse, 4);
        assert_eq!(fine.len(), 4 * 8 + 1);
        for (i, c) in coarse.iter().enumerate() {
            assert_eq!(fine[4 * i], *c);
        }
    }
}
