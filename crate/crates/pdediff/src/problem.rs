//! Governing equations: residual operators `R(u) = Lu + N(u) - f`, the
//! residual energy `E(u) = 0.5 ||R||^2`, and analytic reference solutions
//! where closed forms exist.
//!
//! Residuals live on interior nodes only; boundary nodes are owned by the
//! projection operator and carry residual 0.

use crate::error::{Error, Result};
use crate::grid::{
    deriv_x, deriv_y, laplacian, second_deriv_x, BoundarySpec, Field, GridSpec,
};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Source term `f` of the Poisson problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SourceSpec {
    Zero,
    /// `f(x, y) = amplitude * sin(pi x) sin(pi y)`.
    SinSin { amplitude: f64 },
}

impl SourceSpec {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            SourceSpec::Zero => 0.0,
            SourceSpec::SinSin { amplitude } => amplitude * (PI * x).sin() * (PI * y).sin(),
        }
    }

    pub fn field(&self, spec: GridSpec) -> Field {
        Field::from_fn(spec, |x, y| self.eval(x, y))
    }
}

/// Which governing equation a problem enforces, with its coefficients.
#[derive(Debug, Clone, PartialEq)]
pub enum Equation {
    /// `-kappa * div(grad u) = f`.
    Poisson { kappa: f64, source: SourceSpec },
    /// Space-time heat conduction `u_y - alpha * u_xx = 0`.
    Heat { alpha: f64 },
    /// Space-time Burgers flow `u_y + u u_x - nu * u_xx = 0`.
    Burgers { nu: f64 },
}

impl Equation {
    pub fn coefficient(&self) -> f64 {
        match self {
            Equation::Poisson { kappa, .. } => *kappa,
            Equation::Heat { alpha } => *alpha,
            Equation::Burgers { nu } => *nu,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Equation::Poisson { .. } => "poisson",
            Equation::Heat { .. } => "heat",
            Equation::Burgers { .. } => "burgers",
        }
    }

    pub fn is_space_time(&self) -> bool {
        !matches!(self, Equation::Poisson { .. })
    }
}

/// One concrete boundary-value problem on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeProblem {
    pub grid: GridSpec,
    pub equation: Equation,
    pub bc: BoundarySpec,
}

impl PdeProblem {
    pub fn new(grid: GridSpec, equation: Equation, bc: BoundarySpec) -> Result<Self> {
        let coef = equation.coefficient();
        if !(coef > 0.0) || !coef.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "{} coefficient must be positive, got {coef}",
                equation.name()
            )));
        }
        bc.validate(grid)?;
        if equation.is_space_time() && bc.initial().is_none() {
            return Err(Error::InvalidParameter(
                "space-time problems must mark the y = 0 edge as Initial".into(),
            ));
        }
        Ok(Self { grid, equation, bc })
    }

    /// The canonical Poisson benchmark: `f = 2 pi^2 sin(pi x) sin(pi y)`
    /// with homogeneous Dirichlet walls, solved by `(1/kappa) sin sin`.
    pub fn poisson(kappa: f64, grid: GridSpec) -> Result<Self> {
        Self::new(
            grid,
            Equation::Poisson {
                kappa,
                source: SourceSpec::SinSin {
                    amplitude: 2.0 * PI * PI,
                },
            },
            BoundarySpec::dirichlet_zero(grid),
        )
    }

    /// Canonical space-time heat benchmark: `h(x) = sin(pi x)`, zero
    /// Dirichlet sides, zero source; exact solution `exp(-alpha pi^2 y) h`.
    pub fn heat(alpha: f64, grid: GridSpec) -> Result<Self> {
        let h: Vec<f64> = (0..grid.nx).map(|i| (PI * grid.x(i)).sin()).collect();
        Self::new(
            grid,
            Equation::Heat { alpha },
            BoundarySpec::space_time(grid, h, 0.0)?,
        )
    }

    /// Canonical space-time Burgers benchmark: `h(x) = sin(2 pi x)` with
    /// zero Dirichlet sides; an interior shock forms at `x = 0.5`.
    pub fn burgers(nu: f64, grid: GridSpec) -> Result<Self> {
        let h: Vec<f64> = (0..grid.nx)
            .map(|i| (2.0 * PI * grid.x(i)).sin())
            .collect();
        Self::new(
            grid,
            Equation::Burgers { nu },
            BoundarySpec::space_time(grid, h, 0.0)?,
        )
    }

    pub fn coefficient(&self) -> f64 {
        self.equation.coefficient()
    }
}

/// PDE residual on interior nodes; boundary nodes are 0. Non-finite output
/// is reported as an error (the upstream guidance blow-up signal).
pub fn residual(p: &PdeProblem, u: &Field) -> Result<Field> {
    if u.spec() != p.grid {
        return Err(Error::GridMismatch {
            expected_nx: p.grid.nx,
            expected_ny: p.grid.ny,
            got_nx: u.spec().nx,
            got_ny: u.spec().ny,
        });
    }
    let r = match &p.equation {
        Equation::Poisson { kappa, source } => {
            let lap = laplacian(u)?;
            let spec = u.spec();
            let mut out = lap.into_values();
            for i in 1..spec.nx - 1 {
                let x = spec.x(i);
                for j in 1..spec.ny - 1 {
                    let k = spec.idx(i, j);
                    out[k] = -kappa * out[k] - source.eval(x, spec.y(j));
                }
            }
            Field::from_raw(spec, out)
        }
        Equation::Heat { alpha } => {
            let uy = deriv_y(u)?;
            let uxx = second_deriv_x(u)?;
            uy.add_scaled(&uxx, -alpha)?
        }
        Equation::Burgers { nu } => {
            let uy = deriv_y(u)?;
            let ux = deriv_x(u)?;
            let uxx = second_deriv_x(u)?;
            let spec = u.spec();
            let mut out = uy.into_values();
            let (uv, uxv, uxxv) = (u.values(), ux.values(), uxx.values());
            for i in 1..spec.nx - 1 {
                for j in 1..spec.ny - 1 {
                    let k = spec.idx(i, j);
                    out[k] += uv[k] * uxv[k] - nu * uxxv[k];
                }
            }
            Field::from_raw(spec, out)
        }
    };
    r.ensure_finite("pde residual")?;
    Ok(r)
}

/// Transposed linearized residual applied to `R(u)`: the exact variational
/// gradient direction of the residual energy. Kept as an alternative to the
/// raw residual for descent-property comparisons.
pub fn residual_adjoint(p: &PdeProblem, u: &Field) -> Result<Field> {
    let r = residual(p, u)?;
    let d = match &p.equation {
        // A = -kappa * Lap is symmetric on interior nodes.
        Equation::Poisson { kappa, .. } => laplacian(&r)?.scaled(-kappa),
        // (D_y - alpha D_xx)^T = -D_y - alpha D_xx for interior-supported r.
        Equation::Heat { alpha } => deriv_y(&r)?.scaled(-1.0).add_scaled(&second_deriv_x(&r)?, -alpha)?,
        // J^T r = -D_y r + (D_x u) r - D_x(u r) - nu D_xx r.
        Equation::Burgers { nu } => {
            let ux = deriv_x(u)?;
            let ur = u.zip(&r, |a, b| a * b)?;
            let mut d = deriv_y(&r)?.scaled(-1.0);
            d = d.zip(&ux.zip(&r, |a, b| a * b)?, |a, b| a + b)?;
            d = d.add_scaled(&deriv_x(&ur)?, -1.0)?;
            d.add_scaled(&second_deriv_x(&r)?, -nu)?
        }
    };
    // Keep the direction interior-supported like the raw residual.
    let spec = u.spec();
    let mut out = d.into_values();
    for i in 0..spec.nx {
        out[spec.idx(i, 0)] = 0.0;
        out[spec.idx(i, spec.ny - 1)] = 0.0;
    }
    for j in 0..spec.ny {
        out[spec.idx(0, j)] = 0.0;
        out[spec.idx(spec.nx - 1, j)] = 0.0;
    }
    Ok(Field::from_raw(spec, out))
}

/// Residual energy `E(u) = 0.5 * hx * hy * sum_interior R^2`; zero exactly
/// at discrete solutions.
pub fn energy(p: &PdeProblem, u: &Field) -> Result<f64> {
    let r = residual(p, u)?;
    let w = 0.5 * p.grid.hx() * p.grid.hy();
    Ok(w * r.values().iter().map(|v| v * v).sum::<f64>())
}

/// Closed-form solution when one exists for the problem's data:
/// * canonical Poisson: `amplitude / (2 pi^2 kappa) * sin(pi x) sin(pi y)`;
/// * canonical heat (`h = sin(pi x)`, zero sides): `exp(-alpha pi^2 y) sin(pi x)`;
/// * Burgers: none.
pub fn analytic_solution(p: &PdeProblem) -> Option<Field> {
    match &p.equation {
        Equation::Poisson { kappa, source } => match source {
            SourceSpec::SinSin { amplitude } if is_dirichlet_zero(&p.bc) => {
                let a = amplitude / (2.0 * PI * PI * kappa);
                Some(Field::from_fn(p.grid, move |x, y| {
                    a * (PI * x).sin() * (PI * y).sin()
                }))
            }
            _ => None,
        },
        Equation::Heat { alpha } => {
            let h = p.bc.initial()?;
            let grid = p.grid;
            let sin_profile = (0..grid.nx)
                .all(|i| (h[i] - (PI * grid.x(i)).sin()).abs() < 1e-12);
            if sin_profile && sides_are_zero_dirichlet(&p.bc) {
                let alpha = *alpha;
                Some(Field::from_fn(grid, move |x, y| {
                    (-alpha * PI * PI * y).exp() * (PI * x).sin()
                }))
            } else {
                None
            }
        }
        Equation::Burgers { .. } => None,
    }
}

fn is_zero_dirichlet(c: &crate::grid::EdgeCondition) -> bool {
    match c {
        crate::grid::EdgeCondition::Dirichlet(v) => v.iter().all(|x| *x == 0.0),
        _ => false,
    }
}

fn is_dirichlet_zero(bc: &BoundarySpec) -> bool {
    [&bc.x0, &bc.x1, &bc.y0, &bc.y1]
        .into_iter()
        .all(is_zero_dirichlet)
}

fn sides_are_zero_dirichlet(bc: &BoundarySpec) -> bool {
    is_zero_dirichlet(&bc.x0) && is_zero_dirichlet(&bc.x1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::relative_l2;

    fn grid64() -> GridSpec {
        GridSpec::unit_square(64).unwrap()
    }

    #[test]
    fn zero_field_zero_source_has_zero_residual() {
        let grid = grid64();
        let p = PdeProblem::new(
            grid,
            Equation::Poisson {
                kappa: 1.0,
                source: SourceSpec::Zero,
            },
            BoundarySpec::dirichlet_zero(grid),
        )
        .unwrap();
        let r = residual(&p, &Field::zeros(grid)).unwrap();
        assert_eq!(r.linf_norm(), 0.0);
        assert_eq!(energy(&p, &Field::zeros(grid)).unwrap(), 0.0);
    }

    #[test]
    fn poisson_residual_of_analytic_solution_is_truncation_sized() {
        // u = sin sin solves the continuous equation exactly, so the
        // residual is pure stencil truncation: |R|/|f| ~ (pi h)^2 / 12.
        let grid = grid64();
        let p = PdeProblem::poisson(1.0, grid).unwrap();
        let u = analytic_solution(&p).unwrap();
        let r = residual(&p, &u).unwrap();
        let f = SourceSpec::SinSin {
            amplitude: 2.0 * PI * PI,
        }
        .field(grid);
        let ratio = r.l2_norm() / f.l2_norm();
        let expected = (PI * grid.hx()).powi(2) / 12.0;
        assert!(
            (0.3 * expected..3.0 * expected).contains(&ratio),
            "residual ratio {ratio:.3e}, expected about {expected:.3e}"
        );
    }

    #[test]
    fn energy_is_nonnegative_and_quadratic() {
        let grid = GridSpec::unit_square(16).unwrap();
        let p = PdeProblem::new(
            grid,
            Equation::Poisson {
                kappa: 1.3,
                source: SourceSpec::Zero,
            },
            BoundarySpec::dirichlet_zero(grid),
        )
        .unwrap();
        let mut rng = crate::rng::rng_from_seed(11);
        let u = Field::standard_normal(grid, &mut rng);
        let e1 = energy(&p, &u).unwrap();
        let e2 = energy(&p, &u.scaled(2.0)).unwrap();
        assert!(e1 > 0.0);
        assert!((e2 / e1 - 4.0).abs() < 1e-9, "doubling u quadruples E for zero source");
    }

    #[test]
    fn energy_zero_iff_residual_zero() {
        let grid = GridSpec::unit_square(12).unwrap();
        let p = PdeProblem::new(
            grid,
            Equation::Heat { alpha: 0.03 },
            BoundarySpec::space_time(grid, vec![0.0; 12], 0.0).unwrap(),
        )
        .unwrap();
        let z = Field::zeros(grid);
        assert_eq!(energy(&p, &z).unwrap(), 0.0);
        assert_eq!(residual(&p, &z).unwrap().linf_norm(), 0.0);
        let mut rng = crate::rng::rng_from_seed(2);
        let u = Field::standard_normal(grid, &mut rng);
        let e = energy(&p, &u).unwrap();
        let rinf = residual(&p, &u).unwrap().linf_norm();
        assert!((e > 0.0) == (rinf > 0.0));
    }

    #[test]
    fn poisson_residual_is_affine_in_u() {
        let grid = GridSpec::unit_square(20).unwrap();
        let p = PdeProblem::poisson(1.7, grid).unwrap();
        let mut rng = crate::rng::rng_from_seed(8);
        let u = Field::standard_normal(grid, &mut rng);
        let v = Field::standard_normal(grid, &mut rng);
        let lhs = residual(&p, &u.zip(&v, |a, b| a + b).unwrap())
            .unwrap()
            .add_scaled(&residual(&p, &u).unwrap(), -1.0)
            .unwrap();
        let rhs = laplacian(&v).unwrap().scaled(-1.7);
        assert!(crate::grid::max_abs_error(&lhs, &rhs).unwrap() < 1e-9);
    }

    #[test]
    fn burgers_residual_respects_odd_symmetry() {
        // If u solves the discrete system then -u(1-x, y) has a residual of
        // equal norm (the equation is equivariant under x -> 1-x, u -> -u).
        let grid = GridSpec::unit_square(32).unwrap();
        let p = PdeProblem::burgers(0.02, grid).unwrap();
        let u = Field::from_fn(grid, |x, y| {
            (2.0 * PI * x).sin() * (-(y * 2.0)).exp() + 0.1 * (PI * x).sin() * y
        });
        let mirrored = Field::from_fn(grid, |x, y| {
            let xm = 1.0 - x;
            -((2.0 * PI * xm).sin() * (-(y * 2.0)).exp() + 0.1 * (PI * xm).sin() * y)
        });
        let r1 = residual(&p, &u).unwrap().l2_norm();
        let r2 = residual(&p, &mirrored).unwrap().l2_norm();
        assert!((r1 - r2).abs() / r1 < 1e-9);
    }

    #[test]
    fn residual_of_analytic_solutions_converges_second_order() {
        for make in [
            |n: usize| {
                let g = GridSpec::unit_square(n).unwrap();
                PdeProblem::poisson(1.4, g).unwrap()
            },
            |n: usize| {
                let g = GridSpec::unit_square(n).unwrap();
                PdeProblem::heat(0.04, g).unwrap()
            },
        ] {
            let norm = |n: usize| {
                let p = make(n);
                let u = analytic_solution(&p).unwrap();
                residual(&p, &u).unwrap().l2_norm()
            };
            let ratio = norm(33) / norm(65);
            assert!(
                (2.8..5.5).contains(&ratio),
                "second-order convergence expected, got ratio {ratio:.2}"
            );
        }
    }

    #[test]
    fn analytic_solutions_match_quoted_values() {
        let grid = grid64();
        // Poisson kappa = 2: peak 1/kappa = 0.5 at the center.
        let p = PdeProblem::poisson(2.0, grid).unwrap();
        let u = analytic_solution(&p).unwrap();
        let peak = u.linf_norm();
        assert!((peak - 0.5).abs() < 1e-3);
        // Heat alpha = 0.031 at (x, y) = (0.5, 1): exp(-0.031 pi^2) ~ 0.7364.
        let ph = PdeProblem::heat(0.031, grid).unwrap();
        let uh = analytic_solution(&ph).unwrap();
        let expected = (-0.031 * PI * PI).exp();
        assert!((expected - 0.7364).abs() < 1e-4);
        // Nearest node to x = 0.5 on a 64-grid is i = 32, x = 0.5079.
        let got = uh.get(32, grid.ny - 1);
        let exact_at_node = (-0.031 * PI * PI).exp() * (PI * grid.x(32)).sin();
        assert!((got - exact_at_node).abs() < 1e-12);
        // Burgers has no closed form.
        let pb = PdeProblem::burgers(0.02, grid).unwrap();
        assert!(analytic_solution(&pb).is_none());
    }

    #[test]
    fn adjoint_direction_is_the_transposed_linearization() {
        // <J v, w> == <v, J^T w> for interior-supported v, w, where J is the
        // residual linearization at u and J^T w is computed by the adjoint
        // stencils (checked through residual_adjoint with w = R(u)).
        let grid = GridSpec::unit_square(14).unwrap();
        let p = PdeProblem::burgers(0.05, grid).unwrap();
        let mut rng = crate::rng::rng_from_seed(21);
        let interior_noise = |rng: &mut crate::rng::SeedRng| {
            let f = Field::standard_normal(grid, rng);
            let mut v = f.into_values();
            for i in 0..grid.nx {
                v[grid.idx(i, 0)] = 0.0;
                v[grid.idx(i, grid.ny - 1)] = 0.0;
            }
            for j in 0..grid.ny {
                v[grid.idx(0, j)] = 0.0;
                v[grid.idx(grid.nx - 1, j)] = 0.0;
            }
            Field::from_values(grid, v).unwrap()
        };
        let u = interior_noise(&mut rng);
        let v = interior_noise(&mut rng);
        let r = residual(&p, &u).unwrap();
        // J v by analytic linearization: D_y v + v (D_x u) + u (D_x v) - nu D_xx v.
        let jv = {
            let dyv = deriv_y(&v).unwrap();
            let dxu = deriv_x(&u).unwrap();
            let dxv = deriv_x(&v).unwrap();
            let mut out = dyv.into_values();
            for i in 1..grid.nx - 1 {
                for j in 1..grid.ny - 1 {
                    let k = grid.idx(i, j);
                    out[k] += v.values()[k] * dxu.values()[k] + u.values()[k] * dxv.values()[k]
                        - 0.05 * second_deriv_x(&v).unwrap().values()[k];
                }
            }
            Field::from_values(grid, out).unwrap()
        };
        let jt_r = residual_adjoint(&p, &u).unwrap();
        let dot = |a: &Field, b: &Field| -> f64 {
            a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum()
        };
        let lhs = dot(&jv, &r);
        let rhs = dot(&v, &jt_r);
        assert!(
            (lhs - rhs).abs() / lhs.abs().max(1e-12) < 1e-9,
            "adjoint identity violated: {lhs:.6e} vs {rhs:.6e}"
        );
    }

    #[test]
    fn constructor_rejects_bad_coefficients_and_missing_initial() {
        let grid = GridSpec::unit_square(8).unwrap();
        assert!(PdeProblem::poisson(0.0, grid).is_err());
        assert!(PdeProblem::heat(-0.1, grid).is_err());
        // Space-time equation without an Initial edge.
        assert!(PdeProblem::new(
            grid,
            Equation::Heat { alpha: 0.03 },
            BoundarySpec::dirichlet_zero(grid),
        )
        .is_err());
    }

    #[test]
    fn residual_rejects_grid_mismatch() {
        let p = PdeProblem::poisson(1.0, grid64()).unwrap();
        let other = Field::zeros(GridSpec::unit_square(32).unwrap());
        assert!(matches!(
            residual(&p, &other),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn relative_l2_of_zero_vs_scaled_problem() {
        // Scaling a linear problem's solution matches scaling kappa down.
        let grid = grid64();
        let p1 = PdeProblem::poisson(1.0, grid).unwrap();
        let p2 = PdeProblem::poisson(2.0, grid).unwrap();
        let u1 = analytic_solution(&p1).unwrap();
        let u2 = analytic_solution(&p2).unwrap();
        assert!(relative_l2(&u1.scaled(0.5), &u2).unwrap() < 1e-12);
    }
}
