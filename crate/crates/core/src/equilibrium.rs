//! Forced equilibria: points `(x, u)` with `(J(x) − R(x))∇H(x) + Gu = 0`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{PhError, Result};
use crate::model::{check_len, EquilibriumPoint, PortHamiltonian};
use crate::Tolerances;

pub const MAX_ITER: usize = 100;
pub const MAX_HALVINGS: usize = 30;

/// Outcome of the steady-state membership test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Membership {
    pub member: bool,
    pub residual: f64,
}

pub fn is_in_steady_state_relation<M: PortHamiltonian + ?Sized>(
    model: &M,
    x: &DVector<f64>,
    u: &DVector<f64>,
    tol: f64,
) -> Result<Membership> {
    let residual = model.dynamics(x, u)?.norm();
    Ok(Membership {
        member: residual <= tol,
        residual,
    })
}

/// Wraps a known steady state, failing if its residual exceeds `tol`.
pub fn certify<M: PortHamiltonian + ?Sized>(
    model: &M,
    x_bar: DVector<f64>,
    u_bar: DVector<f64>,
    tol: f64,
) -> Result<EquilibriumPoint> {
    let eq = EquilibriumPoint::evaluate(model, x_bar, u_bar)?;
    if eq.residual_norm > tol {
        return Err(PhError::Precondition(format!(
            "(x, u) is not in the steady-state relation: residual {:.3e} > {tol:.3e}",
            eq.residual_norm
        )));
    }
    Ok(eq)
}

/// Jacobian of the steady-state residual; analytic for quadratic-affine
/// systems, forward differences otherwise.
pub fn residual_jacobian<M: PortHamiltonian + ?Sized>(
    model: &M,
    x: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    if let Some(sys) = model.as_quadratic_affine() {
        check_len("x", x, sys.n())?;
        return Ok(sys.residual_jacobian(x));
    }
    forward_difference_jacobian(model, x, u)
}

pub fn forward_difference_jacobian<M: PortHamiltonian + ?Sized>(
    model: &M,
    x: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let n = model.dim_state();
    let g0 = model.dynamics(x, u)?;
    let mut jac = DMatrix::zeros(n, n);
    for j in 0..n {
        let h = f64::EPSILON.sqrt() * (1.0 + x[j].abs());
        let mut xp = x.clone();
        xp[j] += h;
        let col = (model.dynamics(&xp, u)? - &g0) / h;
        jac.set_column(j, &col);
    }
    Ok(jac)
}

/// Damped Newton search for `x̄` with `(x̄, ū)` in the steady-state relation.
///
/// Converges locally; different `x0` may lead to different equilibria.
pub fn find_equilibrium<M: PortHamiltonian + ?Sized>(
    model: &M,
    u_bar: &DVector<f64>,
    x0: &DVector<f64>,
    tol: &Tolerances,
) -> Result<EquilibriumPoint> {
    let n = model.dim_state();
    check_len("x0", x0, n)?;
    check_len("u_bar", u_bar, model.dim_input())?;
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(PhError::Precondition("x0 must be finite".into()));
    }
    let mut x = x0.clone();
    let mut g = model.dynamics(&x, u_bar)?;
    let mut norm = g.norm();
    for iteration in 0..MAX_ITER {
        if norm <= tol.equilibrium {
            break;
        }
        let jac = residual_jacobian(model, &x, u_bar)?;
        let step = match jac.lu().solve(&(-&g)) {
            Some(step) if step.iter().all(|v| v.is_finite()) => step,
            _ => return Err(PhError::SingularJacobian { iteration, residual: norm }),
        };
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let trial = &x + &step * alpha;
            let gt = model.dynamics(&trial, u_bar)?;
            let nt = gt.norm();
            if nt.is_finite() && nt < norm {
                x = trial;
                g = gt;
                norm = nt;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if norm > tol.equilibrium {
        return Err(PhError::NonConvergence {
            what: "equilibrium search",
            iterations: MAX_ITER,
            residual: norm,
            last_iterate: x.iter().copied().collect(),
        });
    }
    EquilibriumPoint::evaluate(model, x, u_bar.clone())
}
