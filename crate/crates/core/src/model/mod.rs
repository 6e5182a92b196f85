//! Port-Hamiltonian models and the energy / co-energy maps they induce.
//!
//! A model is anything implementing [`PortHamiltonian`]:
//!
//! ```text
//!     ẋ = (J(x) − R(x)) ∇H(x) + G u
//!     y = Gᵀ ∇H(x)
//! ```
//!
//! Two implementations ship with the crate: [`PHModel`], assembled from
//! closures, and [`QuadraticAffinePH`], where `J − R` is affine in the state
//! and `H` is quadratic.

mod affine;
mod general;
mod validate;

pub use affine::QuadraticAffinePH;
pub use general::{MatrixMap, PHModel, PHModelBuilder, ScalarMap, VectorMap};
pub use validate::{validate, SampleCheck, StructuralCheck, ValidationReport};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{PhError, Result};

/// Iteration cap of the co-energy inversion.
pub const NEWTON_MAX_ITER: usize = 50;
const NEWTON_MAX_HALVINGS: usize = 30;

pub trait PortHamiltonian: Send + Sync {
    fn dim_state(&self) -> usize;
    fn dim_input(&self) -> usize;

    /// Interconnection matrix `J(x)`.
    fn interconnection(&self, x: &DVector<f64>) -> DMatrix<f64>;
    /// Dissipation matrix `R(x)`.
    fn dissipation(&self, x: &DVector<f64>) -> DMatrix<f64>;
    /// Constant lower bound `R*` with `R(x) ⪰ R*` for all x.
    fn dissipation_bound(&self) -> &DMatrix<f64>;
    fn input_matrix(&self) -> &DMatrix<f64>;

    fn hamiltonian(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;

    /// Closed-form inverse of the gradient map, when one is known.
    fn gradient_inverse(&self, _s: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }

    /// `F(x) = J(x) − R(x)`.
    fn structure_matrix(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.interconnection(x) - self.dissipation(x)
    }

    fn as_quadratic_affine(&self) -> Option<&QuadraticAffinePH> {
        None
    }

    fn dynamics(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("x", x, self.dim_state())?;
        check_len("u", u, self.dim_input())?;
        Ok(self.structure_matrix(x) * self.gradient(x) + self.input_matrix() * u)
    }

    fn output(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("x", x, self.dim_state())?;
        Ok(self.input_matrix().tr_mul(&self.gradient(x)))
    }

    /// Co-energy variables `s = ∇H(x)`.
    fn coenergy(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("x", x, self.dim_state())?;
        Ok(self.gradient(x))
    }

    /// `∇H*(s)`, starting the Newton inversion from the origin.
    fn state_from_coenergy(&self, s: &DVector<f64>) -> Result<DVector<f64>> {
        self.state_from_coenergy_near(s, None, crate::Tolerances::default().newton)
    }

    /// `∇H*(s)` with an explicit initial guess and relative tolerance.
    ///
    /// Uses the closed form when the model provides one, otherwise damped
    /// Newton on `∇H(x) = s` with step halving on the residual norm.
    fn state_from_coenergy_near(
        &self,
        s: &DVector<f64>,
        guess: Option<&DVector<f64>>,
        rel_tol: f64,
    ) -> Result<DVector<f64>> {
        let n = self.dim_state();
        check_len("s", s, n)?;
        if let Some(x) = self.gradient_inverse(s) {
            return Ok(x);
        }
        let mut x = match guess {
            Some(g) => {
                check_len("guess", g, n)?;
                g.clone()
            }
            None => DVector::zeros(n),
        };
        // Converged once the Newton step, an estimate of the remaining state
        // error, is below `rel_tol (1 + ‖x‖)`.
        let mut residual = self.gradient(&x) - s;
        let mut norm = residual.norm();
        for _ in 0..NEWTON_MAX_ITER {
            if norm == 0.0 {
                return Ok(x);
            }
            let step = match self.hessian(&x).lu().solve(&(-&residual)) {
                Some(step) if step.iter().all(|v| v.is_finite()) => step,
                _ => break,
            };
            if step.norm() <= rel_tol * (1.0 + x.norm()) {
                return Ok(x + step);
            }
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..=NEWTON_MAX_HALVINGS {
                let trial = &x + &step * alpha;
                let r = self.gradient(&trial) - s;
                let rn = r.norm();
                if rn.is_finite() && rn < norm {
                    x = trial;
                    residual = r;
                    norm = rn;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        Err(PhError::NonConvergence {
            what: "co-energy inversion",
            iterations: NEWTON_MAX_ITER,
            residual: norm,
            last_iterate: x.iter().copied().collect(),
        })
    }

    /// Shifted Hamiltonian (Bregman distance of `H` between `x` and `x̄`).
    fn shifted_hamiltonian(&self, x: &DVector<f64>, x_bar: &DVector<f64>) -> Result<f64> {
        check_len("x", x, self.dim_state())?;
        check_len("x_bar", x_bar, self.dim_state())?;
        let grad_bar = self.gradient(x_bar);
        Ok(self.hamiltonian(x) - (x - x_bar).dot(&grad_bar) - self.hamiltonian(x_bar))
    }

    /// `𝓕(s) = F(∇H*(s))`.
    fn coenergy_structure(&self, s: &DVector<f64>) -> Result<DMatrix<f64>> {
        let x = self.state_from_coenergy(s)?;
        Ok(self.structure_matrix(&x))
    }
}

pub(crate) fn check_len(field: &'static str, v: &DVector<f64>, n: usize) -> Result<()> {
    if v.len() != n {
        return Err(PhError::dim(field, n, v.len()));
    }
    Ok(())
}

pub(crate) fn check_shape(field: &'static str, m: &DMatrix<f64>, rows: usize, cols: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(PhError::dim(
            field,
            format!("{rows}x{cols}"),
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(())
}

/// A point of the steady-state relation together with its derived quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumPoint {
    #[serde(with = "crate::io::serde_helpers::vector")]
    pub x_bar: DVector<f64>,
    #[serde(with = "crate::io::serde_helpers::vector")]
    pub u_bar: DVector<f64>,
    #[serde(with = "crate::io::serde_helpers::vector")]
    pub y_bar: DVector<f64>,
    #[serde(with = "crate::io::serde_helpers::vector")]
    pub s_bar: DVector<f64>,
    pub residual_norm: f64,
}

impl EquilibriumPoint {
    /// Evaluates `ȳ`, `s̄` and the residual at `(x̄, ū)` without any tolerance check.
    pub fn evaluate<M: PortHamiltonian + ?Sized>(
        model: &M,
        x_bar: DVector<f64>,
        u_bar: DVector<f64>,
    ) -> Result<Self> {
        let residual_norm = model.dynamics(&x_bar, &u_bar)?.norm();
        let s_bar = model.gradient(&x_bar);
        let y_bar = model.input_matrix().tr_mul(&s_bar);
        Ok(Self {
            x_bar,
            u_bar,
            y_bar,
            s_bar,
            residual_norm,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn scalar_model(
        h: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dh: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2h: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> PHModel {
        PHModel::builder(1, 1)
            .dissipation(|_| DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, 1.0))
            .input_matrix(DMatrix::from_element(1, 1, 1.0))
            .hamiltonian(
                move |x| h(x[0]),
                move |x| DVector::from_element(1, dh(x[0])),
                move |x| DMatrix::from_element(1, 1, d2h(x[0])),
            )
            .build()
            .unwrap()
    }

    #[test]
    fn quartic_inverse_solves_cubic() {
        // x³ + x = 2 has the single real root x = 1.
        let model = scalar_model(|x| x.powi(4) / 4.0 + x * x / 2.0, |x| x.powi(3) + x, |x| 3.0 * x * x + 1.0);
        let x = model.state_from_coenergy(&DVector::from_element(1, 2.0)).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn exponential_bregman_distance() {
        let model = scalar_model(f64::exp, f64::exp, f64::exp);
        let d = model
            .shifted_hamiltonian(&DVector::from_element(1, 1.0), &DVector::from_element(1, 0.0))
            .unwrap();
        assert!((d - (E - 2.0)).abs() < 1e-15);
        assert!((d - 0.71828).abs() < 1e-5);
        let zero = model
            .shifted_hamiltonian(&DVector::from_element(1, 0.3), &DVector::from_element(1, 0.3))
            .unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn inversion_reports_nonconvergence_outside_range() {
        // ∇H = eˣ never reaches negative values.
        let model = scalar_model(f64::exp, f64::exp, f64::exp);
        let err = model.state_from_coenergy(&DVector::from_element(1, -1.0)).unwrap_err();
        assert!(matches!(err, PhError::NonConvergence { .. }), "{err}");
    }

    #[test]
    fn dimension_errors_name_the_argument() {
        let model = scalar_model(|x| x * x / 2.0, |x| x, |_| 1.0);
        let err = model
            .dynamics(&DVector::zeros(2), &DVector::zeros(1))
            .unwrap_err();
        assert!(err.to_string().contains("`x`"), "{err}");
        let err = model.output(&DVector::zeros(3)).unwrap_err();
        assert!(matches!(err, PhError::Dimension { field: "x", .. }));
    }
}
