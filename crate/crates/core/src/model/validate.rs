use nalgebra::DVector;
use serde::Serialize;

use super::{check_len, check_shape, PortHamiltonian};
use crate::error::{PhError, Result};
use crate::linalg;
use crate::Tolerances;

/// Per-state diagnostics of the structural assumptions.
#[derive(Debug, Clone, Serialize)]
pub struct SampleCheck {
    pub state: Vec<f64>,
    /// `‖J(x) + J(x)ᵀ‖`
    pub skew_defect: f64,
    pub skew_tol: f64,
    /// Smallest eigenvalue of `R(x) − R*`.
    pub dissipation_gap: f64,
    pub psd_tol: f64,
    pub hessian_asymmetry: f64,
    pub hessian_min_eigenvalue: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StructuralCheck {
    pub r_star_asymmetry: f64,
    pub r_star_min_eigenvalue: f64,
    pub g_full_column_rank: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub structural: StructuralCheck,
    pub samples: Vec<SampleCheck>,
    pub passed: bool,
}

impl ValidationReport {
    pub fn failing_samples(&self) -> impl Iterator<Item = &SampleCheck> {
        self.samples.iter().filter(|s| !s.passed)
    }
}

/// Checks skew-symmetry of `J`, `R(x) ⪰ R*`, and symmetry / definiteness of
/// the Hessian at every sampled state.
pub fn validate<M: PortHamiltonian + ?Sized>(
    model: &M,
    sample_states: &[DVector<f64>],
    tol: &Tolerances,
) -> Result<ValidationReport> {
    if sample_states.is_empty() {
        return Err(PhError::Precondition("at least one sample state is required".into()));
    }
    let n = model.dim_state();
    let r_star = model.dissipation_bound();
    check_shape("R_star", r_star, n, n)?;
    check_shape("G", model.input_matrix(), n, model.dim_input())?;

    let r_scale = r_star.norm();
    let structural = {
        let asym = linalg::asymmetry(r_star);
        let min_eig = linalg::min_eigenvalue(r_star);
        let rank = linalg::has_full_column_rank(model.input_matrix());
        StructuralCheck {
            r_star_asymmetry: asym,
            r_star_min_eigenvalue: min_eig,
            g_full_column_rank: rank,
            passed: asym <= tol.psd(r_scale) && min_eig >= -tol.psd(r_scale) && rank,
        }
    };

    let mut samples = Vec::with_capacity(sample_states.len());
    for x in sample_states {
        check_len("sample state", x, n)?;
        let j = model.interconnection(x);
        check_shape("J", &j, n, n)?;
        let r = model.dissipation(x);
        check_shape("R", &r, n, n)?;
        let grad = model.gradient(x);
        check_len("grad_H", &grad, n)?;
        let hess = model.hessian(x);
        check_shape("hess_H", &hess, n, n)?;

        let skew_defect = linalg::skew_defect(&j);
        let skew_tol = tol.skew(j.norm());
        let dissipation_gap = linalg::min_eigenvalue(&(&r - r_star));
        let psd_tol = tol.psd(r.norm());
        let hessian_asymmetry = linalg::asymmetry(&hess);
        let hessian_min_eigenvalue = linalg::min_eigenvalue(&hess);
        let passed = skew_defect <= skew_tol
            && dissipation_gap >= -psd_tol
            && hessian_asymmetry <= tol.psd(hess.norm())
            && hessian_min_eigenvalue > 0.0;
        samples.push(SampleCheck {
            state: x.iter().copied().collect(),
            skew_defect,
            skew_tol,
            dissipation_gap,
            psd_tol,
            hessian_asymmetry,
            hessian_min_eigenvalue,
            passed,
        });
    }
    let passed = structural.passed && samples.iter().all(|s| s.passed);
    Ok(ValidationReport {
        structural,
        samples,
        passed,
    })
}
