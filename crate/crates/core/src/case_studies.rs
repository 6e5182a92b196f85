//! Synchronous generator (6th-order, resistive load) and rigid body under
//! proportional control with constant disturbances.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::analyzer;
use crate::error::{PhError, Result};
use crate::linalg;
use crate::model::{check_len, QuadraticAffinePH};

/// Generator parameters: inductances in H, resistances in Ω, friction in
/// N·m·s, inertia in kg·m².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncGenParams {
    pub l_d: f64,
    pub l_q: f64,
    pub l_afd: f64,
    pub l_akd: f64,
    pub l_akq: f64,
    pub l_ffd: f64,
    pub l_kkd: f64,
    pub l_kkq: f64,
    pub k: f64,
    /// Stator plus load resistance.
    pub r: f64,
    pub r_f: f64,
    pub r_kd: f64,
    pub r_kq: f64,
    /// Mechanical friction.
    pub d: f64,
    /// Total moment of inertia of turbine and rotor.
    pub m: f64,
}

impl SyncGenParams {
    /// 5×5 inductance matrix over `(ψ_d, ψ_q, ψ_f, ψ_kd, ψ_kq)`.
    pub fn inductance(&self) -> DMatrix<f64> {
        let k = self.k;
        #[rustfmt::skip]
        let l = DMatrix::from_row_slice(5, 5, &[
            self.l_d,           0.0,               k * self.l_afd, k * self.l_akd, 0.0,
            0.0,                self.l_q,          0.0,            0.0,            -k * self.l_akq,
            k * self.l_afd,     0.0,               self.l_ffd,     self.l_akd,     0.0,
            k * self.l_akd,     0.0,               self.l_akd,     self.l_kkd,     0.0,
            0.0,                -k * self.l_akq,   0.0,            0.0,            self.l_kkq,
        ]);
        l
    }

    pub fn dissipation(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(&[
            self.r, self.r, self.r_f, self.r_kd, self.r_kq, self.d,
        ]))
    }
}

/// Built-in illustrative parameter set (per-unit-style magnitudes, not
/// measured data).
pub fn sync_gen_default_params() -> SyncGenParams {
    serde_json::from_str(include_str!("../data/sync_gen_default.json")).expect("bundled parameter file parses")
}

pub fn build_sync_gen(p: &SyncGenParams) -> Result<QuadraticAffinePH> {
    for (name, v) in [
        ("r", p.r),
        ("r_f", p.r_f),
        ("r_kd", p.r_kd),
        ("r_kq", p.r_kq),
        ("d", p.d),
        ("m", p.m),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(PhError::InvalidModel(format!("`{name}` must be positive, got {v}")));
        }
    }
    let l = p.inductance();
    let l_inv = l
        .clone()
        .cholesky()
        .ok_or_else(|| PhError::InvalidModel("inductance matrix L is not positive definite".into()))?
        .inverse();
    let q = linalg::block_diag(&[&l_inv, &DMatrix::from_element(1, 1, 1.0 / p.m)]);

    // J(x) couples (ψ_d, ψ_q) with the rotor momentum p:
    // J[0][5] = −ψ_q, J[1][5] = ψ_d, and the skew counterparts.
    let mut f = vec![DMatrix::zeros(6, 6); 6];
    f[0][(1, 5)] = 1.0;
    f[0][(5, 1)] = -1.0;
    f[1][(0, 5)] = -1.0;
    f[1][(5, 0)] = 1.0;

    let r = p.dissipation();
    #[rustfmt::skip]
    let g = DMatrix::from_row_slice(6, 2, &[
        0.0, 0.0,
        0.0, 0.0,
        1.0, 0.0,
        0.0, 0.0,
        0.0, 0.0,
        0.0, 1.0,
    ]);
    QuadraticAffinePH::new(-r.clone(), f, q, r, g)
}

/// Initial guess for the equilibrium search: field current `V_f / R_f`,
/// speed `τ / d`, all other currents zero.
pub fn sync_gen_initial_guess(p: &SyncGenParams, v_f: f64, tau: f64) -> DVector<f64> {
    let s0 = DVector::from_row_slice(&[0.0, 0.0, v_f / p.r_f, 0.0, 0.0, tau / p.d]);
    let l = p.inductance();
    let mut x0 = DVector::zeros(6);
    x0.rows_mut(0, 5).copy_from(&(l * s0.rows(0, 5)));
    x0[5] = p.m * s0[5];
    x0
}

/// `B + Bᵀ − 2R` at `s̄ = (Ī_d, Ī_q, Ī_f, Ī_kd, Ī_kq, ω̄)`.
pub fn sync_gen_condition_matrix(p: &SyncGenParams, s_bar: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_len("s_bar", s_bar, 6)?;
    let sys = build_sync_gen(p)?;
    let x_bar = sys.q_inv() * s_bar;
    analyzer::condition_matrix(&sys, &x_bar)
}

/// Principal inertias, proportional gains `R = diag(r)` and constant
/// disturbance torques.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidBodyParams {
    pub inertia: [f64; 3],
    pub gains: [f64; 3],
    pub disturbance: [f64; 3],
}

impl RigidBodyParams {
    /// The disturbance enters as the constant input `ū = d`.
    pub fn input(&self) -> DVector<f64> {
        DVector::from_row_slice(&self.disturbance)
    }

    pub fn inertia_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(&self.inertia))
    }
}

/// Cross-product matrix `[v]×` with `[v]× w = v × w`.
pub fn cross_matrix(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[0.0, -v[2], v[1], v[2], 0.0, -v[0], -v[1], v[0], 0.0])
}

/// Rigid body in angular momentum `p = Mω` with the loop `u = −Ry` folded
/// into `F₀ = −R`, `J(p) = [p]×`, `H(p) = ½ pᵀM⁻¹p` and `G = I₃`, so that
/// `y = ∇H(p) = ω`.
///
/// Zero gains are accepted (lossless Euler equations).
pub fn build_rigid_body(p: &RigidBodyParams) -> Result<QuadraticAffinePH> {
    if p.inertia.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
        return Err(PhError::InvalidModel("principal inertias must be positive".into()));
    }
    if p.gains.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
        return Err(PhError::InvalidModel("proportional gains must be nonnegative".into()));
    }
    let r = DMatrix::from_diagonal(&DVector::from_row_slice(&p.gains));
    let q = DMatrix::from_diagonal(&DVector::from_iterator(3, p.inertia.iter().map(|m| 1.0 / m)));
    let f = (0..3)
        .map(|i| cross_matrix(&DVector::from_fn(3, |j, _| if i == j { 1.0 } else { 0.0 })))
        .collect();
    QuadraticAffinePH::new(-r.clone(), f, q, r, DMatrix::identity(3, 3))
}

/// `B + Bᵀ − 2R` at the angular velocity `ω̄`.
pub fn rigid_body_condition_matrix(p: &RigidBodyParams, omega_bar: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_len("omega_bar", omega_bar, 3)?;
    let sys = build_rigid_body(p)?;
    let x_bar = p.inertia_matrix() * omega_bar;
    analyzer::condition_matrix(&sys, &x_bar)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdReport {
    /// `r_x² r_y r_z`
    pub lhs: f64,
    /// `(d_x (m_z − m_y) / 2)²`
    pub rhs: f64,
    pub stable: bool,
}

/// Closed-form stability test for a disturbance acting on the x axis only,
/// at `ω̄ = (d_x / r_x, 0, 0)`.
pub fn single_axis_threshold(p: &RigidBodyParams) -> Result<ThresholdReport> {
    if p.disturbance[1] != 0.0 || p.disturbance[2] != 0.0 {
        return Err(PhError::Precondition("single-axis threshold needs d_y = d_z = 0".into()));
    }
    let [_, m_y, m_z] = p.inertia;
    let [r_x, r_y, r_z] = p.gains;
    let lhs = r_x * r_x * r_y * r_z;
    let rhs = (p.disturbance[0] * (m_z - m_y) / 2.0).powi(2);
    Ok(ThresholdReport {
        lhs,
        rhs,
        stable: lhs > rhs,
    })
}
