use nalgebra::{DMatrix, DVector};

use super::{check_len, check_shape, PHModel, PortHamiltonian};
use crate::error::{PhError, Result};
use crate::linalg;
use crate::Tolerances;

/// Quadratic-affine port-Hamiltonian system:
/// `F(x) = F₀ + Σᵢ Fᵢ xᵢ`, `H(x) = ½ xᵀQx`, with `R(x) ≡ R₀`.
///
/// The co-energy form `𝓕(s) = F₀ + Σᵢ 𝓕ᵢ sᵢ` with `𝓕ᵢ = Σⱼ Fⱼ (Q⁻¹)ᵢⱼ` is
/// precomputed at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticAffinePH {
    f0: DMatrix<f64>,
    f: Vec<DMatrix<f64>>,
    q: DMatrix<f64>,
    r0: DMatrix<f64>,
    g: DMatrix<f64>,
    q_inv: DMatrix<f64>,
    coenergy_coeffs: Vec<DMatrix<f64>>,
}

impl QuadraticAffinePH {
    pub fn new(
        f0: DMatrix<f64>,
        f: Vec<DMatrix<f64>>,
        q: DMatrix<f64>,
        r0: DMatrix<f64>,
        g: DMatrix<f64>,
    ) -> Result<Self> {
        let n = f0.nrows();
        if n == 0 {
            return Err(PhError::InvalidModel("state dimension must be positive".into()));
        }
        check_shape("F0", &f0, n, n)?;
        if f.len() != n {
            return Err(PhError::dim("F", format!("{n} matrices"), format!("{} matrices", f.len())));
        }
        for fj in &f {
            check_shape("F", fj, n, n)?;
        }
        check_shape("Q", &q, n, n)?;
        check_shape("R0", &r0, n, n)?;
        if g.nrows() != n || g.ncols() == 0 {
            return Err(PhError::dim("G", format!("{n}xm with m > 0"), format!("{}x{}", g.nrows(), g.ncols())));
        }
        if !linalg::has_full_column_rank(&g) {
            return Err(PhError::InvalidModel("`G` must have full column rank".into()));
        }

        let tol = Tolerances::default();
        for (j, fj) in f.iter().enumerate() {
            if linalg::skew_defect(fj) > tol.skew(fj.norm()) {
                return Err(PhError::InvalidModel(format!("`F[{}]` is not skew-symmetric", j + 1)));
            }
        }
        let r_scale = r0.norm();
        if linalg::asymmetry(&r0) > tol.psd(r_scale) {
            return Err(PhError::InvalidModel("`R0` is not symmetric".into()));
        }
        if linalg::min_eigenvalue(&r0) < -tol.psd(r_scale) {
            return Err(PhError::InvalidModel("`R0` is not positive semidefinite".into()));
        }
        let defect = (&f0 + f0.transpose() + &r0 * 2.0).norm();
        if defect > tol.psd(r_scale + f0.norm()) {
            return Err(PhError::InvalidModel(format!(
                "`F0 + F0ᵀ` differs from `-2 R0` by {defect:.3e}"
            )));
        }
        if linalg::asymmetry(&q) > tol.psd(q.norm()) {
            return Err(PhError::InvalidModel("`Q` is not symmetric".into()));
        }
        if linalg::min_eigenvalue(&q) <= 0.0 {
            return Err(PhError::InvalidModel("`Q` is not positive definite".into()));
        }
        let q_inv = linalg::symmetrize(&q)
            .cholesky()
            .ok_or_else(|| PhError::InvalidModel("`Q` is not positive definite".into()))?
            .inverse();

        let coenergy_coeffs = (0..n)
            .map(|i| {
                f.iter()
                    .enumerate()
                    .fold(DMatrix::zeros(n, n), |acc, (j, fj)| acc + fj * q_inv[(i, j)])
            })
            .collect();

        Ok(Self {
            f0,
            f,
            q,
            r0,
            g,
            q_inv,
            coenergy_coeffs,
        })
    }

    pub fn n(&self) -> usize {
        self.f0.nrows()
    }

    pub fn m(&self) -> usize {
        self.g.ncols()
    }

    pub fn f0(&self) -> &DMatrix<f64> {
        &self.f0
    }

    pub fn f_list(&self) -> &[DMatrix<f64>] {
        &self.f
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn q_inv(&self) -> &DMatrix<f64> {
        &self.q_inv
    }

    pub fn r0(&self) -> &DMatrix<f64> {
        &self.r0
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    /// `𝓕ᵢ`, the coefficients of `𝓕(s)` in the co-energy variables.
    pub fn coenergy_coefficients(&self) -> &[DMatrix<f64>] {
        &self.coenergy_coeffs
    }

    /// `F(x) = F₀ + Σᵢ Fᵢ xᵢ`.
    pub fn structure_at(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.f
            .iter()
            .zip(x.iter())
            .fold(self.f0.clone(), |acc, (fi, xi)| acc + fi * *xi)
    }

    /// Jacobian of `g(x) = F(x)Qx + Gu`: `F(x)Q + Σᵢ Fᵢ (Qx) eᵢᵀ`.
    pub fn residual_jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let qx = &self.q * x;
        let mut jac = self.structure_at(x) * &self.q;
        for (i, fi) in self.f.iter().enumerate() {
            jac.column_mut(i).axpy(1.0, &(fi * &qx), 1.0);
        }
        jac
    }

    /// Same system seen only through closures, so generic code paths
    /// (Newton inversion, finite differences) are exercised.
    pub fn to_general(&self) -> PHModel {
        let sys = self.clone();
        let (q1, q2, q3) = (self.q.clone(), self.q.clone(), self.q.clone());
        let r0 = self.r0.clone();
        PHModel::builder(self.n(), self.m())
            .interconnection(move |x| {
                let f = sys.structure_at(x);
                (&f - f.transpose()) * 0.5
            })
            .dissipation(move |_| r0.clone(), self.r0.clone())
            .input_matrix(self.g.clone())
            .hamiltonian(
                move |x| 0.5 * x.dot(&(&q1 * x)),
                move |x| &q2 * x,
                move |_| q3.clone(),
            )
            .build()
            .expect("a validated quadratic-affine system is a valid general model")
    }
}

impl PortHamiltonian for QuadraticAffinePH {
    fn dim_state(&self) -> usize {
        self.n()
    }

    fn dim_input(&self) -> usize {
        self.m()
    }

    fn interconnection(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let f = self.structure_at(x);
        (&f - f.transpose()) * 0.5
    }

    fn dissipation(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.r0.clone()
    }

    fn dissipation_bound(&self) -> &DMatrix<f64> {
        &self.r0
    }

    fn input_matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    fn hamiltonian(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x))
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.q * x
    }

    fn hessian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.q.clone()
    }

    fn gradient_inverse(&self, s: &DVector<f64>) -> Option<DVector<f64>> {
        Some(&self.q_inv * s)
    }

    fn structure_matrix(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.structure_at(x)
    }

    fn as_quadratic_affine(&self) -> Option<&QuadraticAffinePH> {
        Some(self)
    }

    fn shifted_hamiltonian(&self, x: &DVector<f64>, x_bar: &DVector<f64>) -> Result<f64> {
        check_len("x", x, self.n())?;
        check_len("x_bar", x_bar, self.n())?;
        let d = x - x_bar;
        Ok(0.5 * d.dot(&(&self.q * &d)))
    }

    fn coenergy_structure(&self, s: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_len("s", s, self.n())?;
        Ok(self
            .coenergy_coeffs
            .iter()
            .zip(s.iter())
            .fold(self.f0.clone(), |acc, (fi, si)| acc + fi * *si))
    }
}
