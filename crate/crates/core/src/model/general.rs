use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{check_shape, PortHamiltonian};
use crate::error::{PhError, Result};
use crate::linalg;

pub type MatrixMap = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
pub type VectorMap = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type ScalarMap = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;

/// General port-Hamiltonian model built from evaluable maps.
#[derive(Clone)]
pub struct PHModel {
    n: usize,
    m: usize,
    j: MatrixMap,
    r: MatrixMap,
    r_star: DMatrix<f64>,
    g: DMatrix<f64>,
    h: ScalarMap,
    grad_h: VectorMap,
    hess_h: MatrixMap,
    grad_h_star: Option<VectorMap>,
}

impl fmt::Debug for PHModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PHModel")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("r_star", &self.r_star)
            .field("g", &self.g)
            .field("closed_form_inverse", &self.grad_h_star.is_some())
            .finish_non_exhaustive()
    }
}

impl PHModel {
    pub fn builder(dim_state: usize, dim_input: usize) -> PHModelBuilder {
        PHModelBuilder {
            n: dim_state,
            m: dim_input,
            j: None,
            r: None,
            r_star: None,
            g: None,
            hamiltonian: None,
            grad_h_star: None,
        }
    }
}

pub struct PHModelBuilder {
    n: usize,
    m: usize,
    j: Option<MatrixMap>,
    r: Option<MatrixMap>,
    r_star: Option<DMatrix<f64>>,
    g: Option<DMatrix<f64>>,
    hamiltonian: Option<(ScalarMap, VectorMap, MatrixMap)>,
    grad_h_star: Option<VectorMap>,
}

impl PHModelBuilder {
    /// Interconnection map; defaults to zero.
    pub fn interconnection(mut self, j: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.j = Some(Arc::new(j));
        self
    }

    /// Dissipation map together with its constant lower bound `R*`; both default to zero.
    pub fn dissipation(
        mut self,
        r: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
        r_star: DMatrix<f64>,
    ) -> Self {
        self.r = Some(Arc::new(r));
        self.r_star = Some(r_star);
        self
    }

    pub fn input_matrix(mut self, g: DMatrix<f64>) -> Self {
        self.g = Some(g);
        self
    }

    pub fn hamiltonian(
        mut self,
        h: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        hess: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.hamiltonian = Some((Arc::new(h), Arc::new(grad), Arc::new(hess)));
        self
    }

    /// Closed-form `∇H*`; without it the inverse is computed by Newton's method.
    pub fn coenergy_inverse(mut self, f: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static) -> Self {
        self.grad_h_star = Some(Arc::new(f));
        self
    }

    pub fn build(self) -> Result<PHModel> {
        let (n, m) = (self.n, self.m);
        if n == 0 || m == 0 {
            return Err(PhError::InvalidModel(format!(
                "state and input dimensions must be positive (n = {n}, m = {m})"
            )));
        }
        let g = self.g.ok_or_else(|| PhError::InvalidModel("missing field `G`".into()))?;
        check_shape("G", &g, n, m)?;
        if !linalg::has_full_column_rank(&g) {
            return Err(PhError::InvalidModel("`G` must have full column rank".into()));
        }
        let r_star = self.r_star.unwrap_or_else(|| DMatrix::zeros(n, n));
        check_shape("R_star", &r_star, n, n)?;
        let scale = r_star.norm();
        let tol = crate::Tolerances::default();
        if linalg::asymmetry(&r_star) > tol.psd(scale) {
            return Err(PhError::InvalidModel("`R_star` must be symmetric".into()));
        }
        if linalg::min_eigenvalue(&r_star) < -tol.psd(scale) {
            return Err(PhError::InvalidModel("`R_star` must be positive semidefinite".into()));
        }
        let (h, grad_h, hess_h) = self
            .hamiltonian
            .ok_or_else(|| PhError::InvalidModel("missing field `H`".into()))?;
        Ok(PHModel {
            n,
            m,
            j: self.j.unwrap_or_else(|| Arc::new(move |_| DMatrix::zeros(n, n))),
            r: self.r.unwrap_or_else(|| Arc::new(move |_| DMatrix::zeros(n, n))),
            r_star,
            g,
            h,
            grad_h,
            hess_h,
            grad_h_star: self.grad_h_star,
        })
    }
}

impl PortHamiltonian for PHModel {
    fn dim_state(&self) -> usize {
        self.n
    }

    fn dim_input(&self) -> usize {
        self.m
    }

    fn interconnection(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.j)(x)
    }

    fn dissipation(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.r)(x)
    }

    fn dissipation_bound(&self) -> &DMatrix<f64> {
        &self.r_star
    }

    fn input_matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    fn hamiltonian(&self, x: &DVector<f64>) -> f64 {
        (self.h)(x)
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.grad_h)(x)
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.hess_h)(x)
    }

    fn gradient_inverse(&self, s: &DVector<f64>) -> Option<DVector<f64>> {
        self.grad_h_star.as_ref().map(|f| f(s))
    }
}
