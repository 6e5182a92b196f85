//! Shifted-passivity, stability and passivity-shortage tests.
//!
//! Every condition reduces to the sign of the largest eigenvalue of a
//! symmetric matrix
//!
//! ```text
//!     ∇(𝓕(s)s̄) + ∇(𝓕(s)s̄)ᵀ − 2R*
//! ```
//!
//! which is constant (`B + Bᵀ − 2R₀`) for quadratic-affine systems and is
//! sampled with finite-difference Jacobians otherwise.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{PhError, Result};
use crate::io::serde_helpers;
use crate::linalg;
use crate::model::{check_len, PortHamiltonian, QuadraticAffinePH};
use crate::Tolerances;

/// Relative agreement required between the two constructions of `B`.
pub const B_FORMS_REL_TOL: f64 = 1e-9;
/// Bracket width of the shortage bisection, relative to `1 + |γ|`.
pub const GAMMA_BISECTION_WIDTH: f64 = 1e-9;
const GAMMA_MAX_EXPANSIONS: usize = 64;
const GAMMA_MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    SatisfiedStrictly,
    /// `|λ_max|` within the tolerance band: semidefinite but not strict.
    Satisfied,
    Violated,
}

impl Verdict {
    pub fn is_satisfied(self) -> bool {
        !matches!(self, Verdict::Violated)
    }
}

/// Which stability statement a margin report certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityBranch {
    /// Condition evaluated at `s̄` with `∇²H(x̄) ≻ 0`: local asymptotic stability.
    Local,
    /// Constant condition and strongly convex `H`: global asymptotic stability.
    Global,
    /// Condition and strong convexity checked on samples only.
    GlobalSampled,
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleInfo {
    pub note: &'static str,
    pub evaluated: usize,
    pub skipped: usize,
    pub worst_sample: Vec<f64>,
    pub min_hessian_eigenvalue: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    #[serde(with = "serde_helpers::matrix")]
    pub test_matrix: DMatrix<f64>,
    pub lambda_max: f64,
    pub verdict: Verdict,
    pub epsilon: f64,
    pub tau_psd: f64,
    /// Passivity shortage; `None` unless computed, `+∞` when infeasible.
    #[serde(with = "serde_helpers::opt_extended_f64")]
    pub gamma: Option<f64>,
    pub input_dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch: Option<StabilityBranch>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_info: Option<SampleInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offending_direction: Option<Vec<f64>>,
}

impl ConditionReport {
    fn from_matrix(test_matrix: DMatrix<f64>, tau_psd: f64, input_dim: usize) -> Self {
        let lambda_max = linalg::max_eigenvalue(&test_matrix);
        let (verdict, epsilon) = classify(lambda_max, tau_psd);
        Self {
            test_matrix,
            lambda_max,
            verdict,
            epsilon,
            tau_psd,
            gamma: None,
            input_dim,
            branch: None,
            sample_info: None,
            offending_direction: None,
        }
    }
}

/// Verdict bands: strict below `−2τ`, violated above `τ`, marginal between.
pub fn classify(lambda_max: f64, tau_psd: f64) -> (Verdict, f64) {
    if lambda_max < -2.0 * tau_psd {
        (Verdict::SatisfiedStrictly, -lambda_max / 2.0)
    } else if lambda_max > tau_psd {
        (Verdict::Violated, 0.0)
    } else {
        (Verdict::Satisfied, 0.0)
    }
}

/// `B = Σᵢ Fᵢ (Qx̄) eᵢᵀ Q⁻¹`, cross-checked against the co-energy form
/// `B = Σᵢ 𝓕ᵢ (Qx̄) eᵢᵀ`.
pub fn build_b(sys: &QuadraticAffinePH, x_bar: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_len("x_bar", x_bar, sys.n())?;
    let b = b_state_form(sys, x_bar);
    let b_co = b_coenergy_form(sys, x_bar);
    let dist = linalg::relative_distance(&b, &b_co);
    if dist > B_FORMS_REL_TOL {
        return Err(PhError::Inconsistent(format!(
            "state and co-energy constructions of B differ by {dist:.3e}"
        )));
    }
    Ok(b)
}

fn b_state_form(sys: &QuadraticAffinePH, x_bar: &DVector<f64>) -> DMatrix<f64> {
    let n = sys.n();
    let s_bar = sys.q() * x_bar;
    let mut b = DMatrix::zeros(n, n);
    for (i, fi) in sys.f_list().iter().enumerate() {
        // (Fᵢ s̄)(eᵢᵀ Q⁻¹)
        b.ger(1.0, &(fi * &s_bar), &sys.q_inv().row(i).transpose(), 1.0);
    }
    b
}

fn b_coenergy_form(sys: &QuadraticAffinePH, x_bar: &DVector<f64>) -> DMatrix<f64> {
    let n = sys.n();
    let s_bar = sys.q() * x_bar;
    let mut b = DMatrix::zeros(n, n);
    for (i, fi) in sys.coenergy_coefficients().iter().enumerate() {
        b.set_column(i, &(fi * &s_bar));
    }
    b
}

/// `B + Bᵀ − 2R₀`.
pub fn condition_matrix(sys: &QuadraticAffinePH, x_bar: &DVector<f64>) -> Result<DMatrix<f64>> {
    let b = build_b(sys, x_bar)?;
    Ok(&b + b.transpose() - sys.r0() * 2.0)
}

/// Constant-matrix shifted-passivity test. A strict verdict certifies global
/// asymptotic stability of `x̄` under `u = ū`.
pub fn check_affine(sys: &QuadraticAffinePH, x_bar: &DVector<f64>, tol: &Tolerances) -> Result<ConditionReport> {
    let s = condition_matrix(sys, x_bar)?;
    Ok(ConditionReport::from_matrix(s, tol.psd(sys.r0().norm()), sys.m()))
}

/// Axis-aligned box in co-energy coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBox {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl SampleBox {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(PhError::dim("upper", lower.len(), upper.len()));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| l > u || !l.is_finite() || !u.is_finite()) {
            return Err(PhError::Precondition("sample box bounds must be finite with lower ≤ upper".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn cube(center: &DVector<f64>, half_width: f64) -> Result<Self> {
        Self::new(center.add_scalar(-half_width), center.add_scalar(half_width))
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.lower
                .iter()
                .zip(self.upper.iter())
                .map(|(l, u)| if l == u { *l } else { rng.gen_range(*l..*u) }),
        )
    }
}

/// Settings of the sampled general-case test.
#[derive(Debug, Clone)]
pub struct SamplingPlan {
    pub sample_box: SampleBox,
    pub n_samples: usize,
    pub seed: u64,
}

/// Central-difference Jacobian of `s ↦ 𝓕(s)s̄`, step `1e-5 (1 + ‖s‖)`.
///
/// `guess` seeds the co-energy inversion of general models.
pub fn condition_map_jacobian<M: PortHamiltonian + ?Sized>(
    model: &M,
    s: &DVector<f64>,
    s_bar: &DVector<f64>,
    guess: Option<&DVector<f64>>,
    tol: &Tolerances,
) -> Result<DMatrix<f64>> {
    let n = model.dim_state();
    check_len("s", s, n)?;
    check_len("s_bar", s_bar, n)?;
    let h = 1e-5 * (1.0 + s.norm());
    let centre = model.state_from_coenergy_near(s, guess, tol.newton)?;
    let eval = |sv: &DVector<f64>| -> Result<DVector<f64>> {
        let x = model.state_from_coenergy_near(sv, Some(&centre), tol.newton)?;
        Ok(model.structure_matrix(&x) * s_bar)
    };
    let mut jac = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut sp = s.clone();
        let mut sm = s.clone();
        sp[j] += h;
        sm[j] -= h;
        let col = (eval(&sp)? - eval(&sm)?) / (2.0 * h);
        jac.set_column(j, &col);
    }
    Ok(jac)
}

fn monotonicity_test_matrix<M: PortHamiltonian + ?Sized>(
    model: &M,
    s: &DVector<f64>,
    s_bar: &DVector<f64>,
    guess: Option<&DVector<f64>>,
    tol: &Tolerances,
) -> Result<DMatrix<f64>> {
    let jac = condition_map_jacobian(model, s, s_bar, guess, tol)?;
    Ok(linalg::symmetrize(&(&jac + jac.transpose())) - model.dissipation_bound() * 2.0)
}

/// Sampled version of the monotonicity condition for general models.
///
/// The verdict holds on the sampled set only; samples whose co-energy
/// inversion fails are skipped and counted.
pub fn check_general<M: PortHamiltonian + ?Sized>(
    model: &M,
    x_bar: &DVector<f64>,
    plan: &SamplingPlan,
    tol: &Tolerances,
) -> Result<ConditionReport> {
    let n = model.dim_state();
    check_len("x_bar", x_bar, n)?;
    if plan.sample_box.dim() != n {
        return Err(PhError::dim("sample_box", n, plan.sample_box.dim()));
    }
    if plan.n_samples == 0 {
        return Err(PhError::Precondition("n_samples must be positive".into()));
    }
    let s_bar = model.gradient(x_bar);
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let samples: Vec<DVector<f64>> = (0..plan.n_samples).map(|_| plan.sample_box.sample(&mut rng)).collect();

    let evaluated: Vec<(DVector<f64>, DMatrix<f64>, f64)> = samples
        .par_iter()
        .filter_map(|s| {
            let m = monotonicity_test_matrix(model, s, &s_bar, Some(x_bar), tol).ok()?;
            let lam = linalg::max_eigenvalue(&m);
            Some((s.clone(), m, lam))
        })
        .collect();
    let skipped = plan.n_samples - evaluated.len();
    let (worst_s, worst_m, _) = evaluated
        .into_iter()
        .reduce(|a, b| if b.2 > a.2 { b } else { a })
        .ok_or_else(|| PhError::Precondition("co-energy inversion failed at every sample".into()))?;

    let mut report = ConditionReport::from_matrix(worst_m, tol.psd(model.dissipation_bound().norm()), model.dim_input());
    report.sample_info = Some(SampleInfo {
        note: "sampled, not a proof",
        evaluated: plan.n_samples - skipped,
        skipped,
        worst_sample: worst_s.iter().copied().collect(),
        min_hessian_eigenvalue: None,
    });
    Ok(report)
}

#[derive(Debug, Clone)]
pub enum MarginMode {
    /// Condition at `s̄` only.
    Local,
    /// Sampled test over a box. Quadratic-affine systems always get the
    /// exact global test, whichever mode is requested.
    Global(SamplingPlan),
}

/// Stability margin `ε` of the forced equilibrium `x̄`.
pub fn stability_margin<M: PortHamiltonian + ?Sized>(
    model: &M,
    x_bar: &DVector<f64>,
    mode: &MarginMode,
    tol: &Tolerances,
) -> Result<ConditionReport> {
    check_len("x_bar", x_bar, model.dim_state())?;
    if let Some(sys) = model.as_quadratic_affine() {
        // The test matrix is state independent and H is strongly convex, so
        // the local and global statements coincide.
        let mut report = check_affine(sys, x_bar, tol)?;
        report.branch = Some(StabilityBranch::Global);
        return Ok(report);
    }
    match mode {
        MarginMode::Local => {
            let hess_min = linalg::min_eigenvalue(&model.hessian(x_bar));
            if hess_min <= 0.0 {
                return Err(PhError::Precondition(format!(
                    "Hessian at x̄ is not positive definite (min eigenvalue {hess_min:.3e})"
                )));
            }
            let s_bar = model.gradient(x_bar);
            let m = monotonicity_test_matrix(model, &s_bar, &s_bar, Some(x_bar), tol)?;
            let mut report = ConditionReport::from_matrix(m, tol.psd(model.dissipation_bound().norm()), model.dim_input());
            report.branch = Some(StabilityBranch::Local);
            Ok(report)
        }
        MarginMode::Global(plan) => {
            let mut report = check_general(model, x_bar, plan, tol)?;
            let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
            let hess_min = (0..plan.n_samples)
                .map(|_| plan.sample_box.sample(&mut rng))
                .filter_map(|s| model.state_from_coenergy_near(&s, Some(x_bar), tol.newton).ok())
                .map(|x| linalg::min_eigenvalue(&model.hessian(&x)))
                .fold(f64::INFINITY, f64::min);
            if let Some(info) = report.sample_info.as_mut() {
                info.min_hessian_eigenvalue = Some(hess_min);
            }
            report.branch = Some(StabilityBranch::GlobalSampled);
            Ok(report)
        }
    }
}

/// Least `γ` with `B + Bᵀ − 2R₀ ⪯ 2γ GGᵀ`, or `+∞` when no `γ` works.
///
/// A negative value certifies output-strict shifted passivity.
pub fn shortage_gamma(sys: &QuadraticAffinePH, x_bar: &DVector<f64>, tol: &Tolerances) -> Result<ConditionReport> {
    let s = condition_matrix(sys, x_bar)?;
    let tau = tol.psd(sys.r0().norm());
    let mut report = ConditionReport::from_matrix(s.clone(), tau, sys.m());
    let (gamma, direction) = least_gamma(&s, sys.g(), tau);
    report.gamma = Some(gamma);
    report.offending_direction = direction.map(|v| v.iter().copied().collect());
    Ok(report)
}

/// Bisection core of [`shortage_gamma`], exposed for arbitrary symmetric `s`.
pub fn least_gamma(s: &DMatrix<f64>, g: &DMatrix<f64>, tau: f64) -> (f64, Option<DVector<f64>>) {
    let n = s.nrows();
    let ggt = g * g.transpose();
    let gtg = g.tr_mul(g);
    let proj = DMatrix::identity(n, n)
        - g * gtg.clone().try_inverse().expect("G has full column rank") * g.transpose();

    // Orthonormal bases of ker Gᵀ (projector eigenvalue 1) and range G (0).
    let eig = nalgebra::SymmetricEigen::new(linalg::symmetrize(&proj));
    let pick = |keep: fn(f64) -> bool| {
        let cols: Vec<DVector<f64>> = eig
            .eigenvalues
            .iter()
            .zip(eig.eigenvectors.column_iter())
            .filter(|(v, _)| keep(**v))
            .map(|(_, c)| c.into_owned())
            .collect();
        (!cols.is_empty()).then(|| DMatrix::from_columns(&cols))
    };
    let kernel = pick(|v| v > 0.5);
    let range = pick(|v| v <= 0.5).expect("G has at least one column");

    if let Some(kernel) = &kernel {
        let on_kernel = kernel.tr_mul(s) * kernel;
        let ker_eig = nalgebra::SymmetricEigen::new(linalg::symmetrize(&on_kernel));
        let (idx, lam_ker) = ker_eig
            .eigenvalues
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        if lam_ker > tau {
            return (f64::INFINITY, Some(kernel * ker_eig.eigenvectors.column(idx)));
        }
        // Directions of ker Gᵀ on which S is marginal cannot be coupled to
        // range G: the feedback term only acts on range G, so such coupling
        // is never absorbed by any finite γ.
        let coupling = range.tr_mul(s) * kernel;
        for (v, z) in ker_eig.eigenvalues.iter().zip(ker_eig.eigenvectors.column_iter()) {
            if *v >= -tau && (&coupling * z).norm() > tau {
                return (f64::INFINITY, Some(kernel * z));
            }
        }
    }

    let feasible = |gamma: f64| linalg::max_eigenvalue(&(s - &ggt * (2.0 * gamma))) <= tau;
    let spectral = linalg::eigenvalues(s).iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let sigma_min = linalg::min_eigenvalue(&gtg);
    let mut lo = -(spectral + 1.0) / (2.0 * sigma_min);
    let mut hi = -lo;
    let mut expansions = 0;
    while !feasible(hi) {
        if expansions == GAMMA_MAX_EXPANSIONS {
            let (_, v) = linalg::max_eigenpair(&(s - &ggt * (2.0 * hi)));
            return (f64::INFINITY, Some(v));
        }
        lo = hi;
        hi *= 2.0;
        expansions += 1;
    }
    for _ in 0..GAMMA_MAX_BISECTIONS {
        if hi - lo <= GAMMA_BISECTION_WIDTH * (1.0 + hi.abs()) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (hi, None)
}

/// `K_P = (max(γ, 0) + δ) I_m`, rendering the loop `u = ū − K_P(y − ȳ) + v`
/// shifted passive from `v`.
pub fn design_proportional_gain(report: &ConditionReport, delta: f64) -> Result<DMatrix<f64>> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(PhError::Precondition("delta must be a positive finite number".into()));
    }
    let gamma = report
        .gamma
        .ok_or_else(|| PhError::Precondition("report carries no shortage gamma".into()))?;
    if !gamma.is_finite() {
        return Err(PhError::NotPassifiable);
    }
    Ok(DMatrix::identity(report.input_dim, report.input_dim) * (gamma.max(0.0) + delta))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProbeResult {
    /// `max (s₁ − s₂)ᵀ(𝓜(s₁) − 𝓜(s₂))`
    pub worst: f64,
    pub worst_index: usize,
    /// Largest `‖s₁ − s₂‖·‖𝓜(s₁) − 𝓜(s₂)‖`, a rounding scale for `worst`.
    pub scale: f64,
}

/// Evaluates the monotonicity of `𝓜(s) = 𝓕(s)s̄ − R*s` on the given pairs.
/// Nonpositive values are expected when the condition report is satisfied.
pub fn monotonicity_probe<M: PortHamiltonian + ?Sized>(
    model: &M,
    x_bar: &DVector<f64>,
    pairs: &[(DVector<f64>, DVector<f64>)],
) -> Result<ProbeResult> {
    if pairs.is_empty() {
        return Err(PhError::Precondition("at least one pair is required".into()));
    }
    check_len("x_bar", x_bar, model.dim_state())?;
    let s_bar = model.gradient(x_bar);
    let r_star = model.dissipation_bound();
    let map = |s: &DVector<f64>| -> Result<DVector<f64>> { Ok(model.coenergy_structure(s)? * &s_bar - r_star * s) };
    let mut out = ProbeResult {
        worst: f64::NEG_INFINITY,
        worst_index: 0,
        scale: 0.0,
    };
    for (k, (s1, s2)) in pairs.iter().enumerate() {
        let ds = s1 - s2;
        let dm = map(s1)? - map(s2)?;
        let value = ds.dot(&dm);
        out.scale = out.scale.max(ds.norm() * dm.norm());
        if value > out.worst {
            out.worst = value;
            out.worst_index = k;
        }
    }
    Ok(out)
}
