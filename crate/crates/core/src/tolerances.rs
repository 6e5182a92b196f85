//! Numerical tolerances shared by the model checks, solvers and analyzers.
//!
//! The skew and semidefiniteness tolerances are relative: the effective
//! threshold is `rel * (1 + ‖M‖)` for the matrix `M` under test, so badly
//! scaled physical parameters do not produce spurious failures.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative skew-symmetry tolerance for `J(x)`.
    pub skew_rel: f64,
    /// Relative semidefiniteness tolerance (eigenvalue bands).
    pub psd_rel: f64,
    /// Absolute residual bound for membership in the steady-state relation.
    pub equilibrium: f64,
    /// Relative tolerance of the co-energy inversion.
    pub newton: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            skew_rel: 1e-9,
            psd_rel: 1e-9,
            equilibrium: 1e-8,
            newton: 1e-10,
        }
    }
}

impl Tolerances {
    pub fn skew(&self, scale: f64) -> f64 {
        self.skew_rel * (1.0 + scale)
    }

    pub fn psd(&self, scale: f64) -> f64 {
        self.psd_rel * (1.0 + scale)
    }

    /// Defaults overridden by `PHSHIFT_TAU_SKEW`, `PHSHIFT_TAU_PSD`,
    /// `PHSHIFT_TAU_EQ` and `PHSHIFT_TAU_NEWTON` when set to positive numbers.
    pub fn from_env() -> Self {
        let mut tol = Self::default();
        let read = |key: &str, slot: &mut f64| {
            if let Some(v) = std::env::var(key)
                .ok()
                .and_then(|s| s.trim().parse::<f64>().ok())
                .filter(|v| v.is_finite() && *v > 0.0)
            {
                *slot = v;
            }
        };
        read("PHSHIFT_TAU_SKEW", &mut tol.skew_rel);
        read("PHSHIFT_TAU_PSD", &mut tol.psd_rel);
        read("PHSHIFT_TAU_EQ", &mut tol.equilibrium);
        read("PHSHIFT_TAU_NEWTON", &mut tol.newton);
        tol
    }

    pub fn is_valid(&self) -> bool {
        [self.skew_rel, self.psd_rel, self.equilibrium, self.newton]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0)
    }
}
