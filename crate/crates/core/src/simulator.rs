//! Fixed-step RK4 trajectories and discrete checks of the shifted
//! dissipation inequality
//!
//! ```text
//!     𝓗(x_{k+1}) − 𝓗(x_k) ≤ ∫ (w − w̄)ᵀ(y − ȳ) + γ ‖y − ȳ‖² dt + τ
//! ```
//!
//! with the integral taken by the trapezoid rule on the simulation grid.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{PhError, Result};
use crate::linalg;
use crate::model::{check_len, check_shape, EquilibriumPoint, PortHamiltonian};

pub const DEFAULT_STEP: f64 = 1e-3;
/// `τ_diss = DISSIPATION_REL_TOL · (1 + max 𝓗)`.
pub const DISSIPATION_REL_TOL: f64 = 1e-6;

/// Time-dependent input `u(t)`.
#[derive(Clone)]
pub enum InputSignal {
    Constant(DVector<f64>),
    /// `offset + amplitude · sin(frequency · t + phase)`
    Sinusoid {
        offset: DVector<f64>,
        amplitude: DVector<f64>,
        frequency: f64,
        phase: f64,
    },
    /// Piecewise-linear interpolation, held constant outside the table.
    Table { times: Vec<f64>, values: Vec<DVector<f64>> },
    Custom {
        dim: usize,
        f: Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>,
    },
}

impl std::fmt::Debug for InputSignal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InputSignal::Constant(u) => f.debug_tuple("Constant").field(u).finish(),
            InputSignal::Sinusoid { frequency, phase, .. } => f
                .debug_struct("Sinusoid")
                .field("frequency", frequency)
                .field("phase", phase)
                .finish_non_exhaustive(),
            InputSignal::Table { times, .. } => f.debug_struct("Table").field("len", &times.len()).finish(),
            InputSignal::Custom { dim, .. } => f.debug_struct("Custom").field("dim", dim).finish(),
        }
    }
}

impl InputSignal {
    pub fn dim(&self) -> usize {
        match self {
            InputSignal::Constant(u) => u.len(),
            InputSignal::Sinusoid { offset, .. } => offset.len(),
            InputSignal::Table { values, .. } => values.first().map_or(0, DVector::len),
            InputSignal::Custom { dim, .. } => *dim,
        }
    }

    pub fn at(&self, t: f64) -> DVector<f64> {
        match self {
            InputSignal::Constant(u) => u.clone(),
            InputSignal::Sinusoid {
                offset,
                amplitude,
                frequency,
                phase,
            } => offset + amplitude * (frequency * t + phase).sin(),
            InputSignal::Table { times, values } => {
                let k = times.partition_point(|&tk| tk <= t);
                if k == 0 {
                    values[0].clone()
                } else if k == times.len() {
                    values[k - 1].clone()
                } else {
                    let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
                    &values[k - 1] * (1.0 - w) + &values[k] * w
                }
            }
            InputSignal::Custom { f, .. } => f(t),
        }
    }

    pub fn table(times: Vec<f64>, values: Vec<DVector<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(PhError::Precondition("input table needs matching, nonempty time and value columns".into()));
        }
        if times.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
            return Err(PhError::Precondition("input table times must be strictly increasing".into()));
        }
        let m = values[0].len();
        if values.iter().any(|v| v.len() != m) {
            return Err(PhError::Precondition("input table rows have different widths".into()));
        }
        Ok(InputSignal::Table { times, values })
    }

    /// Parses `t,u1,..,um` rows; a non-numeric first line is treated as a header.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parsed: std::result::Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
            match parsed {
                Ok(row) if row.len() >= 2 => {
                    times.push(row[0]);
                    values.push(DVector::from_row_slice(&row[1..]));
                }
                Err(_) if lineno == 0 => continue,
                _ => {
                    return Err(PhError::Precondition(format!(
                        "input file line {}: expected `t,u1,..,um`",
                        lineno + 1
                    )))
                }
            }
        }
        Self::table(times, values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSettings {
    pub step: f64,
    pub t_end: f64,
}

impl StepSettings {
    pub fn new(step: f64, t_end: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) || !(t_end > 0.0 && t_end.is_finite()) {
            return Err(PhError::Precondition("step size and horizon must be positive".into()));
        }
        Ok(Self { step, t_end })
    }

    /// Uniform grid from 0, with a shortened last step if `t_end / step` is
    /// not an integer.
    pub fn grid(&self) -> Vec<f64> {
        let ratio = self.t_end / self.step;
        let n = if (ratio - ratio.round()).abs() < 1e-9 * ratio.max(1.0) {
            ratio.round() as usize
        } else {
            ratio.ceil() as usize
        };
        let mut t: Vec<f64> = (0..n).map(|k| k as f64 * self.step).collect();
        t.push(self.t_end);
        t
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// Input applied to the plant.
    pub inputs: Vec<DVector<f64>>,
    pub outputs: Vec<DVector<f64>>,
    /// Shifted Hamiltonian with respect to [`Trajectory::reference`].
    pub shifted_h: Vec<f64>,
    pub reference: DVector<f64>,
    /// External input `v` of a feedback loop; `None` for open-loop runs.
    pub external_inputs: Option<Vec<DVector<f64>>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("trajectories contain the initial state")
    }

    /// CSV with header `t,x1..xn,u1..um,y1..ym,Hshift`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.states.first().map_or(0, DVector::len);
        let m = self.inputs.first().map_or(0, DVector::len);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=m).map(|i| format!("u{i}")));
        header.extend((1..=m).map(|i| format!("y{i}")));
        header.push("Hshift".into());
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.len() {
            let row: Vec<String> = std::iter::once(self.times[k])
                .chain(self.states[k].iter().copied())
                .chain(self.inputs[k].iter().copied())
                .chain(self.outputs[k].iter().copied())
                .chain(std::iter::once(self.shifted_h[k]))
                .map(|v| format!("{v:.16e}"))
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn integrate_law<M, L>(
    model: &M,
    law: L,
    x0: &DVector<f64>,
    reference: &DVector<f64>,
    settings: &StepSettings,
) -> Result<(Trajectory, Vec<f64>)>
where
    M: PortHamiltonian + ?Sized,
    L: Fn(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let n = model.dim_state();
    check_len("x0", x0, n)?;
    check_len("reference", reference, n)?;
    let times = settings.grid();
    let mut states = Vec::with_capacity(times.len());
    let mut inputs = Vec::with_capacity(times.len());
    let mut outputs = Vec::with_capacity(times.len());
    let mut shifted_h = Vec::with_capacity(times.len());

    let f = |t: f64, x: &DVector<f64>| -> Result<DVector<f64>> { model.dynamics(x, &law(t, x)?) };
    let mut x = x0.clone();
    for (k, &t) in times.iter().enumerate() {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(PhError::Divergence { time: t });
        }
        inputs.push(law(t, &x)?);
        outputs.push(model.output(&x)?);
        shifted_h.push(model.shifted_hamiltonian(&x, reference)?);
        let next = times.get(k + 1).copied();
        states.push(x.clone());
        if let Some(t_next) = next {
            let h = t_next - t;
            let k1 = f(t, &x)?;
            let k2 = f(t + 0.5 * h, &(&x + &k1 * (0.5 * h)))?;
            let k3 = f(t + 0.5 * h, &(&x + &k2 * (0.5 * h)))?;
            let k4 = f(t + h, &(&x + &k3 * h))?;
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
    }
    Ok((
        Trajectory {
            times: times.clone(),
            states,
            inputs,
            outputs,
            shifted_h,
            reference: reference.clone(),
            external_inputs: None,
        },
        times,
    ))
}

/// Open-loop RK4 integration of `ẋ = (J − R)∇H + G u(t)`.
pub fn integrate<M: PortHamiltonian + ?Sized>(
    model: &M,
    input: &InputSignal,
    x0: &DVector<f64>,
    reference: &DVector<f64>,
    settings: &StepSettings,
) -> Result<Trajectory> {
    if input.dim() != model.dim_input() {
        return Err(PhError::dim("input", model.dim_input(), input.dim()));
    }
    integrate_law(model, |t, _| Ok(input.at(t)), x0, reference, settings).map(|(traj, _)| traj)
}

/// Integrates independent initial states in parallel, preserving order.
pub fn integrate_batch<M: PortHamiltonian + ?Sized>(
    model: &M,
    input: &InputSignal,
    initial_states: &[DVector<f64>],
    reference: &DVector<f64>,
    settings: &StepSettings,
) -> Vec<Result<Trajectory>> {
    initial_states
        .par_iter()
        .map(|x0| integrate(model, input, x0, reference, settings))
        .collect()
}

/// Closed loop under `u = ū − K_P (y − ȳ) + v(t)`.
pub fn closed_loop<M: PortHamiltonian + ?Sized>(
    model: &M,
    eq: &EquilibriumPoint,
    k_p: &DMatrix<f64>,
    v: &InputSignal,
    x0: &DVector<f64>,
    settings: &StepSettings,
) -> Result<Trajectory> {
    let m = model.dim_input();
    check_shape("K_P", k_p, m, m)?;
    if v.dim() != m {
        return Err(PhError::dim("v", m, v.dim()));
    }
    let scale = k_p.norm();
    if linalg::asymmetry(k_p) > 1e-12 * (1.0 + scale) || linalg::min_eigenvalue(k_p) < -1e-12 * (1.0 + scale) {
        return Err(PhError::Precondition("K_P must be symmetric positive semidefinite".into()));
    }
    let law = |t: f64, x: &DVector<f64>| -> Result<DVector<f64>> {
        let y = model.output(x)?;
        Ok(&eq.u_bar - k_p * (y - &eq.y_bar) + v.at(t))
    };
    let (mut traj, times) = integrate_law(model, law, x0, &eq.x_bar, settings)?;
    traj.external_inputs = Some(times.iter().map(|&t| v.at(t)).collect());
    Ok(traj)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DissipationReport {
    pub passed: bool,
    /// Largest `Δ𝓗 − ∫ supply` over all steps.
    pub worst_excess: f64,
    pub worst_time: f64,
    pub tau: f64,
    pub steps: usize,
}

/// Steps through the trajectory checking the discrete dissipation inequality.
///
/// The supply uses the external input `v` when the trajectory carries one
/// and `u − ū` otherwise; `gamma = None` means γ = 0.
pub fn verify_dissipation<M: PortHamiltonian + ?Sized>(
    model: &M,
    traj: &Trajectory,
    eq: &EquilibriumPoint,
    gamma: Option<f64>,
) -> Result<DissipationReport> {
    let gamma = gamma.unwrap_or(0.0);
    if !gamma.is_finite() {
        return Err(PhError::Precondition("gamma must be finite".into()));
    }
    let storage: Vec<f64> = traj
        .states
        .iter()
        .map(|x| model.shifted_hamiltonian(x, &eq.x_bar))
        .collect::<Result<_>>()?;
    let supply: Vec<f64> = (0..traj.len())
        .map(|k| {
            let dy = &traj.outputs[k] - &eq.y_bar;
            let w = match &traj.external_inputs {
                Some(v) => v[k].clone(),
                None => &traj.inputs[k] - &eq.u_bar,
            };
            w.dot(&dy) + gamma * dy.norm_squared()
        })
        .collect();
    let max_storage = storage.iter().copied().fold(0.0_f64, f64::max);
    let tau = DISSIPATION_REL_TOL * (1.0 + max_storage);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_time = traj.times.first().copied().unwrap_or(0.0);
    for k in 0..traj.len().saturating_sub(1) {
        let h = traj.times[k + 1] - traj.times[k];
        let excess = (storage[k + 1] - storage[k]) - 0.5 * h * (supply[k] + supply[k + 1]);
        if excess > worst_excess {
            worst_excess = excess;
            worst_time = traj.times[k + 1];
        }
    }
    Ok(DissipationReport {
        passed: worst_excess <= tau,
        worst_excess,
        worst_time,
        tau,
        steps: traj.len().saturating_sub(1),
    })
}

/// Convergence horizon `20 / ε` for strict verdicts.
pub fn convergence_horizon(epsilon: f64) -> Option<f64> {
    (epsilon > 0.0).then(|| 20.0 / epsilon)
}
