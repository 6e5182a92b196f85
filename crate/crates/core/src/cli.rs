//! Command-line front end: argument parsing, run configuration and the
//! mapping from analysis outcomes to exit codes.
//!
//! Analysis commands print a JSON report containing the tool version, the
//! fully resolved [`RunConfig`] and the result; `simulate` prints CSV.
//! Exit codes: 0 on success or a satisfied condition, 2 when a condition is
//! violated or infeasible, 1 on errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::analyzer::{self, MarginMode, SampleBox, SamplingPlan, Verdict};
use crate::case_studies::{self, RigidBodyParams, SyncGenParams};
use crate::equilibrium;
use crate::io::ModelFile;
use crate::model::validate;
use crate::simulator::{self, InputSignal, StepSettings};
use crate::{EquilibriumPoint, QuadraticAffinePH, Tolerances};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "phshift", version, about = "Shifted-passivity analysis of port-Hamiltonian systems")]
pub struct Cli {
    #[command(flatten)]
    pub tolerances: ToleranceArgs,
    /// Write the report or CSV here instead of standard output.
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

/// Tolerance overrides; unset values fall back to `PHSHIFT_TAU_*` and then
/// to the built-in defaults.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ToleranceArgs {
    /// Relative tolerance on skew-symmetry of J and symmetry of R
    #[arg(long, global = true)]
    pub tau_skew: Option<f64>,
    /// Relative tolerance of the semidefiniteness verdicts
    #[arg(long, global = true)]
    pub tau_psd: Option<f64>,
    /// Residual tolerance for accepting an equilibrium
    #[arg(long, global = true)]
    pub tau_eq: Option<f64>,
    /// Relative step tolerance of Newton iterations
    #[arg(long, global = true)]
    pub tau_newton: Option<f64>,
}

impl ToleranceArgs {
    pub fn resolve(&self) -> anyhow::Result<Tolerances> {
        let mut tol = Tolerances::from_env();
        for (flag, slot) in [
            (self.tau_skew, &mut tol.skew_rel),
            (self.tau_psd, &mut tol.psd_rel),
            (self.tau_eq, &mut tol.equilibrium),
            (self.tau_newton, &mut tol.newton),
        ] {
            if let Some(v) = flag {
                *slot = v;
            }
        }
        if !tol.is_valid() {
            bail!("tolerances must be positive and finite");
        }
        Ok(tol)
    }
}

/// How the operating point is obtained: certified from `--x-bar`, or solved
/// from `--u-bar` (falling back to the model file's `u_bar`, then zero).
#[derive(Debug, Clone, Args, Serialize)]
pub struct OperatingPointArgs {
    /// Constant input, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub u_bar: Option<Vec<f64>>,
    /// Known equilibrium state; certified instead of solved for.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x_bar: Option<Vec<f64>>,
    /// Initial guess for the equilibrium search.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub guess: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SamplingArgs {
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Half width of the sampling box around the operating point.
    #[arg(long, default_value_t = 1.0)]
    pub half_width: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseStudy {
    SyncGen,
    RigidBody,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Structural checks of the model at sampled states.
    Validate {
        model: PathBuf,
        #[command(flatten)]
        sampling: SamplingArgs,
    },
    /// Solve for (or certify) a forced equilibrium.
    Equilibrium {
        model: PathBuf,
        #[command(flatten)]
        point: OperatingPointArgs,
    },
    /// Negative-semidefiniteness test of B + Bᵀ − 2R.
    Check {
        model: PathBuf,
        #[command(flatten)]
        point: OperatingPointArgs,
        /// Use the sampled general-model path instead of the closed form.
        #[arg(long)]
        general: bool,
        #[command(flatten)]
        sampling: SamplingArgs,
    },
    /// Passivity shortage γ and the proportional gain that compensates it.
    Gamma {
        model: PathBuf,
        #[command(flatten)]
        point: OperatingPointArgs,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
    },
    /// Exponential stability margin ε.
    Margin {
        model: PathBuf,
        #[command(flatten)]
        point: OperatingPointArgs,
        /// Global (sampled) instead of local analysis.
        #[arg(long)]
        global: bool,
        #[command(flatten)]
        sampling: SamplingArgs,
    },
    /// RK4 trajectory as CSV.
    Simulate {
        model: PathBuf,
        #[command(flatten)]
        point: OperatingPointArgs,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        x0: Vec<f64>,
        #[arg(long, default_value_t = 10.0)]
        t_end: f64,
        #[arg(long, default_value_t = simulator::DEFAULT_STEP)]
        h: f64,
        /// `const`, `sin:AMPLITUDE:FREQUENCY` or `file:PATH` (CSV `t,u1,..`).
        /// Around ū in open loop; the external input v in closed loop.
        #[arg(long, default_value = "const")]
        u: String,
        /// Close the loop with `K_P = k I`, or `auto` for (max(γ,0)+δ) I.
        #[arg(long)]
        kp: Option<String>,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
    },
    /// Built-in case studies; writes the model file with --write-model.
    Case {
        #[arg(value_enum)]
        which: CaseStudy,
        /// JSON parameter file; defaults are used otherwise.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        write_model: Option<PathBuf>,
        /// Field voltage of the generator.
        #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
        v_f: f64,
        /// Mechanical torque of the generator.
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        torque: f64,
    },
}

impl Command {
    fn model_path(&self) -> Option<&Path> {
        match self {
            Command::Validate { model, .. }
            | Command::Equilibrium { model, .. }
            | Command::Check { model, .. }
            | Command::Gamma { model, .. }
            | Command::Margin { model, .. }
            | Command::Simulate { model, .. } => Some(model),
            Command::Case { .. } => None,
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub command: Command,
    pub tolerances: Tolerances,
    pub output_path: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> anyhow::Result<Self> {
        let tolerances = cli.tolerances.resolve()?;
        if let Some(path) = cli.command.model_path() {
            if !path.is_file() {
                bail!("model file {} is not readable", path.display());
            }
        }
        Ok(Self {
            command: cli.command,
            tolerances,
            output_path: cli.output,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    /// A valid answer that the condition fails or the problem is infeasible.
    Violated,
}

impl Status {
    fn from_verdict(v: Verdict) -> Self {
        if v.is_satisfied() {
            Status::Success
        } else {
            Status::Violated
        }
    }

    pub fn exit_code(self) -> ExitCode {
        match self {
            Status::Success => ExitCode::SUCCESS,
            Status::Violated => ExitCode::from(2),
        }
    }
}

pub struct Outcome {
    pub status: Status,
    pub body: String,
}

/// Parses the arguments, runs the command and writes its output.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = RunConfig::from_cli(cli).and_then(|config| {
        let outcome = run(&config)?;
        match &config.output_path {
            Some(path) => std::fs::write(path, &outcome.body).with_context(|| format!("writing {}", path.display()))?,
            None => print!("{}", outcome.body),
        }
        Ok(outcome.status)
    });
    match result {
        Ok(status) => status.exit_code(),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

pub fn run(config: &RunConfig) -> anyhow::Result<Outcome> {
    let tol = &config.tolerances;
    let (status, result) = match &config.command {
        Command::Validate { model, sampling } => {
            let (sys, _) = load(model)?;
            let sample_box = SampleBox::cube(&DVector::zeros(sys.n()), sampling.half_width)?;
            let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
            let mut states = vec![DVector::zeros(sys.n())];
            states.extend((0..sampling.samples).map(|_| sample_box.sample(&mut rng)));
            let report = validate(&sys, &states, tol)?;
            let status = if report.passed { Status::Success } else { Status::Violated };
            (status, json!(report))
        }
        Command::Equilibrium { model, point } => {
            let (sys, file) = load(model)?;
            let eq = operating_point(&sys, &file, point, tol)?;
            (Status::Success, json!(eq))
        }
        Command::Check {
            model,
            point,
            general,
            sampling,
        } => {
            let (sys, file) = load(model)?;
            let eq = operating_point(&sys, &file, point, tol)?;
            let report = if *general {
                let plan = sampling_plan(&eq.s_bar, sampling)?;
                analyzer::check_general(&sys.to_general(), &eq.x_bar, &plan, tol)?
            } else {
                analyzer::check_affine(&sys, &eq.x_bar, tol)?
            };
            (Status::from_verdict(report.verdict), json!({ "equilibrium": eq, "report": report }))
        }
        Command::Gamma { model, point, delta } => {
            let (sys, file) = load(model)?;
            let eq = operating_point(&sys, &file, point, tol)?;
            let report = analyzer::shortage_gamma(&sys, &eq.x_bar, tol)?;
            let gain = analyzer::design_proportional_gain(&report, *delta).ok();
            let status = if gain.is_some() { Status::Success } else { Status::Violated };
            let gain = gain.map(|k| crate::linalg::to_rows(&k));
            (status, json!({ "equilibrium": eq, "report": report, "k_p": gain }))
        }
        Command::Margin {
            model,
            point,
            global,
            sampling,
        } => {
            let (sys, file) = load(model)?;
            let eq = operating_point(&sys, &file, point, tol)?;
            let mode = if *global {
                MarginMode::Global(sampling_plan(&eq.s_bar, sampling)?)
            } else {
                MarginMode::Local
            };
            let report = analyzer::stability_margin(&sys, &eq.x_bar, &mode, tol)?;
            let horizon = simulator::convergence_horizon(report.epsilon);
            (
                Status::from_verdict(report.verdict),
                json!({ "equilibrium": eq, "report": report, "convergence_horizon": horizon }),
            )
        }
        Command::Simulate {
            model,
            point,
            x0,
            t_end,
            h,
            u,
            kp,
            delta,
        } => {
            let (sys, file) = load(model)?;
            let eq = operating_point(&sys, &file, point, tol)?;
            let x0 = DVector::from_column_slice(x0);
            let settings = StepSettings::new(*h, *t_end)?;
            let traj = match kp {
                None => {
                    let input = parse_signal(u, &eq.u_bar)?;
                    simulator::integrate(&sys, &input, &x0, &eq.x_bar, &settings)?
                }
                Some(kp) => {
                    let k = proportional_gain(&sys, &eq, kp, *delta, tol)?;
                    let v = parse_signal(u, &DVector::zeros(sys.m()))?;
                    simulator::closed_loop(&sys, &eq, &k, &v, &x0, &settings)?
                }
            };
            let mut buf = Vec::new();
            traj.write_csv(&mut buf)?;
            return Ok(Outcome {
                status: Status::Success,
                body: String::from_utf8(buf).expect("CSV output is ASCII"),
            });
        }
        Command::Case {
            which,
            params,
            write_model,
            v_f,
            torque,
        } => {
            let (sys, eq, extra) = match which {
                CaseStudy::RigidBody => {
                    let p: RigidBodyParams = match params {
                        Some(path) => read_params(path)?,
                        None => RigidBodyParams {
                            inertia: [1.0, 2.0, 3.0],
                            gains: [1.0, 1.0, 1.0],
                            disturbance: [1.0, 0.0, 0.0],
                        },
                    };
                    let sys = case_studies::build_rigid_body(&p)?;
                    let guess = DVector::from_fn(3, |i, _| {
                        if p.gains[i] > 0.0 {
                            p.inertia[i] * p.disturbance[i] / p.gains[i]
                        } else {
                            0.0
                        }
                    });
                    let eq = equilibrium::find_equilibrium(&sys, &p.input(), &guess, tol)?;
                    let threshold = case_studies::single_axis_threshold(&p).ok();
                    (sys, eq, json!({ "params": p, "single_axis_threshold": threshold }))
                }
                CaseStudy::SyncGen => {
                    let p: SyncGenParams = match params {
                        Some(path) => read_params(path)?,
                        None => case_studies::sync_gen_default_params(),
                    };
                    let sys = case_studies::build_sync_gen(&p)?;
                    let guess = case_studies::sync_gen_initial_guess(&p, *v_f, *torque);
                    let u_bar = DVector::from_row_slice(&[*v_f, *torque]);
                    let eq = equilibrium::find_equilibrium(&sys, &u_bar, &guess, tol)?;
                    (sys, eq, json!({ "params": p }))
                }
            };
            if let Some(path) = write_model {
                let text = ModelFile::from_system(&sys, Some(&eq.u_bar)).to_json();
                std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
            }
            let report = analyzer::shortage_gamma(&sys, &eq.x_bar, tol)?;
            (
                Status::from_verdict(report.verdict),
                json!({ "case": extra, "equilibrium": eq, "report": report }),
            )
        }
    };
    let body = json!({
        "tool": "phshift",
        "version": VERSION,
        "config": config,
        "result": result,
    });
    Ok(Outcome {
        status,
        body: serde_json::to_string_pretty(&body)? + "\n",
    })
}

fn load(path: &Path) -> anyhow::Result<(QuadraticAffinePH, ModelFile)> {
    let file = ModelFile::read(path)?;
    let sys = file
        .to_system()
        .with_context(|| format!("building model from {}", path.display()))?;
    Ok((sys, file))
}

fn read_params<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing parameters in {}", path.display()))
}

fn vector_arg(name: &str, values: &[f64], len: usize) -> anyhow::Result<DVector<f64>> {
    if values.len() != len {
        bail!("--{name} needs {len} values, got {}", values.len());
    }
    Ok(DVector::from_column_slice(values))
}

fn operating_point(
    sys: &QuadraticAffinePH,
    file: &ModelFile,
    args: &OperatingPointArgs,
    tol: &Tolerances,
) -> anyhow::Result<EquilibriumPoint> {
    let u_bar = match &args.u_bar {
        Some(u) => vector_arg("u-bar", u, sys.m())?,
        None => file.u_bar().unwrap_or_else(|| DVector::zeros(sys.m())),
    };
    if let Some(x) = &args.x_bar {
        let x_bar = vector_arg("x-bar", x, sys.n())?;
        return Ok(equilibrium::certify(sys, x_bar, u_bar, tol.equilibrium)?);
    }
    let guess = match &args.guess {
        Some(g) => vector_arg("guess", g, sys.n())?,
        None => DVector::zeros(sys.n()),
    };
    Ok(equilibrium::find_equilibrium(sys, &u_bar, &guess, tol)?)
}

fn sampling_plan(center: &DVector<f64>, args: &SamplingArgs) -> anyhow::Result<SamplingPlan> {
    Ok(SamplingPlan {
        sample_box: SampleBox::cube(center, args.half_width)?,
        n_samples: args.samples,
        seed: args.seed,
    })
}

/// `const`, `sin:AMPLITUDE:FREQUENCY` or `file:PATH`, offset by `base`.
pub fn parse_signal(spec: &str, base: &DVector<f64>) -> anyhow::Result<InputSignal> {
    let m = base.len();
    if spec == "const" {
        return Ok(InputSignal::Constant(base.clone()));
    }
    if let Some(rest) = spec.strip_prefix("sin:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let [amp, freq] = parts.as_slice() else {
            bail!("expected sin:AMPLITUDE:FREQUENCY, got `{spec}`");
        };
        let amp: f64 = amp.parse().with_context(|| format!("amplitude in `{spec}`"))?;
        let freq: f64 = freq.parse().with_context(|| format!("frequency in `{spec}`"))?;
        return Ok(InputSignal::Sinusoid {
            offset: base.clone(),
            amplitude: DVector::from_element(m, amp),
            frequency: freq,
            phase: 0.0,
        });
    }
    if let Some(path) = spec.strip_prefix("file:") {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading input file {path}"))?;
        let InputSignal::Table { times, values } = InputSignal::from_csv(&text)? else {
            unreachable!("from_csv builds a table");
        };
        if values[0].len() != m {
            bail!("input file {path} has {} columns, the model has {m} inputs", values[0].len());
        }
        let values = values.into_iter().map(|v| v + base).collect();
        return Ok(InputSignal::table(times, values)?);
    }
    bail!("unknown input `{spec}`; expected const, sin:A:W or file:PATH")
}

fn proportional_gain(
    sys: &QuadraticAffinePH,
    eq: &EquilibriumPoint,
    spec: &str,
    delta: f64,
    tol: &Tolerances,
) -> anyhow::Result<DMatrix<f64>> {
    if spec == "auto" {
        let report = analyzer::shortage_gamma(sys, &eq.x_bar, tol)?;
        return Ok(analyzer::design_proportional_gain(&report, delta)?);
    }
    let k: f64 = spec
        .parse()
        .with_context(|| format!("--kp expects a number or `auto`, got `{spec}`"))?;
    if !(k >= 0.0 && k.is_finite()) {
        bail!("--kp must be nonnegative");
    }
    Ok(DMatrix::identity(sys.m(), sys.m()) * k)
}
