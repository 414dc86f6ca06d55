use std::path::Path;

use blowuplab_core::config::Resolved;
use blowuplab_core::lifespan::{self, FitReport};
use blowuplab_core::report::{json_bytes, trajectory_csv, write_atomic};
use blowuplab_core::special;
use blowuplab_core::verifier::{self, check_lifespan_inequality};
use blowuplab_core::wave::run;
use blowuplab_core::{Error, ModelParams, Outcome, RunConfig, Status, TestFunctionParams, TraceRecorder};
use clap::Subcommand;
use serde::Serialize;

pub const EXIT_FAIL: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_INSTABILITY: u8 = 3;
pub const EXIT_CENSORED: u8 = 4;
pub const EXIT_IO: u8 = 5;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Domain(_) | Error::UnsupportedRegime(_) | Error::Config(_) | Error::Precondition(_) => EXIT_CONFIG,
            Error::Instability { .. } => EXIT_INSTABILITY,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => EXIT_IO,
        };
        Failure { code, message: e.to_string() }
    }
}

type CmdResult = Result<u8, Failure>;

/// Caps the rayon pool at `BLOWUPLAB_THREADS` when set.
pub fn init_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("BLOWUPLAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = value.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| Failure {
        code: EXIT_CONFIG,
        message: format!("BLOWUPLAB_THREADS = {value:?} is not a positive integer"),
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure { code: EXIT_CONFIG, message: e.to_string() })
}

fn resolve(config: &RunConfig, for_sweep: bool) -> Result<Resolved, Failure> {
    let r = config.resolve(for_sweep)?;
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    Ok(r)
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), Failure> {
    let path = dir.join(name);
    write_atomic(&path, bytes).map_err(|e| Failure {
        code: EXIT_IO,
        message: format!("writing {}: {e}", path.display()),
    })
}

pub fn verify(config: &RunConfig) -> CmdResult {
    let r = resolve(config, false)?;
    let v = verifier::verify(&r.model, &r.params, &r.data, &r.solver, r.refinements)?;
    write(&r.output_dir, "ledger.json", &v.ledger.to_json()?)?;
    if let Some(finest) = v.levels.last() {
        write(&r.output_dir, "trace.csv", &finest.trace.to_csv()?)?;
    }
    print!("{}", v.ledger.table());
    println!(
        "{} checks: {} pass, {} fail, {} vacuous",
        v.ledger.checks.len(),
        v.ledger.count(Status::Pass),
        v.ledger.count(Status::Fail),
        v.ledger.count(Status::Vacuous)
    );
    Ok(if v.ledger.passed() { 0 } else { EXIT_FAIL })
}

pub fn simulate(config: &RunConfig) -> CmdResult {
    let r = resolve(config, false)?;
    let mut recorder = TraceRecorder::for_data(&r.data, &r.model, &r.params)?;
    let report = run(&r.data, &r.model, &r.solver, &mut recorder)?;
    let trace = recorder.finish()?;
    write(&r.output_dir, "trajectory.csv", &trajectory_csv(&report.trajectory)?)?;
    write(&r.output_dir, "trace.csv", &trace.to_csv()?)?;
    match report.outcome {
        Outcome::BlewUp { t_detect } => println!("outcome: blew_up\nT_detect: {t_detect}"),
        Outcome::Completed { t_end } => println!("outcome: completed\nt_end: {t_end}"),
    }
    println!("steps: {}, dx: {}, dt: {}", report.steps, report.dx, report.dt);
    Ok(0)
}

#[derive(Serialize)]
struct SweepReport {
    #[serde(flatten)]
    fit: FitReport,
    lifespan_inequality: Option<Status>,
}

pub fn sweep(config: &RunConfig) -> CmdResult {
    let r = resolve(config, true)?;
    let base = r.solver.clone();
    let result = lifespan::sweep(&r.model, &r.params, &base, &r.data, &r.epsilons)?;
    let check = if result.entries.len() >= 3 {
        Some(check_lifespan_inequality(&result, &r.params, &r.model)?)
    } else {
        None
    };
    let report = SweepReport {
        fit: result.fit_report(&r.params, &r.model),
        lifespan_inequality: check.as_ref().map(|c| c.status),
    };
    write(&r.output_dir, "sweep.csv", &result.to_csv()?)?;
    write(&r.output_dir, "fit.json", &json_bytes(&report)?)?;
    for e in &result.entries {
        let tag = if e.censored { " (censored)" } else { "" };
        println!("eps = {:<8} T_est = {:.6} ± {:.2e}{tag}", e.epsilon, e.t_est, e.uncertainty);
    }
    if result.uncensored().next().is_none() {
        return Err(Failure {
            code: EXIT_CENSORED,
            message: format!("every run reached t_max = {} without blowing up", result.t_max),
        });
    }
    match result.fit {
        Some(f) => println!(
            "slope_fit = {:.4} (residual {:.2e}), slope_theory = {:.4}",
            f.slope, f.residual, result.slope_theory
        ),
        None => eprintln!("warning: fit unavailable (fewer than 3 uncensored data sizes)"),
    }
    match check {
        Some(c) => {
            println!("lifespan bound: {} ({})", c.status.as_str(), c.detail);
            Ok(if c.status == Status::Fail { EXIT_FAIL } else { 0 })
        }
        None => {
            eprintln!("warning: the lifespan bound check needs at least 3 data sizes");
            Ok(0)
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum SpecialArgs {
    /// Radial test function phi^eta(r) in dimension n.
    Phi {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        eta: f64,
        #[arg(long)]
        r: f64,
    },
    /// Modified Bessel function K_alpha(t).
    Besselk {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        t: f64,
    },
    /// Kernel K(t) for the configured model (eta and d may be overridden).
    Kernel {
        #[arg(long)]
        t: f64,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        d: Option<f64>,
    },
    /// Temporal factor xi^eta(t) (requires delta >= 0).
    Xi {
        #[arg(long)]
        t: f64,
        #[arg(long)]
        eta: f64,
    },
    /// lambda(eta, t) in closed form and from the definitions.
    Lambda {
        #[arg(long)]
        t: f64,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        d: Option<f64>,
    },
    /// Thresholds for eta and derived exponents of the configured model.
    Thresholds {
        #[arg(long)]
        d: Option<f64>,
    },
}

fn model_of(config: &RunConfig) -> Result<ModelParams, Failure> {
    let m = &config.model;
    Ok(ModelParams::new(m.n, m.mu, m.nu_sq, m.p, m.radius)?)
}

fn params_of(config: &RunConfig, model: &ModelParams, d: Option<f64>, eta: Option<f64>) -> Result<TestFunctionParams, Failure> {
    let d = d.unwrap_or(config.test_function.d);
    Ok(TestFunctionParams::new(model, d, eta.or(config.test_function.eta))?)
}

pub fn special(config: &RunConfig, which: SpecialArgs) -> CmdResult {
    match which {
        SpecialArgs::Phi { n, eta, r } => println!("{}", special::phi_eta(r, eta, n)?),
        SpecialArgs::Besselk { alpha, t } => println!("{}", special::bessel_k(alpha, t)?),
        SpecialArgs::Kernel { t, eta, d } => {
            let model = model_of(config)?;
            let params = params_of(config, &model, d, eta)?;
            if !(t >= 0.0) {
                return Err(Error::Domain(format!("t = {t} must be non-negative")).into());
            }
            println!("{}", special::kernel_k(t, &params, &model));
        }
        SpecialArgs::Xi { t, eta } => println!("{}", special::xi_eta(t, eta, &model_of(config)?)?),
        SpecialArgs::Lambda { t, eta, d } => {
            let model = model_of(config)?;
            let params = params_of(config, &model, d, eta)?;
            let (closed, _) = special::lambda_sigma(t, &params, &model, 0.0, 0.0);
            println!("closed_form: {closed}");
            println!("from_definitions: {}", special::lambda_from_definitions(t, &params, &model));
        }
        SpecialArgs::Thresholds { d } => {
            let model = model_of(config)?;
            let params = params_of(config, &model, d, None)?;
            let th = params.thresholds;
            println!("d: {}", params.d);
            println!("d_formula: {}", model.default_d());
            println!("sign_ratio: {}", th.sign_ratio);
            println!("eta_tilde: {}", th.eta_tilde);
            println!("eta_0: {}", th.eta_0);
            println!("eta_1: {}", th.eta_1);
            println!("eta_1_stated: {}", th.eta_1_stated);
            println!("eta_1_constructed: {}", th.eta_1_constructed);
            println!("theta: {}", params.theta);
            println!("delta: {}", model.delta());
            match model.critical_exponent() {
                Ok(p) => println!("p_critical: {p}"),
                Err(_) => println!("p_critical: inf"),
            }
            match special::lifespan_exponent(&model, params.d) {
                Ok(e) => println!("lifespan_exponent: {e}"),
                Err(_) => println!("lifespan_exponent: undefined"),
            }
        }
    }
    Ok(0)
}
