//! Acceptance suite: one pass/fail line per criterion.
//!
//! Runs without the libtest harness so that the summary is always printed;
//! the process exits nonzero if any criterion fails.

use std::cell::{Cell, RefCell};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use blowuplab_core::lifespan::{sweep, SweepResult};
use blowuplab_core::report::trajectory_csv;
use blowuplab_core::special::glassey_exponent;
use blowuplab_core::verifier::{
    check_adjoint_identity, check_bessel_oracle, check_kernel_sign, check_kernel_tightness,
    check_lifespan_inequality, check_phi_eigenrelation, check_xi_ode, verify, Verification,
};
use blowuplab_core::wave::{make_initial_data, run, FieldView};
use blowuplab_core::{InitialData, ModelParams, SolverConfig, Status, TestFunctionParams, Trend};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

struct Outcome {
    id: u32,
    pass: bool,
    summary: String,
    elapsed: Duration,
}

fn runner(cases: u32) -> TestRunner {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Admissible `(model, d)`: `1 < p < p_Gla(n + mu)` and `mu < d < (p+1)/(p-1) - n`.
fn admissible() -> impl Strategy<Value = (ModelParams, f64)> {
    (1usize..=3, 0.0f64..2.0, 0.0f64..4.0, 0.05f64..0.95, 0.05f64..0.95).prop_map(
        |(n, mu, nu_sq, pf, df)| {
            let p_max = glassey_exponent(n as f64 + mu).unwrap_or(f64::INFINITY).min(3.0);
            let p = 1.0 + pf * (p_max - 1.0);
            let model = ModelParams::new(n, mu, nu_sq, p, 1.0).unwrap();
            let d = mu + df * (model.d_upper() - mu);
            (model, d)
        },
    )
}

fn scenario(nu_sq: f64) -> (ModelParams, TestFunctionParams, InitialData, SolverConfig) {
    let model = ModelParams::new(1, 0.5, nu_sq, 2.0, 1.0).unwrap();
    let params = TestFunctionParams::new(&model, 1.0, None).unwrap();
    let data = make_initial_data(&model, 0.1, 1.0, 1.0).unwrap();
    let solver = SolverConfig { dx: 1.0 / 200.0, ..SolverConfig::for_radius(1.0) };
    (model, params, data, solver)
}

fn criterion_1() -> (bool, String) {
    let worst = Cell::new(0.0f64);
    let t_grid = linspace(0.0, 10.0, 50);
    let r_grid = linspace(0.0, 5.0, 50);
    let strategy = (admissible(), 0.5f64..10.0);
    let result = runner(20).run(&strategy, |((model, d), eta)| {
        let params = TestFunctionParams::new(&model, d, Some(eta)).unwrap();
        let c = check_adjoint_identity(&params, &model, &t_grid, &r_grid).unwrap();
        let residual = -c.margin.unwrap();
        worst.set(worst.get().max(residual));
        prop_assert!(residual <= 1e-12, "{}", c.detail);
        Ok(())
    });
    (
        result.is_ok(),
        format!("adjoint identity, 20 tuples on 50x50 grids: max relative residual {:.2e} (<= 1e-12)", worst.get()),
    )
}

fn criterion_2() -> (bool, String) {
    let probes = Cell::new(0u32);
    let worst = Cell::new(f64::NEG_INFINITY);
    let strategy = (admissible(), 0.0f64..3.0);
    let result = runner(200).run(&strategy, |((model, d), stretch)| {
        let base = TestFunctionParams::new(&model, d, None).unwrap();
        let eta = base.thresholds.eta_tilde * (1.0 + stretch);
        let params = TestFunctionParams::new(&model, d, Some(eta)).unwrap();
        let sign = check_kernel_sign(&params, &model);
        prop_assert_eq!(sign.status, Status::Pass, "{}", sign.detail);
        worst.set(worst.get().max(-sign.margin.unwrap()));
        if params.thresholds.sign_ratio > 2.0 {
            probes.set(probes.get() + 1);
            let tight = check_kernel_tightness(&params, &model);
            prop_assert_eq!(tight.status, Status::Pass, "{}", tight.detail);
        }
        Ok(())
    });
    (
        result.is_ok() && probes.get() > 0,
        format!(
            "kernel sign, 200 tuples with eta >= eta_tilde: max K = {:.2e}; {} tightness probes with K(0) > 0 below the ratio",
            worst.get(),
            probes.get()
        ),
    )
}

fn criterion_3() -> (bool, String) {
    let bessel = check_bessel_oracle().unwrap();
    let mut ok = bessel.status == Status::Pass;
    let mut worst = 0.0f64;
    // delta = (mu-1)^2 - 4 nu^2 in {1, 4}.
    for (mu, nu_sq) in [(2.0, 0.0), (3.0, 0.75), (3.0, 0.0), (0.0, 0.0)] {
        let model = ModelParams::new(1, mu, nu_sq, 1.2, 1.0).unwrap();
        for eta in [1.0, 3.0, 6.0] {
            let c = check_xi_ode(&model, eta).unwrap();
            ok &= c.status == Status::Pass;
            worst = worst.max(1e-6 - c.margin.unwrap_or(f64::NAN));
        }
    }
    (ok, format!("Bessel K_1/2 closed form: {}; xi ODE residual for delta in {{1, 4}}: {worst:.2e} (<= 1e-6)", bessel.detail))
}

fn criterion_4() -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in 1..=3 {
        let c = check_phi_eigenrelation(1.0, n, 1e-3).unwrap();
        ok &= c.status == Status::Pass;
        parts.push(c.detail);
    }
    (ok, format!("eigenrelation at dx = 1e-3: {}", parts.join("; ")))
}

/// Sup-norm error at `t = 1` of the linear 1D solver against d'Alembert's formula.
fn dalembert_error() -> f64 {
    let model = ModelParams::new(1, 0.0, 0.0, 2.0, 1.0).unwrap();
    let data = make_initial_data(&model, 1.0, 1.0, 0.5).unwrap();
    let config = SolverConfig { dx: 1e-3, t_max: 1.0, nonlinearity: false, ..SolverConfig::for_radius(1.0) };
    let f = |y: f64| data.f(y.abs());
    // Antiderivative of g(y) = a_g (1 - y^2)^3 on [-1, 1], constant outside.
    let big_g = |y: f64| {
        let y = y.clamp(-1.0, 1.0);
        data.amplitude_g * (y - y.powi(3) + 0.6 * y.powi(5) - y.powi(7) / 7.0)
    };
    let mut err = f64::NAN;
    run(&data, &model, &config, &mut |v: &FieldView<'_>| {
        if (v.t - 1.0).abs() < 1e-12 {
            err = v
                .u
                .iter()
                .enumerate()
                .map(|(j, &u)| {
                    let x = j as f64 * v.dx;
                    let exact = 0.5 * (f(x - 1.0) + f(x + 1.0)) + 0.5 * (big_g(x + 1.0) - big_g(x - 1.0));
                    (u - exact).abs()
                })
                .fold(0.0, f64::max);
        }
    })
    .unwrap();
    err
}

fn zero_run_is_zero() -> bool {
    let model = ModelParams::new(1, 0.5, 0.25, 2.0, 1.0).unwrap();
    let data = InitialData::zero(&model);
    let config = SolverConfig { dx: 0.01, t_max: 5.0, ..SolverConfig::for_radius(1.0) };
    let mut nonzero = 0usize;
    run(&data, &model, &config, &mut |v: &FieldView<'_>| {
        nonzero += v.u.iter().chain(v.v).filter(|x| **x != 0.0).count();
    })
    .unwrap();
    nonzero == 0
}

fn criterion_5(support_cells: f64) -> (bool, String) {
    let err = dalembert_error();
    let zero = zero_run_is_zero();
    (
        err <= 1e-3 && zero && support_cells <= 1.0,
        format!(
            "d'Alembert sup error {err:.2e} (<= 1e-3); zero data stays zero: {zero}; max support excess over acceptance runs {support_cells:.3} cells (<= 1)"
        ),
    )
}

const CHAIN_6: [&str; 5] = ["F_positive", "F_lower_bound", "G_lower_bound", "H_dominates_L", "holder_lower_bound"];

fn criterion_6(v: &Verification, elapsed: Duration) -> (bool, String) {
    let mut ok = elapsed < Duration::from_secs(120);
    let mut parts = Vec::new();
    for id in CHAIN_6 {
        let c = v.ledger.get(id).expect("chain check present");
        let good = c.status == Status::Pass
            && c.margin.is_some_and(|m| m > 0.0)
            && matches!(c.refinement_trend, Trend::Improving | Trend::Flat);
        ok &= good;
        parts.push(format!(
            "{id} {:.3e} {}",
            c.relative_margin.unwrap_or(f64::NAN),
            c.refinement_trend.as_str()
        ));
    }
    (
        ok,
        format!(
            "chain at dx = 1/200 x 3 levels (relative margin, trend): {}; ledger {} fail; runtime limit 120 s",
            parts.join(", "),
            v.ledger.count(Status::Fail)
        ),
    )
}

fn lifespan_criterion(label: &str, nu_sq: f64) -> (bool, String, f64) {
    let (model, params, data, solver) = scenario(nu_sq);
    let s: SweepResult = sweep(&model, &params, &solver, &data, &[0.05, 0.1, 0.2, 0.4]).unwrap();
    let all_blow_up = s.entries.iter().all(|e| !e.censored);
    let monotone = s.entries.windows(2).all(|w| w[1].t_est <= w[0].t_est);
    let check = check_lifespan_inequality(&s, &params, &model).unwrap();
    let support = s.entries.iter().map(|e| e.support_excess_cells).fold(f64::NEG_INFINITY, f64::max);
    let times: Vec<String> = s.entries.iter().map(|e| format!("{}: {:.3}", e.epsilon, e.t_est)).collect();
    (
        all_blow_up && monotone && check.status == Status::Pass,
        format!(
            "{label} (delta = {}): T_est {{{}}}, all blow up {all_blow_up}, monotone {monotone}, bound {} ({})",
            model.delta(),
            times.join(", "),
            check.status.as_str(),
            check.detail
        ),
        support,
    )
}

fn criterion_9(first: &Verification) -> (bool, String) {
    let (model, params, data, solver) = scenario(0.25);
    let again = verify(&model, &params, &data, &solver, 3).unwrap();
    let same_ledger = first.ledger.to_json().unwrap() == again.ledger.to_json().unwrap();
    let same_trace = first.levels.last().unwrap().trace.to_csv().unwrap()
        == again.levels.last().unwrap().trace.to_csv().unwrap();

    let coarse = SolverConfig { dx: 0.02, snapshot_interval: 0.5, snapshot_stride: 5, ..SolverConfig::for_radius(1.0) };
    let sweep_bytes = || {
        let s = sweep(&model, &params, &coarse, &data, &[0.2, 0.4, 0.8]).unwrap();
        (s.to_csv().unwrap(), serde_json_bytes(&s.fit_report(&params, &model)))
    };
    let same_sweep = sweep_bytes() == sweep_bytes();
    let trajectory = || {
        let report = run(&data, &model, &coarse, &mut ()).unwrap();
        trajectory_csv(&report.trajectory).unwrap()
    };
    let same_trajectory = trajectory() == trajectory();
    (
        same_ledger && same_trace && same_sweep && same_trajectory,
        format!(
            "bit-identical reruns: ledger JSON {same_ledger}, trace CSV {same_trace}, sweep CSV+fit JSON {same_sweep}, trajectory CSV {same_trajectory}"
        ),
    )
}

fn serde_json_bytes<T: serde::Serialize>(value: &T) -> Vec<u8> {
    blowuplab_core::report::json_bytes(value).unwrap()
}

/// Runs one criterion; with `limit`, exceeding that many seconds fails it.
fn timed(id: u32, limit: Option<u64>, out: &RefCell<Vec<Outcome>>, f: impl FnOnce() -> (bool, String)) {
    let start = Instant::now();
    let (mut pass, mut summary) = f();
    let elapsed = start.elapsed();
    if let Some(secs) = limit {
        pass &= elapsed < Duration::from_secs(secs);
        summary.push_str(&format!("; runtime limit {secs} s"));
    }
    out.borrow_mut().push(Outcome { id, pass, summary, elapsed });
}

fn main() -> ExitCode {
    let out = RefCell::new(Vec::new());
    timed(1, Some(1), &out, criterion_1);
    timed(2, Some(1), &out, criterion_2);
    timed(3, Some(5), &out, criterion_3);
    timed(4, Some(10), &out, criterion_4);

    let (model, params, data, solver) = scenario(0.25);
    let start = Instant::now();
    let chain = verify(&model, &params, &data, &solver, 3).unwrap();
    let chain_elapsed = start.elapsed();
    out.borrow_mut().push({
        let (pass, summary) = criterion_6(&chain, chain_elapsed);
        Outcome { id: 6, pass, summary, elapsed: chain_elapsed }
    });
    let chain_support = chain.levels.iter().map(|l| l.max_support_excess / l.dx).fold(f64::NEG_INFINITY, f64::max);

    let support = Cell::new(chain_support);
    for (id, label, nu_sq) in [(7, "lifespan bound", 0.25), (8, "regime independence", 0.03)] {
        timed(id, Some(900), &out, || {
            let (pass, summary, cells) = lifespan_criterion(label, nu_sq);
            support.set(support.get().max(cells));
            (pass, summary)
        });
    }
    timed(5, None, &out, || criterion_5(support.get()));
    timed(9, None, &out, || criterion_9(&chain));

    let mut results = out.into_inner();
    results.sort_by_key(|o| o.id);
    for o in &results {
        println!(
            "criterion {}: {} [{:.1} s] {}",
            o.id,
            if o.pass { "PASS" } else { "FAIL" },
            o.elapsed.as_secs_f64(),
            o.summary
        );
    }
    let failed = results.iter().filter(|o| !o.pass).count();
    println!("acceptance: {} of {} criteria pass", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
