use blowuplab_core::functionals::check_lower_bounds;
use blowuplab_core::lifespan::{SweepEntry, SweepResult};
use blowuplab_core::verifier::{check_lifespan_inequality, chain_specs, trace_levels, verify};
use blowuplab_core::wave::make_initial_data;
use blowuplab_core::{Error, InitialData, ModelParams, Regime, SolverConfig, Status, TestFunctionParams};

fn model(nu_sq: f64) -> ModelParams {
    ModelParams::new(1, 0.5, nu_sq, 2.0, 1.0).unwrap()
}

#[test]
fn positive_discriminant_chain_passes_with_the_same_tolerances() {
    let m = model(0.03);
    assert!(m.delta() > 0.0);
    let params = TestFunctionParams::new(&m, 1.0, None).unwrap();
    let data = make_initial_data(&m, 0.1, 1.0, 1.0).unwrap();
    let base = SolverConfig::for_radius(1.0);
    let v = verify(&m, &params, &data, &base, 3).unwrap();
    let failed: Vec<_> = v.ledger.checks.iter().filter(|c| c.status == Status::Fail).collect();
    assert!(failed.is_empty(), "{failed:#?}");
    // The Bessel construction exists here, so its ODE check is live.
    assert_eq!(v.ledger.get("xi_bessel_ode").unwrap().status, Status::Pass);
    for (id, _) in chain_specs() {
        assert_eq!(v.ledger.get(id).unwrap().status, Status::Pass, "{id}");
    }
}

#[test]
fn zero_data_ledger_is_vacuous_and_passes() {
    let m = model(0.25);
    let params = TestFunctionParams::new(&m, 1.0, None).unwrap();
    let data = InitialData::zero(&m);
    let base = SolverConfig { dx: 0.02, t_max: 3.0, ..SolverConfig::for_radius(1.0) };
    let v = verify(&m, &params, &data, &base, 2).unwrap();
    assert!(v.ledger.passed());
    for (id, _) in chain_specs() {
        assert_eq!(v.ledger.get(id).unwrap().status, Status::Vacuous, "{id}");
    }
    assert!(v.levels.iter().all(|l| l.trace.f.iter().all(|x| *x == 0.0)));
}

#[test]
fn ledger_has_one_line_per_check_sorted() {
    let m = model(0.25);
    let params = TestFunctionParams::new(&m, 1.0, None).unwrap();
    let data = make_initial_data(&m, 0.4, 1.0, 1.0).unwrap();
    let base = SolverConfig { dx: 0.02, ..SolverConfig::for_radius(1.0) };
    let v = verify(&m, &params, &data, &base, 2).unwrap();
    let ids: Vec<&str> = v.ledger.checks.iter().map(|c| c.check_id.as_str()).collect();
    let mut sorted = ids.clone();
    sorted.sort_unstable();
    sorted.dedup();
    assert_eq!(ids, sorted);
    assert!(ids.len() >= 12 + chain_specs().len());
}

#[test]
fn lower_bound_margins_scale_linearly_with_epsilon() {
    let m = model(0.25);
    let params = TestFunctionParams::new(&m, 1.0, None).unwrap();
    let base = SolverConfig { dx: 0.01, ..SolverConfig::for_radius(1.0) };
    let margins: Vec<[f64; 2]> = [0.05, 0.1, 0.2]
        .iter()
        .map(|&eps| {
            let data = make_initial_data(&m, eps, 1.0, 1.0).unwrap();
            let level = trace_levels(&data, &m, &params, &base, 1).unwrap().remove(0);
            let c0 = level.trace.constants.unwrap().c0;
            let b = check_lower_bounds(&level.trace, &params, c0, eps);
            [b[1].margin.unwrap(), b[3].margin.unwrap()]
        })
        .collect();
    for k in 0..2 {
        for w in margins.windows(2) {
            let ratio = w[1][k] / w[0][k];
            assert!((ratio - 2.0).abs() < 0.1, "bound {k}: ratio {ratio}");
        }
    }
}

#[test]
fn lifespan_check_needs_three_data_sizes() {
    let m = model(0.25);
    let params = TestFunctionParams::new(&m, 1.0, None).unwrap();
    let single = SweepResult {
        entries: vec![SweepEntry {
            epsilon: 0.1,
            t_levels: [33.4; 3],
            t_est: 33.4,
            uncertainty: 0.0,
            censored: false,
            support_excess_cells: 0.0,
        }],
        fit: None,
        slope_theory: -2.0,
        regime: Regime::Negative,
        t_max: 120.0,
    };
    assert!(matches!(check_lifespan_inequality(&single, &params, &m), Err(Error::Precondition(_))));
}

#[test]
fn lifespan_check_ignores_censored_entries() {
    let m = model(0.25);
    let params = TestFunctionParams::new(&m, 1.0, None).unwrap();
    let entry = |epsilon: f64, t: f64, censored: bool| SweepEntry {
        epsilon,
        t_levels: [t; 3],
        t_est: t,
        uncertainty: 0.0,
        censored,
        support_excess_cells: 0.0,
    };
    let s = SweepResult {
        entries: vec![entry(0.01, 120.0, true), entry(0.1, 33.4, false), entry(0.2, 13.8, false), entry(0.4, 5.8, false)],
        fit: None,
        slope_theory: -2.0,
        regime: Regime::Negative,
        t_max: 120.0,
    };
    let c = check_lifespan_inequality(&s, &params, &m).unwrap();
    assert_eq!(c.status, Status::Pass, "{}", c.detail);
    assert!(c.detail.contains("0.01: vacuous"));
}
