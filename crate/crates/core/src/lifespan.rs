//! Data-size sweeps of the blow-up time and the log-log scaling fit.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{ModelParams, Regime, TestFunctionParams};
use crate::report::csv_bytes;
use crate::special::lifespan_exponent;
use crate::wave::{blowup_time_extrapolate, run, InitialData, Outcome, SolverConfig};

/// Number of grid levels per data size.
pub const LEVELS: u32 = 3;

/// One data size of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub epsilon: f64,
    /// Detection (or final) times at `dx`, `dx/2`, `dx/4`.
    pub t_levels: [f64; 3],
    pub t_est: f64,
    pub uncertainty: f64,
    /// Some level reached `t_max` without blowing up.
    pub censored: bool,
    /// Largest distance of the support beyond `t + R`, in cells of each level.
    pub support_excess_cells: f64,
}

/// Least-squares line `log T = intercept + slope log eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square of the residuals in `log T`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    /// Sorted by increasing `epsilon`.
    pub entries: Vec<SweepEntry>,
    /// `None` with fewer than three uncensored entries.
    pub fit: Option<LogFit>,
    /// `-2(p-1)/(2 - (n+d-1)(p-1))`.
    pub slope_theory: f64,
    pub regime: Regime,
    pub t_max: f64,
}

impl SweepResult {
    pub fn uncensored(&self) -> impl Iterator<Item = &SweepEntry> {
        self.entries.iter().filter(|e| !e.censored)
    }

    /// T is nonincreasing in eps across uncensored entries, up to the
    /// combined uncertainty of neighbours.
    pub fn is_monotone(&self) -> bool {
        let e: Vec<&SweepEntry> = self.uncensored().collect();
        e.windows(2)
            .all(|w| w[1].t_est <= w[0].t_est + w[0].uncertainty + w[1].uncertainty)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let rows = self.entries.iter().map(|e| {
            let mut row: Vec<String> = [e.epsilon, e.t_levels[0], e.t_levels[1], e.t_levels[2], e.t_est, e.uncertainty]
                .iter()
                .map(|&x| crate::report::format_float(x))
                .collect();
            row.push(e.censored.to_string());
            row
        });
        csv_bytes(&SWEEP_HEADER, rows)
    }

    /// The fit summary as a serializable report.
    pub fn fit_report(&self, params: &TestFunctionParams, model: &ModelParams) -> FitReport {
        FitReport {
            slope_fit: self.fit.map(|f| f.slope),
            intercept: self.fit.map(|f| f.intercept),
            slope_theory: self.slope_theory,
            c_emp: sweep_c_emp(self, params, model),
            residual: self.fit.map(|f| f.residual),
            regime: self.regime.as_str().to_string(),
            censored: self.entries.iter().filter(|e| e.censored).map(|e| e.epsilon).collect(),
        }
    }
}

pub const SWEEP_HEADER: [&str; 7] = ["epsilon", "T_dx", "T_dx2", "T_dx4", "T_est", "uncertainty", "censored"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub slope_fit: Option<f64>,
    pub intercept: Option<f64>,
    pub slope_theory: f64,
    /// Sweep-wide constant: the minimum of the per-entry values.
    #[serde(rename = "C_emp")]
    pub c_emp: Option<f64>,
    pub residual: Option<f64>,
    pub regime: String,
    /// Data sizes excluded from the fit.
    pub censored: Vec<f64>,
}

/// Ordinary least squares of `y` on `x`; needs at least two distinct `x`.
pub fn least_squares(x: &[f64], y: &[f64]) -> Option<LogFit> {
    let n = x.len() as f64;
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    Some(LogFit { slope, intercept, residual: (ss / n).sqrt() })
}

/// Runs every `(eps, level)` pair concurrently and extrapolates each `T_eps`.
pub fn sweep(
    model: &ModelParams,
    params: &TestFunctionParams,
    base: &SolverConfig,
    data: &InitialData,
    epsilons: &[f64],
) -> Result<SweepResult> {
    params.require_positive_theta(model)?;
    if let Some(e) = epsilons.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
        return Err(Error::Domain(format!("data size eps = {e} must be positive")));
    }
    base.validate()?;
    let mut eps: Vec<f64> = epsilons.to_vec();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    let jobs: Vec<(usize, u32)> = (0..eps.len()).flat_map(|i| (0..LEVELS).map(move |l| (i, l))).collect();
    let outcomes: Vec<(Outcome, f64)> = jobs
        .par_iter()
        .map(|&(i, level)| {
            let initial = InitialData { epsilon: eps[i], ..*data };
            let config = base.refined(level);
            let report = run(&initial, model, &config, &mut ())?;
            Ok((report.outcome, report.max_support_excess / config.dx))
        })
        .collect::<Result<_>>()?;
    let entries: Vec<SweepEntry> = eps
        .iter()
        .enumerate()
        .map(|(i, &epsilon)| {
            let o = &outcomes[i * LEVELS as usize..(i + 1) * LEVELS as usize];
            let t_levels = [o[0].0.t_final(), o[1].0.t_final(), o[2].0.t_final()];
            let censored = o.iter().any(|x| x.0.blowup_time().is_none());
            let support_excess_cells = o.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
            let ex = blowup_time_extrapolate(t_levels);
            SweepEntry {
                epsilon,
                t_levels,
                t_est: ex.t_est,
                uncertainty: ex.uncertainty,
                censored,
                support_excess_cells,
            }
        })
        .collect();
    let (x, y): (Vec<f64>, Vec<f64>) = entries
        .iter()
        .filter(|e| !e.censored)
        .map(|e| (e.epsilon.ln(), e.t_est.ln()))
        .unzip();
    let fit = if x.len() >= 3 { least_squares(&x, &y) } else { None };
    Ok(SweepResult {
        entries,
        fit,
        slope_theory: -lifespan_exponent(model, params.d)?,
        regime: model.regime(),
        t_max: base.t_max,
    })
}

/// `eps^{-(p-1)} / ((1+T)^theta - 2^theta)` per entry; `None` for censored
/// entries and for `T <= 1`, where the bracket is not positive.
pub fn c_emp_per_entry(sweep: &SweepResult, params: &TestFunctionParams, model: &ModelParams) -> Vec<(f64, Option<f64>)> {
    let theta = params.theta;
    sweep
        .entries
        .iter()
        .map(|e| {
            let bracket = (1.0 + e.t_est).powf(theta) - 2f64.powf(theta);
            let c = (!e.censored && bracket > 0.0).then(|| e.epsilon.powf(-(model.p - 1.0)) / bracket);
            (e.epsilon, c)
        })
        .collect()
}

/// The largest constant consistent with every uncensored entry.
pub fn sweep_c_emp(sweep: &SweepResult, params: &TestFunctionParams, model: &ModelParams) -> Option<f64> {
    c_emp_per_entry(sweep, params, model).into_iter().filter_map(|(_, c)| c).reduce(f64::min)
}

/// Sweeps of a `delta < 0` and a `delta > 0` model side by side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeComparison {
    pub negative: SweepResult,
    pub positive: SweepResult,
    pub negative_consistent: bool,
    pub positive_consistent: bool,
}

/// Requires `delta(neg) < 0 < delta(pos)` and equal `n`, `mu`, `p`, `R`.
pub fn compare_regimes(
    model_neg: &ModelParams,
    model_pos: &ModelParams,
    d: f64,
    eta: Option<f64>,
    base: &SolverConfig,
    data: &InitialData,
    epsilons: &[f64],
) -> Result<RegimeComparison> {
    if !(model_neg.delta() < 0.0 && model_pos.delta() > 0.0) {
        return Err(Error::Config(format!(
            "regime comparison needs delta < 0 < delta, got {} and {}",
            model_neg.delta(),
            model_pos.delta()
        )));
    }
    if model_neg.n != model_pos.n
        || model_neg.mu != model_pos.mu
        || model_neg.p != model_pos.p
        || model_neg.radius != model_pos.radius
    {
        return Err(Error::Config("compared models must share n, mu, p and R".into()));
    }
    let run_one = |m: &ModelParams| -> Result<(SweepResult, bool)> {
        let params = TestFunctionParams::new(m, d, eta)?;
        let s = sweep(m, &params, base, data, epsilons)?;
        let ok = crate::verifier::check_lifespan_inequality(&s, &params, m)?.status
            == crate::verifier::Status::Pass;
        Ok((s, ok))
    };
    let ((negative, negative_consistent), (positive, positive_consistent)) = (run_one(model_neg)?, run_one(model_pos)?);
    Ok(RegimeComparison { negative, positive, negative_consistent, positive_consistent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wave::make_initial_data;

    #[test]
    fn least_squares_recovers_a_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 1.5 * v).collect();
        let f = least_squares(&x, &y).unwrap();
        assert!((f.slope + 1.5).abs() < 1e-14 && (f.intercept - 2.0).abs() < 1e-14);
        assert!(f.residual < 1e-14);
        assert!(least_squares(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }

    #[test]
    fn theoretical_slope() {
        let model = ModelParams::new(1, 0.5, 0.25, 2.0, 1.0).unwrap();
        let s = -lifespan_exponent(&model, 0.6).unwrap();
        assert!((s + 2.0 / 1.4).abs() < 1e-12);
    }

    #[test]
    fn small_sweep_is_sorted_and_monotone() {
        let model = ModelParams::new(1, 0.5, 0.25, 2.0, 1.0).unwrap();
        let params = TestFunctionParams::new(&model, 1.0, None).unwrap();
        let data = make_initial_data(&model, 1.0, 1.0, 1.0).unwrap();
        let base = SolverConfig { dx: 0.04, t_max: 30.0, ..SolverConfig::for_radius(1.0) };
        let s = sweep(&model, &params, &base, &data, &[1.6, 0.8, 3.2]).unwrap();
        let eps: Vec<f64> = s.entries.iter().map(|e| e.epsilon).collect();
        assert_eq!(eps, [0.8, 1.6, 3.2]);
        assert!(s.entries.iter().all(|e| !e.censored && e.t_est > 0.0));
        assert!(s.is_monotone());
        assert!(s.fit.unwrap().slope < 0.0);
        let csv = String::from_utf8(s.to_csv().unwrap()).unwrap();
        assert!(csv.starts_with("epsilon,T_dx,T_dx2,T_dx4,T_est,uncertainty,censored\n"));
    }

    #[test]
    fn censored_entries_leave_the_fit() {
        let model = ModelParams::new(1, 0.5, 0.25, 2.0, 1.0).unwrap();
        let params = TestFunctionParams::new(&model, 1.0, None).unwrap();
        let data = make_initial_data(&model, 1.0, 1.0, 1.0).unwrap();
        let base = SolverConfig { dx: 0.05, t_max: 2.0, ..SolverConfig::for_radius(1.0) };
        let s = sweep(&model, &params, &base, &data, &[0.01, 4.0]).unwrap();
        assert!(s.entries[0].censored);
        assert!(s.fit.is_none());
        assert_eq!(c_emp_per_entry(&s, &params, &model)[0].1, None);
    }

    #[test]
    fn regime_precondition() {
        let neg = ModelParams::new(1, 0.5, 0.25, 2.0, 1.0).unwrap();
        let data = make_initial_data(&neg, 1.0, 1.0, 1.0).unwrap();
        let base = SolverConfig::for_radius(1.0);
        let err = compare_regimes(&neg, &neg, 1.0, None, &base, &data, &[0.1]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let other_p = ModelParams::new(1, 0.5, 0.03, 1.8, 1.0).unwrap();
        assert!(compare_regimes(&neg, &other_p, 1.0, None, &base, &data, &[0.1]).is_err());
    }
}
