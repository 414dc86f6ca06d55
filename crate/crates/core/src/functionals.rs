//! Weighted functionals of a solution along a run.
//!
//! With `psi(x, t) = rho(t) phi^eta(x)`:
//!
//! * `F(t) = ∫ u psi dx`, `G(t) = ∫ u_t psi dx`, `NL(t) = ∫ |u_t|^p psi dx`;
//! * `L(t) = (1/8) ∫_1^t NL ds + eps C0 / 24` and `H = G - L` for `t >= 1`;
//! * the Hölder ratio `NL (∫_{|x| <= t+R} psi dx)^{p-1} / G^p`;
//! * the residual of `F' + gamma F + ∫_0^t K F ds = ∫_0^t NL ds + eps C1`.
//!
//! Spatial integrals use trapezoid weights on the solver grid, time integrals
//! the trapezoid rule on the sample times. `psi` grows like `e^{eta(|x| - t)}`,
//! so weights are tabulated as `e^{-eta r} phi^eta(r)` times `e^{eta(r - t_ref)}`
//! with `t_ref` advanced once per unit of time.

use serde::Serialize;

use crate::error::Result;
use crate::params::{ModelParams, TestFunctionParams};
use crate::quadrature::{cumulative_trapezoid, derivative, doubling, radial_weights, sphere_area};
use crate::report::{csv_bytes, format_float};
use crate::special::{gamma_coeffs, kernel_k, phi_eta, phi_eta_scaled};
use crate::wave::{AbsPow, FieldView, InitialData, Observer, RadialField};

/// Exponents below this are flushed to zero instead of producing subnormals.
const MIN_EXPONENT: f64 = -700.0;

/// `C0 = ∫ (f + g) phi^eta dx` and `C1 = (eta + (2mu - d)/2) ∫ f phi^eta dx + ∫ g phi^eta dx`
/// for the unscaled profiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DataConstants {
    pub c0: f64,
    pub c1: f64,
    pub int_f_phi: f64,
    pub int_g_phi: f64,
}

pub fn data_constants(
    initial: &InitialData,
    params: &TestFunctionParams,
    model: &ModelParams,
) -> Result<DataConstants> {
    let n = model.n;
    let eta = params.eta;
    let radius = initial.radius;
    let omega = sphere_area(n);
    let mut failure = None;
    let mut profile = |r: f64| match phi_eta(r, eta, n) {
        Ok(phi) => initial.profile.eval(r, radius) * phi * r.powi(n as i32 - 1),
        Err(e) => {
            failure.get_or_insert(e);
            0.0
        }
    };
    let base = omega * doubling(0.0, radius, 32, 1024, 1e-14, &mut profile);
    if let Some(e) = failure {
        return Err(e);
    }
    let int_f_phi = initial.amplitude_f * base;
    let int_g_phi = initial.amplitude_g * base;
    let coeff = eta + (2.0 * model.mu - params.d) / 2.0;
    Ok(DataConstants {
        c0: int_f_phi + int_g_phi,
        c1: coeff * int_f_phi + int_g_phi,
        int_f_phi,
        int_g_phi,
    })
}

/// Functionals sampled along one run. `l`, `h` and `nl_cum` are `None`
/// before `t = 1` and everywhere when no sample lands on `t = 1`;
/// `holder_ratio` is `None` where `G <= 0`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FunctionalTrace {
    pub times: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub nl: Vec<f64>,
    /// `∫_1^t NL ds`.
    pub nl_cum: Vec<Option<f64>>,
    /// `∫_0^t NL ds`.
    pub nl_cum0: Vec<f64>,
    /// `∫_0^t K F ds`.
    pub k_cum: Vec<f64>,
    /// `∫_{|x| <= t+R} psi dx`.
    pub ball: Vec<f64>,
    /// Sampled `dF/dt`.
    pub df: Vec<f64>,
    pub l: Vec<Option<f64>>,
    pub h: Vec<Option<f64>>,
    pub holder_ratio: Vec<Option<f64>>,
    pub weak_residual: Vec<f64>,
    pub sup_u: Vec<f64>,
    pub sup_ut: Vec<f64>,
    pub epsilon: f64,
    pub constants: Option<DataConstants>,
    /// Index of the sample at `t = 1`.
    pub index_t1: Option<usize>,
    pub dx: f64,
}

pub const TRACE_HEADER: [&str; 11] = [
    "t",
    "F",
    "G",
    "NL",
    "NL_cum",
    "L",
    "H",
    "holder_ratio",
    "weak_residual",
    "sup_u",
    "sup_ut",
];

impl FunctionalTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Last sampled time, or 0 for an empty trace.
    pub fn t_end(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Index of the first sample with `t >= t0` (within rounding).
    pub fn index_from(&self, t0: f64) -> usize {
        self.times.partition_point(|&t| t < t0 - 1e-12)
    }

    /// Trace CSV; absent values are empty fields.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let opt = |x: Option<f64>| x.map(format_float).unwrap_or_default();
        let rows = (0..self.len()).map(|k| {
            vec![
                format_float(self.times[k]),
                format_float(self.f[k]),
                format_float(self.g[k]),
                format_float(self.nl[k]),
                opt(self.nl_cum[k]),
                opt(self.l[k]),
                opt(self.h[k]),
                opt(self.holder_ratio[k]),
                format_float(self.weak_residual[k]),
                format_float(self.sup_u[k]),
                format_float(self.sup_ut[k]),
            ]
        });
        csv_bytes(&TRACE_HEADER, rows)
    }
}

/// Observer that accumulates the functionals at every solver step.
pub struct TraceRecorder {
    model: ModelParams,
    params: TestFunctionParams,
    power: AbsPow,
    epsilon: f64,
    constants: Option<DataConstants>,
    dx: f64,
    /// Trapezoid weight times `e^{-eta r} phi^eta(r)`.
    base: Vec<f64>,
    /// `base_j e^{eta(r_j - t_ref)}`.
    table: Vec<f64>,
    /// Prefix sums of `table`.
    prefix: Vec<f64>,
    t_ref: f64,
    times: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    nl: Vec<f64>,
    ball: Vec<f64>,
    sup_u: Vec<f64>,
    sup_ut: Vec<f64>,
    error: Option<crate::Error>,
}

impl TraceRecorder {
    /// `constants` may be `None` for zero data, in which case `L` uses `C0 = 0`.
    pub fn new(
        model: &ModelParams,
        params: &TestFunctionParams,
        epsilon: f64,
        constants: Option<DataConstants>,
    ) -> Self {
        Self {
            model: *model,
            params: *params,
            power: AbsPow::new(model.p),
            epsilon,
            constants,
            dx: f64::NAN,
            base: Vec::new(),
            table: Vec::new(),
            prefix: Vec::new(),
            t_ref: f64::NAN,
            times: Vec::new(),
            f: Vec::new(),
            g: Vec::new(),
            nl: Vec::new(),
            ball: Vec::new(),
            sup_u: Vec::new(),
            sup_ut: Vec::new(),
            error: None,
        }
    }

    /// Recorder for `initial`, with its data constants computed here.
    pub fn for_data(
        initial: &InitialData,
        model: &ModelParams,
        params: &TestFunctionParams,
    ) -> Result<Self> {
        let constants = if initial.is_zero() {
            None
        } else {
            Some(data_constants(initial, params, model)?)
        };
        Ok(Self::new(model, params, initial.epsilon, constants))
    }

    fn ensure_tables(&mut self, dx: f64, len: usize, t: f64) -> Result<()> {
        if dx != self.dx {
            self.dx = dx;
            self.base.clear();
            self.table.clear();
            self.prefix.clear();
            self.t_ref = f64::NAN;
        }
        if len > self.base.len() {
            let target = len.max(self.base.len() * 5 / 4 + 64);
            let weights = radial_weights(self.model.n, dx, target);
            for (j, w) in weights.iter().enumerate().skip(self.base.len()) {
                let r = j as f64 * dx;
                self.base.push(w * phi_eta_scaled(r, self.params.eta, self.model.n)?);
            }
        }
        let t_ref = t.floor();
        if t_ref != self.t_ref {
            self.t_ref = t_ref;
            self.table.clear();
            self.prefix.clear();
        }
        let eta = self.params.eta;
        let mut acc = self.prefix.last().copied().unwrap_or(0.0);
        for j in self.table.len()..self.base.len() {
            let x = eta * (j as f64 * dx - t_ref);
            let w = if x < MIN_EXPONENT { 0.0 } else { self.base[j] * x.exp() };
            acc += w;
            self.table.push(w);
            self.prefix.push(acc);
        }
        Ok(())
    }

    fn record(&mut self, t: f64, dx: f64, u: &[f64], v: &[f64], sup_u: f64, sup_v: f64) -> Result<()> {
        if !(sup_u.is_finite() && sup_v.is_finite()) {
            return Ok(());
        }
        let active = u
            .iter()
            .zip(v)
            .rposition(|(a, b)| *a != 0.0 || *b != 0.0)
            .map_or(0, |j| j + 1);
        let ball_end = ((t + self.model.radius) / dx).round() as usize;
        self.ensure_tables(dx, active.max(ball_end + 1), t)?;
        let (mut sf, mut sg, mut snl) = (0.0, 0.0, 0.0);
        for j in 0..active {
            let w = self.table[j];
            let vj = v[j];
            sf += w * u[j];
            sg += w * vj;
            snl += w * self.power.eval(vj);
        }
        let scale = (1.0 + t).powf(0.5 * self.params.d) * (-self.params.eta * (t - self.t_ref)).exp();
        let (f, g, nl) = (scale * sf, scale * sg, scale * snl);
        let ball = scale * self.prefix[ball_end];
        if !(f.is_finite() && g.is_finite() && nl.is_finite()) {
            return Ok(());
        }
        self.times.push(t);
        self.f.push(f);
        self.g.push(g);
        self.nl.push(nl);
        self.ball.push(ball);
        self.sup_u.push(sup_u);
        self.sup_ut.push(sup_v);
        Ok(())
    }

    /// Assembles the trace; fails if a weight could not be evaluated.
    pub fn finish(self) -> Result<FunctionalTrace> {
        if let Some(e) = self.error {
            return Err(e);
        }
        Ok(assemble(
            &self.model,
            &self.params,
            self.epsilon,
            self.constants,
            self.dx,
            self.times,
            self.f,
            self.g,
            self.nl,
            self.ball,
            self.sup_u,
            self.sup_ut,
        ))
    }
}

impl Observer for TraceRecorder {
    fn observe(&mut self, view: &FieldView<'_>) {
        if self.error.is_some() {
            return;
        }
        if let Err(e) = self.record(view.t, view.dx, view.u, view.v, view.sup_u, view.sup_v) {
            self.error = Some(e);
        }
    }
}

/// Trace of stored snapshots (spacing taken from each snapshot's grid).
pub fn compute_trace(
    trajectory: &[RadialField],
    params: &TestFunctionParams,
    model: &ModelParams,
    epsilon: f64,
    constants: Option<DataConstants>,
) -> Result<FunctionalTrace> {
    let mut recorder = TraceRecorder::new(model, params, epsilon, constants);
    for field in trajectory {
        let dx = if field.r.len() > 1 { field.r[1] - field.r[0] } else { 1.0 };
        let sup = |xs: &[f64]| {
            xs.iter().fold(0.0f64, |m, x| if x.is_finite() { m.max(x.abs()) } else { f64::INFINITY })
        };
        recorder.record(field.t, dx, &field.u, &field.v, sup(&field.u), sup(&field.v))?;
    }
    recorder.finish()
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    model: &ModelParams,
    params: &TestFunctionParams,
    epsilon: f64,
    constants: Option<DataConstants>,
    dx: f64,
    times: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    nl: Vec<f64>,
    ball: Vec<f64>,
    sup_u: Vec<f64>,
    sup_ut: Vec<f64>,
) -> FunctionalTrace {
    let m = times.len();
    let (c0, c1) = constants.map_or((0.0, 0.0), |c| (c.c0, c.c1));
    let nl_cum0 = cumulative_trapezoid(&times, &nl);
    let kf: Vec<f64> = times
        .iter()
        .zip(&f)
        .map(|(&t, &fv)| kernel_k(t, params, model) * fv)
        .collect();
    let k_cum = cumulative_trapezoid(&times, &kf);
    let df = derivative(&times, &f);
    let weak_residual = (0..m)
        .map(|k| {
            let gamma = gamma_coeffs(times[k], params, model).gamma;
            df[k] + gamma * f[k] + k_cum[k] - nl_cum0[k] - epsilon * c1
        })
        .collect();
    let index_t1 = times
        .iter()
        .position(|&t| (t - 1.0).abs() <= 1e-9);
    let mut nl_cum = vec![None; m];
    let mut l = vec![None; m];
    let mut h = vec![None; m];
    if let Some(i1) = index_t1 {
        for k in i1..m {
            let cum = nl_cum0[k] - nl_cum0[i1];
            let lk = cum / 8.0 + c0 * epsilon / 24.0;
            nl_cum[k] = Some(cum);
            l[k] = Some(lk);
            h[k] = Some(g[k] - lk);
        }
    }
    let p = model.p;
    let holder_ratio = (0..m)
        .map(|k| (g[k] > 0.0).then(|| nl[k] * ball[k].powf(p - 1.0) / g[k].powf(p)))
        .collect();
    FunctionalTrace {
        times,
        f,
        g,
        nl,
        nl_cum,
        nl_cum0,
        k_cum,
        ball,
        df,
        l,
        h,
        holder_ratio,
        weak_residual,
        sup_u,
        sup_ut,
        epsilon,
        constants,
        index_t1,
        dx,
    }
}

/// Minimum over the relevant window of `lhs - rhs` for one lower bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundMargin {
    pub name: &'static str,
    /// `None` when the bound has no samples (no `t = 1`, empty trace).
    pub margin: Option<f64>,
    /// Time of the minimum.
    pub t_min: Option<f64>,
    /// Size of the right-hand side, used to scale tolerances.
    pub scale: f64,
}

impl BoundMargin {
    fn from_iter(name: &'static str, scale: f64, it: impl Iterator<Item = (f64, f64)>) -> Self {
        let mut best: Option<(f64, f64)> = None;
        for (t, m) in it {
            if best.map_or(true, |(_, b)| m < b) {
                best = Some((t, m));
            }
        }
        Self {
            name,
            margin: best.map(|b| b.1),
            t_min: best.map(|b| b.0),
            scale,
        }
    }
}

/// The four lower bounds on `F` and `G`:
/// `F > 0` on `[0, T)`, `F >= eps C0/(4 eta)` on `[1, T)`, `G >= 0` on
/// `[0, T)` and `G >= eps C0/18` on `[1, T)`.
pub fn check_lower_bounds(
    trace: &FunctionalTrace,
    params: &TestFunctionParams,
    c0: f64,
    epsilon: f64,
) -> [BoundMargin; 4] {
    let from1 = trace.index_from(1.0);
    let fmax = trace.f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let gmax = trace.g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let f_floor = epsilon * c0 / (4.0 * params.eta);
    let g_floor = epsilon * c0 / 18.0;
    let pairs = |xs: &[f64], start: usize, floor: f64| -> Vec<(f64, f64)> {
        (start..trace.len()).map(|k| (trace.times[k], xs[k] - floor)).collect()
    };
    [
        BoundMargin::from_iter("F_positive", fmax, pairs(&trace.f, 0, 0.0).into_iter()),
        BoundMargin::from_iter("F_lower_bound", f_floor, pairs(&trace.f, from1, f_floor).into_iter()),
        BoundMargin::from_iter("G_nonnegative", gmax, pairs(&trace.g, 0, 0.0).into_iter()),
        BoundMargin::from_iter("G_lower_bound", g_floor, pairs(&trace.g, from1, g_floor).into_iter()),
    ]
}

/// `(t, ratio)` for every sample with `G > 0`.
pub fn holder_ratio(trace: &FunctionalTrace) -> Vec<(f64, f64)> {
    trace
        .times
        .iter()
        .zip(&trace.holder_ratio)
        .filter_map(|(&t, r)| r.map(|r| (t, r)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wave::{make_initial_data, run, SolverConfig};

    fn scenario() -> (ModelParams, TestFunctionParams) {
        let model = ModelParams::new(1, 0.5, 0.25, 2.0, 1.0).unwrap();
        let params = TestFunctionParams::new(&model, 1.0, None).unwrap();
        (model, params)
    }

    #[test]
    fn data_constants_match_direct_integration() {
        let (model, _) = scenario();
        let params = TestFunctionParams::new(&model, 1.0, Some(4.0)).unwrap();
        let data = make_initial_data(&model, 1.0, 1.0, 1.0).unwrap();
        let c = data_constants(&data, &params, &model).unwrap();
        // Midpoint rule on a very fine grid as an independent estimate.
        let m = 400_000;
        let h = 2.0 / m as f64;
        let mut direct = 0.0;
        for i in 0..m {
            let x: f64 = -1.0 + (i as f64 + 0.5) * h;
            let bump = (1.0 - x * x).powi(3);
            direct += 2.0 * bump * ((4.0 * x).exp() + (-4.0 * x).exp()) * h;
        }
        assert!((c.c0 - direct).abs() < 1e-8 * direct, "{} vs {direct}", c.c0);
        let expected_gap = (4.0 + (2.0 * 0.5 - 1.0) / 2.0 - 1.0) * c.int_f_phi;
        assert!((c.c1 - c.c0 - expected_gap).abs() < 1e-12 * c.c0);
    }

    #[test]
    fn g_zero_gives_c0_from_f_alone() {
        let (model, params) = scenario();
        let data = make_initial_data(&model, 1.0, 1.0, 0.0).unwrap();
        let c = data_constants(&data, &params, &model).unwrap();
        assert_eq!(c.c0, c.int_f_phi);
        assert_eq!(c.int_g_phi, 0.0);
    }

    #[test]
    fn zero_data_trace_is_zero() {
        let (model, params) = scenario();
        let data = InitialData::zero(&model);
        let mut rec = TraceRecorder::for_data(&data, &model, &params).unwrap();
        let config = SolverConfig {
            dx: 0.02,
            t_max: 2.0,
            ..SolverConfig::for_radius(1.0)
        };
        run(&data, &model, &config, &mut rec).unwrap();
        let trace = rec.finish().unwrap();
        assert!(trace.index_t1.is_some());
        assert!(trace.f.iter().chain(&trace.g).chain(&trace.nl).all(|&x| x == 0.0));
        assert!(trace.l.iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn initial_f_matches_quadrature_of_data() {
        let (model, params) = scenario();
        let data = make_initial_data(&model, 0.1, 1.0, 1.0).unwrap();
        let c = data_constants(&data, &params, &model).unwrap();
        let mut rec = TraceRecorder::for_data(&data, &model, &params).unwrap();
        let config = SolverConfig {
            t_max: 0.1,
            ..SolverConfig::for_radius(1.0)
        };
        run(&data, &model, &config, &mut rec).unwrap();
        let trace = rec.finish().unwrap();
        let f0 = 0.1 * c.int_f_phi;
        assert!(trace.f[0] > 0.0);
        assert!((trace.f[0] - f0).abs() < 1e-4 * f0, "{} vs {f0}", trace.f[0]);
        assert!((trace.g[0] - 0.1 * c.int_g_phi).abs() < 1e-4 * f0);
    }

    #[test]
    fn snapshot_trace_agrees_with_streamed_trace() {
        let (model, params) = scenario();
        let data = make_initial_data(&model, 0.1, 1.0, 1.0).unwrap();
        let config = SolverConfig {
            dx: 0.01,
            t_max: 2.0,
            snapshot_interval: 1e-9,
            ..SolverConfig::for_radius(1.0)
        };
        let mut rec = TraceRecorder::for_data(&data, &model, &params).unwrap();
        let report = run(&data, &model, &config, &mut rec).unwrap();
        let streamed = rec.finish().unwrap();
        let c = data_constants(&data, &params, &model).unwrap();
        let post = compute_trace(&report.trajectory, &params, &model, 0.1, Some(c)).unwrap();
        assert_eq!(streamed.len(), post.len());
        for k in 0..post.len() {
            assert!((streamed.f[k] - post.f[k]).abs() <= 1e-12 * streamed.f[k].abs());
            assert!((streamed.nl[k] - post.nl[k]).abs() <= 1e-12 * streamed.nl[k].abs().max(1e-300));
        }
    }

    #[test]
    fn holder_ratio_is_one_for_constant_velocity() {
        let (model, params) = scenario();
        // u_t = c on the ball |x| <= t + R, zero outside.
        let dx = 0.01f64;
        let t = 1.5f64;
        let len = ((t + 1.0) / dx).round() as usize + 1;
        let field = RadialField {
            t,
            r: (0..len + 5).map(|j| j as f64 * dx).collect(),
            u: vec![0.0; len + 5],
            v: (0..len + 5).map(|j| if j < len { 0.3 } else { 0.0 }).collect(),
            support_radius: t + 1.0,
        };
        let mut scaled = field.clone();
        scaled.v.iter_mut().for_each(|x| *x *= 7.0);
        for f in [field, scaled] {
            let trace = compute_trace(&[f], &params, &model, 0.0, None).unwrap();
            let ratio = trace.holder_ratio[0].unwrap();
            assert!((ratio - 1.0).abs() < 1e-12, "{ratio}");
        }
    }

    #[test]
    fn l_starts_at_its_data_value_and_increases() {
        let (model, params) = scenario();
        let data = make_initial_data(&model, 0.1, 1.0, 1.0).unwrap();
        let mut rec = TraceRecorder::for_data(&data, &model, &params).unwrap();
        let config = SolverConfig {
            t_max: 4.0,
            ..SolverConfig::for_radius(1.0)
        };
        run(&data, &model, &config, &mut rec).unwrap();
        let trace = rec.finish().unwrap();
        let i1 = trace.index_t1.unwrap();
        let c0 = trace.constants.unwrap().c0;
        assert_eq!(trace.l[i1], Some(c0 * 0.1 / 24.0));
        let l: Vec<f64> = trace.l.iter().flatten().copied().collect();
        assert!(l.windows(2).all(|w| w[1] >= w[0]));
        assert!(trace.nl.iter().all(|&x| x >= 0.0));
        let bounds = check_lower_bounds(&trace, &params, c0, 0.1);
        assert!(bounds.iter().all(|b| b.margin.unwrap() > 0.0), "{bounds:?}");
    }

    #[test]
    fn trace_csv_has_documented_header() {
        let (model, params) = scenario();
        let data = make_initial_data(&model, 0.1, 1.0, 1.0).unwrap();
        let mut rec = TraceRecorder::for_data(&data, &model, &params).unwrap();
        let config = SolverConfig {
            dx: 0.05,
            t_max: 1.2,
            ..SolverConfig::for_radius(1.0)
        };
        run(&data, &model, &config, &mut rec).unwrap();
        let trace = rec.finish().unwrap();
        let text = String::from_utf8(trace.to_csv().unwrap()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), TRACE_HEADER.join(","));
        assert_eq!(lines.count(), trace.len());
    }
}
