//! Quadrature helpers: cached Gauss–Legendre rules, composite panels and
//! radial trapezoid weights.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Mutex, OnceLock};

use gauss_quad::GaussLegendre;

/// Returns a process-wide cached Gauss–Legendre rule with `nodes` points.
pub fn gauss_legendre(nodes: usize) -> &'static GaussLegendre {
    static CACHE: OnceLock<Mutex<HashMap<usize, &'static GaussLegendre>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("quadrature cache poisoned");
    map.entry(nodes).or_insert_with(|| {
        let degree = NonZeroUsize::new(nodes.max(1)).expect("nonzero");
        Box::leak(Box::new(GaussLegendre::new(degree)))
    })
}

/// Composite Gauss–Legendre over `panels` equal subintervals of `[a, b]`.
pub fn composite<F: FnMut(f64) -> f64>(
    a: f64,
    b: f64,
    panels: usize,
    nodes: usize,
    mut f: F,
) -> f64 {
    let rule = gauss_legendre(nodes);
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let lo = a + k as f64 * h;
            rule.integrate(lo, lo + h, &mut f)
        })
        .sum()
}

/// Gauss–Legendre with the node count doubled from `start` until two
/// successive values agree to `rel_tol`. Returns the last value.
pub fn doubling<F: FnMut(f64) -> f64>(
    a: f64,
    b: f64,
    start: usize,
    max_nodes: usize,
    rel_tol: f64,
    mut f: F,
) -> f64 {
    let mut nodes = start;
    let mut prev = gauss_legendre(nodes).integrate(a, b, &mut f);
    while nodes < max_nodes {
        nodes *= 2;
        let next = gauss_legendre(nodes).integrate(a, b, &mut f);
        if (next - prev).abs() <= rel_tol * next.abs() {
            return next;
        }
        prev = next;
    }
    prev
}

/// Surface area of the unit sphere `S^{n-1}` in `R^n` (`omega_1 = 2` counts
/// the two points of `S^0`).
pub fn sphere_area(n: usize) -> f64 {
    match n {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        _ => 2.0 * std::f64::consts::PI * sphere_area(n - 2) / (n - 2) as f64,
    }
}

/// Trapezoid weights for `∫_{R^n} h(|x|) dx = omega_n ∫_0^∞ h(r) r^{n-1} dr`
/// on the grid `r_j = j dx`, `j = 0..len`. The integrand is assumed to vanish
/// beyond the last node; the first node gets half weight.
pub fn radial_weights(n: usize, dx: f64, len: usize) -> Vec<f64> {
    let omega = sphere_area(n);
    (0..len)
        .map(|j| {
            let r = j as f64 * dx;
            let half = if j == 0 { 0.5 } else { 1.0 };
            half * omega * r.powi(n as i32 - 1) * dx
        })
        .collect()
}

/// Cumulative trapezoid integral of `values` sampled at `times`.
pub fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    for k in 0..times.len() {
        if k > 0 {
            acc += 0.5 * (values[k] + values[k - 1]) * (times[k] - times[k - 1]);
        }
        out.push(acc);
    }
    out
}

/// Derivative of a sampled series: centered differences inside, second-order
/// one-sided stencils at both ends.
pub fn derivative(times: &[f64], values: &[f64]) -> Vec<f64> {
    let m = times.len();
    match m {
        0 => return Vec::new(),
        1 => return vec![0.0],
        2 => {
            let s = (values[1] - values[0]) / (times[1] - times[0]);
            return vec![s, s];
        }
        _ => {}
    }
    let mut out = vec![0.0; m];
    for k in 1..m - 1 {
        let (h0, h1) = (times[k] - times[k - 1], times[k + 1] - times[k]);
        // Non-uniform three-point centered stencil.
        out[k] = (values[k + 1] * h0 * h0 - values[k - 1] * h1 * h1 + values[k] * (h1 * h1 - h0 * h0))
            / (h0 * h1 * (h0 + h1));
    }
    let (h1, h2) = (times[1] - times[0], times[2] - times[1]);
    out[0] = -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * values[0] + (h1 + h2) / (h1 * h2) * values[1]
        - h1 / (h2 * (h1 + h2)) * values[2];
    let (h1, h2) = (times[m - 2] - times[m - 3], times[m - 1] - times[m - 2]);
    out[m - 1] = h2 / (h1 * (h1 + h2)) * values[m - 3] - (h1 + h2) / (h1 * h2) * values[m - 2]
        + (2.0 * h2 + h1) / (h2 * (h1 + h2)) * values[m - 1];
    out
}
