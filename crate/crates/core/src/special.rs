//! Closed-form and quadrature-backed functions of the test-function
//! construction.
//!
//! Everything here is a pure function of its arguments. Functions that can
//! leave their domain return [`Result`]; the rest are total on their stated
//! domain and simply evaluate.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::params::{ModelParams, TestFunctionParams};
use crate::quadrature::{composite, doubling, sphere_area};

/// `p_Gla(n) = 1 + 2/(n - 1)` for an effective dimension `n > 1`.
pub fn glassey_exponent(n_eff: f64) -> Result<f64> {
    if !(n_eff > 1.0) {
        return domain(format!("Glassey exponent undefined for n = {n_eff} <= 1"));
    }
    Ok(1.0 + 2.0 / (n_eff - 1.0))
}

/// `(mu - 1)^2 - 4 nu^2`.
pub fn discriminant(mu: f64, nu_sq: f64) -> f64 {
    (mu - 1.0) * (mu - 1.0) - 4.0 * nu_sq
}

/// Coefficients seen by `V = (1+t)^alpha U` when `U` solves the linear
/// equation with `(mu, nu^2)`.
pub fn transform_coefficients(mu: f64, nu_sq: f64, alpha: f64) -> (f64, f64) {
    (mu - 2.0 * alpha, alpha * alpha - (mu - 1.0) * alpha + nu_sq)
}

fn check_phi_args(r: f64, eta: f64, n: usize) -> Result<()> {
    if !(r >= 0.0) {
        return domain(format!("radial argument {r} must be non-negative"));
    }
    if !(eta > 0.0) {
        return domain(format!("decay rate eta = {eta} must be positive"));
    }
    if n == 0 {
        return domain("dimension must be at least 1");
    }
    Ok(())
}

/// `e^{-eta r} phi^eta(r)`: bounded for all `r` and safe to tabulate on long grids.
pub fn phi_eta_scaled(r: f64, eta: f64, n: usize) -> Result<f64> {
    check_phi_args(r, eta, n)?;
    let z = eta * r;
    if n == 1 {
        return Ok(1.0 + (-2.0 * z).exp());
    }
    if z == 0.0 {
        return Ok(sphere_area(n));
    }
    // Polar reduction: |S^{n-2}| ∫_0^π e^{z cosθ} sin^{n-2}θ dθ, with the
    // factor e^{z} pulled out and cosθ - 1 written as -2 sin^2(θ/2).
    let k = (n - 2) as i32;
    let integral = doubling(0.0, PI, 64, 1 << 16, 1e-12, |th: f64| {
        let s = (0.5 * th).sin();
        (-2.0 * z * s * s).exp() * th.sin().powi(k)
    });
    Ok(sphere_area(n - 1) * integral)
}

/// `phi^eta(x)` at `|x| = r`: `e^{eta x} + e^{-eta x}` in one dimension and the
/// sphere average `∫_{S^{n-1}} e^{eta x·ω} dω` otherwise.
pub fn phi_eta(r: f64, eta: f64, n: usize) -> Result<f64> {
    Ok((eta * r).exp() * phi_eta_scaled(r, eta, n)?)
}

/// `(1+t)^{d/2} e^{-eta t}`.
pub fn rho_d_eta(t: f64, d: f64, eta: f64) -> f64 {
    (1.0 + t).powf(0.5 * d) * (-eta * t).exp()
}

/// `(rho, rho', rho'')` of the temporal factor, from its closed form.
pub fn rho_derivatives(t: f64, d: f64, eta: f64) -> (f64, f64, f64) {
    let s = 1.0 + t;
    let rho = rho_d_eta(t, d, eta);
    let a = 0.5 * d / s - eta;
    (rho, a * rho, (a * a - 0.5 * d / (s * s)) * rho)
}

pub fn psi_d_eta(r: f64, t: f64, params: &TestFunctionParams, n: usize) -> Result<f64> {
    if !(t >= 0.0) {
        return domain(format!("time {t} must be non-negative"));
    }
    Ok(rho_d_eta(t, params.d, params.eta) * phi_eta(r, params.eta, n)?)
}

/// The kernel `K(t) = (4nu^2 + (d-2mu)(d-2)) / (4(1+t)^2) - eta (d-mu)/(1+t)`.
pub fn kernel_k(t: f64, params: &TestFunctionParams, model: &ModelParams) -> f64 {
    let s = 1.0 + t;
    let (a, b) = kernel_coefficients(params, model);
    a / (s * s) - b / s
}

/// `(A, B)` with `K(t) = A/(1+t)^2 - B/(1+t)`.
pub fn kernel_coefficients(params: &TestFunctionParams, model: &ModelParams) -> (f64, f64) {
    let d = params.d;
    let mu = model.mu;
    (
        (4.0 * model.nu_sq + (d - 2.0 * mu) * (d - 2.0)) / 4.0,
        params.eta * (d - mu),
    )
}

/// The stationary point `t* = 2A/B - 1` of the kernel when it lies in `t >= 0`.
pub fn kernel_stationary_point(params: &TestFunctionParams, model: &ModelParams) -> Option<f64> {
    let (a, b) = kernel_coefficients(params, model);
    if a == 0.0 || b == 0.0 {
        return None;
    }
    let t = 2.0 * a / b - 1.0;
    (t >= 0.0 && t.is_finite()).then_some(t)
}

/// `e^{t} K_alpha(t)` from the integral representation.
pub fn bessel_k_scaled(alpha: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return domain(format!("K_alpha(t) requires t > 0, got {t}"));
    }
    let alpha = alpha.abs();
    // Cut the tail where e^{-t(cosh ζ - 1) + alpha ζ} < e^{-50}.
    let excess = |z: f64| t * (z.cosh() - 1.0) - alpha * z - 50.0;
    let mut hi = 1.0;
    while excess(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let panels = 32.max((hi * t.sqrt() * 4.0).ceil() as usize).min(4096);
    Ok(composite(0.0, hi, panels, 20, |z| {
        // cosh ζ - 1 = 2 sinh^2(ζ/2)
        let s = (0.5 * z).sinh();
        (-2.0 * t * s * s).exp() * (alpha * z).cosh()
    }))
}

/// Modified Bessel function of the second kind,
/// `K_alpha(t) = ∫_0^∞ exp(-t cosh ζ) cosh(alpha ζ) dζ`.
pub fn bessel_k(alpha: f64, t: f64) -> Result<f64> {
    Ok((-t).exp() * bessel_k_scaled(alpha, t)?)
}

/// Classical temporal factor `(eta(1+t))^{(mu+1)/2} K_{sqrt(delta)/2}(eta(1+t))`,
/// which only exists for a non-negative discriminant.
pub fn xi_eta(t: f64, eta: f64, model: &ModelParams) -> Result<f64> {
    let delta = model.delta();
    if delta < 0.0 {
        return Err(Error::UnsupportedRegime(format!(
            "delta = {delta} < 0: the Bessel index sqrt(delta)/2 is not real"
        )));
    }
    if !(t > -1.0) {
        return domain(format!("time {t} must exceed -1"));
    }
    if !(eta > 0.0) {
        return domain(format!("decay rate eta = {eta} must be positive"));
    }
    let z = eta * (1.0 + t);
    Ok(z.powf(0.5 * (model.mu + 1.0)) * bessel_k(0.5 * delta.sqrt(), z)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaCoeffs {
    /// `2 eta + (mu - d)/(1+t)`
    pub gamma: f64,
    /// `eta + (2mu - d)/(2(1+t))`
    pub gamma1: f64,
    /// Integrating factor `e^{2 eta t}(1+t)^{mu-d}`.
    pub integrating_factor: f64,
}

pub fn gamma_coeffs(t: f64, params: &TestFunctionParams, model: &ModelParams) -> GammaCoeffs {
    let s = 1.0 + t;
    let (d, eta, mu) = (params.d, params.eta, model.mu);
    GammaCoeffs {
        gamma: 2.0 * eta + (mu - d) / s,
        gamma1: eta + (2.0 * mu - d) / (2.0 * s),
        integrating_factor: (2.0 * eta * t).exp() * s.powf(mu - d),
    }
}

/// Coefficient of the `(G + gamma1 F)` term in the velocity equation,
/// `eta/2 - (mu + d)/(4(1+t))`.
pub fn sigma_coefficient(t: f64, params: &TestFunctionParams, model: &ModelParams) -> f64 {
    0.5 * params.eta - (model.mu + params.d) / (4.0 * (1.0 + t))
}

/// `(lambda(eta, t), Sigma(t))` in their published closed form:
/// `lambda = eta^2/2 + (2d-mu) eta/(4(1+t)) - nu^2/(1+t)^2 + (d-2mu)(3d-mu-8)/(8(1+t)^2)`
/// and `Sigma = (eta/2 - (mu+d)/(4(1+t))) (G + gamma1 F)`.
///
/// See [`lambda_from_definitions`] for the value obtained by expanding the
/// definitions directly; the two differ by `(d-2mu)(d-2)/(2(1+t)^2)`.
pub fn lambda_sigma(
    t: f64,
    params: &TestFunctionParams,
    model: &ModelParams,
    f: f64,
    g: f64,
) -> (f64, f64) {
    let s = 1.0 + t;
    let (d, eta, mu) = (params.d, params.eta, model.mu);
    let lambda = 0.5 * eta * eta + (2.0 * d - mu) * eta / (4.0 * s) - model.nu_sq / (s * s)
        + (d - 2.0 * mu) * (3.0 * d - mu - 8.0) / (8.0 * s * s);
    let gamma1 = gamma_coeffs(t, params, model).gamma1;
    (lambda, sigma_coefficient(t, params, model) * (g + gamma1 * f))
}

/// Coefficient of `F` in `G' + (3 gamma/4) G = NL + lambda F + Sigma`, computed
/// from `[(eta - d/(2(1+t))) gamma1 + (2mu-d)/(2(1+t)^2) - K] - c gamma1` with
/// `c` the [`sigma_coefficient`].
pub fn lambda_from_definitions(t: f64, params: &TestFunctionParams, model: &ModelParams) -> f64 {
    let s = 1.0 + t;
    let (d, eta, mu) = (params.d, params.eta, model.mu);
    let gc = gamma_coeffs(t, params, model);
    let bracket = (eta - d / (2.0 * s)) * gc.gamma1 + (2.0 * mu - d) / (2.0 * s * s)
        - kernel_k(t, params, model);
    bracket - sigma_coefficient(t, params, model) * gc.gamma1
}

/// `2(p-1)/(2 - (n+d-1)(p-1))`, the exponent in `T_eps <= C eps^{-exponent}`.
pub fn lifespan_exponent(model: &ModelParams, d: f64) -> Result<f64> {
    let upper = model.d_upper();
    if !(d > model.mu && d < upper) {
        return domain(format!(
            "d = {d} must lie in (mu, (p+1)/(p-1) - n) = ({}, {upper})",
            model.mu
        ));
    }
    let theta = 1.0 - (model.n as f64 + d - 1.0) * (model.p - 1.0) / 2.0;
    Ok((model.p - 1.0) / theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn k_half(t: f64) -> f64 {
        (PI / (2.0 * t)).sqrt() * (-t).exp()
    }

    #[test]
    fn glassey_examples() {
        assert_eq!(glassey_exponent(2.0).unwrap(), 3.0);
        assert_eq!(glassey_exponent(3.0).unwrap(), 2.0);
        assert_eq!(glassey_exponent(1.5).unwrap(), 5.0);
        assert!(glassey_exponent(1.0).is_err());
        assert!(glassey_exponent(0.5).is_err());
    }

    #[test]
    fn discriminant_examples() {
        assert_eq!(discriminant(1.0, 0.0), 0.0);
        assert_eq!(discriminant(0.5, 0.25), -0.75);
        assert_eq!(discriminant(3.0, 1.0), 0.0);
    }

    #[test]
    fn transform_examples() {
        assert_eq!(transform_coefficients(2.0, 0.5, 0.0), (2.0, 0.5));
        assert_eq!(transform_coefficients(2.0, 0.0, 1.0), (0.0, 0.0));
        let (m, n) = transform_coefficients(0.5, 0.25, 0.3);
        assert!((m + 0.1).abs() < 1e-15 && (n - 0.49).abs() < 1e-15);
        assert!((discriminant(m, n) + 0.75).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn transform_preserves_discriminant(mu in 0.0..10.0f64, nu_sq in 0.0..10.0f64, alpha in -5.0..5.0f64) {
            let (m, n) = transform_coefficients(mu, nu_sq, alpha);
            prop_assert!((discriminant(m, n) - discriminant(mu, nu_sq)).abs() <= 1e-13 * (1.0 + mu * mu + nu_sq + alpha * alpha));
        }

        #[test]
        fn phi_is_positive_and_nondecreasing(r in 0.0..5.0f64, dr in 0.0..1.0f64, eta in 0.1..6.0f64, n in 1usize..5) {
            let a = phi_eta(r, eta, n).unwrap();
            let b = phi_eta(r + dr, eta, n).unwrap();
            prop_assert!(a > 0.0);
            prop_assert!(b >= a * (1.0 - 1e-13));
        }
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi_eta(0.0, 3.7, 1).unwrap(), 2.0);
        assert!(rel(phi_eta(0.0, 1.0, 3).unwrap(), 4.0 * PI) < 1e-14);
        assert!(rel(phi_eta(1e-9, 1.0, 3).unwrap(), 4.0 * PI) < 1e-12);
        let v = phi_eta(1.0, 1.0, 3).unwrap();
        assert!(rel(v, 4.0 * PI * 1f64.sinh()) < 1e-10);
        assert!((v - 14.768).abs() < 1e-3);
        assert!(phi_eta(-0.1, 1.0, 2).is_err());
        assert!(phi_eta(0.1, 0.0, 2).is_err());
    }

    #[test]
    fn phi_matches_closed_forms_in_three_dimensions() {
        // Independent oracle: 4π sinh(z)/z.
        for &(r, eta) in &[(0.3, 0.5), (2.0, 3.0), (10.0, 6.0), (40.0, 6.0)] {
            let z: f64 = eta * r;
            let scaled_oracle = 2.0 * PI * (1.0 - (-2.0 * z).exp()) / z;
            assert!(rel(phi_eta_scaled(r, eta, 3).unwrap(), scaled_oracle) < 1e-12, "r={r} eta={eta}");
        }
    }

    #[test]
    fn phi_in_two_dimensions_is_a_bessel_i0() {
        // 2π I_0(z) from its power series.
        let z: f64 = 1.7;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            term *= (0.5 * z) * (0.5 * z) / (k * k) as f64;
            sum += term;
        }
        assert!(rel(phi_eta(1.7, 1.0, 2).unwrap(), 2.0 * PI * sum) < 1e-13);
    }

    #[test]
    fn rho_and_psi_examples() {
        assert_eq!(rho_d_eta(0.0, 3.3, 1.2), 1.0);
        assert!(rel(rho_d_eta(1.0, 2.0, 1.0), 2.0 * (-1f64).exp()) < 1e-15);
        assert!((rho_d_eta(1.0, 2.0, 1.0) - 0.7358).abs() < 1e-4);
        assert!(rel(rho_d_eta(3.0, 4.0, 2.0), 16.0 * (-6f64).exp()) < 1e-15);
        assert!((rho_d_eta(3.0, 4.0, 2.0) - 0.03966).abs() < 1e-5);

        let m = ModelParams::new(1, 0.5, 0.25, 2.0, 1.0).unwrap();
        let tf = TestFunctionParams::new(&m, 2.0, Some(1.0)).unwrap();
        assert_eq!(psi_d_eta(0.0, 0.0, &tf, 1).unwrap(), 2.0);
        let v = psi_d_eta(0.0, 1.0, &tf, 1).unwrap();
        assert!(rel(v, 4.0 * (-1f64).exp()) < 1e-15);
        assert!((v - 1.4715).abs() < 1e-4);
        assert!(psi_d_eta(0.0, 10.0, &tf, 1).unwrap() < v);
    }

    #[test]
    fn rho_derivatives_match_finite_differences() {
        let (d, eta, t, h) = (1.3, 4.0, 0.7, 1e-4);
        let (_, d1, d2) = rho_derivatives(t, d, eta);
        let fd1 = (rho_d_eta(t + h, d, eta) - rho_d_eta(t - h, d, eta)) / (2.0 * h);
        let fd2 = (rho_d_eta(t + h, d, eta) - 2.0 * rho_d_eta(t, d, eta) + rho_d_eta(t - h, d, eta)) / (h * h);
        assert!(rel(d1, fd1) < 1e-7);
        assert!(rel(d2, fd2) < 1e-5);
    }

    #[test]
    fn kernel_examples() {
        let m = ModelParams::new(1, 1.0, 1.0, 2.0, 1.0).unwrap();
        let tf = TestFunctionParams::new(&m, 2.0, Some(4.0)).unwrap();
        assert_eq!(kernel_k(0.0, &tf, &m), -3.0);
        let tf = TestFunctionParams::new(&m, 2.0, Some(1.0)).unwrap();
        assert_eq!(kernel_k(0.0, &tf, &m), 0.0);
        let tf = TestFunctionParams::new(&m, 2.0, Some(2.0)).unwrap();
        let far = kernel_k(1e8, &tf, &m);
        assert!(far < 0.0 && far > -1e-7);
    }

    #[test]
    fn bessel_half_order_closed_form() {
        assert!(rel(bessel_k(0.5, 1.0).unwrap(), k_half(1.0)) < 1e-12);
        assert!((bessel_k(0.5, 1.0).unwrap() - 0.46107).abs() < 1e-5);
        assert!((bessel_k(0.5, 2.0).unwrap() - 0.11993).abs() < 1e-5);
        for k in 0..100 {
            let t = 0.1 * (500f64).powf(k as f64 / 99.0);
            assert!(rel(bessel_k(0.5, t).unwrap(), k_half(t)) < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn bessel_symmetry_and_domain() {
        assert_eq!(bessel_k(0.3, 1.0).unwrap(), bessel_k(-0.3, 1.0).unwrap());
        assert!(bessel_k(1.0, 0.0).is_err());
        assert!(bessel_k(1.0, -1.0).is_err());
    }

    #[test]
    fn bessel_three_halves_closed_form() {
        // K_{3/2}(t) = sqrt(π/(2t)) e^{-t} (1 + 1/t)
        for &t in &[0.1, 0.7, 3.0, 25.0, 50.0] {
            let exact = k_half(t) * (1.0 + 1.0 / t);
            assert!(rel(bessel_k(1.5, t).unwrap(), exact) < 1e-10, "t = {t}");
        }
        // K_5 at a point where the integrand peaks away from zero.
        let v = bessel_k(5.0, 0.1).unwrap();
        assert!(v > 0.0 && v.is_finite());
    }

    #[test]
    fn xi_examples() {
        let m = ModelParams::new(1, 2.0, 0.0, 2.0, 1.0).unwrap();
        assert!(rel(xi_eta(0.0, 1.0, &m).unwrap(), k_half(1.0)) < 1e-12);
        let neg = ModelParams::new(1, 0.5, 0.25, 2.0, 1.0).unwrap();
        assert!(matches!(xi_eta(0.0, 1.0, &neg), Err(Error::UnsupportedRegime(_))));
    }

    #[test]
    fn xi_closed_form_solves_its_ode() {
        // delta = 1: xi = sqrt(π/2) s e^{-s} with analytic derivatives.
        let c = (PI / 2.0).sqrt();
        let m = ModelParams::new(1, 2.0, 0.0, 2.0, 1.0).unwrap();
        for k in 0..50 {
            let t = 0.2 * k as f64;
            let s = 1.0 + t;
            let xi = c * s * (-s).exp();
            assert!(rel(xi_eta(t, 1.0, &m).unwrap(), xi) < 1e-12);
            let d1 = c * (1.0 - s) * (-s).exp();
            let d2 = c * (s - 2.0) * (-s).exp();
            let res = d2 - (m.mu / s) * d1 + ((m.mu + m.nu_sq) / (s * s) - 1.0) * xi;
            assert!(res.abs() <= 1e-6 * xi.abs());
        }
    }

    #[test]
    fn gamma_examples() {
        let m = ModelParams::new(1, 1.0, 1.0, 2.0, 1.0).unwrap();
        let tf = TestFunctionParams::new(&m, 2.0, Some(4.0)).unwrap();
        let g = gamma_coeffs(0.0, &tf, &m);
        assert_eq!((g.gamma, g.gamma1, g.integrating_factor), (7.0, 4.0, 1.0));
        let g = gamma_coeffs(1e9, &tf, &m);
        assert!((g.gamma - 8.0).abs() < 1e-8 && (g.gamma1 - 4.0).abs() < 1e-8);
    }

    #[test]
    fn gamma_stays_between_eta_and_two_eta() {
        let m = ModelParams::new(1, 0.5, 0.25, 2.0, 1.0).unwrap();
        let tf = TestFunctionParams::new(&m, 1.0, None).unwrap();
        for k in 0..2000 {
            let t = 0.01 * k as f64;
            let g = gamma_coeffs(t, &tf, &m).gamma;
            assert!(tf.eta <= g && g <= 2.0 * tf.eta);
        }
    }

    #[test]
    fn lambda_examples() {
        let m = ModelParams::new(1, 1.0, 1.0, 2.0, 1.0).unwrap();
        let tf = TestFunctionParams::new(&m, 2.0, Some(4.0)).unwrap();
        let (l, _) = lambda_sigma(0.0, &tf, &m, 1.0, 1.0);
        assert!((l - 10.0).abs() < 1e-14);
        assert!((lambda_from_definitions(0.0, &tf, &m) - 10.0).abs() < 1e-13);
        let (l, _) = lambda_sigma(1e9, &tf, &m, 0.0, 0.0);
        assert!((l - 8.0).abs() < 1e-7);
    }

    #[test]
    fn lambda_lower_bound_on_grid() {
        let m = ModelParams::new(1, 0.5, 0.25, 2.0, 1.0).unwrap();
        let d = 1.0;
        let eta = 2.0 * (d + m.nu() + 1.0);
        let tf = TestFunctionParams::new(&m, d, Some(eta)).unwrap();
        for k in 0..1000 {
            let t = 0.05 * k as f64;
            let (l, _) = lambda_sigma(t, &tf, &m, 0.0, 0.0);
            let bound = 0.5 * eta * eta - (d + m.nu() + 1.0).powi(2);
            assert!(l >= bound && bound >= 0.25 * eta * eta);
        }
    }

    #[test]
    fn published_lambda_differs_from_definitions_by_known_term() {
        let m = ModelParams::new(1, 0.5, 0.25, 2.0, 1.0).unwrap();
        for &d in &[0.7, 1.0, 2.0, 3.0] {
            let tf = TestFunctionParams::new(&m, d, Some(6.0)).unwrap();
            for &t in &[0.0, 0.5, 3.0] {
                let s: f64 = 1.0 + t;
                let (closed, _) = lambda_sigma(t, &tf, &m, 0.0, 0.0);
                let direct = lambda_from_definitions(t, &tf, &m);
                let gap = (d - 2.0 * m.mu) * (d - 2.0) / (2.0 * s * s);
                assert!((closed - direct - gap).abs() < 1e-12, "d={d} t={t}");
            }
        }
    }

    #[test]
    fn lifespan_exponent_examples() {
        let m = ModelParams::new(1, 0.5, 0.25, 2.0, 1.0).unwrap();
        assert!((lifespan_exponent(&m, 1.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((lifespan_exponent(&m, 0.6).unwrap() - 2.0 / 1.4).abs() < 1e-14);
        assert!(lifespan_exponent(&m, 1.999_999).unwrap() > 1e5);
        assert!(lifespan_exponent(&m, 2.0).is_err());
        assert!(lifespan_exponent(&m, 0.5).is_err());
    }
}
