//! Physical and test-function parameters with their derived thresholds.

use crate::error::{domain, Error, Result};
use crate::special::{discriminant, glassey_exponent};

/// Sign of the discriminant `(mu - 1)^2 - 4 nu^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Negative,
    Zero,
    Positive,
}

impl Regime {
    pub fn of(delta: f64) -> Self {
        if delta < 0.0 {
            Regime::Negative
        } else if delta > 0.0 {
            Regime::Positive
        } else {
            Regime::Zero
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Negative => "negative",
            Regime::Zero => "zero",
            Regime::Positive => "positive",
        }
    }
}

/// Coefficients of `u_tt - Δu + mu/(1+t) u_t + nu^2/(1+t)^2 u = |u_t|^p`
/// together with the support radius of the initial data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub n: usize,
    pub mu: f64,
    pub nu_sq: f64,
    pub p: f64,
    pub radius: f64,
}

impl ModelParams {
    pub fn new(n: usize, mu: f64, nu_sq: f64, p: f64, radius: f64) -> Result<Self> {
        if n < 1 {
            return domain("spatial dimension must be at least 1");
        }
        if !(mu >= 0.0) || !mu.is_finite() {
            return domain(format!("damping mu = {mu} must be finite and non-negative"));
        }
        if !(nu_sq >= 0.0) || !nu_sq.is_finite() {
            return domain(format!("mass nu^2 = {nu_sq} must be finite and non-negative"));
        }
        if !(p > 1.0) || !p.is_finite() {
            return domain(format!("exponent p = {p} must exceed 1"));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return domain(format!("support radius R = {radius} must be positive"));
        }
        Ok(Self { n, mu, nu_sq, p, radius })
    }

    pub fn delta(&self) -> f64 {
        discriminant(self.mu, self.nu_sq)
    }

    pub fn nu(&self) -> f64 {
        self.nu_sq.sqrt()
    }

    pub fn regime(&self) -> Regime {
        Regime::of(self.delta())
    }

    /// Glassey exponent in the shifted dimension `n + mu`.
    pub fn critical_exponent(&self) -> Result<f64> {
        glassey_exponent(self.n as f64 + self.mu)
    }

    /// Whether `1 < p < p_Gla(n + mu)`; dimensions `n + mu <= 1` admit every `p`.
    pub fn is_subcritical(&self) -> bool {
        match self.critical_exponent() {
            Ok(pc) => self.p < pc,
            Err(_) => true,
        }
    }

    /// Right end of the admissible shift interval, `(p+1)/(p-1) - n`.
    pub fn d_upper(&self) -> f64 {
        (self.p + 1.0) / (self.p - 1.0) - self.n as f64
    }

    /// Default shift parameter: a tenth of the way into `(mu, d_upper)`.
    pub fn default_d(&self) -> f64 {
        self.mu + 0.1 * (self.d_upper() - self.mu)
    }
}

/// Threshold values for the decay rate `eta`, all functions of `(d, mu, nu)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// `(4 nu^2 + (d - 2mu)(d - 2)) / (4 (d - mu))`, the value of `eta` at which
    /// the kernel vanishes at `t = 0`.
    pub sign_ratio: f64,
    pub eta_tilde: f64,
    pub eta_0: f64,
    /// Maximum of every lower bound used for the velocity estimates.
    pub eta_1: f64,
    /// `max(2d + 2mu + 2nu + 2, sign_ratio)`.
    pub eta_1_stated: f64,
    /// `max(eta_0, 2(d + nu + 1), d + mu)`.
    pub eta_1_constructed: f64,
}

impl Thresholds {
    pub fn new(d: f64, model: &ModelParams) -> Result<Self> {
        if !(d > model.mu) {
            return domain(format!("shift d = {d} must exceed mu = {}", model.mu));
        }
        let (mu, nu) = (model.mu, model.nu());
        let sign_ratio = (4.0 * model.nu_sq + (d - 2.0 * mu) * (d - 2.0)) / (4.0 * (d - mu));
        let eta_tilde = sign_ratio.max(2.0);
        let eta_0 = sign_ratio.max(d + 2.0);
        let eta_1_stated = (2.0 * d + 2.0 * mu + 2.0 * nu + 2.0).max(sign_ratio);
        let eta_1_constructed = eta_0.max(2.0 * (d + nu + 1.0)).max(d + mu);
        let eta_1 = eta_1_stated.max(eta_1_constructed);
        Ok(Self {
            sign_ratio,
            eta_tilde,
            eta_0,
            eta_1,
            eta_1_stated,
            eta_1_constructed,
        })
    }
}

/// Shift `d` and decay rate `eta` of the test function
/// `psi(x, t) = (1+t)^{d/2} e^{-eta t} phi^eta(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFunctionParams {
    pub d: f64,
    pub eta: f64,
    pub thresholds: Thresholds,
    /// `1 - (n + d - 1)(p - 1)/2`.
    pub theta: f64,
}

impl TestFunctionParams {
    /// Builds the parameters; `eta = None` selects `eta_1`.
    pub fn new(model: &ModelParams, d: f64, eta: Option<f64>) -> Result<Self> {
        let thresholds = Thresholds::new(d, model)?;
        let eta = eta.unwrap_or(thresholds.eta_1);
        if !(eta > 0.0) || !eta.is_finite() {
            return domain(format!("decay rate eta = {eta} must be positive"));
        }
        let theta = 1.0 - (model.n as f64 + d - 1.0) * (model.p - 1.0) / 2.0;
        Ok(Self { d, eta, thresholds, theta })
    }

    pub fn eta_at_least_eta_0(&self) -> bool {
        self.eta >= self.thresholds.eta_0
    }

    pub fn eta_at_least_eta_1(&self) -> bool {
        self.eta >= self.thresholds.eta_1
    }

    /// Fails unless `mu < d < (p+1)/(p-1) - n`, i.e. unless `theta > 0`.
    pub fn require_positive_theta(&self, model: &ModelParams) -> Result<()> {
        if self.theta > 0.0 && self.d < model.d_upper() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "theta = {} is not positive: d = {} must lie below (p+1)/(p-1) - n = {}",
                self.theta,
                self.d,
                model.d_upper()
            )))
        }
    }
}
