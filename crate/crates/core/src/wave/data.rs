use crate::error::{domain, Result};
use crate::params::ModelParams;

/// Radial shape of the initial data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// `(1 - r^2/R^2)^3` on `r < R`: non-negative, C^2 across the support edge.
    Bump,
}

impl Profile {
    pub fn eval(self, r: f64, radius: f64) -> f64 {
        match self {
            Profile::Bump => {
                let q = 1.0 - (r * r) / (radius * radius);
                if q > 0.0 {
                    q * q * q
                } else {
                    0.0
                }
            }
        }
    }

    /// Radial derivative of the profile.
    pub fn derivative(self, r: f64, radius: f64) -> f64 {
        match self {
            Profile::Bump => {
                let q = 1.0 - (r * r) / (radius * radius);
                if q > 0.0 {
                    -6.0 * r * q * q / (radius * radius)
                } else {
                    0.0
                }
            }
        }
    }
}

/// Initial data `(u, u_t)(x, 0) = eps (f, g)(x)` with `f = a_f P(|x|)` and
/// `g = a_g P(|x|)` for a profile `P` supported in `|x| < R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialData {
    pub profile: Profile,
    pub amplitude_f: f64,
    pub amplitude_g: f64,
    pub radius: f64,
    pub epsilon: f64,
}

impl InitialData {
    /// Unscaled displacement profile `f`.
    pub fn f(&self, r: f64) -> f64 {
        self.amplitude_f * self.profile.eval(r, self.radius)
    }

    /// Unscaled velocity profile `g`.
    pub fn g(&self, r: f64) -> f64 {
        self.amplitude_g * self.profile.eval(r, self.radius)
    }

    /// The default profile with `eps = 0`: the trivial solution, used to audit
    /// the solver for spurious forcing.
    pub fn zero(model: &ModelParams) -> Self {
        Self {
            profile: Profile::Bump,
            amplitude_f: 1.0,
            amplitude_g: 1.0,
            radius: model.radius,
            epsilon: 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.epsilon == 0.0 || (self.amplitude_f == 0.0 && self.amplitude_g == 0.0)
    }
}

/// Default bump data of size `epsilon` supported in `B(0, R)`.
pub fn make_initial_data(
    model: &ModelParams,
    epsilon: f64,
    amplitude_f: f64,
    amplitude_g: f64,
) -> Result<InitialData> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return domain(format!("data size eps = {epsilon} must be positive"));
    }
    if !(amplitude_f >= 0.0 && amplitude_g >= 0.0) {
        return domain("data amplitudes must be non-negative");
    }
    if amplitude_f == 0.0 && amplitude_g == 0.0 {
        return domain("f and g must not both vanish identically");
    }
    Ok(InitialData {
        profile: Profile::Bump,
        amplitude_f,
        amplitude_g,
        radius: model.radius,
        epsilon,
    })
}
