//! Mish, Hardswish, and GELU scalar activations with analytic derivatives.
//!
//! All three are total functions of a real argument and vanish at the origin.
//! GELU uses the exact erf form; the tanh approximation is available
//! separately as [`gelu_tanh`].

use serde::{Deserialize, Serialize};

/// Activation selector, matching the CLI/config names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Mish,
    Hardswish,
    Gelu,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 3] = [
        ActivationKind::Mish,
        ActivationKind::Hardswish,
        ActivationKind::Gelu,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Mish => "mish",
            ActivationKind::Hardswish => "hardswish",
            ActivationKind::Gelu => "gelu",
        }
    }
}

impl std::str::FromStr for ActivationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mish" => Ok(ActivationKind::Mish),
            "hardswish" => Ok(ActivationKind::Hardswish),
            "gelu" => Ok(ActivationKind::Gelu),
            other => Err(format!(
                "unknown activation {other:?} (expected mish, hardswish, or gelu)"
            )),
        }
    }
}

impl std::fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// ln(1 + e^x), branched so large positive x does not overflow e^x.
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        // ln(1+e^x) = x + ln(1+e^-x)
        x + (-x).exp().ln_1p()
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic sigmoid, the derivative of softplus.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// x · tanh(softplus(x))
pub fn mish(x: f64) -> f64 {
    x * softplus(x).tanh()
}

/// d/dx mish(x) = tanh(sp) + x · (1 − tanh²(sp)) · sigmoid(x)
pub fn mish_derivative(x: f64) -> f64 {
    let t = softplus(x).tanh();
    t + x * (1.0 - t * t) * sigmoid(x)
}

/// x · relu6(x + 3) / 6, where relu6(t) = min(max(t, 0), 6).
pub fn hardswish(x: f64) -> f64 {
    if x <= -3.0 {
        0.0
    } else if x >= 3.0 {
        x
    } else {
        x * (x + 3.0) / 6.0
    }
}

/// Piecewise derivative of hardswish; the kinks at x = ±3 take the
/// right-hand branch.
pub fn hardswish_derivative(x: f64) -> f64 {
    if x < -3.0 {
        0.0
    } else if x >= 3.0 {
        1.0
    } else {
        (2.0 * x + 3.0) / 6.0
    }
}

/// x · Φ(x) with the standard normal CDF expressed through erf.
pub fn gelu(x: f64) -> f64 {
    x * normal_cdf(x)
}

/// d/dx gelu(x) = Φ(x) + x · φ(x)
pub fn gelu_derivative(x: f64) -> f64 {
    normal_cdf(x) + x * normal_pdf(x)
}

/// Tanh approximation of GELU: 0.5x(1 + tanh(√(2/π)(x + 0.044715x³))).
///
/// Kept as a named alternate; the enum routes to the exact erf form.
pub fn gelu_tanh(x: f64) -> f64 {
    let u = (2.0 / std::f64::consts::PI).sqrt() * (x + 0.044715 * x.powi(3));
    0.5 * x * (1.0 + u.tanh())
}

/// Derivative of [`gelu_tanh`].
pub fn gelu_tanh_derivative(x: f64) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    let u = c * (x + 0.044715 * x.powi(3));
    let t = u.tanh();
    let du = c * (1.0 + 3.0 * 0.044715 * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Evaluates the selected activation at `x`.
pub fn activate(kind: ActivationKind, x: f64) -> f64 {
    match kind {
        ActivationKind::Mish => mish(x),
        ActivationKind::Hardswish => hardswish(x),
        ActivationKind::Gelu => gelu(x),
    }
}

/// Evaluates the analytic derivative of the selected activation at `x`.
pub fn activate_derivative(kind: ActivationKind, x: f64) -> f64 {
    match kind {
        ActivationKind::Mish => mish_derivative(x),
        ActivationKind::Hardswish => hardswish_derivative(x),
        ActivationKind::Gelu => gelu_derivative(x),
    }
}
