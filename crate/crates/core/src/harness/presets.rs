//! Named generators used by the audits and the acceptance runs.

use crate::error::{Error, Result};
use crate::yosida::{DriverKind, GeneratorConfig, RateFn};

pub const PRESET_NAMES: [&str; 3] = ["linear_decay", "signed_sqrt", "piecewise_kink"];

/// `f = −y` with rate `u ≡ 1`, so that `|f(t,y,0)| ≤ u|y|`.
pub fn linear_decay(horizon: f64) -> GeneratorConfig {
    GeneratorConfig {
        driver: DriverKind::LinearDecay { k: 1.0 },
        u: RateFn::constant(1.0),
        h: RateFn::ZERO,
        lipschitz_z: 0.0,
        lambda: 0.0,
        m_bound: horizon,
    }
}

/// `f = −u_t·sign(y)·√|y| + ½ sin z` with `u_t = h(t) = (T − t)^(−1/4)`:
/// monotone but not Lipschitz in `y`, with an unbounded square-integrable
/// rate.
pub fn signed_sqrt(horizon: f64) -> GeneratorConfig {
    let u = RateFn::PowerDecay {
        scale: 1.0,
        exponent: 0.25,
        horizon,
    };
    GeneratorConfig {
        driver: DriverKind::SignedSqrt,
        u,
        h: u,
        lipschitz_z: 0.5,
        lambda: 0.0,
        m_bound: 2.0 * horizon.sqrt(),
    }
}

/// `f = −2·max(y,0) − ½·min(y,0) + 0.7·z` with `u ≡ 2`.
pub fn piecewise_kink(horizon: f64) -> GeneratorConfig {
    GeneratorConfig {
        driver: DriverKind::PiecewiseKink { k: 2.0, k_prime: 0.5 },
        u: RateFn::constant(2.0),
        h: RateFn::ZERO,
        lipschitz_z: 0.7,
        lambda: 0.0,
        m_bound: 4.0 * horizon,
    }
}

pub fn preset(name: &str, horizon: f64) -> Result<GeneratorConfig> {
    match name {
        "linear_decay" => Ok(linear_decay(horizon)),
        "signed_sqrt" => Ok(signed_sqrt(horizon)),
        "piecewise_kink" => Ok(piecewise_kink(horizon)),
        other => Err(Error::invalid(
            "generator",
            format!("unknown preset `{other}`; known: {}", PRESET_NAMES.join(", ")),
        )),
    }
}
