//! Randomized probing of the generator assumptions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::GeneratorSpec;

/// Sampling ranges for `(t, y, z)`; `t` is drawn from the half-open range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplingBox {
    pub t: (f64, f64),
    pub y: (f64, f64),
    pub z: (f64, f64),
}

impl SamplingBox {
    /// `t ∈ [0, T)`, `y, z ∈ [−10, 10]`.
    pub fn default_for(horizon: f64) -> Self {
        SamplingBox {
            t: (0.0, horizon),
            y: (-10.0, 10.0),
            z: (-10.0, 10.0),
        }
    }
}

/// A sample at which an inequality failed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub t: f64,
    pub y1: f64,
    pub y2: f64,
    pub z1: f64,
    pub z2: f64,
    /// Left side of the inequality.
    pub lhs: f64,
    /// Right side, slack excluded.
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub passed: bool,
    pub checked: usize,
    pub violations: usize,
    pub witness: Option<Witness>,
}

impl ConditionReport {
    fn new() -> Self {
        ConditionReport {
            passed: true,
            checked: 0,
            violations: 0,
            witness: None,
        }
    }

    fn record(&mut self, lhs: f64, rhs: f64, sample: Witness) {
        self.checked += 1;
        let slack = 1e-9 * (1.0 + lhs.abs() + rhs.abs());
        let ok = lhs.is_finite() && rhs.is_finite() && lhs <= rhs + slack;
        if !ok {
            self.passed = false;
            self.violations += 1;
            if self.witness.is_none() {
                self.witness = Some(Witness { lhs, rhs, ..sample });
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub generator: String,
    pub seed: u64,
    pub samples: usize,
    /// `u ≥ 0`, `∫u² ≤ M` and the shape constraints on the rate functions.
    pub rates_ok: bool,
    pub rates_message: Option<String>,
    /// `(y₁−y₂)(f(t,y₁,z)−f(t,y₂,z)) ≤ u_t|y₁−y₂|²`
    pub monotonicity: ConditionReport,
    /// `|f(t,y,0)| ≤ h(t) + u_t|y|`
    pub growth: ConditionReport,
    /// `|f(t,y,z₁)−f(t,y,z₂)| ≤ L|z₁−z₂|`
    pub lipschitz_z: ConditionReport,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.rates_ok && self.monotonicity.passed && self.growth.passed && self.lipschitz_z.passed
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Draws `n_samples` tuples from `bounds` and checks the monotonicity,
/// growth and `z`-Lipschitz assumptions at each. The draws depend only on
/// `seed`.
pub fn validate_assumptions(spec: &GeneratorSpec, n_samples: usize, seed: u64, bounds: SamplingBox) -> ValidationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut monotonicity = ConditionReport::new();
    let mut growth = ConditionReport::new();
    let mut lipschitz_z = ConditionReport::new();
    let eval = |t, y, z| spec.eval(t, y, z).unwrap_or(f64::NAN);

    for _ in 0..n_samples.max(1) {
        let t = uniform(&mut rng, bounds.t);
        let y1 = uniform(&mut rng, bounds.y);
        let y2 = uniform(&mut rng, bounds.y);
        let z1 = uniform(&mut rng, bounds.z);
        let z2 = uniform(&mut rng, bounds.z);
        let sample = Witness {
            t,
            y1,
            y2,
            z1,
            z2,
            lhs: 0.0,
            rhs: 0.0,
        };
        let u = spec.u.value(t);

        let dy = y1 - y2;
        monotonicity.record(dy * (eval(t, y1, z1) - eval(t, y2, z1)), u * dy * dy, sample);
        growth.record(eval(t, y1, 0.0).abs(), spec.h.value(t) + u * y1.abs(), sample);
        lipschitz_z.record((eval(t, y1, z1) - eval(t, y1, z2)).abs(), spec.lipschitz_z * (z1 - z2).abs(), sample);
    }

    let rates = spec.validate_rates(bounds.t.1);
    ValidationReport {
        generator: spec.name().to_string(),
        seed,
        samples: n_samples.max(1),
        rates_ok: rates.is_ok(),
        rates_message: rates.err().map(|e| e.to_string()),
        monotonicity,
        growth,
        lipschitz_z,
    }
}
