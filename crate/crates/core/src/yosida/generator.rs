use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A deterministic non-negative function of time: the monotonicity rate
/// `u_t` or the dominating function `h(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateFn {
    Constant {
        value: f64,
    },
    /// `scale · (horizon − t)^(−exponent)`, integrable for `exponent < 1`
    /// and square-integrable for `exponent < 1/2`.
    PowerDecay {
        scale: f64,
        exponent: f64,
        horizon: f64,
    },
}

impl RateFn {
    pub const ZERO: RateFn = RateFn::Constant { value: 0.0 };

    pub fn constant(value: f64) -> RateFn {
        RateFn::Constant { value }
    }

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            RateFn::Constant { value } => value,
            RateFn::PowerDecay { scale, exponent, horizon } => scale * (horizon - t).powf(-exponent),
        }
    }

    /// `∫_a^b rate(s) ds`, exact.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        match *self {
            RateFn::Constant { value } => value * (b - a),
            RateFn::PowerDecay { scale, exponent, horizon } => {
                let p = 1.0 - exponent;
                scale * ((horizon - a).powf(p) - (horizon - b).powf(p)) / p
            }
        }
    }

    /// `∫_a^b rate(s)² ds`, exact.
    pub fn integral_sq(&self, a: f64, b: f64) -> f64 {
        match *self {
            RateFn::Constant { value } => value * value * (b - a),
            RateFn::PowerDecay { scale, exponent, horizon } => {
                let p = 1.0 - 2.0 * exponent;
                scale * scale * ((horizon - a).powf(p) - (horizon - b).powf(p)) / p
            }
        }
    }

    /// Composite midpoint rule for `∫_a^b rate(s)² ds`; used to cross-check
    /// the closed forms and the `∫u² ≤ M` contract.
    pub fn quadrature_sq(&self, a: f64, b: f64, panels: usize) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|k| {
                let v = self.value(a + (k as f64 + 0.5) * h);
                v * v * h
            })
            .sum()
    }

    pub fn validate(&self, field: &'static str, horizon: f64) -> Result<()> {
        match *self {
            RateFn::Constant { value } => {
                if !(value >= 0.0 && value.is_finite()) {
                    return Err(Error::invalid(field, format!("constant rate must be finite and >= 0, got {value}")));
                }
            }
            RateFn::PowerDecay { scale, exponent, horizon: h } => {
                if !(scale >= 0.0 && scale.is_finite()) {
                    return Err(Error::invalid(field, format!("scale must be >= 0, got {scale}")));
                }
                if !(0.0..0.5).contains(&exponent) {
                    return Err(Error::invalid(
                        field,
                        format!("exponent must lie in [0, 0.5) for square integrability, got {exponent}"),
                    ));
                }
                if h < horizon {
                    return Err(Error::invalid(field, format!("singularity at t = {h} falls inside [0, {horizon}]")));
                }
            }
        }
        Ok(())
    }
}

/// Named generator families accepted in config documents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriverKind {
    /// `f ≡ 0`
    Zero,
    /// `f = −k·y`
    LinearDecay { k: f64 },
    /// `f = −u_t·sign(y)·√|y| + L·sin(z)`
    SignedSqrt,
    /// `f = −k·max(y, 0) − k'·min(y, 0) + L·z`
    PiecewiseKink { k: f64, k_prime: f64 },
}

/// Serializable description of a generator together with its assumption
/// data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub driver: DriverKind,
    /// Monotonicity rate `u_t`.
    pub u: RateFn,
    /// Dominating function `h = |f(·,0,0)| ∨ φ`.
    pub h: RateFn,
    /// Lipschitz constant in `z`.
    pub lipschitz_z: f64,
    /// Integrability margin; carried for reporting only.
    #[serde(default)]
    pub lambda: f64,
    /// Bound on `∫_0^T u_s² ds`.
    pub m_bound: f64,
}

pub type Evaluator = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// A generator `f(t, y, z)` with its assumption data `(u, h, L, λ, M)`.
#[derive(Clone)]
pub struct GeneratorSpec {
    name: String,
    f: Evaluator,
    pub u: RateFn,
    pub h: RateFn,
    pub lipschitz_z: f64,
    pub lambda: f64,
    pub m_bound: f64,
    config: Option<GeneratorConfig>,
}

impl fmt::Debug for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneratorSpec")
            .field("name", &self.name)
            .field("u", &self.u)
            .field("h", &self.h)
            .field("lipschitz_z", &self.lipschitz_z)
            .field("lambda", &self.lambda)
            .field("m_bound", &self.m_bound)
            .finish()
    }
}

impl GeneratorSpec {
    /// A generator from an arbitrary evaluator. The caller vouches for the
    /// assumption data; [`crate::yosida::validate_assumptions`] can probe it.
    pub fn custom<F>(name: impl Into<String>, f: F, u: RateFn, h: RateFn, lipschitz_z: f64) -> GeneratorSpec
    where
        F: Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    {
        GeneratorSpec {
            name: name.into(),
            f: Arc::new(f),
            u,
            h,
            lipschitz_z,
            lambda: 0.0,
            m_bound: f64::INFINITY,
            config: None,
        }
    }

    pub fn with_m_bound(mut self, m_bound: f64) -> Self {
        self.m_bound = m_bound;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn from_config(cfg: &GeneratorConfig) -> Result<GeneratorSpec> {
        if !(cfg.lipschitz_z >= 0.0 && cfg.lipschitz_z.is_finite()) {
            return Err(Error::invalid("lipschitz_z", "must be finite and >= 0"));
        }
        if !(cfg.lambda >= 0.0) {
            return Err(Error::invalid("lambda", "must be >= 0"));
        }
        let lip = cfg.lipschitz_z;
        let u = cfg.u;
        let (name, f): (&str, Evaluator) = match cfg.driver {
            DriverKind::Zero => ("zero", Arc::new(|_, _, _| 0.0)),
            DriverKind::LinearDecay { k } => {
                if !k.is_finite() {
                    return Err(Error::invalid("k", "must be finite"));
                }
                ("linear_decay", Arc::new(move |_, y, _| -k * y))
            }
            DriverKind::SignedSqrt => (
                "signed_sqrt",
                Arc::new(move |t, y: f64, z: f64| -u.value(t) * y.signum() * y.abs().sqrt() + lip * z.sin()),
            ),
            DriverKind::PiecewiseKink { k, k_prime } => {
                if !(k.is_finite() && k_prime.is_finite()) {
                    return Err(Error::invalid("k", "slopes must be finite"));
                }
                (
                    "piecewise_kink",
                    Arc::new(move |_, y: f64, z| -k * y.max(0.0) - k_prime * y.min(0.0) + lip * z),
                )
            }
        };
        Ok(GeneratorSpec {
            name: name.to_string(),
            f,
            u,
            h: cfg.h,
            lipschitz_z: lip,
            lambda: cfg.lambda,
            m_bound: cfg.m_bound,
            config: Some(cfg.clone()),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn config(&self) -> Option<&GeneratorConfig> {
        self.config.as_ref()
    }

    /// `f(t, y, z)`, with non-finite results turned into errors.
    pub fn eval(&self, t: f64, y: f64, z: f64) -> Result<f64> {
        let v = (self.f)(t, y, z);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteGenerator {
                generator: self.name.clone(),
                t,
                y,
                z,
            })
        }
    }

    /// Checks the rate data: `u ≥ 0` and `∫_0^T u² ≤ M·(1 + 1e-6)`.
    pub fn validate_rates(&self, horizon: f64) -> Result<()> {
        self.u.validate("u", horizon)?;
        self.h.validate("h", horizon)?;
        let integral = self.u.integral_sq(0.0, horizon);
        if integral > self.m_bound * (1.0 + 1e-6) {
            return Err(Error::invalid(
                "m_bound",
                format!("∫u² over [0, {horizon}] is {integral}, above M = {}", self.m_bound),
            ));
        }
        Ok(())
    }
}

/// Anything the backward solver can step with: a generator evaluation plus
/// its monotonicity rate.
pub trait Driver: Send + Sync {
    fn eval(&self, t: f64, y: f64, z: f64) -> Result<f64>;
    /// Rate `u_t` with `(y₁−y₂)(f(y₁)−f(y₂)) ≤ u_t |y₁−y₂|²`.
    fn rate(&self, t: f64) -> f64;
}

impl Driver for GeneratorSpec {
    fn eval(&self, t: f64, y: f64, z: f64) -> Result<f64> {
        GeneratorSpec::eval(self, t, y, z)
    }
    fn rate(&self, t: f64) -> f64 {
        self.u.value(t)
    }
}
