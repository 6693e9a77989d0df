//! Randomized battery for the inequalities satisfied by `J^α`, `F^α` and
//! `f^α`.
//!
//! Every inequality gets an additive slack accounting for the root-finder
//! tolerance `τ`: resolvent values are `τ`-accurate (the residual map has
//! slope at least one) so `F^α` values are `τ/α`-accurate. Products with
//! `y₁ − y₂` inherit the error multiplied by `|y₁ − y₂|`. A relative term of
//! a few ulps covers floating point rounding of the right-hand sides.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{dissipative_part, resolvent, GeneratorSpec};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditBoxes {
    pub t: (f64, f64),
    pub y: (f64, f64),
    pub z: (f64, f64),
    /// `α, β` are drawn log-uniformly from this range.
    pub alpha: (f64, f64),
}

impl AuditBoxes {
    pub fn default_for(horizon: f64) -> Self {
        AuditBoxes {
            t: (0.0, horizon),
            y: (-10.0, 10.0),
            z: (-10.0, 10.0),
            alpha: (1e-4, 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditWitness {
    pub t: f64,
    pub y1: f64,
    pub y2: f64,
    pub z1: f64,
    pub z2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub checked: usize,
    pub violations: usize,
    /// Largest `lhs − rhs − slack` seen (negative when all samples pass).
    pub worst_margin: f64,
    pub witness: Option<AuditWitness>,
}

impl CheckResult {
    fn new(name: &'static str) -> Self {
        CheckResult {
            name,
            checked: 0,
            violations: 0,
            worst_margin: f64::NEG_INFINITY,
            witness: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    fn record(&mut self, lhs: f64, rhs: f64, slack: f64, sample: &Sample) {
        self.checked += 1;
        let slack = slack + 64.0 * f64::EPSILON * (lhs.abs() + rhs.abs());
        let margin = lhs - rhs - slack;
        if !(margin <= 0.0) {
            self.violations += 1;
            if self.witness.is_none() {
                self.witness = Some(AuditWitness {
                    t: sample.t,
                    y1: sample.y1,
                    y2: sample.y2,
                    z1: sample.z1,
                    z2: sample.z2,
                    alpha: sample.alpha,
                    beta: sample.beta,
                    lhs,
                    rhs,
                    slack,
                });
            }
        }
        if margin.is_nan() {
            self.worst_margin = f64::NAN;
        } else if !self.worst_margin.is_nan() {
            self.worst_margin = self.worst_margin.max(margin);
        }
    }
}

/// Fixed-point probe for the `α → 0` limit of `f^α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitProbe {
    pub t: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointwiseLimit {
    pub probe: LimitProbe,
    pub alphas: Vec<f64>,
    /// `|f^α(t,y,z) − f(t,y,z)|` per `α`.
    pub gaps: Vec<f64>,
    pub non_increasing: bool,
    pub final_below: bool,
}

impl PointwiseLimit {
    pub fn passed(&self) -> bool {
        self.non_increasing && self.final_below
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub generator: String,
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
    pub checks: Vec<CheckResult>,
    pub pointwise: Vec<PointwiseLimit>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed) && self.pointwise.iter().all(PointwiseLimit::passed)
    }

    pub fn violations(&self) -> usize {
        self.checks.iter().map(|c| c.violations).sum::<usize>() + self.pointwise.iter().filter(|p| !p.passed()).count()
    }
}

struct Sample {
    t: f64,
    y1: f64,
    y2: f64,
    z1: f64,
    z2: f64,
    alpha: f64,
    beta: f64,
}

/// Everything one sample needs, computed once.
struct Evaluated {
    u: f64,
    h: f64,
    f1: f64,
    big_f1: f64,
    ja1: f64,
    ja2: f64,
    ja1_z2: f64,
    fa1: f64,
    fa2: f64,
    fb2: f64,
    fa1_z2: f64,
    fa1_z0: f64,
}

fn evaluate(spec: &GeneratorSpec, s: &Sample, tol: f64) -> Result<Evaluated> {
    let Sample {
        t,
        y1,
        y2,
        z1,
        z2,
        alpha,
        beta,
    } = *s;
    let ja1 = resolvent(spec, alpha, t, y1, z1, tol)?.x;
    let ja2 = resolvent(spec, alpha, t, y2, z1, tol)?.x;
    let jb2 = resolvent(spec, beta, t, y2, z1, tol)?.x;
    let ja1_z2 = resolvent(spec, alpha, t, y1, z2, tol)?.x;
    let ja1_z0 = resolvent(spec, alpha, t, y1, 0.0, tol)?.x;
    Ok(Evaluated {
        u: spec.u.value(t),
        h: spec.h.value(t),
        f1: spec.eval(t, y1, z1)?,
        big_f1: dissipative_part(spec, t, y1, z1)?,
        ja1,
        ja2,
        ja1_z2,
        fa1: (ja1 - y1) / alpha,
        fa2: (ja2 - y2) / alpha,
        fb2: (jb2 - y2) / beta,
        fa1_z2: (ja1_z2 - y1) / alpha,
        fa1_z0: (ja1_z0 - y1) / alpha,
    })
}

const CHECK_NAMES: [&str; 13] = [
    "resolvent_contraction",
    "approximant_lipschitz_y",
    "approximant_dissipative",
    "approximant_domination",
    "resolvent_convergence",
    "approximant_cross_alpha",
    "resolvent_lipschitz_z",
    "approximant_lipschitz_z",
    "regularized_lipschitz_y",
    "regularized_monotone",
    "regularized_growth",
    "regularized_growth_at_zero_z",
    "regularized_cross_alpha",
];

fn log_uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo.ln()..hi.ln()).exp()
    } else {
        lo
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Runs the thirteen resolvent/approximant inequalities on `samples` random
/// draws and the pointwise-limit probes.
pub fn yosida_audit(spec: &GeneratorSpec, samples: usize, seed: u64, boxes: AuditBoxes, tol: f64, probes: &[LimitProbe]) -> AuditReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks: Vec<CheckResult> = CHECK_NAMES.iter().map(|n| CheckResult::new(n)).collect();
    let lip = spec.lipschitz_z;

    for _ in 0..samples {
        let s = Sample {
            t: uniform(&mut rng, boxes.t),
            y1: uniform(&mut rng, boxes.y),
            y2: uniform(&mut rng, boxes.y),
            z1: uniform(&mut rng, boxes.z),
            z2: uniform(&mut rng, boxes.z),
            alpha: log_uniform(&mut rng, boxes.alpha),
            beta: log_uniform(&mut rng, boxes.alpha),
        };
        let e = match evaluate(spec, &s, tol) {
            Ok(e) => e,
            Err(_) => {
                for c in checks.iter_mut() {
                    c.record(f64::NAN, 0.0, 0.0, &s);
                }
                continue;
            }
        };
        let (alpha, beta) = (s.alpha, s.beta);
        let dy = s.y1 - s.y2;
        let dz = (s.z1 - s.z2).abs();
        let sl = 4.0 * tol / alpha;
        let sl_ab = 4.0 * tol / alpha.min(beta);
        let fa1 = e.fa1 + e.u * s.y1;
        let fa2 = e.fa2 + e.u * s.y2;
        let fb2 = e.fb2 + e.u * s.y2;
        let fa1_z0 = e.fa1_z0 + e.u * s.y1;

        let c = &mut checks;
        c[0].record((e.ja1 - e.ja2).abs(), dy.abs(), 4.0 * tol, &s);
        c[1].record((e.fa1 - e.fa2).abs(), 2.0 / alpha * dy.abs(), sl, &s);
        c[2].record((e.fa1 - e.fa2) * dy, 0.0, sl * (1.0 + dy.abs()), &s);
        c[3].record(e.fa1.abs(), e.big_f1.abs(), sl, &s);
        c[4].record((s.y1 - e.ja1).abs(), alpha * e.big_f1.abs(), tol, &s);
        c[5].record(
            (e.fa1 - e.fb2) * dy,
            (alpha + beta) * (e.fa1.abs() + e.fb2.abs()).powi(2),
            sl_ab * (1.0 + dy.abs()),
            &s,
        );
        c[6].record((e.ja1 - e.ja1_z2).abs(), alpha * lip * dz, 4.0 * tol, &s);
        c[7].record((e.fa1 - e.fa1_z2).abs(), lip * dz, sl, &s);
        c[8].record((fa1 - fa2).abs(), (2.0 / alpha + e.u) * dy.abs(), sl, &s);
        c[9].record((fa1 - fa2) * dy, e.u * dy * dy, sl * (1.0 + dy.abs()), &s);
        c[10].record(fa1.abs(), e.f1.abs() + 2.0 * e.u * s.y1.abs(), sl, &s);
        c[11].record(fa1_z0.abs(), e.h + 3.0 * e.u * s.y1.abs(), sl, &s);
        c[12].record(
            (fa1 - fb2) * dy,
            (alpha + beta) * (fa1.abs() + fb2.abs() + e.u * (s.y1.abs() + s.y2.abs())).powi(2) + e.u * dy * dy,
            sl_ab * (1.0 + dy.abs()),
            &s,
        );
    }

    let pointwise = probes.iter().map(|p| pointwise_limit(spec, *p, tol)).collect();
    AuditReport {
        generator: spec.name().to_string(),
        samples,
        seed,
        tol,
        checks,
        pointwise,
    }
}

/// `|f^α − f|` at one point along `α ∈ {1e-1, …, 1e-5}`.
pub fn pointwise_limit(spec: &GeneratorSpec, probe: LimitProbe, tol: f64) -> PointwiseLimit {
    let alphas = vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5];
    let exact = spec.eval(probe.t, probe.y, probe.z).unwrap_or(f64::NAN);
    let gaps: Vec<f64> = alphas
        .iter()
        .map(|&a| {
            super::regularized_generator(spec, a, probe.t, probe.y, probe.z, tol)
                .map(|v| (v - exact).abs())
                .unwrap_or(f64::NAN)
        })
        .collect();
    // Each gap carries up to τ/α of root-finder error.
    let non_increasing = gaps.windows(2).zip(alphas.iter().skip(1)).all(|(w, a)| w[1] <= w[0] + 2.0 * tol / a);
    let final_below = gaps.last().is_some_and(|g| *g < 1e-3);
    PointwiseLimit {
        probe,
        alphas,
        gaps,
        non_increasing,
        final_below,
    }
}
