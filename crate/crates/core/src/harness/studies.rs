//! The α-sweeps, the stability study and the oracle battery.

use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::RunConfig;
use super::report::{num, Report, Table};
use crate::error::Result;
use crate::oracles::{
    binomial_expectation, brute_force_g_expectation, picard_lipschitz_solve, picard_regularized_solve, quadratic_closed_form, OracleReport,
};
use crate::solver::{simulate_path, solve_sampled, Control, GBSDESolution, Shocks};
use crate::sublinear::{
    conditional_g_expectation, conditional_g_expectation_sampled, exact_tree_g_expectation, g_expectation_with_running_cost, occupation_measure,
    GConfig, Lattice, LatticeParams, TerminalSpec, ValueField,
};
use crate::yosida::{regularized_generator, GeneratorSpec, RateFn};

fn l2_diff(a: &ValueField, b: &ValueField, lattice: &Lattice) -> f64 {
    let w = lattice.dt() * lattice.spacing();
    let sum: f64 = a
        .slices()
        .iter()
        .zip(b.slices())
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)))
        .sum();
    (w * sum).sqrt()
}

/// Least-squares slope of `log y` against `log x` over positive pairs.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Strictly decreasing along the sequence.
fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

/// Non-increasing, except for at most one adjacent inversion where both
/// values sit below `floor`.
fn non_increasing_with_allowance(values: &[f64], floor: f64) -> bool {
    let mut allowance = 1;
    for w in values.windows(2) {
        if w[1] > w[0] {
            if allowance > 0 && w[0] < floor && w[1] < floor {
                allowance -= 1;
            } else {
                return false;
            }
        }
    }
    true
}

struct Setup {
    lattice: Lattice,
    spec: GeneratorSpec,
    terminal: Vec<f64>,
}

fn setup(cfg: &RunConfig) -> Result<Setup> {
    let lattice = cfg.build_lattice()?;
    let spec = cfg.generator_spec()?;
    let terminal = cfg.terminal.sample(&lattice)?;
    Ok(Setup { lattice, spec, terminal })
}

fn timed<T>(timings: &mut Vec<(String, f64)>, name: String, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    timings.push((name, start.elapsed().as_secs_f64()));
    out
}

// ---------------------------------------------------------------- convergence

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub alpha: f64,
    /// `max_nodes |Y^α − Y|`.
    pub sup_diff: f64,
    /// `(Σ dt·Δx·|Y^α − Y|²)^{1/2}`.
    pub l2_diff: f64,
    /// Same discrete norm for `Z^α − Z`.
    pub z_diff: f64,
    pub root: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub generator: String,
    pub reference_root: f64,
    pub rows: Vec<ConvergenceRow>,
    pub slope: Option<f64>,
    pub strictly_decreasing: bool,
    pub non_increasing_with_allowance: bool,
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
}

impl ConvergenceStudy {
    pub fn report(&self) -> Report {
        let mut t = Table::new("convergence.csv", &["alpha", "sup_diff", "l2_diff", "z_diff", "root", "error"]);
        for r in &self.rows {
            t.push(vec![
                num(r.alpha),
                num(r.sup_diff),
                num(r.l2_diff),
                num(r.z_diff),
                num(r.root),
                r.error.clone().unwrap_or_default(),
            ]);
        }
        Report {
            command: "converge".into(),
            tables: vec![t],
            summary: serde_json::to_value(self).expect("serializable"),
            timings: self.timings.clone(),
        }
    }
}

/// Reference solve with the generator itself, then one regularized solve
/// per `α`; failed entries are recorded and the sweep continues.
pub fn run_convergence(cfg: &RunConfig) -> Result<ConvergenceStudy> {
    let s = setup(cfg)?;
    let tol = cfg.tolerances.root;
    let mut timings = Vec::new();
    let reference = timed(&mut timings, "reference".into(), || {
        solve_sampled(&s.spec, s.terminal.clone(), &s.lattice, None, tol)
    })?;
    let mut rows = Vec::new();
    for &alpha in &cfg.alpha_schedule {
        let sol = timed(&mut timings, format!("alpha={alpha}"), || {
            solve_sampled(&s.spec, s.terminal.clone(), &s.lattice, Some(alpha), tol)
        });
        rows.push(match sol {
            Ok(sol) => ConvergenceRow {
                alpha,
                sup_diff: sol.y.max_abs_diff(&reference.y),
                l2_diff: l2_diff(&sol.y, &reference.y, &s.lattice),
                z_diff: l2_diff(&sol.z, &reference.z, &s.lattice),
                root: sol.root(),
                error: None,
            },
            Err(e) => ConvergenceRow {
                alpha,
                sup_diff: f64::NAN,
                l2_diff: f64::NAN,
                z_diff: f64::NAN,
                root: f64::NAN,
                error: Some(e.to_string()),
            },
        });
    }
    let ok: Vec<&ConvergenceRow> = rows.iter().filter(|r| r.error.is_none()).collect();
    let diffs: Vec<f64> = ok.iter().map(|r| r.sup_diff).collect();
    let all_ok = ok.len() == rows.len();
    Ok(ConvergenceStudy {
        generator: s.spec.name().to_string(),
        reference_root: reference.root(),
        slope: loglog_slope(&ok.iter().map(|r| (r.alpha, r.sup_diff)).collect::<Vec<_>>()),
        strictly_decreasing: all_ok && strictly_decreasing(&diffs),
        non_increasing_with_allowance: all_ok && non_increasing_with_allowance(&diffs, 10.0 * tol),
        rows,
        timings,
    })
}

// ------------------------------------------------------------ generator distance

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceRow {
    pub alpha: f64,
    /// `Σ_i Σ_k p_i(k)·|f − f^α|²(t_i, Y, Z)·dt` under the worst-case
    /// occupation measure.
    pub distance: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceStudy {
    pub generator: String,
    pub rows: Vec<DistanceRow>,
    pub strictly_decreasing: bool,
    pub non_increasing: bool,
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
}

impl DistanceStudy {
    pub fn report(&self) -> Report {
        let mut t = Table::new("distance.csv", &["alpha", "distance", "error"]);
        for r in &self.rows {
            t.push(vec![num(r.alpha), num(r.distance), r.error.clone().unwrap_or_default()]);
        }
        Report {
            command: "distance".into(),
            tables: vec![t],
            summary: serde_json::to_value(self).expect("serializable"),
            timings: self.timings.clone(),
        }
    }
}

/// Worst-case occupation measure of a solution: forward push under `σ*`.
pub fn worst_case_occupation(sol: &GBSDESolution) -> Vec<Vec<f64>> {
    let lat = &sol.lattice;
    let controls: Vec<Vec<usize>> = sol
        .sigma_star
        .slices()
        .iter()
        .map(|s| s.iter().map(|v| lat.vol_index(*v).expect("admissible")).collect())
        .collect();
    occupation_measure(&controls, lat)
}

/// Discrete `M_G²` distance between `f` and `f^α` along a solved `(Y, Z)`.
pub fn generator_distance(spec: &GeneratorSpec, sol: &GBSDESolution, occupation: &[Vec<f64>], alpha: f64, tol: f64) -> Result<f64> {
    let lat = &sol.lattice;
    let dt = lat.dt();
    let mut total = 0.0;
    for (i, p) in occupation.iter().enumerate().take(lat.steps()) {
        let t = lat.t(i);
        let y = sol.y.slice(i);
        let z = sol.z.slice(i);
        let terms: Vec<Result<f64>> = (0..lat.nodes())
            .into_par_iter()
            .map(|k| {
                if p[k] == 0.0 {
                    return Ok(0.0);
                }
                let d = spec.eval(t, y[k], z[k])? - regularized_generator(spec, alpha, t, y[k], z[k], tol)?;
                Ok(p[k] * d * d * dt)
            })
            .collect();
        for term in terms {
            total += term?;
        }
    }
    Ok(total)
}

pub fn run_generator_distance(cfg: &RunConfig) -> Result<DistanceStudy> {
    let s = setup(cfg)?;
    let tol = cfg.tolerances.root;
    let mut timings = Vec::new();
    let reference = timed(&mut timings, "reference".into(), || {
        solve_sampled(&s.spec, s.terminal.clone(), &s.lattice, None, tol)
    })?;
    let occupation = worst_case_occupation(&reference);
    let rows: Vec<DistanceRow> = cfg
        .alpha_schedule
        .iter()
        .map(|&alpha| {
            match timed(&mut timings, format!("alpha={alpha}"), || {
                generator_distance(&s.spec, &reference, &occupation, alpha, tol)
            }) {
                Ok(distance) => DistanceRow {
                    alpha,
                    distance,
                    error: None,
                },
                Err(e) => DistanceRow {
                    alpha,
                    distance: f64::NAN,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let d: Vec<f64> = rows.iter().map(|r| r.distance).collect();
    let all_ok = rows.iter().all(|r| r.error.is_none());
    Ok(DistanceStudy {
        generator: s.spec.name().to_string(),
        strictly_decreasing: all_ok && strictly_decreasing(&d),
        non_increasing: all_ok && d.windows(2).all(|w| w[1] <= w[0]),
        rows,
        timings,
    })
}

// ------------------------------------------------------------------ norm audit

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormAuditRow {
    pub alpha: f64,
    /// `max_nodes |Y^α|`.
    pub y_node_max: f64,
    /// `(mean over paths of sup_t |Y^α_t|²)^{1/2}` under random controls.
    pub y_path_sup: f64,
    /// `Ê[Σ |Z^α|² dt]^{1/2}` by dynamic programming.
    pub z_h2: f64,
    /// `(mean over paths of |K^α_T|²)^{1/2}` under random controls.
    pub k_l2: f64,
    pub paths: usize,
    /// Nodes where `|Y^α|²` exceeds the exponential a-priori bound by more
    /// than `1e-6`.
    pub bound_violations: usize,
    /// Largest `|Y^α|² − bound` over nodes.
    pub bound_worst_margin: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormVerdicts {
    pub y_node_max: bool,
    pub y_path_sup: bool,
    pub z_h2: bool,
    pub k_l2: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormAudit {
    pub generator: String,
    pub rows: Vec<NormAuditRow>,
    pub verdicts: NormVerdicts,
    /// `"bounded"` when every norm's maximum over the schedule is at most
    /// twice its value at the largest `α`.
    pub verdict: &'static str,
    pub bound_violations: usize,
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
}

impl NormAudit {
    pub fn report(&self) -> Report {
        let mut t = Table::new(
            "norms.csv",
            &[
                "alpha",
                "y_node_max",
                "y_path_sup",
                "z_h2",
                "k_l2",
                "paths",
                "bound_violations",
                "bound_worst_margin",
                "error",
            ],
        );
        for r in &self.rows {
            t.push(vec![
                num(r.alpha),
                num(r.y_node_max),
                num(r.y_path_sup),
                num(r.z_h2),
                num(r.k_l2),
                r.paths.to_string(),
                r.bound_violations.to_string(),
                num(r.bound_worst_margin),
                r.error.clone().unwrap_or_default(),
            ]);
        }
        Report {
            command: "norms".into(),
            tables: vec![t],
            summary: serde_json::to_value(self).expect("serializable"),
            timings: self.timings.clone(),
        }
    }
}

/// Node-wise `e^{2∫_t^T θ}(Ê_t[ξ²] + ∫_t^T h²)` with
/// `θ = u + L²/σ_lo² + 1`.
pub fn a_priori_bound(spec: &GeneratorSpec, terminal: &[f64], lattice: &Lattice) -> Result<ValueField> {
    let squared: Vec<f64> = terminal.iter().map(|v| v * v).collect();
    let e2 = conditional_g_expectation_sampled(squared, lattice)?;
    let horizon = lattice.horizon();
    let c = spec.lipschitz_z * spec.lipschitz_z / (lattice.g().sigma_lo * lattice.g().sigma_lo) + 1.0;
    let slices = e2
        .slices()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let t = lattice.t(i);
            let theta = spec.u.integral(t, horizon) + c * (horizon - t);
            let factor = (2.0 * theta).exp();
            let h2 = spec.h.integral_sq(t, horizon);
            s.iter().map(|v| factor * (v + h2)).collect()
        })
        .collect();
    Ok(ValueField::from_slices(slices))
}

struct PathSeeds {
    control: u64,
    shocks: u64,
}

fn path_seeds(seed: u64, n: usize) -> Vec<PathSeeds> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| PathSeeds {
            control: rng.next_u64(),
            shocks: rng.next_u64(),
        })
        .collect()
}

fn norm_row(spec: &GeneratorSpec, s: &Setup, alpha: f64, tol: f64, bound: &ValueField, seeds: &[PathSeeds]) -> Result<NormAuditRow> {
    let sol = solve_sampled(spec, s.terminal.clone(), &s.lattice, Some(alpha), tol)?;
    let lat = &s.lattice;

    let z_sq: Vec<Vec<f64>> = sol.z.slices().iter().map(|z| z.iter().map(|v| v * v).collect()).collect();
    let z_h2 = g_expectation_with_running_cost(vec![0.0; lat.nodes()], &z_sq, lat)?.root(lat).sqrt();

    let paths: Vec<Result<(f64, f64)>> = seeds
        .par_iter()
        .map(|ps| {
            let rec = simulate_path(&sol, &Control::Random { seed: ps.control }, &Shocks::Seeded(ps.shocks))?;
            let sup = rec.y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            Ok((sup * sup, rec.k_terminal() * rec.k_terminal()))
        })
        .collect();
    let (mut y_acc, mut k_acc) = (0.0, 0.0);
    for p in paths {
        let (y2, k2) = p?;
        y_acc += y2;
        k_acc += k2;
    }
    let n = seeds.len().max(1) as f64;

    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for (ys, bs) in sol.y.slices().iter().zip(bound.slices()) {
        for (y, b) in ys.iter().zip(bs) {
            let margin = y * y - b;
            worst = worst.max(margin);
            if !(margin <= 1e-6) {
                violations += 1;
            }
        }
    }
    Ok(NormAuditRow {
        alpha,
        y_node_max: sol.y.max_abs(),
        y_path_sup: (y_acc / n).sqrt(),
        z_h2,
        k_l2: (k_acc / n).sqrt(),
        paths: seeds.len(),
        bound_violations: violations,
        bound_worst_margin: worst,
        error: None,
    })
}

pub fn run_norm_audit(cfg: &RunConfig) -> Result<NormAudit> {
    let s = setup(cfg)?;
    let tol = cfg.tolerances.root;
    let bound = a_priori_bound(&s.spec, &s.terminal, &s.lattice)?;
    let seeds = path_seeds(cfg.seed, cfg.sampling.paths);
    let mut timings = Vec::new();
    let rows: Vec<NormAuditRow> = cfg
        .alpha_schedule
        .iter()
        .map(|&alpha| {
            timed(&mut timings, format!("alpha={alpha}"), || {
                norm_row(&s.spec, &s, alpha, tol, &bound, &seeds)
            })
            .unwrap_or_else(|e| NormAuditRow {
                alpha,
                y_node_max: f64::NAN,
                y_path_sup: f64::NAN,
                z_h2: f64::NAN,
                k_l2: f64::NAN,
                paths: seeds.len(),
                bound_violations: 0,
                bound_worst_margin: f64::NAN,
                error: Some(e.to_string()),
            })
        })
        .collect();
    let all_ok = rows.iter().all(|r| r.error.is_none());
    let check = |get: fn(&NormAuditRow) -> f64| {
        let first = get(&rows[0]);
        all_ok && rows.iter().all(|r| get(r).is_finite() && get(r) <= 2.0 * first + 1e-12)
    };
    let verdicts = NormVerdicts {
        y_node_max: check(|r| r.y_node_max),
        y_path_sup: check(|r| r.y_path_sup),
        z_h2: check(|r| r.z_h2),
        k_l2: check(|r| r.k_l2),
    };
    let bounded = verdicts.y_node_max && verdicts.y_path_sup && verdicts.z_h2 && verdicts.k_l2;
    Ok(NormAudit {
        generator: s.spec.name().to_string(),
        bound_violations: rows.iter().map(|r| r.bound_violations).sum(),
        rows,
        verdicts,
        verdict: if bounded { "bounded" } else { "unbounded" },
        timings,
    })
}

// ------------------------------------------------------------------- stability

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityRow {
    pub epsilon: f64,
    /// `max_nodes |Y(ξ + εη) − Y(ξ)|`.
    pub max_dy: f64,
    /// `max_dy / (ε·max|η|)`, zero when `ε = 0`.
    pub ratio: f64,
    pub within_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityStudy {
    pub generator: String,
    /// `e^{∫_0^T (2u + L²/σ_lo²)}`.
    pub bound: f64,
    pub rows: Vec<StabilityRow>,
    pub all_within_bound: bool,
    /// Two solves with identical inputs agree bit for bit.
    pub repeat_identical: bool,
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
}

impl StabilityStudy {
    pub fn report(&self) -> Report {
        let mut t = Table::new("stability.csv", &["epsilon", "max_dy", "ratio", "bound", "within_bound"]);
        for r in &self.rows {
            t.push(vec![
                num(r.epsilon),
                num(r.max_dy),
                num(r.ratio),
                num(self.bound),
                r.within_bound.to_string(),
            ]);
        }
        Report {
            command: "stability".into(),
            tables: vec![t],
            summary: serde_json::to_value(self).expect("serializable"),
            timings: self.timings.clone(),
        }
    }
}

pub fn stability_bound(spec: &GeneratorSpec, g: &GConfig, horizon: f64) -> f64 {
    let l2 = spec.lipschitz_z * spec.lipschitz_z / (g.sigma_lo * g.sigma_lo);
    (2.0 * spec.u.integral(0.0, horizon) + l2 * horizon).exp()
}

pub fn run_stability(cfg: &RunConfig) -> Result<StabilityStudy> {
    let s = setup(cfg)?;
    let tol = cfg.tolerances.root;
    let eta = cfg.stability.perturbation.sample(&s.lattice)?;
    let eta_max = eta.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let bound = stability_bound(&s.spec, s.lattice.g(), s.lattice.horizon());
    let mut timings = Vec::new();
    let base = timed(&mut timings, "base".into(), || {
        solve_sampled(&s.spec, s.terminal.clone(), &s.lattice, None, tol)
    })?;
    let again = timed(&mut timings, "repeat".into(), || {
        solve_sampled(&s.spec, s.terminal.clone(), &s.lattice, None, tol)
    })?;
    let repeat_identical = base
        .y
        .slices()
        .iter()
        .flatten()
        .zip(again.y.slices().iter().flatten())
        .all(|(a, b)| a.to_bits() == b.to_bits());

    let mut rows = Vec::new();
    for &eps in &cfg.stability.epsilons {
        let bumped: Vec<f64> = s.terminal.iter().zip(&eta).map(|(x, e)| x + eps * e).collect();
        let sol = timed(&mut timings, format!("epsilon={eps}"), || {
            solve_sampled(&s.spec, bumped, &s.lattice, None, tol)
        })?;
        let max_dy = sol.y.max_abs_diff(&base.y);
        let scale = eps * eta_max;
        let ratio = if scale > 0.0 { max_dy / scale } else { 0.0 };
        let within_bound = if scale > 0.0 { ratio <= bound * (1.0 + 1e-3) } else { max_dy == 0.0 };
        rows.push(StabilityRow {
            epsilon: eps,
            max_dy,
            ratio,
            within_bound,
        });
    }
    Ok(StabilityStudy {
        generator: s.spec.name().to_string(),
        bound,
        all_within_bound: rows.iter().all(|r| r.within_bound),
        rows,
        repeat_identical,
        timings,
    })
}

// --------------------------------------------------------------- oracle battery

/// Smallest refinement `r ≤ 64` putting every volatility's children on grid
/// nodes, so the lattice evaluates exact tree states with no interpolation.
pub fn exact_refinement(g: &GConfig, m_vol: usize) -> Option<usize> {
    let probe = Lattice::build(LatticeParams::new(1.0, 1, *g, m_vol, 1.0)).ok()?;
    let ratios: Vec<f64> = probe.vol_set().iter().map(|s| s / g.sigma_hi).collect();
    (1..=64).find(|&r| {
        ratios.iter().all(|q| {
            let off = r as f64 * q;
            off == off.round()
        })
    })
}

/// Refinement keeping the linear-interpolation bias of a payoff with
/// `|φ''| ≤ 2` below `tol`: the chord error per step is at most
/// `σ_hi²dt/(4r²)`, so `σ_hi²T/(4r²) ≤ tol`.
pub fn refinement_for_tolerance(g: &GConfig, horizon: f64, tol: f64) -> usize {
    (g.sigma_hi * (horizon / (4.0 * tol)).sqrt()).ceil().max(1.0) as usize
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryOptions {
    pub enumeration_cap: f64,
    pub root_tol: f64,
    pub picard_tol: f64,
}

impl Default for BatteryOptions {
    fn default() -> Self {
        BatteryOptions {
            enumeration_cap: crate::oracles::DEFAULT_ENUMERATION_CAP,
            root_tol: crate::yosida::DEFAULT_TOL,
            picard_tol: crate::yosida::DEFAULT_TOL,
        }
    }
}

/// Brute force against the lattice (on exact child states) and against the
/// exact-tree recursion, for every `N ≤ 4`, `m ≤ 3` and payoff.
pub fn brute_force_battery(opts: &BatteryOptions) -> Result<Vec<OracleReport>> {
    let g = GConfig::new(0.5, 1.0)?;
    let payoffs = [TerminalSpec::Quadratic, TerminalSpec::Identity, TerminalSpec::Call { strike: 0.2 }];
    let mut out = Vec::new();
    for m in 2..=3 {
        let r = exact_refinement(&g, m).expect("uniform volatility grid on [0.5, 1] has a finite refinement");
        for steps in 1..=4 {
            let factor = (steps as f64).sqrt() + 1.0;
            let lat = Lattice::build(LatticeParams::new(1.0, steps, g, m, factor).refinement(r))?;
            for payoff in &payoffs {
                let bf = brute_force_g_expectation(payoff, 1.0, steps, lat.vol_set(), opts.enumeration_cap)?;
                let engine = conditional_g_expectation(payoff, &lat)?.root(&lat);
                let tree = exact_tree_g_expectation(|x| payoff.eval(x), 1.0, steps, lat.vol_set())?;
                let instance = format!("{} N={steps} m_vol={m}", payoff.name());
                out.push(OracleReport::new("brute_force_vs_lattice", &instance, bf, engine, 1e-12));
                out.push(OracleReport::new("brute_force_vs_exact_tree", &instance, bf, tree, 1e-12));
            }
        }
    }
    Ok(out)
}

/// `Ê[±B_T²]` at `T = 1, σ ∈ [0.5, 1], N = 200`, truncation factor 5.
pub fn closed_form_battery() -> Result<Vec<OracleReport>> {
    let g = GConfig::new(0.5, 1.0)?;
    let mut out = Vec::new();
    let lat = Lattice::build(LatticeParams::new(1.0, 200, g, 3, 5.0))?;
    let engine = conditional_g_expectation(&TerminalSpec::Quadratic, &lat)?.root(&lat);
    out.push(OracleReport::new(
        "quadratic_closed_form",
        "convex T=1 N=200 refinement=1",
        quadratic_closed_form(&g, 1.0, 1),
        engine,
        1e-6,
    ));

    let tol = 2e-3;
    let r = refinement_for_tolerance(&g, 1.0, tol);
    let lat = Lattice::build(LatticeParams::new(1.0, 200, g, 3, 5.0).refinement(r))?;
    let engine = conditional_g_expectation(&TerminalSpec::NegQuadratic, &lat)?.root(&lat);
    out.push(OracleReport::new(
        "quadratic_closed_form",
        format!("concave T=1 N=200 refinement={r}"),
        quadratic_closed_form(&g, 1.0, -1),
        engine,
        tol,
    ));
    Ok(out)
}

/// Single-volatility lattice against the direct binomial sum, relative
/// `1e-12`.
pub fn degenerate_battery() -> Result<Vec<OracleReport>> {
    let mut out = Vec::new();
    let g = GConfig::new(0.8, 0.8)?;
    for steps in [10, 200] {
        let factor = (steps as f64).sqrt() + 1.0;
        let lat = Lattice::build(LatticeParams::new(1.0, steps, g, 3, factor))?;
        for payoff in [TerminalSpec::Quadratic, TerminalSpec::Call { strike: 0.1 }, TerminalSpec::Identity] {
            let oracle = binomial_expectation(&payoff, 1.0, steps, 0.8);
            let engine = conditional_g_expectation(&payoff, &lat)?.root(&lat);
            let tol = 1e-12 * oracle.abs().max(1e-300) + if oracle == 0.0 { 1e-15 } else { 0.0 };
            out.push(OracleReport::new(
                "binomial_sum",
                format!("{} N={steps} sigma=0.8", payoff.name()),
                oracle,
                engine,
                tol,
            ));
        }
    }
    Ok(out)
}

/// Fixed-point iteration against the root-finding solver, node-wise.
pub fn picard_battery(opts: &BatteryOptions) -> Result<Vec<OracleReport>> {
    let mut out = Vec::new();
    let g = GConfig::new(0.5, 1.0)?;

    let lat = Lattice::build(LatticeParams::new(1.0, 100, g, 3, 5.0))?;
    let linear = GeneratorSpec::custom("linear", |_, y, _| -2.0 * y, RateFn::ZERO, RateFn::ZERO, 0.0);
    let xi = TerminalSpec::Quadratic.sample(&lat)?;
    let a = solve_sampled(&linear, xi.clone(), &lat, None, opts.root_tol)?;
    let b = picard_lipschitz_solve(&linear, &|_| 2.0, xi, &lat, opts.picard_tol)?;
    out.push(OracleReport::new(
        "picard_max_node_gap",
        "linear k=2 quadratic N=100",
        0.0,
        a.y.max_abs_diff(&b.y),
        1e-9,
    ));

    for name in super::presets::PRESET_NAMES {
        let spec = GeneratorSpec::from_config(&super::presets::preset(name, 1.0)?)?;
        let lat = Lattice::build(LatticeParams::new(1.0, 50, g, 3, 5.0))?;
        let xi = TerminalSpec::Call { strike: 0.0 }.sample(&lat)?;
        let alpha = 0.1;
        let a = solve_sampled(&spec, xi.clone(), &lat, Some(alpha), opts.root_tol)?;
        let b = picard_regularized_solve(&spec, alpha, xi, &lat, opts.root_tol, opts.picard_tol)?;
        out.push(OracleReport::new(
            "picard_max_node_gap",
            format!("{name} alpha=0.1 call N=50"),
            0.0,
            a.y.max_abs_diff(&b.y),
            1e-8,
        ));
    }
    Ok(out)
}

/// The full oracle battery.
pub fn run_oracle_battery(opts: &BatteryOptions) -> Result<Vec<OracleReport>> {
    let mut out = brute_force_battery(opts)?;
    out.extend(closed_form_battery()?);
    out.extend(degenerate_battery()?);
    out.extend(picard_battery(opts)?);
    Ok(out)
}

pub fn oracle_report(reports: &[OracleReport], timings: Vec<(String, f64)>) -> Report {
    let mut t = Table::new(
        "oracles.csv",
        &["oracle", "instance", "oracle_value", "engine_value", "gap", "tolerance", "passed"],
    );
    for r in reports {
        t.push(vec![
            r.oracle.clone(),
            r.instance.clone(),
            num(r.oracle_value),
            num(r.engine_value),
            num(r.gap),
            num(r.tolerance),
            r.passed.to_string(),
        ]);
    }
    Report {
        command: "oracle-check".into(),
        tables: vec![t],
        summary: serde_json::json!({
            "checks": reports.len(),
            "failures": reports.iter().filter(|r| !r.passed).count(),
            "reports": reports,
        }),
        timings,
    }
}
