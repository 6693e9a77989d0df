//! Acceptance suite: one pass/fail line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p gbsde-core --test acceptance`.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gbsde_core::harness::{self, parse_config, presets, run_convergence, run_norm_audit, run_stability, BatteryOptions, RunConfig};
use gbsde_core::oracles::OracleReport;
use gbsde_core::solver::{simulate_path, solve, solve_sampled, Control, GBSDESolution, Shocks};
use gbsde_core::sublinear::{conditional_g_expectation, GConfig, Lattice, LatticeParams, TerminalSpec};
use gbsde_core::yosida::{resolvent, yosida_audit, AuditBoxes, GeneratorSpec, LimitProbe, RateFn, DEFAULT_TOL};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn sweep_config() -> RunConfig {
    let generator = serde_json::to_string(&presets::signed_sqrt(1.0)).unwrap();
    parse_config(&format!(
        r#"{{
            "lattice": {{"horizon": 1, "steps": 200, "sigma_lo": 0.5, "sigma_hi": 1, "m_vol": 3, "truncation_factor": 5}},
            "generator": {generator},
            "terminal": {{"kind": "call", "strike": 0}},
            "alpha_schedule": [1e-1, 3e-2, 1e-2, 3e-3, 1e-3],
            "seed": 20240611,
            "sampling": {{"paths": 2000}},
            "stability": {{"epsilons": [1e-1, 1e-2, 1e-3], "perturbation": {{"kind": "constant", "value": 1}}}}
        }}"#
    ))
    .expect("acceptance config parses")
}

fn failed_reports(reports: &[OracleReport]) -> Vec<String> {
    reports
        .iter()
        .filter(|r| !r.passed)
        .map(|r| format!("{} [{}] gap {:e} > {:e}", r.oracle, r.instance, r.gap, r.tolerance))
        .collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let probes = [LimitProbe { t: 0.3, y: 2.0, z: 0.5 }, LimitProbe { t: 0.7, y: -1.5, z: -1.0 }];
    let mut lines = Vec::new();
    let mut ok = true;
    for name in presets::PRESET_NAMES {
        let spec = GeneratorSpec::from_config(&presets::preset(name, 1.0).unwrap()).unwrap();
        let report = yosida_audit(&spec, 10_000, 1, AuditBoxes::default_for(1.0), DEFAULT_TOL, &probes);
        let checks = report.checks.len();
        let violations = report.violations();
        ok &= report.passed() && report.checks.iter().all(|c| c.checked == 10_000);
        lines.push(format!("{name}: {checks} checks, {violations} violations"));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs <= 60.0;
    outcome(ok, format!("{} ({secs:.1}s)", lines.join("; ")))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let k: f64 = rng.gen_range(0.0..10.0);
        let alpha = rng.gen_range((1e-4_f64).ln()..0.0).exp();
        let y: f64 = rng.gen_range(-10.0..10.0);
        let spec = GeneratorSpec::custom("linear", move |_, y, _| -k * y, RateFn::ZERO, RateFn::ZERO, 0.0);
        let j = resolvent(&spec, alpha, 0.0, y, 0.0, DEFAULT_TOL).unwrap().x;
        worst = worst.max((j - y / (1.0 + alpha * k)).abs());
    }
    let cubic = GeneratorSpec::custom("cubic", |_, y, _| -y * y * y, RateFn::ZERO, RateFn::ZERO, 0.0);
    let root = resolvent(&cubic, 1.0, 0.0, 2.0, 0.0, DEFAULT_TOL).unwrap().x;
    outcome(
        worst <= 1e-10 && (root - 1.0).abs() <= 1e-10,
        format!("linear worst gap {worst:e}; cubic root {root}"),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let opts = BatteryOptions::default();
    let mut reports = match harness::brute_force_battery(&opts) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let brute = reports.len();
    match harness::closed_form_battery() {
        Ok(r) => reports.extend(r),
        Err(e) => return outcome(false, e.to_string()),
    }
    let closed: Vec<String> = reports[brute..]
        .iter()
        .map(|r| format!("{} engine {} gap {:e}", r.instance, r.engine_value, r.gap))
        .collect();
    let secs = start.elapsed().as_secs_f64();
    let failures = failed_reports(&reports);
    let worst_brute = reports[..brute].iter().map(|r| r.gap).fold(0.0, f64::max);
    outcome(
        failures.is_empty() && secs <= 120.0,
        format!(
            "{brute} brute-force comparisons, worst gap {worst_brute:e}; {}; failures: {:?} ({secs:.1}s)",
            closed.join("; "),
            failures
        ),
    )
}

fn zero() -> GeneratorSpec {
    GeneratorSpec::from_config(&gbsde_core::yosida::GeneratorConfig {
        driver: gbsde_core::yosida::DriverKind::Zero,
        u: RateFn::ZERO,
        h: RateFn::ZERO,
        lipschitz_z: 0.0,
        lambda: 0.0,
        m_bound: 0.0,
    })
    .unwrap()
}

fn lattice(steps: usize, horizon: f64) -> Lattice {
    Lattice::build(LatticeParams::new(horizon, steps, GConfig::new(0.5, 1.0).unwrap(), 3, 5.0)).unwrap()
}

fn criterion_4(solves: &mut Vec<(String, GBSDESolution)>) -> Outcome {
    let lat = lattice(100, 1.0);
    let gexp = conditional_g_expectation(&TerminalSpec::Quadratic, &lat).unwrap();
    let zero_sol = solve(&zero(), &TerminalSpec::Quadratic, &lat, None, DEFAULT_TOL).unwrap();
    let reduction = zero_sol.y == gexp;

    let linear = GeneratorSpec::custom("linear", |_, y, _| -y, RateFn::ZERO, RateFn::ZERO, 0.0);
    let lin_sol = solve(&linear, &TerminalSpec::Quadratic, &lat, None, DEFAULT_TOL).unwrap();
    let expected = 1.01_f64.powi(-100) * gexp.root(&lat);
    let rel = (lin_sol.root() - expected).abs() / expected.abs();

    let short = lattice(10, 0.25);
    let constant = GeneratorSpec::custom("constant", |_, _, _| 4.0, RateFn::ZERO, RateFn::constant(4.0), 0.0);
    let const_sol = solve(&constant, &TerminalSpec::Constant { value: 0.0 }, &short, None, DEFAULT_TOL).unwrap();
    let const_gap = (const_sol.root() - 1.0).abs();

    solves.push(("zero quadratic N=100".into(), zero_sol));
    solves.push(("linear quadratic N=100".into(), lin_sol));
    solves.push(("constant N=10".into(), const_sol));
    outcome(
        reduction && rel <= 1e-9 && const_gap <= 1e-12,
        format!("zero-generator field identical to gexp: {reduction}; linear relative gap {rel:e}; constant gap {const_gap:e}"),
    )
}

fn criterion_5(solves: &[(String, GBSDESolution)]) -> Outcome {
    let mut problems = Vec::new();
    let mut worst_dk = f64::NEG_INFINITY;
    for (name, sol) in solves {
        let max_dk = sol.max_k_increment();
        worst_dk = worst_dk.max(max_dk);
        if max_dk.is_nan() || max_dk > 1e-10 {
            problems.push(format!("{name}: max dK {max_dk:e}"));
        }
        if !sol.k_at_maximizer().all(|dk| dk == 0.0) {
            problems.push(format!("{name}: nonzero dK at maximiser"));
        }
        for seed in 0..20 {
            let rec = simulate_path(sol, &Control::WorstCase, &Shocks::Seeded(seed)).unwrap();
            if !rec.k_cum.iter().all(|&k| k == 0.0) {
                problems.push(format!("{name}: worst-case path {seed} has K {}", rec.k_terminal()));
                break;
            }
        }
    }

    // σ_lo children need to land on grid nodes: two nodes per σ_hi√dt.
    let g = GConfig::new(0.5, 1.0).unwrap();
    let lat = Lattice::build(LatticeParams::new(1.0, 20, g, 2, 5.0).refinement(2)).unwrap();
    let sol = solve(&zero(), &TerminalSpec::Quadratic, &lat, None, DEFAULT_TOL).unwrap();
    let mut worst_kt = 0.0_f64;
    for seed in 0..20 {
        let rec = simulate_path(&sol, &Control::Sequence(vec![0.5; 20]), &Shocks::Seeded(seed)).unwrap();
        worst_kt = worst_kt.max((rec.k_terminal() - (0.25 - 1.0)).abs());
    }
    if worst_kt > 1e-6 {
        problems.push(format!("lower-volatility K_T off by {worst_kt:e}"));
    }
    outcome(
        problems.is_empty(),
        format!(
            "{} solves, largest dK {worst_dk:e}, lower-volatility K_T error {worst_kt:e}; problems: {problems:?}",
            solves.len()
        ),
    )
}

fn criterion_6(cfg: &RunConfig) -> Outcome {
    let start = Instant::now();
    let study = match run_convergence(cfg) {
        Ok(s) => s,
        Err(e) => return outcome(false, e.to_string()),
    };
    let secs = start.elapsed().as_secs_f64();
    let diffs: Vec<String> = study.rows.iter().map(|r| format!("{:.3e}", r.sup_diff)).collect();
    let slope_ok = study.slope.is_some_and(|s| (0.3..=1.1).contains(&s));
    outcome(
        study.strictly_decreasing && slope_ok && secs <= 600.0,
        format!("sup diffs [{}], slope {:?} ({secs:.1}s)", diffs.join(", "), study.slope),
    )
}

fn criterion_7(cfg: &RunConfig) -> Outcome {
    let audit = match run_norm_audit(cfg) {
        Ok(a) => a,
        Err(e) => return outcome(false, e.to_string()),
    };
    let rows: Vec<String> = audit
        .rows
        .iter()
        .map(|r| {
            format!(
                "a={} Y={:.4} Ypath={:.4} Z={:.4} K={:.4}",
                r.alpha, r.y_node_max, r.y_path_sup, r.z_h2, r.k_l2
            )
        })
        .collect();
    outcome(
        audit.verdict == "bounded" && audit.bound_violations == 0,
        format!(
            "verdict {}, bound violations {}; {}",
            audit.verdict,
            audit.bound_violations,
            rows.join("; ")
        ),
    )
}

fn criterion_8(cfg: &RunConfig) -> Outcome {
    let first = match run_stability(cfg) {
        Ok(s) => s,
        Err(e) => return outcome(false, e.to_string()),
    };
    let second = run_stability(cfg).unwrap();
    let bytes = |s: &harness::StabilityStudy| s.report().tables[0].to_csv().unwrap();
    let identical = bytes(&first) == bytes(&second) && first.repeat_identical;
    let ratios: Vec<String> = first.rows.iter().map(|r| format!("{:.6}", r.ratio)).collect();
    outcome(
        first.all_within_bound && identical,
        format!(
            "ratios [{}] vs bound {:.4}; repeat byte-identical: {identical}",
            ratios.join(", "),
            first.bound
        ),
    )
}

fn criterion_9() -> Outcome {
    let reports = match harness::picard_battery(&BatteryOptions::default()) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let gaps: Vec<String> = reports.iter().map(|r| format!("{}: {:e}", r.instance, r.engine_value)).collect();
    let failures = failed_reports(&reports);
    outcome(failures.is_empty(), format!("{}; failures: {failures:?}", gaps.join("; ")))
}

fn main() -> ExitCode {
    let cfg = sweep_config();
    let mut solves = Vec::new();
    let mut results = vec![
        ("1 yosida property battery", criterion_1()),
        ("2 resolvent closed forms", criterion_2()),
        ("3 sublinear expectation oracles", criterion_3()),
        ("4 solver closed forms", criterion_4(&mut solves)),
    ];

    let lat = cfg.build_lattice().unwrap();
    let spec = cfg.generator_spec().unwrap();
    let xi = cfg.terminal.sample(&lat).unwrap();
    for alpha in [None, Some(1e-1), Some(1e-3)] {
        let sol = solve_sampled(&spec, xi.clone(), &lat, alpha, cfg.tolerances.root).unwrap();
        solves.push((format!("signed_sqrt call N=200 alpha={alpha:?}"), sol));
    }
    results.push(("5 K structure", criterion_5(&solves)));
    results.push(("6 alpha convergence", criterion_6(&cfg)));
    results.push(("7 norm audit", criterion_7(&cfg)));
    results.push(("8 stability", criterion_8(&cfg)));
    results.push(("9 cross-solver agreement", criterion_9()));

    let mut all = true;
    for (name, o) in &results {
        all &= o.passed;
        println!("criterion {name}: {} | {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
