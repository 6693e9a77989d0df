use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use gbsde_core::harness::{
    load_config, num, oracle_report, presets, run_convergence, run_generator_distance, run_norm_audit, run_oracle_battery, run_stability,
    write_reports, BatteryOptions, Report, RunConfig, Table,
};
use gbsde_core::solver::solve;
use gbsde_core::sublinear::{conditional_g_expectation, Lattice, ValueField};
use gbsde_core::yosida::{validate_assumptions, yosida_audit, AuditBoxes, GeneratorSpec, LimitProbe, SamplingBox, DEFAULT_TOL};
use gbsde_core::{Error, ErrorKind};

#[derive(Debug, Parser)]
#[command(name = "gbsde", version, about = "Lattice laboratory for G-BSDEs with monotone generators")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sublinear expectation of the configured payoff on every lattice node.
    Gexp,
    /// One backward solve of the configured equation.
    Solve {
        /// Solve with the regularized generator at this α.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Sampled inequality battery for the resolvent and the approximants.
    /// Runs the built-in generators unless `--config` is given.
    YosidaAudit {
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// Distance of the regularized solutions from the reference, per α.
    Converge,
    /// Distance between f and its regularization along the reference solution.
    Distance,
    /// Norm estimates per α with a boundedness verdict.
    Norms,
    /// Response of the solution to terminal perturbations.
    Stability,
    /// Every independent oracle against the engine.
    OracleCheck,
}

/// Exit status: 0 success, 1 bad input or I/O, 2 numerical failure,
/// 3 a checked property failed.
enum Failure {
    Error(Error),
    Usage(String),
    Numerical(String),
    Violation(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Error(e) => match e.kind() {
                ErrorKind::Validation | ErrorKind::Io => 1,
                ErrorKind::Numerical => 2,
            },
            Failure::Numerical(_) => 2,
            Failure::Violation(_) => 3,
        }
    }
}

struct Outcome {
    report: Report,
    config: Option<RunConfig>,
    dir: PathBuf,
    /// Property failures, reported after the files are written.
    violations: Vec<String>,
    /// Per-row numerical failures.
    row_errors: Vec<String>,
}

fn config(cli: &Cli) -> Result<Option<RunConfig>, Failure> {
    let Some(path) = &cli.config else {
        return Ok(None);
    };
    let mut cfg = load_config(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(Some(cfg))
}

fn required(cfg: Option<RunConfig>, command: &str) -> Result<RunConfig, Failure> {
    cfg.ok_or_else(|| Failure::Usage(format!("`{command}` needs --config <path>")))
}

fn out_dir(cli: &Cli, cfg: Option<&RunConfig>) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.map(|c| c.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn field_table(file: &str, field: &ValueField, lattice: &Lattice) -> Table {
    let mut t = Table::new(file, &["t", "x", "value"]);
    for (i, slice) in field.slices().iter().enumerate() {
        for (k, v) in slice.iter().enumerate() {
            t.push(vec![num(lattice.t(i)), num(lattice.x(k)), num(*v)]);
        }
    }
    t
}

fn run_gexp(cfg: RunConfig, dir: PathBuf) -> Result<Outcome, Failure> {
    let start = Instant::now();
    let lattice = cfg.build_lattice()?;
    let field = conditional_g_expectation(&cfg.terminal, &lattice)?;
    let report = Report {
        command: "gexp".into(),
        tables: vec![field_table("gexp.csv", &field, &lattice)],
        summary: json!({ "terminal": cfg.terminal, "root": field.root(&lattice), "nodes": lattice.nodes(), "steps": lattice.steps() }),
        timings: vec![("gexp".into(), start.elapsed().as_secs_f64())],
    };
    Ok(Outcome::clean(report, Some(cfg), dir))
}

fn run_solve(cfg: RunConfig, alpha: Option<f64>, dir: PathBuf) -> Result<Outcome, Failure> {
    if let Some(a) = alpha {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Failure::Usage(format!("--alpha must be positive, got {a}")));
        }
    }
    let start = Instant::now();
    let lattice = cfg.build_lattice()?;
    let spec = cfg.generator_spec()?;
    let sol = solve(&spec, &cfg.terminal, &lattice, alpha, cfg.tolerances.root)?;
    let mut sigma = Table::new("sigma_star.csv", &["t", "x", "sigma"]);
    for (i, slice) in sol.sigma_star.slices().iter().enumerate() {
        for (k, s) in slice.iter().enumerate() {
            sigma.push(vec![num(lattice.t(i)), num(lattice.x(k)), num(*s)]);
        }
    }
    let mut k_table = Table::new("K.csv", &["t", "x", "sigma", "delta_k"]);
    for i in 0..lattice.steps() {
        for k in 0..lattice.nodes() {
            for (m, s) in lattice.vol_set().iter().enumerate() {
                k_table.push(vec![num(lattice.t(i)), num(lattice.x(k)), num(*s), num(sol.k_increment(i, k, m))]);
            }
        }
    }
    let report = Report {
        command: "solve".into(),
        tables: vec![
            field_table("Y.csv", &sol.y, &lattice),
            field_table("Z.csv", &sol.z, &lattice),
            sigma,
            k_table,
        ],
        summary: json!({
            "generator": spec.name(),
            "alpha": alpha,
            "root": sol.root(),
            "max_k_increment": sol.max_k_increment(),
        }),
        timings: vec![("solve".into(), start.elapsed().as_secs_f64())],
    };
    Ok(Outcome::clean(report, Some(cfg), dir))
}

fn run_audit(cfg: Option<RunConfig>, samples: usize, seed: u64, dir: PathBuf) -> Result<Outcome, Failure> {
    let (horizon, specs) = match &cfg {
        Some(c) => (c.lattice.horizon, vec![c.generator_spec()?]),
        None => (
            1.0,
            presets::PRESET_NAMES
                .iter()
                .map(|n| presets::preset(n, 1.0).and_then(|g| GeneratorSpec::from_config(&g)))
                .collect::<Result<Vec<_>, _>>()?,
        ),
    };
    let probes = [
        LimitProbe {
            t: 0.3 * horizon,
            y: 2.0,
            z: 0.5,
        },
        LimitProbe {
            t: 0.7 * horizon,
            y: -1.5,
            z: -1.0,
        },
    ];
    let mut checks = Table::new("audit.csv", &["generator", "check", "checked", "violations", "worst_margin"]);
    let mut limits = Table::new("pointwise.csv", &["generator", "t", "y", "z", "alpha", "gap"]);
    let mut assumptions = Table::new("assumptions.csv", &["generator", "condition", "checked", "violations"]);
    let mut summaries = Vec::new();
    let mut violations = Vec::new();
    let mut timings = Vec::new();
    for spec in &specs {
        let start = Instant::now();
        let valid = validate_assumptions(spec, samples, seed, SamplingBox::default_for(horizon));
        let audit = yosida_audit(spec, samples, seed, AuditBoxes::default_for(horizon), DEFAULT_TOL, &probes);
        timings.push((spec.name().to_string(), start.elapsed().as_secs_f64()));
        for (name, c) in [
            ("monotonicity", &valid.monotonicity),
            ("growth", &valid.growth),
            ("lipschitz_z", &valid.lipschitz_z),
        ] {
            assumptions.push(vec![spec.name().into(), name.into(), c.checked.to_string(), c.violations.to_string()]);
        }
        for c in &audit.checks {
            checks.push(vec![
                spec.name().into(),
                c.name.into(),
                c.checked.to_string(),
                c.violations.to_string(),
                num(c.worst_margin),
            ]);
            if c.violations > 0 {
                violations.push(format!("{}: {} has {} violations", spec.name(), c.name, c.violations));
            }
        }
        for p in &audit.pointwise {
            for (a, g) in p.alphas.iter().zip(&p.gaps) {
                limits.push(vec![spec.name().into(), num(p.probe.t), num(p.probe.y), num(p.probe.z), num(*a), num(*g)]);
            }
            if !p.passed() {
                violations.push(format!("{}: pointwise limit fails at {:?}", spec.name(), p.probe));
            }
        }
        if !valid.passed() {
            violations.push(format!("{}: sampled assumptions fail", spec.name()));
        }
        summaries.push(json!({ "assumptions": valid, "audit": audit }));
    }
    let report = Report {
        command: "yosida-audit".into(),
        tables: vec![checks, limits, assumptions],
        summary: json!({ "samples": samples, "seed": seed, "generators": summaries }),
        timings,
    };
    Ok(Outcome {
        report,
        config: cfg,
        dir,
        violations,
        row_errors: Vec::new(),
    })
}

fn run_oracles(dir: PathBuf) -> Result<Outcome, Failure> {
    let start = Instant::now();
    let reports = run_oracle_battery(&BatteryOptions::default())?;
    let violations = reports
        .iter()
        .filter(|r| !r.passed)
        .map(|r| format!("{} [{}]: gap {:e} above {:e}", r.oracle, r.instance, r.gap, r.tolerance))
        .collect();
    let report = oracle_report(&reports, vec![("battery".into(), start.elapsed().as_secs_f64())]);
    Ok(Outcome {
        report,
        config: None,
        dir,
        violations,
        row_errors: Vec::new(),
    })
}

impl Outcome {
    fn clean(report: Report, config: Option<RunConfig>, dir: PathBuf) -> Self {
        Outcome {
            report,
            config,
            dir,
            violations: Vec::new(),
            row_errors: Vec::new(),
        }
    }

    fn checked(report: Report, config: RunConfig, dir: PathBuf, violations: Vec<String>, row_errors: Vec<String>) -> Self {
        Outcome {
            report,
            config: Some(config),
            dir,
            violations,
            row_errors,
        }
    }
}

fn errors<'a>(rows: impl Iterator<Item = (f64, &'a Option<String>)>) -> Vec<String> {
    rows.filter_map(|(alpha, e)| e.as_ref().map(|e| format!("alpha={alpha}: {e}"))).collect()
}

fn dispatch(cli: &Cli) -> Result<Outcome, Failure> {
    let cfg = config(cli)?;
    let dir = out_dir(cli, cfg.as_ref());
    match &cli.command {
        Command::Gexp => run_gexp(required(cfg, "gexp")?, dir),
        Command::Solve { alpha } => run_solve(required(cfg, "solve")?, *alpha, dir),
        Command::YosidaAudit { samples } => {
            let seed = cli.seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(0);
            run_audit(cfg, *samples, seed, dir)
        }
        Command::Converge => {
            let cfg = required(cfg, "converge")?;
            let study = run_convergence(&cfg)?;
            let mut violations = Vec::new();
            if !study.non_increasing_with_allowance {
                violations.push("sup differences increase as alpha decreases".into());
            }
            let row_errors = errors(study.rows.iter().map(|r| (r.alpha, &r.error)));
            Ok(Outcome::checked(study.report(), cfg, dir, violations, row_errors))
        }
        Command::Distance => {
            let cfg = required(cfg, "distance")?;
            let study = run_generator_distance(&cfg)?;
            let mut violations = Vec::new();
            if !study.non_increasing {
                violations.push("generator distance increases as alpha decreases".into());
            }
            let row_errors = errors(study.rows.iter().map(|r| (r.alpha, &r.error)));
            Ok(Outcome::checked(study.report(), cfg, dir, violations, row_errors))
        }
        Command::Norms => {
            let cfg = required(cfg, "norms")?;
            let audit = run_norm_audit(&cfg)?;
            let mut violations = Vec::new();
            if audit.verdict != "bounded" {
                violations.push(format!("norm verdict {}", audit.verdict));
            }
            if audit.bound_violations > 0 {
                violations.push(format!("{} nodes exceed the a-priori bound", audit.bound_violations));
            }
            let row_errors = errors(audit.rows.iter().map(|r| (r.alpha, &r.error)));
            Ok(Outcome::checked(audit.report(), cfg, dir, violations, row_errors))
        }
        Command::Stability => {
            let cfg = required(cfg, "stability")?;
            let study = run_stability(&cfg)?;
            let mut violations = Vec::new();
            if !study.all_within_bound {
                violations.push(format!("a perturbation response exceeds the bound {}", study.bound));
            }
            if !study.repeat_identical {
                violations.push("repeated solves differ".into());
            }
            Ok(Outcome::checked(study.report(), cfg, dir, violations, Vec::new()))
        }
        Command::OracleCheck => run_oracles(dir),
    }
}

fn finish(outcome: Outcome) -> Result<(), Failure> {
    let files = write_reports(&outcome.report, outcome.config.as_ref(), &outcome.dir)?;
    for f in &files {
        println!("wrote {}", f.display());
    }
    if !outcome.row_errors.is_empty() {
        for e in &outcome.row_errors {
            eprintln!("error: {e}");
        }
        return Err(Failure::Numerical(format!("{} of the alpha rows failed", outcome.row_errors.len())));
    }
    if !outcome.violations.is_empty() {
        return Err(Failure::Violation(outcome.violations.join("; ")));
    }
    Ok(())
}

fn main() -> ExitCode {
    // clap exits with 2 on bad arguments, which here means a numerical failure.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(&cli).and_then(finish) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Error(e) => eprintln!("error: {e}"),
                Failure::Usage(m) | Failure::Numerical(m) => eprintln!("error: {m}"),
                Failure::Violation(m) => eprintln!("property violation: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
