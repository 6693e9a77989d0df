use std::fs;

use approx::assert_relative_eq;

use gbsde_core::harness::{parse_config, run_convergence, run_generator_distance, run_norm_audit, run_stability, write_reports, RunConfig};
use gbsde_core::solver::solve_sampled;
use gbsde_core::ErrorKind;

fn config(generator: &str, terminal: &str, steps: usize) -> RunConfig {
    parse_config(&format!(
        r#"{{
            "lattice": {{"horizon": 1, "steps": {steps}, "sigma_lo": 0.5, "sigma_hi": 1, "m_vol": 3, "truncation_factor": 4}},
            "generator": {generator},
            "terminal": {terminal},
            "alpha_schedule": [1e-1, 1e-2],
            "seed": 7,
            "sampling": {{"paths": 50}}
        }}"#
    ))
    .unwrap()
}

const ZERO: &str =
    r#"{"driver": {"kind": "zero"}, "u": {"kind": "constant", "value": 0}, "h": {"kind": "constant", "value": 0}, "lipschitz_z": 0, "m_bound": 0}"#;
const LINEAR: &str = r#"{"driver": {"kind": "linear_decay", "k": 1}, "u": {"kind": "constant", "value": 1}, "h": {"kind": "constant", "value": 0}, "lipschitz_z": 0, "m_bound": 1}"#;

#[test]
fn zero_generator_has_zero_distance() {
    let study = run_generator_distance(&config(ZERO, r#"{"kind": "quadratic"}"#, 20)).unwrap();
    assert!(study.rows.iter().all(|r| r.distance == 0.0 && r.error.is_none()));
}

#[test]
fn zero_generator_with_constant_terminal_has_no_k() {
    let audit = run_norm_audit(&config(ZERO, r#"{"kind": "constant", "value": 2}"#, 20)).unwrap();
    for row in &audit.rows {
        assert_eq!(row.k_l2, 0.0);
        assert_eq!(row.z_h2, 0.0);
        assert_eq!(row.y_node_max, 2.0);
    }
    assert_eq!(audit.verdict, "bounded");
}

#[test]
fn zero_generator_shifts_by_epsilon() {
    let study = run_stability(&config(ZERO, r#"{"kind": "constant", "value": 0}"#, 20)).unwrap();
    assert!(study.repeat_identical);
    for row in &study.rows {
        assert_relative_eq!(row.max_dy, row.epsilon, max_relative = 1e-12);
    }
    assert!(study.all_within_bound);
}

#[test]
fn linear_generator_converges_in_alpha() {
    let study = run_convergence(&config(LINEAR, r#"{"kind": "call", "strike": 0}"#, 40)).unwrap();
    assert!(study.rows.iter().all(|r| r.error.is_none()));
    // f = −y is Lipschitz, so f^α → f and the solutions approach the reference.
    assert!(study.rows[1].sup_diff < study.rows[0].sup_diff);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let cfg = config(LINEAR, r#"{"kind": "quadratic"}"#, 20);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let files_a = write_reports(&run_stability(&cfg).unwrap().report(), Some(&cfg), a.path()).unwrap();
    write_reports(&run_stability(&cfg).unwrap().report(), Some(&cfg), b.path()).unwrap();
    for path in files_a.iter().filter(|p| p.extension().is_some_and(|e| e == "csv")) {
        let name = path.file_name().unwrap();
        assert_eq!(fs::read(path).unwrap(), fs::read(b.path().join(name)).unwrap());
    }
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(a.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "stability");
    assert_eq!(manifest["config"]["seed"], 7);
}

#[test]
fn config_errors_name_the_field() {
    let err = parse_config(r#"{"lattice": {"horizon": 1, "step": 2}}"#).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Validation);
    let text = err.to_string();
    assert!(text.contains("lattice"), "{text}");
    assert!(text.contains("did you mean `steps`?"), "{text}");
}

#[test]
fn linear_generator_discounts_a_constant_shift() {
    let cfg = config(LINEAR, r#"{"kind": "constant", "value": 0}"#, 50);
    let spec = cfg.generator_spec().unwrap();
    let lat = cfg.build_lattice().unwrap();
    let eps = 1e-2;
    let sol = solve_sampled(&spec, vec![eps; lat.nodes()], &lat, None, 1e-14).unwrap();
    let expected = eps * (1.0 + lat.dt()).powi(-(lat.steps() as i32));
    assert_relative_eq!(sol.root(), expected, max_relative = 1e-12);
}
