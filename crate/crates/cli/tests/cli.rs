use std::process::{Command, Output};

use serde_json::Value;
use twophase_cli::output::SCHEMA;

fn twophase(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twophase"))
        .args(args)
        .env("TWOPHASE_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Run, require success, validate against the schema and return the record.
fn record(args: &[&str]) -> Value {
    let o = twophase(args);
    assert_eq!(code(&o), 0, "{args:?}: {}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).expect("json output");
    let schema: Value = serde_json::from_str(SCHEMA).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(&v).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{args:?}: {errors:?}");
    v
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn ops_examples() {
    let o = twophase(&["ops", "--j", "1/2", "--axis", "z"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("[0.5, 0]") && text.contains("[0, -0.5]"), "{text}");

    let v = record(&["ops", "--j", "1", "--axis", "x", "--format", "json"]);
    let m = v["results"]["operators"]["x"].as_array().unwrap();
    assert_eq!(m.len(), 3);
    for r in 0..3 {
        for c in 0..3 {
            assert_eq!(m[r][c][0], m[c][r][0]);
            assert_eq!(f(&m[r][c][1]), -f(&m[c][r][1]));
        }
    }
    assert!(f(&v["results"]["commutator_residual"]) <= 1e-12);
    assert_eq!(v["inputs"]["j"]["two_j"], 2);

    let o = twophase(&["ops", "--j", "3/2", "--axis", "y", "--basis"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().filter(|l| l.trim_start().starts_with('[')).count(), 4);
}

#[test]
fn spin_zero_is_a_usage_error() {
    let o = twophase(&["ops", "--j", "0"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("1/2"), "{}", stderr(&o));
}

#[test]
fn qfi_examples() {
    let v = record(&["qfi", "--j", "1", "--state", "dicke:j=1,m=0,axis=z", "--phi", "0,0"]);
    assert!(close(f(&v["results"]["delta_phi"]), 0.70711, 1e-5));
    assert!(f(&v["results"]["analytic_vs_numeric"]) <= 1e-6);
    assert_eq!(v["inputs"]["j"]["j"], 1.0);

    let v = record(&["qfi", "--j", "2", "--state", "css:z", "--phi", "0,0"]);
    let h = &v["results"]["h"];
    assert!(close(f(&h[0][0]), 4.0, 1e-9) && close(f(&h[1][1]), 4.0, 1e-9) && close(f(&h[0][1]), 0.0, 1e-9));
    assert!(close(f(&v["results"]["delta_phi"]), 0.70711, 1e-5));
    assert!(close(f(&v["results"]["achievability_residual"]), 4.0, 1e-9));

    let v = record(&["qfi", "--j", "3/2", "--state", "joint", "--order", "first", "--phi", "0.05,0"]);
    let h1 = &v["results"]["first_order"];
    for r in 0..2 {
        for c in 0..2 {
            assert!(f(&h1[r][c]).abs() <= 1e-12);
        }
    }
    assert!(close(f(&v["results"]["trace_inverse"]), 1.0 / 3.5, 1e-8));

    let v = record(&["qfi", "--state", "raw:[1,0,0,1]/j=3/2", "--order", "numeric", "--phi", "-0.01,0.02"]);
    assert_eq!(v["inputs"]["j"]["text"], "3/2");
}

#[test]
fn singular_qfi_is_a_domain_error() {
    let o = twophase(&["qfi", "--j", "1", "--state", "dicke:m=1,axis=x"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("unestimable direction (1, 0)"), "{}", stderr(&o));
}

#[test]
fn bad_state_and_step_are_usage_errors() {
    assert_eq!(code(&twophase(&["qfi", "--j", "1", "--state", "dicke:j=1,m=3"])), 2);
    assert_eq!(code(&twophase(&["qfi", "--j", "1", "--state", "nope:x"])), 2);
    assert_eq!(code(&twophase(&["qfi", "--j", "1", "--state", "css:z", "--order", "numeric", "--step", "1"])), 2);
}

#[test]
fn scan_csv_table() {
    let o = twophase(&["scan", "--jmin", "1/2", "--jmax", "10", "--strategies", "all", "--out", "csv"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("two_j,j,parity,strategy,delta_phi"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 80);
    let find = |j: &str, s: &str| -> f64 {
        rows.iter().find(|r| r[1] == j && r[3] == s).map(|r| r[4].parse().unwrap()).unwrap()
    };
    assert!(close(find("4.0", "sequential"), 0.25, 1e-12));
    assert!(close(find("4.0", "sql"), 0.70711, 1e-5));
    assert!(close(find("1.0", "joint"), 0.70711, 1e-5));
    assert_eq!(rows[0][2], "semi-odd");
    // ascending j, strategy order within each j
    let order: Vec<&str> = rows[..4].iter().map(|r| r[3].as_str()).collect();
    assert_eq!(order, ["joint", "sequential", "sequential_spin", "sql"]);

    let again = twophase(&["scan", "--jmin", "1/2", "--jmax", "10"]);
    assert_eq!(stdout(&again), text);
}

#[test]
fn scan_json_and_file_output() {
    let v = record(&["scan", "--jmin", "1/2", "--jmax", "2", "--strategies", "joint,sql", "--out", "json"]);
    let rows = v["results"].as_array().unwrap();
    assert_eq!(rows.len(), 8);
    assert_eq!(rows[0]["strategy"], "joint");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig.csv");
    let o = twophase(&["scan", "--jmax", "2", "--output", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 17);

    let bad = dir.path().join("missing").join("fig.csv");
    let o = twophase(&["scan", "--output", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));

    assert_eq!(code(&twophase(&["scan", "--jmin", "3", "--jmax", "1"])), 2);
    assert_eq!(code(&twophase(&["scan", "--strategies", "bogus"])), 2);
}

#[test]
fn simulate_from_flags_and_job_file() {
    let args = [
        "simulate", "--j", "2", "--probe", "css:z", "--phi", "0.01,0.005", "--m", "10000", "--seed", "7",
    ];
    let v = record(&args);
    let r = &v["results"];
    let var = f(&r["empirical_variances"]["x"]);
    let pred = f(&r["propagation_prediction"]["x"]);
    assert!(((var - pred) / pred).abs() <= 0.2, "{var} vs {pred}");
    assert_eq!(v["inputs"]["seed"], 7);
    assert_eq!(r["seed"], 7);

    let again = record(&args);
    assert_eq!(again["results"]["estimates"], v["results"]["estimates"]);

    let dir = tempfile::tempdir().unwrap();
    let job = dir.path().join("job.json");
    std::fs::write(
        &job,
        r#"{"j": "2", "probe": "seq:axis=x,xi=0", "phi_true": {"x": 0.01, "y": 0.0}, "m_total": 10000, "seed": 3}"#,
    )
    .unwrap();
    let v = record(&["simulate", "--job", job.to_str().unwrap()]);
    assert_eq!(v["inputs"]["estimator"], "ghz");
    let scaled = f(&v["results"]["scaled_variances"]["x"]);
    assert!(((scaled - 1.0 / 16.0) * 16.0).abs() <= 0.25, "{scaled}");

    let missing = dir.path().join("absent.json");
    assert_eq!(code(&twophase(&["simulate", "--job", missing.to_str().unwrap()])), 4);
    std::fs::write(&job, "{not json").unwrap();
    assert_eq!(code(&twophase(&["simulate", "--job", job.to_str().unwrap()])), 2);
}

#[test]
fn divergent_probe_is_a_domain_error() {
    let o = twophase(&["simulate", "--j", "2", "--probe", "dicke:m=0", "--m", "1000", "--estimator", "spin"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let o = twophase(&["simulate", "--j", "2", "--probe", "css:z", "--m", "1000", "--estimator", "ghz"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn optimize_reports_state_and_closed_form() {
    let v = record(&["optimize", "--j", "1", "--restarts", "8", "--seed", "5"]);
    let r = &v["results"];
    assert!(close(f(&r["best_value"]), 0.5, 1e-6));
    assert!(close(f(&r["closed_form"]), 0.5, 1e-12));
    assert_eq!(r["best_state"]["amplitudes"].as_array().unwrap().len(), 3);
    assert_eq!(r["objective_trace"].as_array().unwrap().len(), 8);
    assert_eq!(v["inputs"]["seed"], 5);

    let v = record(&["optimize", "--j", "3/2", "--ancilla", "2", "--restarts", "8"]);
    assert!(close(f(&v["results"]["best_value"]), 1.0 / 3.5, 1e-6));
    assert_eq!(v["results"]["best_state"]["amplitudes"].as_array().unwrap().len(), 8);

    let v = record(&["optimize", "--j", "2", "--objective", "variance_x", "--restarts", "8"]);
    assert!(close(f(&v["results"]["best_value"]), 4.0, 1e-8));

    let v = record(&["optimize", "--j", "1/2", "--objective", "two_mode_margin", "--restarts", "8"]);
    assert!(f(&v["results"]["best_value"]) > 0.1);
    assert!(v["results"]["closed_form"].is_null());

    assert_eq!(code(&twophase(&["optimize", "--j", "1", "--objective", "variance_x", "--ancilla", "2"])), 2);
}

#[test]
fn squeeze_reports() {
    let v = record(&["squeeze", "--j", "2", "--state", "squeezed"]);
    let r = &v["results"];
    assert_eq!(r["squeezed"], true);
    assert!(close(f(&r["delta_phi"]), 1.0 / 6f64.sqrt(), 1e-9));
    assert!(close(f(&r["sql"]), 0.5, 1e-12));

    let v = record(&["squeeze", "--j", "2", "--state", "css:z"]);
    assert_eq!(v["results"]["squeezed"], false);
    assert!(close(f(&v["results"]["kitagawa_ueda"]), 1.0, 1e-9));

    let v = record(&["squeeze", "--state", "product:(css:j=1,axis=z)(css:j=1,axis=z)", "--two-mode"]);
    assert_eq!(v["results"]["two_mode_squeezed"], false);
    assert!(f(&v["results"]["margin"]).abs() <= 1e-12);

    let o = twophase(&["squeeze", "--j", "2", "--state", "seq:axis=x"]);
    assert_eq!(code(&o), 3);
    assert_eq!(code(&twophase(&["squeeze", "--j", "2", "--state", "css:z", "--axis", "z"])), 2);
}

#[test]
fn verify_subset_table_and_json() {
    let o = twophase(&["verify", "--only", "1,2,11"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("[PASS]")).count(), 3);

    let v = record(&["verify", "--only", "5", "--format", "json"]);
    assert_eq!(v["results"]["all_passed"], true);
    assert_eq!(v["results"]["criteria"][0]["id"], 5);

    assert_eq!(code(&twophase(&["verify", "--only", "12"])), 2);
}
