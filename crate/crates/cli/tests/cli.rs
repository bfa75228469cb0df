use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dpfl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpfl"))
        .args(args)
        .current_dir(dir)
        .env("DPFL_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

fn model_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let o = dpfl(dir.path(), &["gen-model", "--n-x", "3", "--n-y", "2", "--seed", "7", "--out", "m.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    dir
}

#[test]
fn check_model_prints_dims_and_information() {
    let dir = model_dir();
    let o = dpfl(dir.path(), &["check", "m.json"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("N_X = 3") && out.contains("N_Y = 2"), "{out}");
    let mi: f64 = out.split("I(X;Y) = ").nth(1).unwrap().split_whitespace().next().unwrap().parse().unwrap();
    assert!(mi > 0.0);

    let bits = dpfl(dir.path(), &["check", "m.json", "--bits"]);
    let b: f64 = stdout(&bits).split("I(X;Y) = ").nth(1).unwrap().split_whitespace().next().unwrap().parse().unwrap();
    assert!((b * std::f64::consts::LN_2 - mi).abs() < 1e-11);
}

#[test]
fn joint_with_short_mass_cites_row() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.json", r#"{"card_x": 2, "card_y": 2, "joint": [[0.45, 0.05], [0.3, 0.1]]}"#);
    let o = dpfl(dir.path(), &["check", "bad.json"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("row 0") && err.contains("row 1"), "{err}");
    assert!(stdout(&o).is_empty());
}

#[test]
fn ragged_joint_names_row() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.json", r#"{"card_x": 2, "card_y": 2, "joint": [[0.5, 0.25], [0.25]]}"#);
    let o = dpfl(dir.path(), &["check", "bad.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("row 1"), "{}", stderr(&o));
}

#[test]
fn unknown_request_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "j.json", r#"{"card_x": 2, "card_y": 2, "joint": [[0.4, 0.1], [0.1, 0.4]]}"#);
    write(dir.path(), "r.json", r#"{"source": "j.json", "beta": 0.2, "lambda": 0.3, "gamma": 0.1, "betta": 1}"#);
    let o = dpfl(dir.path(), &["solve-discrete", "r.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("betta"));
}

#[test]
fn discrete_solve_json_and_bits() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "j.json", r#"{"card_x": 2, "card_y": 2, "joint": [[0.4, 0.1], [0.1, 0.4]]}"#);
    write(dir.path(), "r.json", r#"{"source": "j.json", "beta": 0.2, "lambda": 0.3, "gamma": 0.1}"#);
    let nats = dpfl(dir.path(), &["solve-discrete", "r.json", "--trace", "--out", "res.json"]);
    assert_eq!(nats.status.code(), Some(0), "{}", stderr(&nats));
    let text = fs::read_to_string(dir.path().join("res.json")).unwrap();
    assert!(text.contains("\"units\": \"nats\"") && text.contains("\"trace\""));

    let bits = dpfl(dir.path(), &["solve-discrete", "r.json", "--bits"]);
    assert!(stdout(&bits).contains("\"units\": \"bits\""));
    assert!(!stdout(&bits).contains("\"trace\""));
}

#[test]
fn solver_failure_exits_two() {
    let dir = model_dir();
    // A correlation weight far above the compression weights makes the
    // noise-precision update indefinite.
    write(dir.path(), "g.json", r#"{"model": "m.json", "beta": 0.2, "lambda": 0.3, "gamma": 5.0}"#);
    let o = dpfl(dir.path(), &["solve-gaussian", "g.json"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("PSD"));
}

#[test]
fn sweep_csv_is_reproducible() {
    let dir = model_dir();
    write(
        dir.path(),
        "s.json",
        r#"{"problem": "m.json", "solver": "gaussian", "betas": [0.1, 0.3], "lambdas": [0.2, 0.4], "gammas": [0.0, 0.05], "restarts": 2}"#,
    );
    let a = dpfl(dir.path(), &["sweep", "--config", "s.json", "--out", "a.csv"]);
    let b = dpfl(dir.path(), &["sweep", "--config", "s.json", "--out", "b.csv"]);
    assert!(a.status.success() && b.status.success(), "{}", stderr(&a));
    let (a, b) = (fs::read(dir.path().join("a.csv")).unwrap(), fs::read(dir.path().join("b.csv")).unwrap());
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("beta,lambda,gamma,seed,i_x_t1,i_x_t2,i_t1_t2,i_y_t1t2,functional,iterations,converged\n"));
    assert_eq!(text.lines().count(), 9);
    // Only the two outputs and the inputs remain; no temporary files linger.
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 4);
}

#[test]
fn sweep_svg_has_frontier_and_labels() {
    let dir = model_dir();
    write(
        dir.path(),
        "s.json",
        r#"{"problem": "m.json", "solver": "gaussian", "betas": [0.2], "lambdas": [0.2], "gammas": [0.0, 0.05, 0.1]}"#,
    );
    let o = dpfl(
        dir.path(),
        &["sweep", "--config", "s.json", "--format", "svg", "--x", "i_t1_t2", "--y", "i_y_t1t2"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let svg = stdout(&o);
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert!(svg.contains("class=\"frontier\""));
    assert!(svg.contains("(nats)"));
    assert!(!svg.contains("href"));
}

#[test]
fn unknown_axis_is_a_usage_error() {
    let dir = model_dir();
    let o = dpfl(dir.path(), &["sweep", "--config", "s.json", "--x", "nonsense"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nonsense"));
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = dpfl(dir.path(), &["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("solve-discrete"));
}
