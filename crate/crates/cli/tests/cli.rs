use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dirichlet-lab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(args: &[&str]) -> Value {
    let out = run(args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON report")
}

fn f(v: &Value) -> f64 {
    v.as_f64().expect("number")
}

#[test]
fn classify_reports_regime_and_closure() {
    for (w, regime, d0) in [
        ("t^0.5", "ZeroOnly", "KernelOfTraceZero"),
        ("t", "Neither", "WholeSpace"),
        ("t^2", "InfinityOnly", "KernelOfTraceInfinity"),
        ("t^0.5*(1+t)^1", "Both", "IntersectionOfKernels"),
    ] {
        let r = report(&["classify", "--weight", w, "--p", "2"]);
        assert_eq!(r["schema"], "dirichlet-lab/1");
        assert_eq!(r["result"]["regime"], regime, "{w}");
        assert_eq!(r["result"]["d0"], d0, "{w}");
        assert_eq!(r["config"]["weight"], w);
        assert!(r["result"]["bp_zero"]["integral"]["verdict"].is_string());
    }
}

#[test]
fn minimize_matches_the_oracle() {
    let r = report(&["minimize", "--weight", "1", "--p", "2", "--k", "1", "--K", "3", "--a", "1"]);
    assert!((f(&r["result"]["energy"]) - 0.5).abs() < 1e-12);
    assert!((f(&r["result"]["oracle_energy"]) - 0.5).abs() < 1e-8);
    let csv = run(&["minimize", "--k", "1", "--K", "3", "--a", "1", "--n", "5", "--output", "csv"]);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("t,phi,discrete"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn floats_carry_seventeen_significant_digits() {
    let out = run(&["interp", "--weight", "1", "--p", "2", "--weight1", "t^2", "--p1", "4", "--theta", "0.5"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"p_theta\":2.6666666666666665e0"), "{text}");
}

#[test]
fn errors_are_single_machine_readable_lines() {
    for (args, code) in [
        (vec!["classify", "--weight", "t^"], "E_SYNTAX"),
        (vec!["frobnicate"], "E_USAGE"),
        (vec!["classify", "--weight", "0-t"], "E_WEIGHT_NONPOSITIVE"),
        (vec!["minimize", "--k", "1"], "E_USAGE"),
        (vec!["trace", "--weight", "t^2", "--function", "{\"anchor\":1,\"anchor_value\":0,\"derivative\":\"1\"}"], "E_TRACE_UNDEFINED"),
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.lines().count(), 1, "{err}");
        assert!(err.starts_with(&format!("error {code}: ")), "{err}");
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn undetermined_answers_exit_with_two() {
    let u = "{\"anchor\":1,\"anchor_value\":1,\"derivative\":\"0\"}";
    let out = run(&["approx", "--function", u, "--construction", "caloric-tail", "--n", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("n,s_n,t_n,gap,predicted_gap,verdict\n"));
    assert!(text.lines().skip(1).all(|l| l.ends_with(",Undecided")));
    let out = run(&["approx", "--function", u, "--construction", "caloric-tail", "--n", "12"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn hardy_reports_estimates_and_witnesses() {
    let r = report(&["hardy", "--weight", "1", "--h", "t^(0-2)", "--trials", "10"]);
    assert_eq!(r["result"]["condition"]["bounded"], "Yes");
    assert!(f(&r["result"]["constant_estimate"]["estimate"]) >= 1.8);
    let r = report(&["hardy", "--weight", "1", "--h", "1"]);
    assert_eq!(r["result"]["condition"]["bounded"], "No");
    assert_eq!(r["result"]["condition"]["quantities"][0]["value"], "Infinity");
    assert_eq!(r["result"]["divergence_witness"]["diverging"], true);
}

#[test]
fn trace_omega_and_morrey_reports() {
    let u = "{\"anchor\":1,\"anchor_value\":4,\"derivative\":\"1\",\"label\":\"3+t\"}";
    let r = report(&["trace", "--function", u]);
    let tr = &r["result"]["trace"];
    assert!((f(&tr["value"]) - 3.0).abs() <= f(&tr["certified_error"]));
    assert_eq!(r["config"]["function_spec"]["derivative"], "1");

    let v = "{\"anchor\":1,\"anchor_value\":0,\"derivative\":\"1/(1+t)^2\"}";
    let r = report(&["morrey", "--function", v, "--grid", "0.5,1,2,4"]);
    assert!(f(&r["result"]["modulus"]["value"]) <= f(&r["result"]["seminorm"]));
    assert_eq!(r["result"]["within_bound"], true);
    assert!((f(&r["result"]["seminorm"]) - (1.0f64 / 3.0).sqrt()).abs() < 1e-9);

    let out = run(&["omega", "--weight", "t^0.5", "--grid", "1,4", "--output", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "t,omega0,omega_inf");
    assert!(rows[1].ends_with(",undefined"));
    let omega0: f64 = rows[2].split(',').nth(1).unwrap().parse().unwrap();
    assert!((omega0 - 2.0).abs() < 1e-12, "{omega0}");
}

#[test]
fn reports_are_byte_identical_across_runs() {
    for args in [
        vec!["classify", "--weight", "t^0.5*(1+t)^1"],
        vec!["hardy", "--weight", "1", "--h", "t^(0-2)", "--trials", "5", "--seed", "7"],
    ] {
        assert_eq!(run(&args).stdout, run(&args).stdout, "{args:?}");
    }
}
