use std::fs;

use nalgebra::DVector;
use relmotion::cases::{case_a, case_a_nonuniform};
use relmotion::cli::cli_main;
use relmotion::io::{
    case_to_json, load_case, parse_case, read_trajectory_csv, save_case, save_trajectory_csv,
    write_trajectory_csv,
};
use relmotion::{integrate, solve_equilibrium, Disturbance, Error, Trajectory};

fn cli(args: &[&str]) -> i32 {
    cli_main(std::iter::once("relmotion").chain(args.iter().copied()))
}

#[test]
fn case_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.json");
    let mut case = case_a();
    case.machines[0].pm = 0.1 + 0.2;
    case.network.g[1] = 1.0 / 3.0;
    save_case(&case, &p).unwrap();
    assert_eq!(load_case(&p).unwrap(), case);
}

#[test]
fn diagonal_c_names_location() {
    let mut v: serde_json::Value = serde_json::from_str(&case_to_json(&case_a())).unwrap();
    v["network"]["C"][0][0] = serde_json::json!(0.5);
    let err = parse_case(&v.to_string()).unwrap_err();
    match err {
        Error::Validation(msgs) => assert!(
            msgs.iter().any(|m| m.contains("network.C[0][0]")),
            "{msgs:?}"
        ),
        other => panic!("{other:?}"),
    }
}

#[test]
fn truncated_file_is_parse_error() {
    let text = case_to_json(&case_a());
    let err = parse_case(&text[..text.len() / 2]).unwrap_err();
    assert!(matches!(err, Error::Parse(_)));
}

#[test]
fn schema_errors() {
    let mut v: serde_json::Value = serde_json::from_str(&case_to_json(&case_a())).unwrap();
    v["schema_version"] = serde_json::json!(2);
    assert!(matches!(parse_case(&v.to_string()), Err(Error::Schema(_))));

    let mut v: serde_json::Value = serde_json::from_str(&case_to_json(&case_a())).unwrap();
    v.as_object_mut().unwrap().remove("omega_s");
    assert!(matches!(parse_case(&v.to_string()), Err(Error::Schema(_))));

    let mut v: serde_json::Value = serde_json::from_str(&case_to_json(&case_a())).unwrap();
    v["network"]["C"][1] = serde_json::json!([1.0]);
    assert!(matches!(parse_case(&v.to_string()), Err(Error::Schema(_))));
}

fn short_trajectory() -> Trajectory {
    let case = case_a();
    let eq = solve_equilibrium(&case, &DVector::zeros(2), 1).unwrap();
    let init = Disturbance::angle(2, 0, 0.1).apply(&eq).unwrap();
    integrate(&case, &init, 0.2, 0.1).unwrap()
}

#[test]
fn trajectory_csv_is_lossless() {
    let tr = short_trajectory();
    assert_eq!(tr.len(), 3);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.csv");
    save_trajectory_csv(&tr, &p).unwrap();
    let text = fs::read_to_string(&p).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert_eq!(
        text.lines().next().unwrap(),
        "t,delta_1,delta_2,omega_1,omega_2"
    );
    assert_eq!(read_trajectory_csv(&p).unwrap(), tr);
}

#[test]
fn empty_trajectory_is_refused() {
    let empty = Trajectory {
        times: vec![],
        states: vec![],
    };
    assert!(write_trajectory_csv(&empty, Vec::new()).is_err());
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let nu = dir.path().join("nu.json");
    save_case(&case_a(), &a).unwrap();
    save_case(&case_a_nonuniform(), &nu).unwrap();
    let out = dir.path().join("r.json");
    assert_eq!(
        cli(&[
            "verify",
            a.to_str().unwrap(),
            "--seed",
            "42",
            "--out",
            out.to_str().unwrap()
        ]),
        0
    );
    assert!(out.exists());
    assert_eq!(
        cli(&[
            "verify",
            nu.to_str().unwrap(),
            "--samples",
            "20",
            "--out",
            out.to_str().unwrap()
        ]),
        2
    );
    assert_eq!(
        cli(&[
            "verify",
            a.to_str().unwrap(),
            "--paper-form",
            "--out",
            out.to_str().unwrap()
        ]),
        0
    );
}

#[test]
fn operational_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    save_case(&case_a(), &a).unwrap();
    let a = a.to_str().unwrap();
    assert_eq!(cli(&["verify", a, "--no-such-flag"]), 1);
    assert_eq!(cli(&["frobnicate"]), 1);
    assert_eq!(cli(&["verify", "/nonexistent/case.json"]), 1);
    assert_eq!(
        cli(&[
            "simulate",
            a,
            "--perturb",
            "3:0.1:0",
            "--tmax",
            "1",
            "--dt",
            "0.1",
            "--out",
            "/dev/null"
        ]),
        1
    );
    assert_eq!(
        cli(&[
            "simulate",
            a,
            "--perturb",
            "1:0.1",
            "--tmax",
            "1",
            "--dt",
            "0.1",
            "--out",
            "/dev/null"
        ]),
        1
    );
    assert_eq!(cli(&["--help"]), 0);
}

#[test]
fn simulate_writes_every_step() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    save_case(&case_a(), &a).unwrap();
    let out = dir.path().join("t.csv");
    let code = cli(&[
        "simulate",
        a.to_str().unwrap(),
        "--perturb",
        "1:0.1:0",
        "--tmax",
        "10",
        "--dt",
        "0.001",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let tr = read_trajectory_csv(&out).unwrap();
    assert_eq!(tr.len(), 10_001);
    assert_eq!(tr.states[0].delta[0], 0.1);
}

#[test]
fn simulate_modal_columns() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    save_case(&case_a(), &a).unwrap();
    let out = dir.path().join("y.csv");
    let code = cli(&[
        "simulate",
        a.to_str().unwrap(),
        "--perturb",
        "1:0.1:0,2:0:0.05",
        "--tmax",
        "1",
        "--dt",
        "0.01",
        "--modal",
        "--freeze-mean",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("t,y_1_re,y_1_im,y_2_re,y_2_im,y_3_re,y_3_im,y_4_re,y_4_im\n"));
    assert_eq!(text.lines().count(), 102);
    let a = a.to_str().unwrap();
    assert_eq!(
        cli(&[
            "simulate",
            a,
            "--perturb",
            "1:0.1:0",
            "--tmax",
            "1",
            "--dt",
            "0.01",
            "--freeze-mean",
            "--out",
            "/dev/null"
        ]),
        1
    );
}

#[test]
fn sweep_and_synthesize() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    save_case(&case_a(), &a).unwrap();
    let out = dir.path().join("s.csv");
    let code = cli(&[
        "sweep",
        a.to_str().unwrap(),
        "--spreads",
        "0,0.25,0.5",
        "--perturb",
        "1:0.1:0",
        "--tmax",
        "2",
        "--dt",
        "0.01",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("spread,ratio_1,ratio_2,max_discrepancy,max_coi_discrepancy\n"));
    assert_eq!(text.lines().count(), 4);

    let syn = dir.path().join("syn.json");
    let code = cli(&[
        "synthesize",
        a.to_str().unwrap(),
        "--angles",
        "0.3,-0.1",
        "--out",
        syn.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let case = load_case(&syn).unwrap();
    let eq = solve_equilibrium(&case, &DVector::from_vec(vec![0.0, -0.1]), 1).unwrap();
    assert!((eq.delta_s[0] - 0.3).abs() < 1e-9);
}

#[test]
fn analyze_reports_mean_modes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    save_case(&case_a(), &a).unwrap();
    let out = dir.path().join("an.json");
    assert_eq!(
        cli(&[
            "analyze",
            a.to_str().unwrap(),
            "--out",
            out.to_str().unwrap()
        ]),
        0
    );
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["eigenvalues"].as_array().unwrap().len(), 4);
    assert_eq!(v["mean_modes"]["zero_mode"].as_array().unwrap().len(), 4);
    assert!(v["verification"].is_null());
    assert_eq!(v["assumptions"]["uniform_damping"]["pass"], true);
}
