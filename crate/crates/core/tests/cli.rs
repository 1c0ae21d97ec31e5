use std::fs;

use factorial_neyman::cli::{run, EXIT_INVALID, EXIT_OK};

fn fneyman(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(
        std::iter::once("fneyman").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

#[test]
fn design_prints_matrix_and_labels() {
    let (code, out, _) = fneyman(&["design", "--k", "3"]);
    assert_eq!(code, EXIT_OK);
    assert!(
        out.contains("z8 = (1, 1, 1)") || out.contains("z8 ="),
        "{out}"
    );
    for label in [
        "h1: 1 (main)",
        "h4: 12 (interaction)",
        "h7: 123 (interaction)",
    ] {
        assert!(out.contains(label), "missing {label:?} in\n{out}");
    }

    let (code, out, _) = fneyman(&["design", "--k", "2", "--format", "json"]);
    assert_eq!(code, EXIT_OK);
    let doc: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(doc["J"], 4);
    assert_eq!(doc["matrix"][0], serde_json::json!([1, -1, -1, 1]));
}

#[test]
fn invalid_invocations_exit_with_one() {
    assert_eq!(fneyman(&["frobnicate"]).0, EXIT_INVALID);
    assert_eq!(fneyman(&["design", "--k", "0"]).0, EXIT_INVALID);
    assert_eq!(fneyman(&["verify", "--k", "1", "--n", "4"]).0, EXIT_INVALID);
    let (code, out, _) = fneyman(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("simulate"));
}

#[test]
fn verify_exhaustive_small_population() {
    let (code, out, _) = fneyman(&["verify", "--k", "1", "--n", "4", "--exhaustive"]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert!(out.lines().count() >= 5);
    assert!(out.lines().all(|l| !l.contains("status=fail")), "{out}");
}

#[test]
fn analyze_aggregated_and_unit_level_agree() {
    let dir = tempfile::tempdir().unwrap();
    let agg = dir.path().join("agg.csv");
    fs::write(&agg, "arm,n,n_obs\n1,5,2\n2,5,3\n").unwrap();
    let unit = dir.path().join("unit.csv");
    let mut text = String::from("f1,outcome\n");
    for (level, y) in [
        (-1, 1),
        (-1, 1),
        (-1, 0),
        (-1, 0),
        (-1, 0),
        (1, 1),
        (1, 1),
        (1, 1),
        (1, 0),
        (1, 0),
    ] {
        text.push_str(&format!("{level},{y}\n"));
    }
    fs::write(&unit, text).unwrap();

    let (code, a, err) = fneyman(&[
        "analyze",
        "--input",
        agg.to_str().unwrap(),
        "--k",
        "1",
        "--aggregated",
        "--format",
        "json",
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let (code, b, err) = fneyman(&[
        "analyze",
        "--input",
        unit.to_str().unwrap(),
        "--k",
        "1",
        "--format",
        "json",
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert_eq!(a, b);
    let doc: serde_json::Value = serde_json::from_str(&a).unwrap();
    let est = doc["effects"][0]["estimate"].as_f64().unwrap();
    assert!((est - 0.2).abs() < 1e-12);

    let (code, table, _) = fneyman(&[
        "analyze",
        "--input",
        agg.to_str().unwrap(),
        "--k",
        "1",
        "--aggregated",
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(table.contains("0.2"));

    let missing = dir.path().join("missing.csv");
    fs::write(&missing, "arm,n,n_obs\n1,5,2\n").unwrap();
    assert_eq!(
        fneyman(&[
            "analyze",
            "--input",
            missing.to_str().unwrap(),
            "--k",
            "1",
            "--aggregated"
        ])
        .0,
        EXIT_INVALID
    );
}

#[test]
fn simulate_writes_identical_files_for_identical_flags() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = ["a.csv", "b.csv", "h.csv"]
        .iter()
        .map(|n| dir.path().join(n))
        .collect();
    let run_once = |out: &str, hist: Option<&str>| {
        let mut args = vec!["simulate", "--reps", "300", "--seed", "7", "--out", out];
        if let Some(h) = hist {
            args.extend(["--hist", h]);
        }
        fneyman(&args)
    };
    let (code, summary, _) = run_once(paths[0].to_str().unwrap(), Some(paths[2].to_str().unwrap()));
    assert_eq!(code, EXIT_OK);
    assert!(summary.contains("replicates: 300"));
    assert_eq!(run_once(paths[1].to_str().unwrap(), None).0, EXIT_OK);
    let a = fs::read(&paths[0]).unwrap();
    assert_eq!(a, fs::read(&paths[1]).unwrap());
    assert!(String::from_utf8_lossy(&a).starts_with("replicate,ratio\n"));
    assert_eq!(String::from_utf8_lossy(&a).lines().count(), 301);
    let hist = fs::read_to_string(&paths[2]).unwrap();
    assert!(hist.starts_with("bin_left,bin_right,count\n"));

    let (code, _, err) = fneyman(&["simulate", "--reps", "50", "--obs-max", "100"]);
    assert_eq!(code, EXIT_OK);
    assert!(err.contains("truncated"));

    let (code, json, _) = fneyman(&["simulate", "--reps", "20", "--format", "json"]);
    assert_eq!(code, EXIT_OK);
    let doc: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(doc["config"]["K"], 3);
    assert!(doc["max"].as_f64().unwrap() <= 1.0);
}
