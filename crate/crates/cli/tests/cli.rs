use std::process::{Command, Output};

fn iwf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iwf"))
        .args(args)
        .env_remove("IWF_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value_of(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing in {text}"))
        .parse()
        .unwrap()
}

#[test]
fn limit_eval_on_the_pure_black_face() {
    let o = iwf(&["limit-eval", "--x", "0", "--y", "0.5", "--z", "0.25"]);
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    assert!((value_of(&text, "T") - 0.5).abs() < 1e-13);
    assert!((value_of(&text, "u") - (-0.5f64).exp()).abs() < 1e-13);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = iwf(&["limit-eval", "--x", "0", "--y", "0.5", "--z", "0.25", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--bogus"));
}

#[test]
fn domain_errors_exit_with_two() {
    let o = iwf(&["limit-eval", "--x", "0.9", "--y", "0.5", "--z", "0.25"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn exact_table_is_deterministic_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = iwf(&["exact-table", "--max-n", "6", "--kind", "qtilde", "--out", p.to_str().unwrap()]);
        assert!(o.status.success(), "{o:?}");
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("w,b,f,value"));
    // Lattice points with w + b + f <= 6.
    assert_eq!(lines.clone().count(), 7 * 8 * 9 / 6);
    // q~(2, 0, 2): a white out of {2 whites, 2 reds}, then the last white out of 3.
    let cell = lines.find(|l| l.starts_with("2,0,2,")).unwrap();
    let value: f64 = cell.split(',').nth(3).unwrap().parse().unwrap();
    assert!((value - 1.0 / 6.0).abs() < 1e-15);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "exact-table");
    assert_eq!(manifest["params"]["max_n"], 6);
}

#[test]
fn seeded_runs_reproduce_and_env_seed_is_used() {
    let run = |seed: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_iwf"));
        cmd.args(["chain-sim", "--n", "40", "--s", "0.5", "--x0", "0.5", "--gens", "10", "--reps", "3"]);
        cmd.env_remove("IWF_SEED");
        if let Some(s) = seed {
            cmd.env("IWF_SEED", s);
        }
        stdout(&cmd.output().unwrap())
    };
    assert_eq!(run(Some("9")), run(Some("9")));
    assert_ne!(run(Some("9")), run(Some("10")));
    let text = run(None);
    assert_eq!(text.lines().next(), Some("replica,gen,x"));
    assert_eq!(text.lines().count(), 1 + 3 * 11);
}

#[test]
fn converge_reports_pass_line() {
    let o = iwf(&["converge", "--target", "q_vs_u", "--y0", "0.2", "--ns", "50,100,200,400"]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let csv = stdout(&o);
    assert!(csv.starts_with("region,target,n,sup_error"));
    assert_eq!(csv.lines().count(), 5);
    let summary = String::from_utf8_lossy(&o.stderr);
    assert!(summary.lines().any(|l| l.starts_with("PASS") && l.contains("q_vs_u")), "{summary}");
}

#[test]
fn converge_fails_with_exit_one_on_an_impossible_band() {
    let o = iwf(&[
        "converge", "--target", "q_vs_u", "--y0", "0.2", "--ns", "20,40", "--slope-min", "-3", "--slope-max", "-2",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL"));
}

#[test]
fn coupled_seasons_never_show_the_forbidden_outcome() {
    let o = iwf(&["season-sim", "--w", "5", "--b", "5", "--f", "5", "--reps", "20000", "--coupled", "--aggregate"]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[5], "0");
}

#[test]
fn json_report_mirrors_csv_rows() {
    let o = iwf(&["vs-curve", "--s", "0.5", "--points", "5", "--json"]);
    assert!(o.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    assert!((rows[0]["v_s"].as_f64().unwrap() - (1.0 - (-0.5f64).exp())).abs() < 1e-15);
    assert_eq!(rows[4]["a"].as_f64(), Some(0.0));
    let csv = stdout(&iwf(&["vs-curve", "--s", "0.5", "--points", "5"]));
    let mid: f64 = csv.lines().nth(3).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((mid - rows[2]["v_s"].as_f64().unwrap()).abs() < 1e-15);
}
