use std::process::{Command, Output};

fn mdtc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdtc")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["--bogus"][..],
        &["train", "--algo", "sarsa", "--episodes", "1", "--seed", "1", "--out", "x"],
        &["cohort", "--seed", "1"],
        &[],
    ] {
        let o = mdtc(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(stderr(&o).starts_with("mdtc:error:usage:"), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let o = mdtc(&["eval", "--model", missing.to_str().unwrap(), "--cohort-seed", "1", "--n", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("mdtc:error:"));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[consensus]\nw_threshold = 3.0\n").unwrap();
    let o = mdtc(&["--config", bad.to_str().unwrap(), "--print-config"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("consensus"), "{}", stderr(&o));

    let case = dir.path().join("case.json");
    std::fs::write(&case, r#"{"id":"x","features":[0.5],"blocks":{"a":[0,1]}}"#).unwrap();
    let o = mdtc(&["consult", "--case", case.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("DimensionMismatch"), "{}", stderr(&o));
}

#[test]
fn printed_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let first = mdtc(&["--print-config"]);
    assert!(first.status.success());
    let path = dir.path().join("cfg.toml");
    std::fs::write(&path, &first.stdout).unwrap();
    let second = mdtc(&["--config", path.to_str().unwrap(), "--print-config"]);
    assert!(second.status.success(), "{}", stderr(&second));
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn consult_then_explain() {
    let dir = tempfile::tempdir().unwrap();
    let d = |s: &str| dir.path().join(s).to_string_lossy().into_owned();
    assert!(mdtc(&["gen-cases", "--n", "2", "--seed", "4", "--out", &d("cases")]).status.success());
    let o = mdtc(&["--fixed-clock", "consult", "--case", &d("cases/case-00000.json"), "--out", &d("run")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let audit = std::fs::read_to_string(d("run/audit.jsonl")).unwrap();
    assert!(audit.lines().any(|l| l.contains("\"termination\"")));
    let result: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d("run/result.json")).unwrap()).unwrap();
    let rec = result["recommendation"].as_u64().unwrap().to_string();
    let o = mdtc(&["explain", "--result", &d("run/result.json"), "--treatment", &rec]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains(result["recommendation_name"].as_str().unwrap()));
    let o = mdtc(&["explain", "--result", &d("run/result.json"), "--treatment", "99"]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn train_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let d = |s: &str| dir.path().join(s).to_string_lossy().into_owned();
    let o = mdtc(&["train", "--algo", "q", "--episodes", "30", "--seed", "2", "--out", &d("m")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let curve = std::fs::read_to_string(d("m/learning_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 31);
    let o = mdtc(&["eval", "--model", &d("m/model.json"), "--cohort-seed", "5", "--n", "10", "--out", &d("e")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.starts_with("method,n,mean_rounds,consensus_rate,mean_w\nmaintain,10,"));
    assert!(table.contains("\npolicy,10,"));
    assert!(std::path::Path::new(&d("e/comparison.json")).exists());
}
