use std::path::Path;
use std::process::{Command, Output};

fn wealthlab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wealthlab"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

#[test]
fn run_writes_outputs_and_honours_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.json"),
        r#"{"experiment": "baseline", "engine": "kesten", "n_agents": 300, "seed": 1,
            "replicas": 2, "burn_in": 20, "steps": 100, "stride": 50, "output_dir": "out"}"#,
    )
    .unwrap();
    let out = wealthlab(&["run", "c.json", "--seed", "77"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(dir.path().join("out/summary.json")).unwrap();
    assert!(summary.contains("\"seeds\": [\n    77,\n    78\n  ]"), "{summary}");
    assert!(dir.path().join("out/timeseries.csv").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.json"),
        r#"{"experiment": "baseline", "engine": "kesten", "n_agents": 10, "seed": 1, "kesten": {"alpha_target": 2.5}}"#,
    )
    .unwrap();
    let out = wealthlab(&["run", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("kesten.alpha_target"));

    std::fs::write(dir.path().join("dup.json"), r#"{"seed": 1, "seed": 2}"#).unwrap();
    assert_eq!(wealthlab(&["run", "dup.json"], dir.path()).status.code(), Some(1));

    std::fs::write(dir.path().join("neg.csv"), "1.0\n-2.0\n3.0\n").unwrap();
    assert_eq!(wealthlab(&["estimate", "neg.csv"], dir.path()).status.code(), Some(2));

    assert_eq!(wealthlab(&["frobnicate"], dir.path()).status.code(), Some(1));
}

#[test]
fn estimate_and_plotdata() {
    let dir = tempfile::tempdir().unwrap();
    let body: String = (1..=500).map(|k| format!("{}\n", (k as f64).powf(0.7))).collect();
    std::fs::write(dir.path().join("s.csv"), format!("wealth\n{body}")).unwrap();
    let out = wealthlab(&["estimate", "s.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["n"], 500);
    assert!(v["fit"]["alpha_hat"].as_f64().unwrap() > 0.0);

    let out = wealthlab(&["plotdata", "s.csv", "--bins", "8"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("s_ccdf.csv").exists());
    let hist = std::fs::read_to_string(dir.path().join("s_hist.csv")).unwrap();
    assert_eq!(hist.lines().count(), 10);
}
