use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn subcover(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subcover"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn drift_theorem1_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "drift.toml",
        "experiment = \"theorem1\"\nt = 1.0\ndelta = 0.1\n[spec]\nfamily = \"drift-only\"\ndrift = 1.0\n",
    );
    let out = dir.path().join("run");
    let o = subcover(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("mean U·N = 1.000000, exact"));
    for f in ["report.json", "metadata.json", "summary.txt", "tables/theorem1.csv"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema"], "subcover-report/1");
    assert_eq!(report["parameters"]["tolerance"], 0.05);
    assert!(report.get("timestamp_unix").is_none());
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("metadata.json")).unwrap()).unwrap();
    assert!(meta["timestamp_unix"].as_u64().unwrap() > 0);
    let csv = fs::read_to_string(out.join("tables/theorem1.csv")).unwrap();
    assert!(csv.starts_with("delta,U,U_method,mean_UN,stderr,ci_low,ci_high"));
}

#[test]
fn stable_indices_slope() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "indices.toml",
        "experiment = \"indices\"\nreplicas = 200\nseed = 3\ndelta_max = 1e-3\ndelta_min = 1e-7\n\
         [spec]\nfamily = \"stable\"\nalpha = 0.5\n",
    );
    let out = dir.path().join("run");
    let o = subcover(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let slope = report["rows"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["label"] == "slope")
        .unwrap()["value"]
        .as_f64()
        .unwrap();
    assert!((slope - 0.5).abs() < 0.05, "slope {slope}");
}

#[test]
fn compound_poisson_without_drift_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    for exp in ["theorem1", "lemma4", "potential-table"] {
        let cfg = write_config(
            dir.path(),
            "cp.toml",
            &format!(
                "experiment = \"{exp}\"\n[spec]\nfamily = \"compound-poisson\"\nrate = 1.0\njump = \"fixed\"\njump_size = 1.0\n"
            ),
        );
        let out = dir.path().join("run");
        let o = subcover(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{exp}");
        assert!(stderr(&o).contains("compound Poisson"), "{}", stderr(&o));
    }
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("experiment = \"theorem1\"\nreplicas = -1\n[spec]\nfamily = \"stable\"\nalpha = 0.5\n", "`replicas`"),
        ("experiment = \"theorem1\"\nbogus = 1\n[spec]\nfamily = \"stable\"\nalpha = 0.5\n", "`bogus`"),
        ("experiment = \"theorem1\"\n[spec]\nfamily = \"stable\"\n", "`spec.alpha`"),
        ("experiment = \"theorem1\"\ndeltas = [0.1, 0.2]\n[spec]\nfamily = \"stable\"\nalpha = 0.5\n", "`deltas`"),
    ];
    for (text, key) in cases {
        let cfg = write_config(dir.path(), "bad.toml", text);
        let o = subcover(&["run", "--config", &cfg, "--out", dir.path().join("x").to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2));
        assert!(stderr(&o).contains(key), "expected {key} in {}", stderr(&o));
    }
}

#[test]
fn failing_verdict_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "strict.toml",
        "experiment = \"theorem1\"\nreplicas = 50\ndeltas = [1e-2]\ntolerance = 1e-9\n\
         [spec]\nfamily = \"stable\"\nalpha = 0.5\n",
    );
    let o = subcover(&["run", "--config", &cfg, "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("[FAIL] mean-at-smallest-delta"));
    assert!(stdout(&o).contains("overall: FAIL"));
}

#[test]
fn worker_count_and_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "g.toml",
        "experiment = \"lemma5\"\nreplicas = 200\nseed = 1\ndeltas = [1e-2, 1e-3]\n\
         [spec]\nfamily = \"gamma\"\nshape = 1\nrate = 1\n",
    );
    let run = |workers: &str, seed: &str, name: &str| {
        let out = dir.path().join(name);
        let o = subcover(&["run", "--config", &cfg, "--workers", workers, "--seed", seed, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(out.join("report.json")).unwrap()
    };
    let a = run("1", "5", "a");
    let b = run("4", "5", "b");
    let c = run("4", "6", "c");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn describe_specs() {
    let dir = tempfile::tempdir().unwrap();
    let s = write_config(dir.path(), "s.toml", "family = \"stable\"\nalpha = 0.5\n");
    let o = subcover(&["describe", "--config", &s]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("index α = 0.5"), "{text}");
    assert!(text.contains("eligibility: eligible"));
    assert!(text.contains("potential band"));

    let g = write_config(dir.path(), "g.toml", "[spec]\nfamily = \"gamma\"\nshape = 2\nrate = 1\n");
    let text = stdout(&subcover(&["describe", "--config", &g]));
    assert!(text.contains("index 0, slowly varying L(λ)=a ln λ"), "{text}");

    let cp = write_config(dir.path(), "cp.toml", "family = \"compound-poisson\"\nrate = 1\njump = \"exponential\"\njump_rate = 2\n");
    let text = stdout(&subcover(&["describe", "--config", &cp]));
    assert!(text.contains("not eligible"), "{text}");

    let bad = write_config(dir.path(), "bad.toml", "family = \"cauchy\"\n");
    let o = subcover(&["describe", "--config", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`family`"));
}

#[test]
fn list_experiments_names_every_runner() {
    let o = subcover(&["list-experiments"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for name in [
        "theorem1",
        "lemma3",
        "lemma4",
        "lemma5",
        "cor1",
        "cor2",
        "indices",
        "potential-table",
        "q-identity",
        "hausdorff",
        "condition-2-4",
        "simulate-paths",
    ] {
        assert!(text.contains(name), "{name}");
    }
}

#[test]
fn every_experiment_runs_from_a_config() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("lemma3", "paths = 50\ndeltas = [0.1, 0.01]\n", "family = \"compound-poisson\"\nrate = 2\njump = \"exponential\"\njump_rate = 3\ndrift = 1\n"),
        ("lemma4", "replicas = 500\n", "family = \"stable\"\nalpha = 0.5\n"),
        ("cor1", "replicas = 300\ndeltas = [0.1, 0.01]\n", "family = \"compound-poisson\"\nrate = 1\njump = \"fixed\"\njump_size = 1\ndrift = 1\n"),
        ("cor2", "replicas = 300\n", "family = \"stable\"\nalpha = 0.5\n"),
        ("potential-table", "mc_replicas = 0\n", "family = \"inverse-gaussian\"\nmean = 1\nshape = 1\n"),
        ("q-identity", "replicas = 2000\n", "family = \"gamma\"\nshape = 1\nrate = 1\n"),
        ("hausdorff", "", "family = \"stable\"\nalpha = 0.7\n"),
        ("condition-2-4", "", "family = \"gamma\"\nshape = 1\nrate = 1\n"),
        ("simulate-paths", "paths = 2\n", "family = \"inverse-gaussian\"\nmean = 1\nshape = 2\n"),
    ];
    for (exp, keys, spec) in cases {
        let cfg = write_config(dir.path(), "c.toml", &format!("experiment = \"{exp}\"\nseed = 2\n{keys}[spec]\n{spec}"));
        let out = dir.path().join(exp);
        let o = subcover(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{exp}: {}{}", stdout(&o), stderr(&o));
        assert!(out.join("report.json").exists());
        assert!(fs::read_dir(out.join("tables")).unwrap().count() >= 1, "{exp}");
    }
}
