use std::path::Path;
use std::process::{Command, Output};

use gexr_cli::config::{Budget, ExperimentConfig, Overrides};
use gexr_cli::presets::PRESETS;
use serde_json::{json, Value};

fn gexr(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_gexr"));
    c.args(args).env_remove("GEXR_BUDGET");
    for (k, v) in env {
        c.env(k, v);
    }
    c.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_config(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p.to_string_lossy().into_owned()
}

fn bm_limit() -> Value {
    json!({ "dim": 1, "components": [{ "scale": 1.0, "variance": { "kind": "fbm", "alpha": 1.0 } }] })
}

fn small_constant(id: &str) -> Value {
    json!({
        "kind": "constants",
        "id": id,
        "seed": 11,
        "reps": 2000,
        "params": { "study": "generalized", "limit": bm_limit(), "grid": { "lo": 0.0, "hi": 1.0, "step": 0.125 } }
    })
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn presets_are_listed_and_validate() {
    let o = gexr(&["presets", "list"], &[]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let names: Vec<&str> = text.lines().map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(names, PRESETS.iter().map(|p| p.name).collect::<Vec<_>>());
    for line in text.lines() {
        assert_eq!(line.starts_with("ruin-demo "), line.ends_with("[qualitative]"), "{line}");
    }
    for p in PRESETS {
        p.validate().unwrap_or_else(|e| panic!("{}: {e}", p.name));
        assert!(!p.description().is_empty(), "{}", p.name);
        assert_eq!(p.config().unwrap().id.as_deref(), Some(p.name));
    }
}

#[test]
fn missing_seed_is_a_config_error_unless_given_on_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = small_constant("noseed");
    v.as_object_mut().unwrap().remove("seed");
    let cfg = write_config(dir.path(), "c.json", &v);
    let out = dir.path().to_str().unwrap();
    let o = gexr(&["constants", "--config", &cfg, "--out", out], &[]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
    assert_eq!(code(&gexr(&["constants", "--config", &cfg, "--out", out, "--seed", "3"], &[])), 0);
    assert_eq!(read_json(&dir.path().join("noseed.json"))["seed"], 3);
}

#[test]
fn unknown_fields_and_wrong_kinds_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut top = small_constant("x");
    top["colour"] = json!("blue");
    let mut nested = small_constant("x");
    nested["params"]["grid"]["stride"] = json!(2);
    let mut in_limit = small_constant("x");
    in_limit["params"]["limit"]["components"][0]["shape"] = json!(1);
    for (i, v) in [top, nested, in_limit].iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("bad{i}.json"), v);
        let o = gexr(&["constants", "--config", &cfg, "--out", out], &[]);
        assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let cfg = write_config(dir.path(), "good.json", &small_constant("x"));
    assert_eq!(code(&gexr(&["tail", "--config", &cfg, "--out", out], &[])), 2);
    assert_eq!(code(&gexr(&["constants", "--config", "/nonexistent/c.json"], &[])), 2);
    assert_eq!(code(&gexr(&["run-preset", "no-such-preset"], &[])), 2);
}

#[test]
fn outputs_have_the_documented_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &small_constant("layout"));
    let o = gexr(&["constants", "--config", &cfg, "--out", dir.path().to_str().unwrap()], &[]);
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(dir.path().join("layout.csv")).unwrap();
    assert!(csv.starts_with("level,step,value,stderr,nReps\n"));
    assert!(!csv.contains('\r'));
    let cols: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(cols[0], "1");
    assert_eq!(cols[1], "0.125");
    assert_eq!(cols[4], "2000");
    let rec = read_json(&dir.path().join("layout.json"));
    assert_eq!(rec["status"], "pass");
    assert_eq!(rec["kind"], "constants");
    assert_eq!(rec["configHash"].as_str().unwrap().len(), 64);
    assert!(rec["timestamp"].as_str().unwrap().ends_with('Z'));
    assert_eq!(rec["rows"][0]["nReps"], 2000);
    let gp = std::fs::read_to_string(dir.path().join("layout.gp")).unwrap();
    assert!(gp.contains("plot 'layout.csv' using 1:3:4 with yerrorbars"));
}

#[test]
fn reruns_are_identical_and_independent_of_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &small_constant("det"));
    let mut seen = Vec::new();
    for (i, workers) in ["1", "1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        let o = gexr(&["constants", "--config", &cfg, "--out", out.to_str().unwrap(), "--workers", workers], &[]);
        assert_eq!(code(&o), 0);
        let csv = std::fs::read_to_string(out.join("det.csv")).unwrap();
        let hash = read_json(&out.join("det.json"))["configHash"].clone();
        seen.push((csv, hash));
    }
    assert!(seen.windows(2).all(|w| w[0] == w[1]));

    let out = dir.path().join("reseeded");
    gexr(&["constants", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "12"], &[]);
    assert_ne!(read_json(&out.join("det.json"))["configHash"], seen[0].1);
    assert_ne!(std::fs::read_to_string(out.join("det.csv")).unwrap(), seen[0].0);
}

#[test]
fn config_hash_covers_numeric_inputs_only() {
    let parse = |v: &Value| {
        ExperimentConfig::from_json(&v.to_string()).unwrap().resolve(&Overrides::default(), Budget::default()).unwrap()
    };
    let base = small_constant("h");
    let mut moved = base.clone();
    moved["outDir"] = json!("/elsewhere");
    moved["workers"] = json!(4);
    assert_eq!(parse(&base).config_hash(), parse(&moved).config_hash());
    let mut finer = base.clone();
    finer["params"]["grid"]["step"] = json!(0.0625);
    assert_ne!(parse(&base).config_hash(), parse(&finer).config_hash());
    let mut more = base;
    more["reps"] = json!(2001);
    assert_ne!(parse(&more).config_hash(), parse(&finer).config_hash());
}

#[test]
fn budget_overrides_gate_replications_and_grids() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = write_config(dir.path(), "c.json", &small_constant("b"));
    assert_eq!(code(&gexr(&["constants", "--config", &cfg, "--out", out], &[("GEXR_BUDGET", "1000")])), 4);
    assert_eq!(code(&gexr(&["constants", "--config", &cfg, "--out", out], &[("GEXR_BUDGET", "reps=5000,grid=8")])), 4);
    assert_eq!(code(&gexr(&["constants", "--config", &cfg, "--out", out], &[("GEXR_BUDGET", "reps=5000,grid=9")])), 0);
    assert_eq!(code(&gexr(&["constants", "--config", &cfg, "--out", out], &[("GEXR_BUDGET", "lots")])), 2);
    assert_eq!(Budget::parse("grid=7").unwrap(), Budget { grid_points: 7, ..Budget::default() });
}

#[test]
fn missed_target_is_a_statistical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = small_constant("miss");
    v["params"]["target"] = json!({ "value": 10.0, "rel": 0.05 });
    let cfg = write_config(dir.path(), "c.json", &v);
    assert_eq!(code(&gexr(&["constants", "--config", &cfg, "--out", dir.path().to_str().unwrap()], &[])), 1);
    assert_eq!(read_json(&dir.path().join("miss.json"))["status"], "fail");
}

#[test]
fn negative_ruin_times_are_a_model_rejection() {
    let dir = tempfile::tempdir().unwrap();
    let v = json!({
        "kind": "tail", "id": "neg", "seed": 1, "reps": 100,
        "params": {
            "family": { "name": "ruin", "alpha": 1.2, "c": 1.0, "cell": 2.0, "kMax": 3 },
            "u": [5.0], "tau": -3.0, "grid": { "lo": 0.0, "hi": 2.0, "step": 0.25 }
        }
    });
    let cfg = write_config(dir.path(), "c.json", &v);
    assert_eq!(code(&gexr(&["tail", "--config", &cfg, "--out", dir.path().to_str().unwrap()], &[])), 3);
}

#[test]
fn crude_tail_without_hits_is_low_confidence() {
    let dir = tempfile::tempdir().unwrap();
    let v = json!({
        "kind": "tail", "id": "crude", "seed": 1, "reps": 1000,
        "params": {
            "family": { "name": "stationary", "alpha": 1.0 },
            "u": [1.0, 6.0], "estimator": "crude", "grid": { "lo": 0.0, "hi": 1.0, "step": 0.25 }
        }
    });
    let cfg = write_config(dir.path(), "c.json", &v);
    assert_eq!(code(&gexr(&["tail", "--config", &cfg, "--out", dir.path().to_str().unwrap()], &[])), 1);
    let rec = read_json(&dir.path().join("crude.json"));
    assert_eq!(rec["status"], "low-confidence");
    let csv = std::fs::read_to_string(dir.path().join("crude.csv")).unwrap();
    assert!(csv.starts_with("u,tau,pHat,stderr,psi,ratio\n"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn single_index_audit_preset_emits_one_ratio_per_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let o = gexr(&["run-preset", "uniform-audit-stationary", "--out", dir.path().to_str().unwrap()], &[]);
    assert!(matches!(code(&o), 0 | 1));
    let csv = std::fs::read_to_string(dir.path().join("uniform-audit-stationary.csv")).unwrap();
    assert!(csv.starts_with("u,maxDeviation,pass\n"));
    assert_eq!(csv.lines().count(), 4);
    let rec = read_json(&dir.path().join("uniform-audit-stationary.json"));
    assert_eq!(rec["summary"]["indices"], 1);
    let trace = rec["summary"]["trace"].as_array().unwrap();
    assert_eq!(trace.len(), 3);
    for (row, u) in trace.iter().zip([3.0, 4.0, 5.0]) {
        assert_eq!(row["u"], u);
        assert_eq!(row["cells"].as_array().unwrap().len(), 1);
    }
}

#[test]
fn flat_doublesum_preset_fails_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let v = json!({
        "kind": "doublesum", "id": "flat", "seed": 2, "reps": 20000,
        "params": { "preset": "flat", "separations": [0.0, 2.0, 4.0], "s2": [2.0], "u": [2.5], "step": 0.5 }
    });
    let cfg = write_config(dir.path(), "c.json", &v);
    assert_eq!(code(&gexr(&["doublesum", "--config", &cfg, "--out", dir.path().to_str().unwrap()], &[])), 1);
    let rec = read_json(&dir.path().join("flat.json"));
    assert_eq!(rec["summary"]["unbounded"], true);
    let csv = std::fs::read_to_string(dir.path().join("flat.csv")).unwrap();
    assert!(csv.starts_with("sep,S2,u,dHat,stderr,bound,slack\n"));
}

#[test]
fn formula_needs_no_replications() {
    let dir = tempfile::tempdir().unwrap();
    let v = json!({
        "kind": "formula", "id": "f", "seed": 0,
        "params": { "formula": "pickands", "t": 2.0, "alpha": 1.0, "u": [3.0], "h": 1.0 }
    });
    let cfg = write_config(dir.path(), "c.json", &v);
    assert_eq!(code(&gexr(&["formula", "--config", &cfg, "--out", dir.path().to_str().unwrap()], &[])), 0);
    let rec = read_json(&dir.path().join("f.json"));
    let value = rec["rows"][0]["value"].as_f64().unwrap();
    let exact = gexr_core::tailprob::eval_pickands_formula(2.0, 1.0, 3.0, 1.0).unwrap();
    assert_eq!(value, exact);
}

#[test]
fn schema_is_published_and_lists_every_kind() {
    let o = gexr(&["schema"], &[]);
    assert_eq!(code(&o), 0);
    let s: Value = serde_json::from_slice(&o.stdout).unwrap();
    let kinds = s["properties"]["kind"]["enum"].as_array().unwrap();
    for k in ["constants", "tail", "audit", "doublesum", "formula", "ruin-demo"] {
        assert!(kinds.contains(&json!(k)));
    }
}

#[test]
fn dump_paths_writes_binary_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = write_config(dir.path(), "c.json", &small_constant("dumped"));
    let o = gexr(&["constants", "--config", &cfg, "--out", out, "--dump-paths"], &[]);
    assert_eq!(code(&o), 0);
    let bytes = std::fs::read(dir.path().join("dumped.paths.bin")).unwrap();
    let mut r = bytes.as_slice();
    let mut n = 0;
    while !r.is_empty() {
        let (shape, values) = gexr_core::simkit::read_dump(&mut r).unwrap();
        assert_eq!(shape, vec![9]);
        assert_eq!(values[0], 0.0);
        assert!(values.iter().all(|v| v.is_finite()));
        n += 1;
    }
    assert_eq!(n, gexr_cli::dump::DUMP_COUNT);
    // the estimates do not depend on the dump
    let again = tempfile::tempdir().unwrap();
    gexr(&["constants", "--config", &cfg, "--out", again.path().to_str().unwrap()], &[]);
    let csv = |d: &Path| std::fs::read_to_string(d.join("dumped.csv")).unwrap();
    assert_eq!(csv(dir.path()), csv(again.path()));

    let v = json!({
        "kind": "formula", "id": "f", "seed": 0,
        "params": { "formula": "pickands", "t": 2.0, "alpha": 1.0, "u": [3.0], "h": 1.0 }
    });
    let cfg = write_config(dir.path(), "f.json", &v);
    assert_eq!(code(&gexr(&["formula", "--config", &cfg, "--out", out, "--dump-paths"], &[])), 2);
}
