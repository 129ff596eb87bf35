use std::fs;
use std::path::Path;
use std::process::Command;

use mrt_expcli::{execute, run_experiment, write_outputs, ExperimentConfig, Role};

const SMALL: &str = r#"
seed = 3

[model]
cells = 20

[mesh]
t_end = 1200.0
h = 60.0
m = [1, 2, 5]

[output]
error_times = [600.0, 1200.0]

[[schemes]]
kind = "semi_implicit_mrt"
p = [0, 2]

[[schemes]]
kind = "compound_fast_mrt"
"#;

fn small(dir: &Path) -> ExperimentConfig {
    let mut config = ExperimentConfig::from_toml(SMALL).unwrap();
    config.output.dir = dir.to_path_buf();
    config
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn sweep_writes_every_output_once() {
    let tmp = tempfile::tempdir().unwrap();
    let sweep = run_experiment(&small(tmp.path()), &mut |_| {}).unwrap();
    assert!(sweep.all_acceptable());
    // reference, baseline, 2 orders x 3 factors, 3 compound-fast
    assert_eq!(sweep.records.len(), 11);

    let m = manifest(tmp.path());
    let runs = m["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 11);
    let mut labels: Vec<&str> = runs.iter().map(|r| r["label"].as_str().unwrap()).collect();
    labels.sort();
    labels.dedup();
    assert_eq!(labels.len(), 11);
    assert!(runs.iter().all(|r| r["status"] == "completed"));
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(m["parameters"]["config"]["model"]["material"]["area_scale"], 1.0);
    assert!(m["initial_activity"]["ratio"].as_f64().unwrap() > 0.0);

    for label in labels {
        let csv = fs::read_to_string(tmp.path().join("runs").join(format!("{label}.csv"))).unwrap();
        assert!(csv.starts_with("t,z,P_g,S_w,S_h,T,u_z\n"));
        assert!(tmp.path().join("runs").join(format!("{label}.json")).exists());
    }

    let errors = fs::read_to_string(tmp.path().join("errors.csv")).unwrap();
    let lines: Vec<&str> = errors.lines().collect();
    assert_eq!(lines[0], "scheme,p,m,field,t,L2,relative");
    // baseline and nine matrix runs, five fields, two times
    assert_eq!(lines.len() - 1, 10 * 5 * 2);
    assert!(lines.iter().any(|l| l.starts_with("iterative_coupled,,1,P_g,1200.0,")));
    for line in &lines[1..] {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 7, "{line}");
        if cols[0] == "iterative_coupled" {
            assert_eq!(cols[6], "1.0", "{line}");
        }
    }

    let speedup = fs::read_to_string(tmp.path().join("speedup.csv")).unwrap();
    let lines: Vec<&str> = speedup.lines().collect();
    assert_eq!(lines[0], "m,modeled_semi,modeled_cf,measured_semi,measured_cf");
    assert_eq!(lines.len(), 4);
    assert!(lines[1..].iter().all(|l| l.split(',').all(|c| !c.is_empty())));
}

#[test]
fn identical_configs_give_identical_numbers() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&small(a.path()), &mut |_| {}).unwrap();
    run_experiment(&small(b.path()), &mut |_| {}).unwrap();
    let read = |d: &Path, f: &str| fs::read(d.join(f)).unwrap();
    assert_eq!(read(a.path(), "errors.csv"), read(b.path(), "errors.csv"));
    for entry in fs::read_dir(a.path().join("runs")).unwrap() {
        let name = entry.unwrap().file_name();
        if name.to_string_lossy().ends_with(".csv") {
            assert_eq!(read(&a.path().join("runs"), name.to_str().unwrap()), read(&b.path().join("runs"), name.to_str().unwrap()));
        }
    }
    assert_eq!(manifest(a.path())["config_hash"], manifest(b.path())["config_hash"]);
}

#[test]
fn snapshots_sit_on_the_macro_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let sweep = execute(&small(tmp.path()), &mut |_| {}).unwrap();
    for rec in &sweep.records {
        let report = rec.report().unwrap();
        let big_h = 60.0 * rec.id.m as f64;
        assert_eq!(report.snapshots.len(), (1200.0 / big_h) as usize + 1, "{}", rec.id.label());
        assert!(report.snapshot_times().iter().all(|t| (t / big_h).fract() == 0.0));
    }
    assert_eq!(sweep.records.iter().filter(|r| r.id.role == Role::Matrix).count(), 9);
}

fn mrt() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mrt"))
}

#[test]
fn cli_exit_code_tracks_unexpected_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let base = "[model]\ncells = 10\n[mesh]\nt_end = 600.0\nm = [1, 4]\n[output]\nerror_times = [600.0]\n\
                [[schemes]]\nkind = \"compound_fast_mrt\"\n";
    // 600 s is not a whole number of 240 s macro steps
    let config = tmp.path().join("a.toml");
    fs::write(&config, base).unwrap();
    let status = mrt().arg("run").arg(&config).arg("--out").arg(tmp.path().join("a")).output().unwrap();
    assert_eq!(status.status.code(), Some(1));
    let m = manifest(&tmp.path().join("a"));
    let failed: Vec<_> = m["runs"].as_array().unwrap().iter().filter(|r| r["status"] == "failed").collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0]["error_class"], "MeshError");

    let marked = tmp.path().join("b.toml");
    fs::write(&marked, format!("{base}[[expected_failures]]\nscheme = \"compound_fast_mrt\"\nm = 4\n")).unwrap();
    let status = mrt().arg("run").arg(&marked).arg("--out").arg(tmp.path().join("b")).output().unwrap();
    assert_eq!(status.status.code(), Some(0));

    let bad = tmp.path().join("c.toml");
    fs::write(&bad, "[mesh]\nmm = 1\n").unwrap();
    assert_eq!(mrt().arg("run").arg(&bad).output().unwrap().status.code(), Some(2));
}

#[test]
fn cli_compare_and_model_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = small(tmp.path());
    config.schemes.truncate(1);
    config.mesh.m = vec![2];
    let sweep = execute(&config, &mut |_| {}).unwrap();
    write_outputs(&sweep, tmp.path()).unwrap();
    let runs = tmp.path().join("runs");
    let out = mrt()
        .arg("compare")
        .arg(runs.join("reference_fully_implicit_m1.json"))
        .arg(runs.join("reference_fully_implicit_m1.json"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("field,t,L2\nP_g,1200.0,0.0\n"), "{text}");

    let out = mrt()
        .arg("compare")
        .arg(runs.join("semi_implicit_mrt_p2_m2.json"))
        .arg(runs.join("baseline_iterative_coupled_m1.json"))
        .args(["--at", "600,1200"])
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().take_while(|l| !l.is_empty()).count(), 1 + 2 * 5);
    assert!(text.contains("\nC,"), "{text}");

    let out = mrt().args(["model-speedup", "--C", "0.42654", "--nfp", "2", "--m", "1,5"]).output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "m,modeled_semi,modeled_cf");
    assert!(lines[1].starts_with("1,2.0,"));
    let s5: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
    assert!((s5 - 3.0360).abs() < 1e-4);
    assert!(!mrt().args(["model-speedup", "--C", "1.5"]).output().unwrap().status.success());
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let full = ExperimentConfig::load(&root.join("test1.toml")).unwrap();
    let mut defaults = ExperimentConfig::default();
    assert_eq!(full.model, defaults.model);
    assert_eq!(full.mesh, defaults.mesh);
    assert!(full.expects_failure(mrt_core::SchemeKind::CompoundFastMrt, 60, None));
    defaults.output.dir = "out/smoke".into();
    let smoke = ExperimentConfig::load(&root.join("smoke.toml")).unwrap();
    assert_eq!(smoke.model.cells, 20);
    assert_eq!(smoke.output.dir, defaults.output.dir);
}

#[test]
fn readme_config_parses() {
    let readme = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md")).unwrap();
    let block = readme.split("```toml\n").nth(1).unwrap().split("```").next().unwrap();
    let config = ExperimentConfig::from_toml(block).unwrap();
    assert_eq!(config.model, ExperimentConfig::default().model);
    assert!(config.expects_failure(mrt_core::SchemeKind::CompoundFastMrt, 60, None));
}
