use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn forge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cascade-forge")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn small_config() -> Value {
    json!({
        "spec": {"omega": 1.0, "variant": "cubic_modified"},
        "space": {"kind": "l2s", "s": -2.0},
        "m_floor": 2,
        "stages": 3,
        "cutoffs": [32, 4096]
    })
}

fn write_json(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_vec_pretty(v).unwrap()).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Runs `construct` on `config` into `<tmp>/run` and returns the output directory.
fn construct(tmp: &TempDir, config: &Value) -> PathBuf {
    let cfg = write_json(tmp.path(), "config.json", config);
    let out = tmp.path().join("run");
    let res = forge(&["construct", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    out
}

fn load(p: &Path) -> Value {
    serde_json::from_slice(&fs::read(p).unwrap()).unwrap()
}

#[test]
fn construct_writes_manifest_reports_and_summary() {
    let tmp = TempDir::new().unwrap();
    let out = construct(&tmp, &small_config());
    for f in ["manifest.json", "summary.txt", "stage_001.json", "stage_002.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    assert!(!out.join("stage_003.json").exists());
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert_eq!(summary.matches(" yes ").count(), 2, "{summary}");
    assert!(!summary.contains(" NO "));
    let names: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 4, "no temporary files left: {names:?}");
}

#[test]
fn four_cubic_stages_meet_their_budgets() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = small_config();
    cfg["space"] = json!({"kind": "l2s", "s": -1.0});
    cfg["m_floor"] = json!(4);
    cfg["stages"] = json!(4);
    let out = construct(&tmp, &cfg);
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert_eq!(summary.matches(" yes ").count(), 3, "{summary}");
}

#[test]
fn construction_is_byte_deterministic() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let (da, db) = (construct(&a, &small_config()), construct(&b, &small_config()));
    for f in ["manifest.json", "summary.txt", "stage_001.json", "stage_002.json"] {
        assert_eq!(fs::read(da.join(f)).unwrap(), fs::read(db.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn positive_index_exits_2_and_writes_nothing() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = small_config();
    cfg["space"] = json!({"kind": "l2s", "s": 1.0});
    let path = write_json(tmp.path(), "config.json", &cfg);
    let out = tmp.path().join("run");
    let res = forge(&["construct", "--config", s(&path), "--out", s(&out)]);
    assert_eq!(code(&res), 2, "{}", stderr(&res));
    assert!(stderr(&res).contains("bound unreachable"));
    assert!(!out.exists());
}

#[test]
fn malformed_configs_exit_3() {
    let tmp = TempDir::new().unwrap();
    let mut unknown = small_config();
    unknown["colour"] = json!("blue");
    let mut zero_omega = small_config();
    zero_omega["spec"]["omega"] = json!(0.0);
    for (i, cfg) in [unknown, zero_omega].iter().enumerate() {
        let p = write_json(tmp.path(), &format!("c{i}.json"), cfg);
        let res = forge(&["construct", "--config", s(&p), "--out", s(&tmp.path().join("o"))]);
        assert_eq!(code(&res), 3, "{}", stderr(&res));
    }
    let garbage = tmp.path().join("g.json");
    fs::write(&garbage, "{ not json").unwrap();
    assert_eq!(code(&forge(&["construct", "--config", s(&garbage), "--out", "x"])), 3);
    assert_eq!(code(&forge(&["construct", "--config", "/nonexistent/c.json", "--out", "x"])), 3);
    assert_eq!(code(&forge(&["construct", "-c", "x"])), 3, "long flags only");
}

#[test]
fn verify_passes_fresh_and_catches_a_perturbed_coefficient() {
    let tmp = TempDir::new().unwrap();
    let out = construct(&tmp, &small_config());
    let manifest = out.join("manifest.json");
    let res = forge(&["verify", "--manifest", s(&manifest)]);
    assert_eq!(code(&res), 0, "{}{}", stdout(&res), stderr(&res));
    assert!(stdout(&res).contains("all ") && stdout(&res).contains("ode cross-check"));

    let mut m = load(&manifest);
    let modes = m["state"]["stages"][1]["x"]["modes"].as_array_mut().unwrap();
    let term = &mut modes.last_mut().unwrap()["fn"]["terms"][0]["re"];
    *term = json!(term.as_f64().unwrap() + 1e-3);
    let bad = write_json(tmp.path(), "bad.json", &m);
    let res = forge(&["verify", "--manifest", s(&bad)]);
    assert_eq!(code(&res), 4);
    assert!(stderr(&res).contains("residual"), "{}", stderr(&res));
}

fn empty_manifest(tmp: &TempDir) -> PathBuf {
    let out = construct(tmp, &small_config());
    let mut m = load(&out.join("manifest.json"));
    m["state"]["stages"] = json!([]);
    m["state"]["target_deltas"] = json!([]);
    write_json(tmp.path(), "empty.json", &m)
}

#[test]
fn empty_manifest_verifies_and_exports_headers_only() {
    let tmp = TempDir::new().unwrap();
    let empty = empty_manifest(&tmp);
    assert_eq!(code(&forge(&["verify", "--manifest", s(&empty)])), 0);
    let csv = tmp.path().join("c.csv");
    let res = forge(&["export", "--manifest", s(&empty), "--kind", "cascade_csv", "--out", s(&csv)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    assert_eq!(fs::read_to_string(&csv).unwrap(), "stage,mode,t,abs_value\n");
}

#[test]
fn cascade_export_keeps_the_seed_normalized() {
    let tmp = TempDir::new().unwrap();
    let out = construct(&tmp, &small_config());
    let csv = tmp.path().join("cascade.csv");
    let res = forge(&["export", "--manifest", s(&out.join("manifest.json")), "--kind", "cascade_csv", "--out", s(&csv)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let text = fs::read_to_string(&csv).unwrap();
    let mut peaks = std::collections::BTreeMap::new();
    for line in text.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells[1] == "0" {
            let v: f64 = cells[3].parse().unwrap();
            let peak = peaks.entry(cells[0].to_string()).or_insert(0.0f64);
            *peak = peak.max(v);
        }
    }
    assert_eq!(peaks.len(), 3);
    assert!(peaks.values().all(|&p| p == 1.0), "{peaks:?}");
}

#[test]
fn norms_export_matches_the_summary() {
    let tmp = TempDir::new().unwrap();
    let out = construct(&tmp, &small_config());
    let csv = tmp.path().join("norms.csv");
    let res = forge(&["export", "--manifest", s(&out.join("manifest.json")), "--kind", "norms_csv", "--out", s(&csv)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    let table: Vec<Vec<&str>> =
        summary.lines().skip(4).map(|l| l.split_whitespace().collect()).filter(|r: &Vec<&str>| !r.is_empty()).collect();
    let norms = fs::read_to_string(&csv).unwrap();
    assert!(norms.starts_with("stage,space,value\n"));
    let mut checked = 0;
    for line in norms.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        let row = table.iter().find(|r| r[0] == cells[0]).unwrap();
        let column = match cells[1] {
            "delta" => 1,
            s if s.starts_with("C0") => 2,
            _ => 4,
        };
        assert_eq!(row[column], cells[2], "{line}");
        checked += 1;
    }
    assert_eq!(checked, 3 + 2 * 2);
}

#[test]
fn export_to_a_bad_path_exits_3() {
    let tmp = TempDir::new().unwrap();
    let out = construct(&tmp, &small_config());
    let m = out.join("manifest.json");
    let res = forge(&["export", "--manifest", s(&m), "--kind", "norms_csv", "--out", "/nonexistent/dir/n.csv"]);
    assert_eq!(code(&res), 3);
    assert_eq!(code(&forge(&["export", "--manifest", "/nonexistent.json", "--kind", "norms_csv", "--out", "n.csv"])), 3);
    assert_eq!(code(&forge(&["verify", "--manifest", "/nonexistent.json"])), 3);
}

fn sweep(tmp: &TempDir, cfg: &Value) -> (Output, PathBuf) {
    let p = write_json(tmp.path(), "sweep.json", cfg);
    let csv = tmp.path().join("sweep.csv");
    (forge(&["sweep", "--config", s(&p), "--out", s(&csv)]), csv)
}

fn fitted_slope(out: &str) -> f64 {
    let line = out.lines().find(|l| l.starts_with("slope ")).unwrap();
    line.split_whitespace().nth(1).unwrap().parse().unwrap()
}

#[test]
fn floor_sweep_recovers_the_sobolev_index() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = small_config();
    cfg["space"] = json!({"kind": "l2s", "s": -0.5});
    cfg["sweep"] = json!({"parameter": "m_floor", "values": [32, 64, 128, 256, 512, 1024]});
    let (res, csv) = sweep(&tmp, &cfg);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    assert!((fitted_slope(&stdout(&res)) + 0.5).abs() <= 0.15, "{}", stdout(&res));
    assert!(stdout(&res).contains("95% CI"));
    assert_eq!(fs::read_to_string(csv).unwrap().lines().count(), 7);
}

#[test]
fn split_sweep_shrinks_by_the_fourth_root() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = small_config();
    cfg["space"] = json!({"kind": "lp", "p": 4.0});
    cfg["m_floor"] = json!(64);
    cfg["sweep"] = json!({"parameter": "k_split", "values": [4, 16, 64]});
    let (res, _) = sweep(&tmp, &cfg);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let ratios: Vec<f64> = stdout(&res)
        .lines()
        .filter(|l| l.starts_with("ratio"))
        .map(|l| l.rsplit(' ').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(ratios.len(), 2);
    assert!(ratios.iter().all(|r| (r - 0.7071).abs() <= 0.05), "{ratios:?}");
}

#[test]
fn degenerate_sweeps_exit_5() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = small_config();
    cfg["sweep"] = json!({"parameter": "m_floor", "values": [64]});
    let (res, csv) = sweep(&tmp, &cfg);
    assert_eq!(code(&res), 5);
    assert!(!csv.exists());
    cfg["sweep"] = json!({"parameter": "k_split", "values": [4, 16, 64]});
    assert_eq!(code(&sweep(&tmp, &cfg).0), 5, "K sweep in an l2s space");
}

#[test]
fn thread_cap_is_validated() {
    let tmp = TempDir::new().unwrap();
    let p = write_json(tmp.path(), "c.json", &small_config());
    let out = tmp.path().join("o");
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_cascade-forge"))
            .args(["construct", "--config", s(&p), "--out", s(&out)])
            .env("CASCADE_FORGE_THREADS", threads)
            .output()
            .unwrap()
    };
    assert_eq!(code(&run("0")), 3);
    assert_eq!(code(&run("many")), 3);
    assert_eq!(code(&run("1")), 0);
}
