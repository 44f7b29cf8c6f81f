use std::fs;
use std::path::{Path, PathBuf};

use polyxport::harness::{emit, load_config, run, ExperimentConfig, ExperimentKind};
use serde_json::Value;

fn tests_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests")
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn small_freepath() -> ExperimentConfig {
    ExperimentConfig::load(&tests_dir().join("data/freepath_small.toml")).unwrap()
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Field-wise comparison: numbers within a relative 1e-9, text exactly.
fn assert_csv_matches(actual: &Path, golden: &Path) {
    let read = |p: &Path| -> Vec<Vec<String>> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_path(p)
            .unwrap();
        r.records()
            .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
            .collect()
    };
    let (a, g) = (read(actual), read(golden));
    assert_eq!(a.len(), g.len(), "row count of {}", golden.display());
    for (i, (ra, rg)) in a.iter().zip(&g).enumerate() {
        assert_eq!(ra.len(), rg.len(), "row {i} width");
        for (x, y) in ra.iter().zip(rg) {
            match (x.parse::<f64>(), y.parse::<f64>()) {
                (Ok(p), Ok(q)) => {
                    assert!(close(p, q), "row {i} of {}: {x} vs {y}", golden.display())
                }
                _ => assert_eq!(x, y, "row {i} of {}", golden.display()),
            }
        }
    }
}

fn assert_json_matches(a: &Value, g: &Value, at: &str) {
    match (a, g) {
        (Value::Number(p), Value::Number(q)) => {
            assert!(
                close(p.as_f64().unwrap(), q.as_f64().unwrap()),
                "{at}: {p} vs {q}"
            )
        }
        (Value::Object(p), Value::Object(q)) => {
            assert_eq!(
                p.keys().collect::<Vec<_>>(),
                q.keys().collect::<Vec<_>>(),
                "{at}"
            );
            for (k, v) in p {
                assert_json_matches(v, &q[k], &format!("{at}.{k}"));
            }
        }
        (Value::Array(p), Value::Array(q)) => {
            assert_eq!(p.len(), q.len(), "{at}");
            for (i, (x, y)) in p.iter().zip(q).enumerate() {
                assert_json_matches(x, y, &format!("{at}[{i}]"));
            }
        }
        _ => assert_eq!(a, g, "{at}"),
    }
}

#[test]
fn freepath_matches_golden_files() {
    let report = run(&small_freepath()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit(&report, dir.path()).unwrap();
    let golden = tests_dir().join("golden");
    assert_csv_matches(
        &dir.path().join("freepath.csv"),
        &golden.join("freepath.csv"),
    );
    assert_csv_matches(
        &dir.path().join("freepath_cdf.csv"),
        &golden.join("freepath_cdf.csv"),
    );
    let frozen: Value =
        serde_json::from_str(&fs::read_to_string(golden.join("freepath_summary.json")).unwrap())
            .unwrap();
    assert_json_matches(&report.summary["results"], &frozen["results"], "results");
    assert_json_matches(&report.summary["verdicts"], &frozen["verdicts"], "verdicts");
}

#[test]
fn kernel_tables_match_golden_file() {
    let cfg = ExperimentConfig::load(&repo_config("kernels_3d.toml")).unwrap();
    let report = run(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit(&report, dir.path()).unwrap();
    assert_csv_matches(
        &dir.path().join("kernels.csv"),
        &tests_dir().join("golden/kernels_3d.csv"),
    );
}

#[test]
fn emitted_tables_are_rectangular() {
    let report = run(&small_freepath()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = emit(&report, dir.path()).unwrap();
    let names: Vec<String> = files
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().to_string())
        .collect();
    assert_eq!(
        names,
        [
            "freepath.csv",
            "freepath_cdf.csv",
            "microsim.csv",
            "summary.json",
            "timings.json"
        ]
    );
    for table in &report.tables {
        let mut r = csv::Reader::from_path(dir.path().join(format!("{}.csv", table.name))).unwrap();
        let width = r.headers().unwrap().len();
        assert_eq!(width, table.header.len());
        let rows: Vec<_> = r.records().map(|x| x.unwrap()).collect();
        assert_eq!(rows.len(), table.rows.len());
        assert!(rows.iter().all(|x| x.len() == width), "{}", table.name);
    }
    // sample_id, r, tau1, hit_grain, one impact component, escaped
    let micro = report.tables.iter().find(|t| t.name == "microsim").unwrap();
    assert_eq!(
        micro.header,
        ["sample_id", "r", "tau1", "hit_grain", "w1", "escaped"]
    );
    assert_eq!(micro.rows.len(), 2 * 2000);
    assert!(micro.rows.iter().all(|r| (r[5] == "1") == (r[2] == "inf")));
}

#[test]
fn summary_records_config_and_hash() {
    let cfg = small_freepath();
    let report = run(&cfg).unwrap();
    let s = &report.summary;
    assert_eq!(s["experiment"], "freepath");
    assert_eq!(s["config_hash"], cfg.hash().as_str());
    assert_eq!(s["seed"], 7);
    let echoed: ExperimentConfig = serde_json::from_value(s["config"].clone()).unwrap();
    assert_eq!(echoed, cfg);
    assert_eq!(echoed.hash(), cfg.hash());
    assert!(s.get("timings").is_none());
    assert!(report.timings.keys().any(|k| k.starts_with("microsim")));
}

#[test]
fn reruns_are_identical_and_seeds_matter() {
    let cfg = small_freepath();
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    assert_eq!(a.summary, b.summary);
    assert_eq!(a.tables, b.tables);
    let mut other = cfg.clone();
    other.seed = 8;
    let c = run(&other).unwrap();
    assert_ne!(a.tables, c.tables);
    assert_ne!(a.summary["config_hash"], c.summary["config_hash"]);
}

#[test]
fn config_errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(tests_dir().join("data/freepath_small.toml")).unwrap();
    let path = dir.path().join("typo.toml");
    fs::write(&path, text.replace("samples = 2000", "sample = 2000")).unwrap();
    assert!(ExperimentConfig::load(&path).is_err());
    let good = tests_dir().join("data/freepath_small.toml");
    assert!(load_config(&good, &[ExperimentKind::Transition], None).is_err());
    assert_eq!(
        load_config(&good, &[ExperimentKind::Freepath], Some(99))
            .unwrap()
            .seed,
        99
    );
    let mut cfg = small_freepath();
    cfg.r_schedule = vec![0.001, 0.01];
    assert!(run(&cfg).is_err());
}

#[test]
fn repository_configs_validate() {
    for entry in fs::read_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")).unwrap()
    {
        let path = entry.unwrap().path();
        let cfg =
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        cfg.validate().unwrap();
    }
}
