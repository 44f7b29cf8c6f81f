use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn polyxport(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyxport"))
        .args(args)
        .output()
        .unwrap()
}

fn small_config() -> String {
    root()
        .join("crates/core/tests/data/freepath_small.toml")
        .display()
        .to_string()
}

#[test]
fn kernels_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = root().join("configs/kernels_3d.toml");
    let o = polyxport(&["kernels", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["kernels.csv", "summary.json", "timings.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn microsim_writes_the_named_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("samples.csv");
    let cfg = root().join("configs/microsim_two_squares.toml");
    let o = polyxport(&[
        "microsim",
        "--config",
        cfg.to_str().unwrap(),
        "--samples",
        "1500",
        "--r",
        "0.02,0.01",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "sample_id,r,tau1,hit_grain,w1,escaped"
    );
    assert_eq!(lines.count(), 3000);
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn exit_codes_follow_verdicts_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = polyxport(&[
        "freepath",
        "--config",
        &small_config(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS ks_decreasing"));

    let strict = dir.path().join("strict.toml");
    fs::write(
        &strict,
        fs::read_to_string(small_config())
            .unwrap()
            .replace("ks_final = 0.5", "ks_final = 1e-6"),
    )
    .unwrap();
    let o = polyxport(&[
        "freepath",
        "--config",
        strict.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL ks_final_below_threshold"));

    let o = polyxport(&[
        "transition",
        "--config",
        &small_config(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("expected transition"));
    let o = polyxport(&["freepath", "--config", "/nonexistent.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn single_threaded_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "1", "2"].iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        let o = polyxport(&[
            "freepath",
            "--config",
            &small_config(),
            "--out",
            out.to_str().unwrap(),
            "--threads",
            threads,
            "--seed",
            "11",
        ]);
        assert!(o.status.success());
        let files: Vec<Vec<u8>> = [
            "freepath.csv",
            "freepath_cdf.csv",
            "microsim.csv",
            "summary.json",
        ]
        .iter()
        .map(|f| fs::read(out.join(f)).unwrap())
        .collect();
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}
