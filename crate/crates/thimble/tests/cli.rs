use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use thimble::config::RunConfig;
use thimble::output::config_from_manifest;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn thimble(sub: &str, config: &Path, out: &Path, sets: &[&str]) -> i32 {
    let mut c = Command::new(env!("CARGO_BIN_EXE_thimble"));
    c.arg(sub)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(["--threads", "2"]);
    for s in sets {
        c.args(["--set", s]);
    }
    c.status().expect("binary runs").code().unwrap_or(-1)
}

fn data_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn toy_contour_lies_on_the_diagonal() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(
        thimble("flow1d", &configs().join("toy_z2.toml"), out.path(), &[]),
        0
    );
    let text = fs::read_to_string(out.path().join("contour.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut active = 0;
    for r in rdr.records() {
        let r = r.unwrap();
        let (x, y): (f64, f64) = (r[1].parse().unwrap(), r[2].parse().unwrap());
        if &r[3] == "1" && x.hypot(y) > 0.1 {
            active += 1;
            assert!(
                (y - x).abs() < 1e-3 * x.hypot(y),
                "node ({x}, {y}) off the ray"
            );
        }
    }
    assert!(active > 100);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = configs().join("monochromatic.toml");
    for d in [&a, &b] {
        assert_eq!(thimble("necklace", &cfg, d.path(), &["scan.q=30"]), 0);
    }
    let fa = data_files(a.path());
    assert_eq!(fa.len(), 2);
    assert_eq!(fa, data_files(b.path()));
    let ma = fs::read(a.path().join("manifest.json")).unwrap();
    assert_eq!(ma, fs::read(b.path().join("manifest.json")).unwrap());
}

#[test]
fn manifest_reparses_to_the_same_config() {
    let out = tempfile::tempdir().unwrap();
    let path = configs().join("ati_two_colour.toml");
    assert_eq!(
        thimble("saddles", &path, out.path(), &["target.momentum=0.8"]),
        0
    );
    let original = RunConfig::parse(
        &fs::read_to_string(&path).unwrap(),
        &["target.momentum=0.8".into()],
    )
    .unwrap();
    let echoed = config_from_manifest(&out.path().join("manifest.json")).unwrap();
    assert_eq!(echoed, original);
    assert_eq!(echoed.target.momentum, 0.8);
}

#[test]
fn config_errors_exit_with_two() {
    let out = tempfile::tempdir().unwrap();
    let cfg = configs().join("monochromatic.toml");
    assert_eq!(
        thimble("saddles", &cfg, out.path(), &["field.lambda_nm=800"]),
        2
    );
    assert_eq!(
        thimble("saddles", &cfg, out.path(), &["flow.l_thresh=-1"]),
        2
    );
    assert_eq!(thimble("caustics", &cfg, out.path(), &[]), 2);
    assert_eq!(
        thimble("saddles", &configs().join("missing.toml"), out.path(), &[]),
        2
    );
}

#[test]
fn numerical_failures_exit_with_three_and_keep_results() {
    let out = tempfile::tempdir().unwrap();
    // far from any triple of coalescing saddles
    let code = thimble(
        "cusp",
        &configs().join("switchover.toml"),
        out.path(),
        &["scan.seed_q=80"],
    );
    assert_eq!(code, 3);
    assert!(out.path().join("manifest.json").exists());
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.path().join("manifest.json")).unwrap())
            .unwrap();
    assert!(!m["failures"].as_array().unwrap().is_empty());
}
