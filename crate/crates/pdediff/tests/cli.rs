//! End-to-end checks of the `pdediff` binary: determinism of `gen`, the
//! physics-only sample -> eval loop, exit-code categories, and plot output.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pdediff"))
}

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("pdediff-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

#[test]
fn gen_is_byte_deterministic() {
    let dir = workdir("gen");
    let out1 = dir.join("d1");
    let out2 = dir.join("d2");
    for out in [&out1, &out2] {
        let status = bin()
            .args([
                "gen",
                "--equation",
                "poisson",
                "--n",
                "2",
                "--grid",
                "16",
                "--seed",
                "7",
                "--out",
            ])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_eq!(
        read(&out1.join("samples.bin")),
        read(&out2.join("samples.bin"))
    );
    assert_eq!(
        read(&out1.join("meta.json")),
        read(&out2.join("meta.json"))
    );
    // Effective config echoed next to the outputs.
    assert!(out1.join("dataset.config.json").exists());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn physics_only_sample_then_eval_hits_fdm_accuracy() {
    let dir = workdir("sample");
    let field = dir.join("u.pdef");
    let trace = dir.join("trace.csv");
    let status = bin()
        .args([
            "sample",
            "--mode",
            "physics-only",
            "--equation",
            "poisson",
            "--coef",
            "0.9",
            "--guidance-dt",
            "7e-5",
            "--sigma",
            "0",
            "--grid",
            "64",
            "--iterations",
            "40000",
            "--seed",
            "3",
        ])
        .arg("--out")
        .arg(&field)
        .arg("--trace")
        .arg(&trace)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(trace.exists());

    let report = dir.join("report.csv");
    let plots = dir.join("plots");
    let output = bin()
        .args(["eval", "--equation", "poisson", "--coef", "0.9"])
        .arg("--pred")
        .arg(&field)
        .arg("--report")
        .arg(&report)
        .arg("--plots")
        .arg(&plots)
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = std::fs::read_to_string(&report).unwrap();
    let rel: f64 = text
        .lines()
        .find(|l| l.starts_with("relative_l2,"))
        .and_then(|l| l.split(',').nth(1))
        .unwrap()
        .parse()
        .unwrap();
    assert!(rel < 1e-3, "physics-only sample rel L2 {rel:.3e}");
    for png in ["prediction.png", "reference.png", "error.png", "profile.png"] {
        assert!(plots.join(png).exists(), "missing {png}");
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn plot_writes_heatmap_and_profile() {
    let dir = workdir("plot");
    let field = dir.join("f.pdef");
    // Build a field via a short physics-only run on a small grid.
    assert!(bin()
        .args([
            "sample",
            "--mode",
            "physics-only",
            "--equation",
            "poisson",
            "--coef",
            "1.0",
            "--guidance-dt",
            "2e-4",
            "--sigma",
            "0",
            "--grid",
            "16",
            "--iterations",
            "4000",
        ])
        .arg("--out")
        .arg(&field)
        .status()
        .unwrap()
        .success());
    let png = dir.join("f.png");
    assert!(bin()
        .args(["plot"])
        .arg("--in")
        .arg(&field)
        .arg("--out")
        .arg(&png)
        .arg("--ref")
        .arg(&field)
        .args(["--section-y", "0.5"])
        .status()
        .unwrap()
        .success());
    assert!(png.exists());
    assert!(dir.join("f.profile.png").exists());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn exit_codes_are_categorized() {
    let dir = workdir("codes");
    // Config error: bad coefficient range.
    let out = bin()
        .args([
            "gen",
            "--equation",
            "poisson",
            "--n",
            "1",
            "--grid",
            "16",
            "--coef-min",
            "2.0",
            "--coef-max",
            "1.0",
        ])
        .arg("--out")
        .arg(dir.join("x"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    // Data error: evaluating a missing/garbage field file.
    let bad = dir.join("bad.pdef");
    std::fs::write(&bad, b"not a field").unwrap();
    let out = bin()
        .args(["eval", "--equation", "poisson", "--coef", "1.0"])
        .arg("--pred")
        .arg(&bad)
        .arg("--report")
        .arg(dir.join("r.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));

    // Numeric instability: physics-only far above the stability limit.
    let out = bin()
        .args([
            "sample",
            "--mode",
            "physics-only",
            "--equation",
            "poisson",
            "--coef",
            "0.9",
            "--guidance-dt",
            "1.5e-4",
            "--sigma",
            "0",
            "--grid",
            "64",
            "--iterations",
            "5000",
        ])
        .arg("--out")
        .arg(dir.join("u.pdef"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));

    // Unknown flags fail fast (clap uses exit code 2).
    let out = bin().args(["gen", "--such-flag", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Missing model outside physics-only mode.
    let out = bin()
        .args([
            "sample",
            "--mode",
            "guided",
            "--equation",
            "poisson",
            "--coef",
            "1.0",
        ])
        .arg("--out")
        .arg(dir.join("y.pdef"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = workdir("config");
    let cfg = dir.join("cfg.json");
    std::fs::write(&cfg, r#"{"coef_min": 1.2, "coef_max": 1.4}"#).unwrap();
    let out_dir = dir.join("ds");
    assert!(bin()
        .args(["gen", "--equation", "poisson", "--n", "2", "--grid", "16", "--seed", "1"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .status()
        .unwrap()
        .success());
    let meta: serde_json::Value =
        serde_json::from_slice(&read(&out_dir.join("meta.json"))).unwrap();
    let coefs = meta["coefficients"].as_array().unwrap();
    for c in coefs {
        let v = c.as_f64().unwrap();
        assert!((1.2..1.4).contains(&v), "coefficient {v} outside config range");
    }
    // Echo contains the merged effective config.
    let echo: serde_json::Value =
        serde_json::from_slice(&read(&out_dir.join("dataset.config.json"))).unwrap();
    assert_eq!(echo["coef_min"].as_f64().unwrap(), 1.2);
    std::fs::remove_dir_all(&dir).ok();
}
