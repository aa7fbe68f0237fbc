use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn zonemda(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zonemda"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/fig5.json")
}

fn write_config(dir: &Path, edit: impl Fn(&mut serde_json::Value)) -> PathBuf {
    let mut cfg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(config_path()).unwrap()).unwrap();
    edit(&mut cfg);
    let path = dir.join("config.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn sweep_writes_csv_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out/sweep.csv");
    let svg = dir.path().join("out/sweep.svg");
    let out = zonemda(&[
        "sweep",
        "--epsilon",
        "0.1",
        "--orders",
        "10",
        "--steps",
        "1001",
        "--out",
        s(&csv),
        "--plot",
        s(&svg),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("delta,dev1_bins,devavg_bins"));
    assert_eq!(lines.count(), 1001);
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));

    let bad = zonemda(&[
        "sweep",
        "--epsilon",
        "0.1",
        "--orders",
        "10",
        "--steps",
        "1",
        "--out",
        s(&csv),
    ]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), |c| c["estimator"] = "mda-quad".into());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let out = zonemda(&["simulate", "--config", s(&cfg), "--out-dir", s(d)]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for name in [
        "spectrum.csv",
        "zones.json",
        "spectrum.svg",
        "deviations.svg",
    ] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let zones: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("zones.json")).unwrap()).unwrap();
    let tones = zones.as_array().unwrap();
    assert_eq!(tones.len(), 2);
    for t in tones {
        for key in ["truth_hz", "estimate_hz", "avg_deviation_hz"] {
            assert!(t[key].is_f64(), "{key}");
        }
        let z = &t["zones"][0];
        for key in [
            "order",
            "measured_bin",
            "refined_offset_bins",
            "zone_freq_hz",
            "reconstructed_hz",
            "deviation_hz",
        ] {
            assert!(!z[key].is_null(), "{key}");
        }
    }
    let spectrum = std::fs::read_to_string(a.join("spectrum.csv")).unwrap();
    assert!(spectrum.starts_with("bin,freq_hz,magnitude\n"));
    assert_eq!(spectrum.lines().count(), 50_002);
}

#[test]
fn simulate_noiseless_hits_ten_khz() {
    let dir = tempfile::tempdir().unwrap();
    let out = zonemda(&[
        "simulate",
        "--config",
        s(&config_path()),
        "--out-dir",
        s(dir.path()),
        "--no-noise",
    ]);
    assert!(out.status.success());
    let zones: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("zones.json")).unwrap())
            .unwrap();
    for t in zones.as_array().unwrap() {
        assert!((t["avg_deviation_hz"].as_f64().unwrap().abs() - 10e3).abs() < 1e-3);
    }
}

#[test]
fn montecarlo_summary_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), |c| c["estimator"] = "mda-quad".into());
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let out = zonemda(&[
        "montecarlo",
        "--config",
        s(&cfg),
        "--trials",
        "4",
        "--seed",
        "9",
        "--out",
        s(&a),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = zonemda(&[
        "montecarlo",
        "--config",
        s(&cfg),
        "--trials",
        "4",
        "--seed",
        "9",
        "--out",
        s(&b),
        "--serial",
    ]);
    assert!(out.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&a).unwrap()).unwrap();
    let tone = &summary["tones"][0];
    for key in ["rms_hz", "mean_hz", "max_abs_hz", "trials", "failures"] {
        assert!(!tone[key].is_null(), "{key}");
    }
    assert_eq!(summary["config"]["order_count"], 10);
}

#[test]
fn predict_prints_closed_form() {
    let out = zonemda(&[
        "predict",
        "--freq-hz",
        "1.321e9",
        "--config",
        s(&config_path()),
    ]);
    assert!(out.status.success());
    let pred: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((pred["average_hz"].as_f64().unwrap() - 10e3).abs() < 1e-6);
    assert_eq!(pred["per_order"][5]["deviation_hz"].as_f64(), Some(100e3));

    let fold = zonemda(&[
        "predict",
        "--freq-hz",
        "0.5e9",
        "--config",
        s(&config_path()),
    ]);
    assert_eq!(fold.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("o");

    let bad = write_config(dir.path(), |c| c["order_count"] = 0.into());
    let out = zonemda(&["simulate", "--config", s(&bad), "--out-dir", s(&out_dir)]);
    assert_eq!(out.status.code(), Some(2));

    let missing = dir.path().join("nope.json");
    let out = zonemda(&[
        "simulate",
        "--config",
        s(&missing),
        "--out-dir",
        s(&out_dir),
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.json"));

    // Between the tone's self-similar chains, with a tight prior window.
    let lost = write_config(dir.path(), |c| {
        c["tones"][0]["zone_prior_hz"] = 1.351e9.into();
        c["association"] = serde_json::json!({"prior_tolerance_hz": 1e6});
    });
    let out = zonemda(&[
        "simulate",
        "--config",
        s(&lost),
        "--out-dir",
        s(&out_dir),
        "--no-noise",
    ]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out_dir.join("zones.json").exists());

    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = zonemda(&[
        "simulate",
        "--config",
        s(&config_path()),
        "--out-dir",
        s(&blocker.join("sub")),
    ]);
    assert_eq!(out.status.code(), Some(4));
}
