use std::fs;
use std::process::Command;

fn corrsec() -> Command {
    Command::new(env!("CARGO_BIN_EXE_corrsec"))
}

#[test]
fn unknown_case_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = corrsec()
        .args(["validate-channel", "--case", "5", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_axis_is_a_usage_error() {
    let out = corrsec()
        .args(["sweep", "--axis", "bandwidth"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_config_key_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "rho = 0.5\nbandwidth = 3\n").unwrap();
    let out = corrsec()
        .args(["single", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bandwidth"));
}

#[test]
fn validate_channel_writes_density_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = corrsec()
        .args([
            "validate-channel",
            "--case",
            "3",
            "--samples",
            "200000",
            "--json",
            "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("validate_case3.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("bin_center,empirical,analytic"));
    assert_eq!(lines.count(), 200);
    assert!(dir.path().join("validate_case3.json").exists());
}

#[test]
fn sweep_output_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    fs::write(
        &cfg,
        "ns = 4\nschemes = [\"proposed\", \"traditional\"]\nreplications = 2\n",
    )
    .unwrap();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out_dir = dir.path().join(format!("run{k}"));
        let out = corrsec()
            .args([
                "sweep",
                "--axis",
                "rho",
                "--values",
                "0.2,0.6",
                "--seed",
                "9",
                "--no-timing",
                "--json",
            ])
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        outputs.push(fs::read(out_dir.join("sweep_rho.csv")).unwrap());
        assert!(out_dir.join("sweep_rho.json").exists());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs.pop().unwrap()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "axis_value,scheme,rs_mean,rs_se,runtime_ms,instance_seed_list"
    );
    assert_eq!(lines.len(), 1 + 2 * 2);
    assert!(lines[1].starts_with("0.2,proposed,"));
    let seeds = lines[1].rsplit(',').next().unwrap();
    assert_eq!(seeds.split(';').count(), 2);
}

#[test]
fn single_reports_every_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("single.toml");
    fs::write(&cfg, "rho = 0.3\nns = 4\n").unwrap();
    let out = corrsec()
        .args(["single", "--samples", "20000", "--seed", "3"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(
        matches!(out.status.code(), Some(0) | Some(3)),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("single.json")).unwrap()).unwrap();
    assert_eq!(report["designs"].as_array().unwrap().len(), 3);
    assert_eq!(report["seed"], 3);
}
