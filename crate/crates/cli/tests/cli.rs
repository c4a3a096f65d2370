use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn contrastlab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_contrastlab"))
        .args(args)
        .current_dir(cwd)
        .env_remove("CONTRASTLAB_JOBS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_SERIES: &str = "campaign = \"series\"\n[geometry]\nlevels = [1]\n[physics]\nrho = [1e3]\n";

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = contrastlab(&["--help"], dir.path());
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("campaign"));
}

#[test]
fn unknown_flag_prints_usage_and_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = contrastlab(&["solve", "--no-such-flag"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn constant_interface_data_is_rejected_with_compatibility_message() {
    let dir = tempfile::tempdir().unwrap();
    let o = contrastlab(
        &["solve", "--level", "1", "--bc", "neumann", "--g", "one", "--out", "o"],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("compatibility"), "{}", stderr(&o));
    assert!(stderr(&o).contains("int_Sigma g"));
}

#[test]
fn solve_writes_norms_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    for format in ["csv", "json"] {
        let o = contrastlab(
            &[
                "solve", "--level", "1", "--rho", "1e3", "--format", format, "--out", "o",
            ],
            dir.path(),
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(dir.path().join(format!("o/norms.{format}")).exists());
    }
    let csv = fs::read_to_string(dir.path().join("o/norms.csv")).unwrap();
    assert!(csv.starts_with("rho_re,rho_im,l2_plus"));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/norms.json")).unwrap()).unwrap();
    assert_eq!(json[0]["rho_re"].as_f64(), Some(1e3));
    assert!(dir.path().join("o/solution.txt").exists());
}

#[test]
fn series_reports_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let o = contrastlab(&["series", "--level", "1", "--rho", "1e4", "--out", "o"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("Converged"), "{out}");
    let csv = fs::read_to_string(dir.path().join("o/series.csv")).unwrap();
    assert!(csv.starts_with("k,term_norm_minus,term_norm_plus,c_k_re,c_k_im,cumulative_ratio\n"));
}

#[test]
fn unit_contrast_is_a_precondition_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = contrastlab(&["series", "--level", "1", "--rho", "1", "--out", "o"], dir.path());
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn mesh_and_oracle_write_only_inside_out() {
    let dir = tempfile::tempdir().unwrap();
    let o = contrastlab(&["mesh", "--level", "1", "--out", "m"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(dir.path().join("m/mesh.txt").exists());
    assert!(dir.path().join("m/mesh_summary.csv").exists());
    for problem in ["transmission", "tm"] {
        let o = contrastlab(&["oracle", problem, "--samples", "11", "--out", problem], dir.path());
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let csv = fs::read_to_string(dir.path().join(format!("{problem}/profile.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 12);
    }
    let mut top: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    top.sort();
    assert_eq!(top, ["m", "tm", "transmission"]);
}

#[test]
fn campaign_then_verify_then_tamper() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("series.toml"), SMALL_SERIES).unwrap();
    let o = contrastlab(&["campaign", "--config", "series.toml", "--out", "run1"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("campaign series: pass"));

    let o = contrastlab(&["verify", "run1"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let eq = dir.path().join("run1/equivalence_neumann.csv");
    let text = fs::read_to_string(&eq).unwrap();
    let header = text.lines().next().unwrap();
    let row: Vec<String> = text.lines().nth(1).unwrap().split(',').map(str::to_string).collect();
    let col = header.split(',').position(|h| h == "remainder_proxy_norm").unwrap();
    let mut bad = row.clone();
    bad[col] = "1.0e0".into();
    fs::write(&eq, format!("{header}\n{}\n", bad.join(","))).unwrap();
    let o = contrastlab(&["verify", "run1"], dir.path());
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stdout).contains("CHANGED equivalence_neumann.csv"));

    fs::write(&eq, format!("{header}\n{}", row.join(","))).unwrap();
    let o = contrastlab(&["verify", "run1"], dir.path());
    assert_eq!(code(&o), 2, "truncated file is an integrity error");
}

#[test]
fn campaign_needs_an_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), SMALL_SERIES).unwrap();
    let o = contrastlab(&["campaign", "--config", "c.toml"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(fs::read_dir(dir.path()).unwrap().count() == 1);
}

#[test]
fn bad_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.toml"),
        "campaign = \"uniformity\"\n[physics]\nrho = []\n",
    )
    .unwrap();
    let o = contrastlab(&["campaign", "--config", "c.toml", "--out", "o"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("empty sweep list"));
}

#[test]
fn jobs_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_contrastlab"))
        .args(["solve", "--level", "1", "--out", "o"])
        .current_dir(dir.path())
        .env("CONTRASTLAB_JOBS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = Command::new(env!("CARGO_BIN_EXE_contrastlab"))
        .args(["solve", "--level", "1", "--out", "o"])
        .current_dir(dir.path())
        .env("CONTRASTLAB_JOBS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}
