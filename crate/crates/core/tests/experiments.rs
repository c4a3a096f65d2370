use std::fs;

use contrastlab_core::experiments::{run_campaign, verify_manifest, CampaignConfig, Manifest, RunStatus, Table};
use contrastlab_core::Error;

const LIMIT_RATE: &str = "campaign = \"limit_rate\"\n[geometry]\nlevels = [1]\n[physics]\nrho = [1e2, 1e3, 1e4, 1e5]\nbc = [\"neumann\", \"dirichlet\"]\n";

fn run(toml: &str) -> (tempfile::TempDir, Manifest) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = CampaignConfig::from_toml(toml).unwrap();
    let m = run_campaign(&cfg, dir.path()).unwrap();
    (dir, m)
}

#[test]
fn stored_campaign_verifies() {
    let (dir, m) = run(LIMIT_RATE);
    assert!(m.passed, "{:?}", m.failed_predicates().collect::<Vec<_>>());
    assert_eq!(m.status, RunStatus::Complete);
    assert_eq!(m.predicates.len(), 6);
    let again = Manifest::read(dir.path()).unwrap();
    assert_eq!(again, m);
    let r = verify_manifest(dir.path()).unwrap();
    assert!(r.passed);
    assert!(r.checksum_mismatches.is_empty());
    assert_eq!(r.predicates, m.predicates);
}

#[test]
fn scaling_one_order_by_ten_breaks_its_slope() {
    let (dir, _) = run(LIMIT_RATE);
    let path = dir.path().join("remainder_neumann.csv");
    let mut t = Table::from_csv("remainder_neumann", &fs::read_to_string(&path).unwrap(), &path).unwrap();
    let (k, y) = (
        t.column_index("K").unwrap(),
        t.column_index("remainder_proxy_norm").unwrap(),
    );
    // only the last K = 1 row, so the fitted slope moves by ln 10 / spread
    let last = t.rows.iter().rposition(|r| r[k] == Some(1.0)).unwrap();
    t.rows[last][y] = t.rows[last][y].map(|v| 10.0 * v);
    t.write(dir.path()).unwrap();
    let r = verify_manifest(dir.path()).unwrap();
    assert!(!r.passed);
    assert_eq!(r.checksum_mismatches, vec!["remainder_neumann.csv".to_string()]);
    let failed: Vec<&str> = r
        .predicates
        .iter()
        .filter(|p| !p.passed)
        .map(|p| p.name.as_str())
        .collect();
    assert_eq!(failed, vec!["limit rate neumann K=1: slope -2 +- 0.15"]);
}

#[test]
fn truncated_or_missing_files_are_integrity_errors() {
    let (dir, _) = run(LIMIT_RATE);
    let path = dir.path().join("remainder_dirichlet.csv");
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, &text[..text.len() - 7]).unwrap();
    assert!(matches!(verify_manifest(dir.path()), Err(Error::Integrity { .. })));

    let lines: Vec<&str> = text.lines().collect();
    fs::write(&path, lines[..lines.len() - 1].join("\n") + "\n").unwrap();
    assert!(matches!(verify_manifest(dir.path()), Err(Error::Integrity { .. })));

    fs::remove_file(&path).unwrap();
    assert!(matches!(verify_manifest(dir.path()), Err(Error::Integrity { .. })));

    fs::remove_file(dir.path().join("manifest.json")).unwrap();
    assert!(matches!(verify_manifest(dir.path()), Err(Error::Integrity { .. })));
}

#[test]
fn empty_sweeps_are_config_errors() {
    for toml in [
        "campaign = \"series\"\n[physics]\nrho = []\n",
        "campaign = \"maxwell_uniform\"\n[physics]\nrho = [1e3]\n",
        "campaign = \"skin\"\n[physics]\ndelta = []\n",
        "campaign = \"limit_rate\"\n[physics]\nrho = [1e3]\n[series]\norders = []\n",
    ] {
        assert!(
            matches!(CampaignConfig::from_toml(toml), Err(Error::Config(_))),
            "{toml}"
        );
    }
}

#[test]
fn failed_solve_leaves_an_aborted_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = CampaignConfig::from_toml(
        "campaign = \"uniformity\"\n[geometry]\nlevels = [1]\n[physics]\nrho = [1e2]\n[data]\ng = \"one\"\n",
    )
    .unwrap();
    let err = run_campaign(&cfg, dir.path()).unwrap_err();
    assert!(err.is_precondition(), "{err}");
    let m = Manifest::read(dir.path()).unwrap();
    assert_eq!(m.status, RunStatus::Aborted);
    assert!(!m.passed);
    assert!(m.error.unwrap().contains("compatibility"));
}

#[test]
fn series_tables_have_the_documented_columns() {
    let (dir, m) = run("campaign = \"series\"\n[geometry]\nlevels = [1]\n[physics]\nrho = [1e3]\n");
    assert!(m.passed);
    let text = fs::read_to_string(dir.path().join("series_neumann_rho0.csv")).unwrap();
    assert!(text.starts_with("k,term_norm_minus,term_norm_plus,c_k_re,c_k_im,cumulative_ratio\n"));
    assert_eq!(m.meshes.len(), 1);
    assert_eq!(m.meshes[0].sha256.len(), 64);
}
