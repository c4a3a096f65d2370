//! Campaigns, their artifacts and the manifest that certifies them.
//!
//! A campaign writes one CSV per table into its output directory and a
//! `manifest.json` (schema `v1`) listing mesh fingerprints, file checksums
//! and row counts, the acceptance predicates with their verdicts, and the
//! wall-clock time. Predicates are always evaluated from the CSV text, so
//! [`verify_manifest`] reproduces them without re-solving anything.

mod campaigns;
mod config;
mod predicate;
mod table;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use campaigns::{MeshRecord, Recorder};
pub use config::{CampaignConfig, CampaignKind, DataConfig, GeometryConfig, GeometryKind, PhysicsConfig, SeriesConfig};
pub use predicate::{evaluate_all, spread, Predicate, PredicateOutcome, RowFilter};
pub use table::{fmt17, Table};

use crate::error::{Error, Result};

pub const MANIFEST_SCHEMA: &str = "v1";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    /// A solve failed; the tables written before the failure are kept.
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub name: String,
    pub sha256: String,
    pub rows: usize,
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub campaign: CampaignKind,
    pub config: CampaignConfig,
    pub meshes: Vec<MeshRecord>,
    pub files: Vec<FileRecord>,
    pub predicates: Vec<PredicateOutcome>,
    pub notes: Vec<String>,
    pub status: RunStatus,
    pub error: Option<String>,
    pub passed: bool,
    pub threads: usize,
    pub wall_clock_seconds: f64,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Manifest> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::Integrity {
            path: path.clone(),
            message: e.to_string(),
        })?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Integrity {
            path: path.clone(),
            message: e.to_string(),
        })?;
        if m.schema != MANIFEST_SCHEMA {
            return Err(Error::Integrity {
                path,
                message: format!("unsupported manifest schema `{}`", m.schema),
            });
        }
        Ok(m)
    }

    pub fn failed_predicates(&self) -> impl Iterator<Item = &PredicateOutcome> {
        self.predicates.iter().filter(|p| !p.passed)
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Runs a campaign into `out_dir`. On a solve error the tables produced so
/// far and an `aborted` manifest are still written, then the error is
/// returned.
pub fn run_campaign(cfg: &CampaignConfig, out_dir: &Path) -> Result<Manifest> {
    cfg.validate()?;
    create_dir(out_dir)?;
    let start = Instant::now();
    let mut rec = Recorder::default();
    let outcome = campaigns::run(cfg, &mut rec);

    let mut files = Vec::new();
    let mut tables = BTreeMap::new();
    for t in &rec.tables {
        let text = t.to_csv();
        let path = out_dir.join(t.file_name());
        std::fs::write(&path, &text).map_err(|e| Error::io(&path, e))?;
        files.push(FileRecord {
            name: t.file_name(),
            sha256: sha256_hex(text.as_bytes()),
            rows: t.rows.len(),
            columns: t.header.clone(),
        });
        tables.insert(t.file_name(), Table::from_csv(&t.name, &text, &path)?);
    }
    let (status, error, predicates) = match &outcome {
        Ok(()) => (RunStatus::Complete, None, evaluate_all(&rec.predicates, &tables)?),
        Err(e) => (RunStatus::Aborted, Some(e.to_string()), Vec::new()),
    };
    let passed = status == RunStatus::Complete && predicates.iter().all(|p| p.passed);
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA.into(),
        campaign: cfg.campaign,
        config: cfg.clone(),
        meshes: rec.meshes,
        files,
        predicates,
        notes: rec.notes,
        status,
        error,
        passed,
        threads: rayon::current_num_threads(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    let path = out_dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    outcome.map(|()| manifest)
}

/// Outcome of re-checking a stored campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub campaign: CampaignKind,
    pub predicates: Vec<PredicateOutcome>,
    /// Files whose content no longer matches the recorded checksum.
    pub checksum_mismatches: Vec<String>,
    pub passed: bool,
}

/// Re-evaluates the stored predicates from the CSVs of `dir`. Missing,
/// truncated or malformed files are integrity errors; a well-formed file
/// with altered values is reported as a checksum mismatch and through the
/// predicates it breaks.
pub fn verify_manifest(dir: &Path) -> Result<VerifyReport> {
    let m = Manifest::read(dir)?;
    let mut tables = BTreeMap::new();
    let mut mismatches = Vec::new();
    for f in &m.files {
        let path: PathBuf = dir.join(&f.name);
        let integrity = |message: String| Error::Integrity {
            path: path.clone(),
            message,
        };
        let text = std::fs::read_to_string(&path).map_err(|e| integrity(e.to_string()))?;
        if !text.ends_with('\n') {
            return Err(integrity("file does not end with a complete row".into()));
        }
        let name = f.name.strip_suffix(".csv").unwrap_or(&f.name);
        let t = Table::from_csv(name, &text, &path)?;
        if t.header != f.columns {
            return Err(integrity(format!(
                "columns {:?}, manifest lists {:?}",
                t.header, f.columns
            )));
        }
        if t.rows.len() != f.rows {
            return Err(integrity(format!("{} rows, manifest lists {}", t.rows.len(), f.rows)));
        }
        if sha256_hex(text.as_bytes()) != f.sha256 {
            mismatches.push(f.name.clone());
        }
        tables.insert(f.name.clone(), t);
    }
    let named: Vec<(String, Predicate)> = m
        .predicates
        .iter()
        .map(|p| (p.name.clone(), p.predicate.clone()))
        .collect();
    let predicates = evaluate_all(&named, &tables)?;
    let passed = m.status == RunStatus::Complete && mismatches.is_empty() && predicates.iter().all(|p| p.passed);
    Ok(VerifyReport {
        campaign: m.campaign,
        predicates,
        checksum_mismatches: mismatches,
        passed,
    })
}
