//! Run artifacts: coverage maps, position listings, convergence traces, and
//! a hash manifest that makes reruns comparable byte for byte.
//!
//! Every file is written atomically (to a temporary name in the target
//! directory, then renamed), and the manifest is written last so a directory
//! containing `manifest.txt` is always a complete report.
//!
//! `positions.txt` is a line-oriented `key = value` file. Scalar values are
//! printed with the shortest round-trip float representation. Vector values
//! are space-separated: `uav_K = x y z` and `node_K = <uav index> <capacity>`.
//!
//! `convergence.csv` carries wall-clock timings, which differ between runs
//! of the same seed. The manifest therefore lists it as `volatile` instead
//! of hashing it; all other entries are `<name> <sha256 hex>`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::Point3;
use crate::grid::Grid;
use crate::los::export::{encode_csv, encode_pgm};
use crate::los::CoverageGrid;
use crate::placement::TracePoint;

/// File name of the hash manifest.
pub const MANIFEST_NAME: &str = "manifest.txt";
/// Marker used in place of a digest for files that legitimately differ
/// between identical runs.
pub const VOLATILE: &str = "volatile";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot encode {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("manifest line {line} is malformed: {text:?}")]
    BadManifestLine { line: usize, text: String },
}

/// Everything a run wants to persist. All fields are optional; only the
/// artifacts that are present produce files.
#[derive(Debug, Clone, Default)]
pub struct ReportContent {
    /// Union coverage map; written as `coverage.pgm` and `coverage.csv`.
    pub coverage: Option<CoverageGrid>,
    /// Final UAV positions.
    pub uav_positions: Vec<Point3>,
    /// Headline score of the run (coverage percent or mean capacity).
    pub objective: Option<f64>,
    /// Share of ground cells without line of sight, percent.
    pub nlos_percent: Option<f64>,
    /// Per-node serving UAV indices.
    pub assignment: Option<Vec<usize>>,
    /// Per-node capacities, bit/s/Hz, aligned with `assignment`.
    pub node_capacity: Option<Vec<f64>>,
    /// Whether every node ended up on a line-of-sight link.
    pub all_los: Option<bool>,
    /// Objective evaluations spent.
    pub eval_count: Option<u64>,
    /// Search progress samples; written as `convergence.csv`.
    pub trace: Option<Vec<TracePoint>>,
    /// Per-cluster feasible hover regions; written as `region_K.pgm`.
    pub regions: Option<Vec<Grid<bool>>>,
    /// Extra `key = value` lines for `positions.txt`, e.g. the seed.
    pub extra: Vec<(String, String)>,
}

/// One manifest row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub name: String,
    /// Lowercase sha256 hex, or `None` for volatile files.
    pub digest: Option<String>,
}

/// Parsed manifest, sorted by file name.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let digest = e.digest.as_deref().unwrap_or(VOLATILE);
            let _ = writeln!(out, "{} {}", e.name, digest);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, ReportError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let Some((name, digest)) = line.rsplit_once(' ') else {
                return Err(ReportError::BadManifestLine { line: i + 1, text: line.into() });
            };
            let digest = if digest == VOLATILE {
                None
            } else if digest.len() == 64 && digest.bytes().all(|b| b.is_ascii_hexdigit()) {
                Some(digest.to_ascii_lowercase())
            } else {
                return Err(ReportError::BadManifestLine { line: i + 1, text: line.into() });
            };
            entries.push(ManifestEntry { name: name.to_string(), digest });
        }
        Ok(Self { entries })
    }

    pub fn digest_of(&self, name: &str) -> Option<&str> {
        self.entries.iter().find(|e| e.name == name).and_then(|e| e.digest.as_deref())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Writes `bytes` under `dir/name` via a temporary file and a rename, so a
/// crash never leaves a half-written artifact under its final name.
pub fn write_file_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, ReportError> {
    let final_path = dir.join(name);
    let tmp_path = dir.join(format!(".{name}.tmp"));
    let io_err = |path: &Path| {
        let path = path.display().to_string();
        move |source| ReportError::Io { path, source }
    };
    std::fs::write(&tmp_path, bytes).map_err(io_err(&tmp_path))?;
    std::fs::rename(&tmp_path, &final_path).map_err(io_err(&final_path))?;
    Ok(final_path)
}

fn encode_trace(trace: &[TracePoint], name: &str) -> Result<Vec<u8>, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let wrap = |source| ReportError::Csv { path: name.into(), source };
    w.write_record(["wall_seconds", "eval_count", "best_objective"]).map_err(wrap)?;
    for p in trace {
        w.write_record([
            p.wall_seconds.to_string(),
            p.eval_count.to_string(),
            p.best_objective.to_string(),
        ])
        .map_err(|source| ReportError::Csv { path: name.into(), source })?;
    }
    Ok(w.into_inner().expect("vec writer never fails"))
}

fn encode_positions(content: &ReportContent) -> Vec<u8> {
    let mut out = String::new();
    let mut put = |key: &str, value: String| {
        let _ = writeln!(out, "{key} = {value}");
    };
    put("uav_count", content.uav_positions.len().to_string());
    for (i, p) in content.uav_positions.iter().enumerate() {
        put(&format!("uav_{i}"), format!("{} {} {}", p.x, p.y, p.z));
    }
    if let Some(v) = content.objective {
        put("objective", v.to_string());
    }
    if let Some(v) = content.nlos_percent {
        put("nlos_percent", v.to_string());
    }
    if let Some(v) = content.all_los {
        put("all_los", v.to_string());
    }
    if let Some(v) = content.eval_count {
        put("eval_count", v.to_string());
    }
    if let Some(assignment) = &content.assignment {
        put("node_count", assignment.len().to_string());
        for (i, &uav) in assignment.iter().enumerate() {
            let capacity = content
                .node_capacity
                .as_ref()
                .and_then(|c| c.get(i))
                .map_or(String::new(), |c| format!(" {c}"));
            put(&format!("node_{i}"), format!("{uav}{capacity}"));
        }
    }
    for (key, value) in &content.extra {
        put(key, value.clone());
    }
    out.into_bytes()
}

/// Writes every present artifact into `dir` and finishes with the manifest.
/// Returns the manifest that was written.
pub fn write_report(dir: &Path, content: &ReportContent) -> Result<Manifest, ReportError> {
    std::fs::create_dir_all(dir).map_err(|source| ReportError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut entries: Vec<ManifestEntry> = Vec::new();
    let mut emit = |name: &str, bytes: &[u8], volatile: bool| -> Result<(), ReportError> {
        write_file_atomic(dir, name, bytes)?;
        let digest = (!volatile).then(|| sha256_hex(bytes));
        entries.push(ManifestEntry { name: name.to_string(), digest });
        Ok(())
    };

    if let Some(coverage) = &content.coverage {
        emit("coverage.pgm", &encode_pgm(&coverage.bits), false)?;
        emit("coverage.csv", encode_csv(&coverage.bits).as_bytes(), false)?;
    }
    emit("positions.txt", &encode_positions(content), false)?;
    if let Some(trace) = &content.trace {
        emit("convergence.csv", &encode_trace(trace, "convergence.csv")?, true)?;
    }
    if let Some(regions) = &content.regions {
        for (i, region) in regions.iter().enumerate() {
            emit(&format!("region_{i}.pgm"), &encode_pgm(region), false)?;
        }
    }

    entries.sort_by(|a, b| a.name.cmp(&b.name));
    let manifest = Manifest { entries };
    write_file_atomic(dir, MANIFEST_NAME, manifest.to_text().as_bytes())?;
    Ok(manifest)
}

/// Reads and parses `dir/manifest.txt`.
pub fn read_manifest(dir: &Path) -> Result<Manifest, ReportError> {
    let path = dir.join(MANIFEST_NAME);
    let text = std::fs::read_to_string(&path).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Manifest::parse(&text)
}

/// Recomputes every hashed entry against the files on disk and reports
/// mismatches or unreadable files as `(name, reason)` pairs.
pub fn verify_report(dir: &Path) -> Result<Vec<(String, String)>, ReportError> {
    let manifest = read_manifest(dir)?;
    let mut bad = Vec::new();
    for entry in &manifest.entries {
        let Some(expected) = &entry.digest else {
            continue;
        };
        let path = dir.join(&entry.name);
        match std::fs::read(&path) {
            Ok(bytes) => {
                let actual = sha256_hex(&bytes);
                if actual != *expected {
                    bad.push((entry.name.clone(), format!("hash mismatch: {actual}")));
                }
            }
            Err(e) => bad.push((entry.name.clone(), e.to_string())),
        }
    }
    Ok(bad)
}
