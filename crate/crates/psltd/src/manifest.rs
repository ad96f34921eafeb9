//! Dataset manifests: one CSV row per scanned page.
//!
//! Format: a header `path,printer_id,page_id,font_tag` followed by one row
//! per page. Lines starting with `#` are comments. `path` is resolved
//! relative to the manifest's directory; `printer_id` may be empty for
//! unlabeled pages; `page_id` must be unique; `font_tag` is free-form and
//! drives the same-font / cross-font evaluation splits.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Absolute path after resolution against the manifest directory.
    pub path: PathBuf,
    pub printer_id: String,
    pub page_id: String,
    pub font_tag: String,
}

#[derive(Debug, Deserialize)]
struct RawRow {
    path: String,
    printer_id: String,
    page_id: String,
    font_tag: String,
}

/// Read a manifest, resolving relative paths against its directory and
/// rejecting duplicate page ids.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::data(format!("cannot read manifest {}: {e}", path.display())))?;
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for row in reader.deserialize() {
        let raw: RawRow =
            row.map_err(|e| Error::data(format!("malformed manifest row: {e}")))?;
        if raw.page_id.is_empty() {
            return Err(Error::data("manifest row with empty page_id"));
        }
        if !seen.insert(raw.page_id.clone()) {
            return Err(Error::data(format!(
                "duplicate page_id '{}' in manifest",
                raw.page_id
            )));
        }
        let p = PathBuf::from(&raw.path);
        let resolved = if p.is_absolute() { p } else { base.join(p) };
        entries.push(ManifestEntry {
            path: resolved,
            printer_id: raw.printer_id,
            page_id: raw.page_id,
            font_tag: raw.font_tag,
        });
    }
    Ok(entries)
}

/// Write a manifest; paths under `base` are stored relative to it so the
/// directory stays relocatable.
pub fn write_manifest(path: &Path, entries: &[ManifestEntry], base: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::data(format!("cannot write manifest {}: {e}", path.display())))?;
    writer
        .write_record(["path", "printer_id", "page_id", "font_tag"])
        .map_err(|e| Error::data(e.to_string()))?;
    for entry in entries {
        let stored = entry
            .path
            .strip_prefix(base)
            .map(|rel| rel.to_path_buf())
            .unwrap_or_else(|_| entry.path.clone());
        writer
            .write_record([
                stored.to_string_lossy().as_ref(),
                &entry.printer_id,
                &entry.page_id,
                &entry.font_tag,
            ])
            .map_err(|e| Error::data(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

/// True when every page carries a printer label.
pub fn fully_labeled(entries: &[ManifestEntry]) -> bool {
    !entries.is_empty() && entries.iter().all(|e| !e.printer_id.is_empty())
}

/// Distinct printer ids in first-appearance order.
pub fn printer_ids(entries: &[ManifestEntry]) -> Vec<String> {
    let mut ids = Vec::new();
    for e in entries {
        if !e.printer_id.is_empty() && !ids.contains(&e.printer_id) {
            ids.push(e.printer_id.clone());
        }
    }
    ids
}
