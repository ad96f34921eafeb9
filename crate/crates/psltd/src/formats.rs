//! On-disk artifact formats.
//!
//! * **Feature file** — little-endian binary: magic `PSLT`, `version: u32`,
//!   `dim: u32`, `count: u64`, then `count` rows of `dim` 32-bit floats.
//!   A sidecar CSV maps each row to `(page_id, ordinal, label)`; its leading
//!   `# key=value` comment lines carry the feature-configuration hash, the
//!   pooling group size, and the bit depth, so every artifact is traceable
//!   to the configuration that produced it.
//! * **Model file** — magic `PSLM`, `version: u32`, `json_len: u64`, a JSON
//!   envelope (classes, kernel parameters, scaling bounds, prune mask,
//!   feature-config hash, per-machine headers), then per machine its support
//!   vectors and dual coefficients as 32-bit floats in envelope order.
//! * **Predictions** — JSONL: one header line, then one object per record.
//! * **Confusion matrix** — CSV, rows = true class, columns = predicted.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{PruneMask, Scaler};
use crate::svm::{BinarySvm, PairMachine, SvmModel};

pub const FEATURE_MAGIC: &[u8; 4] = b"PSLT";
pub const MODEL_MAGIC: &[u8; 4] = b"PSLM";
pub const CACHE_MAGIC: &[u8; 4] = b"PSLC";
pub const FORMAT_VERSION: u32 = 1;

/// Row-level metadata stored in the feature sidecar.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub page_id: String,
    /// Pooling-group ordinal within the page.
    pub ordinal: u32,
    /// Printer label; empty when unlabeled.
    pub label: String,
}

/// Provenance recorded in the sidecar's comment header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SidecarInfo {
    pub config_hash: String,
    pub np: u32,
    pub bit_depth: u8,
}

/// A loaded feature file: rows, row metadata, and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub dim: usize,
    pub rows: Vec<Vec<f64>>,
    pub meta: Vec<FeatureMeta>,
    pub info: SidecarInfo,
}

/// Conventional sidecar path: the binary path with a `.csv` extension.
pub fn sidecar_path(bin_path: &Path) -> std::path::PathBuf {
    bin_path.with_extension("csv")
}

/// Write the binary feature file and its sidecar CSV.
pub fn write_feature_file(
    bin_path: &Path,
    csv_path: &Path,
    rows: &[Vec<f64>],
    meta: &[FeatureMeta],
    info: &SidecarInfo,
) -> Result<()> {
    if rows.len() != meta.len() {
        return Err(Error::data(format!(
            "feature rows ({}) and metadata rows ({}) differ",
            rows.len(),
            meta.len()
        )));
    }
    let dim = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::data("ragged feature rows"));
    }

    let mut bin = BufWriter::new(File::create(bin_path)?);
    bin.write_all(FEATURE_MAGIC)?;
    bin.write_all(&FORMAT_VERSION.to_le_bytes())?;
    bin.write_all(&(dim as u32).to_le_bytes())?;
    bin.write_all(&(rows.len() as u64).to_le_bytes())?;
    for row in rows {
        for &v in row {
            bin.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    bin.flush()?;

    let mut csv_file = BufWriter::new(File::create(csv_path)?);
    writeln!(csv_file, "# config_hash={}", info.config_hash)?;
    writeln!(csv_file, "# np={}", info.np)?;
    writeln!(csv_file, "# bit_depth={}", info.bit_depth)?;
    let mut w = csv::Writer::from_writer(csv_file);
    w.write_record(["row", "page_id", "ordinal", "label"])
        .map_err(|e| Error::data(e.to_string()))?;
    for (i, m) in meta.iter().enumerate() {
        w.write_record([
            i.to_string().as_str(),
            &m.page_id,
            m.ordinal.to_string().as_str(),
            &m.label,
        ])
        .map_err(|e| Error::data(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn read_exact_or_err(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| Error::data(format!("truncated {what}: {e}")))
}

/// Read a feature file pair written by [`write_feature_file`].
pub fn read_feature_file(bin_path: &Path, csv_path: &Path) -> Result<FeatureSet> {
    let mut bin = BufReader::new(File::open(bin_path)?);
    let mut magic = [0u8; 4];
    read_exact_or_err(&mut bin, &mut magic, "feature file header")?;
    if &magic != FEATURE_MAGIC {
        return Err(Error::data(format!(
            "{} is not a feature file (bad magic)",
            bin_path.display()
        )));
    }
    let mut u32buf = [0u8; 4];
    read_exact_or_err(&mut bin, &mut u32buf, "feature file version")?;
    let version = u32::from_le_bytes(u32buf);
    if version != FORMAT_VERSION {
        return Err(Error::data(format!(
            "unsupported feature file version {version}"
        )));
    }
    read_exact_or_err(&mut bin, &mut u32buf, "feature file dim")?;
    let dim = u32::from_le_bytes(u32buf) as usize;
    let mut u64buf = [0u8; 8];
    read_exact_or_err(&mut bin, &mut u64buf, "feature file count")?;
    let count = u64::from_le_bytes(u64buf) as usize;

    let mut rows = Vec::with_capacity(count);
    let mut row_bytes = vec![0u8; dim * 4];
    for i in 0..count {
        read_exact_or_err(&mut bin, &mut row_bytes, &format!("feature row {i}"))?;
        rows.push(
            row_bytes
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
                .collect(),
        );
    }

    let (meta, info) = read_sidecar(csv_path)?;
    if meta.len() != count {
        return Err(Error::data(format!(
            "sidecar has {} rows but the binary holds {count}",
            meta.len()
        )));
    }
    Ok(FeatureSet {
        dim,
        rows,
        meta,
        info,
    })
}

fn read_sidecar(csv_path: &Path) -> Result<(Vec<FeatureMeta>, SidecarInfo)> {
    let text = std::fs::read_to_string(csv_path)
        .map_err(|e| Error::data(format!("cannot read sidecar {}: {e}", csv_path.display())))?;
    let mut config_hash = None;
    let mut np = None;
    let mut bit_depth = None;
    let mut body = String::new();
    for line in text.lines() {
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((k, v)) = comment.trim().split_once('=') {
                match k.trim() {
                    "config_hash" => config_hash = Some(v.trim().to_string()),
                    "np" => np = v.trim().parse::<u32>().ok(),
                    "bit_depth" => bit_depth = v.trim().parse::<u8>().ok(),
                    _ => {}
                }
            }
            continue;
        }
        body.push_str(line);
        body.push('\n');
    }
    let info = SidecarInfo {
        config_hash: config_hash
            .ok_or_else(|| Error::data("sidecar is missing the config_hash comment"))?,
        np: np.ok_or_else(|| Error::data("sidecar is missing the np comment"))?,
        bit_depth: bit_depth
            .ok_or_else(|| Error::data("sidecar is missing the bit_depth comment"))?,
    };

    #[derive(Deserialize)]
    struct RawRow {
        row: usize,
        page_id: String,
        ordinal: u32,
        label: String,
    }
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let mut meta = Vec::new();
    for (i, rec) in reader.deserialize().enumerate() {
        let raw: RawRow = rec.map_err(|e| Error::data(format!("malformed sidecar row: {e}")))?;
        if raw.row != i {
            return Err(Error::data(format!(
                "sidecar row index {} out of order (expected {i})",
                raw.row
            )));
        }
        meta.push(FeatureMeta {
            page_id: raw.page_id,
            ordinal: raw.ordinal,
            label: raw.label,
        });
    }
    Ok((meta, info))
}

/// Write per-letter descriptor rows to a cache entry at full (f64) precision,
/// so that reading them back reproduces the original values bit for bit —
/// unlike feature files, which store f32. The configuration hash is embedded
/// and checked on read.
pub fn write_component_cache(path: &Path, rows: &[Vec<f64>], config_hash: &str) -> Result<()> {
    let dim = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::data("ragged cache rows"));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CACHE_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    let hash = config_hash.as_bytes();
    w.write_all(&(hash.len() as u32).to_le_bytes())?;
    w.write_all(hash)?;
    w.write_all(&(dim as u32).to_le_bytes())?;
    w.write_all(&(rows.len() as u64).to_le_bytes())?;
    for row in rows {
        for &v in row {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a cache entry written by [`write_component_cache`], verifying its
/// embedded configuration hash against `expected_hash`.
pub fn read_component_cache(path: &Path, expected_hash: &str) -> Result<Vec<Vec<f64>>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    read_exact_or_err(&mut r, &mut magic, "cache entry header")?;
    if &magic != CACHE_MAGIC {
        return Err(Error::data(format!(
            "{} is not a descriptor cache entry (bad magic)",
            path.display()
        )));
    }
    let mut u32buf = [0u8; 4];
    read_exact_or_err(&mut r, &mut u32buf, "cache entry version")?;
    let version = u32::from_le_bytes(u32buf);
    if version != FORMAT_VERSION {
        return Err(Error::data(format!(
            "unsupported cache entry version {version}"
        )));
    }
    read_exact_or_err(&mut r, &mut u32buf, "cache entry hash length")?;
    let hash_len = u32::from_le_bytes(u32buf) as usize;
    if hash_len > 1024 {
        return Err(Error::data("implausible cache entry hash length"));
    }
    let mut hash_bytes = vec![0u8; hash_len];
    read_exact_or_err(&mut r, &mut hash_bytes, "cache entry hash")?;
    if hash_bytes != expected_hash.as_bytes() {
        return Err(Error::data(format!(
            "cache entry {} was written under a different configuration",
            path.display()
        )));
    }
    read_exact_or_err(&mut r, &mut u32buf, "cache entry dim")?;
    let dim = u32::from_le_bytes(u32buf) as usize;
    let mut u64buf = [0u8; 8];
    read_exact_or_err(&mut r, &mut u64buf, "cache entry count")?;
    let count = u64::from_le_bytes(u64buf) as usize;

    let mut rows = Vec::with_capacity(count);
    let mut row_bytes = vec![0u8; dim * 8];
    for i in 0..count {
        read_exact_or_err(&mut r, &mut row_bytes, &format!("cache row {i}"))?;
        rows.push(
            row_bytes
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
                .collect(),
        );
    }
    Ok(rows)
}

#[derive(Serialize, Deserialize)]
struct MachineHeader {
    a: usize,
    b: usize,
    bias: f64,
    sv_count: u64,
}

#[derive(Serialize, Deserialize)]
struct ModelEnvelope {
    version: u32,
    classes: Vec<String>,
    c: f64,
    gamma: f64,
    scale_min: Vec<f64>,
    scale_max: Vec<f64>,
    prune_mask: PruneMask,
    feature_config_hash: String,
    np: u32,
    machines: Vec<MachineHeader>,
}

/// Serialize a trained model. Support vectors and coefficients are stored as
/// 32-bit floats (the feature-row format); everything else lives in the JSON
/// envelope.
pub fn write_model(path: &Path, model: &SvmModel) -> Result<()> {
    let envelope = ModelEnvelope {
        version: FORMAT_VERSION,
        classes: model.classes.clone(),
        c: model.c,
        gamma: model.gamma,
        scale_min: model.scaler.min.clone(),
        scale_max: model.scaler.max.clone(),
        prune_mask: model.prune.clone(),
        feature_config_hash: model.feature_config_hash.clone(),
        np: model.np,
        machines: model
            .machines
            .iter()
            .map(|m| MachineHeader {
                a: m.a,
                b: m.b,
                bias: m.svm.bias,
                sv_count: m.svm.support_vectors.len() as u64,
            })
            .collect(),
    };
    let json = serde_json::to_vec(&envelope).map_err(|e| Error::data(e.to_string()))?;

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MODEL_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for machine in &model.machines {
        for sv in &machine.svm.support_vectors {
            for &v in sv {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
        }
        for &c in &machine.svm.coefficients {
            w.write_all(&(c as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Load a model written by [`write_model`].
pub fn read_model(path: &Path) -> Result<SvmModel> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    read_exact_or_err(&mut r, &mut magic, "model header")?;
    if &magic != MODEL_MAGIC {
        return Err(Error::data(format!(
            "{} is not a model file (bad magic)",
            path.display()
        )));
    }
    let mut u32buf = [0u8; 4];
    read_exact_or_err(&mut r, &mut u32buf, "model version")?;
    let version = u32::from_le_bytes(u32buf);
    if version != FORMAT_VERSION {
        return Err(Error::data(format!("unsupported model version {version}")));
    }
    let mut u64buf = [0u8; 8];
    read_exact_or_err(&mut r, &mut u64buf, "model envelope length")?;
    let json_len = u64::from_le_bytes(u64buf) as usize;
    let mut json = vec![0u8; json_len];
    read_exact_or_err(&mut r, &mut json, "model envelope")?;
    let envelope: ModelEnvelope = serde_json::from_slice(&json)
        .map_err(|e| Error::data(format!("malformed model envelope: {e}")))?;

    let dim = envelope.prune_mask.kept.len();
    if envelope.scale_min.len() != dim || envelope.scale_max.len() != dim {
        return Err(Error::data(
            "model scaling bounds disagree with the prune mask width",
        ));
    }
    let mut machines = Vec::with_capacity(envelope.machines.len());
    for h in &envelope.machines {
        let count = h.sv_count as usize;
        let mut sv_bytes = vec![0u8; count * dim * 4];
        read_exact_or_err(&mut r, &mut sv_bytes, "support vectors")?;
        let mut support_vectors = Vec::with_capacity(count);
        for row in sv_bytes.chunks_exact(dim * 4) {
            support_vectors.push(
                row.chunks_exact(4)
                    .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
                    .collect::<Vec<f64>>(),
            );
        }
        let mut coef_bytes = vec![0u8; count * 4];
        read_exact_or_err(&mut r, &mut coef_bytes, "coefficients")?;
        let coefficients = coef_bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        machines.push(PairMachine {
            a: h.a,
            b: h.b,
            svm: BinarySvm {
                support_vectors,
                coefficients,
                bias: h.bias,
            },
        });
    }

    Ok(SvmModel {
        classes: envelope.classes,
        c: envelope.c,
        gamma: envelope.gamma,
        machines,
        scaler: Scaler {
            min: envelope.scale_min,
            max: envelope.scale_max,
        },
        prune: envelope.prune_mask,
        np: envelope.np,
        feature_config_hash: envelope.feature_config_hash,
    })
}

/// First line of every predictions file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionsHeader {
    pub config_hash: String,
    pub np: u32,
}

/// One pooled group's predicted printer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupPrediction {
    pub page_id: String,
    pub ordinal: u32,
    pub predicted: String,
}

/// One page's majority-vote outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PagePrediction {
    pub page_id: String,
    pub predicted: String,
    pub group_count: usize,
    /// True label when the manifest carried one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<String>,
}

/// Write a JSONL file: header line, then one line per record.
pub fn write_jsonl<T: Serialize>(
    path: &Path,
    header: &PredictionsHeader,
    records: &[T],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, header).map_err(|e| Error::data(e.to_string()))?;
    writeln!(w)?;
    for rec in records {
        serde_json::to_writer(&mut w, rec).map_err(|e| Error::data(e.to_string()))?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a JSONL file written by [`write_jsonl`].
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(
    path: &Path,
) -> Result<(PredictionsHeader, Vec<T>)> {
    let file = BufReader::new(File::open(path)?);
    let mut lines = file.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::data("empty predictions file"))??;
    let header: PredictionsHeader = serde_json::from_str(&header_line)
        .map_err(|e| Error::data(format!("malformed predictions header: {e}")))?;
    let mut records = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::data(format!("malformed predictions line: {e}")))?,
        );
    }
    Ok((header, records))
}

/// Confusion counts over a fixed class list; `counts[truth][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl Confusion {
    pub fn new(classes: Vec<String>) -> Self {
        let n = classes.len();
        Confusion {
            classes,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.correct() as f64 / total as f64
        }
    }

    /// Per-class recall; `None` for classes with no true examples.
    pub fn per_class_accuracy(&self) -> Vec<Option<f64>> {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let total: u64 = row.iter().sum();
                if total == 0 {
                    None
                } else {
                    Some(row[i] as f64 / total as f64)
                }
            })
            .collect()
    }
}

/// Write a confusion matrix CSV: a provenance comment, a header row of
/// predicted classes, then one row per true class.
pub fn write_confusion_csv(path: &Path, confusion: &Confusion, config_hash: &str) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    writeln!(file, "# config_hash={config_hash}")?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["truth\\predicted".to_string()];
    header.extend(confusion.classes.iter().cloned());
    w.write_record(&header).map_err(|e| Error::data(e.to_string()))?;
    for (i, class) in confusion.classes.iter().enumerate() {
        let mut rec = vec![class.clone()];
        rec.extend(confusion.counts[i].iter().map(|c| c.to_string()));
        w.write_record(&rec).map_err(|e| Error::data(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
