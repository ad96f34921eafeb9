//! End-to-end commands over page manifests: descriptor extraction, model
//! training, prediction with page-level voting, split-based evaluation, and
//! linear-structure diagnostics.
//!
//! Every produced artifact embeds the feature-configuration hash, and every
//! consumer checks it: a model trained under one configuration refuses
//! features or pages processed under another.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{NpPolicy, RunConfig};
use crate::descriptor::{compute_psltd, intensity_orientation, PSLTD_LEN};
use crate::error::{Error, Result};
use crate::features::{poep_pool, PruneMask};
use crate::formats::{
    read_component_cache, read_feature_file, sidecar_path, write_component_cache,
    write_confusion_csv, write_feature_file, write_jsonl, Confusion, FeatureMeta,
    GroupPrediction, PagePrediction, PredictionsHeader, SidecarInfo,
};
use crate::gabor::GaborBank;
use crate::imaging::{binarize, extract_components, filter_components, load_gray_image, GrayImage};
use crate::manifest::{fully_labeled, read_manifest, ManifestEntry};
use crate::svm::{assign_folds, page_vote, train_ovo, SvmModel, TrainOutcome};

/// Per-component descriptors of one successfully processed page.
#[derive(Debug, Clone)]
pub struct PageDescriptors {
    pub entry: ManifestEntry,
    /// One full-width descriptor per kept component, in component order.
    pub components: Vec<Vec<f64>>,
}

/// Page bookkeeping from one extraction run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExtractStats {
    pub total_pages: usize,
    pub processed_pages: usize,
    pub skipped_pages: usize,
}

fn stable_mix(seed: u64, salt: u64) -> u64 {
    // splitmix64 step so per-repeat fold seeds are decorrelated.
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn cache_path(dir: &Path, image_hash: &str, config_hash: &str) -> PathBuf {
    dir.join(format!("{image_hash}-{config_hash}.bin"))
}

fn read_cached_components(path: &Path, config_hash: &str) -> Option<Vec<Vec<f64>>> {
    if !path.exists() {
        return None;
    }
    match read_component_cache(path, config_hash) {
        Ok(rows) if rows.iter().all(|r| r.len() == PSLTD_LEN) => Some(rows),
        Ok(_) => {
            warn!("cache entry {} has a stale layout; recomputing", path.display());
            None
        }
        Err(e) => {
            warn!("cache entry {} is unreadable ({e}); recomputing", path.display());
            None
        }
    }
}

fn store_cached_components(dir: &Path, path: &Path, rows: &[Vec<f64>], config_hash: &str) {
    // Write to a unique temp name, then rename: concurrent writers of the
    // same key land whole files either way.
    let tmp = dir.join(format!(
        ".tmp-{}-{}",
        std::process::id(),
        path.file_name().unwrap_or_default().to_string_lossy()
    ));
    let stored = write_component_cache(&tmp, rows, config_hash)
        .and_then(|()| std::fs::rename(&tmp, path).map_err(Error::from));
    if let Err(e) = stored {
        warn!("could not store cache entry {}: {e}", path.display());
        let _ = std::fs::remove_file(&tmp);
    }
}

/// Load one page and compute a descriptor per kept component.
fn process_page(
    entry: &ManifestEntry,
    config: &RunConfig,
    bank: &GaborBank,
    config_hash: &str,
) -> Result<Vec<Vec<f64>>> {
    let bytes = std::fs::read(&entry.path)
        .map_err(|e| Error::data(format!("cannot read {}: {e}", entry.path.display())))?;

    let cache = config.cache_dir.as_ref().map(|dir| {
        let mut image_hash = String::with_capacity(64);
        for byte in Sha256::digest(&bytes) {
            use std::fmt::Write;
            write!(image_hash, "{byte:02x}").expect("writing to String cannot fail");
        }
        (dir.clone(), cache_path(dir, &image_hash, config_hash))
    });
    if let Some((_, path)) = &cache {
        if let Some(rows) = read_cached_components(path, config_hash) {
            return Ok(rows);
        }
    }

    let page = load_gray_image(&entry.path, config.extract.luma)?;
    if page.bit_depth() != config.bit_depth {
        return Err(Error::data(format!(
            "{} is {}-bit but the configuration expects {}-bit",
            entry.path.display(),
            page.bit_depth().bits(),
            config.bit_depth.bits()
        )));
    }
    let mask = binarize(&page);
    let components = filter_components(extract_components(&page, &mask), &config.filter);
    let rows = components
        .iter()
        .map(|comp| Ok(compute_psltd(&comp.crop, bank, &config.descriptor)?.into_values()))
        .collect::<Result<Vec<Vec<f64>>>>()?;

    if let Some((dir, path)) = &cache {
        if std::fs::create_dir_all(dir).is_ok() {
            store_cached_components(dir, path, &rows, config_hash);
        }
    }
    Ok(rows)
}

/// Compute per-component descriptors for every page of a manifest, in
/// manifest order. Pages that cannot be read or processed are skipped with a
/// logged warning; the run fails when more than
/// `config.extract.max_skip_fraction` of the pages are skipped.
pub fn extract_page_descriptors(
    entries: &[ManifestEntry],
    config: &RunConfig,
) -> Result<(Vec<PageDescriptors>, ExtractStats)> {
    if entries.is_empty() {
        return Err(Error::data("no pages in manifest"));
    }
    let bank = GaborBank::build(&config.gabor)?;
    let config_hash = config.feature_config_hash();

    let results: Vec<Option<PageDescriptors>> = entries
        .par_iter()
        .map(|entry| match process_page(entry, config, &bank, &config_hash) {
            Ok(components) => {
                if components.is_empty() {
                    warn!(
                        "page {} produced no usable components",
                        entry.page_id
                    );
                }
                Some(PageDescriptors {
                    entry: entry.clone(),
                    components,
                })
            }
            Err(e) => {
                warn!("skipping page {}: {e}", entry.page_id);
                None
            }
        })
        .collect();

    let total = entries.len();
    let pages: Vec<PageDescriptors> = results.into_iter().flatten().collect();
    let skipped = total - pages.len();
    let stats = ExtractStats {
        total_pages: total,
        processed_pages: pages.len(),
        skipped_pages: skipped,
    };
    if skipped as f64 > config.extract.max_skip_fraction * total as f64 {
        return Err(Error::data(format!(
            "{skipped} of {total} pages were skipped, above the permitted fraction {}",
            config.extract.max_skip_fraction
        )));
    }
    Ok((pages, stats))
}

/// Pool each page's component descriptors into groups of `np` (0 = whole
/// page) and flatten to rows with sidecar metadata.
pub fn pool_pages(pages: &[PageDescriptors], np: u32) -> (Vec<Vec<f64>>, Vec<FeatureMeta>) {
    let mut rows = Vec::new();
    let mut meta = Vec::new();
    for page in pages {
        for (ordinal, group) in poep_pool(&page.components, np as usize).into_iter().enumerate() {
            rows.push(group);
            meta.push(FeatureMeta {
                page_id: page.entry.page_id.clone(),
                ordinal: ordinal as u32,
                label: page.entry.printer_id.clone(),
            });
        }
    }
    (rows, meta)
}

fn min_pages_per_printer(pages: &[PageDescriptors]) -> usize {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for page in pages {
        if !page.entry.printer_id.is_empty() {
            *counts.entry(page.entry.printer_id.as_str()).or_insert(0) += 1;
        }
    }
    counts.values().copied().min().unwrap_or(0)
}

/// Resolve the pooling policy against the labeled page counts at hand.
pub fn resolve_np(policy: NpPolicy, pages: &[PageDescriptors]) -> u32 {
    policy.resolve(min_pages_per_printer(pages))
}

/// Summary of one extraction command.
#[derive(Debug, Clone, Serialize)]
pub struct ExtractReport {
    pub pages: usize,
    pub skipped: usize,
    pub rows: usize,
    pub dim: usize,
    pub np: u32,
    pub config_hash: String,
}

/// Extract pooled descriptor rows for a manifest and write the feature file
/// (plus its sidecar CSV next to it).
pub fn cmd_extract(
    manifest_path: &Path,
    config: &RunConfig,
    out_bin: &Path,
) -> Result<ExtractReport> {
    let entries = read_manifest(manifest_path)?;
    let (pages, stats) = extract_page_descriptors(&entries, config)?;
    let np = resolve_np(config.np, &pages);
    let (rows, meta) = pool_pages(&pages, np);
    let info = SidecarInfo {
        config_hash: config.feature_config_hash(),
        np,
        bit_depth: config.bit_depth.bits(),
    };
    write_feature_file(out_bin, &sidecar_path(out_bin), &rows, &meta, &info)?;
    info!(
        "extracted {} rows from {} pages ({} skipped) into {}",
        rows.len(),
        stats.processed_pages,
        stats.skipped_pages,
        out_bin.display()
    );
    Ok(ExtractReport {
        pages: stats.processed_pages,
        skipped: stats.skipped_pages,
        rows: rows.len(),
        dim: rows.first().map_or(0, |r| r.len()),
        np,
        config_hash: info.config_hash,
    })
}

fn classes_and_labels(meta: &[FeatureMeta]) -> Result<(Vec<String>, Vec<usize>)> {
    if meta.iter().any(|m| m.label.is_empty()) {
        return Err(Error::data(
            "feature file contains unlabeled rows; training needs printer labels",
        ));
    }
    let classes: Vec<String> = meta
        .iter()
        .map(|m| m.label.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let labels = meta
        .iter()
        .map(|m| classes.binary_search(&m.label).expect("label in class list"))
        .collect();
    Ok((classes, labels))
}

/// Train a one-vs-one model from a feature file and write it (and the prune
/// mask as a separate JSON) to disk. The cross-validation table is logged.
pub fn cmd_train(
    features_bin: &Path,
    config: &RunConfig,
    out_model: &Path,
) -> Result<TrainOutcome> {
    let set = read_feature_file(features_bin, &sidecar_path(features_bin))?;
    let expected = config.feature_config_hash();
    if set.info.config_hash != expected {
        return Err(Error::config(format!(
            "feature file was extracted under configuration {} but the current configuration is {expected}",
            set.info.config_hash
        )));
    }
    let (classes, labels) = classes_and_labels(&set.meta)?;
    let prune = PruneMask::fit(&set.rows)?;
    info!(
        "pruning keeps {} of {} dimensions",
        prune.kept_dim(),
        prune.source_dim
    );
    let pruned_rows = prune.apply_all(&set.rows)?;
    let outcome = train_ovo(
        &pruned_rows,
        &labels,
        &classes,
        &config.grid,
        config.seed,
        prune,
        set.info.np,
        set.info.config_hash.clone(),
    )?;

    for cell in &outcome.cv_table {
        info!(
            "cv log2(C)={:+3} log2(gamma)={:+3} accuracy={:.4}",
            cell.log2_c, cell.log2_gamma, cell.mean_accuracy
        );
    }
    info!(
        "best C=2^{} gamma=2^{} with cv accuracy {:.4}",
        outcome.best.log2_c, outcome.best.log2_gamma, outcome.best.mean_accuracy
    );

    crate::formats::write_model(out_model, &outcome.model)?;
    let prune_path = out_model.with_extension("prune.json");
    let mut f = std::fs::File::create(&prune_path)?;
    let pretty = serde_json::to_string_pretty(&outcome.model.prune)
        .map_err(|e| Error::data(e.to_string()))?;
    f.write_all(pretty.as_bytes())?;
    writeln!(f)?;
    Ok(outcome)
}

/// Everything produced by one prediction run.
#[derive(Debug, Clone)]
pub struct PredictReport {
    pub groups: Vec<GroupPrediction>,
    pub pages: Vec<PagePrediction>,
    /// Present when the manifest carried labels for every page.
    pub confusion: Option<Confusion>,
    pub page_accuracy: Option<f64>,
}

fn predict_pages(
    model: &SvmModel,
    pages: &[PageDescriptors],
) -> Result<(Vec<GroupPrediction>, Vec<PagePrediction>)> {
    let (rows, meta) = pool_pages(pages, model.np);
    let predicted: Vec<String> = rows
        .par_iter()
        .map(|row| {
            let pruned = model.prune.apply(row)?;
            Ok(model.predict(&pruned)?.to_string())
        })
        .collect::<Result<_>>()?;
    let groups: Vec<GroupPrediction> = meta
        .iter()
        .zip(&predicted)
        .map(|(m, label)| GroupPrediction {
            page_id: m.page_id.clone(),
            ordinal: m.ordinal,
            predicted: label.clone(),
        })
        .collect();

    let mut page_predictions = Vec::new();
    let mut cursor = 0usize;
    for page in pages {
        let count = groups[cursor..]
            .iter()
            .take_while(|g| g.page_id == page.entry.page_id)
            .count();
        let labels: Vec<String> = groups[cursor..cursor + count]
            .iter()
            .map(|g| g.predicted.clone())
            .collect();
        cursor += count;
        if labels.is_empty() {
            warn!(
                "page {} has no pooled groups; no page-level label",
                page.entry.page_id
            );
            continue;
        }
        page_predictions.push(PagePrediction {
            page_id: page.entry.page_id.clone(),
            predicted: page_vote(&labels)?,
            group_count: count,
            truth: (!page.entry.printer_id.is_empty())
                .then(|| page.entry.printer_id.clone()),
        });
    }
    Ok((groups, page_predictions))
}

fn confusion_from_pages(
    model_classes: &[String],
    pages: &[PagePrediction],
) -> Confusion {
    let mut classes: Vec<String> = model_classes.to_vec();
    let mut extra: BTreeSet<String> = BTreeSet::new();
    for p in pages {
        if let Some(t) = &p.truth {
            if !classes.contains(t) {
                extra.insert(t.clone());
            }
        }
    }
    classes.extend(extra);
    let mut confusion = Confusion::new(classes);
    for p in pages {
        if let Some(t) = &p.truth {
            let ti = confusion.classes.iter().position(|c| c == t).unwrap();
            let pi = confusion
                .classes
                .iter()
                .position(|c| c == &p.predicted)
                .unwrap();
            confusion.record(ti, pi);
        }
    }
    confusion
}

/// Predict printer labels for every page of a manifest using a stored model.
/// Writes `groups.jsonl`, `pages.jsonl`, and (when the manifest is fully
/// labeled) `confusion.csv` into `out_dir`.
pub fn cmd_predict(
    model_path: &Path,
    manifest_path: &Path,
    config: &RunConfig,
    out_dir: &Path,
) -> Result<PredictReport> {
    let model = crate::formats::read_model(model_path)?;
    let expected = config.feature_config_hash();
    if model.feature_config_hash != expected {
        return Err(Error::config(format!(
            "model was trained under feature configuration {} but the current configuration is {expected}; refusing to predict",
            model.feature_config_hash
        )));
    }
    let entries = read_manifest(manifest_path)?;
    let (pages, _) = extract_page_descriptors(&entries, config)?;
    let (groups, page_predictions) = predict_pages(&model, &pages)?;

    std::fs::create_dir_all(out_dir)?;
    let header = PredictionsHeader {
        config_hash: expected.clone(),
        np: model.np,
    };
    write_jsonl(&out_dir.join("groups.jsonl"), &header, &groups)?;
    write_jsonl(&out_dir.join("pages.jsonl"), &header, &page_predictions)?;

    let labeled = fully_labeled(&entries);
    let confusion = labeled.then(|| confusion_from_pages(&model.classes, &page_predictions));
    let page_accuracy = confusion.as_ref().map(Confusion::accuracy);
    if let Some(c) = &confusion {
        write_confusion_csv(&out_dir.join("confusion.csv"), c, &expected)?;
        info!("page accuracy {:.4} over {} pages", c.accuracy(), c.total());
    }
    Ok(PredictReport {
        groups,
        pages: page_predictions,
        confusion,
        page_accuracy,
    })
}

/// How evaluation partitions a labeled manifest into train and test pages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitSpec {
    /// Stratified k-fold over pages, repeated with reseeded shuffles.
    KFold { k: u32, repeats: u32 },
    /// k-fold restricted to pages of one font tag.
    SameFont { tag: String, k: u32, repeats: u32 },
    /// Train on every page of one font tag, test on another.
    CrossFont { train_tag: String, test_tag: String },
}

impl std::fmt::Display for SplitSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SplitSpec::KFold { k, repeats } => write!(f, "{repeats}x{k}-fold"),
            SplitSpec::SameFont { tag, k, repeats } => {
                write!(f, "{repeats}x{k}-fold on font {tag:?}")
            }
            SplitSpec::CrossFont {
                train_tag,
                test_tag,
            } => write!(f, "train font {train_tag:?}, test font {test_tag:?}"),
        }
    }
}

struct Split {
    name: String,
    train: Vec<usize>,
    test: Vec<usize>,
}

fn kfold_splits(
    pages: &[PageDescriptors],
    subset: &[usize],
    classes: &[String],
    k: u32,
    repeats: u32,
    seed: u64,
    name_prefix: &str,
) -> Result<Vec<Split>> {
    if k < 2 {
        return Err(Error::config("k-fold evaluation needs k >= 2"));
    }
    if repeats == 0 {
        return Err(Error::config("k-fold evaluation needs at least one repeat"));
    }
    let labels: Vec<usize> = subset
        .iter()
        .map(|&i| {
            classes
                .binary_search(&pages[i].entry.printer_id)
                .expect("label in class list")
        })
        .collect();
    let mut splits = Vec::new();
    for rep in 0..repeats {
        let fold_of = assign_folds(
            &labels,
            classes.len(),
            k as usize,
            stable_mix(seed, rep as u64),
        )?;
        for fold in 0..k as usize {
            let (mut train, mut test) = (Vec::new(), Vec::new());
            for (pos, &page_idx) in subset.iter().enumerate() {
                if fold_of[pos] == fold {
                    test.push(page_idx);
                } else {
                    train.push(page_idx);
                }
            }
            splits.push(Split {
                name: format!("{name_prefix}repeat{rep}-fold{fold}"),
                train,
                test,
            });
        }
    }
    Ok(splits)
}

fn build_splits(
    pages: &[PageDescriptors],
    classes: &[String],
    spec: &SplitSpec,
    seed: u64,
) -> Result<Vec<Split>> {
    let all: Vec<usize> = (0..pages.len()).collect();
    match spec {
        SplitSpec::KFold { k, repeats } => {
            kfold_splits(pages, &all, classes, *k, *repeats, seed, "")
        }
        SplitSpec::SameFont { tag, k, repeats } => {
            let subset: Vec<usize> = all
                .into_iter()
                .filter(|&i| pages[i].entry.font_tag == *tag)
                .collect();
            if subset.is_empty() {
                return Err(Error::data(format!("no pages carry font tag {tag:?}")));
            }
            kfold_splits(
                pages,
                &subset,
                classes,
                *k,
                *repeats,
                seed,
                &format!("font-{tag}-"),
            )
        }
        SplitSpec::CrossFont {
            train_tag,
            test_tag,
        } => {
            let train: Vec<usize> = (0..pages.len())
                .filter(|&i| pages[i].entry.font_tag == *train_tag)
                .collect();
            let test: Vec<usize> = (0..pages.len())
                .filter(|&i| pages[i].entry.font_tag == *test_tag)
                .collect();
            if train.is_empty() {
                return Err(Error::data(format!(
                    "no pages carry train font tag {train_tag:?}"
                )));
            }
            if test.is_empty() {
                return Err(Error::data(format!(
                    "no pages carry test font tag {test_tag:?}"
                )));
            }
            Ok(vec![Split {
                name: format!("train-{train_tag}-test-{test_tag}"),
                train,
                test,
            }])
        }
    }
}

fn validate_split(pages: &[PageDescriptors], classes: &[String], split: &Split) -> Result<()> {
    let train_ids: HashSet<&str> = split
        .train
        .iter()
        .map(|&i| pages[i].entry.page_id.as_str())
        .collect();
    for &i in &split.test {
        if train_ids.contains(pages[i].entry.page_id.as_str()) {
            return Err(Error::data(format!(
                "page {} appears in both the train and test halves of split {}",
                pages[i].entry.page_id, split.name
            )));
        }
    }
    for (side, indices) in [("train", &split.train), ("test", &split.test)] {
        let present: HashSet<&str> = indices
            .iter()
            .map(|&i| pages[i].entry.printer_id.as_str())
            .collect();
        for class in classes {
            if !present.contains(class.as_str()) {
                return Err(Error::data(format!(
                    "split {} leaves class {class} empty on the {side} side",
                    split.name
                )));
            }
        }
    }
    Ok(())
}

/// Two-sided Wilson score interval for a binomial proportion.
pub fn wilson_interval(correct: u64, total: u64, z: f64) -> (f64, f64) {
    if total == 0 {
        return (0.0, 1.0);
    }
    let n = total as f64;
    let p = correct as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// One evaluated split's outcome.
#[derive(Debug, Clone, Serialize)]
pub struct SplitResult {
    pub name: String,
    pub train_pages: usize,
    pub test_pages: usize,
    pub np: u32,
    pub best_log2_c: i32,
    pub best_log2_gamma: i32,
    pub cv_accuracy: f64,
    pub page_accuracy: f64,
}

/// Aggregated evaluation outcome across all splits.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub config_hash: String,
    pub split_spec: String,
    pub classes: Vec<String>,
    pub splits: Vec<SplitResult>,
    pub confusion: Confusion,
    pub per_class_accuracy: Vec<Option<f64>>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub page_correct: u64,
    pub page_total: u64,
    /// 95% Wilson score interval on the pooled page accuracy.
    pub wilson_low: f64,
    pub wilson_high: f64,
}

/// Evaluate the pipeline on a labeled manifest under a split specification.
/// Pages are featurized once; each split trains from scratch on its train
/// half and scores page-level votes on its test half. Writes `report.json`
/// and `confusion.csv` into `out_dir`.
pub fn cmd_eval(
    manifest_path: &Path,
    config: &RunConfig,
    spec: &SplitSpec,
    out_dir: &Path,
) -> Result<EvalReport> {
    let entries = read_manifest(manifest_path)?;
    if !fully_labeled(&entries) {
        return Err(Error::data(
            "evaluation needs a printer label on every manifest page",
        ));
    }
    let (pages, _) = extract_page_descriptors(&entries, config)?;
    let classes: Vec<String> = pages
        .iter()
        .map(|p| p.entry.printer_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let splits = build_splits(&pages, &classes, spec, config.seed)?;
    for split in &splits {
        validate_split(&pages, &classes, split)?;
    }

    let mut confusion = Confusion::new(classes.clone());
    let mut split_results = Vec::new();
    for split in &splits {
        let train_pages: Vec<PageDescriptors> =
            split.train.iter().map(|&i| pages[i].clone()).collect();
        let test_pages: Vec<PageDescriptors> =
            split.test.iter().map(|&i| pages[i].clone()).collect();
        let np = resolve_np(config.np, &train_pages);
        let (train_rows, train_meta) = pool_pages(&train_pages, np);
        let labels: Vec<usize> = train_meta
            .iter()
            .map(|m| classes.binary_search(&m.label).expect("label in class list"))
            .collect();
        let prune = PruneMask::fit(&train_rows)?;
        let pruned_rows = prune.apply_all(&train_rows)?;
        let outcome = train_ovo(
            &pruned_rows,
            &labels,
            &classes,
            &config.grid,
            config.seed,
            prune,
            np,
            config.feature_config_hash(),
        )?;
        let (_, page_predictions) = predict_pages(&outcome.model, &test_pages)?;
        let mut correct = 0usize;
        for p in &page_predictions {
            let truth = p.truth.as_deref().expect("labeled manifest");
            let ti = classes.iter().position(|c| c == truth).unwrap();
            let pi = classes
                .iter()
                .position(|c| c == &p.predicted)
                .expect("model predicts known classes");
            confusion.record(ti, pi);
            if ti == pi {
                correct += 1;
            }
        }
        let accuracy = if page_predictions.is_empty() {
            0.0
        } else {
            correct as f64 / page_predictions.len() as f64
        };
        info!(
            "split {}: {} train pages, {} test pages, page accuracy {:.4}",
            split.name,
            train_pages.len(),
            test_pages.len(),
            accuracy
        );
        split_results.push(SplitResult {
            name: split.name.clone(),
            train_pages: train_pages.len(),
            test_pages: test_pages.len(),
            np,
            best_log2_c: outcome.best.log2_c,
            best_log2_gamma: outcome.best.log2_gamma,
            cv_accuracy: outcome.best.mean_accuracy,
            page_accuracy: accuracy,
        });
    }

    let accs: Vec<f64> = split_results.iter().map(|s| s.page_accuracy).collect();
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let std = (accs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / accs.len() as f64)
        .sqrt();
    let page_correct = confusion.correct();
    let page_total = confusion.total();
    let (wilson_low, wilson_high) = wilson_interval(page_correct, page_total, 1.96);
    let report = EvalReport {
        config_hash: config.feature_config_hash(),
        split_spec: spec.to_string(),
        classes,
        splits: split_results,
        per_class_accuracy: confusion.per_class_accuracy(),
        confusion,
        mean_accuracy: mean,
        std_accuracy: std,
        page_correct,
        page_total,
        wilson_low,
        wilson_high,
    };

    std::fs::create_dir_all(out_dir)?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::data(e.to_string()))?;
    std::fs::write(out_dir.join("report.json"), json + "\n")?;
    write_confusion_csv(
        &out_dir.join("confusion.csv"),
        &report.confusion,
        &report.config_hash,
    )?;
    info!(
        "{}: mean page accuracy {:.4} (std {:.4}), 95% CI [{:.4}, {:.4}]",
        report.split_spec, report.mean_accuracy, report.std_accuracy, report.wilson_low,
        report.wilson_high
    );
    Ok(report)
}

/// Per-printer counts of oriented linear structures in page intensities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiagRow {
    pub printer_id: String,
    pub horizontal: u64,
    pub vertical: u64,
    pub diagonal_45: u64,
    pub diagonal_135: u64,
    pub interior_ink_pixels: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagReport {
    pub config_hash: String,
    pub rows: Vec<DiagRow>,
}

/// Ink mask for diagnostics. Single-level pages cannot be thresholded, so
/// they count as all ink when darker than mid-scale and all background
/// otherwise.
fn diag_ink_mask(page: &GrayImage) -> crate::imaging::BinaryMask {
    let distinct = {
        let mut seen = page.samples().iter();
        match seen.next() {
            None => 0,
            Some(first) => {
                if seen.all(|s| s == first) {
                    1
                } else {
                    2
                }
            }
        }
    };
    if distinct == 1 {
        let level = page.samples()[0];
        let mut mask = crate::imaging::BinaryMask::new(page.width(), page.height());
        if level <= page.max_value() / 2 {
            for y in 0..page.height() {
                for x in 0..page.width() {
                    mask.set(x, y, true);
                }
            }
        }
        return mask;
    }
    binarize(page)
}

/// Count oriented linear structures (horizontal, vertical, 45°, 135°) in the
/// page intensities at every interior ink pixel, aggregated per printer.
/// Writes a CSV to `out_csv`.
pub fn cmd_diag(
    manifest_path: &Path,
    config: &RunConfig,
    out_csv: &Path,
) -> Result<DiagReport> {
    let entries = read_manifest(manifest_path)?;
    if entries.is_empty() {
        return Err(Error::data("no pages in manifest"));
    }
    if !fully_labeled(&entries) {
        return Err(Error::data(
            "diagnostics need a printer label on every manifest page",
        ));
    }

    let per_page: Vec<(String, [u64; 4], u64)> = entries
        .par_iter()
        .map(|entry| {
            let page = load_gray_image(&entry.path, config.extract.luma)?;
            if page.bit_depth() != config.bit_depth {
                return Err(Error::data(format!(
                    "{} is {}-bit but the configuration expects {}-bit",
                    entry.path.display(),
                    page.bit_depth().bits(),
                    config.bit_depth.bits()
                )));
            }
            let mask = diag_ink_mask(&page);
            let mut counts = [0u64; 4];
            let mut ink = 0u64;
            if page.width() >= 3 && page.height() >= 3 {
                for row in 1..page.height() - 1 {
                    for col in 1..page.width() - 1 {
                        if !mask.get(col, row) {
                            continue;
                        }
                        ink += 1;
                        let e = intensity_orientation(&page, row, col, config.descriptor.t0);
                        for (slot, count) in counts.iter_mut().enumerate() {
                            if e.0[slot] != 0 {
                                *count += 1;
                            }
                        }
                    }
                }
            }
            Ok((entry.printer_id.clone(), counts, ink))
        })
        .collect::<Result<_>>()?;

    let mut agg: BTreeMap<String, ([u64; 4], u64)> = BTreeMap::new();
    for (printer, counts, ink) in per_page {
        let slot = agg.entry(printer).or_insert(([0; 4], 0));
        for (total, c) in slot.0.iter_mut().zip(counts) {
            *total += c;
        }
        slot.1 += ink;
    }
    let rows: Vec<DiagRow> = agg
        .into_iter()
        .map(|(printer_id, (c, ink))| DiagRow {
            printer_id,
            horizontal: c[0],
            vertical: c[1],
            diagonal_45: c[2],
            diagonal_135: c[3],
            interior_ink_pixels: ink,
        })
        .collect();

    let config_hash = config.feature_config_hash();
    let mut file = std::io::BufWriter::new(std::fs::File::create(out_csv)?);
    writeln!(file, "# config_hash={config_hash}")?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record([
        "printer_id",
        "horizontal",
        "vertical",
        "diagonal_45",
        "diagonal_135",
        "interior_ink_pixels",
    ])
    .map_err(|e| Error::data(e.to_string()))?;
    for row in &rows {
        w.write_record([
            row.printer_id.as_str(),
            &row.horizontal.to_string(),
            &row.vertical.to_string(),
            &row.diagonal_45.to_string(),
            &row.diagonal_135.to_string(),
            &row.interior_ink_pixels.to_string(),
        ])
        .map_err(|e| Error::data(e.to_string()))?;
    }
    w.flush()?;
    Ok(DiagReport { config_hash, rows })
}
