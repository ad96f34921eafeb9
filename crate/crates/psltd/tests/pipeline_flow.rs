//! End-to-end flows through the library commands on synthetic corpora:
//! pooling arithmetic against ground truth, byte-stable artifacts,
//! configuration guards, skip budgets, cache reuse, evaluation reports,
//! and orientation diagnostics.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use psltd::config::{GridSpec, NpPolicy, RunConfig};
use psltd::descriptor::PSLTD_LEN;
use psltd::error::Error;
use psltd::formats::{
    read_component_cache, read_feature_file, sidecar_path, write_component_cache,
};
use psltd::manifest::{read_manifest, write_manifest};
use psltd::pipeline::{
    cmd_diag, cmd_eval, cmd_extract, cmd_predict, cmd_train, SplitSpec,
};
use psltd::synth::{default_profiles, generate_corpus, CorpusSpec, GeneratedCorpus, GlyphStyle};
use tempfile::TempDir;

const GLYPHS_PER_PAGE: usize = 60;

/// A narrow hyperparameter window (still containing a known-good cell) so
/// flow tests don't pay for the full default grid search.
fn quick_grid() -> GridSpec {
    GridSpec {
        log2_c_min: -5,
        log2_c_max: -3,
        log2_gamma_min: -15,
        log2_gamma_max: -13,
        folds: 2,
    }
}

fn quick_config(np: u32) -> RunConfig {
    RunConfig {
        np: NpPolicy::Fixed(np),
        grid: quick_grid(),
        ..RunConfig::default()
    }
}

fn make_corpus(dir: &Path, printers: usize, pages_per_printer: usize, seed: u64) -> GeneratedCorpus {
    let profiles = default_profiles().into_iter().take(printers).collect();
    let spec = CorpusSpec::new(profiles, pages_per_printer, GLYPHS_PER_PAGE, GlyphStyle::Blocky, seed);
    generate_corpus(&spec, dir).expect("corpus generation succeeds")
}

fn read_pair(bin: &Path) -> (Vec<u8>, Vec<u8>) {
    (
        fs::read(bin).expect("feature binary exists"),
        fs::read(sidecar_path(bin)).expect("sidecar exists"),
    )
}

#[test]
fn row_counts_follow_component_arithmetic() {
    let dir = TempDir::new().unwrap();
    let corpus = make_corpus(&dir.path().join("corpus"), 2, 3, 11);
    for truth in &corpus.truths {
        assert_eq!(truth.glyph_boxes.len(), GLYPHS_PER_PAGE, "every page renders all glyphs");
    }

    // 60 letters in groups of 7: ceil(60/7) = 9 rows per page.
    let grouped = dir.path().join("grouped.bin");
    let report = cmd_extract(&corpus.manifest_path, &quick_config(7), &grouped).unwrap();
    assert_eq!(report.pages, 6);
    assert_eq!(report.skipped, 0);
    assert_eq!(report.np, 7);
    assert_eq!(report.rows, 6 * 9);
    assert_eq!(report.dim, PSLTD_LEN);

    // Sidecar metadata: ordinals restart per page, labels follow the manifest.
    let set = read_feature_file(&grouped, &sidecar_path(&grouped)).unwrap();
    assert_eq!(set.rows.len(), report.rows);
    assert_eq!(set.info.np, 7);
    let mut ordinals: HashMap<&str, Vec<u32>> = HashMap::new();
    for meta in &set.meta {
        ordinals.entry(&meta.page_id).or_default().push(meta.ordinal);
    }
    assert_eq!(ordinals.len(), 6);
    for page_ordinals in ordinals.values() {
        assert_eq!(*page_ordinals, (0..9).collect::<Vec<u32>>());
    }
    let truth_labels: HashMap<&str, &str> = corpus
        .entries
        .iter()
        .map(|e| (e.page_id.as_str(), e.printer_id.as_str()))
        .collect();
    for meta in &set.meta {
        assert_eq!(meta.label, truth_labels[meta.page_id.as_str()]);
    }

    // Group size 0 means whole-page pooling: exactly one row per page.
    let whole = dir.path().join("whole.bin");
    let report = cmd_extract(&corpus.manifest_path, &quick_config(0), &whole).unwrap();
    assert_eq!(report.rows, 6);
    assert_eq!(report.np, 0);
}

#[test]
fn artifacts_are_byte_stable_across_reruns() {
    let dir = TempDir::new().unwrap();
    let corpus = make_corpus(&dir.path().join("corpus"), 2, 2, 22);
    let config = quick_config(20);

    let features_a = dir.path().join("a.bin");
    let features_b = dir.path().join("b.bin");
    cmd_extract(&corpus.manifest_path, &config, &features_a).unwrap();
    cmd_extract(&corpus.manifest_path, &config, &features_b).unwrap();
    assert_eq!(read_pair(&features_a), read_pair(&features_b), "extraction is deterministic");

    let model_a = dir.path().join("a.model");
    let model_b = dir.path().join("b.model");
    cmd_train(&features_a, &config, &model_a).unwrap();
    cmd_train(&features_a, &config, &model_b).unwrap();
    assert_eq!(
        fs::read(&model_a).unwrap(),
        fs::read(&model_b).unwrap(),
        "training is deterministic"
    );

    let out_a = dir.path().join("pred-a");
    let out_b = dir.path().join("pred-b");
    let report = cmd_predict(&model_a, &corpus.manifest_path, &config, &out_a).unwrap();
    cmd_predict(&model_a, &corpus.manifest_path, &config, &out_b).unwrap();
    for name in ["groups.jsonl", "pages.jsonl", "confusion.csv"] {
        assert_eq!(
            fs::read(out_a.join(name)).unwrap(),
            fs::read(out_b.join(name)).unwrap(),
            "{name} is deterministic"
        );
    }
    // Scoring the training pages themselves should be easy.
    assert_eq!(report.page_accuracy, Some(1.0));
    assert_eq!(report.pages.len(), 4);
    assert_eq!(report.groups.len(), 4 * 3, "60 letters in groups of 20 is 3 per page");
}

#[test]
fn prediction_refuses_mismatched_feature_configuration() {
    let dir = TempDir::new().unwrap();
    let corpus = make_corpus(&dir.path().join("corpus"), 2, 2, 33);
    let config = quick_config(20);

    let features = dir.path().join("features.bin");
    let model = dir.path().join("printers.model");
    cmd_extract(&corpus.manifest_path, &config, &features).unwrap();
    cmd_train(&features, &config, &model).unwrap();

    let mut other = quick_config(20);
    other.descriptor.t0 = 25.0;

    let err = cmd_train(&features, &other, &dir.path().join("other.model")).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "got {err}");
    assert_eq!(err.exit_code(), 2);

    let err = cmd_predict(&model, &corpus.manifest_path, &other, &dir.path().join("out")).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "got {err}");
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("configuration"), "got {err}");
}

#[test]
fn unlabeled_manifest_predicts_without_scoring() {
    let dir = TempDir::new().unwrap();
    let corpus = make_corpus(&dir.path().join("corpus"), 2, 2, 44);
    let config = quick_config(20);

    let features = dir.path().join("features.bin");
    let model = dir.path().join("printers.model");
    cmd_extract(&corpus.manifest_path, &config, &features).unwrap();
    cmd_train(&features, &config, &model).unwrap();

    let mut entries = read_manifest(&corpus.manifest_path).unwrap();
    for entry in &mut entries {
        entry.printer_id = String::new();
    }
    let unlabeled = dir.path().join("unlabeled.csv");
    write_manifest(&unlabeled, &entries, dir.path()).unwrap();

    let out = dir.path().join("out");
    let report = cmd_predict(&model, &unlabeled, &config, &out).unwrap();
    assert!(report.confusion.is_none());
    assert!(report.page_accuracy.is_none());
    assert_eq!(report.pages.len(), 4);
    assert!(report.pages.iter().all(|p| p.truth.is_none()));
    assert!(report.pages.iter().all(|p| !p.predicted.is_empty()));
    assert!(out.join("groups.jsonl").exists());
    assert!(out.join("pages.jsonl").exists());
    assert!(!out.join("confusion.csv").exists(), "no labels, no confusion matrix");
}

#[test]
fn training_needs_at_least_two_printers() {
    let dir = TempDir::new().unwrap();
    let corpus = make_corpus(&dir.path().join("corpus"), 1, 2, 55);
    let config = quick_config(20);

    let features = dir.path().join("features.bin");
    cmd_extract(&corpus.manifest_path, &config, &features).unwrap();
    let err = cmd_train(&features, &config, &dir.path().join("m.model")).unwrap_err();
    assert!(matches!(err, Error::Training(_)), "got {err}");
    assert_eq!(err.exit_code(), 4);
    assert!(err.to_string().contains("two classes"), "got {err}");
}

#[test]
fn skip_budget_tolerates_one_bad_page_and_rejects_two() {
    let dir = TempDir::new().unwrap();
    let corpus = make_corpus(&dir.path().join("corpus"), 3, 3, 66);
    let config = quick_config(0);

    // 9 readable pages plus 1 missing file: 10% skipped, within the budget.
    let mut entries = corpus.entries.clone();
    let mut bad = entries[0].clone();
    bad.path = dir.path().join("missing-1.png");
    bad.page_id = "bad-1".into();
    entries.push(bad.clone());
    let manifest_one_bad = dir.path().join("one-bad.csv");
    write_manifest(&manifest_one_bad, &entries, dir.path()).unwrap();

    let features = dir.path().join("features.bin");
    let report = cmd_extract(&manifest_one_bad, &config, &features).unwrap();
    assert_eq!(report.pages, 9);
    assert_eq!(report.skipped, 1);
    assert_eq!(report.rows, 9, "whole-page pooling, skipped page contributes nothing");

    // A second missing file pushes the skip fraction above the budget.
    bad.path = dir.path().join("missing-2.png");
    bad.page_id = "bad-2".into();
    entries.push(bad);
    let manifest_two_bad = dir.path().join("two-bad.csv");
    write_manifest(&manifest_two_bad, &entries, dir.path()).unwrap();

    let err = cmd_extract(&manifest_two_bad, &config, &features).unwrap_err();
    assert!(matches!(err, Error::Data(_)), "got {err}");
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("skipped"), "got {err}");
}

#[test]
fn cache_entries_are_reused_on_matching_content_and_configuration() {
    let dir = TempDir::new().unwrap();
    let corpus = make_corpus(&dir.path().join("corpus"), 2, 1, 77);
    let cache_dir = dir.path().join("cache");
    let config = RunConfig {
        cache_dir: Some(cache_dir.clone()),
        ..quick_config(0)
    };

    let first = dir.path().join("first.bin");
    cmd_extract(&corpus.manifest_path, &config, &first).unwrap();
    let cache_bins: Vec<_> = fs::read_dir(&cache_dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "bin"))
        .collect();
    assert_eq!(cache_bins.len(), 2, "one cache entry per page");

    // A second run over unchanged inputs reproduces the output exactly.
    // A cache hit reproduces the cold-run output bit for bit.
    let second = dir.path().join("second.bin");
    cmd_extract(&corpus.manifest_path, &config, &second).unwrap();
    assert_eq!(read_pair(&first), read_pair(&second));

    // Doubling the cached letter descriptors doubles the pooled output:
    // proof the values came from the cache, not from recomputation.
    let hash = config.feature_config_hash();
    for bin in &cache_bins {
        let rows = read_component_cache(bin, &hash).unwrap();
        let doubled: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().map(|v| v * 2.0).collect())
            .collect();
        write_component_cache(bin, &doubled, &hash).unwrap();
    }
    let tampered = dir.path().join("tampered.bin");
    cmd_extract(&corpus.manifest_path, &config, &tampered).unwrap();
    let clean = read_feature_file(&first, &sidecar_path(&first)).unwrap();
    let cached = read_feature_file(&tampered, &sidecar_path(&tampered)).unwrap();
    for (a, b) in clean.rows.iter().zip(&cached.rows) {
        for (x, y) in a.iter().zip(b) {
            assert_eq!(*y, x * 2.0);
        }
    }
}

#[test]
fn kfold_evaluation_writes_reports() {
    let dir = TempDir::new().unwrap();
    let corpus = make_corpus(&dir.path().join("corpus"), 2, 4, 88);
    let config = quick_config(20);

    let out = dir.path().join("eval");
    let spec = SplitSpec::KFold { k: 2, repeats: 1 };
    let report = cmd_eval(&corpus.manifest_path, &config, &spec, &out).unwrap();

    assert_eq!(report.classes, vec!["printer-a".to_string(), "printer-b".to_string()]);
    assert_eq!(report.splits.len(), 2);
    // Each page is tested exactly once per repeat.
    assert_eq!(report.page_total, 8);
    assert!(report.mean_accuracy >= 0.75, "got {}", report.mean_accuracy);
    assert!(report.mean_accuracy <= 1.0);
    assert!(report.wilson_low <= report.wilson_high);
    assert!(report.wilson_low >= 0.0 && report.wilson_high <= 1.0);
    assert_eq!(report.per_class_accuracy.len(), 2);
    assert!(out.join("report.json").exists());
    assert!(out.join("confusion.csv").exists());
}

#[test]
fn cross_font_evaluation_requires_pages_of_both_tags() {
    let dir = TempDir::new().unwrap();
    let corpus = make_corpus(&dir.path().join("corpus"), 2, 2, 99);
    let config = quick_config(0);

    let spec = SplitSpec::CrossFont {
        train_tag: "blocky".into(),
        test_tag: "rounded".into(),
    };
    let err = cmd_eval(&corpus.manifest_path, &config, &spec, &dir.path().join("eval")).unwrap_err();
    assert!(matches!(err, Error::Data(_)), "got {err}");
    assert!(err.to_string().contains("rounded"), "got {err}");
}

#[test]
fn diagnostics_report_orientation_rates_per_printer() {
    let dir = TempDir::new().unwrap();
    let corpus = make_corpus(&dir.path().join("corpus"), 2, 1, 111);
    let config = quick_config(0);

    let out_csv = dir.path().join("diag.csv");
    let report = cmd_diag(&corpus.manifest_path, &config, &out_csv).unwrap();
    assert_eq!(report.rows.len(), 2);
    let ids: Vec<&str> = report.rows.iter().map(|r| r.printer_id.as_str()).collect();
    assert_eq!(ids, ["printer-a", "printer-b"]);
    for row in &report.rows {
        assert!(row.interior_ink_pixels > 0);
        for count in [row.horizontal, row.vertical, row.diagonal_45, row.diagonal_135] {
            assert!(count <= row.interior_ink_pixels, "orientations are counted on interior ink pixels");
        }
        assert!(
            row.horizontal + row.vertical + row.diagonal_45 + row.diagonal_135 > 0,
            "printed letters show some edge orientation"
        );
    }
    let csv = fs::read_to_string(&out_csv).unwrap();
    assert!(csv.starts_with("# config_hash="), "CSV records its provenance");
    assert_eq!(
        csv.lines().count(),
        1 + 1 + 2,
        "provenance comment, header, one row per printer"
    );
}
