//! Score the pipeline under different evaluation protocols on one corpus:
//! repeated page-level k-fold, and the harder cross-style protocol where the
//! test pages use a glyph style absent from training.
//!
//! Run with: `cargo run --example evaluate_splits`

use psltd::config::RunConfig;
use psltd::manifest::write_manifest;
use psltd::pipeline::{cmd_eval, SplitSpec};
use psltd::synth::{default_profiles, generate_corpus, CorpusSpec, GlyphStyle};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;

    // One corpus containing both glyph styles, merged into a single manifest.
    let mut entries = Vec::new();
    for (style, seed) in [(GlyphStyle::Blocky, 31), (GlyphStyle::Rounded, 32)] {
        let spec = CorpusSpec::new(default_profiles(), 5, 60, style, seed);
        entries.extend(generate_corpus(&spec, dir.path())?.entries);
    }
    let manifest = dir.path().join("manifest.csv");
    write_manifest(&manifest, &entries, dir.path())?;
    println!("corpus: {} pages across two glyph styles", entries.len());

    let config = RunConfig::default();
    let protocols = [
        SplitSpec::KFold { k: 2, repeats: 2 },
        SplitSpec::CrossFont {
            train_tag: "blocky".into(),
            test_tag: "rounded".into(),
        },
    ];

    for (i, spec) in protocols.into_iter().enumerate() {
        let out = dir.path().join(format!("eval-{i}"));
        let report = cmd_eval(&manifest, &config, &spec, &out)?;
        println!("\nprotocol {spec}:");
        println!(
            "  mean page accuracy {:.4} (std {:.4}) over {} split(s)",
            report.mean_accuracy,
            report.std_accuracy,
            report.splits.len()
        );
        println!(
            "  pooled pages {}/{} correct, 95% CI [{:.4}, {:.4}]",
            report.page_correct, report.page_total, report.wilson_low, report.wilson_high
        );
        for (class, accuracy) in report.classes.iter().zip(&report.per_class_accuracy) {
            match accuracy {
                Some(a) => println!("    {class:<12} {a:.4}"),
                None => println!("    {class:<12} (no test pages)"),
            }
        }
        println!("  full report: {}", out.join("report.json").display());
    }
    Ok(())
}
