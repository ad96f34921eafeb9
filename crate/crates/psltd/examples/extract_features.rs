//! Turn a manifest of scanned pages into pooled feature rows on disk: one
//! binary file of 32-bit float rows plus a CSV sidecar mapping each row to
//! its page and group. Letters are grouped in twenties here; group size 0
//! would pool each whole page into a single row.
//!
//! Run with: `cargo run --example extract_features`

use psltd::config::{NpPolicy, RunConfig};
use psltd::features::PruneMask;
use psltd::formats::{read_feature_file, sidecar_path};
use psltd::pipeline::cmd_extract;
use psltd::synth::{default_profiles, generate_corpus, CorpusSpec, GlyphStyle};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;

    // A small corpus to featurize: 4 printers x 3 pages x 60 letters.
    let spec = CorpusSpec::new(default_profiles(), 3, 60, GlyphStyle::Blocky, 11);
    let corpus = generate_corpus(&spec, &dir.path().join("corpus"))?;
    println!("generated {} pages", corpus.entries.len());

    let config = RunConfig {
        np: NpPolicy::Fixed(20),
        ..RunConfig::default()
    };
    let features = dir.path().join("features.bin");
    let report = cmd_extract(&corpus.manifest_path, &config, &features)?;
    println!(
        "extracted {} rows of dimension {} from {} pages ({} skipped), group size {}",
        report.rows, report.dim, report.pages, report.skipped, report.np
    );
    println!("feature-config hash: {}", report.config_hash);

    // Read the artifacts back.
    let set = read_feature_file(&features, &sidecar_path(&features))?;
    println!(
        "\nfile holds {} rows; first three row owners:",
        set.rows.len()
    );
    for meta in set.meta.iter().take(3) {
        println!(
            "  page {} group {} label {}",
            meta.page_id, meta.ordinal, meta.label
        );
    }

    // Descriptor rows are sparse; a prune mask drops dimensions that are
    // dead across the whole training set.
    let first = &set.rows[0];
    let nonzero = first.iter().filter(|&&v| v != 0.0).count();
    println!(
        "\nfirst row: {} of {} values nonzero ({:.1}%)",
        nonzero,
        first.len(),
        100.0 * nonzero as f64 / first.len() as f64
    );
    let prune = PruneMask::fit(&set.rows)?;
    println!(
        "prune mask fit on all rows keeps {} of {} dimensions",
        prune.kept_dim(),
        prune.source_dim
    );
    Ok(())
}
