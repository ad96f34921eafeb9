//! Generate a small synthetic corpus: four printer personalities, two glyph
//! styles, a handful of pages each. Pages land under a temp directory along
//! with a manifest CSV and per-page ground-truth JSON.
//!
//! Run with: `cargo run --example generate_pages`

use psltd::manifest::write_manifest;
use psltd::synth::{default_profiles, generate_corpus, CorpusSpec, GlyphStyle};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::temp_dir().join("psltd-example-pages");
    if out.exists() {
        std::fs::remove_dir_all(&out)?;
    }

    let profiles = default_profiles();
    println!("printer personalities:");
    println!(
        "  {:<10} {:>6} {:>8} {:>8} {:>8} {:>10} {:>6}",
        "id", "toner", "dot gain", "banding", "period", "raggedness", "base"
    );
    for p in &profiles {
        println!(
            "  {:<10} {:>6.1} {:>8.2} {:>8.1} {:>8.1} {:>10.2} {:>6.1}",
            p.id,
            p.toner_sigma,
            p.dot_gain,
            p.banding_amplitude,
            p.banding_period,
            p.edge_raggedness,
            p.base_darkness
        );
    }

    // One corpus per glyph style, merged into a single manifest.
    let mut all_entries = Vec::new();
    for style in [GlyphStyle::Blocky, GlyphStyle::Rounded] {
        let spec = CorpusSpec::new(profiles.clone(), 2, 60, style, 42);
        let corpus = generate_corpus(&spec, &out)?;
        println!(
            "\n{} style: {} pages, e.g. {}",
            style.as_str(),
            corpus.entries.len(),
            corpus.entries[0].path.display()
        );
        for truth in corpus.truths.iter().take(1) {
            println!(
                "  first page: {}x{} px, {} glyphs, ink fraction {:.3}",
                truth.width,
                truth.height,
                truth.glyph_boxes.len(),
                truth.ink_mask.count() as f64 / (truth.width * truth.height) as f64
            );
        }
        all_entries.extend(corpus.entries);
    }

    let manifest = out.join("manifest.csv");
    write_manifest(&manifest, &all_entries, &out)?;
    println!(
        "\nwrote {} pages and {}",
        all_entries.len(),
        manifest.display()
    );
    println!("inspect the PNGs under {}", out.join("pages").display());
    Ok(())
}
