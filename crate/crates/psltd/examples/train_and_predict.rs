//! The full attribution loop: generate labeled training and test corpora,
//! extract pooled features, grid-search and train the one-vs-one classifier,
//! then attribute every test page by majority vote over its letter groups.
//!
//! Run with: `cargo run --example train_and_predict`

use psltd::config::{NpPolicy, RunConfig};
use psltd::pipeline::{cmd_extract, cmd_predict, cmd_train};
use psltd::synth::{default_profiles, generate_corpus, CorpusSpec, GlyphStyle};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();

    // Separate seeds give disjoint page realizations for train and test.
    let train = generate_corpus(
        &CorpusSpec::new(default_profiles(), 8, 60, GlyphStyle::Blocky, 100),
        &dir.path().join("train"),
    )?;
    let test = generate_corpus(
        &CorpusSpec::new(default_profiles(), 3, 60, GlyphStyle::Blocky, 200),
        &dir.path().join("test"),
    )?;
    println!(
        "train: {} pages, test: {} pages",
        train.entries.len(),
        test.entries.len()
    );

    let config = RunConfig {
        np: NpPolicy::Fixed(20),
        ..RunConfig::default()
    };

    let features = dir.path().join("features.bin");
    let model = dir.path().join("model.pslm");
    cmd_extract(&train.manifest_path, &config, &features)?;
    let outcome = cmd_train(&features, &config, &model)?;
    println!(
        "\nselected C=2^{} gamma=2^{} (cross-validation accuracy {:.4})",
        outcome.best.log2_c, outcome.best.log2_gamma, outcome.best.mean_accuracy
    );
    println!(
        "model: {} classes, {} pairwise machines, {} kept dimensions",
        outcome.model.classes.len(),
        outcome.model.machines.len(),
        outcome.model.prune.kept_dim()
    );

    let report = cmd_predict(&model, &test.manifest_path, &config, &dir.path().join("out"))?;
    println!(
        "\npredicted {} pages from {} letter groups",
        report.pages.len(),
        report.groups.len()
    );
    if let Some(confusion) = &report.confusion {
        println!("\npage-level confusion (rows = truth):");
        print!("{:>12}", "");
        for class in &confusion.classes {
            print!("{class:>12}");
        }
        println!();
        for (i, class) in confusion.classes.iter().enumerate() {
            print!("{class:>12}");
            for count in &confusion.counts[i] {
                print!("{count:>12}");
            }
            println!();
        }
    }
    if let Some(accuracy) = report.page_accuracy {
        println!("\npage accuracy: {accuracy:.4}");
    }
    Ok(())
}
