//! `psltd` — printer attribution from scanned-page texture.
//!
//! Thin command-line front end over the library: every subcommand maps to
//! one pipeline entry point. Exit codes: 0 success, 2 configuration error,
//! 3 data error, 4 training failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use psltd::config::RunConfig;
use psltd::error::{Error, Result};
use psltd::manifest::write_manifest;
use psltd::pipeline::{cmd_diag, cmd_eval, cmd_extract, cmd_predict, cmd_train, SplitSpec};
use psltd::synth::{default_profiles, generate_corpus, CorpusSpec, GlyphStyle};

#[derive(Parser)]
#[command(
    name = "psltd",
    version,
    about = "Attribute scanned pages to source printers via local texture descriptors"
)]
struct Cli {
    /// Configuration file (.toml or .json). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the configured random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true)]
    jobs: Option<u32>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract pooled component descriptors from a page manifest.
    Extract {
        /// Manifest CSV with columns path,printer_id,page_id,font_tag.
        #[arg(long)]
        manifest: PathBuf,
        /// Output feature file; a sidecar CSV lands next to it.
        #[arg(long, default_value = "features.bin")]
        out: PathBuf,
    },
    /// Train a printer classifier from an extracted feature file.
    Train {
        #[arg(long)]
        features: PathBuf,
        /// Output model file; the prune mask is also written next to it.
        #[arg(long, default_value = "model.pslm")]
        out: PathBuf,
    },
    /// Predict printers for manifest pages with a trained model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory for groups.jsonl, pages.jsonl, confusion.csv.
        #[arg(long, default_value = "predictions")]
        out: PathBuf,
    },
    /// Evaluate end-to-end page accuracy under a train/test split policy.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        /// Split policy: "kfold:K[xR]", "same-font:TAG[:K[xR]]", or
        /// "cross-font:TRAIN_TAG:TEST_TAG".
        #[arg(long)]
        split: String,
        /// Output directory for report.json and confusion.csv.
        #[arg(long, default_value = "eval")]
        out: PathBuf,
    },
    /// Generate a synthetic multi-printer page corpus with ground truth.
    Synth {
        /// Output directory; pages/, truth/, and manifest.csv are created.
        #[arg(long)]
        out: PathBuf,
        /// Pages to render per printer and style.
        #[arg(long, default_value_t = 5)]
        pages_per_printer: usize,
        /// Glyphs per page.
        #[arg(long, default_value_t = 60)]
        glyphs_per_page: usize,
        /// Comma-separated glyph styles (default: all).
        #[arg(long)]
        styles: Option<String>,
    },
    /// Summarize oriented linear structures per printer.
    Diag {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "diag.csv")]
        out: PathBuf,
    },
}

fn parse_fold_shape(s: &str) -> Result<(u32, u32)> {
    let (k, repeats) = match s.split_once('x') {
        Some((k, r)) => (k, r),
        None => (s, "1"),
    };
    let parse = |v: &str, what: &str| {
        v.parse::<u32>()
            .map_err(|_| Error::config(format!("split spec has a non-numeric {what}: {v:?}")))
    };
    Ok((parse(k, "fold count")?, parse(repeats, "repeat count")?))
}

fn parse_split(s: &str) -> Result<SplitSpec> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        ["kfold", shape] => {
            let (k, repeats) = parse_fold_shape(shape)?;
            Ok(SplitSpec::KFold { k, repeats })
        }
        ["same-font", tag] => Ok(SplitSpec::SameFont {
            tag: tag.to_string(),
            k: 2,
            repeats: 1,
        }),
        ["same-font", tag, shape] => {
            let (k, repeats) = parse_fold_shape(shape)?;
            Ok(SplitSpec::SameFont {
                tag: tag.to_string(),
                k,
                repeats,
            })
        }
        ["cross-font", train_tag, test_tag] => Ok(SplitSpec::CrossFont {
            train_tag: train_tag.to_string(),
            test_tag: test_tag.to_string(),
        }),
        _ => Err(Error::config(format!(
            "unrecognized split spec {s:?}; use kfold:K[xR], same-font:TAG[:K[xR]], \
             or cross-font:TRAIN_TAG:TEST_TAG"
        ))),
    }
}

fn parse_styles(arg: Option<&str>) -> Result<Vec<GlyphStyle>> {
    match arg {
        None => Ok(GlyphStyle::ALL.to_vec()),
        Some(list) => list.split(',').map(|s| GlyphStyle::parse(s.trim())).collect(),
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        config.jobs = jobs;
    }
    if config.cache_dir.is_none() {
        config.cache_dir = std::env::var_os("PSLTD_CACHE_DIR").map(PathBuf::from);
    }
    if config.jobs > 0 {
        // Ignore the error if a global pool already exists.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs as usize)
            .build_global();
    }

    match cli.command {
        Command::Extract { manifest, out } => {
            let report = cmd_extract(&manifest, &config, &out)?;
            println!(
                "wrote {} rows of dimension {} ({} pages, {} skipped, group size {}) to {}",
                report.rows,
                report.dim,
                report.pages,
                report.skipped,
                report.np,
                out.display()
            );
        }
        Command::Train { features, out } => {
            let outcome = cmd_train(&features, &config, &out)?;
            println!(
                "trained {} classes; best C=2^{} gamma=2^{} (cv accuracy {:.4}); model at {}",
                outcome.model.classes.len(),
                outcome.best.log2_c,
                outcome.best.log2_gamma,
                outcome.best.mean_accuracy,
                out.display()
            );
        }
        Command::Predict {
            model,
            manifest,
            out,
        } => {
            let report = cmd_predict(&model, &manifest, &config, &out)?;
            match report.page_accuracy {
                Some(acc) => println!(
                    "predicted {} pages ({} groups), page accuracy {:.4}; outputs in {}",
                    report.pages.len(),
                    report.groups.len(),
                    acc,
                    out.display()
                ),
                None => println!(
                    "predicted {} pages ({} groups); outputs in {}",
                    report.pages.len(),
                    report.groups.len(),
                    out.display()
                ),
            }
        }
        Command::Eval { manifest, split, out } => {
            let spec = parse_split(&split)?;
            let report = cmd_eval(&manifest, &config, &spec, &out)?;
            println!(
                "{}: mean page accuracy {:.4} (std {:.4}) over {} splits; \
                 95% CI [{:.4}, {:.4}]; report in {}",
                report.split_spec,
                report.mean_accuracy,
                report.std_accuracy,
                report.splits.len(),
                report.wilson_low,
                report.wilson_high,
                out.display()
            );
            for (class, acc) in report.classes.iter().zip(&report.per_class_accuracy) {
                match acc {
                    Some(a) => println!("  {class}: {a:.4}"),
                    None => println!("  {class}: no test pages"),
                }
            }
        }
        Command::Synth {
            out,
            pages_per_printer,
            glyphs_per_page,
            styles,
        } => {
            let styles = parse_styles(styles.as_deref())?;
            let mut all_entries = Vec::new();
            for style in &styles {
                let spec = CorpusSpec::new(
                    default_profiles(),
                    pages_per_printer,
                    glyphs_per_page,
                    *style,
                    config.seed,
                );
                let corpus = generate_corpus(&spec, &out)?;
                all_entries.extend(corpus.entries);
            }
            write_manifest(&out.join("manifest.csv"), &all_entries, &out)?;
            println!(
                "generated {} pages ({} styles x {} printers x {} pages) under {}",
                all_entries.len(),
                styles.len(),
                default_profiles().len(),
                pages_per_printer,
                out.display()
            );
        }
        Command::Diag { manifest, out } => {
            let report = cmd_diag(&manifest, &config, &out)?;
            println!("printer_id horizontal vertical diagonal_45 diagonal_135 interior_ink_pixels");
            for row in &report.rows {
                println!(
                    "{} {} {} {} {} {}",
                    row.printer_id,
                    row.horizontal,
                    row.vertical,
                    row.diagonal_45,
                    row.diagonal_135,
                    row.interior_ink_pixels
                );
            }
            println!("written to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
