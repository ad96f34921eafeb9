//! Printer attribution from scanned documents.
//!
//! The toolkit identifies which printer produced a scanned page from the
//! microscopic texture that toner deposition leaves inside printed letters:
//! pages are binarized and split into connected components, each component
//! crop is summarized by a pooled local-texture descriptor built from
//! penta-quantized intensity differences, oriented linear structures, and a
//! small Gabor filter bank, and a one-vs-one RBF SVM votes per page.
//!
//! The library is the primary interface; `src/main.rs` is a thin `psltd`
//! binary over [`pipeline`]. Each major capability has a runnable example:
//!
//! ```text
//! cargo run --example gabor_bank                # filter bank anatomy
//! cargo run --example descriptor_blocks         # one descriptor, block by block
//! cargo run --example generate_pages            # synthetic printer corpus
//! cargo run --example extract_features          # manifest -> feature file
//! cargo run --example train_and_predict         # end-to-end attribution
//! cargo run --example evaluate_splits           # k-fold evaluation report
//! cargo run --example orientation_diagnostics   # per-printer structure counts
//! ```

pub mod config;
pub mod descriptor;
pub mod error;
pub mod features;
pub mod formats;
pub mod gabor;
pub mod imaging;
pub mod manifest;
pub mod pipeline;
pub mod synth;
pub mod svm;

pub use error::{Error, Result};
