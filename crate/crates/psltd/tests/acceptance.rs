//! Acceptance checks for the whole toolkit. Each test prints one
//! `[PASS]`/`[FAIL]`/`[SKIP]` line (visible with `--nocapture`) and enforces
//! a wall-clock budget, so the suite doubles as a health report:
//!
//! 1.  descriptor block dimensions on random crops
//! 2.  uniform-pattern census (exactly 58 of 256)
//! 3.  descriptor equals an independent from-scratch reimplementation
//! 4.  bit-exact invariance to constant intensity offsets
//! 5.  one-hot level decomposition over every possible pattern
//! 6.  solver dual optimum vs an exhaustive oracle + optimality audit
//! 7.  same-style end-to-end attribution (whole-page and 20-letter groups)
//! 8.  cross-style generalization
//! 9.  null model stays at chance
//! 10. optional external-corpus run (skipped unless `PSLTD_DB1_DIR` is set)

mod common;

use std::panic::AssertUnwindSafe;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use common::{brute_force_dual, naive_psltd, random_crop, random_crop_in};
use psltd::config::{BitDepth, DescriptorParams, GaborConfig, NpPolicy, RunConfig};
use psltd::descriptor::{
    bin_index, compute_psltd, ppv_to_bpvs, uniformity, PentaPattern, F1_LEN, F2_LEN, F3_LEN,
    PSLTD_LEN,
};
use psltd::gabor::GaborBank;
use psltd::imaging::GrayImage;
use psltd::pipeline::{cmd_extract, cmd_predict, cmd_train};
use psltd::svm::{kkt_audit, train_binary, train_ovo, KKT_TOLERANCE};
use psltd::synth::{default_profiles, generate_corpus, CorpusSpec, GlyphStyle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Run one criterion body under a wall-clock budget and print its verdict.
fn criterion(label: &str, budget: Duration, body: impl FnOnce()) {
    let start = Instant::now();
    let outcome = std::panic::catch_unwind(AssertUnwindSafe(body));
    let elapsed = start.elapsed();
    let verdict = match &outcome {
        Ok(()) if elapsed <= budget => "PASS",
        _ => "FAIL",
    };
    println!(
        "[{verdict}] {label} ({:.1}s of {:.0}s budget)",
        elapsed.as_secs_f64(),
        budget.as_secs_f64()
    );
    if let Err(cause) = outcome {
        std::panic::resume_unwind(cause);
    }
    assert!(
        elapsed <= budget,
        "{label}: ran {elapsed:?}, over the {budget:?} budget"
    );
}

fn bank() -> GaborBank {
    GaborBank::build(&GaborConfig::default()).unwrap()
}

#[test]
fn criterion_01_descriptor_dimensions() {
    criterion(
        "criterion 1: descriptor dimensions on 100 random crops",
        Duration::from_secs(10),
        || {
            let mut rng = ChaCha8Rng::seed_from_u64(101);
            let bank = bank();
            let params = DescriptorParams::for_bit_depth(BitDepth::Eight);
            for _ in 0..100 {
                let w = rng.random_range(3..=24);
                let h = rng.random_range(3..=24);
                let crop = random_crop(&mut rng, w, h, BitDepth::Eight);
                let d = compute_psltd(&crop, &bank, &params).unwrap();
                assert_eq!(d.f1().len(), 1652);
                assert_eq!(d.f2().len(), 4602);
                assert_eq!(d.f3().len(), 4602);
                assert_eq!(d.values().len(), 10856);
            }
            assert_eq!((F1_LEN, F2_LEN, F3_LEN, PSLTD_LEN), (1652, 4602, 4602, 10856));
        },
    );
}

#[test]
fn criterion_02_uniform_pattern_census() {
    criterion(
        "criterion 2: exactly 58 uniform patterns among all 256",
        Duration::from_secs(10),
        || {
            // Independent transition count, written out the long way.
            let circular_transitions = |p: u8| -> u32 {
                (0..8)
                    .filter(|&n| ((p >> n) & 1) != ((p >> ((n + 1) % 8)) & 1))
                    .count() as u32
            };
            let mut uniform = 0usize;
            let mut next_rank = 0usize;
            for p in 0..=255u8 {
                let t = circular_transitions(p);
                assert_eq!(t, uniformity(p), "transition count disagrees at {p:#010b}");
                if t <= 2 {
                    uniform += 1;
                    // Uniform patterns take consecutive ranks in byte order.
                    assert_eq!(bin_index(p), next_rank);
                    next_rank += 1;
                } else {
                    assert_eq!(bin_index(p), 58);
                }
            }
            assert_eq!(uniform, 58);
        },
    );
}

#[test]
fn criterion_03_oracle_equivalence() {
    criterion(
        "criterion 3: descriptor matches the from-scratch oracle on 100 crops",
        Duration::from_secs(120),
        || {
            let mut rng = ChaCha8Rng::seed_from_u64(303);
            let bank = bank();
            let gabor = GaborConfig::default();
            for depth in [BitDepth::Eight, BitDepth::Sixteen] {
                let params = DescriptorParams::for_bit_depth(depth);
                for _ in 0..50 {
                    let w = rng.random_range(5..=20);
                    let h = rng.random_range(5..=20);
                    let crop = random_crop(&mut rng, w, h, depth);
                    let fast = compute_psltd(&crop, &bank, &params).unwrap();
                    let slow = naive_psltd(&crop, &gabor, &params);
                    assert_eq!(
                        fast.values(),
                        &slow[..],
                        "descriptor mismatch on a {w}x{h} {}-bit crop",
                        depth.bits()
                    );
                }
            }
        },
    );
}

#[test]
fn criterion_04_constant_offset_invariance() {
    criterion(
        "criterion 4: descriptor is bit-exact under constant offsets (20 crops)",
        Duration::from_secs(30),
        || {
            let mut rng = ChaCha8Rng::seed_from_u64(404);
            let bank = bank();
            for i in 0..20 {
                let (depth, ceiling, max_off) = if i % 2 == 0 {
                    (BitDepth::Eight, 200u16, 55u16)
                } else {
                    (BitDepth::Sixteen, 50_000u16, 15_000u16)
                };
                let params = DescriptorParams::for_bit_depth(depth);
                let w = rng.random_range(6..=18);
                let h = rng.random_range(6..=18);
                let crop = random_crop_in(&mut rng, w, h, depth, 0, ceiling);
                let offset = rng.random_range(1..=max_off);
                let shifted = GrayImage::from_samples(
                    w,
                    h,
                    depth,
                    crop.samples().iter().map(|&s| s + offset).collect(),
                )
                .unwrap();
                let a = compute_psltd(&crop, &bank, &params).unwrap();
                let b = compute_psltd(&shifted, &bank, &params).unwrap();
                assert_eq!(
                    a.values(),
                    b.values(),
                    "offset {offset} changed the descriptor on a {w}x{h} crop"
                );
            }
        },
    );
}

#[test]
fn criterion_05_one_hot_decomposition() {
    criterion(
        "criterion 5: one-hot level decomposition over all 390625 patterns",
        Duration::from_secs(10),
        || {
            let mut seen = 0u32;
            let mut codes = [0u8; 8];
            loop {
                let bpvs = ppv_to_bpvs(&PentaPattern(codes));
                // Each neighbor position is claimed by exactly one level.
                let mut or = 0u8;
                let mut bits = 0u32;
                for &m in &bpvs {
                    or |= m;
                    bits += m.count_ones();
                }
                assert_eq!(or, 0xFF, "some position unclaimed for {codes:?}");
                assert_eq!(bits, 8, "some position claimed twice for {codes:?}");
                seen += 1;

                // Next base-5 code.
                let mut n = 0;
                loop {
                    if n == 8 {
                        assert_eq!(seen, 390_625);
                        return;
                    }
                    if codes[n] < 4 {
                        codes[n] += 1;
                        break;
                    }
                    codes[n] = 0;
                    n += 1;
                }
            }
        },
    );
}

#[test]
fn criterion_06_solver_dual_vs_exhaustive_oracle() {
    criterion(
        "criterion 6: solver dual within 1e-6 of oracle on 50 problems + optimality audit",
        Duration::from_secs(60),
        || {
            let mut rng = ChaCha8Rng::seed_from_u64(606);
            let mut worst_gap = 0.0f64;
            for case in 0..50 {
                let n = rng.random_range(2..=8);
                let dim = rng.random_range(1..=3);
                let rows: Vec<Vec<f64>> = (0..n)
                    .map(|_| (0..dim).map(|_| rng.random_range(0.0..1.0)).collect())
                    .collect();
                let mut y: Vec<f64> = (0..n)
                    .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
                    .collect();
                if y.iter().all(|&v| v == y[0]) {
                    y[0] = -y[0];
                }
                let c = *[0.5, 1.0, 10.0].get(rng.random_range(0..3)).unwrap();
                let gamma = *[0.5, 2.0].get(rng.random_range(0..2)).unwrap();

                let trained = train_binary(&rows, &y, c, gamma).unwrap();
                let oracle = brute_force_dual(&rows, &y, c, gamma);
                let gap = oracle - trained.dual_objective;
                worst_gap = worst_gap.max(gap.abs());
                assert!(
                    gap.abs() <= 1e-6,
                    "case {case}: solver dual {} vs oracle {oracle} (gap {gap:.3e}, n={n}, C={c}, gamma={gamma})",
                    trained.dual_objective
                );
                // A feasible iterate can never beat the true optimum.
                assert!(
                    trained.dual_objective <= oracle + 1e-6,
                    "case {case}: solver dual exceeds the exhaustive optimum"
                );
                let audit = kkt_audit(&rows, &y, &trained, c, gamma);
                assert!(audit.passes(KKT_TOLERANCE), "case {case}: {audit:?}");
            }
            println!("    worst |dual gap| over 50 problems: {worst_gap:.3e}");

            // Every machine of a trained multi-class model satisfies the
            // optimality audit too.
            let mut rows = Vec::new();
            let mut labels = Vec::new();
            for (class, center) in [(0usize, 0.0f64), (1, 3.0), (2, 6.0)] {
                for _ in 0..10 {
                    rows.push(vec![
                        center + rng.random_range(-0.3..0.3),
                        center + rng.random_range(-0.3..0.3),
                    ]);
                    labels.push(class);
                }
            }
            let classes: Vec<String> = (0..3).map(|i| format!("p{i}")).collect();
            let grid = psltd::config::GridSpec::default();
            let out = train_ovo(
                &rows,
                &labels,
                &classes,
                &grid,
                606,
                psltd::features::PruneMask::identity(2),
                0,
                String::new(),
            )
            .unwrap();
            assert_eq!(out.reports.len(), 3);
            for report in &out.reports {
                assert!(
                    report.kkt.passes(KKT_TOLERANCE),
                    "machine {}-{} fails the audit: {:?}",
                    report.a,
                    report.b,
                    report.kkt
                );
            }
        },
    );
}

// ---------------------------------------------------------------------------
// End-to-end criteria on generated corpora
// ---------------------------------------------------------------------------

struct EndToEnd {
    dir: tempfile::TempDir,
}

impl EndToEnd {
    fn new() -> Self {
        EndToEnd {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// Generate a corpus, returning its manifest path.
    fn corpus(
        &self,
        name: &str,
        profiles: Vec<psltd::synth::PrinterProfile>,
        pages: usize,
        style: GlyphStyle,
        seed: u64,
    ) -> PathBuf {
        let spec = CorpusSpec::new(profiles, pages, 60, style, seed);
        generate_corpus(&spec, &self.path(name)).unwrap().manifest_path
    }

    /// extract → train → predict; returns page accuracy on the test set.
    fn run(&self, tag: &str, train_manifest: &Path, test_manifest: &Path, np: u32) -> f64 {
        let config = RunConfig {
            np: NpPolicy::Fixed(np),
            ..RunConfig::default()
        };
        let features = self.path(&format!("{tag}-features.bin"));
        let model = self.path(&format!("{tag}-model.pslm"));
        let extract = cmd_extract(train_manifest, &config, &features).unwrap();
        assert_eq!(extract.skipped, 0, "{tag}: training pages were skipped");
        cmd_train(&features, &config, &model).unwrap();
        let report = cmd_predict(&model, test_manifest, &config, &self.path(tag)).unwrap();
        report.page_accuracy.expect("labeled test manifest")
    }
}

#[test]
fn criterion_07_same_style_attribution() {
    criterion(
        "criterion 7: same-style attribution (whole-page 100%, 20-letter groups ≥95%)",
        Duration::from_secs(15 * 60),
        || {
            let e2e = EndToEnd::new();
            let train20 = e2e.corpus("train20", default_profiles(), 20, GlyphStyle::Blocky, 1000);
            let train5 = e2e.corpus("train5", default_profiles(), 5, GlyphStyle::Blocky, 3000);
            let test = e2e.corpus("test", default_profiles(), 5, GlyphStyle::Blocky, 2000);

            let whole_page = e2e.run("np0", &train20, &test, 0);
            println!("    whole-page pooling, 20 train pages: accuracy {whole_page:.4}");
            assert_eq!(
                whole_page, 1.0,
                "whole-page attribution must be perfect on well-separated printers"
            );

            let grouped = e2e.run("np20", &train5, &test, 20);
            println!("    20-letter groups, 5 train pages: accuracy {grouped:.4}");
            assert!(
                grouped >= 0.95,
                "grouped attribution {grouped:.4} fell below 0.95"
            );
        },
    );
}

#[test]
fn criterion_08_cross_style_generalization() {
    criterion(
        "criterion 8: cross-style generalization beats 2x chance",
        Duration::from_secs(15 * 60),
        || {
            let e2e = EndToEnd::new();
            let train = e2e.corpus("train", default_profiles(), 5, GlyphStyle::Blocky, 4000);
            let test = e2e.corpus("test", default_profiles(), 5, GlyphStyle::Rounded, 5000);
            let accuracy = e2e.run("cross", &train, &test, 20);
            println!("    blocky→rounded accuracy: {accuracy:.4}");
            assert!(
                accuracy > 0.5,
                "cross-style accuracy {accuracy:.4} is not above 0.5"
            );
        },
    );
}

#[test]
fn criterion_09_null_model_stays_at_chance() {
    criterion(
        "criterion 9: identical printers are indistinguishable (within 3σ of chance)",
        Duration::from_secs(10 * 60),
        || {
            // Two printers with byte-for-byte identical degradation
            // parameters; only the label and the noise realization differ.
            let base = default_profiles().remove(0);
            let mut twin_x = base.clone();
            twin_x.id = "twin-x".into();
            twin_x.seed = 7070;
            let mut twin_y = base;
            twin_y.id = "twin-y".into();
            twin_y.seed = 7171;
            let profiles = vec![twin_x, twin_y];

            let e2e = EndToEnd::new();
            let train = e2e.corpus("train", profiles.clone(), 10, GlyphStyle::Blocky, 6000);
            let test = e2e.corpus("test", profiles, 10, GlyphStyle::Blocky, 6500);
            let accuracy = e2e.run("null", &train, &test, 0);

            let n = 20.0f64; // test pages
            let sigma = (0.25 / n).sqrt();
            println!(
                "    null-model accuracy: {accuracy:.4} (acceptable band {:.4}..{:.4})",
                0.5 - 3.0 * sigma,
                0.5 + 3.0 * sigma
            );
            assert!(
                (accuracy - 0.5).abs() <= 3.0 * sigma,
                "null-model accuracy {accuracy:.4} is outside 3σ of chance"
            );
        },
    );
}

#[test]
fn criterion_10_external_corpus() {
    let Some(dir) = std::env::var_os("PSLTD_DB1_DIR") else {
        println!(
            "[SKIP] criterion 10: external corpus (set PSLTD_DB1_DIR to a directory \
             holding train.csv and test.csv manifests to enable)"
        );
        return;
    };
    criterion(
        "criterion 10: external corpus page accuracy ≥ 95%",
        Duration::from_secs(60 * 60),
        || {
            let dir = PathBuf::from(&dir);
            let e2e = EndToEnd::new();
            let accuracy = e2e.run("db1", &dir.join("train.csv"), &dir.join("test.csv"), 20);
            println!("    external corpus page accuracy: {accuracy:.4}");
            assert!(accuracy >= 0.95, "external accuracy {accuracy:.4} below 0.95");
        },
    );
}
