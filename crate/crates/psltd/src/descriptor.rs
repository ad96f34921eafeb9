//! The local texture descriptor computed per component crop.
//!
//! Per interior pixel the descriptor quantizes the eight neighbor intensity
//! differences into five levels (similar / brighter / darker / much brighter
//! / much darker), unpacks that penta pattern into five one-hot binary
//! patterns, and detects oriented linear structures three ways: from raw
//! intensities, from per-scale gradient directions of the filter bank
//! responses, and from the agreement of the two. Histograms of the binary
//! patterns — 59 bins: the 58 rotation-uniform patterns ranked by value plus
//! one catch-all — are accumulated per orientation slot and per level, each
//! `(slot, level)` histogram normalized to unit mass. A per-scale histogram
//! of gradient-magnitude rank patterns completes each feature set.
//!
//! Layout: `F1` (intensity-gated, 1475 + 177 magnitude dims) followed by
//! `F2` (gradient-gated per scale, 3×1475 + 177) and `F3` (agreement-gated,
//! same shape), 10856 values total. The magnitude dims are computed once and
//! reused in all three sets.

use std::sync::OnceLock;

use log::warn;

use crate::config::DescriptorParams;
use crate::error::{Error, Result};
use crate::gabor::{apply_bank, GaborBank, GaborField, SCALE_COUNT};
use crate::imaging::GrayImage;

/// Quantization levels of an intensity difference.
pub const LEVELS: usize = 5;
/// Orientation slots: horizontal, vertical, 45°, 135°, none.
pub const ORIENT_SLOTS: usize = 5;
/// Histogram bins: 58 uniform patterns plus one catch-all.
pub const BINS: usize = 59;
/// Bin index shared by every non-uniform pattern.
pub const CATCH_ALL_BIN: usize = 58;

/// One orientation-gated histogram block: slots × levels × bins.
pub const HIST_BLOCK_LEN: usize = ORIENT_SLOTS * LEVELS * BINS;
/// Per-scale magnitude histograms concatenated.
pub const MAG_BLOCK_LEN: usize = SCALE_COUNT * BINS;
pub const F1_LEN: usize = HIST_BLOCK_LEN + MAG_BLOCK_LEN;
pub const F2_LEN: usize = SCALE_COUNT * HIST_BLOCK_LEN + MAG_BLOCK_LEN;
pub const F3_LEN: usize = F2_LEN;
pub const PSLTD_LEN: usize = F1_LEN + F2_LEN + F3_LEN;

/// Eight-neighbor offsets `(drow, dcol)` in descriptor order: east first,
/// then counter-clockwise. Offset `n` maps to bit `n` (east is the least
/// significant bit) wherever patterns are packed into bytes.
pub const NEIGHBOR_OFFSETS: [(i32, i32); 8] = [
    (0, 1),   // east
    (-1, 1),  // north-east
    (-1, 0),  // north
    (-1, -1), // north-west
    (0, -1),  // west
    (1, -1),  // south-west
    (1, 0),   // south
    (1, 1),   // south-east
];

/// Neighbor pairs defining each oriented linear structure, `(drow, dcol)`:
/// horizontal, vertical, 45° (anti-diagonal), 135° (main diagonal).
const ORIENT_PAIRS: [[(i32, i32); 2]; 4] = [
    [(0, -1), (0, 1)],
    [(-1, 0), (1, 0)],
    [(-1, 1), (1, -1)],
    [(-1, -1), (1, 1)],
];

/// Five-level codes of the eight neighbor differences, in
/// [`NEIGHBOR_OFFSETS`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PentaPattern(pub [u8; 8]);

/// Oriented-structure vector. Slot `l < 4` holds `l + 1` when the structure
/// is present and 0 otherwise; slot 4 holds 1 exactly when no structure is
/// present.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrientationVector(pub [u8; ORIENT_SLOTS]);

impl OrientationVector {
    #[inline]
    pub fn present(&self, slot: usize) -> bool {
        self.0[slot] != 0
    }
}

/// Quantize one signed intensity difference (center minus neighbor).
/// Level 0: `|d| < t0`; 1: `t0 ≤ d < t1`; 2: `-t1 < d ≤ -t0`; 3: `d ≥ t1`;
/// 4: `d ≤ -t1`.
#[inline]
pub fn quantize_difference(diff: f64, t0: f64, t1: f64) -> u8 {
    if diff >= t1 {
        3
    } else if diff <= -t1 {
        4
    } else if diff >= t0 {
        1
    } else if diff <= -t0 {
        2
    } else {
        0
    }
}

/// Penta pattern of an interior pixel: center-minus-neighbor differences
/// quantized to five levels.
pub fn compute_ppv(
    crop: &GrayImage,
    row: usize,
    col: usize,
    params: &DescriptorParams,
) -> PentaPattern {
    debug_assert!(
        row >= 1 && col >= 1 && row + 1 < crop.height() && col + 1 < crop.width(),
        "penta pattern requires all eight neighbors"
    );
    let center = crop.get(col, row) as i32;
    let mut codes = [0u8; 8];
    for (n, (dr, dc)) in NEIGHBOR_OFFSETS.iter().enumerate() {
        let neighbor = crop.get(
            (col as i32 + dc) as usize,
            (row as i32 + dr) as usize,
        ) as i32;
        codes[n] = quantize_difference((center - neighbor) as f64, params.t0, params.t1);
    }
    PentaPattern(codes)
}

/// Unpack a penta pattern into five one-hot binary patterns: bit `n` of
/// pattern `k` is set exactly when neighbor `n` carries level `k`.
pub fn ppv_to_bpvs(ppv: &PentaPattern) -> [u8; LEVELS] {
    let mut bpvs = [0u8; LEVELS];
    for (n, &code) in ppv.0.iter().enumerate() {
        bpvs[code as usize] |= 1 << n;
    }
    bpvs
}

/// Number of circular bit transitions in an eight-bit pattern. Patterns with
/// at most two transitions are "uniform".
#[inline]
pub fn uniformity(pattern: u8) -> u32 {
    (pattern ^ pattern.rotate_right(1)).count_ones()
}

static BIN_LUT: OnceLock<[u8; 256]> = OnceLock::new();

fn bin_lut() -> &'static [u8; 256] {
    BIN_LUT.get_or_init(|| {
        let mut lut = [CATCH_ALL_BIN as u8; 256];
        let mut rank = 0u8;
        for p in 0..=255u8 {
            if uniformity(p) <= 2 {
                lut[p as usize] = rank;
                rank += 1;
            }
        }
        debug_assert_eq!(rank as usize, CATCH_ALL_BIN);
        lut
    })
}

/// Histogram bin of a binary pattern: uniform patterns take their rank in
/// ascending byte-value order (0..58); everything else shares the catch-all
/// bin.
#[inline]
pub fn bin_index(pattern: u8) -> usize {
    bin_lut()[pattern as usize] as usize
}

/// Oriented structures in raw intensities at an interior pixel: slot `l` is
/// present when both opposing neighbors of that orientation differ from the
/// center by at most `t0`.
pub fn intensity_orientation(
    crop: &GrayImage,
    row: usize,
    col: usize,
    t0: f64,
) -> OrientationVector {
    orientation_from(
        |r, c| crop.get(c as usize, r as usize) as f64,
        row,
        col,
        t0,
    )
}

/// Oriented structures in a gradient-direction plane at an interior pixel,
/// using threshold `g0_radians`.
pub fn gradient_orientation(
    field: &GaborField,
    scale: usize,
    row: usize,
    col: usize,
    g0_radians: f64,
) -> OrientationVector {
    orientation_from(
        |r, c| field.gradient_direction(scale, r as usize, c as usize),
        row,
        col,
        g0_radians,
    )
}

/// Oriented structures over an arbitrary row-major value plane (the bulk
/// path when gradient directions are precomputed).
pub fn orientation_in_plane(
    plane: &[f64],
    width: usize,
    row: usize,
    col: usize,
    threshold: f64,
) -> OrientationVector {
    orientation_from(|r, c| plane[r as usize * width + c as usize], row, col, threshold)
}

fn orientation_from<F: Fn(i32, i32) -> f64>(
    value: F,
    row: usize,
    col: usize,
    threshold: f64,
) -> OrientationVector {
    let center = value(row as i32, col as i32);
    let mut slots = [0u8; ORIENT_SLOTS];
    for (l, pair) in ORIENT_PAIRS.iter().enumerate() {
        let present = pair.iter().all(|&(dr, dc)| {
            (center - value(row as i32 + dr, col as i32 + dc)).abs() <= threshold
        });
        if present {
            slots[l] = l as u8 + 1;
        }
    }
    if slots[..4].iter().all(|&s| s == 0) {
        slots[4] = 1;
    }
    OrientationVector(slots)
}

/// Agreement of intensity and gradient structures: slot `l < 4` keeps the
/// intensity value exactly when both vectors agree on that slot, and the
/// "none" slot fires when no slot survives.
pub fn combined_orientation(ei: &OrientationVector, eg: &OrientationVector) -> OrientationVector {
    let mut slots = [0u8; ORIENT_SLOTS];
    for ((slot, &i), &g) in slots.iter_mut().zip(&ei.0).zip(&eg.0).take(4) {
        if i == g {
            *slot = i;
        }
    }
    if slots[..4].iter().all(|&s| s == 0) {
        slots[4] = 1;
    }
    OrientationVector(slots)
}

/// Gradient-magnitude rank pattern at an interior pixel of a precomputed
/// magnitude plane: bit `n` is set when neighbor `n`'s magnitude is at least
/// the center's (ties count as set).
pub fn magnitude_pattern_in_plane(plane: &[f64], width: usize, row: usize, col: usize) -> u8 {
    let center = plane[row * width + col];
    let mut bits = 0u8;
    for (n, (dr, dc)) in NEIGHBOR_OFFSETS.iter().enumerate() {
        let r = (row as i32 + dr) as usize;
        let c = (col as i32 + dc) as usize;
        if plane[r * width + c] >= center {
            bits |= 1 << n;
        }
    }
    bits
}

/// Gradient-magnitude rank pattern straight from a filter field.
pub fn magnitude_pattern(
    field: &GaborField,
    scale: usize,
    row: usize,
    col: usize,
    mode: crate::config::MagIndexMode,
) -> u8 {
    let center = field.gradient_magnitude(scale, row, col, mode);
    let mut bits = 0u8;
    for (n, (dr, dc)) in NEIGHBOR_OFFSETS.iter().enumerate() {
        let r = (row as i32 + dr) as usize;
        let c = (col as i32 + dc) as usize;
        if field.gradient_magnitude(scale, r, c, mode) >= center {
            bits |= 1 << n;
        }
    }
    bits
}

/// Which orientation source gates a histogram block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrientationMode {
    Intensity,
    Gradient,
    Combined,
}

/// One orientation-gated histogram block (`slots × levels × bins`, slot
/// outermost, bin innermost). Each `(slot, level)` sub-histogram is
/// normalized to sum 1 when it has support and stays all-zero otherwise.
/// `scale` selects the filter scale and is required unless the mode is
/// intensity. Crops smaller than 3×3 have no interior and yield an all-zero
/// block with a warning.
pub fn histogram_block(
    crop: &GrayImage,
    field: &GaborField,
    mode: OrientationMode,
    scale: Option<usize>,
    params: &DescriptorParams,
) -> Vec<f64> {
    assert!(
        mode == OrientationMode::Intensity || scale.is_some(),
        "gradient-gated blocks need a scale"
    );
    let (w, h) = (crop.width(), crop.height());
    if w < 3 || h < 3 {
        warn!("crop {w}x{h} has no interior pixels; histogram block is all zero");
        return vec![0.0; HIST_BLOCK_LEN];
    }

    let dir = scale.map(|m| field.direction_plane(m));
    let g0 = params.g0_radians();
    let mut counts = vec![0u32; HIST_BLOCK_LEN];
    for row in 1..h - 1 {
        for col in 1..w - 1 {
            let bins = level_bins(crop, row, col, params);
            let ei = intensity_orientation(crop, row, col, params.t0);
            let gate = match mode {
                OrientationMode::Intensity => ei,
                OrientationMode::Gradient => {
                    orientation_in_plane(dir.as_ref().unwrap(), w, row, col, g0)
                }
                OrientationMode::Combined => {
                    let eg = orientation_in_plane(dir.as_ref().unwrap(), w, row, col, g0);
                    combined_orientation(&ei, &eg)
                }
            };
            accumulate_gated(&mut counts, &gate, &bins, params.eq18_literal);
        }
    }
    normalize_block(&counts)
}

/// Histogram bins of the five one-hot patterns at one pixel.
#[inline]
fn level_bins(
    crop: &GrayImage,
    row: usize,
    col: usize,
    params: &DescriptorParams,
) -> [usize; LEVELS] {
    let bpvs = ppv_to_bpvs(&compute_ppv(crop, row, col, params));
    bpvs.map(bin_index)
}

#[inline]
fn accumulate_gated(
    counts: &mut [u32],
    gate: &OrientationVector,
    bins: &[usize; LEVELS],
    literal: bool,
) {
    for l in 0..ORIENT_SLOTS {
        let fire = if literal {
            gate.0[l] == 1
        } else {
            gate.0[l] != 0
        };
        if fire {
            let base = l * LEVELS * BINS;
            for (k, &d) in bins.iter().enumerate() {
                counts[base + k * BINS + d] += 1;
            }
        }
    }
}

fn normalize_block(counts: &[u32]) -> Vec<f64> {
    let mut out = vec![0.0f64; HIST_BLOCK_LEN];
    for l in 0..ORIENT_SLOTS {
        for k in 0..LEVELS {
            let base = l * LEVELS * BINS + k * BINS;
            let total: u32 = counts[base..base + BINS].iter().sum();
            if total > 0 {
                for d in 0..BINS {
                    out[base + d] = counts[base + d] as f64 / total as f64;
                }
            }
        }
    }
    out
}

/// The three concatenated feature sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSet {
    F1,
    F2,
    F3,
}

impl FeatureSet {
    fn base(self) -> usize {
        match self {
            FeatureSet::F1 => 0,
            FeatureSet::F2 => F1_LEN,
            FeatureSet::F3 => F1_LEN + F2_LEN,
        }
    }
}

/// Flat index of one histogram value: feature set, scale (`None` for the
/// intensity-gated set, required otherwise), orientation slot, level, bin.
pub fn hist_index(set: FeatureSet, scale: Option<usize>, l: usize, k: usize, d: usize) -> usize {
    assert!(l < ORIENT_SLOTS && k < LEVELS && d < BINS);
    let within = l * LEVELS * BINS + k * BINS + d;
    match (set, scale) {
        (FeatureSet::F1, None) => within,
        (FeatureSet::F2, Some(m)) | (FeatureSet::F3, Some(m)) => {
            assert!(m < SCALE_COUNT);
            set.base() + m * HIST_BLOCK_LEN + within
        }
        (FeatureSet::F1, Some(_)) => panic!("the intensity-gated set has no scales"),
        (_, None) => panic!("gradient-gated sets need a scale"),
    }
}

/// Flat index of one magnitude-histogram value within a feature set.
pub fn mag_index(set: FeatureSet, scale: usize, d: usize) -> usize {
    assert!(scale < SCALE_COUNT && d < BINS);
    let hists = match set {
        FeatureSet::F1 => HIST_BLOCK_LEN,
        FeatureSet::F2 | FeatureSet::F3 => SCALE_COUNT * HIST_BLOCK_LEN,
    };
    set.base() + hists + scale * BINS + d
}

/// Complete descriptor of one component crop.
#[derive(Debug, Clone, PartialEq)]
pub struct Psltd {
    values: Vec<f64>,
}

impl Psltd {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn f1(&self) -> &[f64] {
        &self.values[..F1_LEN]
    }

    pub fn f2(&self) -> &[f64] {
        &self.values[F1_LEN..F1_LEN + F2_LEN]
    }

    pub fn f3(&self) -> &[f64] {
        &self.values[F1_LEN + F2_LEN..]
    }
}

/// Compute the full descriptor of one crop. The crop must be at least 3×3 so
/// an interior exists; undersized crops are an error (callers skip such
/// components upstream).
pub fn compute_psltd(
    crop: &GrayImage,
    bank: &GaborBank,
    params: &DescriptorParams,
) -> Result<Psltd> {
    let (w, h) = (crop.width(), crop.height());
    if w < 3 || h < 3 {
        return Err(Error::data(format!(
            "crop {w}x{h} is smaller than 3x3 and has no interior"
        )));
    }
    let field = apply_bank(crop, bank);
    let g0 = params.g0_radians();
    let dir: Vec<Vec<f64>> = (0..SCALE_COUNT).map(|m| field.direction_plane(m)).collect();
    let mag: Vec<Vec<f64>> = (0..SCALE_COUNT)
        .map(|m| field.magnitude_plane(m, params.mag_index_mode))
        .collect();

    let mut f1_counts = vec![0u32; HIST_BLOCK_LEN];
    let mut f2_counts = vec![vec![0u32; HIST_BLOCK_LEN]; SCALE_COUNT];
    let mut f3_counts = vec![vec![0u32; HIST_BLOCK_LEN]; SCALE_COUNT];
    let mut mag_counts = vec![[0u32; BINS]; SCALE_COUNT];
    let mut interior = 0u32;

    for row in 1..h - 1 {
        for col in 1..w - 1 {
            interior += 1;
            let bins = level_bins(crop, row, col, params);
            let ei = intensity_orientation(crop, row, col, params.t0);
            accumulate_gated(&mut f1_counts, &ei, &bins, params.eq18_literal);
            for m in 0..SCALE_COUNT {
                let eg = orientation_in_plane(&dir[m], w, row, col, g0);
                let e = combined_orientation(&ei, &eg);
                accumulate_gated(&mut f2_counts[m], &eg, &bins, params.eq18_literal);
                accumulate_gated(&mut f3_counts[m], &e, &bins, params.eq18_literal);
                let pattern = magnitude_pattern_in_plane(&mag[m], w, row, col);
                mag_counts[m][bin_index(pattern)] += 1;
            }
        }
    }

    let mag_block: Vec<f64> = mag_counts
        .iter()
        .flat_map(|counts| {
            counts
                .iter()
                .map(move |&c| if interior > 0 { c as f64 / interior as f64 } else { 0.0 })
        })
        .collect();

    let mut values = Vec::with_capacity(PSLTD_LEN);
    values.extend(normalize_block(&f1_counts));
    values.extend_from_slice(&mag_block);
    for counts in &f2_counts {
        values.extend(normalize_block(counts));
    }
    values.extend_from_slice(&mag_block);
    for counts in &f3_counts {
        values.extend(normalize_block(counts));
    }
    values.extend_from_slice(&mag_block);
    debug_assert_eq!(values.len(), PSLTD_LEN);
    Ok(Psltd { values })
}
