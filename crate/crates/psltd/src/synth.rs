//! Synthetic "printed page" generator with controllable per-printer noise
//! signatures, used for self-contained end-to-end verification of the whole
//! pipeline: pages of procedural glyphs are rendered clean, then degraded by
//! a printer profile whose parameters (toner noise, ink dilation, banding,
//! edge raggedness, base ink level) imitate the device-specific texture a
//! real printer leaves on paper.
//!
//! Everything is deterministic given the seeds, so a corpus regenerates
//! byte-identically.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::BitDepth;
use crate::error::{Error, Result};
use crate::imaging::{save_gray_image, BinaryMask, BoundingBox, GrayImage};
use crate::manifest::{write_manifest, ManifestEntry};

/// Glyph ink box width in pixels (glyphs are roughly 50 px tall and 40 px
/// wide, the scale the descriptor's component filter expects).
pub const GLYPH_W: usize = 40;
/// Glyph ink box height in pixels.
pub const GLYPH_H: usize = 50;
/// Layout cell width; the slack around the glyph box keeps ink of adjacent
/// cells at least 8 px apart so components never merge.
pub const CELL_W: usize = 56;
/// Layout cell height.
pub const CELL_H: usize = 68;

/// Procedural glyph families standing in for different fonts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GlyphStyle {
    /// Axis-aligned strokes with a square brush.
    Blocky,
    /// Smoothly curving strokes with a round brush.
    Rounded,
    /// Diagonal strokes.
    Slanted,
    /// Wandering strokes with varying brush width.
    Irregular,
}

impl GlyphStyle {
    pub const ALL: [GlyphStyle; 4] = [
        GlyphStyle::Blocky,
        GlyphStyle::Rounded,
        GlyphStyle::Slanted,
        GlyphStyle::Irregular,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            GlyphStyle::Blocky => "blocky",
            GlyphStyle::Rounded => "rounded",
            GlyphStyle::Slanted => "slanted",
            GlyphStyle::Irregular => "irregular",
        }
    }

    pub fn parse(s: &str) -> Result<GlyphStyle> {
        match s {
            "blocky" => Ok(GlyphStyle::Blocky),
            "rounded" => Ok(GlyphStyle::Rounded),
            "slanted" => Ok(GlyphStyle::Slanted),
            "irregular" => Ok(GlyphStyle::Irregular),
            other => Err(Error::config(format!(
                "unknown glyph style '{other}' (expected blocky|rounded|slanted|irregular)"
            ))),
        }
    }
}

/// Per-printer noise signature. All parameters are non-negative; intensity
/// units refer to the page's bit depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrinterProfile {
    /// Stable identifier used as the class label.
    pub id: String,
    /// Profile RNG seed, mixed with the page seed.
    pub seed: u64,
    /// Std of additive Gaussian pixel noise.
    pub toner_sigma: f64,
    /// Ink dilation radius in pixels (fractional part blends one extra
    /// dilation step).
    pub dot_gain: f64,
    /// Peak darkening of the column-wise luminance modulation.
    pub banding_amplitude: f64,
    /// Period of the banding modulation in pixels (> 0 when the amplitude
    /// is).
    pub banding_period: f64,
    /// Std of the boundary perturbation; boundary pixels whose draw exceeds
    /// half a pixel flip between ink and background.
    pub edge_raggedness: f64,
    /// Mean ink level: the darkest ink is lifted from 0 to this value.
    pub base_darkness: f64,
}

impl PrinterProfile {
    /// Profile that leaves pages untouched.
    pub fn identity(id: impl Into<String>, seed: u64) -> Self {
        PrinterProfile {
            id: id.into(),
            seed,
            toner_sigma: 0.0,
            dot_gain: 0.0,
            banding_amplitude: 0.0,
            banding_period: 0.0,
            edge_raggedness: 0.0,
            base_darkness: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::config("printer profile id must not be empty"));
        }
        for (name, v) in [
            ("toner_sigma", self.toner_sigma),
            ("dot_gain", self.dot_gain),
            ("banding_amplitude", self.banding_amplitude),
            ("banding_period", self.banding_period),
            ("edge_raggedness", self.edge_raggedness),
            ("base_darkness", self.base_darkness),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::config(format!(
                    "profile '{}': {name} must be a non-negative finite number, got {v}",
                    self.id
                )));
            }
        }
        if self.banding_amplitude > 0.0 && self.banding_period <= 0.0 {
            return Err(Error::config(format!(
                "profile '{}': banding_amplitude > 0 needs banding_period > 0",
                self.id
            )));
        }
        Ok(())
    }
}

/// Four well-separated profiles (8-bit intensity units). Every parameter
/// axis differs between any two of them — in particular toner noise levels
/// are spaced by at least 6 intensity units and dilation radii by at least
/// 0.4 px — which keeps pages trivially distinguishable for the pipeline.
/// Profiles closer than roughly half these spacings start to overlap and
/// drive accuracy toward chance.
pub fn default_profiles() -> Vec<PrinterProfile> {
    vec![
        PrinterProfile {
            id: "printer-a".into(),
            seed: 101,
            toner_sigma: 2.0,
            dot_gain: 0.0,
            banding_amplitude: 0.0,
            banding_period: 0.0,
            edge_raggedness: 0.2,
            base_darkness: 10.0,
        },
        PrinterProfile {
            id: "printer-b".into(),
            seed: 202,
            toner_sigma: 8.0,
            dot_gain: 1.2,
            banding_amplitude: 10.0,
            banding_period: 24.0,
            edge_raggedness: 0.3,
            base_darkness: 30.0,
        },
        PrinterProfile {
            id: "printer-c".into(),
            seed: 303,
            toner_sigma: 14.0,
            dot_gain: 0.4,
            banding_amplitude: 18.0,
            banding_period: 9.0,
            edge_raggedness: 0.4,
            base_darkness: 50.0,
        },
        PrinterProfile {
            id: "printer-d".into(),
            seed: 404,
            toner_sigma: 20.0,
            dot_gain: 2.0,
            banding_amplitude: 6.0,
            banding_period: 48.0,
            edge_raggedness: 0.25,
            base_darkness: 70.0,
        },
    ]
}

/// Page geometry and content plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageSpec {
    pub width: usize,
    pub height: usize,
    pub glyph_count: usize,
    pub style: GlyphStyle,
    pub margin: usize,
    pub bit_depth: BitDepth,
}

impl PageSpec {
    /// A page just big enough for `count` glyphs on a near-square grid.
    pub fn for_glyphs(count: usize, style: GlyphStyle) -> PageSpec {
        let cols = (count as f64).sqrt().ceil().max(1.0) as usize;
        let rows = count.div_ceil(cols);
        PageSpec {
            width: 2 * 16 + cols * CELL_W,
            height: 2 * 16 + rows * CELL_H,
            glyph_count: count,
            style,
            margin: 16,
            bit_depth: BitDepth::Eight,
        }
    }

    fn grid(&self) -> (usize, usize) {
        let usable_w = self.width.saturating_sub(2 * self.margin);
        let usable_h = self.height.saturating_sub(2 * self.margin);
        (usable_w / CELL_W, usable_h / CELL_H)
    }
}

/// Ground truth of a rendered page.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageTruth {
    pub width: usize,
    pub height: usize,
    /// Tight ink boxes sorted by (y0, x0), matching component extraction
    /// order on the clean page.
    pub glyph_boxes: Vec<BoundingBox>,
    pub ink_mask: BinaryMask,
}

/// Serialized ground truth (the ink mask is omitted from files).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthFile {
    pub page_id: String,
    pub width: usize,
    pub height: usize,
    pub glyph_count: usize,
    pub boxes: Vec<BoundingBox>,
}

const SEED_SALT_LAYOUT: u64 = 0x1;
const SEED_SALT_NOISE: u64 = 0x2;

/// Collapse several seed components into one stream seed.
fn mix_seed(parts: &[u64]) -> u64 {
    let mut state = 0x9E37_79B9_7F4A_7C15u64;
    for &p in parts {
        let mut z = state ^ p.wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 30)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z = (z ^ (z >> 27)).wrapping_mul(0xFF51_AFD7_ED55_8CCD);
        state = z ^ (z >> 31);
    }
    state
}

/// Stamp a brush at integer center, clipped to the glyph box.
fn stamp(mask: &mut [bool], cx: i32, cy: i32, radius: i32, round: bool) {
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            if round && dx * dx + dy * dy > radius * radius {
                continue;
            }
            let x = cx + dx;
            let y = cy + dy;
            if (0..GLYPH_W as i32).contains(&x) && (0..GLYPH_H as i32).contains(&y) {
                mask[y as usize * GLYPH_W + x as usize] = true;
            }
        }
    }
}

/// Draw a straight stroke with dense sub-pixel stepping so consecutive
/// stamps always overlap (the glyph stays 8-connected).
fn stroke_line(
    mask: &mut [bool],
    from: (f64, f64),
    to: (f64, f64),
    radius: i32,
    round: bool,
) {
    let len = ((to.0 - from.0).powi(2) + (to.1 - from.1).powi(2)).sqrt();
    let steps = (len * 2.0).ceil().max(1.0) as usize;
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        let x = from.0 + t * (to.0 - from.0);
        let y = from.1 + t * (to.1 - from.1);
        stamp(mask, x.round() as i32, y.round() as i32, radius, round);
    }
}

/// Draw a curving stroke: unit steps along a heading that turns at a fixed
/// rate per step.
fn stroke_arc(
    mask: &mut [bool],
    start: (f64, f64),
    theta0: f64,
    curvature: f64,
    length: f64,
    radius: i32,
) -> (f64, f64) {
    let (mut x, mut y) = start;
    let mut theta = theta0;
    let steps = length.ceil().max(1.0) as usize;
    stamp(mask, x.round() as i32, y.round() as i32, radius, true);
    for _ in 0..steps {
        x = (x + theta.cos()).clamp(3.0, GLYPH_W as f64 - 4.0);
        y = (y + theta.sin()).clamp(3.0, GLYPH_H as f64 - 4.0);
        theta += curvature;
        stamp(mask, x.round() as i32, y.round() as i32, radius, true);
    }
    (x, y)
}

/// Clamp a stroke anchor into the glyph box with a safety border.
fn clamp_anchor(p: (f64, f64)) -> (f64, f64) {
    (
        p.0.clamp(3.0, GLYPH_W as f64 - 4.0),
        p.1.clamp(3.0, GLYPH_H as f64 - 4.0),
    )
}

/// Draw one glyph into a GLYPH_W × GLYPH_H mask. Strokes are chained end to
/// end (each starts where the previous ended), which guarantees a single
/// 8-connected ink region. Every style opens with a spanning "spine" so the
/// tight ink box stays comfortably inside the component size filter.
fn draw_glyph(style: GlyphStyle, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let mut mask = vec![false; GLYPH_W * GLYPH_H];
    let w = GLYPH_W as f64;
    let h = GLYPH_H as f64;
    match style {
        GlyphStyle::Blocky => {
            let x0 = rng.random_range(6.0..14.0);
            let top = rng.random_range(4.0..8.0);
            let bottom = rng.random_range(h - 9.0..h - 4.0);
            // Spine: a tall vertical and a wide horizontal bar.
            stroke_line(&mut mask, (x0, top), (x0, bottom), 2, false);
            let bar_y = rng.random_range(top..bottom);
            let mut cursor = (x0 + rng.random_range(22.0..26.0), bar_y);
            cursor = clamp_anchor(cursor);
            stroke_line(&mut mask, (x0, bar_y), cursor, 2, false);
            for _ in 0..rng.random_range(3..6) {
                let horizontal: bool = rng.random();
                let len = rng.random_range(10.0..24.0) * if rng.random() { 1.0 } else { -1.0 };
                let next = clamp_anchor(if horizontal {
                    (cursor.0 + len, cursor.1)
                } else {
                    (cursor.0, cursor.1 + len)
                });
                stroke_line(&mut mask, cursor, next, 2, false);
                cursor = next;
            }
        }
        GlyphStyle::Rounded => {
            // Spine: a long downward arc followed by a rightward arc.
            let start = (rng.random_range(6.0..12.0), rng.random_range(4.0..8.0));
            let mut cursor = stroke_arc(
                &mut mask,
                start,
                PI / 2.0 + rng.random_range(-0.2..0.2),
                rng.random_range(-0.04..0.04),
                h - 12.0,
                2,
            );
            cursor = stroke_arc(
                &mut mask,
                cursor,
                rng.random_range(-0.3..0.3),
                rng.random_range(-0.06..0.06),
                rng.random_range(20.0..28.0),
                2,
            );
            for _ in 0..rng.random_range(2..5) {
                cursor = stroke_arc(
                    &mut mask,
                    cursor,
                    rng.random_range(0.0..(2.0 * PI)),
                    rng.random_range(-0.12..0.12),
                    rng.random_range(10.0..26.0),
                    2,
                );
            }
        }
        GlyphStyle::Slanted => {
            // Spine: a long diagonal.
            let start = (rng.random_range(4.0..9.0), rng.random_range(4.0..8.0));
            let end = (
                start.0 + rng.random_range(26.0..32.0),
                start.1 + rng.random_range(38.0..42.0),
            );
            let end = clamp_anchor(end);
            stroke_line(&mut mask, start, end, 2, true);
            let mut cursor = end;
            for _ in 0..rng.random_range(3..6) {
                let dx: f64 =
                    rng.random_range(8.0..18.0) * if rng.random() { 1.0 } else { -1.0 };
                // Diagonal family: |dy| tracks |dx| within ±30%.
                let dy = dx.abs() * rng.random_range(0.7..1.3)
                    * if rng.random() { 1.0 } else { -1.0 };
                let next = clamp_anchor((cursor.0 + dx, cursor.1 + dy));
                stroke_line(&mut mask, cursor, next, 2, true);
                cursor = next;
            }
        }
        GlyphStyle::Irregular => {
            // Spine: a wobbly diagonal of chained short hops.
            let mut cursor = (rng.random_range(4.0..9.0), rng.random_range(4.0..8.0));
            let target = (w - rng.random_range(5.0..10.0), h - rng.random_range(5.0..10.0));
            let hops = 6;
            for s in 1..=hops {
                let t = s as f64 / hops as f64;
                let wob = rng.random_range(-4.0..4.0);
                let next = clamp_anchor((
                    cursor.0 * (1.0 - t) + target.0 * t + wob,
                    cursor.1 * (1.0 - t) + target.1 * t - wob,
                ));
                stroke_line(&mut mask, cursor, next, rng.random_range(1..=3), rng.random());
                cursor = next;
            }
            for _ in 0..rng.random_range(4..9) {
                let next = clamp_anchor((
                    cursor.0 + rng.random_range(-14.0..14.0),
                    cursor.1 + rng.random_range(-14.0..14.0),
                ));
                stroke_line(&mut mask, cursor, next, rng.random_range(1..=3), rng.random());
                cursor = next;
            }
        }
    }
    mask
}

/// Render a clean page of glyphs. Deterministic per (spec, seed).
pub fn render_page(spec: &PageSpec, seed: u64) -> Result<(GrayImage, PageTruth)> {
    if spec.glyph_count == 0 {
        return Err(Error::config("glyph_count must be at least 1"));
    }
    let (cols, rows) = spec.grid();
    let capacity = cols * rows;
    if capacity < spec.glyph_count {
        return Err(Error::config(format!(
            "page {}x{} holds at most {capacity} glyphs, {} requested",
            spec.width, spec.height, spec.glyph_count
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max = match spec.bit_depth {
        BitDepth::Eight => u8::MAX as u16,
        BitDepth::Sixteen => u16::MAX,
    };
    let mut page = GrayImage::filled(spec.width, spec.height, spec.bit_depth, max);
    let mut ink = BinaryMask::new(spec.width, spec.height);

    let mut cells: Vec<usize> = (0..capacity).collect();
    cells.shuffle(&mut rng);
    let mut chosen: Vec<usize> = cells.into_iter().take(spec.glyph_count).collect();
    chosen.sort_unstable();

    let mut boxes = Vec::with_capacity(spec.glyph_count);
    for cell in chosen {
        let cell_x = spec.margin + (cell % cols) * CELL_W;
        let cell_y = spec.margin + (cell / cols) * CELL_H;
        // Jitter ranges keep ink of adjacent cells at least 8 px apart.
        let off_x = cell_x + rng.random_range(4..=12);
        let off_y = cell_y + rng.random_range(4..=14);
        let glyph = draw_glyph(spec.style, &mut rng);

        let (mut x0, mut y0, mut x1, mut y1) = (GLYPH_W, GLYPH_H, 0usize, 0usize);
        for gy in 0..GLYPH_H {
            for gx in 0..GLYPH_W {
                if glyph[gy * GLYPH_W + gx] {
                    page.set(off_x + gx, off_y + gy, 0);
                    ink.set(off_x + gx, off_y + gy, true);
                    x0 = x0.min(gx);
                    y0 = y0.min(gy);
                    x1 = x1.max(gx);
                    y1 = y1.max(gy);
                }
            }
        }
        debug_assert!(x1 >= x0 && y1 >= y0, "glyph draw left no ink");
        boxes.push(BoundingBox {
            x0: off_x + x0,
            y0: off_y + y0,
            w: x1 - x0 + 1,
            h: y1 - y0 + 1,
        });
    }
    boxes.sort_by_key(|b| (b.y0, b.x0));

    Ok((
        page,
        PageTruth {
            width: spec.width,
            height: spec.height,
            glyph_boxes: boxes,
            ink_mask: ink,
        },
    ))
}

/// One 3×3 minimum filter pass (dark ink dilates by one pixel).
fn min3x3(samples: &[u16], w: usize, h: usize) -> Vec<u16> {
    let mut out = vec![0u16; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut best = u16::MAX;
            for dy in -1i32..=1 {
                for dx in -1i32..=1 {
                    let yy = (y as i32 + dy).clamp(0, h as i32 - 1) as usize;
                    let xx = (x as i32 + dx).clamp(0, w as i32 - 1) as usize;
                    best = best.min(samples[yy * w + xx]);
                }
            }
            out[y * w + x] = best;
        }
    }
    out
}

/// Degrade a clean page with a printer's signature. Stages run in a fixed
/// order — geometry first, photometry last, as in a physical print-then-scan
/// chain: ink dilation, edge raggedness, base ink level, banding, toner
/// noise, clamp. Deterministic per (profile, page_seed); the all-zero
/// profile returns the input unchanged.
pub fn apply_profile(clean: &GrayImage, profile: &PrinterProfile, page_seed: u64) -> GrayImage {
    let (w, h) = (clean.width(), clean.height());
    let max = clean.max_value();
    let mut seed_bytes = [0u8; 32];
    seed_bytes[..8].copy_from_slice(&profile.seed.to_le_bytes());
    seed_bytes[8..16].copy_from_slice(&page_seed.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(seed_bytes);

    // Ink dilation: whole passes plus a fractional blend of one more.
    let mut work: Vec<u16> = clean.samples().to_vec();
    let whole = profile.dot_gain.floor() as usize;
    let frac = profile.dot_gain - profile.dot_gain.floor();
    for _ in 0..whole {
        work = min3x3(&work, w, h);
    }
    let mut values: Vec<f64> = if frac > 0.0 {
        let next = min3x3(&work, w, h);
        work.iter()
            .zip(&next)
            .map(|(&a, &b)| (1.0 - frac) * a as f64 + frac * b as f64)
            .collect()
    } else {
        work.iter().map(|&v| v as f64).collect()
    };

    // Edge raggedness: every ink/background boundary pixel flips with the
    // probability mass of |N(0,σ)| beyond half a pixel. Flips are decided
    // against the pre-stage classification, then applied at once.
    if profile.edge_raggedness > 0.0 {
        let noise = Normal::new(0.0, profile.edge_raggedness).expect("validated sigma");
        let mid = max as f64 / 2.0;
        let is_ink = |v: f64| v < mid;
        let mut flips = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let center = is_ink(values[y * w + x]);
                let boundary = [(0i32, 1i32), (0, -1), (1, 0), (-1, 0)].iter().any(
                    |&(dy, dx)| {
                        let yy = (y as i32 + dy).clamp(0, h as i32 - 1) as usize;
                        let xx = (x as i32 + dx).clamp(0, w as i32 - 1) as usize;
                        is_ink(values[yy * w + xx]) != center
                    },
                );
                if boundary && noise.sample(&mut rng).abs() > 0.5 {
                    flips.push((y * w + x, if center { max as f64 } else { 0.0 }));
                }
            }
        }
        for (idx, v) in flips {
            values[idx] = v;
        }
    }

    // Base ink level: remap 0 → base_darkness, max → max.
    if profile.base_darkness > 0.0 {
        let scale = (max as f64 - profile.base_darkness) / max as f64;
        for v in &mut values {
            *v = profile.base_darkness + *v * scale;
        }
    }

    // Banding: column-periodic darkening.
    if profile.banding_amplitude > 0.0 && profile.banding_period > 0.0 {
        for y in 0..h {
            for x in 0..w {
                let dip = 0.5 + 0.5 * (2.0 * PI * x as f64 / profile.banding_period).sin();
                values[y * w + x] -= profile.banding_amplitude * dip;
            }
        }
    }

    // Toner noise.
    if profile.toner_sigma > 0.0 {
        let noise = Normal::new(0.0, profile.toner_sigma).expect("validated sigma");
        for v in &mut values {
            *v += noise.sample(&mut rng);
        }
    }

    let samples: Vec<u16> = values
        .iter()
        .map(|&v| v.round().clamp(0.0, max as f64) as u16)
        .collect();
    GrayImage::from_samples(w, h, clean.bit_depth(), samples).expect("same dimensions")
}

/// Sprinkle tiny dark specks onto the page background, at least 8 px away
/// from every glyph box — spurious marks the component filter must reject.
/// Returns how many were placed.
pub fn add_speckles(
    page: &mut GrayImage,
    truth: &PageTruth,
    count: usize,
    seed: u64,
) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (page.width(), page.height());
    let mut spots: Vec<(usize, usize)> = Vec::new();
    let mut attempts = 0;
    while spots.len() < count && attempts < count * 200 {
        attempts += 1;
        let x = rng.random_range(2..w.saturating_sub(3));
        let y = rng.random_range(2..h.saturating_sub(3));
        let near_glyph = truth.glyph_boxes.iter().any(|b| {
            x + 8 >= b.x0 && x < b.x0 + b.w + 8 && y + 8 >= b.y0 && y < b.y0 + b.h + 8
        });
        // Keep speckles apart so each stays its own component.
        let near_speckle = spots
            .iter()
            .any(|&(sx, sy)| x.abs_diff(sx) < 6 && y.abs_diff(sy) < 6);
        if near_glyph || near_speckle {
            continue;
        }
        let size = rng.random_range(1..=2);
        for dy in 0..size {
            for dx in 0..size {
                page.set(x + dx, y + dy, 0);
            }
        }
        spots.push((x, y));
    }
    spots.len()
}

/// Plan for a complete labeled corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub profiles: Vec<PrinterProfile>,
    pub pages_per_printer: usize,
    pub glyphs_per_page: usize,
    pub style: GlyphStyle,
    pub seed: u64,
    pub bit_depth: BitDepth,
}

impl CorpusSpec {
    pub fn new(
        profiles: Vec<PrinterProfile>,
        pages_per_printer: usize,
        glyphs_per_page: usize,
        style: GlyphStyle,
        seed: u64,
    ) -> Self {
        CorpusSpec {
            profiles,
            pages_per_printer,
            glyphs_per_page,
            style,
            seed,
            bit_depth: BitDepth::Eight,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.profiles.is_empty() {
            return Err(Error::config("corpus needs at least one printer profile"));
        }
        if self.pages_per_printer == 0 || self.glyphs_per_page == 0 {
            return Err(Error::config(
                "pages_per_printer and glyphs_per_page must be at least 1",
            ));
        }
        let mut ids = std::collections::HashSet::new();
        for p in &self.profiles {
            p.validate()?;
            if !ids.insert(&p.id) {
                return Err(Error::config(format!("duplicate profile id '{}'", p.id)));
            }
        }
        Ok(())
    }
}

/// A generated corpus on disk plus its in-memory ground truth.
#[derive(Debug)]
pub struct GeneratedCorpus {
    pub dir: PathBuf,
    pub manifest_path: PathBuf,
    pub entries: Vec<ManifestEntry>,
    /// Ground truth per page, aligned with `entries`.
    pub truths: Vec<PageTruth>,
}

/// Generate pages for every profile, write PNGs, per-page ground-truth JSON,
/// and a manifest. Pages are rendered and degraded in parallel; a given
/// [`CorpusSpec`] always produces identical output.
pub fn generate_corpus(spec: &CorpusSpec, out_dir: &Path) -> Result<GeneratedCorpus> {
    spec.validate()?;
    let pages_dir = out_dir.join("pages");
    let truth_dir = out_dir.join("truth");
    std::fs::create_dir_all(&pages_dir)?;
    std::fs::create_dir_all(&truth_dir)?;

    let mut page_spec = PageSpec::for_glyphs(spec.glyphs_per_page, spec.style);
    page_spec.bit_depth = spec.bit_depth;

    let jobs: Vec<(usize, usize)> = (0..spec.profiles.len())
        .flat_map(|p| (0..spec.pages_per_printer).map(move |g| (p, g)))
        .collect();

    let results: Vec<(ManifestEntry, PageTruth)> = jobs
        .par_iter()
        .map(|&(p_idx, pg_idx)| -> Result<(ManifestEntry, PageTruth)> {
            let profile = &spec.profiles[p_idx];
            let page_id = format!("{}-{}-{pg_idx:03}", profile.id, spec.style.as_str());
            let layout_seed =
                mix_seed(&[spec.seed, p_idx as u64, pg_idx as u64, SEED_SALT_LAYOUT]);
            let noise_seed =
                mix_seed(&[spec.seed, p_idx as u64, pg_idx as u64, SEED_SALT_NOISE]);
            let (clean, truth) = render_page(&page_spec, layout_seed)?;
            let printed = apply_profile(&clean, profile, noise_seed);

            let path = pages_dir.join(format!("{page_id}.png"));
            save_gray_image(&printed, &path)?;
            let truth_file = TruthFile {
                page_id: page_id.clone(),
                width: truth.width,
                height: truth.height,
                glyph_count: truth.glyph_boxes.len(),
                boxes: truth.glyph_boxes.clone(),
            };
            let truth_json = serde_json::to_string_pretty(&truth_file)
                .map_err(|e| Error::data(e.to_string()))?;
            std::fs::write(truth_dir.join(format!("{page_id}.json")), truth_json)?;

            Ok((
                ManifestEntry {
                    path,
                    printer_id: profile.id.clone(),
                    page_id,
                    font_tag: spec.style.as_str().to_string(),
                },
                truth,
            ))
        })
        .collect::<Result<_>>()?;

    let (entries, truths): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let manifest_path = out_dir.join("manifest.csv");
    write_manifest(&manifest_path, &entries, out_dir)?;
    Ok(GeneratedCorpus {
        dir: out_dir.to_path_buf(),
        manifest_path,
        entries,
        truths,
    })
}
