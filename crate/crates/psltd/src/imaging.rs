//! Page ingestion: grayscale page buffers, global Otsu binarization,
//! 8-connected component extraction, and spurious-component filtering.
//!
//! Coordinates follow image convention: `x` is the column, `y` the row,
//! origin top-left. Ink is dark, paper is bright, so binarization marks
//! samples at or below the Otsu threshold as foreground.

use std::path::Path;

use image::DynamicImage;
use log::warn;

use crate::config::{BitDepth, FilterPolicy};
use crate::error::{Error, Result};

/// Single-channel page or crop. Samples are stored as `u16` regardless of
/// bit depth; 8-bit images use values 0..=255.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    bit_depth: BitDepth,
    samples: Vec<u16>,
}

impl GrayImage {
    /// Image of constant value, typically `depth.max_value()` for blank paper.
    pub fn filled(width: usize, height: usize, bit_depth: BitDepth, value: u16) -> GrayImage {
        assert!(value <= bit_depth.max_value(), "sample exceeds bit depth");
        GrayImage {
            width,
            height,
            bit_depth,
            samples: vec![value; width * height],
        }
    }

    pub fn from_samples(
        width: usize,
        height: usize,
        bit_depth: BitDepth,
        samples: Vec<u16>,
    ) -> Result<GrayImage> {
        if samples.len() != width * height {
            return Err(Error::data(format!(
                "sample buffer holds {} values, expected {}x{}={}",
                samples.len(),
                width,
                height,
                width * height
            )));
        }
        if let Some(&bad) = samples.iter().find(|&&s| s > bit_depth.max_value()) {
            return Err(Error::data(format!(
                "sample {bad} exceeds {}-bit range",
                bit_depth.bits()
            )));
        }
        Ok(GrayImage {
            width,
            height,
            bit_depth,
            samples,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bit_depth(&self) -> BitDepth {
        self.bit_depth
    }

    pub fn samples(&self) -> &[u16] {
        &self.samples
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u16 {
        debug_assert!(x < self.width && y < self.height);
        self.samples[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u16) {
        debug_assert!(value <= self.bit_depth.max_value());
        self.samples[y * self.width + x] = value;
    }

    /// White level for this image's depth.
    pub fn max_value(&self) -> u16 {
        self.bit_depth.max_value()
    }

    /// Copy of the subregion described by `bbox`, which must lie inside the
    /// image.
    pub fn crop(&self, bbox: &BoundingBox) -> GrayImage {
        assert!(bbox.x0 + bbox.w <= self.width && bbox.y0 + bbox.h <= self.height);
        let mut samples = Vec::with_capacity(bbox.w * bbox.h);
        for y in bbox.y0..bbox.y0 + bbox.h {
            let row = &self.samples[y * self.width + bbox.x0..y * self.width + bbox.x0 + bbox.w];
            samples.extend_from_slice(row);
        }
        GrayImage {
            width: bbox.w,
            height: bbox.h,
            bit_depth: self.bit_depth,
            samples,
        }
    }
}

/// Foreground mask aligned with a page; `true` marks ink.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> BinaryMask {
        BinaryMask {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Axis-aligned box: top-left corner, width, height (pixels).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct BoundingBox {
    pub x0: usize,
    pub y0: usize,
    pub w: usize,
    pub h: usize,
}

/// One connected ink region: its position, pixel area, and a grayscale crop
/// taken from the original page (not the mask).
#[derive(Debug, Clone)]
pub struct Component {
    /// Dense index in reading order of bounding-box top-left corners
    /// (top-to-bottom, then left-to-right).
    pub ordinal: u32,
    pub bbox: BoundingBox,
    /// Foreground pixel count.
    pub area: usize,
    pub crop: GrayImage,
}

/// Otsu's threshold on the global histogram: the split maximizing
/// between-class variance, lowest threshold on ties. `None` when the image
/// has fewer than two distinct levels.
pub fn otsu_threshold(page: &GrayImage) -> Option<u16> {
    let levels = page.max_value() as usize + 1;
    let mut hist = vec![0u64; levels];
    for &s in page.samples() {
        hist[s as usize] += 1;
    }
    let n = page.samples().len() as f64;
    if n == 0.0 {
        return None;
    }
    let total_sum: f64 = hist
        .iter()
        .enumerate()
        .map(|(v, &c)| v as f64 * c as f64)
        .sum();

    let mut best: Option<(f64, usize)> = None;
    let mut cum_n = 0.0;
    let mut cum_sum = 0.0;
    // Threshold t splits samples into [0, t] (dark class) and [t+1, max].
    for (t, &count) in hist[..levels - 1].iter().enumerate() {
        cum_n += count as f64;
        cum_sum += t as f64 * count as f64;
        if cum_n == 0.0 {
            continue;
        }
        let rest_n = n - cum_n;
        if rest_n == 0.0 {
            break;
        }
        let mu0 = cum_sum / cum_n;
        let mu1 = (total_sum - cum_sum) / rest_n;
        let variance = cum_n * rest_n * (mu0 - mu1) * (mu0 - mu1);
        if best.is_none_or(|(v, _)| variance > v) {
            best = Some((variance, t));
        }
    }
    best.map(|(_, t)| t as u16)
}

/// Global binarization with ink (dark) as foreground. An image with a single
/// distinct level produces an all-background mask and a warning.
pub fn binarize(page: &GrayImage) -> BinaryMask {
    let mut mask = BinaryMask::new(page.width(), page.height());
    match otsu_threshold(page) {
        Some(t) => {
            for y in 0..page.height() {
                for x in 0..page.width() {
                    if page.get(x, y) <= t {
                        mask.set(x, y, true);
                    }
                }
            }
        }
        None => {
            warn!("page has a single intensity level; treating it as all background");
        }
    }
    mask
}

/// 8-connected foreground components, each carrying a grayscale crop of its
/// bounding box taken from `page`. Ordinals run top-to-bottom then
/// left-to-right over bounding-box corners.
pub fn extract_components(page: &GrayImage, mask: &BinaryMask) -> Vec<Component> {
    assert_eq!(
        (page.width(), page.height()),
        (mask.width(), mask.height()),
        "mask must match page dimensions"
    );
    let (w, h) = (mask.width(), mask.height());
    let mut visited = vec![false; w * h];
    let mut raw: Vec<(BoundingBox, usize)> = Vec::new();
    let mut stack: Vec<(usize, usize)> = Vec::new();

    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) || visited[y * w + x] {
                continue;
            }
            let (mut min_x, mut max_x, mut min_y, mut max_y) = (x, x, y, y);
            let mut area = 0usize;
            visited[y * w + x] = true;
            stack.push((x, y));
            while let Some((cx, cy)) = stack.pop() {
                area += 1;
                min_x = min_x.min(cx);
                max_x = max_x.max(cx);
                min_y = min_y.min(cy);
                max_y = max_y.max(cy);
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let nx = cx as i64 + dx;
                        let ny = cy as i64 + dy;
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        let (nx, ny) = (nx as usize, ny as usize);
                        if mask.get(nx, ny) && !visited[ny * w + nx] {
                            visited[ny * w + nx] = true;
                            stack.push((nx, ny));
                        }
                    }
                }
            }
            raw.push((
                BoundingBox {
                    x0: min_x,
                    y0: min_y,
                    w: max_x - min_x + 1,
                    h: max_y - min_y + 1,
                },
                area,
            ));
        }
    }

    // Reading order of box corners; discovery order breaks exact ties.
    raw.sort_by_key(|(bbox, _)| (bbox.y0, bbox.x0));
    raw.into_iter()
        .enumerate()
        .map(|(i, (bbox, area))| Component {
            ordinal: i as u32,
            bbox,
            area,
            crop: page.crop(&bbox),
        })
        .collect()
}

/// Drop spurious components: keep those whose area lies within
/// `[lo, hi] × median area` (inclusive), then apply the optional absolute
/// size bounds. Surviving components keep their relative order and receive
/// fresh dense ordinals.
pub fn filter_components(components: Vec<Component>, policy: &FilterPolicy) -> Vec<Component> {
    if components.is_empty() {
        return components;
    }
    let mut areas: Vec<usize> = components.iter().map(|c| c.area).collect();
    areas.sort_unstable();
    let median = if areas.len() % 2 == 1 {
        areas[areas.len() / 2] as f64
    } else {
        (areas[areas.len() / 2 - 1] as f64 + areas[areas.len() / 2] as f64) / 2.0
    };
    let lo = policy.area_lo_factor * median;
    let hi = policy.area_hi_factor * median;

    let mut kept: Vec<Component> = components
        .into_iter()
        .filter(|c| {
            let a = c.area as f64;
            if a < lo || a > hi {
                return false;
            }
            match &policy.size_bounds {
                Some(b) => {
                    c.bbox.w >= b.min_w
                        && c.bbox.w <= b.max_w
                        && c.bbox.h >= b.min_h
                        && c.bbox.h <= b.max_h
                }
                None => true,
            }
        })
        .collect();
    for (i, c) in kept.iter_mut().enumerate() {
        c.ordinal = i as u32;
    }
    kept
}

/// Load a PNG or PGM page. Grayscale 8- and 16-bit inputs load directly
/// (alpha, if present, is dropped); color inputs are rejected unless `luma`
/// requests BT.601 conversion.
pub fn load_gray_image(path: &Path, luma: bool) -> Result<GrayImage> {
    let img = image::open(path)
        .map_err(|e| Error::data(format!("cannot decode {}: {e}", path.display())))?;
    gray_from_dynamic(img, luma, path)
}

/// Write a grayscale image as PNG, preserving its bit depth.
pub fn save_gray_image(img: &GrayImage, path: &Path) -> Result<()> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let saved = match img.bit_depth() {
        BitDepth::Eight => {
            let raw: Vec<u8> = img.samples().iter().map(|&s| s as u8).collect();
            image::ImageBuffer::<image::Luma<u8>, _>::from_raw(w, h, raw)
                .expect("buffer length matches dimensions")
                .save(path)
        }
        BitDepth::Sixteen => {
            image::ImageBuffer::<image::Luma<u16>, _>::from_raw(w, h, img.samples().to_vec())
                .expect("buffer length matches dimensions")
                .save(path)
        }
    };
    saved.map_err(|e| Error::data(format!("cannot write {}: {e}", path.display())))
}

fn gray_from_dynamic(img: DynamicImage, luma: bool, path: &Path) -> Result<GrayImage> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(buf) => GrayImage::from_samples(
            w,
            h,
            BitDepth::Eight,
            buf.into_raw().into_iter().map(u16::from).collect(),
        ),
        DynamicImage::ImageLumaA8(buf) => GrayImage::from_samples(
            w,
            h,
            BitDepth::Eight,
            buf.into_raw().chunks_exact(2).map(|px| px[0] as u16).collect(),
        ),
        DynamicImage::ImageLuma16(buf) => {
            GrayImage::from_samples(w, h, BitDepth::Sixteen, buf.into_raw())
        }
        DynamicImage::ImageLumaA16(buf) => GrayImage::from_samples(
            w,
            h,
            BitDepth::Sixteen,
            buf.into_raw().chunks_exact(2).map(|px| px[0]).collect(),
        ),
        DynamicImage::ImageRgb8(_) | DynamicImage::ImageRgba8(_) if luma => {
            let rgb = img.to_rgb8();
            let samples = rgb
                .pixels()
                .map(|p| bt601(p.0[0] as f64, p.0[1] as f64, p.0[2] as f64, u8::MAX as f64))
                .collect();
            GrayImage::from_samples(w, h, BitDepth::Eight, samples)
        }
        DynamicImage::ImageRgb16(_) | DynamicImage::ImageRgba16(_) if luma => {
            let rgb = img.to_rgb16();
            let samples = rgb
                .pixels()
                .map(|p| bt601(p.0[0] as f64, p.0[1] as f64, p.0[2] as f64, u16::MAX as f64))
                .collect();
            GrayImage::from_samples(w, h, BitDepth::Sixteen, samples)
        }
        _ => Err(Error::data(format!(
            "{} is not grayscale; pass --luma to convert color pages",
            path.display()
        ))),
    }
}

fn bt601(r: f64, g: f64, b: f64, max: f64) -> u16 {
    (0.299 * r + 0.587 * g + 0.114 * b).round().min(max) as u16
}
