//! Two-orientation, three-scale Gabor filter bank and the derived
//! gradient-direction and gradient-magnitude maps.
//!
//! Kernels are real cosine-phase Gabors sampled on a `kernel_size²` grid
//! whose geometric center falls between taps. Each 0° kernel is
//! mean-subtracted and L2-normalized; the matching 90° kernel is its
//! transpose, which on this symmetric grid *is* the 90° cosine Gabor and
//! makes the transpose relation exact rather than accurate to rounding.
//!
//! Filtering subtracts the crop's integer minimum before convolving. The
//! kernels are DC-free, so this leaves responses unchanged mathematically,
//! and because the subtraction happens in exact integer arithmetic it makes
//! responses — and everything computed from them — bit-identical under a
//! constant intensity offset of the crop.

use crate::config::{GaborConfig, MagIndexMode};
use crate::error::Result;
use crate::imaging::GrayImage;

/// Number of wavelengths in the bank.
pub const SCALE_COUNT: usize = 3;

/// Carrier orientation of a kernel. 0° varies along columns (responds to
/// horizontally varying intensity); 90° varies along rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Deg0,
    Deg90,
}

/// Bank of six kernels: three scales by two orientations.
#[derive(Debug, Clone)]
pub struct GaborBank {
    size: usize,
    lambdas: [f64; SCALE_COUNT],
    sigmas: [f64; SCALE_COUNT],
    /// Indexed `scale * 2 + orientation`, row-major taps.
    kernels: Vec<Vec<f64>>,
}

impl GaborBank {
    pub fn build(cfg: &GaborConfig) -> Result<GaborBank> {
        cfg.validate()?;
        let size = cfg.kernel_size;
        let center = (size as f64 - 1.0) / 2.0;
        let mut lambdas = [0.0; SCALE_COUNT];
        let mut sigmas = [0.0; SCALE_COUNT];
        let mut kernels = Vec::with_capacity(SCALE_COUNT * 2);

        for m in 0..SCALE_COUNT {
            let lambda = cfg.lambda0 * cfg.ratio.powi(m as i32);
            let sigma = 0.56 * lambda;
            lambdas[m] = lambda;
            sigmas[m] = sigma;

            let mut taps = vec![0.0f64; size * size];
            for r in 0..size {
                for c in 0..size {
                    let u = r as f64 - center;
                    let v = c as f64 - center;
                    let envelope = (-(u * u + v * v) / (2.0 * sigma * sigma)).exp();
                    let carrier = (2.0 * std::f64::consts::PI * v / lambda).cos();
                    taps[r * size + c] = envelope * carrier;
                }
            }
            let mean = taps.iter().sum::<f64>() / taps.len() as f64;
            for t in &mut taps {
                *t -= mean;
            }
            let norm = taps.iter().map(|t| t * t).sum::<f64>().sqrt();
            for t in &mut taps {
                *t /= norm;
            }

            // 90° kernel: transpose of the finished 0° kernel.
            let mut transposed = vec![0.0f64; size * size];
            for r in 0..size {
                for c in 0..size {
                    transposed[c * size + r] = taps[r * size + c];
                }
            }
            kernels.push(taps);
            kernels.push(transposed);
        }

        Ok(GaborBank {
            size,
            lambdas,
            sigmas,
            kernels,
        })
    }

    pub fn kernel_size(&self) -> usize {
        self.size
    }

    pub fn lambda(&self, scale: usize) -> f64 {
        self.lambdas[scale]
    }

    pub fn sigma(&self, scale: usize) -> f64 {
        self.sigmas[scale]
    }

    /// Row-major taps of one kernel.
    pub fn kernel(&self, scale: usize, orientation: Orientation) -> &[f64] {
        &self.kernels[scale * 2 + orientation as usize]
    }
}

/// Responses of one crop to all six kernels, same dimensions as the crop.
#[derive(Debug, Clone)]
pub struct GaborField {
    width: usize,
    height: usize,
    /// Indexed `scale * 2 + orientation`, row-major.
    planes: Vec<Vec<f64>>,
}

/// Filter a crop with every kernel in the bank. Output planes match the crop
/// dimensions; borders use replicate padding. The kernel anchor is tap
/// `(size-1)/2`; kernels are point-symmetric, so this correlation equals
/// convolution anchored at the mirrored tap.
pub fn apply_bank(crop: &GrayImage, bank: &GaborBank) -> GaborField {
    let (w, h) = (crop.width(), crop.height());
    let min = crop.samples().iter().copied().min().unwrap_or(0);
    let centered: Vec<f64> = crop
        .samples()
        .iter()
        .map(|&s| (s - min) as f64)
        .collect();

    let size = bank.kernel_size();
    let anchor = (size - 1) / 2;
    let mut planes = Vec::with_capacity(SCALE_COUNT * 2);
    for kernel in &bank.kernels {
        let mut plane = vec![0.0f64; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for i in 0..size {
                    let sy = clamp_index(y as i64 + i as i64 - anchor as i64, h);
                    for j in 0..size {
                        let sx = clamp_index(x as i64 + j as i64 - anchor as i64, w);
                        acc += kernel[i * size + j] * centered[sy * w + sx];
                    }
                }
                plane[y * w + x] = acc;
            }
        }
        planes.push(plane);
    }
    GaborField { width: w, height: h, planes }
}

#[inline]
fn clamp_index(i: i64, len: usize) -> usize {
    i.clamp(0, len as i64 - 1) as usize
}

impl GaborField {
    /// Assemble a field from precomputed planes (row-major, one per
    /// scale-orientation pair in `scale * 2 + orientation` order).
    pub fn from_planes(width: usize, height: usize, planes: Vec<Vec<f64>>) -> GaborField {
        assert_eq!(planes.len(), SCALE_COUNT * 2, "expected six planes");
        assert!(planes.iter().all(|p| p.len() == width * height));
        GaborField { width, height, planes }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn plane(&self, scale: usize, orientation: Orientation) -> &[f64] {
        &self.planes[scale * 2 + orientation as usize]
    }

    #[inline]
    fn at(&self, scale: usize, orientation: Orientation, row: usize, col: usize) -> f64 {
        self.planes[scale * 2 + orientation as usize][row * self.width + col]
    }

    /// Local gradient direction at one pixel for scale `scale`, in
    /// `[0, π/2]`: the arctangent of the next-column response difference of
    /// the 0° plane over the previous-row response difference of the 90°
    /// plane (absolute values, indices replicate-clamped). A zero
    /// denominator yields π/2, or 0 when the numerator is also zero.
    pub fn gradient_direction(&self, scale: usize, row: usize, col: usize) -> f64 {
        let col_next = (col + 1).min(self.width - 1);
        let row_prev = row.saturating_sub(1);
        let num = (self.at(scale, Orientation::Deg0, row, col_next)
            - self.at(scale, Orientation::Deg0, row, col))
        .abs();
        let den = (self.at(scale, Orientation::Deg90, row_prev, col)
            - self.at(scale, Orientation::Deg90, row, col))
        .abs();
        // atan2 over non-negative arguments lands in [0, π/2] and encodes
        // both edge conventions: atan2(0,0)=0 and atan2(+,0)=π/2.
        num.atan2(den)
    }

    /// Local gradient magnitude at one pixel for scale `scale`: the
    /// Euclidean norm of one response difference per orientation. Which
    /// indices difference the 90° plane depends on `mode`; indices are
    /// replicate-clamped.
    pub fn gradient_magnitude(
        &self,
        scale: usize,
        row: usize,
        col: usize,
        mode: MagIndexMode,
    ) -> f64 {
        let col_next = (col + 1).min(self.width - 1);
        let d0 = (self.at(scale, Orientation::Deg0, row, col_next)
            - self.at(scale, Orientation::Deg0, row, col))
        .abs();
        let d90 = match mode {
            MagIndexMode::AsPrinted => (self.at(scale, Orientation::Deg90, row, col_next)
                - self.at(scale, Orientation::Deg90, row, col))
            .abs(),
            MagIndexMode::Symmetric => {
                let row_prev = row.saturating_sub(1);
                (self.at(scale, Orientation::Deg90, row_prev, col)
                    - self.at(scale, Orientation::Deg90, row, col))
                .abs()
            }
        };
        (d0 * d0 + d90 * d90).sqrt()
    }

    /// Full gradient-direction plane for one scale, row-major.
    pub fn direction_plane(&self, scale: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.width * self.height];
        for row in 0..self.height {
            for col in 0..self.width {
                out[row * self.width + col] = self.gradient_direction(scale, row, col);
            }
        }
        out
    }

    /// Full gradient-magnitude plane for one scale, row-major.
    pub fn magnitude_plane(&self, scale: usize, mode: MagIndexMode) -> Vec<f64> {
        let mut out = vec![0.0; self.width * self.height];
        for row in 0..self.height {
            for col in 0..self.width {
                out[row * self.width + col] = self.gradient_magnitude(scale, row, col, mode);
            }
        }
        out
    }
}
