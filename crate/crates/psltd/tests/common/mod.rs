//! Shared helpers for integration tests.
//!
//! The centerpiece is [`naive_psltd`], a deliberately plain, double-loop
//! re-implementation of the whole descriptor written directly from the
//! method's definition: its own filter taps, its own convolution, its own
//! pattern ranking. It shares no code with the library's descriptor path, so
//! agreement between the two is meaningful evidence of correctness.
//!
//! [`brute_force_dual`] is an exhaustive dual-objective solver for tiny SVM
//! problems: it enumerates every active-set assignment and solves the
//! resulting equality-constrained systems exactly.
#![allow(dead_code)]

use psltd::config::{BitDepth, DescriptorParams, GaborConfig, MagIndexMode};
use psltd::imaging::GrayImage;
use rand::Rng;

// ---------------------------------------------------------------------------
// Crop generators
// ---------------------------------------------------------------------------

/// Random crop with samples drawn uniformly from `[lo, hi]`.
pub fn random_crop_in<R: Rng>(
    rng: &mut R,
    width: usize,
    height: usize,
    depth: BitDepth,
    lo: u16,
    hi: u16,
) -> GrayImage {
    let samples: Vec<u16> = (0..width * height)
        .map(|_| rng.random_range(lo..=hi))
        .collect();
    GrayImage::from_samples(width, height, depth, samples).expect("valid synthetic crop")
}

/// Random crop over the full sample range of `depth`.
pub fn random_crop<R: Rng>(
    rng: &mut R,
    width: usize,
    height: usize,
    depth: BitDepth,
) -> GrayImage {
    random_crop_in(rng, width, height, depth, 0, depth.max_value())
}

// ---------------------------------------------------------------------------
// Naive descriptor oracle
// ---------------------------------------------------------------------------

const SCALES: usize = 3;
const SLOTS: usize = 5;
const LEVELS: usize = 5;
const BINS: usize = 59;
const HIST_LEN: usize = SLOTS * LEVELS * BINS; // 1475
const MAG_LEN: usize = SCALES * BINS; // 177

/// Eight neighbors, east first then counter-clockwise, as `(drow, dcol)`.
/// Neighbor `n` is bit `n` when a pattern is packed into a byte.
const NEIGHBORS: [(i32, i32); 8] = [
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Opposing neighbor pairs of the four oriented structures: horizontal,
/// vertical, 45° anti-diagonal, 135° main diagonal.
const PAIRS: [[(i32, i32); 2]; 4] = [
    [(0, -1), (0, 1)],
    [(-1, 0), (1, 0)],
    [(-1, 1), (1, -1)],
    [(-1, -1), (1, 1)],
];

/// Build the six filter kernels (scale-major, 0° before 90°) from first
/// principles: cosine-phase taps under a Gaussian envelope, mean-subtracted,
/// L2-normalized; the 90° kernel is the transpose of the finished 0° kernel.
fn oracle_kernels(cfg: &GaborConfig) -> Vec<Vec<f64>> {
    let size = cfg.kernel_size;
    let center = (size as f64 - 1.0) / 2.0;
    let mut kernels = Vec::new();
    for m in 0..SCALES {
        let lambda = cfg.lambda0 * cfg.ratio.powi(m as i32);
        let sigma = 0.56 * lambda;
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
        let mut sum = 0.0;
        for t in &taps {
            sum += *t;
        }
        let mean = sum / taps.len() as f64;
        for t in &mut taps {
            *t -= mean;
        }
        let mut sq = 0.0;
        for t in &taps {
            sq += *t * *t;
        }
        let norm = sq.sqrt();
        for t in &mut taps {
            *t /= norm;
        }
        let mut transposed = vec![0.0f64; size * size];
        for r in 0..size {
            for c in 0..size {
                transposed[c * size + r] = taps[r * size + c];
            }
        }
        kernels.push(taps);
        kernels.push(transposed);
    }
    kernels
}

fn clamp(i: i64, len: usize) -> usize {
    i.clamp(0, len as i64 - 1) as usize
}

/// Plain O(n·k²) correlation with replicate borders; anchor at tap
/// `(size-1)/2`.
fn oracle_convolve(values: &[f64], w: usize, h: usize, kernel: &[f64], size: usize) -> Vec<f64> {
    let anchor = (size - 1) / 2;
    let mut out = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for i in 0..size {
                let sy = clamp(y as i64 + i as i64 - anchor as i64, h);
                for j in 0..size {
                    let sx = clamp(x as i64 + j as i64 - anchor as i64, w);
                    acc += kernel[i * size + j] * values[sy * w + sx];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Circular bit-transition count of an 8-bit pattern, by walking the bits.
fn oracle_transitions(p: u8) -> u32 {
    let mut t = 0;
    for n in 0..8 {
        let a = (p >> n) & 1;
        let b = (p >> ((n + 1) % 8)) & 1;
        if a != b {
            t += 1;
        }
    }
    t
}

/// Map a pattern to its histogram bin: uniform patterns (≤ 2 transitions)
/// rank 0..58 in ascending byte order, everything else lands in bin 58.
fn oracle_rank_table() -> [usize; 256] {
    let mut table = [BINS - 1; 256];
    let mut rank = 0usize;
    for p in 0..=255u8 {
        if oracle_transitions(p) <= 2 {
            table[p as usize] = rank;
            rank += 1;
        }
    }
    assert_eq!(rank, 58, "uniform pattern count");
    table
}

/// Quantize one signed difference into five levels.
fn oracle_level(x: f64, t0: f64, t1: f64) -> u8 {
    if x.abs() < t0 {
        0
    } else if x >= t0 && x < t1 {
        1
    } else if x > -t1 && x <= -t0 {
        2
    } else if x >= t1 {
        3
    } else {
        4
    }
}

/// Five oriented-structure slots over an arbitrary value plane: slot `l < 4`
/// holds `l + 1` when both opposing neighbors sit within `threshold` of the
/// center, and slot 4 holds 1 exactly when no structure fired.
fn oracle_slots(plane: &[f64], w: usize, row: usize, col: usize, threshold: f64) -> [u8; SLOTS] {
    let center = plane[row * w + col];
    let mut slots = [0u8; SLOTS];
    for (l, pair) in PAIRS.iter().enumerate() {
        let mut both = true;
        for &(dr, dc) in pair {
            let r = (row as i32 + dr) as usize;
            let c = (col as i32 + dc) as usize;
            if (center - plane[r * w + c]).abs() > threshold {
                both = false;
            }
        }
        if both {
            slots[l] = l as u8 + 1;
        }
    }
    if slots[0] == 0 && slots[1] == 0 && slots[2] == 0 && slots[3] == 0 {
        slots[4] = 1;
    }
    slots
}

/// Count histogram: given the five per-level bins of a pixel and a gate
/// vector, add one to each firing (slot, level) sub-histogram.
fn oracle_accumulate(
    counts: &mut [u64],
    slots: &[u8; SLOTS],
    bins: &[usize; LEVELS],
    literal: bool,
) {
    for l in 0..SLOTS {
        let fire = if literal { slots[l] == 1 } else { slots[l] != 0 };
        if fire {
            for (k, &d) in bins.iter().enumerate() {
                counts[l * LEVELS * BINS + k * BINS + d] += 1;
            }
        }
    }
}

/// Normalize each 59-bin sub-histogram by its own total (zero support stays
/// all-zero).
fn oracle_normalize(counts: &[u64]) -> Vec<f64> {
    let mut out = vec![0.0f64; HIST_LEN];
    for l in 0..SLOTS {
        for k in 0..LEVELS {
            let base = l * LEVELS * BINS + k * BINS;
            let total: u64 = counts[base..base + BINS].iter().sum();
            if total > 0 {
                for d in 0..BINS {
                    out[base + d] = counts[base + d] as f64 / total as f64;
                }
            }
        }
    }
    out
}

/// The full descriptor of one crop, re-derived from scratch. Returns the
/// 10856-value concatenation in block order: intensity-gated histograms ‖
/// magnitude histograms ‖ per-scale gradient-gated histograms ‖ magnitude ‖
/// per-scale agreement-gated histograms ‖ magnitude.
pub fn naive_psltd(crop: &GrayImage, gabor: &GaborConfig, params: &DescriptorParams) -> Vec<f64> {
    let (w, h) = (crop.width(), crop.height());
    assert!(w >= 3 && h >= 3, "oracle needs an interior");

    // Offset anchor: subtract the crop minimum before filtering, so constant
    // offsets cancel exactly in integer arithmetic.
    let min = crop.samples().iter().copied().min().unwrap();
    let centered: Vec<f64> = crop.samples().iter().map(|&s| (s - min) as f64).collect();

    // Six response planes.
    let kernels = oracle_kernels(gabor);
    let planes: Vec<Vec<f64>> = kernels
        .iter()
        .map(|k| oracle_convolve(&centered, w, h, k, gabor.kernel_size))
        .collect();

    // Direction and magnitude planes per scale, replicate-clamped. The
    // direction is atan2 of the 0°-plane next-column difference over the
    // 90°-plane previous-row difference; the magnitude differences both use
    // the next column in as-printed mode.
    let mut dir = vec![vec![0.0f64; w * h]; SCALES];
    let mut mag = vec![vec![0.0f64; w * h]; SCALES];
    for m in 0..SCALES {
        let p0 = &planes[m * 2];
        let p90 = &planes[m * 2 + 1];
        for row in 0..h {
            for col in 0..w {
                let col_next = (col + 1).min(w - 1);
                let row_prev = row.saturating_sub(1);
                let num = (p0[row * w + col_next] - p0[row * w + col]).abs();
                let den = (p90[row_prev * w + col] - p90[row * w + col]).abs();
                dir[m][row * w + col] = num.atan2(den);

                let d0 = num;
                let d90 = match params.mag_index_mode {
                    MagIndexMode::AsPrinted => {
                        (p90[row * w + col_next] - p90[row * w + col]).abs()
                    }
                    MagIndexMode::Symmetric => {
                        (p90[row_prev * w + col] - p90[row * w + col]).abs()
                    }
                };
                mag[m][row * w + col] = (d0 * d0 + d90 * d90).sqrt();
            }
        }
    }

    let rank = oracle_rank_table();
    let g0 = params.g0_degrees * std::f64::consts::PI / 180.0;
    let intensity: Vec<f64> = crop.samples().iter().map(|&s| s as f64).collect();

    let mut f1_counts = vec![0u64; HIST_LEN];
    let mut f2_counts = vec![vec![0u64; HIST_LEN]; SCALES];
    let mut f3_counts = vec![vec![0u64; HIST_LEN]; SCALES];
    let mut mag_counts = vec![vec![0u64; BINS]; SCALES];
    let mut interior = 0u64;

    for row in 1..h - 1 {
        for col in 1..w - 1 {
            interior += 1;
            let center = crop.get(col, row) as i32;

            // Five one-hot patterns of the quantized neighbor differences.
            let mut masks = [0u8; LEVELS];
            for (n, &(dr, dc)) in NEIGHBORS.iter().enumerate() {
                let neighbor =
                    crop.get((col as i32 + dc) as usize, (row as i32 + dr) as usize) as i32;
                let level = oracle_level((center - neighbor) as f64, params.t0, params.t1);
                masks[level as usize] |= 1 << n;
            }
            let mut bins = [0usize; LEVELS];
            for k in 0..LEVELS {
                bins[k] = rank[masks[k] as usize];
            }

            let ei = oracle_slots(&intensity, w, row, col, params.t0);
            oracle_accumulate(&mut f1_counts, &ei, &bins, params.eq18_literal);

            for m in 0..SCALES {
                let eg = oracle_slots(&dir[m], w, row, col, g0);
                let mut e = [0u8; SLOTS];
                for l in 0..4 {
                    if ei[l] == eg[l] {
                        e[l] = ei[l];
                    }
                }
                if e[0] == 0 && e[1] == 0 && e[2] == 0 && e[3] == 0 {
                    e[4] = 1;
                }
                oracle_accumulate(&mut f2_counts[m], &eg, &bins, params.eq18_literal);
                oracle_accumulate(&mut f3_counts[m], &e, &bins, params.eq18_literal);

                // Magnitude rank pattern: bit n set when the neighbor's
                // magnitude is at least the center's (ties inclusive).
                let mc = mag[m][row * w + col];
                let mut pattern = 0u8;
                for (n, &(dr, dc)) in NEIGHBORS.iter().enumerate() {
                    let r = (row as i32 + dr) as usize;
                    let c = (col as i32 + dc) as usize;
                    if mag[m][r * w + c] >= mc {
                        pattern |= 1 << n;
                    }
                }
                mag_counts[m][rank[pattern as usize]] += 1;
            }
        }
    }

    let mut mag_block = Vec::with_capacity(MAG_LEN);
    for counts in &mag_counts {
        for &c in counts.iter() {
            mag_block.push(if interior > 0 {
                c as f64 / interior as f64
            } else {
                0.0
            });
        }
    }

    let mut out = Vec::with_capacity(HIST_LEN + MAG_LEN + 2 * (SCALES * HIST_LEN + MAG_LEN));
    out.extend(oracle_normalize(&f1_counts));
    out.extend_from_slice(&mag_block);
    for counts in &f2_counts {
        out.extend(oracle_normalize(counts));
    }
    out.extend_from_slice(&mag_block);
    for counts in &f3_counts {
        out.extend(oracle_normalize(counts));
    }
    out.extend_from_slice(&mag_block);
    assert_eq!(out.len(), 10856);
    out
}

// ---------------------------------------------------------------------------
// Brute-force SVM dual oracle
// ---------------------------------------------------------------------------

/// Solve `A x = b` by Gaussian elimination with partial pivoting. Returns
/// `None` when a pivot collapses (singular within tolerance).
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let mut pivot = col;
        for r in col + 1..n {
            if a[r][col].abs() > a[pivot][col].abs() {
                pivot = r;
            }
        }
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let pivot_row = a[col].clone();
        for r in col + 1..n {
            let f = a[r][col] / pivot_row[col];
            for (c, &p) in pivot_row.iter().enumerate().skip(col) {
                a[r][c] -= f * p;
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0f64; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for c in row + 1..n {
            s -= a[row][c] * x[c];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

/// Maximum of the soft-margin RBF dual
/// `W(α) = Σαᵢ − ½ ΣΣ αᵢαⱼ yᵢyⱼ K(xᵢ,xⱼ)` subject to `0 ≤ αᵢ ≤ C` and
/// `Σ αᵢyᵢ = 0`, found exhaustively.
///
/// Every variable is assigned to one of {at 0, at C, free}; for each of the
/// 3ⁿ assignments the stationarity conditions of the free block together
/// with the equality constraint form a linear system in `(α_free, λ)`.
/// Feasible solutions are scored and the best objective returned. The
/// optimum always lies at such a point, so the maximum over assignments is
/// the exact dual optimum (up to linear-solve rounding).
pub fn brute_force_dual(rows: &[Vec<f64>], y: &[f64], c: f64, gamma: f64) -> f64 {
    let n = rows.len();
    assert!(n <= 10, "exhaustive solver is exponential in points");
    let mut q = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in 0..n {
            let d2: f64 = rows[i]
                .iter()
                .zip(&rows[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            q[i][j] = y[i] * y[j] * (-gamma * d2).exp();
        }
    }

    let objective = |alpha: &[f64]| -> f64 {
        let mut w = 0.0;
        for i in 0..n {
            w += alpha[i];
            for j in 0..n {
                w -= 0.5 * alpha[i] * q[i][j] * alpha[j];
            }
        }
        w
    };

    let feas_tol = 1e-9;
    let mut best = f64::NEG_INFINITY;
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let mut state = vec![0u8; n]; // 0 → α=0, 1 → α=C, 2 → free
        let mut rem = code;
        for s in state.iter_mut() {
            *s = (rem % 3) as u8;
            rem /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut alpha = vec![0.0f64; n];
        for i in 0..n {
            if state[i] == 1 {
                alpha[i] = c;
            }
        }

        if free.is_empty() {
            let eq: f64 = (0..n).map(|i| alpha[i] * y[i]).sum();
            if eq.abs() <= feas_tol {
                best = best.max(objective(&alpha));
            }
            continue;
        }

        // Unknowns: α over the free set, then λ.
        // Stationarity for free i: Σ_f Q[i][f] α_f + λ yᵢ = 1 − Σ_bound Q[i][b] α_b
        // Constraint: Σ_f yᵢ α_f = − Σ_bound yᵢ α_b
        let k = free.len();
        let mut a = vec![vec![0.0f64; k + 1]; k + 1];
        let mut b = vec![0.0f64; k + 1];
        for (r, &i) in free.iter().enumerate() {
            for (cc, &j) in free.iter().enumerate() {
                a[r][cc] = q[i][j];
            }
            a[r][k] = y[i];
            let bound_sum: f64 = (0..n)
                .filter(|&j| state[j] == 1)
                .map(|j| q[i][j] * c)
                .sum();
            b[r] = 1.0 - bound_sum;
        }
        for (cc, &j) in free.iter().enumerate() {
            a[k][cc] = y[j];
        }
        a[k][k] = 0.0;
        b[k] = -(0..n)
            .filter(|&j| state[j] == 1)
            .map(|j| y[j] * c)
            .sum::<f64>();

        let Some(x) = solve_linear(a, b) else {
            continue;
        };
        let mut ok = true;
        for (idx, &i) in free.iter().enumerate() {
            let v = x[idx];
            if !(-feas_tol..=c + feas_tol).contains(&v) {
                ok = false;
                break;
            }
            alpha[i] = v.clamp(0.0, c);
        }
        if ok {
            best = best.max(objective(&alpha));
        }
    }
    assert!(best.is_finite(), "no feasible assignment found");
    best
}
