//! Run configuration: descriptor thresholds, filter bank geometry, component
//! filtering policy, pooling and grid-search settings.
//!
//! Configs load from TOML or JSON (selected by file extension). Every field
//! has a default; intensity thresholds default per bit depth. Two SHA-256
//! hashes derive from a config: [`RunConfig::feature_config_hash`] covers
//! exactly the fields that change extracted features (used to key descriptor
//! caches and to refuse predicting with a mismatched model), and
//! [`RunConfig::run_hash`] covers the whole semantic config (embedded in
//! output artifacts).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Sample depth of input pages. All samples are carried as `u16`; 8-bit
/// images use the low byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn bits(self) -> u8 {
        match self {
            BitDepth::Eight => 8,
            BitDepth::Sixteen => 16,
        }
    }

    /// Largest representable sample value (white).
    pub fn max_value(self) -> u16 {
        match self {
            BitDepth::Eight => u8::MAX as u16,
            BitDepth::Sixteen => u16::MAX,
        }
    }
}

impl TryFrom<u8> for BitDepth {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            8 => Ok(BitDepth::Eight),
            16 => Ok(BitDepth::Sixteen),
            other => Err(format!("bit_depth must be 8 or 16, got {other}")),
        }
    }
}

impl From<BitDepth> for u8 {
    fn from(d: BitDepth) -> u8 {
        d.bits()
    }
}

/// Which finite-difference indices feed the per-scale magnitude map.
///
/// `AsPrinted` uses the next-column difference on both filter orientations;
/// `Symmetric` uses the previous-row difference on the 90° plane, matching
/// the index pattern of the gradient-direction map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MagIndexMode {
    AsPrinted,
    Symmetric,
}

/// Thresholds and mode switches for the texture descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescriptorParams {
    /// Similarity threshold, intensity units. Differences strictly below it
    /// quantize to "similar"; also the orientation-structure threshold.
    pub t0: f64,
    /// Strong-difference threshold, intensity units. Must exceed `t0`.
    pub t1: f64,
    /// Gradient-direction similarity threshold in degrees; compared against
    /// direction differences after conversion to radians.
    pub g0_degrees: f64,
    pub mag_index_mode: MagIndexMode,
    /// When set, a histogram contribution is gated on the orientation slot
    /// holding the literal value 1 instead of being nonzero. Off by default;
    /// only the first and the "none" slot can ever fire in literal mode.
    pub eq18_literal: bool,
}

impl DescriptorParams {
    pub fn for_bit_depth(depth: BitDepth) -> Self {
        let (t0, t1) = match depth {
            BitDepth::Eight => (20.0, 80.0),
            BitDepth::Sixteen => (13000.0, 50000.0),
        };
        DescriptorParams {
            t0,
            t1,
            g0_degrees: 90.0,
            mag_index_mode: MagIndexMode::AsPrinted,
            eq18_literal: false,
        }
    }

    pub fn g0_radians(&self) -> f64 {
        self.g0_degrees * std::f64::consts::PI / 180.0
    }

    pub fn validate(&self) -> Result<()> {
        if !self.t0.is_finite() || self.t0 <= 0.0 {
            return Err(Error::config(format!("t0 must be positive, got {}", self.t0)));
        }
        if !self.t1.is_finite() || self.t1 <= self.t0 {
            return Err(Error::config(format!(
                "t1 must exceed t0 ({}), got {}",
                self.t0, self.t1
            )));
        }
        if !self.g0_degrees.is_finite() || self.g0_degrees <= 0.0 {
            return Err(Error::config(format!(
                "g0_degrees must be positive, got {}",
                self.g0_degrees
            )));
        }
        Ok(())
    }
}

/// Geometry of the two-orientation, three-scale filter bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaborConfig {
    /// Wavelength of the finest scale, pixels.
    pub lambda0: f64,
    /// Wavelength ratio between consecutive scales. Must exceed 1.
    pub ratio: f64,
    /// Kernel side length in taps.
    pub kernel_size: usize,
}

impl Default for GaborConfig {
    fn default() -> Self {
        GaborConfig {
            lambda0: 4.0,
            ratio: 2.0,
            kernel_size: 10,
        }
    }
}

impl GaborConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.lambda0.is_finite() || self.lambda0 <= 0.0 {
            return Err(Error::config(format!(
                "gabor.lambda0 must be positive, got {}",
                self.lambda0
            )));
        }
        if !self.ratio.is_finite() || self.ratio <= 1.0 {
            return Err(Error::config(format!(
                "gabor.ratio must exceed 1, got {}",
                self.ratio
            )));
        }
        if self.kernel_size < 2 {
            return Err(Error::config(format!(
                "gabor.kernel_size must be at least 2, got {}",
                self.kernel_size
            )));
        }
        Ok(())
    }
}

/// Optional absolute size gate for connected components, pixels. All bounds
/// inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizeBounds {
    pub min_w: usize,
    pub min_h: usize,
    pub max_w: usize,
    pub max_h: usize,
}

impl SizeBounds {
    /// Bounds used for scans of mixed-font documents at 600 dpi.
    pub fn mixed_font_default() -> Self {
        SizeBounds {
            min_w: 15,
            min_h: 30,
            max_w: 90,
            max_h: 100,
        }
    }
}

/// Spurious-component rejection policy: keep a component iff its pixel area
/// lies within `[area_lo_factor, area_hi_factor] × median area`, then apply
/// the optional absolute size bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterPolicy {
    pub area_lo_factor: f64,
    pub area_hi_factor: f64,
    pub size_bounds: Option<SizeBounds>,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        FilterPolicy {
            area_lo_factor: 0.5,
            area_hi_factor: 4.0,
            size_bounds: None,
        }
    }
}

impl FilterPolicy {
    pub fn validate(&self) -> Result<()> {
        if !self.area_lo_factor.is_finite() || self.area_lo_factor <= 0.0 || self.area_lo_factor > 1.0
        {
            return Err(Error::config(format!(
                "filter.area_lo_factor must be in (0, 1], got {}",
                self.area_lo_factor
            )));
        }
        if !self.area_hi_factor.is_finite() || self.area_hi_factor < 1.0 {
            return Err(Error::config(format!(
                "filter.area_hi_factor must be at least 1, got {}",
                self.area_hi_factor
            )));
        }
        if let Some(b) = &self.size_bounds {
            if b.min_w > b.max_w || b.min_h > b.max_h {
                return Err(Error::config(
                    "filter.size_bounds minimums must not exceed maximums".to_string(),
                ));
            }
        }
        Ok(())
    }
}

/// Pooling group size policy. `Fixed(0)` pools each whole page into one
/// vector; `Auto` resolves to whole-page pooling when every printer has at
/// least 20 training pages and to groups of 20 otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "NpRepr", into = "NpRepr")]
pub enum NpPolicy {
    Auto,
    Fixed(u32),
}

impl NpPolicy {
    /// Resolve against the smallest per-printer page count of a training set.
    pub fn resolve(self, min_pages_per_printer: usize) -> u32 {
        match self {
            NpPolicy::Fixed(n) => n,
            NpPolicy::Auto => {
                if min_pages_per_printer >= 20 {
                    0
                } else {
                    20
                }
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NpRepr {
    Word(String),
    Count(u32),
}

impl TryFrom<NpRepr> for NpPolicy {
    type Error = String;

    fn try_from(r: NpRepr) -> std::result::Result<Self, String> {
        match r {
            NpRepr::Count(n) => Ok(NpPolicy::Fixed(n)),
            NpRepr::Word(w) if w == "auto" => Ok(NpPolicy::Auto),
            NpRepr::Word(w) => Err(format!("np must be \"auto\" or an integer, got {w:?}")),
        }
    }
}

impl From<NpPolicy> for NpRepr {
    fn from(p: NpPolicy) -> NpRepr {
        match p {
            NpPolicy::Auto => NpRepr::Word("auto".to_string()),
            NpPolicy::Fixed(n) => NpRepr::Count(n),
        }
    }
}

/// Hyperparameter search space: powers of two swept in steps of 2 on the
/// exponent, with stratified cross-validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub log2_c_min: i32,
    pub log2_c_max: i32,
    pub log2_gamma_min: i32,
    pub log2_gamma_max: i32,
    pub folds: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            log2_c_min: -5,
            log2_c_max: 15,
            log2_gamma_min: -15,
            log2_gamma_max: 3,
            folds: 5,
        }
    }
}

impl GridSpec {
    pub fn c_values(&self) -> Vec<f64> {
        exp2_steps(self.log2_c_min, self.log2_c_max)
    }

    pub fn gamma_values(&self) -> Vec<f64> {
        exp2_steps(self.log2_gamma_min, self.log2_gamma_max)
    }

    pub fn validate(&self) -> Result<()> {
        for (lo, hi, name) in [
            (self.log2_c_min, self.log2_c_max, "log2_c"),
            (self.log2_gamma_min, self.log2_gamma_max, "log2_gamma"),
        ] {
            if lo > hi {
                return Err(Error::config(format!(
                    "grid.{name}: min {lo} exceeds max {hi}"
                )));
            }
        }
        if self.folds < 2 {
            return Err(Error::config(format!(
                "grid.folds must be at least 2, got {}",
                self.folds
            )));
        }
        Ok(())
    }
}

fn exp2_steps(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).step_by(2).map(|e| (e as f64).exp2()).collect()
}

/// Page-ingestion options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractOptions {
    /// Abort extraction when more than this fraction of manifest pages fail
    /// to load or process.
    pub max_skip_fraction: f64,
    /// Convert color inputs to grayscale with BT.601 luma weights instead of
    /// rejecting them.
    pub luma: bool,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            max_skip_fraction: 0.1,
            luma: false,
        }
    }
}

impl ExtractOptions {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.max_skip_fraction) {
            return Err(Error::config(format!(
                "extract.max_skip_fraction must be in [0, 1], got {}",
                self.max_skip_fraction
            )));
        }
        Ok(())
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub bit_depth: BitDepth,
    pub seed: u64,
    /// Worker thread count; 0 uses all available cores.
    pub jobs: u32,
    pub descriptor: DescriptorParams,
    pub gabor: GaborConfig,
    pub filter: FilterPolicy,
    pub np: NpPolicy,
    pub grid: GridSpec,
    pub extract: ExtractOptions,
    /// Directory for cached per-component descriptors; `None` disables
    /// caching. The CLI fills this from `PSLTD_CACHE_DIR` when unset.
    pub cache_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::for_bit_depth(BitDepth::Eight)
    }
}

impl RunConfig {
    pub fn for_bit_depth(depth: BitDepth) -> Self {
        RunConfig {
            bit_depth: depth,
            seed: 42,
            jobs: 0,
            descriptor: DescriptorParams::for_bit_depth(depth),
            gabor: GaborConfig::default(),
            // The full pipeline gates component size by default: noise can
            // produce satellite specks that must not reach the descriptor.
            filter: FilterPolicy {
                size_bounds: Some(SizeBounds::mixed_font_default()),
                ..FilterPolicy::default()
            },
            np: NpPolicy::Auto,
            grid: GridSpec::default(),
            extract: ExtractOptions::default(),
            cache_dir: None,
        }
    }

    /// Load from a `.toml` or `.json` file. Omitted fields take defaults;
    /// omitted intensity thresholds take the per-bit-depth defaults.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("")
            .to_ascii_lowercase();
        let file: ConfigFile = match ext.as_str() {
            "toml" => toml::from_str(&text)
                .map_err(|e| Error::config(format!("{}: {e}", path.display())))?,
            "json" => serde_json::from_str(&text)
                .map_err(|e| Error::config(format!("{}: {e}", path.display())))?,
            other => {
                return Err(Error::config(format!(
                    "unsupported config extension {other:?} (use .toml or .json)"
                )))
            }
        };
        let cfg = file.resolve()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.descriptor.validate()?;
        self.gabor.validate()?;
        self.filter.validate()?;
        self.grid.validate()?;
        self.extract.validate()?;
        Ok(())
    }

    /// Hash of exactly the fields that determine extracted feature values.
    /// Keys descriptor caches and guards model/feature compatibility.
    pub fn feature_config_hash(&self) -> String {
        #[derive(Serialize)]
        struct FeatureView<'a> {
            bit_depth: u8,
            descriptor: &'a DescriptorParams,
            gabor: &'a GaborConfig,
            filter: &'a FilterPolicy,
            luma: bool,
        }
        hash_json(&FeatureView {
            bit_depth: self.bit_depth.bits(),
            descriptor: &self.descriptor,
            gabor: &self.gabor,
            filter: &self.filter,
            luma: self.extract.luma,
        })
    }

    /// Hash of the whole semantic configuration (everything except machine
    /// placement: jobs and cache location).
    pub fn run_hash(&self) -> String {
        #[derive(Serialize)]
        struct RunView<'a> {
            bit_depth: u8,
            seed: u64,
            descriptor: &'a DescriptorParams,
            gabor: &'a GaborConfig,
            filter: &'a FilterPolicy,
            np: &'a NpPolicy,
            grid: &'a GridSpec,
            extract: &'a ExtractOptions,
        }
        hash_json(&RunView {
            bit_depth: self.bit_depth.bits(),
            seed: self.seed,
            descriptor: &self.descriptor,
            gabor: &self.gabor,
            filter: &self.filter,
            np: &self.np,
            grid: &self.grid,
            extract: &self.extract,
        })
    }
}

fn hash_json<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config serialization cannot fail");
    let digest = Sha256::digest(&json);
    let mut out = String::with_capacity(64);
    for byte in digest {
        use std::fmt::Write;
        write!(out, "{byte:02x}").expect("writing to String cannot fail");
    }
    out
}

/// On-disk form: everything optional so partial configs work and intensity
/// thresholds can default per bit depth.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ConfigFile {
    bit_depth: Option<u8>,
    seed: Option<u64>,
    jobs: Option<u32>,
    descriptor: DescriptorFile,
    gabor: Option<GaborConfig>,
    filter: Option<FilterPolicy>,
    np: Option<NpPolicy>,
    grid: Option<GridSpec>,
    extract: Option<ExtractOptions>,
    cache_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct DescriptorFile {
    t0: Option<f64>,
    t1: Option<f64>,
    g0_degrees: Option<f64>,
    mag_index_mode: Option<MagIndexMode>,
    eq18_literal: Option<bool>,
}

impl ConfigFile {
    fn resolve(self) -> Result<RunConfig> {
        let depth = match self.bit_depth {
            None | Some(8) => BitDepth::Eight,
            Some(16) => BitDepth::Sixteen,
            Some(other) => {
                return Err(Error::config(format!(
                    "bit_depth must be 8 or 16, got {other}"
                )))
            }
        };
        let mut cfg = RunConfig::for_bit_depth(depth);
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(j) = self.jobs {
            cfg.jobs = j;
        }
        let d = self.descriptor;
        if let Some(v) = d.t0 {
            cfg.descriptor.t0 = v;
        }
        if let Some(v) = d.t1 {
            cfg.descriptor.t1 = v;
        }
        if let Some(v) = d.g0_degrees {
            cfg.descriptor.g0_degrees = v;
        }
        if let Some(v) = d.mag_index_mode {
            cfg.descriptor.mag_index_mode = v;
        }
        if let Some(v) = d.eq18_literal {
            cfg.descriptor.eq18_literal = v;
        }
        if let Some(g) = self.gabor {
            cfg.gabor = g;
        }
        if let Some(f) = self.filter {
            cfg.filter = f;
        }
        if let Some(n) = self.np {
            cfg.np = n;
        }
        if let Some(g) = self.grid {
            cfg.grid = g;
        }
        if let Some(e) = self.extract {
            cfg.extract = e;
        }
        cfg.cache_dir = self.cache_dir;
        Ok(cfg)
    }
}
