//! Block orientation fields and their feature encodings.
//!
//! Angles follow image conventions: `x` grows to the right, `y` grows
//! downward, and an orientation `θ ∈ [0, π)` is the direction of the ridge
//! tangent measured from the `+x` axis towards `+y`. Horizontal ridges have
//! `θ = 0`.

mod field_io;
mod pgm;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use field_io::{parse_field, write_field, FieldParseError};
pub use pgm::{load_pgm, write_pgm, PgmError};

/// Default block side in pixels.
pub const DEFAULT_BLOCK: usize = 20;
/// Blocks whose gradient coherence falls below this are marked invalid.
pub const COHERENCE_THRESHOLD: f64 = 0.1;
const COHERENCE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrientationError {
    #[error("image is {width}x{height} but must be at least {block}x{block}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        block: usize,
    },
    #[error("block size must be positive")]
    ZeroBlock,
    #[error("image buffer has {len} pixels, expected {width}x{height}")]
    PixelCount {
        width: usize,
        height: usize,
        len: usize,
    },
    #[error("field shape {rows}x{cols} does not match {len} values")]
    FieldShape { rows: usize, cols: usize, len: usize },
    #[error("angle {0} is not finite")]
    NonFiniteAngle(f64),
    #[error("feature vector length {len} does not match {rows}x{cols} double-angle layout")]
    FeatureLength { len: usize, rows: usize, cols: usize },
    #[error("unknown encoding scheme {0:?} (expected f1..f6)")]
    UnknownScheme(String),
}

/// 8-bit grayscale image stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, OrientationError> {
        if width == 0 || height == 0 || width * height != pixels.len() {
            return Err(OrientationError::PixelCount {
                width,
                height,
                len: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image by sampling `f(x, y)`, rounding and clamping to `0..=255`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y).round().clamp(0.0, 255.0) as u8);
            }
        }
        Self::new(width, height, pixels).expect("positive dimensions")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    fn at(&self, x: usize, y: usize) -> f64 {
        f64::from(self.pixels[y * self.width + x])
    }
}

/// Reduces any finite angle into `[0, π)`.
pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(PI);
    // rem_euclid can round up to exactly π for tiny negative inputs.
    if r >= PI {
        0.0
    } else {
        r
    }
}

/// Smallest distance between two orientations on the π-periodic circle.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

/// Grid of ridge orientations with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientationField {
    rows: usize,
    cols: usize,
    angles: Vec<f64>,
    valid: Vec<bool>,
}

impl OrientationField {
    /// Builds a field, reducing every angle into `[0, π)`.
    pub fn new(
        rows: usize,
        cols: usize,
        angles: Vec<f64>,
        valid: Vec<bool>,
    ) -> Result<Self, OrientationError> {
        if rows == 0 || cols == 0 || angles.len() != rows * cols || valid.len() != angles.len() {
            return Err(OrientationError::FieldShape {
                rows,
                cols,
                len: angles.len(),
            });
        }
        let mut angles = angles;
        for a in &mut angles {
            if !a.is_finite() {
                return Err(OrientationError::NonFiniteAngle(*a));
            }
            *a = normalize_angle(*a);
        }
        Ok(Self {
            rows,
            cols,
            angles,
            valid,
        })
    }

    /// A field with every cell valid.
    pub fn all_valid(rows: usize, cols: usize, angles: Vec<f64>) -> Result<Self, OrientationError> {
        let n = angles.len();
        Self::new(rows, cols, angles, vec![true; n])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn angle(&self, row: usize, col: usize) -> f64 {
        self.angles[row * self.cols + col]
    }

    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.valid[row * self.cols + col]
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Mean angular distance to `other` over cells valid in both, in radians.
    /// Returns `None` when the shapes differ or no cell is valid in both.
    pub fn mean_angular_error(&self, other: &OrientationField) -> Option<f64> {
        if self.rows != other.rows || self.cols != other.cols {
            return None;
        }
        let mut sum = 0.0;
        let mut n = 0usize;
        for i in 0..self.len() {
            if self.valid[i] && other.valid[i] {
                sum += angular_distance(self.angles[i], other.angles[i]);
                n += 1;
            }
        }
        (n > 0).then(|| sum / n as f64)
    }
}

/// Flattened double-angle feature: all `sin 2θ` entries, then all `cos 2θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// Central difference in the interior, one-sided at the border.
#[inline]
fn diff(lo: f64, mid: f64, hi: f64, at_start: bool, at_end: bool) -> f64 {
    match (at_start, at_end) {
        (true, true) => 0.0,
        (true, false) => hi - mid,
        (false, true) => mid - lo,
        (false, false) => 0.5 * (hi - lo),
    }
}

/// Per-pixel `(gx, gy)` over the whole image.
fn gradients(img: &GrayImage) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = (img.width, img.height);
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let c = img.at(x, y);
            let left = if x > 0 { img.at(x - 1, y) } else { c };
            let right = if x + 1 < w { img.at(x + 1, y) } else { c };
            let up = if y > 0 { img.at(x, y - 1) } else { c };
            let down = if y + 1 < h { img.at(x, y + 1) } else { c };
            gx[y * w + x] = diff(left, c, right, x == 0, x + 1 == w);
            gy[y * w + x] = diff(up, c, down, y == 0, y + 1 == h);
        }
    }
    (gx, gy)
}

/// Estimates one ridge orientation per non-overlapping `block × block` tile.
///
/// Each dimension is center-cropped to the largest multiple of `block`
/// (512 → 500 for the default block), so the output grid is
/// `⌊dim / block⌋` in each direction. Gradients are taken on the full image
/// before cropping.
pub fn block_orientation(img: &GrayImage, block: usize) -> Result<OrientationField, OrientationError> {
    if block == 0 {
        return Err(OrientationError::ZeroBlock);
    }
    if img.width < block || img.height < block {
        return Err(OrientationError::ImageTooSmall {
            width: img.width,
            height: img.height,
            block,
        });
    }
    let cols = img.width / block;
    let rows = img.height / block;
    let x0 = (img.width - cols * block) / 2;
    let y0 = (img.height - rows * block) / 2;
    let (gx, gy) = gradients(img);

    let mut angles = Vec::with_capacity(rows * cols);
    let mut valid = Vec::with_capacity(rows * cols);
    for br in 0..rows {
        for bc in 0..cols {
            let (mut vxx_yy, mut vxy2, mut energy) = (0.0, 0.0, 0.0);
            for y in y0 + br * block..y0 + (br + 1) * block {
                let row = y * img.width;
                for x in x0 + bc * block..x0 + (bc + 1) * block {
                    let (a, b) = (gx[row + x], gy[row + x]);
                    vxx_yy += a * a - b * b;
                    vxy2 += 2.0 * a * b;
                    energy += a * a + b * b;
                }
            }
            let coherence = vxx_yy.hypot(vxy2) / (energy + COHERENCE_EPS);
            angles.push(normalize_angle(0.5 * vxy2.atan2(vxx_yy) + PI / 2.0));
            valid.push(coherence >= COHERENCE_THRESHOLD);
        }
    }
    OrientationField::new(rows, cols, angles, valid)
}

/// Double-angle encoding; invalid cells encode as `(0, 0)`.
pub fn encode_features(field: &OrientationField) -> FeatureVector {
    let n = field.len();
    let mut values = vec![0.0; 2 * n];
    for (i, (&a, &ok)) in field.angles.iter().zip(&field.valid).enumerate() {
        if ok {
            let (s, c) = (2.0 * a).sin_cos();
            values[i] = s;
            values[n + i] = c;
        }
    }
    FeatureVector { values }
}

/// Inverse of [`encode_features`]: recovers `θ = ½·atan2(s, c)` per cell.
///
/// Cells whose `(s, c)` pair has vanishing magnitude are marked invalid.
pub fn decode_features(
    features: &[f64],
    rows: usize,
    cols: usize,
) -> Result<OrientationField, OrientationError> {
    let n = rows * cols;
    if n == 0 || features.len() != 2 * n {
        return Err(OrientationError::FeatureLength {
            len: features.len(),
            rows,
            cols,
        });
    }
    let (sin, cos) = features.split_at(n);
    let angles = sin
        .iter()
        .zip(cos)
        .map(|(&s, &c)| normalize_angle(0.5 * s.atan2(c)))
        .collect();
    let valid = sin.iter().zip(cos).map(|(&s, &c)| s.hypot(c) > 1e-9).collect();
    OrientationField::new(rows, cols, angles, valid)
}

/// Alternative per-cell encodings compared in the feature-selection study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Encoding {
    /// `θ/π`
    F1,
    /// `sin 2θ`
    F2,
    /// `cos 2θ`
    F3,
    /// `(sin 2θ, θ/π)`
    F4,
    /// `(cos 2θ, θ/π)`
    F5,
    /// `(sin 2θ, cos 2θ)`
    F6,
}

#[derive(Debug, Clone, Copy)]
enum Component {
    Theta,
    Sin,
    Cos,
}

impl Component {
    fn eval(self, angle: f64) -> f64 {
        match self {
            Component::Theta => angle / PI,
            Component::Sin => (2.0 * angle).sin(),
            Component::Cos => (2.0 * angle).cos(),
        }
    }
}

impl Encoding {
    pub const ALL: [Encoding; 6] = [
        Encoding::F1,
        Encoding::F2,
        Encoding::F3,
        Encoding::F4,
        Encoding::F5,
        Encoding::F6,
    ];

    fn components(self) -> &'static [Component] {
        use Component::*;
        match self {
            Encoding::F1 => &[Theta],
            Encoding::F2 => &[Sin],
            Encoding::F3 => &[Cos],
            Encoding::F4 => &[Sin, Theta],
            Encoding::F5 => &[Cos, Theta],
            Encoding::F6 => &[Sin, Cos],
        }
    }

    /// Number of values per cell.
    pub fn width(self) -> usize {
        self.components().len()
    }

    pub fn name(self) -> &'static str {
        match self {
            Encoding::F1 => "f1",
            Encoding::F2 => "f2",
            Encoding::F3 => "f3",
            Encoding::F4 => "f4",
            Encoding::F5 => "f5",
            Encoding::F6 => "f6",
        }
    }

    /// The per-cell feature tuple for one angle.
    pub fn cell_values(self, angle: f64) -> impl Iterator<Item = f64> {
        self.components().iter().map(move |c| c.eval(angle))
    }
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Encoding {
    type Err = OrientationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Encoding::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| OrientationError::UnknownScheme(s.to_string()))
    }
}

/// Encodes a field under one of the alternative schemes, one plane per
/// component. Invalid cells contribute zeros in every plane.
pub fn encode_alternative(field: &OrientationField, scheme: Encoding) -> FeatureVector {
    let n = field.len();
    let comps = scheme.components();
    let mut values = vec![0.0; comps.len() * n];
    for (plane, comp) in comps.iter().enumerate() {
        for i in 0..n {
            if field.valid[i] {
                values[plane * n + i] = comp.eval(field.angles[i]);
            }
        }
    }
    FeatureVector { values }
}
