//! Image grid, regions of interest and window geometry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default axial (depth) pixel size in micrometers.
pub const DEFAULT_AXIAL_UM: f64 = 10.0;
/// Default lateral pixel size in micrometers.
pub const DEFAULT_LATERAL_UM: f64 = 7.5;

/// A B-scan: row-major grid of nonnegative linear intensities.
///
/// Row index is depth (one row per axial sample), column index is the A-line.
#[derive(Debug, Clone, PartialEq)]
pub struct Image<T: Scalar> {
    rows: usize,
    cols: usize,
    pixels: Vec<T>,
    axial_um: f64,
    lateral_um: f64,
}

impl<T: Scalar> Image<T> {
    /// Build an image with default pixel spacing, validating every invariant.
    pub fn new(rows: usize, cols: usize, pixels: Vec<T>) -> Result<Self> {
        Self::with_spacing(rows, cols, pixels, DEFAULT_AXIAL_UM, DEFAULT_LATERAL_UM)
    }

    pub fn with_spacing(
        rows: usize,
        cols: usize,
        pixels: Vec<T>,
        axial_um: f64,
        lateral_um: f64,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidImage(format!(
                "image must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if pixels.len() != rows * cols {
            return Err(Error::InvalidImage(format!(
                "{rows}x{cols} image needs {} pixels, got {}",
                rows * cols,
                pixels.len()
            )));
        }
        if let Some(i) = pixels.iter().position(|p| !p.is_finite() || *p < T::zero()) {
            return Err(Error::InvalidImage(format!(
                "pixel {} ({}, {}) is {} (must be finite and >= 0)",
                i,
                i / cols,
                i % cols,
                pixels[i]
            )));
        }
        if !(axial_um.is_finite() && axial_um > 0.0) {
            return Err(Error::InvalidImage(format!(
                "axial pixel size must be > 0, got {axial_um}"
            )));
        }
        if !(lateral_um.is_finite() && lateral_um > 0.0) {
            return Err(Error::InvalidImage(format!(
                "lateral pixel size must be > 0, got {lateral_um}"
            )));
        }
        Ok(Self {
            rows,
            cols,
            pixels,
            axial_um,
            lateral_um,
        })
    }

    /// Build from a per-pixel function of `(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut pixels = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                pixels.push(f(r, c));
            }
        }
        Self::new(rows, cols, pixels)
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Result<Self> {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    /// Construct from values produced by a kernel that already guarantees the
    /// invariants (finite, nonnegative). Tiny negative rounding residue is
    /// clamped to zero.
    pub(crate) fn from_kernel(like: &Image<T>, pixels: Vec<T>) -> Self {
        debug_assert_eq!(pixels.len(), like.len());
        let pixels = pixels
            .into_iter()
            .map(|p| if p < T::zero() { T::zero() } else { p })
            .collect();
        Self {
            rows: like.rows,
            cols: like.cols,
            pixels,
            axial_um: like.axial_um,
            lateral_um: like.lateral_um,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[T] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<T> {
        self.pixels
    }

    /// Axial pixel size (depth per row) in micrometers.
    pub fn axial_um(&self) -> f64 {
        self.axial_um
    }

    pub fn lateral_um(&self) -> f64 {
        self.lateral_um
    }

    pub fn set_spacing(&mut self, axial_um: f64, lateral_um: f64) -> Result<()> {
        if !(axial_um.is_finite() && axial_um > 0.0 && lateral_um.is_finite() && lateral_um > 0.0) {
            return Err(Error::InvalidImage(format!(
                "pixel sizes must be > 0, got axial {axial_um}, lateral {lateral_um}"
            )));
        }
        self.axial_um = axial_um;
        self.lateral_um = lateral_um;
        Ok(())
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.pixels[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[T] {
        &self.pixels[row * self.cols..(row + 1) * self.cols]
    }

    pub fn max_value(&self) -> T {
        self.pixels.iter().copied().fold(T::zero(), T::max)
    }

    /// Pixel values widened to `f64`.
    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.pixels.iter().map(|p| p.wide()).collect()
    }

    /// Convert the pixel storage type.
    pub fn cast<U: Scalar>(&self) -> Image<U> {
        Image {
            rows: self.rows,
            cols: self.cols,
            pixels: self.pixels.iter().map(|p| U::narrow(p.wide())).collect(),
            axial_um: self.axial_um,
            lateral_um: self.lateral_um,
        }
    }

    /// Multiply every pixel by a nonnegative factor.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "scale factor must be finite and >= 0, got {factor}"
            )));
        }
        let pixels = self
            .pixels
            .iter()
            .map(|p| T::narrow(p.wide() * factor))
            .collect();
        Ok(Self {
            pixels,
            ..self.clone()
        })
    }

    pub fn same_dims<U: Scalar>(&self, other: &Image<U>) -> Result<()> {
        check_dims(self.dims(), other.dims())
    }
}

pub(crate) fn check_dims(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

/// Rectangular region of interest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roi {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl Roi {
    pub fn new(top: usize, left: usize, height: usize, width: usize) -> Self {
        Self {
            top,
            left,
            height,
            width,
        }
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bottom(&self) -> usize {
        self.top + self.height
    }

    pub fn right(&self) -> usize {
        self.left + self.width
    }

    #[inline]
    pub fn contains(&self, row: usize, col: usize) -> bool {
        row >= self.top && row < self.bottom() && col >= self.left && col < self.right()
    }

    /// Check that the ROI is nonempty and lies fully within `dims`.
    pub fn validate(&self, dims: (usize, usize)) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::InvalidParameter(format!("empty ROI {self:?}")));
        }
        if self.bottom() > dims.0 || self.right() > dims.1 {
            return Err(Error::InvalidParameter(format!(
                "ROI {self:?} exceeds {}x{} image",
                dims.0, dims.1
            )));
        }
        Ok(())
    }

    /// Row-major pixel values inside the ROI, widened to `f64`.
    pub fn values<T: Scalar>(&self, img: &Image<T>) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for r in self.top..self.bottom() {
            out.extend(img.row(r)[self.left..self.right()].iter().map(|p| p.wide()));
        }
        out
    }
}

/// Odd-sized `n1 x n2` neighborhood window (rows x cols).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "(usize, usize)", into = "(usize, usize)")]
pub struct WindowSpec {
    n1: usize,
    n2: usize,
}

impl WindowSpec {
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        if n1 == 0 || n2 == 0 || n1.is_multiple_of(2) || n2.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "window must be odd in both dimensions, got {n1}x{n2}"
            )));
        }
        Ok(Self { n1, n2 })
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    pub fn rows(&self) -> usize {
        self.n1
    }

    pub fn cols(&self) -> usize {
        self.n2
    }

    pub fn half_rows(&self) -> usize {
        self.n1 / 2
    }

    pub fn half_cols(&self) -> usize {
        self.n2 / 2
    }

    /// The window centered on `(row, col)`, clipped to `dims`, as half-open
    /// `(r0, r1, c0, c1)`.
    #[inline]
    pub fn clipped(
        &self,
        row: usize,
        col: usize,
        dims: (usize, usize),
    ) -> (usize, usize, usize, usize) {
        let r0 = row.saturating_sub(self.half_rows());
        let r1 = (row + self.half_rows() + 1).min(dims.0);
        let c0 = col.saturating_sub(self.half_cols());
        let c1 = (col + self.half_cols() + 1).min(dims.1);
        (r0, r1, c0, c1)
    }
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self { n1: 5, n2: 5 }
    }
}

impl TryFrom<(usize, usize)> for WindowSpec {
    type Error = Error;

    fn try_from((n1, n2): (usize, usize)) -> Result<Self> {
        Self::new(n1, n2)
    }
}

impl From<WindowSpec> for (usize, usize) {
    fn from(w: WindowSpec) -> Self {
        (w.n1, w.n2)
    }
}

impl std::str::FromStr for WindowSpec {
    type Err = Error;

    /// Parses `N1xN2` or a single odd `N`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("window must look like 5x5, got {s:?}"));
        let s = s.trim();
        match s.split_once(['x', 'X']) {
            Some((a, b)) => {
                let n1 = a.trim().parse().map_err(|_| bad())?;
                let n2 = b.trim().parse().map_err(|_| bad())?;
                Self::new(n1, n2)
            }
            None => Self::square(s.parse().map_err(|_| bad())?),
        }
    }
}

impl std::fmt::Display for WindowSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.n1, self.n2)
    }
}
