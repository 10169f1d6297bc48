//! Dense 3-D intensity volumes and the Hounsfield-unit window they were
//! normalized with.
//!
//! Axis semantics are fixed for the whole crate: `depth` runs along the
//! longitudinal (slice) axis, `width` along the sagittal axis and `height`
//! along the frontal axis. Values are stored depth-major, then width, then
//! height, so the flat index of `(d, w, h)` is `(d * width + w) * height + h`.

use crate::error::{Error, Result};

/// A dense volume of finite `f32` intensities.
///
/// Intensities are in `[0, 1]` straight after ingestion; augmentation may
/// push them outside that range, but every element stays finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    depth: usize,
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Volume {
    /// Creates a volume filled with a constant value.
    pub fn filled(depth: usize, width: usize, height: usize, value: f32) -> Result<Self> {
        check_dims(depth, width, height)?;
        if !value.is_finite() {
            return Err(Error::NonFiniteVoxel { index: 0 });
        }
        Ok(Volume {
            depth,
            width,
            height,
            data: vec![value; depth * width * height],
        })
    }

    /// Wraps an existing buffer laid out depth-major, then width, then height.
    pub fn from_vec(depth: usize, width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        check_dims(depth, width, height)?;
        let want = depth * width * height;
        if data.len() != want {
            return Err(Error::DataLengthMismatch {
                got: data.len(),
                want,
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteVoxel { index });
        }
        Ok(Volume {
            depth,
            width,
            height,
            data,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// `(depth, width, height)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.depth, self.width, self.height)
    }

    /// Total voxel count.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        false // dimensions are validated to be >= 1 on every axis
    }

    /// Flat index of `(d, w, h)`.
    #[inline]
    pub fn index(&self, d: usize, w: usize, h: usize) -> usize {
        debug_assert!(d < self.depth && w < self.width && h < self.height);
        (d * self.width + w) * self.height + h
    }

    #[inline]
    pub fn get(&self, d: usize, w: usize, h: usize) -> f32 {
        self.data[self.index(d, w, h)]
    }

    #[inline]
    pub fn set(&mut self, d: usize, w: usize, h: usize, value: f32) {
        let i = self.index(d, w, h);
        self.data[i] = value;
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Minimum and maximum intensity.
    pub fn min_max(&self) -> (f32, f32) {
        let mut lo = self.data[0];
        let mut hi = self.data[0];
        for &v in &self.data {
            if v < lo {
                lo = v;
            }
            if v > hi {
                hi = v;
            }
        }
        (lo, hi)
    }

    /// Mean intensity, accumulated in f64.
    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }
}

fn check_dims(depth: usize, width: usize, height: usize) -> Result<()> {
    if depth == 0 || width == 0 || height == 0 {
        return Err(Error::InvalidDimensions {
            depth,
            width,
            height,
        });
    }
    Ok(())
}

/// The Hounsfield window a normalized volume was clipped and scaled with.
///
/// Intensity 0 maps to `lo` HU and intensity 1 to `hi` HU.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HuWindow {
    lo: f64,
    hi: f64,
}

impl Default for HuWindow {
    /// The lung window used by the ingestion pipeline: -1150 to 350 HU.
    fn default() -> Self {
        HuWindow {
            lo: -1150.0,
            hi: 350.0,
        }
    }
}

impl HuWindow {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidWindow { lo, hi });
        }
        Ok(HuWindow { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Maps a normalized intensity back to Hounsfield units.
    pub fn intensity_to_hu(&self, v: f64) -> f64 {
        v * (self.hi - self.lo) + self.lo
    }

    /// Maps a Hounsfield value to normalized intensity, clamping outside the
    /// window.
    pub fn hu_to_intensity(&self, hu: f64) -> f64 {
        ((hu - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }
}
