//! Training-time augmentation and test-time averaging.
//!
//! Two volume transforms: sagittal reflection (reversing the width axis) and
//! a brightness/contrast adjustment that rescales around mid-intensity 0.5.
//! The adjustment is applied as `x' = c * x + (0.5 - 0.5 * c + b)` — the
//! expanded form of `c * (x - 0.5) + 0.5 + b` — so that `(b, c) = (0, 1)`
//! reproduces the input bit for bit and composing two adjustments equals a
//! single adjustment with `c = c1 * c2`, `b = c2 * b1 + b2`.
//!
//! Random parameters come from a seeded [`ParamSampler`]: brightness is
//! normal with standard deviation `sigma_b`, contrast is log-normal via
//! `exp(N(0, sigma_c))`, and reflection is a fair coin. Each worker should
//! use its own stream id so draws never overlap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::loss::ProbVector;
use crate::volume::Volume;

/// Reverses the width (sagittal) axis: `(d, w, h) -> (d, W - 1 - w, h)`.
pub fn reflect_sagittal(volume: &Volume) -> Volume {
    let (depth, width, height) = volume.dims();
    let src = volume.data();
    let mut data = vec![0.0f32; src.len()];
    for d in 0..depth {
        for w in 0..width {
            let from = (d * width + (width - 1 - w)) * height;
            let to = (d * width + w) * height;
            data[to..to + height].copy_from_slice(&src[from..from + height]);
        }
    }
    Volume::from_vec(depth, width, height, data).expect("permutation preserves validity")
}

/// Applies `x' = contrast * x + (0.5 - 0.5 * contrast + brightness)`.
///
/// Contrast must be finite and positive; brightness must be finite. The
/// identity parameters `(0.0, 1.0)` return the input unchanged, including
/// values outside `[0, 1]`.
pub fn brightness_contrast(volume: &Volume, brightness: f64, contrast: f64) -> Result<Volume> {
    if !contrast.is_finite() || contrast <= 0.0 {
        return Err(Error::NonpositiveContrast { contrast });
    }
    if !brightness.is_finite() {
        return Err(Error::InvalidAugmentParameter {
            reason: format!("brightness must be finite, got {brightness}"),
        });
    }
    let c = contrast as f32;
    let offset = (0.5 - 0.5 * contrast + brightness) as f32;
    let (depth, width, height) = volume.dims();
    let data: Vec<f32> = volume.data().iter().map(|&x| c * x + offset).collect();
    Volume::from_vec(depth, width, height, data)
}

/// Standard deviations (and seed) controlling random augmentation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    pub sigma_b: f64,
    pub sigma_c: f64,
    pub seed: u64,
}

impl AugmentParams {
    pub fn new(sigma_b: f64, sigma_c: f64, seed: u64) -> Result<Self> {
        for (name, v) in [("sigma_b", sigma_b), ("sigma_c", sigma_c)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidAugmentParameter {
                    reason: format!("{name} must be finite and >= 0, got {v}"),
                });
            }
        }
        Ok(AugmentParams {
            sigma_b,
            sigma_c,
            seed,
        })
    }

    /// Sampler on stream 0.
    pub fn sampler(&self) -> ParamSampler {
        self.sampler_for_stream(0)
    }

    /// Sampler on a dedicated stream; distinct streams of the same seed
    /// produce independent, non-overlapping draw sequences.
    pub fn sampler_for_stream(&self, stream: u64) -> ParamSampler {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        ParamSampler {
            rng,
            brightness: Normal::new(0.0, self.sigma_b).expect("validated sigma"),
            log_contrast: Normal::new(0.0, self.sigma_c).expect("validated sigma"),
        }
    }
}

/// Seeded source of augmentation parameters. Every call advances the
/// underlying stream, so call order defines the draw sequence.
pub struct ParamSampler {
    rng: ChaCha8Rng,
    brightness: Normal<f64>,
    log_contrast: Normal<f64>,
}

impl ParamSampler {
    /// Draws `(brightness, contrast)`, brightness first.
    ///
    /// With both sigmas zero this returns exactly `(0.0, 1.0)`.
    pub fn sample(&mut self) -> (f64, f64) {
        let b = self.brightness.sample(&mut self.rng);
        let c = self.log_contrast.sample(&mut self.rng).exp();
        (b, c)
    }

    /// Fair-coin decision for sagittal reflection.
    pub fn sample_reflect(&mut self) -> bool {
        self.rng.random_bool(0.5)
    }
}

/// Element-wise mean of two probability vectors, used to fuse predictions of
/// an input and its reflected copy at test time.
pub fn tta_average(a: &ProbVector, b: &ProbVector) -> Result<ProbVector> {
    if a.len() != b.len() {
        return Err(Error::InvalidProbVector {
            reason: format!("cannot average lengths {} and {}", a.len(), b.len()),
        });
    }
    let mean: Vec<f64> = a.iter().zip(b.iter()).map(|(&x, &y)| (x + y) / 2.0).collect();
    ProbVector::new(mean)
}
