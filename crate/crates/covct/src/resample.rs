//! Anti-aliased trilinear volume resizing.
//!
//! Resampling is separable and always processed in the fixed axis order
//! depth, width, height. Along each axis, output sample `i` reads source
//! coordinate `(i + 0.5) * scale - 0.5` with `scale = src / dst` (pixel
//! centers at `i + 0.5`), linearly interpolating between the two nearest
//! samples and clamping at the edges. When an axis is downsampled by factor
//! `s > 1`, the source is first smoothed along that axis with a normalized
//! Gaussian of `sigma = (s - 1) / 2` (kernel radius `ceil(3 sigma)`,
//! replicated edges). All arithmetic runs in f64; results are rounded to f32
//! once at the end.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::volume::Volume;

#[cfg(feature = "rayon")]
use rayon::prelude::*;

/// The fixed grid sizes scans are resized to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StandardSize {
    Small,
    Medium,
    Large,
}

impl StandardSize {
    /// Target `(depth, width, height)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        match self {
            StandardSize::Small => (64, 128, 128),
            StandardSize::Medium => (256, 256, 176),
            StandardSize::Large => (320, 320, 224),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            StandardSize::Small => "small",
            StandardSize::Medium => "medium",
            StandardSize::Large => "large",
        }
    }
}

impl FromStr for StandardSize {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "small" => Ok(StandardSize::Small),
            "medium" => Ok(StandardSize::Medium),
            "large" => Ok(StandardSize::Large),
            other => Err(format!("unknown size {other:?}, expected small, medium or large")),
        }
    }
}

impl fmt::Display for StandardSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Resizes to one of the standard grids.
pub fn resize_to(volume: &Volume, size: StandardSize) -> Result<Volume> {
    let (d, w, h) = size.dims();
    resize(volume, d, w, h)
}

/// Resizes a volume to `depth x width x height`.
pub fn resize(volume: &Volume, depth: usize, width: usize, height: usize) -> Result<Volume> {
    if depth == 0 || width == 0 || height == 0 {
        return Err(Error::ZeroTargetDimension {
            depth,
            width,
            height,
        });
    }
    let (d0, w0, h0) = volume.dims();
    let data: Vec<f64> = volume.data().iter().map(|&v| v as f64).collect();
    let buf = Buf3 {
        a: d0,
        b: w0,
        c: h0,
        data,
    };
    // Rotating (a, b, c) -> (b, c, a) makes the axis to process contiguous;
    // three rotations restore the original orientation.
    let buf = buf.rotated().resampled_last(depth); // depth pass
    let buf = buf.rotated().resampled_last(width); // width pass
    let buf = buf.rotated().resampled_last(height); // height pass
    debug_assert_eq!((buf.a, buf.b, buf.c), (depth, width, height));
    let out: Vec<f32> = buf.data.iter().map(|&v| v as f32).collect();
    Volume::from_vec(depth, width, height, out)
}

/// An f64 buffer with layout `[a][b][c]`, `c` contiguous.
struct Buf3 {
    a: usize,
    b: usize,
    c: usize,
    data: Vec<f64>,
}

impl Buf3 {
    /// Cyclic axis rotation `(a, b, c) -> (b, c, a)`.
    fn rotated(self) -> Buf3 {
        let (a, b, c) = (self.a, self.b, self.c);
        let mut out = vec![0.0f64; self.data.len()];
        let input = &self.data;
        let plane = c * a; // one output slab per b index
        let fill = |bi: usize, slab: &mut [f64]| {
            for ci in 0..c {
                for ai in 0..a {
                    slab[ci * a + ai] = input[(ai * b + bi) * c + ci];
                }
            }
        };
        #[cfg(feature = "rayon")]
        out.par_chunks_mut(plane)
            .enumerate()
            .for_each(|(bi, slab)| fill(bi, slab));
        #[cfg(not(feature = "rayon"))]
        out.chunks_mut(plane)
            .enumerate()
            .for_each(|(bi, slab)| fill(bi, slab));
        Buf3 {
            a: b,
            b: c,
            c: a,
            data: out,
        }
    }

    /// Resamples the contiguous last axis from `self.c` to `dst` samples.
    fn resampled_last(self, dst: usize) -> Buf3 {
        let src = self.c;
        if dst == src {
            return self;
        }
        let scale = src as f64 / dst as f64;
        let kernel = if scale > 1.0 {
            Some(gaussian_kernel((scale - 1.0) / 2.0))
        } else {
            None
        };
        let lines = self.a * self.b;
        let mut out = vec![0.0f64; lines * dst];

        let work = |(src_line, dst_line): (&[f64], &mut [f64]), scratch: &mut Vec<f64>| {
            match &kernel {
                Some(k) => {
                    smooth_line(src_line, k, scratch);
                    interpolate_line(scratch, dst_line, scale);
                }
                None => interpolate_line(src_line, dst_line, scale),
            }
        };

        #[cfg(feature = "rayon")]
        self.data
            .par_chunks(src)
            .zip(out.par_chunks_mut(dst))
            .for_each_init(Vec::new, |scratch, pair| work(pair, scratch));
        #[cfg(not(feature = "rayon"))]
        {
            let mut scratch = Vec::new();
            self.data
                .chunks(src)
                .zip(out.chunks_mut(dst))
                .for_each(|pair| work(pair, &mut scratch));
        }

        Buf3 {
            a: self.a,
            b: self.b,
            c: dst,
            data: out,
        }
    }
}

/// Normalized Gaussian taps for `sigma > 0`, radius `ceil(3 sigma)`.
fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    debug_assert!(sigma > 0.0);
    let radius = (3.0 * sigma).ceil() as isize;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

fn smooth_line(src: &[f64], kernel: &[f64], dst: &mut Vec<f64>) {
    let radius = (kernel.len() / 2) as isize;
    let last = (src.len() - 1) as isize;
    dst.clear();
    dst.extend((0..src.len() as isize).map(|i| {
        kernel
            .iter()
            .enumerate()
            .map(|(j, &w)| {
                let k = (i + j as isize - radius).clamp(0, last);
                w * src[k as usize]
            })
            .sum::<f64>()
    }));
}

fn interpolate_line(src: &[f64], dst: &mut [f64], scale: f64) {
    let last = src.len() - 1;
    for (i, out) in dst.iter_mut().enumerate() {
        let x = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, last as f64);
        let i0 = x as usize; // x >= 0, so truncation is floor
        let i1 = (i0 + 1).min(last);
        let t = x - i0 as f64;
        *out = (1.0 - t) * src[i0] + t * src[i1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_volume(rng: &mut ChaCha8Rng, d: usize, w: usize, h: usize) -> Volume {
        let data: Vec<f32> = (0..d * w * h).map(|_| rng.random_range(0.0..1.0)).collect();
        Volume::from_vec(d, w, h, data).unwrap()
    }

    #[test]
    fn identity_resize_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = random_volume(&mut rng, 5, 7, 6);
        let out = resize(&v, 5, 7, 6).unwrap();
        assert_eq!(out.data(), v.data());
    }

    #[test]
    fn constant_volumes_stay_constant() {
        let v = Volume::filled(9, 5, 7, 0.7).unwrap();
        for dims in [(3, 10, 2), (9, 5, 7), (17, 1, 13)] {
            let out = resize(&v, dims.0, dims.1, dims.2).unwrap();
            assert_eq!(out.dims(), dims);
            for &x in out.data() {
                assert!((x - 0.7).abs() < 1e-6, "got {x}");
            }
        }
    }

    #[test]
    fn doubling_reproduces_affine_volumes_in_the_interior() {
        // Trilinear interpolation is exact on per-axis affine data away from
        // the clamped edges; this also pins which source axis feeds which
        // output axis.
        let (d0, w0, h0) = (8usize, 10usize, 12usize);
        let mut v = Volume::filled(d0, w0, h0, 0.0).unwrap();
        let f = |d: f64, w: f64, h: f64| 0.1 + 0.02 * d + 0.005 * w + 0.003 * h;
        for d in 0..d0 {
            for w in 0..w0 {
                for h in 0..h0 {
                    v.set(d, w, h, f(d as f64, w as f64, h as f64) as f32);
                }
            }
        }
        let out = resize(&v, 2 * d0, 2 * w0, 2 * h0).unwrap();
        let coord = |i: usize| (i as f64 + 0.5) * 0.5 - 0.5;
        for i in 1..2 * d0 - 1 {
            for j in 1..2 * w0 - 1 {
                for k in 1..2 * h0 - 1 {
                    let want = f(coord(i), coord(j), coord(k));
                    let got = out.get(i, j, k) as f64;
                    assert!((got - want).abs() < 1e-6, "({i},{j},{k}): {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn two_sample_line_upsamples_to_closed_form() {
        let v = Volume::from_vec(2, 1, 1, vec![0.0, 1.0]).unwrap();
        let out = resize(&v, 3, 1, 1).unwrap();
        assert!((out.get(0, 0, 0) - 0.0).abs() < 1e-6);
        assert!((out.get(1, 0, 0) - 0.5).abs() < 1e-6);
        assert!((out.get(2, 0, 0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn downsampling_smooths_without_shifting_constants() {
        let mut v = Volume::filled(16, 4, 4, 0.25).unwrap();
        // A single bright plane; smoothing must spread it symmetrically.
        for w in 0..4 {
            for h in 0..4 {
                v.set(8, w, h, 1.0);
            }
        }
        let out = resize(&v, 4, 4, 4).unwrap();
        let (lo, hi) = out.min_max();
        assert!(lo >= 0.25 - 1e-6);
        assert!(hi <= 1.0 + 1e-6);
        // Energy from the plane survives somewhere in the middle.
        assert!(out.get(2, 0, 0) > 0.25 + 1e-3);
    }

    #[test]
    fn output_stays_within_input_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..20 {
            let d = rng.random_range(1..9);
            let w = rng.random_range(1..9);
            let h = rng.random_range(1..9);
            let v = random_volume(&mut rng, d, w, h);
            let (lo, hi) = v.min_max();
            let td = rng.random_range(1..13);
            let tw = rng.random_range(1..13);
            let th = rng.random_range(1..13);
            let out = resize(&v, td, tw, th).unwrap();
            let (olo, ohi) = out.min_max();
            assert!(olo >= lo - 1e-6, "{olo} < {lo}");
            assert!(ohi <= hi + 1e-6, "{ohi} > {hi}");
        }
    }

    #[test]
    fn resizing_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let v = random_volume(&mut rng, 12, 9, 14);
        let a = resize(&v, 5, 17, 8).unwrap();
        let b = resize(&v, 5, 17, 8).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn rejects_zero_targets() {
        let v = Volume::filled(2, 2, 2, 0.0).unwrap();
        assert!(matches!(
            resize(&v, 0, 2, 2),
            Err(Error::ZeroTargetDimension { .. })
        ));
    }

    #[test]
    fn standard_sizes_parse_and_report_dims() {
        assert_eq!("small".parse::<StandardSize>().unwrap().dims(), (64, 128, 128));
        assert_eq!(
            "medium".parse::<StandardSize>().unwrap().dims(),
            (256, 256, 176)
        );
        assert_eq!(
            "large".parse::<StandardSize>().unwrap().dims(),
            (320, 320, 224)
        );
        assert!("tiny".parse::<StandardSize>().is_err());
        assert_eq!(StandardSize::Small.to_string(), "small");
    }

    #[test]
    fn gaussian_kernel_is_normalized_and_symmetric() {
        for sigma in [0.5, 1.5, 3.0] {
            let k = gaussian_kernel(sigma);
            assert_eq!(k.len() % 2, 1);
            let sum: f64 = k.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            for i in 0..k.len() / 2 {
                assert_eq!(k[i], k[k.len() - 1 - i]);
            }
        }
    }
}
