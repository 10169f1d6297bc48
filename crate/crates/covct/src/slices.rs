//! Loading a scan stored as a directory of 2-D slice images.
//!
//! Slices are ordered by a natural (numeric-aware) sort of their file names,
//! so `slice_2.jpg` comes before `slice_10.jpg`. Two names that compare equal
//! under that sort (for example `1.png` vs `01.png`) leave the stack order
//! ambiguous and are rejected. The result never depends on filesystem listing
//! order.
//!
//! Pixel columns land on the width (sagittal) axis and pixel rows on the
//! height (frontal) axis; slice k becomes depth index k. Integer samples are
//! scaled to `[0, 1]` by their type's maximum, and 3-channel images are
//! reduced to one channel with Rec. 601 luma weights.

use std::cmp::Ordering;
use std::path::{Path, PathBuf};

use image::DynamicImage;

use crate::error::{Error, Result};
use crate::volume::Volume;

#[cfg(feature = "rayon")]
use rayon::prelude::*;

/// Compares two file names with digit runs ordered numerically.
///
/// Digit runs compare by value (leading zeros ignored), a digit run sorts
/// before a non-digit run, and non-digit runs compare lexicographically by
/// byte. Distinct names can compare `Equal` (only via leading zeros); callers
/// that need a strict order must treat that as a tie.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    let mut ta = tokens(a);
    let mut tb = tokens(b);
    loop {
        match (ta.next(), tb.next()) {
            (None, None) => return Ordering::Equal,
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(x), Some(y)) => match token_cmp(x, y) {
                Ordering::Equal => continue,
                other => return other,
            },
        }
    }
}

#[derive(Clone, Copy)]
enum Token<'a> {
    Num(&'a str),
    Text(&'a str),
}

fn tokens(s: &str) -> impl Iterator<Item = Token<'_>> {
    let bytes = s.as_bytes();
    let mut pos = 0;
    std::iter::from_fn(move || {
        if pos >= bytes.len() {
            return None;
        }
        let start = pos;
        let digit = bytes[pos].is_ascii_digit();
        while pos < bytes.len() && bytes[pos].is_ascii_digit() == digit {
            pos += 1;
        }
        let run = &s[start..pos];
        Some(if digit { Token::Num(run) } else { Token::Text(run) })
    })
}

fn token_cmp(a: Token<'_>, b: Token<'_>) -> Ordering {
    match (a, b) {
        (Token::Num(x), Token::Num(y)) => {
            let x = x.trim_start_matches('0');
            let y = y.trim_start_matches('0');
            x.len().cmp(&y.len()).then_with(|| x.cmp(y))
        }
        (Token::Num(_), Token::Text(_)) => Ordering::Less,
        (Token::Text(_), Token::Num(_)) => Ordering::Greater,
        (Token::Text(x), Token::Text(y)) => x.cmp(y),
    }
}

/// Loads every image in `dir` as one volume, slices ordered by natural sort.
pub fn load_slice_stack(dir: impl AsRef<Path>) -> Result<Volume> {
    let dir = dir.as_ref();
    let mut files: Vec<(String, PathBuf)> = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_file() {
            let name = entry.file_name().to_string_lossy().into_owned();
            files.push((name, path));
        }
    }
    if files.is_empty() {
        return Err(Error::EmptySliceDir { dir: dir.into() });
    }

    files.sort_by(|(a, _), (b, _)| natural_cmp(a, b).then_with(|| a.cmp(b)));
    for pair in files.windows(2) {
        if natural_cmp(&pair[0].0, &pair[1].0) == Ordering::Equal {
            return Err(Error::AmbiguousSliceOrder {
                a: pair[0].0.clone(),
                b: pair[1].0.clone(),
            });
        }
    }

    let decoded: Vec<Result<(u32, u32, Vec<f32>)>> = {
        let work = |(_, path): &(String, PathBuf)| decode_slice(path);
        #[cfg(feature = "rayon")]
        {
            files.par_iter().map(work).collect()
        }
        #[cfg(not(feature = "rayon"))]
        {
            files.iter().map(work).collect()
        }
    };

    let mut slices = Vec::with_capacity(files.len());
    let mut dims: Option<(u32, u32)> = None;
    for ((name, path), result) in files.iter().zip(decoded) {
        let _ = name;
        let (w, h, pixels) = result?;
        match dims {
            None => dims = Some((w, h)),
            Some((want_w, want_h)) => {
                if (w, h) != (want_w, want_h) {
                    return Err(Error::MixedSliceDimensions {
                        path: path.clone(),
                        got_w: w,
                        got_h: h,
                        want_w,
                        want_h,
                    });
                }
            }
        }
        slices.push(pixels);
    }

    let (img_w, img_h) = dims.expect("at least one slice");
    let (depth, width, height) = (slices.len(), img_w as usize, img_h as usize);
    let mut data = vec![0.0f32; depth * width * height];
    for (d, pixels) in slices.iter().enumerate() {
        for w in 0..width {
            for h in 0..height {
                data[(d * width + w) * height + h] = pixels[h * width + w];
            }
        }
    }
    Volume::from_vec(depth, width, height, data)
}

/// Decodes one slice into row-major luma values in `[0, 1]`.
fn decode_slice(path: &Path) -> Result<(u32, u32, Vec<f32>)> {
    let img = image::open(path).map_err(|e| Error::SliceDecode {
        path: path.into(),
        source: e,
    })?;
    let (w, h) = (img.width(), img.height());
    let pixels = match &img {
        DynamicImage::ImageLuma8(b) => scale(b.as_raw(), 1, u8::MAX as f64),
        DynamicImage::ImageLumaA8(b) => scale(b.as_raw(), 2, u8::MAX as f64),
        DynamicImage::ImageLuma16(b) => scale(b.as_raw(), 1, u16::MAX as f64),
        DynamicImage::ImageLumaA16(b) => scale(b.as_raw(), 2, u16::MAX as f64),
        DynamicImage::ImageRgb8(b) => luma601(b.as_raw(), 3, u8::MAX as f64),
        DynamicImage::ImageRgba8(b) => luma601(b.as_raw(), 4, u8::MAX as f64),
        DynamicImage::ImageRgb16(b) => luma601(b.as_raw(), 3, u16::MAX as f64),
        DynamicImage::ImageRgba16(b) => luma601(b.as_raw(), 4, u16::MAX as f64),
        other => {
            return Err(Error::UnsupportedPixelLayout {
                path: path.into(),
                layout: format!("{:?}", other.color()),
            })
        }
    };
    Ok((w, h, pixels))
}

fn scale<T: Copy + Into<f64>>(raw: &[T], channels: usize, max: f64) -> Vec<f32> {
    raw.chunks_exact(channels)
        .map(|px| (px[0].into() / max) as f32)
        .collect()
}

fn luma601<T: Copy + Into<f64>>(raw: &[T], channels: usize, max: f64) -> Vec<f32> {
    raw.chunks_exact(channels)
        .map(|px| {
            let y = 0.299 * px[0].into() + 0.587 * px[1].into() + 0.114 * px[2].into();
            ((y / max).clamp(0.0, 1.0)) as f32
        })
        .collect()
}
