//! Synthetic test volumes with known ground truth.

use crate::error::Result;
use crate::lungseg::Mask;
use crate::volume::Volume;

/// A body-like block containing two ellipsoidal air cavities.
///
/// Background and cavities sit at intensity 0.1, the body block at 0.9.
/// Returns the volume together with the exact cavity mask. Each cavity holds
/// several percent of the volume, well above the default component floor.
/// Dimensions must be at least 24 voxels per axis.
pub fn lung_phantom(depth: usize, width: usize, height: usize) -> Result<(Volume, Mask)> {
    assert!(
        depth >= 24 && width >= 24 && height >= 24,
        "phantom needs at least 24 voxels per axis"
    );
    let margin = 3usize;
    let mut volume = Volume::filled(depth, width, height, 0.1)?;
    let mut truth = Mask::new(depth, width, height)?;

    let ellipsoids = [
        // (center d, w, h), (semi-axis d, w, h)
        (
            [0.5 * depth as f64, 0.30 * width as f64, 0.5 * height as f64],
            [0.28 * depth as f64, 0.16 * width as f64, 0.30 * height as f64],
        ),
        (
            [0.5 * depth as f64, 0.70 * width as f64, 0.5 * height as f64],
            [0.28 * depth as f64, 0.16 * width as f64, 0.30 * height as f64],
        ),
    ];

    for d in 0..depth {
        for w in 0..width {
            for h in 0..height {
                let in_body = d >= margin
                    && w >= margin
                    && h >= margin
                    && d < depth - margin
                    && w < width - margin
                    && h < height - margin;
                if !in_body {
                    continue;
                }
                let inside = ellipsoids.iter().any(|(center, semi)| {
                    let x = (d as f64 - center[0]) / semi[0];
                    let y = (w as f64 - center[1]) / semi[1];
                    let z = (h as f64 - center[2]) / semi[2];
                    x * x + y * y + z * z <= 1.0
                });
                if inside {
                    truth.set(d, w, h, true);
                } else {
                    volume.set(d, w, h, 0.9);
                }
            }
        }
    }
    Ok((volume, truth))
}
