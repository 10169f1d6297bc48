//! Lung field segmentation by thresholding and connected components.
//!
//! The pipeline: (1) mark voxels below the air threshold as candidates,
//! (2) flood away candidates 6-connected to any volume face (air outside the
//! body), (3) label the remaining candidates with 6-connectivity, (4) keep
//! every component holding at least `min_component_fraction` of the volume,
//! (5) close the union of kept components with a discrete ball and intersect
//! the result with the surviving candidates.
//!
//! The final intersection keeps two guarantees that hold for every input:
//! the mask never contains a voxel at or above the threshold, and never a
//! voxel of a face-connected air component. Closing therefore acts by
//! absorbing nearby discarded air pockets, not by painting tissue.

use crate::error::{Error, Result};
use crate::volume::Volume;

#[cfg(feature = "rayon")]
use rayon::prelude::*;

/// A binary voxel mask with the same axis layout as `Volume`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    depth: usize,
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(depth: usize, width: usize, height: usize) -> Result<Self> {
        if depth == 0 || width == 0 || height == 0 {
            return Err(Error::InvalidDimensions {
                depth,
                width,
                height,
            });
        }
        Ok(Mask {
            depth,
            width,
            height,
            data: vec![false; depth * width * height],
        })
    }

    /// Builds a mask by evaluating `f` at every `(d, w, h)`.
    pub fn from_fn(
        depth: usize,
        width: usize,
        height: usize,
        f: impl Fn(usize, usize, usize) -> bool,
    ) -> Result<Self> {
        let mut mask = Mask::new(depth, width, height)?;
        for d in 0..depth {
            for w in 0..width {
                for h in 0..height {
                    let i = (d * width + w) * height + h;
                    mask.data[i] = f(d, w, h);
                }
            }
        }
        Ok(mask)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.depth, self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn get(&self, d: usize, w: usize, h: usize) -> bool {
        self.data[(d * self.width + w) * self.height + h]
    }

    #[inline]
    pub fn set(&mut self, d: usize, w: usize, h: usize, value: bool) {
        let i = (d * self.width + w) * self.height + h;
        self.data[i] = value;
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    /// Number of set voxels.
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Set voxels as a fraction of the volume.
    pub fn fraction(&self) -> f64 {
        self.count() as f64 / self.data.len() as f64
    }
}

/// Dice overlap of two masks: `2|A∩B| / (|A| + |B|)`, 1 when both are empty.
pub fn dice(a: &Mask, b: &Mask) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::MaskDimensionMismatch {
            got: b.dims(),
            want: a.dims(),
        });
    }
    let mut overlap = 0usize;
    let mut total = 0usize;
    for (&x, &y) in a.data.iter().zip(&b.data) {
        overlap += (x && y) as usize;
        total += x as usize + y as usize;
    }
    if total == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * overlap as f64 / total as f64)
}

/// Parameters of `segment_lungs`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationParams {
    /// Intensity below which a voxel counts as air. The default corresponds
    /// to roughly -320 HU under the default ingestion window.
    pub threshold: f32,
    /// Smallest component kept, as a fraction of total voxels.
    pub min_component_fraction: f64,
    /// Radius of the ball structuring element used for closing.
    pub closing_radius: usize,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        SegmentationParams {
            threshold: 0.5533,
            min_component_fraction: 0.01,
            closing_radius: 2,
        }
    }
}

impl SegmentationParams {
    pub fn validate(&self) -> Result<()> {
        if !self.threshold.is_finite() {
            return Err(Error::InvalidSegmentationParameter {
                reason: format!("threshold must be finite, got {}", self.threshold),
            });
        }
        if !self.min_component_fraction.is_finite()
            || !(0.0..=1.0).contains(&self.min_component_fraction)
        {
            return Err(Error::InvalidSegmentationParameter {
                reason: format!(
                    "min_component_fraction must be in [0, 1], got {}",
                    self.min_component_fraction
                ),
            });
        }
        Ok(())
    }
}

/// Fraction of the volume below which a segmentation counts as empty.
const EMPTINESS_FLOOR: f64 = 0.001;

struct Grid {
    depth: usize,
    width: usize,
    height: usize,
}

impl Grid {
    fn len(&self) -> usize {
        self.depth * self.width * self.height
    }

    #[inline]
    fn coords(&self, i: usize) -> (usize, usize, usize) {
        let plane = self.width * self.height;
        (i / plane, (i % plane) / self.height, i % self.height)
    }

    /// 6-connected neighbors of flat index `i`.
    #[inline]
    fn neighbors(&self, i: usize, out: &mut [usize; 6]) -> usize {
        let (d, w, h) = self.coords(i);
        let plane = self.width * self.height;
        let mut n = 0;
        if d > 0 {
            out[n] = i - plane;
            n += 1;
        }
        if d + 1 < self.depth {
            out[n] = i + plane;
            n += 1;
        }
        if w > 0 {
            out[n] = i - self.height;
            n += 1;
        }
        if w + 1 < self.width {
            out[n] = i + self.height;
            n += 1;
        }
        if h > 0 {
            out[n] = i - 1;
            n += 1;
        }
        if h + 1 < self.height {
            out[n] = i + 1;
            n += 1;
        }
        n
    }

    fn on_face(&self, i: usize) -> bool {
        let (d, w, h) = self.coords(i);
        d == 0
            || w == 0
            || h == 0
            || d == self.depth - 1
            || w == self.width - 1
            || h == self.height - 1
    }
}

/// Flood fill over `allowed` voxels starting from everything already set in
/// `visited` plus `seeds`.
fn flood(grid: &Grid, allowed: &[bool], seeds: impl Iterator<Item = usize>) -> Vec<bool> {
    let mut visited = vec![false; grid.len()];
    let mut stack: Vec<usize> = Vec::new();
    for s in seeds {
        if allowed[s] && !visited[s] {
            visited[s] = true;
            stack.push(s);
        }
    }
    let mut nb = [0usize; 6];
    while let Some(i) = stack.pop() {
        let n = grid.neighbors(i, &mut nb);
        for &j in &nb[..n] {
            if allowed[j] && !visited[j] {
                visited[j] = true;
                stack.push(j);
            }
        }
    }
    visited
}

/// Offsets of a discrete ball: Euclidean distance at most `radius`.
fn ball_offsets(radius: usize) -> Vec<(isize, isize, isize)> {
    let r = radius as isize;
    let r2 = r * r;
    let mut offsets = Vec::new();
    for dd in -r..=r {
        for dw in -r..=r {
            for dh in -r..=r {
                if dd * dd + dw * dw + dh * dh <= r2 {
                    offsets.push((dd, dw, dh));
                }
            }
        }
    }
    offsets
}

/// Morphological pass shared by dilation and erosion. For dilation a voxel
/// becomes set when any in-bounds neighbor under the ball is set; for erosion
/// it stays set only when all in-bounds neighbors are (out-of-bounds reads
/// count as set, which keeps closing extensive at the borders).
fn morph(input: &[bool], grid: &Grid, offsets: &[(isize, isize, isize)], dilate: bool) -> Vec<bool> {
    let mut out = vec![false; input.len()];
    let plane = grid.width * grid.height;
    let (depth, width, height) = (grid.depth as isize, grid.width as isize, grid.height as isize);

    let fill_slab = |d: usize, slab: &mut [bool]| {
        let d = d as isize;
        for w in 0..width {
            for h in 0..height {
                let mut result = !dilate;
                for &(dd, dw, dh) in offsets {
                    let (nd, nw, nh) = (d + dd, w + dw, h + dh);
                    if nd < 0 || nw < 0 || nh < 0 || nd >= depth || nw >= width || nh >= height {
                        continue;
                    }
                    let v = input[((nd * width + nw) * height + nh) as usize];
                    if dilate && v {
                        result = true;
                        break;
                    }
                    if !dilate && !v {
                        result = false;
                        break;
                    }
                }
                slab[(w * height + h) as usize] = result;
            }
        }
    };

    #[cfg(feature = "rayon")]
    out.par_chunks_mut(plane)
        .enumerate()
        .for_each(|(d, slab)| fill_slab(d, slab));
    #[cfg(not(feature = "rayon"))]
    out.chunks_mut(plane)
        .enumerate()
        .for_each(|(d, slab)| fill_slab(d, slab));

    out
}

/// Segments the lung fields of a normalized volume.
pub fn segment_lungs(volume: &Volume, params: &SegmentationParams) -> Result<Mask> {
    params.validate()?;
    let (depth, width, height) = volume.dims();
    let grid = Grid {
        depth,
        width,
        height,
    };
    let total = grid.len();

    let candidate: Vec<bool> = volume.data().iter().map(|&v| v < params.threshold).collect();

    // Air reaching any face belongs to the exterior, not the lungs.
    let face_seeds = (0..total).filter(|&i| grid.on_face(i));
    let border = flood(&grid, &candidate, face_seeds);

    let interior: Vec<bool> = candidate
        .iter()
        .zip(&border)
        .map(|(&c, &b)| c && !b)
        .collect();

    // Label interior components in scan order and keep the large ones.
    let keep_floor = params.min_component_fraction * total as f64;
    let mut visited = vec![false; total];
    let mut kept = vec![false; total];
    let mut component = Vec::new();
    let mut stack = Vec::new();
    let mut nb = [0usize; 6];
    for start in 0..total {
        if !interior[start] || visited[start] {
            continue;
        }
        component.clear();
        visited[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            component.push(i);
            let n = grid.neighbors(i, &mut nb);
            for &j in &nb[..n] {
                if interior[j] && !visited[j] {
                    visited[j] = true;
                    stack.push(j);
                }
            }
        }
        if component.len() as f64 >= keep_floor {
            for &i in &component {
                kept[i] = true;
            }
        }
    }

    let closed = if params.closing_radius == 0 {
        kept
    } else {
        let offsets = ball_offsets(params.closing_radius);
        let dilated = morph(&kept, &grid, &offsets, true);
        morph(&dilated, &grid, &offsets, false)
    };

    let data: Vec<bool> = closed
        .iter()
        .zip(&interior)
        .map(|(&c, &i)| c && i)
        .collect();

    let count = data.iter().filter(|&&b| b).count();
    if (count as f64) < EMPTINESS_FLOOR * total as f64 {
        return Err(Error::SegmentationEmpty { kept: count, total });
    }
    Ok(Mask {
        depth,
        width,
        height,
        data,
    })
}

/// An axis-aligned box with inclusive bounds, ordered depth, width, height.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundingBox {
    pub min: [usize; 3],
    pub max: [usize; 3],
}

impl BoundingBox {
    /// `(depth, width, height)` extents of the box.
    pub fn dims(&self) -> (usize, usize, usize) {
        (
            self.max[0] - self.min[0] + 1,
            self.max[1] - self.min[1] + 1,
            self.max[2] - self.min[2] + 1,
        )
    }

    pub fn contains(&self, d: usize, w: usize, h: usize) -> bool {
        let p = [d, w, h];
        (0..3).all(|a| self.min[a] <= p[a] && p[a] <= self.max[a])
    }
}

/// The tightest box around the set voxels, expanded by `margin` per side and
/// clamped to the volume bounds.
pub fn mask_bounding_box(mask: &Mask, margin: usize) -> Result<BoundingBox> {
    let dims = [mask.depth, mask.width, mask.height];
    let mut min = dims;
    let mut max = [0usize; 3];
    let mut any = false;
    for d in 0..mask.depth {
        for w in 0..mask.width {
            for h in 0..mask.height {
                if mask.get(d, w, h) {
                    any = true;
                    let p = [d, w, h];
                    for a in 0..3 {
                        min[a] = min[a].min(p[a]);
                        max[a] = max[a].max(p[a]);
                    }
                }
            }
        }
    }
    if !any {
        return Err(Error::EmptyMask);
    }
    for a in 0..3 {
        min[a] = min[a].saturating_sub(margin);
        max[a] = (max[a] + margin).min(dims[a] - 1);
    }
    Ok(BoundingBox { min, max })
}

/// Copies the sub-volume covered by `bbox` (inclusive bounds).
pub fn crop(volume: &Volume, bbox: &BoundingBox) -> Result<Volume> {
    let dims = volume.dims();
    let limits = [dims.0, dims.1, dims.2];
    if (0..3).any(|a| bbox.min[a] > bbox.max[a] || bbox.max[a] >= limits[a]) {
        return Err(Error::BoxOutOfBounds {
            min: bbox.min,
            max: bbox.max,
            dims,
        });
    }
    let (bd, bw, bh) = bbox.dims();
    let mut data = Vec::with_capacity(bd * bw * bh);
    for d in bbox.min[0]..=bbox.max[0] {
        for w in bbox.min[1]..=bbox.max[1] {
            for h in bbox.min[2]..=bbox.max[2] {
                data.push(volume.get(d, w, h));
            }
        }
    }
    Volume::from_vec(bd, bw, bh, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::lung_phantom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn block(volume: &mut Volume, d: std::ops::Range<usize>, w: std::ops::Range<usize>, h: std::ops::Range<usize>, value: f32) {
        for di in d.clone() {
            for wi in w.clone() {
                for hi in h.clone() {
                    volume.set(di, wi, hi, value);
                }
            }
        }
    }

    #[test]
    fn uniform_volumes_yield_segmentation_empty() {
        let bright = Volume::filled(12, 12, 12, 0.9).unwrap();
        assert!(matches!(
            segment_lungs(&bright, &SegmentationParams::default()),
            Err(Error::SegmentationEmpty { .. })
        ));
        let dark = Volume::filled(12, 12, 12, 0.1).unwrap();
        assert!(matches!(
            segment_lungs(&dark, &SegmentationParams::default()),
            Err(Error::SegmentationEmpty { .. })
        ));
    }

    #[test]
    fn face_connected_air_is_excluded_even_when_large() {
        // Tissue block with an air bar reaching the w=0 face and a detached
        // interior air box. Only the box may survive.
        let mut v = Volume::filled(32, 32, 32, 0.9).unwrap();
        block(&mut v, 14..18, 0..16, 14..18, 0.1); // face-connected bar
        block(&mut v, 4..14, 20..30, 4..14, 0.1); // interior box, 1000 voxels
        let mask = segment_lungs(&v, &SegmentationParams::default()).unwrap();
        let expected = Mask::from_fn(32, 32, 32, |d, w, h| {
            (4..14).contains(&d) && (20..30).contains(&w) && (4..14).contains(&h)
        })
        .unwrap();
        assert_eq!(mask, expected);
    }

    #[test]
    fn small_components_are_dropped_and_lower_fractions_keep_more() {
        let mut v = Volume::filled(40, 40, 40, 0.9).unwrap();
        block(&mut v, 4..24, 4..24, 4..24, 0.1); // 8000 voxels = 12.5%
        block(&mut v, 30..34, 30..34, 30..34, 0.1); // 64 voxels = 0.1%
        let strict = segment_lungs(&v, &SegmentationParams::default()).unwrap();
        assert_eq!(strict.count(), 8000);
        assert!(!strict.get(31, 31, 31));

        let loose = segment_lungs(
            &v,
            &SegmentationParams {
                min_component_fraction: 0.0005,
                ..SegmentationParams::default()
            },
        )
        .unwrap();
        assert_eq!(loose.count(), 8064);
        // Lowering the floor only adds voxels.
        for (a, b) in strict.data().iter().zip(loose.data()) {
            assert!(!a || *b);
        }
    }

    #[test]
    fn closing_absorbs_air_pockets_between_kept_components() {
        // Two large air slabs 3 voxels apart with a small air pocket in the
        // middle of the tissue gap, touching neither slab. The pocket is far
        // below the size floor, but closing bridges the gap and the final
        // candidate intersection re-admits exactly the pocket, never the
        // tissue.
        let mut v = Volume::filled(24, 40, 24, 0.9).unwrap();
        block(&mut v, 4..20, 4..16, 4..20, 0.1); // slab A
        block(&mut v, 4..20, 19..31, 4..20, 0.1); // slab B
        block(&mut v, 10..14, 17..18, 10..14, 0.1); // pocket in the gap
        let mask = segment_lungs(&v, &SegmentationParams::default()).unwrap();
        assert!(mask.get(12, 17, 12), "pocket voxel should be absorbed");
        // Tissue voxels in the gap stay out.
        assert!(!mask.get(6, 17, 6));
        // Without closing the pocket is dropped.
        let open = segment_lungs(
            &v,
            &SegmentationParams {
                closing_radius: 0,
                ..SegmentationParams::default()
            },
        )
        .unwrap();
        assert!(!open.get(12, 17, 12));
    }

    #[test]
    fn mask_never_contains_voxels_at_or_above_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let params = SegmentationParams::default();
        for _ in 0..10 {
            let data: Vec<f32> = (0..20 * 20 * 20).map(|_| rng.random_range(0.0..1.0)).collect();
            let v = Volume::from_vec(20, 20, 20, data).unwrap();
            match segment_lungs(&v, &params) {
                Ok(mask) => {
                    for (i, &m) in mask.data().iter().enumerate() {
                        assert!(!m || v.data()[i] < params.threshold);
                    }
                }
                Err(Error::SegmentationEmpty { .. }) => {}
                Err(other) => panic!("unexpected error {other:?}"),
            }
        }
    }

    #[test]
    fn segmentation_is_deterministic() {
        let (v, _) = lung_phantom(40, 44, 40).unwrap();
        let a = segment_lungs(&v, &SegmentationParams::default()).unwrap();
        let b = segment_lungs(&v, &SegmentationParams::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn phantom_cavities_are_recovered() {
        let (v, truth) = lung_phantom(40, 44, 40).unwrap();
        let mask = segment_lungs(&v, &SegmentationParams::default()).unwrap();
        let overlap = dice(&mask, &truth).unwrap();
        assert!(overlap >= 0.95, "dice {overlap}");
    }

    #[test]
    fn bounding_box_margins_clamp_to_the_volume() {
        let mut m = Mask::new(8, 8, 8).unwrap();
        m.set(0, 3, 7, true);
        let b = mask_bounding_box(&m, 2).unwrap();
        assert_eq!(b.min, [0, 1, 5]);
        assert_eq!(b.max, [2, 5, 7]);

        let tight = mask_bounding_box(&m, 0).unwrap();
        assert_eq!(tight.min, [0, 3, 7]);
        assert_eq!(tight.max, [0, 3, 7]);
        assert_eq!(tight.dims(), (1, 1, 1));
    }

    #[test]
    fn full_mask_boxes_the_whole_volume() {
        let m = Mask::from_fn(4, 5, 6, |_, _, _| true).unwrap();
        let b = mask_bounding_box(&m, 3).unwrap();
        assert_eq!(b.min, [0, 0, 0]);
        assert_eq!(b.max, [3, 4, 5]);
    }

    #[test]
    fn empty_mask_has_no_bounding_box() {
        let m = Mask::new(4, 4, 4).unwrap();
        assert!(matches!(mask_bounding_box(&m, 1), Err(Error::EmptyMask)));
    }

    #[test]
    fn crop_copies_the_inclusive_box() {
        let data: Vec<f32> = (0..4 * 4 * 4).map(|i| i as f32).collect();
        let v = Volume::from_vec(4, 4, 4, data).unwrap();
        let b = BoundingBox {
            min: [1, 1, 1],
            max: [2, 3, 2],
        };
        let c = crop(&v, &b).unwrap();
        assert_eq!(c.dims(), (2, 3, 2));
        for d in 0..2 {
            for w in 0..3 {
                for h in 0..2 {
                    assert_eq!(c.get(d, w, h), v.get(d + 1, w + 1, h + 1));
                }
            }
        }
    }

    #[test]
    fn crop_of_the_full_box_is_identity() {
        let data: Vec<f32> = (0..3 * 3 * 3).map(|i| i as f32 / 27.0).collect();
        let v = Volume::from_vec(3, 3, 3, data).unwrap();
        let b = BoundingBox {
            min: [0, 0, 0],
            max: [2, 2, 2],
        };
        assert_eq!(crop(&v, &b).unwrap(), v);
    }

    #[test]
    fn crop_rejects_out_of_bounds_boxes() {
        let v = Volume::filled(3, 3, 3, 0.0).unwrap();
        let b = BoundingBox {
            min: [0, 0, 0],
            max: [3, 2, 2],
        };
        assert!(matches!(crop(&v, &b), Err(Error::BoxOutOfBounds { .. })));
        let inverted = BoundingBox {
            min: [2, 0, 0],
            max: [1, 2, 2],
        };
        assert!(matches!(crop(&v, &inverted), Err(Error::BoxOutOfBounds { .. })));
    }

    #[test]
    fn dice_handles_empty_and_mismatched_masks() {
        let a = Mask::new(2, 2, 2).unwrap();
        let b = Mask::new(2, 2, 2).unwrap();
        assert_eq!(dice(&a, &b).unwrap(), 1.0);
        let mut c = Mask::new(2, 2, 2).unwrap();
        c.set(0, 0, 0, true);
        assert_eq!(dice(&a, &c).unwrap(), 0.0);
        let d = Mask::new(2, 2, 3).unwrap();
        assert!(matches!(dice(&a, &d), Err(Error::MaskDimensionMismatch { .. })));
    }
}
