//! The CVOL on-disk volume container.
//!
//! Layout, all little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic bytes 43 56 4F 4C ("CVOL")
//! 4       1     format version, currently 1
//! 5       3     zero padding
//! 8       4     depth  (u32)
//! 12      4     width  (u32)
//! 16      4     height (u32)
//! 20      ...   depth*width*height IEEE-754 f32 values, depth-major,
//!               then width, then height
//! ```
//!
//! Readers reject a bad magic, an unknown version, a payload whose size does
//! not match the header, and non-finite values. Writing then reading a volume
//! reproduces it exactly: f32 values are stored verbatim.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::volume::Volume;

pub const MAGIC: [u8; 4] = *b"CVOL";
pub const VERSION: u8 = 1;

const HEADER_LEN: u64 = 20;

/// Writes a volume to `path` in CVOL format.
pub fn write_volume(path: impl AsRef<Path>, volume: &Volume) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::with_capacity(1 << 20, file);
    let res = (|| {
        out.write_all(&MAGIC)?;
        out.write_all(&[VERSION, 0, 0, 0])?;
        let (depth, width, height) = volume.dims();
        for dim in [depth, width, height] {
            out.write_all(&(dim as u32).to_le_bytes())?;
        }
        for &v in volume.data() {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

/// Reads a CVOL file back into a volume.
pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let total = file.metadata().map_err(|e| Error::io(path, e))?.len();
    let mut input = BufReader::with_capacity(1 << 20, file);

    let mut header = [0u8; 20];
    if total < HEADER_LEN {
        return Err(Error::PayloadSizeMismatch {
            path: path.into(),
            got: total.saturating_sub(HEADER_LEN),
            want: 0,
        });
    }
    input
        .read_exact(&mut header)
        .map_err(|e| Error::io(path, e))?;

    if header[0..4] != MAGIC {
        return Err(Error::BadMagic { path: path.into() });
    }
    if header[4] != VERSION {
        return Err(Error::BadVersion {
            version: header[4],
            path: path.into(),
        });
    }
    let depth = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let width = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(header[16..20].try_into().unwrap()) as usize;

    let count = depth
        .checked_mul(width)
        .and_then(|n| n.checked_mul(height))
        .ok_or(Error::InvalidDimensions {
            depth,
            width,
            height,
        })?;
    let want = count as u64 * 4;
    let got = total - HEADER_LEN;
    if got != want {
        return Err(Error::PayloadSizeMismatch {
            path: path.into(),
            got,
            want,
        });
    }

    let mut payload = vec![0u8; count * 4];
    input
        .read_exact(&mut payload)
        .map_err(|e| Error::io(path, e))?;
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();

    Volume::from_vec(depth, width, height, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn golden_bytes_for_a_tiny_volume() {
        let dir = tmp();
        let path = dir.path().join("v.cvol");
        let v = Volume::from_vec(1, 2, 2, vec![0.0, 0.5, 1.0, -1.0]).unwrap();
        write_volume(&path, &v).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        #[rustfmt::skip]
        let expected: Vec<u8> = vec![
            0x43, 0x56, 0x4F, 0x4C,             // "CVOL"
            0x01, 0x00, 0x00, 0x00,             // version 1 + padding
            0x01, 0x00, 0x00, 0x00,             // depth  = 1
            0x02, 0x00, 0x00, 0x00,             // width  = 2
            0x02, 0x00, 0x00, 0x00,             // height = 2
            0x00, 0x00, 0x00, 0x00,             // 0.0
            0x00, 0x00, 0x00, 0x3F,             // 0.5
            0x00, 0x00, 0x80, 0x3F,             // 1.0
            0x00, 0x00, 0x80, 0xBF,             // -1.0
        ];
        assert_eq!(bytes, expected);
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tmp();
        let path = dir.path().join("v.cvol");
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let data: Vec<f32> = (0..3 * 4 * 5)
            .map(|_| rng.random_range(-2.0f32..2.0))
            .collect();
        let v = Volume::from_vec(3, 4, 5, data).unwrap();
        write_volume(&path, &v).unwrap();
        let back = read_volume(&path).unwrap();
        assert_eq!(back.dims(), v.dims());
        assert_eq!(back.data(), v.data());
    }

    #[test]
    fn accepts_a_minimal_well_formed_file() {
        let dir = tmp();
        let path = dir.path().join("v.cvol");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"CVOL");
        bytes.extend_from_slice(&[1, 0, 0, 0]);
        for dim in [2u32, 2, 2] {
            bytes.extend_from_slice(&dim.to_le_bytes());
        }
        for i in 0..8 {
            bytes.extend_from_slice(&(i as f32 / 8.0).to_le_bytes());
        }
        std::fs::write(&path, bytes).unwrap();
        let v = read_volume(&path).unwrap();
        assert_eq!(v.dims(), (2, 2, 2));
        assert_eq!(v.get(1, 1, 1), 7.0 / 8.0);
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tmp();
        let path = dir.path().join("v.cvol");
        let v = Volume::filled(1, 1, 1, 0.5).unwrap();
        write_volume(&path, &v).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(read_volume(&path), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn rejects_unknown_version() {
        let dir = tmp();
        let path = dir.path().join("v.cvol");
        let v = Volume::filled(1, 1, 1, 0.5).unwrap();
        write_volume(&path, &v).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = 2;
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            read_volume(&path),
            Err(Error::BadVersion { version: 2, .. })
        ));
    }

    #[test]
    fn rejects_truncated_payload() {
        let dir = tmp();
        let path = dir.path().join("v.cvol");
        let v = Volume::filled(2, 2, 2, 0.5).unwrap();
        write_volume(&path, &v).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(
            read_volume(&path),
            Err(Error::PayloadSizeMismatch { got: 28, want: 32, .. })
        ));
    }

    #[test]
    fn rejects_trailing_bytes() {
        let dir = tmp();
        let path = dir.path().join("v.cvol");
        let v = Volume::filled(2, 2, 2, 0.5).unwrap();
        write_volume(&path, &v).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.push(0);
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            read_volume(&path),
            Err(Error::PayloadSizeMismatch { got: 33, want: 32, .. })
        ));
    }

    #[test]
    fn rejects_non_finite_payload() {
        let dir = tmp();
        let path = dir.path().join("v.cvol");
        let v = Volume::filled(1, 1, 2, 0.5).unwrap();
        write_volume(&path, &v).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let nan = f32::NAN.to_le_bytes();
        bytes[20..24].copy_from_slice(&nan);
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            read_volume(&path),
            Err(Error::NonFiniteVoxel { index: 0 })
        ));
    }

    proptest! {
        #[test]
        fn round_trip_preserves_any_finite_volume(
            depth in 1usize..4,
            width in 1usize..4,
            height in 1usize..4,
            seed in 0u64..1000,
        ) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f32> = (0..depth * width * height)
                .map(|_| rng.random_range(-1e6f32..1e6))
                .collect();
            let dir = tmp();
            let path = dir.path().join("v.cvol");
            let v = Volume::from_vec(depth, width, height, data).unwrap();
            write_volume(&path, &v).unwrap();
            let back = read_volume(&path).unwrap();
            prop_assert_eq!(back.data(), v.data());
            prop_assert_eq!(back.dims(), (depth, width, height));
        }
    }
}
