use std::path::PathBuf;

/// Errors produced by the covct library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    // Sources are not repeated in the Display strings; print the chain
    // (e.g. anyhow's {:#}) to see them.
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("no slice images found in {dir}")]
    EmptySliceDir { dir: PathBuf },

    #[error("cannot decode slice image {path}")]
    SliceDecode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("unsupported pixel layout ({layout}) in slice image {path}")]
    UnsupportedPixelLayout { path: PathBuf, layout: String },

    #[error("slice {path} is {got_w}x{got_h} px but earlier slices are {want_w}x{want_h} px")]
    MixedSliceDimensions {
        path: PathBuf,
        got_w: u32,
        got_h: u32,
        want_w: u32,
        want_h: u32,
    },

    #[error("ambiguous slice order: {a:?} and {b:?} compare equal under natural sort")]
    AmbiguousSliceOrder { a: String, b: String },

    #[error("invalid volume dimensions {depth}x{width}x{height}: every axis must be >= 1")]
    InvalidDimensions {
        depth: usize,
        width: usize,
        height: usize,
    },

    #[error("volume data holds {got} values but dimensions imply {want}")]
    DataLengthMismatch { got: usize, want: usize },

    #[error("non-finite voxel value at flat index {index}")]
    NonFiniteVoxel { index: usize },

    #[error("bad magic in volume file {path}: expected \"CVOL\"")]
    BadMagic { path: PathBuf },

    #[error("unsupported volume format version {version} in {path}: expected 1")]
    BadVersion { version: u8, path: PathBuf },

    #[error("volume file {path} holds {got} payload bytes but the header implies {want}")]
    PayloadSizeMismatch { path: PathBuf, got: u64, want: u64 },

    #[error("invalid HU window: lo ({lo}) must be strictly below hi ({hi})")]
    InvalidWindow { lo: f64, hi: f64 },

    #[error("segmentation kept {kept} of {total} voxels, below the emptiness floor")]
    SegmentationEmpty { kept: usize, total: usize },

    #[error("mask has no set voxels")]
    EmptyMask,

    #[error("mask dimensions {got:?} do not match {want:?}")]
    MaskDimensionMismatch {
        got: (usize, usize, usize),
        want: (usize, usize, usize),
    },

    #[error("bounding box {min:?}..={max:?} does not fit a {dims:?} volume")]
    BoxOutOfBounds {
        min: [usize; 3],
        max: [usize; 3],
        dims: (usize, usize, usize),
    },

    #[error("resize target {depth}x{width}x{height} has a zero axis")]
    ZeroTargetDimension {
        depth: usize,
        width: usize,
        height: usize,
    },

    #[error("contrast factor must be positive, got {contrast}")]
    NonpositiveContrast { contrast: f64 },

    #[error("invalid probability vector: {reason}")]
    InvalidProbVector { reason: String },

    #[error("invalid segmentation parameter: {reason}")]
    InvalidSegmentationParameter { reason: String },

    #[error("invalid loss parameter: {reason}")]
    InvalidLossParameter { reason: String },

    #[error("invalid augmentation parameter: {reason}")]
    InvalidAugmentParameter { reason: String },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("duplicate scan id {scan_id:?}")]
    DuplicateScanId { scan_id: String },

    #[error("training scan {scan_id:?} has no category label, cannot stratify")]
    MissingCategory { scan_id: String },

    #[error("truth has {truth} items but predictions have {pred}")]
    LengthMismatch { truth: usize, pred: usize },

    #[error("label at position {index} is not in the class list")]
    UnknownClass { index: usize },

    #[error("prediction sets disagree on scan ids (first difference: {example:?})")]
    KeySetMismatch { example: String },

    #[error("ensemble needs at least one prediction set")]
    EmptyEnsemble,
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Wraps an io::Error with the path it occurred on.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
