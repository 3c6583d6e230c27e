//! Error type shared by every module in the crate.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CghError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("depth {z} m outside quantizable range [{lo} m, {hi} m]")]
    DepthOutOfRange { z: f64, lo: f64, hi: f64 },

    #[error("PSF footprint radius {footprint_px} px exceeds half the tile ({limit_px} px); increase n_h or reduce |z| = {z} m")]
    PsfTooLarge {
        z: f64,
        footprint_px: f64,
        limit_px: f64,
    },

    #[error("field dimensions {got_w}x{got_h} do not match expected {want_w}x{want_h}")]
    DimensionMismatch {
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },

    #[error("lookup table was built for a different configuration (hash mismatch); rebuild it")]
    StaleLut,

    #[error("unknown wavelet filter {0:?}; supported: coif1..coif5")]
    UnknownFilter(String),

    #[error("{}: {msg}", .path.display())]
    Format { path: PathBuf, msg: String },

    #[error("{} line {line}: {msg}", .path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("tile sink failed after {completed_tiles} of {total_tiles} tiles: {cause}")]
    Aborted {
        completed_tiles: usize,
        total_tiles: usize,
        #[source]
        cause: Box<CghError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CghError>;
