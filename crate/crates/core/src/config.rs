//! Optical geometry, depth quantization, and the point-cloud scene model.
//!
//! Conventions used everywhere downstream:
//! - the hologram is an `n_w` x `n_w` pixel grid of square pixels (`pitch`
//!   meters) centered on the optical axis, computed as square tiles of side
//!   `n_h`;
//! - pixel indices grow with +x / +y, and physical coordinates map to pixels
//!   through `ix = round(x / pitch) + n_w / 2` with halves rounding toward
//!   positive infinity;
//! - the depth range is cut into `n_z` slices with centers
//!   `z_min + i * delta_z`; points snap to the nearest center, ties to the
//!   lower index.

use sha2::{Digest, Sha256};

use crate::error::{CghError, Result};
use crate::wavelet::FilterKind;
use crate::Real;

/// How the PSF lookup table indexes sub-grid point positions.
///
/// Coefficient shifts only exist in steps of `2^level` pixels, so a point's
/// residual offset inside that step has to come from somewhere. The accurate
/// option stores one coefficient list per residual class (`4^level` per depth
/// slice); the cheap option stores a single centered list and rounds point
/// positions to the shift grid, trading sub-grid placement accuracy for a
/// `4^level` smaller table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LutMode {
    #[default]
    OffsetClasses,
    RoundToGrid,
}

/// Full parameter set for one hologram computation.
#[derive(Debug, Clone, PartialEq)]
pub struct OpticalConfig<T: Real = f64> {
    /// Illumination wavelength in meters.
    pub wavelength: T,
    /// Pixel pitch in meters (square pixels).
    pub pitch: T,
    /// Hologram side length in pixels (the full frame is n_w x n_w).
    pub n_w: usize,
    /// Tile side length in pixels; the frame splits into (n_w/n_h)^2 tiles.
    pub n_h: usize,
    /// Depth range covered by the slice grid, in meters.
    pub z_min: T,
    pub z_max: T,
    /// Number of depth slices.
    pub n_z: usize,
    /// Fraction of PSF wavelet coefficients retained in the lookup table.
    pub gamma: T,
    /// Retain every nonzero coefficient regardless of `gamma`.
    pub keep_all: bool,
    /// Wavelet decomposition depth.
    pub level: usize,
    /// Wavelet filter used for all transforms.
    pub filter: FilterKind,
    /// Reference point source position in meters (diverging by default).
    pub ref_x: T,
    pub ref_y: T,
    pub ref_z: T,
    /// Treat the reference as converging toward its position instead.
    pub ref_converging: bool,
    /// Explicit slice spacing override in meters; `None` derives it from the
    /// range as `(z_max - z_min) / (n_z - 1)`.
    pub dz_override: Option<T>,
    /// Cap the PSF footprint so any depth fits the tile (on by default).
    /// When off, an oversized footprint is a hard error.
    pub cap_w: bool,
    /// Lookup-table layout, see [`LutMode`].
    pub lut_mode: LutMode,
    /// Worker threads for tile-parallel phases.
    pub threads: usize,
    /// Seed for synthetic scene generation.
    pub seed: u64,
}

impl<T: Real> Default for OpticalConfig<T> {
    fn default() -> Self {
        OpticalConfig {
            wavelength: crate::real(632.8e-9),
            pitch: crate::real(1.0e-6),
            n_w: 1024,
            n_h: 1024,
            z_min: crate::real(-15.0e-3),
            z_max: crate::real(15.0e-3),
            n_z: 29,
            gamma: crate::real(0.05),
            keep_all: false,
            level: 3,
            filter: FilterKind::Coif2,
            ref_x: T::zero(),
            ref_y: crate::real(30.0e-3),
            ref_z: crate::real(-400.0e-3),
            ref_converging: false,
            dz_override: None,
            cap_w: true,
            lut_mode: LutMode::OffsetClasses,
            threads: 1,
            seed: 0,
        }
    }
}

impl<T: Real> OpticalConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(CghError::Config(msg));
        let f = |v: T| v.to_f64().unwrap_or(f64::NAN);
        if !(self.wavelength > T::zero()) || !self.wavelength.is_finite() {
            return err(format!("wavelength must be positive, got {}", f(self.wavelength)));
        }
        if !(self.pitch > T::zero()) || !self.pitch.is_finite() {
            return err(format!("pitch must be positive, got {}", f(self.pitch)));
        }
        if self.wavelength > self.pitch + self.pitch {
            return err(format!(
                "wavelength {} m exceeds twice the pitch {} m; the grating equation has no solution",
                f(self.wavelength),
                f(self.pitch)
            ));
        }
        if !self.n_w.is_power_of_two() || !self.n_h.is_power_of_two() {
            return err(format!("n_w and n_h must be powers of two, got {}x{}", self.n_w, self.n_h));
        }
        if self.n_h > self.n_w || self.n_w % self.n_h != 0 {
            return err(format!("n_h = {} must divide n_w = {}", self.n_h, self.n_w));
        }
        if self.level < 1 || self.level > 10 {
            return err(format!("wavelet level must be in 1..=10, got {}", self.level));
        }
        // Tile center and offset-class grid must stay aligned, hence the
        // extra factor of two over plain divisibility.
        if self.n_h < (1 << (self.level + 1)) {
            return err(format!(
                "n_h = {} too small for wavelet level {}; need at least {}",
                self.n_h,
                self.level,
                1 << (self.level + 1)
            ));
        }
        if self.n_z == 0 {
            return err("n_z must be at least 1".into());
        }
        if self.n_z > 1 && !(self.z_min < self.z_max) {
            return err(format!("z_min {} must be below z_max {} when n_z > 1", f(self.z_min), f(self.z_max)));
        }
        if self.n_z == 1 && !(self.z_min <= self.z_max) {
            return err(format!("z_min {} must not exceed z_max {}", f(self.z_min), f(self.z_max)));
        }
        if !(self.gamma > T::zero() && self.gamma <= T::one()) {
            return err(format!("gamma must be in (0, 1], got {}", f(self.gamma)));
        }
        if let Some(dz) = self.dz_override {
            if !(dz > T::zero()) || !dz.is_finite() {
                return err(format!("dz_override must be positive, got {}", f(dz)));
            }
        }
        if self.threads == 0 {
            return err("threads must be at least 1".into());
        }
        if !self.ref_z.is_finite() || !self.ref_x.is_finite() || !self.ref_y.is_finite() {
            return err("reference position must be finite".into());
        }
        Ok(())
    }

    /// Slice spacing in meters. Zero when a single slice spans a zero-width
    /// range and no override is set.
    pub fn delta_z(&self) -> T {
        match self.dz_override {
            Some(dz) => dz,
            None if self.n_z > 1 => {
                (self.z_max - self.z_min) / crate::real::<T>((self.n_z - 1) as f64)
            }
            None => T::zero(),
        }
    }

    /// Center depth of slice `i`.
    pub fn slice_center(&self, i: usize) -> T {
        self.z_min + self.delta_z() * crate::real::<T>(i as f64)
    }

    /// Nearest slice index for depth `z`; ties between two centers resolve to
    /// the lower index. `z` may overhang the range by half a slice spacing.
    pub fn quantize_depth(&self, z: T) -> Result<usize> {
        let fz = z.to_f64().unwrap_or(f64::NAN);
        let out_of_range = |lo: T, hi: T| CghError::DepthOutOfRange {
            z: fz,
            lo: lo.to_f64().unwrap_or(f64::NAN),
            hi: hi.to_f64().unwrap_or(f64::NAN),
        };
        if self.n_z == 1 {
            if z < self.z_min || z > self.z_max || !z.is_finite() {
                return Err(out_of_range(self.z_min, self.z_max));
            }
            return Ok(0);
        }
        let dz = self.delta_z();
        let half = dz / crate::real(2.0);
        let (lo, hi) = (self.z_min - half, self.z_max + half);
        if !(z >= lo && z <= hi) {
            return Err(out_of_range(lo, hi));
        }
        let t = (z - self.z_min) / dz;
        let idx = (t - crate::real(0.5)).ceil();
        let idx = idx.to_i64().unwrap_or(0).clamp(0, self.n_z as i64 - 1);
        Ok(idx as usize)
    }

    /// Physical position to pixel index; halves round toward +infinity.
    /// The result may land outside the frame, callers decide what to skip.
    pub fn to_pixel(&self, x: T, y: T) -> (i64, i64) {
        let half = crate::real::<T>(0.5);
        let ix = (x / self.pitch + half).floor();
        let iy = (y / self.pitch + half).floor();
        let c = self.n_w as i64 / 2;
        (
            ix.to_f64().unwrap_or(f64::NAN) as i64 + c,
            iy.to_f64().unwrap_or(f64::NAN) as i64 + c,
        )
    }

    /// Physical x (or y) coordinate of a full-frame pixel index center.
    pub fn pixel_coord(&self, i: i64) -> T {
        crate::real::<T>((i - self.n_w as i64 / 2) as f64) * self.pitch
    }

    pub fn tiles_per_side(&self) -> usize {
        self.n_w / self.n_h
    }

    pub fn tile_count(&self) -> usize {
        self.tiles_per_side() * self.tiles_per_side()
    }

    /// Number of residual offset classes per depth slice.
    pub fn classes_per_slice(&self) -> usize {
        match self.lut_mode {
            LutMode::OffsetClasses => 1 << (2 * self.level),
            LutMode::RoundToGrid => 1,
        }
    }

    /// Hash over every parameter the lookup table depends on. Deliberately
    /// excludes frame size, reference wave, threads, and seed: a table built
    /// for one tile geometry serves any frame assembled from such tiles.
    pub fn lut_config_hash(&self) -> [u8; 32] {
        let mut bytes = Vec::with_capacity(96);
        let mut push = |v: f64| bytes.extend_from_slice(&v.to_le_bytes());
        push(self.wavelength.to_f64().unwrap_or(f64::NAN));
        push(self.pitch.to_f64().unwrap_or(f64::NAN));
        push(self.n_h as f64);
        push(self.z_min.to_f64().unwrap_or(f64::NAN));
        push(self.z_max.to_f64().unwrap_or(f64::NAN));
        push(self.n_z as f64);
        match self.dz_override {
            Some(dz) => {
                push(1.0);
                push(dz.to_f64().unwrap_or(f64::NAN));
            }
            None => {
                push(0.0);
                push(0.0);
            }
        }
        push(self.gamma.to_f64().unwrap_or(f64::NAN));
        push(if self.keep_all { 1.0 } else { 0.0 });
        push(self.level as f64);
        push(if self.cap_w { 1.0 } else { 0.0 });
        push(match self.lut_mode {
            LutMode::OffsetClasses => 0.0,
            LutMode::RoundToGrid => 1.0,
        });
        bytes.extend_from_slice(self.filter.name().as_bytes());
        let digest = Sha256::digest(&bytes);
        let mut out = [0u8; 32];
        out.copy_from_slice(&digest);
        out
    }
}

/// Position of one tile inside the frame: `s` counts along x, `t` along y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TileIndex {
    pub s: usize,
    pub t: usize,
}

impl TileIndex {
    pub fn new<T: Real>(s: usize, t: usize, cfg: &OpticalConfig<T>) -> Result<Self> {
        let n = cfg.tiles_per_side();
        if s >= n || t >= n {
            return Err(CghError::Config(format!(
                "tile ({s}, {t}) outside the {n}x{n} tile grid"
            )));
        }
        Ok(TileIndex { s, t })
    }

    /// Full-frame pixel coordinates of this tile's (0, 0) pixel.
    pub fn origin<T: Real>(&self, cfg: &OpticalConfig<T>) -> (i64, i64) {
        ((self.s * cfg.n_h) as i64, (self.t * cfg.n_h) as i64)
    }
}

/// One point emitter: position in meters, real amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSource<T: Real = f64> {
    pub x: T,
    pub y: T,
    pub z: T,
    pub a: T,
}

/// A scene: ordered list of point sources. Order is part of the contract,
/// per-tile accumulation follows it so results are reproducible bit for bit.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud<T: Real = f64> {
    pub points: Vec<PointSource<T>>,
}

impl<T: Real> PointCloud<T> {
    pub fn new(points: Vec<PointSource<T>>) -> Self {
        PointCloud { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Reject non-finite coordinates or amplitudes.
    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite() && p.a.is_finite()) {
                return Err(CghError::Config(format!(
                    "point {i} has a non-finite component"
                )));
            }
        }
        Ok(())
    }
}
