//! Depth-sliced point-spread functions and the wavelet-domain lookup table.
//!
//! A point at slice depth z paints a windowed spherical phase pattern on the
//! hologram: unit magnitude, phase 2*pi*r/lambda, cut off at the radius where
//! the grating equation stops producing propagating orders. The table stores,
//! for every slice and every residual pixel offset modulo the coefficient
//! grid stride, the strongest wavelet coefficients of that pattern. Engines
//! then place points by integer coefficient shifts alone.

use num_complex::Complex;
use rayon::prelude::*;

use crate::config::{LutMode, OpticalConfig};
use crate::error::{CghError, Result};
use crate::field::ComplexField;
use crate::wavelet::{fwt2, FilterKind, SparseCoeffs, WaveletFilter};
use crate::Real;

/// Unit-amplitude spherical wavefront sample at an integer pixel delta from
/// the source axis. Every engine in this crate (table build, patch stamping,
/// literal per-pixel evaluation) calls this one function, so their outputs
/// agree bitwise wherever they evaluate the same pixel.
#[inline]
pub fn spherical_phase(dx_px: i64, dy_px: i64, z: f64, pitch: f64, lambda: f64) -> Complex<f64> {
    let dx = dx_px as f64 * pitch;
    let dy = dy_px as f64 * pitch;
    let r = (dx * dx + dy * dy + z * z).sqrt();
    Complex::from_polar(1.0, std::f64::consts::TAU * (r / lambda))
}

/// Support parameter W for a depth: half the pixel extent reached by the
/// steepest diffracted ray, floor-clamped to one pixel. The support circle
/// has radius 2W pixels, which is always an integer.
pub fn psf_radius<T: Real>(z_c: f64, cfg: &OpticalConfig<T>) -> Result<f64> {
    let lambda = cfg.wavelength.to_f64().unwrap_or(f64::NAN);
    let pitch = cfg.pitch.to_f64().unwrap_or(f64::NAN);
    let sin_theta = lambda / (2.0 * pitch);
    if !(sin_theta < 1.0) {
        return Err(CghError::Config(format!(
            "wavelength {lambda} m cannot be sampled at pitch {pitch} m: maximum diffraction angle reaches the grating limit"
        )));
    }
    let tan_theta = sin_theta.asin().tan();
    let w = (z_c.abs() * tan_theta / pitch).ceil() / 2.0;
    Ok(w.max(1.0))
}

/// Retained coefficient count for a support parameter and selectivity.
pub fn n_strong(w: f64, gamma: f64) -> usize {
    let n = (std::f64::consts::PI * (w / 2.0) * (w / 2.0) * gamma).round();
    (n as usize).max(1)
}

/// Residual offset (r_x, r_y) for a class index; classes enumerate r_y major.
pub fn class_offset(class: usize, level: usize) -> (usize, usize) {
    (class & ((1 << level) - 1), class >> level)
}

/// Inverse of [`class_offset`].
pub fn class_index(r_x: usize, r_y: usize, level: usize) -> usize {
    (r_y << level) | r_x
}

/// Per-slice PSF parameters. `w` may be a half-integer; the footprint radius
/// `2w` is an exact integer pixel count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsfSpec {
    pub slice: usize,
    pub z_c: f64,
    pub w: f64,
    pub n_r: usize,
}

impl PsfSpec {
    /// Parameters for one slice of the configured depth grid. The footprint
    /// is capped at half the tile when `cap_w` is set, otherwise an
    /// oversized footprint is an error.
    pub fn for_slice<T: Real>(slice: usize, cfg: &OpticalConfig<T>) -> Result<PsfSpec> {
        let z_c = cfg.slice_center(slice).to_f64().unwrap_or(f64::NAN);
        let mut w = psf_radius(z_c, cfg)?;
        let limit = cfg.n_h as f64 / 4.0;
        if w > limit {
            if cfg.cap_w {
                w = limit;
            } else {
                return Err(CghError::PsfTooLarge {
                    z: z_c,
                    footprint_px: 2.0 * w,
                    limit_px: cfg.n_h as f64 / 2.0,
                });
            }
        }
        let gamma = cfg.gamma.to_f64().unwrap_or(f64::NAN);
        Ok(PsfSpec {
            slice,
            z_c,
            w,
            n_r: n_strong(w, gamma),
        })
    }

    /// Support circle radius in pixels (an integer value).
    pub fn footprint(&self) -> f64 {
        2.0 * self.w
    }
}

/// Windowed spherical PSF on an `n_h` tile, centered at the tile center plus
/// the residual offset. Depth zero degenerates to a single unit pixel.
/// Support is strict (`dist < 2W`); the rare overhang of a capped footprint
/// past the tile edge is clipped.
pub fn synthesize_psf<T: Real>(
    spec: &PsfSpec,
    offset: (usize, usize),
    cfg: &OpticalConfig<T>,
) -> Result<ComplexField<T>> {
    let stride = 1usize << cfg.level;
    if offset.0 >= stride || offset.1 >= stride {
        return Err(CghError::Config(format!(
            "offset ({}, {}) outside the {stride}x{stride} class grid",
            offset.0, offset.1
        )));
    }
    let n_h = cfg.n_h;
    let (cx, cy) = ((n_h / 2 + offset.0) as i64, (n_h / 2 + offset.1) as i64);
    let mut field = ComplexField::zeros(n_h, n_h);
    if spec.z_c == 0.0 {
        field.set(cx as usize, cy as usize, Complex::new(T::one(), T::zero()));
        return Ok(field);
    }
    let fp = spec.footprint().round() as i64;
    let r2_max = fp * fp;
    let pitch = cfg.pitch.to_f64().unwrap_or(f64::NAN);
    let lambda = cfg.wavelength.to_f64().unwrap_or(f64::NAN);
    let y_lo = (cy - fp + 1).max(0);
    let y_hi = (cy + fp - 1).min(n_h as i64 - 1);
    let x_lo = (cx - fp + 1).max(0);
    let x_hi = (cx + fp - 1).min(n_h as i64 - 1);
    for y in y_lo..=y_hi {
        let dy = y - cy;
        for x in x_lo..=x_hi {
            let dx = x - cx;
            if dx * dx + dy * dy < r2_max {
                let v = spherical_phase(dx, dy, spec.z_c, pitch, lambda);
                field.set(
                    x as usize,
                    y as usize,
                    Complex::new(crate::real(v.re), crate::real(v.im)),
                );
            }
        }
    }
    Ok(field)
}

/// Build statistics: list/entry totals plus how many lists had fewer nonzero
/// coefficients than requested.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LutBuildStats {
    pub lists: usize,
    pub total_entries: usize,
    pub clamped_lists: usize,
    pub seconds: f64,
}

/// The precomputed table: one sparse coefficient list per (depth slice,
/// residual offset class), plus the metadata needed to validate reuse.
#[derive(Debug, Clone)]
pub struct WasabiLut<T: Real = f64> {
    cfg_hash: [u8; 32],
    n_h: usize,
    levels: usize,
    n_z: usize,
    gamma: f64,
    filter: FilterKind,
    mode: LutMode,
    keep_all: bool,
    lists: Vec<SparseCoeffs<T>>,
    stats: LutBuildStats,
}

impl<T: Real> WasabiLut<T> {
    pub(crate) fn from_parts(
        cfg: &OpticalConfig<T>,
        lists: Vec<SparseCoeffs<T>>,
        stats: LutBuildStats,
    ) -> Result<Self> {
        let want = cfg.n_z * cfg.classes_per_slice();
        if lists.len() != want {
            return Err(CghError::Config(format!(
                "lookup table holds {} lists, config needs {want}",
                lists.len()
            )));
        }
        for list in &lists {
            if list.grid != cfg.n_h || list.levels != cfg.level {
                return Err(CghError::Config(format!(
                    "lookup table list shaped {}x{} levels, config needs {}x{}",
                    list.grid, list.levels, cfg.n_h, cfg.level
                )));
            }
            list.validate()?;
        }
        Ok(WasabiLut {
            cfg_hash: cfg.lut_config_hash(),
            n_h: cfg.n_h,
            levels: cfg.level,
            n_z: cfg.n_z,
            gamma: cfg.gamma.to_f64().unwrap_or(f64::NAN),
            filter: cfg.filter,
            mode: cfg.lut_mode,
            keep_all: cfg.keep_all,
            lists,
            stats,
        })
    }

    pub fn cfg_hash(&self) -> [u8; 32] {
        self.cfg_hash
    }

    pub fn n_h(&self) -> usize {
        self.n_h
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn n_z(&self) -> usize {
        self.n_z
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn filter(&self) -> FilterKind {
        self.filter
    }

    pub fn mode(&self) -> LutMode {
        self.mode
    }

    pub fn keep_all(&self) -> bool {
        self.keep_all
    }

    pub fn stats(&self) -> LutBuildStats {
        self.stats
    }

    pub fn classes_per_slice(&self) -> usize {
        match self.mode {
            LutMode::OffsetClasses => 1 << (2 * self.levels),
            LutMode::RoundToGrid => 1,
        }
    }

    pub fn list(&self, slice: usize, class: usize) -> &SparseCoeffs<T> {
        let classes = self.classes_per_slice();
        assert!(slice < self.n_z && class < classes, "LUT index out of range");
        &self.lists[slice * classes + class]
    }

    pub fn lists(&self) -> &[SparseCoeffs<T>] {
        &self.lists
    }

    /// Check that a config would rebuild this exact table.
    pub fn matches<U: Real>(&self, cfg: &OpticalConfig<U>) -> bool {
        self.cfg_hash == cfg.lut_config_hash()
    }
}

/// Precompute the full table: for every slice and class, synthesize the
/// offset PSF, transform it, keep the strongest coefficients. Deterministic
/// for a fixed config regardless of thread count.
pub fn build_lut<T: Real>(cfg: &OpticalConfig<T>) -> Result<WasabiLut<T>> {
    cfg.validate()?;
    let start = std::time::Instant::now();
    let filter = WaveletFilter::<T>::new(cfg.filter);
    let specs = (0..cfg.n_z)
        .map(|i| PsfSpec::for_slice(i, cfg))
        .collect::<Result<Vec<_>>>()?;
    let classes = cfg.classes_per_slice();
    let tasks: Vec<(usize, usize)> = (0..cfg.n_z)
        .flat_map(|s| (0..classes).map(move |c| (s, c)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CghError::Config(format!("cannot start {} worker threads: {e}", cfg.threads)))?;
    let results: Vec<Result<(SparseCoeffs<T>, bool)>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(slice, class)| {
                let spec = &specs[slice];
                let offset = match cfg.lut_mode {
                    LutMode::OffsetClasses => class_offset(class, cfg.level),
                    LutMode::RoundToGrid => (0, 0),
                };
                let annotate = |e: CghError| {
                    CghError::Config(format!(
                        "building table entry for slice {slice} offset ({}, {}): {e}",
                        offset.0, offset.1
                    ))
                };
                let field = synthesize_psf(spec, offset, cfg).map_err(annotate)?;
                let pyr = fwt2(&field, &filter, cfg.level).map_err(annotate)?;
                Ok(pyr.shrink(spec.n_r, cfg.keep_all))
            })
            .collect()
    });
    let mut lists = Vec::with_capacity(results.len());
    let mut clamped_lists = 0usize;
    let mut total_entries = 0usize;
    for r in results {
        let (sparse, clamped) = r?;
        if clamped {
            clamped_lists += 1;
        }
        total_entries += sparse.len();
        lists.push(sparse);
    }
    let stats = LutBuildStats {
        lists: lists.len(),
        total_entries,
        clamped_lists,
        seconds: start.elapsed().as_secs_f64(),
    };
    WasabiLut::from_parts(cfg, lists, stats)
}
