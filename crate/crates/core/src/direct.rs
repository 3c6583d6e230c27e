//! Pixel-domain reference engine: stamp each point's windowed wavefront onto
//! the tile, one pixel at a time.
//!
//! Two stamp sources are supported. `Exact` evaluates the true windowed
//! spherical pattern, the conventional baseline every speed claim is measured
//! against. `Shrunk` renders the same truncated coefficient lists the
//! wavelet engine uses, so the two engines can be compared on equal
//! information and the benchmark is a fair pixel-domain versus
//! coefficient-domain contest.
//!
//! Points are processed grouped by depth slice and offset class, in input
//! order within a group. The literal per-pixel evaluator walks the same
//! grouped sequence, so both produce every pixel's partial sums in the same
//! order and agree bit for bit.

use std::time::Instant;

use num_complex::Complex;
use rayon::prelude::*;

use crate::config::{OpticalConfig, PointCloud, TileIndex};
use crate::error::{CghError, Result};
use crate::field::ComplexField;
use crate::psf::{spherical_phase, PsfSpec, WasabiLut};
use crate::wasabi::{plan_tile_unchecked, TilePlan, TileSink};
use crate::wavelet::{ifwt2, WaveletFilter};
use crate::Real;

/// Which rendering of a slice's point response gets stamped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectVariant {
    /// The windowed spherical wavefront itself.
    Exact,
    /// The spatial rendering of the truncated coefficient list.
    Shrunk,
}

/// Windowed wavefront sampled on its own support square, with the reach of
/// the support circle precomputed per row so stamping touches only pixels
/// inside the circle.
struct Patch<T: Real> {
    radius: i64,
    exts: Vec<i64>,
    data: Vec<Complex<T>>,
}

fn build_exact_patch<T: Real>(spec: &PsfSpec, cfg: &OpticalConfig<T>) -> Patch<T> {
    if spec.z_c == 0.0 {
        return Patch {
            radius: 0,
            exts: vec![0],
            data: vec![Complex::new(T::one(), T::zero())],
        };
    }
    let fp = spec.footprint().round() as i64;
    let side = (2 * fp + 1) as usize;
    let pitch = cfg.pitch.to_f64().unwrap_or(f64::NAN);
    let lambda = cfg.wavelength.to_f64().unwrap_or(f64::NAN);
    let mut data = vec![Complex::new(T::zero(), T::zero()); side * side];
    let mut exts = vec![-1i64; side];
    for dy in -fp..=fp {
        let lim = fp * fp - dy * dy;
        if lim <= 0 {
            continue;
        }
        // largest |dx| still strictly inside the circle
        let mut ext = (lim as f64).sqrt() as i64;
        while (ext + 1) * (ext + 1) < lim {
            ext += 1;
        }
        while ext * ext >= lim {
            ext -= 1;
        }
        exts[(dy + fp) as usize] = ext;
        let row = (dy + fp) as usize * side;
        for dx in -ext..=ext {
            let v = spherical_phase(dx, dy, spec.z_c, pitch, lambda);
            data[row + (dx + fp) as usize] = Complex::new(crate::real(v.re), crate::real(v.im));
        }
    }
    Patch {
        radius: fp,
        exts,
        data,
    }
}

/// Single-slot stamp cache. The grouped point order makes one slot perfect:
/// a patch is rebuilt only when the (slice, class) group changes.
pub struct PsfTable<'a, T: Real = f64> {
    lut: Option<&'a WasabiLut<T>>,
    exact: Option<(usize, Patch<T>)>,
    shrunk: Option<((usize, usize), ComplexField<T>)>,
}

impl<'a, T: Real> PsfTable<'a, T> {
    /// Cache for exact stamping only.
    pub fn new() -> Self {
        PsfTable {
            lut: None,
            exact: None,
            shrunk: None,
        }
    }

    /// Cache that can also render stamps from a coefficient table.
    pub fn with_lut(lut: &'a WasabiLut<T>) -> Self {
        PsfTable {
            lut: Some(lut),
            exact: None,
            shrunk: None,
        }
    }

    fn exact_patch(&mut self, spec: &PsfSpec, cfg: &OpticalConfig<T>) -> &Patch<T> {
        if self.exact.as_ref().map(|(s, _)| *s) != Some(spec.slice) {
            self.exact = Some((spec.slice, build_exact_patch(spec, cfg)));
        }
        &self.exact.as_ref().unwrap().1
    }

    fn shrunk_patch(&mut self, slice: usize, class: usize) -> Result<&ComplexField<T>> {
        let lut = self.lut.ok_or_else(|| {
            CghError::Config("stamping truncated responses needs a coefficient table".into())
        })?;
        if self.shrunk.as_ref().map(|(k, _)| *k) != Some((slice, class)) {
            let pyr = lut.list(slice, class).densify()?;
            let filter = WaveletFilter::new(lut.filter());
            self.shrunk = Some(((slice, class), ifwt2(&pyr, &filter)));
        }
        Ok(&self.shrunk.as_ref().unwrap().1)
    }
}

impl<T: Real> Default for PsfTable<'_, T> {
    fn default() -> Self {
        PsfTable::new()
    }
}

/// Pixel tallies for one stamped tile.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DirectStats {
    pub points: usize,
    pub stamped_px: u64,
}

fn stamp_patch<T: Real>(
    field: &mut ComplexField<T>,
    patch: &Patch<T>,
    px: i64,
    py: i64,
    amp: T,
) -> u64 {
    let n = field.width() as i64;
    let r = patch.radius;
    let side = 2 * r + 1;
    let data = field.as_mut_slice();
    let mut stamped = 0u64;
    for dy in (-r).max(-py)..=r.min(n - 1 - py) {
        let ext = patch.exts[(dy + r) as usize];
        if ext < 0 {
            continue;
        }
        let lo = (-ext).max(-px);
        let hi = ext.min(n - 1 - px);
        if lo > hi {
            continue;
        }
        let row = (py + dy) * n + px;
        let prow = (dy + r) * side + r;
        for dx in lo..=hi {
            data[(row + dx) as usize] += patch.data[(prow + dx) as usize] * amp;
        }
        stamped += (hi - lo + 1) as u64;
    }
    stamped
}

fn stamp_translated<T: Real>(
    field: &mut ComplexField<T>,
    patch: &ComplexField<T>,
    dx: i64,
    dy: i64,
    amp: T,
) -> u64 {
    let n = field.width() as i64;
    let sy_lo = 0.max(-dy);
    let sy_hi = (n - 1).min(n - 1 - dy);
    let sx_lo = 0.max(-dx);
    let sx_hi = (n - 1).min(n - 1 - dx);
    if sy_lo > sy_hi || sx_lo > sx_hi {
        return 0;
    }
    let dst = field.as_mut_slice();
    let src = patch.as_slice();
    for sy in sy_lo..=sy_hi {
        // both bases include sx_lo so they are non-negative before the cast
        let from = (sy * n + sx_lo) as usize;
        let to = ((sy + dy) * n + dx + sx_lo) as usize;
        for i in 0..=(sx_hi - sx_lo) as usize {
            dst[to + i] += src[from + i] * amp;
        }
    }
    ((sy_hi - sy_lo + 1) * (sx_hi - sx_lo + 1)) as u64
}

fn superpose_plan<T: Real>(
    plan: &TilePlan<T>,
    cfg: &OpticalConfig<T>,
    specs: &[PsfSpec],
    table: &mut PsfTable<'_, T>,
    variant: DirectVariant,
) -> Result<(ComplexField<T>, DirectStats)> {
    let mut field = ComplexField::zeros(cfg.n_h, cfg.n_h);
    let stride = 1i64 << cfg.level;
    let mut stamped = 0u64;
    for p in &plan.points {
        match variant {
            DirectVariant::Exact => {
                let patch = table.exact_patch(&specs[p.slice], cfg);
                stamped += stamp_patch(&mut field, patch, p.x_rel, p.y_rel, p.amp);
            }
            DirectVariant::Shrunk => {
                let patch = table.shrunk_patch(p.slice, p.class)?;
                stamped +=
                    stamp_translated(&mut field, patch, p.base_x * stride, p.base_y * stride, p.amp);
            }
        }
    }
    Ok((
        field,
        DirectStats {
            points: plan.points.len(),
            stamped_px: stamped,
        },
    ))
}

fn grouped_plan<T: Real>(
    points: &PointCloud<T>,
    tile: TileIndex,
    cfg: &OpticalConfig<T>,
) -> Result<TilePlan<T>> {
    let mut plan = plan_tile_unchecked(points, tile, cfg)?;
    plan.points.sort_by_key(|p| (p.slice, p.class));
    Ok(plan)
}

/// Stamp every point touching `tile`. The table is borrowed mutably so its
/// cached stamps survive across calls.
pub fn direct_superpose<T: Real>(
    points: &PointCloud<T>,
    tile: TileIndex,
    cfg: &OpticalConfig<T>,
    table: &mut PsfTable<'_, T>,
    variant: DirectVariant,
) -> Result<(ComplexField<T>, DirectStats)> {
    if variant == DirectVariant::Shrunk {
        match table.lut {
            None => {
                return Err(CghError::Config(
                    "stamping truncated responses needs a coefficient table".into(),
                ))
            }
            Some(l) if !l.matches(cfg) => return Err(CghError::StaleLut),
            Some(_) => {}
        }
    }
    let specs = (0..cfg.n_z)
        .map(|i| PsfSpec::for_slice(i, cfg))
        .collect::<Result<Vec<_>>>()?;
    let plan = grouped_plan(points, tile, cfg)?;
    superpose_plan(&plan, cfg, &specs, table, variant)
}

/// Evaluate the tile literally: for every pixel, sum the windowed wavefront
/// of every point whose support reaches it. Quadratic and meant for modest
/// sizes, this is the ground truth the stamping path is checked against.
pub fn naive_pixelwise<T: Real>(
    points: &PointCloud<T>,
    tile: TileIndex,
    cfg: &OpticalConfig<T>,
) -> Result<ComplexField<T>> {
    let specs = (0..cfg.n_z)
        .map(|i| PsfSpec::for_slice(i, cfg))
        .collect::<Result<Vec<_>>>()?;
    let plan = grouped_plan(points, tile, cfg)?;
    let pitch = cfg.pitch.to_f64().unwrap_or(f64::NAN);
    let lambda = cfg.wavelength.to_f64().unwrap_or(f64::NAN);
    let n = cfg.n_h as i64;
    let mut field = ComplexField::zeros(cfg.n_h, cfg.n_h);
    for y in 0..n {
        for x in 0..n {
            let mut acc = Complex::new(T::zero(), T::zero());
            for p in &plan.points {
                let (dx, dy) = (x - p.x_rel, y - p.y_rel);
                let spec = &specs[p.slice];
                if spec.z_c == 0.0 {
                    if dx == 0 && dy == 0 {
                        acc += Complex::new(T::one(), T::zero()) * p.amp;
                    }
                    continue;
                }
                let fp = spec.footprint().round() as i64;
                if dx * dx + dy * dy < fp * fp {
                    let v = spherical_phase(dx, dy, spec.z_c, pitch, lambda);
                    acc += Complex::new(crate::real(v.re), crate::real(v.im)) * p.amp;
                }
            }
            field.set(x as usize, y as usize, acc);
        }
    }
    Ok(field)
}

/// Aggregate accounting for a stamped full frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DirectComputeStats {
    pub tiles: usize,
    pub points_in: usize,
    pub skipped_points: u64,
    pub points_per_tile: Vec<usize>,
    pub stamped_px: u64,
    pub wall_seconds: f64,
}

/// Stamp every tile of the frame and hand each to the sink, mirroring the
/// wavelet engine's tiling, ordering, and abort behavior.
pub fn compute_full_direct<T: Real, S: TileSink<T>>(
    points: &PointCloud<T>,
    cfg: &OpticalConfig<T>,
    lut: Option<&WasabiLut<T>>,
    variant: DirectVariant,
    sink: &S,
) -> Result<DirectComputeStats> {
    cfg.validate()?;
    points.validate()?;
    if variant == DirectVariant::Shrunk {
        match lut {
            None => {
                return Err(CghError::Config(
                    "stamping truncated responses needs a coefficient table".into(),
                ))
            }
            Some(l) if !l.matches(cfg) => return Err(CghError::StaleLut),
            Some(_) => {}
        }
    }
    let wall = Instant::now();
    let specs = (0..cfg.n_z)
        .map(|i| PsfSpec::for_slice(i, cfg))
        .collect::<Result<Vec<_>>>()?;
    let tps = cfg.tiles_per_side();
    let tiles: Vec<TileIndex> = (0..tps)
        .flat_map(|t| (0..tps).map(move |s| TileIndex { s, t }))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CghError::Config(format!("cannot start {} worker threads: {e}", cfg.threads)))?;

    struct TileOut {
        points: usize,
        stamped_px: u64,
    }
    let results: Vec<Result<TileOut>> = pool.install(|| {
        tiles
            .par_iter()
            .map_init(
                || match lut {
                    Some(l) => PsfTable::with_lut(l),
                    None => PsfTable::new(),
                },
                |table, &tile| {
                    let plan = grouped_plan(points, tile, cfg)?;
                    let (field, stats) = superpose_plan(&plan, cfg, &specs, table, variant)?;
                    sink.accept(tile, field)?;
                    Ok(TileOut {
                        points: stats.points,
                        stamped_px: stats.stamped_px,
                    })
                },
            )
            .collect()
    });

    let completed = results.iter().filter(|r| r.is_ok()).count();
    let mut stats = DirectComputeStats {
        tiles: tiles.len(),
        points_in: points.len(),
        skipped_points: skipped_count(points, cfg, &specs)?,
        points_per_tile: Vec::with_capacity(tiles.len()),
        ..DirectComputeStats::default()
    };
    for r in results {
        match r {
            Ok(o) => {
                stats.points_per_tile.push(o.points);
                stats.stamped_px += o.stamped_px;
            }
            Err(cause) => {
                return Err(CghError::Aborted {
                    completed_tiles: completed,
                    total_tiles: tiles.len(),
                    cause: Box::new(cause),
                });
            }
        }
    }
    stats.wall_seconds = wall.elapsed().as_secs_f64();
    Ok(stats)
}

fn skipped_count<T: Real>(
    points: &PointCloud<T>,
    cfg: &OpticalConfig<T>,
    specs: &[PsfSpec],
) -> Result<u64> {
    let half_w = cfg.n_w as i64 / 2;
    let mut skipped = 0u64;
    for p in &points.points {
        let slice = cfg.quantize_depth(p.z)?;
        let (ix, iy) = cfg.to_pixel(p.x, p.y);
        let fp = specs[slice].footprint() as i64;
        if (ix - half_w).abs() > half_w + fp || (iy - half_w).abs() > half_w + fp {
            skipped += 1;
        }
    }
    Ok(skipped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::PointSource;
    use crate::psf::build_lut;
    use crate::wasabi::{compute_full, AssembleSink};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn shallow_cfg(n_w: usize, n_h: usize, n_z: usize) -> OpticalConfig<f64> {
        OpticalConfig {
            n_w,
            n_h,
            z_min: 0.02e-3,
            z_max: 0.06e-3,
            n_z,
            level: 2,
            keep_all: true,
            ..OpticalConfig::default()
        }
    }

    fn point_at_pixel(cfg: &OpticalConfig<f64>, ix: i64, iy: i64, a: f64) -> PointSource<f64> {
        PointSource {
            x: cfg.pixel_coord(ix),
            y: cfg.pixel_coord(iy),
            z: cfg.z_min,
            a,
        }
    }

    fn bits_equal(a: &ComplexField<f64>, b: &ComplexField<f64>) -> bool {
        a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| {
            x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits()
        })
    }

    #[test]
    fn empty_cloud_gives_a_dark_tile() {
        let cfg = shallow_cfg(64, 64, 1);
        let mut table = PsfTable::new();
        let (field, stats) = direct_superpose(
            &PointCloud::new(vec![]),
            TileIndex { s: 0, t: 0 },
            &cfg,
            &mut table,
            DirectVariant::Exact,
        )
        .unwrap();
        assert_eq!(field.max_abs(), 0.0);
        assert_eq!(stats, DirectStats::default());
    }

    #[test]
    fn one_point_stamps_the_windowed_wavefront() {
        let cfg = shallow_cfg(64, 64, 1);
        let spec = PsfSpec::for_slice(0, &cfg).unwrap();
        let fp = spec.footprint().round() as i64;
        let cloud = PointCloud::new(vec![point_at_pixel(&cfg, 30, 28, 1.5)]);
        let mut table = PsfTable::new();
        let (field, stats) = direct_superpose(
            &cloud,
            TileIndex { s: 0, t: 0 },
            &cfg,
            &mut table,
            DirectVariant::Exact,
        )
        .unwrap();
        // literal oracle: evaluate the circ-windowed wavefront everywhere
        let pitch = cfg.pitch;
        let lambda = cfg.wavelength;
        let mut inside = 0u64;
        for y in 0..64i64 {
            for x in 0..64i64 {
                let (dx, dy) = (x - 30, y - 28);
                let want = if dx * dx + dy * dy < fp * fp {
                    inside += 1;
                    spherical_phase(dx, dy, spec.z_c, pitch, lambda) * 1.5
                } else {
                    Complex::new(0.0, 0.0)
                };
                let got = field.get(x as usize, y as usize);
                assert_eq!(got.re.to_bits(), want.re.to_bits(), "({x},{y})");
                assert_eq!(got.im.to_bits(), want.im.to_bits(), "({x},{y})");
            }
        }
        assert_eq!(stats.stamped_px, inside);
        assert_eq!(stats.points, 1);
    }

    #[test]
    fn depth_zero_stamps_a_single_pixel() {
        let mut cfg = shallow_cfg(64, 64, 1);
        cfg.z_min = 0.0;
        cfg.z_max = 0.0;
        let cloud = PointCloud::new(vec![point_at_pixel(&cfg, 41, 9, 0.75)]);
        let mut table = PsfTable::new();
        let (field, stats) = direct_superpose(
            &cloud,
            TileIndex { s: 0, t: 0 },
            &cfg,
            &mut table,
            DirectVariant::Exact,
        )
        .unwrap();
        assert_eq!(stats.stamped_px, 1);
        assert_eq!(field.get(41, 9), Complex::new(0.75, 0.0));
        let naive = naive_pixelwise(&cloud, TileIndex { s: 0, t: 0 }, &cfg).unwrap();
        assert!(bits_equal(&field, &naive));
    }

    #[test]
    fn stamping_matches_literal_evaluation_bitwise() {
        let cfg = shallow_cfg(256, 256, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut pts = Vec::new();
        for _ in 0..50 {
            pts.push(PointSource {
                x: cfg.pixel_coord(rng.random_range(-10..266)),
                y: cfg.pixel_coord(rng.random_range(-10..266)),
                z: rng.random_range(cfg.z_min..cfg.z_max),
                a: rng.random_range(0.2..2.0),
            });
        }
        let cloud = PointCloud::new(pts);
        let tile = TileIndex { s: 0, t: 0 };
        let mut table = PsfTable::new();
        let (stamped, _) =
            direct_superpose(&cloud, tile, &cfg, &mut table, DirectVariant::Exact).unwrap();
        let naive = naive_pixelwise(&cloud, tile, &cfg).unwrap();
        assert!(bits_equal(&stamped, &naive));
    }

    #[test]
    fn amplitude_scales_bitwise() {
        let cfg = shallow_cfg(64, 64, 1);
        let tile = TileIndex { s: 0, t: 0 };
        let mut table = PsfTable::new();
        let (half, _) = direct_superpose(
            &PointCloud::new(vec![point_at_pixel(&cfg, 25, 40, 1.0)]),
            tile,
            &cfg,
            &mut table,
            DirectVariant::Exact,
        )
        .unwrap();
        let (full, _) = direct_superpose(
            &PointCloud::new(vec![point_at_pixel(&cfg, 25, 40, 2.0)]),
            tile,
            &cfg,
            &mut table,
            DirectVariant::Exact,
        )
        .unwrap();
        let doubled: Vec<_> = half.as_slice().iter().map(|v| v * 2.0).collect();
        assert!(full
            .as_slice()
            .iter()
            .zip(&doubled)
            .all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()));
    }

    #[test]
    fn tiled_frame_equals_one_naive_frame_bitwise() {
        // four 64-pixel tiles against a single 128-pixel literal evaluation;
        // seam-adjacent points must spill into both neighbors for this to hold
        let cfg = shallow_cfg(128, 64, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pts = vec![
            point_at_pixel(&cfg, 63, 20, 1.0),
            point_at_pixel(&cfg, 64, 90, 0.8),
            point_at_pixel(&cfg, 70, 64, 1.2),
        ];
        for _ in 0..7 {
            pts.push(PointSource {
                x: cfg.pixel_coord(rng.random_range(0..128)),
                y: cfg.pixel_coord(rng.random_range(0..128)),
                z: rng.random_range(cfg.z_min..cfg.z_max),
                a: 1.0,
            });
        }
        let cloud = PointCloud::new(pts);
        let sink = AssembleSink::new(&cfg);
        let stats = compute_full_direct(&cloud, &cfg, None, DirectVariant::Exact, &sink).unwrap();
        assert_eq!(stats.tiles, 4);
        assert_eq!(stats.skipped_points, 0);
        let assembled = sink.into_field();

        let whole = OpticalConfig {
            n_h: 128,
            ..cfg.clone()
        };
        let naive = naive_pixelwise(&cloud, TileIndex { s: 0, t: 0 }, &whole).unwrap();
        assert!(bits_equal(&assembled, &naive));
    }

    #[test]
    fn shrunk_variant_agrees_with_the_coefficient_engine_inside() {
        let cfg = OpticalConfig {
            n_w: 128,
            n_h: 128,
            z_min: 0.03e-3,
            z_max: 0.03e-3,
            n_z: 1,
            level: 2,
            keep_all: false,
            gamma: 0.5,
            ..OpticalConfig::default()
        };
        let lut = build_lut(&cfg).unwrap();
        // supports stay inside the 48 px edge band that tile-boundary
        // truncation may touch
        let cloud = PointCloud::new(vec![
            point_at_pixel(&cfg, 59, 64, 1.0),
            point_at_pixel(&cfg, 64, 68, 0.7),
            point_at_pixel(&cfg, 68, 61, 1.3),
        ]);
        let tile = TileIndex { s: 0, t: 0 };
        let mut table = PsfTable::with_lut(&lut);
        let (stamped, stats) =
            direct_superpose(&cloud, tile, &cfg, &mut table, DirectVariant::Shrunk).unwrap();
        assert!(stats.stamped_px > 0);

        let sink = AssembleSink::new(&cfg);
        compute_full(&cloud, &cfg, &lut, &sink).unwrap();
        let wavelet_tile = sink.into_field();
        let err = crate::field::rel_l2_error(&stamped, &wavelet_tile, 48);
        assert!(err < 1e-9, "engines disagree inside the frame: {err}");
    }

    #[test]
    fn shrunk_variant_requires_a_matching_table() {
        let cfg = shallow_cfg(64, 64, 1);
        let cloud = PointCloud::new(vec![point_at_pixel(&cfg, 30, 30, 1.0)]);
        let tile = TileIndex { s: 0, t: 0 };
        let mut bare = PsfTable::new();
        assert!(matches!(
            direct_superpose(&cloud, tile, &cfg, &mut bare, DirectVariant::Shrunk),
            Err(CghError::Config(_))
        ));
        let lut = build_lut(&cfg).unwrap();
        let mut other = cfg.clone();
        other.gamma = 0.4;
        other.keep_all = false;
        let mut stale = PsfTable::with_lut(&lut);
        assert!(matches!(
            direct_superpose(&cloud, tile, &other, &mut stale, DirectVariant::Shrunk),
            Err(CghError::StaleLut)
        ));
    }

    #[test]
    fn corner_stamps_are_clipped_and_counted() {
        let cfg = shallow_cfg(64, 64, 1);
        let spec = PsfSpec::for_slice(0, &cfg).unwrap();
        let patch = build_exact_patch(&spec, &cfg);
        let full_area: u64 = patch
            .exts
            .iter()
            .filter(|&&e| e >= 0)
            .map(|&e| (2 * e + 1) as u64)
            .sum();
        let mut table = PsfTable::new();
        let (_, interior) = direct_superpose(
            &PointCloud::new(vec![point_at_pixel(&cfg, 32, 32, 1.0)]),
            TileIndex { s: 0, t: 0 },
            &cfg,
            &mut table,
            DirectVariant::Exact,
        )
        .unwrap();
        assert_eq!(interior.stamped_px, full_area);
        let (corner_field, corner) = direct_superpose(
            &PointCloud::new(vec![point_at_pixel(&cfg, 0, 0, 1.0)]),
            TileIndex { s: 0, t: 0 },
            &cfg,
            &mut table,
            DirectVariant::Exact,
        )
        .unwrap();
        assert!(corner.stamped_px < full_area);
        assert!(corner.stamped_px > 0);
        assert!(corner_field.max_abs() > 0.0);
    }
}
