//! Wavelet-domain superposition: place every point's precomputed sparse PSF
//! coefficients into a per-tile accumulator by integer index shifts, then
//! run one inverse transform per tile.
//!
//! Per point the work is the length of its coefficient list, independent of
//! how many pixels its PSF covers. That is the entire speed story; the rest
//! of this module is coordinate bookkeeping (tile re-basing, offset classes,
//! per-level shift scaling) and deterministic parallel plumbing.

use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;

use crate::config::{LutMode, OpticalConfig, PointCloud, TileIndex};
use crate::error::{CghError, Result};
use crate::field::ComplexField;
use crate::psf::{PsfSpec, WasabiLut};
use crate::wavelet::{ifwt2, WaveletFilter, WaveletPyramid};
use crate::Real;

/// One scene point resolved against a specific tile: tile-relative pixel
/// position (which may overhang the tile), its slice and offset class, and
/// the whole-strides shift `base` such that the class PSF lands at the point
/// when every level-l coefficient index moves by `base * 2^(levels - l)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreparedPoint<T: Real = f64> {
    pub x_rel: i64,
    pub y_rel: i64,
    pub slice: usize,
    pub class: usize,
    pub base_x: i64,
    pub base_y: i64,
    pub amp: T,
}

/// The points contributing to one tile, in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct TilePlan<T: Real = f64> {
    pub tile: TileIndex,
    pub points: Vec<PreparedPoint<T>>,
}

/// Point resolved to frame coordinates, before any tile is chosen. The
/// offset class is tile-independent because tile origins are multiples of
/// the class stride.
#[derive(Debug, Clone, Copy)]
struct GlobalPoint<T: Real> {
    ix: i64,
    iy: i64,
    slice: usize,
    class: usize,
    amp: T,
}

fn global_prepare<T: Real>(
    points: &PointCloud<T>,
    cfg: &OpticalConfig<T>,
    specs: &[PsfSpec],
) -> Result<(Vec<GlobalPoint<T>>, u64)> {
    let stride = 1i64 << cfg.level;
    let half_w = cfg.n_w as i64 / 2;
    let mut out = Vec::with_capacity(points.len());
    let mut skipped = 0u64;
    for p in &points.points {
        let slice = cfg.quantize_depth(p.z)?;
        let (ix, iy) = cfg.to_pixel(p.x, p.y);
        let fp = specs[slice].footprint() as i64;
        if (ix - half_w).abs() > half_w + fp || (iy - half_w).abs() > half_w + fp {
            skipped += 1;
            continue;
        }
        let class = match cfg.lut_mode {
            LutMode::OffsetClasses => crate::psf::class_index(
                ix.rem_euclid(stride) as usize,
                iy.rem_euclid(stride) as usize,
                cfg.level,
            ),
            LutMode::RoundToGrid => 0,
        };
        out.push(GlobalPoint {
            ix,
            iy,
            slice,
            class,
            amp: p.a,
        });
    }
    Ok((out, skipped))
}

fn plan_from_global<T: Real>(
    global: &[GlobalPoint<T>],
    tile: TileIndex,
    cfg: &OpticalConfig<T>,
    specs: &[PsfSpec],
) -> TilePlan<T> {
    let (ox, oy) = tile.origin(cfg);
    let n_h = cfg.n_h as i64;
    let half = n_h / 2;
    let stride = 1i64 << cfg.level;
    let points = global
        .iter()
        .filter_map(|g| {
            let x_rel = g.ix - ox;
            let y_rel = g.iy - oy;
            let fp = specs[g.slice].footprint() as i64;
            if (x_rel - half).abs() > half + fp || (y_rel - half).abs() > half + fp {
                return None;
            }
            let (base_x, base_y) = match cfg.lut_mode {
                LutMode::OffsetClasses => (
                    // the class PSF is centered at n_h/2 + residual, so the
                    // remaining displacement is whole strides by construction
                    (x_rel - x_rel.rem_euclid(stride) - half) / stride,
                    (y_rel - y_rel.rem_euclid(stride) - half) / stride,
                ),
                LutMode::RoundToGrid => (
                    // snap to the nearest stride multiple, halves upward
                    (x_rel + stride / 2).div_euclid(stride) - half / stride,
                    (y_rel + stride / 2).div_euclid(stride) - half / stride,
                ),
            };
            Some(PreparedPoint {
                x_rel,
                y_rel,
                slice: g.slice,
                class: g.class,
                base_x,
                base_y,
                amp: g.amp,
            })
        })
        .collect();
    TilePlan { tile, points }
}

/// Resolve which points touch `tile` and how their coefficients shift.
/// Inclusion is generous by each slice's footprint so neighbor points that
/// spill into this tile are kept.
pub fn plan_tile<T: Real>(
    points: &PointCloud<T>,
    tile: TileIndex,
    cfg: &OpticalConfig<T>,
    lut: &WasabiLut<T>,
) -> Result<TilePlan<T>> {
    if !lut.matches(cfg) {
        return Err(CghError::StaleLut);
    }
    plan_tile_unchecked(points, tile, cfg)
}

/// [`plan_tile`] without a table to check against; the pixel-domain engine
/// shares the planning arithmetic but does not always need a table.
pub(crate) fn plan_tile_unchecked<T: Real>(
    points: &PointCloud<T>,
    tile: TileIndex,
    cfg: &OpticalConfig<T>,
) -> Result<TilePlan<T>> {
    let specs = (0..cfg.n_z)
        .map(|i| PsfSpec::for_slice(i, cfg))
        .collect::<Result<Vec<_>>>()?;
    let (global, _) = global_prepare(points, cfg, &specs)?;
    Ok(plan_from_global(&global, tile, cfg, &specs))
}

/// Wavelet-domain accumulation target for one tile.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffAccumulator<T: Real = f64> {
    pyr: WaveletPyramid<T>,
}

impl<T: Real> CoeffAccumulator<T> {
    pub fn new(n_h: usize, levels: usize) -> Result<Self> {
        Ok(CoeffAccumulator {
            pyr: WaveletPyramid::zeros(n_h, levels)?,
        })
    }

    pub fn pyramid(&self) -> &WaveletPyramid<T> {
        &self.pyr
    }

    pub fn pyramid_mut(&mut self) -> &mut WaveletPyramid<T> {
        &mut self.pyr
    }
}

/// Per-superposition tallies. `ops` counts every coefficient visited, which
/// by construction equals the summed list lengths of the planned points;
/// `dropped` counts those whose shifted index fell off the tile.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SuperposeStats {
    pub ops: u64,
    pub dropped: u64,
}

/// Accumulate every planned point's coefficient list, amplitude-scaled and
/// index-shifted. Point order, then stored entry order, fixes the floating
/// accumulation order bit for bit.
pub fn superpose<T: Real>(
    plan: &TilePlan<T>,
    lut: &WasabiLut<T>,
    acc: &mut CoeffAccumulator<T>,
) -> SuperposeStats {
    let lmax = lut.levels();
    let mut stats = SuperposeStats::default();
    for p in &plan.points {
        let list = lut.list(p.slice, p.class);
        for e in &list.entries {
            let lev = e.level as usize;
            let sh = lmax - lev;
            let m = e.m as i64 + (p.base_x << sh);
            let n = e.n as i64 + (p.base_y << sh);
            stats.ops += 1;
            if !acc.pyr.add_at(e.band, lev, m, n, e.c * p.amp) {
                stats.dropped += 1;
            }
        }
    }
    stats
}

/// One inverse transform turns the accumulated coefficients into the tile's
/// complex object wave.
pub fn finalize_tile<T: Real>(acc: &CoeffAccumulator<T>, filter: &WaveletFilter<T>) -> ComplexField<T> {
    ifwt2(&acc.pyr, filter)
}

/// Receives finished tiles, possibly concurrently and in any order.
pub trait TileSink<T: Real>: Sync {
    fn accept(&self, tile: TileIndex, field: ComplexField<T>) -> Result<()>;
}

/// Collects tiles into one full-frame field held in memory.
pub struct AssembleSink<T: Real = f64> {
    n_w: usize,
    n_h: usize,
    field: Mutex<ComplexField<T>>,
}

impl<T: Real> AssembleSink<T> {
    pub fn new(cfg: &OpticalConfig<T>) -> Self {
        AssembleSink {
            n_w: cfg.n_w,
            n_h: cfg.n_h,
            field: Mutex::new(ComplexField::zeros(cfg.n_w, cfg.n_w)),
        }
    }

    pub fn into_field(self) -> ComplexField<T> {
        self.field.into_inner().expect("no panicked tile worker")
    }
}

impl<T: Real> TileSink<T> for AssembleSink<T> {
    fn accept(&self, tile: TileIndex, field: ComplexField<T>) -> Result<()> {
        if field.width() != self.n_h || field.height() != self.n_h {
            return Err(CghError::DimensionMismatch {
                got_w: field.width(),
                got_h: field.height(),
                want_w: self.n_h,
                want_h: self.n_h,
            });
        }
        let ox = tile.s * self.n_h;
        let oy = tile.t * self.n_h;
        let mut full = self.field.lock().expect("no panicked tile worker");
        for y in 0..self.n_h {
            let dst = (oy + y) * self.n_w + ox;
            let src = field.row(y);
            full.as_mut_slice()[dst..dst + self.n_h].copy_from_slice(src);
        }
        Ok(())
    }
}

/// Keeps every delivered tile; handy for tests and per-tile file output.
#[derive(Default)]
pub struct MemSink<T: Real = f64> {
    tiles: Mutex<Vec<(TileIndex, ComplexField<T>)>>,
}

impl<T: Real> MemSink<T> {
    pub fn new() -> Self {
        MemSink {
            tiles: Mutex::new(Vec::new()),
        }
    }

    /// Delivered tiles sorted by (t, s) for deterministic inspection.
    pub fn into_tiles(self) -> Vec<(TileIndex, ComplexField<T>)> {
        let mut v = self.tiles.into_inner().expect("no panicked tile worker");
        v.sort_by_key(|(t, _)| (t.t, t.s));
        v
    }
}

impl<T: Real> TileSink<T> for MemSink<T> {
    fn accept(&self, tile: TileIndex, field: ComplexField<T>) -> Result<()> {
        self.tiles
            .lock()
            .expect("no panicked tile worker")
            .push((tile, field));
        Ok(())
    }
}

/// Discards tiles; used for timing the compute phases alone.
pub struct NullSink;

impl<T: Real> TileSink<T> for NullSink {
    fn accept(&self, _tile: TileIndex, _field: ComplexField<T>) -> Result<()> {
        Ok(())
    }
}

/// Aggregate accounting for a full-frame computation. Phase times are summed
/// across workers, so they can exceed wall time when threads > 1.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ComputeStats {
    pub tiles: usize,
    pub points_in: usize,
    pub skipped_points: u64,
    pub points_per_tile: Vec<usize>,
    pub ops: u64,
    pub dropped_coeffs: u64,
    pub plan_seconds: f64,
    pub superpose_seconds: f64,
    pub ifwt_seconds: f64,
    pub sink_seconds: f64,
    pub wall_seconds: f64,
}

struct TileOutcome {
    points: usize,
    ops: u64,
    dropped: u64,
    plan_s: f64,
    superpose_s: f64,
    ifwt_s: f64,
    sink_s: f64,
}

/// Compute every tile of the frame and hand each to the sink. Tiles are
/// processed in parallel; each tile's content is bitwise independent of the
/// thread count. A sink failure aborts the run with a partial-progress
/// error naming how many tiles had already been delivered.
pub fn compute_full<T: Real, S: TileSink<T>>(
    points: &PointCloud<T>,
    cfg: &OpticalConfig<T>,
    lut: &WasabiLut<T>,
    sink: &S,
) -> Result<ComputeStats> {
    cfg.validate()?;
    points.validate()?;
    if !lut.matches(cfg) {
        return Err(CghError::StaleLut);
    }
    let wall = Instant::now();
    let t0 = Instant::now();
    let specs = (0..cfg.n_z)
        .map(|i| PsfSpec::for_slice(i, cfg))
        .collect::<Result<Vec<_>>>()?;
    let (global, skipped_points) = global_prepare(points, cfg, &specs)?;
    let prepare_s = t0.elapsed().as_secs_f64();

    let tps = cfg.tiles_per_side();
    let tiles: Vec<TileIndex> = (0..tps)
        .flat_map(|t| (0..tps).map(move |s| TileIndex { s, t }))
        .collect();
    let filter = WaveletFilter::<T>::new(cfg.filter);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CghError::Config(format!("cannot start {} worker threads: {e}", cfg.threads)))?;

    let results: Vec<Result<TileOutcome>> = pool.install(|| {
        tiles
            .par_iter()
            .map(|&tile| {
                let t0 = Instant::now();
                let plan = plan_from_global(&global, tile, cfg, &specs);
                let plan_s = t0.elapsed().as_secs_f64();

                let t0 = Instant::now();
                let mut acc = CoeffAccumulator::new(cfg.n_h, cfg.level)?;
                let s = superpose(&plan, lut, &mut acc);
                let superpose_s = t0.elapsed().as_secs_f64();

                let t0 = Instant::now();
                let field = finalize_tile(&acc, &filter);
                let ifwt_s = t0.elapsed().as_secs_f64();

                let t0 = Instant::now();
                sink.accept(tile, field)?;
                let sink_s = t0.elapsed().as_secs_f64();

                Ok(TileOutcome {
                    points: plan.points.len(),
                    ops: s.ops,
                    dropped: s.dropped,
                    plan_s,
                    superpose_s,
                    ifwt_s,
                    sink_s,
                })
            })
            .collect()
    });

    let completed = results.iter().filter(|r| r.is_ok()).count();
    let mut stats = ComputeStats {
        tiles: tiles.len(),
        points_in: points.len(),
        skipped_points,
        points_per_tile: Vec::with_capacity(tiles.len()),
        plan_seconds: prepare_s,
        ..ComputeStats::default()
    };
    for r in results {
        match r {
            Ok(o) => {
                stats.points_per_tile.push(o.points);
                stats.ops += o.ops;
                stats.dropped_coeffs += o.dropped;
                stats.plan_seconds += o.plan_s;
                stats.superpose_seconds += o.superpose_s;
                stats.ifwt_seconds += o.ifwt_s;
                stats.sink_seconds += o.sink_s;
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::PointSource;
    use crate::psf::{build_lut, spherical_phase};
    use crate::wavelet::fwt2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Tiny geometry where everything is fast: 64-pixel tiles, level 2,
    /// one very shallow slice so the PSF footprint is 10 px.
    fn tiny_cfg(n_w: usize) -> OpticalConfig<f64> {
        OpticalConfig {
            n_w,
            n_h: 64,
            z_min: 0.03e-3,
            z_max: 0.03e-3,
            n_z: 1,
            level: 2,
            keep_all: true,
            ..OpticalConfig::default()
        }
    }

    /// Same slice but a 128-pixel tile: wide enough that an interior point's
    /// whole coefficient support can shift without touching a band boundary,
    /// which the exact-placement tests below rely on.
    fn roomy_cfg() -> OpticalConfig<f64> {
        OpticalConfig {
            n_h: 128,
            ..tiny_cfg(128)
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

    /// Paint the exact windowed PSF at an arbitrary center, the direct
    /// placement oracle.
    fn paint_psf(cfg: &OpticalConfig<f64>, spec: &PsfSpec, cx: i64, cy: i64, amp: f64) -> ComplexField<f64> {
        let n = cfg.n_h;
        let mut f = ComplexField::zeros(n, n);
        let fp = spec.footprint() as i64;
        for y in 0..n as i64 {
            for x in 0..n as i64 {
                let (dx, dy) = (x - cx, y - cy);
                if dx * dx + dy * dy < fp * fp {
                    let v = spherical_phase(dx, dy, spec.z_c, cfg.pitch, cfg.wavelength);
                    f.set(x as usize, y as usize, v * amp);
                }
            }
        }
        f
    }

    fn bits_equal(a: &ComplexField<f64>, b: &ComplexField<f64>) -> bool {
        a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| {
            x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits()
        })
    }

    #[test]
    fn rebasing_matches_the_published_arithmetic() {
        // frame pixel (20000, 5000) in tile (2, 0) of an 8192-pixel grid
        let cfg = OpticalConfig::<f64> {
            n_w: 32768,
            n_h: 8192,
            z_min: 0.0,
            z_max: 0.0,
            n_z: 1,
            ..OpticalConfig::default()
        };
        let empty = crate::wavelet::SparseCoeffs::<f64> {
            grid: cfg.n_h,
            levels: cfg.level,
            entries: vec![],
        };
        let lut =
            WasabiLut::from_parts(&cfg, vec![empty; cfg.classes_per_slice()], Default::default())
                .unwrap();
        let cloud = PointCloud::new(vec![point_at_pixel(&cfg, 20000, 5000, 1.0)]);
        let tile = TileIndex::new(2, 0, &cfg).unwrap();
        let plan = plan_tile(&cloud, tile, &cfg, &lut).unwrap();
        assert_eq!(plan.points.len(), 1);
        assert_eq!(plan.points[0].x_rel, 3616);
        assert_eq!(plan.points[0].y_rel, 5000);
    }

    #[test]
    fn empty_plan_leaves_accumulator_zero() {
        let cfg = tiny_cfg(64);
        let lut = build_lut(&cfg).unwrap();
        let plan = plan_tile(&PointCloud::new(vec![]), TileIndex { s: 0, t: 0 }, &cfg, &lut).unwrap();
        let mut acc = CoeffAccumulator::new(cfg.n_h, cfg.level).unwrap();
        let stats = superpose(&plan, &lut, &mut acc);
        assert_eq!(stats, SuperposeStats::default());
        assert_eq!(acc.pyramid().total_energy(), 0.0);
        let tile = finalize_tile(&acc, &WaveletFilter::new(cfg.filter));
        assert_eq!(tile.max_abs(), 0.0);
    }

    #[test]
    fn one_point_accumulates_the_shifted_transform_bitwise() {
        let cfg = roomy_cfg();
        let lut = build_lut(&cfg).unwrap();
        let spec = PsfSpec::for_slice(0, &cfg).unwrap();
        // pixel (68, 56) shares the class of the tile center (64, 64), so the
        // placement is a pure stride shift of (+1, -2); small enough that no
        // coefficient index leaves its band
        let cloud = PointCloud::new(vec![point_at_pixel(&cfg, 68, 56, 2.0)]);
        let plan = plan_tile(&cloud, TileIndex { s: 0, t: 0 }, &cfg, &lut).unwrap();
        assert_eq!(plan.points.len(), 1);
        assert_eq!(plan.points[0].class, 0);
        assert_eq!((plan.points[0].base_x, plan.points[0].base_y), (1, -2));
        let mut acc = CoeffAccumulator::new(cfg.n_h, cfg.level).unwrap();
        let stats = superpose(&plan, &lut, &mut acc);
        assert_eq!(stats.dropped, 0, "interior point must not shed coefficients");
        let oracle_field = paint_psf(&cfg, &spec, 68, 56, 2.0);
        let oracle = fwt2(&oracle_field, &WaveletFilter::new(cfg.filter), cfg.level).unwrap();
        assert_eq!(acc.pyramid(), &oracle);
    }

    #[test]
    fn coincident_points_obey_linearity_bitwise() {
        let cfg = tiny_cfg(64);
        let lut = build_lut(&cfg).unwrap();
        let single = PointCloud::new(vec![point_at_pixel(&cfg, 30, 30, 2.0)]);
        let twice = PointCloud::new(vec![
            point_at_pixel(&cfg, 30, 30, 1.0),
            point_at_pixel(&cfg, 30, 30, 1.0),
        ]);
        let tile = TileIndex { s: 0, t: 0 };
        let mut acc_a = CoeffAccumulator::new(cfg.n_h, cfg.level).unwrap();
        superpose(&plan_tile(&single, tile, &cfg, &lut).unwrap(), &lut, &mut acc_a);
        let mut acc_b = CoeffAccumulator::new(cfg.n_h, cfg.level).unwrap();
        superpose(&plan_tile(&twice, tile, &cfg, &lut).unwrap(), &lut, &mut acc_b);
        assert_eq!(acc_a.pyramid(), acc_b.pyramid());
    }

    #[test]
    fn keep_all_tile_reproduces_the_placed_psf() {
        let cfg = roomy_cfg();
        let lut = build_lut(&cfg).unwrap();
        let spec = PsfSpec::for_slice(0, &cfg).unwrap();
        // pixel (56, 74) sits in offset class (0, 2), exercising a non-center
        // class together with a shift of (-2, +2) strides
        let cloud = PointCloud::new(vec![point_at_pixel(&cfg, 56, 74, 1.0)]);
        let plan = plan_tile(&cloud, TileIndex { s: 0, t: 0 }, &cfg, &lut).unwrap();
        assert_eq!(plan.points[0].class, crate::psf::class_index(0, 2, cfg.level));
        let mut acc = CoeffAccumulator::new(cfg.n_h, cfg.level).unwrap();
        let stats = superpose(&plan, &lut, &mut acc);
        assert_eq!(stats.dropped, 0);
        let tile = finalize_tile(&acc, &WaveletFilter::new(cfg.filter));
        let want = paint_psf(&cfg, &spec, 56, 74, 1.0);
        let err = crate::field::max_abs_error(&tile, &want, 0);
        assert!(err < 1e-10, "keep-all tile off by {err}");
    }

    #[test]
    fn shrunk_tile_equals_shifted_sparse_synthesis_exactly() {
        let mut cfg = tiny_cfg(64);
        cfg.keep_all = false;
        cfg.gamma = 0.5;
        let lut = build_lut(&cfg).unwrap();
        let cloud = PointCloud::new(vec![point_at_pixel(&cfg, 36, 40, 1.0)]);
        let plan = plan_tile(&cloud, TileIndex { s: 0, t: 0 }, &cfg, &lut).unwrap();
        let mut acc = CoeffAccumulator::new(cfg.n_h, cfg.level).unwrap();
        let stats = superpose(&plan, &lut, &mut acc);

        // oracle: move every stored index by hand, shedding exactly the same
        // out-of-band entries the engine sheds
        let p = plan.points[0];
        let list = lut.list(p.slice, p.class);
        let mut oracle = WaveletPyramid::zeros(cfg.n_h, cfg.level).unwrap();
        let mut shed = 0u64;
        for e in &list.entries {
            let sh = cfg.level - e.level as usize;
            let landed = oracle.add_at(
                e.band,
                e.level as usize,
                e.m as i64 + (p.base_x << sh),
                e.n as i64 + (p.base_y << sh),
                e.c,
            );
            if !landed {
                shed += 1;
            }
        }
        assert_eq!(stats.dropped, shed);
        assert_eq!(acc.pyramid(), &oracle);
        let filter = WaveletFilter::new(cfg.filter);
        let tile = finalize_tile(&acc, &filter);
        let via_oracle = ifwt2(&oracle, &filter);
        assert!(bits_equal(&tile, &via_oracle));
        // the kept entries are a bitwise subset of the exact transform, so
        // with an orthogonal filter the field-domain residual must equal the
        // energy fraction the shrinkage dropped
        let spec = PsfSpec::for_slice(0, &cfg).unwrap();
        let exact = paint_psf(&cfg, &spec, 36, 40, 1.0);
        let resid = crate::field::rel_l2_error(&tile, &exact, 0);
        let kept = acc.pyramid().total_energy();
        let total = fwt2(&exact, &filter, cfg.level).unwrap().total_energy();
        let parseval = (1.0 - kept / total).sqrt();
        assert!(resid > 1e-12, "shrinkage dropped nothing");
        assert!(
            (resid - parseval).abs() < 1e-9,
            "residual {resid} vs dropped-energy bound {parseval}"
        );
    }

    #[test]
    fn single_tile_frame_equals_manual_pipeline() {
        let cfg = tiny_cfg(64);
        let lut = build_lut(&cfg).unwrap();
        let cloud = PointCloud::new(vec![
            point_at_pixel(&cfg, 20, 20, 1.0),
            point_at_pixel(&cfg, 40, 28, 0.5),
        ]);
        let sink = AssembleSink::new(&cfg);
        let stats = compute_full(&cloud, &cfg, &lut, &sink).unwrap();
        assert_eq!(stats.tiles, 1);
        assert_eq!(stats.points_per_tile, vec![2]);
        let full = sink.into_field();

        let plan = plan_tile(&cloud, TileIndex { s: 0, t: 0 }, &cfg, &lut).unwrap();
        let mut acc = CoeffAccumulator::new(cfg.n_h, cfg.level).unwrap();
        let s = superpose(&plan, &lut, &mut acc);
        assert_eq!(s.ops, stats.ops);
        let manual = finalize_tile(&acc, &WaveletFilter::new(cfg.filter));
        assert!(bits_equal(&full, &manual));
    }

    #[test]
    fn ops_equal_summed_list_lengths() {
        let cfg = tiny_cfg(128);
        let lut = build_lut(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cloud = PointCloud::new(
            (0..30)
                .map(|_| {
                    point_at_pixel(
                        &cfg,
                        rng.random_range(0..128),
                        rng.random_range(0..128),
                        1.0,
                    )
                })
                .collect(),
        );
        let sink = NullSink;
        let stats = compute_full(&cloud, &cfg, &lut, &sink).unwrap();
        let mut want_ops = 0u64;
        for t in 0..2 {
            for s in 0..2 {
                let plan = plan_tile(&cloud, TileIndex { s, t }, &cfg, &lut).unwrap();
                for p in &plan.points {
                    want_ops += lut.list(p.slice, p.class).len() as u64;
                }
            }
        }
        assert_eq!(stats.ops, want_ops);
        assert!(stats.ops > 0);
    }

    #[test]
    fn edge_point_drops_are_counted() {
        let cfg = tiny_cfg(64);
        let lut = build_lut(&cfg).unwrap();
        // footprint 10 centered 2 px from the left edge: clipped support
        let cloud = PointCloud::new(vec![point_at_pixel(&cfg, 2, 32, 1.0)]);
        let plan = plan_tile(&cloud, TileIndex { s: 0, t: 0 }, &cfg, &lut).unwrap();
        let mut acc = CoeffAccumulator::new(cfg.n_h, cfg.level).unwrap();
        let stats = superpose(&plan, &lut, &mut acc);
        assert!(stats.dropped > 0);
        assert!(stats.dropped < stats.ops);
    }

    #[test]
    fn tiled_frame_is_bitwise_stable_across_thread_counts() {
        let mut cfg = tiny_cfg(256);
        let lut = build_lut(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cloud = PointCloud::new(
            (0..60)
                .map(|_| {
                    point_at_pixel(
                        &cfg,
                        rng.random_range(0..256),
                        rng.random_range(0..256),
                        rng.random_range(0.1..2.0),
                    )
                })
                .collect(),
        );
        let sink_a = AssembleSink::new(&cfg);
        let stats_a = compute_full(&cloud, &cfg, &lut, &sink_a).unwrap();
        cfg.threads = 4;
        let sink_b = AssembleSink::new(&cfg);
        let stats_b = compute_full(&cloud, &cfg, &lut, &sink_b).unwrap();
        assert!(bits_equal(&sink_a.into_field(), &sink_b.into_field()));
        assert_eq!(stats_a.ops, stats_b.ops);
        assert_eq!(stats_a.dropped_coeffs, stats_b.dropped_coeffs);
        assert_eq!(stats_a.points_per_tile, stats_b.points_per_tile);
    }

    #[test]
    fn tiles_only_plan_their_own_neighborhood() {
        let cfg = tiny_cfg(128);
        let lut = build_lut(&cfg).unwrap();
        // one point per tile center: footprints are 10 px, far from seams
        let centers = [(32, 32), (96, 32), (32, 96), (96, 96)];
        let cloud = PointCloud::new(
            centers
                .iter()
                .map(|&(x, y)| point_at_pixel(&cfg, x, y, 1.0))
                .collect(),
        );
        for t in 0..2 {
            for s in 0..2 {
                let plan = plan_tile(&cloud, TileIndex { s, t }, &cfg, &lut).unwrap();
                assert_eq!(plan.points.len(), 1, "tile ({s},{t})");
                assert_eq!(plan.points[0].x_rel, 32);
                assert_eq!(plan.points[0].y_rel, 32);
            }
        }
        // a point on the seam between tiles (0,0) and (1,0) plans into both
        let seam = PointCloud::new(vec![point_at_pixel(&cfg, 64, 20, 1.0)]);
        let left = plan_tile(&seam, TileIndex { s: 0, t: 0 }, &cfg, &lut).unwrap();
        let right = plan_tile(&seam, TileIndex { s: 1, t: 0 }, &cfg, &lut).unwrap();
        assert_eq!(left.points.len(), 1);
        assert_eq!(right.points.len(), 1);
        assert_eq!(left.points[0].x_rel, 64);
        assert_eq!(right.points[0].x_rel, 0);
    }

    #[test]
    fn far_outside_points_are_skipped_with_a_count() {
        let cfg = tiny_cfg(64);
        let lut = build_lut(&cfg).unwrap();
        let far = point_at_pixel(&cfg, 5000, 5000, 1.0);
        let cloud = PointCloud::new(vec![far, point_at_pixel(&cfg, 30, 30, 1.0)]);
        let sink = NullSink;
        let stats = compute_full(&cloud, &cfg, &lut, &sink).unwrap();
        assert_eq!(stats.skipped_points, 1);
        assert_eq!(stats.points_per_tile, vec![1]);
    }

    #[test]
    fn stale_lut_is_rejected() {
        let cfg = tiny_cfg(64);
        let lut = build_lut(&cfg).unwrap();
        let mut other = cfg.clone();
        other.gamma = 0.123;
        other.keep_all = false;
        let cloud = PointCloud::new(vec![]);
        assert!(matches!(
            plan_tile(&cloud, TileIndex { s: 0, t: 0 }, &other, &lut),
            Err(CghError::StaleLut)
        ));
        assert!(matches!(
            compute_full(&cloud, &other, &lut, &NullSink),
            Err(CghError::StaleLut)
        ));
    }

    #[test]
    fn sink_failure_aborts_with_progress() {
        struct FailSink;
        impl TileSink<f64> for FailSink {
            fn accept(&self, tile: TileIndex, _field: ComplexField<f64>) -> Result<()> {
                if tile.s == 1 && tile.t == 1 {
                    Err(CghError::Config("disk full".into()))
                } else {
                    Ok(())
                }
            }
        }
        let cfg = tiny_cfg(128);
        let lut = build_lut(&cfg).unwrap();
        let cloud = PointCloud::new(vec![point_at_pixel(&cfg, 30, 30, 1.0)]);
        match compute_full(&cloud, &cfg, &lut, &FailSink) {
            Err(CghError::Aborted {
                completed_tiles,
                total_tiles,
                cause,
            }) => {
                assert_eq!(total_tiles, 4);
                assert_eq!(completed_tiles, 3);
                assert!(matches!(*cause, CghError::Config(_)));
            }
            other => panic!("expected an abort, got {other:?}"),
        }
    }

    #[test]
    fn round_to_grid_places_near_the_requested_pixel() {
        let mut cfg = roomy_cfg();
        cfg.lut_mode = LutMode::RoundToGrid;
        let lut = build_lut(&cfg).unwrap();
        assert_eq!(lut.classes_per_slice(), 1);
        let spec = PsfSpec::for_slice(0, &cfg).unwrap();
        // pixel (69, 59) snaps to (68, 60) on the stride-4 grid
        let cloud = PointCloud::new(vec![point_at_pixel(&cfg, 69, 59, 1.0)]);
        let plan = plan_tile(&cloud, TileIndex { s: 0, t: 0 }, &cfg, &lut).unwrap();
        assert_eq!(plan.points[0].class, 0);
        assert_eq!((plan.points[0].base_x, plan.points[0].base_y), (1, -1));
        let mut acc = CoeffAccumulator::new(cfg.n_h, cfg.level).unwrap();
        superpose(&plan, &lut, &mut acc);
        let tile = finalize_tile(&acc, &WaveletFilter::new(cfg.filter));
        let want = paint_psf(&cfg, &spec, 68, 60, 1.0);
        let err = crate::field::max_abs_error(&tile, &want, 0);
        assert!(err < 1e-10, "snapped placement off by {err}");
    }
}
