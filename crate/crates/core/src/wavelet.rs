//! Periodized orthogonal wavelet transforms over complex grids, plus the
//! sparse coefficient representation the hologram engine superposes in.
//!
//! Conventions, fixed once here and relied on everywhere else:
//! - analysis: `s[k] = sum_i h[i] x[(2k+i) mod N]`, `d[k]` likewise with `g`;
//! - quadrature mirror: `g[i] = (-1)^i h[L-1-i]`;
//! - synthesis is the exact transpose, `out[(2k+i) mod N] += s[k] h[i] + d[k] g[i]`;
//! - 2-D transforms run rows (along x) first, then columns, per level.
//!
//! Two consequences matter downstream. Circularly shifting the input by a
//! multiple of `2^level` shifts every coefficient grid by the scaled amount
//! with bitwise-identical values, which is what lets one stored coefficient
//! list serve every point in an offset class. And a synthesis atom at index
//! `k` touches only samples `2k .. 2k+L-1` (mod N), so replacing the
//! periodic wrap with dropping keeps all error within a filter-support halo
//! of the grid edge.

use num_complex::Complex;

use crate::error::{CghError, Result};
use crate::field::ComplexField;
use crate::Real;

/// Coiflet lowpass decomposition taps, solved from the defining equations
/// (unit norm row-normalized Gauss-Newton, residuals certified below 1e-18
/// before rounding to f64). Index k gives 6k taps and 2k vanishing moment
/// pairs; the moment center sits at tap 4k-1.
const COIF1: [f64; 6] = [
    -0.015655728135791993,
    -0.07273261951252645,
    0.3848648468648577,
    0.8525720202116004,
    0.33789766245748176,
    -0.07273261951252645,
];

const COIF2: [f64; 12] = [
    -0.000720549445520347,
    -0.0018232088709110314,
    0.0056114348193688325,
    0.023680171946847767,
    -0.059434418646431085,
    -0.07648859907828075,
    0.41700518442323903,
    0.8127236354494135,
    0.38611006682276283,
    -0.0673725547237256,
    -0.04146493678687178,
    0.01638733646320364,
];

const COIF3: [f64; 18] = [
    -3.459977319727269e-05,
    -7.098330250637902e-05,
    0.0004662169598204027,
    0.0011175187708306286,
    -0.0025745176881367946,
    -0.009007976136730616,
    0.015880544863669434,
    0.03455502757329772,
    -0.08230192710629977,
    -0.07179982161915482,
    0.42848347637736994,
    0.7937772226260872,
    0.40517690240911824,
    -0.06112339000297256,
    -0.06577191128146939,
    0.023452696142077175,
    0.007782596425672749,
    -0.0037935128643808037,
];

const COIF4: [f64; 24] = [
    -1.7849909144933454e-06,
    -3.2596479400307485e-06,
    3.122986159919526e-05,
    6.233885431278716e-05,
    -0.00025997433712225676,
    -0.0005890202246332163,
    0.00126656107892566,
    0.0037514346971460858,
    -0.005658283800130883,
    -0.015211728187697211,
    0.025082253337949605,
    0.03933442260558914,
    -0.09622042453595263,
    -0.06662747236681715,
    0.43438603311435653,
    0.7822389344242826,
    0.41530842700068227,
    -0.05607731960356926,
    -0.08126671024919373,
    0.026682304669604834,
    0.01606894713157503,
    -0.00734616793626805,
    -0.001629492425226786,
    0.0008923139025370031,
];

const COIF5: [f64; 30] = [
    -9.604010112766498e-08,
    -1.6237995172046032e-07,
    2.0612203985787225e-06,
    3.700727711339191e-06,
    -2.1270221672514625e-05,
    -4.121986192426352e-05,
    0.00014035632812372847,
    0.0003018579416682336,
    -0.0006375589261258661,
    -0.001661627303929832,
    0.002431575442538222,
    0.006761520220620287,
    -0.009159507338675916,
    -0.01975839160096524,
    0.03267479946705672,
    0.04128753047211762,
    -0.10556315130733612,
    -0.062037751574981925,
    0.437982306659162,
    0.7742936228603277,
    0.4215712667307555,
    -0.05204667025355508,
    -0.09192158806008674,
    0.028169744270532593,
    0.023408322118928036,
    -0.010131584846900379,
    -0.0041593126275786966,
    0.0021782943778457203,
    0.0003585777411617634,
    -0.00021208186206749674,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterKind {
    Coif1,
    Coif2,
    Coif3,
    Coif4,
    Coif5,
}

impl FilterKind {
    pub const ALL: [FilterKind; 5] = [
        FilterKind::Coif1,
        FilterKind::Coif2,
        FilterKind::Coif3,
        FilterKind::Coif4,
        FilterKind::Coif5,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Coif1 => "coif1",
            FilterKind::Coif2 => "coif2",
            FilterKind::Coif3 => "coif3",
            FilterKind::Coif4 => "coif4",
            FilterKind::Coif5 => "coif5",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "coif1" => Ok(FilterKind::Coif1),
            "coif2" => Ok(FilterKind::Coif2),
            "coif3" => Ok(FilterKind::Coif3),
            "coif4" => Ok(FilterKind::Coif4),
            "coif5" => Ok(FilterKind::Coif5),
            other => Err(CghError::UnknownFilter(other.to_string())),
        }
    }

    pub fn taps(self) -> &'static [f64] {
        match self {
            FilterKind::Coif1 => &COIF1,
            FilterKind::Coif2 => &COIF2,
            FilterKind::Coif3 => &COIF3,
            FilterKind::Coif4 => &COIF4,
            FilterKind::Coif5 => &COIF5,
        }
    }

    /// Vanishing moment pairs (the k in coif-k).
    pub fn order(self) -> usize {
        match self {
            FilterKind::Coif1 => 1,
            FilterKind::Coif2 => 2,
            FilterKind::Coif3 => 3,
            FilterKind::Coif4 => 4,
            FilterKind::Coif5 => 5,
        }
    }

    /// Tap index the moment conditions are centered on.
    pub fn moment_center(self) -> usize {
        4 * self.order() - 1
    }
}

impl std::fmt::Display for FilterKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Analysis filter pair in the working scalar type.
#[derive(Debug, Clone)]
pub struct WaveletFilter<T: Real = f64> {
    kind: FilterKind,
    h: Vec<T>,
    g: Vec<T>,
}

impl<T: Real> WaveletFilter<T> {
    pub fn new(kind: FilterKind) -> Self {
        let h: Vec<T> = kind.taps().iter().map(|&v| crate::real(v)).collect();
        let len = h.len();
        let g = (0..len)
            .map(|i| {
                let v = h[len - 1 - i];
                if i % 2 == 0 {
                    v
                } else {
                    -v
                }
            })
            .collect();
        WaveletFilter { kind, h, g }
    }

    pub fn kind(&self) -> FilterKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn lowpass(&self) -> &[T] {
        &self.h
    }

    pub fn highpass(&self) -> &[T] {
        &self.g
    }
}

/// Which coefficient grid a value belongs to. Detail bands are named by the
/// axis that took the highpass: `DetailX` is highpass along x, lowpass along
/// y, and sits in the right-top quadrant of the in-place layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Band {
    Scaling,
    DetailY,
    DetailX,
    DetailXY,
}

impl Band {
    pub const DETAILS: [Band; 3] = [Band::DetailY, Band::DetailX, Band::DetailXY];

    pub fn code(self) -> u8 {
        match self {
            Band::Scaling => 0,
            Band::DetailY => 1,
            Band::DetailX => 2,
            Band::DetailXY => 3,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Band::Scaling),
            1 => Ok(Band::DetailY),
            2 => Ok(Band::DetailX),
            3 => Ok(Band::DetailXY),
            other => Err(CghError::Config(format!("invalid band code {other}"))),
        }
    }
}

/// Detail grids of one decomposition level, each of side `grid >> level`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetailSet<T: Real> {
    pub dx: Vec<Complex<T>>,
    pub dy: Vec<Complex<T>>,
    pub dxy: Vec<Complex<T>>,
}

/// Full multi-level decomposition of a square grid. `details[0]` is the
/// finest level (level 1); the scaling grid belongs to the deepest level.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletPyramid<T: Real = f64> {
    grid: usize,
    levels: usize,
    scaling: Vec<Complex<T>>,
    details: Vec<DetailSet<T>>,
}

impl<T: Real> WaveletPyramid<T> {
    pub fn zeros(grid: usize, levels: usize) -> Result<Self> {
        check_shape(grid, levels)?;
        let zero = Complex::new(T::zero(), T::zero());
        let details = (1..=levels)
            .map(|lev| {
                let side = grid >> lev;
                DetailSet {
                    dx: vec![zero; side * side],
                    dy: vec![zero; side * side],
                    dxy: vec![zero; side * side],
                }
            })
            .collect();
        let s = grid >> levels;
        Ok(WaveletPyramid {
            grid,
            levels,
            scaling: vec![zero; s * s],
            details,
        })
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Side length of the grids at `level` (the scaling grid uses the
    /// deepest level).
    pub fn band_side(&self, level: usize) -> usize {
        self.grid >> level
    }

    pub fn band(&self, band: Band, level: usize) -> &[Complex<T>] {
        match band {
            Band::Scaling => {
                assert_eq!(level, self.levels, "scaling grid lives at the deepest level");
                &self.scaling
            }
            Band::DetailX => &self.details[level - 1].dx,
            Band::DetailY => &self.details[level - 1].dy,
            Band::DetailXY => &self.details[level - 1].dxy,
        }
    }

    pub fn band_mut(&mut self, band: Band, level: usize) -> &mut [Complex<T>] {
        match band {
            Band::Scaling => {
                assert_eq!(level, self.levels, "scaling grid lives at the deepest level");
                &mut self.scaling
            }
            Band::DetailX => &mut self.details[level - 1].dx,
            Band::DetailY => &mut self.details[level - 1].dy,
            Band::DetailXY => &mut self.details[level - 1].dxy,
        }
    }

    pub fn get_at(&self, band: Band, level: usize, m: usize, n: usize) -> Complex<T> {
        let side = self.band_side(level);
        self.band(band, level)[n * side + m]
    }

    /// Accumulate `v` at integer band coordinates, refusing positions
    /// outside the grid. Returns whether the value landed. This is the
    /// boundary policy of the whole engine: shifted coefficients that fall
    /// off the tile are dropped, not wrapped.
    #[inline]
    pub fn add_at(&mut self, band: Band, level: usize, m: i64, n: i64, v: Complex<T>) -> bool {
        let side = self.band_side(level) as i64;
        if m < 0 || n < 0 || m >= side || n >= side {
            return false;
        }
        let slot = &mut self.band_mut(band, level)[(n * side + m) as usize];
        *slot = *slot + v;
        true
    }

    /// Sum of squared magnitudes over every band. Orthonormality makes this
    /// equal the spatial-domain energy.
    pub fn total_energy(&self) -> T {
        let mut e = T::zero();
        for c in &self.scaling {
            e = e + c.norm_sqr();
        }
        for set in &self.details {
            for v in [&set.dx, &set.dy, &set.dxy] {
                for c in v {
                    e = e + c.norm_sqr();
                }
            }
        }
        e
    }

    /// Visit every coefficient as (band, level, m, n, value).
    pub fn for_each(&self, mut f: impl FnMut(Band, usize, usize, usize, Complex<T>)) {
        let s_side = self.band_side(self.levels);
        for n in 0..s_side {
            for m in 0..s_side {
                f(Band::Scaling, self.levels, m, n, self.scaling[n * s_side + m]);
            }
        }
        for lev in 1..=self.levels {
            let side = self.band_side(lev);
            let set = &self.details[lev - 1];
            for (band, data) in [
                (Band::DetailY, &set.dy),
                (Band::DetailX, &set.dx),
                (Band::DetailXY, &set.dxy),
            ] {
                for n in 0..side {
                    for m in 0..side {
                        f(band, lev, m, n, data[n * side + m]);
                    }
                }
            }
        }
    }

    /// Keep the `n_r` strongest coefficients (all nonzero ones when
    /// `keep_all`). Ties break toward the smaller (band, level, m, n) key so
    /// selection is a total order. The flag reports `n_r` exceeding the
    /// nonzero population, in which case everything nonzero is kept.
    pub fn shrink(&self, n_r: usize, keep_all: bool) -> (SparseCoeffs<T>, bool) {
        let mut pool: Vec<(T, CoeffEntry<T>)> = Vec::new();
        self.for_each(|band, level, m, n, c| {
            let mag = c.norm_sqr();
            if mag > T::zero() {
                pool.push((
                    mag,
                    CoeffEntry {
                        band,
                        level: level as u8,
                        m: m as u32,
                        n: n as u32,
                        c,
                    },
                ));
            }
        });
        let mut clamped = false;
        if !keep_all {
            let cmp = |a: &(T, CoeffEntry<T>), b: &(T, CoeffEntry<T>)| {
                b.0.partial_cmp(&a.0)
                    .expect("coefficient magnitudes are finite")
                    .then_with(|| a.1.key().cmp(&b.1.key()))
            };
            if n_r < pool.len() {
                pool.select_nth_unstable_by(n_r, cmp);
                pool.truncate(n_r);
            } else {
                clamped = n_r > pool.len();
            }
        }
        let mut entries: Vec<CoeffEntry<T>> = pool.into_iter().map(|(_, e)| e).collect();
        entries.sort_unstable_by_key(|e| e.key());
        (
            SparseCoeffs {
                grid: self.grid,
                levels: self.levels,
                entries,
            },
            clamped,
        )
    }
}

/// One retained coefficient: band coordinates plus complex value. `m` indexes
/// along x, `n` along y, both within the band's own grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoeffEntry<T: Real = f64> {
    pub band: Band,
    pub level: u8,
    pub m: u32,
    pub n: u32,
    pub c: Complex<T>,
}

impl<T: Real> CoeffEntry<T> {
    pub fn key(&self) -> (u8, u8, u32, u32) {
        (self.band.code(), self.level, self.m, self.n)
    }
}

/// Sparse subset of a pyramid, stored sorted by (band, level, m, n).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCoeffs<T: Real = f64> {
    pub grid: usize,
    pub levels: usize,
    pub entries: Vec<CoeffEntry<T>>,
}

impl<T: Real> SparseCoeffs<T> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Check every entry's band, level, and coordinates against the grid
    /// shape, without allocating a pyramid.
    pub fn validate(&self) -> Result<()> {
        check_shape(self.grid, self.levels)?;
        for e in &self.entries {
            let lev = e.level as usize;
            let valid_level = match e.band {
                Band::Scaling => lev == self.levels,
                _ => lev >= 1 && lev <= self.levels,
            };
            let side = (self.grid >> lev) as u32;
            if !valid_level || e.m >= side || e.n >= side {
                return Err(CghError::Config(format!(
                    "coefficient entry out of range: band {} level {} at ({}, {}) in grid {} levels {}",
                    e.band.code(),
                    e.level,
                    e.m,
                    e.n,
                    self.grid,
                    self.levels
                )));
            }
        }
        Ok(())
    }

    /// Expand back to a dense pyramid, validating every entry's coordinates.
    pub fn densify(&self) -> Result<WaveletPyramid<T>> {
        let mut pyr = WaveletPyramid::zeros(self.grid, self.levels)?;
        for e in &self.entries {
            let lev = e.level as usize;
            let valid_level = match e.band {
                Band::Scaling => lev == self.levels,
                _ => lev >= 1 && lev <= self.levels,
            };
            if !valid_level || !pyr.add_at(e.band, lev, e.m as i64, e.n as i64, e.c) {
                return Err(CghError::Config(format!(
                    "coefficient entry out of range: band {} level {} at ({}, {}) in grid {} levels {}",
                    e.band.code(),
                    e.level,
                    e.m,
                    e.n,
                    self.grid,
                    self.levels
                )));
            }
        }
        Ok(pyr)
    }
}

fn check_shape(grid: usize, levels: usize) -> Result<()> {
    if !grid.is_power_of_two() || grid < 2 {
        return Err(CghError::Config(format!(
            "wavelet grid side must be a power of two >= 2, got {grid}"
        )));
    }
    if levels == 0 || (grid >> levels) == 0 {
        return Err(CghError::Config(format!(
            "cannot decompose a {grid} grid {levels} levels deep"
        )));
    }
    Ok(())
}

#[inline]
fn wrap(mut i: usize, n: usize) -> usize {
    while i >= n {
        i -= n;
    }
    i
}

/// One periodized analysis step: `input` of even length N to N/2 lowpass and
/// N/2 highpass outputs.
fn analyze_1d<T: Real>(
    input: &[Complex<T>],
    h: &[T],
    g: &[T],
    s_out: &mut [Complex<T>],
    d_out: &mut [Complex<T>],
) {
    let n = input.len();
    let half = n / 2;
    for k in 0..half {
        let base = 2 * k;
        let mut s = Complex::new(T::zero(), T::zero());
        let mut d = Complex::new(T::zero(), T::zero());
        for (i, (&hv, &gv)) in h.iter().zip(g.iter()).enumerate() {
            let x = input[wrap(base + i, n)];
            s = s + x * hv;
            d = d + x * gv;
        }
        s_out[k] = s;
        d_out[k] = d;
    }
}

/// Transpose of [`analyze_1d`]: scatter N/2 + N/2 coefficients back to N
/// samples. `out` must arrive zeroed.
fn synthesize_1d<T: Real>(
    s: &[Complex<T>],
    d: &[Complex<T>],
    h: &[T],
    g: &[T],
    out: &mut [Complex<T>],
) {
    let n = out.len();
    for k in 0..s.len() {
        let base = 2 * k;
        let sv = s[k];
        let dv = d[k];
        for (i, (&hv, &gv)) in h.iter().zip(g.iter()).enumerate() {
            let idx = wrap(base + i, n);
            out[idx] = out[idx] + sv * hv + dv * gv;
        }
    }
}

/// Forward transform of a square grid, `levels` deep.
pub fn fwt2<T: Real>(
    field: &ComplexField<T>,
    filter: &WaveletFilter<T>,
    levels: usize,
) -> Result<WaveletPyramid<T>> {
    let grid = field.width();
    if field.height() != grid {
        return Err(CghError::DimensionMismatch {
            got_w: field.width(),
            got_h: field.height(),
            want_w: grid,
            want_h: grid,
        });
    }
    check_shape(grid, levels)?;
    let zero = Complex::new(T::zero(), T::zero());
    let mut buf: Vec<Complex<T>> = field.as_slice().to_vec();
    let mut gather = vec![zero; grid];
    let mut s_tmp = vec![zero; grid / 2];
    let mut d_tmp = vec![zero; grid / 2];
    let (h, g) = (filter.lowpass(), filter.highpass());

    let mut details = Vec::with_capacity(levels);
    let mut n_cur = grid;
    for _lev in 1..=levels {
        let half = n_cur / 2;
        // rows of the active top-left region
        for y in 0..n_cur {
            let row = &buf[y * grid..y * grid + n_cur];
            gather[..n_cur].copy_from_slice(row);
            analyze_1d(&gather[..n_cur], h, g, &mut s_tmp[..half], &mut d_tmp[..half]);
            buf[y * grid..y * grid + half].copy_from_slice(&s_tmp[..half]);
            buf[y * grid + half..y * grid + n_cur].copy_from_slice(&d_tmp[..half]);
        }
        // columns
        for x in 0..n_cur {
            for y in 0..n_cur {
                gather[y] = buf[y * grid + x];
            }
            analyze_1d(&gather[..n_cur], h, g, &mut s_tmp[..half], &mut d_tmp[..half]);
            for y in 0..half {
                buf[y * grid + x] = s_tmp[y];
                buf[(half + y) * grid + x] = d_tmp[y];
            }
        }
        // pull this level's detail quadrants out of the buffer
        let mut dx = vec![zero; half * half];
        let mut dy = vec![zero; half * half];
        let mut dxy = vec![zero; half * half];
        for yy in 0..half {
            for xx in 0..half {
                dx[yy * half + xx] = buf[yy * grid + half + xx];
                dy[yy * half + xx] = buf[(half + yy) * grid + xx];
                dxy[yy * half + xx] = buf[(half + yy) * grid + half + xx];
            }
        }
        details.push(DetailSet { dx, dy, dxy });
        n_cur = half;
    }

    let mut scaling = vec![zero; n_cur * n_cur];
    for yy in 0..n_cur {
        for xx in 0..n_cur {
            scaling[yy * n_cur + xx] = buf[yy * grid + xx];
        }
    }
    Ok(WaveletPyramid {
        grid,
        levels,
        scaling,
        details,
    })
}

/// Inverse transform back to the dense grid.
pub fn ifwt2<T: Real>(pyr: &WaveletPyramid<T>, filter: &WaveletFilter<T>) -> ComplexField<T> {
    let grid = pyr.grid;
    let zero = Complex::new(T::zero(), T::zero());
    let mut buf = vec![zero; grid * grid];
    let mut gather = vec![zero; grid];
    let mut out_tmp = vec![zero; grid];
    let (h, g) = (filter.lowpass(), filter.highpass());

    let s_side = pyr.band_side(pyr.levels);
    for yy in 0..s_side {
        for xx in 0..s_side {
            buf[yy * grid + xx] = pyr.scaling[yy * s_side + xx];
        }
    }
    for lev in (1..=pyr.levels).rev() {
        let n_cur = grid >> (lev - 1);
        let half = n_cur / 2;
        let set = &pyr.details[lev - 1];
        for yy in 0..half {
            for xx in 0..half {
                buf[yy * grid + half + xx] = set.dx[yy * half + xx];
                buf[(half + yy) * grid + xx] = set.dy[yy * half + xx];
                buf[(half + yy) * grid + half + xx] = set.dxy[yy * half + xx];
            }
        }
        // analysis ran rows then columns, so invert columns first
        for x in 0..n_cur {
            for y in 0..n_cur {
                gather[y] = buf[y * grid + x];
            }
            out_tmp[..n_cur].fill(zero);
            synthesize_1d(&gather[..half], &gather[half..n_cur], h, g, &mut out_tmp[..n_cur]);
            for y in 0..n_cur {
                buf[y * grid + x] = out_tmp[y];
            }
        }
        for y in 0..n_cur {
            gather[..n_cur].copy_from_slice(&buf[y * grid..y * grid + n_cur]);
            out_tmp[..n_cur].fill(zero);
            synthesize_1d(&gather[..half], &gather[half..n_cur], h, g, &mut out_tmp[..n_cur]);
            buf[y * grid..y * grid + n_cur].copy_from_slice(&out_tmp[..n_cur]);
        }
    }
    ComplexField::from_vec(grid, grid, buf).expect("buffer sized to grid")
}
