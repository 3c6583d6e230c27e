//! Reference illumination, bipolar interference encoding, binarization, and
//! the frequency-domain propagator used for numerical reconstruction.
//!
//! Encoding is bipolar: the recorded plane is Re(u * conj(R)), which carries
//! the object wave on the reference's spatial carrier without the DC and
//! autocorrelation terms of a literal |u + R|^2 exposure. A printed binary
//! plate transmits its bits times the physical reference, so reconstruction
//! of a bit field multiplies by R before back-propagating; a complex field
//! already is the object wave and is back-propagated as stored.

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::config::{OpticalConfig, TileIndex};
use crate::error::{CghError, Result};
use crate::field::{BitField, ComplexField, RealField};
use crate::Real;

fn reference_patch<T: Real>(
    origin: (i64, i64),
    w: usize,
    h: usize,
    cfg: &OpticalConfig<T>,
) -> ComplexField<T> {
    let pitch = cfg.pitch.to_f64().unwrap_or(f64::NAN);
    let lambda = cfg.wavelength.to_f64().unwrap_or(f64::NAN);
    let xr = cfg.ref_x.to_f64().unwrap_or(f64::NAN);
    let yr = cfg.ref_y.to_f64().unwrap_or(f64::NAN);
    let zr = cfg.ref_z.to_f64().unwrap_or(f64::NAN);
    let half = (cfg.n_w / 2) as i64;
    let mut field = ComplexField::zeros(w, h);
    for gy in 0..h {
        let y = (origin.1 + gy as i64 - half) as f64 * pitch;
        let dy2 = (y - yr) * (y - yr);
        for gx in 0..w {
            let x = (origin.0 + gx as i64 - half) as f64 * pitch;
            let dx = x - xr;
            let r = (dx * dx + dy2 + zr * zr).sqrt();
            let mut v = Complex::from_polar(1.0, std::f64::consts::TAU * (r / lambda));
            if cfg.ref_converging {
                v = v.conj();
            }
            field.set(gx, gy, Complex::new(crate::real(v.re), crate::real(v.im)));
        }
    }
    field
}

/// Spherical reference wave on one tile, evaluated in absolute frame
/// coordinates so adjacent tiles agree along their shared borders.
pub fn reference_wave<T: Real>(tile: TileIndex, cfg: &OpticalConfig<T>) -> ComplexField<T> {
    reference_patch(tile.origin(cfg), cfg.n_h, cfg.n_h, cfg)
}

/// Spherical reference wave over the whole frame.
pub fn reference_frame<T: Real>(cfg: &OpticalConfig<T>) -> ComplexField<T> {
    reference_patch((0, 0), cfg.n_w, cfg.n_w, cfg)
}

/// Bipolar interference plane Re(u * conj(R)).
pub fn interfere<T: Real>(u: &ComplexField<T>, r: &ComplexField<T>) -> Result<RealField<T>> {
    if u.width() != r.width() || u.height() != r.height() {
        return Err(CghError::DimensionMismatch {
            got_w: u.width(),
            got_h: u.height(),
            want_w: r.width(),
            want_h: r.height(),
        });
    }
    let mut out = RealField::zeros(u.width(), u.height());
    for (o, (a, b)) in out
        .as_mut_slice()
        .iter_mut()
        .zip(u.as_slice().iter().zip(r.as_slice()))
    {
        *o = (a * b.conj()).re;
    }
    Ok(out)
}

/// Threshold choice for [`binarize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BinarizeRule {
    /// Open where the bipolar intensity is non-negative.
    #[default]
    Sign,
    /// Open the upper half: threshold at the sorted value with index n/2,
    /// which leaves exactly ceil(n/2) ones when values are distinct.
    Median,
}

/// Reduce a bipolar intensity plane to printable open/closed pixels.
pub fn binarize<T: Real>(intensity: &RealField<T>, rule: BinarizeRule) -> BitField {
    let threshold = match rule {
        BinarizeRule::Sign => T::zero(),
        BinarizeRule::Median => {
            let mut v = intensity.as_slice().to_vec();
            v.sort_unstable_by(|a, b| a.partial_cmp(b).expect("intensities are ordered"));
            v[v.len() / 2]
        }
    };
    let mut bits = BitField::zeros(intensity.width(), intensity.height());
    for y in 0..intensity.height() {
        for x in 0..intensity.width() {
            bits.set(x, y, intensity.get(x, y) >= threshold);
        }
    }
    bits
}

fn fft2<T: Real>(data: &mut [Complex<T>], side: usize, inverse: bool) {
    let mut planner = FftPlanner::<T>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(side)
    } else {
        planner.plan_fft_forward(side)
    };
    for row in data.chunks_exact_mut(side) {
        fft.process(row);
    }
    let mut col = vec![Complex::new(T::zero(), T::zero()); side];
    for x in 0..side {
        for y in 0..side {
            col[y] = data[y * side + x];
        }
        fft.process(&mut col);
        for y in 0..side {
            data[y * side + x] = col[y];
        }
    }
}

fn spatial_frequency(k: usize, side: usize, pitch: f64) -> f64 {
    let signed = if k < side / 2 {
        k as f64
    } else {
        k as f64 - side as f64
    };
    signed / (side as f64 * pitch)
}

/// Propagate a sampled field by the signed distance `d` along the optical
/// axis. Evanescent components are removed, so energy never grows, and the
/// operation is unitary whenever the band limit keeps everything
/// propagating, which holds for every supported pitch/wavelength pair.
pub fn angular_spectrum<T: Real>(
    field: &ComplexField<T>,
    d: f64,
    cfg: &OpticalConfig<T>,
) -> Result<ComplexField<T>> {
    let side = field.width();
    if field.height() != side || !side.is_power_of_two() {
        return Err(CghError::Config(format!(
            "propagation needs a square power-of-two field, got {}x{}",
            field.width(),
            field.height()
        )));
    }
    if d == 0.0 {
        return Ok(field.clone());
    }
    let pitch = cfg.pitch.to_f64().unwrap_or(f64::NAN);
    let lambda = cfg.wavelength.to_f64().unwrap_or(f64::NAN);
    let inv_l2 = 1.0 / (lambda * lambda);
    let mut data = field.as_slice().to_vec();
    fft2(&mut data, side, false);
    for ky in 0..side {
        let fy = spatial_frequency(ky, side, pitch);
        for kx in 0..side {
            let fx = spatial_frequency(kx, side, pitch);
            let arg = inv_l2 - fx * fx - fy * fy;
            let h = if arg < 0.0 {
                Complex::new(0.0, 0.0)
            } else {
                Complex::from_polar(1.0, std::f64::consts::TAU * d * arg.sqrt())
            };
            data[ky * side + kx] *= Complex::new(crate::real::<T>(h.re), crate::real::<T>(h.im));
        }
    }
    fft2(&mut data, side, true);
    let scale = crate::real::<T>(1.0 / (side as f64 * side as f64));
    for v in &mut data {
        *v = *v * scale;
    }
    ComplexField::from_vec(side, side, data)
}

/// A finished hologram: either the full complex object wave or a printable
/// binary plate.
#[derive(Debug, Clone, PartialEq)]
pub enum Hologram<T: Real = f64> {
    Complex(ComplexField<T>),
    Binary(BitField),
}

impl<T: Real> Hologram<T> {
    pub fn width(&self) -> usize {
        match self {
            Hologram::Complex(f) => f.width(),
            Hologram::Binary(b) => b.width(),
        }
    }

    pub fn height(&self) -> usize {
        match self {
            Hologram::Complex(f) => f.height(),
            Hologram::Binary(b) => b.height(),
        }
    }
}

/// Numerical readout: back-propagate the hologram by `z` and return the raw
/// arrival intensity. A binary plate is illuminated by the reference it was
/// recorded with; a complex hologram is the object wave itself.
pub fn reconstruct_intensity<T: Real>(
    holo: &Hologram<T>,
    z: f64,
    cfg: &OpticalConfig<T>,
) -> Result<RealField<T>> {
    if holo.width() != cfg.n_w || holo.height() != cfg.n_w {
        return Err(CghError::DimensionMismatch {
            got_w: holo.width(),
            got_h: holo.height(),
            want_w: cfg.n_w,
            want_h: cfg.n_w,
        });
    }
    let field = match holo {
        Hologram::Complex(u) => u.clone(),
        Hologram::Binary(bits) => {
            let mut r = reference_frame(cfg);
            let data = r.as_mut_slice();
            for y in 0..bits.height() {
                for x in 0..bits.width() {
                    if !bits.get(x, y) {
                        data[y * cfg.n_w + x] = Complex::new(T::zero(), T::zero());
                    }
                }
            }
            r
        }
    };
    Ok(angular_spectrum(&field, -z, cfg)?.intensity())
}

/// [`reconstruct_intensity`] scaled to [0, 1] for viewing and comparison.
pub fn reconstruct<T: Real>(
    holo: &Hologram<T>,
    z: f64,
    cfg: &OpticalConfig<T>,
) -> Result<RealField<T>> {
    Ok(reconstruct_intensity(holo, z, cfg)?.normalized())
}

/// Pearson correlation of two planes, in [-1, 1]; 0 when either plane is
/// constant.
pub fn normalized_cross_correlation<T: Real>(
    a: &RealField<T>,
    b: &RealField<T>,
) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(CghError::DimensionMismatch {
            got_w: a.width(),
            got_h: a.height(),
            want_w: b.width(),
            want_h: b.height(),
        });
    }
    let n = (a.width() * a.height()) as f64;
    let mean = |f: &RealField<T>| {
        f.as_slice()
            .iter()
            .map(|v| v.to_f64().unwrap_or(f64::NAN))
            .sum::<f64>()
            / n
    };
    let (ma, mb) = (mean(a), mean(b));
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
        let da = x.to_f64().unwrap_or(f64::NAN) - ma;
        let db = y.to_f64().unwrap_or(f64::NAN) - mb;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Ok(0.0);
    }
    Ok(cov / (var_a * var_b).sqrt())
}
