//! Dense 2-D sample grids: complex fields, real images, packed bit planes.
//!
//! All grids are row major with `x` fastest, so sample `(x, y)` lives at
//! `data[y * width + x]`. Pixel `(0, 0)` is the top-left corner of whatever
//! region the grid covers (a tile or the full frame).

use num_complex::Complex;

use crate::error::{CghError, Result};
use crate::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField<T: Real = f64> {
    width: usize,
    height: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> ComplexField<T> {
    pub fn zeros(width: usize, height: usize) -> Self {
        ComplexField {
            width,
            height,
            data: vec![Complex::new(T::zero(), T::zero()); width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != width * height {
            return Err(CghError::DimensionMismatch {
                got_w: data.len(),
                got_h: 1,
                want_w: width,
                want_h: height,
            });
        }
        Ok(ComplexField { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Complex<T> {
        self.data[self.idx(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: Complex<T>) {
        let i = self.idx(x, y);
        self.data[i] = v;
    }

    #[inline]
    pub fn add(&mut self, x: usize, y: usize, v: Complex<T>) {
        let i = self.idx(x, y);
        self.data[i] = self.data[i] + v;
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    pub fn row(&self, y: usize) -> &[Complex<T>] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Pointwise sum; shapes must match.
    pub fn accumulate(&mut self, other: &ComplexField<T>) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(CghError::DimensionMismatch {
                got_w: other.width,
                got_h: other.height,
                want_w: self.width,
                want_h: self.height,
            });
        }
        for (d, s) in self.data.iter_mut().zip(&other.data) {
            *d = *d + *s;
        }
        Ok(())
    }

    pub fn amplitude(&self) -> RealField<T> {
        RealField {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|c| c.norm()).collect(),
        }
    }

    pub fn intensity(&self) -> RealField<T> {
        RealField {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|c| c.norm_sqr()).collect(),
        }
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .map(|c| c.norm())
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealField<T: Real = f64> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Real> RealField<T> {
    pub fn zeros(width: usize, height: usize) -> Self {
        RealField {
            width,
            height,
            data: vec![T::zero(); width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(CghError::DimensionMismatch {
                got_w: data.len(),
                got_h: 1,
                want_w: width,
                want_h: height,
            });
        }
        Ok(RealField { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[self.idx(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        let i = self.idx(x, y);
        self.data[i] = v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn min_max(&self) -> (T, T) {
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for &v in &self.data {
            if v < lo {
                lo = v;
            }
            if v > hi {
                hi = v;
            }
        }
        (lo, hi)
    }

    /// Rescale so values span [0, 1]; a constant image maps to all zeros
    /// being undefined, so it becomes 0.5 everywhere.
    pub fn normalized(&self) -> RealField<T> {
        let (lo, hi) = self.min_max();
        let span = hi - lo;
        let data = if span > T::zero() {
            self.data.iter().map(|&v| (v - lo) / span).collect()
        } else {
            vec![crate::real(0.5); self.data.len()]
        };
        RealField {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// Peak position and value.
    pub fn argmax(&self) -> (usize, usize, T) {
        let mut best = (0, 0, T::neg_infinity());
        for y in 0..self.height {
            for x in 0..self.width {
                let v = self.get(x, y);
                if v > best.2 {
                    best = (x, y, v);
                }
            }
        }
        best
    }
}

/// One bit per pixel, rows packed most significant bit first and padded to a
/// whole byte, the layout binary bitmap files use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitField {
    width: usize,
    height: usize,
    row_bytes: usize,
    data: Vec<u8>,
}

impl BitField {
    pub fn zeros(width: usize, height: usize) -> Self {
        let row_bytes = width.div_ceil(8);
        BitField {
            width,
            height,
            row_bytes,
            data: vec![0; row_bytes * height],
        }
    }

    pub fn from_packed(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        let row_bytes = width.div_ceil(8);
        if data.len() != row_bytes * height {
            return Err(CghError::DimensionMismatch {
                got_w: data.len(),
                got_h: 1,
                want_w: row_bytes,
                want_h: height,
            });
        }
        Ok(BitField {
            width,
            height,
            row_bytes,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn row_bytes(&self) -> usize {
        self.row_bytes
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        debug_assert!(x < self.width && y < self.height);
        let byte = self.data[y * self.row_bytes + x / 8];
        (byte >> (7 - x % 8)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        debug_assert!(x < self.width && y < self.height);
        let i = y * self.row_bytes + x / 8;
        let mask = 1u8 << (7 - x % 8);
        if v {
            self.data[i] |= mask;
        } else {
            self.data[i] &= !mask;
        }
    }

    pub fn count_ones(&self) -> usize {
        // Padding bits are kept zero by set(), so counting bytes is safe.
        self.data.iter().map(|b| b.count_ones() as usize).sum()
    }

    /// Expand to a real grid of zeros and ones.
    pub fn to_real<T: Real>(&self) -> RealField<T> {
        let mut out = RealField::zeros(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    out.set(x, y, T::one());
                }
            }
        }
        out
    }
}

/// Relative L2 error between two complex grids, restricted to the interior
/// that is at least `margin` pixels from every edge. The denominator is the
/// reference norm over the same interior.
pub fn rel_l2_error<T: Real>(got: &ComplexField<T>, want: &ComplexField<T>, margin: usize) -> f64 {
    assert_eq!(got.width(), want.width());
    assert_eq!(got.height(), want.height());
    assert!(2 * margin < got.width() && 2 * margin < got.height(), "margin swallows the grid");
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for y in margin..got.height() - margin {
        for x in margin..got.width() - margin {
            let g = got.get(x, y);
            let w = want.get(x, y);
            let dr = (g.re - w.re).to_f64().unwrap();
            let di = (g.im - w.im).to_f64().unwrap();
            num += dr * dr + di * di;
            den += w.re.to_f64().unwrap().powi(2) + w.im.to_f64().unwrap().powi(2);
        }
    }
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (num / den).sqrt()
    }
}

/// Largest pointwise magnitude difference over the same interior region.
pub fn max_abs_error<T: Real>(got: &ComplexField<T>, want: &ComplexField<T>, margin: usize) -> f64 {
    assert_eq!(got.width(), want.width());
    assert_eq!(got.height(), want.height());
    let mut worst = 0.0f64;
    for y in margin..got.height() - margin {
        for x in margin..got.width() - margin {
            let g = got.get(x, y);
            let w = want.get(x, y);
            let dr = (g.re - w.re).to_f64().unwrap();
            let di = (g.im - w.im).to_f64().unwrap();
            worst = worst.max((dr * dr + di * di).sqrt());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn complex_field_indexing_is_row_major() {
        let mut f = ComplexField::<f64>::zeros(4, 3);
        f.set(1, 2, Complex64::new(7.0, -1.0));
        assert_eq!(f.as_slice()[2 * 4 + 1], Complex64::new(7.0, -1.0));
        assert_eq!(f.get(1, 2), Complex64::new(7.0, -1.0));
        f.add(1, 2, Complex64::new(1.0, 1.0));
        assert_eq!(f.get(1, 2), Complex64::new(8.0, 0.0));
    }

    #[test]
    fn from_vec_checks_length() {
        assert!(ComplexField::<f64>::from_vec(3, 3, vec![Complex64::default(); 8]).is_err());
        assert!(RealField::<f64>::from_vec(2, 2, vec![0.0; 4]).is_ok());
    }

    #[test]
    fn normalization_spans_unit_interval() {
        let f = RealField::from_vec(2, 2, vec![2.0, 4.0, 6.0, 10.0]).unwrap();
        let n = f.normalized();
        assert_eq!(n.min_max(), (0.0, 1.0));
        assert_eq!(n.get(1, 0), 0.25);
        let flat = RealField::from_vec(2, 1, vec![3.0, 3.0]).unwrap().normalized();
        assert_eq!(flat.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn bitfield_packs_msb_first() {
        let mut b = BitField::zeros(10, 2);
        b.set(0, 0, true);
        b.set(1, 0, true);
        b.set(9, 1, true);
        assert_eq!(b.row_bytes(), 2);
        assert_eq!(b.as_bytes(), &[0xC0, 0x00, 0x00, 0x40]);
        assert!(b.get(0, 0) && b.get(1, 0) && b.get(9, 1));
        assert!(!b.get(2, 0));
        assert_eq!(b.count_ones(), 3);
        b.set(0, 0, false);
        assert_eq!(b.count_ones(), 2);
    }

    #[test]
    fn rel_l2_respects_margin() {
        let mut a = ComplexField::<f64>::zeros(8, 8);
        let mut b = ComplexField::<f64>::zeros(8, 8);
        for y in 0..8 {
            for x in 0..8 {
                b.set(x, y, Complex64::new(1.0, 0.0));
                a.set(x, y, Complex64::new(1.0, 0.0));
            }
        }
        // corrupt only the border: squared error (9-1)^2 = 64 over a
        // reference norm of 64 ones, so the full-grid ratio is exactly 1
        a.set(0, 3, Complex64::new(9.0, 0.0));
        assert_eq!(rel_l2_error(&a, &b, 0), 1.0);
        assert_eq!(rel_l2_error(&a, &b, 1), 0.0);
        assert_eq!(max_abs_error(&a, &b, 1), 0.0);
    }
}
