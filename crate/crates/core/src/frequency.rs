//! Fourier and Haar transforms for the frequency-domain patch streams.
//!
//! Real grids are [`Matrix`] values (`rows` = height `M`, `cols` = width `N`).
//! The forward DFT uses the kernel `exp(-2πi(mk/M + nl/N))` without
//! normalisation; the inverse divides by the transform length.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::imaging::{self, ImageError, RasterImage, Semantics};
use crate::math;
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FrequencyError {
    #[error("Haar analysis needs even dimensions, got {rows}x{cols}")]
    OddDimensions { rows: usize, cols: usize },
    #[error("subbands have inconsistent dimensions")]
    SubbandMismatch,
    #[error("transform length must be at least 1")]
    EmptyInput,
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Precomputed transform of one length. Powers of two use an iterative
/// radix-2 kernel; every other length goes through Bluestein's chirp-z
/// reformulation on a power-of-two convolution.
#[derive(Debug, Clone)]
pub struct FftPlan {
    len: usize,
    kind: PlanKind,
}

#[derive(Debug, Clone)]
enum PlanKind {
    Radix2(Radix2),
    Bluestein { chirp: Vec<Complex64>, inner: Radix2, kernel_fwd: Vec<Complex64>, kernel_inv: Vec<Complex64> },
}

/// Forward twiddles `exp(-2πik/N)` for `k < N/2`.
#[derive(Debug, Clone)]
struct Radix2 {
    twiddles: Vec<Complex64>,
}

impl Radix2 {
    fn new(len: usize) -> Self {
        debug_assert!(len.is_power_of_two());
        let twiddles = (0..len / 2)
            .map(|k| {
                let (s, c) = math::sin_cos(-2.0 * PI * k as f64 / len as f64);
                Complex64::new(c, s)
            })
            .collect();
        Self { twiddles }
    }

    /// Unnormalised in-place transform.
    fn process(&self, buf: &mut [Complex64], dir: Direction) {
        let n = buf.len();
        if n <= 1 {
            return;
        }
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                buf.swap(i, j);
            }
        }
        let mut half = 1;
        while half < n {
            let step = n / (2 * half);
            for start in (0..n).step_by(2 * half) {
                for k in 0..half {
                    let mut w = self.twiddles[k * step];
                    if dir == Direction::Inverse {
                        w = w.conj();
                    }
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            half *= 2;
        }
    }
}

impl FftPlan {
    pub fn new(len: usize) -> Result<Self, FrequencyError> {
        if len == 0 {
            return Err(FrequencyError::EmptyInput);
        }
        if len.is_power_of_two() {
            return Ok(Self { len, kind: PlanKind::Radix2(Radix2::new(len)) });
        }
        // w_k = exp(-iπk²/N); k² is reduced mod 2N so the angle stays small.
        let modulus = 2 * len as u128;
        let chirp: Vec<Complex64> = (0..len)
            .map(|k| {
                let k2 = (k as u128 * k as u128) % modulus;
                let (s, c) = math::sin_cos(-PI * k2 as f64 / len as f64);
                Complex64::new(c, s)
            })
            .collect();
        let conv_len = (2 * len - 1).next_power_of_two();
        let inner = Radix2::new(conv_len);
        let kernel = |dir: Direction| {
            let mut b = vec![Complex64::new(0.0, 0.0); conv_len];
            for (k, w) in chirp.iter().enumerate() {
                let v = match dir {
                    Direction::Forward => w.conj(),
                    Direction::Inverse => *w,
                };
                b[k] = v;
                if k > 0 {
                    b[conv_len - k] = v;
                }
            }
            inner.process(&mut b, Direction::Forward);
            b
        };
        let kernel_fwd = kernel(Direction::Forward);
        let kernel_inv = kernel(Direction::Inverse);
        Ok(Self { len, kind: PlanKind::Bluestein { chirp, inner, kernel_fwd, kernel_inv } })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Transforms `buf` in place. The inverse divides by the length.
    pub fn process(&self, buf: &mut [Complex64], dir: Direction) {
        assert_eq!(buf.len(), self.len, "buffer length does not match plan");
        match &self.kind {
            PlanKind::Radix2(kernel) => kernel.process(buf, dir),
            PlanKind::Bluestein { chirp, inner, kernel_fwd, kernel_inv } => {
                let (kernel, sign_conj) = match dir {
                    Direction::Forward => (kernel_fwd, false),
                    Direction::Inverse => (kernel_inv, true),
                };
                let m = kernel.len();
                let mut a = vec![Complex64::new(0.0, 0.0); m];
                for (k, (x, w)) in buf.iter().zip(chirp).enumerate() {
                    a[k] = x * if sign_conj { w.conj() } else { *w };
                }
                inner.process(&mut a, Direction::Forward);
                for (ai, bi) in a.iter_mut().zip(kernel) {
                    *ai *= bi;
                }
                inner.process(&mut a, Direction::Inverse);
                let scale = 1.0 / m as f64;
                for (k, (out, w)) in buf.iter_mut().zip(chirp).enumerate() {
                    let w = if sign_conj { w.conj() } else { *w };
                    *out = a[k] * scale * w;
                }
            }
        }
        if dir == Direction::Inverse {
            let scale = 1.0 / self.len as f64;
            for v in buf.iter_mut() {
                *v *= scale;
            }
        }
    }
}

/// One-dimensional DFT of `signal`.
pub fn fft1d(signal: &[Complex64], dir: Direction) -> Result<Vec<Complex64>, FrequencyError> {
    let plan = FftPlan::new(signal.len())?;
    let mut buf = signal.to_vec();
    plan.process(&mut buf, dir);
    Ok(buf)
}

/// Complex grid in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexGrid {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Option<Self> {
        (data.len() == rows * cols).then_some(Self { rows, cols, data })
    }

    pub fn from_real(grid: &Matrix) -> Self {
        let data = grid.as_slice().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Self { rows: grid.rows(), cols: grid.cols(), data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    pub fn re(&self) -> Matrix {
        let data = self.data.iter().map(|z| z.re).collect();
        Matrix::from_vec(self.rows, self.cols, data).expect("shape preserved")
    }

    pub fn im(&self) -> Matrix {
        let data = self.data.iter().map(|z| z.im).collect();
        Matrix::from_vec(self.rows, self.cols, data).expect("shape preserved")
    }
}

fn transform_2d(grid: &mut ComplexGrid, dir: Direction) -> Result<(), FrequencyError> {
    let (rows, cols) = (grid.rows, grid.cols);
    let row_plan = FftPlan::new(cols)?;
    let col_plan = FftPlan::new(rows)?;
    for r in 0..rows {
        row_plan.process(&mut grid.data[r * cols..(r + 1) * cols], dir);
    }
    let mut column = vec![Complex64::new(0.0, 0.0); rows];
    for c in 0..cols {
        for (r, slot) in column.iter_mut().enumerate() {
            *slot = grid.data[r * cols + c];
        }
        col_plan.process(&mut column, dir);
        for (r, v) in column.iter().enumerate() {
            grid.data[r * cols + c] = *v;
        }
    }
    Ok(())
}

/// Two-dimensional DFT by row then column transforms.
pub fn dft2d(channel: &Matrix) -> Result<ComplexGrid, FrequencyError> {
    let mut grid = ComplexGrid::from_real(channel);
    transform_2d(&mut grid, Direction::Forward)?;
    Ok(grid)
}

/// Inverse of [`dft2d`], normalised by `1/(MN)`.
pub fn idft2d(spectrum: &ComplexGrid) -> Result<ComplexGrid, FrequencyError> {
    let mut grid = spectrum.clone();
    transform_2d(&mut grid, Direction::Inverse)?;
    Ok(grid)
}

/// Moves bin `(0, 0)` to `(rows/2, cols/2)`.
pub fn fftshift(grid: &Matrix) -> Matrix {
    let (rows, cols) = (grid.rows(), grid.cols());
    let mut out = Matrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            out.set((r + rows / 2) % rows, (c + cols / 2) % cols, grid.get(r, c));
        }
    }
    out
}

pub(crate) fn plane_matrix(img: &RasterImage, c: usize) -> Matrix {
    Matrix::from_vec(img.height(), img.width(), img.plane(c).to_vec()).expect("plane shape")
}

fn spectrum_stack(patch: &RasterImage, view: impl Fn(&ComplexGrid) -> Matrix) -> Result<RasterImage, FrequencyError> {
    if patch.semantics() != Semantics::YCbCr {
        return Err(ImageError::Semantics { expected: Semantics::YCbCr, actual: patch.semantics() }.into());
    }
    let mut planes = Vec::with_capacity(3);
    for c in 0..3 {
        let spectrum = dft2d(&plane_matrix(patch, c))?;
        planes.push(fftshift(&view(&spectrum)).into_vec());
    }
    let refs: Vec<&[f64]> = planes.iter().map(Vec::as_slice).collect();
    Ok(RasterImage::from_planes(patch.width(), patch.height(), Semantics::SpectrumReal3, &refs)?)
}

/// Centre-shifted real part of the per-channel DFT of a YCbCr patch.
pub fn dft_stack(patch: &RasterImage) -> Result<RasterImage, FrequencyError> {
    spectrum_stack(patch, ComplexGrid::re)
}

/// Centre-shifted `ln(1 + |I|)` per channel. For inspection only.
pub fn log_magnitude_stack(patch: &RasterImage) -> Result<RasterImage, FrequencyError> {
    spectrum_stack(patch, |g| {
        let data = g.data().iter().map(|z| math::ln_1p(z.norm())).collect();
        Matrix::from_vec(g.rows(), g.cols(), data).expect("shape preserved")
    })
}

/// Binary view: 1 where the per-pixel channel mean exceeds the mean of all
/// spectrum values.
pub fn threshold_view(spectrum: &RasterImage) -> Result<RasterImage, FrequencyError> {
    if spectrum.semantics() != Semantics::SpectrumReal3 {
        return Err(ImageError::Semantics { expected: Semantics::SpectrumReal3, actual: spectrum.semantics() }.into());
    }
    let data = spectrum.data();
    let mean = data.iter().sum::<f64>() / data.len().max(1) as f64;
    let n = spectrum.width() * spectrum.height();
    let out = (0..n)
        .map(|i| {
            let pixel = (data[i] + data[n + i] + data[2 * n + i]) / 3.0;
            if pixel > mean {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Ok(RasterImage::new(spectrum.width(), spectrum.height(), Semantics::Gray1, out)?)
}

/// Level-1 Haar subbands of a grid, each half the input size.
///
/// `lh` holds differences between block rows, `hl` differences between block
/// columns and `hh` the diagonal detail.
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandSet {
    ll: Matrix,
    lh: Matrix,
    hl: Matrix,
    hh: Matrix,
}

impl SubbandSet {
    pub fn new(ll: Matrix, lh: Matrix, hl: Matrix, hh: Matrix) -> Result<Self, FrequencyError> {
        let shape = (ll.rows(), ll.cols());
        if [&lh, &hl, &hh].iter().any(|m| (m.rows(), m.cols()) != shape) {
            return Err(FrequencyError::SubbandMismatch);
        }
        Ok(Self { ll, lh, hl, hh })
    }

    pub fn ll(&self) -> &Matrix {
        &self.ll
    }

    pub fn lh(&self) -> &Matrix {
        &self.lh
    }

    pub fn hl(&self) -> &Matrix {
        &self.hl
    }

    pub fn hh(&self) -> &Matrix {
        &self.hh
    }

    /// Subbands in stacking order (LL, LH, HL, HH).
    pub fn ordered(&self) -> [&Matrix; 4] {
        [&self.ll, &self.lh, &self.hl, &self.hh]
    }
}

/// Orthonormal level-1 Haar analysis. For each 2×2 block `[a b; c d]`:
/// `ll = (a+b+c+d)/2`, `lh = (a+b−c−d)/2`, `hl = (a−b+c−d)/2`,
/// `hh = (a−b−c+d)/2`.
pub fn dwt_haar(grid: &Matrix) -> Result<SubbandSet, FrequencyError> {
    let (rows, cols) = (grid.rows(), grid.cols());
    if rows % 2 != 0 || cols % 2 != 0 {
        return Err(FrequencyError::OddDimensions { rows, cols });
    }
    let (hr, hc) = (rows / 2, cols / 2);
    let mut bands = [Matrix::zeros(hr, hc), Matrix::zeros(hr, hc), Matrix::zeros(hr, hc), Matrix::zeros(hr, hc)];
    for r in 0..hr {
        let top = grid.row(2 * r);
        let bottom = grid.row(2 * r + 1);
        for c in 0..hc {
            let (a, b) = (top[2 * c], top[2 * c + 1]);
            let (cc, d) = (bottom[2 * c], bottom[2 * c + 1]);
            bands[0].set(r, c, (a + b + cc + d) * 0.5);
            bands[1].set(r, c, (a + b - cc - d) * 0.5);
            bands[2].set(r, c, (a - b + cc - d) * 0.5);
            bands[3].set(r, c, (a - b - cc + d) * 0.5);
        }
    }
    let [ll, lh, hl, hh] = bands;
    Ok(SubbandSet { ll, lh, hl, hh })
}

/// Synthesis inverse of [`dwt_haar`].
pub fn idwt_haar(sub: &SubbandSet) -> Matrix {
    let (hr, hc) = (sub.ll.rows(), sub.ll.cols());
    let mut out = Matrix::zeros(2 * hr, 2 * hc);
    for r in 0..hr {
        for c in 0..hc {
            let (s, v, h, d) = (sub.ll.get(r, c), sub.lh.get(r, c), sub.hl.get(r, c), sub.hh.get(r, c));
            out.set(2 * r, 2 * c, (s + v + h + d) * 0.5);
            out.set(2 * r, 2 * c + 1, (s + v - h - d) * 0.5);
            out.set(2 * r + 1, 2 * c, (s - v + h - d) * 0.5);
            out.set(2 * r + 1, 2 * c + 1, (s - v - h + d) * 0.5);
        }
    }
    out
}

/// Twelve-channel subband stack of a YCbCr patch of native size `W×H`.
///
/// The patch is upsampled to `2W×2H` and each channel decomposed, so every
/// subband has the native size. Channels are ordered Y, Cb, Cr and within
/// each channel LL, LH, HL, HH.
pub fn dwt_stack(patch: &RasterImage) -> Result<RasterImage, FrequencyError> {
    if patch.semantics() != Semantics::YCbCr {
        return Err(ImageError::Semantics { expected: Semantics::YCbCr, actual: patch.semantics() }.into());
    }
    let (w, h) = (patch.width(), patch.height());
    let up = imaging::resize_bilinear(patch, 2 * w, 2 * h)?;
    let mut data = Vec::with_capacity(12 * w * h);
    for c in 0..3 {
        let bands = dwt_haar(&plane_matrix(&up, c))?;
        for band in bands.ordered() {
            data.extend_from_slice(band.as_slice());
        }
    }
    Ok(RasterImage::new(w, h, Semantics::SubbandStack12, data)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let out = fft1d(&[c(1.0), c(0.0), c(0.0), c(0.0)], Direction::Forward).unwrap();
        for z in out {
            assert!((z - c(1.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn constant_concentrates_in_dc() {
        for n in [1, 3, 8, 12] {
            let out = fft1d(&vec![c(2.5); n], Direction::Forward).unwrap();
            assert!((out[0] - c(2.5 * n as f64)).norm() < 1e-12);
            for z in &out[1..] {
                assert!(z.norm() < 1e-12, "n={n}");
            }
        }
    }

    #[test]
    fn empty_input_is_rejected() {
        assert_eq!(fft1d(&[], Direction::Forward), Err(FrequencyError::EmptyInput));
    }

    #[test]
    fn constant_grid_dft() {
        let g = Matrix::from_vec(4, 4, vec![3.0; 16]).unwrap();
        let spec = dft2d(&g).unwrap();
        assert!((spec.get(0, 0) - c(48.0)).norm() < 1e-9);
        for (i, z) in spec.data().iter().enumerate().skip(1) {
            assert!(z.norm() < 1e-9, "bin {i}");
        }
        let mut imp = Matrix::zeros(3, 5);
        imp.set(0, 0, 1.0);
        for z in dft2d(&imp).unwrap().data() {
            assert!((z - c(1.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn shift_centres_dc() {
        let mut g = Matrix::zeros(4, 6);
        g.set(0, 0, 1.0);
        let s = fftshift(&g);
        assert_eq!(s.get(2, 3), 1.0);
        let mut g = Matrix::zeros(5, 5);
        g.set(0, 0, 1.0);
        assert_eq!(fftshift(&g).get(2, 2), 1.0);
    }

    #[test]
    fn dft_stack_of_constant_channel() {
        let y = RasterImage::new(4, 4, Semantics::YCbCr, [vec![2.0; 16], vec![0.0; 16], vec![0.0; 16]].concat()).unwrap();
        let s = dft_stack(&y).unwrap();
        assert_eq!(s.semantics(), Semantics::SpectrumReal3);
        assert_eq!((s.width(), s.height()), (4, 4));
        for yy in 0..4 {
            for xx in 0..4 {
                let want = if (xx, yy) == (2, 2) { 32.0 } else { 0.0 };
                assert!((s.get(0, xx, yy) - want).abs() < 1e-9);
                assert!(s.get(1, xx, yy).abs() < 1e-12);
            }
        }
        let rgb = RasterImage::filled_rgb(4, 4, [1, 2, 3]);
        assert!(dft_stack(&rgb).is_err());
    }

    #[test]
    fn threshold_of_constant_and_two_level() {
        let s = RasterImage::new(2, 2, Semantics::SpectrumReal3, vec![4.0; 12]).unwrap();
        assert!(threshold_view(&s).unwrap().data().iter().all(|&v| v == 0.0));
        let plane = [0.0, 10.0, 0.0, 10.0];
        let s = RasterImage::new(2, 2, Semantics::SpectrumReal3, plane.repeat(3)).unwrap();
        assert_eq!(threshold_view(&s).unwrap().data(), &[0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn haar_of_constant_and_row_constant() {
        let g = Matrix::from_vec(4, 4, vec![1.5; 16]).unwrap();
        let b = dwt_haar(&g).unwrap();
        assert!(b.ll().as_slice().iter().all(|&v| v == 3.0));
        assert!(b.lh().as_slice().iter().chain(b.hl().as_slice()).chain(b.hh().as_slice()).all(|&v| v == 0.0));

        // Identical rows: no vertical variation inside any block.
        let row = [1.0, 4.0, -2.0, 7.0];
        let g = Matrix::from_rows(&[row.to_vec(), row.to_vec(), row.to_vec(), row.to_vec()]).unwrap();
        let b = dwt_haar(&g).unwrap();
        assert!(b.lh().as_slice().iter().all(|&v| v == 0.0));
        assert!(b.hh().as_slice().iter().all(|&v| v == 0.0));
        assert!(b.hl().as_slice().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn haar_rejects_odd_and_mismatched() {
        assert!(matches!(dwt_haar(&Matrix::zeros(3, 4)), Err(FrequencyError::OddDimensions { .. })));
        let z = Matrix::zeros(2, 2);
        assert_eq!(
            SubbandSet::new(z.clone(), z.clone(), z.clone(), Matrix::zeros(2, 3)),
            Err(FrequencyError::SubbandMismatch)
        );
        let zero = SubbandSet::new(z.clone(), z.clone(), z.clone(), z).unwrap();
        assert!(idwt_haar(&zero).as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dwt_stack_of_gray_patch() {
        let gray = RasterImage::filled_rgb(6, 6, [90, 90, 90]);
        let ycc = imaging::rgb_to_ycbcr(&gray).unwrap();
        let stack = dwt_stack(&ycc).unwrap();
        assert_eq!(stack.semantics(), Semantics::SubbandStack12);
        assert_eq!((stack.width(), stack.height()), (6, 6));
        for ch in 0..12 {
            let want = if ch == 0 { 180.0 } else { 0.0 };
            assert!(stack.plane(ch).iter().all(|&v| (v - want).abs() < 1e-12), "channel {ch}");
        }
    }
}
