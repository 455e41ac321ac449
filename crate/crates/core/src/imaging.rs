//! Raster model, colour conversion and malignant-region patch extraction.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::math;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ImageError {
    #[error("expected {expected:?} raster, got {actual:?}")]
    Semantics { expected: Semantics, actual: Semantics },
    #[error("raster data has {actual} values, expected {expected}")]
    DataLength { expected: usize, actual: usize },
    #[error("RGB8 raster value {value} outside [0, 255]")]
    OutOfRange { value: f64 },
    #[error("mask is {mask_w}x{mask_h} but image is {image_w}x{image_h}")]
    MaskMismatch { image_w: usize, image_h: usize, mask_w: usize, mask_h: usize },
    #[error("invalid parameter: {0}")]
    Parameter(&'static str),
}

/// What the channels of a raster hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Semantics {
    Rgb8,
    YCbCr,
    SubbandStack12,
    SpectrumReal3,
    Gray1,
}

impl Semantics {
    pub const fn channels(self) -> usize {
        match self {
            Semantics::Rgb8 | Semantics::YCbCr | Semantics::SpectrumReal3 => 3,
            Semantics::SubbandStack12 => 12,
            Semantics::Gray1 => 1,
        }
    }
}

/// Planar raster: channel `c` occupies `data[c*w*h .. (c+1)*w*h]`, each plane
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    semantics: Semantics,
    data: Vec<f64>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, semantics: Semantics, data: Vec<f64>) -> Result<Self, ImageError> {
        let expected = width * height * semantics.channels();
        if data.len() != expected {
            return Err(ImageError::DataLength { expected, actual: data.len() });
        }
        if semantics == Semantics::Rgb8 {
            if let Some(&value) = data.iter().find(|v| !(0.0..=255.0).contains(*v)) {
                return Err(ImageError::OutOfRange { value });
            }
        }
        Ok(Self { width, height, semantics, data })
    }

    /// Builds an RGB8 raster from interleaved `RGBRGB...` bytes.
    pub fn from_rgb8_interleaved(width: usize, height: usize, bytes: &[u8]) -> Result<Self, ImageError> {
        let plane = width * height;
        if bytes.len() != plane * 3 {
            return Err(ImageError::DataLength { expected: plane * 3, actual: bytes.len() });
        }
        let mut data = vec![0.0; plane * 3];
        for (i, px) in bytes.chunks_exact(3).enumerate() {
            for c in 0..3 {
                data[c * plane + i] = f64::from(px[c]);
            }
        }
        Ok(Self { width, height, semantics: Semantics::Rgb8, data })
    }

    /// Constant RGB8 raster.
    pub fn filled_rgb(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let plane = width * height;
        let mut data = Vec::with_capacity(plane * 3);
        for c in rgb {
            data.extend(core::iter::repeat_n(f64::from(c), plane));
        }
        Self { width, height, semantics: Semantics::Rgb8, data }
    }

    /// Stacks single-plane grids into one raster.
    pub fn from_planes(width: usize, height: usize, semantics: Semantics, planes: &[&[f64]]) -> Result<Self, ImageError> {
        let mut data = Vec::with_capacity(width * height * planes.len());
        for p in planes {
            data.extend_from_slice(p);
        }
        Self::new(width, height, semantics, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.semantics.channels()
    }

    #[inline]
    pub fn semantics(&self) -> Semantics {
        self.semantics
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, x: usize, y: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// Interleaved bytes, each value rounded and clamped to `0..=255`.
    pub fn to_rgb8_interleaved(&self) -> Vec<u8> {
        let plane = self.width * self.height;
        let mut out = Vec::with_capacity(plane * 3);
        for i in 0..plane {
            for c in 0..3.min(self.channels()) {
                let v = self.data[c * plane + i];
                out.push(libm::round(v).clamp(0.0, 255.0) as u8);
            }
        }
        out
    }

    /// Sub-rectangle copy. Caller guarantees the rectangle is in bounds.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Self {
        debug_assert!(x0 + w <= self.width && y0 + h <= self.height);
        let mut data = Vec::with_capacity(w * h * self.channels());
        for c in 0..self.channels() {
            for y in y0..y0 + h {
                let start = (c * self.height + y) * self.width + x0;
                data.extend_from_slice(&self.data[start..start + w]);
            }
        }
        Self { width: w, height: h, semantics: self.semantics, data }
    }

    fn expect(&self, semantics: Semantics) -> Result<(), ImageError> {
        if self.semantics == semantics {
            Ok(())
        } else {
            Err(ImageError::Semantics { expected: semantics, actual: self.semantics })
        }
    }
}

/// Binary malignancy mask (true = malignant), row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoiMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl RoiMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, ImageError> {
        if bits.len() != width * height {
            return Err(ImageError::DataLength { expected: width * height, actual: bits.len() });
        }
        Ok(Self { width, height, bits })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self { width, height, bits: vec![value; width * height] }
    }

    /// Mask that is true inside `[x0, x0+w) × [y0, y0+h)`.
    pub fn rect(width: usize, height: usize, x0: usize, y0: usize, w: usize, h: usize) -> Self {
        let mut mask = Self::filled(width, height, false);
        for y in y0..(y0 + h).min(height) {
            for x in x0..(x0 + w).min(width) {
                mask.bits[y * width + x] = true;
            }
        }
        mask
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

/// Square crop of a slide.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub source_wsi: String,
    pub origin: (usize, usize),
    pub image: RasterImage,
}

const LUMA_R: f64 = 0.299;
const LUMA_B: f64 = 0.114;
const LUMA_G: f64 = 1.0 - LUMA_R - LUMA_B;
const CR_SCALE: f64 = 0.713;
const CB_SCALE: f64 = 0.564;

/// Converts to YCbCr with unshifted, unrounded chroma. Output planes are
/// ordered Y, Cb, Cr.
pub fn rgb_to_ycbcr(img: &RasterImage) -> Result<RasterImage, ImageError> {
    img.expect(Semantics::Rgb8)?;
    let n = img.width * img.height;
    let mut data = vec![0.0; 3 * n];
    let (r, rest) = img.data.split_at(n);
    let (g, b) = rest.split_at(n);
    for i in 0..n {
        // Same as αR + βG + γB because α + β + γ = 1, but exact on the
        // gray axis.
        let y = g[i] + LUMA_R * (r[i] - g[i]) + LUMA_B * (b[i] - g[i]);
        data[i] = y;
        data[n + i] = (b[i] - y) * CB_SCALE;
        data[2 * n + i] = (r[i] - y) * CR_SCALE;
    }
    Ok(RasterImage { width: img.width, height: img.height, semantics: Semantics::YCbCr, data })
}

/// Algebraic inverse of [`rgb_to_ycbcr`]. Results are clamped to `[0, 255]`
/// so the output is a valid RGB8 raster; inputs produced by the forward
/// conversion are unaffected beyond rounding noise.
pub fn ycbcr_to_rgb(img: &RasterImage) -> Result<RasterImage, ImageError> {
    img.expect(Semantics::YCbCr)?;
    let n = img.width * img.height;
    let mut data = vec![0.0; 3 * n];
    for i in 0..n {
        let y = img.data[i];
        let cb = img.data[n + i];
        let cr = img.data[2 * n + i];
        let r = y + cr / CR_SCALE;
        let b = y + cb / CB_SCALE;
        let g = (y - LUMA_R * r - LUMA_B * b) / LUMA_G;
        data[i] = r.clamp(0.0, 255.0);
        data[n + i] = g.clamp(0.0, 255.0);
        data[2 * n + i] = b.clamp(0.0, 255.0);
    }
    Ok(RasterImage { width: img.width, height: img.height, semantics: Semantics::Rgb8, data })
}

/// Fraction of pixels whose darkest channel is at least `whiteness`.
pub fn blank_ratio(img: &RasterImage, whiteness: f64) -> Result<f64, ImageError> {
    img.expect(Semantics::Rgb8)?;
    let n = img.width * img.height;
    if n == 0 {
        return Ok(0.0);
    }
    let blank = (0..n)
        .filter(|&i| {
            let m = img.data[i].min(img.data[n + i]).min(img.data[2 * n + i]);
            m >= whiteness
        })
        .count();
    Ok(blank as f64 / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchConfig {
    pub patch_size: usize,
    pub stride: usize,
    /// Windows with a larger blank ratio are dropped.
    pub max_blank: f64,
    /// A pixel counts as blank when `min(R, G, B) >= whiteness`.
    pub whiteness: f64,
    /// Minimum fraction of mask-true pixels inside a window.
    pub roi_cover: f64,
}

impl Default for PatchConfig {
    fn default() -> Self {
        Self::with_patch_size(640)
    }
}

impl PatchConfig {
    /// Defaults with a half-patch stride.
    pub fn with_patch_size(patch_size: usize) -> Self {
        Self { patch_size, stride: (patch_size / 2).max(1), max_blank: 0.3, whiteness: 230.0, roi_cover: 0.5 }
    }
}

/// Axis-aligned bounding box of one 8-connected mask component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Component {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
    pub pixels: usize,
}

impl Component {
    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }
}

/// 8-connected components in order of their first pixel in a row-major scan.
pub fn connected_components(mask: &RoiMask) -> Vec<Component> {
    let (w, h) = (mask.width, mask.height);
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !mask.bits[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut comp = Component { x0: usize::MAX, y0: usize::MAX, x1: 0, y1: 0, pixels: 0 };
        while let Some(idx) = stack.pop() {
            let (x, y) = (idx % w, idx / w);
            comp.x0 = comp.x0.min(x);
            comp.y0 = comp.y0.min(y);
            comp.x1 = comp.x1.max(x);
            comp.y1 = comp.y1.max(y);
            comp.pixels += 1;
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let j = ny * w + nx;
                    if mask.bits[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        out.push(comp);
    }
    out
}

/// Window start offsets along one axis of length `extent`: the stride grid
/// from 0, plus a final window flush with the far edge.
fn window_starts(extent: usize, size: usize, stride: usize) -> Vec<usize> {
    let mut starts = Vec::new();
    if extent < size {
        return starts;
    }
    let last = extent - size;
    let mut s = 0;
    while s <= last {
        starts.push(s);
        s += stride;
    }
    if starts.last() != Some(&last) {
        starts.push(last);
    }
    starts
}

/// Summed-area table over mask bits, `(w+1) × (h+1)`.
struct MaskIntegral {
    stride: usize,
    sums: Vec<u32>,
}

impl MaskIntegral {
    fn new(mask: &RoiMask) -> Self {
        let stride = mask.width + 1;
        let mut sums = vec![0u32; stride * (mask.height + 1)];
        for y in 0..mask.height {
            let mut row = 0u32;
            for x in 0..mask.width {
                row += u32::from(mask.get(x, y));
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        Self { stride, sums }
    }

    fn count(&self, x0: usize, y0: usize, w: usize, h: usize) -> u32 {
        let s = self.stride;
        let (x1, y1) = (x0 + w, y0 + h);
        self.sums[y1 * s + x1] + self.sums[y0 * s + x0] - self.sums[y0 * s + x1] - self.sums[y1 * s + x0]
    }
}

/// Extracts overlapping tissue patches from the malignant regions of a slide.
///
/// Components whose bounding box is narrower or shorter than a patch are
/// skipped. Inside each remaining box windows follow the stride grid from the
/// box origin with the last window clamped to the box edge. A window is kept
/// when enough of it is mask-true and it is not too blank. Output is ordered
/// by component, then `y`, then `x`; an origin already produced by an earlier
/// component is not emitted twice.
pub fn extract_patches(
    wsi_id: &str,
    wsi: &RasterImage,
    mask: &RoiMask,
    cfg: &PatchConfig,
) -> Result<Vec<Patch>, ImageError> {
    wsi.expect(Semantics::Rgb8)?;
    if mask.width != wsi.width || mask.height != wsi.height {
        return Err(ImageError::MaskMismatch {
            image_w: wsi.width,
            image_h: wsi.height,
            mask_w: mask.width,
            mask_h: mask.height,
        });
    }
    if cfg.patch_size == 0 {
        return Err(ImageError::Parameter("patch_size must be positive"));
    }
    if cfg.stride == 0 {
        return Err(ImageError::Parameter("stride must be positive"));
    }
    let ps = cfg.patch_size;
    if ps > wsi.width || ps > wsi.height {
        return Ok(Vec::new());
    }

    let integral = MaskIntegral::new(mask);
    let area = (ps * ps) as f64;
    let mut emitted = BTreeSet::new();
    let mut out = Vec::new();
    for comp in connected_components(mask) {
        if comp.width() < ps || comp.height() < ps {
            continue;
        }
        let xs = window_starts(comp.width(), ps, cfg.stride);
        for dy in window_starts(comp.height(), ps, cfg.stride) {
            let y = comp.y0 + dy;
            for &dx in &xs {
                let x = comp.x0 + dx;
                if emitted.contains(&(y, x)) {
                    continue;
                }
                if f64::from(integral.count(x, y, ps, ps)) < cfg.roi_cover * area {
                    continue;
                }
                let image = wsi.crop(x, y, ps, ps);
                if blank_ratio(&image, cfg.whiteness)? > cfg.max_blank {
                    continue;
                }
                emitted.insert((y, x));
                out.push(Patch { source_wsi: String::from(wsi_id), origin: (x, y), image });
            }
        }
    }
    Ok(out)
}

/// Bilinear resize with half-pixel centres and edge clamping.
pub fn resize_bilinear(img: &RasterImage, out_w: usize, out_h: usize) -> Result<RasterImage, ImageError> {
    if out_w == 0 || out_h == 0 {
        return Err(ImageError::Parameter("output dimensions must be at least 1"));
    }
    let xs = sample_positions(img.width, out_w);
    let ys = sample_positions(img.height, out_h);
    let mut data = Vec::with_capacity(out_w * out_h * img.channels());
    for c in 0..img.channels() {
        let plane = img.plane(c);
        for &(y0, y1, fy) in &ys {
            let r0 = &plane[y0 * img.width..(y0 + 1) * img.width];
            let r1 = &plane[y1 * img.width..(y1 + 1) * img.width];
            for &(x0, x1, fx) in &xs {
                let top = r0[x0] * (1.0 - fx) + r0[x1] * fx;
                let bottom = r1[x0] * (1.0 - fx) + r1[x1] * fx;
                data.push(top * (1.0 - fy) + bottom * fy);
            }
        }
    }
    Ok(RasterImage { width: out_w, height: out_h, semantics: img.semantics, data })
}

/// For each output index: the two source taps and the weight of the second.
fn sample_positions(in_len: usize, out_len: usize) -> Vec<(usize, usize, f64)> {
    let scale = in_len as f64 / out_len as f64;
    let max = (in_len - 1) as f64;
    (0..out_len)
        .map(|o| {
            let src = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, max);
            let i0 = math::floor(src) as usize;
            let i1 = (i0 + 1).min(in_len - 1);
            (i0, i1, src - i0 as f64)
        })
        .collect()
}
