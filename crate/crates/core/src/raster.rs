//! Pixel grids and the low-level image math shared by every stage:
//! sRGB <-> CIE L*a*b* conversion, Sobel gradients, summed-area tables.
//!
//! Images are stored row-major with interleaved channels. 8-bit rasters are
//! always sRGB-encoded (or 8-bit gray); float rasters carry a [`Colorspace`]
//! tag saying how to interpret the samples.

use std::path::Path;

use image::{ImageBuffer, Luma, Rgb};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("expected {expected} channel(s), got {actual}")]
    InvalidChannelCount { expected: usize, actual: usize },
    #[error("image {width}x{height} is smaller than the required {min}x{min}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min: usize,
    },
    #[error("buffer length {actual} does not match {width}x{height}x{channels}")]
    BufferLength {
        width: usize,
        height: usize,
        channels: usize,
        actual: usize,
    },
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("expected colorspace {expected:?}, got {actual:?}")]
    WrongColorspace {
        expected: Colorspace,
        actual: Colorspace,
    },
    #[error("image i/o: {0}")]
    Image(#[from] image::ImageError),
}

pub type Result<T, E = RasterError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Colorspace {
    Srgb8,
    LinearRgb,
    Lab,
    Gray,
}

/// A `width x height x channels` pixel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    width: usize,
    height: usize,
    channels: usize,
    colorspace: Colorspace,
    data: Vec<T>,
}

/// 8-bit sRGB (or 8-bit gray) image.
pub type RasterImage = Raster<u8>;
/// Float image: linear RGB, Lab, or gray depending on its tag.
pub type FloatImage = Raster<f32>;

impl<T: Copy> Raster<T> {
    pub fn from_vec(
        width: usize,
        height: usize,
        channels: usize,
        colorspace: Colorspace,
        data: Vec<T>,
    ) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(RasterError::InvalidChannelCount {
                expected: 3,
                actual: channels,
            });
        }
        if data.len() != width * height * channels {
            return Err(RasterError::BufferLength {
                width,
                height,
                channels,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            colorspace,
            data,
        })
    }

    pub fn filled(
        width: usize,
        height: usize,
        channels: usize,
        colorspace: Colorspace,
        value: T,
    ) -> Self {
        Self::from_vec(
            width,
            height,
            channels,
            colorspace,
            vec![value; width * height * channels],
        )
        .expect("filled raster is consistent by construction")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn colorspace(&self) -> Colorspace {
        self.colorspace
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        (y * self.width + x) * self.channels
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[T] {
        let i = self.index(x, y);
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [T] {
        let i = self.index(x, y);
        let c = self.channels;
        &mut self.data[i..i + c]
    }

    /// Copies out the sub-rectangle `[x0, x0+w) x [y0, y0+h)`. Panics if it
    /// does not lie inside the image.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Self {
        assert!(
            x0 + w <= self.width && y0 + h <= self.height,
            "crop out of bounds"
        );
        let mut data = Vec::with_capacity(w * h * self.channels);
        for y in y0..y0 + h {
            let start = self.index(x0, y);
            data.extend_from_slice(&self.data[start..start + w * self.channels]);
        }
        Self {
            width: w,
            height: h,
            channels: self.channels,
            colorspace: self.colorspace,
            data,
        }
    }

    pub fn same_size<U>(&self, other: &Raster<U>) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// One CIE L*a*b* color (D65).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LabPixel {
    pub l: f32,
    pub a: f32,
    pub b: f32,
}

impl LabPixel {
    pub fn new(l: f32, a: f32, b: f32) -> Self {
        Self { l, a, b }
    }

    pub fn distance(&self, other: &LabPixel) -> f32 {
        let (dl, da, db) = (self.l - other.l, self.a - other.a, self.b - other.b);
        (dl * dl + da * da + db * db).sqrt()
    }
}

// sRGB primaries to XYZ, D65.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

// White point taken as the image of RGB (1,1,1) so the gray axis maps to a = b = 0.
const WHITE: [f64; 3] = [
    RGB_TO_XYZ[0][0] + RGB_TO_XYZ[0][1] + RGB_TO_XYZ[0][2],
    RGB_TO_XYZ[1][0] + RGB_TO_XYZ[1][1] + RGB_TO_XYZ[1][2],
    RGB_TO_XYZ[2][0] + RGB_TO_XYZ[2][1] + RGB_TO_XYZ[2][2],
];

const LAB_EPSILON: f64 = 216.0 / 24389.0;
const LAB_KAPPA: f64 = 24389.0 / 27.0;

fn invert3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let inv = 1.0 / det;
    [
        [
            (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv,
            (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv,
            (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv,
        ],
        [
            (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv,
            (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv,
            (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv,
        ],
        [
            (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv,
            (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv,
            (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv,
        ],
    ]
}

fn xyz_to_rgb_matrix() -> &'static [[f64; 3]; 3] {
    static M: std::sync::OnceLock<[[f64; 3]; 3]> = std::sync::OnceLock::new();
    M.get_or_init(|| invert3(&RGB_TO_XYZ))
}

/// sRGB EOTF for a normalized value.
#[inline]
pub fn srgb_decode(v: f64) -> f64 {
    if v <= 0.040_45 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

/// Inverse sRGB EOTF for a normalized linear value.
#[inline]
pub fn srgb_encode(v: f64) -> f64 {
    if v <= 0.003_130_8 {
        v * 12.92
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

fn decode_lut() -> &'static [f64; 256] {
    static LUT: std::sync::OnceLock<[f64; 256]> = std::sync::OnceLock::new();
    LUT.get_or_init(|| {
        let mut t = [0.0; 256];
        for (i, v) in t.iter_mut().enumerate() {
            *v = srgb_decode(i as f64 / 255.0);
        }
        t
    })
}

/// 8-bit sRGB code value to linear light in [0, 1].
#[inline]
pub fn srgb8_to_linear(v: u8) -> f64 {
    decode_lut()[v as usize]
}

/// Linear light to the nearest 8-bit sRGB code value, clamping out-of-range input.
#[inline]
pub fn linear_to_srgb8(v: f64) -> u8 {
    (srgb_encode(v.clamp(0.0, 1.0)) * 255.0)
        .round()
        .clamp(0.0, 255.0) as u8
}

#[inline]
fn lab_f(t: f64) -> f64 {
    if t > LAB_EPSILON {
        t.cbrt()
    } else {
        (LAB_KAPPA * t + 16.0) / 116.0
    }
}

#[inline]
fn lab_f_inv(f: f64) -> f64 {
    let f3 = f * f * f;
    if f3 > LAB_EPSILON {
        f3
    } else {
        (116.0 * f - 16.0) / LAB_KAPPA
    }
}

/// Linear RGB triple to Lab, in double precision.
pub fn linear_rgb_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let m = &RGB_TO_XYZ;
    let mut xyz = [0.0; 3];
    for (i, row) in m.iter().enumerate() {
        xyz[i] = row[0] * rgb[0] + row[1] * rgb[1] + row[2] * rgb[2];
    }
    let fx = lab_f(xyz[0] / WHITE[0]);
    let fy = lab_f(xyz[1] / WHITE[1]);
    let fz = lab_f(xyz[2] / WHITE[2]);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Lab to (unclamped) linear RGB, in double precision.
pub fn lab_to_linear_rgb(lab: [f64; 3]) -> [f64; 3] {
    let fy = (lab[0] + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    let xyz = [
        lab_f_inv(fx) * WHITE[0],
        lab_f_inv(fy) * WHITE[1],
        lab_f_inv(fz) * WHITE[2],
    ];
    let m = xyz_to_rgb_matrix();
    let mut rgb = [0.0; 3];
    for (i, row) in m.iter().enumerate() {
        rgb[i] = row[0] * xyz[0] + row[1] * xyz[1] + row[2] * xyz[2];
    }
    rgb
}

pub fn srgb8_to_lab(p: [u8; 3]) -> LabPixel {
    let lab = linear_rgb_to_lab([
        srgb8_to_linear(p[0]),
        srgb8_to_linear(p[1]),
        srgb8_to_linear(p[2]),
    ]);
    LabPixel::new(lab[0] as f32, lab[1] as f32, lab[2] as f32)
}

/// Lab to 8-bit sRGB, clamping to the gamut.
pub fn lab_to_srgb8(p: LabPixel) -> [u8; 3] {
    let rgb = lab_to_linear_rgb([p.l as f64, p.a as f64, p.b as f64]);
    [
        linear_to_srgb8(rgb[0]),
        linear_to_srgb8(rgb[1]),
        linear_to_srgb8(rgb[2]),
    ]
}

/// Lab to clamped linear RGB.
pub fn lab_to_linear_clamped(p: LabPixel) -> [f64; 3] {
    let rgb = lab_to_linear_rgb([p.l as f64, p.a as f64, p.b as f64]);
    [
        rgb[0].clamp(0.0, 1.0),
        rgb[1].clamp(0.0, 1.0),
        rgb[2].clamp(0.0, 1.0),
    ]
}

fn expect_channels<T>(img: &Raster<T>, n: usize) -> Result<()> {
    if img.channels != n {
        return Err(RasterError::InvalidChannelCount {
            expected: n,
            actual: img.channels,
        });
    }
    Ok(())
}

/// Per-pixel CIE L*a*b* (D65) of an 8-bit sRGB image.
pub fn srgb_to_lab(img: &RasterImage) -> Result<FloatImage> {
    expect_channels(img, 3)?;
    let data = img
        .data
        .chunks_exact(3)
        .flat_map(|p| {
            let lab = srgb8_to_lab([p[0], p[1], p[2]]);
            [lab.l, lab.a, lab.b]
        })
        .collect();
    Raster::from_vec(img.width, img.height, 3, Colorspace::Lab, data)
}

/// Inverse of [`srgb_to_lab`]; out-of-gamut colors are clamped.
pub fn lab_to_srgb(img: &FloatImage) -> Result<RasterImage> {
    expect_channels(img, 3)?;
    if img.colorspace != Colorspace::Lab {
        return Err(RasterError::WrongColorspace {
            expected: Colorspace::Lab,
            actual: img.colorspace,
        });
    }
    let data = img
        .data
        .chunks_exact(3)
        .flat_map(|p| lab_to_srgb8(LabPixel::new(p[0], p[1], p[2])))
        .collect();
    Raster::from_vec(img.width, img.height, 3, Colorspace::Srgb8, data)
}

/// Luma in [0, 1] (Rec. 601 weights on the encoded values).
pub fn to_gray(img: &RasterImage) -> FloatImage {
    let data: Vec<f32> = match img.channels {
        1 => img.data.iter().map(|&v| v as f32 / 255.0).collect(),
        _ => img
            .data
            .chunks_exact(3)
            .map(|p| (0.299 * p[0] as f32 + 0.587 * p[1] as f32 + 0.114 * p[2] as f32) / 255.0)
            .collect(),
    };
    Raster::from_vec(img.width, img.height, 1, Colorspace::Gray, data)
        .expect("gray raster is consistent by construction")
}

/// Per-pixel image derivatives.
#[derive(Debug, Clone)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f32>,
    pub gy: Vec<f32>,
    pub magnitude: Vec<f32>,
    /// Gradient direction folded into [0, pi).
    pub orientation: Vec<f32>,
}

/// Folds an angle into [0, pi).
#[inline]
pub fn fold_half_turn(theta: f32) -> f32 {
    let pi = std::f32::consts::PI;
    let mut t = theta % pi;
    if t < 0.0 {
        t += pi;
    }
    if t >= pi {
        t -= pi;
    }
    t
}

/// 3x3 Sobel derivatives with replicated borders, normalized by 1/8 so a
/// unit ramp gives a unit derivative.
pub fn sobel_gradients(img: &FloatImage) -> Result<GradientField> {
    expect_channels(img, 1)?;
    let (w, h) = (img.width, img.height);
    if w < 3 || h < 3 {
        return Err(RasterError::ImageTooSmall {
            width: w,
            height: h,
            min: 3,
        });
    }
    let d = &img.data;
    let at = |x: isize, y: isize| -> f32 {
        let xc = x.clamp(0, w as isize - 1) as usize;
        let yc = y.clamp(0, h as isize - 1) as usize;
        d[yc * w + xc]
    };
    let n = w * h;
    let mut gx = vec![0.0f32; n];
    let mut gy = vec![0.0f32; n];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let (tl, t, tr) = (at(x - 1, y - 1), at(x, y - 1), at(x + 1, y - 1));
            let (l, r) = (at(x - 1, y), at(x + 1, y));
            let (bl, b, br) = (at(x - 1, y + 1), at(x, y + 1), at(x + 1, y + 1));
            let i = y as usize * w + x as usize;
            gx[i] = ((tr + 2.0 * r + br) - (tl + 2.0 * l + bl)) / 8.0;
            gy[i] = ((bl + 2.0 * b + br) - (tl + 2.0 * t + tr)) / 8.0;
        }
    }
    let magnitude = gx
        .iter()
        .zip(&gy)
        .map(|(a, b)| (a * a + b * b).sqrt())
        .collect();
    let orientation = gx
        .iter()
        .zip(&gy)
        .map(|(a, b)| fold_half_turn(b.atan2(*a)))
        .collect();
    Ok(GradientField {
        width: w,
        height: h,
        gx,
        gy,
        magnitude,
        orientation,
    })
}

/// Boolean pixel grid; `true` marks an eligible pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            bits: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(RasterError::BufferLength {
                width,
                height,
                channels: 1,
                actual: bits.len(),
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_true(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn and(&self, other: &BinaryMask) -> Result<BinaryMask> {
        if self.width != other.width || self.height != other.height {
            return Err(RasterError::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(a, b)| *a && *b)
            .collect();
        Ok(BinaryMask {
            width: self.width,
            height: self.height,
            bits,
        })
    }

    /// Gray image: 255 where true, 0 elsewhere.
    pub fn to_image(&self) -> RasterImage {
        let data = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        Raster::from_vec(self.width, self.height, 1, Colorspace::Gray, data)
            .expect("mask image is consistent by construction")
    }
}

/// Summed-area table over a [`BinaryMask`].
#[derive(Debug, Clone)]
pub struct IntegralTable {
    width: usize,
    height: usize,
    // (width+1) x (height+1), first row/column zero.
    sums: Vec<u32>,
}

impl IntegralTable {
    pub fn new(mask: &BinaryMask) -> Self {
        let (w, h) = (mask.width, mask.height);
        let stride = w + 1;
        let mut sums = vec![0u32; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0u32;
            for x in 0..w {
                row += mask.get(x, y) as u32;
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        Self {
            width: w,
            height: h,
            sums,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of true pixels in the half-open rectangle `[x0, x1) x [y0, y1)`.
    #[inline]
    pub fn rect_sum(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> u32 {
        debug_assert!(x0 <= x1 && y0 <= y1 && x1 <= self.width && y1 <= self.height);
        let s = self.width + 1;
        self.sums[y1 * s + x1] + self.sums[y0 * s + x0]
            - self.sums[y0 * s + x1]
            - self.sums[y1 * s + x0]
    }
}

/// Summed-area table over float values (f64 accumulators).
#[derive(Debug, Clone)]
pub struct FloatIntegral {
    width: usize,
    sums: Vec<f64>,
}

impl FloatIntegral {
    pub fn new(width: usize, height: usize, values: &[f32]) -> Self {
        assert_eq!(values.len(), width * height);
        let stride = width + 1;
        let mut sums = vec![0.0f64; stride * (height + 1)];
        for y in 0..height {
            let mut row = 0.0f64;
            for x in 0..width {
                row += values[y * width + x] as f64;
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        Self { width, sums }
    }

    #[inline]
    pub fn rect_sum(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> f64 {
        let s = self.width + 1;
        self.sums[y1 * s + x1] + self.sums[y0 * s + x0]
            - self.sums[y0 * s + x1]
            - self.sums[y1 * s + x0]
    }
}

pub fn integral_image(mask: &BinaryMask) -> IntegralTable {
    IntegralTable::new(mask)
}

/// Decodes a PNG or JPEG file into 8-bit sRGB.
pub fn load_rgb(path: &Path) -> Result<RasterImage> {
    let img = image::open(path)?.into_rgb8();
    let (w, h) = img.dimensions();
    Raster::from_vec(w as usize, h as usize, 3, Colorspace::Srgb8, img.into_raw())
}

/// Decodes a single-channel 8- or 16-bit PNG into raw integer values.
pub fn load_gray_u16(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let img = image::open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let values = match img {
        image::DynamicImage::ImageLuma8(b) => b.into_raw().into_iter().map(u16::from).collect(),
        image::DynamicImage::ImageLuma16(b) => b.into_raw(),
        other => {
            return Err(RasterError::InvalidChannelCount {
                expected: 1,
                actual: other.color().channel_count() as usize,
            })
        }
    };
    Ok((w, h, values))
}

/// Encodes an 8-bit raster (gray or RGB) as PNG bytes.
pub fn encode_png(img: &RasterImage) -> Result<Vec<u8>> {
    let mut out = std::io::Cursor::new(Vec::new());
    match img.channels {
        1 => {
            let buf: ImageBuffer<Luma<u8>, _> =
                ImageBuffer::from_raw(img.width as u32, img.height as u32, img.data.clone())
                    .expect("buffer sized by raster invariant");
            buf.write_to(&mut out, image::ImageFormat::Png)?;
        }
        _ => {
            let buf: ImageBuffer<Rgb<u8>, _> =
                ImageBuffer::from_raw(img.width as u32, img.height as u32, img.data.clone())
                    .expect("buffer sized by raster invariant");
            buf.write_to(&mut out, image::ImageFormat::Png)?;
        }
    }
    Ok(out.into_inner())
}

pub fn save_png(img: &RasterImage, path: &Path) -> Result<()> {
    let bytes = encode_png(img)?;
    std::fs::write(path, bytes).map_err(|e| RasterError::Image(image::ImageError::IoError(e)))
}
