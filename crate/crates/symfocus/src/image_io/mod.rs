//! Image loading, grayscale conversion, and grid normalization.
//!
//! Pixels are kept as real values in `[0, 255]` throughout so that
//! resampling and rescaling lose nothing to premature quantization.
//! Loaders produce integer-valued reals; only the PGM writer rounds.

mod dicom;
mod pgm;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Side length of the normalized analysis grid.
pub const NORMALIZED_SIZE: usize = 256;

/// Luma weights for RGB collapse.
const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported feature: {0}")]
    UnsupportedFeature(String),
    #[error("truncated pixel data: {0}")]
    TruncatedPixelData(String),
    #[error("invalid image: {0}")]
    InvalidImage(String),
}

/// On-disk format of a loaded scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceFormat {
    DicomSubset,
    Pgm,
    Png,
}

/// Row-major, channel-interleaved raster with real-valued samples in
/// `[0, 255]`. One channel for grayscale, three for RGB.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub pixels: Vec<f64>,
    pub source_format: SourceFormat,
}

impl RasterImage {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        pixels: Vec<f64>,
        source_format: SourceFormat,
    ) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::InvalidImage("zero-sized image".into()));
        }
        if channels != 1 && channels != 3 {
            return Err(ImageError::InvalidImage(format!("unsupported channel count {channels}")));
        }
        if pixels.len() != width * height * channels {
            return Err(ImageError::InvalidImage(format!(
                "pixel buffer holds {} samples, expected {}",
                pixels.len(),
                width * height * channels
            )));
        }
        if pixels.iter().any(|v| !(0.0..=255.0).contains(v)) {
            return Err(ImageError::InvalidImage("sample outside [0, 255]".into()));
        }
        Ok(Self { width, height, channels, pixels, source_format })
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.pixels[(row * self.width + col) * self.channels + channel]
    }

    /// Single-channel accessor; callers must hold a grayscale raster.
    #[inline]
    pub fn sample(&self, row: usize, col: usize) -> f64 {
        debug_assert_eq!(self.channels, 1);
        self.pixels[row * self.width + col]
    }

    pub fn is_grayscale(&self) -> bool {
        self.channels == 1
    }
}

/// A raster resampled onto the fixed [`NORMALIZED_SIZE`] grid.
/// `intensity_rescaled` records whether the min-max remap actually ran;
/// it is false when the input already spanned exactly `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedImage {
    pub grid: RasterImage,
    pub intensity_rescaled: bool,
}

impl NormalizedImage {
    pub fn new(grid: RasterImage, intensity_rescaled: bool) -> Result<Self, ImageError> {
        if grid.width != NORMALIZED_SIZE || grid.height != NORMALIZED_SIZE {
            return Err(ImageError::InvalidImage(format!(
                "normalized grid must be {NORMALIZED_SIZE}x{NORMALIZED_SIZE}, got {}x{}",
                grid.width, grid.height
            )));
        }
        Ok(Self { grid, intensity_rescaled })
    }
}

/// Decode `bytes` as the given format.
pub fn load_image(bytes: &[u8], format: SourceFormat) -> Result<RasterImage, ImageError> {
    match format {
        SourceFormat::Pgm => pgm::read(bytes),
        SourceFormat::Png => read_png(bytes),
        SourceFormat::DicomSubset => dicom::read(bytes),
    }
}

/// Serialize a grayscale raster as binary PGM (P5, maxval 255).
/// Samples are rounded to the nearest integer.
pub fn write_pgm(img: &RasterImage) -> Result<Vec<u8>, ImageError> {
    pgm::write(img)
}

/// Collapse RGB to luma, rounding to the nearest integer; grayscale input
/// is returned unchanged, bit for bit.
pub fn to_grayscale(img: &RasterImage) -> RasterImage {
    if img.channels == 1 {
        return img.clone();
    }
    let mut pixels = Vec::with_capacity(img.width * img.height);
    for px in img.pixels.chunks_exact(3) {
        let luma = LUMA_WEIGHTS[0] * px[0] + LUMA_WEIGHTS[1] * px[1] + LUMA_WEIGHTS[2] * px[2];
        pixels.push(luma.round().clamp(0.0, 255.0));
    }
    RasterImage {
        width: img.width,
        height: img.height,
        channels: 1,
        pixels,
        source_format: img.source_format,
    }
}

/// Bilinearly resample onto the 256x256 grid, then min-max rescale all
/// channels jointly to `[0, 255]`. A constant image maps to all zeros.
/// The rescale is skipped when the resampled values already span exactly
/// `[0, 255]`, which makes the whole operation idempotent.
pub fn normalize_image(img: &RasterImage) -> NormalizedImage {
    let resampled = resample_bilinear(img, NORMALIZED_SIZE, NORMALIZED_SIZE);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in &resampled.pixels {
        lo = lo.min(v);
        hi = hi.max(v);
    }

    if lo == 0.0 && hi == 255.0 {
        return NormalizedImage { grid: resampled, intensity_rescaled: false };
    }

    let mut grid = resampled;
    if hi > lo {
        let range = hi - lo;
        for v in &mut grid.pixels {
            *v = ((*v - lo) / range) * 255.0;
        }
    } else {
        for v in &mut grid.pixels {
            *v = 0.0;
        }
    }
    NormalizedImage { grid, intensity_rescaled: true }
}

/// Classic bilinear interpolation with corner-aligned sampling: output
/// pixel `i` maps to source coordinate `i * (in - 1) / (out - 1)`, so the
/// four corners are copied exactly and a same-size resample is identity.
fn resample_bilinear(img: &RasterImage, out_w: usize, out_h: usize) -> RasterImage {
    let row_scale = if out_h > 1 { (img.height - 1) as f64 / (out_h - 1) as f64 } else { 0.0 };
    let col_scale = if out_w > 1 { (img.width - 1) as f64 / (out_w - 1) as f64 } else { 0.0 };

    let ch = img.channels;
    let mut pixels = vec![0.0; out_w * out_h * ch];
    for r in 0..out_h {
        let src_r = r as f64 * row_scale;
        let r0 = src_r.floor() as usize;
        let r1 = (r0 + 1).min(img.height - 1);
        let fr = src_r - r0 as f64;
        for c in 0..out_w {
            let src_c = c as f64 * col_scale;
            let c0 = src_c.floor() as usize;
            let c1 = (c0 + 1).min(img.width - 1);
            let fc = src_c - c0 as f64;
            for k in 0..ch {
                let v00 = img.get(r0, c0, k);
                let v01 = img.get(r0, c1, k);
                let v10 = img.get(r1, c0, k);
                let v11 = img.get(r1, c1, k);
                // Nested lerps rather than the four-weight sum: exact for
                // constant patches and at integral source coordinates.
                let top = v00 + fc * (v01 - v00);
                let bottom = v10 + fc * (v11 - v10);
                pixels[(r * out_w + c) * ch + k] = top + fr * (bottom - top);
            }
        }
    }
    RasterImage {
        width: out_w,
        height: out_h,
        channels: ch,
        pixels,
        source_format: img.source_format,
    }
}

fn read_png(bytes: &[u8]) -> Result<RasterImage, ImageError> {
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(map_png_err)?;
    let info = reader.info();
    if info.bit_depth != png::BitDepth::Eight {
        return Err(ImageError::UnsupportedFeature(format!(
            "png bit depth {:?}, only 8-bit is supported",
            info.bit_depth
        )));
    }
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        other => {
            return Err(ImageError::UnsupportedFeature(format!(
                "png color type {other:?}, only gray and rgb are supported"
            )))
        }
    };
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(0)];
    let frame = reader.next_frame(&mut buf).map_err(map_png_err)?;
    let (w, h) = (frame.width as usize, frame.height as usize);
    let pixels = buf[..frame.buffer_size()].iter().map(|&b| b as f64).collect();
    RasterImage::new(w, h, channels, pixels, SourceFormat::Png)
}

fn map_png_err(e: png::DecodingError) -> ImageError {
    match e {
        png::DecodingError::IoError(_) => {
            ImageError::TruncatedPixelData("png stream ended early".into())
        }
        other => ImageError::MalformedHeader(format!("png: {other}")),
    }
}
