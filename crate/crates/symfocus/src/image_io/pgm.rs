//! Binary PGM (P5) with maxval 255. The writer output is canonical:
//! `P5\n<w> <h>\n255\n` followed by the raw rows, so load -> write -> load
//! reproduces the exact bytes it was given in that form.

use super::{ImageError, RasterImage, SourceFormat};

pub fn read(bytes: &[u8]) -> Result<RasterImage, ImageError> {
    let mut pos = 0usize;
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(ImageError::MalformedHeader("missing P5 magic".into()));
    }
    pos += 2;

    let width = read_header_int(bytes, &mut pos)?;
    let height = read_header_int(bytes, &mut pos)?;
    let maxval = read_header_int(bytes, &mut pos)?;
    if maxval != 255 {
        return Err(ImageError::UnsupportedFeature(format!(
            "pgm maxval {maxval}, only 255 is supported"
        )));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(ImageError::MalformedHeader("missing separator before raster".into())),
    }

    if width == 0 || height == 0 {
        return Err(ImageError::MalformedHeader("zero-sized pgm".into()));
    }
    let need = width * height;
    let raster = &bytes[pos..];
    if raster.len() < need {
        return Err(ImageError::TruncatedPixelData(format!(
            "raster holds {} bytes, header promises {need}",
            raster.len()
        )));
    }
    let pixels = raster[..need].iter().map(|&b| b as f64).collect();
    RasterImage::new(width, height, 1, pixels, SourceFormat::Pgm)
}

pub fn write(img: &RasterImage) -> Result<Vec<u8>, ImageError> {
    if !img.is_grayscale() {
        return Err(ImageError::UnsupportedFeature("pgm output requires a single channel".into()));
    }
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.pixels.iter().map(|v| v.round().clamp(0.0, 255.0) as u8));
    Ok(out)
}

/// Parse one ASCII integer, skipping whitespace and `#` comments.
fn read_header_int(bytes: &[u8], pos: &mut usize) -> Result<usize, ImageError> {
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            }
            _ => break,
        }
    }
    let start = *pos;
    while matches!(bytes.get(*pos), Some(b) if b.is_ascii_digit()) {
        *pos += 1;
    }
    if *pos == start {
        return Err(ImageError::MalformedHeader("expected integer".into()));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| ImageError::MalformedHeader("integer out of range".into()))
}
