//! Minimal DICOM reader: explicit VR little endian, uncompressed, single
//! frame, grayscale. Only the tags needed to recover the pixel grid are
//! interpreted; every other element is skipped by its declared length.

use super::{ImageError, RasterImage, SourceFormat};

const MAGIC_OFFSET: usize = 128;
const EXPLICIT_VR_LE: &str = "1.2.840.10008.1.2.1";

const TRANSFER_SYNTAX: (u16, u16) = (0x0002, 0x0010);
const PHOTOMETRIC: (u16, u16) = (0x0028, 0x0004);
const ROWS: (u16, u16) = (0x0028, 0x0010);
const COLUMNS: (u16, u16) = (0x0028, 0x0011);
const BITS_ALLOCATED: (u16, u16) = (0x0028, 0x0100);
const PIXEL_DATA: (u16, u16) = (0x7FE0, 0x0010);

/// VRs that use the 12-byte header form (2 reserved bytes + u32 length).
const LONG_FORM_VRS: [&[u8; 2]; 13] =
    [b"OB", b"OD", b"OF", b"OL", b"OV", b"OW", b"SQ", b"SV", b"UC", b"UN", b"UR", b"UT", b"UV"];

pub fn read(bytes: &[u8]) -> Result<RasterImage, ImageError> {
    if bytes.len() < MAGIC_OFFSET + 4 || &bytes[MAGIC_OFFSET..MAGIC_OFFSET + 4] != b"DICM" {
        return Err(ImageError::MalformedHeader("missing DICM magic".into()));
    }

    let mut pos = MAGIC_OFFSET + 4;
    let mut rows: Option<u16> = None;
    let mut cols: Option<u16> = None;
    let mut bits: Option<u16> = None;
    let mut invert = false;
    let mut pixel_bytes: Option<&[u8]> = None;

    while pos + 8 <= bytes.len() {
        let group = u16::from_le_bytes([bytes[pos], bytes[pos + 1]]);
        let element = u16::from_le_bytes([bytes[pos + 2], bytes[pos + 3]]);
        let vr = [bytes[pos + 4], bytes[pos + 5]];
        if !vr.iter().all(u8::is_ascii_uppercase) {
            return Err(ImageError::MalformedHeader(format!(
                "bad VR at offset {pos}; only explicit VR little endian is supported"
            )));
        }
        let (len, header) = if LONG_FORM_VRS.contains(&&vr) {
            if pos + 12 > bytes.len() {
                return Err(ImageError::MalformedHeader("element header past end".into()));
            }
            let len = u32::from_le_bytes([
                bytes[pos + 8],
                bytes[pos + 9],
                bytes[pos + 10],
                bytes[pos + 11],
            ]);
            (len, 12usize)
        } else {
            let len = u16::from_le_bytes([bytes[pos + 6], bytes[pos + 7]]) as u32;
            (len, 8usize)
        };
        if len == 0xFFFF_FFFF {
            return Err(ImageError::UnsupportedFeature("undefined-length element".into()));
        }

        let start = pos + header;
        let end = start + len as usize;
        if end > bytes.len() {
            if (group, element) == PIXEL_DATA {
                return Err(ImageError::TruncatedPixelData(format!(
                    "pixel data promises {len} bytes, {} remain",
                    bytes.len() - start.min(bytes.len())
                )));
            }
            return Err(ImageError::MalformedHeader(format!(
                "element ({group:04X},{element:04X}) extends past end"
            )));
        }
        let value = &bytes[start..end];

        match (group, element) {
            TRANSFER_SYNTAX => {
                let uid = trim_text(value);
                if uid != EXPLICIT_VR_LE {
                    return Err(ImageError::UnsupportedFeature(format!("transfer syntax {uid}")));
                }
            }
            ROWS => rows = Some(read_us(value)?),
            COLUMNS => cols = Some(read_us(value)?),
            BITS_ALLOCATED => bits = Some(read_us(value)?),
            PHOTOMETRIC => match trim_text(value).as_str() {
                "MONOCHROME2" => invert = false,
                "MONOCHROME1" => invert = true,
                other => {
                    return Err(ImageError::UnsupportedFeature(format!(
                        "photometric interpretation {other}"
                    )))
                }
            },
            PIXEL_DATA => pixel_bytes = Some(value),
            _ => {}
        }
        pos = end;
    }
    if pos != bytes.len() {
        return Err(ImageError::MalformedHeader("trailing bytes after last element".into()));
    }

    let rows = rows.ok_or_else(|| ImageError::MalformedHeader("missing Rows".into()))? as usize;
    let cols = cols.ok_or_else(|| ImageError::MalformedHeader("missing Columns".into()))? as usize;
    let bits = bits.ok_or_else(|| ImageError::MalformedHeader("missing BitsAllocated".into()))?;
    let data =
        pixel_bytes.ok_or_else(|| ImageError::MalformedHeader("missing PixelData".into()))?;

    let bytes_per_sample = match bits {
        8 => 1,
        16 => 2,
        other => return Err(ImageError::UnsupportedFeature(format!("bits allocated {other}"))),
    };
    let need = rows * cols * bytes_per_sample;
    if data.len() < need {
        return Err(ImageError::TruncatedPixelData(format!(
            "pixel data holds {} bytes, dimensions require {need}",
            data.len()
        )));
    }

    let mut pixels = Vec::with_capacity(rows * cols);
    match bytes_per_sample {
        1 => pixels.extend(data[..need].iter().map(|&b| b as f64)),
        _ => {
            for pair in data[..need].chunks_exact(2) {
                let v = u16::from_le_bytes([pair[0], pair[1]]) as f64;
                pixels.push((v * 255.0 / 65535.0).round());
            }
        }
    }
    if invert {
        for v in &mut pixels {
            *v = 255.0 - *v;
        }
    }
    RasterImage::new(cols, rows, 1, pixels, SourceFormat::DicomSubset)
}

fn read_us(value: &[u8]) -> Result<u16, ImageError> {
    if value.len() != 2 {
        return Err(ImageError::MalformedHeader(format!("US element with length {}", value.len())));
    }
    Ok(u16::from_le_bytes([value[0], value[1]]))
}

/// String payloads are space- or NUL-padded to even length.
fn trim_text(value: &[u8]) -> String {
    String::from_utf8_lossy(value).trim_end_matches(['\0', ' ']).to_string()
}

#[cfg(test)]
mod tests {
    use crate::image_io::{load_image, ImageError, SourceFormat};

    fn short_element(group: u16, element: u16, vr: &[u8; 2], value: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend(group.to_le_bytes());
        out.extend(element.to_le_bytes());
        out.extend(vr);
        out.extend((value.len() as u16).to_le_bytes());
        out.extend(value);
        out
    }

    fn long_element(group: u16, element: u16, vr: &[u8; 2], value: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend(group.to_le_bytes());
        out.extend(element.to_le_bytes());
        out.extend(vr);
        out.extend([0u8, 0u8]);
        out.extend((value.len() as u32).to_le_bytes());
        out.extend(value);
        out
    }

    fn file(rows: u16, cols: u16, bits: u16, photometric: &str, pixel: &[u8]) -> Vec<u8> {
        let mut out = vec![0u8; 128];
        out.extend(b"DICM");
        out.extend(short_element(0x0002, 0x0010, b"UI", b"1.2.840.10008.1.2.1\0"));
        out.extend(short_element(0x0028, 0x0004, b"CS", photometric.as_bytes()));
        out.extend(short_element(0x0028, 0x0010, b"US", &rows.to_le_bytes()));
        out.extend(short_element(0x0028, 0x0011, b"US", &cols.to_le_bytes()));
        out.extend(short_element(0x0028, 0x0100, b"US", &bits.to_le_bytes()));
        // An uninterpreted element the parser must skip by length.
        out.extend(short_element(0x0010, 0x0010, b"PN", b"DOE^J "));
        out.extend(long_element(0x7FE0, 0x0010, b"OW", pixel));
        out
    }

    #[test]
    fn sixteen_bit_values_rescale_to_byte_range() {
        let px: Vec<u8> = (0..16).flat_map(|_| 1024u16.to_le_bytes()).collect();
        let bytes = file(4, 4, 16, "MONOCHROME2", &px);
        let img = load_image(&bytes, SourceFormat::DicomSubset).unwrap();
        assert_eq!((img.width, img.height, img.channels), (4, 4, 1));
        // 1024 * 255 / 65535 = 3.984..., rounded to 4.
        assert!(img.pixels.iter().all(|&v| v == 4.0));
        assert_eq!(img.source_format, SourceFormat::DicomSubset);
    }

    #[test]
    fn monochrome1_is_inverted() {
        let bytes = file(1, 2, 8, "MONOCHROME1", &[10, 255]);
        let img = load_image(&bytes, SourceFormat::DicomSubset).unwrap();
        assert_eq!(img.pixels, vec![245.0, 0.0]);
    }

    #[test]
    fn eight_bit_values_pass_through() {
        let bytes = file(2, 2, 8, "MONOCHROME2", &[0, 1, 128, 255]);
        let img = load_image(&bytes, SourceFormat::DicomSubset).unwrap();
        assert_eq!(img.pixels, vec![0.0, 1.0, 128.0, 255.0]);
    }

    #[test]
    fn missing_magic_is_malformed() {
        let err = load_image(&[0u8; 200], SourceFormat::DicomSubset).unwrap_err();
        assert!(matches!(err, ImageError::MalformedHeader(_)));
    }

    #[test]
    fn compressed_transfer_syntax_is_unsupported() {
        let mut out = vec![0u8; 128];
        out.extend(b"DICM");
        // JPEG baseline transfer syntax UID.
        out.extend(short_element(0x0002, 0x0010, b"UI", b"1.2.840.10008.1.2.4.50"));
        let err = load_image(&out, SourceFormat::DicomSubset).unwrap_err();
        assert!(matches!(err, ImageError::UnsupportedFeature(_)));
    }

    #[test]
    fn odd_bit_depth_is_unsupported() {
        let bytes = file(1, 1, 12, "MONOCHROME2", &[0, 0]);
        let err = load_image(&bytes, SourceFormat::DicomSubset).unwrap_err();
        assert!(matches!(err, ImageError::UnsupportedFeature(_)));
    }

    #[test]
    fn short_pixel_data_is_truncated() {
        let px: Vec<u8> = vec![0; 10];
        let bytes = file(4, 4, 16, "MONOCHROME2", &px);
        let err = load_image(&bytes, SourceFormat::DicomSubset).unwrap_err();
        assert!(matches!(err, ImageError::TruncatedPixelData(_)));
    }

    #[test]
    fn element_running_past_eof_is_malformed() {
        let mut out = vec![0u8; 128];
        out.extend(b"DICM");
        out.extend(short_element(0x0028, 0x0010, b"US", &4u16.to_le_bytes()));
        out.truncate(out.len() - 1);
        let err = load_image(&out, SourceFormat::DicomSubset).unwrap_err();
        assert!(matches!(err, ImageError::MalformedHeader(_)));
    }

    #[test]
    fn undefined_length_sequence_is_unsupported() {
        let mut out = vec![0u8; 128];
        out.extend(b"DICM");
        out.extend(0x0008u16.to_le_bytes());
        out.extend(0x1140u16.to_le_bytes());
        out.extend(b"SQ");
        out.extend([0u8, 0u8]);
        out.extend(0xFFFF_FFFFu32.to_le_bytes());
        let err = load_image(&out, SourceFormat::DicomSubset).unwrap_err();
        assert!(matches!(err, ImageError::UnsupportedFeature(_)));
    }

    #[test]
    fn missing_dimensions_are_malformed() {
        let mut out = vec![0u8; 128];
        out.extend(b"DICM");
        out.extend(long_element(0x7FE0, 0x0010, b"OW", &[0, 0]));
        let err = load_image(&out, SourceFormat::DicomSubset).unwrap_err();
        assert!(matches!(err, ImageError::MalformedHeader(_)));
    }
}
