//! Artifact encoding, atomic writes, and scan loading.

use std::ffi::{OsStr, OsString};
use std::fs;
use std::path::Path;

use serde::Serialize;
use symfocus::cluster::{ClusterModel, SymIndexReport};
use symfocus::image_io::{load_image, write_pgm, RasterImage, SourceFormat};

use crate::error::{read_err, write_err, CliError};

/// Writes through a hidden sibling and renames, so a crash or a full disk
/// never leaves a truncated artifact under its final name.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| write_err(path, e))?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Input(format!("{} has no file name", path.display())))?;
    let mut tmp_name = OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(|e| write_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| write_err(path, e))
}

/// Pretty JSON plus a trailing newline. Field order is declaration order,
/// so identical values always encode to identical bytes.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Input(format!("cannot encode artifact: {e}")))?;
    text.push('\n');
    Ok(text.into_bytes())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_atomic(path, &to_json_bytes(value)?)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn write_raster(path: &Path, img: &RasterImage) -> Result<(), CliError> {
    write_atomic(path, &write_pgm(img)?)?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Picks the decoder from the file extension.
pub fn format_for(path: &Path) -> Result<SourceFormat, CliError> {
    let ext = path.extension().and_then(OsStr::to_str).map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("pgm") => Ok(SourceFormat::Pgm),
        Some("png") => Ok(SourceFormat::Png),
        Some("dcm") | Some("dicom") => Ok(SourceFormat::DicomSubset),
        _ => Err(CliError::Input(format!(
            "cannot tell the format of {}: expected .pgm, .png, .dcm, or .dicom",
            path.display()
        ))),
    }
}

pub fn load_raster(path: &Path) -> Result<RasterImage, CliError> {
    let bytes = fs::read(path).map_err(|e| read_err(path, e))?;
    Ok(load_image(&bytes, format_for(path)?)?)
}

/// Report label for a scan: its file stem.
pub fn label_for(path: &Path) -> String {
    path.file_stem().and_then(OsStr::to_str).unwrap_or("scan").to_string()
}

/// Cluster-model artifact: the winning model plus the index sweep that
/// chose it.
#[derive(Serialize)]
pub struct ModelArtifact {
    pub k_star: usize,
    /// Number of clustered feature points.
    pub points: usize,
    pub sweep: Vec<SweepPoint>,
    pub model: ClusterModel,
}

#[derive(Serialize)]
pub struct SweepPoint {
    pub k: usize,
    pub sym_index: f64,
}

impl ModelArtifact {
    pub fn from_report(report: &SymIndexReport) -> ModelArtifact {
        let best = report.best();
        ModelArtifact {
            k_star: report.k_star,
            points: best.model.assignments.len(),
            sweep: report
                .entries
                .iter()
                .map(|e| SweepPoint { k: e.k, sym_index: e.sym_index })
                .collect(),
            model: best.model.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_creates_parents_and_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a/b/out.json");
        write_atomic(&path, b"{}\n").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"{}\n");
        let names: Vec<_> =
            fs::read_dir(path.parent().unwrap()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names, vec![OsString::from("out.json")]);
    }

    #[test]
    fn atomic_write_replaces_existing_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.bin");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"second");
    }

    #[test]
    fn format_dispatch_follows_the_extension() {
        assert_eq!(format_for(Path::new("x.pgm")).unwrap(), SourceFormat::Pgm);
        assert_eq!(format_for(Path::new("x.PNG")).unwrap(), SourceFormat::Png);
        assert_eq!(format_for(Path::new("x.dcm")).unwrap(), SourceFormat::DicomSubset);
        assert_eq!(format_for(Path::new("x.dicom")).unwrap(), SourceFormat::DicomSubset);
        assert_eq!(format_for(Path::new("x.bmp")).unwrap_err().exit_code(), 1);
        assert_eq!(format_for(Path::new("bare")).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn json_bytes_end_with_one_newline() {
        let bytes = to_json_bytes(&serde_json::json!({"a": 1})).unwrap();
        assert!(bytes.ends_with(b"}\n"));
        assert!(!bytes.ends_with(b"\n\n"));
    }

    #[test]
    fn labels_use_the_file_stem() {
        assert_eq!(label_for(Path::new("/data/scan_07.pgm")), "scan_07");
        assert_eq!(label_for(Path::new("plain")), "plain");
    }
}
