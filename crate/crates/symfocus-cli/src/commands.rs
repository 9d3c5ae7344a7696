//! Subcommand implementations.
//!
//! Every command computes its complete result before the first artifact
//! write, so a failed run leaves nothing behind under a final name.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use symfocus::asymmetry::{
    asymmetry_map_with_threshold, detect_focus_full_with_threshold, estimate_midline, Side,
};
use symfocus::cluster::{select_k, FeaturePoint, FeatureSet};
use symfocus::image_io::{
    load_image, normalize_image, to_grayscale, NormalizedImage, SourceFormat, NORMALIZED_SIZE,
};
use symfocus::phantom::{evaluate_detections, generate_phantom, PhantomSpec};
use symfocus::report::{
    channel_summary, classify_scan, compare_summaries, emit_report, report_rows, IntensitySummary,
    ReportEntry, ReportFormat, ScanClass,
};

use crate::artifacts::{
    label_for, load_raster, to_json_bytes, write_atomic, write_json, write_raster, ModelArtifact,
};
use crate::config::PipelineConfig;
use crate::error::{read_err, CliError};

fn load_normalized(path: &Path) -> Result<NormalizedImage, CliError> {
    let raster = load_raster(path)?;
    Ok(normalize_image(&to_grayscale(&raster)))
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<(), CliError> {
    let bytes = to_json_bytes(value)?;
    match out {
        Some(path) => {
            write_atomic(path, &bytes)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        None => std::io::stdout()
            .write_all(&bytes)
            .map_err(|e| CliError::Input(format!("cannot write to stdout: {e}"))),
    }
}

/// Clusters every pixel above the background threshold and reports the
/// model chosen by the validity sweep.
pub fn segment(input: &Path, out: Option<&Path>, cfg: &PipelineConfig) -> Result<(), CliError> {
    let img = load_normalized(input)?;
    let n = NORMALIZED_SIZE;
    let mut points = Vec::new();
    for r in 0..n {
        for c in 0..n {
            let v = img.grid.sample(r, c);
            if v > cfg.background_threshold {
                points.push(FeaturePoint::from_pixel(r, c, v));
            }
        }
    }
    if points.is_empty() {
        return Err(CliError::Input(format!(
            "no pixel clears the background threshold {}",
            cfg.background_threshold
        )));
    }
    let features = FeatureSet::from_points(&points, &cfg.cluster);
    let sweep = select_k(&features, cfg.k_min, cfg.k_max, &cfg.cluster)?;
    emit_json(out, &ModelArtifact::from_report(&sweep))
}

#[derive(Serialize)]
struct MidlineArtifact {
    axis_col: usize,
    /// Correlation of the two sides across the axis, in [-1, 1].
    score: f64,
    mask_pixels: usize,
    mean_asym: f64,
}

/// Estimates the midline and writes `midline.json` plus the masked
/// deviation map as `asymmetry.pgm`.
pub fn analyze(input: &Path, out_dir: &Path, cfg: &PipelineConfig) -> Result<(), CliError> {
    let img = load_normalized(input)?;
    let midline = estimate_midline(&img)?;
    let map = asymmetry_map_with_threshold(&img, cfg.background_threshold)?;
    let artifact = MidlineArtifact {
        axis_col: midline.axis_col,
        score: midline.score,
        mask_pixels: map.mask_count(),
        mean_asym: map.mean(),
    };
    let raster = map.to_raster();
    write_json(&out_dir.join("midline.json"), &artifact)?;
    write_raster(&out_dir.join("asymmetry.pgm"), &raster)
}

/// Emits two rows: the baseline against itself, then the test scan
/// against the baseline. Totals are taken from the scans as stored, with
/// no resampling or rescaling.
pub fn report(
    test: &Path,
    baseline: &Path,
    format: ReportFormat,
    out: Option<&Path>,
    cfg: &PipelineConfig,
) -> Result<(), CliError> {
    let baseline_raster = load_raster(baseline)?;
    let test_raster = load_raster(test)?;
    let baseline_sum = channel_summary(label_for(baseline), &baseline_raster, &cfg.band);
    let test_sum = channel_summary(label_for(test), &test_raster, &cfg.band);
    let baseline_cmp = compare_summaries(&baseline_sum, &baseline_sum)?;
    let test_cmp = compare_summaries(&test_sum, &baseline_sum)?;
    let rows = report_rows(&[
        ReportEntry { summary: baseline_sum, comparison: baseline_cmp },
        ReportEntry { summary: test_sum, comparison: test_cmp },
    ]);
    let text = emit_report(&rows, format)?;
    match out {
        Some(path) => {
            write_atomic(path, text.as_bytes())?;
            println!("wrote {}", path.display());
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// SplitMix64 output stream: the i-th value seeded at `base`. Every
/// phantom gets an independent, reproducible generator seed.
fn stream_seed(base: u64, i: usize) -> u64 {
    let mut z = base.wrapping_add((i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Lesion placements alternate hemispheres and cycle rows well inside
/// the tissue ellipse.
fn lesion_placement(j: usize) -> (Side, [usize; 2]) {
    let row = 112 + (j * 7) % 33;
    if j.is_multiple_of(2) {
        (Side::Left, [row, 96])
    } else {
        (Side::Right, [row, 160])
    }
}

pub struct GenParams {
    pub count: usize,
    pub seed: u64,
    pub sigma: f64,
    pub contrast: f64,
    pub radius: f64,
    pub additive: bool,
}

/// Writes `count` phantoms, clean at even indices and lesioned at odd
/// ones, plus their ground truth as `specs.json`.
pub fn phantom_gen(out_dir: &Path, p: &GenParams) -> Result<(), CliError> {
    if p.count == 0 {
        return Err(CliError::Config("count must be at least 1".into()));
    }
    let mut specs = Vec::with_capacity(p.count);
    let mut images = Vec::with_capacity(p.count);
    for i in 0..p.count {
        let seed = stream_seed(p.seed, i);
        let spec = if i.is_multiple_of(2) {
            PhantomSpec { seed, noise_sigma: p.sigma, ..PhantomSpec::default() }
        } else {
            let (side, center) = lesion_placement(i / 2);
            PhantomSpec {
                seed,
                lesion_present: true,
                lesion_side: side,
                lesion_center: center,
                lesion_radius: p.radius,
                lesion_contrast: p.contrast,
                noise_sigma: p.sigma,
                additive_lesion: p.additive,
            }
        };
        images.push(generate_phantom(&spec)?);
        specs.push(spec);
    }
    write_json(&out_dir.join("specs.json"), &specs)?;
    for (i, img) in images.iter().enumerate() {
        write_raster(&out_dir.join(format!("phantom_{i:03}.pgm")), &img.grid)?;
    }
    let lesioned = specs.iter().filter(|s| s.lesion_present).count();
    println!("generated {} phantoms ({lesioned} lesioned)", specs.len());
    Ok(())
}

/// Runs detection over a generated batch and scores it against the
/// ground truth in `specs.json`.
pub fn phantom_eval(dir: &Path, out: Option<&Path>, cfg: &PipelineConfig) -> Result<(), CliError> {
    let specs_path = dir.join("specs.json");
    let text = fs::read_to_string(&specs_path).map_err(|e| read_err(&specs_path, e))?;
    let specs: Vec<PhantomSpec> = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("bad spec list {}: {e}", specs_path.display())))?;
    if specs.is_empty() {
        return Err(CliError::Input(format!("{} lists no phantoms", specs_path.display())));
    }
    let mut cases = Vec::with_capacity(specs.len());
    for (i, spec) in specs.iter().enumerate() {
        let path = dir.join(format!("phantom_{i:03}.pgm"));
        let bytes = fs::read(&path).map_err(|e| read_err(&path, e))?;
        // The stored phantom is already on the normalized grid; decoding
        // it directly skips the min-max rescale a general scan goes
        // through, so pixel values still match the spec.
        let grid = load_image(&bytes, SourceFormat::Pgm)?;
        let img = NormalizedImage::new(grid, false)?;
        let (focus, _, _) = detect_focus_full_with_threshold(
            &img,
            &cfg.cluster,
            cfg.k_min,
            cfg.k_max,
            cfg.tau_a,
            cfg.background_threshold,
        )?;
        cases.push((spec.clone(), focus));
    }
    let accuracy = evaluate_detections(&cases)?;
    let out_path = out.map(Path::to_path_buf).unwrap_or_else(|| dir.join("accuracy.json"));
    write_json(&out_path, &accuracy)?;
    println!(
        "accuracy {:.3} over {} cases (tp {} fn {} fp {} tn {})",
        accuracy.accuracy,
        accuracy.n,
        accuracy.true_positives,
        accuracy.false_negatives,
        accuracy.false_positives,
        accuracy.true_negatives,
    );
    Ok(())
}

#[derive(Serialize)]
struct SummaryArtifact {
    class: ScanClass,
    summary: IntensitySummary,
}

/// Full run on one scan: `focus.json`, `model.json`, `summary.json`, and
/// `asymmetry.pgm` under one output directory.
pub fn pipeline(input: &Path, out_dir: &Path, cfg: &PipelineConfig) -> Result<(), CliError> {
    let raster = load_raster(input)?;
    let img = normalize_image(&to_grayscale(&raster));
    let (focus, sweep, map) = detect_focus_full_with_threshold(
        &img,
        &cfg.cluster,
        cfg.k_min,
        cfg.k_max,
        cfg.tau_a,
        cfg.background_threshold,
    )?;
    let model = ModelArtifact::from_report(&sweep);
    // Channel totals come from the scan as stored, before resampling or
    // rescaling, so they compare across scans of different provenance.
    let summary = channel_summary(label_for(input), &raster, &cfg.band);
    let class = classify_scan(&summary, cfg.tau_b);
    let asym_raster = map.to_raster();

    write_json(&out_dir.join("focus.json"), &focus)?;
    write_json(&out_dir.join("model.json"), &model)?;
    write_json(&out_dir.join("summary.json"), &SummaryArtifact { class, summary })?;
    write_raster(&out_dir.join("asymmetry.pgm"), &asym_raster)?;
    println!(
        "side {} (k_star {}, axis {}, mean asym {:.3})",
        side_name(focus.side),
        model.k_star,
        focus.axis_col,
        focus.mean_asym,
    );
    Ok(())
}

fn side_name(side: Side) -> &'static str {
    match side {
        Side::Left => "left",
        Side::Right => "right",
        Side::None => "none",
    }
}
