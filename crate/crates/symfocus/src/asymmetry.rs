//! Midline estimation and left-right asymmetry scoring.
//!
//! An axial brain slice is roughly mirror-symmetric across a vertical
//! axis. `estimate_midline` locates that axis by correlating column pairs,
//! `asymmetry_map` measures each brain pixel's deviation from its mirror
//! image, and `detect_focus` clusters the brain pixels and reports the
//! cluster carrying the strongest asymmetry together with the hemisphere
//! it sits in. A healthy, symmetric slice yields low scores everywhere and
//! the detector reports no side.

use crate::cluster::{
    select_k, ClusterError, ClusteringConfig, FeaturePoint, FeatureSet, SymIndexReport,
};
use crate::image_io::{NormalizedImage, RasterImage, SourceFormat, NORMALIZED_SIZE};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Median-filtered intensity a pixel must exceed to count as brain tissue.
pub const DEFAULT_BACKGROUND_THRESHOLD: f64 = 10.0;

/// Mean asymmetry the winning cluster must reach before a side is named.
///
/// Gaussian pixel noise of spread sigma puts the whole-image asymmetry
/// floor at 2*sigma/sqrt(pi), and clusters that capture a noise tail can
/// double that in their own mean. A real focus at clinically relevant
/// contrast scores several times higher, so 20 clears the noise bands for
/// sigma up to about 8 while staying far under genuine focal scores.
pub const DEFAULT_TAU_A: f64 = 20.0;

/// Candidate midline columns: the central fifth of the grid.
const MIDLINE_LO: usize = 102;
const MIDLINE_HI: usize = 154;

#[derive(Debug, Error, PartialEq)]
pub enum AsymmetryError {
    /// No candidate axis had intensity variation on both sides.
    #[error("image has no intensity variation along any candidate axis")]
    FlatImage,
    #[error("background threshold left no brain pixels")]
    EmptyMask,
    #[error("asymmetry analysis needs a grayscale grid")]
    NotGrayscale,
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

/// Hemisphere of a detected focus. `None` means the scan looks symmetric.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MidlineEstimate {
    pub axis_col: usize,
    /// Correlation of the two sides across the axis, in [-1, 1].
    pub score: f64,
}

/// Per-pixel mirror deviation `|v - v_mirror|` over the brain mask.
/// Values outside the mask are zero. The mask itself is mirror-symmetric
/// about the axis by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct AsymmetryMap {
    axis_col: usize,
    grid: Vec<f64>,
    mask: Vec<bool>,
}

impl AsymmetryMap {
    pub fn axis_col(&self) -> usize {
        self.axis_col
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.grid[row * NORMALIZED_SIZE + col]
    }

    pub fn in_mask(&self, row: usize, col: usize) -> bool {
        self.mask[row * NORMALIZED_SIZE + col]
    }

    pub fn mask_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Masked pixel coordinates in row-major order. Feature extraction and
    /// scoring both rely on this order, so assignments line up by index.
    pub fn masked_pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter(|&(_, &m)| m)
            .map(|(i, _)| (i / NORMALIZED_SIZE, i % NORMALIZED_SIZE))
    }

    /// Mean deviation over the mask.
    pub fn mean(&self) -> f64 {
        let count = self.mask_count();
        if count == 0 {
            return 0.0;
        }
        let sum: f64 = self.masked_pixels().map(|(r, c)| self.value(r, c)).sum();
        sum / count as f64
    }

    /// Renders the map as a grayscale raster; deviations already lie in
    /// [0, 255].
    pub fn to_raster(&self) -> RasterImage {
        RasterImage::new(NORMALIZED_SIZE, NORMALIZED_SIZE, 1, self.grid.clone(), SourceFormat::Pgm)
            .expect("deviation values stay within the sample range")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterScore {
    pub id: usize,
    /// Mean mirror deviation over the cluster's pixels.
    pub score: f64,
}

/// Outcome of focus detection on one slice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FocusReport {
    pub side: Side,
    /// Winning cluster; absent when the scan is classified symmetric.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cluster_id: Option<usize>,
    /// Focus position as fractional (row, col), snapped onto the winning
    /// cluster when the rounded mean falls outside it.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub centroid: Option<[f64; 2]>,
    /// Mean mirror deviation over the whole brain mask.
    pub mean_asym: f64,
    pub axis_col: usize,
    pub per_cluster: Vec<ClusterScore>,
}

fn require_gray(img: &NormalizedImage) -> Result<&RasterImage, AsymmetryError> {
    if img.grid.is_grayscale() {
        Ok(&img.grid)
    } else {
        Err(AsymmetryError::NotGrayscale)
    }
}

/// Finds the vertical axis maximizing the correlation between mirrored
/// column pairs.
///
/// For each candidate column the correlation runs over every pixel pair
/// `(r, c) / (r, 2a - c)` with both columns on the grid, in one pass.
/// Candidates where either side has zero variance are skipped; if every
/// candidate is skipped the image is flat. Ties prefer the axis closest to
/// the grid center, then the smaller column.
pub fn estimate_midline(img: &NormalizedImage) -> Result<MidlineEstimate, AsymmetryError> {
    let g = require_gray(img)?;
    let n = NORMALIZED_SIZE;
    let mut best: Option<MidlineEstimate> = None;
    for a in MIDLINE_LO..=MIDLINE_HI {
        let c_lo = (2 * a).saturating_sub(n - 1);
        let mut count = 0.0f64;
        let (mut sv, mut sw, mut svv, mut sww, mut svw) = (0.0f64, 0.0, 0.0, 0.0, 0.0);
        for r in 0..n {
            for c in c_lo..a {
                let v = g.sample(r, c);
                let w = g.sample(r, 2 * a - c);
                count += 1.0;
                sv += v;
                sw += w;
                svv += v * v;
                sww += w * w;
                svw += v * w;
            }
        }
        let var_v = svv - sv * sv / count;
        let var_w = sww - sw * sw / count;
        if var_v <= 0.0 || var_w <= 0.0 {
            continue;
        }
        let score = ((svw - sv * sw / count) / (var_v * var_w).sqrt()).clamp(-1.0, 1.0);
        let better = match best {
            None => true,
            Some(b) => {
                score > b.score
                    || (score == b.score && a.abs_diff(n / 2) < b.axis_col.abs_diff(n / 2))
            }
        };
        if better {
            best = Some(MidlineEstimate { axis_col: a, score });
        }
    }
    best.ok_or(AsymmetryError::FlatImage)
}

/// Mirrors the grid across the given column: the output pixel at `c` takes
/// the input value at `2 * axis_col - c`, or zero when that column falls
/// off the grid.
///
/// # Panics
///
/// Panics if the grid is not grayscale or the axis is off the grid.
pub fn reflect_image(img: &NormalizedImage, axis_col: usize) -> NormalizedImage {
    assert!(img.grid.is_grayscale(), "reflection needs a grayscale grid");
    assert!(axis_col < NORMALIZED_SIZE, "axis column off the grid");
    let n = NORMALIZED_SIZE;
    let mut pixels = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            let m = 2 * axis_col as isize - c as isize;
            if (0..n as isize).contains(&m) {
                pixels[r * n + c] = img.grid.sample(r, m as usize);
            }
        }
    }
    let grid = RasterImage::new(n, n, 1, pixels, img.grid.source_format)
        .expect("reflection preserves the sample range");
    NormalizedImage::new(grid, img.intensity_rescaled).expect("grid size is unchanged")
}

/// 3x3 median with clamp-to-edge sampling; border windows reuse the edge
/// row or column, so every window holds nine samples.
fn median3(g: &RasterImage) -> Vec<f64> {
    let n = NORMALIZED_SIZE as isize;
    let mut out = vec![0.0; (n * n) as usize];
    let mut window = [0.0f64; 9];
    for r in 0..n {
        for c in 0..n {
            let mut i = 0;
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let rr = (r + dr).clamp(0, n - 1) as usize;
                    let cc = (c + dc).clamp(0, n - 1) as usize;
                    window[i] = g.sample(rr, cc);
                    i += 1;
                }
            }
            window.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite samples"));
            out[(r * n + c) as usize] = window[4];
        }
    }
    out
}

/// Flags brain tissue: a pixel is kept when it and its mirror both clear
/// the threshold, raw as well as median-filtered, and the mirror column
/// is on the grid. The result is therefore mirror-symmetric about the
/// axis, which keeps the deviation map symmetric as well. The raw test
/// matters at the tissue boundary, where a background pixel can have
/// enough bright neighbours for its median to pass; letting such a
/// near-zero pixel through would hand downstream clustering a far
/// outlier.
///
/// # Panics
///
/// Panics if the grid is not grayscale or the axis is off the grid.
pub fn brain_mask(img: &NormalizedImage, axis_col: usize, threshold: f64) -> Vec<bool> {
    assert!(img.grid.is_grayscale(), "masking needs a grayscale grid");
    assert!(axis_col < NORMALIZED_SIZE, "axis column off the grid");
    let n = NORMALIZED_SIZE;
    let med = median3(&img.grid);
    let mut mask = vec![false; n * n];
    for r in 0..n {
        for c in 0..n {
            let m = 2 * axis_col as isize - c as isize;
            if !(0..n as isize).contains(&m) {
                continue;
            }
            let m = m as usize;
            mask[r * n + c] = img.grid.sample(r, c) > threshold
                && img.grid.sample(r, m) > threshold
                && med[r * n + c] > threshold
                && med[r * n + m] > threshold;
        }
    }
    mask
}

/// [`asymmetry_map_with_threshold`] at the default background threshold.
pub fn asymmetry_map(img: &NormalizedImage) -> Result<AsymmetryMap, AsymmetryError> {
    asymmetry_map_with_threshold(img, DEFAULT_BACKGROUND_THRESHOLD)
}

/// Estimates the midline, masks the brain, and measures each masked
/// pixel's absolute deviation from its mirror value.
pub fn asymmetry_map_with_threshold(
    img: &NormalizedImage,
    threshold: f64,
) -> Result<AsymmetryMap, AsymmetryError> {
    let midline = estimate_midline(img)?;
    let axis_col = midline.axis_col;
    let mask = brain_mask(img, axis_col, threshold);
    if !mask.iter().any(|&m| m) {
        return Err(AsymmetryError::EmptyMask);
    }
    let mirror = reflect_image(img, axis_col);
    let n = NORMALIZED_SIZE;
    let mut grid = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            if mask[r * n + c] {
                grid[r * n + c] = (img.grid.sample(r, c) - mirror.grid.sample(r, c)).abs();
            }
        }
    }
    Ok(AsymmetryMap { axis_col, grid, mask })
}

/// Embeds the masked pixels as weighted feature vectors, in the map's
/// row-major pixel order.
pub fn features_from_mask(
    img: &NormalizedImage,
    map: &AsymmetryMap,
    cfg: &ClusteringConfig,
) -> FeatureSet {
    let points: Vec<FeaturePoint> = map
        .masked_pixels()
        .map(|(r, c)| FeaturePoint::from_pixel(r, c, img.grid.sample(r, c)))
        .collect();
    FeatureSet::from_points(&points, cfg)
}

/// Mean mirror deviation per cluster. `assignments` must follow the map's
/// row-major masked pixel order; clusters left empty score zero.
pub fn score_cluster_asymmetry(
    map: &AsymmetryMap,
    assignments: &[usize],
    k: usize,
) -> Vec<ClusterScore> {
    let mut sums = vec![0.0f64; k];
    let mut counts = vec![0usize; k];
    let mut paired = 0usize;
    for ((r, c), &a) in map.masked_pixels().zip(assignments.iter()) {
        assert!(a < k, "cluster id {a} out of range");
        sums[a] += map.value(r, c);
        counts[a] += 1;
        paired += 1;
    }
    assert_eq!(paired, assignments.len(), "one assignment per masked pixel");
    (0..k)
        .map(|id| ClusterScore {
            id,
            score: if counts[id] > 0 { sums[id] / counts[id] as f64 } else { 0.0 },
        })
        .collect()
}

/// Runs the full detection pipeline and keeps the intermediate products:
/// the K sweep and the asymmetry map.
///
/// The winning cluster is the one with the highest mean deviation (ties to
/// the smaller id). If its score stays below `tau_a` the slice is reported
/// symmetric with no side, cluster, or centroid. Otherwise the side is the
/// hemisphere holding the majority of the cluster's pixels (the centroid
/// column breaks an exact tie).
pub fn detect_focus_full(
    img: &NormalizedImage,
    cfg: &ClusteringConfig,
    k_min: usize,
    k_max: usize,
    tau_a: f64,
) -> Result<(FocusReport, SymIndexReport, AsymmetryMap), AsymmetryError> {
    detect_focus_full_with_threshold(img, cfg, k_min, k_max, tau_a, DEFAULT_BACKGROUND_THRESHOLD)
}

/// [`detect_focus_full`] with an explicit background threshold for the
/// brain mask.
pub fn detect_focus_full_with_threshold(
    img: &NormalizedImage,
    cfg: &ClusteringConfig,
    k_min: usize,
    k_max: usize,
    tau_a: f64,
    threshold: f64,
) -> Result<(FocusReport, SymIndexReport, AsymmetryMap), AsymmetryError> {
    let map = asymmetry_map_with_threshold(img, threshold)?;
    let features = features_from_mask(img, &map, cfg);
    let selection = select_k(&features, k_min, k_max, cfg)?;
    let model = &selection.best().model;
    let scores = score_cluster_asymmetry(&map, &model.assignments, model.k);

    let mut winner = &scores[0];
    for s in &scores[1..] {
        if s.score > winner.score {
            winner = s;
        }
    }

    let mean_asym = map.mean();
    let axis_col = map.axis_col();
    let report = if winner.score < tau_a {
        FocusReport {
            side: Side::None,
            cluster_id: None,
            centroid: None,
            mean_asym,
            axis_col,
            per_cluster: scores.clone(),
        }
    } else {
        let pixels: Vec<(usize, usize)> = map
            .masked_pixels()
            .zip(model.assignments.iter())
            .filter(|&(_, &a)| a == winner.id)
            .map(|(p, _)| p)
            .collect();
        let (mut left, mut right) = (0usize, 0usize);
        let (mut sum_r, mut sum_c) = (0.0f64, 0.0f64);
        for &(r, c) in &pixels {
            if c < axis_col {
                left += 1;
            } else if c > axis_col {
                right += 1;
            }
            sum_r += r as f64;
            sum_c += c as f64;
        }
        let mean_r = sum_r / pixels.len() as f64;
        let mean_c = sum_c / pixels.len() as f64;
        let side = if left > right {
            Side::Left
        } else if right > left {
            Side::Right
        } else if mean_c < axis_col as f64 {
            Side::Left
        } else {
            Side::Right
        };
        let rounded = (mean_r.round() as usize, mean_c.round() as usize);
        let centroid = if pixels.binary_search(&rounded).is_ok() {
            [mean_r, mean_c]
        } else {
            let mut best = pixels[0];
            let mut bd = f64::INFINITY;
            for &(r, c) in &pixels {
                let dr = r as f64 - mean_r;
                let dc = c as f64 - mean_c;
                let d = dr * dr + dc * dc;
                if d < bd {
                    bd = d;
                    best = (r, c);
                }
            }
            [best.0 as f64, best.1 as f64]
        };
        FocusReport {
            side,
            cluster_id: Some(winner.id),
            centroid: Some(centroid),
            mean_asym,
            axis_col,
            per_cluster: scores.clone(),
        }
    };
    Ok((report, selection, map))
}

/// [`detect_focus_full`] without the intermediate products.
pub fn detect_focus(
    img: &NormalizedImage,
    cfg: &ClusteringConfig,
    k_min: usize,
    k_max: usize,
    tau_a: f64,
) -> Result<FocusReport, AsymmetryError> {
    detect_focus_full(img, cfg, k_min, k_max, tau_a).map(|(report, _, _)| report)
}
