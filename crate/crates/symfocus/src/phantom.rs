//! Synthetic axial slices with known ground truth.
//!
//! A phantom is an elliptical tissue region with a gentle radial falloff,
//! mirror-symmetric texture, an optional dark lesion on one side, and
//! optional Gaussian noise. Texture blobs are generated in mirrored pairs
//! and evaluated through exactly negated column offsets, so a noise-free,
//! lesion-free phantom is column-mirror-exact about the grid center down
//! to the last bit. The lesion draws nothing from the generator, so a
//! zero-contrast lesion reproduces the clean phantom bitwise, and a seeded
//! spec regenerates its phantom bitwise.

use crate::asymmetry::{FocusReport, Side};
use crate::image_io::{NormalizedImage, RasterImage, SourceFormat, NORMALIZED_SIZE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const CENTER: f64 = 128.0;
const ROW_SEMI: f64 = 40.0;
const COL_SEMI: f64 = 50.0;
/// Peak tissue intensity at the ellipse center.
const BASE_INTENSITY: f64 = 200.0;
/// Fractional falloff from center to rim; the rim sits at 180.
const PROFILE_DIP: f64 = 0.1;
const TEXTURE_PAIRS: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum PhantomError {
    #[error("invalid phantom spec: {0}")]
    InvalidSpec(String),
    #[error("no detections to evaluate")]
    EmptyInput,
}

/// Ground-truth description of one synthetic slice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomSpec {
    pub seed: u64,
    pub lesion_present: bool,
    /// Hemisphere holding the lesion; must be `None` exactly when no
    /// lesion is present.
    pub lesion_side: Side,
    /// Lesion center as (row, col).
    pub lesion_center: [usize; 2],
    pub lesion_radius: f64,
    /// Fractional intensity drop inside the lesion, in [0, 1].
    pub lesion_contrast: f64,
    pub noise_sigma: f64,
    /// Subtract `contrast * 200` instead of scaling by `1 - contrast`.
    pub additive_lesion: bool,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            seed: 0,
            lesion_present: false,
            lesion_side: Side::None,
            lesion_center: [128, 96],
            lesion_radius: 10.0,
            lesion_contrast: 0.4,
            noise_sigma: 2.0,
            additive_lesion: false,
        }
    }
}

impl PhantomSpec {
    fn validate(&self) -> Result<(), PhantomError> {
        let bad = |msg: String| Err(PhantomError::InvalidSpec(msg));
        if self.noise_sigma < 0.0 {
            return bad(format!("noise sigma {} is negative", self.noise_sigma));
        }
        if !self.lesion_present {
            if self.lesion_side != Side::None {
                return bad("a lesion side was named without a lesion".into());
            }
            return Ok(());
        }
        let [row, col] = self.lesion_center;
        match self.lesion_side {
            Side::None => return bad("a lesion needs a side".into()),
            Side::Left if col >= 128 => {
                return bad(format!("left lesion centered at column {col}"));
            }
            Side::Right if col <= 128 => {
                return bad(format!("right lesion centered at column {col}"));
            }
            _ => {}
        }
        if !(4.0..=30.0).contains(&self.lesion_radius) {
            return bad(format!("lesion radius {} outside [4, 30]", self.lesion_radius));
        }
        if !(0.0..=1.0).contains(&self.lesion_contrast) {
            return bad(format!("lesion contrast {} outside [0, 1]", self.lesion_contrast));
        }
        let rr = (row as f64 - CENTER) / ROW_SEMI;
        let cc = (col as f64 - CENTER) / COL_SEMI;
        if rr * rr + cc * cc > 1.0 {
            return bad(format!("lesion center ({row}, {col}) lies outside the tissue"));
        }
        Ok(())
    }
}

struct BlobPair {
    row: f64,
    /// Column offset from the grid center; the pair sits at +dc and -dc.
    dc: f64,
    amp: f64,
    sigma: f64,
}

/// Renders the phantom described by `spec`.
///
/// The result is already on the normalized grid and is returned with
/// `intensity_rescaled` false: no min-max remap runs, so pixel values
/// relate to the spec exactly (a lesioned pixel is the clean value times
/// `1 - contrast` before clamping).
pub fn generate_phantom(spec: &PhantomSpec) -> Result<NormalizedImage, PhantomError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Texture parameters are drawn before any noise so the draw sequence
    // is independent of the lesion settings.
    let mut pairs = Vec::with_capacity(TEXTURE_PAIRS);
    for _ in 0..TEXTURE_PAIRS {
        let mag = rng.random_range(4.0..=8.0);
        let amp = if rng.random_bool(0.5) { mag } else { -mag };
        let sigma = rng.random_range(5.0..=9.0);
        // Blob centers stay in the inner 70% of the ellipse.
        let (u, v) = loop {
            let u: f64 = rng.random_range(-0.7..=0.7);
            let v: f64 = rng.random_range(-0.7..=0.7);
            if u * u + v * v <= 0.49 {
                break (u, v);
            }
        };
        pairs.push(BlobPair { row: CENTER + u * ROW_SEMI, dc: v * COL_SEMI, amp, sigma });
    }

    let n = NORMALIZED_SIZE;
    let mut pixels = Vec::with_capacity(n * n);
    let [lr, lc] = spec.lesion_center;
    let radius2 = spec.lesion_radius * spec.lesion_radius;
    for r in 0..n {
        for c in 0..n {
            let er = r as f64 - CENTER;
            let ec = c as f64 - CENTER;
            let rn = er / ROW_SEMI;
            let cn = ec / COL_SEMI;
            let rho2 = rn * rn + cn * cn;
            let mut v = 0.0;
            if rho2 <= 1.0 {
                v = BASE_INTENSITY * (1.0 - PROFILE_DIP * rho2);
                for p in &pairs {
                    let dr2 = (r as f64 - p.row) * (r as f64 - p.row);
                    let a1 = ec - p.dc;
                    let a2 = ec + p.dc;
                    let s2 = 2.0 * p.sigma * p.sigma;
                    // One grouped term per pair: the two exponentials swap
                    // under column mirroring and addition commutes, which
                    // keeps the texture mirror-exact.
                    v += p.amp * ((-(dr2 + a1 * a1) / s2).exp() + (-(dr2 + a2 * a2) / s2).exp());
                }
                if spec.lesion_present {
                    let dr = r as f64 - lr as f64;
                    let dc = c as f64 - lc as f64;
                    if dr * dr + dc * dc <= radius2 {
                        v = if spec.additive_lesion {
                            (v - spec.lesion_contrast * BASE_INTENSITY).max(0.0)
                        } else {
                            v * (1.0 - spec.lesion_contrast)
                        };
                    }
                }
            }
            pixels.push(v);
        }
    }

    if spec.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sigma).expect("sigma was validated");
        for v in pixels.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    for v in pixels.iter_mut() {
        *v = v.clamp(0.0, 255.0);
    }

    let grid = RasterImage::new(n, n, 1, pixels, SourceFormat::Pgm)
        .expect("clamped samples stay in range");
    Ok(NormalizedImage::new(grid, false).expect("grid has the normalized size"))
}

/// Confusion counts and summary rates for a batch of detections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub n: usize,
    pub true_positives: usize,
    pub false_negatives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub accuracy: f64,
    /// Absent when the batch holds no lesioned case.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sensitivity: Option<f64>,
    /// Absent when the batch holds no clean case.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub specificity: Option<f64>,
    /// Mean distance from reported centroid to true lesion center over the
    /// true positives; absent without any.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_localization_error: Option<f64>,
}

/// Scores detector outputs against their phantom ground truths. A lesioned
/// case counts as a hit only when the reported side matches; a clean case
/// counts as correct only when no side is reported.
pub fn evaluate_detections(
    cases: &[(PhantomSpec, FocusReport)],
) -> Result<AccuracyReport, PhantomError> {
    if cases.is_empty() {
        return Err(PhantomError::EmptyInput);
    }
    let (mut tp, mut fn_, mut fp, mut tn) = (0usize, 0usize, 0usize, 0usize);
    let mut loc_sum = 0.0;
    let mut loc_count = 0usize;
    for (spec, report) in cases {
        if spec.lesion_present {
            if report.side == spec.lesion_side {
                tp += 1;
                if let Some([cr, cc]) = report.centroid {
                    let dr = cr - spec.lesion_center[0] as f64;
                    let dc = cc - spec.lesion_center[1] as f64;
                    loc_sum += (dr * dr + dc * dc).sqrt();
                    loc_count += 1;
                }
            } else {
                fn_ += 1;
            }
        } else if report.side == Side::None {
            tn += 1;
        } else {
            fp += 1;
        }
    }
    let n = cases.len();
    let rate = |num: usize, den: usize| {
        if den > 0 {
            Some(num as f64 / den as f64)
        } else {
            None
        }
    };
    Ok(AccuracyReport {
        n,
        true_positives: tp,
        false_negatives: fn_,
        false_positives: fp,
        true_negatives: tn,
        accuracy: (tp + tn) as f64 / n as f64,
        sensitivity: rate(tp, tp + fn_),
        specificity: rate(tn, tn + fp),
        mean_localization_error: if loc_count > 0 {
            Some(loc_sum / loc_count as f64)
        } else {
            None
        },
    })
}
