//! Run configuration: defaults, config file, flag overrides, validation.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use symfocus::asymmetry::{DEFAULT_BACKGROUND_THRESHOLD, DEFAULT_TAU_A};
use symfocus::cluster::ClusteringConfig;
use symfocus::report::{ThresholdBand, DEFAULT_TAU_B};

use crate::error::CliError;

/// Everything a run can tune, with a working default for every field.
///
/// The `cluster` table nests [`ClusteringConfig`] verbatim instead of
/// flattening it, because flattened structs swallow unknown keys and a
/// typoed top-level setting should fail loudly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub cluster: ClusteringConfig,
    /// Intensity a pixel and its mirror must exceed, raw and median
    /// filtered, to count as brain tissue.
    pub background_threshold: f64,
    /// Mean mirror deviation the winning cluster must reach before a
    /// focus side is reported.
    pub tau_a: f64,
    /// Out-of-band pixel share tolerated before a scan is flagged.
    pub tau_b: f64,
    /// Intensity band a healthy scan is expected to occupy.
    pub band: ThresholdBand,
    /// Smallest cluster count the selection sweep tries.
    pub k_min: usize,
    /// Largest cluster count the selection sweep tries.
    pub k_max: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            cluster: ClusteringConfig::default(),
            background_threshold: DEFAULT_BACKGROUND_THRESHOLD,
            tau_a: DEFAULT_TAU_A,
            tau_b: DEFAULT_TAU_B,
            band: ThresholdBand::default(),
            k_min: 2,
            k_max: 3,
        }
    }
}

/// Flag-level overrides; `None` leaves the config value alone.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub k_min: Option<usize>,
    pub k_max: Option<usize>,
    pub tau_a: Option<f64>,
    pub tau_b: Option<f64>,
    pub background_threshold: Option<f64>,
    pub band_lo: Option<f64>,
    pub band_hi: Option<f64>,
}

impl PipelineConfig {
    /// Resolves the effective configuration: defaults, then the JSON file
    /// if one was named, then flag overrides, then validation.
    pub fn load(path: Option<&Path>, over: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            None => PipelineConfig::default(),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| {
                    CliError::Config(format!("cannot read config {}: {e}", p.display()))
                })?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("bad config {}: {e}", p.display())))?
            }
        };
        if let Some(v) = over.seed {
            cfg.cluster.seed = v;
        }
        if let Some(v) = over.k_min {
            cfg.k_min = v;
        }
        if let Some(v) = over.k_max {
            cfg.k_max = v;
        }
        if let Some(v) = over.tau_a {
            cfg.tau_a = v;
        }
        if let Some(v) = over.tau_b {
            cfg.tau_b = v;
        }
        if let Some(v) = over.background_threshold {
            cfg.background_threshold = v;
        }
        if let Some(v) = over.band_lo {
            cfg.band.lo = v;
        }
        if let Some(v) = over.band_hi {
            cfg.band.hi = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.k_min < 2 {
            return bad(format!("k_min is {}, but clustering needs at least 2", self.k_min));
        }
        if self.k_min > self.k_max {
            return bad(format!("empty cluster range [{}, {}]", self.k_min, self.k_max));
        }
        if !self.tau_a.is_finite() || self.tau_a < 0.0 {
            return bad(format!("tau_a {} must be finite and nonnegative", self.tau_a));
        }
        if !self.tau_b.is_finite() || !(0.0..=1.0).contains(&self.tau_b) {
            return bad(format!("tau_b {} must lie in [0, 1]", self.tau_b));
        }
        if !self.background_threshold.is_finite() || self.background_threshold < 0.0 {
            return bad(format!(
                "background threshold {} must be finite and nonnegative",
                self.background_threshold
            ));
        }
        if !self.band.lo.is_finite() || !self.band.hi.is_finite() || self.band.lo > self.band.hi {
            return bad(format!("empty intensity band [{}, {}]", self.band.lo, self.band.hi));
        }
        let c = &self.cluster;
        if !c.spatial_weight.is_finite()
            || !c.intensity_weight.is_finite()
            || c.spatial_weight < 0.0
            || c.intensity_weight < 0.0
        {
            return bad(format!(
                "feature weights ({}, {}) must be finite and nonnegative",
                c.spatial_weight, c.intensity_weight
            ));
        }
        if !c.symmetry_threshold.is_finite() || !(0.0..=1.0).contains(&c.symmetry_threshold) {
            return bad(format!("symmetry threshold {} must lie in [0, 1]", c.symmetry_threshold));
        }
        if c.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        if !c.tol.is_finite() || c.tol < 0.0 {
            return bad(format!("tolerance {} must be finite and nonnegative", c.tol));
        }
        Ok(())
    }
}
