//! Symmetry-driven clustering and asymmetry analysis for axial brain scans.
//!
//! The crate is organized around one pipeline:
//!
//! 1. [`image_io`] loads PGM / PNG / DICOM-subset scans into a real-valued
//!    raster, collapses color to luma, and resamples onto a fixed 256x256
//!    grid with min-max intensity rescaling.
//! 2. [`asymmetry`] finds the sagittal midline by normalized cross
//!    correlation, builds a masked left-right absolute-difference map, and
//!    drives focus detection.
//! 3. [`cluster`] groups brain pixels with a two-phase K-means whose
//!    refinement step uses a point-symmetry distance, and selects the
//!    cluster count by a symmetry validity index.
//! 4. [`report`] produces channel-sum summaries, ratio comparisons, and
//!    band classifications as CSV/JSON.
//! 5. [`phantom`] generates seeded synthetic scans with known lesions and
//!    scores detector output against that ground truth.

pub mod asymmetry;
pub mod cluster;
pub mod image_io;
pub mod phantom;
pub mod report;
