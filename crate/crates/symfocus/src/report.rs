//! Channel-sum summaries and scan-to-scan comparison reports.
//!
//! A summary reduces a scan to per-channel intensity totals plus the
//! fraction of pixels whose rounded value falls inside a reference band.
//! Comparing a test summary against a baseline yields channel ratios and
//! percent deviations; rows of label, sums, and ratios serialize to CSV or
//! JSON. All numeric formatting goes through the standard shortest
//! round-trip float display, so emitting, parsing, and re-emitting a
//! report is byte-identical.

use crate::image_io::RasterImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    /// A channel ratio against a zero baseline sum is undefined.
    #[error("baseline channel sum is zero; ratios are undefined")]
    ZeroBaseline,
    #[error("report has no rows")]
    EmptyInput,
    #[error("malformed report: {0}")]
    Malformed(String),
}

/// Default share of out-of-band pixels tolerated before a scan is
/// flagged. A tenth of the image leaves room for ventricles and partial
/// edge pixels without letting a real hot or cold region pass.
pub const DEFAULT_TAU_B: f64 = 0.1;

/// Inclusive intensity band a healthy scan is expected to occupy.
/// Membership is decided on the rounded integer sample value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdBand {
    pub lo: f64,
    pub hi: f64,
}

impl Default for ThresholdBand {
    fn default() -> Self {
        ThresholdBand { lo: 85.0, hi: 170.0 }
    }
}

impl ThresholdBand {
    fn contains_rounded(&self, value: f64) -> bool {
        let v = value.round();
        self.lo <= v && v <= self.hi
    }
}

/// Per-channel totals of one scan. Grayscale scans replicate their single
/// channel across all three slots so they compare directly against color
/// renderings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntensitySummary {
    pub label: String,
    pub pixel_count: usize,
    pub red_sum: u64,
    pub green_sum: u64,
    pub blue_sum: u64,
    /// Fraction of pixels whose rounded value lies inside the band.
    pub red_in_band: f64,
    pub green_in_band: f64,
    pub blue_in_band: f64,
}

/// Channel ratios of a test summary against a baseline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub red_ratio: f64,
    pub green_ratio: f64,
    pub blue_ratio: f64,
    pub red_deviation_pct: f64,
    pub green_deviation_pct: f64,
    pub blue_deviation_pct: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanClass {
    InBand,
    OutOfBand,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub summary: IntensitySummary,
    pub comparison: ComparisonRecord,
}

/// One emitted report line: the scan's totals and its ratios against the
/// baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub red: u64,
    pub green: u64,
    pub blue: u64,
    pub red_ratio: f64,
    pub green_ratio: f64,
    pub blue_ratio: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

/// Sums each channel over every pixel (values rounded to integers) and
/// measures the in-band fraction per channel.
pub fn channel_summary(
    label: impl Into<String>,
    img: &RasterImage,
    band: &ThresholdBand,
) -> IntensitySummary {
    let pixel_count = img.width * img.height;
    let mut sums = [0u64; 3];
    let mut in_band = [0usize; 3];
    for row in 0..img.height {
        for col in 0..img.width {
            for ch in 0..3 {
                let v =
                    if img.channels == 3 { img.get(row, col, ch) } else { img.get(row, col, 0) };
                sums[ch] += v.round() as u64;
                if band.contains_rounded(v) {
                    in_band[ch] += 1;
                }
            }
        }
    }
    let frac = |n: usize| n as f64 / pixel_count as f64;
    IntensitySummary {
        label: label.into(),
        pixel_count,
        red_sum: sums[0],
        green_sum: sums[1],
        blue_sum: sums[2],
        red_in_band: frac(in_band[0]),
        green_in_band: frac(in_band[1]),
        blue_in_band: frac(in_band[2]),
    }
}

/// Channel ratios `test / baseline` and the corresponding percent
/// deviations from parity.
pub fn compare_summaries(
    test: &IntensitySummary,
    baseline: &IntensitySummary,
) -> Result<ComparisonRecord, ReportError> {
    if baseline.red_sum == 0 || baseline.green_sum == 0 || baseline.blue_sum == 0 {
        return Err(ReportError::ZeroBaseline);
    }
    let ratio = |t: u64, b: u64| t as f64 / b as f64;
    let red_ratio = ratio(test.red_sum, baseline.red_sum);
    let green_ratio = ratio(test.green_sum, baseline.green_sum);
    let blue_ratio = ratio(test.blue_sum, baseline.blue_sum);
    Ok(ComparisonRecord {
        red_ratio,
        green_ratio,
        blue_ratio,
        red_deviation_pct: (red_ratio - 1.0) * 100.0,
        green_deviation_pct: (green_ratio - 1.0) * 100.0,
        blue_deviation_pct: (blue_ratio - 1.0) * 100.0,
    })
}

/// A scan is out of band when the share of pixels outside the band
/// exceeds `tau_b` on any channel (strictly; a share of exactly `tau_b`
/// still counts as in band).
pub fn classify_scan(summary: &IntensitySummary, tau_b: f64) -> ScanClass {
    let out = [1.0 - summary.red_in_band, 1.0 - summary.green_in_band, 1.0 - summary.blue_in_band];
    if out.iter().any(|&o| o > tau_b) {
        ScanClass::OutOfBand
    } else {
        ScanClass::InBand
    }
}

pub fn report_rows(entries: &[ReportEntry]) -> Vec<ReportRow> {
    entries
        .iter()
        .map(|e| ReportRow {
            label: e.summary.label.clone(),
            red: e.summary.red_sum,
            green: e.summary.green_sum,
            blue: e.summary.blue_sum,
            red_ratio: e.comparison.red_ratio,
            green_ratio: e.comparison.green_ratio,
            blue_ratio: e.comparison.blue_ratio,
        })
        .collect()
}

const CSV_HEADER: [&str; 7] =
    ["label", "red", "green", "blue", "red_ratio", "green_ratio", "blue_ratio"];

fn csv_quote(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Serializes rows to the chosen format. CSV quotes labels only when they
/// need it; JSON is pretty-printed. Both end with a newline.
pub fn emit_report(rows: &[ReportRow], format: ReportFormat) -> Result<String, ReportError> {
    if rows.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    match format {
        ReportFormat::Csv => {
            let mut out = CSV_HEADER.join(",");
            out.push('\n');
            for r in rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    csv_quote(&r.label),
                    r.red,
                    r.green,
                    r.blue,
                    r.red_ratio,
                    r.green_ratio,
                    r.blue_ratio,
                ));
            }
            Ok(out)
        }
        ReportFormat::Json => {
            let mut out = serde_json::to_string_pretty(rows).expect("rows serialize infallibly");
            out.push('\n');
            Ok(out)
        }
    }
}

/// Splits CSV text into records, honoring quoted fields (doubled quotes
/// escape a literal quote; quoted fields may span line breaks).
fn csv_records(text: &str) -> Result<Vec<Vec<String>>, ReportError> {
    let mut records = Vec::new();
    let mut fields = Vec::new();
    let mut field = String::new();
    let mut chars = text.chars().peekable();
    let mut quoted = false;
    let mut any = false;
    while let Some(ch) = chars.next() {
        any = true;
        if quoted {
            if ch == '"' {
                if chars.peek() == Some(&'"') {
                    chars.next();
                    field.push('"');
                } else {
                    quoted = false;
                }
            } else {
                field.push(ch);
            }
            continue;
        }
        match ch {
            '"' if field.is_empty() => quoted = true,
            ',' => {
                fields.push(std::mem::take(&mut field));
            }
            '\n' => {
                fields.push(std::mem::take(&mut field));
                records.push(std::mem::take(&mut fields));
            }
            '\r' => {}
            _ => field.push(ch),
        }
    }
    if quoted {
        return Err(ReportError::Malformed("unterminated quote".into()));
    }
    if !field.is_empty() || !fields.is_empty() {
        fields.push(field);
        records.push(fields);
    }
    if !any {
        return Err(ReportError::EmptyInput);
    }
    Ok(records)
}

/// Parses CSV produced by [`emit_report`] back into rows.
pub fn parse_report(text: &str) -> Result<Vec<ReportRow>, ReportError> {
    let records = csv_records(text)?;
    let mut it = records.into_iter();
    let header = it.next().ok_or(ReportError::EmptyInput)?;
    if header != CSV_HEADER {
        return Err(ReportError::Malformed(format!("unexpected header {:?}", header.join(","))));
    }
    let mut rows = Vec::new();
    for (i, rec) in it.enumerate() {
        if rec.len() != 7 {
            return Err(ReportError::Malformed(format!(
                "row {} has {} fields, expected 7",
                i + 1,
                rec.len()
            )));
        }
        let int = |s: &String| {
            s.parse::<u64>().map_err(|e| ReportError::Malformed(format!("row {}: {e}", i + 1)))
        };
        let float = |s: &String| {
            s.parse::<f64>().map_err(|e| ReportError::Malformed(format!("row {}: {e}", i + 1)))
        };
        rows.push(ReportRow {
            label: rec[0].clone(),
            red: int(&rec[1])?,
            green: int(&rec[2])?,
            blue: int(&rec[3])?,
            red_ratio: float(&rec[4])?,
            green_ratio: float(&rec[5])?,
            blue_ratio: float(&rec[6])?,
        });
    }
    if rows.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    Ok(rows)
}
