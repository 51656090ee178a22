use std::fmt::Write as _;
use std::io::Write;

use super::SeparationScore;
use crate::error::{Error, Result};

/// Per-track scores and their medians.
#[derive(Debug, Clone, PartialEq)]
pub struct MedianReport {
    pub scores: Vec<SeparationScore>,
    pub median_sdr: f64,
    pub median_sir: f64,
}

/// Median, averaging the two central values for even counts.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Usage("median of an empty list".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Numeric("median of a list containing NaN".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 || v[n / 2 - 1] == v[n / 2] {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

pub fn median_report(scores: &[SeparationScore]) -> Result<MedianReport> {
    if scores.is_empty() {
        return Err(Error::Usage("no scores to report".into()));
    }
    let sdr: Vec<f64> = scores.iter().map(|s| s.sdr).collect();
    let sir: Vec<f64> = scores.iter().map(|s| s.sir).collect();
    Ok(MedianReport {
        scores: scores.to_vec(),
        median_sdr: median(&sdr)?,
        median_sir: median(&sir)?,
    })
}

pub const MEDIAN_ROW: &str = "median";

impl MedianReport {
    /// Aligned plain-text table, one row per track and a per-track median row.
    pub fn to_text(&self, label: &str) -> String {
        let width = self
            .scores
            .iter()
            .map(|s| s.track_id.chars().count())
            .chain([label.len(), "median (per-track)".len()])
            .max()
            .unwrap_or(0);
        let mut out = String::new();
        let _ = writeln!(out, "{label:<width$}  {:>9}  {:>9}", "SDR (dB)", "SIR (dB)");
        let _ = writeln!(out, "{}", "-".repeat(width + 22));
        for s in &self.scores {
            let _ = writeln!(out, "{:<width$}  {:>9.2}  {:>9.2}", s.track_id, s.sdr, s.sir);
        }
        let _ = writeln!(out, "{}", "-".repeat(width + 22));
        let _ = writeln!(
            out,
            "{:<width$}  {:>9.2}  {:>9.2}",
            "median (per-track)", self.median_sdr, self.median_sir
        );
        out
    }

    /// `track_id,sdr,sir` records followed by a `median` record.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let fail = |e: csv::Error| Error::Format(format!("writing report: {e}"));
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["track_id", "sdr", "sir"]).map_err(fail)?;
        for s in &self.scores {
            w.write_record([s.track_id.clone(), s.sdr.to_string(), s.sir.to_string()])
                .map_err(fail)?;
        }
        w.write_record([MEDIAN_ROW.to_string(), self.median_sdr.to_string(), self.median_sir.to_string()])
            .map_err(fail)?;
        w.flush().map_err(|e| Error::Format(format!("writing report: {e}")))?;
        Ok(())
    }
}
