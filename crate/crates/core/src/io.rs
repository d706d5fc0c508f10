//! Plain-text file formats: `#`-commented CSV tables and flat `key = value` records.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::jumps::{IntervalHistogram, TimeSeries};
use crate::noise::NoiseSignal;
use crate::trajectory::Trajectory;
use crate::two_level::PhaseCell;

/// Renders `(key, value)` pairs as `key = value` lines.
pub fn format_kv<K: AsRef<str>, V: AsRef<str>>(pairs: &[(K, V)]) -> String {
    let mut s = String::new();
    for (k, v) in pairs {
        let _ = writeln!(s, "{} = {}", k.as_ref(), v.as_ref());
    }
    s
}

/// Parses `key = value` lines, skipping blanks and `#` comments.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            });
        };
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn header_block(header: &[(String, String)]) -> String {
    let mut s = String::new();
    for (k, v) in header {
        let _ = writeln!(s, "# {k} = {v}");
    }
    s
}

/// Trajectory table `t,<column>` preceded by a `#` header block.
pub fn trajectory_csv(traj: &Trajectory, column: &str, header: &[(String, String)]) -> String {
    let mut s = header_block(header);
    let _ = writeln!(s, "t,{column}");
    for (t, v) in traj.times.iter().zip(&traj.values) {
        let _ = writeln!(s, "{t},{v}");
    }
    s
}

pub fn histogram_csv(h: &IntervalHistogram, header: &[(String, String)]) -> String {
    let mut s = header_block(header);
    s.push_str("bin_left,bin_right,count\n");
    for (k, c) in h.counts.iter().enumerate() {
        let left = k as f64 * h.bin_width;
        let right = (k + 1) as f64 * h.bin_width;
        let _ = writeln!(s, "{left},{right},{c}");
    }
    s
}

/// Reads a histogram written by [`histogram_csv`].
pub fn parse_histogram_csv(text: &str) -> Result<IntervalHistogram> {
    let rows = parse_numeric_rows(text, 3)?;
    if rows.is_empty() {
        return Err(Error::EmptySeries);
    }
    let bin_width = rows[0][1] - rows[0][0];
    if !(bin_width > 0.0) {
        return Err(Error::InvalidSeries("histogram bin width must be positive".into()));
    }
    let counts: Vec<u64> = rows.iter().map(|r| r[2].max(0.0).round() as u64).collect();
    let total = counts.iter().sum();
    Ok(IntervalHistogram {
        bin_width,
        counts,
        total_events: total,
    })
}

pub fn phase_diagram_csv(cells: &[PhaseCell], header: &[(String, String)]) -> String {
    let mut s = header_block(header);
    s.push_str("delta,omega,stable_count\n");
    for c in cells {
        let _ = writeln!(s, "{},{},{}", c.delta, c.omega, c.stable_count);
    }
    s
}

pub fn potential_csv(points: &[(f64, f64)], header: &[(String, String)]) -> String {
    let mut s = header_block(header);
    s.push_str("n,E\n");
    for (n, e) in points {
        let _ = writeln!(s, "{n},{e}");
    }
    s
}

pub fn noise_csv(times: &[f64], values: &[f64], header: &[(String, String)]) -> String {
    let mut s = header_block(header);
    s.push_str("t,value\n");
    for (t, v) in times.iter().zip(values) {
        let _ = writeln!(s, "{t},{v}");
    }
    s
}

pub fn parse_noise_csv(text: &str) -> Result<NoiseSignal> {
    let series = parse_series_csv(text)?;
    NoiseSignal::from_samples(series.times(), series.values().to_vec())
}

fn split_fields(line: &str) -> Vec<&str> {
    if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else if line.contains(';') {
        line.split(';').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

/// Numeric rows with at least `min_cols` columns; comment lines and a single
/// leading non-numeric header line are skipped.
fn parse_numeric_rows(text: &str, min_cols: usize) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    let mut seen_data = false;
    let mut seen_header = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields = split_fields(line);
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().take(min_cols).map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) if v.len() >= min_cols => {
                seen_data = true;
                rows.push(v);
            }
            _ if !seen_data && !seen_header => seen_header = true,
            _ => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected {min_cols} numeric columns, got `{line}`"),
                })
            }
        }
    }
    Ok(rows)
}

/// Reads a two-column `t,value` series (extra columns ignored, header optional).
pub fn parse_series_csv(text: &str) -> Result<TimeSeries> {
    let rows = parse_numeric_rows(text, 2)?;
    let (times, values) = rows.into_iter().map(|r| (r[0], r[1])).unzip();
    TimeSeries::new(times, values)
}

/// Writes via a temporary sibling and a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
