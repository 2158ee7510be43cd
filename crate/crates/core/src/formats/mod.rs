//! Text file formats: camera rigs, keypoint layouts, task specs, demos, hand tracks and calibration data.
//!
//! Every parser reports failures as [`Error::Parse`] with a 1-based line number and never panics.

mod calibration;
mod demo_file;
mod hand_track;
mod layout_file;
mod rig_file;
mod task_file;

pub use calibration::{parse_curve, parse_session, write_curve, CalibrationSession, SessionRow};
pub use demo_file::{parse_demo, write_demo, DEMO_SCHEMA_VERSION};
pub use hand_track::{parse_hand_track, write_hand_track, HandTrack, TrackFrame, HAND_TRACK_SCHEMA_VERSION};
pub use layout_file::{parse_layout, write_layout};
pub use rig_file::{parse_rig, write_rig};
pub use task_file::{parse_task_spec, write_task_spec};

use crate::error::{Error, Result};

/// Non-blank lines with `#` comments stripped, paired with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

fn number(line: usize, token: &str) -> Result<f64> {
    let v: f64 = token
        .parse()
        .map_err(|_| Error::parse(line, format!("expected a number, found '{}'", truncate(token))))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("non-finite number '{}'", truncate(token))));
    }
    Ok(v)
}

fn numbers(line: usize, tokens: &[&str], expected: usize) -> Result<Vec<f64>> {
    if tokens.len() != expected {
        return Err(Error::parse(
            line,
            format!("expected {expected} numbers, found {}", tokens.len()),
        ));
    }
    tokens.iter().map(|t| number(line, t)).collect()
}

/// Keeps error messages short when fuzzed input contains huge tokens.
fn truncate(s: &str) -> &str {
    match s.char_indices().nth(32) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

/// Re-tags a semantic error from a constructor with the line it came from.
fn at_line(line: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Parse { .. } => e,
        other => Error::parse(line, other.to_string()),
    }
}
