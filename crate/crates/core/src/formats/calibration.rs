use super::{number, truncate};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::tactile::{aggregate_norm, CalibrationCurve, RawForceSample, MAGNETOMETERS};

/// One scale reading: the magnetometers and the weighing-scale force in Newtons.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRow {
    pub timestamp: f64,
    pub magnetometers: [Vec3; MAGNETOMETERS],
    pub newtons: f64,
}

/// A weighing-scale session. The first row is taken at rest and serves as the baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSession {
    pub baseline: [Vec3; MAGNETOMETERS],
    pub rows: Vec<SessionRow>,
}

impl CalibrationSession {
    /// `(sensor norm, Newtons)` for every row, baseline row included.
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .map(|r| {
                let s = RawForceSample {
                    timestamp: r.timestamp,
                    magnetometers: r.magnetometers,
                    baseline: self.baseline,
                };
                (aggregate_norm(&s), r.newtons)
            })
            .collect()
    }
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

/// Rows of numeric fields with their line numbers; a leading non-numeric row is treated as a header.
fn numeric_rows(text: &str, width: usize) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut out = Vec::new();
    for (i, rec) in csv_reader(text).records().enumerate() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if i == 0 && out.is_empty() && rec.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        if rec.len() != width {
            return Err(Error::parse(
                line,
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        let vals = rec.iter().map(|f| number(line, f)).collect::<Result<Vec<_>>>()?;
        out.push((line, vals));
    }
    Ok(out)
}

/// Comma-separated `timestamp, 15 magnetometer values, newtons` rows.
pub fn parse_session(text: &str) -> Result<CalibrationSession> {
    let rows = numeric_rows(text, 2 + 3 * MAGNETOMETERS)?;
    if rows.is_empty() {
        return Err(Error::parse(1, "calibration session has no rows"));
    }
    let mut parsed = Vec::with_capacity(rows.len());
    let mut last_t = f64::NEG_INFINITY;
    for (line, v) in rows {
        if v[0] <= last_t {
            return Err(Error::parse(line, "timestamps must increase"));
        }
        last_t = v[0];
        let newtons = v[1 + 3 * MAGNETOMETERS];
        if newtons < 0.0 {
            return Err(Error::parse(line, "scale force must be non-negative"));
        }
        let magnetometers = std::array::from_fn(|k| Vec3::new(v[1 + 3 * k], v[2 + 3 * k], v[3 + 3 * k]));
        parsed.push(SessionRow {
            timestamp: v[0],
            magnetometers,
            newtons,
        });
    }
    Ok(CalibrationSession {
        baseline: parsed[0].magnetometers,
        rows: parsed,
    })
}

/// `norm,newton` knot rows.
pub fn parse_curve(text: &str) -> Result<CalibrationCurve> {
    let rows = numeric_rows(text, 2)?;
    let knots = rows.iter().map(|(_, v)| (v[0], v[1])).collect();
    CalibrationCurve::from_knots(knots).map_err(|e| Error::parse(0, truncate(&e.to_string()).to_string()))
}

pub fn write_curve(curve: &CalibrationCurve) -> String {
    let mut out = String::from("norm,newton\n");
    for (n, f) in curve.knots() {
        out.push_str(&format!("{n},{f}\n"));
    }
    out
}
