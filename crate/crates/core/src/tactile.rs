//! Tactile force channel: magnetometer norm aggregation, resampling onto video
//! frames, and the monotone sensor-norm ↔ Newton calibration curve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

pub const MAGNETOMETERS: usize = 5;
pub const CENTER_MAGNETOMETER: usize = 2;

/// One reading of the five-magnetometer skin together with its at-rest baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct RawForceSample {
    pub timestamp: f64,
    pub magnetometers: [Vec3; MAGNETOMETERS],
    pub baseline: [Vec3; MAGNETOMETERS],
}

/// Euclidean norm of the baseline-subtracted center magnetometer.
pub fn aggregate_norm(sample: &RawForceSample) -> f64 {
    (sample.magnetometers[CENTER_MAGNETOMETER] - sample.baseline[CENTER_MAGNETOMETER]).norm()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resampled {
    pub values: Vec<f64>,
    /// Set for frames whose window held no samples (value carried from the previous frame).
    pub gaps: Vec<bool>,
    /// Samples that fell into some window.
    pub samples_used: usize,
}

/// Mean aggregated norm per frame over `[t_i, t_{i+1})`; the last frame uses a
/// trailing window of the mean frame spacing.
pub fn resample_to_frames(stream: &[RawForceSample], frame_times: &[f64]) -> Result<Resampled> {
    let (first, last) = match (stream.first(), stream.last()) {
        (Some(f), Some(l)) => (f.timestamp, l.timestamp),
        _ => return Err(Error::contract("empty force stream")),
    };
    if frame_times.is_empty() {
        return Err(Error::contract("no frame times"));
    }
    if stream.windows(2).any(|w| !(w[1].timestamp > w[0].timestamp)) {
        return Err(Error::contract("force timestamps must be strictly increasing"));
    }
    if frame_times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::contract("frame times must be strictly increasing"));
    }
    let (t0, tn) = (frame_times[0], frame_times[frame_times.len() - 1]);
    if first > t0 || last < tn {
        return Err(Error::contract(format!(
            "force stream [{first}, {last}] does not cover frames [{t0}, {tn}]"
        )));
    }
    let width = if frame_times.len() > 1 {
        (tn - t0) / (frame_times.len() - 1) as f64
    } else {
        f64::INFINITY
    };

    let mut values = Vec::with_capacity(frame_times.len());
    let mut gaps = Vec::with_capacity(frame_times.len());
    let mut samples_used = 0;
    let mut cursor = stream.partition_point(|s| s.timestamp < t0);
    let mut previous = 0.0;
    for (i, &start) in frame_times.iter().enumerate() {
        let end = frame_times.get(i + 1).copied().unwrap_or(start + width);
        let (mut sum, mut count) = (0.0, 0usize);
        while cursor < stream.len() && stream[cursor].timestamp < end {
            sum += aggregate_norm(&stream[cursor]);
            count += 1;
            cursor += 1;
        }
        samples_used += count;
        if count == 0 {
            values.push(previous);
            gaps.push(true);
        } else {
            previous = sum / count as f64;
            values.push(previous);
            gaps.push(false);
        }
    }
    Ok(Resampled {
        values,
        gaps,
        samples_used,
    })
}

/// Monotone piecewise-linear map from sensor norm to Newtons, anchored at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    knots: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationFit {
    pub curve: CalibrationCurve,
    /// Largest |curve(norm) - newtons| over the input pairs.
    pub max_residual: f64,
    /// Blocks of distinct norms pooled together by the monotone projection.
    pub pooled_blocks: usize,
}

impl CalibrationCurve {
    pub fn from_knots(knots: Vec<(f64, f64)>) -> Result<Self> {
        match knots.first() {
            Some(&(0.0, 0.0)) => {}
            _ => return Err(Error::contract("calibration curve must start at (0, 0)")),
        }
        if knots.len() < 2 {
            return Err(Error::contract("calibration curve needs at least two knots"));
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) || !(w[1].1 >= w[0].1) || !w[1].0.is_finite() || !w[1].1.is_finite() {
                return Err(Error::contract(
                    "calibration knots must be increasing in norm and non-decreasing in force",
                ));
            }
        }
        Ok(Self { knots })
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    fn terminal_slope(&self) -> f64 {
        let n = self.knots.len();
        let (a, b) = (self.knots[n - 2], self.knots[n - 1]);
        (b.1 - a.1) / (b.0 - a.0)
    }

    pub fn norm_to_newton(&self, norm: f64) -> f64 {
        let x = norm.max(0.0);
        let last = self.knots[self.knots.len() - 1];
        if x >= last.0 {
            return last.1 + self.terminal_slope() * (x - last.0);
        }
        let i = self.knots.partition_point(|k| k.0 <= x);
        let (a, b) = (self.knots[i - 1], self.knots[i]);
        a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
    }

    /// Smallest norm mapping to `newtons`.
    pub fn newton_to_norm(&self, newtons: f64) -> f64 {
        let f = newtons.max(0.0);
        let last = self.knots[self.knots.len() - 1];
        if f > last.1 {
            let slope = self.terminal_slope();
            return if slope > 0.0 {
                last.0 + (f - last.1) / slope
            } else {
                last.0
            };
        }
        let i = self.knots.partition_point(|k| k.1 < f);
        if i == 0 {
            return self.knots[0].0;
        }
        let (a, b) = (self.knots[i - 1], self.knots[i]);
        a.0 + (b.0 - a.0) * (f - a.1) / (b.1 - a.1)
    }
}

/// Isotonic fit (pool adjacent violators) of `(norm, newtons)` pairs into a calibration curve.
pub fn fit_calibration(pairs: &[(f64, f64)]) -> Result<CalibrationFit> {
    if pairs.len() < 2 {
        return Err(Error::contract("calibration needs at least two pairs"));
    }
    if pairs.iter().any(|&(x, y)| !x.is_finite() || !y.is_finite() || x < 0.0) {
        return Err(Error::contract(
            "calibration pairs must be finite with non-negative norms",
        ));
    }
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    if sorted[0].0 == sorted[sorted.len() - 1].0 {
        return Err(Error::Degenerate {
            what: "calibration session (all norms identical)",
            condition: 0.0,
        });
    }

    // collapse equal norms into weighted points
    let mut xs: Vec<f64> = Vec::new();
    let mut sums: Vec<f64> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for &(x, y) in &sorted {
        if xs.last() == Some(&x) {
            *sums.last_mut().unwrap() += y;
            *weights.last_mut().unwrap() += 1.0;
        } else {
            xs.push(x);
            sums.push(y);
            weights.push(1.0);
        }
    }

    let fitted = pool_adjacent_violators(&sums, &weights);
    let pooled_blocks = fitted.blocks_merged;

    let mut knots = Vec::with_capacity(xs.len() + 1);
    knots.push((0.0, 0.0));
    for (&x, &y) in xs.iter().zip(&fitted.values) {
        let y = y.max(0.0);
        if x == 0.0 {
            continue;
        }
        knots.push((x, y));
    }
    if knots.len() < 2 {
        return Err(Error::Degenerate {
            what: "calibration session (no positive norms)",
            condition: 0.0,
        });
    }
    let curve = CalibrationCurve::from_knots(knots)?;
    let max_residual = pairs
        .iter()
        .map(|&(x, y)| (curve.norm_to_newton(x) - y).abs())
        .fold(0.0, f64::max);
    Ok(CalibrationFit {
        curve,
        max_residual,
        pooled_blocks,
    })
}

struct Isotonic {
    values: Vec<f64>,
    blocks_merged: usize,
}

/// Weighted least-squares non-decreasing fit. `sums[i]` is the total response at point `i`
/// and `weights[i]` its multiplicity.
fn pool_adjacent_violators(sums: &[f64], weights: &[f64]) -> Isotonic {
    // stack of blocks: (weighted sum, weight, number of points)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(sums.len());
    for (&s, &w) in sums.iter().zip(weights) {
        blocks.push((s, w, 1));
        while blocks.len() > 1 {
            let n = blocks.len();
            let (s2, w2, c2) = blocks[n - 1];
            let (s1, w1, c1) = blocks[n - 2];
            if s1 / w1 <= s2 / w2 {
                break;
            }
            blocks.truncate(n - 2);
            blocks.push((s1 + s2, w1 + w2, c1 + c2));
        }
    }
    let blocks_merged = blocks.iter().filter(|b| b.2 > 1).count();
    let mut values = Vec::with_capacity(sums.len());
    for (s, w, c) in blocks {
        values.extend(std::iter::repeat_n(s / w, c));
    }
    Isotonic { values, blocks_merged }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(t: f64, center: Vec3, base: Vec3) -> RawForceSample {
        let mut magnetometers = [Vec3::new(9.0, 9.0, 9.0); MAGNETOMETERS];
        let mut baseline = [Vec3::zeros(); MAGNETOMETERS];
        magnetometers[CENTER_MAGNETOMETER] = center;
        baseline[CENTER_MAGNETOMETER] = base;
        RawForceSample {
            timestamp: t,
            magnetometers,
            baseline,
        }
    }

    #[test]
    fn norm_of_center_residual() {
        assert_eq!(
            aggregate_norm(&sample(0.0, Vec3::new(3.0, 4.0, 0.0), Vec3::zeros())),
            5.0
        );
        let v = Vec3::new(0.3, -2.0, 7.0);
        assert_eq!(aggregate_norm(&sample(0.0, v, v)), 0.0);
        assert_eq!(
            aggregate_norm(&sample(0.0, Vec3::new(1.0, 1.0, 1.0), Vec3::new(1.0, 1.0, 0.0))),
            1.0
        );
    }

    #[test]
    fn resample_200hz_onto_30fps() {
        let stream: Vec<_> = (0..200)
            .map(|k| sample(k as f64 / 200.0, Vec3::new(k as f64, 0.0, 0.0), Vec3::zeros()))
            .collect();
        let frames: Vec<f64> = (0..30).map(|i| i as f64 / 30.0).collect();
        let out = resample_to_frames(&stream, &frames).unwrap();
        assert_eq!(out.values.len(), 30);
        assert_eq!(out.samples_used, 200);
        assert!(out.gaps.iter().all(|g| !g));
        // counting oracle: the mean of a window of consecutive k equals the mean of its indices
        let mut k = 0usize;
        for (i, &v) in out.values.iter().enumerate() {
            let end = (i + 1) as f64 / 30.0;
            let start_k = k;
            while k < 200 && (k as f64 / 200.0) < end {
                k += 1;
            }
            let count = k - start_k;
            assert!(count == 6 || count == 7, "window {i} had {count}");
            let mean = (start_k + k - 1) as f64 / 2.0;
            assert!((v - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn resample_constant_stream_and_gaps() {
        let c = Vec3::new(0.0, 2.5, 0.0);
        let stream = vec![
            sample(0.0, c, Vec3::zeros()),
            sample(0.05, c * 2.0, Vec3::zeros()),
            sample(0.31, c, Vec3::zeros()),
        ];
        let frames = [0.0, 0.1, 0.2, 0.3];
        let out = resample_to_frames(&stream, &frames).unwrap();
        assert_eq!(out.values, vec![3.75, 3.75, 3.75, 2.5]);
        assert_eq!(out.gaps, vec![false, true, true, false]);

        let flat: Vec<_> = (0..100).map(|k| sample(k as f64 * 0.005, c, Vec3::zeros())).collect();
        let frames: Vec<f64> = (0..14).map(|i| i as f64 / 30.0).collect();
        let out = resample_to_frames(&flat, &frames).unwrap();
        assert!(out.values.iter().all(|&v| v == 2.5));
    }

    #[test]
    fn resample_rejects_uncovered_span() {
        let stream = vec![
            sample(0.1, Vec3::zeros(), Vec3::zeros()),
            sample(0.2, Vec3::zeros(), Vec3::zeros()),
        ];
        assert!(matches!(
            resample_to_frames(&stream, &[0.0, 0.1]),
            Err(Error::Contract(_))
        ));
        assert!(resample_to_frames(&stream, &[0.1, 0.3]).is_err());
        assert!(resample_to_frames(&[], &[0.0]).is_err());
    }

    #[test]
    fn linear_two_point_curve() {
        let fit = fit_calibration(&[(0.0, 0.0), (100.0, 5.0)]).unwrap();
        assert_eq!(fit.curve.norm_to_newton(50.0), 2.5);
        assert_eq!(fit.curve.norm_to_newton(100.0), 5.0);
        assert_eq!(fit.curve.norm_to_newton(0.0), 0.0);
        assert_eq!(fit.curve.norm_to_newton(200.0), 10.0);
        assert_eq!(fit.max_residual, 0.0);
        assert_eq!(fit.pooled_blocks, 0);
    }

    #[test]
    fn violators_are_pooled() {
        let fit = fit_calibration(&[(0.0, 0.0), (50.0, 3.0), (60.0, 2.5), (100.0, 5.0)]).unwrap();
        assert_eq!(
            fit.curve.knots(),
            &[(0.0, 0.0), (50.0, 2.75), (60.0, 2.75), (100.0, 5.0)]
        );
        assert_eq!(fit.pooled_blocks, 1);
        assert!((fit.max_residual - 0.25).abs() < 1e-12);
    }

    #[test]
    fn identical_norms_are_degenerate() {
        assert!(matches!(
            fit_calibration(&[(3.0, 1.0), (3.0, 2.0)]),
            Err(Error::Degenerate { .. })
        ));
        assert!(fit_calibration(&[(3.0, 1.0)]).is_err());
    }

    #[test]
    fn curve_validation() {
        assert!(CalibrationCurve::from_knots(vec![(1.0, 0.0), (2.0, 1.0)]).is_err());
        assert!(CalibrationCurve::from_knots(vec![(0.0, 0.0), (2.0, 1.0), (2.0, 3.0)]).is_err());
        assert!(CalibrationCurve::from_knots(vec![(0.0, 0.0), (2.0, 1.0), (3.0, 0.5)]).is_err());
    }

    #[test]
    fn inverse_on_flat_segment_picks_left_end() {
        let c = CalibrationCurve::from_knots(vec![(0.0, 0.0), (10.0, 1.0), (20.0, 1.0), (30.0, 2.0)]).unwrap();
        assert_eq!(c.newton_to_norm(1.0), 10.0);
        assert_eq!(c.newton_to_norm(1.5), 25.0);
    }

    fn pairs_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((0.0f64..500.0, -1.0f64..6.0), 2..40)
    }

    proptest! {
        #[test]
        fn fit_is_monotone(pairs in pairs_strategy()) {
            if let Ok(fit) = fit_calibration(&pairs) {
                for w in fit.curve.knots().windows(2) {
                    prop_assert!(w[0].0 < w[1].0 && w[0].1 <= w[1].1);
                }
                let mut last = -1.0;
                for i in 0..200 {
                    let v = fit.curve.norm_to_newton(i as f64 * 3.0);
                    prop_assert!(v >= last);
                    last = v;
                }
            }
        }

        #[test]
        fn round_trip_on_increasing_curve(incs in prop::collection::vec((0.1f64..50.0, 0.01f64..2.0), 1..12), qs in prop::collection::vec(0.0f64..1.2, 1..20)) {
            let mut knots = vec![(0.0, 0.0)];
            for (dx, dy) in incs {
                let (x, y) = *knots.last().unwrap();
                knots.push((x + dx, y + dy));
            }
            let top = knots.last().unwrap().0;
            let c = CalibrationCurve::from_knots(knots).unwrap();
            for q in qs {
                let x = q * top;
                prop_assert!((c.newton_to_norm(c.norm_to_newton(x)) - x).abs() < 1e-9);
            }
        }
    }
}
