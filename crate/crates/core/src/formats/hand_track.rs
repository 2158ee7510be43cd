use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraRig, Vec3};
use crate::retarget::{HandFrame, HAND_KEYPOINTS};

pub const HAND_TRACK_SCHEMA_VERSION: u32 = 1;

/// A tracked hand, either as triangulated points or as per-camera pixel detections.
#[derive(Debug, Clone, PartialEq)]
pub enum HandTrack {
    Points(Vec<HandFrame>),
    Pixels {
        cameras: [String; 2],
        frames: Vec<TrackFrame>,
    },
}

/// 21 pixel detections in each of the two cameras at one timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackFrame {
    pub t: f64,
    pub pixels: [Vec<Vector2<f64>>; 2],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    schema_version: u32,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cameras: Option<[String; 2]>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointLine {
    t: f64,
    points: Vec<[f64; 3]>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PixelLine {
    t: f64,
    pixels: [Vec<[f64; 2]>; 2],
}

impl HandTrack {
    pub fn len(&self) -> usize {
        match self {
            HandTrack::Points(f) => f.len(),
            HandTrack::Pixels { frames, .. } => frames.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// 3D hand frames, triangulating pixel tracks with `rig` when needed.
    pub fn to_frames(&self, rig: &CameraRig) -> Result<Vec<HandFrame>> {
        match self {
            HandTrack::Points(f) => Ok(f.clone()),
            HandTrack::Pixels { cameras, frames } => {
                if *cameras != rig.names {
                    return Err(Error::contract(format!(
                        "track cameras {:?} do not match rig cameras {:?}",
                        cameras, rig.names
                    )));
                }
                frames
                    .iter()
                    .map(|f| {
                        let pts = f.pixels[0]
                            .iter()
                            .zip(&f.pixels[1])
                            .map(|(a, b)| rig.triangulate(a, b))
                            .collect::<Result<Vec<_>>>()?;
                        HandFrame::new(pts, f.t)
                    })
                    .collect()
            }
        }
    }
}

pub fn write_hand_track(track: &HandTrack) -> String {
    let (kind, cameras) = match track {
        HandTrack::Points(_) => ("points", None),
        HandTrack::Pixels { cameras, .. } => ("pixels", Some(cameras.clone())),
    };
    let mut out = serde_json::to_string(&Header {
        schema_version: HAND_TRACK_SCHEMA_VERSION,
        kind: kind.into(),
        cameras,
    })
    .expect("header serializes");
    out.push('\n');
    match track {
        HandTrack::Points(frames) => {
            for f in frames {
                let line = PointLine {
                    t: f.timestamp,
                    points: f.keypoints().iter().map(|p| [p.x, p.y, p.z]).collect(),
                };
                out.push_str(&serde_json::to_string(&line).expect("line serializes"));
                out.push('\n');
            }
        }
        HandTrack::Pixels { frames, .. } => {
            for f in frames {
                let px = |v: &[Vector2<f64>]| v.iter().map(|p| [p.x, p.y]).collect::<Vec<_>>();
                let line = PixelLine {
                    t: f.t,
                    pixels: [px(&f.pixels[0]), px(&f.pixels[1])],
                };
                out.push_str(&serde_json::to_string(&line).expect("line serializes"));
                out.push('\n');
            }
        }
    }
    out
}

pub fn parse_hand_track(text: &str) -> Result<HandTrack> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hline, htext) = lines.next().ok_or_else(|| Error::parse(1, "empty hand track file"))?;
    let header: Header = serde_json::from_str(htext).map_err(|e| Error::parse(hline + 1, format!("header: {e}")))?;
    if header.schema_version != HAND_TRACK_SCHEMA_VERSION {
        return Err(Error::parse(
            hline + 1,
            format!("unsupported schema version {}", header.schema_version),
        ));
    }
    let mut last_t = f64::NEG_INFINITY;
    let mut check_t = |line: usize, t: f64| -> Result<()> {
        if !t.is_finite() || t <= last_t {
            return Err(Error::parse(line, "timestamps must be finite and increasing"));
        }
        last_t = t;
        Ok(())
    };
    match (header.kind.as_str(), header.cameras) {
        ("points", None) => {
            let mut frames = Vec::new();
            for (i, l) in lines {
                let p: PointLine = serde_json::from_str(l).map_err(|e| Error::parse(i + 1, e.to_string()))?;
                check_t(i + 1, p.t)?;
                if p.points.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::parse(i + 1, "non-finite coordinate"));
                }
                let pts = p.points.into_iter().map(Vec3::from).collect();
                frames.push(HandFrame::new(pts, p.t).map_err(|e| Error::parse(i + 1, e.to_string()))?);
            }
            Ok(HandTrack::Points(frames))
        }
        ("pixels", Some(cameras)) => {
            let mut frames = Vec::new();
            for (i, l) in lines {
                let p: PixelLine = serde_json::from_str(l).map_err(|e| Error::parse(i + 1, e.to_string()))?;
                check_t(i + 1, p.t)?;
                if p.pixels.iter().any(|v| v.len() != HAND_KEYPOINTS) {
                    return Err(Error::parse(
                        i + 1,
                        format!("each camera needs {HAND_KEYPOINTS} pixels"),
                    ));
                }
                if p.pixels.iter().flatten().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::parse(i + 1, "non-finite pixel"));
                }
                let [a, b] = p.pixels;
                let conv = |v: Vec<[f64; 2]>| v.into_iter().map(|q| Vector2::new(q[0], q[1])).collect();
                frames.push(TrackFrame {
                    t: p.t,
                    pixels: [conv(a), conv(b)],
                });
            }
            Ok(HandTrack::Pixels { cameras, frames })
        }
        ("pixels", None) => Err(Error::parse(hline + 1, "pixel tracks need a 'cameras' pair")),
        (kind, _) => Err(Error::parse(
            hline + 1,
            format!("unknown track kind '{}'", super::truncate(kind)),
        )),
    }
}
