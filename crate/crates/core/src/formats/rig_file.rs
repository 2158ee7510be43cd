use nalgebra::Matrix4;

use super::{at_line, content_lines, numbers};
use crate::error::{Error, Result};
use crate::geometry::{CameraModel, CameraRig, Mat3, RigidTransform};

/// Name, intrinsics, extrinsics with their line, and the `camera` line.
type PendingCamera = (String, Option<Mat3>, Option<(Matrix4<f64>, usize)>, usize);

/// Parses a two-camera rig:
///
/// ```text
/// camera left
/// intrinsics fx s cx 0 fy cy 0 0 1
/// extrinsics <16 numbers, world→camera, row-major>
/// camera right
/// ...
/// ```
pub fn parse_rig(text: &str) -> Result<CameraRig> {
    let mut cams: Vec<PendingCamera> = Vec::new();
    for (line, l) in content_lines(text) {
        let tokens: Vec<&str> = l.split_whitespace().collect();
        match tokens[0] {
            "camera" => {
                if tokens.len() != 2 {
                    return Err(Error::parse(line, "expected 'camera <name>'"));
                }
                if cams.len() == 2 {
                    return Err(Error::parse(line, "a rig holds exactly two cameras"));
                }
                cams.push((tokens[1].to_string(), None, None, line));
            }
            "intrinsics" | "extrinsics" => {
                let cam = cams
                    .last_mut()
                    .ok_or_else(|| Error::parse(line, format!("'{}' before any 'camera' line", tokens[0])))?;
                if tokens[0] == "intrinsics" {
                    if cam.1.is_some() {
                        return Err(Error::parse(line, "duplicate intrinsics"));
                    }
                    cam.1 = Some(Mat3::from_row_slice(&numbers(line, &tokens[1..], 9)?));
                } else {
                    if cam.2.is_some() {
                        return Err(Error::parse(line, "duplicate extrinsics"));
                    }
                    cam.2 = Some((Matrix4::from_row_slice(&numbers(line, &tokens[1..], 16)?), line));
                }
            }
            other => {
                return Err(Error::parse(
                    line,
                    format!("unknown rig keyword '{}'", super::truncate(other)),
                ))
            }
        }
    }
    if cams.len() != 2 {
        return Err(Error::parse(0, format!("rig needs two cameras, found {}", cams.len())));
    }
    let mut built = Vec::with_capacity(2);
    let mut names = Vec::with_capacity(2);
    for (name, k, e, line) in cams {
        let k = k.ok_or_else(|| Error::parse(line, format!("camera '{name}' has no intrinsics")))?;
        let (e, e_line) = e.ok_or_else(|| Error::parse(line, format!("camera '{name}' has no extrinsics")))?;
        let ext = RigidTransform::from_homogeneous(&e).map_err(at_line(e_line))?;
        built.push(CameraModel::new(k, ext).map_err(at_line(line))?);
        names.push(name);
    }
    if names[0] == names[1] {
        return Err(Error::parse(0, "camera names must differ"));
    }
    let [a, b]: [CameraModel; 2] = built.try_into().expect("two cameras");
    let [na, nb]: [String; 2] = names.try_into().expect("two names");
    Ok(CameraRig {
        names: [na, nb],
        cameras: [a, b],
    })
}

pub fn write_rig(rig: &CameraRig) -> String {
    let mut out = String::new();
    for (name, cam) in rig.names.iter().zip(&rig.cameras) {
        let k = cam.intrinsics();
        let e = cam.extrinsics().to_homogeneous();
        let row = |vals: Vec<f64>| vals.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
        out.push_str(&format!("camera {name}\n"));
        out.push_str(&format!(
            "intrinsics {}\n",
            row(k.transpose().iter().copied().collect())
        ));
        out.push_str(&format!(
            "extrinsics {}\n",
            row(e.transpose().iter().copied().collect())
        ));
    }
    out
}
