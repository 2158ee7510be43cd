use super::{at_line, content_lines, numbers, truncate};
use crate::error::{Error, Result};
use crate::geometry::{decode_rotation6d, RigidTransform, Rotation6D, Vec3};
use crate::retarget::KeypointLayout;

/// Parses `<name> tx ty tz r1 .. r6` lines plus an optional `wrist <name>` line (default: first keypoint).
pub fn parse_layout(text: &str) -> Result<KeypointLayout> {
    let mut names: Vec<String> = Vec::new();
    let mut offsets = Vec::new();
    let mut wrist: Option<(String, usize)> = None;
    for (line, l) in content_lines(text) {
        let tokens: Vec<&str> = l.split_whitespace().collect();
        if tokens[0] == "wrist" && tokens.len() == 2 {
            if wrist.is_some() {
                return Err(Error::parse(line, "duplicate wrist line"));
            }
            wrist = Some((tokens[1].to_string(), line));
            continue;
        }
        let name = tokens[0];
        if names.iter().any(|n| n == name) {
            return Err(Error::parse(line, format!("duplicate keypoint '{}'", truncate(name))));
        }
        let v = numbers(line, &tokens[1..], 9)?;
        let r = decode_rotation6d(&Rotation6D([v[3], v[4], v[5], v[6], v[7], v[8]])).map_err(at_line(line))?;
        offsets.push(RigidTransform::new(r, Vec3::new(v[0], v[1], v[2])).map_err(at_line(line))?);
        names.push(name.to_string());
    }
    let wrist_index = match wrist {
        None => 0,
        Some((w, line)) => names
            .iter()
            .position(|n| *n == w)
            .ok_or_else(|| Error::parse(line, format!("wrist '{}' is not a keypoint", truncate(&w))))?,
    };
    KeypointLayout::new(names, offsets, wrist_index).map_err(at_line(0))
}

pub fn write_layout(layout: &KeypointLayout) -> String {
    let mut out = String::from("# name tx ty tz r6d(6)\n");
    for (name, off) in layout.names.iter().zip(layout.offsets()) {
        let t = off.translation();
        let r = crate::geometry::encode_rotation6d(off.rotation()).0;
        let vals: Vec<String> = [t.x, t.y, t.z].iter().chain(r.iter()).map(|v| v.to_string()).collect();
        out.push_str(&format!("{name} {}\n", vals.join(" ")));
    }
    out.push_str(&format!("wrist {}\n", layout.names[layout.wrist_index()]));
    out
}
