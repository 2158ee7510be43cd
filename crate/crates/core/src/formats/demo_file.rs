use serde::{Deserialize, Serialize};

use super::truncate;
use crate::demo::{DemoMeta, DemoStep, Demonstration};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

pub const DEMO_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    schema_version: u32,
    task: String,
    seed: u64,
    fps: f64,
    n: usize,
    m: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Step {
    t: f64,
    robot: Vec<[f64; 3]>,
    object: Vec<[f64; 3]>,
    gripper: u8,
    force: f64,
}

/// One JSON header line, then one JSON line per step.
pub fn write_demo(demo: &Demonstration) -> String {
    let mut out = serde_json::to_string(&Header {
        schema_version: DEMO_SCHEMA_VERSION,
        task: demo.meta.task.clone(),
        seed: demo.meta.seed,
        fps: demo.meta.fps,
        n: demo.meta.n,
        m: demo.meta.m,
    })
    .expect("header serializes");
    out.push('\n');
    let arr = |v: &[Vec3]| v.iter().map(|p| [p.x, p.y, p.z]).collect::<Vec<_>>();
    for s in &demo.steps {
        let line = serde_json::to_string(&Step {
            t: s.t,
            robot: arr(&s.robot),
            object: arr(&s.object),
            gripper: s.gripper as u8,
            force: s.force,
        })
        .expect("step serializes");
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn parse_demo(text: &str) -> Result<Demonstration> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hline, htext) = lines.next().ok_or_else(|| Error::parse(1, "empty demo file"))?;
    let header: Header = serde_json::from_str(htext).map_err(|e| Error::parse(hline + 1, format!("header: {e}")))?;
    if header.schema_version != DEMO_SCHEMA_VERSION {
        return Err(Error::parse(
            hline + 1,
            format!("unsupported demo schema version {}", header.schema_version),
        ));
    }
    if !(header.fps.is_finite() && header.fps > 0.0) {
        return Err(Error::parse(hline + 1, "fps must be positive"));
    }
    let mut steps = Vec::new();
    let mut last_t = f64::NEG_INFINITY;
    for (i, l) in lines {
        let line = i + 1;
        let s: Step = serde_json::from_str(l).map_err(|e| Error::parse(line, e.to_string()))?;
        if s.robot.len() != header.n || s.object.len() != header.m {
            return Err(Error::parse(
                line,
                format!(
                    "expected {} robot and {} object keypoints, found {} and {}",
                    header.n,
                    header.m,
                    s.robot.len(),
                    s.object.len()
                ),
            ));
        }
        let finite =
            s.t.is_finite() && s.force.is_finite() && s.robot.iter().chain(&s.object).flatten().all(|v| v.is_finite());
        if !finite {
            return Err(Error::parse(line, "non-finite value"));
        }
        if s.gripper > 1 {
            return Err(Error::parse(line, "gripper must be 0 or 1"));
        }
        if s.force < 0.0 {
            return Err(Error::parse(line, "force must be non-negative"));
        }
        if !(s.t > last_t) {
            return Err(Error::parse(line, "timestamps must increase"));
        }
        last_t = s.t;
        let vecs = |v: Vec<[f64; 3]>| v.into_iter().map(Vec3::from).collect::<Vec<_>>();
        steps.push(DemoStep {
            t: s.t,
            robot: vecs(s.robot),
            object: vecs(s.object),
            gripper: s.gripper == 1,
            force: s.force,
        });
    }
    Demonstration::new(
        DemoMeta {
            task: header.task,
            seed: header.seed,
            fps: header.fps,
            n: header.n,
            m: header.m,
        },
        steps,
    )
    .map_err(|e| Error::parse(0, truncate(&e.to_string()).to_string()))
}
