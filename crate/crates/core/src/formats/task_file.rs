use super::{content_lines, number, numbers, truncate};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::plant::{TaskKind, TaskSpec};

/// Parses `key = value` lines. `task` is required; other keys override that task's defaults.
/// `keypoint = x y z` lines, if any, replace the default object keypoints.
pub fn parse_task_spec(text: &str) -> Result<TaskSpec> {
    let mut pairs = Vec::new();
    for (line, l) in content_lines(text) {
        let (k, v) = l
            .split_once('=')
            .ok_or_else(|| Error::parse(line, "expected 'key = value'"))?;
        pairs.push((line, k.trim(), v.trim()));
    }
    let tasks: Vec<_> = pairs.iter().filter(|(_, k, _)| *k == "task").collect();
    let &&(task_line, _, task_name) = match tasks.as_slice() {
        [one] => one,
        [] => return Err(Error::parse(0, "missing 'task' key")),
        [_, second, ..] => return Err(Error::parse(second.0, "duplicate 'task' key")),
    };
    let task = TaskKind::from_name(task_name).map_err(|e| Error::parse(task_line, e.to_string()))?;
    let mut spec = TaskSpec::default_for(task);
    let mut keypoints = Vec::new();
    let mut seen: Vec<&str> = Vec::new();
    for &(line, key, value) in &pairs {
        let toks: Vec<&str> = value.split_whitespace().collect();
        let one = || -> Result<f64> {
            match toks.as_slice() {
                [t] => number(line, t),
                _ => Err(Error::parse(line, format!("expected 1 number, found {}", toks.len()))),
            }
        };
        let two = || -> Result<(f64, f64)> {
            let v = numbers(line, &toks, 2)?;
            Ok((v[0], v[1]))
        };
        if key != "keypoint" {
            if seen.contains(&key) {
                return Err(Error::parse(line, format!("duplicate key '{}'", truncate(key))));
            }
            seen.push(key);
        }
        match key {
            "task" => {}
            "stiffness" => spec.stiffness = one()?,
            "crush_force" => spec.crush_force = one()?,
            "slip_force" => spec.slip_force = one()?,
            "contact_closure_min" => spec.contact_closure_min = one()?,
            "contact_closure_max" => spec.contact_closure_max = one()?,
            "deformable" => {
                spec.deformable = match value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(Error::parse(line, "deformable must be true or false")),
                }
            }
            "keypoint" => {
                let v = numbers(line, &toks, 3)?;
                keypoints.push(Vec3::new(v[0], v[1], v[2]));
            }
            "rest_height" => spec.rest_height = one()?,
            "object_x" => spec.object_x = two()?,
            "object_y" => spec.object_y = two()?,
            "goal" => spec.goal = two()?,
            "goal_tolerance" => spec.goal_tolerance = one()?,
            "target_fraction" => spec.target_fraction = one()?,
            "sensor_noise" => spec.sensor_noise = one()?,
            "tracker_noise" => spec.tracker_noise = one()?,
            "max_closure_rate" => spec.max_closure_rate = one()?,
            "capture_radius" => spec.capture_radius = one()?,
            "stack_height" => spec.stack_height = one()?,
            "seed" => {
                spec.seed = value.parse().map_err(|_| {
                    Error::parse(
                        line,
                        format!("seed must be an unsigned integer, found '{}'", truncate(value)),
                    )
                })?
            }
            other => return Err(Error::parse(line, format!("unknown key '{}'", truncate(other)))),
        }
    }
    if !keypoints.is_empty() {
        spec.keypoints = keypoints;
    }
    spec.validate().map_err(|e| Error::parse(0, e.to_string()))?;
    Ok(spec)
}

pub fn write_task_spec(spec: &TaskSpec) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
    kv("task", spec.task.name().into());
    kv("stiffness", spec.stiffness.to_string());
    kv("crush_force", spec.crush_force.to_string());
    kv("slip_force", spec.slip_force.to_string());
    kv("contact_closure_min", spec.contact_closure_min.to_string());
    kv("contact_closure_max", spec.contact_closure_max.to_string());
    kv("deformable", spec.deformable.to_string());
    for p in &spec.keypoints {
        kv("keypoint", format!("{} {} {}", p.x, p.y, p.z));
    }
    kv("rest_height", spec.rest_height.to_string());
    kv("object_x", format!("{} {}", spec.object_x.0, spec.object_x.1));
    kv("object_y", format!("{} {}", spec.object_y.0, spec.object_y.1));
    kv("goal", format!("{} {}", spec.goal.0, spec.goal.1));
    kv("goal_tolerance", spec.goal_tolerance.to_string());
    kv("target_fraction", spec.target_fraction.to_string());
    kv("sensor_noise", spec.sensor_noise.to_string());
    kv("tracker_noise", spec.tracker_noise.to_string());
    kv("max_closure_rate", spec.max_closure_rate.to_string());
    kv("capture_radius", spec.capture_radius.to_string());
    kv("stack_height", spec.stack_height.to_string());
    kv("seed", spec.seed.to_string());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_default_round_trips() {
        for task in [TaskKind::FragilePickPlace, TaskKind::Unstack, TaskKind::TwistLift] {
            let spec = TaskSpec::default_for(task);
            assert_eq!(parse_task_spec(&write_task_spec(&spec)).unwrap(), spec);
        }
    }

    #[test]
    fn overrides_apply_on_top_of_defaults() {
        let spec = parse_task_spec("# fragile\ntask = fragile_pick_place\ncrush_force = 120\nseed = 9\n").unwrap();
        assert_eq!(spec.crush_force, 120.0);
        assert_eq!(spec.seed, 9);
        assert_eq!(spec.slip_force, 50.0);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(matches!(parse_task_spec("crush_force = 1"), Err(Error::Parse { .. })));
        assert!(matches!(
            parse_task_spec("task = unstack\nbogus = 1"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(parse_task_spec("task = unstack\nslip_force = 200").is_err());
        assert!(parse_task_spec("task = juggling").is_err());
        assert!(parse_task_spec("task = unstack\nseed = 1\nseed = 2").is_err());
    }
}
