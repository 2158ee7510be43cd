use nalgebra::Rotation3;

use super::controller::{force_feedback_gripper_control, ControllerConfig};
use super::rollout::task_success;
use crate::demo::{DemoMeta, DemoStep, Demonstration};
use crate::error::Result;
use crate::geometry::{RigidTransform, Vec3};
use crate::plant::{reset_pose, ContactStatus, Plant, PlantConfig, Scene, TaskKind, TaskSpec};
use crate::retarget::KeypointLayout;

pub const EXPERT_FPS: f64 = 30.0;
/// Clearance above the grasp and place heights.
const HOVER: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Grip {
    Open,
    Close,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    to: RigidTransform,
    duration: f64,
    grip: Grip,
}

fn min_jerk(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

fn interpolate(a: &RigidTransform, b: &RigidTransform, s: f64) -> RigidTransform {
    let w = min_jerk(s);
    let ra = Rotation3::from_matrix_unchecked(*a.rotation());
    let rb = Rotation3::from_matrix_unchecked(*b.rotation());
    let r = ra.slerp(&rb, w);
    let t = a.translation() + (b.translation() - a.translation()) * w;
    RigidTransform::identity()
        .with_rotation(*r.matrix())
        .with_translation(t)
}

fn plan(scene: &Scene) -> Vec<Segment> {
    let r0 = *reset_pose().rotation();
    let obj = *scene.object.initial_pose.translation();
    let at = |p: Vec3| RigidTransform::identity().with_rotation(r0).with_translation(p);
    let up = Vec3::new(0.0, 0.0, HOVER);
    let seg = |to, duration, grip| Segment { to, duration, grip };
    let mut out = vec![
        seg(at(obj + up), 1.2, Grip::Open),
        seg(at(obj), 0.8, Grip::Open),
        seg(at(obj), 0.5, Grip::Close),
    ];
    match scene.task {
        TaskKind::FragilePickPlace | TaskKind::Unstack => {
            let place = Vec3::new(
                scene.goal.x,
                scene.goal.y,
                scene.goal.z + (obj.z - scene.object.initial_pose.translation().z),
            );
            out.extend([
                seg(at(obj + up), 0.8, Grip::Close),
                seg(at(place + up), 1.2, Grip::Close),
                seg(at(place), 0.8, Grip::Close),
                seg(at(place), 0.4, Grip::Open),
                seg(at(place + up), 0.6, Grip::Open),
            ]);
        }
        TaskKind::TwistLift => {
            let yaw = Rotation3::from_axis_angle(&Vec3::z_axis(), std::f64::consts::FRAC_PI_2);
            let twisted = RigidTransform::identity()
                .with_rotation(yaw.matrix() * r0)
                .with_translation(obj + up);
            out.extend([seg(twisted, 1.2, Grip::Close), seg(twisted, 0.5, Grip::Close)]);
        }
    }
    out
}

/// Expert eef targets per frame, paired with the gripper mode active while moving to it.
fn schedule(scene: &Scene) -> Vec<(RigidTransform, Grip)> {
    let mut from = reset_pose();
    let mut out = Vec::new();
    for seg in plan(scene) {
        let frames = (seg.duration * EXPERT_FPS).round() as usize;
        for i in 1..=frames {
            out.push((interpolate(&from, &seg.to, i as f64 / frames as f64), seg.grip));
        }
        from = seg.to;
    }
    out
}

#[derive(Debug, Clone)]
pub struct ExpertRun {
    pub demo: Demonstration,
    pub scene: Scene,
    pub success: bool,
}

/// Scripted approach, close to the target force, move, open; recorded at 30 fps through the plant.
pub fn scripted_expert(
    spec: &TaskSpec,
    seed: u64,
    layout: &KeypointLayout,
    ctrl: &ControllerConfig,
) -> Result<ExpertRun> {
    let scene = Scene::sample(spec, seed)?;
    let plant = Plant::new(scene.clone(), spec.plant_config(), reset_pose(), seed);
    run_schedule(spec, scene, plant, layout, ctrl, seed)
}

/// Same trajectory with the sensor noise turned off.
pub fn scripted_expert_noiseless(
    spec: &TaskSpec,
    seed: u64,
    layout: &KeypointLayout,
    ctrl: &ControllerConfig,
) -> Result<ExpertRun> {
    let scene = Scene::sample(spec, seed)?;
    let cfg = PlantConfig {
        sensor_noise_sigma: 0.0,
        ..spec.plant_config()
    };
    let plant = Plant::new(scene.clone(), cfg, reset_pose(), seed);
    run_schedule(spec, scene, plant, layout, ctrl, seed)
}

fn run_schedule(
    spec: &TaskSpec,
    scene: Scene,
    mut plant: Plant,
    layout: &KeypointLayout,
    ctrl: &ControllerConfig,
    seed: u64,
) -> Result<ExpertRun> {
    let target = spec.target_force();
    let mut steps = Vec::new();
    let mut ever_held = false;
    let sched = schedule(&scene);
    for (i, (pose, grip)) in sched.iter().enumerate() {
        record(&mut steps, &mut plant, layout, i);
        match grip {
            Grip::Close => {
                force_feedback_gripper_control(&mut plant, target, ctrl)?;
            }
            Grip::Open => {
                let eef = plant.state().eef_pose;
                while plant.state().closure > 0.0 {
                    plant.step(0.0, &eef);
                }
            }
        }
        let closure = plant.state().closure;
        ever_held |= plant.step(closure, pose).status == ContactStatus::Held;
    }
    record(&mut steps, &mut plant, layout, sched.len());
    let success = task_success(&plant, ever_held);
    let demo = Demonstration::new(
        DemoMeta {
            task: spec.task.name().to_string(),
            seed,
            fps: EXPERT_FPS,
            n: layout.len(),
            m: scene.object.keypoints.len(),
        },
        steps,
    )?;
    Ok(ExpertRun { demo, scene, success })
}

fn record(steps: &mut Vec<DemoStep>, plant: &mut Plant, layout: &KeypointLayout, i: usize) {
    let obs = plant.observe(layout);
    steps.push(DemoStep {
        t: i as f64 / EXPERT_FPS,
        robot: obs.robot_keypoints,
        object: obs.object_keypoints,
        gripper: obs.gripper,
        force: obs.force,
    });
}

/// Open-loop replay of a demo through a fresh noiseless plant at the recording rate.
pub fn replay_demo(
    demo: &Demonstration,
    spec: &TaskSpec,
    layout: &KeypointLayout,
    ctrl: &ControllerConfig,
) -> Result<bool> {
    let scene = Scene::sample(spec, demo.meta.seed)?;
    let cfg = PlantConfig {
        sensor_noise_sigma: 0.0,
        ..spec.plant_config()
    };
    let mut plant = Plant::new(scene, cfg, reset_pose(), demo.meta.seed);
    let r0 = *reset_pose().rotation();
    let mut ever_held = false;
    for pair in demo.steps.windows(2) {
        let next = &pair[1];
        let pose = crate::retarget::keypoints_to_pose(&next.robot, layout, &r0)?;
        if next.gripper {
            force_feedback_gripper_control(&mut plant, next.force, ctrl)?;
        } else {
            let eef = plant.state().eef_pose;
            while plant.state().closure > 0.0 {
                plant.step(0.0, &eef);
            }
        }
        let closure = plant.state().closure;
        ever_held |= plant.step(closure, &pose).status == ContactStatus::Held;
    }
    Ok(task_success(&plant, ever_held))
}
