//! Simulated gripper–object contact world.
//!
//! Force is a hinge on gripper closure: zero until the fingers reach the object at
//! closure `g0`, then `stiffness · (g − g0)`. Objects crush above `crush_force` and slip
//! out of a moving grasp below `slip_force`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{RigidTransform, Vec3};
use crate::retarget::{pose_to_keypoints, KeypointLayout};
use crate::seed::rng_for;

/// Closure above which the gripper reads as closed.
pub const GRIPPER_CLOSED_MIN: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    FragilePickPlace,
    Unstack,
    TwistLift,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::FragilePickPlace => "fragile_pick_place",
            TaskKind::Unstack => "unstack",
            TaskKind::TwistLift => "twist_lift",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "fragile_pick_place" => Ok(TaskKind::FragilePickPlace),
            "unstack" => Ok(TaskKind::Unstack),
            "twist_lift" => Ok(TaskKind::TwistLift),
            other => Err(Error::Config(format!("unknown task '{other}'"))),
        }
    }
}

/// Task and object parameters, as read from a task spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task: TaskKind,
    pub stiffness: f64,
    pub crush_force: f64,
    pub slip_force: f64,
    pub contact_closure_min: f64,
    pub contact_closure_max: f64,
    pub deformable: bool,
    /// Body-frame object keypoints, meters.
    pub keypoints: Vec<Vec3>,
    /// Object center height above its support when resting.
    pub rest_height: f64,
    pub object_x: (f64, f64),
    pub object_y: (f64, f64),
    pub goal: (f64, f64),
    pub goal_tolerance: f64,
    /// Expert force target as a fraction of the way from slip to crush.
    pub target_fraction: f64,
    pub sensor_noise: f64,
    pub tracker_noise: f64,
    pub max_closure_rate: f64,
    pub capture_radius: f64,
    /// Top of the base block under the object for `unstack`.
    pub stack_height: f64,
    pub seed: u64,
}

impl TaskSpec {
    pub fn default_for(task: TaskKind) -> Self {
        Self {
            task,
            stiffness: 1000.0,
            crush_force: 150.0,
            slip_force: 50.0,
            contact_closure_min: 0.15,
            contact_closure_max: 0.35,
            deformable: task == TaskKind::FragilePickPlace,
            keypoints: vec![
                Vec3::new(0.02, 0.0, 0.0),
                Vec3::new(-0.02, 0.0, 0.0),
                Vec3::new(0.0, 0.02, 0.0),
                Vec3::new(0.0, 0.0, 0.025),
            ],
            rest_height: 0.025,
            object_x: (0.45, 0.60),
            object_y: (-0.10, 0.10),
            goal: (0.45, 0.22),
            goal_tolerance: 0.03,
            target_fraction: 0.4,
            sensor_noise: 1.0,
            tracker_noise: 0.0,
            max_closure_rate: 0.2,
            capture_radius: 0.025,
            stack_height: 0.05,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.slip_force > 0.0 && self.slip_force < self.crush_force) {
            return Err(Error::contract(format!(
                "infeasible task: need 0 < slip_force ({}) < crush_force ({})",
                self.slip_force, self.crush_force
            )));
        }
        if !(self.stiffness > 0.0) {
            return Err(Error::contract("stiffness must be positive"));
        }
        let (lo, hi) = (self.contact_closure_min, self.contact_closure_max);
        if !(0.0 < lo && lo <= hi && hi < 1.0) {
            return Err(Error::contract("contact closure range must lie inside (0, 1)"));
        }
        if self.keypoints.is_empty() {
            return Err(Error::contract("object needs at least one keypoint"));
        }
        if !(self.object_x.0 <= self.object_x.1 && self.object_y.0 <= self.object_y.1) {
            return Err(Error::contract("object placement ranges are inverted"));
        }
        if !(0.0..=1.0).contains(&self.target_fraction) {
            return Err(Error::contract("target_fraction must be in [0, 1]"));
        }
        if !(self.sensor_noise >= 0.0 && self.tracker_noise >= 0.0) {
            return Err(Error::contract("noise levels must be non-negative"));
        }
        if !(self.max_closure_rate > 0.0 && self.capture_radius > 0.0 && self.goal_tolerance > 0.0) {
            return Err(Error::contract("rates and radii must be positive"));
        }
        Ok(())
    }

    /// Force the expert asks for, in sensor-norm units.
    pub fn target_force(&self) -> f64 {
        self.slip_force + self.target_fraction * (self.crush_force - self.slip_force)
    }

    pub fn plant_config(&self) -> PlantConfig {
        PlantConfig {
            max_closure_rate: self.max_closure_rate,
            sensor_noise_sigma: self.sensor_noise,
            tracker_noise_sigma: self.tracker_noise,
            capture_radius: self.capture_radius,
            release_tolerance: 0.015,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectModel {
    /// Normalized closure at first contact.
    pub contact_closure: f64,
    /// Sensor-norm units per unit closure.
    pub stiffness: f64,
    pub crush_force: f64,
    pub slip_force: f64,
    pub deformable: bool,
    pub keypoints: Vec<Vec3>,
    pub initial_pose: RigidTransform,
    pub rest_height: f64,
}

impl ObjectModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.contact_closure > 0.0 && self.contact_closure < 1.0) {
            return Err(Error::contract("contact closure must lie in (0, 1)"));
        }
        if !(self.stiffness > 0.0) {
            return Err(Error::contract("stiffness must be positive"));
        }
        if !(self.slip_force > 0.0 && self.slip_force < self.crush_force) {
            return Err(Error::contract("need 0 < slip_force < crush_force"));
        }
        Ok(())
    }

    /// Noiseless contact force at closure `g` when the object is between the fingers.
    pub fn contact_force(&self, g: f64) -> f64 {
        (self.stiffness * (g - self.contact_closure)).max(0.0)
    }
}

/// A sampled episode: the object, where it starts, and where it should go.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub task: TaskKind,
    pub object: ObjectModel,
    pub goal: Vec3,
    pub goal_tolerance: f64,
    /// Base block (xy center, top height) under the object for `unstack`.
    pub base_block: Option<(f64, f64, f64)>,
    pub seed: u64,
}

/// Top-down gripper above the workspace.
pub fn reset_pose() -> RigidTransform {
    RigidTransform::from_axis_angle(Vec3::x(), std::f64::consts::PI, Vec3::new(0.45, 0.0, 0.25))
}

impl Scene {
    pub fn sample(spec: &TaskSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng_for(seed, "scene", 0);
        let x = rng.random_range(spec.object_x.0..=spec.object_x.1);
        let y = rng.random_range(spec.object_y.0..=spec.object_y.1);
        let g0 = rng.random_range(spec.contact_closure_min..=spec.contact_closure_max);
        let support = match spec.task {
            TaskKind::Unstack => spec.stack_height,
            _ => 0.0,
        };
        let object = ObjectModel {
            contact_closure: g0,
            stiffness: spec.stiffness,
            crush_force: spec.crush_force,
            slip_force: spec.slip_force,
            deformable: spec.deformable,
            keypoints: spec.keypoints.clone(),
            initial_pose: RigidTransform::from_translation(Vec3::new(x, y, support + spec.rest_height)),
            rest_height: spec.rest_height,
        };
        object.validate()?;
        Ok(Self {
            task: spec.task,
            object,
            goal: Vec3::new(spec.goal.0, spec.goal.1, spec.rest_height),
            goal_tolerance: spec.goal_tolerance,
            base_block: (spec.task == TaskKind::Unstack).then_some((x, y, spec.stack_height)),
            seed,
        })
    }

    /// Height of the surface under `(x, y)`.
    pub fn support_height(&self, x: f64, y: f64) -> f64 {
        match self.base_block {
            Some((bx, by, top)) if ((x - bx).powi(2) + (y - by).powi(2)).sqrt() < 0.03 => top,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantConfig {
    /// Largest closure change per plant step.
    pub max_closure_rate: f64,
    pub sensor_noise_sigma: f64,
    pub tracker_noise_sigma: f64,
    /// Grasp-center to object-center distance within which the object sits between the fingers.
    pub capture_radius: f64,
    /// Releasing an object higher than this above its support drops it.
    pub release_tolerance: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        TaskSpec::default_for(TaskKind::FragilePickPlace).plant_config()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactStatus {
    Free,
    Touched,
    Held,
    Crushed,
    Dropped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub closure: f64,
    pub eef_pose: RigidTransform,
    pub object_pose: RigidTransform,
    /// Last noisy reading, sensor-norm units.
    pub measured_force: f64,
    /// Noiseless contact force.
    pub contact_force: f64,
    pub status: ContactStatus,
    pub sensor_noise_sigma: f64,
    /// Object is between the fingers.
    pub enclosed: bool,
    /// The last command was out of range and got clamped.
    pub command_clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimObservation {
    pub robot_keypoints: Vec<Vec3>,
    pub object_keypoints: Vec<Vec3>,
    pub gripper: bool,
    pub force: f64,
}

/// Running outcome flags over an episode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PlantHistory {
    pub ever_crushed: bool,
    pub ever_dropped: bool,
    pub peak_force: f64,
    pub steps: usize,
}

/// One episode's contact world. Owns its noise stream.
#[derive(Debug, Clone)]
pub struct Plant {
    scene: Scene,
    config: PlantConfig,
    state: PlantState,
    grasp_offset: RigidTransform,
    history: PlantHistory,
    rng: ChaCha8Rng,
}

impl Plant {
    pub fn new(scene: Scene, config: PlantConfig, eef_pose: RigidTransform, noise_seed: u64) -> Self {
        let state = PlantState {
            closure: 0.0,
            eef_pose,
            object_pose: scene.object.initial_pose,
            measured_force: 0.0,
            contact_force: 0.0,
            status: ContactStatus::Free,
            sensor_noise_sigma: config.sensor_noise_sigma,
            enclosed: false,
            command_clamped: false,
        };
        Self {
            scene,
            config,
            state,
            grasp_offset: RigidTransform::identity(),
            history: PlantHistory::default(),
            rng: rng_for(noise_seed, "plant-noise", 0),
        }
    }

    pub fn state(&self) -> &PlantState {
        &self.state
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn config(&self) -> &PlantConfig {
        &self.config
    }

    pub fn history(&self) -> &PlantHistory {
        &self.history
    }

    /// Replace the contact closure mid-episode (a disturbance such as the object shifting in the grasp).
    pub fn set_contact_closure(&mut self, g0: f64) {
        self.scene.object.contact_closure = g0.clamp(1e-6, 1.0 - 1e-6);
        self.update_contact(false);
        self.state.measured_force = self.read_force();
    }

    /// Advance one control tick: move the closure toward `closure_command` (rate limited),
    /// settle contact, then move the end effector to `eef_target`.
    pub fn step(&mut self, closure_command: f64, eef_target: &RigidTransform) -> &PlantState {
        let cmd = if closure_command.is_nan() {
            self.state.closure
        } else {
            closure_command
        };
        let clamped_cmd = cmd.clamp(0.0, 1.0);
        self.state.command_clamped = clamped_cmd != closure_command;

        let old = self.state.closure;
        let rate = self.config.max_closure_rate;
        let new = old + (clamped_cmd - old).clamp(-rate, rate);
        if self.state.status != ContactStatus::Held
            && self.state.status != ContactStatus::Crushed
            && self.near_object(&self.state.eef_pose)
            && old.min(new) <= self.scene.object.contact_closure
        {
            self.state.enclosed = true;
        }
        self.state.closure = new;
        self.update_contact(false);

        let moving = (eef_target.translation() - self.state.eef_pose.translation()).norm() > 1e-9
            || (eef_target.rotation() - self.state.eef_pose.rotation()).amax() > 1e-9;
        self.state.eef_pose = *eef_target;
        match self.state.status {
            ContactStatus::Held => {
                self.state.object_pose = self.state.eef_pose.compose(&self.grasp_offset);
            }
            ContactStatus::Crushed => {}
            _ => {
                if self.state.enclosed && !self.near_object(eef_target) {
                    self.state.enclosed = false;
                }
            }
        }
        self.update_contact(moving);
        self.state.measured_force = self.read_force();
        self.history.steps += 1;
        &self.state
    }

    /// Noisy force reading: contact force plus fresh Gaussian noise, clamped at zero.
    pub fn read_force(&mut self) -> f64 {
        if self.state.contact_force <= 0.0 {
            return 0.0;
        }
        let sigma = self.state.sensor_noise_sigma;
        let noise = if sigma > 0.0 {
            Normal::new(0.0, sigma).expect("finite sigma").sample(&mut self.rng)
        } else {
            0.0
        };
        (self.state.contact_force + noise).max(0.0)
    }

    pub fn observe(&mut self, layout: &KeypointLayout) -> SimObservation {
        let squash = if self.state.status == ContactStatus::Crushed && self.scene.object.deformable {
            0.5
        } else {
            1.0
        };
        let sigma = self.config.tracker_noise_sigma;
        let noise = (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("finite sigma"));
        let object_pose = self.state.object_pose;
        let object_keypoints = self
            .scene
            .object
            .keypoints
            .iter()
            .map(|p| {
                let q = object_pose.apply(&Vec3::new(p.x, p.y, p.z * squash));
                match &noise {
                    Some(n) => q + Vec3::from_fn(|_, _| n.sample(&mut self.rng)),
                    None => q,
                }
            })
            .collect();
        SimObservation {
            robot_keypoints: pose_to_keypoints(&self.state.eef_pose, layout),
            object_keypoints,
            gripper: self.state.closure > GRIPPER_CLOSED_MIN,
            force: self.state.measured_force,
        }
    }

    fn near_object(&self, eef: &RigidTransform) -> bool {
        (eef.translation() - self.state.object_pose.translation()).norm() <= self.config.capture_radius
    }

    fn airborne(&self) -> bool {
        let p = self.state.object_pose.translation();
        p.z > self.scene.support_height(p.x, p.y) + self.scene.object.rest_height + self.config.release_tolerance
    }

    fn settle_object(&mut self) {
        let p = *self.state.object_pose.translation();
        let z = self.scene.support_height(p.x, p.y) + self.scene.object.rest_height;
        self.state.object_pose = self.state.object_pose.with_translation(Vec3::new(p.x, p.y, z));
    }

    fn update_contact(&mut self, moving: bool) {
        use ContactStatus::*;
        if self.state.status == Crushed {
            self.state.contact_force = 0.0;
            return;
        }
        let object = &self.scene.object;
        let in_contact = self.state.enclosed && self.state.closure > object.contact_closure;
        let force = if in_contact {
            object.contact_force(self.state.closure)
        } else {
            0.0
        };
        let (slip, crush) = (object.slip_force, object.crush_force);
        self.history.peak_force = self.history.peak_force.max(force);

        if force >= crush {
            self.state.status = Crushed;
            self.state.contact_force = 0.0;
            self.history.ever_crushed = true;
            return;
        }
        self.state.contact_force = force;
        let was = self.state.status;
        self.state.status = if in_contact {
            if force >= slip {
                if was != Held {
                    self.grasp_offset = self.state.eef_pose.inverse().compose(&self.state.object_pose);
                }
                Held
            } else if was == Held && (moving || self.airborne()) {
                self.drop_object();
                Dropped
            } else {
                Touched
            }
        } else if was == Held {
            if self.airborne() {
                self.drop_object();
                Dropped
            } else {
                self.settle_object();
                Free
            }
        } else if was == Dropped {
            Dropped
        } else {
            Free
        };
        if self.state.status == Dropped {
            self.state.contact_force = 0.0;
        }
    }

    fn drop_object(&mut self) {
        self.history.ever_dropped = true;
        self.state.enclosed = false;
        self.settle_object();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene_at_origin(g0: f64) -> Scene {
        let mut spec = TaskSpec::default_for(TaskKind::FragilePickPlace);
        spec.contact_closure_min = g0;
        spec.contact_closure_max = g0;
        let mut scene = Scene::sample(&spec, 1).unwrap();
        scene.object.initial_pose = RigidTransform::from_translation(Vec3::new(0.5, 0.0, 0.025));
        scene
    }

    fn grasp_pose() -> RigidTransform {
        reset_pose().with_translation(Vec3::new(0.5, 0.0, 0.025))
    }

    fn noiseless() -> PlantConfig {
        PlantConfig {
            sensor_noise_sigma: 0.0,
            ..PlantConfig::default()
        }
    }

    #[test]
    fn below_contact_closure_is_free() {
        let mut plant = Plant::new(scene_at_origin(0.2), noiseless(), grasp_pose(), 0);
        let s = plant.step(0.15, &grasp_pose());
        assert_eq!(s.measured_force, 0.0);
        assert_eq!(s.status, ContactStatus::Free);
    }

    #[test]
    fn hinge_force_matches_hand_evaluation() {
        let mut plant = Plant::new(scene_at_origin(0.2), noiseless(), grasp_pose(), 0);
        plant.step(0.2, &grasp_pose());
        let s = plant.step(0.3, &grasp_pose());
        assert!((s.measured_force - 100.0).abs() < 1e-9);
        assert_eq!(s.status, ContactStatus::Held);
        assert!((plant.read_force() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn force_is_piecewise_linear_in_closure() {
        for i in 0..=100 {
            let g = i as f64 / 100.0 * 0.34;
            let mut plant = Plant::new(
                scene_at_origin(0.2),
                PlantConfig {
                    max_closure_rate: 1.0,
                    ..noiseless()
                },
                grasp_pose(),
                0,
            );
            plant.step(0.0, &grasp_pose());
            let f = plant.step(g, &grasp_pose()).measured_force;
            let expected = if g <= 0.2 { 0.0 } else { 1000.0 * (g - 0.2) };
            assert!((f - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn crush_is_absorbing() {
        let mut plant = Plant::new(scene_at_origin(0.2), noiseless(), grasp_pose(), 0);
        let mut crushed_at = None;
        for k in 0..20 {
            let s = plant.step(0.2 + 0.02 * k as f64, &grasp_pose());
            if s.status == ContactStatus::Crushed {
                crushed_at.get_or_insert(k);
            }
        }
        // 1000 * (0.2 + 0.02k - 0.2) >= 150 first at k = 8
        assert_eq!(crushed_at, Some(8));
        for cmd in [0.0, 0.25, 1.0, 0.0] {
            let lifted = grasp_pose().with_translation(Vec3::new(0.5, 0.0, 0.2));
            assert_eq!(plant.step(cmd, &lifted).status, ContactStatus::Crushed);
            assert_eq!(plant.step(cmd, &grasp_pose()).status, ContactStatus::Crushed);
        }
        assert!(plant.history().ever_crushed);
        assert!(plant.history().peak_force >= 150.0);
    }

    #[test]
    fn noisy_reads_average_to_true_force() {
        let cfg = PlantConfig {
            sensor_noise_sigma: 1.0,
            ..PlantConfig::default()
        };
        let mut plant = Plant::new(scene_at_origin(0.2), cfg, grasp_pose(), 9);
        plant.step(0.2, &grasp_pose());
        plant.step(0.3, &grasp_pose());
        let mean = (0..10_000).map(|_| plant.read_force()).sum::<f64>() / 10_000.0;
        assert!((mean - 100.0).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn free_plant_reads_zero() {
        let mut plant = Plant::new(scene_at_origin(0.2), PlantConfig::default(), reset_pose(), 0);
        plant.step(1.0, &reset_pose());
        assert_eq!(plant.read_force(), 0.0);
    }

    #[test]
    fn closing_before_arrival_cannot_grasp() {
        let mut plant = Plant::new(scene_at_origin(0.2), noiseless(), reset_pose(), 0);
        for _ in 0..5 {
            plant.step(1.0, &reset_pose());
        }
        let s = plant.step(1.0, &grasp_pose());
        assert_eq!(s.status, ContactStatus::Free);
        assert_eq!(s.measured_force, 0.0);
    }

    #[test]
    fn held_object_follows_rigidly_and_slips_when_weak() {
        let mut plant = Plant::new(scene_at_origin(0.2), noiseless(), grasp_pose(), 0);
        plant.step(0.2, &grasp_pose());
        plant.step(0.3, &grasp_pose());
        let offset0 = plant.state().eef_pose.inverse().compose(&plant.state().object_pose);
        for k in 1..10 {
            let target = RigidTransform::from_axis_angle(
                Vec3::z(),
                0.05 * k as f64,
                Vec3::new(0.5, 0.01 * k as f64, 0.025 + 0.01 * k as f64),
            )
            .compose(&RigidTransform::from_axis_angle(
                Vec3::x(),
                std::f64::consts::PI,
                Vec3::zeros(),
            ));
            let s = plant.step(0.3, &target).clone();
            assert_eq!(s.status, ContactStatus::Held);
            let offset = s.eef_pose.inverse().compose(&s.object_pose);
            assert!((offset.translation() - offset0.translation()).norm() < 1e-12);
            assert!((offset.rotation() - offset0.rotation()).amax() < 1e-12);
        }
        // weaken the grip below slip while moving
        let here = plant.state().eef_pose;
        let s = plant
            .step(
                0.24,
                &here.with_translation(here.translation() + Vec3::new(0.0, 0.0, 0.01)),
            )
            .clone();
        assert_eq!(s.status, ContactStatus::Dropped);
        assert!(plant.history().ever_dropped);
        assert!((s.object_pose.translation().z - 0.025).abs() < 1e-12);
    }

    #[test]
    fn low_release_places_object() {
        let mut plant = Plant::new(scene_at_origin(0.2), noiseless(), grasp_pose(), 0);
        plant.step(0.2, &grasp_pose());
        plant.step(0.3, &grasp_pose());
        let lifted = grasp_pose().with_translation(Vec3::new(0.45, 0.1, 0.125));
        plant.step(0.3, &lifted);
        let placed = grasp_pose().with_translation(Vec3::new(0.45, 0.2, 0.03));
        plant.step(0.3, &placed);
        for _ in 0..3 {
            plant.step(0.0, &placed);
        }
        assert_eq!(plant.state().status, ContactStatus::Free);
        assert!(!plant.history().ever_dropped);
        let p = plant.state().object_pose.translation();
        assert!((p - Vec3::new(0.45, 0.2, 0.025)).norm() < 1e-12);
    }

    #[test]
    fn observe_identity_and_translation() {
        let layout = KeypointLayout::default_gripper();
        let mut scene = scene_at_origin(0.2);
        scene.object.initial_pose = RigidTransform::identity();
        let mut plant = Plant::new(scene.clone(), noiseless(), RigidTransform::identity(), 0);
        let obs = plant.observe(&layout);
        assert_eq!(
            obs.robot_keypoints,
            pose_to_keypoints(&RigidTransform::identity(), &layout)
        );
        assert_eq!(obs.object_keypoints, scene.object.keypoints);

        scene.object.initial_pose = RigidTransform::from_translation(Vec3::new(0.1, 0.0, 0.0));
        let mut plant = Plant::new(scene.clone(), noiseless(), RigidTransform::identity(), 0);
        let obs = plant.observe(&layout);
        for (a, b) in obs.object_keypoints.iter().zip(&scene.object.keypoints) {
            assert!((a - b - Vec3::new(0.1, 0.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn tracker_noise_has_configured_sigma() {
        let layout = KeypointLayout::default_gripper();
        let cfg = PlantConfig {
            tracker_noise_sigma: 0.002,
            ..noiseless()
        };
        let scene = scene_at_origin(0.2);
        let mut plant = Plant::new(scene.clone(), cfg, reset_pose(), 3);
        let truth: Vec<Vec3> = scene
            .object
            .keypoints
            .iter()
            .map(|p| scene.object.initial_pose.apply(p))
            .collect();
        let (mut sum, mut sq, mut n) = (0.0, 0.0, 0.0);
        for _ in 0..5000 {
            for (o, t) in plant.observe(&layout).object_keypoints.iter().zip(&truth) {
                for e in (o - t).iter() {
                    sum += e;
                    sq += e * e;
                    n += 1.0;
                }
            }
        }
        let mean = sum / n;
        let sd = (sq / n - mean * mean).sqrt();
        assert!(mean.abs() < 1e-4);
        assert!((sd - 0.002).abs() < 5e-5, "sd {sd}");
    }

    #[test]
    fn clamped_commands_are_flagged() {
        let mut plant = Plant::new(scene_at_origin(0.2), noiseless(), reset_pose(), 0);
        assert!(plant.step(1.5, &reset_pose()).command_clamped);
        assert!(!plant.step(0.5, &reset_pose()).command_clamped);
        assert!(plant.step(-0.5, &reset_pose()).command_clamped);
        assert!(plant.state().closure >= 0.0 && plant.state().closure <= 1.0);
    }

    #[test]
    fn infeasible_spec_rejected() {
        let mut spec = TaskSpec::default_for(TaskKind::FragilePickPlace);
        spec.slip_force = 200.0;
        assert!(matches!(Scene::sample(&spec, 0), Err(Error::Contract(_))));
    }
}
