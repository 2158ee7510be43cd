use serde::{Deserialize, Serialize};

use super::controller::{force_feedback_gripper_control, ControllerConfig, ControllerTrace};
use crate::demo::Demonstration;
use crate::error::{Error, Result};
use crate::geometry::{RigidTransform, Vec3};
use crate::plant::{reset_pose, ContactStatus, Plant, Scene, TaskKind, TaskSpec};
use crate::policy::{parse_action, Action, ActionChunk, Frame, Policy, TemporalEnsemble};
use crate::retarget::KeypointLayout;

/// Lift needed for a twist-lift success.
pub const TWIST_LIFT_HEIGHT: f64 = 0.05;
/// Yaw needed for a twist-lift success, radians.
pub const TWIST_LIFT_YAW: f64 = std::f64::consts::PI / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GripperMode {
    /// Close through the force controller toward the predicted force.
    ForceFeedback,
    /// Ignore the force prediction and close fully.
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RolloutConfig {
    pub close_threshold: f64,
    pub open_threshold: f64,
    /// Policy steps per second.
    pub control_rate: f64,
    pub max_steps: usize,
    pub seed: u64,
    pub gripper_mode: GripperMode,
    /// Temporal ensembling decay per policy step of prediction age.
    pub temporal_decay: f64,
    /// Plant steps allowed to open the gripper fully or close it in binary mode.
    pub max_gripper_steps: usize,
    pub stop_on_success: bool,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            close_threshold: 0.6,
            open_threshold: 0.4,
            control_rate: 6.0,
            max_steps: 60,
            seed: 0,
            gripper_mode: GripperMode::ForceFeedback,
            temporal_decay: 0.5,
            max_gripper_steps: 20,
            stop_on_success: true,
        }
    }
}

impl RolloutConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.open_threshold < self.close_threshold) {
            return Err(Error::Config(format!(
                "open threshold {} must be below close threshold {}",
                self.open_threshold, self.close_threshold
            )));
        }
        if !(self.control_rate > 0.0) || self.max_steps == 0 || self.max_gripper_steps == 0 {
            return Err(Error::Config(
                "control rate, max steps and gripper steps must be positive".into(),
            ));
        }
        if !(self.temporal_decay >= 0.0) {
            return Err(Error::Config("temporal decay must be >= 0".into()));
        }
        Ok(())
    }
}

/// Anything that proposes an action chunk from the frames observed so far.
pub trait ChunkSource {
    fn chunk(&mut self, frames: &[Frame], step: usize) -> Result<ActionChunk>;
}

impl ChunkSource for &Policy {
    fn chunk(&mut self, frames: &[Frame], step: usize) -> Result<ActionChunk> {
        self.predict(frames, step)
    }
}

/// Replays a demonstration's future states as chunks, bypassing any learned model.
#[derive(Debug, Clone)]
pub struct ExpertReplay {
    frames: Vec<Frame>,
    horizon: usize,
}

impl ExpertReplay {
    /// Takes every `stride`-th demo step as one control step.
    pub fn new(demo: &Demonstration, stride: usize, horizon: usize) -> Result<Self> {
        if demo.is_empty() || stride == 0 || horizon == 0 {
            return Err(Error::contract("replay needs steps, a positive stride and horizon"));
        }
        Ok(Self {
            frames: demo.steps.iter().step_by(stride).map(Frame::from).collect(),
            horizon,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

impl ChunkSource for ExpertReplay {
    fn chunk(&mut self, _frames: &[Frame], step: usize) -> Result<ActionChunk> {
        let last = self.frames.len() - 1;
        let steps = (0..self.horizon)
            .map(|j| {
                let f = &self.frames[(step + 1 + j).min(last)];
                Action {
                    points: f.robot.clone(),
                    gripper: f.gripper,
                    force: f.force,
                }
            })
            .collect();
        Ok(ActionChunk { steps })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GripperAction {
    Close,
    Open,
    Hold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStep {
    pub step: usize,
    pub time: f64,
    pub gripper_logit: f64,
    pub force_target: f64,
    pub force_clamped: bool,
    pub gripper_action: GripperAction,
    pub eef: RigidTransform,
    pub closure: f64,
    pub measured_force: f64,
    pub status: ContactStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub controller: Option<ControllerTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub task: TaskKind,
    pub seed: u64,
    pub rollout: RolloutConfig,
    pub controller: ControllerConfig,
    pub success: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub steps_run: usize,
    pub peak_force: f64,
    pub crushed: bool,
    pub dropped: bool,
    pub controller_non_converged: usize,
    pub final_object: Vec3,
    pub steps: Vec<EpisodeStep>,
}

/// Task predicate on the current plant: crush or drop ever fails the episode.
pub fn task_success(plant: &Plant, ever_held: bool) -> bool {
    let h = plant.history();
    if h.ever_crushed || h.ever_dropped || !ever_held {
        return false;
    }
    let scene = plant.scene();
    let state = plant.state();
    let obj = state.object_pose.translation();
    match scene.task {
        TaskKind::FragilePickPlace | TaskKind::Unstack => {
            state.status == ContactStatus::Free && (obj.xy() - scene.goal.xy()).norm() <= scene.goal_tolerance
        }
        TaskKind::TwistLift => {
            let start = scene.object.initial_pose;
            let lifted = obj.z - start.translation().z;
            let rel = start.rotation().transpose() * state.object_pose.rotation();
            let yaw = rel[(1, 0)].atan2(rel[(0, 0)]).abs();
            state.status == ContactStatus::Held && lifted >= TWIST_LIFT_HEIGHT && yaw >= TWIST_LIFT_YAW
        }
    }
}

/// Steps the plant with the end effector still until the closure reaches `target`.
fn drive_closure(plant: &mut Plant, target: f64, max_steps: usize) {
    let eef = plant.state().eef_pose;
    for _ in 0..max_steps {
        if (plant.state().closure - target).abs() < 1e-12 || plant.state().status == ContactStatus::Crushed {
            break;
        }
        plant.step(target, &eef);
    }
}

pub struct RolloutSetup<'a> {
    pub layout: &'a KeypointLayout,
    pub rollout: &'a RolloutConfig,
    pub controller: &'a ControllerConfig,
}

/// Closed-loop episode: observe, predict a chunk, ensemble, parse, actuate gripper, move.
pub fn rollout(source: &mut dyn ChunkSource, mut plant: Plant, setup: &RolloutSetup<'_>) -> Result<EpisodeRecord> {
    let (cfg, ctrl, layout) = (setup.rollout, setup.controller, setup.layout);
    cfg.validate()?;
    ctrl.validate()?;
    let initial_orientation = *reset_pose().rotation();
    let mut ensemble = TemporalEnsemble::new(cfg.temporal_decay);
    let mut frames = Vec::new();
    let mut steps = Vec::new();
    let mut failure = None;
    let mut ever_held = false;
    let mut success = false;
    let mut non_converged = 0;

    for t in 0..cfg.max_steps {
        frames.push(Frame::from(&plant.observe(layout)));
        let parsed = source
            .chunk(&frames, t)
            .and_then(|chunk| {
                ensemble.push(t, chunk);
                ensemble.action_at(t)
            })
            .and_then(|action| parse_action(&action, layout, &initial_orientation));
        let parsed = match parsed {
            Ok(p) => p,
            Err(e @ (Error::Degenerate { .. } | Error::Domain(_))) => {
                failure = Some(format!("step {t}: {e}"));
                break;
            }
            Err(e) => return Err(e),
        };

        let mut trace = None;
        let gripper_action = if parsed.gripper > cfg.close_threshold {
            match cfg.gripper_mode {
                GripperMode::ForceFeedback => {
                    let (_, tr) = force_feedback_gripper_control(&mut plant, parsed.force, ctrl)?;
                    if !tr.converged() {
                        non_converged += 1;
                    }
                    trace = Some(tr);
                }
                GripperMode::Binary => drive_closure(&mut plant, 1.0, cfg.max_gripper_steps),
            }
            GripperAction::Close
        } else if parsed.gripper < cfg.open_threshold {
            drive_closure(&mut plant, 0.0, cfg.max_gripper_steps);
            GripperAction::Open
        } else {
            GripperAction::Hold
        };
        let closure = plant.state().closure;
        let state = plant.step(closure, &parsed.eef).clone();
        ever_held |= state.status == ContactStatus::Held;
        steps.push(EpisodeStep {
            step: t,
            time: t as f64 / cfg.control_rate,
            gripper_logit: parsed.gripper,
            force_target: parsed.force,
            force_clamped: parsed.force_clamped,
            gripper_action,
            eef: state.eef_pose,
            closure: state.closure,
            measured_force: state.measured_force,
            status: state.status,
            controller: trace,
        });
        if plant.history().ever_crushed {
            failure = Some(format!("object crushed at step {t}"));
            break;
        }
        success = task_success(&plant, ever_held);
        if success && cfg.stop_on_success {
            break;
        }
    }
    let h = *plant.history();
    if !success && failure.is_none() {
        failure = Some(if h.ever_dropped {
            "object dropped".into()
        } else if !ever_held {
            "object never grasped".into()
        } else {
            "goal not reached".into()
        });
    }
    Ok(EpisodeRecord {
        task: plant.scene().task,
        seed: plant.scene().seed,
        rollout: cfg.clone(),
        controller: ctrl.clone(),
        success,
        failure: if success { None } else { failure },
        steps_run: steps.len(),
        peak_force: h.peak_force,
        crushed: h.ever_crushed,
        dropped: h.ever_dropped,
        controller_non_converged: non_converged,
        final_object: *plant.state().object_pose.translation(),
        steps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub seed: u64,
    pub success: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub peak_force: f64,
    pub crushed: bool,
    pub dropped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: TaskKind,
    pub gripper_mode: GripperMode,
    pub episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_peak_force: f64,
    pub crush_count: usize,
    pub drop_count: usize,
    pub episodes_detail: Vec<EpisodeSummary>,
}

impl EvalReport {
    pub fn from_records(task: TaskKind, mode: GripperMode, records: &[EpisodeRecord]) -> Self {
        let n = records.len();
        let successes = records.iter().filter(|r| r.success).count();
        Self {
            task,
            gripper_mode: mode,
            episodes: n,
            successes,
            success_rate: if n == 0 { 0.0 } else { successes as f64 / n as f64 },
            mean_peak_force: if n == 0 {
                0.0
            } else {
                records.iter().map(|r| r.peak_force).sum::<f64>() / n as f64
            },
            crush_count: records.iter().filter(|r| r.crushed).count(),
            drop_count: records.iter().filter(|r| r.dropped).count(),
            episodes_detail: records
                .iter()
                .map(|r| EpisodeSummary {
                    seed: r.seed,
                    success: r.success,
                    failure: r.failure.clone(),
                    peak_force: r.peak_force,
                    crushed: r.crushed,
                    dropped: r.dropped,
                })
                .collect(),
        }
    }
}

/// Fresh plant at the reset pose for one evaluation seed.
pub fn episode_plant(spec: &TaskSpec, seed: u64) -> Result<Plant> {
    let scene = Scene::sample(spec, seed)?;
    Ok(Plant::new(scene, spec.plant_config(), reset_pose(), seed))
}

/// Runs one independent episode per seed; `make_source` builds the chunk source for each.
pub fn evaluate<S, F>(
    mut make_source: F,
    spec: &TaskSpec,
    seeds: &[u64],
    setup: &RolloutSetup<'_>,
) -> Result<(EvalReport, Vec<EpisodeRecord>)>
where
    S: ChunkSource,
    F: FnMut(u64) -> Result<S>,
{
    if seeds.is_empty() {
        return Err(Error::contract("evaluation needs at least one episode"));
    }
    let mut records = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut source = make_source(seed)?;
        let record = rollout(&mut source, episode_plant(spec, seed)?, setup)?;
        log::info!(
            "episode seed {seed}: success={} peak={:.1} crushed={}",
            record.success,
            record.peak_force,
            record.crushed
        );
        records.push(record);
    }
    Ok((
        EvalReport::from_records(spec.task, setup.rollout.gripper_mode, &records),
        records,
    ))
}
