//! Human-hand keypoints to robot pose, robot keypoints, gripper bit and force channel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{kabsch, Mat3, RigidTransform, Vec3};

pub const HAND_KEYPOINTS: usize = 21;
pub const WRIST: usize = 0;
pub const THUMB_TIP: usize = 4;
pub const INDEX_TIP: usize = 8;

/// Fingertip distance (meters) below which the gripper counts as closed.
pub const GRIPPER_CLOSE_DISTANCE: f64 = 0.07;

/// Triangulated 3D hand keypoints for one video frame, in the 21-point hand topology
/// (wrist, then four joints each for thumb, index, middle, ring, pinky).
#[derive(Debug, Clone, PartialEq)]
pub struct HandFrame {
    keypoints: [Vec3; HAND_KEYPOINTS],
    pub timestamp: f64,
}

impl HandFrame {
    pub fn new(keypoints: Vec<Vec3>, timestamp: f64) -> Result<Self> {
        let keypoints: [Vec3; HAND_KEYPOINTS] = keypoints.try_into().map_err(|v: Vec<Vec3>| {
            Error::contract(format!("hand frame needs {HAND_KEYPOINTS} keypoints, got {}", v.len()))
        })?;
        if !keypoints.iter().all(|p| p.iter().all(|v| v.is_finite())) || !timestamp.is_finite() {
            return Err(Error::contract("hand frame has non-finite values"));
        }
        Ok(Self { keypoints, timestamp })
    }

    pub fn keypoints(&self) -> &[Vec3] {
        &self.keypoints
    }

    pub fn index_tip(&self) -> Vec3 {
        self.keypoints[INDEX_TIP]
    }

    pub fn thumb_tip(&self) -> Vec3 {
        self.keypoints[THUMB_TIP]
    }

    pub fn pinch_distance(&self) -> f64 {
        (self.index_tip() - self.thumb_tip()).norm()
    }
}

/// Fixed rigid offsets from the end-effector pose to the tracked robot keypoints.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointLayout {
    pub names: Vec<String>,
    offsets: Vec<RigidTransform>,
    wrist_index: usize,
}

impl KeypointLayout {
    pub fn new(names: Vec<String>, offsets: Vec<RigidTransform>, wrist_index: usize) -> Result<Self> {
        if offsets.len() < 3 {
            return Err(Error::contract("layout needs at least 3 keypoints"));
        }
        if names.len() != offsets.len() {
            return Err(Error::contract("layout names and offsets differ in length"));
        }
        if wrist_index >= offsets.len() {
            return Err(Error::contract("wrist index out of range"));
        }
        let pts: Vec<Vec3> = offsets.iter().map(|t| *t.translation()).collect();
        // rank check: kabsch of the layout onto itself fails on collinear offsets
        kabsch(&pts, &pts)?;
        Ok(Self {
            names,
            offsets,
            wrist_index,
        })
    }

    /// Wrist at the grasp center plus two finger pads and a point on the flange.
    pub fn default_gripper() -> Self {
        let pts = [
            ("wrist", Vec3::new(0.0, 0.0, 0.0)),
            ("finger_left", Vec3::new(0.0, 0.06, -0.06)),
            ("finger_right", Vec3::new(0.0, -0.06, -0.06)),
            ("flange", Vec3::new(0.06, 0.0, -0.15)),
        ];
        Self::new(
            pts.iter().map(|(n, _)| n.to_string()).collect(),
            pts.iter().map(|(_, p)| RigidTransform::from_translation(*p)).collect(),
            0,
        )
        .expect("default layout is valid")
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn offsets(&self) -> &[RigidTransform] {
        &self.offsets
    }

    pub fn wrist_index(&self) -> usize {
        self.wrist_index
    }
}

/// Robot-side state for one timestep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub pose: RigidTransform,
    pub keypoints: Vec<Vec3>,
    pub gripper: bool,
    /// Sensor-norm units.
    pub force: f64,
}

/// End-effector pose for `frame`: fingertip midpoint for position, and the
/// hand's rotation since `frame0` applied on top of the reset orientation.
pub fn hand_to_pose(frame: &HandFrame, frame0: &HandFrame, initial_pose: &RigidTransform) -> Result<RigidTransform> {
    let position = (frame.index_tip() + frame.thumb_tip()) * 0.5;
    if frame.keypoints == frame0.keypoints {
        return Ok(initial_pose.with_translation(position));
    }
    let delta = kabsch(&frame0.keypoints, &frame.keypoints)?;
    let orientation = delta.rotation() * initial_pose.rotation();
    Ok(RigidTransform::from_parts_unchecked(orientation, position))
}

pub fn pose_to_keypoints(pose: &RigidTransform, layout: &KeypointLayout) -> Vec<Vec3> {
    layout
        .offsets
        .iter()
        .map(|offset| *pose.compose(offset).translation())
        .collect()
}

/// Recovers the end-effector pose from (possibly predicted) robot keypoints.
///
/// Orientation comes from aligning the layout as seen at the reset orientation onto
/// `points`, then composing with that reset orientation. Position is the wrist keypoint,
/// corrected by the wrist offset when the layout places the wrist away from the origin.
pub fn keypoints_to_pose(
    points: &[Vec3],
    layout: &KeypointLayout,
    initial_orientation: &Mat3,
) -> Result<RigidTransform> {
    if points.len() != layout.len() {
        return Err(Error::contract(format!(
            "expected {} robot keypoints, got {}",
            layout.len(),
            points.len()
        )));
    }
    let reference: Vec<Vec3> = layout
        .offsets
        .iter()
        .map(|o| initial_orientation * o.translation())
        .collect();
    let delta = kabsch(&reference, points)?;
    let rotation = delta.rotation() * initial_orientation;
    let wrist_offset = layout.offsets[layout.wrist_index].translation();
    let position = points[layout.wrist_index] - rotation * wrist_offset;
    Ok(RigidTransform::from_parts_unchecked(rotation, position))
}

/// Closed iff the fingertips are strictly closer than 7 cm.
pub fn gripper_state(frame: &HandFrame) -> bool {
    frame.pinch_distance() < GRIPPER_CLOSE_DISTANCE
}

pub fn retarget_trajectory(
    frames: &[HandFrame],
    forces: &[f64],
    initial_pose: &RigidTransform,
    layout: &KeypointLayout,
) -> Result<Vec<RobotState>> {
    let frame0 = frames
        .first()
        .ok_or_else(|| Error::contract("retargeting needs at least one frame"))?;
    if frames.len() != forces.len() {
        return Err(Error::contract(format!(
            "{} frames but {} force values",
            frames.len(),
            forces.len()
        )));
    }
    frames
        .iter()
        .zip(forces)
        .map(|(frame, &force)| {
            if !(force >= 0.0) {
                return Err(Error::contract(format!("negative force {force}")));
            }
            let pose = hand_to_pose(frame, frame0, initial_pose)?;
            Ok(RobotState {
                keypoints: pose_to_keypoints(&pose, layout),
                pose,
                gripper: gripper_state(frame),
                force,
            })
        })
        .collect()
}

/// A mirror-symmetric synthetic hand whose fingertip midpoint sits at the pose origin.
///
/// Stands in for a hand-pose detector when building test trajectories. Thumb and index
/// chains open symmetrically about the pose's xz-plane, so the whole point set stays
/// mirror-symmetric and the Kabsch rotation between any two apertures is exact.
pub fn synthetic_hand(pose: &RigidTransform, aperture: f64, timestamp: f64) -> HandFrame {
    let half = aperture / 2.0;
    let mut local = vec![Vec3::new(0.0, 0.0, -0.12)];
    // thumb (+y side) and index (-y side) chains, base to tip
    let chain = |side: f64| -> Vec<Vec3> {
        (1..=4)
            .map(|j| {
                let f = j as f64 / 4.0;
                Vec3::new(0.01 * (1.0 - f), side * (0.03 + (half - 0.03) * f), -0.09 * (1.0 - f))
            })
            .collect()
    };
    local.extend(chain(1.0));
    local.extend(chain(-1.0));
    let curled = |y: f64, x: f64| -> Vec<Vec3> {
        (1..=4)
            .map(|j| Vec3::new(x + 0.01 * j as f64, y, -0.10 + 0.012 * j as f64))
            .collect()
    };
    local.extend(curled(0.0, -0.02));
    local.extend(curled(0.02, -0.03));
    local.extend(curled(-0.02, -0.03));
    let keypoints = local.iter().map(|p| pose.apply(p)).collect();
    HandFrame::new(keypoints, timestamp).expect("synthetic hand is finite")
}
