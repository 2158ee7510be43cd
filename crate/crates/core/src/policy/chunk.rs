use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{encode_rotation6d, Mat3, RigidTransform, Rotation6D, Vec3};
use crate::retarget::{keypoints_to_pose, KeypointLayout};

/// One future step: predicted robot keypoints, gripper logit and force (sensor-norm units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub points: Vec<Vec3>,
    pub gripper: f64,
    pub force: f64,
}

/// H predicted future steps; index 0 is the command issued at the step it was predicted at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionChunk {
    pub steps: Vec<Action>,
}

impl ActionChunk {
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }
}

/// Exponentially weighted mean of overlapping predictions for the same step.
///
/// `predictions` pairs each action with its age (policy steps since it was predicted);
/// weights are `exp(-decay · age)`, relative to the youngest prediction.
pub fn temporal_aggregate(predictions: &[(usize, &Action)], decay: f64) -> Result<Action> {
    let youngest = predictions
        .iter()
        .map(|(age, _)| *age)
        .min()
        .ok_or_else(|| Error::contract("no prediction covers this step"))?;
    if !(decay >= 0.0) {
        return Err(Error::contract("temporal decay must be non-negative"));
    }
    let n_points = predictions[0].1.points.len();
    if predictions.iter().any(|(_, a)| a.points.len() != n_points) {
        return Err(Error::contract("predictions disagree on keypoint count"));
    }
    let weights: Vec<f64> = predictions
        .iter()
        .map(|(age, _)| {
            let rel = (age - youngest) as f64;
            if rel == 0.0 {
                1.0
            } else {
                (-decay * rel).exp()
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();

    // anchor on the first prediction so constant inputs come back bit-exact,
    // and clamp into the hull of the inputs
    let blend = |get: &dyn Fn(&Action) -> f64| -> f64 {
        let anchor = get(predictions[0].1);
        let (mut lo, mut hi) = (anchor, anchor);
        let mut acc = 0.0;
        for ((_, a), w) in predictions.iter().zip(&weights) {
            let v = get(a);
            lo = lo.min(v);
            hi = hi.max(v);
            acc += w * (v - anchor);
        }
        (anchor + acc / total).clamp(lo, hi)
    };
    let points = (0..n_points)
        .map(|k| Vec3::from_fn(|axis, _| blend(&|a: &Action| a.points[k][axis])))
        .collect();
    Ok(Action {
        points,
        gripper: blend(&|a: &Action| a.gripper),
        force: blend(&|a: &Action| a.force),
    })
}

/// Keeps the chunks that still cover upcoming steps.
#[derive(Debug, Clone)]
pub struct TemporalEnsemble {
    decay: f64,
    chunks: VecDeque<(usize, ActionChunk)>,
}

impl TemporalEnsemble {
    pub fn new(decay: f64) -> Self {
        Self {
            decay,
            chunks: VecDeque::new(),
        }
    }

    pub fn push(&mut self, step: usize, chunk: ActionChunk) {
        self.chunks.push_back((step, chunk));
    }

    pub fn action_at(&mut self, step: usize) -> Result<Action> {
        self.chunks.retain(|(made, c)| made + c.horizon() > step);
        let preds: Vec<(usize, &Action)> = self
            .chunks
            .iter()
            .filter(|(made, _)| *made <= step)
            .map(|(made, c)| (step - made, &c.steps[step - made]))
            .collect();
        temporal_aggregate(&preds, self.decay)
    }
}

/// What the controller and arm consume from one aggregated action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedAction {
    /// Force target, sensor-norm units, never negative.
    pub force: f64,
    pub force_clamped: bool,
    pub gripper: f64,
    pub eef: RigidTransform,
    pub eef_rotation6d: Rotation6D,
}

pub fn parse_action(action: &Action, layout: &KeypointLayout, initial_orientation: &Mat3) -> Result<ParsedAction> {
    let eef = keypoints_to_pose(&action.points, layout, initial_orientation)?;
    let force_clamped = !(action.force >= 0.0);
    Ok(ParsedAction {
        force: if force_clamped { 0.0 } else { action.force },
        force_clamped,
        gripper: action.gripper,
        eef_rotation6d: encode_rotation6d(eef.rotation()),
        eef,
    })
}
