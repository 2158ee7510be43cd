use serde::{Deserialize, Serialize};

use super::PolicyConfig;
use crate::demo::DemoStep;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::plant::SimObservation;

/// One observed timestep in the policy's input space.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub robot: Vec<Vec3>,
    pub object: Vec<Vec3>,
    pub gripper: f64,
    pub force: f64,
}

impl From<&DemoStep> for Frame {
    fn from(s: &DemoStep) -> Self {
        Self {
            robot: s.robot.clone(),
            object: s.object.clone(),
            gripper: if s.gripper { 1.0 } else { 0.0 },
            force: s.force,
        }
    }
}

impl From<&SimObservation> for Frame {
    fn from(o: &SimObservation) -> Self {
        Self {
            robot: o.robot_keypoints.clone(),
            object: o.object_keypoints.clone(),
            gripper: if o.gripper { 1.0 } else { 0.0 },
            force: o.force,
        }
    }
}

/// Per-keypoint position histories plus gripper and force histories, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationWindow {
    pub robot: Vec<Vec<Vec3>>,
    pub object: Vec<Vec<Vec3>>,
    pub gripper: Vec<f64>,
    pub force: Vec<f64>,
}

impl ObservationWindow {
    /// The `len` frames ending at `t`; before the episode start the first frame is repeated.
    pub fn from_frames(frames: &[Frame], t: usize, len: usize) -> Result<Self> {
        if frames.is_empty() || len == 0 {
            return Err(Error::contract("observation window needs frames and a positive length"));
        }
        if t >= frames.len() {
            return Err(Error::contract(format!("window end {t} past {} frames", frames.len())));
        }
        let picked: Vec<&Frame> = (0..len)
            .map(|i| {
                let back = len - 1 - i;
                &frames[t.saturating_sub(back)]
            })
            .collect();
        let (n, m) = (picked[0].robot.len(), picked[0].object.len());
        if picked.iter().any(|f| f.robot.len() != n || f.object.len() != m) {
            return Err(Error::contract("frames in a window must share keypoint counts"));
        }
        Ok(Self {
            robot: (0..n).map(|k| picked.iter().map(|f| f.robot[k]).collect()).collect(),
            object: (0..m).map(|k| picked.iter().map(|f| f.object[k]).collect()).collect(),
            gripper: picked.iter().map(|f| f.gripper).collect(),
            force: picked.iter().map(|f| f.force).collect(),
        })
    }

    pub fn history_len(&self) -> usize {
        self.gripper.len()
    }
}

/// Row-major token matrix fed to the per-token encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct Tokens {
    pub count: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

/// One token per robot keypoint, one per object keypoint, then a gripper and a force token.
/// Scalar channels repeat each history value three times to match the point-token width.
pub fn tokenize(window: &ObservationWindow) -> Result<Tokens> {
    let len = window.history_len();
    if len == 0 {
        return Err(Error::contract("cannot tokenize an empty window"));
    }
    if window.force.len() != len || window.robot.iter().chain(&window.object).any(|h| h.len() != len) {
        return Err(Error::contract("window histories are not aligned"));
    }
    let dim = 3 * len;
    let count = window.robot.len() + window.object.len() + 2;
    let mut data = Vec::with_capacity(count * dim);
    for track in window.robot.iter().chain(&window.object) {
        for p in track {
            data.extend_from_slice(&[p.x, p.y, p.z]);
        }
    }
    for channel in [&window.gripper, &window.force] {
        for &v in channel.iter() {
            data.extend_from_slice(&[v, v, v]);
        }
    }
    Ok(Tokens { count, dim, data })
}

/// Per-axis position standardization and force scaling, stored with the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub position_mean: [f64; 3],
    pub position_std: [f64; 3],
    pub force_scale: f64,
}

impl Normalizer {
    pub const FORCE_SCALE: f64 = 0.01;

    pub fn identity() -> Self {
        Self {
            position_mean: [0.0; 3],
            position_std: [1.0; 3],
            force_scale: 1.0,
        }
    }

    pub fn fit<'a>(frames: impl IntoIterator<Item = &'a Frame>) -> Self {
        let (mut sum, mut sq, mut n) = ([0.0; 3], [0.0; 3], 0.0);
        for f in frames {
            for p in f.robot.iter().chain(&f.object) {
                for a in 0..3 {
                    sum[a] += p[a];
                    sq[a] += p[a] * p[a];
                }
                n += 1.0;
            }
        }
        let mut mean = [0.0; 3];
        let mut std = [1.0; 3];
        if n > 0.0 {
            for a in 0..3 {
                mean[a] = sum[a] / n;
                std[a] = (sq[a] / n - mean[a] * mean[a]).max(0.0).sqrt().max(1e-3);
            }
        }
        Self {
            position_mean: mean,
            position_std: std,
            force_scale: Self::FORCE_SCALE,
        }
    }

    pub fn point(&self, p: &Vec3) -> Vec3 {
        Vec3::from_fn(|a, _| (p[a] - self.position_mean[a]) / self.position_std[a])
    }

    pub fn unpoint(&self, p: &Vec3) -> Vec3 {
        Vec3::from_fn(|a, _| p[a] * self.position_std[a] + self.position_mean[a])
    }

    pub fn frame(&self, f: &Frame, mask_force: bool) -> Frame {
        Frame {
            robot: f.robot.iter().map(|p| self.point(p)).collect(),
            object: f.object.iter().map(|p| self.point(p)).collect(),
            gripper: f.gripper,
            force: if mask_force { 0.0 } else { f.force * self.force_scale },
        }
    }
}

pub(crate) fn check_shape(cfg: &PolicyConfig, tokens: &Tokens) -> Result<()> {
    if tokens.count != cfg.token_count()
        || tokens.dim != cfg.token_dim()
        || tokens.data.len() != tokens.count * tokens.dim
    {
        return Err(Error::contract(format!(
            "tokens {}x{} do not match policy config {}x{}",
            tokens.count,
            tokens.dim,
            cfg.token_count(),
            cfg.token_dim()
        )));
    }
    Ok(())
}
