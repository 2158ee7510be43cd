//! Demonstration trajectories in the embodiment-agnostic keypoint representation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoMeta {
    pub task: String,
    pub seed: u64,
    pub fps: f64,
    /// Robot keypoints per step.
    pub n: usize,
    /// Object keypoints per step.
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoStep {
    pub t: f64,
    pub robot: Vec<Vec3>,
    pub object: Vec<Vec3>,
    pub gripper: bool,
    /// Sensor-norm units.
    pub force: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Demonstration {
    pub meta: DemoMeta,
    pub steps: Vec<DemoStep>,
}

impl Demonstration {
    pub fn new(meta: DemoMeta, steps: Vec<DemoStep>) -> Result<Self> {
        let demo = Self { meta, steps };
        demo.validate()?;
        Ok(demo)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.meta.fps > 0.0) {
            return Err(Error::contract("demonstration fps must be positive"));
        }
        for (i, s) in self.steps.iter().enumerate() {
            if s.robot.len() != self.meta.n || s.object.len() != self.meta.m {
                return Err(Error::contract(format!(
                    "step {i}: expected {}+{} keypoints, got {}+{}",
                    self.meta.n,
                    self.meta.m,
                    s.robot.len(),
                    s.object.len()
                )));
            }
            if !(s.force >= 0.0) || !s.force.is_finite() {
                return Err(Error::contract(format!("step {i}: invalid force {}", s.force)));
            }
            let finite = s.robot.iter().chain(&s.object).all(|p| p.iter().all(|v| v.is_finite()));
            if !finite || !s.t.is_finite() {
                return Err(Error::contract(format!("step {i}: non-finite values")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}
