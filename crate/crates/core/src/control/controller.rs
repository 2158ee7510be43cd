use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::{Plant, PlantState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    /// Closure per sensor-norm unit of force error.
    pub k: f64,
    /// Convergence band, sensor-norm units.
    pub epsilon: f64,
    /// Closure·seconds per sensor-norm unit.
    pub derivative_gain: f64,
    /// Time between inner iterations, seconds; only used by the derivative term.
    pub inner_period: f64,
    pub max_inner_iters: usize,
    pub closure_min: f64,
    pub closure_max: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            k: 0.001,
            epsilon: 5.0,
            derivative_gain: 0.0,
            inner_period: 0.01,
            max_inner_iters: 50,
            closure_min: 0.0,
            closure_max: 1.0,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::Config(format!("controller k must be positive, got {}", self.k)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "controller epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_inner_iters == 0 {
            return Err(Error::Config("controller needs at least one inner iteration".into()));
        }
        if !(self.derivative_gain >= 0.0 && self.inner_period > 0.0) {
            return Err(Error::Config(
                "derivative gain must be >= 0 and inner period > 0".into(),
            ));
        }
        if !(0.0 <= self.closure_min && self.closure_min < self.closure_max && self.closure_max <= 1.0) {
            return Err(Error::Config("closure bounds must satisfy 0 <= min < max <= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    IterCap,
    ClosureSaturated,
}

/// One inner iteration: the error that drove it, the correction, and the result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerStep {
    pub target: f64,
    /// Force read before the correction.
    pub force: f64,
    pub delta: f64,
    pub setpoint: f64,
    /// Force read after executing the new setpoint.
    pub force_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerTrace {
    pub steps: Vec<InnerStep>,
    pub termination: Termination,
}

impl ControllerTrace {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    pub fn final_force(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.force_after)
    }
}

/// Proportional force tracking on the gripper closure with the end effector held still.
///
/// Repeats `g ← clamp(g + k·(F̂ − F) + kd·d(F̂ − F)/dτ)`, executes `g`, reads the force,
/// until `|F̂ − F| ≤ ε`, the closure saturates, or the iteration cap is reached.
pub fn force_feedback_gripper_control(
    plant: &mut Plant,
    target: f64,
    cfg: &ControllerConfig,
) -> Result<(PlantState, ControllerTrace)> {
    cfg.validate()?;
    if !(target >= 0.0 && target.is_finite()) {
        return Err(Error::contract(format!(
            "force target must be finite and >= 0, got {target}"
        )));
    }
    let eef = plant.state().eef_pose;
    let mut setpoint = plant.state().closure;
    let mut force = plant.state().measured_force;
    let mut prev_error: Option<f64> = None;
    let mut steps = Vec::new();
    let termination = loop {
        let error = target - force;
        let derivative = prev_error.map_or(0.0, |p| (error - p) / cfg.inner_period);
        let delta = cfg.k * error + cfg.derivative_gain * derivative;
        let raw = setpoint + delta;
        let next = raw.clamp(cfg.closure_min, cfg.closure_max);
        let saturated = raw != next;
        setpoint = next;
        let after = plant.step(setpoint, &eef).measured_force;
        steps.push(InnerStep {
            target,
            force,
            delta,
            setpoint,
            force_after: after,
        });
        prev_error = Some(error);
        force = after;
        if (target - force).abs() <= cfg.epsilon {
            break Termination::Converged;
        }
        if saturated {
            break Termination::ClosureSaturated;
        }
        if steps.len() >= cfg.max_inner_iters {
            break Termination::IterCap;
        }
    };
    if termination != Termination::Converged {
        log::debug!("force controller stopped with {termination:?} at F={force:.2}, target {target:.2}");
    }
    Ok((plant.state().clone(), ControllerTrace { steps, termination }))
}
