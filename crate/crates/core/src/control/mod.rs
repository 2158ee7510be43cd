//! Force-feedback gripper control, closed-loop rollouts and the scripted expert.

mod controller;
mod expert;
mod rollout;

pub use controller::{force_feedback_gripper_control, ControllerConfig, ControllerTrace, InnerStep, Termination};
pub use expert::{replay_demo, scripted_expert, scripted_expert_noiseless, ExpertRun, EXPERT_FPS};
pub use rollout::{
    episode_plant, evaluate, rollout, task_success, ChunkSource, EpisodeRecord, EpisodeStep, EpisodeSummary,
    EvalReport, ExpertReplay, GripperAction, GripperMode, RolloutConfig, RolloutSetup, TWIST_LIFT_HEIGHT,
    TWIST_LIFT_YAW,
};
