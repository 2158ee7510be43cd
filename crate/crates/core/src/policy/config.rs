use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Network and observation shape hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    /// Observation history length L.
    pub history: usize,
    /// Action chunk horizon H.
    pub horizon: usize,
    pub width: usize,
    pub depth: usize,
    pub heads: usize,
    /// Feed-forward hidden size as a multiple of `width`.
    pub ffn_mult: usize,
    /// Robot keypoints N.
    pub robot_points: usize,
    /// Object keypoints M.
    pub object_points: usize,
}

impl PolicyConfig {
    pub fn new(robot_points: usize, object_points: usize) -> Self {
        Self {
            history: 2,
            horizon: 10,
            width: 64,
            depth: 2,
            heads: 4,
            ffn_mult: 2,
            robot_points,
            object_points,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.history == 0 || self.horizon == 0 || self.width == 0 || self.heads == 0 || self.ffn_mult == 0 {
            return Err(Error::Config("policy sizes must be positive".into()));
        }
        if !self.width.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "width {} is not divisible by {} heads",
                self.width, self.heads
            )));
        }
        let limits = [
            ("history", self.history, 64),
            ("horizon", self.horizon, 256),
            ("width", self.width, 1024),
            ("depth", self.depth, 16),
            ("heads", self.heads, 64),
            ("ffn_mult", self.ffn_mult, 8),
            ("robot_points", self.robot_points, 256),
            ("object_points", self.object_points, 256),
        ];
        if let Some((name, v, max)) = limits.iter().find(|(_, v, max)| v > max) {
            return Err(Error::Config(format!("policy {name} = {v} exceeds {max}")));
        }
        if self.robot_points < 3 {
            return Err(Error::Config("policy needs at least 3 robot keypoints".into()));
        }
        Ok(())
    }

    /// N robot tokens, M object tokens, one gripper token, one force token.
    pub fn token_count(&self) -> usize {
        self.robot_points + self.object_points + 2
    }

    /// Flattened L×3 history per token.
    pub fn token_dim(&self) -> usize {
        3 * self.history
    }

    /// Output values per chunk: N·3·H tracks, H gripper logits, H forces.
    pub fn output_len(&self) -> usize {
        self.horizon * (3 * self.robot_points + 2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// Gradient descent with heavy-ball momentum.
    Momentum,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub optimizer: Optimizer,
    /// Global gradient-norm clip; 0 disables.
    pub clip_norm: f64,
    pub seed: u64,
    /// Zero the force channel in observations (the force head is still supervised).
    pub mask_force: bool,
    /// Take every `subsample`-th demo frame (30 fps demos → 6 Hz control).
    pub subsample: usize,
    /// Use every phase offset of the subsampling as extra sequences.
    pub all_offsets: bool,
    /// Stop after this many optimizer steps (0 = no cap).
    pub max_steps: usize,
    /// Cosine-decay the learning rate to this fraction by the last step.
    pub final_lr_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 64,
            learning_rate: 1e-3,
            momentum: 0.9,
            optimizer: Optimizer::Adam,
            clip_norm: 1.0,
            seed: 0,
            mask_force: false,
            subsample: 5,
            all_offsets: true,
            max_steps: 0,
            final_lr_fraction: 0.1,
        }
    }
}
