//! Chunked transformer policy over keypoint tokens.

mod chunk;
mod config;
mod model_file;
mod net;
mod train;
mod window;

pub use chunk::{parse_action, temporal_aggregate, Action, ActionChunk, ParsedAction, TemporalEnsemble};
pub use config::{Optimizer, PolicyConfig, TrainConfig};
pub use model_file::{MODEL_MAGIC, MODEL_VERSION};
pub use net::{random_tokens, PolicyNet, RawChunk};
pub use train::{build_samples, control_rate_sequences, dataset_loss, train, Sample, TrainReport};
pub use window::{tokenize, Frame, Normalizer, ObservationWindow, Tokens};

pub use crate::demo::Demonstration;

use crate::error::Result;
use crate::geometry::Vec3;

/// A trained network together with the normalization it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub net: PolicyNet,
    pub normalizer: Normalizer,
    pub mask_force: bool,
}

impl Policy {
    pub fn config(&self) -> &PolicyConfig {
        self.net.config()
    }

    pub fn tokens_at(&self, frames: &[Frame], t: usize) -> Result<Tokens> {
        if t >= frames.len() {
            return Err(crate::Error::contract(format!(
                "step {t} past {} observed frames",
                frames.len()
            )));
        }
        let normed: Vec<Frame> = frames
            .iter()
            .skip((t + 1).saturating_sub(self.config().history))
            .take(self.config().history.min(t + 1))
            .map(|f| self.normalizer.frame(f, self.mask_force))
            .collect();
        // the window helper pads with the first available frame, which is frame 0 when t < L
        let window = ObservationWindow::from_frames(&normed, normed.len().saturating_sub(1), self.config().history)?;
        tokenize(&window)
    }

    /// Predicts the chunk starting at step `t` from the observed frames `0..=t`.
    pub fn predict(&self, frames: &[Frame], t: usize) -> Result<ActionChunk> {
        let tokens = self.tokens_at(frames, t)?;
        let raw = self.net.forward(&tokens)?;
        Ok(self.decode(&raw))
    }

    pub fn decode(&self, raw: &RawChunk) -> ActionChunk {
        let cfg = self.config();
        let (n, h) = (cfg.robot_points, cfg.horizon);
        let tracks = n * 3 * h;
        let steps = (0..h)
            .map(|j| Action {
                points: (0..n)
                    .map(|k| {
                        let o = k * 3 * h + j * 3;
                        self.normalizer
                            .unpoint(&Vec3::new(raw.0[o], raw.0[o + 1], raw.0[o + 2]))
                    })
                    .collect(),
                gripper: raw.0[tracks + j],
                force: raw.0[tracks + h + j] / self.normalizer.force_scale,
            })
            .collect();
        ActionChunk { steps }
    }
}
