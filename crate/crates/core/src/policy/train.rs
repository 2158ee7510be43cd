use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::net::{mse, PolicyNet};
use super::window::{tokenize, Frame, Normalizer, ObservationWindow};
use super::{Optimizer, Policy, PolicyConfig, TrainConfig};
use crate::demo::Demonstration;
use crate::error::{Error, Result};
use crate::seed::rng_for;

/// One supervised example: normalized tokens and the normalized chunk target.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub tokens: Vec<f64>,
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean pre-update loss over each epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
    pub samples: usize,
    /// Loss over the whole dataset after the last update.
    pub final_loss: f64,
}

/// Demo frames resampled to the control rate; one sequence per phase offset.
pub fn control_rate_sequences(demos: &[Demonstration], cfg: &TrainConfig) -> Vec<Vec<Frame>> {
    let stride = cfg.subsample.max(1);
    let offsets = if cfg.all_offsets { stride } else { 1 };
    let mut out = Vec::new();
    for demo in demos {
        for off in 0..offsets.min(demo.len()) {
            let seq: Vec<Frame> = demo.steps.iter().skip(off).step_by(stride).map(Frame::from).collect();
            if !seq.is_empty() {
                out.push(seq);
            }
        }
    }
    out
}

pub fn build_samples(
    sequences: &[Vec<Frame>],
    cfg: &PolicyConfig,
    norm: &Normalizer,
    mask_force: bool,
) -> Result<Vec<Sample>> {
    let mut samples = Vec::new();
    for seq in sequences {
        let normed: Vec<Frame> = seq.iter().map(|f| norm.frame(f, mask_force)).collect();
        let targets: Vec<Frame> = seq.iter().map(|f| norm.frame(f, false)).collect();
        for t in 0..normed.len() {
            let window = ObservationWindow::from_frames(&normed, t, cfg.history)?;
            let tokens = tokenize(&window)?;
            if tokens.count != cfg.token_count() {
                return Err(Error::contract(format!(
                    "demo has {} tokens per step, policy expects {}",
                    tokens.count,
                    cfg.token_count()
                )));
            }
            samples.push(Sample {
                tokens: tokens.data,
                target: chunk_target(&targets, t, cfg),
            });
        }
    }
    Ok(samples)
}

/// Targets for steps `t+1 ..= t+H`, holding the final frame past the end.
fn chunk_target(frames: &[Frame], t: usize, cfg: &PolicyConfig) -> Vec<f64> {
    let last = frames.len() - 1;
    let future = |j: usize| &frames[(t + 1 + j).min(last)];
    let mut out = Vec::with_capacity(cfg.output_len());
    for k in 0..cfg.robot_points {
        for j in 0..cfg.horizon {
            let p = future(j).robot[k];
            out.extend_from_slice(&[p.x, p.y, p.z]);
        }
    }
    out.extend((0..cfg.horizon).map(|j| future(j).gripper));
    out.extend((0..cfg.horizon).map(|j| future(j).force));
    out
}

/// Mean loss over a set of samples, with its gradient written into `grad`.
pub(crate) fn batch_gradient(net: &PolicyNet, batch: &[&Sample], grad: &mut [f64]) -> f64 {
    grad.fill(0.0);
    let tokens: Vec<f64> = batch.iter().flat_map(|s| s.tokens.iter().copied()).collect();
    let target: Vec<f64> = batch.iter().flat_map(|s| s.target.iter().copied()).collect();
    let (cache, out) = net.forward_batch(&tokens, batch.len());
    // mse averages over every output of every sample, which is the per-sample mean averaged over the batch
    let (loss, dout) = mse(&out, &target);
    net.backward(&cache, &dout, grad);
    loss
}

pub fn dataset_loss(net: &PolicyNet, samples: &[Sample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for chunk in samples.chunks(256) {
        let refs: Vec<&Sample> = chunk.iter().collect();
        let tokens: Vec<f64> = refs.iter().flat_map(|s| s.tokens.iter().copied()).collect();
        let target: Vec<f64> = refs.iter().flat_map(|s| s.target.iter().copied()).collect();
        let out = net.forward_batch(&tokens, refs.len()).1;
        total += mse(&out, &target).0 * refs.len() as f64;
    }
    total / samples.len() as f64
}

struct OptimizerState {
    kind: Optimizer,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl OptimizerState {
    fn new(kind: Optimizer, n: usize) -> Self {
        Self {
            kind,
            m: vec![0.0; n],
            v: if kind == Optimizer::Adam {
                vec![0.0; n]
            } else {
                Vec::new()
            },
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64, momentum: f64) {
        self.t += 1;
        match self.kind {
            Optimizer::Momentum => {
                for ((p, g), m) in params.iter_mut().zip(grad).zip(&mut self.m) {
                    *m = momentum * *m + g;
                    *p -= lr * *m;
                }
            }
            Optimizer::Adam => {
                let (b1, b2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
                let c1 = 1.0 - b1.powi(self.t);
                let c2 = 1.0 - b2.powi(self.t);
                for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                }
            }
        }
    }
}

/// Fits `net` to the demonstrations with an MSE loss on tracks, gripper and force.
pub fn train(mut net: PolicyNet, demos: &[Demonstration], cfg: &TrainConfig) -> Result<(Policy, TrainReport)> {
    if demos.is_empty() {
        return Err(Error::contract("training needs at least one demonstration"));
    }
    if cfg.batch_size == 0 || cfg.epochs == 0 {
        return Err(Error::Config("epochs and batch size must be positive".into()));
    }
    let pc = net.config().clone();
    for d in demos {
        if d.meta.n != pc.robot_points || d.meta.m != pc.object_points {
            return Err(Error::contract(format!(
                "demo '{}' has N={} M={}, policy expects N={} M={}",
                d.meta.task, d.meta.n, d.meta.m, pc.robot_points, pc.object_points
            )));
        }
    }
    let sequences = control_rate_sequences(demos, cfg);
    let normalizer = Normalizer::fit(sequences.iter().flatten());
    let samples = build_samples(&sequences, &pc, &normalizer, cfg.mask_force)?;
    if samples.is_empty() {
        return Err(Error::contract("demonstrations contain no steps"));
    }

    let batches_per_epoch = samples.len().div_ceil(cfg.batch_size);
    let mut total_steps = cfg.epochs * batches_per_epoch;
    if cfg.max_steps > 0 {
        total_steps = total_steps.min(cfg.max_steps);
    }
    let mut opt = OptimizerState::new(cfg.optimizer, net.param_count());
    let mut grad = vec![0.0; net.param_count()];
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut epoch_losses = Vec::new();
    let mut step = 0usize;

    'epochs: for epoch in 0..cfg.epochs {
        let mut rng = rng_for(cfg.seed, "shuffle", epoch as u64);
        order.shuffle(&mut rng);
        let (mut sum, mut count) = (0.0, 0usize);
        for idx in order.chunks(cfg.batch_size) {
            if step >= total_steps {
                break;
            }
            let batch: Vec<&Sample> = idx.iter().map(|&i| &samples[i]).collect();
            let loss = batch_gradient(&net, &batch, &mut grad);
            if !loss.is_finite() {
                return Err(Error::Domain(format!("training diverged at step {step}")));
            }
            sum += loss * batch.len() as f64;
            count += batch.len();
            if cfg.clip_norm > 0.0 {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > cfg.clip_norm {
                    let s = cfg.clip_norm / norm;
                    grad.iter_mut().for_each(|g| *g *= s);
                }
            }
            let progress = step as f64 / total_steps.max(1) as f64;
            let floor = cfg.final_lr_fraction.clamp(0.0, 1.0);
            let lr =
                cfg.learning_rate * (floor + (1.0 - floor) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()));
            opt.step(net.params_mut(), &grad, lr, cfg.momentum);
            step += 1;
        }
        if count > 0 {
            epoch_losses.push(sum / count as f64);
            log::debug!("epoch {epoch}: loss {:.6e}", sum / count as f64);
        }
        if step >= total_steps {
            break 'epochs;
        }
    }
    let final_loss = dataset_loss(&net, &samples);
    Ok((
        Policy {
            net,
            normalizer,
            mask_force: cfg.mask_force,
        },
        TrainReport {
            epoch_losses,
            steps: step,
            samples: samples.len(),
            final_loss,
        },
    ))
}
