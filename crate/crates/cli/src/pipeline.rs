//! Pipeline stages. Each `cmd_*` reads its inputs, runs the stage and writes its outputs
//! under the run's output directory; the other functions are the same stages without I/O.

use std::path::{Path, PathBuf};

use forcegrip_core::control::{
    episode_plant, evaluate, rollout, scripted_expert, EpisodeRecord, EvalReport, ExpertRun, GripperMode, RolloutSetup,
    EXPERT_FPS,
};
use forcegrip_core::demo::{DemoMeta, DemoStep, Demonstration};
use forcegrip_core::formats::{parse_demo, parse_hand_track, parse_session, write_curve, write_demo};
use forcegrip_core::plant::{reset_pose, Scene};
use forcegrip_core::policy::{train, Normalizer, Policy, PolicyNet, TrainReport};
use forcegrip_core::retarget::retarget_trajectory;
use forcegrip_core::seed::derive_seed;
use forcegrip_core::tactile::{fit_calibration, CalibrationFit};
use forcegrip_core::{Error, Result};
use serde::Serialize;

use crate::config::{read_text, RunConfig};
use crate::output::{write_atomic, write_json};

pub const DEMO_DIR: &str = "demos";
pub const MODEL_FILE: &str = "model.fgp";

pub fn demo_seed(cfg: &RunConfig, i: usize) -> u64 {
    derive_seed(cfg.seed, "demo", i as u64)
}

pub fn eval_seeds(cfg: &RunConfig, episodes: usize) -> Vec<u64> {
    (0..episodes).map(|i| derive_seed(cfg.seed, "eval", i as u64)).collect()
}

pub fn generate_demos(cfg: &RunConfig, count: usize) -> Result<Vec<ExpertRun>> {
    (0..count)
        .map(|i| scripted_expert(&cfg.spec, demo_seed(cfg, i), &cfg.layout, &cfg.controller))
        .collect()
}

pub fn train_policy(cfg: &RunConfig, demos: &[Demonstration], mask_force: bool) -> Result<(Policy, TrainReport)> {
    let net = PolicyNet::new(cfg.policy.clone(), derive_seed(cfg.seed, "init", 0))?;
    let tc = forcegrip_core::policy::TrainConfig {
        mask_force: mask_force || cfg.train.mask_force,
        ..cfg.train.clone()
    };
    train(net, demos, &tc)
}

pub fn evaluate_policy(
    cfg: &RunConfig,
    policy: &Policy,
    episodes: usize,
    mode: GripperMode,
) -> Result<(EvalReport, Vec<EpisodeRecord>)> {
    let rc = forcegrip_core::control::RolloutConfig {
        gripper_mode: mode,
        ..cfg.rollout.clone()
    };
    let setup = RolloutSetup {
        layout: &cfg.layout,
        rollout: &rc,
        controller: &cfg.controller,
    };
    evaluate(|_| Ok(policy), &cfg.spec, &eval_seeds(cfg, episodes), &setup)
}

fn mode(binary: bool, cfg: &RunConfig) -> GripperMode {
    if binary {
        GripperMode::Binary
    } else {
        cfg.rollout.gripper_mode
    }
}

#[derive(Debug, Serialize)]
pub struct CalibrationReport {
    pub rows: usize,
    pub knots: usize,
    pub max_residual: f64,
    pub pooled_blocks: usize,
}

/// Fits the session at `session` and writes `curve.csv` and `calibration.json`.
pub fn cmd_calibrate(cfg: &RunConfig, session: &Path) -> Result<CalibrationFit> {
    let parsed = parse_session(&read_text(session)?)?;
    let pairs = parsed.pairs();
    let fit = fit_calibration(&pairs)?;
    if fit.pooled_blocks > 0 {
        log::warn!("session is not monotone; {} blocks pooled", fit.pooled_blocks);
    }
    write_atomic(&cfg.output_dir.join("curve.csv"), write_curve(&fit.curve).as_bytes())?;
    let report = CalibrationReport {
        rows: pairs.len(),
        knots: fit.curve.knots().len(),
        max_residual: fit.max_residual,
        pooled_blocks: fit.pooled_blocks,
    };
    write_json(&cfg.output_dir.join("calibration.json"), &report)?;
    Ok(fit)
}

#[derive(Debug, Serialize)]
pub struct DemoManifest {
    pub task: String,
    pub seed: u64,
    pub demos: Vec<DemoEntry>,
}

#[derive(Debug, Serialize)]
pub struct DemoEntry {
    pub file: String,
    pub seed: u64,
    pub steps: usize,
    pub expert_success: bool,
}

pub fn demo_file_name(i: usize) -> String {
    format!("demo_{i:04}.jsonl")
}

/// Writes `count` scripted demonstrations and a manifest under `demos/`.
pub fn cmd_gen_demos(cfg: &RunConfig, count: usize) -> Result<Vec<PathBuf>> {
    if count == 0 {
        log::warn!("demo count is 0; nothing generated");
    }
    let dir = cfg.output_dir.join(DEMO_DIR);
    let runs = generate_demos(cfg, count)?;
    let mut paths = Vec::with_capacity(count);
    let mut entries = Vec::with_capacity(count);
    for (i, run) in runs.iter().enumerate() {
        if !run.success {
            log::warn!(
                "expert demo {i} (seed {}) did not complete the task",
                run.demo.meta.seed
            );
        }
        let path = dir.join(demo_file_name(i));
        write_atomic(&path, write_demo(&run.demo).as_bytes())?;
        entries.push(DemoEntry {
            file: demo_file_name(i),
            seed: run.demo.meta.seed,
            steps: run.demo.len(),
            expert_success: run.success,
        });
        paths.push(path);
    }
    let manifest = DemoManifest {
        task: cfg.spec.task.name().to_string(),
        seed: cfg.seed,
        demos: entries,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    log::info!("wrote {count} demos to {}", dir.display());
    Ok(paths)
}

/// Retargets a hand track into a demonstration. The object sits still at its sampled
/// start pose and the force channel is zero, since a track carries neither.
pub fn retarget_track(cfg: &RunConfig, track_text: &str) -> Result<Demonstration> {
    let track = parse_hand_track(track_text)?;
    let frames = track.to_frames(&cfg.rig)?;
    let forces = vec![0.0; frames.len()];
    let states = retarget_trajectory(&frames, &forces, &reset_pose(), &cfg.layout)?;
    let scene = Scene::sample(&cfg.spec, cfg.seed)?;
    let object: Vec<_> = scene
        .object
        .keypoints
        .iter()
        .map(|p| scene.object.initial_pose.apply(p))
        .collect();
    let fps = match (frames.first(), frames.last()) {
        (Some(a), Some(b)) if frames.len() > 1 => {
            let span = b.timestamp - a.timestamp;
            if span.is_nan() || span <= 0.0 {
                return Err(Error::Contract("track timestamps must increase".into()));
            }
            (frames.len() - 1) as f64 / span
        }
        _ => EXPERT_FPS,
    };
    let steps = frames
        .iter()
        .zip(states)
        .map(|(f, s)| DemoStep {
            t: f.timestamp - frames[0].timestamp,
            robot: s.keypoints,
            object: object.clone(),
            gripper: s.gripper,
            force: s.force,
        })
        .collect();
    let meta = DemoMeta {
        task: cfg.spec.task.name().to_string(),
        seed: cfg.seed,
        fps,
        n: cfg.layout.len(),
        m: object.len(),
    };
    Demonstration::new(meta, steps)
}

pub fn cmd_retarget(cfg: &RunConfig, track: &Path) -> Result<PathBuf> {
    let demo = retarget_track(cfg, &read_text(track)?)?;
    let path = cfg.output_dir.join("retargeted.jsonl");
    write_atomic(&path, write_demo(&demo).as_bytes())?;
    Ok(path)
}

/// Every `*.jsonl` file in `dir`, in file-name order.
pub fn load_demos(dir: &Path) -> Result<Vec<Demonstration>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            parse_demo(&read_text(p)?).map_err(|e| match e {
                Error::Parse { line, message } => Error::Parse {
                    line,
                    message: format!("{}: {message}", p.display()),
                },
                other => other,
            })
        })
        .collect()
}

/// Trains on the demos in `demos` (default `<out>/demos`) and writes the model and a training report.
pub fn cmd_train(cfg: &RunConfig, demos: Option<&Path>, mask_force: bool) -> Result<(PathBuf, TrainReport)> {
    let dir = demos.map_or_else(|| cfg.output_dir.join(DEMO_DIR), Path::to_path_buf);
    let demos = load_demos(&dir)?;
    if demos.is_empty() {
        return Err(Error::Contract(format!("no demo files (*.jsonl) in {}", dir.display())));
    }
    log::info!("training on {} demos from {}", demos.len(), dir.display());
    let (policy, report) = train_policy(cfg, &demos, mask_force)?;
    let path = cfg.output_dir.join(MODEL_FILE);
    write_atomic(&path, &policy.to_bytes())?;
    write_json(&cfg.output_dir.join("train_report.json"), &report)?;
    Ok((path, report))
}

pub fn load_policy(path: &Path) -> Result<Policy> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Policy::from_bytes(&bytes)
}

/// A policy whose network is all zeros: it never moves the arm and never closes the gripper.
pub fn untrained_policy(cfg: &RunConfig) -> Result<Policy> {
    Ok(Policy {
        net: PolicyNet::zeros(cfg.policy.clone())?,
        normalizer: Normalizer::identity(),
        mask_force: false,
    })
}

fn model_or_default(cfg: &RunConfig, model: Option<&Path>) -> PathBuf {
    model.map_or_else(|| cfg.output_dir.join(MODEL_FILE), Path::to_path_buf)
}

/// One episode with evaluation seed `index`; writes `episodes/rollout_<index>.json`.
pub fn cmd_rollout(
    cfg: &RunConfig,
    model: Option<&Path>,
    untrained: bool,
    index: usize,
    binary: bool,
) -> Result<EpisodeRecord> {
    let policy = if untrained {
        untrained_policy(cfg)?
    } else {
        load_policy(&model_or_default(cfg, model))?
    };
    let rc = forcegrip_core::control::RolloutConfig {
        gripper_mode: mode(binary, cfg),
        ..cfg.rollout.clone()
    };
    let setup = RolloutSetup {
        layout: &cfg.layout,
        rollout: &rc,
        controller: &cfg.controller,
    };
    let seed = derive_seed(cfg.seed, "eval", index as u64);
    let mut source = &policy;
    let record = rollout(&mut source, episode_plant(&cfg.spec, seed)?, &setup)?;
    write_json(
        &cfg.output_dir.join("episodes").join(format!("rollout_{index:04}.json")),
        &record,
    )?;
    Ok(record)
}

pub fn eval_dir(binary: bool) -> &'static str {
    if binary {
        "eval-binary"
    } else {
        "eval"
    }
}

/// Evaluates the model on `episodes` held-out seeds; writes `report.json` and one record per episode.
pub fn cmd_eval(cfg: &RunConfig, model: Option<&Path>, episodes: usize, binary: bool) -> Result<EvalReport> {
    let policy = load_policy(&model_or_default(cfg, model))?;
    let (report, records) = evaluate_policy(cfg, &policy, episodes, mode(binary, cfg))?;
    let dir = cfg.output_dir.join(eval_dir(binary));
    for (i, r) in records.iter().enumerate() {
        write_json(&dir.join(format!("episode_{i:04}.json")), r)?;
    }
    write_json(&dir.join("report.json"), &report)?;
    Ok(report)
}
