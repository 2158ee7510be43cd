use std::path::{Path, PathBuf};

use forcegrip_core::control::{ControllerConfig, RolloutConfig};
use forcegrip_core::formats::{parse_layout, parse_rig, parse_task_spec};
use forcegrip_core::geometry::CameraRig;
use forcegrip_core::plant::{TaskKind, TaskSpec};
use forcegrip_core::policy::{PolicyConfig, TrainConfig};
use forcegrip_core::retarget::KeypointLayout;
use forcegrip_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// Network shape; keypoint counts come from the layout and task spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyShape {
    pub history: usize,
    pub horizon: usize,
    pub width: usize,
    pub depth: usize,
    pub heads: usize,
    pub ffn_mult: usize,
}

impl Default for PolicyShape {
    fn default() -> Self {
        let p = PolicyConfig::new(0, 0);
        Self {
            history: p.history,
            horizon: p.horizon,
            width: p.width,
            depth: p.depth,
            heads: p.heads,
            ffn_mult: p.ffn_mult,
        }
    }
}

/// The TOML document as written. Paths are relative to the file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub task: Option<String>,
    pub task_spec: Option<PathBuf>,
    pub rig: Option<PathBuf>,
    pub layout: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub demos: Option<usize>,
    pub episodes: Option<usize>,
    #[serde(default)]
    pub policy: PolicyShape,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub rollout: RolloutConfig,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub task: Option<String>,
    pub episodes: Option<usize>,
}

/// A loaded and validated run configuration with every referenced file already parsed.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub spec: TaskSpec,
    pub rig: CameraRig,
    pub layout: KeypointLayout,
    pub policy: PolicyConfig,
    pub train: TrainConfig,
    pub controller: ControllerConfig,
    pub rollout: RolloutConfig,
    pub demos: usize,
    pub episodes: usize,
    pub output_dir: PathBuf,
}

pub const DEFAULT_DEMOS: usize = 30;
pub const DEFAULT_EPISODES: usize = 10;

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

impl RunConfig {
    /// Loads `path` (if any) and applies `over`. Without a file every setting takes its default,
    /// but the seed and output directory must still come from the command line.
    pub fn load(path: Option<&Path>, over: &Overrides) -> Result<Self> {
        let (file, base) = match path {
            Some(p) => {
                let text = read_text(p)?;
                let file: ConfigFile =
                    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                (file, base)
            }
            None => (ConfigFile::default(), PathBuf::new()),
        };
        Self::resolve(file, &base, over)
    }

    pub fn resolve(file: ConfigFile, base: &Path, over: &Overrides) -> Result<Self> {
        let seed = over
            .seed
            .or(file.seed)
            .ok_or_else(|| Error::Config("a seed is required (config 'seed' or --seed)".into()))?;
        if file.train.seed != 0 || file.rollout.seed != 0 {
            return Err(Error::Config(
                "train.seed and rollout.seed are derived from the top-level seed; remove them".into(),
            ));
        }
        let rel = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };

        let mut spec = match &file.task_spec {
            Some(p) => parse_task_spec(&read_text(&rel(p))?).map_err(|e| in_file(&rel(p), e))?,
            None => {
                let name = file.task.as_deref().unwrap_or(TaskKind::FragilePickPlace.name());
                TaskSpec::default_for(TaskKind::from_name(name).map_err(|e| Error::Config(e.to_string()))?)
            }
        };
        if let (Some(name), Some(_)) = (&file.task, &file.task_spec) {
            if name != spec.task.name() {
                return Err(Error::Config(format!(
                    "task '{name}' disagrees with the task spec file ('{}')",
                    spec.task.name()
                )));
            }
        }
        if let Some(name) = &over.task {
            let kind = TaskKind::from_name(name).map_err(|e| Error::Config(e.to_string()))?;
            if kind != spec.task {
                if file.task_spec.is_some() {
                    return Err(Error::Config(format!(
                        "--task {name} conflicts with the task spec file ('{}')",
                        spec.task.name()
                    )));
                }
                spec = TaskSpec::default_for(kind);
            }
        }
        let rig = match &file.rig {
            Some(p) => parse_rig(&read_text(&rel(p))?).map_err(|e| in_file(&rel(p), e))?,
            None => CameraRig::default_rig(),
        };
        let layout = match &file.layout {
            Some(p) => parse_layout(&read_text(&rel(p))?).map_err(|e| in_file(&rel(p), e))?,
            None => KeypointLayout::default_gripper(),
        };
        let output_dir = match (&over.out, &file.output_dir) {
            (Some(o), _) => o.clone(),
            (None, Some(o)) => rel(o),
            (None, None) => {
                return Err(Error::Config(
                    "an output directory is required (config 'output_dir' or --out)".into(),
                ))
            }
        };

        let s = &file.policy;
        let policy = PolicyConfig {
            history: s.history,
            horizon: s.horizon,
            width: s.width,
            depth: s.depth,
            heads: s.heads,
            ffn_mult: s.ffn_mult,
            robot_points: layout.len(),
            object_points: spec.keypoints.len(),
        };
        policy.validate()?;
        file.controller.validate()?;
        file.rollout.validate()?;
        let mut rollout = file.rollout;
        rollout.seed = seed;
        let mut train = file.train;
        train.seed = forcegrip_core::seed::derive_seed(seed, "train", 0);
        Ok(Self {
            seed,
            spec,
            rig,
            layout,
            policy,
            train,
            controller: file.controller,
            rollout,
            demos: file.demos.unwrap_or(DEFAULT_DEMOS),
            episodes: over.episodes.or(file.episodes).unwrap_or(DEFAULT_EPISODES),
            output_dir,
        })
    }
}

/// Parse errors from referenced files name the file; other kinds pass through.
fn in_file(path: &Path, e: Error) -> Error {
    match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    }
}
