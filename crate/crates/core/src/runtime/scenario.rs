//! Scenario scripts (TOML).
//!
//! ```toml
//! schema = "safebn.scenario/1"
//! bootstrap_B = 1000
//! alpha = 0.01
//! seed = 42
//! calibration = "../calibration/platoon.bn"   # optional, built-in when absent
//! reference_dir = "../reference"
//!
//! [[frame]]
//! predicted_class = 3
//! true_class = 4                              # annotation only
//! channels_file = "../frames/class_4_dark.csv" # or: channels = [[...], [...], [...]]
//! speed = 40
//! distance_follower = 6                       # gap fields default to the nominal context
//! ```
//!
//! Relative paths resolve against the script's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{Frame, RunConfig, RuntimeError};
use crate::bayesnet::Network;
use crate::platoon::{build_platoon_network, Calibration, ContextSignals, TrafficSignClass};
use crate::stats::{read_channel_file, RngSeed, SampleSet, DEFAULT_ALPHA, DEFAULT_BOOTSTRAP};

pub const SCENARIO_SCHEMA: &str = "safebn.scenario/1";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    schema: Option<String>,
    #[serde(rename = "bootstrap_B", default = "default_bootstrap")]
    bootstrap: usize,
    #[serde(default = "default_alpha")]
    alpha: f64,
    #[serde(default)]
    seed: u64,
    calibration: Option<PathBuf>,
    reference_dir: PathBuf,
    #[serde(default, rename = "frame")]
    frames: Vec<RawFrame>,
}

fn default_bootstrap() -> usize {
    DEFAULT_BOOTSTRAP
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFrame {
    frame_id: Option<u32>,
    predicted_class: i64,
    true_class: Option<i64>,
    channels_file: Option<PathBuf>,
    channels: Option<Vec<Vec<f64>>>,
    speed: f64,
    distance_follower: Option<f64>,
    distance_leader: Option<f64>,
    safe_distance: Option<f64>,
    threshold: Option<f64>,
    allowed_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioScript {
    pub name: String,
    pub config: RunConfig,
    /// `None` selects the built-in calibration.
    pub calibration: Option<PathBuf>,
    pub reference_dir: PathBuf,
    pub frames: Vec<Frame>,
}

impl ScenarioScript {
    pub fn load(path: &Path) -> Result<Self, RuntimeError> {
        let text = std::fs::read_to_string(path).map_err(|source| RuntimeError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("scenario")
            .to_string();
        Self::parse(&text, base, name).map_err(|e| match e {
            RuntimeError::Scenario { message, .. } => RuntimeError::Scenario {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    /// Parses script text; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path, name: String) -> Result<Self, RuntimeError> {
        let bad = |message: String| RuntimeError::Scenario {
            path: PathBuf::from(&name),
            message,
        };
        let raw: RawScenario = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        if let Some(schema) = &raw.schema {
            if schema != SCENARIO_SCHEMA {
                return Err(bad(format!("unsupported schema {schema:?}")));
            }
        }
        if raw.frames.is_empty() {
            return Err(RuntimeError::EmptyScenario);
        }
        let config = RunConfig {
            bootstrap: raw.bootstrap,
            alpha: raw.alpha,
            seed: RngSeed(raw.seed),
            disable_safeml: false,
        };
        config.validate()?;
        let resolve = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };

        let frames = raw
            .frames
            .into_iter()
            .enumerate()
            .map(|(i, f)| {
                build_frame(i, f, &resolve).map_err(|e| RuntimeError::Frame {
                    index: i + 1,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;

        Ok(Self {
            name,
            config,
            calibration: raw.calibration.as_deref().map(resolve),
            reference_dir: resolve(&raw.reference_dir),
            frames,
        })
    }

    pub fn network(&self) -> Result<Network, RuntimeError> {
        let cal = match &self.calibration {
            Some(path) => Calibration::load(path)?,
            None => Calibration::builtin(),
        };
        Ok(build_platoon_network(&cal)?)
    }
}

fn build_frame(
    index: usize,
    f: RawFrame,
    resolve: &impl Fn(&Path) -> PathBuf,
) -> Result<Frame, RuntimeError> {
    let invalid = |message: &str| RuntimeError::InvalidConfig(message.to_string());
    let channels = match (f.channels_file, f.channels) {
        (Some(file), None) => {
            let path = resolve(&file);
            read_channel_file(&path).map_err(|e| RuntimeError::Scenario {
                path,
                message: e.to_string(),
            })?
        }
        (None, Some(inline)) => inline
            .into_iter()
            .enumerate()
            .map(|(c, values)| SampleSet::new(c as u32, values))
            .collect::<Result<Vec<_>, _>>()?,
        (Some(_), Some(_)) => {
            return Err(invalid("give either channels_file or channels, not both"))
        }
        (None, None) => return Err(invalid("frame needs channels_file or channels")),
    };
    let nominal = ContextSignals::nominal(f.speed);
    let context = ContextSignals::new(
        f.speed,
        f.distance_follower.unwrap_or(nominal.distance_follower),
        f.distance_leader.unwrap_or(nominal.distance_leader),
        f.safe_distance.unwrap_or(nominal.safe_distance),
        f.threshold.unwrap_or(nominal.threshold),
        f.allowed_error.unwrap_or(nominal.allowed_error),
    )?;
    Ok(Frame {
        frame_id: f.frame_id.unwrap_or(index as u32 + 1),
        channels,
        predicted_class: TrafficSignClass::new(f.predicted_class)?,
        true_class: f.true_class.map(TrafficSignClass::new).transpose()?,
        context,
    })
}
