//! The monitoring loop: per frame, test the input channels against the
//! predicted class's training distribution, turn the verdict and context
//! into evidence, infer the system state and emit the recommended action.

mod reference;
mod report;
mod scenario;
pub mod synthetic;

pub use reference::{
    class_file, load_reference, load_reference_classes, ReferenceError, ReferenceStore,
};
pub use report::{
    emit_report, read_trace_jsonl, write_trace_jsonl, Report, REPORT_COLUMNS, REPORT_SCHEMA,
};
pub use scenario::{ScenarioScript, SCENARIO_SCHEMA};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bayesnet::{Evidence, Network};
use crate::platoon::{
    class_to_speed_limit, derive_evidence, infer_system_state, nodes, Action, ContextSignals,
    PlatoonError, SystemState, TrafficSignClass,
};
use crate::stats::{
    assess_frame, ChannelDriftResult, DriftWarning, RngSeed, SampleSet, StatsError, DEFAULT_ALPHA,
    DEFAULT_BOOTSTRAP,
};

pub const TRACE_SCHEMA: &str = "safebn.trace/1";

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error(transparent)]
    Reference(#[from] ReferenceError),
    #[error("no reference distribution for predicted class {0}")]
    NoReference(TrafficSignClass),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Platoon(#[from] PlatoonError),
    #[error("empty scenario")]
    EmptyScenario,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("scenario {path}: {message}")]
    Scenario { path: PathBuf, message: String },
    #[error("frame {index}: {source}")]
    Frame {
        index: usize,
        #[source]
        source: Box<RuntimeError>,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed trace record: {0}")]
    Trace(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub frame_id: u32,
    pub channels: Vec<SampleSet>,
    pub predicted_class: TrafficSignClass,
    /// Reporting annotation only.
    pub true_class: Option<TrafficSignClass>,
    pub context: ContextSignals,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub bootstrap: usize,
    pub alpha: f64,
    pub seed: RngSeed,
    /// Force SafeML_Status = ID while still computing and logging the test.
    pub disable_safeml: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            bootstrap: DEFAULT_BOOTSTRAP,
            alpha: DEFAULT_ALPHA,
            seed: RngSeed(0),
            disable_safeml: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), RuntimeError> {
        if self.bootstrap == 0 {
            return Err(RuntimeError::InvalidConfig(
                "bootstrap B must be at least 1".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(RuntimeError::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// One loop iteration, serialized as a single JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub schema: String,
    pub frame_id: u32,
    pub predicted_class: TrafficSignClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_class: Option<TrafficSignClass>,
    pub speed_limit: String,
    pub context: ContextSignals,
    pub channels: Vec<ChannelDriftResult>,
    pub min_p: f64,
    /// The monitor's own verdict, before any ablation.
    pub unreliable: bool,
    pub safeml_disabled: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<DriftWarning>,
    pub evidence: Evidence,
    pub posterior: Vec<f64>,
    pub state: SystemState,
    pub action: Action,
    pub seed: RngSeed,
}

impl TraceRecord {
    /// Whether the evidence fed to the network marked the input OOD.
    pub fn safeml_ood(&self) -> bool {
        self.evidence.get(nodes::SAFEML_STATUS) == Some("OOD")
    }
}

/// Runs one frame through the loop. The frame is only ever compared
/// against the reference of its predicted class.
pub fn step(
    frame: &Frame,
    store: &ReferenceStore,
    net: &Network,
    cfg: &RunConfig,
) -> Result<TraceRecord, RuntimeError> {
    cfg.validate()?;
    frame.context.validate()?;
    let reference = store
        .get(frame.predicted_class)
        .ok_or(RuntimeError::NoReference(frame.predicted_class))?;
    let seed = cfg.seed.derive(u64::from(frame.frame_id));
    let verdict = assess_frame(&frame.channels, reference, cfg.bootstrap, cfg.alpha, seed)?;
    let flagged = verdict.unreliable && !cfg.disable_safeml;
    let evidence = derive_evidence(frame.predicted_class, flagged, &frame.context);
    let assessment = infer_system_state(net, &evidence)?;
    Ok(TraceRecord {
        schema: TRACE_SCHEMA.to_string(),
        frame_id: frame.frame_id,
        predicted_class: frame.predicted_class,
        true_class: frame.true_class,
        speed_limit: class_to_speed_limit(frame.predicted_class).label(),
        context: frame.context,
        channels: verdict.per_channel,
        min_p: verdict.min_p,
        unreliable: verdict.unreliable,
        safeml_disabled: cfg.disable_safeml,
        warnings: verdict.warnings,
        evidence,
        posterior: assessment.posterior.probabilities,
        state: assessment.state,
        action: assessment.action,
        seed,
    })
}

/// Runs frames in order; errors carry the 1-based frame position.
pub fn run_frames(
    frames: &[Frame],
    store: &ReferenceStore,
    net: &Network,
    cfg: &RunConfig,
) -> Result<Vec<TraceRecord>, RuntimeError> {
    if frames.is_empty() {
        return Err(RuntimeError::EmptyScenario);
    }
    frames
        .iter()
        .enumerate()
        .map(|(i, frame)| {
            step(frame, store, net, cfg).map_err(|e| RuntimeError::Frame {
                index: i + 1,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Loads the script's reference data and calibration, then runs every frame.
pub fn run_scenario(script: &ScenarioScript) -> Result<Vec<TraceRecord>, RuntimeError> {
    if script.frames.is_empty() {
        return Err(RuntimeError::EmptyScenario);
    }
    script.config.validate()?;
    let store = load_reference(&script.reference_dir)?;
    let net = script.network()?;
    run_frames(&script.frames, &store, &net, &script.config)
}
