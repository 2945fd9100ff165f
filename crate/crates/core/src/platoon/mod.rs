//! The platoon safety network.
//!
//! Node catalog (all discrete):
//!
//! | node              | states                    | parents |
//! |-------------------|---------------------------|---------|
//! | MLDecision        | `0` .. `42`               | |
//! | SafeML_Status     | `ID`, `OOD`               | |
//! | SpeedLimit        | km/h values, `NoLimit`    | MLDecision |
//! | SpeedWithinLimit  | `within`, `over`          | SpeedLimit |
//! | SpeedCheck        | `pass`, `fail`            | SafeML_Status, SpeedWithinLimit |
//! | Compare           | `ge`, `lt`                | |
//! | SafeDistance      | `safe`, `unsafe`          | Compare |
//! | DistanceDeviation | `within`, `exceeded`      | |
//! | CompareThreshold  | `within`, `exceeded`      | |
//! | DetectionQuality  | `good`, `poor`            | DistanceDeviation, CompareThreshold |
//! | IsItSafe          | `yes`, `no`               | SpeedCheck, SafeDistance, DetectionQuality |
//! | SystemState       | `S0` .. `S5`              | SafeML_Status, SpeedWithinLimit, SpeedCheck, SafeDistance, DetectionQuality |
//!
//! SpeedLimit, SpeedCheck, SafeDistance, DetectionQuality and IsItSafe are
//! deterministic (0/1 rows). Everything upstream of SystemState is observed
//! or a deterministic function of observations, so the SystemState posterior
//! is the CPT row selected by the evidence.

mod calibration;

pub use calibration::{Calibration, PinnedRow, PAPER_PINNED_ROWS, PIN_TOLERANCE};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bayesnet::{query_posterior, BayesNetError, Evidence, Network, Posterior};

pub mod nodes {
    pub const ML_DECISION: &str = "MLDecision";
    pub const SAFEML_STATUS: &str = "SafeML_Status";
    pub const SPEED_LIMIT: &str = "SpeedLimit";
    pub const SPEED_WITHIN_LIMIT: &str = "SpeedWithinLimit";
    pub const SPEED_CHECK: &str = "SpeedCheck";
    pub const COMPARE: &str = "Compare";
    pub const SAFE_DISTANCE: &str = "SafeDistance";
    pub const DISTANCE_DEVIATION: &str = "DistanceDeviation";
    pub const COMPARE_THRESHOLD: &str = "CompareThreshold";
    pub const DETECTION_QUALITY: &str = "DetectionQuality";
    pub const IS_IT_SAFE: &str = "IsItSafe";
    pub const SYSTEM_STATE: &str = "SystemState";
}

#[derive(Debug, Error)]
pub enum PlatoonError {
    #[error("traffic sign class {0} outside 0..=42")]
    InvalidClass(i64),
    #[error("invalid context: {0}")]
    InvalidContext(String),
    #[error(transparent)]
    Network(#[from] BayesNetError),
    #[error("calibration is missing node {0}")]
    MissingNode(String),
    #[error("node {node} has states {found:?}, expected {expected:?}")]
    WrongStates {
        node: String,
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("node {node} has parents {found:?}, expected {expected:?}")]
    WrongParents {
        node: String,
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("pinned row {0} is absent from the calibration")]
    PinnedRowMissing(String),
    #[error("pinned row {0} differs from the reference vector")]
    PinnedRowAltered(String),
    #[error("CPT row {key} drifted from its pinned vector: S{state} is {cpt}, pinned {pinned}")]
    CalibrationDrift {
        key: String,
        state: usize,
        cpt: f64,
        pinned: f64,
    },
    #[error("calibration line {line}: {message}")]
    Pinned { line: usize, message: String },
    #[error("cannot read calibration {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// GTSRB label, 0..=42.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u8")]
pub struct TrafficSignClass(u8);

impl TrafficSignClass {
    pub const COUNT: u8 = 43;

    pub fn new(class_id: i64) -> Result<Self, PlatoonError> {
        if (0..i64::from(Self::COUNT)).contains(&class_id) {
            Ok(Self(class_id as u8))
        } else {
            Err(PlatoonError::InvalidClass(class_id))
        }
    }

    pub fn id(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = TrafficSignClass> {
        (0..Self::COUNT).map(TrafficSignClass)
    }
}

impl TryFrom<i64> for TrafficSignClass {
    type Error = PlatoonError;
    fn try_from(v: i64) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<TrafficSignClass> for u8 {
    fn from(c: TrafficSignClass) -> u8 {
        c.0
    }
}

impl fmt::Display for TrafficSignClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpeedLimit {
    Kmh(u16),
    NoLimit,
}

impl SpeedLimit {
    pub const VALUES: [u16; 8] = [20, 30, 50, 60, 70, 80, 100, 120];

    /// State label in the SpeedLimit node.
    pub fn label(self) -> String {
        match self {
            SpeedLimit::Kmh(v) => v.to_string(),
            SpeedLimit::NoLimit => "NoLimit".to_string(),
        }
    }

    /// `speed <= limit`; a missing limit always counts as within.
    pub fn permits(self, speed: f64) -> bool {
        match self {
            SpeedLimit::Kmh(v) => speed <= f64::from(v),
            SpeedLimit::NoLimit => true,
        }
    }
}

impl fmt::Display for SpeedLimit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpeedLimit::Kmh(v) => write!(f, "{v}"),
            SpeedLimit::NoLimit => f.write_str("-"),
        }
    }
}

/// GTSRB speed-limit classes; class 6 (end of 80 limit) and every
/// non-speed sign map to [`SpeedLimit::NoLimit`].
pub fn class_to_speed_limit(class: TrafficSignClass) -> SpeedLimit {
    match class.id() {
        0 => SpeedLimit::Kmh(20),
        1 => SpeedLimit::Kmh(30),
        2 => SpeedLimit::Kmh(50),
        3 => SpeedLimit::Kmh(60),
        4 => SpeedLimit::Kmh(70),
        5 => SpeedLimit::Kmh(80),
        7 => SpeedLimit::Kmh(100),
        8 => SpeedLimit::Kmh(120),
        _ => SpeedLimit::NoLimit,
    }
}

/// Vehicle speed (km/h) and gap measurements (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextSignals {
    pub speed: f64,
    pub distance_follower: f64,
    pub distance_leader: f64,
    pub safe_distance: f64,
    pub threshold: f64,
    pub allowed_error: f64,
}

impl ContextSignals {
    pub fn new(
        speed: f64,
        distance_follower: f64,
        distance_leader: f64,
        safe_distance: f64,
        threshold: f64,
        allowed_error: f64,
    ) -> Result<Self, PlatoonError> {
        let ctx = Self {
            speed,
            distance_follower,
            distance_leader,
            safe_distance,
            threshold,
            allowed_error,
        };
        ctx.validate()?;
        Ok(ctx)
    }

    /// The stable operating point used for the with/without monitor
    /// comparison: safe distance 5, follower and leader gap 6, threshold 2,
    /// allowed error 0.5.
    pub fn nominal(speed: f64) -> Self {
        Self {
            speed,
            distance_follower: 6.0,
            distance_leader: 6.0,
            safe_distance: 5.0,
            threshold: 2.0,
            allowed_error: 0.5,
        }
    }

    pub fn validate(&self) -> Result<(), PlatoonError> {
        let fields = [
            ("speed", self.speed),
            ("distance_follower", self.distance_follower),
            ("distance_leader", self.distance_leader),
            ("safe_distance", self.safe_distance),
            ("threshold", self.threshold),
            ("allowed_error", self.allowed_error),
        ];
        for (name, value) in fields {
            if !value.is_finite() || value < 0.0 {
                return Err(PlatoonError::InvalidContext(format!(
                    "{name} must be a finite non-negative number, got {value}"
                )));
            }
        }
        Ok(())
    }

    fn gap_disagreement(&self) -> f64 {
        (self.distance_leader - self.distance_follower).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SystemState {
    S0,
    S1,
    S2,
    S3,
    S4,
    S5,
}

impl SystemState {
    pub const ALL: [SystemState; 6] = [
        SystemState::S0,
        SystemState::S1,
        SystemState::S2,
        SystemState::S3,
        SystemState::S4,
        SystemState::S5,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn label(self) -> &'static str {
        ["S0", "S1", "S2", "S3", "S4", "S5"][self.index()]
    }

    pub fn name(self) -> &'static str {
        match self {
            SystemState::S0 => "Fully Safe",
            SystemState::S1 => "Safe with Uncertainty",
            SystemState::S2 => "Warning",
            SystemState::S3 => "Elevated Risk",
            SystemState::S4 => "High Risk",
            SystemState::S5 => "Critical ML Failure",
        }
    }

    pub fn action(self) -> Action {
        recommended_action(self)
    }
}

impl fmt::Display for SystemState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    ProceedNormal,
    ContinueWithCaution,
    DriveCautiously,
    Decelerate,
    HardBrakeAndFallback,
    #[serde(rename = "fallback-ACC")]
    FallbackAcc,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::ProceedNormal => "proceed-normal",
            Action::ContinueWithCaution => "continue-with-caution",
            Action::DriveCautiously => "drive-cautiously",
            Action::Decelerate => "decelerate",
            Action::HardBrakeAndFallback => "hard-brake-and-fallback",
            Action::FallbackAcc => "fallback-ACC",
        }
    }

    /// Whether the action hands control to the degraded fallback mode.
    pub fn is_fallback(self) -> bool {
        matches!(self, Action::HardBrakeAndFallback | Action::FallbackAcc)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn recommended_action(state: SystemState) -> Action {
    match state {
        SystemState::S0 => Action::ProceedNormal,
        SystemState::S1 => Action::ContinueWithCaution,
        SystemState::S2 => Action::DriveCautiously,
        SystemState::S3 => Action::Decelerate,
        SystemState::S4 => Action::HardBrakeAndFallback,
        SystemState::S5 => Action::FallbackAcc,
    }
}

fn flag(cond: bool, yes: &'static str, no: &'static str) -> &'static str {
    if cond {
        yes
    } else {
        no
    }
}

/// Observed node states for one decision cycle.
pub fn derive_evidence(
    ml_class: TrafficSignClass,
    unreliable: bool,
    ctx: &ContextSignals,
) -> Evidence {
    let limit = class_to_speed_limit(ml_class);
    let distance_ok = ctx.distance_follower >= ctx.safe_distance;
    let deviation_ok = ctx.gap_disagreement() <= ctx.allowed_error;
    let threshold_ok = ctx.gap_disagreement() <= ctx.threshold;
    Evidence::new()
        .with(nodes::SAFEML_STATUS, flag(unreliable, "OOD", "ID"))
        .with(nodes::ML_DECISION, ml_class.to_string())
        .with(
            nodes::SPEED_WITHIN_LIMIT,
            flag(limit.permits(ctx.speed), "within", "over"),
        )
        .with(nodes::COMPARE, flag(distance_ok, "ge", "lt"))
        .with(nodes::SAFE_DISTANCE, flag(distance_ok, "safe", "unsafe"))
        .with(
            nodes::DISTANCE_DEVIATION,
            flag(deviation_ok, "within", "exceeded"),
        )
        .with(
            nodes::COMPARE_THRESHOLD,
            flag(threshold_ok, "within", "exceeded"),
        )
        .with(
            nodes::DETECTION_QUALITY,
            flag(deviation_ok && threshold_ok, "good", "poor"),
        )
}

/// Validates the calibration against the node catalog and returns its network.
pub fn build_platoon_network(cal: &Calibration) -> Result<Network, PlatoonError> {
    cal.build()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemStateAssessment {
    pub posterior: Posterior,
    pub state: SystemState,
    pub action: Action,
}

/// Posterior over S0..S5, its argmax (lowest index on ties) and the action.
pub fn infer_system_state(
    net: &Network,
    evidence: &Evidence,
) -> Result<SystemStateAssessment, PlatoonError> {
    let posterior = query_posterior(net, nodes::SYSTEM_STATE, evidence)?;
    let state =
        SystemState::from_index(posterior.argmax()).ok_or_else(|| PlatoonError::WrongStates {
            node: nodes::SYSTEM_STATE.into(),
            expected: SystemState::ALL
                .iter()
                .map(|s| s.label().to_string())
                .collect(),
            found: posterior.states.clone(),
        })?;
    Ok(SystemStateAssessment {
        posterior,
        state,
        action: recommended_action(state),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn class(c: i64) -> TrafficSignClass {
        TrafficSignClass::new(c).unwrap()
    }

    #[test]
    fn speed_limit_map() {
        assert_eq!(class_to_speed_limit(class(3)), SpeedLimit::Kmh(60));
        assert_eq!(class_to_speed_limit(class(4)), SpeedLimit::Kmh(70));
        assert_eq!(class_to_speed_limit(class(5)), SpeedLimit::Kmh(80));
        assert_eq!(class_to_speed_limit(class(8)), SpeedLimit::Kmh(120));
        assert_eq!(class_to_speed_limit(class(14)), SpeedLimit::NoLimit);
        assert_eq!(class_to_speed_limit(class(6)), SpeedLimit::NoLimit);
        assert!(TrafficSignClass::new(43).is_err());
        assert!(TrafficSignClass::new(-1).is_err());
        for c in TrafficSignClass::all() {
            if let SpeedLimit::Kmh(v) = class_to_speed_limit(c) {
                assert!(SpeedLimit::VALUES.contains(&v));
            }
        }
    }

    #[test]
    fn evidence_speed_compliance() {
        let ev = derive_evidence(class(3), false, &ContextSignals::nominal(90.0));
        assert_eq!(ev.get(nodes::SPEED_WITHIN_LIMIT), Some("over"));
        let ev = derive_evidence(class(4), false, &ContextSignals::nominal(40.0));
        assert_eq!(ev.get(nodes::SPEED_WITHIN_LIMIT), Some("within"));
        assert_eq!(ev.get(nodes::SAFEML_STATUS), Some("ID"));
        assert_eq!(ev.get(nodes::ML_DECISION), Some("4"));
        // Boundary is inclusive.
        let ev = derive_evidence(class(3), true, &ContextSignals::nominal(60.0));
        assert_eq!(ev.get(nodes::SPEED_WITHIN_LIMIT), Some("within"));
        assert_eq!(ev.get(nodes::SAFEML_STATUS), Some("OOD"));
        // Non-speed signs never report overspeed.
        let ev = derive_evidence(class(14), false, &ContextSignals::nominal(250.0));
        assert_eq!(ev.get(nodes::SPEED_WITHIN_LIMIT), Some("within"));
    }

    #[test]
    fn evidence_distances() {
        let mut ctx = ContextSignals::nominal(40.0);
        ctx.distance_follower = ctx.safe_distance;
        ctx.distance_leader = ctx.safe_distance;
        let ev = derive_evidence(class(3), false, &ctx);
        assert_eq!(ev.get(nodes::SAFE_DISTANCE), Some("safe"));
        assert_eq!(ev.get(nodes::DETECTION_QUALITY), Some("good"));

        let ev = derive_evidence(class(3), false, &ContextSignals::nominal(40.0));
        assert_eq!(ev.get(nodes::SAFE_DISTANCE), Some("safe"));

        ctx.distance_follower = 4.0;
        let ev = derive_evidence(class(3), false, &ctx);
        assert_eq!(ev.get(nodes::SAFE_DISTANCE), Some("unsafe"));
        assert_eq!(ev.get(nodes::COMPARE), Some("lt"));
        // |5 - 4| = 1 > 0.5 but <= threshold 2.
        assert_eq!(ev.get(nodes::DISTANCE_DEVIATION), Some("exceeded"));
        assert_eq!(ev.get(nodes::COMPARE_THRESHOLD), Some("within"));
        assert_eq!(ev.get(nodes::DETECTION_QUALITY), Some("poor"));
    }

    #[test]
    fn context_validation() {
        assert!(ContextSignals::new(40.0, 6.0, 6.0, 5.0, 2.0, 0.5).is_ok());
        assert!(ContextSignals::new(-1.0, 6.0, 6.0, 5.0, 2.0, 0.5).is_err());
        assert!(ContextSignals::new(40.0, 6.0, f64::NAN, 5.0, 2.0, 0.5).is_err());
        assert!(ContextSignals::new(40.0, 6.0, 6.0, 5.0, 2.0, -0.1).is_err());
    }

    #[test]
    fn actions() {
        assert_eq!(
            recommended_action(SystemState::S0).as_str(),
            "proceed-normal"
        );
        assert_eq!(
            recommended_action(SystemState::S1).as_str(),
            "continue-with-caution"
        );
        assert_eq!(
            recommended_action(SystemState::S2).as_str(),
            "drive-cautiously"
        );
        assert_eq!(recommended_action(SystemState::S3).as_str(), "decelerate");
        assert_eq!(
            recommended_action(SystemState::S4).as_str(),
            "hard-brake-and-fallback"
        );
        assert_eq!(recommended_action(SystemState::S5).as_str(), "fallback-ACC");
        assert_eq!(
            serde_json::to_string(&Action::FallbackAcc).unwrap(),
            "\"fallback-ACC\""
        );
        assert_eq!(
            serde_json::to_string(&Action::HardBrakeAndFallback).unwrap(),
            "\"hard-brake-and-fallback\""
        );
    }
}
