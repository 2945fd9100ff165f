//! CPT calibration for the platoon network.
//!
//! The four SystemState rows with safe distance and good detection are
//! pinned to published posterior vectors. Those are rounded to four decimals,
//! so the rounding residual is spread evenly over the six states. Rows for an
//! unsafe gap or poor detection
//! mix the matching pinned row with a point mass on a higher-risk state:
//!
//! | distance | detection | mix                       |
//! |----------|-----------|---------------------------|
//! | unsafe   | good      | 0.5 · row + 0.5 · S3      |
//! | safe     | poor      | 0.7 · row + 0.3 · S3      |
//! | unsafe   | poor      | 0.4 · row + 0.6 · S4      |
//!
//! A calibration file is a network document followed by `pinned` lines:
//!
//! ```text
//! pinned SystemState ID within pass safe good : 0.4247 0.1372 0.1169 0.1513 0.1293 0.0407
//! ```
//!
//! Loading fails unless all four reference rows are pinned with their exact
//! published values and the matching CPT rows agree to [`PIN_TOLERANCE`].

use std::fmt::Write;
use std::path::Path;

use super::{class_to_speed_limit, nodes, PlatoonError, SpeedLimit, SystemState, TrafficSignClass};
use crate::bayesnet::{build_network, parse_network, serialize_network, Cpt, Network, NodeSpec};

/// Allowed gap between a pinned vector and its (renormalized) CPT row.
pub const PIN_TOLERANCE: f64 = 1e-4;

/// SystemState parent keys (SafeML_Status, SpeedWithinLimit, SpeedCheck,
/// SafeDistance, DetectionQuality) and the published S0..S5 vectors.
pub const PAPER_PINNED_ROWS: [([&str; 5], [f64; 6]); 4] = [
    (
        ["ID", "within", "pass", "safe", "good"],
        [0.4247, 0.1372, 0.1169, 0.1513, 0.1293, 0.0407],
    ),
    (
        ["ID", "over", "fail", "safe", "good"],
        [0.1019, 0.0900, 0.2049, 0.3179, 0.2456, 0.0397],
    ),
    (
        ["OOD", "within", "fail", "safe", "good"],
        [0.0242, 0.0285, 0.0638, 0.1254, 0.2172, 0.5408],
    ),
    (
        ["OOD", "over", "fail", "safe", "good"],
        [0.0302, 0.0410, 0.0997, 0.1761, 0.2281, 0.4249],
    ),
];

const SYSTEM_STATE_PARENTS: [&str; 5] = [
    nodes::SAFEML_STATUS,
    nodes::SPEED_WITHIN_LIMIT,
    nodes::SPEED_CHECK,
    nodes::SAFE_DISTANCE,
    nodes::DETECTION_QUALITY,
];

#[derive(Debug, Clone, PartialEq)]
pub struct PinnedRow {
    pub node: String,
    pub key: Vec<String>,
    pub probabilities: Vec<f64>,
}

impl PinnedRow {
    fn describe(&self) -> String {
        format!("{}[{}]", self.node, self.key.join(" "))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    specs: Vec<NodeSpec>,
    cpts: Vec<Cpt>,
    pinned: Vec<PinnedRow>,
}

fn states(labels: &[&str]) -> Vec<String> {
    labels.iter().map(|s| s.to_string()).collect()
}

fn deterministic(card: usize, pick: impl Fn(usize) -> usize, rows: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|r| {
            let mut row = vec![0.0; card];
            row[pick(r)] = 1.0;
            row
        })
        .collect()
}

/// Spreads the rounding residual evenly so every entry keeps its
/// four-decimal value.
fn normalized(v: [f64; 6]) -> [f64; 6] {
    let residual = (1.0 - v.iter().sum::<f64>()) / v.len() as f64;
    v.map(|p| p + residual)
}

fn speed_limit_states() -> Vec<String> {
    SpeedLimit::VALUES
        .iter()
        .map(|v| SpeedLimit::Kmh(*v).label())
        .chain(std::iter::once(SpeedLimit::NoLimit.label()))
        .collect()
}

/// SystemState row for a parent configuration under the mixing scheme.
fn system_state_row(
    ood: bool,
    within: bool,
    distance_safe: bool,
    detection_good: bool,
) -> Vec<f64> {
    let pinned = PAPER_PINNED_ROWS
        .iter()
        .find(|(key, _)| key[0] == if ood { "OOD" } else { "ID" } && (key[1] == "within") == within)
        .map(|(_, v)| normalized(*v))
        .expect("four pinned configurations");
    let (weight, target) = match (distance_safe, detection_good) {
        (true, true) => return pinned.to_vec(),
        (false, true) => (0.5, SystemState::S3),
        (true, false) => (0.3, SystemState::S3),
        (false, false) => (0.6, SystemState::S4),
    };
    let mut row: Vec<f64> = pinned.iter().map(|p| (1.0 - weight) * p).collect();
    row[target.index()] += weight;
    row
}

impl Calibration {
    /// The shipped calibration.
    pub fn builtin() -> Self {
        let ml_states: Vec<String> = TrafficSignClass::all().map(|c| c.to_string()).collect();
        let limit_states = speed_limit_states();
        let n_classes = ml_states.len();

        let mut specs = Vec::new();
        let mut cpts = Vec::new();
        let mut add = |spec: NodeSpec, rows: Vec<Vec<f64>>| {
            cpts.push(Cpt::new(spec.name.clone(), rows));
            specs.push(spec);
        };

        add(
            NodeSpec {
                name: nodes::ML_DECISION.into(),
                states: ml_states,
                parents: vec![],
            },
            vec![vec![1.0 / n_classes as f64; n_classes]],
        );
        add(
            NodeSpec::new(nodes::SAFEML_STATUS, ["ID", "OOD"], []),
            vec![vec![0.95, 0.05]],
        );
        let limits: Vec<usize> = TrafficSignClass::all()
            .map(|c| {
                let label = class_to_speed_limit(c).label();
                limit_states
                    .iter()
                    .position(|s| *s == label)
                    .expect("known limit")
            })
            .collect();
        add(
            NodeSpec {
                name: nodes::SPEED_LIMIT.into(),
                states: limit_states.clone(),
                parents: vec![nodes::ML_DECISION.into()],
            },
            deterministic(limit_states.len(), |r| limits[r], n_classes),
        );
        add(
            NodeSpec::new(
                nodes::SPEED_WITHIN_LIMIT,
                ["within", "over"],
                [nodes::SPEED_LIMIT],
            ),
            vec![vec![0.9, 0.1]; limit_states.len()],
        );
        // Rows: (ID, within), (ID, over), (OOD, within), (OOD, over).
        add(
            NodeSpec::new(
                nodes::SPEED_CHECK,
                ["pass", "fail"],
                [nodes::SAFEML_STATUS, nodes::SPEED_WITHIN_LIMIT],
            ),
            deterministic(2, |r| usize::from(r != 0), 4),
        );
        add(
            NodeSpec::new(nodes::COMPARE, ["ge", "lt"], []),
            vec![vec![0.9, 0.1]],
        );
        add(
            NodeSpec::new(nodes::SAFE_DISTANCE, ["safe", "unsafe"], [nodes::COMPARE]),
            deterministic(2, |r| r, 2),
        );
        add(
            NodeSpec::new(nodes::DISTANCE_DEVIATION, ["within", "exceeded"], []),
            vec![vec![0.9, 0.1]],
        );
        add(
            NodeSpec::new(nodes::COMPARE_THRESHOLD, ["within", "exceeded"], []),
            vec![vec![0.95, 0.05]],
        );
        add(
            NodeSpec::new(
                nodes::DETECTION_QUALITY,
                ["good", "poor"],
                [nodes::DISTANCE_DEVIATION, nodes::COMPARE_THRESHOLD],
            ),
            deterministic(2, |r| usize::from(r != 0), 4),
        );
        add(
            NodeSpec::new(
                nodes::IS_IT_SAFE,
                ["yes", "no"],
                [
                    nodes::SPEED_CHECK,
                    nodes::SAFE_DISTANCE,
                    nodes::DETECTION_QUALITY,
                ],
            ),
            deterministic(2, |r| usize::from(r != 0), 8),
        );

        // Parent order: SafeML, within, check, distance, detection (last fastest).
        let mut rows = Vec::with_capacity(32);
        for ood in [false, true] {
            for within in [true, false] {
                for _check in 0..2 {
                    for distance_safe in [true, false] {
                        for detection_good in [true, false] {
                            rows.push(system_state_row(ood, within, distance_safe, detection_good));
                        }
                    }
                }
            }
        }
        add(
            NodeSpec {
                name: nodes::SYSTEM_STATE.into(),
                states: SystemState::ALL
                    .iter()
                    .map(|s| s.label().to_string())
                    .collect(),
                parents: states(&SYSTEM_STATE_PARENTS),
            },
            rows,
        );

        let pinned = PAPER_PINNED_ROWS
            .iter()
            .map(|(key, v)| PinnedRow {
                node: nodes::SYSTEM_STATE.into(),
                key: states(key),
                probabilities: v.to_vec(),
            })
            .collect();
        Self {
            specs,
            cpts,
            pinned,
        }
    }

    pub fn from_parts(specs: Vec<NodeSpec>, cpts: Vec<Cpt>, pinned: Vec<PinnedRow>) -> Self {
        Self {
            specs,
            cpts,
            pinned,
        }
    }

    pub fn into_parts(self) -> (Vec<NodeSpec>, Vec<Cpt>, Vec<PinnedRow>) {
        (self.specs, self.cpts, self.pinned)
    }

    pub fn pinned(&self) -> &[PinnedRow] {
        &self.pinned
    }

    /// Parses and fully validates a calibration document.
    pub fn parse(text: &str) -> Result<Self, PlatoonError> {
        let mut network_text = String::with_capacity(text.len());
        let mut pinned = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let content = line.split('#').next().unwrap_or("").trim();
            if let Some(rest) = content
                .strip_prefix("pinned")
                .filter(|r| r.starts_with(char::is_whitespace))
            {
                pinned.push(parse_pinned(i + 1, rest)?);
                network_text.push('\n');
            } else {
                network_text.push_str(line);
                network_text.push('\n');
            }
        }
        let net = parse_network(&network_text)?;
        let cal = Self {
            specs: net.specs().cloned().collect(),
            cpts: net.cpts(),
            pinned,
        };
        cal.build()?;
        Ok(cal)
    }

    pub fn load(path: &Path) -> Result<Self, PlatoonError> {
        let text = std::fs::read_to_string(path).map_err(|source| PlatoonError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Renders the calibration document.
    pub fn to_text(&self) -> Result<String, PlatoonError> {
        let net = build_network(self.specs.clone(), self.cpts.clone())?;
        let mut out = String::from(
            "# Platoon safety network calibration.\n\
             # SystemState rows for safe distance + good detection are pinned below;\n\
             # the remaining rows mix a pinned row toward S3 (unsafe gap 0.5, poor detection 0.3)\n\
             # or toward S4 (both, 0.6).\n",
        );
        out.push_str(&serialize_network(&net));
        for row in &self.pinned {
            let probs: Vec<String> = row.probabilities.iter().map(f64::to_string).collect();
            let _ = writeln!(
                out,
                "pinned {} {} : {}",
                row.node,
                row.key.join(" "),
                probs.join(" ")
            );
        }
        Ok(out)
    }

    pub(super) fn build(&self) -> Result<Network, PlatoonError> {
        let net = build_network(self.specs.clone(), self.cpts.clone())?;
        check_catalog(&net)?;
        self.check_pins(&net)?;
        Ok(net)
    }

    fn check_pins(&self, net: &Network) -> Result<(), PlatoonError> {
        for (key, reference) in PAPER_PINNED_ROWS {
            let expected = PinnedRow {
                node: nodes::SYSTEM_STATE.into(),
                key: states(&key),
                probabilities: reference.to_vec(),
            };
            let found = self
                .pinned
                .iter()
                .find(|p| p.node == expected.node && p.key == expected.key)
                .ok_or_else(|| PlatoonError::PinnedRowMissing(expected.describe()))?;
            if found.probabilities != expected.probabilities {
                return Err(PlatoonError::PinnedRowAltered(expected.describe()));
            }
        }
        for pin in &self.pinned {
            let key: Vec<&str> = pin.key.iter().map(String::as_str).collect();
            let row = net.cpt_row(&pin.node, &key)?;
            if row.len() != pin.probabilities.len() {
                return Err(PlatoonError::PinnedRowAltered(pin.describe()));
            }
            for (state, (&cpt, &pinned)) in row.iter().zip(&pin.probabilities).enumerate() {
                if (cpt - pinned).abs() > PIN_TOLERANCE {
                    return Err(PlatoonError::CalibrationDrift {
                        key: pin.describe(),
                        state,
                        cpt,
                        pinned,
                    });
                }
            }
        }
        Ok(())
    }
}

fn parse_pinned(line: usize, rest: &str) -> Result<PinnedRow, PlatoonError> {
    let bad = |message: &str| PlatoonError::Pinned {
        line,
        message: message.to_string(),
    };
    let (head, probs) = rest
        .split_once(':')
        .ok_or_else(|| bad("pinned row needs ':' before the probabilities"))?;
    let mut words = head.split_whitespace();
    let node = words
        .next()
        .ok_or_else(|| bad("pinned row without a node"))?;
    let key = words.map(String::from).collect();
    let probabilities = probs
        .split_whitespace()
        .map(|p| {
            p.parse::<f64>()
                .map_err(|_| bad(&format!("bad probability {p:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PinnedRow {
        node: node.to_string(),
        key,
        probabilities,
    })
}

fn check_catalog(net: &Network) -> Result<(), PlatoonError> {
    let ml_states: Vec<String> = TrafficSignClass::all().map(|c| c.to_string()).collect();
    let ss_states: Vec<String> = SystemState::ALL
        .iter()
        .map(|s| s.label().to_string())
        .collect();
    let catalog: Vec<(&str, Vec<String>, Vec<String>)> = vec![
        (nodes::ML_DECISION, ml_states, vec![]),
        (nodes::SAFEML_STATUS, states(&["ID", "OOD"]), vec![]),
        (
            nodes::SPEED_LIMIT,
            speed_limit_states(),
            states(&[nodes::ML_DECISION]),
        ),
        (
            nodes::SPEED_WITHIN_LIMIT,
            states(&["within", "over"]),
            states(&[nodes::SPEED_LIMIT]),
        ),
        (
            nodes::SPEED_CHECK,
            states(&["pass", "fail"]),
            states(&[nodes::SAFEML_STATUS, nodes::SPEED_WITHIN_LIMIT]),
        ),
        (nodes::COMPARE, states(&["ge", "lt"]), vec![]),
        (
            nodes::SAFE_DISTANCE,
            states(&["safe", "unsafe"]),
            states(&[nodes::COMPARE]),
        ),
        (
            nodes::DISTANCE_DEVIATION,
            states(&["within", "exceeded"]),
            vec![],
        ),
        (
            nodes::COMPARE_THRESHOLD,
            states(&["within", "exceeded"]),
            vec![],
        ),
        (
            nodes::DETECTION_QUALITY,
            states(&["good", "poor"]),
            states(&[nodes::DISTANCE_DEVIATION, nodes::COMPARE_THRESHOLD]),
        ),
        (
            nodes::IS_IT_SAFE,
            states(&["yes", "no"]),
            states(&[
                nodes::SPEED_CHECK,
                nodes::SAFE_DISTANCE,
                nodes::DETECTION_QUALITY,
            ]),
        ),
        (
            nodes::SYSTEM_STATE,
            ss_states,
            states(&SYSTEM_STATE_PARENTS),
        ),
    ];
    for (name, expected_states, expected_parents) in catalog {
        let spec = net
            .spec(name)
            .ok_or_else(|| PlatoonError::MissingNode(name.to_string()))?;
        if spec.states != expected_states {
            return Err(PlatoonError::WrongStates {
                node: name.to_string(),
                expected: expected_states,
                found: spec.states.clone(),
            });
        }
        if spec.parents != expected_parents {
            return Err(PlatoonError::WrongParents {
                node: name.to_string(),
                expected: expected_parents,
                found: spec.parents.clone(),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayesnet::BayesNetError;

    #[test]
    fn builtin_builds_and_round_trips() {
        let cal = Calibration::builtin();
        let net = cal.build().unwrap();
        let text = cal.to_text().unwrap();
        let again = Calibration::parse(&text).unwrap();
        assert_eq!(again.build().unwrap(), net);
        assert_eq!(again.to_text().unwrap(), text);
    }

    #[test]
    fn system_state_parents() {
        let net = Calibration::builtin().build().unwrap();
        let parents = &net.spec(nodes::SYSTEM_STATE).unwrap().parents;
        assert!(parents.iter().any(|p| p == nodes::SAFEML_STATUS));
        assert!(parents.iter().any(|p| p == nodes::SPEED_CHECK));
    }

    #[test]
    fn five_entry_system_state_row_is_a_shape_error() {
        let (specs, mut cpts, pinned) = Calibration::builtin().into_parts();
        let ss = cpts
            .iter_mut()
            .find(|c| c.node == nodes::SYSTEM_STATE)
            .unwrap();
        ss.rows[7] = vec![0.2; 5];
        let err = Calibration::from_parts(specs, cpts, pinned)
            .build()
            .unwrap_err();
        assert!(matches!(
            err,
            PlatoonError::Network(BayesNetError::RowLength {
                row: 7,
                expected: 6,
                found: 5,
                ..
            })
        ));
    }

    #[test]
    fn pins_guard_against_drift() {
        let text = Calibration::builtin().to_text().unwrap();

        let without: String = text
            .lines()
            .filter(|l| !l.contains("pinned SystemState OOD within"))
            .map(|l| format!("{l}\n"))
            .collect();
        assert!(matches!(
            Calibration::parse(&without),
            Err(PlatoonError::PinnedRowMissing(_))
        ));

        let altered = text.replace(
            ": 0.0242 0.0285 0.0638 0.1254 0.2172 0.5408",
            ": 0.0242 0.0285 0.0638 0.1254 0.2072 0.5508",
        );
        assert_ne!(altered, text);
        assert!(matches!(
            Calibration::parse(&altered),
            Err(PlatoonError::PinnedRowAltered(_))
        ));

        let (specs, mut cpts, pinned) = Calibration::builtin().into_parts();
        let ss = cpts
            .iter_mut()
            .find(|c| c.node == nodes::SYSTEM_STATE)
            .unwrap();
        ss.rows[0] = vec![0.5, 0.1, 0.1, 0.1, 0.1, 0.1];
        assert!(matches!(
            Calibration::from_parts(specs, cpts, pinned).build(),
            Err(PlatoonError::CalibrationDrift { state: 0, .. })
        ));
    }

    #[test]
    fn mixing_rows_are_normalized_and_monotone() {
        for ood in [false, true] {
            for within in [true, false] {
                for d in [true, false] {
                    for q in [true, false] {
                        let row = system_state_row(ood, within, d, q);
                        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    }
                }
            }
        }
    }
}
