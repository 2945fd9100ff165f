//! Discrete Bayesian networks with exact inference.
//!
//! A [`Network`] is an immutable, validated DAG of categorical variables,
//! each with a conditional probability table indexed row-major over its
//! parents' states (last parent varies fastest). The joint distribution is
//! the product of the CPT entries selected by an assignment.

mod factor;
mod format;
mod inference;
mod oracle;

pub use format::{parse_network, serialize_network, FORMAT_HEADER};
pub use inference::{query_posterior, query_posterior_with, EliminationOrder};
pub use oracle::{brute_force_posterior, ORACLE_LIMIT};

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on CPT row sums.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BayesNetError {
    #[error("duplicate node {0}")]
    DuplicateNode(String),
    #[error("invalid identifier {0:?} (must be non-empty, without whitespace, ':' or '#')")]
    InvalidIdentifier(String),
    #[error("node {node} needs at least two states, has {count}")]
    TooFewStates { node: String, count: usize },
    #[error("node {node} lists state {state} more than once")]
    DuplicateState { node: String, state: String },
    #[error("node {node} lists itself as a parent")]
    SelfParent { node: String },
    #[error("node {node} lists parent {parent} more than once")]
    DuplicateParent { node: String, parent: String },
    #[error("unknown parent {parent} of node {node}")]
    UnknownParent { node: String, parent: String },
    #[error("cycle detected: {}", chain.join(" -> "))]
    Cycle { chain: Vec<String> },
    #[error("no CPT for node {0}")]
    MissingCpt(String),
    #[error("more than one CPT for node {0}")]
    DuplicateCpt(String),
    #[error("CPT given for unknown node {0}")]
    CptForUnknownNode(String),
    #[error("CPT of node {node} has {found} rows, expected {expected}")]
    RowCount {
        node: String,
        expected: usize,
        found: usize,
    },
    #[error("CPT row {row} of node {node} has {found} entries, expected {expected}")]
    RowLength {
        node: String,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("CPT row {row} of node {node} has entry {value} outside [0, 1]")]
    EntryOutOfRange {
        node: String,
        row: usize,
        value: f64,
    },
    #[error("CPT row {row} of node {node} sums to {sum} ≠ 1")]
    RowNotNormalized { node: String, row: usize, sum: f64 },
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("unknown state {state} for node {node}")]
    UnknownState { node: String, state: String },
    #[error("assignment is missing node {0}")]
    MissingAssignment(String),
    #[error("evidence has zero probability")]
    ZeroProbabilityEvidence,
    #[error("oracle limit exceeded: {configurations} configurations > {limit}")]
    OracleLimitExceeded { configurations: u128, limit: u64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub name: String,
    pub states: Vec<String>,
    pub parents: Vec<String>,
}

impl NodeSpec {
    pub fn new<S: Into<String>>(
        name: impl Into<String>,
        states: impl IntoIterator<Item = S>,
        parents: impl IntoIterator<Item = S>,
    ) -> Self {
        Self {
            name: name.into(),
            states: states.into_iter().map(Into::into).collect(),
            parents: parents.into_iter().map(Into::into).collect(),
        }
    }
}

/// One distribution over the node's states per parent configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cpt {
    pub node: String,
    pub rows: Vec<Vec<f64>>,
}

impl Cpt {
    pub fn new(node: impl Into<String>, rows: Vec<Vec<f64>>) -> Self {
        Self {
            node: node.into(),
            rows,
        }
    }
}

/// Observed states keyed by node name. Also used for full assignments.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Evidence(BTreeMap<String, String>);

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, node: impl Into<String>, state: impl Into<String>) -> Self {
        self.set(node, state);
        self
    }

    pub fn set(&mut self, node: impl Into<String>, state: impl Into<String>) {
        self.0.insert(node.into(), state.into());
    }

    pub fn get(&self, node: &str) -> Option<&str> {
        self.0.get(node).map(String::as_str)
    }

    pub fn remove(&mut self, node: &str) -> Option<String> {
        self.0.remove(node)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<K: Into<String>, V: Into<String>> FromIterator<(K, V)> for Evidence {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        Self(
            iter.into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub node: String,
    pub states: Vec<String>,
    pub probabilities: Vec<f64>,
}

impl Posterior {
    pub fn probability(&self, state: &str) -> Option<f64> {
        self.states
            .iter()
            .position(|s| s == state)
            .map(|i| self.probabilities[i])
    }

    /// Index of the most probable state; the lowest index wins ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probabilities.iter().enumerate().skip(1) {
            if p > self.probabilities[best] {
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Node {
    spec: NodeSpec,
    parents: Vec<usize>,
    /// Rows concatenated, `row * cardinality + state`.
    table: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Network {
    nodes: Vec<Node>,
    index: HashMap<String, usize>,
    topo: Vec<usize>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
    }
}

fn valid_identifier(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(|c| c.is_whitespace() || c == ':' || c == '#')
}

/// Validates node specs and CPTs and assembles a [`Network`].
pub fn build_network(specs: Vec<NodeSpec>, cpts: Vec<Cpt>) -> Result<Network, BayesNetError> {
    let mut index = HashMap::with_capacity(specs.len());
    for (i, spec) in specs.iter().enumerate() {
        if !valid_identifier(&spec.name) {
            return Err(BayesNetError::InvalidIdentifier(spec.name.clone()));
        }
        if index.insert(spec.name.clone(), i).is_some() {
            return Err(BayesNetError::DuplicateNode(spec.name.clone()));
        }
        if spec.states.len() < 2 {
            return Err(BayesNetError::TooFewStates {
                node: spec.name.clone(),
                count: spec.states.len(),
            });
        }
        for (k, state) in spec.states.iter().enumerate() {
            if !valid_identifier(state) {
                return Err(BayesNetError::InvalidIdentifier(state.clone()));
            }
            if spec.states[..k].contains(state) {
                return Err(BayesNetError::DuplicateState {
                    node: spec.name.clone(),
                    state: state.clone(),
                });
            }
        }
    }

    let mut parent_idx = Vec::with_capacity(specs.len());
    for spec in &specs {
        let mut ps = Vec::with_capacity(spec.parents.len());
        for (k, parent) in spec.parents.iter().enumerate() {
            if parent == &spec.name {
                return Err(BayesNetError::SelfParent {
                    node: spec.name.clone(),
                });
            }
            if spec.parents[..k].contains(parent) {
                return Err(BayesNetError::DuplicateParent {
                    node: spec.name.clone(),
                    parent: parent.clone(),
                });
            }
            let &p = index
                .get(parent)
                .ok_or_else(|| BayesNetError::UnknownParent {
                    node: spec.name.clone(),
                    parent: parent.clone(),
                })?;
            ps.push(p);
        }
        parent_idx.push(ps);
    }

    let topo = topological_order(&specs, &parent_idx)?;

    let mut tables: Vec<Option<Vec<f64>>> = vec![None; specs.len()];
    for cpt in cpts {
        let &i = index
            .get(&cpt.node)
            .ok_or_else(|| BayesNetError::CptForUnknownNode(cpt.node.clone()))?;
        if tables[i].is_some() {
            return Err(BayesNetError::DuplicateCpt(cpt.node));
        }
        let card = specs[i].states.len();
        let expected: usize = parent_idx[i]
            .iter()
            .map(|&p| specs[p].states.len())
            .product();
        if cpt.rows.len() != expected {
            return Err(BayesNetError::RowCount {
                node: cpt.node,
                expected,
                found: cpt.rows.len(),
            });
        }
        let mut table = Vec::with_capacity(expected * card);
        for (r, row) in cpt.rows.iter().enumerate() {
            if row.len() != card {
                return Err(BayesNetError::RowLength {
                    node: cpt.node.clone(),
                    row: r,
                    expected: card,
                    found: row.len(),
                });
            }
            if let Some(&value) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(BayesNetError::EntryOutOfRange {
                    node: cpt.node.clone(),
                    row: r,
                    value,
                });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
                return Err(BayesNetError::RowNotNormalized {
                    node: cpt.node.clone(),
                    row: r,
                    sum,
                });
            }
            table.extend_from_slice(row);
        }
        tables[i] = Some(table);
    }

    let nodes = specs
        .into_iter()
        .zip(parent_idx)
        .zip(tables)
        .map(|((spec, parents), table)| {
            let table = table.ok_or_else(|| BayesNetError::MissingCpt(spec.name.clone()))?;
            Ok(Node {
                spec,
                parents,
                table,
            })
        })
        .collect::<Result<Vec<_>, BayesNetError>>()?;

    Ok(Network { nodes, index, topo })
}

/// Depth-first topological sort; on failure reports the offending chain.
fn topological_order(
    specs: &[NodeSpec],
    parents: &[Vec<usize>],
) -> Result<Vec<usize>, BayesNetError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let mut mark = vec![Mark::New; specs.len()];
    let mut order = Vec::with_capacity(specs.len());
    let mut path = Vec::new();

    fn visit(
        v: usize,
        parents: &[Vec<usize>],
        mark: &mut [Mark],
        order: &mut Vec<usize>,
        path: &mut Vec<usize>,
    ) -> Result<(), Vec<usize>> {
        match mark[v] {
            Mark::Done => return Ok(()),
            Mark::Active => {
                let start = path.iter().position(|&p| p == v).unwrap_or(0);
                let mut chain = path[start..].to_vec();
                chain.push(v);
                return Err(chain);
            }
            Mark::New => {}
        }
        mark[v] = Mark::Active;
        path.push(v);
        for &p in &parents[v] {
            visit(p, parents, mark, order, path)?;
        }
        path.pop();
        mark[v] = Mark::Done;
        order.push(v);
        Ok(())
    }

    for v in 0..specs.len() {
        visit(v, parents, &mut mark, &mut order, &mut path).map_err(|chain| {
            // The walk follows child -> parent edges; report parent -> child.
            let mut names: Vec<String> = chain.iter().map(|&i| specs[i].name.clone()).collect();
            names.reverse();
            BayesNetError::Cycle { chain: names }
        })?;
    }
    Ok(order)
}

impl Network {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_names(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(|n| n.spec.name.as_str())
    }

    pub fn spec(&self, name: &str) -> Option<&NodeSpec> {
        self.index.get(name).map(|&i| &self.nodes[i].spec)
    }

    pub fn specs(&self) -> impl Iterator<Item = &NodeSpec> {
        self.nodes.iter().map(|n| &n.spec)
    }

    pub fn cpt(&self, name: &str) -> Option<Cpt> {
        let &i = self.index.get(name)?;
        let node = &self.nodes[i];
        let card = node.spec.states.len();
        Some(Cpt::new(
            name,
            node.table.chunks(card).map(<[f64]>::to_vec).collect(),
        ))
    }

    pub fn cpts(&self) -> Vec<Cpt> {
        self.node_names()
            .map(|n| self.cpt(n).expect("own node"))
            .collect()
    }

    /// The CPT row selected by the given parent states (in declared parent order).
    pub fn cpt_row(&self, name: &str, parent_states: &[&str]) -> Result<&[f64], BayesNetError> {
        let &i = self
            .index
            .get(name)
            .ok_or_else(|| BayesNetError::UnknownNode(name.to_string()))?;
        let node = &self.nodes[i];
        if parent_states.len() != node.parents.len() {
            return Err(BayesNetError::RowLength {
                node: name.to_string(),
                row: 0,
                expected: node.parents.len(),
                found: parent_states.len(),
            });
        }
        let mut row = 0;
        for (&p, &state) in node.parents.iter().zip(parent_states) {
            let parent = &self.nodes[p].spec;
            let s = state_index(parent, state)?;
            row = row * parent.states.len() + s;
        }
        let card = node.spec.states.len();
        Ok(&node.table[row * card..(row + 1) * card])
    }

    /// Node names in an order where every parent precedes its children.
    pub fn topological_names(&self) -> Vec<&str> {
        self.topo
            .iter()
            .map(|&i| self.nodes[i].spec.name.as_str())
            .collect()
    }

    fn node_index(&self, name: &str) -> Result<usize, BayesNetError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| BayesNetError::UnknownNode(name.to_string()))
    }

    fn cardinality(&self, i: usize) -> usize {
        self.nodes[i].spec.states.len()
    }

    fn entry(&self, i: usize, states: &[usize]) -> f64 {
        let node = &self.nodes[i];
        let mut row = 0;
        for &p in &node.parents {
            row = row * self.cardinality(p) + states[p];
        }
        node.table[row * self.cardinality(i) + states[i]]
    }

    /// Evidence as per-node observed state indices.
    fn resolve(&self, evidence: &Evidence) -> Result<Vec<Option<usize>>, BayesNetError> {
        let mut observed = vec![None; self.nodes.len()];
        for (name, state) in evidence.iter() {
            let i = self.node_index(name)?;
            observed[i] = Some(state_index(&self.nodes[i].spec, state)?);
        }
        Ok(observed)
    }
}

fn state_index(spec: &NodeSpec, state: &str) -> Result<usize, BayesNetError> {
    spec.states
        .iter()
        .position(|s| s == state)
        .ok_or_else(|| BayesNetError::UnknownState {
            node: spec.name.clone(),
            state: state.to_string(),
        })
}

/// Chain-rule product of CPT entries for a complete assignment.
pub fn joint_probability(net: &Network, assignment: &Evidence) -> Result<f64, BayesNetError> {
    let observed = net.resolve(assignment)?;
    let states = observed
        .iter()
        .enumerate()
        .map(|(i, s)| {
            s.ok_or_else(|| BayesNetError::MissingAssignment(net.nodes[i].spec.name.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((0..net.nodes.len())
        .map(|i| net.entry(i, &states))
        .product())
}
