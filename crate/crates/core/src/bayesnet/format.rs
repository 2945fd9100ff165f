//! Line-oriented network interchange format.
//!
//! ```text
//! safebn-network v1
//! # comment
//! node Rain
//!   states yes no
//!   row : 0.2 0.8
//! node WetGrass
//!   states yes no
//!   parents Rain
//!   row yes : 0.9 0.1
//!   row no : 0.05 0.95
//! ```
//!
//! The header line comes first. Each `node` block declares `states`, an
//! optional `parents` line and one `row` per parent configuration. A row is
//! keyed by the parent states in declared parent order, then `:`, then one
//! probability per node state. Rows may appear in any order but each
//! configuration exactly once. Nodes may reference parents declared later.
//! Blank lines and text after `#` are ignored.

use std::collections::HashMap;
use std::fmt::Write;

use super::{build_network, BayesNetError, Cpt, Network, NodeSpec};

pub const FORMAT_HEADER: &str = "safebn-network v1";

struct Block {
    line: usize,
    name: String,
    states: Option<Vec<String>>,
    parents: Vec<String>,
    rows: Vec<(usize, Vec<String>, Vec<f64>)>,
}

fn err(line: usize, message: impl Into<String>) -> BayesNetError {
    BayesNetError::Parse {
        line,
        message: message.into(),
    }
}

pub fn parse_network(text: &str) -> Result<Network, BayesNetError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    match lines.next() {
        Some((_, FORMAT_HEADER)) => {}
        Some((line, other)) => {
            return Err(err(
                line,
                format!("expected header {FORMAT_HEADER:?}, found {other:?}"),
            ))
        }
        None => return Err(err(1, "empty document")),
    }

    let mut blocks: Vec<Block> = Vec::new();
    for (line, content) in lines {
        let (keyword, rest) = content
            .split_once(char::is_whitespace)
            .unwrap_or((content, ""));
        let rest = rest.trim();
        if keyword == "node" {
            let mut words = rest.split_whitespace();
            let name = words
                .next()
                .ok_or_else(|| err(line, "node without a name"))?;
            if words.next().is_some() {
                return Err(err(line, "node name must be a single word"));
            }
            blocks.push(Block {
                line,
                name: name.to_string(),
                states: None,
                parents: Vec::new(),
                rows: Vec::new(),
            });
            continue;
        }
        let block = blocks
            .last_mut()
            .ok_or_else(|| err(line, format!("{keyword:?} outside a node block")))?;
        match keyword {
            "states" => {
                if block.states.is_some() {
                    return Err(err(line, "states declared twice"));
                }
                block.states = Some(rest.split_whitespace().map(String::from).collect());
            }
            "parents" => {
                if !block.rows.is_empty() {
                    return Err(err(line, "parents must precede rows"));
                }
                block.parents = rest.split_whitespace().map(String::from).collect();
            }
            "row" => {
                let (key, probs) = rest.split_once(':').ok_or_else(|| {
                    err(
                        line,
                        "row needs ':' between parent states and probabilities",
                    )
                })?;
                let key = key.split_whitespace().map(String::from).collect();
                let probs = probs
                    .split_whitespace()
                    .map(|p| {
                        p.parse::<f64>()
                            .map_err(|_| err(line, format!("bad probability {p:?}")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                block.rows.push((line, key, probs));
            }
            other => return Err(err(line, format!("unknown keyword {other:?}"))),
        }
    }

    let cards: HashMap<&str, &[String]> = blocks
        .iter()
        .filter_map(|b| b.states.as_deref().map(|s| (b.name.as_str(), s)))
        .collect();

    let mut specs = Vec::with_capacity(blocks.len());
    let mut cpts = Vec::with_capacity(blocks.len());
    for block in &blocks {
        let states = block.states.clone().ok_or_else(|| {
            err(
                block.line,
                format!("node {} has no states line", block.name),
            )
        })?;
        let mut parent_states = Vec::with_capacity(block.parents.len());
        for p in &block.parents {
            let s = cards
                .get(p.as_str())
                .ok_or_else(|| BayesNetError::UnknownParent {
                    node: block.name.clone(),
                    parent: p.clone(),
                })?;
            parent_states.push(*s);
        }
        let count: usize = parent_states.iter().map(|s| s.len()).product();
        let mut rows: Vec<Option<Vec<f64>>> = vec![None; count];
        for (line, key, probs) in &block.rows {
            if key.len() != parent_states.len() {
                return Err(err(
                    *line,
                    format!(
                        "row key has {} states, node {} has {} parents",
                        key.len(),
                        block.name,
                        parent_states.len()
                    ),
                ));
            }
            let mut index = 0;
            for ((state, states), parent) in key.iter().zip(&parent_states).zip(&block.parents) {
                let s = states.iter().position(|x| x == state).ok_or_else(|| {
                    err(*line, format!("unknown state {state} for parent {parent}"))
                })?;
                index = index * states.len() + s;
            }
            if rows[index].replace(probs.clone()).is_some() {
                return Err(err(*line, format!("duplicate row for node {}", block.name)));
            }
        }
        if let Some(missing) = rows.iter().position(Option::is_none) {
            return Err(err(
                block.line,
                format!(
                    "node {} is missing the row for configuration {missing}",
                    block.name
                ),
            ));
        }
        specs.push(NodeSpec {
            name: block.name.clone(),
            states,
            parents: block.parents.clone(),
        });
        cpts.push(Cpt::new(
            block.name.clone(),
            rows.into_iter().flatten().collect(),
        ));
    }
    build_network(specs, cpts)
}

/// Renders a network so that [`parse_network`] reproduces it exactly.
pub fn serialize_network(net: &Network) -> String {
    let mut out = String::new();
    out.push_str(FORMAT_HEADER);
    out.push('\n');
    for node in &net.nodes {
        let spec = &node.spec;
        let _ = writeln!(out, "node {}", spec.name);
        let _ = writeln!(out, "  states {}", spec.states.join(" "));
        if !spec.parents.is_empty() {
            let _ = writeln!(out, "  parents {}", spec.parents.join(" "));
        }
        let card = spec.states.len();
        let parent_cards: Vec<usize> = node.parents.iter().map(|&p| net.cardinality(p)).collect();
        for (r, row) in node.table.chunks(card).enumerate() {
            let mut key = Vec::with_capacity(parent_cards.len());
            let mut rem = r;
            for (k, &c) in parent_cards.iter().enumerate().rev() {
                key.push(net.nodes[node.parents[k]].spec.states[rem % c].as_str());
                rem /= c;
            }
            key.reverse();
            let probs: Vec<String> = row.iter().map(f64::to_string).collect();
            let _ = if key.is_empty() {
                writeln!(out, "  row : {}", probs.join(" "))
            } else {
                writeln!(out, "  row {} : {}", key.join(" "), probs.join(" "))
            };
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPRINKLER: &str = "\
safebn-network v1
# classic example
node WetGrass
  states yes no
  parents Rain Sprinkler
  row no no : 0 1
  row yes yes : 0.99 0.01
  row yes no : 0.8 0.2
  row no yes : 0.9 0.1
node Rain
  states yes no
  row : 0.2 0.8   # prior
node Sprinkler
  states yes no
  parents Rain
  row yes : 0.01 0.99
  row no : 0.4 0.6
";

    #[test]
    fn parses_out_of_order_rows_and_forward_parents() {
        let net = parse_network(SPRINKLER).unwrap();
        assert_eq!(net.len(), 3);
        assert_eq!(
            net.cpt_row("WetGrass", &["yes", "no"]).unwrap(),
            &[0.8, 0.2]
        );
        assert_eq!(net.cpt_row("WetGrass", &["no", "no"]).unwrap(), &[0.0, 1.0]);
    }

    #[test]
    fn serialize_round_trip() {
        let net = parse_network(SPRINKLER).unwrap();
        let text = serialize_network(&net);
        let again = parse_network(&text).unwrap();
        assert_eq!(net, again);
        assert_eq!(serialize_network(&again), text);
    }

    #[test]
    fn parse_errors_carry_lines() {
        let missing_row = "safebn-network v1\nnode A\n  states t f\n  parents B\n  row t : 0.5 0.5\nnode B\n  states t f\n  row : 0.5 0.5\n";
        assert!(matches!(
            parse_network(missing_row),
            Err(BayesNetError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_network("node A\n"),
            Err(BayesNetError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_network("safebn-network v1\nstates a b\n"),
            Err(BayesNetError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_network("safebn-network v1\nnode A\n  states t f\n  row : x 1\n"),
            Err(BayesNetError::Parse { line: 4, .. })
        ));
        assert!(matches!(
            parse_network(
                "safebn-network v1\nnode A\n  states t f\n  row : 0.5 0.5\n  row : 0.5 0.5\n"
            ),
            Err(BayesNetError::Parse { line: 5, .. })
        ));
    }

    #[test]
    fn validation_errors_pass_through() {
        let text = "safebn-network v1\nnode A\n  states t f\n  row : 0.5 0.6\n";
        assert!(matches!(
            parse_network(text),
            Err(BayesNetError::RowNotNormalized { .. })
        ));
        let text = "safebn-network v1\nnode A\n  states t f\n  parents Z\n  row x : 0.5 0.5\n";
        assert!(matches!(
            parse_network(text),
            Err(BayesNetError::UnknownParent { .. })
        ));
    }
}
