//! Variable elimination.

use std::collections::BTreeSet;

use super::factor::Factor;
use super::{BayesNetError, Evidence, Network, Posterior};

/// How hidden variables are ordered for elimination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EliminationOrder {
    /// Greedy min-fill on the interaction graph, ties broken by node name.
    #[default]
    MinFill,
    /// Plain lexicographic order of node names.
    Lexicographic,
}

/// Exact posterior `P(target | evidence)` using min-fill variable elimination.
pub fn query_posterior(
    net: &Network,
    target: &str,
    evidence: &Evidence,
) -> Result<Posterior, BayesNetError> {
    query_posterior_with(net, target, evidence, EliminationOrder::MinFill)
}

pub fn query_posterior_with(
    net: &Network,
    target: &str,
    evidence: &Evidence,
    order: EliminationOrder,
) -> Result<Posterior, BayesNetError> {
    let t = net.node_index(target)?;
    let observed = net.resolve(evidence)?;

    // Only ancestors of the target and of evidence nodes carry information.
    let relevant = ancestral_set(net, t, &observed);

    let mut factors: Vec<Factor> = Vec::new();
    for (i, node) in net.nodes.iter().enumerate() {
        if !relevant[i] {
            continue;
        }
        let mut vars = node.parents.clone();
        vars.push(i);
        let cards = vars.iter().map(|&v| net.cardinality(v)).collect();
        let mut f = Factor {
            vars,
            cards,
            values: node.table.clone(),
        };
        for (v, state) in observed.iter().enumerate() {
            if let (Some(s), true) = (state, v != t) {
                if f.contains(v) {
                    f = f.reduce(v, *s);
                }
            }
        }
        factors.push(f);
    }

    let hidden: Vec<usize> = (0..net.len())
        .filter(|&i| relevant[i] && i != t && observed[i].is_none())
        .collect();
    let elimination = match order {
        EliminationOrder::MinFill => min_fill_order(net, &factors, &hidden),
        EliminationOrder::Lexicographic => {
            let mut h = hidden;
            h.sort_by(|&a, &b| net.nodes[a].spec.name.cmp(&net.nodes[b].spec.name));
            h
        }
    };

    for var in elimination {
        let (bucket, rest): (Vec<Factor>, Vec<Factor>) =
            factors.into_iter().partition(|f| f.contains(var));
        factors = rest;
        if let Some(merged) = bucket.into_iter().reduce(|a, b| a.product(&b)) {
            factors.push(merged.sum_out(var));
        }
    }

    let result = factors
        .into_iter()
        .fold(Factor::scalar(1.0), |acc, f| acc.product(&f));
    debug_assert_eq!(result.vars, vec![t]);

    let mut unnormalized = result.values;
    if let Some(s) = observed[t] {
        for (k, p) in unnormalized.iter_mut().enumerate() {
            if k != s {
                *p = 0.0;
            }
        }
    }
    normalize(net, t, unnormalized)
}

pub(super) fn normalize(
    net: &Network,
    target: usize,
    mut values: Vec<f64>,
) -> Result<Posterior, BayesNetError> {
    let z: f64 = values.iter().sum();
    if z <= 0.0 {
        return Err(BayesNetError::ZeroProbabilityEvidence);
    }
    for p in &mut values {
        *p /= z;
    }
    let spec = &net.nodes[target].spec;
    Ok(Posterior {
        node: spec.name.clone(),
        states: spec.states.clone(),
        probabilities: values,
    })
}

fn ancestral_set(net: &Network, target: usize, observed: &[Option<usize>]) -> Vec<bool> {
    let mut keep = vec![false; net.len()];
    let mut stack: Vec<usize> = observed
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.map(|_| i))
        .chain(std::iter::once(target))
        .collect();
    while let Some(v) = stack.pop() {
        if !keep[v] {
            keep[v] = true;
            stack.extend(&net.nodes[v].parents);
        }
    }
    keep
}

fn min_fill_order(net: &Network, factors: &[Factor], hidden: &[usize]) -> Vec<usize> {
    let n = net.len();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for f in factors {
        for &a in &f.vars {
            for &b in &f.vars {
                if a != b {
                    adj[a].insert(b);
                }
            }
        }
    }
    let mut remaining: BTreeSet<usize> = hidden.iter().copied().collect();
    let mut order = Vec::with_capacity(hidden.len());
    while !remaining.is_empty() {
        let &next = remaining
            .iter()
            .min_by(|&&a, &&b| {
                fill_in(&adj, a)
                    .cmp(&fill_in(&adj, b))
                    .then_with(|| net.nodes[a].spec.name.cmp(&net.nodes[b].spec.name))
            })
            .expect("non-empty");
        let neighbours: Vec<usize> = adj[next].iter().copied().collect();
        for &a in &neighbours {
            adj[a].remove(&next);
            for &b in &neighbours {
                if a != b {
                    adj[a].insert(b);
                }
            }
        }
        adj[next].clear();
        remaining.remove(&next);
        order.push(next);
    }
    order
}

fn fill_in(adj: &[BTreeSet<usize>], v: usize) -> usize {
    let nb: Vec<usize> = adj[v].iter().copied().collect();
    let mut missing = 0;
    for (k, &a) in nb.iter().enumerate() {
        for &b in &nb[k + 1..] {
            if !adj[a].contains(&b) {
                missing += 1;
            }
        }
    }
    missing
}
