//! Exhaustive-enumeration posterior, used as an independent check on
//! variable elimination.

use super::inference::normalize;
use super::{BayesNetError, Evidence, Network, Posterior};

/// Largest joint state space the oracle will enumerate.
pub const ORACLE_LIMIT: u64 = 1 << 24;

pub fn brute_force_posterior(
    net: &Network,
    target: &str,
    evidence: &Evidence,
) -> Result<Posterior, BayesNetError> {
    let t = net.node_index(target)?;
    let observed = net.resolve(evidence)?;
    let cards: Vec<usize> = (0..net.len()).map(|i| net.cardinality(i)).collect();
    let configurations: u128 = cards.iter().map(|&c| c as u128).product();
    if configurations > u128::from(ORACLE_LIMIT) {
        return Err(BayesNetError::OracleLimitExceeded {
            configurations,
            limit: ORACLE_LIMIT,
        });
    }

    let mut totals = vec![0.0; cards[t]];
    let mut states = vec![0usize; net.len()];
    for _ in 0..configurations {
        let consistent = observed
            .iter()
            .zip(&states)
            .all(|(o, s)| o.is_none_or(|o| o == *s));
        if consistent {
            let joint: f64 = (0..net.len()).map(|i| net.entry(i, &states)).product();
            totals[states[t]] += joint;
        }
        for k in (0..states.len()).rev() {
            states[k] += 1;
            if states[k] < cards[k] {
                break;
            }
            states[k] = 0;
        }
    }
    normalize(net, t, totals)
}

#[cfg(test)]
mod tests {
    use super::super::{build_network, Cpt, NodeSpec};
    use super::*;

    #[test]
    fn limit_guard() {
        let specs: Vec<NodeSpec> = (0..25)
            .map(|i| NodeSpec::new(format!("N{i}"), ["a", "b"], []))
            .collect();
        let cpts = (0..25)
            .map(|i| Cpt::new(format!("N{i}"), vec![vec![0.5, 0.5]]))
            .collect();
        let net = build_network(specs, cpts).unwrap();
        let err = brute_force_posterior(&net, "N0", &Evidence::new()).unwrap_err();
        assert!(err.to_string().starts_with("oracle limit exceeded"));
    }

    #[test]
    fn marginal_sums_to_one() {
        let net = build_network(
            vec![
                NodeSpec::new("A", ["t", "f"], []),
                NodeSpec::new("B", ["x", "y", "z"], ["A"]),
            ],
            vec![
                Cpt::new("A", vec![vec![0.25, 0.75]]),
                Cpt::new("B", vec![vec![0.2, 0.3, 0.5], vec![0.6, 0.3, 0.1]]),
            ],
        )
        .unwrap();
        let p = brute_force_posterior(&net, "B", &Evidence::new()).unwrap();
        assert!((p.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((p.probabilities[0] - (0.25 * 0.2 + 0.75 * 0.6)).abs() < 1e-12);
    }
}
