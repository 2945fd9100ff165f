#![allow(dead_code)]

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use safebn::bayesnet::{build_network, Cpt, Evidence, Network, NodeSpec};

pub const S_LOW_DIST_OOD: [f64; 6] = [0.0242, 0.0285, 0.0638, 0.1254, 0.2172, 0.5408];
pub const S_OOD_OVER: [f64; 6] = [0.0302, 0.0410, 0.0997, 0.1761, 0.2281, 0.4249];
pub const S_ID_OVER: [f64; 6] = [0.1019, 0.0900, 0.2049, 0.3179, 0.2456, 0.0397];
pub const S_ID_SAFE: [f64; 6] = [0.4247, 0.1372, 0.1169, 0.1513, 0.1293, 0.0407];

/// Expected (vector, argmax) per row of the with-monitor table.
pub fn table4_expected() -> Vec<([f64; 6], usize)> {
    let mut rows = Vec::new();
    for v in [
        S_LOW_DIST_OOD,
        S_OOD_OVER,
        S_LOW_DIST_OOD,
        S_LOW_DIST_OOD,
        S_OOD_OVER,
        S_LOW_DIST_OOD,
        S_LOW_DIST_OOD,
        S_LOW_DIST_OOD,
    ] {
        rows.push((v, 5));
    }
    rows.push((S_ID_OVER, 3));
    rows.push((S_ID_SAFE, 0));
    rows
}

/// Expected (vector, argmax) per row of the monitor-disabled table.
pub fn table3_expected() -> Vec<([f64; 6], usize)> {
    vec![
        (S_ID_SAFE, 0),
        (S_ID_OVER, 3),
        (S_ID_SAFE, 0),
        (S_ID_SAFE, 0),
        (S_ID_OVER, 3),
        (S_ID_SAFE, 0),
    ]
}

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Minimum mean |a_i - b_sigma(i)| over every permutation sigma.
pub fn brute_force_matching(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    permute(&mut perm, 0, &mut |p| {
        let cost: f64 = p
            .iter()
            .enumerate()
            .map(|(i, &j)| (a[i] - b[j]).abs())
            .sum();
        best = best.min(cost / n as f64);
    });
    best
}

fn permute(perm: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == perm.len() {
        visit(perm);
        return;
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        permute(perm, k + 1, visit);
        perm.swap(k, i);
    }
}

/// Midpoint-rule integral of |F_a - F_b| on a uniform grid of `cells`
/// over `[lo, hi]`.
pub fn grid_ecdf_integral(a: &[f64], b: &[f64], lo: f64, hi: f64, cells: usize) -> f64 {
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let h = (hi - lo) / cells as f64;
    let (mut ia, mut ib) = (0, 0);
    let mut total = 0.0;
    for k in 0..cells {
        let x = lo + (k as f64 + 0.5) * h;
        while ia < sa.len() && sa[ia] <= x {
            ia += 1;
        }
        while ib < sb.len() && sb[ib] <= x {
            ib += 1;
        }
        total += (ia as f64 / sa.len() as f64 - ib as f64 / sb.len() as f64).abs() * h;
    }
    total
}

/// Random DAG with 1..=max_nodes nodes of 2..=max_states states each.
/// Names are shuffled so lexicographic and topological order differ.
pub fn random_network<R: Rng>(rng: &mut R, max_nodes: usize, max_states: usize) -> Network {
    let n = rng.random_range(1..=max_nodes);
    let mut labels: Vec<usize> = (0..n).collect();
    labels.shuffle(rng);
    let names: Vec<String> = labels.iter().map(|l| format!("V{l}")).collect();
    let cards: Vec<usize> = (0..n).map(|_| rng.random_range(2..=max_states)).collect();

    let mut specs = Vec::new();
    let mut cpts = Vec::new();
    for i in 0..n {
        let mut parents: Vec<usize> = (0..i).filter(|_| rng.random_bool(0.4)).collect();
        parents.shuffle(rng);
        parents.truncate(3);
        let rows: usize = parents.iter().map(|&p| cards[p]).product();
        let states: Vec<String> = (0..cards[i]).map(|s| format!("s{s}")).collect();
        specs.push(NodeSpec {
            name: names[i].clone(),
            states,
            parents: parents.iter().map(|&p| names[p].clone()).collect(),
        });
        cpts.push(Cpt::new(
            names[i].clone(),
            (0..rows).map(|_| random_row(rng, cards[i])).collect(),
        ));
    }
    // Declaration order is irrelevant to the builder.
    specs.reverse();
    build_network(specs, cpts).expect("generated network is valid")
}

pub fn random_row<R: Rng>(rng: &mut R, card: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..card)
        .map(|_| {
            if rng.random_bool(0.1) {
                0.0
            } else {
                rng.random_range(0.01..1.0)
            }
        })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        w[0] = 1.0;
    }
    let sum: f64 = w.iter().sum();
    w.iter().map(|x| x / sum).collect()
}

/// Observes each node with probability `p` in a uniformly random state.
pub fn random_evidence<R: Rng>(rng: &mut R, net: &Network, p: f64) -> Evidence {
    let mut ev = Evidence::new();
    for spec in net.specs() {
        if rng.random_bool(p) {
            let s = rng.random_range(0..spec.states.len());
            ev.set(spec.name.clone(), spec.states[s].clone());
        }
    }
    ev
}

/// Every full assignment of the network, in odometer order.
pub fn all_assignments(net: &Network) -> Vec<Evidence> {
    let specs: Vec<&NodeSpec> = net.specs().collect();
    let mut idx = vec![0usize; specs.len()];
    let mut out = Vec::new();
    loop {
        out.push(
            specs
                .iter()
                .zip(&idx)
                .map(|(s, &i)| (s.name.clone(), s.states[i].clone()))
                .collect(),
        );
        let mut k = 0;
        loop {
            if k == specs.len() {
                return out;
            }
            idx[k] += 1;
            if idx[k] < specs[k].states.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}
