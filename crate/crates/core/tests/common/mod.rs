//! Oracles shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use std::collections::BTreeMap;

use foresight::distmodel::{ActionSet, DistributionFamily};
use foresight::goals::{Goal, PrefixStatus};

/// A fully enumerated tree: action sets keyed by path.
pub type Tree = BTreeMap<Vec<u64>, ActionSet>;

/// Every tree of the given depth with its probability, for families whose
/// stage laws have no tail.
pub fn all_trees(family: &DistributionFamily, depth: usize) -> Vec<(Tree, f64)> {
    let mut out = vec![(Tree::new(), 1.0)];
    let frontier_of = |tree: &Tree, d: usize| -> Vec<Vec<u64>> {
        if d == 0 {
            return vec![vec![]];
        }
        tree.iter()
            .filter(|(p, _)| p.len() == d - 1)
            .flat_map(|(p, s)| {
                s.iter().map(move |a| {
                    let mut q = p.clone();
                    q.push(a);
                    q
                })
            })
            .collect()
    };
    for d in 0..depth {
        let law = family.stage(d).unwrap();
        assert_eq!(law.tail_mass(), 0.0);
        let mut next = Vec::new();
        for (tree, w) in out {
            let mut partial = vec![(tree.clone(), w)];
            for node in frontier_of(&tree, d) {
                partial = partial
                    .into_iter()
                    .flat_map(|(t, w)| {
                        let node = node.clone();
                        law.atoms().iter().filter(|a| a.mass > 0.0).map(move |a| {
                            let mut t2 = t.clone();
                            t2.insert(node.clone(), (*a.set).clone());
                            (t2, w * a.mass)
                        })
                    })
                    .collect();
            }
            next.extend(partial);
        }
        out = next;
    }
    out
}

/// Text key of the `m + 1` generations below `node`.
fn cone_key(tree: &Tree, node: &[u64], m: usize) -> String {
    tree.range(node.to_vec()..)
        .take_while(|(p, _)| p.starts_with(node))
        .filter(|(p, _)| p.len() <= node.len() + m)
        .map(|(p, s)| format!("{:?}={};", &p[node.len()..], s))
        .collect()
}

/// Best success probability over deterministic tables mapping
/// `(stage, revealed cone)` to an action, by exhaustive search.
pub fn brute_force_value(family: &DistributionFamily, goal: &Goal, m: usize, horizon: usize) -> f64 {
    let trees = all_trees(family, horizon + m);
    let mut slots: Vec<Vec<u64>> = Vec::new();
    let mut ids: BTreeMap<(usize, String), usize> = BTreeMap::new();
    // Per tree: slot of every node above the horizon.
    let indexed: Vec<(BTreeMap<Vec<u64>, usize>, f64)> = trees
        .iter()
        .map(|(tree, w)| {
            let nodes = tree
                .iter()
                .filter(|(p, _)| p.len() < horizon)
                .map(|(p, s)| {
                    let id = *ids.entry((p.len(), cone_key(tree, p, m))).or_insert_with(|| {
                        slots.push(s.iter().collect());
                        slots.len() - 1
                    });
                    (p.clone(), id)
                })
                .collect();
            (nodes, *w)
        })
        .collect();
    let total: u64 = slots.iter().map(|s| s.len() as u64).product();
    assert!(total <= 1 << 20, "{total} tables");
    let mut best: f64 = 0.0;
    let mut choice = vec![0usize; slots.len()];
    loop {
        let mut value = 0.0;
        for (nodes, w) in &indexed {
            let mut path = Vec::with_capacity(horizon);
            for _ in 0..horizon {
                let id = nodes[&path];
                path.push(slots[id][choice[id]]);
            }
            if matches!(goal.prefix_status(&path, None), PrefixStatus::HoldsOnWindow(_)) {
                value += w;
            }
        }
        best = best.max(value);
        // Next table in mixed radix.
        let mut i = 0;
        loop {
            if i == choice.len() {
                return best;
            }
            choice[i] += 1;
            if choice[i] < slots[i].len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

/// `sup_n |F_emp(n) - F(n)|` over the sample points and `points`.
pub fn ks_distance(sample: &mut [u128], cdf: impl Fn(u128) -> f64, points: &[u128]) -> f64 {
    sample.sort_unstable();
    let n = sample.len() as f64;
    sample
        .iter()
        .chain(points)
        .map(|&x| {
            let emp = sample.partition_point(|&v| v <= x) as f64 / n;
            (emp - cdf(x)).abs()
        })
        .fold(0.0, f64::max)
}
