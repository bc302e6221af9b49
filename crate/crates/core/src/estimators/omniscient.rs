//! Branch search on sampled trees.

use rayon::prelude::*;
use serde::Serialize;

use crate::distmodel::DistributionFamily;
use crate::error::{Error, Result};
use crate::goals::Goal;
use crate::seed::Seed;
use crate::stats::Estimate;
use crate::strategies::trial_seeds;
use crate::treespace::{NodeOracle, StageWindow};

/// Node visits allowed per searched tree.
pub const DEFAULT_SEARCH_BUDGET: u64 = 10_000_000;

/// Skip rates above this make a search result inconclusive.
pub const MAX_SKIP_RATE: f64 = 0.01;

struct Search<'a, O: NodeOracle> {
    oracle: &'a O,
    goal: &'a Goal,
    from: usize,
    horizon: usize,
    visited: u64,
    budget: u64,
}

impl<O: NodeOracle> Search<'_, O> {
    fn exists(&mut self, node: &O::Node, depth: usize) -> Result<bool> {
        if depth == self.horizon {
            return Ok(true);
        }
        self.visited += 1;
        if self.visited > self.budget {
            return Err(Error::BudgetExceeded { what: "search nodes", limit: self.budget });
        }
        let set = self.oracle.action_set(node, depth)?.clone();
        for a in set.iter() {
            if depth >= self.from && !self.goal.accept(depth, a) {
                continue;
            }
            if self.exists(&self.oracle.child(node, a), depth + 1)? {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// Whether some path of length `horizon` accepts at every stage `>= from`.
/// Depth-first with early exit; fails once `budget` nodes are visited.
pub fn branch_exists<O: NodeOracle>(oracle: &O, goal: &Goal, from: usize, horizon: usize, budget: u64) -> Result<bool> {
    let mut s = Search { oracle, goal, from, horizon, visited: 0, budget };
    s.exists(&oracle.root(), 0)
}

/// `#omega_depth`, counted generation by generation.
pub fn generation_count<O: NodeOracle>(oracle: &O, depth: usize, budget: u64) -> Result<u64> {
    let mut level = vec![oracle.root()];
    let mut visited = 0u64;
    for d in 0..depth {
        let mut next = Vec::new();
        for node in &level {
            let set = oracle.action_set(node, d)?;
            visited += set.len();
            if visited > budget {
                return Err(Error::BudgetExceeded { what: "generation nodes", limit: budget });
            }
            next.extend(set.iter().map(|a| oracle.child(node, a)));
        }
        level = next;
    }
    Ok(level.len() as u64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OmniscientReport {
    pub origin_stage: usize,
    pub horizon: usize,
    pub window_start: usize,
    /// Frequency of trees with a satisfying branch among searched trees.
    pub estimate: Estimate,
    /// Counting skipped trees as failures, then as successes.
    pub bracket: (f64, f64),
    pub skipped: u64,
    pub skip_rate: f64,
    pub inconclusive: bool,
}

/// Search outcome per tree; `None` when the budget ran out.
pub(crate) fn search_trees(
    family: &DistributionFamily,
    origin_stage: usize,
    goal: &Goal,
    horizon: usize,
    from: usize,
    n: usize,
    seed: Seed,
    budget: u64,
) -> Result<Vec<Option<bool>>> {
    let window = StageWindow::new(family, origin_stage, horizon)?;
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let sampler = window.sampler(trial_seeds(seed, i).0);
            match branch_exists(&sampler, goal, from, horizon, budget) {
                Ok(b) => Ok(Some(b)),
                Err(Error::BudgetExceeded { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Frequency of sampled trees having a depth-`T` branch inside the goal's
/// window: an upper-bound surrogate for the omniscient value, nonincreasing
/// in `T`. Trees sampled from the same master seed as
/// [`estimate_strategy_success`](super::estimate_strategy_success) coincide
/// with the trees the strategies face.
pub fn estimate_omniscient(
    family: &DistributionFamily,
    goal: &Goal,
    horizon: usize,
    window: Option<usize>,
    n: usize,
    seed: Seed,
) -> Result<OmniscientReport> {
    estimate_omniscient_at(family, 0, goal, horizon, window, n, seed, DEFAULT_SEARCH_BUDGET)
}

/// As [`estimate_omniscient`] on the family advanced by `origin_stage`
/// stages, with an explicit node budget.
#[allow(clippy::too_many_arguments)]
pub fn estimate_omniscient_at(
    family: &DistributionFamily,
    origin_stage: usize,
    goal: &Goal,
    horizon: usize,
    window: Option<usize>,
    n: usize,
    seed: Seed,
    budget: u64,
) -> Result<OmniscientReport> {
    if horizon == 0 || n == 0 {
        return Err(Error::Domain("horizon and sample count must be positive".into()));
    }
    let from = goal.window_start(horizon, window);
    let outcomes = search_trees(family, origin_stage, goal, horizon, from, n, seed, budget)?;
    let hits = outcomes.iter().filter(|o| **o == Some(true)).count() as u64;
    let skipped = outcomes.iter().filter(|o| o.is_none()).count() as u64;
    let searched = n as u64 - skipped;
    let skip_rate = skipped as f64 / n as f64;
    Ok(OmniscientReport {
        origin_stage,
        horizon,
        window_start: from,
        estimate: Estimate::from_counts(hits, searched, seed),
        bracket: (hits as f64 / n as f64, (hits + skipped) as f64 / n as f64),
        skipped,
        skip_rate,
        inconclusive: skip_rate > MAX_SKIP_RATE,
    })
}
