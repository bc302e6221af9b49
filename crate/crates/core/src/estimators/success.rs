//! Per-strategy success estimates on window surrogates.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::distmodel::DistributionFamily;
use crate::error::{Error, Result};
use crate::goals::{Goal, PrefixStatus};
use crate::seed::Seed;
use crate::stats::Estimate;
use crate::strategies::{run_episode, trial_seeds, window_for, EpisodeOptions, Strategy};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrategyEstimate {
    pub strategy: String,
    pub foresight: usize,
    pub horizon: usize,
    /// Latest window start for eventual goals.
    pub window: Option<usize>,
    pub estimate: Estimate,
    /// Episodes where the strategy's rule left the choice open.
    pub flagged: u64,
    /// Episodes abandoned on the cone budget; counted as failures.
    pub skipped: u64,
}

struct Tally {
    holds: u64,
    violated: u64,
    undetermined: u64,
    flagged: u64,
    skipped: u64,
}

fn tally(
    family: &DistributionFamily,
    strategy: &dyn Strategy,
    goal: &Goal,
    horizon: usize,
    window: Option<usize>,
    n: usize,
    seed: Seed,
) -> Result<Tally> {
    let opts = EpisodeOptions { k_max: window, ..EpisodeOptions::new(horizon) };
    let w = window_for(family, 0, strategy, &opts)?;
    let rows = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let (ts, ss) = trial_seeds(seed, i);
            match run_episode(&w, strategy, goal, &opts, ts, ss) {
                Ok(e) => Ok((Some(e.status), e.flagged())),
                Err(Error::BudgetExceeded { .. }) => Ok((None, false)),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let count = |f: &dyn Fn(&PrefixStatus) -> bool| rows.iter().filter(|r| r.0.as_ref().is_some_and(f)).count() as u64;
    Ok(Tally {
        holds: count(&|s| matches!(s, PrefixStatus::HoldsOnWindow(_))),
        violated: count(&|s| matches!(s, PrefixStatus::ViolatedAtAllWindows)),
        undetermined: count(&|s| matches!(s, PrefixStatus::Undetermined)),
        flagged: rows.iter().filter(|r| r.1).count() as u64,
        skipped: rows.iter().filter(|r| r.0.is_none()).count() as u64,
    })
}

/// Frequency of episodes whose path satisfies the goal's window at horizon
/// `T`. Trial `i` uses [`trial_seeds`], so strategies run under the same
/// master seed face the same trees.
pub fn estimate_strategy_success(
    family: &DistributionFamily,
    strategy: &dyn Strategy,
    goal: &Goal,
    horizon: usize,
    window: Option<usize>,
    n: usize,
    seed: Seed,
) -> Result<StrategyEstimate> {
    let t = tally(family, strategy, goal, horizon, window, n, seed)?;
    Ok(StrategyEstimate {
        strategy: strategy.name(),
        foresight: strategy.foresight(),
        horizon,
        window,
        estimate: Estimate::from_counts(t.holds, n as u64, seed),
        flagged: t.flagged,
        skipped: t.skipped,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HorizonLadder {
    pub rows: Vec<StrategyEstimate>,
    /// Largest increase between consecutive horizons, in pooled standard errors.
    pub worst_increase: f64,
    pub monotone: bool,
}

/// Success estimates along increasing horizons, with the isotonic check.
pub fn horizon_ladder(
    family: &DistributionFamily,
    strategy: &dyn Strategy,
    goal: &Goal,
    horizons: &[usize],
    window: Option<usize>,
    n: usize,
    seed: Seed,
) -> Result<HorizonLadder> {
    let mut hs = horizons.to_vec();
    hs.sort_unstable();
    hs.dedup();
    let rows = hs
        .iter()
        .map(|&h| estimate_strategy_success(family, strategy, goal, h, window, n, seed))
        .collect::<Result<Vec<_>>>()?;
    let worst_increase = rows
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0].estimate, &w[1].estimate);
            let se = a.stderr.hypot(b.stderr).max(1.0 / n.max(1) as f64);
            (b.point - a.point) / se
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(HorizonLadder { monotone: !(worst_increase > 3.0), worst_increase, rows })
}

/// Per-strategy estimates and their maximum. The maximum is lower evidence
/// for the value, never the value itself.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RosterReport {
    pub horizon: usize,
    pub rows: Vec<StrategyEstimate>,
    pub best: String,
    pub lower_evidence: Estimate,
}

pub fn roster_evidence(
    family: &DistributionFamily,
    roster: &[Arc<dyn Strategy>],
    goal: &Goal,
    horizon: usize,
    window: Option<usize>,
    n: usize,
    seed: Seed,
) -> Result<RosterReport> {
    if roster.is_empty() {
        return Err(Error::Config("empty strategy roster".into()));
    }
    let rows = roster
        .iter()
        .map(|s| estimate_strategy_success(family, s.as_ref(), goal, horizon, window, n, seed))
        .collect::<Result<Vec<_>>>()?;
    let best = rows
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.estimate.point.total_cmp(&b.1.estimate.point).then(b.0.cmp(&a.0)))
        .map(|(_, r)| r.clone())
        .expect("non-empty roster");
    Ok(RosterReport { horizon, best: best.strategy, lower_evidence: best.estimate, rows })
}

/// Window accounting for a goal and its complement under one strategy.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComplementarityReport {
    pub strategy: String,
    pub horizon: usize,
    pub n: u64,
    pub goal_window: Estimate,
    pub complement_window: Estimate,
    pub undetermined: u64,
    /// Every episode falls in exactly one of the two windows.
    pub exhaustive: bool,
    /// One of the two estimates is 1.
    pub degenerate: bool,
}

pub fn complementarity_check(
    family: &DistributionFamily,
    strategy: &dyn Strategy,
    goal: &Goal,
    horizon: usize,
    n: usize,
    seed: Seed,
) -> Result<ComplementarityReport> {
    let t = tally(family, strategy, goal, horizon, None, n, seed)?;
    let n64 = n as u64;
    let exhaustive = t.holds + t.violated == n64 && t.undetermined == 0;
    Ok(ComplementarityReport {
        strategy: strategy.name(),
        horizon,
        n: n64,
        goal_window: Estimate::from_counts(t.holds, n64, seed),
        complement_window: Estimate::from_counts(t.violated, n64, seed),
        undetermined: t.undetermined,
        exhaustive,
        degenerate: t.holds == n64 || t.violated == n64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategies::{builtin_strategies, SmallestAction};

    #[test]
    fn dummy_family_always_succeeds() {
        let f = DistributionFamily::dirac_singletons(5);
        let e = estimate_strategy_success(&f, &SmallestAction, &Goal::always_nonzero(0), 8, None, 200, Seed(1)).unwrap();
        assert_eq!(e.estimate.point, 1.0);
        let c = complementarity_check(&f, &SmallestAction, &Goal::always_nonzero(0), 8, 200, Seed(1)).unwrap();
        assert!(c.exhaustive && c.degenerate);
    }

    #[test]
    fn common_trees_make_the_ladder_exactly_monotone() {
        let f = DistributionFamily::example45();
        let l = horizon_ladder(&f, &crate::strategies::FirstNonZero, &Goal::always_nonzero(0), &[1, 2, 4, 6], None, 3000, Seed(2))
            .unwrap();
        assert!(l.rows.windows(2).all(|w| w[1].estimate.successes <= w[0].estimate.successes));
        assert!(l.monotone);
    }

    #[test]
    fn roster_best_and_empty_roster() {
        let f = DistributionFamily::example42();
        let g = Goal::always_nonzero(1);
        let r = roster_evidence(&f, &builtin_strategies(), &g, 4, None, 2000, Seed(3)).unwrap();
        assert!(r.rows.iter().all(|x| x.estimate.point <= r.lower_evidence.point));
        assert!(roster_evidence(&f, &[], &g, 4, None, 10, Seed(3)).is_err());
    }

    #[test]
    fn smallest_action_never_meets_the_nonzero_goal() {
        let f = DistributionFamily::example42();
        let c = complementarity_check(&f, &SmallestAction, &Goal::always_nonzero(1), 6, 1000, Seed(4)).unwrap();
        assert_eq!(c.goal_window.point, 0.0);
        assert_eq!(c.complement_window.point, 1.0);
        let e = complementarity_check(&f, &SmallestAction, &Goal::eventually_nonzero(), 6, 1000, Seed(4)).unwrap();
        assert!(e.exhaustive);
    }
}
