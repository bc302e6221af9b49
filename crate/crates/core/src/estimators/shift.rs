//! Complement-goal probabilities of shifted problems and the identities
//! linking them across stages.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::omniscient::{branch_exists, estimate_omniscient_at, generation_count, DEFAULT_SEARCH_BUDGET};
use crate::branching::{extinction_iteration, OffspringFamily};
use crate::distmodel::{DiscreteLaw, DistributionFamily};
use crate::error::{Error, Result};
use crate::goals::{Goal, GoalKind, Predicate};
use crate::seed::Seed;
use crate::stats::Estimate;
use crate::strategies::trial_seeds;
use crate::treespace::StageWindow;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShiftTerm {
    pub t: usize,
    /// Monte-Carlo `s_t`.
    pub estimate: Estimate,
    pub skipped: u64,
    pub exact: Option<f64>,
    pub exact_agrees: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecursionRow {
    pub t: usize,
    /// Which generating function links `s_t` and `s_{t+1}`.
    pub pgf: &'static str,
    /// `g_t(s_{t+1})`.
    pub lhs: f64,
    /// `s_t`.
    pub rhs: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// `s_t` for `t = 0..=T`: the probability that the problem started at stage
/// `t`, with the goal shifted by `t`, has no branch in the goal's window
/// ending at the absolute stage `horizon_end`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShiftValueSequence {
    pub goal: String,
    pub horizon_end: usize,
    pub terms: Vec<ShiftTerm>,
    pub recursion: Vec<RecursionRow>,
    /// `s_t <= s_{t+1}` within noise wherever the cardinality recursion holds.
    pub monotone: bool,
    pub pass: bool,
}

fn always_from(goal: &Goal) -> Result<usize> {
    match goal.kind {
        GoalKind::Always { from } => Ok(from),
        GoalKind::EventuallyAlways => Err(Error::Domain("shift sequences need an always-type window".into())),
    }
}

/// Law linking `s_t` to `s_{t+1}`: every child of an unconstrained stage,
/// or every non-zero child under the non-zero predicate.
fn link_law(family: &DistributionFamily, goal: &Goal, from: usize, t: usize) -> Result<Option<(&'static str, DiscreteLaw)>> {
    if t < from {
        return Ok(Some(("cardinality", family.cardinality_law(t)?.into_inner())));
    }
    if matches!(goal.predicate, Predicate::NonZero) {
        let law = OffspringFamily::NonZeroChildren(family.clone()).law(t)?;
        return Ok(Some(("nonzero-children", law.as_ref().clone())));
    }
    Ok(None)
}

/// Exact `s_t` for the non-zero predicate, from the extinction probability
/// of the non-zero-children process composed with the cardinality pgfs.
pub fn exact_nonzero_shift_values(family: &DistributionFamily, from: usize, horizon_end: usize, t_max: usize) -> Result<Vec<f64>> {
    if t_max >= horizon_end {
        return Err(Error::Domain("need t < horizon end".into()));
    }
    let off = OffspringFamily::NonZeroChildren(family.clone());
    // An empty window is met by every branch.
    let mut s = vec![0.0; horizon_end + 1];
    for t in (0..horizon_end).rev() {
        s[t] = if t >= from {
            extinction_iteration(&off, t, horizon_end - t)?
        } else {
            family.cardinality_law(t)?.pgf(s[t + 1])?
        };
    }
    s.truncate(t_max + 1);
    Ok(s)
}

pub fn shift_value_sequence(
    family: &DistributionFamily,
    goal: &Goal,
    t_outer: usize,
    horizon_end: usize,
    n: usize,
    seed: Seed,
) -> Result<ShiftValueSequence> {
    let from = always_from(goal)?;
    if t_outer >= horizon_end {
        return Err(Error::Domain("need t < horizon end".into()));
    }
    let exact = match goal.predicate {
        Predicate::NonZero => Some(exact_nonzero_shift_values(family, from, horizon_end, t_outer)?),
        _ => None,
    };
    let terms = (0..=t_outer)
        .map(|t| {
            let r = estimate_omniscient_at(
                family,
                t,
                &goal.shift(t),
                horizon_end - t,
                None,
                n,
                seed.stream("shift").derive(t as u64),
                DEFAULT_SEARCH_BUDGET,
            )?;
            let e = r.estimate;
            let estimate = Estimate::from_counts(e.n - e.successes, e.n, e.seed);
            let exact_t = exact.as_ref().map(|x| x[t]);
            Ok(ShiftTerm { t, estimate, skipped: r.skipped, exact: exact_t, exact_agrees: exact_t.map(|x| estimate.agrees_with(x, 3.0)) })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut recursion = Vec::new();
    let mut monotone = true;
    for t in 0..t_outer {
        let (a, b) = (&terms[t].estimate, &terms[t + 1].estimate);
        let floor = |e: &Estimate| e.stderr.max(1.0 / e.n.max(1) as f64);
        if t < from && a.point > b.point + 3.0 * floor(a).hypot(floor(b)) {
            monotone = false;
        }
        if let Some((pgf, law)) = link_law(family, goal, from, t)? {
            let lhs = law.pgf(b.point)?;
            let slope = law.pgf_derivative(b.point)?;
            let tolerance = (3.0 * floor(a).hypot(slope * floor(b))).max(1e-9);
            recursion.push(RecursionRow { t, pgf, lhs, rhs: a.point, tolerance, pass: (lhs - a.point).abs() <= tolerance });
        }
    }
    let pass = monotone
        && recursion.iter().all(|r| r.pass)
        && terms.iter().all(|x| x.skipped == 0 && x.exact_agrees != Some(false));
    Ok(ShiftValueSequence { goal: goal.to_string(), horizon_end, terms, recursion, monotone, pass })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PowerBin {
    /// `#omega_t`.
    pub size: u64,
    pub n: u64,
    pub failures: u64,
    pub frequency: f64,
    /// `s_t^{#omega_t}`.
    pub target: f64,
    pub stderr: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PowerIdentityReport {
    pub t: usize,
    pub horizon_end: usize,
    pub s_t: Estimate,
    pub exact_s_t: Option<f64>,
    pub bins: Vec<PowerBin>,
    /// Trees in bins below the occupancy threshold.
    pub excluded: u64,
    pub skipped: u64,
    pub pass: bool,
}

/// Bins trees by `#omega_t` and compares the frequency of "no branch in the
/// window" with `s_t^{#omega_t}`, `s_t` estimated on independent trees.
pub fn conditional_power_identity_check(
    family: &DistributionFamily,
    goal: &Goal,
    t: usize,
    horizon_end: usize,
    n: usize,
    min_occupancy: u64,
    seed: Seed,
) -> Result<PowerIdentityReport> {
    let from = always_from(goal)?;
    if t > from || t >= horizon_end {
        return Err(Error::Domain("the identity needs t <= window start and t < horizon end".into()));
    }
    let s = estimate_omniscient_at(family, t, &goal.shift(t), horizon_end - t, None, n, seed.stream("power-s"), DEFAULT_SEARCH_BUDGET)?;
    let s_t = Estimate::from_counts(s.estimate.n - s.estimate.successes, s.estimate.n, s.estimate.seed);
    let exact_s_t = match goal.predicate {
        Predicate::NonZero => Some(exact_nonzero_shift_values(family, from, horizon_end, t)?[t]),
        _ => None,
    };
    let window = StageWindow::new(family, 0, horizon_end)?;
    let rows = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let sampler = window.sampler(trial_seeds(seed, i).0);
            let found = generation_count(&sampler, t, DEFAULT_SEARCH_BUDGET)
                .and_then(|y| branch_exists(&sampler, goal, from, horizon_end, DEFAULT_SEARCH_BUDGET).map(|b| (y, b)));
            match found {
                Ok(v) => Ok(Some(v)),
                Err(Error::BudgetExceeded { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let skipped = rows.iter().filter(|r| r.is_none()).count() as u64;
    let mut bins: BTreeMap<u64, (u64, u64)> = BTreeMap::new();
    for (y, exists) in rows.into_iter().flatten() {
        let e = bins.entry(y).or_default();
        e.0 += 1;
        e.1 += !exists as u64;
    }
    let mut excluded = 0;
    let s_se = s_t.stderr.max(1.0 / s_t.n.max(1) as f64);
    let bins: Vec<PowerBin> = bins
        .into_iter()
        .filter_map(|(size, (m, failures))| {
            if m < min_occupancy {
                excluded += m;
                return None;
            }
            let frequency = failures as f64 / m as f64;
            let y = size as f64;
            let target = s_t.point.powf(y);
            let own = (frequency * (1.0 - frequency) / m as f64).sqrt().max(1.0 / m as f64);
            let stderr = own.hypot(y * s_t.point.powf(y - 1.0) * s_se);
            Some(PowerBin { size, n: m, failures, frequency, target, stderr, pass: (frequency - target).abs() <= 3.0 * stderr })
        })
        .collect();
    let pass = skipped == 0 && bins.iter().all(|b| b.pass);
    Ok(PowerIdentityReport { t, horizon_end, s_t, exact_s_t, bins, excluded, skipped, pass })
}
