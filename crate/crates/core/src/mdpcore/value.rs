//! Exact finite-horizon values by backward induction over enumerated states.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::Serialize;

use super::state::MdpState;
use crate::distmodel::{ActionSet, DistributionFamily};
use crate::error::{Error, Result};
use crate::goals::{Goal, GoalKind};

/// Enumeration limits for exact computations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ValueCaps {
    pub max_actions: u64,
    /// Bound on distinct `(stage, state)` pairs and on successor lists.
    pub max_frontier: usize,
}

impl Default for ValueCaps {
    fn default() -> Self {
        ValueCaps { max_actions: 16, max_frontier: 100_000 }
    }
}

/// Exact law `phi_t` of the state at a stage-`t` root with foresight `m`.
pub fn enumerate_states(family: &DistributionFamily, t: usize, m: usize, limit: usize) -> Result<Vec<(MdpState, f64)>> {
    type Cone = BTreeMap<Vec<u64>, Arc<ActionSet>>;
    let mut partial: Vec<(Cone, f64)> = vec![(Cone::new(), 1.0)];
    for k in 0..=m {
        let p = family.stage(t + k)?;
        if p.tail_mass() > 0.0 {
            return Err(Error::Domain(format!("stage {} law has unlisted mass", t + k)));
        }
        let mut next = Vec::new();
        for (cone, w) in partial {
            let need: Vec<Vec<u64>> = if k == 0 {
                vec![Vec::new()]
            } else {
                cone.iter()
                    .filter(|(q, _)| q.len() == k - 1)
                    .flat_map(|(q, s)| {
                        s.iter().map(move |a| {
                            let mut q = q.clone();
                            q.push(a);
                            q
                        })
                    })
                    .collect()
            };
            let mut expand = vec![(cone, w)];
            for path in &need {
                expand = expand
                    .into_iter()
                    .flat_map(|(c, w)| {
                        p.atoms().iter().map(move |a| {
                            let mut c = c.clone();
                            c.insert(path.clone(), a.set.clone());
                            (c, w * a.mass)
                        })
                    })
                    .collect();
                if expand.len() + next.len() > limit {
                    return Err(Error::EnumerationBudget(format!("more than {limit} states at stage {t}")));
                }
            }
            next.extend(expand);
        }
        partial = next;
    }
    Ok(partial.into_iter().filter(|(_, w)| *w > 0.0).map(|(c, w)| (MdpState::from_cone(m, c), w)).collect())
}

/// Memoized backward induction for an `Always` goal: the optimal probability
/// that every action taken at stages `t .. t + horizon` is accepted.
pub struct ValueSolver<'a> {
    family: &'a DistributionFamily,
    goal: &'a Goal,
    caps: ValueCaps,
    memo: HashMap<(usize, usize, MdpState), f64>,
}

impl<'a> ValueSolver<'a> {
    pub fn new(family: &'a DistributionFamily, goal: &'a Goal, caps: ValueCaps) -> Result<Self> {
        if !matches!(goal.kind, GoalKind::Always { .. }) {
            return Err(Error::Domain("exact values need an always-type goal".into()));
        }
        Ok(ValueSolver { family, goal, caps, memo: HashMap::new() })
    }

    fn accepts(&self, stage: usize, a: u64) -> bool {
        match self.goal.kind {
            GoalKind::Always { from } => stage < from || self.goal.accept(stage, a),
            GoalKind::EventuallyAlways => unreachable!("checked in new"),
        }
    }

    /// Number of memoized `(stage, horizon, state)` entries.
    pub fn explored(&self) -> usize {
        self.memo.len()
    }

    /// `V(s, t, h)`: 1 when `h = 0`.
    pub fn value(&mut self, state: &MdpState, stage: usize, horizon: usize) -> Result<f64> {
        if horizon == 0 {
            return Ok(1.0);
        }
        let key = (stage, horizon, state.clone());
        if let Some(&v) = self.memo.get(&key) {
            return Ok(v);
        }
        if self.memo.len() >= self.caps.max_frontier {
            return Err(Error::EnumerationBudget(format!(
                "{} states explored at stage {stage} (cap {})",
                self.memo.len(),
                self.caps.max_frontier
            )));
        }
        let acts = state.actions();
        if acts.len() > self.caps.max_actions {
            return Err(Error::EnumerationBudget(format!("{} actions (cap {})", acts.len(), self.caps.max_actions)));
        }
        let mut best: f64 = 0.0;
        for a in acts.iter().collect::<Vec<_>>() {
            if !self.accepts(stage, a) {
                continue;
            }
            let v = if horizon == 1 {
                1.0
            } else {
                let mut v = 0.0;
                for (next, w) in state.successors(a, stage, self.family, self.caps.max_frontier)? {
                    v += w * self.value(&next, stage + 1, horizon - 1)?;
                }
                v
            };
            best = best.max(v);
        }
        // Successor weights may sum to 1 + ulp.
        let best = best.min(1.0);
        self.memo.insert(key, best);
        Ok(best)
    }

    /// Value of one action, i.e. the continuation after committing to `a`.
    pub fn action_value(&mut self, state: &MdpState, a: u64, stage: usize, horizon: usize) -> Result<f64> {
        if horizon == 0 {
            return Ok(1.0);
        }
        if !self.accepts(stage, a) {
            return Ok(0.0);
        }
        if horizon == 1 {
            return Ok(1.0);
        }
        let mut v = 0.0;
        for (next, w) in state.successors(a, stage, self.family, self.caps.max_frontier)? {
            v += w * self.value(&next, stage + 1, horizon - 1)?;
        }
        Ok(v.min(1.0))
    }
}

/// `V(s, t, H)` for a single state.
pub fn finite_horizon_value(
    family: &DistributionFamily,
    goal: &Goal,
    state: &MdpState,
    stage: usize,
    horizon: usize,
    caps: ValueCaps,
) -> Result<f64> {
    ValueSolver::new(family, goal, caps)?.value(state, stage, horizon)
}

/// The bound on a state's value in terms of the mass `z` of good states
/// `m + 1` stages ahead, in the derived and in the stated form.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Step5Row {
    pub size: u64,
    pub value: f64,
    /// `1 - (1 - eps) (1 - z)^u`.
    pub derived_bound: f64,
    /// `1 - eps (1 - z)^u`.
    pub stated_bound: f64,
    pub derived_holds: bool,
    pub stated_holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Step5Report {
    pub stage: usize,
    pub horizon: usize,
    pub epsilon: f64,
    /// `phi_{t+m+1}(V >= eps)` at the remaining horizon.
    pub good_mass: f64,
    pub rows: Vec<Step5Row>,
    pub pass: bool,
}

/// Checks the value bound at every stage-`t` state of a finite instance.
pub fn check_step5(
    family: &DistributionFamily,
    goal: &Goal,
    m: usize,
    stage: usize,
    horizon: usize,
    epsilon: f64,
    caps: ValueCaps,
) -> Result<Step5Report> {
    if horizon < m + 1 {
        return Err(Error::Domain(format!("horizon {horizon} shorter than m + 1 = {}", m + 1)));
    }
    let mut solver = ValueSolver::new(family, goal, caps)?;
    let ahead = stage + m + 1;
    let mut z = 0.0;
    for (s, w) in enumerate_states(family, ahead, m, caps.max_frontier)? {
        if solver.value(&s, ahead, horizon - m - 1)? >= epsilon {
            z += w;
        }
    }
    let mut rows = Vec::new();
    for (s, _) in enumerate_states(family, stage, m, caps.max_frontier)? {
        let value = solver.value(&s, stage, horizon)?;
        let u = s.size() as i32;
        let derived_bound = 1.0 - (1.0 - epsilon) * (1.0 - z).powi(u);
        let stated_bound = 1.0 - epsilon * (1.0 - z).powi(u);
        rows.push(Step5Row {
            size: s.size(),
            value,
            derived_bound,
            stated_bound,
            derived_holds: value <= derived_bound + 1e-12,
            stated_holds: value <= stated_bound + 1e-12,
        });
    }
    let pass = rows.iter().all(|r| r.derived_holds);
    Ok(Step5Report { stage, horizon, epsilon, good_mass: z, rows, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distmodel::ActionSet;

    fn tiny() -> DistributionFamily {
        DistributionFamily::bernoulli_two_sets(&ActionSet::singleton(0), &ActionSet::range(0, 1).unwrap(), 0.4).unwrap()
    }

    #[test]
    fn phi_is_a_probability() {
        for m in 0..3 {
            let states = enumerate_states(&tiny(), 0, m, 100_000).unwrap();
            let total: f64 = states.iter().map(|s| s.1).sum();
            assert!((total - 1.0).abs() < 1e-12);
            let mut d: Vec<_> = states.iter().map(|s| s.0.digest()).collect();
            d.sort();
            d.dedup();
            assert_eq!(d.len(), states.len());
        }
        assert_eq!(enumerate_states(&tiny(), 0, 1, 1000).unwrap().len(), 6);
    }

    #[test]
    fn zero_horizon_is_one_and_dummy_is_an_indicator() {
        let goal = Goal::always_nonzero(0);
        let s = MdpState::from_sequences(1, &[vec![0, 0]]).unwrap();
        let f = DistributionFamily::dirac_singletons(0);
        assert_eq!(finite_horizon_value(&f, &goal, &s, 0, 0, ValueCaps::default()).unwrap(), 1.0);
        assert_eq!(finite_horizon_value(&f, &goal, &s, 0, 3, ValueCaps::default()).unwrap(), 0.0);
        let g = DistributionFamily::dirac_singletons(4);
        let s4 = MdpState::from_sequences(1, &[vec![4, 4]]).unwrap();
        assert_eq!(finite_horizon_value(&g, &goal, &s4, 0, 3, ValueCaps::default()).unwrap(), 1.0);
    }

    #[test]
    fn values_decrease_with_horizon() {
        let goal = Goal::always_nonzero(1);
        let fam = tiny();
        let mut solver = ValueSolver::new(&fam, &goal, ValueCaps::default()).unwrap();
        for (s, _) in enumerate_states(&fam, 0, 1, 1000).unwrap() {
            let v: Vec<f64> = (0..5).map(|h| solver.value(&s, 0, h).unwrap()).collect();
            assert!(v.windows(2).all(|w| w[1] <= w[0] + 1e-15), "{v:?}");
        }
    }

    #[test]
    fn eventual_goals_are_refused() {
        assert!(ValueSolver::new(&tiny(), &Goal::eventually_nonzero(), ValueCaps::default()).is_err());
    }

    #[test]
    fn step5_holds_on_the_tiny_instance() {
        let goal = Goal::always_nonzero(1);
        let r = check_step5(&tiny(), &goal, 1, 0, 4, 0.5, ValueCaps::default()).unwrap();
        assert!(r.pass);
    }
}
