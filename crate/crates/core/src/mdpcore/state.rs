//! States of the foresight MDP: the `m+1` generations revealed at a node.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::distmodel::{ActionSet, DistributionFamily};
use crate::error::{Error, Result};
use crate::seed::mix64;
use crate::treespace::{path_string, NodeOracle};

/// Default bound on the nodes a single revealed cone may hold.
pub const DEFAULT_CONE_BUDGET: u64 = 1_000_000;

/// A non-empty set of length-`m+1` action sequences, stored as the cone of
/// action sets at relative paths of length `0..=m`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MdpState {
    m: usize,
    cone: BTreeMap<Vec<u64>, Arc<ActionSet>>,
}

/// Stable 64-bit key of a state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct Digest(pub u64);

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl MdpState {
    /// Builds a state from its sequences, all of length `m+1`.
    pub fn from_sequences(m: usize, sequences: &[Vec<u64>]) -> Result<Self> {
        if sequences.is_empty() {
            return Err(Error::Domain("a state holds at least one sequence".into()));
        }
        let mut raw: BTreeMap<Vec<u64>, Vec<u64>> = BTreeMap::new();
        for seq in sequences {
            if seq.len() != m + 1 {
                return Err(Error::Domain(format!("sequence of length {} in a state with m = {m}", seq.len())));
            }
            for k in 0..=m {
                raw.entry(seq[..k].to_vec()).or_default().push(seq[k]);
            }
        }
        let cone = raw.into_iter().map(|(p, v)| Ok((p, Arc::new(ActionSet::new(v)?)))).collect::<Result<_>>()?;
        Ok(MdpState { m, cone })
    }

    pub(crate) fn from_cone(m: usize, cone: BTreeMap<Vec<u64>, Arc<ActionSet>>) -> Self {
        MdpState { m, cone }
    }

    /// The cone of `m+1` generations below `node`, which sits `depth` below
    /// the oracle's root.
    pub fn reveal<O: NodeOracle>(oracle: &O, node: &O::Node, depth: usize, m: usize, budget: u64) -> Result<Self> {
        let mut cone = BTreeMap::new();
        let mut frontier = vec![(Vec::new(), node.clone())];
        let mut count: u64 = 0;
        for k in 0..=m {
            let mut next = Vec::new();
            for (path, n) in frontier {
                let set = oracle.action_set(&n, depth + k)?.clone();
                count = count.saturating_add(set.len());
                if count > budget {
                    return Err(Error::BudgetExceeded { what: "revealed cone node", limit: budget });
                }
                if k < m {
                    for a in set.iter() {
                        let mut p = path.clone();
                        p.push(a);
                        next.push((p, oracle.child(&n, a)));
                    }
                }
                cone.insert(path, set);
            }
            frontier = next;
        }
        Ok(MdpState { m, cone })
    }

    pub fn foresight(&self) -> usize {
        self.m
    }

    /// First coordinates of the members.
    pub fn actions(&self) -> &ActionSet {
        &self.cone[&Vec::new()]
    }

    /// Action set at a relative path of length at most `m`.
    pub fn set_at(&self, relpath: &[u64]) -> Option<&ActionSet> {
        self.cone.get(relpath).map(AsRef::as_ref)
    }

    /// Relative paths with their action sets, in path order.
    pub fn cone(&self) -> impl Iterator<Item = (&Vec<u64>, &Arc<ActionSet>)> {
        self.cone.iter()
    }

    /// Number of length-`m` continuations of `a`.
    pub fn continuations(&self, a: u64) -> u64 {
        self.continuations_at(a, self.m)
    }

    /// Number of length-`k` continuations of `a`, for `k <= m`.
    pub fn continuations_at(&self, a: u64, k: usize) -> u64 {
        if k == 0 {
            return 1;
        }
        self.cone
            .range(vec![a]..)
            .take_while(|(p, _)| p.first() == Some(&a))
            .filter(|(p, _)| p.len() == k)
            .map(|(_, s)| s.len())
            .sum()
    }

    /// `u(s)`: the largest number of continuations of a single first action.
    pub fn size(&self) -> u64 {
        if self.m == 0 {
            return 1;
        }
        let mut best = 0;
        let mut current: Option<(u64, u64)> = None;
        for (p, s) in self.cone.iter().filter(|(p, _)| p.len() == self.m) {
            match &mut current {
                Some((a, n)) if *a == p[0] => *n += s.len(),
                _ => {
                    if let Some((_, n)) = current {
                        best = best.max(n);
                    }
                    current = Some((p[0], s.len()));
                }
            }
        }
        best.max(current.map_or(0, |(_, n)| n))
    }

    /// All member sequences, in lexicographic order.
    pub fn sequences(&self) -> Vec<Vec<u64>> {
        let mut out = vec![Vec::new()];
        for _ in 0..=self.m {
            out = out
                .into_iter()
                .flat_map(|p: Vec<u64>| {
                    let set = self.cone[&p].clone();
                    set.iter()
                        .map(|a| {
                            let mut q = p.clone();
                            q.push(a);
                            q
                        })
                        .collect::<Vec<_>>()
                })
                .collect();
        }
        out
    }

    pub fn digest(&self) -> Digest {
        let mut h = mix64(self.m as u64 ^ 0x5eed);
        for (p, s) in &self.cone {
            h = mix64(h ^ p.len() as u64);
            for &a in p {
                h = mix64(h ^ a);
            }
            for &(lo, hi) in s.runs() {
                h = mix64(mix64(h ^ lo) ^ hi);
            }
        }
        Digest(h)
    }

    /// The part of the successor after `a` that is already revealed: the cone
    /// under `a` with paths re-rooted, of depth `m - 1`.
    fn subcone(&self, a: u64) -> Result<BTreeMap<Vec<u64>, Arc<ActionSet>>> {
        if !self.actions().contains(a) {
            return Err(Error::IllegalAction { action: a, available: self.actions().to_string() });
        }
        Ok(self
            .cone
            .range(vec![a]..)
            .take_while(|(p, _)| p.first() == Some(&a))
            .map(|(p, s)| (p[1..].to_vec(), s.clone()))
            .collect())
    }

    /// Relative paths of length `m` in the successor after `a`: these receive
    /// fresh sets from `p_{t+m+1}`.
    fn new_generation(&self, known: &BTreeMap<Vec<u64>, Arc<ActionSet>>) -> Vec<Vec<u64>> {
        if self.m == 0 {
            return vec![Vec::new()];
        }
        known
            .iter()
            .filter(|(p, _)| p.len() == self.m - 1)
            .flat_map(|(p, s)| {
                s.iter().map(move |b| {
                    let mut q = p.clone();
                    q.push(b);
                    q
                })
            })
            .collect()
    }

    /// Draws the successor after action `a` at stage `t`, feeding one uniform
    /// per new action set to `p_{t+m+1}`.
    pub fn transition_sample(
        &self,
        a: u64,
        t: usize,
        family: &DistributionFamily,
        mut uniform: impl FnMut() -> f64,
    ) -> Result<MdpState> {
        let mut cone = self.subcone(a)?;
        let p = family.stage(t + self.m + 1)?;
        for path in self.new_generation(&cone) {
            cone.insert(path, p.sample(uniform()).clone());
        }
        Ok(MdpState { m: self.m, cone })
    }

    /// Probability of moving to `next` after `a` at stage `t`; zero when
    /// `next` is not a possible successor.
    pub fn transition_prob(&self, a: u64, next: &MdpState, t: usize, family: &DistributionFamily) -> Result<f64> {
        let known = self.subcone(a)?;
        if next.m != self.m || next.cone.len() < known.len() {
            return Ok(0.0);
        }
        if known.iter().any(|(p, s)| next.cone.get(p) != Some(s)) {
            return Ok(0.0);
        }
        let fresh = self.new_generation(&known);
        if fresh.len() + known.len() != next.cone.len() {
            return Ok(0.0);
        }
        let p = family.stage(t + self.m + 1)?;
        let mut prob = 1.0;
        for path in fresh {
            match next.cone.get(&path) {
                Some(s) => prob *= p.mass_of(s),
                None => return Ok(0.0),
            }
        }
        Ok(prob)
    }

    /// Every successor after `a` with positive probability, with its
    /// probability. Refuses when more than `limit` successors exist.
    pub fn successors(&self, a: u64, t: usize, family: &DistributionFamily, limit: usize) -> Result<Vec<(MdpState, f64)>> {
        let known = self.subcone(a)?;
        let p = family.stage(t + self.m + 1)?;
        if p.tail_mass() > 0.0 {
            return Err(Error::Domain(format!("stage {} law has unlisted mass", t + self.m + 1)));
        }
        let fresh = self.new_generation(&known);
        let k = p.atoms().len();
        let total = (k as f64).powi(fresh.len() as i32);
        if total > limit as f64 {
            return Err(Error::EnumerationBudget(format!("{total} successors exceed the cap {limit}")));
        }
        let mut out = vec![(known, 1.0)];
        for path in &fresh {
            out = out
                .into_iter()
                .flat_map(|(cone, w)| {
                    p.atoms().iter().map(move |atom| {
                        let mut c = cone.clone();
                        c.insert(path.clone(), atom.set.clone());
                        (c, w * atom.mass)
                    })
                })
                .collect();
        }
        Ok(out.into_iter().filter(|(_, w)| *w > 0.0).map(|(cone, w)| (MdpState { m: self.m, cone }, w)).collect())
    }
}

impl fmt::Debug for MdpState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_map();
        for (p, s) in &self.cone {
            d.entry(&path_string(p), &s.to_string());
        }
        d.finish()
    }
}
