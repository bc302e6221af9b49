//! Tail goals as stagewise predicates, their shifts, and the finite-window
//! semantics used by simulation.

use std::fmt;
use std::sync::Arc;

use crate::distmodel::DistributionFamily;
use crate::error::{Error, Result};

/// A partition of the naturals into consecutive blocks `M_0, M_1, ...`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    sizes: Vec<u128>,
    /// Exclusive end of each block.
    ends: Vec<u128>,
}

/// Tiles `0, 1, 2, ...` with blocks of the given sizes in order.
pub fn make_partition(block_sizes: &[u128]) -> Result<Partition> {
    if block_sizes.is_empty() || block_sizes.contains(&0) {
        return Err(Error::Domain("partition blocks must be non-empty".into()));
    }
    let mut ends = Vec::with_capacity(block_sizes.len());
    let mut end: u128 = 0;
    for &m in block_sizes {
        end = end.checked_add(m).ok_or_else(|| Error::Domain("partition overflows u128".into()))?;
        ends.push(end);
    }
    Ok(Partition { sizes: block_sizes.to_vec(), ends })
}

impl Partition {
    pub fn sizes(&self) -> &[u128] {
        &self.sizes
    }

    /// Index of the block holding `a`; actions past the listed blocks report
    /// the number of blocks.
    pub fn block_of(&self, a: u64) -> usize {
        self.ends.partition_point(|&e| e <= a as u128)
    }

    /// First element of block `t`.
    pub fn block_start(&self, t: usize) -> Option<u128> {
        match t {
            0 => Some(0),
            _ => self.ends.get(t - 1).copied(),
        }
    }
}

/// Per-stage acceptance condition `accept(t, a)`.
#[derive(Clone)]
pub enum Predicate {
    Any,
    NonZero,
    /// `a` lies in `M_{t+1} ∪ M_{t+2} ∪ ...`.
    Escape(Arc<Partition>),
    Custom { name: String, accept: Arc<dyn Fn(usize, u64) -> bool + Send + Sync> },
}

impl Predicate {
    pub fn custom(name: impl Into<String>, accept: impl Fn(usize, u64) -> bool + Send + Sync + 'static) -> Self {
        Predicate::Custom { name: name.into(), accept: Arc::new(accept) }
    }

    #[inline]
    pub fn accept(&self, t: usize, a: u64) -> bool {
        match self {
            Predicate::Any => true,
            Predicate::NonZero => a != 0,
            Predicate::Escape(p) => p.block_of(a) > t,
            Predicate::Custom { accept, .. } => accept(t, a),
        }
    }

    pub fn is_time_invariant(&self) -> bool {
        matches!(self, Predicate::Any | Predicate::NonZero)
    }
}

impl fmt::Debug for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Any => f.write_str("Any"),
            Predicate::NonZero => f.write_str("NonZero"),
            Predicate::Escape(p) => write!(f, "Escape({} blocks)", p.sizes.len()),
            Predicate::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl PartialEq for Predicate {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Predicate::Any, Predicate::Any) | (Predicate::NonZero, Predicate::NonZero) => true,
            (Predicate::Escape(a), Predicate::Escape(b)) => a == b,
            (Predicate::Custom { accept: a, .. }, Predicate::Custom { accept: b, .. }) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GoalKind {
    /// The predicate holds at every stage `>= from`.
    Always { from: usize },
    /// The predicate holds at every stage from some point on.
    EventuallyAlways,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Goal {
    pub kind: GoalKind,
    pub predicate: Predicate,
    /// Stages cut from the front.
    pub shift: usize,
}

/// Outcome of a goal on a finite path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrefixStatus {
    /// Acceptance at every stage in `[k, T)`.
    HoldsOnWindow(usize),
    ViolatedAtAllWindows,
    Undetermined,
}

impl Goal {
    pub fn always(predicate: Predicate, from: usize) -> Self {
        Goal { kind: GoalKind::Always { from }, predicate, shift: 0 }
    }

    pub fn eventually_always(predicate: Predicate) -> Self {
        Goal { kind: GoalKind::EventuallyAlways, predicate, shift: 0 }
    }

    /// Eventually only non-zero actions.
    pub fn eventually_nonzero() -> Self {
        Self::eventually_always(Predicate::NonZero)
    }

    /// Non-zero actions at every stage `>= from`.
    pub fn always_nonzero(from: usize) -> Self {
        Self::always(Predicate::NonZero, from)
    }

    /// Eventually `x_t ∈ M_{t+1} ∪ M_{t+2} ∪ ...`.
    pub fn partition_escape(partition: Partition) -> Self {
        Self::eventually_always(Predicate::Escape(Arc::new(partition)))
    }

    /// The `t`-shifted goal: stage `s` of the result is stage `s + t` of self.
    pub fn shift(&self, t: usize) -> Goal {
        let mut g = self.clone();
        match &mut g.kind {
            GoalKind::Always { from } => *from = from.saturating_sub(t),
            GoalKind::EventuallyAlways if g.predicate.is_time_invariant() => return g,
            GoalKind::EventuallyAlways => {}
        }
        if !g.predicate.is_time_invariant() {
            g.shift += t;
        }
        g
    }

    #[inline]
    pub fn accept(&self, stage: usize, a: u64) -> bool {
        self.predicate.accept(stage + self.shift, a)
    }

    pub fn is_shift_invariant(&self) -> bool {
        matches!(self.kind, GoalKind::EventuallyAlways) && self.predicate.is_time_invariant()
    }

    /// First stage of the acceptance window evaluated at horizon `T`.
    /// `window` picks the start for eventual goals (default `T/2`) and is
    /// ignored by `Always` goals.
    pub fn window_start(&self, horizon: usize, window: Option<usize>) -> usize {
        match self.kind {
            GoalKind::Always { from } => from,
            GoalKind::EventuallyAlways => window.unwrap_or(horizon / 2),
        }
    }

    /// Window status of a path of length `T`; `k_max` is the latest allowed
    /// window start for eventual goals (default `T/2`).
    pub fn prefix_status(&self, path: &[u64], k_max: Option<usize>) -> PrefixStatus {
        let horizon = path.len();
        if horizon == 0 {
            return PrefixStatus::Undetermined;
        }
        match self.kind {
            GoalKind::Always { from } => {
                if path.iter().enumerate().skip(from).all(|(s, &a)| self.accept(s, a)) {
                    PrefixStatus::HoldsOnWindow(from)
                } else {
                    PrefixStatus::ViolatedAtAllWindows
                }
            }
            GoalKind::EventuallyAlways => {
                let k = path.iter().enumerate().rev().find(|&(s, &a)| !self.accept(s, a)).map_or(0, |(s, _)| s + 1);
                if k <= k_max.unwrap_or(horizon / 2) {
                    PrefixStatus::HoldsOnWindow(k)
                } else {
                    PrefixStatus::ViolatedAtAllWindows
                }
            }
        }
    }

    /// Parses `eventually-nonzero`, `always-nonzero`, `always-nonzero(from=k)`,
    /// `partition-escape` and `shifted(<goal>, t)`. The partition goal takes
    /// its blocks from the family.
    pub fn parse(s: &str, family: &DistributionFamily) -> Result<Goal> {
        let s = s.trim();
        let err = || Error::Config(format!("unknown goal `{s}`"));
        if let Some(inner) = s.strip_prefix("shifted(").and_then(|r| r.strip_suffix(')')) {
            let (g, t) = inner.rsplit_once(',').ok_or_else(err)?;
            let t: usize = t.trim().parse().map_err(|_| err())?;
            return Ok(Goal::parse(g, family)?.shift(t));
        }
        if let Some(inner) = s.strip_prefix("always-nonzero(").and_then(|r| r.strip_suffix(')')) {
            let from = inner.trim().strip_prefix("from=").and_then(|v| v.trim().parse().ok()).ok_or_else(err)?;
            return Ok(Goal::always_nonzero(from));
        }
        match s {
            "eventually-nonzero" => Ok(Goal::eventually_nonzero()),
            "always-nonzero" => Ok(Goal::always_nonzero(0)),
            "partition-escape" => {
                let params = family
                    .partition_params()
                    .ok_or_else(|| Error::Config(format!("partition-escape needs a partition family, got {}", family.name())))?;
                Ok(Goal::partition_escape(make_partition(&params.sizes)?))
            }
            _ => Err(err()),
        }
    }
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let base = match (&self.kind, &self.predicate) {
            (GoalKind::EventuallyAlways, Predicate::NonZero) => "eventually-nonzero".to_string(),
            (GoalKind::Always { from: 0 }, Predicate::NonZero) => "always-nonzero".to_string(),
            (GoalKind::Always { from }, Predicate::NonZero) => format!("always-nonzero(from={from})"),
            (GoalKind::EventuallyAlways, Predicate::Escape(_)) => "partition-escape".to_string(),
            (kind, p) => format!("{kind:?}/{p:?}"),
        };
        match self.shift {
            0 => f.write_str(&base),
            t => write!(f, "shifted({base}, {t})"),
        }
    }
}

/// Stagewise inclusion `a ⊆ b` checked on stages `0..stages` and the given
/// actions: every accepted `(s, x)` of `a` is accepted by `b`, and `b`'s window
/// starts no later than `a`'s.
pub fn stagewise_subset(a: &Goal, b: &Goal, stages: usize, actions: &[u64]) -> bool {
    let from = |g: &Goal| match g.kind {
        GoalKind::Always { from } => from,
        GoalKind::EventuallyAlways => 0,
    };
    if std::mem::discriminant(&a.kind) != std::mem::discriminant(&b.kind) || from(b) > from(a) {
        return false;
    }
    (0..stages).all(|s| actions.iter().all(|&x| !a.accept(s, x) || b.accept(s, x)))
}

/// Both inclusion directions between `G_{k0}` and `G_{k1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InclusionReport {
    pub earlier_in_later: bool,
    pub later_in_earlier: bool,
}

impl InclusionReport {
    pub fn strictly_decreasing(&self) -> bool {
        self.later_in_earlier && !self.earlier_in_later
    }
}

pub fn shifted_inclusions(goal: &Goal, k0: usize, k1: usize, stages: usize, actions: &[u64]) -> InclusionReport {
    let (g0, g1) = (goal.shift(k0), goal.shift(k1));
    InclusionReport {
        earlier_in_later: stagewise_subset(&g0, &g1, stages, actions),
        later_in_earlier: stagewise_subset(&g1, &g0, stages, actions),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_tiles() {
        let p = make_partition(&[1, 2, 3]).unwrap();
        assert_eq!([0, 1, 2, 3, 4, 5, 6].map(|a| p.block_of(a)), [0, 1, 1, 2, 2, 2, 3]);
        assert_eq!(p.block_start(2), Some(3));
        assert!(make_partition(&[1, 0]).is_err());
    }

    #[test]
    fn prefix_status_windows() {
        let g = Goal::always_nonzero(0);
        assert_eq!(g.prefix_status(&[1, 2, 3], None), PrefixStatus::HoldsOnWindow(0));
        assert_eq!(g.prefix_status(&[1, 0, 3], None), PrefixStatus::ViolatedAtAllWindows);
        let e = Goal::eventually_nonzero();
        assert_eq!(e.prefix_status(&[5, 0, 3, 0], Some(4)), PrefixStatus::HoldsOnWindow(4));
        assert_eq!(e.prefix_status(&[5, 0, 3, 0], Some(3)), PrefixStatus::ViolatedAtAllWindows);
        assert_eq!(e.prefix_status(&[], None), PrefixStatus::Undetermined);
    }

    #[test]
    fn shift_laws() {
        let e = Goal::eventually_nonzero();
        assert_eq!(e.shift(0), e);
        assert_eq!(e.shift(5), e);
        assert!(e.is_shift_invariant());
        let a = Goal::always_nonzero(7);
        assert_eq!(a.shift(3).shift(2), a.shift(5));
        assert_eq!(a.shift(3).kind, GoalKind::Always { from: 4 });
    }

    #[test]
    fn escape_goal_shrinks_under_shift() {
        let part = make_partition(&[1, 2, 4, 8, 16, 32]).unwrap();
        let g = Goal::partition_escape(part.clone());
        assert!(g.accept(0, 1) && !g.accept(1, 1) && g.accept(1, 3));
        let reps: Vec<u64> = (0..6).map(|t| part.block_start(t).unwrap() as u64).collect();
        let rep = shifted_inclusions(&g, 0, 1, 4, &reps);
        assert!(rep.strictly_decreasing());
        let e = shifted_inclusions(&Goal::eventually_nonzero(), 0, 1, 4, &[0, 1, 2]);
        assert!(e.earlier_in_later && e.later_in_earlier);
    }

    #[test]
    fn parse_round_trip() {
        let f = DistributionFamily::example42();
        for s in ["eventually-nonzero", "always-nonzero", "always-nonzero(from=3)", "shifted(always-nonzero(from=3), 1)"] {
            let g = Goal::parse(s, &f).unwrap();
            assert_eq!(Goal::parse(&g.to_string(), &f).unwrap(), g);
        }
        assert_eq!(Goal::parse("shifted(always-nonzero(from=3), 1)", &f).unwrap(), Goal::always_nonzero(2));
        assert!(Goal::parse("partition-escape", &f).is_err());
        let p = DistributionFamily::example43(crate::distmodel::PartitionInstance::Small);
        let g = Goal::parse("shifted(partition-escape, 2)", &p).unwrap();
        assert_eq!(g.shift, 2);
        assert_eq!(Goal::parse(&g.to_string(), &p).unwrap(), g);
        assert!(Goal::parse("nonsense", &f).is_err());
    }
}
