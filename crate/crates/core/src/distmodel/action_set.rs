use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A non-empty finite set of actions.
///
/// Stored as sorted, disjoint, non-adjacent inclusive runs so that large
/// intervals such as `{0, ..., 2^20}` cost O(1) memory.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionSet {
    runs: Vec<(u64, u64)>,
}

impl ActionSet {
    pub fn new(elements: impl IntoIterator<Item = u64>) -> Result<Self> {
        let mut v: Vec<u64> = elements.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self::from_runs(v.into_iter().map(|a| (a, a)))
    }

    pub fn singleton(a: u64) -> Self {
        ActionSet { runs: vec![(a, a)] }
    }

    /// The interval `{lo, ..., hi}`.
    pub fn range(lo: u64, hi: u64) -> Result<Self> {
        if lo > hi {
            return Err(Error::InvalidActionSet(format!("empty range {lo}-{hi}")));
        }
        Ok(ActionSet { runs: vec![(lo, hi)] })
    }

    /// Builds a set from inclusive runs in any order; overlapping and
    /// adjacent runs are merged.
    pub fn from_runs(runs: impl IntoIterator<Item = (u64, u64)>) -> Result<Self> {
        let mut raw: Vec<(u64, u64)> = runs.into_iter().collect();
        if raw.is_empty() {
            return Err(Error::InvalidActionSet("empty set".into()));
        }
        if let Some(&(lo, hi)) = raw.iter().find(|(lo, hi)| lo > hi) {
            return Err(Error::InvalidActionSet(format!("empty run {lo}-{hi}")));
        }
        raw.sort_unstable();
        let mut merged: Vec<(u64, u64)> = Vec::with_capacity(raw.len());
        for (lo, hi) in raw {
            match merged.last_mut() {
                Some(last) if lo <= last.1.saturating_add(1) => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        Ok(ActionSet { runs: merged })
    }

    pub fn runs(&self) -> &[(u64, u64)] {
        &self.runs
    }

    /// Number of elements.
    pub fn len(&self) -> u64 {
        self.runs.iter().map(|&(lo, hi)| hi - lo + 1).sum()
    }

    /// Always false; present for API symmetry with collections.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min(&self) -> u64 {
        self.runs[0].0
    }

    pub fn max(&self) -> u64 {
        self.runs[self.runs.len() - 1].1
    }

    pub fn contains(&self, a: u64) -> bool {
        let i = self.runs.partition_point(|&(_, hi)| hi < a);
        i < self.runs.len() && self.runs[i].0 <= a
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.runs.iter().flat_map(|&(lo, hi)| lo..=hi)
    }

    /// Smallest element satisfying `pred`, scanning in increasing order.
    pub fn find(&self, mut pred: impl FnMut(u64) -> bool) -> Option<u64> {
        self.iter().find(|&a| pred(a))
    }

    /// Smallest non-zero element.
    pub fn min_nonzero(&self) -> Option<u64> {
        self.iter().find(|&a| a != 0)
    }

    /// Number of non-zero elements.
    pub fn count_nonzero(&self) -> u64 {
        self.len() - u64::from(self.contains(0))
    }
}

impl fmt::Display for ActionSet {
    /// `0-2048` for an interval, `0,3,5-7` in general.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, &(lo, hi)) in self.runs.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            if lo == hi {
                write!(f, "{lo}")?;
            } else {
                write!(f, "{lo}-{hi}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for ActionSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse = |t: &str| {
            t.trim()
                .parse::<u64>()
                .map_err(|e| Error::Parse(format!("action set `{s}`: {e}")))
        };
        let runs = s
            .split(',')
            .map(|tok| match tok.split_once('-') {
                Some((lo, hi)) => Ok((parse(lo)?, parse(hi)?)),
                None => parse(tok).map(|a| (a, a)),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_runs(runs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_runs() {
        let s = ActionSet::new([5, 3, 4, 0, 9, 3]).unwrap();
        assert_eq!(s.runs(), &[(0, 0), (3, 5), (9, 9)]);
        assert_eq!(s.len(), 5);
        assert_eq!(s.to_string(), "0,3-5,9");
        assert_eq!("0,3-5,9".parse::<ActionSet>().unwrap(), s);
        assert!(s.contains(4) && !s.contains(6) && !s.contains(10));
        assert_eq!(s.min_nonzero(), Some(3));
        assert_eq!(s.count_nonzero(), 4);
    }

    #[test]
    fn empty_rejected() {
        assert!(ActionSet::new([]).is_err());
        assert!("".parse::<ActionSet>().is_err());
        assert!(ActionSet::range(3, 2).is_err());
    }

    #[test]
    fn adjacent_runs_merge() {
        let s = ActionSet::from_runs([(4, 6), (0, 3)]).unwrap();
        assert_eq!(s, ActionSet::range(0, 6).unwrap());
    }
}
