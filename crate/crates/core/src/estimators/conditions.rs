//! Which zero-one law preconditions a problem meets.

use serde::Serialize;

use crate::distmodel::{
    compose_cardinality, dominates, dominating_envelope, lamperti_check, law_moments, DiscreteLaw, DistributionFamily,
    FamilySpec, LampertiReport, Moment, PartitionParams, DEFAULT_N_MAX,
};
use crate::error::Result;
use crate::goals::{shifted_inclusions, Goal};

/// Kinds of precondition evaluated by [`check_conditions`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionKind {
    Lamperti,
    Fearn,
    Dominance,
    ShiftInvariance,
    TimeInvariance,
}

impl std::str::FromStr for ConditionKind {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "lamperti" => ConditionKind::Lamperti,
            "fearn" => ConditionKind::Fearn,
            "dominance" => ConditionKind::Dominance,
            "shift-invariance" => ConditionKind::ShiftInvariance,
            "time-invariance" => ConditionKind::TimeInvariance,
            _ => return Err(crate::Error::Config(format!("unknown condition `{s}`"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LampertiDominance {
    pub m: usize,
    /// The law tested: the smallest law dominating `#p_t^m` for `t <= t_max`,
    /// or the supplied candidate.
    pub candidate: &'static str,
    pub dominates: bool,
    pub lamperti: LampertiReport,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    pub family: String,
    pub goal: String,
    pub t_max: usize,
    /// Every stage offers a single action.
    pub deterministic: bool,
    pub time_invariant: bool,
    pub shift_invariant: bool,
    /// Some `k0 < k1` with `G_{k0} ⊆ G_{k1}` (checked for `k1 <= 4`).
    pub shift_inclusion: Option<(usize, usize)>,
    /// Mean of the dominating envelope of `#p_t`.
    pub envelope_mean: Moment,
    pub finite_mean_dominance: bool,
    pub lamperti_dominance: LampertiDominance,
    /// Zero-one laws whose preconditions hold.
    pub applicable: Vec<String>,
}

pub const LABEL_KOLMOGOROV: &str = "Kolmogorov case: every value is 0 or 1";
pub const LABEL_INVARIANCE: &str = "time-invariant family with a weakening shifted goal: omniscient and m-foresight zero-one laws";
pub const LABEL_FINITE_MEAN: &str = "finite-mean dominance: omniscient and m-foresight zero-one laws";
pub const LABEL_LAMPERTI: &str = "Lamperti dominance: m-foresight zero-one law";

/// Mean of the time-invariant partition law. It is finite iff the terms
/// `m_t (r_t - r_{t-1})` shrink; the first six blocks decide.
pub fn partition_mean(p: &PartitionParams) -> Moment {
    let blocks = p.log2_sizes.len().min(6);
    let terms: Vec<f64> = (0..blocks).map(|t| p.log2_sizes[t].exp2() * p.block_mass(t)).collect();
    if terms.windows(2).last().is_some_and(|w| w[1] < w[0]) {
        Moment::Finite(terms.iter().sum())
    } else {
        Moment::Infinite
    }
}

/// Mean of the smallest law dominating `#p_t` for all `t`, judged on stages
/// up to `t_max`: infinite when the envelope's mean still grows between
/// `t_max / 2` and `t_max`.
fn envelope_mean(family: &DistributionFamily, t_max: usize) -> Result<Moment> {
    if let Some(p) = family.partition_params() {
        return Ok(partition_mean(p));
    }
    let full = law_moments(&*dominating_envelope(family, t_max)?).mean;
    let half = law_moments(&*dominating_envelope(family, t_max / 2)?).mean;
    Ok(match (full, half) {
        (Moment::Finite(a), Moment::Finite(b)) if a <= 1.01 * b + 1e-12 => Moment::Finite(a),
        _ => Moment::Infinite,
    })
}

fn deterministic(family: &DistributionFamily, t_max: usize) -> Result<bool> {
    if let FamilySpec::DiracSingletons { .. } = family.spec() {
        return Ok(true);
    }
    for t in 0..=t_max {
        let p = family.stage(t)?;
        if p.tail_mass() > 0.0 || p.atoms().iter().any(|a| a.mass > 0.0 && a.set.len() != 1) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Evaluates the preconditions on stages `0..=t_max`. `candidate` replaces
/// the envelope as the law tried against the Lamperti condition at
/// foresight `m`.
pub fn check_conditions(
    family: &DistributionFamily,
    goal: &Goal,
    m: usize,
    t_max: usize,
    candidate: Option<&DiscreteLaw>,
    n_probe: u128,
) -> Result<ConditionReport> {
    let envelope = dominating_envelope(family, t_max)?;
    let envelope_mean = envelope_mean(family, t_max)?;
    let finite_mean_dominance = matches!(envelope_mean, Moment::Finite(_));
    let lamperti_dominance = {
        let laws = (0..=t_max)
            .map(|t| if m == 1 { family.cardinality_law(t) } else { compose_cardinality(family, t, m, DEFAULT_N_MAX) })
            .collect::<Result<Vec<_>>>()?;
        let (name, q) = match candidate {
            Some(q) => ("supplied", q.clone()),
            None => ("envelope", envelope.clone().into_inner()),
        };
        let dom = laws.iter().all(|l| dominates(&q, l));
        let lamperti = lamperti_check(&q, n_probe)?;
        LampertiDominance { m, candidate: name, dominates: dom, holds: dom && lamperti.verdict, lamperti }
    };
    let actions: Vec<u64> = (0..64).chain([1 << 20, 1 << 40, u64::MAX]).collect();
    let shift_inclusion = (0..4usize)
        .flat_map(|k0| (k0 + 1..=4).map(move |k1| (k0, k1)))
        .find(|&(k0, k1)| shifted_inclusions(goal, k0, k1, 16, &actions).earlier_in_later);
    let deterministic = deterministic(family, t_max)?;
    let time_invariant = family.is_time_invariant();
    let mut applicable = Vec::new();
    if deterministic {
        applicable.push(LABEL_KOLMOGOROV.to_string());
    }
    if time_invariant && shift_inclusion.is_some() {
        applicable.push(LABEL_INVARIANCE.to_string());
    }
    if finite_mean_dominance {
        applicable.push(LABEL_FINITE_MEAN.to_string());
    }
    if lamperti_dominance.holds {
        applicable.push(format!("{LABEL_LAMPERTI} at m={m}"));
    }
    Ok(ConditionReport {
        family: family.name(),
        goal: goal.to_string(),
        t_max,
        deterministic,
        time_invariant,
        shift_invariant: goal.is_shift_invariant(),
        shift_inclusion,
        envelope_mean,
        finite_mean_dominance,
        lamperti_dominance,
        applicable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distmodel::{example45_dominating_law, PartitionInstance};
    use crate::goals::make_partition;

    #[test]
    fn example45_meets_the_lamperti_condition_only() {
        let f = DistributionFamily::example45();
        let r = check_conditions(&f, &Goal::eventually_nonzero(), 1, 52, None, 1_000_000_000).unwrap();
        assert!(!r.finite_mean_dominance);
        assert!(r.lamperti_dominance.holds, "{r:?}");
        assert_eq!(r.applicable, vec![format!("{LABEL_LAMPERTI} at m=1")]);
        let q = example45_dominating_law();
        let s = check_conditions(&f, &Goal::eventually_nonzero(), 1, 52, Some(&q), 1_000_000_000).unwrap();
        assert!(s.lamperti_dominance.holds);
    }

    #[test]
    fn dummy_family_is_the_kolmogorov_case() {
        let f = DistributionFamily::dirac_singletons(5);
        let r = check_conditions(&f, &Goal::always_nonzero(0), 1, 8, None, 1000).unwrap();
        assert!(r.deterministic && r.finite_mean_dominance);
        assert_eq!(r.applicable[0], LABEL_KOLMOGOROV);
    }

    #[test]
    fn invariance_pairs() {
        let two = DistributionFamily::bernoulli_two_sets(
            &crate::ActionSet::singleton(0),
            &crate::ActionSet::range(0, 3).unwrap(),
            0.5,
        )
        .unwrap();
        let r = check_conditions(&two, &Goal::eventually_nonzero(), 1, 4, None, 1000).unwrap();
        assert!(r.applicable.iter().any(|l| l == LABEL_INVARIANCE));
        let f = DistributionFamily::example43(PartitionInstance::Small);
        let p = make_partition(&f.partition_params().unwrap().sizes).unwrap();
        let r = check_conditions(&f, &Goal::partition_escape(p), 1, 4, None, 1000).unwrap();
        assert!(r.time_invariant && r.shift_inclusion.is_none() && !r.shift_invariant);
        let e = check_conditions(&DistributionFamily::example42(), &Goal::eventually_nonzero(), 1, 20, None, 1000).unwrap();
        assert!(e.shift_invariant && !e.time_invariant);
        assert!(!e.lamperti_dominance.holds);
    }
}
