//! Stage-indexed primitive distributions, cardinality laws and their
//! generating functions, and the analytic condition checkers.

mod action_set;
mod family;
mod law;

pub use action_set::ActionSet;
pub use family::{
    cardinality_law, Atom, DistributionFamily, FamilySpec, PartitionConditions, PartitionInstance,
    PartitionParams, PrimitiveDistribution, TableRow, MAX_TAIL_MASS,
};
pub use law::{
    compose_laws, dominance_gap, dominates, lamperti_check, law_moments, pgf_eval, CardinalityLaw,
    DiscreteLaw, LampertiReport, Moment, Moments, CAP_OVERFLOW_WARN, EULER_GAMMA, EXP_NEG_GAMMA,
    NORMALIZATION_TOL,
};

use std::ops::Deref;

use crate::error::Result;

/// Default support cap for composed laws.
pub const DEFAULT_N_MAX: usize = 4096;

/// Law of `#omega_m` under `mu_t`, the generating function
/// `g_t o g_{t+1} o ... o g_{t+m-1}`, truncated at `n_max`.
pub fn compose_cardinality(family: &DistributionFamily, t: usize, m: usize, n_max: usize) -> Result<CardinalityLaw> {
    if m == 0 {
        return CardinalityLaw::dirac(1);
    }
    let innermost = family.cardinality_law(t + m - 1)?.into_inner().truncated(n_max as u128);
    let mut acc = CardinalityLaw::new(innermost)?;
    for j in (t..t + m - 1).rev() {
        acc = compose_laws(family.cardinality_law(j)?.deref(), &acc, n_max)?;
    }
    Ok(acc)
}

/// Smallest law dominating every `#p_t` for `t <= t_max`: its cdf is the
/// pointwise minimum of the stage cdfs. A law dominates all those stages iff
/// it dominates this envelope.
pub fn dominating_envelope(family: &DistributionFamily, t_max: usize) -> Result<CardinalityLaw> {
    let laws = (0..=t_max).map(|t| family.cardinality_law(t)).collect::<Result<Vec<_>>>()?;
    let mut points: Vec<u128> = laws.iter().flat_map(|l| l.atoms().iter().map(|a| a.0)).collect();
    points.sort_unstable();
    points.dedup();
    let mut prev = 0.0;
    let mut atoms = Vec::with_capacity(points.len());
    for n in points {
        let f = laws.iter().map(|l| l.cdf(n)).fold(f64::INFINITY, f64::min);
        if f > prev {
            atoms.push((n, f - prev));
            prev = f;
        }
    }
    let tail = (1.0 - prev).max(0.0);
    CardinalityLaw::from_pmf(atoms, tail)
}

/// `q(1) = 1/2`, `q(1 + 2^t) = 2^-t / 4`: a Lamperti law dominating every
/// cardinality law of the `example45` family. Atoms stop at `t = 38`, which
/// leaves a tail below `1e-12`.
pub fn example45_dominating_law() -> CardinalityLaw {
    const LAST: u32 = 38;
    let atoms = std::iter::once((1u128, 0.5)).chain((0..=LAST).map(|t| (1 + (1u128 << t), 0.25 * (-(t as f64)).exp2())));
    CardinalityLaw::from_pmf(atoms, 0.25 * (-(LAST as f64)).exp2()).expect("valid law")
}
