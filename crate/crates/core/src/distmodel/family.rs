use std::f64::consts::LN_2;
use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use super::action_set::ActionSet;
use super::law::{CardinalityLaw, DiscreteLaw, NORMALIZATION_TOL};
use crate::error::{Error, Result};

/// Largest tail bound accepted for a primitive distribution.
pub const MAX_TAIL_MASS: f64 = 1e-12;

/// One action set with its probability and log-probability.
#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub set: Arc<ActionSet>,
    pub mass: f64,
    pub ln_mass: f64,
}

impl Atom {
    pub fn new(set: ActionSet, mass: f64) -> Self {
        Atom { set: Arc::new(set), mass, ln_mass: mass.ln() }
    }

    /// Atom with mass `1 - complement`; the log is taken through `ln_1p`.
    pub fn with_complement(set: ActionSet, complement: f64) -> Self {
        Atom { set: Arc::new(set), mass: 1.0 - complement, ln_mass: (-complement).ln_1p() }
    }
}

/// Law of the action set offered at a node of a given stage.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimitiveDistribution {
    atoms: Vec<Atom>,
    cum: Vec<f64>,
    tail_mass: f64,
}

impl PrimitiveDistribution {
    pub fn new(rows: impl IntoIterator<Item = (ActionSet, f64)>, tail_mass: f64) -> Result<Self> {
        Self::from_atoms(rows.into_iter().map(|(s, p)| Atom::new(s, p)).collect(), tail_mass)
    }

    pub fn from_atoms(atoms: Vec<Atom>, tail_mass: f64) -> Result<Self> {
        Self::build(atoms, tail_mass, MAX_TAIL_MASS)
    }

    fn build(atoms: Vec<Atom>, tail_mass: f64, max_tail: f64) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        if !(0.0..=max_tail).contains(&tail_mass) {
            return Err(Error::InvalidDistribution(format!("tail mass {tail_mass} exceeds {max_tail}")));
        }
        if let Some(a) = atoms.iter().find(|a| !(a.mass > 0.0 && a.mass <= 1.0)) {
            return Err(Error::InvalidDistribution(format!("mass {} for set {}", a.mass, a.set)));
        }
        let mut sets: Vec<&ActionSet> = atoms.iter().map(|a| a.set.as_ref()).collect();
        sets.sort();
        if let Some(w) = sets.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidDistribution(format!("duplicate set {}", w[0])));
        }
        let mut cum = Vec::with_capacity(atoms.len());
        let mut acc = 0.0;
        for a in &atoms {
            acc += a.mass;
            cum.push(acc);
        }
        if (acc + tail_mass - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!("masses sum to {acc} (tail {tail_mass})")));
        }
        Ok(PrimitiveDistribution { atoms, cum, tail_mass })
    }

    pub fn dirac(set: ActionSet) -> Self {
        PrimitiveDistribution { atoms: vec![Atom::new(set, 1.0)], cum: vec![1.0], tail_mass: 0.0 }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Inverse-cdf draw for `u` in [0, 1). Uniforms landing in the tail
    /// region map to the last listed atom.
    #[inline]
    pub fn sample(&self, u: f64) -> &Arc<ActionSet> {
        let i = self.cum.partition_point(|&c| c <= u);
        &self.atoms[i.min(self.atoms.len() - 1)].set
    }

    pub fn mass_of(&self, set: &ActionSet) -> f64 {
        self.atoms.iter().find(|a| a.set.as_ref() == set).map_or(0.0, |a| a.mass)
    }

    /// `ln p(set)`, negative infinity when the set is not charged.
    pub fn ln_mass_of(&self, set: &ActionSet) -> f64 {
        self.atoms
            .iter()
            .find(|a| a.set.as_ref() == set)
            .map_or(f64::NEG_INFINITY, |a| a.ln_mass)
    }
}

/// Law of `#A` for `A ~ p`.
pub fn cardinality_law(p: &PrimitiveDistribution) -> CardinalityLaw {
    let law = DiscreteLaw::new(p.atoms.iter().map(|a| (a.set.len() as u128, a.mass)), p.tail_mass)
        .expect("a valid primitive distribution has a valid cardinality law");
    CardinalityLaw::new(law).expect("action sets are non-empty")
}

/// Which parameter set of the partition family to build.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionInstance {
    /// `m_t = (t+1)^3 m_0 ... m_{t-1}`, `r_t = 2^{-(t+1)/m_t}`.
    #[default]
    Shipped,
    /// `m_t = 2^t`, `r_t = 1 - 2 * 4^{-(t+1)}`.
    Small,
}

/// Parameters of the time-invariant partition family: block sizes `m_t` and
/// cumulative probabilities `r_t = P(set in {M_0, ..., M_t})`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartitionParams {
    pub instance: PartitionInstance,
    /// Exact block sizes while they fit in `u128`.
    pub sizes: Vec<u128>,
    /// `log2 m_t`, available beyond the exact range.
    pub log2_sizes: Vec<f64>,
    /// `1 - r_t`.
    pub r_complement: Vec<f64>,
}

impl PartitionParams {
    pub fn new(instance: PartitionInstance, blocks: usize) -> Self {
        let mut sizes: Vec<u128> = Vec::new();
        let mut log2_sizes = Vec::with_capacity(blocks);
        let mut r_complement = Vec::with_capacity(blocks);
        let mut log2_prod = 0.0f64;
        let mut prod: Option<u128> = Some(1);
        for t in 0..blocks {
            let (log2_m, exact) = match instance {
                PartitionInstance::Shipped if t == 0 => (0.0, Some(1u128)),
                PartitionInstance::Shipped => {
                    let c = ((t + 1) as u128).pow(3);
                    (3.0 * ((t + 1) as f64).log2() + log2_prod, prod.and_then(|p| p.checked_mul(c)))
                }
                PartitionInstance::Small => (t as f64, 1u128.checked_shl(t as u32)),
            };
            let rc = match instance {
                PartitionInstance::Shipped => -(-((t + 1) as f64) * std::f64::consts::LN_2 * (-log2_m).exp2()).exp_m1(),
                PartitionInstance::Small => 2.0 * 4f64.powi(-(t as i32 + 1)),
            };
            log2_sizes.push(log2_m);
            r_complement.push(rc);
            if let Some(m) = exact.filter(|_| sizes.len() == t) {
                sizes.push(m);
            }
            log2_prod += log2_m;
            prod = prod.zip(exact).and_then(|(p, m)| p.checked_mul(m));
        }
        PartitionParams { instance, sizes, log2_sizes, r_complement }
    }

    pub fn r(&self, t: usize) -> f64 {
        1.0 - self.r_complement[t]
    }

    /// `ln r_t`, accurate when `r_t` is close to one.
    pub fn ln_r(&self, t: usize) -> f64 {
        (-self.r_complement[t]).ln_1p()
    }

    /// `ln(-ln r_t)`, finite even when `r_t` rounds to one.
    pub fn ln_neg_ln_r(&self, t: usize) -> f64 {
        match self.instance {
            PartitionInstance::Shipped => ((t + 1) as f64 * LN_2).ln() - self.log2_sizes[t] * LN_2,
            PartitionInstance::Small => (-self.ln_r(t)).ln(),
        }
    }

    /// Mass of block `t`: `r_t - r_{t-1}`.
    pub fn block_mass(&self, t: usize) -> f64 {
        if t == 0 {
            self.r(0)
        } else {
            self.r_complement[t - 1] - self.r_complement[t]
        }
    }

    /// Conditions (a)-(c) on the first `blocks` terms: sizes start at one and
    /// increase strictly, `r_t` increases strictly inside (0, 1), and the two
    /// products stay bounded away from zero (their logs are returned).
    pub fn conditions(&self) -> PartitionConditions {
        let n = self.log2_sizes.len();
        let sizes_ok = self.log2_sizes[0] == 0.0 && self.log2_sizes.windows(2).all(|w| w[1] > w[0]);
        let lnl: Vec<f64> = (0..n).map(|t| self.ln_neg_ln_r(t)).collect();
        let r_ok = (0..n).all(|t| self.r(t) > 0.0 && lnl[t].is_finite()) && lnl.windows(2).all(|w| w[1] < w[0]);
        let mut log2_prefix = 0.0f64;
        let mut ln_lambda = 0.0;
        let mut ln_theta = 0.0;
        for t in 0..n {
            let lnl = self.ln_neg_ln_r(t);
            // ln r_t^{m_0 ... m_{t-1}} = -exp(ln(m_0 ... m_{t-1}) + ln(-ln r_t))
            ln_lambda -= (log2_prefix * LN_2 + lnl).exp();
            // ln(1 - r_t^{m_t})
            ln_theta += (-(-(self.log2_sizes[t] * LN_2 + lnl).exp()).exp()).ln_1p();
            log2_prefix += self.log2_sizes[t];
        }
        PartitionConditions { increasing_sizes: sizes_ok, increasing_r: r_ok, ln_lambda_product: ln_lambda, ln_theta_product: ln_theta }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartitionConditions {
    pub increasing_sizes: bool,
    pub increasing_r: bool,
    /// `ln prod_t r_t^{m_0 ... m_{t-1}}` over the computed blocks.
    pub ln_lambda_product: f64,
    /// `ln prod_t (1 - r_t^{m_t})` over the computed blocks.
    pub ln_theta_product: f64,
}

impl PartitionConditions {
    pub fn hold(&self) -> bool {
        self.increasing_sizes
            && self.increasing_r
            && self.ln_lambda_product.is_finite()
            && self.ln_theta_product.is_finite()
    }
}

/// One row of an explicit stage table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableRow {
    /// Action set in the `0,3,5-7` notation.
    pub set: String,
    pub mass: f64,
}

/// Declarative description of a family, as found in config documents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilySpec {
    /// `p_t({0}) = 1 - 2^{-(t+1)}`, `p_t({0, ..., (t+1) 2^{t+1}}) = 2^{-(t+1)}`.
    Example42,
    /// Time-invariant law over the blocks of a partition of the naturals.
    Example43 {
        #[serde(default)]
        instance: PartitionInstance,
    },
    /// `p_t({0, ..., 2^{t+i}}) = 2^{-t-i} / 4` for `i = 0..12`, rest on `{0}`.
    Example45,
    /// Every action set is `{action}`.
    DiracSingletons {
        #[serde(default)]
        action: u64,
    },
    /// `a` with probability `prob`, otherwise `b`.
    BernoulliTwoSets { a: String, b: String, prob: f64 },
    /// Explicit per-stage rows; stages past the table repeat the last one.
    Table { stages: Vec<Vec<TableRow>> },
}

impl fmt::Display for FamilySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilySpec::Example42 => f.write_str("example42"),
            FamilySpec::Example43 { instance: PartitionInstance::Shipped } => f.write_str("example43"),
            FamilySpec::Example43 { instance: PartitionInstance::Small } => f.write_str("example43-small"),
            FamilySpec::Example45 => f.write_str("example45"),
            FamilySpec::DiracSingletons { action } => write!(f, "dirac-singletons({action})"),
            FamilySpec::BernoulliTwoSets { a, b, prob } => write!(f, "bernoulli-two-sets({{{a}}},{{{b}}},{prob})"),
            FamilySpec::Table { stages } => write!(f, "table({} stages)", stages.len()),
        }
    }
}

const CACHED_STAGES: usize = 128;

#[derive(Debug)]
struct Inner {
    spec: FamilySpec,
    table: Vec<Arc<PrimitiveDistribution>>,
    partition: Option<PartitionParams>,
    cache: Vec<OnceLock<Arc<PrimitiveDistribution>>>,
}

/// Stage-indexed primitive distributions `p_0, p_1, ...`.
///
/// Stage laws are pure functions of the stage index; they are memoized, and
/// the handle is cheap to clone and share between threads.
#[derive(Clone, Debug)]
pub struct DistributionFamily {
    inner: Arc<Inner>,
}

impl PartialEq for DistributionFamily {
    fn eq(&self, other: &Self) -> bool {
        self.inner.spec == other.inner.spec
    }
}

impl DistributionFamily {
    pub fn from_spec(spec: FamilySpec) -> Result<Self> {
        let mut table = Vec::new();
        let mut partition = None;
        match &spec {
            FamilySpec::BernoulliTwoSets { a, b, prob } => {
                let (a, b): (ActionSet, ActionSet) = (a.parse()?, b.parse()?);
                if !(0.0..=1.0).contains(prob) {
                    return Err(Error::InvalidDistribution(format!("probability {prob}")));
                }
                let rows = if a == b || *prob == 1.0 {
                    vec![(a, 1.0)]
                } else if *prob == 0.0 {
                    vec![(b, 1.0)]
                } else {
                    vec![(a, *prob), (b, 1.0 - prob)]
                };
                table.push(Arc::new(PrimitiveDistribution::new(rows, 0.0)?));
            }
            FamilySpec::Table { stages } => {
                if stages.is_empty() {
                    return Err(Error::InvalidDistribution("table without stages".into()));
                }
                for rows in stages {
                    let rows = rows
                        .iter()
                        .map(|r| Ok((r.set.parse::<ActionSet>()?, r.mass)))
                        .collect::<Result<Vec<_>>>()?;
                    table.push(Arc::new(PrimitiveDistribution::new(rows, 0.0)?));
                }
            }
            FamilySpec::Example43 { instance } => {
                let blocks = match instance {
                    PartitionInstance::Shipped => 6,
                    PartitionInstance::Small => 21,
                };
                partition = Some(PartitionParams::new(*instance, blocks));
            }
            _ => {}
        }
        let cache = (0..CACHED_STAGES).map(|_| OnceLock::new()).collect();
        Ok(DistributionFamily { inner: Arc::new(Inner { spec, table, partition, cache }) })
    }

    pub fn example42() -> Self {
        Self::from_spec(FamilySpec::Example42).expect("built-in")
    }

    pub fn example43(instance: PartitionInstance) -> Self {
        Self::from_spec(FamilySpec::Example43 { instance }).expect("built-in")
    }

    pub fn example45() -> Self {
        Self::from_spec(FamilySpec::Example45).expect("built-in")
    }

    pub fn dirac_singletons(action: u64) -> Self {
        Self::from_spec(FamilySpec::DiracSingletons { action }).expect("built-in")
    }

    pub fn bernoulli_two_sets(a: &ActionSet, b: &ActionSet, prob: f64) -> Result<Self> {
        Self::from_spec(FamilySpec::BernoulliTwoSets { a: a.to_string(), b: b.to_string(), prob })
    }

    /// Time-invariant family with the given rows.
    pub fn constant(rows: Vec<(ActionSet, f64)>) -> Result<Self> {
        let stages = vec![rows.into_iter().map(|(s, mass)| TableRow { set: s.to_string(), mass }).collect()];
        Self::from_spec(FamilySpec::Table { stages })
    }

    pub fn spec(&self) -> &FamilySpec {
        &self.inner.spec
    }

    pub fn name(&self) -> String {
        self.inner.spec.to_string()
    }

    pub fn is_time_invariant(&self) -> bool {
        match &self.inner.spec {
            FamilySpec::Example42 | FamilySpec::Example45 => false,
            FamilySpec::Table { stages } => stages.len() == 1,
            _ => true,
        }
    }

    /// Parameters of the partition family, when this is one.
    pub fn partition_params(&self) -> Option<&PartitionParams> {
        self.inner.partition.as_ref()
    }

    /// Human-readable statements about parametrization choices that differ
    /// from a literal reading of the family's tabulated definition.
    pub fn notes(&self) -> Vec<String> {
        match &self.inner.spec {
            FamilySpec::Example42 => vec![
                "example42 is parametrized as p_t({0}) = 1 - 2^-(t+1), p_t({0,...,(t+1)*2^(t+1)}) = 2^-(t+1): \
                 the tabulated two-set family advanced by one stage, so that the root is {0} with probability 1/2"
                    .into(),
            ],
            FamilySpec::Example43 { instance: PartitionInstance::Shipped } => vec![
                "example43 uses m_t = (t+1)^3 * m_0...m_{t-1} and r_t = 2^-((t+1)/m_t); \
                 sampling lists blocks M_0..M_4 (labels must fit in 64 bits), leaving tail mass 1 - r_4"
                    .into(),
            ],
            _ => Vec::new(),
        }
    }

    /// Stage law `p_t`.
    pub fn stage(&self, t: usize) -> Result<Arc<PrimitiveDistribution>> {
        let key = if self.is_time_invariant() { 0 } else { t };
        if let Some(slot) = self.inner.cache.get(key) {
            if let Some(p) = slot.get() {
                return Ok(p.clone());
            }
            let p = Arc::new(self.build_stage(key)?);
            return Ok(slot.get_or_init(|| p).clone());
        }
        Ok(Arc::new(self.build_stage(key)?))
    }

    fn out_of_range(&self, t: usize) -> Error {
        Error::StageOutOfRange { family: self.name(), stage: t }
    }

    fn build_stage(&self, t: usize) -> Result<PrimitiveDistribution> {
        match &self.inner.spec {
            FamilySpec::Example42 => {
                let hi = ((t as u64) + 1)
                    .checked_shl(t as u32 + 1)
                    .filter(|_| t < 57)
                    .ok_or_else(|| self.out_of_range(t))?;
                let c = (-(t as i32 + 1) as f64).exp2();
                PrimitiveDistribution::from_atoms(
                    vec![Atom::with_complement(ActionSet::singleton(0), c), Atom::new(ActionSet::range(0, hi)?, c)],
                    0.0,
                )
            }
            FamilySpec::Example45 => {
                if t + 11 >= 64 {
                    return Err(self.out_of_range(t));
                }
                let big = |i: usize| 0.25 * (-((t + i) as f64)).exp2();
                let zero_complement: f64 = (0..12).map(big).sum();
                let mut atoms = vec![Atom::with_complement(ActionSet::singleton(0), zero_complement)];
                for i in 0..12 {
                    atoms.push(Atom::new(ActionSet::range(0, 1u64 << (t + i))?, big(i)));
                }
                PrimitiveDistribution::from_atoms(atoms, 0.0)
            }
            FamilySpec::DiracSingletons { action } => Ok(PrimitiveDistribution::dirac(ActionSet::singleton(*action))),
            FamilySpec::BernoulliTwoSets { .. } | FamilySpec::Table { .. } => {
                let table = &self.inner.table;
                Ok(table[t.min(table.len() - 1)].as_ref().clone())
            }
            FamilySpec::Example43 { instance } => {
                let params = self.inner.partition.as_ref().expect("partition family has parameters");
                let mut atoms = Vec::new();
                let mut start: u64 = 0;
                let mut listed = 0;
                for (b, &m) in params.sizes.iter().enumerate() {
                    let Some(end) = u64::try_from(m).ok().and_then(|m| start.checked_add(m - 1)) else {
                        break;
                    };
                    let atom = if b == 0 {
                        Atom::new(ActionSet::range(start, end)?, params.r(0))
                    } else {
                        Atom::new(ActionSet::range(start, end)?, params.block_mass(b))
                    };
                    atoms.push(atom);
                    listed = b;
                    match end.checked_add(1) {
                        Some(s) => start = s,
                        None => break,
                    }
                }
                let tail = params.r_complement[listed];
                let cap = match instance {
                    PartitionInstance::Shipped => 1e-9,
                    PartitionInstance::Small => MAX_TAIL_MASS,
                };
                PrimitiveDistribution::build(atoms, tail, cap)
            }
        }
    }

    /// Law of `#A` under `p_t`. Closed forms are used where they reach
    /// further than the sampled representation.
    pub fn cardinality_law(&self, t: usize) -> Result<CardinalityLaw> {
        match &self.inner.spec {
            FamilySpec::Example45 => {
                let big = |i: usize| 0.25 * (-((t + i) as f64)).exp2();
                let zero: f64 = 1.0 - (0..12).map(big).sum::<f64>();
                let mut atoms = vec![(1u128, zero)];
                for i in 0..12 {
                    let n = 1u128.checked_shl((t + i) as u32).ok_or_else(|| self.out_of_range(t))?;
                    atoms.push((1 + n, big(i)));
                }
                CardinalityLaw::from_pmf(atoms, 0.0)
            }
            FamilySpec::Example43 { .. } => {
                let params = self.inner.partition.as_ref().expect("partition family has parameters");
                let last = params.sizes.len() - 1;
                let atoms = params.sizes.iter().enumerate().map(|(b, &m)| (m, params.block_mass(b)));
                CardinalityLaw::from_pmf(atoms, params.r_complement[last])
            }
            _ => Ok(cardinality_law(self.stage(t)?.as_ref())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn example42_stage_zero_splits_half() {
        let f = DistributionFamily::example42();
        let p0 = f.stage(0).unwrap();
        assert_eq!(p0.atoms().len(), 2);
        assert_eq!(p0.mass_of(&ActionSet::singleton(0)), 0.5);
        assert_eq!(p0.mass_of(&ActionSet::range(0, 2).unwrap()), 0.5);
        let p3 = f.stage(3).unwrap();
        assert_eq!(p3.mass_of(&ActionSet::range(0, 64).unwrap()), 1.0 / 16.0);
    }

    #[test]
    fn example45_cardinality_closed_form_agrees() {
        let f = DistributionFamily::example45();
        for t in [0, 3, 20] {
            let a = f.cardinality_law(t).unwrap();
            let b = cardinality_law(&f.stage(t).unwrap());
            assert_eq!(a.atoms().len(), 13);
            for (x, y) in a.atoms().iter().zip(b.atoms()) {
                assert_eq!(x.0, y.0);
                assert_abs_diff_eq!(x.1, y.1, epsilon = 1e-15);
            }
        }
        assert!(f.cardinality_law(64).is_ok());
        assert!(f.stage(60).is_err());
    }

    #[test]
    fn partition_parameters() {
        let p = PartitionParams::new(PartitionInstance::Shipped, 6);
        assert_eq!(&p.sizes[..5], &[1, 8, 216, 110_592, 23_887_872_000]);
        assert_abs_diff_eq!(p.r(0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p.r(1), 2f64.powf(-0.25), epsilon = 1e-15);
        assert!(p.conditions().hold());
        let s = PartitionParams::new(PartitionInstance::Small, 21);
        assert_eq!(&s.sizes[..4], &[1, 2, 4, 8]);
        assert_abs_diff_eq!(s.r(1), 0.875, epsilon = 1e-15);
    }

    #[test]
    fn partition_family_stages() {
        let f = DistributionFamily::example43(PartitionInstance::Small);
        let p = f.stage(5).unwrap();
        assert!(p.tail_mass() <= MAX_TAIL_MASS);
        assert_eq!(p.atoms()[2].set.as_ref(), &ActionSet::range(3, 6).unwrap());
        let g = DistributionFamily::example43(PartitionInstance::Shipped);
        let p = g.stage(0).unwrap();
        assert_eq!(p.atoms().len(), 5);
        assert!(p.tail_mass() < 2e-10);
    }

    #[test]
    fn table_rejects_bad_masses() {
        let rows = vec![(ActionSet::singleton(0), 0.5), (ActionSet::singleton(1), 0.4)];
        assert!(DistributionFamily::constant(rows).is_err());
        let dup = vec![(ActionSet::singleton(0), 0.5), (ActionSet::singleton(0), 0.5)];
        assert!(DistributionFamily::constant(dup).is_err());
    }
}
