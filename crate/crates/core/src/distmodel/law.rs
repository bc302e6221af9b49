use std::ops::Deref;

use serde::Serialize;

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_6;
/// `exp(-EULER_GAMMA)`, the Lamperti threshold.
pub const EXP_NEG_GAMMA: f64 = 0.561_459_483_566_885_169_8;

/// Normalization tolerance for user-supplied masses.
pub const NORMALIZATION_TOL: f64 = 1e-9;
/// Tail mass above which a composed law is flagged as cap-overflowed.
pub const CAP_OVERFLOW_WARN: f64 = 1e-6;

/// A probability mass function on the natural numbers with an explicit bound
/// on mass lying beyond the listed atoms.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscreteLaw {
    atoms: Vec<(u128, f64)>,
    tail_mass: f64,
    #[serde(skip)]
    cum: Vec<f64>,
    #[serde(skip)]
    suffix: Vec<f64>,
}

impl DiscreteLaw {
    /// Builds a law from `(value, mass)` pairs in any order. Duplicate values
    /// are merged and zero masses dropped.
    pub fn new(atoms: impl IntoIterator<Item = (u128, f64)>, tail_mass: f64) -> Result<Self> {
        let mut v: Vec<(u128, f64)> = atoms.into_iter().collect();
        if let Some(&(n, p)) = v.iter().find(|(_, p)| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidDistribution(format!("mass {p} at {n}")));
        }
        if !(tail_mass.is_finite() && (0.0..=1.0).contains(&tail_mass)) {
            return Err(Error::InvalidDistribution(format!("tail mass {tail_mass}")));
        }
        v.sort_by_key(|&(n, _)| n);
        let mut merged: Vec<(u128, f64)> = Vec::with_capacity(v.len());
        for (n, p) in v {
            match merged.last_mut() {
                Some(last) if last.0 == n => last.1 += p,
                _ => merged.push((n, p)),
            }
        }
        merged.retain(|&(_, p)| p > 0.0);
        let law = Self::from_sorted(merged, tail_mass);
        let total = law.total_listed() + tail_mass;
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!(
                "masses sum to {total} (tail {tail_mass})"
            )));
        }
        Ok(law)
    }

    fn from_sorted(atoms: Vec<(u128, f64)>, tail_mass: f64) -> Self {
        let mut cum = Vec::with_capacity(atoms.len());
        let mut acc = 0.0;
        for &(_, p) in &atoms {
            acc += p;
            cum.push(acc);
        }
        let mut suffix = vec![0.0; atoms.len()];
        let mut acc = tail_mass;
        for i in (0..atoms.len()).rev() {
            suffix[i] = acc;
            acc += atoms[i].1;
        }
        DiscreteLaw { atoms, tail_mass, cum, suffix }
    }

    pub fn dirac(n: u128) -> Self {
        Self::from_sorted(vec![(n, 1.0)], 0.0)
    }

    pub fn atoms(&self) -> &[(u128, f64)] {
        &self.atoms
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn min_support(&self) -> u128 {
        self.atoms.first().map_or(0, |a| a.0)
    }

    pub fn max_support(&self) -> u128 {
        self.atoms.last().map_or(0, |a| a.0)
    }

    pub fn total_listed(&self) -> f64 {
        self.cum.last().copied().unwrap_or(0.0)
    }

    pub fn mass(&self, n: u128) -> f64 {
        self.atoms
            .binary_search_by_key(&n, |a| a.0)
            .map_or(0.0, |i| self.atoms[i].1)
    }

    /// Index of the first atom strictly above `n`.
    fn upper(&self, n: u128) -> usize {
        self.atoms.partition_point(|a| a.0 <= n)
    }

    /// Listed mass on `{0, ..., n}`.
    pub fn cdf(&self, n: u128) -> f64 {
        match self.upper(n) {
            0 => 0.0,
            i => self.cum[i - 1],
        }
    }

    /// Mass above `n`, tail included. Computed from suffix sums so that small
    /// survival probabilities keep their relative precision.
    pub fn survival(&self, n: u128) -> f64 {
        let i = self.upper(n);
        if i == 0 {
            self.total_listed() + self.tail_mass
        } else {
            self.suffix[i - 1]
        }
    }

    /// Smallest listed atom whose cdf reaches `u`; the largest atom when `u`
    /// falls into the tail.
    pub fn quantile(&self, u: f64) -> u128 {
        let i = self.cum.partition_point(|&c| c < u);
        self.atoms[i.min(self.atoms.len() - 1)].0
    }

    /// Probability generating function `sum q(n) x^n`.
    pub fn pgf(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("pgf argument {x} outside [0,1]")));
        }
        Ok(self.atoms.iter().map(|&(n, p)| p * pow_u128(x, n)).sum())
    }

    /// Derivative of the PGF; infinite at `x = 1` when the mean is.
    pub fn pgf_derivative(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("pgf argument {x} outside [0,1]")));
        }
        Ok(self
            .atoms
            .iter()
            .filter(|a| a.0 > 0)
            .map(|&(n, p)| p * n as f64 * pow_u128(x, n - 1))
            .sum())
    }

    /// Atoms above `n_max` are moved into the tail.
    pub fn truncated(&self, n_max: u128) -> Self {
        let keep = self.upper(n_max);
        let lost: f64 = self.atoms[keep..].iter().map(|a| a.1).sum();
        Self::from_sorted(self.atoms[..keep].to_vec(), self.tail_mass + lost)
    }
}

#[inline]
pub(crate) fn pow_u128(x: f64, n: u128) -> f64 {
    if n <= i32::MAX as u128 {
        x.powi(n as i32)
    } else {
        x.powf(n as f64)
    }
}

/// Law of the cardinality of a random action set: a [`DiscreteLaw`] with
/// support in `{1, 2, ...}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct CardinalityLaw(DiscreteLaw);

impl CardinalityLaw {
    pub fn new(law: DiscreteLaw) -> Result<Self> {
        if law.atoms.first().is_some_and(|a| a.0 == 0) {
            return Err(Error::InvalidDistribution("cardinality law with mass at 0".into()));
        }
        Ok(CardinalityLaw(law))
    }

    pub fn from_pmf(atoms: impl IntoIterator<Item = (u128, f64)>, tail_mass: f64) -> Result<Self> {
        Self::new(DiscreteLaw::new(atoms, tail_mass)?)
    }

    pub fn dirac(n: u128) -> Result<Self> {
        Self::new(DiscreteLaw::dirac(n))
    }

    /// Whether truncation discarded more than [`CAP_OVERFLOW_WARN`].
    pub fn is_cap_overflowed(&self) -> bool {
        self.0.tail_mass > CAP_OVERFLOW_WARN
    }

    pub fn into_inner(self) -> DiscreteLaw {
        self.0
    }
}

impl Deref for CardinalityLaw {
    type Target = DiscreteLaw;
    fn deref(&self) -> &DiscreteLaw {
        &self.0
    }
}

/// `sum q(n) x^n`.
pub fn pgf_eval(q: &DiscreteLaw, x: f64) -> Result<f64> {
    q.pgf(x)
}

fn dense(law: &DiscreteLaw, n_max: usize) -> Vec<f64> {
    let mut v = vec![0.0; n_max + 1];
    for &(n, p) in law.atoms() {
        if n <= n_max as u128 {
            v[n as usize] += p;
        }
    }
    v
}

/// Truncated convolution; iterates over the non-zero entries of both inputs.
fn convolve(a: &[f64], b: &[f64], n_max: usize) -> Vec<f64> {
    let nz = |v: &[f64]| -> Vec<(usize, f64)> {
        v.iter().enumerate().filter(|(_, p)| **p != 0.0).map(|(i, p)| (i, *p)).collect()
    };
    let (na, nb) = (nz(a), nz(b));
    let mut out = vec![0.0; n_max + 1];
    for &(i, p) in &na {
        for &(j, r) in &nb {
            if i + j > n_max {
                break;
            }
            out[i + j] += p * r;
        }
    }
    out
}

/// Law with PGF `outer(inner(x))`, truncated at `n_max`. The inner law must
/// have support in `{1, 2, ...}`; mass lost to the cap goes into the tail.
pub fn compose_laws(outer: &DiscreteLaw, inner: &CardinalityLaw, n_max: usize) -> Result<CardinalityLaw> {
    if n_max == 0 {
        return Err(Error::Domain("n_max must be at least 1".into()));
    }
    if outer.min_support() == 0 && !outer.atoms().is_empty() {
        return Err(Error::Domain("outer law of a composition must not charge 0".into()));
    }
    let h = dense(inner, n_max);
    let needed: Vec<(usize, f64)> = outer
        .atoms()
        .iter()
        .filter(|a| a.0 <= n_max as u128)
        .map(|&(k, p)| (k as usize, p))
        .collect();
    let mut out = vec![0.0; n_max + 1];
    // Binary powering: h^{*2^j} cached, each needed power assembled from bits.
    let mut squares: Vec<Vec<f64>> = vec![h];
    for &(k, p) in &needed {
        while (1usize << squares.len()) <= k {
            let last = squares.last().expect("non-empty");
            let sq = convolve(last, last, n_max);
            squares.push(sq);
        }
        let mut acc: Option<Vec<f64>> = None;
        for (j, sq) in squares.iter().enumerate() {
            if k >> j & 1 == 1 {
                acc = Some(match acc {
                    None => sq.clone(),
                    Some(a) => convolve(&a, sq, n_max),
                });
            }
        }
        if let Some(pk) = acc {
            for (o, v) in out.iter_mut().zip(pk) {
                *o += p * v;
            }
        }
    }
    let listed: f64 = out.iter().sum();
    let atoms = out.into_iter().enumerate().filter(|(_, p)| *p > 0.0).map(|(n, p)| (n as u128, p));
    // Rounding residue is not a tail.
    let tail = if outer.tail_mass() == 0.0 && inner.tail_mass() == 0.0 && (1.0 - listed).abs() < 1e-12 {
        0.0
    } else {
        (1.0 - listed).max(0.0)
    };
    CardinalityLaw::new(DiscreteLaw::from_sorted(atoms.collect(), tail))
}

/// First-order stochastic dominance of `q` over `r`: `F_q(n) <= F_r(n)` for
/// every `n`, with slack equal to the two tail bounds.
pub fn dominates(q: &DiscreteLaw, r: &DiscreteLaw) -> bool {
    dominance_gap(q, r) <= q.tail_mass() + r.tail_mass() + 1e-12
}

/// `sup_n (F_q(n) - F_r(n))`; non-positive when `q` dominates `r` exactly.
pub fn dominance_gap(q: &DiscreteLaw, r: &DiscreteLaw) -> f64 {
    q.atoms()
        .iter()
        .chain(r.atoms())
        .map(|&(n, _)| q.cdf(n) - r.cdf(n))
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LampertiReport {
    pub n_probe: u128,
    /// `sup n (1 - F(n))` over the window `[n_probe / 2, n_probe]`.
    pub sup_estimate: f64,
    pub argmax: u128,
    pub threshold: f64,
    pub verdict: bool,
    /// False when the supremum sits on a window edge.
    pub settled: bool,
}

/// Limsup proxy for `n (1 - F(n))` compared against `exp(-gamma)`.
pub fn lamperti_check(q: &DiscreteLaw, n_probe: u128) -> Result<LampertiReport> {
    if n_probe < 1 {
        return Err(Error::Domain("n_probe must be at least 1".into()));
    }
    let lo = n_probe.div_ceil(2).max(1);
    let hi = n_probe;
    // n (1 - F(n)) is maximised on each constant piece of F at its right end.
    let mut candidates = vec![lo, hi];
    candidates.extend(
        q.atoms().iter().map(|a| a.0).filter(|&a| a > lo && a <= hi).map(|a| a - 1),
    );
    let (argmax, sup) = candidates
        .into_iter()
        .map(|n| (n, n as f64 * q.survival(n)))
        .fold((lo, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best });
    let at_edge = |n: u128| (n as f64 * q.survival(n) - sup).abs() <= 1e-12 * sup.max(1e-300);
    let settled = sup == 0.0 || !(at_edge(lo) || at_edge(hi));
    Ok(LampertiReport {
        n_probe,
        sup_estimate: sup,
        argmax,
        threshold: EXP_NEG_GAMMA,
        verdict: sup < EXP_NEG_GAMMA,
        settled,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum Moment {
    Finite(f64),
    Infinite,
}

impl Moment {
    pub fn finite(self) -> Option<f64> {
        match self {
            Moment::Finite(v) => Some(v),
            Moment::Infinite => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Moments {
    pub mean: Moment,
    pub variance: Moment,
}

/// Mean and variance of the listed atoms. For truncated countable supports a
/// moment is reported infinite when the last quarter of the atoms carries more
/// than 1% of the partial sum (a Cauchy-style heuristic).
pub fn law_moments(q: &DiscreteLaw) -> Moments {
    let atoms = q.atoms();
    let diverges = |w: &dyn Fn(f64) -> f64| -> bool {
        if q.tail_mass() == 0.0 || atoms.len() < 8 {
            return false;
        }
        let terms: Vec<f64> = atoms.iter().map(|&(n, p)| w(n as f64) * p).collect();
        let total: f64 = terms.iter().sum();
        let late: f64 = terms[terms.len() - terms.len() / 4..].iter().sum();
        late > 1e-2 * total
    };
    let mean: f64 = atoms.iter().map(|&(n, p)| n as f64 * p).sum();
    let second: f64 = atoms.iter().map(|&(n, p)| (n as f64).powi(2) * p).sum();
    let mean_m = if diverges(&|n| n) { Moment::Infinite } else { Moment::Finite(mean) };
    let var_m = if matches!(mean_m, Moment::Infinite) || diverges(&|n| n * n) {
        Moment::Infinite
    } else {
        Moment::Finite((second - mean * mean).max(0.0))
    };
    Moments { mean: mean_m, variance: var_m }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn half_half() -> CardinalityLaw {
        CardinalityLaw::from_pmf([(1, 0.5), (2, 0.5)], 0.0).unwrap()
    }

    #[test]
    fn exp_neg_gamma_matches_gamma() {
        assert_abs_diff_eq!(EXP_NEG_GAMMA, (-EULER_GAMMA).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(EXP_NEG_GAMMA, 0.5614594835668851, epsilon = 1e-15);
    }

    #[test]
    fn pgf_examples() {
        assert_abs_diff_eq!(pgf_eval(&half_half(), 0.5).unwrap(), 0.375, epsilon = 1e-15);
        let d = DiscreteLaw::dirac(1);
        assert_abs_diff_eq!(d.pgf(0.3).unwrap(), 0.3);
        assert!(d.pgf(1.1).is_err());
        assert!(d.pgf(-0.1).is_err());
    }

    #[test]
    fn compose_two_generations() {
        let h = half_half();
        let c = compose_laws(&h, &h, 4096).unwrap();
        let expect = [(1, 0.25), (2, 0.375), (3, 0.25), (4, 0.125)];
        assert_eq!(c.atoms().len(), 4);
        for ((n, p), (en, ep)) in c.atoms().iter().zip(expect) {
            assert_eq!(*n, en);
            assert_abs_diff_eq!(*p, ep, epsilon = 1e-12);
        }
        assert_eq!(c.tail_mass(), 0.0);
    }

    #[test]
    fn compose_with_cap_records_loss() {
        let h = half_half();
        let c = compose_laws(&h, &h, 2).unwrap();
        assert_abs_diff_eq!(c.tail_mass(), 0.375, epsilon = 1e-15);
        assert!(c.is_cap_overflowed());
    }

    #[test]
    fn compose_large_power() {
        // Dirac at 1000 composed with Dirac at 3 is Dirac at 3000.
        let outer = DiscreteLaw::dirac(1000);
        let inner = CardinalityLaw::dirac(3).unwrap();
        let c = compose_laws(&outer, &inner, 4096).unwrap();
        assert_eq!(c.atoms().len(), 1);
        assert_eq!(c.atoms()[0].0, 3000);
        assert_abs_diff_eq!(c.atoms()[0].1, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn dominance_examples() {
        let five = DiscreteLaw::dirac(5);
        let three = DiscreteLaw::dirac(3);
        assert!(dominates(&five, &three));
        assert!(!dominates(&three, &five));
        assert!(dominates(&five, &five));
    }

    #[test]
    fn lamperti_finite_support_is_zero() {
        let r = lamperti_check(&half_half(), 100).unwrap();
        assert_eq!(r.sup_estimate, 0.0);
        assert!(r.verdict && r.settled);
    }

    #[test]
    fn moments_of_dirac() {
        let m = law_moments(&DiscreteLaw::dirac(1));
        assert_eq!(m.mean, Moment::Finite(1.0));
        assert_eq!(m.variance, Moment::Finite(0.0));
    }

    #[test]
    fn survival_and_cdf() {
        let q = half_half();
        assert_eq!(q.cdf(0), 0.0);
        assert_eq!(q.cdf(1), 0.5);
        assert_eq!(q.survival(1), 0.5);
        assert_eq!(q.survival(2), 0.0);
        assert_eq!(q.quantile(0.3), 1);
        assert_eq!(q.quantile(0.7), 2);
    }
}
