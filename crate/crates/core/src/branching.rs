//! Branching processes in varying environments and maximal branching
//! processes.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::distmodel::{law_moments, CardinalityLaw, DiscreteLaw, DistributionFamily, Moment};
use crate::error::{Error, Result};
use crate::seed::Seed;

/// Populations above this abort a trajectory. Offspring counts in the
/// families at hand reach `2^60`, so the guard sits far above typical sizes
/// and only protects the `u128` arithmetic.
pub const DEFAULT_POPULATION_BUDGET: u128 = 1_000_000_000_000_000_000;

/// Below this population children are drawn one parent at a time.
const PER_PARENT_LIMIT: u128 = 64;

/// Stage-indexed offspring laws on `{0, 1, ...}`.
#[derive(Clone, Debug)]
pub enum OffspringFamily {
    /// The same law at every stage.
    Constant(Arc<DiscreteLaw>),
    /// Law of stage `t` is entry `t`; the last entry repeats.
    Table(Vec<Arc<DiscreteLaw>>),
    /// `#p_t`: every node has `#A` children.
    Cardinality(DistributionFamily),
    /// Number of non-zero actions in a set drawn from `p_t`.
    NonZeroChildren(DistributionFamily),
}

impl OffspringFamily {
    pub fn constant(law: DiscreteLaw) -> Self {
        OffspringFamily::Constant(Arc::new(law))
    }

    pub fn law(&self, t: usize) -> Result<Arc<DiscreteLaw>> {
        match self {
            OffspringFamily::Constant(q) => Ok(q.clone()),
            OffspringFamily::Table(v) => {
                v.get(t.min(v.len().saturating_sub(1))).cloned().ok_or_else(|| Error::Domain("empty offspring table".into()))
            }
            OffspringFamily::Cardinality(f) => Ok(Arc::new(f.cardinality_law(t)?.into_inner())),
            OffspringFamily::NonZeroChildren(f) => {
                let p = f.stage(t)?;
                let atoms = p.atoms().iter().map(|a| (a.set.count_nonzero() as u128, a.mass));
                Ok(Arc::new(DiscreteLaw::new(atoms, p.tail_mass())?))
            }
        }
    }

    /// Laws of stages `t0 .. t0 + len`.
    pub fn window(&self, t0: usize, len: usize) -> Result<Vec<Arc<DiscreteLaw>>> {
        (t0..t0 + len).map(|t| self.law(t)).collect()
    }
}

/// Total offspring of `z` parents with iid children from `q`.
pub fn offspring_sum(q: &DiscreteLaw, z: u128, rng: &mut ChaCha8Rng) -> u128 {
    if z <= PER_PARENT_LIMIT {
        return (0..z).map(|_| q.quantile(rng.random::<f64>())).sum();
    }
    let atoms = q.atoms();
    let mut left = z;
    let mut mass_left = 1.0;
    let mut total: u128 = 0;
    for (i, &(v, p)) in atoms.iter().enumerate() {
        if left == 0 {
            break;
        }
        // Tail mass goes to the last listed atom, as in `quantile`.
        let k = if i + 1 == atoms.len() {
            left
        } else {
            let prob = (p / mass_left).clamp(0.0, 1.0);
            binomial(left, prob, rng)
        };
        total = total.saturating_add(v.saturating_mul(k));
        left -= k;
        mass_left -= p;
    }
    total
}

fn binomial(n: u128, p: f64, rng: &mut ChaCha8Rng) -> u128 {
    let mut left = n;
    let mut k = 0u128;
    while left > 0 {
        let chunk = left.min(u64::MAX as u128) as u64;
        k += Binomial::new(chunk, p).map(|b| b.sample(rng)).unwrap_or(0) as u128;
        left -= chunk as u128;
    }
    k
}

/// `Z_0 = 1, ..., Z_T` with stage-`t0 + k` offspring laws. Stops early (with
/// zeros) on extinction.
pub fn simulate_bpve(off: &OffspringFamily, t0: usize, horizon: usize, seed: Seed) -> Result<Vec<u128>> {
    let laws = off.window(t0, horizon)?;
    simulate_bpve_with(&laws, seed, DEFAULT_POPULATION_BUDGET)
}

/// As [`simulate_bpve`] on pre-fetched laws.
pub fn simulate_bpve_with(laws: &[Arc<DiscreteLaw>], seed: Seed, budget: u128) -> Result<Vec<u128>> {
    if laws.is_empty() {
        return Err(Error::Domain("horizon must be at least 1".into()));
    }
    let mut rng = seed.rng();
    let mut z = vec![1u128];
    for q in laws {
        let cur = *z.last().expect("non-empty");
        let next = if cur == 0 { 0 } else { offspring_sum(q, cur, &mut rng) };
        if next > budget {
            return Err(Error::BudgetExceeded { what: "population", limit: budget.min(u64::MAX as u128) as u64 });
        }
        z.push(next);
    }
    Ok(z)
}

/// `f_{t0}(f_{t0+1}(... f_{t0+T-1}(0)))`: the probability of extinction by
/// generation `T`.
pub fn extinction_iteration(off: &OffspringFamily, t0: usize, horizon: usize) -> Result<f64> {
    off.window(t0, horizon)?.iter().rev().try_fold(0.0, |x, q| q.pgf(x))
}

/// Extinction-by-`T` probabilities for `T = 1..=horizon`.
pub fn extinction_sequence(off: &OffspringFamily, t0: usize, horizon: usize) -> Result<Vec<f64>> {
    (1..=horizon).map(|h| extinction_iteration(off, t0, h)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesVerdict {
    Convergent,
    Divergent,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FearnReport {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    /// `sigma_t^2 / (m_0 ... m_{t-1} m_t^2)`.
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    /// Ratio test on the last terms; a finite-horizon heuristic.
    pub verdict: SeriesVerdict,
    pub heuristic: bool,
}

/// Terms of the series whose convergence implies survival with positive
/// probability, for stages `0..t_max`.
pub fn fearn_criterion(off: &OffspringFamily, t_max: usize) -> Result<FearnReport> {
    if t_max < 2 {
        return Err(Error::Domain("need at least two stages".into()));
    }
    let mut means = Vec::with_capacity(t_max);
    let mut variances = Vec::with_capacity(t_max);
    for t in 0..t_max {
        let q = off.law(t)?;
        let mo = law_moments(&q);
        let (Moment::Finite(m), Moment::Finite(v)) = (mo.mean, mo.variance) else {
            return Err(Error::Domain(format!("stage {t} offspring law has an infinite moment")));
        };
        if m <= 0.0 {
            return Err(Error::DegenerateMean(t));
        }
        means.push(m);
        variances.push(v);
    }
    let mut terms = Vec::with_capacity(t_max);
    let mut ln_prod = 0.0;
    for t in 0..t_max {
        terms.push((variances[t].ln() - ln_prod - 2.0 * means[t].ln()).exp());
        ln_prod += means[t].ln();
    }
    let partial_sums: Vec<f64> = terms.iter().scan(0.0, |s, &x| {
        *s += x;
        Some(*s)
    }).collect();
    Ok(FearnReport { verdict: series_verdict(&terms), means, variances, terms, partial_sums, heuristic: true })
}

fn series_verdict(terms: &[f64]) -> SeriesVerdict {
    let tail = &terms[terms.len() / 2..];
    if tail.iter().all(|&x| x == 0.0) {
        return SeriesVerdict::Convergent;
    }
    let ratios: Vec<f64> = tail.windows(2).filter(|w| w[0] > 0.0).map(|w| w[1] / w[0]).collect();
    if ratios.is_empty() {
        return SeriesVerdict::Inconclusive;
    }
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    if worst < 0.95 {
        SeriesVerdict::Convergent
    } else if ratios.iter().all(|&r| r >= 1.0) {
        SeriesVerdict::Divergent
    } else {
        SeriesVerdict::Inconclusive
    }
}

/// Transition law of the maximal branching process generated by `q`:
/// `P(Y' <= n | Y = y) = F(n)^y`.
#[derive(Clone, Debug)]
pub struct MbpKernel {
    q: Arc<DiscreteLaw>,
}

/// Above this state the next state is drawn by inverting `F^y`.
pub const MBP_MAX_OF_IID_LIMIT: u128 = 1024;

impl MbpKernel {
    pub fn new(q: DiscreteLaw) -> Self {
        MbpKernel { q: Arc::new(q) }
    }

    pub fn law(&self) -> &DiscreteLaw {
        &self.q
    }

    /// `F(n)^y`.
    pub fn step_cdf(&self, y: u128, n: u128) -> f64 {
        (y as f64 * (-self.q.survival(n)).ln_1p()).exp()
    }

    /// One transition from state `y`.
    pub fn step(&self, y: u128, rng: &mut ChaCha8Rng) -> u128 {
        if y <= MBP_MAX_OF_IID_LIMIT {
            return (0..y).map(|_| self.q.quantile(rng.random::<f64>())).max().unwrap_or(0);
        }
        let ln_u = rng.random::<f64>().ln();
        let atoms = self.q.atoms();
        let i = atoms.partition_point(|&(n, _)| y as f64 * (-self.q.survival(n)).ln_1p() < ln_u);
        atoms[i.min(atoms.len() - 1)].0
    }
}

impl From<CardinalityLaw> for MbpKernel {
    fn from(q: CardinalityLaw) -> Self {
        MbpKernel::new(q.into_inner())
    }
}

/// `Y_0 = 1, Y_1, ..., Y_T`.
pub fn simulate_mbp(kernel: &MbpKernel, horizon: usize, seed: Seed) -> Vec<u128> {
    simulate_mbp_from(kernel, 1, horizon, seed)
}

/// `Y_0 = y0, Y_1, ..., Y_T`.
pub fn simulate_mbp_from(kernel: &MbpKernel, y0: u128, horizon: usize, seed: Seed) -> Vec<u128> {
    let mut rng = seed.rng();
    let mut y = Vec::with_capacity(horizon + 1);
    y.push(y0);
    for _ in 0..horizon {
        let next = kernel.step(*y.last().expect("non-empty"), &mut rng);
        y.push(next);
    }
    y
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AtomReturn {
    pub atom: u128,
    /// Fraction of trajectories visiting the atom in `(T/2, T]`.
    pub return_frequency: f64,
}

/// Finite-horizon evidence about recurrence; not a certificate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecurrenceProbe {
    pub horizon: usize,
    pub trials: usize,
    pub returns: Vec<AtomReturn>,
    /// Fraction of trajectories with `min_{t > T/2} Y_t <= bound`.
    pub bounded_frequency: f64,
    pub bound: u128,
    pub probe: bool,
}

/// Revisit frequencies of the smallest `atoms` support points of `q`.
pub fn mbp_recurrence_probe(kernel: &MbpKernel, horizon: usize, trials: usize, atoms: usize, seed: Seed) -> RecurrenceProbe {
    let watch: Vec<u128> = kernel.q.atoms().iter().take(atoms.max(1)).map(|a| a.0).collect();
    let bound = *watch.last().expect("law has atoms");
    let visits: Vec<(Vec<bool>, bool)> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let y = simulate_mbp(kernel, horizon, seed.stream("mbp-probe").derive(i));
            let late = &y[horizon / 2 + 1..];
            (watch.iter().map(|a| late.contains(a)).collect(), late.iter().any(|&v| v <= bound))
        })
        .collect();
    let n = trials.max(1) as f64;
    let returns = watch
        .iter()
        .enumerate()
        .map(|(k, &atom)| AtomReturn { atom, return_frequency: visits.iter().filter(|v| v.0[k]).count() as f64 / n })
        .collect();
    let bounded_frequency = visits.iter().filter(|v| v.1).count() as f64 / n;
    RecurrenceProbe { horizon, trials, returns, bounded_frequency, bound, probe: true }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthHorizon {
    pub horizon: usize,
    pub survivors: usize,
    pub normalizer: f64,
    pub mean_ratio: f64,
    pub sd_ratio: f64,
}

/// Descriptive report on `Z_T / r_T` among surviving trajectories.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthProbe {
    pub horizons: Vec<GrowthHorizon>,
    /// Mean of `|W_T - W_{T'}|` over consecutive horizons, relative to the
    /// mean of `W_T`, on trajectories surviving to the larger horizon.
    pub relative_increments: Vec<f64>,
    pub trials: usize,
    pub aborted: usize,
}

/// Normalized growth at each horizon. `normalizer` defaults to the products
/// of the stage means.
pub fn normalized_growth_probe(
    off: &OffspringFamily,
    normalizer: Option<&[f64]>,
    horizons: &[usize],
    trials: usize,
    seed: Seed,
) -> Result<GrowthProbe> {
    let t_max = *horizons.iter().max().ok_or_else(|| Error::Domain("no horizons".into()))?;
    let laws = off.window(0, t_max)?;
    let r: Vec<f64> = match normalizer {
        Some(r) if r.len() > t_max && r.iter().all(|&x| x > 0.0) => r.to_vec(),
        Some(_) => return Err(Error::Domain(format!("normalizer must hold {} positive terms", t_max + 1))),
        None => {
            let mut r = vec![1.0];
            for (t, q) in laws.iter().enumerate() {
                let m = law_moments(q).mean.finite().ok_or_else(|| Error::Domain(format!("infinite mean at stage {t}")))?;
                if m <= 0.0 {
                    return Err(Error::DegenerateMean(t));
                }
                r.push(r[t] * m);
            }
            r
        }
    };
    let runs: Vec<Option<Vec<u128>>> = (0..trials as u64)
        .into_par_iter()
        .map(|i| simulate_bpve_with(&laws, seed.stream("growth").derive(i), DEFAULT_POPULATION_BUDGET).ok())
        .collect();
    let aborted = runs.iter().filter(|r| r.is_none()).count();
    let runs: Vec<Vec<u128>> = runs.into_iter().flatten().collect();
    let ratio = |z: &[u128], h: usize| z[h] as f64 / r[h];
    let summary = |h: usize| {
        let w: Vec<f64> = runs.iter().filter(|z| z[h] > 0).map(|z| ratio(z, h)).collect();
        let n = w.len().max(1) as f64;
        let mean = w.iter().sum::<f64>() / n;
        let sd = (w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        GrowthHorizon { horizon: h, survivors: w.len(), normalizer: r[h], mean_ratio: mean, sd_ratio: sd }
    };
    let mut hs = horizons.to_vec();
    hs.sort_unstable();
    hs.dedup();
    let relative_increments = hs
        .windows(2)
        .map(|w| {
            let alive: Vec<&Vec<u128>> = runs.iter().filter(|z| z[w[1]] > 0).collect();
            let n = alive.len().max(1) as f64;
            let inc = alive.iter().map(|z| (ratio(z, w[1]) - ratio(z, w[0])).abs()).sum::<f64>() / n;
            let base = alive.iter().map(|z| ratio(z, w[0])).sum::<f64>() / n;
            if base > 0.0 { inc / base } else { f64::NAN }
        })
        .collect();
    Ok(GrowthProbe { horizons: hs.iter().map(|&h| summary(h)).collect(), relative_increments, trials, aborted })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distmodel::example45_dominating_law;

    fn law(atoms: &[(u128, f64)]) -> DiscreteLaw {
        DiscreteLaw::new(atoms.iter().copied(), 0.0).unwrap()
    }

    #[test]
    fn dirac_one_is_immortal() {
        let off = OffspringFamily::constant(DiscreteLaw::dirac(1));
        assert_eq!(simulate_bpve(&off, 0, 10, Seed(1)).unwrap(), vec![1; 11]);
        assert_eq!(extinction_iteration(&off, 0, 7).unwrap(), 0.0);
        let f = fearn_criterion(&off, 10).unwrap();
        assert_eq!(f.partial_sums.last(), Some(&0.0));
        assert_eq!(f.verdict, SeriesVerdict::Convergent);
    }

    #[test]
    fn z_process_first_step() {
        let off = OffspringFamily::NonZeroChildren(DistributionFamily::example45());
        let x = extinction_iteration(&off, 0, 1).unwrap();
        assert!((x - (1.0 - 0.25 * (2.0 - (-11f64).exp2()))).abs() < 1e-12);
        let q = off.law(3).unwrap();
        let mo = law_moments(&q);
        assert!((mo.mean.finite().unwrap() - 3.0).abs() < 1e-12);
        let ext = extinction_sequence(&off, 0, 12).unwrap();
        assert!(ext.windows(2).all(|w| w[0] <= w[1] && w[1] <= 1.0));
    }

    #[test]
    fn subcritical_extinction_is_geometric() {
        let off = OffspringFamily::constant(law(&[(0, 0.6), (1, 0.4)]));
        for t in 1..10 {
            let x = extinction_iteration(&off, 0, t).unwrap();
            assert!((1.0 - x - 0.4f64.powi(t as i32)).abs() < 1e-15);
        }
    }

    #[test]
    fn fearn_detects_divergence() {
        let laws = (0..40)
            .map(|t: u32| {
                let n = (t as f64 * t as f64 * (t as f64 - 1.0).exp2() + 2.0).round();
                Arc::new(law(&[(0, 1.0 - 2.0 / n), (n as u128, 2.0 / n)]))
            })
            .collect();
        let f = fearn_criterion(&OffspringFamily::Table(laws), 40).unwrap();
        assert_eq!(f.verdict, SeriesVerdict::Divergent);
        let z = fearn_criterion(&OffspringFamily::NonZeroChildren(DistributionFamily::example45()), 40).unwrap();
        assert_eq!(z.verdict, SeriesVerdict::Convergent);
        assert!(z.partial_sums.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn large_population_sum_has_the_right_mean() {
        let q = law(&[(0, 0.25), (1, 0.25), (4, 0.5)]);
        let mut rng = Seed(5).rng();
        let n = 1_000_000u128;
        let s = offspring_sum(&q, n, &mut rng) as f64;
        let sd = (n as f64 * (0.25 + 8.0 - 2.25f64.powi(2))).sqrt();
        assert!((s - 2.25 * n as f64).abs() < 5.0 * sd);
    }

    #[test]
    fn mbp_kernel_values() {
        let k = MbpKernel::new(law(&[(1, 0.5), (2, 0.5)]));
        assert!((k.step_cdf(2, 1) - 0.25).abs() < 1e-15);
        assert_eq!(simulate_mbp(&MbpKernel::new(DiscreteLaw::dirac(1)), 20, Seed(0)), vec![1; 21]);
        let q = MbpKernel::from(example45_dominating_law());
        let mut rng = Seed(2).rng();
        for y in [1u128, 5000] {
            let v = q.step(y, &mut rng);
            assert!(q.law().mass(v) > 0.0);
        }
    }

    #[test]
    fn dirac_growth_ratio_is_one() {
        let off = OffspringFamily::constant(DiscreteLaw::dirac(2));
        let g = normalized_growth_probe(&off, None, &[3, 6], 10, Seed(0)).unwrap();
        assert!(g.horizons.iter().all(|h| h.mean_ratio == 1.0 && h.sd_ratio == 0.0));
        assert_eq!(g.relative_increments, vec![0.0]);
    }
}
