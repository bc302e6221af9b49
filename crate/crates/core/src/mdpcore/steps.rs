//! Simulation checks of the transition identities and bounds of the
//! foresight MDP, with conditioning approximated by bins of the current
//! state.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::state::{Digest, MdpState, DEFAULT_CONE_BUDGET};
use super::value::{ValueCaps, ValueSolver};
use crate::branching::MbpKernel;
use crate::distmodel::{DiscreteLaw, DistributionFamily};
use crate::error::{Error, Result};
use crate::goals::{Goal, GoalKind};
use crate::seed::Seed;
use crate::stats::{binomial_se, dkw_epsilon, Estimate};
use crate::strategies::{play, trial_seeds, window_for, EpisodeOptions, Strategy};
use crate::treespace::{NodeOracle, StageWindow};

/// A set of states given by its indicator.
pub type StateSet<'a> = &'a (dyn Fn(&MdpState) -> bool + Sync);

/// Knobs shared by the simulation checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CheckOptions {
    pub samples: usize,
    /// Bins with fewer observations are excluded from the verdict.
    pub min_occupancy: u64,
    /// Width of the acceptance band in standard errors.
    pub z: f64,
    /// Level of the DKW bands.
    pub alpha: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { samples: 100_000, min_occupancy: 100, z: 3.0, alpha: 0.01 }
    }
}

/// Monte-Carlo estimate of `phi_t(Q)`.
pub fn phi_estimate(family: &DistributionFamily, t: usize, m: usize, q: StateSet<'_>, n: usize, seed: Seed) -> Result<Estimate> {
    let window = StageWindow::new(family, t, m + 1)?;
    let hits = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let sampler = window.sampler(seed.stream("phi").derive(i));
            MdpState::reveal(&sampler, &sampler.root(), 0, m, DEFAULT_CONE_BUDGET).map(|s| q(&s) as u64)
        })
        .sum::<Result<u64>>()?;
    Ok(Estimate::from_counts(hits, n as u64, seed))
}

/// Empirical law of the stage-`t` state, keyed by digest.
pub fn state_distribution_phi(family: &DistributionFamily, t: usize, m: usize, n: usize, seed: Seed) -> Result<BTreeMap<Digest, u64>> {
    let window = StageWindow::new(family, t, m + 1)?;
    let digests = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let sampler = window.sampler(seed.stream("phi").derive(i));
            MdpState::reveal(&sampler, &sampler.root(), 0, m, DEFAULT_CONE_BUDGET).map(|s| s.digest())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut law = BTreeMap::new();
    for d in digests {
        *law.entry(d).or_insert(0) += 1;
    }
    Ok(law)
}

/// Cell of the conditioning partition.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case", tag = "by", content = "value")]
pub enum BinKey {
    Digest(Digest),
    /// States of this size whose digests were too rare to stand alone.
    Size(u64),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepBin {
    pub key: BinKey,
    pub size: u64,
    pub n: u64,
    pub lhs: f64,
    pub lhs_se: f64,
    pub target: f64,
    pub target_se: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepReport {
    pub check: String,
    pub stage: usize,
    pub m: usize,
    pub strategy: String,
    pub phi: Estimate,
    pub bins: Vec<StepBin>,
    /// Observations in bins below the occupancy threshold.
    pub excluded: u64,
    pub pass: bool,
}

struct Obs {
    digest: Digest,
    size: u64,
    hit: bool,
}

/// Groups observations by digest where occupancy allows and pools the rest
/// by state size. Returns `(key, size, n, hits)` rows and the excluded count.
fn bin_observations(obs: &[Obs], min_occ: u64) -> (Vec<(BinKey, u64, u64, u64)>, u64) {
    let mut by_digest: BTreeMap<Digest, (u64, u64, u64)> = BTreeMap::new();
    for o in obs {
        let e = by_digest.entry(o.digest).or_insert((o.size, 0, 0));
        e.1 += 1;
        e.2 += o.hit as u64;
    }
    let mut bins = Vec::new();
    let mut pooled: BTreeMap<u64, (u64, u64)> = BTreeMap::new();
    for (d, (size, n, h)) in by_digest {
        if n >= min_occ {
            bins.push((BinKey::Digest(d), size, n, h));
        } else {
            let e = pooled.entry(size).or_insert((0, 0));
            e.0 += n;
            e.1 += h;
        }
    }
    let mut excluded = 0;
    for (size, (n, h)) in pooled {
        if n >= min_occ {
            bins.push((BinKey::Size(size), size, n, h));
        } else {
            excluded += n;
        }
    }
    (bins, excluded)
}

/// Standard error of a proportion, floored by the `(h+1)/(n+2)` estimate so
/// that empty or full bins keep a positive error.
fn proportion_se(hits: u64, n: u64) -> f64 {
    let p = hits as f64 / n as f64;
    let shrunk = (hits as f64 + 1.0) / (n as f64 + 2.0);
    (p * (1.0 - p) / n as f64).sqrt().max((shrunk * (1.0 - shrunk) / n as f64).sqrt())
}

/// Error of a bin frequency, at least the binomial error under the
/// hypothesized proportion `target`.
fn null_se(hits: u64, n: u64, target: f64) -> f64 {
    proportion_se(hits, n).max(binomial_se(target, n))
}

/// Plays episodes long enough to observe `s_t` and `s_{t+m+1}`.
fn transition_observations(
    family: &DistributionFamily,
    m: usize,
    t: usize,
    q: StateSet<'_>,
    strategy: &dyn Strategy,
    n: usize,
    seed: Seed,
) -> Result<Vec<Obs>> {
    if strategy.foresight() > m {
        return Err(Error::Domain(format!("strategy foresight {} exceeds m = {m}", strategy.foresight())));
    }
    let opts = EpisodeOptions { state_foresight: Some(m), ..EpisodeOptions::new(t + m + 2) };
    let window = window_for(family, 0, strategy, &opts)?;
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let (ts, ss) = trial_seeds(seed, i);
            let mut first = None;
            let mut hit = false;
            play(&window.sampler(ts), strategy, &opts, ss, |stage, state, _| {
                if stage == t {
                    first = Some((state.digest(), state.size()));
                } else if stage == t + m + 1 {
                    hit = q(state);
                }
            })?;
            let (digest, size) = first.expect("stage t is visited");
            Ok(Obs { digest, size, hit })
        })
        .collect()
}

/// `P(s_{t+m+1} in Q | s_t) = phi_{t+m+1}(Q)` under a strategy that sees
/// only the current action set.
pub fn check_step1(
    family: &DistributionFamily,
    m: usize,
    t: usize,
    q: StateSet<'_>,
    strategy: &dyn Strategy,
    opts: &CheckOptions,
    seed: Seed,
) -> Result<StepReport> {
    if strategy.foresight() != 0 {
        return Err(Error::Domain("the identity concerns 0-foresight strategies".into()));
    }
    let phi = phi_estimate(family, t + m + 1, m, q, opts.samples, seed.stream("step1-phi"))?;
    let obs = transition_observations(family, m, t, q, strategy, opts.samples, seed)?;
    let (raw, excluded) = bin_observations(&obs, opts.min_occupancy);
    let bins: Vec<StepBin> = raw
        .into_iter()
        .map(|(key, size, n, h)| {
            let lhs = h as f64 / n as f64;
            let lhs_se = null_se(h, n, phi.point);
            let target_se = proportion_se(phi.successes, phi.n);
            let pass = (lhs - phi.point).abs() <= opts.z * lhs_se.hypot(target_se);
            StepBin { key, size, n, lhs, lhs_se, target: phi.point, target_se, pass }
        })
        .collect();
    let pass = bins.iter().all(|b| b.pass);
    Ok(StepReport { check: "step1".into(), stage: t, m, strategy: strategy.name(), phi, bins, excluded, pass })
}

/// `P(s_{t+m+1} in Q | s_t) >= phi_{t+m+1}(Q)^{u(s_t)}` for any strategy
/// with foresight at most `m`.
pub fn check_step4(
    family: &DistributionFamily,
    m: usize,
    t: usize,
    q: StateSet<'_>,
    strategy: &dyn Strategy,
    opts: &CheckOptions,
    seed: Seed,
) -> Result<StepReport> {
    let phi = phi_estimate(family, t + m + 1, m, q, opts.samples, seed.stream("step4-phi"))?;
    let obs = transition_observations(family, m, t, q, strategy, opts.samples, seed)?;
    let (raw, excluded) = bin_observations(&obs, opts.min_occupancy);
    let phi_se = proportion_se(phi.successes, phi.n);
    let bins: Vec<StepBin> = raw
        .into_iter()
        .map(|(key, size, n, h)| {
            let lhs = h as f64 / n as f64;
            let u = size as f64;
            let target = phi.point.powf(u);
            let lhs_se = null_se(h, n, target);
            let target_se = u * phi.point.powf(u - 1.0) * phi_se;
            let pass = lhs >= target - opts.z * lhs_se.hypot(target_se);
            StepBin { key, size, n, lhs, lhs_se, target, target_se, pass }
        })
        .collect();
    let pass = bins.iter().all(|b| b.pass);
    Ok(StepReport { check: "step4".into(), stage: t, m, strategy: strategy.name(), phi, bins, excluded, pass })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DominanceBin {
    /// `u(s_t)`.
    pub size: u64,
    pub n: u64,
    /// `max_n (F_q(n)^y - F_emp(n))`.
    pub max_violation: f64,
    pub at: u128,
    pub band: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DominanceIndex {
    pub index: usize,
    pub stage: usize,
    /// `max_n (F_Y(n) - F_U(n))` between the MBP and the size process.
    pub max_violation: f64,
    pub at: u128,
    pub band: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Step6Report {
    pub m: usize,
    pub horizon: usize,
    pub strategy: String,
    pub conditional: Vec<DominanceBin>,
    pub excluded: u64,
    pub unconditional: Vec<DominanceIndex>,
    pub pass: bool,
}

fn empirical_cdf(values: &mut [u128]) -> impl Fn(u128) -> f64 + '_ {
    values.sort_unstable();
    let n = values.len() as f64;
    move |x| values.partition_point(|&v| v <= x) as f64 / n
}

/// `P(u(s_{t+m}) <= n | s_t) >= F_q(n)^{u(s_t)}` bin by bin, and dominance of
/// `u(s_0), u(s_m), u(s_{2m}), ...` by the MBP of `q` started at `u(s_0)`.
pub fn check_step6_dominance(
    family: &DistributionFamily,
    m: usize,
    q: &DiscreteLaw,
    strategy: &dyn Strategy,
    horizon: usize,
    opts: &CheckOptions,
    seed: Seed,
) -> Result<Step6Report> {
    let step = m.max(1);
    let eopts = EpisodeOptions { state_foresight: Some(m), ..EpisodeOptions::new(horizon) };
    let window = window_for(family, 0, strategy, &eopts)?;
    let sizes: Vec<Vec<u64>> = (0..opts.samples as u64)
        .into_par_iter()
        .map(|i| {
            let (ts, ss) = trial_seeds(seed, i);
            let mut u = Vec::with_capacity(horizon);
            play(&window.sampler(ts), strategy, &eopts, ss, |_, state, _| u.push(state.size()))?;
            Ok(u)
        })
        .collect::<Result<_>>()?;
    let kernel = MbpKernel::new(q.clone());

    // Conditional part.
    let mut pairs: BTreeMap<u64, Vec<u128>> = BTreeMap::new();
    for u in &sizes {
        for t in 0..u.len().saturating_sub(step) {
            pairs.entry(u[t]).or_default().push(u[t + step] as u128);
        }
    }
    let mut excluded = 0;
    let mut conditional = Vec::new();
    for (y, mut next) in pairs {
        let n = next.len() as u64;
        if n < opts.min_occupancy {
            excluded += n;
            continue;
        }
        let points: Vec<u128> = next.iter().copied().chain(q.atoms().iter().map(|a| a.0)).collect();
        let cdf = empirical_cdf(&mut next);
        let (at, max_violation) = points
            .into_iter()
            .map(|x| (x, kernel.step_cdf(y as u128, x) - cdf(x)))
            .fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
        let band = dkw_epsilon(n, opts.alpha);
        conditional.push(DominanceBin { size: y, n, max_violation, at, band, pass: max_violation <= band });
    }

    // Unconditional part.
    let indices: Vec<usize> = (0..horizon).step_by(step).collect();
    let mbp: Vec<Vec<u128>> = sizes
        .par_iter()
        .enumerate()
        .map(|(i, u)| {
            let mut rng = seed.stream("step6-mbp").derive(i as u64).rng();
            let mut y = u[0] as u128;
            let mut out = vec![y];
            for _ in 1..indices.len() {
                y = kernel.step(y, &mut rng);
                out.push(y);
            }
            out
        })
        .collect();
    let n = sizes.len() as u64;
    let band = 2.0 * dkw_epsilon(n, opts.alpha);
    let unconditional = indices
        .iter()
        .enumerate()
        .map(|(k, &stage)| {
            let mut us: Vec<u128> = sizes.iter().map(|u| u[stage] as u128).collect();
            let mut ys: Vec<u128> = mbp.iter().map(|y| y[k]).collect();
            let points: Vec<u128> = us.iter().chain(ys.iter()).copied().collect();
            let fu = empirical_cdf(&mut us);
            let fy = empirical_cdf(&mut ys);
            let (at, max_violation) =
                points.into_iter().map(|x| (x, fy(x) - fu(x))).fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
            DominanceIndex { index: k, stage, max_violation, at, band, pass: max_violation <= band }
        })
        .collect::<Vec<_>>();
    let pass = conditional.iter().all(|b| b.pass) && unconditional.iter().all(|b| b.pass);
    Ok(Step6Report { m, horizon, strategy: strategy.name(), conditional, excluded, unconditional, pass })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MartingaleBin {
    pub stage: usize,
    pub digest: Digest,
    pub n: u64,
    pub value: f64,
    pub next_mean: f64,
    pub next_se: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SupermartingaleReport {
    pub strategy: String,
    pub horizon: usize,
    pub bins: Vec<MartingaleBin>,
    pub excluded: u64,
    pub pass: bool,
}

/// Along episodes of `strategy`, `M_t = 1[accepted before t] V(s_t, t, H - t)`
/// must not increase in conditional mean: `E[M_{t+1} | s_t] <= M_t`.
pub fn check_supermartingale(
    family: &DistributionFamily,
    goal: &Goal,
    m: usize,
    strategy: &dyn Strategy,
    horizon: usize,
    caps: ValueCaps,
    opts: &CheckOptions,
    seed: Seed,
) -> Result<SupermartingaleReport> {
    let from = match goal.kind {
        GoalKind::Always { from } => from,
        GoalKind::EventuallyAlways => return Err(Error::Domain("needs an always-type goal".into())),
    };
    let eopts = EpisodeOptions { state_foresight: Some(m), ..EpisodeOptions::new(horizon) };
    let window = window_for(family, 0, strategy, &eopts)?;
    let episodes: Vec<Vec<(MdpState, u64)>> = (0..opts.samples as u64)
        .into_par_iter()
        .map(|i| {
            let (ts, ss) = trial_seeds(seed, i);
            let mut out = Vec::with_capacity(horizon);
            play(&window.sampler(ts), strategy, &eopts, ss, |_, s, c| out.push((s.clone(), c.action)))?;
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut solver = ValueSolver::new(family, goal, caps)?;
    let mut cells: BTreeMap<(usize, Digest), (f64, Vec<f64>)> = BTreeMap::new();
    for ep in &episodes {
        let mut accepted = true;
        for t in 0..horizon {
            let (s, a) = &ep[t];
            if !accepted {
                break;
            }
            let v = solver.value(s, t, horizon - t)?;
            accepted = t < from || goal.accept(t, *a);
            let next = if !accepted {
                0.0
            } else if t + 1 < horizon {
                solver.value(&ep[t + 1].0, t + 1, horizon - t - 1)?
            } else {
                1.0
            };
            cells.entry((t, s.digest())).or_insert((v, Vec::new())).1.push(next);
        }
    }
    let mut excluded = 0;
    let mut bins = Vec::new();
    for ((stage, digest), (value, next)) in cells {
        let n = next.len() as u64;
        if n < opts.min_occupancy {
            excluded += n;
            continue;
        }
        let mean = next.iter().sum::<f64>() / n as f64;
        let var = next.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let next_se = (var / n as f64).sqrt();
        let pass = mean <= value + opts.z * next_se + 1e-12;
        bins.push(MartingaleBin { stage, digest, n, value, next_mean: mean, next_se, pass });
    }
    let pass = bins.iter().all(|b| b.pass);
    Ok(SupermartingaleReport { strategy: strategy.name(), horizon, bins, excluded, pass })
}
