//! Subcommand bodies. Each returns an [`Outcome`] for the envelope.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use foresight::branching::{
    extinction_iteration, fearn_criterion, mbp_recurrence_probe, simulate_bpve, simulate_mbp_from, MbpKernel,
    OffspringFamily,
};
use foresight::distmodel::{law_moments, Moment};
use foresight::estimators::{
    check_conditions, estimate_omniscient, example42_battery, example43_battery, example45_battery, horizon_ladder,
    replicate_table2, roster_evidence, Battery, ConditionKind,
};
use foresight::goals::Goal;
use foresight::mdpcore::{check_step1, check_step4, check_step6_dominance, CheckOptions, MdpState};
use foresight::stats::{dkw_epsilon, Estimate};
use foresight::strategies::{strategy_by_name, trial_seeds, Strategy};
use foresight::treespace::sample_tree_with_budget;
use foresight::{DistributionFamily, Seed};

use crate::config::{ExperimentConfig, Offspring};
use crate::error::CliError;
use crate::report::{Outcome, Status, Table};

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable report")
}

fn se(e: &Estimate) -> f64 {
    e.stderr.max(1.0 / e.n.max(1) as f64)
}

fn goal(cfg: &ExperimentConfig, family: &DistributionFamily) -> Result<Goal, CliError> {
    Ok(Goal::parse(cfg.goal.as_deref().unwrap_or("eventually-nonzero"), family)?)
}

fn horizons(cfg: &ExperimentConfig) -> Vec<usize> {
    if cfg.horizons.is_empty() {
        vec![8]
    } else {
        cfg.horizons.clone()
    }
}

fn roster(names: &[String]) -> Result<Vec<Arc<dyn Strategy>>, CliError> {
    names.iter().map(|n| strategy_by_name(n).map_err(|e| CliError::Config(e.to_string()))).collect()
}

fn f(x: f64) -> String {
    format!("{x}")
}

pub fn sample_tree(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let family = cfg.family()?;
    let depth = cfg.tree.depth;
    let seed = Seed(cfg.seed);
    let trees = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|i| {
            let t = sample_tree_with_budget(&family, 0, depth, trial_seeds(seed, i).0, cfg.tree.node_budget)?;
            let sizes = (0..=depth).map(|n| t.generation_size(n)).collect::<foresight::Result<Vec<u64>>>()?;
            let text = (i < cfg.tree.keep as u64).then(|| t.to_text());
            Ok((sizes, text))
        })
        .collect::<foresight::Result<Vec<_>>>()?;
    let n = trees.len() as f64;
    let mut table = Table::new(&["generation", "mean_size", "stderr", "expected_mean"]);
    let mut rows = Vec::new();
    let mut expected: f64 = 1.0;
    for g in 0..=depth {
        let xs: Vec<f64> = trees.iter().map(|t| t.0[g] as f64).collect();
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let stderr = (var / n).sqrt();
        let exp = (expected.is_finite()).then_some(expected);
        table.push(vec![g.to_string(), f(mean), f(stderr), exp.map_or_else(String::new, f)]);
        rows.push(json!({ "generation": g, "mean_size": mean, "stderr": stderr, "expected_mean": exp }));
        if g < depth {
            expected *= match law_moments(&*family.cardinality_law(g)?).mean {
                Moment::Finite(m) => m,
                Moment::Infinite => f64::INFINITY,
            };
        }
    }
    let kept: Vec<&String> = trees.iter().filter_map(|t| t.1.as_ref()).collect();
    Ok(Outcome {
        status: Status::Pass,
        summary: vec![format!("{} trees of depth {depth} from {}", trees.len(), family.name())],
        result: json!({ "family": family.name(), "depth": depth, "trees": cfg.samples, "generations": rows, "kept": kept }),
        table,
    })
}

pub fn estimate(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let family = cfg.family()?;
    let goal = goal(cfg, &family)?;
    let strategies = roster(&cfg.strategies)?;
    if strategies.is_empty() {
        return Err(CliError::Config("the strategy roster is empty".into()));
    }
    let seed = Seed(cfg.seed);
    let hs = horizons(cfg);
    let mut table = Table::new(&["strategy", "foresight", "horizon", "estimate", "stderr", "n", "skipped"]);
    let mut rosters = Vec::new();
    for &h in &hs {
        let r = roster_evidence(&family, &strategies, &goal, h, cfg.window, cfg.samples, seed)?;
        for row in &r.rows {
            table.push(vec![
                row.strategy.clone(),
                row.foresight.to_string(),
                h.to_string(),
                f(row.estimate.point),
                f(row.estimate.stderr),
                row.estimate.n.to_string(),
                row.skipped.to_string(),
            ]);
        }
        rosters.push(r);
    }
    let ladders = strategies
        .iter()
        .map(|s| horizon_ladder(&family, s.as_ref(), &goal, &hs, cfg.window, cfg.samples, seed))
        .collect::<foresight::Result<Vec<_>>>()?;
    let monotone = ladders.iter().all(|l| l.monotone);
    let summary = rosters
        .iter()
        .map(|r| format!("horizon {}: best {} at {:.5} +- {:.5}", r.horizon, r.best, r.lower_evidence.point, r.lower_evidence.stderr))
        .collect();
    Ok(Outcome {
        status: Status::from_pass(monotone),
        summary,
        result: json!({ "family": family.name(), "goal": goal.to_string(), "rosters": to_json(&rosters), "ladders": to_json(&ladders) }),
        table,
    })
}

pub fn omniscient(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let family = cfg.family()?;
    let goal = goal(cfg, &family)?;
    let mut table = Table::new(&["horizon", "estimate", "stderr", "bracket_low", "bracket_high", "skipped", "inconclusive"]);
    let mut reports = Vec::new();
    let mut status = Status::Pass;
    for h in horizons(cfg) {
        let r = estimate_omniscient(&family, &goal, h, cfg.window, cfg.samples, Seed(cfg.seed))?;
        if r.inconclusive {
            status = status.and(Status::Inconclusive);
        }
        table.push(vec![
            h.to_string(),
            f(r.estimate.point),
            f(r.estimate.stderr),
            f(r.bracket.0),
            f(r.bracket.1),
            r.skipped.to_string(),
            r.inconclusive.to_string(),
        ]);
        reports.push(r);
    }
    let summary = reports.iter().map(|r| format!("horizon {}: [{:.5}, {:.5}]", r.horizon, r.bracket.0, r.bracket.1)).collect();
    Ok(Outcome {
        status,
        summary,
        result: json!({ "family": family.name(), "goal": goal.to_string(), "reports": to_json(&reports) }),
        table,
    })
}

pub fn mdp(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let family = cfg.family()?;
    let m = cfg.mdp.m;
    let names = if cfg.strategies.is_empty() {
        vec!["first-nonzero".to_string(), "one-step-maximizing".to_string()]
    } else {
        cfg.strategies.clone()
    };
    let strategies = roster(&names)?;
    let opts = CheckOptions {
        samples: cfg.samples,
        min_occupancy: cfg.tolerances.min_occupancy,
        z: cfg.tolerances.z,
        alpha: cfg.tolerances.alpha,
    };
    let max_size = cfg.mdp.max_size;
    let q = move |s: &MdpState| s.size() <= max_size;
    let law = cfg.mbp.law.build(&family)?;
    let seed = Seed(cfg.seed);
    let mut table = Table::new(&["check", "strategy", "bins", "failed_bins", "pass"]);
    let mut reports = Vec::new();
    let mut pass = true;
    for s in &strategies {
        let s = s.as_ref();
        if s.foresight() == 0 {
            let r = check_step1(&family, m, cfg.mdp.stage, &q, s, &opts, seed.stream("step1"))?;
            table.push(vec!["step1".into(), s.name(), r.bins.len().to_string(), r.bins.iter().filter(|b| !b.pass).count().to_string(), r.pass.to_string()]);
            pass &= r.pass;
            reports.push(to_json(&r));
        }
        if s.foresight() <= m {
            let r = check_step4(&family, m, cfg.mdp.stage, &q, s, &opts, seed.stream("step4"))?;
            table.push(vec!["step4".into(), s.name(), r.bins.len().to_string(), r.bins.iter().filter(|b| !b.pass).count().to_string(), r.pass.to_string()]);
            pass &= r.pass;
            reports.push(to_json(&r));
            let r = check_step6_dominance(&family, m, &law, s, cfg.mdp.horizon, &opts, seed.stream("step6"))?;
            let failed = r.conditional.iter().filter(|b| !b.pass).count() + r.unconditional.iter().filter(|b| !b.pass).count();
            table.push(vec![
                "step6".into(),
                s.name(),
                (r.conditional.len() + r.unconditional.len()).to_string(),
                failed.to_string(),
                r.pass.to_string(),
            ]);
            pass &= r.pass;
            reports.push(to_json(&r));
        }
    }
    let summary = table.rows.iter().map(|r| format!("{} {}: {} of {} bins failed", r[0], r[1], r[3], r[2])).collect();
    Ok(Outcome { status: Status::from_pass(pass), summary, result: json!({ "family": family.name(), "m": m, "checks": reports }), table })
}

pub fn mbp(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let family = cfg.family()?;
    let kernel = MbpKernel::new(cfg.mbp.law.build(&family)?);
    let n = cfg.samples;
    let band = dkw_epsilon(n as u64, cfg.tolerances.alpha);
    let points: Vec<u128> = kernel.law().atoms().iter().map(|a| a.0).collect();
    let seed = Seed(cfg.seed);
    let mut table = Table::new(&["start", "sup_distance", "band", "pass"]);
    let mut rows = Vec::new();
    let mut pass = true;
    for &y in &cfg.mbp.starts {
        let y = y as u128;
        let s = seed.stream("mbp").derive(y as u64);
        let mut next: Vec<u128> = (0..n as u64).into_par_iter().map(|i| simulate_mbp_from(&kernel, y, 1, s.derive(i))[1]).collect();
        next.sort_unstable();
        let d = next
            .iter()
            .chain(&points)
            .map(|&x| (next.partition_point(|&v| v <= x) as f64 / n as f64 - kernel.step_cdf(y, x)).abs())
            .fold(0.0, f64::max);
        pass &= d <= band;
        table.push(vec![y.to_string(), f(d), f(band), (d <= band).to_string()]);
        rows.push(json!({ "start": y as u64, "sup_distance": d, "pass": d <= band }));
    }
    let probe = mbp_recurrence_probe(&kernel, cfg.mbp.horizon, n.min(10_000), 3, seed.stream("recurrence"));
    Ok(Outcome {
        status: Status::from_pass(pass),
        summary: vec![format!("one-step law within the DKW band {band:.5}: {pass}; bounded frequency {:.4}", probe.bounded_frequency)],
        result: json!({ "band": band, "one_step": rows, "recurrence_probe": to_json(&probe) }),
        table,
    })
}

fn offspring(cfg: &ExperimentConfig, family: DistributionFamily) -> OffspringFamily {
    match cfg.bpve.offspring {
        Offspring::Cardinality => OffspringFamily::Cardinality(family),
        Offspring::NonZeroChildren => OffspringFamily::NonZeroChildren(family),
    }
}

pub fn bpve(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let family = cfg.family()?;
    let z = offspring(cfg, family.clone());
    let h = cfg.bpve.horizon;
    let exact = 1.0 - extinction_iteration(&z, 0, h)?;
    let seed = Seed(cfg.seed).stream("bpve");
    let alive = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|i| simulate_bpve(&z, 0, h, seed.derive(i)).map(|p| u64::from(p[h] > 0)))
        .sum::<foresight::Result<u64>>()?;
    let sim = Estimate::from_counts(alive, cfg.samples as u64, seed);
    let dev = (sim.point - exact).abs() / se(&sim);
    let pass = dev <= cfg.tolerances.z;
    let fearn = fearn_criterion(&z, cfg.bpve.series_stages)?;
    let mut table = Table::new(&["stage", "mean", "variance", "term", "partial_sum"]);
    for t in 0..fearn.terms.len() {
        table.push(vec![t.to_string(), f(fearn.means[t]), f(fearn.variances[t]), f(fearn.terms[t]), f(fearn.partial_sums[t])]);
    }
    Ok(Outcome {
        status: Status::from_pass(pass),
        summary: vec![format!("survival to {h}: exact {exact:.6}, simulated {:.6} ({dev:.2} SE); series {:?}", sim.point, fearn.verdict)],
        result: json!({ "family": family.name(), "horizon": h, "survival": exact, "simulated": to_json(&sim), "fearn": to_json(&fearn) }),
        table,
    })
}

pub fn check(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let family = cfg.family()?;
    let goal = goal(cfg, &family)?;
    let c = &cfg.check;
    let candidate = c.candidate.as_ref().map(|l| l.build(&family)).transpose()?;
    let r = check_conditions(&family, &goal, c.m, c.t_max, candidate.as_ref(), c.n_probe as u128)?;
    let mut table = Table::new(&["condition", "verdict", "detail"]);
    let mut verdicts = serde_json::Map::new();
    for kind in &c.which {
        let (verdict, detail) = match kind {
            ConditionKind::Lamperti => (
                r.lamperti_dominance.holds,
                format!(
                    "{} law, dominates {}, limsup {:.4} vs {:.4}",
                    r.lamperti_dominance.candidate,
                    r.lamperti_dominance.dominates,
                    r.lamperti_dominance.lamperti.sup_estimate,
                    r.lamperti_dominance.lamperti.threshold
                ),
            ),
            ConditionKind::Dominance => (r.finite_mean_dominance, format!("envelope mean {:?}", r.envelope_mean)),
            ConditionKind::Fearn => {
                let fr = fearn_criterion(&OffspringFamily::NonZeroChildren(family.clone()), c.t_max)?;
                let sum = fr.partial_sums.last().copied().unwrap_or(0.0);
                (matches!(fr.verdict, foresight::branching::SeriesVerdict::Convergent), format!("{:?}, partial sum {sum:.4}", fr.verdict))
            }
            ConditionKind::ShiftInvariance => {
                (r.shift_invariant || r.shift_inclusion.is_some(), format!("shift-invariant {}, inclusion {:?}", r.shift_invariant, r.shift_inclusion))
            }
            ConditionKind::TimeInvariance => (r.time_invariant, String::new()),
        };
        let name = serde_json::to_value(kind).expect("kind serializes");
        let name = name.as_str().expect("string").to_string();
        table.push(vec![name.clone(), verdict.to_string(), detail.clone()]);
        verdicts.insert(name, json!({ "verdict": verdict, "detail": detail }));
    }
    for label in &r.applicable {
        table.push(vec!["applies".into(), "true".into(), label.clone()]);
    }
    let mut summary: Vec<String> = r.applicable.iter().map(|l| format!("applies: {l}")).collect();
    if summary.is_empty() {
        summary.push("no zero-one law precondition holds".into());
    }
    Ok(Outcome {
        status: Status::Pass,
        summary,
        result: json!({ "conditions": to_json(&r), "verdicts": verdicts, "applicable": r.applicable }),
        table,
    })
}

fn battery_outcome(b: Battery) -> Outcome {
    let mut table = Table::new(&["check", "relation", "observed", "reference", "tolerance", "pass"]);
    for c in &b.checks {
        let relation = serde_json::to_value(c.relation).expect("relation serializes");
        table.push(vec![
            c.name.clone(),
            relation.as_str().unwrap_or_default().to_string(),
            f(c.observed),
            f(c.reference),
            f(c.tolerance),
            c.pass.to_string(),
        ]);
    }
    let summary = b.checks.iter().map(|c| format!("{} {}", if c.pass { "ok  " } else { "FAIL" }, c.name)).collect();
    Outcome { status: Status::from_pass(b.pass), summary, result: to_json(&b), table }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Example {
    E42,
    E43,
    E45,
}

pub fn example(which: Example, samples: usize, seed: Seed) -> Result<Outcome, CliError> {
    let b = match which {
        Example::E42 => example42_battery(samples, seed)?,
        Example::E43 => example43_battery(samples, seed)?,
        Example::E45 => example45_battery(samples, seed)?,
    };
    Ok(battery_outcome(b))
}

pub fn table2() -> Result<Outcome, CliError> {
    let t = replicate_table2()?;
    let mut table = Table::new(&[
        "example",
        "omniscient_low",
        "omniscient_high",
        "foresight1_low",
        "foresight1_high",
        "goal_shift_invariant",
        "time_invariant",
        "mean_uniformly_bounded",
        "lamperti_dominated",
        "matches_expected",
    ]);
    for r in &t.rows {
        table.push(vec![
            r.example.to_string(),
            f(r.omniscient.lower),
            f(r.omniscient.upper),
            f(r.foresight1.lower),
            f(r.foresight1.upper),
            r.goal_shift_invariant.to_string(),
            r.time_invariant.to_string(),
            r.mean_uniformly_bounded.to_string(),
            r.lamperti_dominated.to_string(),
            r.matches_expected.to_string(),
        ]);
    }
    let summary = t.rows.iter().map(|r| format!("{}: matches expected {}", r.example, r.matches_expected)).collect();
    Ok(Outcome { status: Status::from_pass(t.pass), summary, result: to_json(&t), table })
}
