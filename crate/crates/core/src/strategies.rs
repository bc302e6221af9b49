//! Strategies with `m`-foresight and the episode runner.
//!
//! An episode walks a tree from its root. At each stage the runner reveals
//! the `m+1` generations below the current node, asks the strategy for an
//! action and descends. Trees are queried through a [`NodeOracle`], so a lazy
//! sampler and a stored tree built from the same seed give the same episode.

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::distmodel::DistributionFamily;
use crate::error::{Error, Result};
use crate::goals::{Goal, PrefixStatus};
use crate::mdpcore::{Digest, MdpState, DEFAULT_CONE_BUDGET};
use crate::seed::Seed;
use crate::treespace::{NodeOracle, StageWindow};

/// What a strategy sees at a stage.
pub type RevealedState = MdpState;

pub struct DecisionContext<'a> {
    pub stage: usize,
    pub state: &'a RevealedState,
    pub past_actions: &'a [u64],
    /// Private randomness; unused by the built-in strategies.
    pub rng: &'a mut ChaCha8Rng,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Choice {
    pub action: u64,
    /// Set when the strategy hit a case its rule leaves open.
    pub flagged: bool,
}

impl From<u64> for Choice {
    fn from(action: u64) -> Self {
        Choice { action, flagged: false }
    }
}

pub trait Strategy: Send + Sync {
    fn name(&self) -> String;
    fn foresight(&self) -> usize;
    fn choose(&self, ctx: &mut DecisionContext<'_>) -> Choice;
}

/// Plays `min A(s)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct SmallestAction;

/// Plays the smallest non-zero action, or `0` when none exists.
#[derive(Clone, Copy, Debug, Default)]
pub struct FirstNonZero;

/// Plays `max A(s)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct LargestAction;

/// Plays the smallest action maximizing the number of length-`m`
/// continuations. With `m = 1` this maximizes the next-stage action count.
#[derive(Clone, Copy, Debug)]
pub struct FollowupMaximizing(pub usize);

/// The 1-foresight rule for the two-set family: the smallest non-zero action
/// that has a non-zero follow-up; otherwise action 1.
#[derive(Clone, Copy, Debug, Default)]
pub struct Example42Rule;

impl Strategy for SmallestAction {
    fn name(&self) -> String {
        "smallest-action".into()
    }
    fn foresight(&self) -> usize {
        0
    }
    fn choose(&self, ctx: &mut DecisionContext<'_>) -> Choice {
        ctx.state.actions().min().into()
    }
}

impl Strategy for FirstNonZero {
    fn name(&self) -> String {
        "first-nonzero".into()
    }
    fn foresight(&self) -> usize {
        0
    }
    fn choose(&self, ctx: &mut DecisionContext<'_>) -> Choice {
        let a = ctx.state.actions();
        a.min_nonzero().unwrap_or(a.min()).into()
    }
}

impl Strategy for LargestAction {
    fn name(&self) -> String {
        "largest-action".into()
    }
    fn foresight(&self) -> usize {
        0
    }
    fn choose(&self, ctx: &mut DecisionContext<'_>) -> Choice {
        ctx.state.actions().max().into()
    }
}

impl Strategy for FollowupMaximizing {
    fn name(&self) -> String {
        match self.0 {
            1 => "one-step-maximizing".into(),
            m => format!("followup-maximizing({m})"),
        }
    }
    fn foresight(&self) -> usize {
        self.0
    }
    fn choose(&self, ctx: &mut DecisionContext<'_>) -> Choice {
        let s = ctx.state;
        let mut best = (0u64, s.actions().min());
        for a in s.actions().iter() {
            let n = s.continuations_at(a, self.0);
            if n > best.0 {
                best = (n, a);
            }
        }
        best.1.into()
    }
}

impl Strategy for Example42Rule {
    fn name(&self) -> String {
        "example42".into()
    }
    fn foresight(&self) -> usize {
        1
    }
    fn choose(&self, ctx: &mut DecisionContext<'_>) -> Choice {
        let s = ctx.state;
        let acts = s.actions();
        let has_nonzero_followup = |a: u64| s.set_at(&[a]).is_some_and(|f| f.max() > 0);
        if let Some(a) = acts.find(|a| a != 0 && has_nonzero_followup(a)) {
            return a.into();
        }
        if acts.contains(1) {
            return 1.into();
        }
        match acts.min_nonzero() {
            Some(a) => Choice { action: a, flagged: true },
            None => acts.min().into(),
        }
    }
}

/// Built-in strategy by name: `smallest-action`, `first-nonzero`,
/// `largest-action`, `one-step-maximizing`, `followup-maximizing(m)`,
/// `example42`.
pub fn strategy_by_name(name: &str) -> Result<Arc<dyn Strategy>> {
    let name = name.trim();
    if let Some(m) = name.strip_prefix("followup-maximizing(").and_then(|r| r.strip_suffix(')')) {
        let m: usize = m.trim().parse().map_err(|_| Error::Config(format!("bad foresight in `{name}`")))?;
        return Ok(Arc::new(FollowupMaximizing(m)));
    }
    Ok(match name {
        "smallest-action" => Arc::new(SmallestAction),
        "first-nonzero" => Arc::new(FirstNonZero),
        "largest-action" => Arc::new(LargestAction),
        "one-step-maximizing" => Arc::new(FollowupMaximizing(1)),
        "example42" => Arc::new(Example42Rule),
        _ => return Err(Error::Config(format!("unknown strategy `{name}`"))),
    })
}

/// The built-in roster.
pub fn builtin_strategies() -> Vec<Arc<dyn Strategy>> {
    vec![
        Arc::new(SmallestAction),
        Arc::new(FirstNonZero),
        Arc::new(LargestAction),
        Arc::new(FollowupMaximizing(1)),
        Arc::new(Example42Rule),
    ]
}

/// One stage of an episode.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StageRecord {
    pub stage: usize,
    pub digest: Digest,
    pub action: u64,
    /// `#A` at the current node.
    pub available: u64,
    pub nonzero_available: bool,
    /// `u(s)` of the revealed state.
    pub size: u64,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Episode {
    pub path: Vec<u64>,
    pub records: Vec<StageRecord>,
    pub status: PrefixStatus,
}

impl Episode {
    pub fn flagged(&self) -> bool {
        self.records.iter().any(|r| r.flagged)
    }
}

/// Options shared by all episodes of a run.
#[derive(Clone, Copy, Debug)]
pub struct EpisodeOptions {
    pub horizon: usize,
    /// Latest window start for eventual goals.
    pub k_max: Option<usize>,
    pub cone_budget: u64,
    /// Depth of the recorded states when it exceeds the strategy's foresight.
    /// The strategy then sees the deeper state but reads only its own depth.
    pub state_foresight: Option<usize>,
}

impl EpisodeOptions {
    pub fn new(horizon: usize) -> Self {
        EpisodeOptions { horizon, k_max: None, cone_budget: DEFAULT_CONE_BUDGET, state_foresight: None }
    }

    fn depth(&self, strategy: &dyn Strategy) -> usize {
        self.state_foresight.unwrap_or(0).max(strategy.foresight())
    }
}

/// Plays `strategy` on the tree behind `oracle` for `horizon` stages and
/// hands every revealed state and chosen action to `visit`. Returns the path.
pub fn play<O: NodeOracle>(
    oracle: &O,
    strategy: &dyn Strategy,
    opts: &EpisodeOptions,
    strategy_seed: Seed,
    mut visit: impl FnMut(usize, &MdpState, Choice),
) -> Result<Vec<u64>> {
    if opts.horizon == 0 {
        return Err(Error::Domain("horizon must be at least 1".into()));
    }
    let m = opts.depth(strategy);
    let mut rng = strategy_seed.rng();
    let mut node = oracle.root();
    let mut path = Vec::with_capacity(opts.horizon);
    for stage in 0..opts.horizon {
        let state = MdpState::reveal(oracle, &node, stage, m, opts.cone_budget)?;
        let choice = strategy.choose(&mut DecisionContext { stage, state: &state, past_actions: &path, rng: &mut rng });
        let acts = state.actions();
        if !acts.contains(choice.action) {
            return Err(Error::IllegalAction { action: choice.action, available: acts.to_string() });
        }
        visit(stage, &state, choice);
        node = oracle.child(&node, choice.action);
        path.push(choice.action);
    }
    Ok(path)
}

/// Plays `strategy` on the tree behind `oracle` and records every stage.
pub fn run_episode_on<O: NodeOracle>(
    oracle: &O,
    strategy: &dyn Strategy,
    goal: &Goal,
    opts: &EpisodeOptions,
    strategy_seed: Seed,
) -> Result<Episode> {
    let mut records = Vec::with_capacity(opts.horizon);
    let path = play(oracle, strategy, opts, strategy_seed, |stage, state, choice| {
        let acts = state.actions();
        records.push(StageRecord {
            stage,
            digest: state.digest(),
            action: choice.action,
            available: acts.len(),
            nonzero_available: acts.max() > 0,
            size: state.size(),
            flagged: choice.flagged,
        });
    })?;
    let status = goal.prefix_status(&path, opts.k_max);
    Ok(Episode { path, records, status })
}

/// Stage window an episode of this strategy and horizon needs.
pub fn episode_window(family: &DistributionFamily, t0: usize, strategy: &dyn Strategy, horizon: usize) -> Result<StageWindow> {
    StageWindow::new(family, t0, horizon + strategy.foresight())
}

/// Stage window for episodes under `opts`.
pub fn window_for(family: &DistributionFamily, t0: usize, strategy: &dyn Strategy, opts: &EpisodeOptions) -> Result<StageWindow> {
    StageWindow::new(family, t0, opts.horizon + opts.depth(strategy))
}

/// Plays one episode on the lazily sampled tree with seed `tree_seed`.
pub fn run_episode(
    window: &StageWindow,
    strategy: &dyn Strategy,
    goal: &Goal,
    opts: &EpisodeOptions,
    tree_seed: Seed,
    strategy_seed: Seed,
) -> Result<Episode> {
    run_episode_on(&window.sampler(tree_seed), strategy, goal, opts, strategy_seed)
}

/// Seeds of trial `i` under a master seed: one for the tree, one for the
/// strategy's private stream. Every estimator uses this scheme, so different
/// strategies face the same trees.
pub fn trial_seeds(master: Seed, i: u64) -> (Seed, Seed) {
    (master.stream("tree").derive(i), master.stream("episode").derive(i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distmodel::ActionSet;
    use crate::treespace::sample_tree;

    fn choose(s: &dyn Strategy, state: &MdpState) -> Choice {
        let mut rng = Seed(0).rng();
        s.choose(&mut DecisionContext { stage: 0, state, past_actions: &[], rng: &mut rng })
    }

    fn cone(rows: &[(&[u64], &str)]) -> MdpState {
        let seqs: Vec<Vec<u64>> = rows
            .iter()
            .flat_map(|(p, s)| {
                s.parse::<ActionSet>().unwrap().iter().map(|b| p.iter().copied().chain([b]).collect()).collect::<Vec<_>>()
            })
            .collect();
        MdpState::from_sequences(1, &seqs).unwrap()
    }

    #[test]
    fn simple_rules() {
        let s = MdpState::from_sequences(0, &[vec![3], vec![5], vec![9]]).unwrap();
        assert_eq!(choose(&SmallestAction, &s).action, 3);
        assert_eq!(choose(&LargestAction, &s).action, 9);
        let z = MdpState::from_sequences(0, &[vec![0], vec![4]]).unwrap();
        assert_eq!(choose(&FirstNonZero, &z).action, 4);
    }

    #[test]
    fn one_step_ties_break_low() {
        let s = cone(&[(&[0], "0"), (&[1], "0-3"), (&[2], "5-8")]);
        assert_eq!(choose(&FollowupMaximizing(1), &s).action, 1);
        let flat = cone(&[(&[4], "0"), (&[7], "1")]);
        assert_eq!(choose(&FollowupMaximizing(1), &flat).action, 4);
    }

    #[test]
    fn example42_rule_cases() {
        let s = cone(&[(&[0], "0-3"), (&[1], "0"), (&[2], "0-2")]);
        assert_eq!(choose(&Example42Rule, &s), 2.into());
        let dead = cone(&[(&[0], "0"), (&[1], "0"), (&[2], "0")]);
        assert_eq!(choose(&Example42Rule, &dead), 1.into());
        let corner = cone(&[(&[0], "0"), (&[2], "0")]);
        assert_eq!(choose(&Example42Rule, &corner), Choice { action: 2, flagged: true });
        let zero = cone(&[(&[0], "0-4")]);
        assert_eq!(choose(&Example42Rule, &zero), 0.into());
    }

    #[test]
    fn names_resolve() {
        for s in builtin_strategies() {
            assert_eq!(strategy_by_name(&s.name()).unwrap().name(), s.name());
        }
        assert_eq!(strategy_by_name("followup-maximizing(3)").unwrap().foresight(), 3);
        assert!(strategy_by_name("clairvoyant").is_err());
    }

    #[test]
    fn dummy_episode_follows_the_branch() {
        let f = DistributionFamily::dirac_singletons(5);
        let goal = Goal::always_nonzero(0);
        for s in builtin_strategies() {
            let w = episode_window(&f, 0, s.as_ref(), 4).unwrap();
            let e = run_episode(&w, s.as_ref(), &goal, &EpisodeOptions::new(4), Seed(1), Seed(2)).unwrap();
            assert_eq!(e.path, vec![5; 4]);
            assert_eq!(e.status, PrefixStatus::HoldsOnWindow(0));
        }
    }

    #[test]
    fn lazy_and_stored_trees_give_the_same_episode() {
        let f = DistributionFamily::example42();
        let goal = Goal::eventually_nonzero();
        let opts = EpisodeOptions::new(5);
        for i in 0..20 {
            let (ts, ss) = trial_seeds(Seed(3), i);
            let w = episode_window(&f, 0, &Example42Rule, 5).unwrap();
            let lazy = run_episode(&w, &Example42Rule, &goal, &opts, ts, ss).unwrap();
            let tree = sample_tree(&f, 0, 6, ts).unwrap();
            let stored = run_episode_on(&tree, &Example42Rule, &goal, &opts, ss).unwrap();
            assert_eq!(lazy, stored);
        }
    }
}
