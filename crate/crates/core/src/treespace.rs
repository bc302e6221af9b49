//! Decision trees sampled from `mu_t = p_t ⊓ p_{t+1} ⊓ ...`.
//!
//! Every node's action set is drawn from a uniform keyed by the hash of
//! (master seed, origin stage, node path), so an eagerly materialized
//! [`TruncatedTree`] and a lazily queried [`NodeSampler`] built from the same
//! seed describe the same tree.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::distmodel::{ActionSet, DistributionFamily, PrimitiveDistribution};
use crate::error::{Error, Result};
use crate::seed::Seed;

/// Default bound on the number of nodes a single tree may materialize.
pub const DEFAULT_NODE_BUDGET: u64 = 10_000_000;

/// Node identity: the sequence of actions leading to it from the root.
pub type Path = Vec<u64>;

/// Hash of a node path under a master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeKey(Seed);

impl NodeKey {
    pub fn root(seed: Seed, origin_stage: usize) -> Self {
        NodeKey(seed.stream("tree-root").derive(origin_stage as u64))
    }

    #[inline]
    pub fn child(self, a: u64) -> Self {
        NodeKey(self.0.derive(a))
    }

    #[inline]
    pub fn uniform(self) -> f64 {
        self.0.uniform()
    }
}

/// Stage laws `p_{t0}, ..., p_{t0+len-1}` fetched once for repeated sampling.
#[derive(Clone, Debug)]
pub struct StageWindow {
    family: DistributionFamily,
    origin_stage: usize,
    stages: Vec<Arc<PrimitiveDistribution>>,
}

impl StageWindow {
    pub fn new(family: &DistributionFamily, origin_stage: usize, len: usize) -> Result<Self> {
        let stages = (origin_stage..origin_stage + len).map(|t| family.stage(t)).collect::<Result<_>>()?;
        Ok(StageWindow { family: family.clone(), origin_stage, stages })
    }

    pub fn family(&self) -> &DistributionFamily {
        &self.family
    }

    pub fn origin_stage(&self) -> usize {
        self.origin_stage
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    /// Law of the sets at `depth` below the root.
    pub fn at(&self, depth: usize) -> Result<&PrimitiveDistribution> {
        self.stages.get(depth).map(AsRef::as_ref).ok_or_else(|| Error::StageOutOfRange {
            family: self.family.name(),
            stage: self.origin_stage + depth,
        })
    }

    #[inline]
    pub fn draw(&self, key: NodeKey, depth: usize) -> Result<&Arc<ActionSet>> {
        Ok(self.at(depth)?.sample(key.uniform()))
    }

    /// Lazy view of the tree with the given seed.
    pub fn sampler(&self, seed: Seed) -> NodeSampler<'_> {
        NodeSampler { window: self, root: NodeKey::root(seed, self.origin_stage) }
    }
}

/// Read access to the action sets of a tree, lazily or from storage.
pub trait NodeOracle {
    type Node: Clone;
    fn root(&self) -> Self::Node;
    fn child(&self, node: &Self::Node, a: u64) -> Self::Node;
    /// Action set at `node`, which lies `depth` generations below the root.
    fn action_set(&self, node: &Self::Node, depth: usize) -> Result<&Arc<ActionSet>>;
}

/// Lazily sampled tree: each query draws the node's set from its key.
#[derive(Clone, Copy, Debug)]
pub struct NodeSampler<'w> {
    window: &'w StageWindow,
    root: NodeKey,
}

impl NodeOracle for NodeSampler<'_> {
    type Node = NodeKey;

    fn root(&self) -> NodeKey {
        self.root
    }

    #[inline]
    fn child(&self, node: &NodeKey, a: u64) -> NodeKey {
        node.child(a)
    }

    #[inline]
    fn action_set(&self, node: &NodeKey, depth: usize) -> Result<&Arc<ActionSet>> {
        self.window.draw(*node, depth)
    }
}

/// A decision tree materialized to depth `T`: every node of length `< T`
/// carries its action set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncatedTree {
    depth: usize,
    origin_stage: usize,
    children: BTreeMap<Path, Arc<ActionSet>>,
}

impl NodeOracle for TruncatedTree {
    type Node = Path;

    fn root(&self) -> Path {
        Vec::new()
    }

    fn child(&self, node: &Path, a: u64) -> Path {
        let mut p = node.clone();
        p.push(a);
        p
    }

    fn action_set(&self, node: &Path, _depth: usize) -> Result<&Arc<ActionSet>> {
        self.children.get(node).ok_or_else(|| Error::UnknownNode(path_string(node)))
    }
}

/// Samples a tree to depth `T` with root stage `t0`.
pub fn sample_tree(family: &DistributionFamily, t0: usize, depth: usize, seed: Seed) -> Result<TruncatedTree> {
    sample_tree_with_budget(family, t0, depth, seed, DEFAULT_NODE_BUDGET)
}

pub fn sample_tree_with_budget(
    family: &DistributionFamily,
    t0: usize,
    depth: usize,
    seed: Seed,
    node_budget: u64,
) -> Result<TruncatedTree> {
    if depth == 0 {
        return Err(Error::Domain("tree depth must be at least 1".into()));
    }
    let window = StageWindow::new(family, t0, depth)?;
    materialize(&window.sampler(seed), t0, depth, node_budget)
}

/// Copies the first `depth` generations of any oracle into a tree.
pub fn materialize<O: NodeOracle>(oracle: &O, origin_stage: usize, depth: usize, node_budget: u64) -> Result<TruncatedTree> {
    let mut children = BTreeMap::new();
    let mut generation = vec![(Vec::new(), oracle.root())];
    let mut count: u64 = 1;
    for d in 0..depth {
        let mut next = Vec::new();
        for (path, node) in generation {
            let set = oracle.action_set(&node, d)?.clone();
            count = count.saturating_add(set.len());
            if count > node_budget {
                return Err(Error::BudgetExceeded { what: "tree node", limit: node_budget });
            }
            if d + 1 < depth {
                for a in set.iter() {
                    let mut p = path.clone();
                    p.push(a);
                    next.push((p, oracle.child(&node, a)));
                }
            }
            children.insert(path, set);
        }
        generation = next;
    }
    Ok(TruncatedTree { depth, origin_stage, children })
}

impl TruncatedTree {
    /// Builds a tree from explicit rows, validating the structural invariants.
    pub fn from_nodes(origin_stage: usize, depth: usize, children: BTreeMap<Path, Arc<ActionSet>>) -> Result<Self> {
        let bad = |msg: String| Err(Error::Parse(msg));
        if depth == 0 {
            return bad("tree depth must be at least 1".into());
        }
        if !children.contains_key(&Vec::new()) {
            return bad("root row missing".into());
        }
        for (path, set) in &children {
            if path.len() >= depth {
                return bad(format!("node {} lies at or below depth {depth}", path_string(path)));
            }
            if let Some((&last, parent)) = path.split_last() {
                match children.get(parent) {
                    Some(ps) if ps.contains(last) => {}
                    _ => return bad(format!("node {} has no parent offering it", path_string(path))),
                }
            }
            if path.len() + 1 < depth {
                let mut child = path.clone();
                for a in set.iter() {
                    child.push(a);
                    if !children.contains_key(&child) {
                        return bad(format!("node {} missing", path_string(&child)));
                    }
                    child.pop();
                }
            }
        }
        Ok(TruncatedTree { depth, origin_stage, children })
    }

    /// The tree whose every node offers only `{action}`.
    pub fn single_branch(origin_stage: usize, depth: usize, action: u64) -> Self {
        let set = Arc::new(ActionSet::singleton(action));
        let children = (0..depth).map(|k| (vec![action; k], set.clone())).collect();
        TruncatedTree { depth, origin_stage, children }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn origin_stage(&self) -> usize {
        self.origin_stage
    }

    /// Internal nodes with their action sets, in path order.
    pub fn nodes(&self) -> impl Iterator<Item = (&Path, &Arc<ActionSet>)> {
        self.children.iter()
    }

    pub fn internal_node_count(&self) -> usize {
        self.children.len()
    }

    /// Whether `h` is a node (internal or at depth `T`).
    pub fn contains(&self, h: &[u64]) -> bool {
        match h.split_last() {
            None => true,
            Some((&last, parent)) => self.children.get(parent).is_some_and(|s| s.contains(last)),
        }
    }

    pub fn action_set(&self, h: &[u64]) -> Result<&ActionSet> {
        self.children.get(h).map(AsRef::as_ref).ok_or_else(|| Error::UnknownNode(path_string(h)))
    }

    /// Nodes of generation `n` in path order.
    pub fn generation(&self, n: usize) -> Result<Vec<Path>> {
        if n > self.depth {
            return Err(Error::Domain(format!("generation {n} beyond depth {}", self.depth)));
        }
        if n == 0 {
            return Ok(vec![Vec::new()]);
        }
        Ok(self
            .children
            .iter()
            .filter(|(p, _)| p.len() == n - 1)
            .flat_map(|(p, s)| {
                s.iter().map(move |a| {
                    let mut c = p.clone();
                    c.push(a);
                    c
                })
            })
            .collect())
    }

    /// `#omega_n`, computed without enumerating generation `n`.
    pub fn generation_size(&self, n: usize) -> Result<u64> {
        if n > self.depth {
            return Err(Error::Domain(format!("generation {n} beyond depth {}", self.depth)));
        }
        if n == 0 {
            return Ok(1);
        }
        Ok(self.children.iter().filter(|(p, _)| p.len() == n - 1).map(|(_, s)| s.len()).sum())
    }

    /// Subtree at `h`, re-rooted at stage `t0 + |h|` with depth `T - |h|`.
    pub fn subtree(&self, h: &[u64]) -> Result<TruncatedTree> {
        if !self.contains(h) || h.len() > self.depth {
            return Err(Error::UnknownNode(path_string(h)));
        }
        let children = self
            .children
            .range(h.to_vec()..)
            .take_while(|(p, _)| p.starts_with(h))
            .map(|(p, s)| (p[h.len()..].to_vec(), s.clone()))
            .collect();
        Ok(TruncatedTree { depth: self.depth - h.len(), origin_stage: self.origin_stage + h.len(), children })
    }

    /// `sum_{k<t} sum_{h in omega_k} ln p_{t0+k}(A(h))`: the log-mass of the
    /// cylinder of trees agreeing with this one on generations `0..=t`.
    pub fn prefix_probability(&self, upto: usize, family: &DistributionFamily) -> Result<f64> {
        if upto > self.depth {
            return Err(Error::Domain(format!("prefix {upto} beyond depth {}", self.depth)));
        }
        let mut stages: Vec<Arc<PrimitiveDistribution>> = Vec::with_capacity(upto);
        for k in 0..upto {
            stages.push(family.stage(self.origin_stage + k)?);
        }
        let mut total = 0.0;
        for (p, s) in self.children.iter().filter(|(p, _)| p.len() < upto) {
            total += stages[p.len()].ln_mass_of(s);
            if total == f64::NEG_INFINITY {
                break;
            }
        }
        Ok(total)
    }

    /// Line-oriented text form: a header, then `path<TAB>action-set` per
    /// internal node. The root path is `.`; other paths join actions by `.`.
    pub fn to_text(&self) -> String {
        let mut out = format!("# foresight-tree origin_stage={} depth={}\n", self.origin_stage, self.depth);
        for (p, s) in &self.children {
            let _ = writeln!(out, "{}\t{}", path_string(p), s);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty tree text".into()))?;
        let fields: Vec<&str> = header.strip_prefix("# foresight-tree ").unwrap_or("").split(' ').collect();
        let field = |name: &str| -> Result<usize> {
            fields
                .iter()
                .find_map(|f| f.strip_prefix(name).and_then(|v| v.strip_prefix('=')))
                .ok_or_else(|| Error::Parse(format!("header lacks {name}")))?
                .parse()
                .map_err(|e| Error::Parse(format!("{name}: {e}")))
        };
        let (origin_stage, depth) = (field("origin_stage")?, field("depth")?);
        let mut children = BTreeMap::new();
        for line in lines {
            let (p, s) = line.split_once('\t').ok_or_else(|| Error::Parse(format!("row `{line}`")))?;
            if children.insert(parse_path(p)?, Arc::new(s.parse::<ActionSet>()?)).is_some() {
                return Err(Error::Parse(format!("duplicate row {p}")));
            }
        }
        Self::from_nodes(origin_stage, depth, children)
    }
}

/// Path notation used by the text format.
pub fn path_string(p: &[u64]) -> String {
    if p.is_empty() {
        ".".into()
    } else {
        p.iter().map(u64::to_string).collect::<Vec<_>>().join(".")
    }
}

pub fn parse_path(s: &str) -> Result<Path> {
    if s == "." {
        return Ok(Vec::new());
    }
    s.split('.').map(|t| t.parse::<u64>().map_err(|e| Error::Parse(format!("path `{s}`: {e}")))).collect()
}

/// Whether the oracle's tree agrees with `pattern` on generations `0..=upto`,
/// i.e. lies in the cylinder of `pattern`. Stops at the first disagreement.
pub fn in_cylinder<O: NodeOracle>(oracle: &O, pattern: &TruncatedTree, upto: usize) -> Result<bool> {
    let mut frontier = vec![(Vec::new(), oracle.root())];
    for d in 0..upto.min(pattern.depth) {
        let mut next = Vec::new();
        for (path, node) in frontier {
            let want = pattern.action_set(&path)?;
            let got = oracle.action_set(&node, d)?;
            if got.as_ref() != want {
                return Ok(false);
            }
            if d + 1 < upto {
                for a in want.iter() {
                    let mut p = path.clone();
                    p.push(a);
                    next.push((p, oracle.child(&node, a)));
                }
            }
        }
        frontier = next;
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distmodel::PartitionInstance;

    #[test]
    fn dummy_tree_is_single_branch() {
        let f = DistributionFamily::dirac_singletons(5);
        let t = sample_tree(&f, 0, 6, Seed(1)).unwrap();
        assert_eq!(t, TruncatedTree::single_branch(0, 6, 5));
        for n in 0..=6 {
            assert_eq!(t.generation_size(n).unwrap(), 1);
        }
        assert_eq!(t.prefix_probability(6, &f).unwrap(), 0.0);
    }

    #[test]
    fn delta_prefix_probability() {
        let f = DistributionFamily::example42();
        let delta = TruncatedTree::single_branch(0, 8, 0);
        assert_eq!(delta.prefix_probability(0, &f).unwrap(), 0.0);
        let lp = delta.prefix_probability(4, &f).unwrap();
        assert!((lp.exp() - 0.5 * 0.75 * 0.875 * 0.9375).abs() < 1e-15);
    }

    #[test]
    fn text_round_trip() {
        let f = DistributionFamily::example45();
        let t = sample_tree(&f, 2, 4, Seed(11)).unwrap();
        let text = t.to_text();
        let back = TruncatedTree::from_text(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn text_rejects_missing_nodes() {
        let bad = "# foresight-tree origin_stage=0 depth=3\n.\t0-1\n0\t0\n";
        assert!(TruncatedTree::from_text(bad).is_err());
    }

    #[test]
    fn subtree_reindexes() {
        let f = DistributionFamily::example42();
        let t = sample_tree(&f, 0, 5, Seed(4)).unwrap();
        let s = t.subtree(&[0]).unwrap();
        assert_eq!(s.origin_stage(), 1);
        assert_eq!(s.depth(), 4);
        assert_eq!(s.action_set(&[]).unwrap(), t.action_set(&[0]).unwrap());
        assert!(matches!(t.subtree(&[7, 7, 7]), Err(Error::UnknownNode(_))));
    }

    #[test]
    fn lazy_and_eager_agree() {
        let f = DistributionFamily::example43(PartitionInstance::Small);
        let w = StageWindow::new(&f, 0, 4).unwrap();
        let tree = sample_tree(&f, 0, 4, Seed(9)).unwrap();
        let lazy = w.sampler(Seed(9));
        assert!(in_cylinder(&lazy, &tree, 4).unwrap());
        for (p, s) in tree.nodes() {
            let key = p.iter().fold(lazy.root(), |k, &a| k.child(a));
            assert_eq!(lazy.action_set(&key, p.len()).unwrap(), s);
        }
    }

    #[test]
    fn node_budget_is_enforced() {
        let f = DistributionFamily::dirac_singletons(0);
        assert!(sample_tree_with_budget(&f, 0, 10, Seed(0), 5).is_err());
    }
}
