//! Recursive conditioning.
//!
//! A [`Session`] evaluates the probability of evidence by case analysis on
//! dtree cutsets, caching node results keyed by the instantiation of the
//! node's context. How much of each cache is used is set per node by a
//! [`CacheFactor`]; anything between linear space (`cf ≡ 0`) and full caching
//! (`cf ≡ 1`) gives the same answer.
//!
//! Besides evaluation this module predicts call counts for a cache factor,
//! computes how often each cache entry will be looked up (so entries can be
//! dropped after their last use), and builds greedy time-space tradeoff
//! curves.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dtree::{difference, union, Dtree, NodeId, NodeKind};
use crate::error::RcError;
use crate::mapmpe::Hypothesis;
use crate::model::{Instantiation, MixedRadix, VarId};
use crate::par::{self, Exec};

/// Per-internal-node cache fractions plus the seed that picks which context
/// instantiations a fractional cache admits.
#[derive(Clone, Debug, PartialEq)]
pub struct CacheFactor {
    fractions: Vec<Option<f64>>,
    seed: u64,
}

impl CacheFactor {
    pub fn from_fn(tree: &Dtree, mut f: impl FnMut(NodeId) -> f64) -> Self {
        let fractions = (0..tree.len()).map(|t| (!tree.node(t).is_leaf()).then(|| f(t))).collect();
        Self { fractions, seed: 0 }
    }

    pub fn uniform(tree: &Dtree, fraction: f64) -> Self {
        Self::from_fn(tree, |_| fraction)
    }

    pub fn full(tree: &Dtree) -> Self {
        Self::uniform(tree, 1.0)
    }

    pub fn none(tree: &Dtree) -> Self {
        Self::uniform(tree, 0.0)
    }

    /// A cache factor over `len` nodes with only the listed entries set.
    /// Validation against a tree happens when a session is created.
    pub fn from_entries(len: usize, entries: impl IntoIterator<Item = (NodeId, f64)>) -> Self {
        let mut fractions = vec![None; len];
        for (t, f) in entries {
            if t < len {
                fractions[t] = Some(f);
            }
        }
        Self { fractions, seed: 0 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn get(&self, t: NodeId) -> Option<f64> {
        self.fractions.get(t).copied().flatten()
    }

    /// Cache fraction of `t`, zero for leaves and unset nodes.
    pub fn fraction(&self, t: NodeId) -> f64 {
        self.get(t).unwrap_or(0.0)
    }

    pub fn set(&mut self, t: NodeId, fraction: f64) {
        self.fractions[t] = Some(fraction);
    }

    pub fn is_discrete(&self) -> bool {
        self.fractions.iter().flatten().all(|&f| f == 0.0 || f == 1.0)
    }

    pub fn validate(&self, tree: &Dtree) -> Result<(), RcError> {
        if self.fractions.len() != tree.len() {
            return Err(RcError::CacheFactorLength { expected: tree.len(), found: self.fractions.len() });
        }
        for t in tree.internal_nodes() {
            match self.fractions[t] {
                None => return Err(RcError::MissingCacheFactor(t)),
                Some(value) if !(0.0..=1.0).contains(&value) => {
                    return Err(RcError::CacheFactorRange { node: t, value })
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    /// Total cells the allocation may occupy: Σ ⌈cf(T)·context(T)#⌉.
    pub fn capacity(&self, tree: &Dtree) -> u64 {
        tree.internal_nodes()
            .map(|t| (self.fraction(t) * tree.count(&tree.node(t).context) as f64).ceil() as u64)
            .sum()
    }
}

/// Which context indices a node's cache accepts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Admission {
    All,
    Nothing,
    Subset { bits: Vec<u64>, size: u64 },
}

impl Admission {
    pub fn admits(&self, index: usize) -> bool {
        match self {
            Admission::All => true,
            Admission::Nothing => false,
            Admission::Subset { bits, .. } => bits.get(index / 64).is_some_and(|w| w >> (index % 64) & 1 == 1),
        }
    }

    /// Number of admitted indices out of `slots`.
    pub fn size(&self, slots: u64) -> u64 {
        match self {
            Admission::All => slots,
            Admission::Nothing => 0,
            Admission::Subset { size, .. } => *size,
        }
    }
}

/// The admitted subset of context indices for node `t`.
///
/// For `0 < cf < 1` the subset is drawn uniformly at random from a stream
/// keyed by the cache-factor seed and the node id. Its size is `cf·n`
/// rounded up or down at random so that every index is admitted with
/// probability exactly `cf`; it never exceeds `⌈cf·n⌉`.
pub fn admission_for(tree: &Dtree, cf: &CacheFactor, t: NodeId) -> Admission {
    let fraction = cf.fraction(t);
    if tree.node(t).is_leaf() || fraction <= 0.0 {
        return Admission::Nothing;
    }
    if fraction >= 1.0 {
        return Admission::All;
    }
    let slots = tree.count(&tree.node(t).context) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(cf.seed());
    rng.set_stream(t as u64);
    let exact = fraction * slots as f64;
    let mut size = exact.floor() as usize;
    if rng.random::<f64>() < exact - exact.floor() {
        size += 1;
    }
    let mut bits = vec![0u64; slots.div_ceil(64)];
    for i in rand::seq::index::sample(&mut rng, slots, size.min(slots)) {
        bits[i / 64] |= 1 << (i % 64);
    }
    Admission::Subset { bits, size: size as u64 }
}

#[derive(Clone, Debug)]
pub(crate) struct CacheEntry<T> {
    pub(crate) value: T,
    pub(crate) hits: u64,
    pub(crate) remaining: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NodeStats {
    pub calls: u64,
    pub hits: u64,
    pub misses: u64,
    pub cached: u64,
    pub evicted: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub nodes: Vec<NodeStats>,
    pub current_cells: u64,
    pub peak_cells: u64,
}

impl Stats {
    pub fn total_calls(&self) -> u64 {
        self.nodes.iter().map(|n| n.calls).sum()
    }

    /// `node=<id> calls=<n> hits=<n> misses=<n> cached=<n> evicted=<n>` per node.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (t, n) in self.nodes.iter().enumerate() {
            let _ = writeln!(
                out,
                "node={t} calls={} hits={} misses={} cached={} evicted={}",
                n.calls, n.hits, n.misses, n.cached, n.evicted
            );
        }
        out
    }
}

/// Caches cleared by an evidence change.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InvalidationReport {
    pub cleared: Vec<NodeId>,
    pub retained_cells: u64,
}

/// Evaluation state over one dtree: recorded instantiation, caches and
/// instrumentation. A session runs one query at a time.
pub struct Session<'t> {
    pub(crate) tree: &'t Dtree,
    cf: CacheFactor,
    admission: Vec<Admission>,
    pub(crate) recorded: Vec<Option<usize>>,
    evidence: Instantiation,
    values: Vec<HashMap<usize, CacheEntry<f64>>>,
    pub(crate) hyps: Vec<HashMap<usize, CacheEntry<Vec<Hypothesis>>>>,
    pub(crate) map_scope: Option<Vec<VarId>>,
    pub(crate) stats: Stats,
    retrievals: Option<Vec<u64>>,
    short_circuit: bool,
    queried: bool,
}

impl<'t> Session<'t> {
    pub fn new(tree: &'t Dtree, cf: CacheFactor) -> Result<Self, RcError> {
        cf.validate(tree)?;
        let admission = (0..tree.len()).map(|t| admission_for(tree, &cf, t)).collect();
        Ok(Self {
            tree,
            cf,
            admission,
            recorded: vec![None; tree.factors().num_vars()],
            evidence: Instantiation::new(),
            values: vec![HashMap::new(); tree.len()],
            hyps: vec![HashMap::new(); tree.len()],
            map_scope: None,
            stats: Stats { nodes: vec![NodeStats::default(); tree.len()], current_cells: 0, peak_cells: 0 },
            retrievals: None,
            short_circuit: false,
            queried: false,
        })
    }

    pub fn tree(&self) -> &'t Dtree {
        self.tree
    }

    pub fn cache_factor(&self) -> &CacheFactor {
        &self.cf
    }

    pub fn stats(&self) -> &Stats {
        &self.stats
    }

    /// Evidence the current caches were computed under.
    pub fn evidence(&self) -> &Instantiation {
        &self.evidence
    }

    /// Skip the right child whenever the left one returns exactly zero. Call
    /// counts then no longer follow the closed forms.
    pub fn set_short_circuit(&mut self, on: bool) {
        self.short_circuit = on;
    }

    pub fn admits(&self, t: NodeId, index: usize) -> bool {
        self.admission[t].admits(index)
    }

    /// Currently recorded instantiation (empty between queries).
    pub fn recorded(&self) -> Instantiation {
        Instantiation::from_pairs(self.recorded.iter().enumerate().filter_map(|(v, x)| x.map(|x| (v, x))))
            .expect("one value per variable")
    }

    /// Probability of `evidence`: the sum over all consistent full
    /// instantiations of the product of all factors.
    pub fn query(&mut self, evidence: &Instantiation) -> Result<f64, RcError> {
        self.begin(evidence)?;
        let p = self.rc(self.tree.root());
        self.end();
        Ok(p)
    }

    /// Like [`query`](Self::query), but drops each cache entry right after
    /// its last lookup. Caches start empty. Without evidence the lookup
    /// budget of every entry is exact; with evidence nothing is evicted.
    /// Returns the probability and the peak number of live cache cells.
    pub fn query_forgetting(&mut self, evidence: &Instantiation) -> Result<(f64, u64), RcError> {
        if !self.cf.is_discrete() {
            return Err(RcError::NotDiscrete);
        }
        self.tree.factors().check_instantiation(evidence)?;
        self.clear_caches();
        if evidence.is_empty() {
            let counts = (0..self.tree.len())
                .map(|t| retrieval_count(self.tree, &self.cf, t).unwrap_or(0))
                .collect();
            self.retrievals = Some(counts);
        }
        let result = self.query(evidence);
        self.retrievals = None;
        Ok((result?, self.stats.peak_cells))
    }

    /// Per-node call counts of the last query.
    pub fn exact_calls(&self) -> Result<Vec<u64>, RcError> {
        if !self.queried {
            return Err(RcError::NoQuery);
        }
        Ok(self.stats.nodes.iter().map(|n| n.calls).collect())
    }

    /// `(context index, lookups)` for every live entry of node `t`, by index.
    pub fn entry_lookups(&self, t: NodeId) -> Vec<(usize, u64)> {
        let mut out: Vec<_> = self.values[t].iter().map(|(&k, e)| (k, e.hits)).collect();
        out.sort_unstable();
        out
    }

    /// Number of live entries in node `t`'s cache.
    pub fn cache_len(&self, t: NodeId) -> usize {
        self.values[t].len() + self.hyps[t].len()
    }

    /// Switches to new evidence. Caches of every node above a leaf whose
    /// factor mentions a variable with changed evidence are cleared; all
    /// other caches stay valid and are kept.
    pub fn set_evidence(&mut self, evidence: &Instantiation) -> Result<InvalidationReport, RcError> {
        self.tree.factors().check_instantiation(evidence)?;
        let changed: Vec<VarId> = (0..self.tree.factors().num_vars())
            .filter(|&v| self.evidence.get(v) != evidence.get(v))
            .collect();
        let mut dirty = vec![false; self.tree.len()];
        if !changed.is_empty() {
            for leaf in self.tree.leaves() {
                let vars = &self.tree.node(leaf).vars;
                if changed.iter().any(|v| vars.binary_search(v).is_ok()) {
                    for a in self.tree.ancestors(leaf) {
                        if dirty[a] {
                            break;
                        }
                        dirty[a] = true;
                    }
                }
            }
        }
        let cleared: Vec<NodeId> = (0..self.tree.len()).filter(|&t| dirty[t]).collect();
        for &t in &cleared {
            self.clear_node(t);
        }
        self.evidence = evidence.clone();
        Ok(InvalidationReport { cleared, retained_cells: self.stats.current_cells })
    }

    /// Empties every cache.
    pub fn clear_caches(&mut self) {
        for t in 0..self.tree.len() {
            self.clear_node(t);
        }
    }

    fn clear_node(&mut self, t: NodeId) {
        let cells = self.values[t].len() as u64 + self.hyps[t].values().map(|e| e.value.len() as u64).sum::<u64>();
        self.values[t].clear();
        self.hyps[t].clear();
        self.stats.current_cells -= cells;
        self.stats.nodes[t].cached = 0;
    }

    pub(crate) fn begin(&mut self, evidence: &Instantiation) -> Result<(), RcError> {
        self.set_evidence(evidence)?;
        for n in &mut self.stats.nodes {
            n.calls = 0;
            n.hits = 0;
            n.misses = 0;
            n.evicted = 0;
        }
        self.stats.peak_cells = self.stats.current_cells;
        self.recorded.fill(None);
        for (v, x) in evidence.iter() {
            self.recorded[v] = Some(x);
        }
        Ok(())
    }

    pub(crate) fn end(&mut self) {
        self.recorded.fill(None);
        self.queried = true;
    }

    pub(crate) fn context_index(&self, t: NodeId) -> usize {
        let factors = self.tree.factors();
        self.tree.node(t).context.iter().fold(0, |idx, &v| {
            idx * factors.cardinality(v) + self.recorded[v].expect("context variables are recorded")
        })
    }

    /// Unrecorded cutset variables of `t` and their cardinalities.
    pub(crate) fn free_cutset(&self, t: NodeId) -> (Vec<VarId>, MixedRadix) {
        let free: Vec<VarId> = self.tree.node(t).cutset.iter().copied().filter(|&v| self.recorded[v].is_none()).collect();
        let cards = free.iter().map(|&v| self.tree.factors().cardinality(v)).collect();
        (free, MixedRadix::new(cards))
    }

    fn rc(&mut self, t: NodeId) -> f64 {
        let tree = self.tree;
        self.stats.nodes[t].calls += 1;
        let (left, right) = match tree.node(t).kind {
            NodeKind::Leaf { factor } => return self.leaf_value(factor),
            NodeKind::Internal { left, right } => (left, right),
        };
        let key = self.context_index(t);
        if let Some(p) = self.lookup(t, key) {
            return p;
        }
        self.stats.nodes[t].misses += 1;
        let (free, mut cases) = self.free_cutset(t);
        let mut p = 0.0;
        while let Some(digits) = cases.current() {
            for (&v, &x) in free.iter().zip(digits) {
                self.recorded[v] = Some(x);
            }
            let l = self.rc(left);
            if !(self.short_circuit && l == 0.0) {
                p += l * self.rc(right);
            }
            cases.advance();
        }
        for &v in &free {
            self.recorded[v] = None;
        }
        self.store(t, key, p);
        p
    }

    /// Sum of the factor's entries consistent with the recorded instantiation.
    fn leaf_value(&self, factor: usize) -> f64 {
        let f = &self.tree.factors().factors()[factor];
        let mut base = 0;
        let mut free = Vec::new();
        for (k, &v) in f.scope().iter().enumerate() {
            match self.recorded[v] {
                Some(x) => base += x * f.strides()[k],
                None => free.push(k),
            }
        }
        if free.is_empty() {
            return f.values()[base];
        }
        let mut counter = MixedRadix::new(free.iter().map(|&k| f.cards()[k]).collect());
        let mut sum = 0.0;
        while let Some(digits) = counter.current() {
            let offset: usize = free.iter().zip(digits).map(|(&k, &x)| x * f.strides()[k]).sum();
            sum += f.values()[base + offset];
            counter.advance();
        }
        sum
    }

    fn lookup(&mut self, t: NodeId, key: usize) -> Option<f64> {
        let forgetting = self.retrievals.is_some();
        let entry = self.values[t].get_mut(&key)?;
        entry.hits += 1;
        let value = entry.value;
        self.stats.nodes[t].hits += 1;
        if forgetting {
            entry.remaining = entry.remaining.saturating_sub(1);
            if entry.remaining == 0 {
                self.values[t].remove(&key);
                self.stats.current_cells -= 1;
                self.stats.nodes[t].cached -= 1;
                self.stats.nodes[t].evicted += 1;
            }
        }
        Some(value)
    }

    fn store(&mut self, t: NodeId, key: usize, value: f64) {
        if !self.admission[t].admits(key) {
            return;
        }
        let remaining = self.retrievals.as_ref().map_or(u64::MAX, |r| r[t]);
        if remaining == 0 {
            self.stats.nodes[t].evicted += 1;
            return;
        }
        self.values[t].insert(key, CacheEntry { value, hits: 0, remaining });
        self.add_cells(t, 1);
    }

    pub(crate) fn add_cells(&mut self, t: NodeId, cells: u64) {
        self.stats.nodes[t].cached += 1;
        self.stats.current_cells += cells;
        self.stats.peak_cells = self.stats.peak_cells.max(self.stats.current_cells);
    }

    pub(crate) fn admission(&self, t: NodeId) -> &Admission {
        &self.admission[t]
    }
}

/// Expected number of calls to every node under `cf`, with no evidence and
/// uniformly random cache admission. The root is called once; a non-root
/// node `T` with parent `P` is called
/// `cutset(P)# · (cf(P)·context(P)# + (1 − cf(P))·ave(P))` times. For a
/// discrete cache factor the counts are exact.
pub fn predicted_calls(tree: &Dtree, cf: &CacheFactor) -> Vec<f64> {
    let mut ave = vec![0.0; tree.len()];
    ave[tree.root()] = 1.0;
    for t in 1..tree.len() {
        let p = tree.node(t).parent.expect("non-root node has a parent");
        ave[t] = child_calls(tree, p, cf.fraction(p), ave[p]);
    }
    ave
}

fn child_calls(tree: &Dtree, parent: NodeId, fraction: f64, parent_calls: f64) -> f64 {
    let node = tree.node(parent);
    let cutset = tree.count(&node.cutset) as f64;
    let context = tree.count(&node.context) as f64;
    cutset * (fraction * context + (1.0 - fraction) * parent_calls)
}

/// Number of times each entry of node `t`'s cache is retrieved after being
/// stored, when running without evidence under a discrete cache factor.
///
/// With `T_1` the nearest strict ancestor that caches (the root if none
/// does) and `T_2..T_{n-1}` the uncached nodes in between, the count is
/// `(context(T_1) ∪ cutset(T_1) ∪ … ∪ cutset(T_{n-1}) − context(t))# − 1`.
pub fn retrieval_count(tree: &Dtree, cf: &CacheFactor, t: NodeId) -> Result<u64, RcError> {
    if !cf.is_discrete() {
        return Err(RcError::NotDiscrete);
    }
    if tree.node(t).is_leaf() || cf.fraction(t) != 1.0 {
        return Err(RcError::NotCached(t));
    }
    let mut keyed: Vec<VarId> = Vec::new();
    let mut top = None;
    for a in tree.ancestors(t) {
        keyed = union(&keyed, &tree.node(a).cutset);
        top = Some(a);
        if cf.fraction(a) == 1.0 {
            break;
        }
    }
    let Some(top) = top else { return Ok(0) };
    keyed = union(&keyed, &tree.node(top).context);
    Ok(tree.count(&difference(&keyed, &tree.node(t).context)) - 1)
}

/// One point of a time-space tradeoff curve.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub budget: u64,
    pub used_cells: u64,
    pub allocation: CacheFactor,
    pub predicted_calls: f64,
}

/// Greedy discrete cache allocations for ascending cell budgets.
///
/// Nodes are granted full caches one at a time, always picking the node
/// that fits the remaining budget and removes the most predicted calls per
/// cell (ties go to the lower node id). Grants carry over between budgets,
/// so predicted calls never increase along the curve.
pub fn tradeoff_curve(tree: &Dtree, budgets: &[u64], exec: Exec) -> Result<Vec<CurvePoint>, RcError> {
    if budgets.windows(2).any(|w| w[0] > w[1]) {
        return Err(RcError::UnsortedBudgets);
    }
    let subtree_end = subtree_ends(tree);
    let sizes: Vec<u64> = (0..tree.len()).map(|t| tree.count(&tree.node(t).context)).collect();
    let mut cf = CacheFactor::none(tree);
    let mut ave = predicted_calls(tree, &cf);
    let mut used = 0u64;
    let mut points = Vec::with_capacity(budgets.len());

    for &budget in budgets {
        loop {
            let candidates: Vec<NodeId> = tree
                .internal_nodes()
                .filter(|&t| cf.fraction(t) == 0.0 && used + sizes[t] <= budget)
                .collect();
            if candidates.is_empty() {
                break;
            }
            let gains = par::map(exec, &candidates, |&t| {
                subtree_reduction(tree, &cf, &ave, t, subtree_end[t]) / sizes[t] as f64
            });
            let mut best = 0;
            for i in 1..candidates.len() {
                if gains[i] > gains[best] {
                    best = i;
                }
            }
            let t = candidates[best];
            cf.set(t, 1.0);
            used += sizes[t];
            ave = predicted_calls(tree, &cf);
        }
        points.push(CurvePoint { budget, used_cells: used, allocation: cf.clone(), predicted_calls: ave.iter().sum() });
    }
    Ok(points)
}

/// Exclusive end of each node's preorder range.
fn subtree_ends(tree: &Dtree) -> Vec<usize> {
    let mut end: Vec<usize> = (1..=tree.len()).collect();
    for t in (0..tree.len()).rev() {
        if let Some((_, right)) = tree.node(t).children() {
            end[t] = end[right];
        }
    }
    end
}

/// Drop in total predicted calls if node `t` switched to full caching.
fn subtree_reduction(tree: &Dtree, cf: &CacheFactor, ave: &[f64], t: NodeId, end: usize) -> f64 {
    let mut fresh = ave[t..end].to_vec();
    for d in t + 1..end {
        let p = tree.node(d).parent.expect("non-root");
        let fraction = if p == t { 1.0 } else { cf.fraction(p) };
        fresh[d - t] = child_calls(tree, p, fraction, fresh[p - t]);
    }
    ave[t..end].iter().sum::<f64>() - fresh.iter().sum::<f64>()
}

/// Probabilities of several evidence sets, each in its own session.
pub fn batch_query(tree: &Dtree, cf: &CacheFactor, evidence: &[Instantiation], exec: Exec) -> Result<Vec<f64>, RcError> {
    par::map(exec, evidence, |e| Session::new(tree, cf.clone())?.query(e)).into_iter().collect()
}

/// Mean per-node call counts of evidence-free queries over admission seeds.
pub fn mean_calls_over_seeds(tree: &Dtree, cf: &CacheFactor, seeds: &[u64], exec: Exec) -> Result<Vec<f64>, RcError> {
    let runs = par::map(exec, seeds, |&seed| -> Result<Vec<u64>, RcError> {
        let mut s = Session::new(tree, cf.clone().with_seed(seed))?;
        s.query(&Instantiation::new())?;
        s.exact_calls()
    });
    let mut mean = vec![0.0; tree.len()];
    for run in runs {
        for (m, c) in mean.iter_mut().zip(run?) {
            *m += c as f64;
        }
    }
    let n = seeds.len().max(1) as f64;
    Ok(mean.into_iter().map(|m| m / n).collect())
}
