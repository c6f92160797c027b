//! MPE and MAP by two-phase case analysis.
//!
//! Nodes whose cutset holds only MAP variables (or nothing) maximize over
//! their cases and return the set of best hypotheses; nodes whose cutset holds
//! only non-MAP variables sum over their cases. A dtree is usable when, on
//! every root-to-leaf path, all maximizing nodes come before any summing node
//! (see [`validate_map_dtree`](crate::dtree::validate_map_dtree)); dtrees built by
//! [`el2sdt`](crate::dtree::el2sdt) from an order that eliminates the MAP
//! variables last always qualify.
//!
//! Caches hold hypothesis sets keyed by context index, and survive evidence
//! changes on every node whose subtree does not mention a changed variable.

use std::fmt::Write as _;

use crate::dtree::{validate_map_dtree_given, NodeId, NodeKind};
use crate::error::MapError;
use crate::model::{FactorSet, Instantiation, MixedRadix, VarId};
use crate::netio::format_prob;
use crate::rc::{CacheEntry, InvalidationReport, Session};

/// Two probabilities within this relative gap count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Default limit on the number of tied hypotheses carried around.
pub const DEFAULT_CAP: usize = 1024;

#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    pub assignment: Instantiation,
    pub prob: f64,
}

impl Hypothesis {
    pub fn new(assignment: Instantiation, prob: f64) -> Self {
        Self { assignment, prob }
    }
}

/// The pairs whose probability is maximal (within [`TIE_TOLERANCE`]).
pub fn max_set(pairs: Vec<Hypothesis>) -> Result<Vec<Hypothesis>, MapError> {
    let best = pairs.iter().map(|h| h.prob).fold(f64::NEG_INFINITY, f64::max);
    if pairs.is_empty() {
        return Err(MapError::Empty);
    }
    let floor = best - best.abs() * TIE_TOLERANCE;
    Ok(pairs.into_iter().filter(|h| h.prob >= floor).collect())
}

/// Cartesian product: merged instantiations, multiplied probabilities.
pub fn cross(left: &[Hypothesis], right: &[Hypothesis]) -> Result<Vec<Hypothesis>, MapError> {
    let mut out = Vec::with_capacity(left.len() * right.len());
    for l in left {
        for r in right {
            let assignment = l.assignment.merge(&r.assignment).ok_or_else(|| {
                let var = l
                    .assignment
                    .iter()
                    .find(|&(v, x)| r.assignment.get(v).is_some_and(|y| y != x))
                    .map_or(0, |(v, _)| v);
                MapError::Conflict(var)
            })?;
            out.push(Hypothesis { assignment, prob: l.prob * r.prob });
        }
    }
    Ok(out)
}

/// The maximal hypotheses over a fixed variable set, ordered by the
/// mixed-radix index of their assignment.
#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisSet {
    scope: Vec<VarId>,
    entries: Vec<Hypothesis>,
}

impl HypothesisSet {
    pub fn new(net: &FactorSet, mut scope: Vec<VarId>, mut entries: Vec<Hypothesis>) -> Self {
        scope.sort_unstable();
        scope.dedup();
        entries.sort_by_key(|h| net.index_of(&scope, &h.assignment).unwrap_or(usize::MAX));
        entries.dedup_by(|a, b| a.assignment == b.assignment);
        Self { scope, entries }
    }

    pub fn scope(&self) -> &[VarId] {
        &self.scope
    }

    pub fn entries(&self) -> &[Hypothesis] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Probability of the best hypothesis.
    pub fn probability(&self) -> f64 {
        self.entries.iter().map(|h| h.prob).fold(0.0, f64::max)
    }

    /// Same assignments, probabilities within `rel_tol`.
    pub fn matches(&self, other: &Self, rel_tol: f64) -> bool {
        self.scope == other.scope
            && self.entries.len() == other.entries.len()
            && self.entries.iter().zip(&other.entries).all(|(a, b)| {
                a.assignment == b.assignment && (a.prob - b.prob).abs() <= rel_tol * a.prob.abs().max(b.prob.abs())
            })
    }

    /// Keeps only the first hypothesis.
    pub fn into_single(mut self) -> Self {
        self.entries.truncate(1);
        self
    }

    /// `p=<prob> <name>=<label> …`, one line per hypothesis.
    pub fn format(&self, net: &FactorSet) -> String {
        let mut out = String::new();
        for h in &self.entries {
            let _ = write!(out, "p={}", format_prob(h.prob));
            for (v, x) in h.assignment.iter() {
                let var = net.variable(v);
                let _ = write!(out, " {}={}", var.name, var.labels[x]);
            }
            out.push('\n');
        }
        out
    }

    /// CSV with a `p` column followed by one column per scope variable.
    pub fn to_csv(&self, net: &FactorSet) -> String {
        let mut out = String::from("p");
        for &v in &self.scope {
            out.push(',');
            out.push_str(&net.variable(v).name);
        }
        out.push('\n');
        for h in &self.entries {
            out.push_str(&format_prob(h.prob));
            for &v in &self.scope {
                let label = h.assignment.get(v).map_or("", |x| net.variable(v).labels[x].as_str());
                let _ = write!(out, ",{label}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MapOptions {
    /// Maximum number of tied hypotheses before giving up.
    pub cap: usize,
    /// Report only the hypothesis with the smallest mixed-radix index.
    pub single: bool,
}

impl Default for MapOptions {
    fn default() -> Self {
        Self { cap: DEFAULT_CAP, single: false }
    }
}

impl Session<'_> {
    /// MAP hypotheses over `map_vars` given `evidence`.
    pub fn map(&mut self, map_vars: &[VarId], evidence: &Instantiation) -> Result<HypothesisSet, MapError> {
        self.map_with(map_vars, evidence, MapOptions::default())
    }

    pub fn map_with(
        &mut self,
        map_vars: &[VarId],
        evidence: &Instantiation,
        opts: MapOptions,
    ) -> Result<HypothesisSet, MapError> {
        let net = self.tree.factors();
        let mut scope = map_vars.to_vec();
        scope.sort_unstable();
        scope.dedup();
        if let Some(&v) = scope.iter().find(|&&v| v >= net.num_vars()) {
            return Err(crate::error::ModelError::UnknownVariable(v).into());
        }
        if let Some(&v) = scope.iter().find(|&&v| evidence.contains(v)) {
            return Err(MapError::MapVariableInEvidence(v));
        }
        let fixed: Vec<VarId> = evidence.vars().collect();
        let report = validate_map_dtree_given(self.tree, &scope, &fixed);
        if !report.is_ok() {
            return Err(MapError::InvalidDtree(format!("{:?}", report.violations)));
        }
        if self.map_scope.as_deref() != Some(&scope[..]) {
            for t in 0..self.tree.len() {
                let cells: u64 = self.hyps[t].values().map(|e| e.value.len() as u64).sum();
                self.stats.nodes[t].cached -= self.hyps[t].len() as u64;
                self.stats.current_cells -= cells;
                self.hyps[t].clear();
            }
            self.map_scope = Some(scope.clone());
        }
        let mut is_map = vec![false; net.num_vars()];
        for &v in &scope {
            is_map[v] = true;
        }

        self.begin(evidence)?;
        let result = self.rc_map(self.tree.root(), &is_map, opts.cap);
        self.end();
        let result = result?;
        if result.len() > opts.cap {
            return Err(MapError::TooManyHypotheses(opts.cap));
        }
        let set = HypothesisSet::new(net, scope, result);
        Ok(if opts.single { set.into_single() } else { set })
    }

    /// Most probable full instantiations consistent with `evidence`.
    pub fn mpe(&mut self, evidence: &Instantiation) -> Result<HypothesisSet, MapError> {
        self.mpe_with(evidence, MapOptions::default())
    }

    pub fn mpe_with(&mut self, evidence: &Instantiation, opts: MapOptions) -> Result<HypothesisSet, MapError> {
        let net = self.tree.factors();
        let free: Vec<VarId> = (0..net.num_vars()).filter(|&v| !evidence.contains(v)).collect();
        let set = self.map_with(&free, evidence, opts)?;
        let entries = set
            .entries
            .into_iter()
            .map(|h| Hypothesis::new(h.assignment.merge(evidence).expect("disjoint"), h.prob))
            .collect();
        Ok(HypothesisSet::new(net, (0..net.num_vars()).collect(), entries))
    }

    /// Switches evidence ahead of the next query, keeping every cache that
    /// the change cannot affect.
    pub fn update_evidence(&mut self, evidence: &Instantiation) -> Result<InvalidationReport, MapError> {
        Ok(self.set_evidence(evidence)?)
    }

    fn rc_map(&mut self, t: NodeId, is_map: &[bool], cap: usize) -> Result<Vec<Hypothesis>, MapError> {
        let tree = self.tree;
        self.stats.nodes[t].calls += 1;
        let (left, right) = match tree.node(t).kind {
            NodeKind::Leaf { factor } => return self.map_leaf(factor, is_map),
            NodeKind::Internal { left, right } => (left, right),
        };
        let key = self.context_index(t);
        if let Some(entry) = self.hyps[t].get_mut(&key) {
            entry.hits += 1;
            self.stats.nodes[t].hits += 1;
            return Ok(entry.value.clone());
        }
        self.stats.nodes[t].misses += 1;

        let (free, mut cases) = self.free_cutset(t);
        let summing = !free.is_empty() && free.iter().all(|&v| !is_map[v]);
        let mut best: Vec<Hypothesis> = Vec::new();
        let mut total = 0.0;
        let mut witness: Option<Instantiation> = None;
        while let Some(digits) = cases.current() {
            for (&v, &x) in free.iter().zip(digits) {
                self.recorded[v] = Some(x);
            }
            let l = self.rc_map(left, is_map, cap)?;
            let r = self.rc_map(right, is_map, cap)?;
            if summing {
                let ([l], [r]) = (&l[..], &r[..]) else {
                    return Err(MapError::NonSingleton(t));
                };
                total += l.prob * r.prob;
                if witness.is_none() {
                    witness = Some(l.assignment.merge(&r.assignment).ok_or(MapError::Conflict(t))?);
                }
            } else {
                best.extend(cross(&l, &r)?);
                best = max_set(best)?;
                if best.len() > cap {
                    return Err(MapError::TooManyHypotheses(cap));
                }
            }
            cases.advance();
        }
        for &v in &free {
            self.recorded[v] = None;
        }
        if summing {
            best = vec![Hypothesis::new(witness.unwrap_or_default(), total)];
        }
        if self.admission(t).admits(key) {
            let cells = best.len() as u64;
            self.hyps[t].insert(key, CacheEntry { value: best.clone(), hits: 0, remaining: u64::MAX });
            self.add_cells(t, cells);
        }
        Ok(best)
    }

    /// Leaf lookup: recorded MAP variables form the hypothesis; unrecorded
    /// non-MAP variables are summed out and unrecorded MAP variables (only
    /// possible when the leaf alone mentions them) are maximized.
    fn map_leaf(&self, factor: usize, is_map: &[bool]) -> Result<Vec<Hypothesis>, MapError> {
        let f = &self.tree.factors().factors()[factor];
        let mut base = 0;
        let mut fixed = Instantiation::new();
        let (mut free_map, mut free_sum) = (Vec::new(), Vec::new());
        for (k, &v) in f.scope().iter().enumerate() {
            match self.recorded[v] {
                Some(x) => {
                    base += x * f.strides()[k];
                    if is_map[v] {
                        fixed.set(v, x);
                    }
                }
                None if is_map[v] => free_map.push(k),
                None => free_sum.push(k),
            }
        }
        let mut out = Vec::new();
        let mut outer = MixedRadix::new(free_map.iter().map(|&k| f.cards()[k]).collect());
        while let Some(digits) = outer.current() {
            let mut assignment = fixed.clone();
            let mut offset = base;
            for (&k, &x) in free_map.iter().zip(digits) {
                assignment.set(f.scope()[k], x);
                offset += x * f.strides()[k];
            }
            let mut inner = MixedRadix::new(free_sum.iter().map(|&k| f.cards()[k]).collect());
            let mut p = 0.0;
            while let Some(ds) = inner.current() {
                p += f.values()[offset + free_sum.iter().zip(ds).map(|(&k, &x)| x * f.strides()[k]).sum::<usize>()];
                inner.advance();
            }
            out.push(Hypothesis::new(assignment, p));
            outer.advance();
        }
        if free_map.is_empty() {
            Ok(out)
        } else {
            max_set(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtree::{el2dt, el2sdt, EliminationOrder};
    use crate::rc::CacheFactor;

    fn h(pairs: &[(VarId, usize)], p: f64) -> Hypothesis {
        Hypothesis::new(Instantiation::from_pairs(pairs.iter().copied()).unwrap(), p)
    }

    fn two_var() -> FactorSet {
        let mut fs = FactorSet::new();
        fs.add_variable("A", vec!["true".into(), "false".into()]).unwrap();
        fs.add_variable("B", vec!["true".into(), "false".into()]).unwrap();
        fs.add_factor(&[0, 1], vec![0.32, 0.28, 0.10, 0.30]).unwrap();
        fs
    }

    #[test]
    fn max_set_examples() {
        let got = max_set(vec![h(&[(0, 0)], 0.32), h(&[(0, 1)], 0.28)]).unwrap();
        assert_eq!(got, vec![h(&[(0, 0)], 0.32)]);
        assert_eq!(max_set(vec![h(&[(0, 0)], 0.5), h(&[(0, 1)], 0.5)]).unwrap().len(), 2);
        assert_eq!(max_set(vec![h(&[], 0.1)]).unwrap(), vec![h(&[], 0.1)]);
        assert_eq!(max_set(vec![]), Err(MapError::Empty));
    }

    #[test]
    fn cross_examples() {
        assert_eq!(cross(&[h(&[(0, 1)], 2.0)], &[h(&[(1, 0)], 3.0)]).unwrap(), vec![h(&[(0, 1), (1, 0)], 6.0)]);
        let l = [h(&[(0, 0)], 1.0), h(&[(0, 1)], 1.0)];
        let r = [h(&[(1, 0)], 1.0), h(&[(1, 1)], 1.0), h(&[(1, 2)], 1.0)];
        assert_eq!(cross(&l, &r).unwrap().len(), 6);
        assert_eq!(cross(&[h(&[(0, 0)], 1.0)], &[h(&[(0, 1)], 1.0)]), Err(MapError::Conflict(0)));
    }

    #[test]
    fn two_variable_map_queries() {
        let fs = two_var();
        let order = EliminationOrder::natural(2);
        let tree = el2sdt(&fs, &order).unwrap();
        let mut s = Session::new(&tree, CacheFactor::full(&tree)).unwrap();
        let none = s.map(&[1], &Instantiation::new()).unwrap();
        assert_eq!(none.entries().len(), 1);
        assert_eq!(none.entries()[0].assignment, Instantiation::from_pairs([(1, 1)]).unwrap());
        assert!((none.entries()[0].prob - 0.58).abs() < 1e-12);
        let a_true = s.map(&[1], &Instantiation::from_pairs([(0, 0)]).unwrap()).unwrap();
        assert_eq!(a_true.entries()[0].assignment, Instantiation::from_pairs([(1, 0)]).unwrap());
        assert!((a_true.entries()[0].prob - 0.32).abs() < 1e-12);
        let mpe = s.mpe(&Instantiation::new()).unwrap();
        assert_eq!(mpe.entries(), &[h(&[(0, 0), (1, 0)], 0.32)]);
        assert_eq!(mpe.format(&fs), "p=0.32 A=true B=true\n");
    }

    #[test]
    fn conditioning_on_a_then_maximizing_is_wrong() {
        // Maximizing per-case answers over A picks B=true; the true MAP is B=false.
        let fs = two_var();
        let tree = el2sdt(&fs, &EliminationOrder::natural(2)).unwrap();
        let mut s = Session::new(&tree, CacheFactor::full(&tree)).unwrap();
        let per_case: Vec<Hypothesis> = (0..2)
            .flat_map(|a| s.map(&[1], &Instantiation::from_pairs([(0, a)]).unwrap()).unwrap().entries().to_vec())
            .collect();
        let naive = max_set(per_case).unwrap();
        assert_eq!(naive[0].assignment.get(1), Some(0));
        let truth = s.map(&[1], &Instantiation::new()).unwrap();
        assert_eq!(truth.entries()[0].assignment.get(1), Some(1));
        // A dtree that cases on A (non-MAP) above B (MAP) is rejected.
        let wrong_order = el2sdt(&fs, &EliminationOrder::new(vec![1, 0], 2).unwrap()).unwrap();
        let mut bad = Session::new(&wrong_order, CacheFactor::full(&wrong_order)).unwrap();
        assert!(matches!(bad.map(&[1], &Instantiation::new()), Err(MapError::InvalidDtree(_))));
    }

    #[test]
    fn map_rejects_evidence_on_map_variables() {
        let fs = two_var();
        let tree = el2sdt(&fs, &EliminationOrder::natural(2)).unwrap();
        let mut s = Session::new(&tree, CacheFactor::full(&tree)).unwrap();
        let e = Instantiation::from_pairs([(1, 0)]).unwrap();
        assert_eq!(s.map(&[1], &e), Err(MapError::MapVariableInEvidence(1)));
        assert!(s.recorded().is_empty());
    }

    #[test]
    fn full_evidence_mpe() {
        let fs = two_var();
        let tree = el2sdt(&fs, &EliminationOrder::natural(2)).unwrap();
        let mut s = Session::new(&tree, CacheFactor::none(&tree)).unwrap();
        let e = Instantiation::from_pairs([(0, 1), (1, 0)]).unwrap();
        assert_eq!(s.mpe(&e).unwrap().entries(), &[h(&[(0, 1), (1, 0)], 0.10)]);
    }

    #[test]
    fn ties_and_single_mode() {
        let mut fs = FactorSet::new();
        fs.add_variable("X", vec!["a".into(), "b".into()]).unwrap();
        fs.add_variable("Y", vec!["a".into(), "b".into()]).unwrap();
        fs.add_factor(&[0, 1], vec![0.25; 4]).unwrap();
        let tree = el2sdt(&fs, &EliminationOrder::natural(2)).unwrap();
        let mut s = Session::new(&tree, CacheFactor::full(&tree)).unwrap();
        assert_eq!(s.mpe(&Instantiation::new()).unwrap().len(), 4);
        let one = s.mpe_with(&Instantiation::new(), MapOptions { single: true, ..Default::default() }).unwrap();
        assert_eq!(one.entries(), &[h(&[(0, 0), (1, 0)], 0.25)]);
        let capped = s.mpe_with(&Instantiation::new(), MapOptions { cap: 2, single: false });
        assert_eq!(capped, Err(MapError::TooManyHypotheses(2)));
    }

    #[test]
    fn local_map_variables_on_plain_dtrees() {
        // el2dt leaves B unrecorded at the leaf; the leaf maximizes it.
        let fs = two_var();
        let tree = el2dt(&fs, &EliminationOrder::natural(2)).unwrap();
        assert_eq!(tree.len(), 1);
        let mut s = Session::new(&tree, CacheFactor::full(&tree)).unwrap();
        let got = s.map(&[1], &Instantiation::new()).unwrap();
        assert_eq!(got.entries().len(), 1);
        assert!((got.entries()[0].prob - 0.58).abs() < 1e-12);
        assert_eq!(got.entries()[0].assignment.get(1), Some(1));
    }

    #[test]
    fn csv_output() {
        let fs = two_var();
        let set = HypothesisSet::new(&fs, vec![1], vec![h(&[(1, 1)], 0.58)]);
        assert_eq!(set.to_csv(&fs), "p,B\n0.58,false\n");
    }
}
