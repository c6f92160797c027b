//! Decomposition trees.
//!
//! A dtree is a full binary tree whose leaves are the factors of a
//! [`FactorSet`]. Nodes are stored in preorder (the root is node 0) and each
//! carries the variable sets that drive recursive conditioning:
//!
//! * `vars`: variables mentioned by factors below the node;
//! * `cutset`: variables shared by the two children, minus the a-cutset;
//! * `acutset`: union of the cutsets of all strict ancestors;
//! * `context`: `vars ∩ acutset`, the cache key of the node;
//! * `cluster`: `cutset ∪ context` for internal nodes, `vars` for leaves.
//!
//! All sets are sorted lists of variable ids.

use std::fmt::Write as _;

use crate::error::DtreeError;
use crate::model::{Factor, FactorSet, VarId};

pub type NodeId = usize;

/// A permutation of all network variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EliminationOrder {
    sequence: Vec<VarId>,
}

impl EliminationOrder {
    pub fn new(sequence: Vec<VarId>, num_vars: usize) -> Result<Self, DtreeError> {
        let mut seen = vec![false; num_vars];
        if sequence.len() != num_vars {
            return Err(DtreeError::BadOrder);
        }
        for &v in &sequence {
            if v >= num_vars || seen[v] {
                return Err(DtreeError::BadOrder);
            }
            seen[v] = true;
        }
        Ok(Self { sequence })
    }

    /// The identity order 0, 1, ..., n-1.
    pub fn natural(num_vars: usize) -> Self {
        Self { sequence: (0..num_vars).collect() }
    }

    pub fn sequence(&self) -> &[VarId] {
        &self.sequence
    }

    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }

    /// Position of every variable in the order, indexed by variable id.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.sequence.len()];
        for (i, &v) in self.sequence.iter().enumerate() {
            pos[v] = i;
        }
        pos
    }

    /// Stable reorder moving the given variables to the end.
    pub fn with_last(&self, last: &[VarId]) -> Self {
        let mut sequence: Vec<VarId> = self.sequence.iter().copied().filter(|v| !last.contains(v)).collect();
        sequence.extend(self.sequence.iter().copied().filter(|v| last.contains(v)));
        Self { sequence }
    }
}

/// Tree structure before annotation: leaves name factor indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Shape {
    Leaf(usize),
    Node(Box<Shape>, Box<Shape>),
}

impl Shape {
    pub fn node(left: Shape, right: Shape) -> Self {
        Shape::Node(Box::new(left), Box::new(right))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Leaf { factor: usize },
    Internal { left: NodeId, right: NodeId },
}

#[derive(Clone, Debug)]
pub struct Node {
    pub kind: NodeKind,
    pub parent: Option<NodeId>,
    pub vars: Vec<VarId>,
    pub cutset: Vec<VarId>,
    pub acutset: Vec<VarId>,
    pub context: Vec<VarId>,
    pub cluster: Vec<VarId>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf { .. })
    }

    pub fn children(&self) -> Option<(NodeId, NodeId)> {
        match self.kind {
            NodeKind::Internal { left, right } => Some((left, right)),
            NodeKind::Leaf { .. } => None,
        }
    }
}

/// An annotated dtree. It owns its factor set, which may include unit
/// factors added during construction.
#[derive(Clone, Debug)]
pub struct Dtree {
    nodes: Vec<Node>,
    factors: FactorSet,
}

pub(crate) fn union(a: &[VarId], b: &[VarId]) -> Vec<VarId> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

pub(crate) fn intersect(a: &[VarId], b: &[VarId]) -> Vec<VarId> {
    a.iter().copied().filter(|v| b.binary_search(v).is_ok()).collect()
}

pub(crate) fn difference(a: &[VarId], b: &[VarId]) -> Vec<VarId> {
    a.iter().copied().filter(|v| b.binary_search(v).is_err()).collect()
}

fn sorted(mut v: Vec<VarId>) -> Vec<VarId> {
    v.sort_unstable();
    v.dedup();
    v
}

impl Dtree {
    /// Annotates a tree shape over `factors`. Every factor must appear at
    /// exactly one leaf.
    pub fn from_shape(factors: FactorSet, shape: &Shape) -> Result<Self, DtreeError> {
        let mut nodes = Vec::new();
        let mut seen = vec![false; factors.factors().len()];
        flatten(shape, None, &mut nodes, &mut seen, &factors)?;
        if seen.iter().any(|s| !s) {
            return Err(DtreeError::BadLeaves);
        }
        let mut tree = Self { nodes, factors };
        tree.compute_sets();
        Ok(tree)
    }

    /// Fills vars bottom-up, then cutset/acutset/context/cluster top-down.
    fn compute_sets(&mut self) {
        for t in (0..self.nodes.len()).rev() {
            self.nodes[t].vars = match self.nodes[t].kind {
                NodeKind::Leaf { factor } => sorted(self.factors.factors()[factor].scope().to_vec()),
                NodeKind::Internal { left, right } => union(&self.nodes[left].vars, &self.nodes[right].vars),
            };
        }
        for t in 0..self.nodes.len() {
            let acutset = match self.nodes[t].parent {
                None => Vec::new(),
                Some(p) => union(&self.nodes[p].acutset, &self.nodes[p].cutset),
            };
            let node = &self.nodes[t];
            let cutset = match node.kind {
                NodeKind::Leaf { .. } => Vec::new(),
                NodeKind::Internal { left, right } => {
                    difference(&intersect(&self.nodes[left].vars, &self.nodes[right].vars), &acutset)
                }
            };
            let context = intersect(&node.vars, &acutset);
            let cluster = if node.is_leaf() { node.vars.clone() } else { union(&cutset, &context) };
            let node = &mut self.nodes[t];
            node.acutset = acutset;
            node.cutset = cutset;
            node.context = context;
            node.cluster = cluster;
        }
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn factors(&self) -> &FactorSet {
        &self.factors
    }

    pub fn internal_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).filter(|&t| !self.nodes[t].is_leaf())
    }

    pub fn leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).filter(|&t| self.nodes[t].is_leaf())
    }

    /// Strict ancestors of `t`, nearest first.
    pub fn ancestors(&self, t: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        std::iter::successors(self.nodes[t].parent, |&p| self.nodes[p].parent)
    }

    /// Number of instantiations of a variable set of this tree's network.
    pub fn count(&self, vars: &[VarId]) -> u64 {
        self.factors.instantiation_count(vars)
    }

    /// Maximum cluster size minus one.
    pub fn width(&self) -> usize {
        self.nodes.iter().map(|n| n.cluster.len()).max().unwrap_or(1).saturating_sub(1)
    }

    /// One line per node:
    /// `<id> <LEAF factor|INTERNAL l r> vars=… cutset=… context=… cluster=…`.
    pub fn dump(&self) -> String {
        let names = |vs: &[VarId]| -> String {
            vs.iter().map(|&v| self.factors.variable(v).name.as_str()).collect::<Vec<_>>().join(",")
        };
        let mut out = String::new();
        for (t, n) in self.nodes.iter().enumerate() {
            let kind = match n.kind {
                NodeKind::Leaf { factor } if self.factors.factors()[factor].is_unit() => {
                    format!("LEAF {factor} (__unit_{})", names(&n.vars))
                }
                NodeKind::Leaf { factor } => format!("LEAF {factor}"),
                NodeKind::Internal { left, right } => format!("INTERNAL {left} {right}"),
            };
            let _ = writeln!(
                out,
                "{t} {kind} vars={} cutset={} context={} cluster={}",
                names(&n.vars),
                names(&n.cutset),
                names(&n.context),
                names(&n.cluster)
            );
        }
        out
    }
}

fn flatten(
    shape: &Shape,
    parent: Option<NodeId>,
    nodes: &mut Vec<Node>,
    seen: &mut [bool],
    factors: &FactorSet,
) -> Result<NodeId, DtreeError> {
    let id = nodes.len();
    nodes.push(Node {
        kind: NodeKind::Leaf { factor: 0 },
        parent,
        vars: Vec::new(),
        cutset: Vec::new(),
        acutset: Vec::new(),
        context: Vec::new(),
        cluster: Vec::new(),
    });
    nodes[id].kind = match shape {
        Shape::Leaf(f) => {
            if *f >= factors.factors().len() || seen[*f] {
                return Err(DtreeError::BadLeaves);
            }
            seen[*f] = true;
            NodeKind::Leaf { factor: *f }
        }
        Shape::Node(l, r) => {
            let left = flatten(l, Some(id), nodes, seen, factors)?;
            let right = flatten(r, Some(id), nodes, seen, factors)?;
            NodeKind::Internal { left, right }
        }
    };
    Ok(id)
}

struct Partial {
    shape: Shape,
    vars: Vec<VarId>,
    first_factor: usize,
}

/// Joins trees into a balanced binary tree, ordered by their smallest factor index.
fn compose(mut parts: Vec<Partial>) -> Partial {
    parts.sort_by_key(|p| p.first_factor);
    compose_sorted(parts)
}

fn compose_sorted(mut parts: Vec<Partial>) -> Partial {
    if parts.len() == 1 {
        return parts.pop().expect("non-empty");
    }
    let right = parts.split_off(parts.len() / 2);
    let (l, r) = (compose_sorted(parts), compose_sorted(right));
    Partial {
        vars: union(&l.vars, &r.vars),
        first_factor: l.first_factor.min(r.first_factor),
        shape: Shape::node(l.shape, r.shape),
    }
}

fn from_order(factors: &FactorSet, order: &EliminationOrder, add_units: bool) -> Result<Dtree, DtreeError> {
    if factors.factors().is_empty() {
        return Err(DtreeError::NoFactors);
    }
    if order.len() != factors.num_vars() {
        return Err(DtreeError::BadOrder);
    }
    if let Some(&v) = factors.unused_variables().first() {
        return Err(DtreeError::UnusedVariable(v));
    }
    let mut extended = factors.clone();
    let mut forest: Vec<Partial> = factors
        .factors()
        .iter()
        .enumerate()
        .map(|(i, f)| Partial { shape: Shape::Leaf(i), vars: sorted(f.scope().to_vec()), first_factor: i })
        .collect();

    for &x in order.sequence() {
        let (mut gamma, rest): (Vec<Partial>, Vec<Partial>) =
            forest.into_iter().partition(|p| p.vars.binary_search(&x).is_ok());
        forest = rest;
        if gamma.len() == 1 && add_units {
            let id = extended.push_factor(Factor::unit(factors.variable(x)));
            gamma.push(Partial { shape: Shape::Leaf(id), vars: vec![x], first_factor: id });
        }
        if !gamma.is_empty() {
            forest.push(compose(gamma));
        }
    }
    let root = compose(forest);
    Dtree::from_shape(extended, &root.shape)
}

/// Builds a dtree from an elimination order; width is at most the order's width.
pub fn el2dt(factors: &FactorSet, order: &EliminationOrder) -> Result<Dtree, DtreeError> {
    from_order(factors, order, false)
}

/// Like [`el2dt`], but pairs a lone tree with a unit factor whenever only one
/// tree mentions the eliminated variable. The result has singleton-or-empty
/// cutsets, every variable in some cutset, and cutset nesting that follows
/// the order.
pub fn el2sdt(factors: &FactorSet, order: &EliminationOrder) -> Result<Dtree, DtreeError> {
    from_order(factors, order, true)
}

/// Width of an elimination order: eliminating `x` forms the cluster of `x`
/// and every variable sharing a live scope with it; the width is the largest
/// cluster size minus one.
pub fn order_width(factors: &FactorSet, order: &EliminationOrder) -> usize {
    let mut live: Vec<Vec<VarId>> = factors.factors().iter().map(|f| sorted(f.scope().to_vec())).collect();
    let mut widest = 0;
    for &x in order.sequence() {
        let (touching, rest): (Vec<_>, Vec<_>) = live.into_iter().partition(|s| s.binary_search(&x).is_ok());
        live = rest;
        let cluster = touching.iter().fold(vec![x], |acc, s| union(&acc, s));
        widest = widest.max(cluster.len());
        let remaining = difference(&cluster, &[x]);
        if !remaining.is_empty() {
            live.push(remaining);
        }
    }
    widest.saturating_sub(1)
}

/// Outcome of checking the four structural guarantees of [`el2sdt`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderProperties {
    pub dtree_width: usize,
    pub order_width: usize,
    /// Property 1: the dtree is no wider than the order.
    pub width_bounded: bool,
    /// Property 2: variables that appear in no cutset.
    pub uncut_vars: Vec<VarId>,
    /// Property 3: nodes whose cutset has more than one variable.
    pub wide_cutsets: Vec<NodeId>,
    /// Property 4: `(descendant, ancestor)` pairs whose cutset variables are
    /// nested against the order.
    pub order_inversions: Vec<(NodeId, NodeId)>,
}

impl OrderProperties {
    pub fn all_hold(&self) -> bool {
        self.width_bounded && self.uncut_vars.is_empty() && self.wide_cutsets.is_empty() && self.order_inversions.is_empty()
    }

    pub fn holds(&self) -> [bool; 4] {
        [
            self.width_bounded,
            self.uncut_vars.is_empty(),
            self.wide_cutsets.is_empty(),
            self.order_inversions.is_empty(),
        ]
    }
}

pub fn check_order_properties(tree: &Dtree, order: &EliminationOrder) -> OrderProperties {
    let ow = order_width(tree.factors(), order);
    let dw = tree.width();
    let mut in_cutset = vec![false; tree.factors().num_vars()];
    for n in tree.nodes() {
        for &v in &n.cutset {
            in_cutset[v] = true;
        }
    }
    let uncut_vars = order.sequence().iter().copied().filter(|&v| !in_cutset[v]).collect();
    let wide_cutsets = tree.internal_nodes().filter(|&t| tree.node(t).cutset.len() > 1).collect();
    let pos = order.positions();
    let mut order_inversions = Vec::new();
    for t in tree.internal_nodes() {
        for a in tree.ancestors(t) {
            let inverted = tree.node(t).cutset.iter().any(|&x| tree.node(a).cutset.iter().any(|&y| pos[x] >= pos[y]));
            if inverted {
                order_inversions.push((t, a));
            }
        }
    }
    OrderProperties { dtree_width: dw, order_width: ow, width_bounded: dw <= ow, uncut_vars, wide_cutsets, order_inversions }
}

/// A structural reason a dtree cannot drive two-phase MAP case analysis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MapViolation {
    /// A cutset mixes MAP and non-MAP variables.
    MixedCutset { node: NodeId },
    /// A MAP cutset lies below a non-MAP cutset.
    MapBelowSum { map_node: NodeId, sum_ancestor: NodeId },
    /// A leaf must maximize a MAP variable it alone mentions, but sits below
    /// a non-MAP cutset.
    LocalMapBelowSum { leaf: NodeId, var: VarId, sum_ancestor: NodeId },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MapValidation {
    pub violations: Vec<MapViolation>,
}

impl MapValidation {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that along every root-to-leaf path all MAP case analysis happens
/// before any summation over non-MAP variables.
pub fn validate_map_dtree(tree: &Dtree, map_vars: &[VarId]) -> MapValidation {
    validate_map_dtree_given(tree, map_vars, &[])
}

/// Like [`validate_map_dtree`], with `fixed` variables (evidence) ignored:
/// they never give rise to more than one case.
pub fn validate_map_dtree_given(tree: &Dtree, map_vars: &[VarId], fixed: &[VarId]) -> MapValidation {
    let is_map = |v: &VarId| map_vars.contains(v);
    let free = |t: NodeId| tree.node(t).cutset.iter().filter(|v| !fixed.contains(v));
    let mut violations = Vec::new();
    let sums_at = |t: NodeId| free(t).any(|v| !is_map(v));
    for t in 0..tree.len() {
        let node = tree.node(t);
        if node.is_leaf() {
            for &v in node.vars.iter().filter(|v| is_map(v) && node.acutset.binary_search(v).is_err()) {
                if let Some(a) = tree.ancestors(t).find(|&a| sums_at(a)) {
                    violations.push(MapViolation::LocalMapBelowSum { leaf: t, var: v, sum_ancestor: a });
                }
            }
            continue;
        }
        let has_map = free(t).any(is_map);
        if has_map && sums_at(t) {
            violations.push(MapViolation::MixedCutset { node: t });
        }
        if has_map {
            for a in tree.ancestors(t).filter(|&a| sums_at(a)) {
                violations.push(MapViolation::MapBelowSum { map_node: t, sum_ancestor: a });
            }
        }
    }
    MapValidation { violations }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::model::FactorSet;

    /// φ(A), φ(A,B), φ(B,C), φ(C,D), φ(B,D,E) over binary variables.
    pub(crate) fn five_node() -> FactorSet {
        let mut fs = FactorSet::new();
        for name in ["A", "B", "C", "D", "E"] {
            fs.add_variable(name, vec!["0".into(), "1".into()]).unwrap();
        }
        fs.add_factor(&[0], vec![0.6, 0.4]).unwrap();
        fs.add_factor(&[0, 1], vec![0.2, 0.8, 0.75, 0.25]).unwrap();
        fs.add_factor(&[1, 2], vec![0.8, 0.2, 0.1, 0.9]).unwrap();
        fs.add_factor(&[2, 3], vec![0.3, 0.7, 0.4, 0.6]).unwrap();
        fs.add_factor(&[1, 3, 4], vec![0.95, 0.05, 0.9, 0.1, 0.8, 0.2, 0.0, 1.0]).unwrap();
        fs
    }

    /// Root splits {φ(A), φ(A,B)} from {φ(B,C), {φ(C,D), φ(B,D,E)}}.
    pub(crate) fn split_on_b() -> Shape {
        Shape::node(
            Shape::node(Shape::Leaf(0), Shape::Leaf(1)),
            Shape::node(Shape::Leaf(2), Shape::node(Shape::Leaf(3), Shape::Leaf(4))),
        )
    }

    #[test]
    fn hand_built_tree_sets() {
        let tree = Dtree::from_shape(five_node(), &split_on_b()).unwrap();
        let root = tree.node(0);
        assert_eq!(root.cutset, vec![1]);
        assert!(root.context.is_empty());
        let (_, right) = root.children().unwrap();
        assert_eq!(tree.node(right).cutset, vec![2]);
        assert_eq!(tree.node(right).context, vec![1]);
        for t in 0..tree.len() {
            let n = tree.node(t);
            assert!(intersect(&n.cutset, &n.acutset).is_empty());
            if let Some(p) = n.parent {
                assert!(difference(&tree.node(p).cutset, &n.context).is_empty());
            }
        }
    }

    #[test]
    fn from_shape_checks_leaves() {
        let missing = Shape::node(Shape::Leaf(0), Shape::Leaf(1));
        assert_eq!(Dtree::from_shape(five_node(), &missing).unwrap_err(), DtreeError::BadLeaves);
        let twice = Shape::node(Shape::Leaf(0), Shape::Leaf(0));
        assert!(Dtree::from_shape(five_node(), &twice).is_err());
    }

    #[test]
    fn single_factor_trees() {
        let mut fs = FactorSet::new();
        let a = fs.add_variable("A", vec!["t".into(), "f".into()]).unwrap();
        fs.add_factor(&[a], vec![0.5, 0.5]).unwrap();
        let order = EliminationOrder::natural(1);
        let dt = el2dt(&fs, &order).unwrap();
        assert_eq!(dt.len(), 1);
        assert!(dt.node(0).is_leaf());
        let sdt = el2sdt(&fs, &order).unwrap();
        assert_eq!(sdt.len(), 3);
        assert_eq!(sdt.node(0).cutset, vec![a]);
        assert!(sdt.factors().factors()[1].is_unit());
        assert_eq!(sdt.node(0).children(), Some((1, 2)));
    }

    #[test]
    fn two_factor_join() {
        let mut fs = FactorSet::new();
        let a = fs.add_variable("A", vec!["t".into(), "f".into()]).unwrap();
        let b = fs.add_variable("B", vec!["t".into(), "f".into()]).unwrap();
        fs.add_factor(&[a], vec![0.5, 0.5]).unwrap();
        fs.add_factor(&[a, b], vec![0.1, 0.9, 0.4, 0.6]).unwrap();
        let dt = el2dt(&fs, &EliminationOrder::natural(2)).unwrap();
        assert_eq!(dt.len(), 3);
        assert_eq!(dt.node(0).cutset, vec![a]);
        assert_eq!(dt.width(), 1);
    }

    #[test]
    fn five_node_orders() {
        let fs = five_node();
        let order = EliminationOrder::natural(5);
        let ow = order_width(&fs, &order);
        let dt = el2dt(&fs, &order).unwrap();
        assert_eq!(dt.leaves().count(), 5);
        assert!(dt.width() <= ow);
        let sdt = el2sdt(&fs, &order).unwrap();
        let props = check_order_properties(&sdt, &order);
        assert!(props.all_hold(), "{props:?}");
    }

    #[test]
    fn order_widths() {
        let mut fs = FactorSet::new();
        for n in ["A", "B", "C"] {
            fs.add_variable(n, vec!["0".into(), "1".into()]).unwrap();
        }
        fs.add_factor(&[0], vec![1.0, 1.0]).unwrap();
        fs.add_factor(&[0, 1], vec![1.0; 4]).unwrap();
        fs.add_factor(&[1, 2], vec![1.0; 4]).unwrap();
        assert_eq!(order_width(&fs, &EliminationOrder::natural(3)), 1);

        let mut one = FactorSet::new();
        for n in ["A", "B", "C"] {
            one.add_variable(n, vec!["0".into(), "1".into()]).unwrap();
        }
        one.add_factor(&[0, 1, 2], vec![1.0; 8]).unwrap();
        for seq in [[0, 1, 2], [2, 0, 1], [1, 2, 0]] {
            assert_eq!(order_width(&one, &EliminationOrder::new(seq.to_vec(), 3).unwrap()), 2);
        }
        let single = Dtree::from_shape(one, &Shape::Leaf(0)).unwrap();
        assert_eq!(single.width(), 2);
    }

    #[test]
    fn orders_must_be_permutations() {
        assert!(EliminationOrder::new(vec![0, 0], 2).is_err());
        assert!(EliminationOrder::new(vec![0], 2).is_err());
        assert!(EliminationOrder::new(vec![0, 2], 2).is_err());
        let o = EliminationOrder::new(vec![2, 0, 1], 3).unwrap();
        assert_eq!(o.with_last(&[2]).sequence(), &[0, 1, 2]);
    }

    #[test]
    fn construction_errors() {
        let mut fs = FactorSet::new();
        fs.add_variable("A", vec!["0".into(), "1".into()]).unwrap();
        assert_eq!(el2dt(&fs, &EliminationOrder::natural(1)).unwrap_err(), DtreeError::NoFactors);
        fs.add_variable("B", vec!["0".into(), "1".into()]).unwrap();
        fs.add_factor(&[0], vec![1.0, 1.0]).unwrap();
        assert_eq!(el2sdt(&fs, &EliminationOrder::natural(2)).unwrap_err(), DtreeError::UnusedVariable(1));
    }

    #[test]
    fn map_validation() {
        let fs = five_node();
        let order = EliminationOrder::natural(5);
        let sdt = el2sdt(&fs, &order).unwrap();
        assert!(validate_map_dtree(&sdt, &[]).is_ok());
        // Non-MAP variables A, B, C eliminated first, MAP variables D, E last.
        assert!(validate_map_dtree(&sdt, &[3, 4]).is_ok());

        // Root cuts on B (non-MAP), a descendant cuts on C (MAP).
        let tree = Dtree::from_shape(five_node(), &split_on_b()).unwrap();
        let report = validate_map_dtree(&tree, &[2]);
        assert!(report.violations.contains(&MapViolation::MapBelowSum { map_node: 4, sum_ancestor: 0 }));
    }

    #[test]
    fn dump_lists_every_node() {
        let tree = Dtree::from_shape(five_node(), &split_on_b()).unwrap();
        let dump = tree.dump();
        assert_eq!(dump.lines().count(), tree.len());
        assert_eq!(dump.lines().next().unwrap(), "0 INTERNAL 1 4 vars=A,B,C,D,E cutset=B context= cluster=B");
        assert!(dump.contains("LEAF 0 vars=A"));
    }
}
