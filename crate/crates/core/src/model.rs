//! Variables, instantiations and factor tables.
//!
//! Variables are referenced by dense integer ids. A factor table is laid out
//! in mixed-radix row-major order with the last scope variable varying
//! fastest; the same layout is used for cache keys and the network file
//! format.

use std::fmt;

use crate::error::ModelError;

pub type VarId = usize;

/// A discrete variable with named values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Variable {
    pub id: VarId,
    pub name: String,
    pub labels: Vec<String>,
}

impl Variable {
    pub fn new(id: VarId, name: impl Into<String>, labels: Vec<String>) -> Result<Self, ModelError> {
        let name = name.into();
        if labels.is_empty() {
            return Err(ModelError::EmptyDomain(name));
        }
        for (i, label) in labels.iter().enumerate() {
            if labels[..i].contains(label) {
                return Err(ModelError::DuplicateLabel { var: name, label: label.clone() });
            }
        }
        Ok(Self { id, name, labels })
    }

    pub fn cardinality(&self) -> usize {
        self.labels.len()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// A partial assignment of value indices to variables, kept sorted by id.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Instantiation {
    pairs: Vec<(VarId, usize)>,
}

impl Instantiation {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds an instantiation from pairs; a variable listed twice is an error.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (VarId, usize)>) -> Result<Self, ModelError> {
        let mut inst = Self::new();
        for (var, value) in pairs {
            if inst.get(var).is_some() {
                return Err(ModelError::DuplicateAssignment(var));
            }
            inst.set(var, value);
        }
        Ok(inst)
    }

    pub fn get(&self, var: VarId) -> Option<usize> {
        self.pairs
            .binary_search_by_key(&var, |&(v, _)| v)
            .ok()
            .map(|i| self.pairs[i].1)
    }

    /// Assigns `var`, replacing any previous value.
    pub fn set(&mut self, var: VarId, value: usize) {
        match self.pairs.binary_search_by_key(&var, |&(v, _)| v) {
            Ok(i) => self.pairs[i].1 = value,
            Err(i) => self.pairs.insert(i, (var, value)),
        }
    }

    pub fn remove(&mut self, var: VarId) -> Option<usize> {
        match self.pairs.binary_search_by_key(&var, |&(v, _)| v) {
            Ok(i) => Some(self.pairs.remove(i).1),
            Err(_) => None,
        }
    }

    pub fn contains(&self, var: VarId) -> bool {
        self.get(var).is_some()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, usize)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.pairs.iter().map(|&(v, _)| v)
    }

    /// Projection onto `vars` (any order).
    pub fn restrict(&self, vars: &[VarId]) -> Self {
        Self {
            pairs: self.pairs.iter().copied().filter(|(v, _)| vars.contains(v)).collect(),
        }
    }

    /// Union of two instantiations, or `None` if they disagree on a shared variable.
    pub fn merge(&self, other: &Self) -> Option<Self> {
        let mut pairs = Vec::with_capacity(self.pairs.len() + other.pairs.len());
        let (mut i, mut j) = (0, 0);
        while i < self.pairs.len() && j < other.pairs.len() {
            let (a, b) = (self.pairs[i], other.pairs[j]);
            if a.0 < b.0 {
                pairs.push(a);
                i += 1;
            } else if b.0 < a.0 {
                pairs.push(b);
                j += 1;
            } else {
                if a.1 != b.1 {
                    return None;
                }
                pairs.push(a);
                i += 1;
                j += 1;
            }
        }
        pairs.extend_from_slice(&self.pairs[i..]);
        pairs.extend_from_slice(&other.pairs[j..]);
        Some(Self { pairs })
    }

    /// True when the two agree on every variable they share.
    pub fn agrees_with(&self, other: &Self) -> bool {
        self.iter().all(|(v, x)| other.get(v).is_none_or(|y| x == y))
    }
}

impl fmt::Debug for Instantiation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.pairs.iter().map(|(v, x)| (v, x))).finish()
    }
}

/// Mixed-radix counter over a list of cardinalities, last digit fastest.
#[derive(Clone, Debug)]
pub struct MixedRadix {
    cards: Vec<usize>,
    digits: Vec<usize>,
    done: bool,
}

impl MixedRadix {
    pub fn new(cards: Vec<usize>) -> Self {
        let done = cards.contains(&0);
        let digits = vec![0; cards.len()];
        Self { cards, digits, done }
    }

    /// The current digits, or `None` once every combination has been visited.
    pub fn current(&self) -> Option<&[usize]> {
        (!self.done).then_some(&self.digits[..])
    }

    pub fn advance(&mut self) {
        for k in (0..self.cards.len()).rev() {
            self.digits[k] += 1;
            if self.digits[k] < self.cards[k] {
                return;
            }
            self.digits[k] = 0;
        }
        self.done = true;
    }
}

/// Row-major strides (last variable fastest) for the given cardinalities.
pub fn strides(cards: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; cards.len()];
    for k in (0..cards.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * cards[k + 1];
    }
    strides
}

/// A nonnegative table over an ordered scope.
#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    scope: Vec<VarId>,
    cards: Vec<usize>,
    strides: Vec<usize>,
    values: Vec<f64>,
    unit: bool,
}

impl Factor {
    /// Creates a factor over `scope` with the given table.
    pub fn new(scope: &[&Variable], values: Vec<f64>) -> Result<Self, ModelError> {
        let ids: Vec<VarId> = scope.iter().map(|v| v.id).collect();
        let cards: Vec<usize> = scope.iter().map(|v| v.cardinality()).collect();
        Self::from_parts(ids, cards, values)
    }

    pub(crate) fn from_parts(scope: Vec<VarId>, cards: Vec<usize>, values: Vec<f64>) -> Result<Self, ModelError> {
        for (i, v) in scope.iter().enumerate() {
            if scope[..i].contains(v) {
                return Err(ModelError::RepeatedScopeVariable(*v));
            }
        }
        let expected: usize = cards.iter().product();
        if values.len() != expected {
            return Err(ModelError::ValueCount { expected, found: values.len() });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, x)| !x.is_finite() || **x < 0.0) {
            return Err(ModelError::BadValue { index, value });
        }
        let strides = strides(&cards);
        Ok(Self { scope, cards, strides, values, unit: false })
    }

    /// The all-ones factor over a single variable.
    pub fn unit(var: &Variable) -> Self {
        let mut f = Self::from_parts(vec![var.id], vec![var.cardinality()], vec![1.0; var.cardinality()])
            .expect("unit factor is well formed");
        f.unit = true;
        f
    }

    pub fn scope(&self) -> &[VarId] {
        &self.scope
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// True for unit factors introduced during dtree construction.
    pub fn is_unit(&self) -> bool {
        self.unit
    }

    pub fn mentions(&self, var: VarId) -> bool {
        self.scope.contains(&var)
    }

    /// Table index of a full assignment to the scope.
    pub fn index_of(&self, inst: &Instantiation) -> Result<usize, ModelError> {
        let mut index = 0;
        for (k, &var) in self.scope.iter().enumerate() {
            let value = inst.get(var).ok_or(ModelError::Unassigned(var))?;
            if value >= self.cards[k] {
                return Err(ModelError::ValueOutOfRange { var, value });
            }
            index += value * self.strides[k];
        }
        Ok(index)
    }

    /// The table entry selected by `inst`, which must assign the whole scope.
    pub fn value(&self, inst: &Instantiation) -> Result<f64, ModelError> {
        Ok(self.values[self.index_of(inst)?])
    }
}

/// A registry of variables plus the factors whose product is the distribution.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FactorSet {
    variables: Vec<Variable>,
    factors: Vec<Factor>,
}

impl FactorSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares a variable; ids are assigned densely in declaration order.
    pub fn add_variable(&mut self, name: &str, labels: Vec<String>) -> Result<VarId, ModelError> {
        if self.variable_by_name(name).is_some() {
            return Err(ModelError::DuplicateVariable(name.to_string()));
        }
        let id = self.variables.len();
        self.variables.push(Variable::new(id, name, labels)?);
        Ok(id)
    }

    /// Adds a factor over the given variable ids. Empty scopes are rejected.
    pub fn add_factor(&mut self, scope: &[VarId], values: Vec<f64>) -> Result<usize, ModelError> {
        if scope.is_empty() {
            return Err(ModelError::EmptyScope);
        }
        let mut cards = Vec::with_capacity(scope.len());
        for &v in scope {
            cards.push(self.variables.get(v).ok_or(ModelError::UnknownVariable(v))?.cardinality());
        }
        let factor = Factor::from_parts(scope.to_vec(), cards, values)?;
        self.factors.push(factor);
        Ok(self.factors.len() - 1)
    }

    pub(crate) fn push_factor(&mut self, factor: Factor) -> usize {
        self.factors.push(factor);
        self.factors.len() - 1
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.variables[id]
    }

    pub fn variable_by_name(&self, name: &str) -> Option<&Variable> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn cardinality(&self, var: VarId) -> usize {
        self.variables[var].cardinality()
    }

    /// Number of instantiations of `vars` (1 for the empty set), saturating.
    pub fn instantiation_count(&self, vars: &[VarId]) -> u64 {
        vars.iter()
            .fold(1u64, |acc, &v| acc.saturating_mul(self.cardinality(v) as u64))
    }

    /// Every instantiation of `vars` that agrees with `recorded`, in
    /// mixed-radix order over the unrecorded variables.
    pub fn enumerate_consistent<'a>(&'a self, vars: &'a [VarId], recorded: &Instantiation) -> Consistent<'a> {
        let base = recorded.restrict(vars);
        let free: Vec<VarId> = vars.iter().copied().filter(|v| !recorded.contains(*v)).collect();
        let counter = MixedRadix::new(free.iter().map(|&v| self.cardinality(v)).collect());
        Consistent { base, free, counter, _set: self }
    }

    /// Checks that every assignment names a known variable and a valid value.
    pub fn check_instantiation(&self, inst: &Instantiation) -> Result<(), ModelError> {
        for (var, value) in inst.iter() {
            let v = self.variables.get(var).ok_or(ModelError::UnknownVariable(var))?;
            if value >= v.cardinality() {
                return Err(ModelError::ValueOutOfRange { var, value });
            }
        }
        Ok(())
    }

    /// Variables that appear in no factor scope.
    pub fn unused_variables(&self) -> Vec<VarId> {
        let mut used = vec![false; self.variables.len()];
        for f in &self.factors {
            for &v in f.scope() {
                used[v] = true;
            }
        }
        (0..self.variables.len()).filter(|&v| !used[v]).collect()
    }

    /// Mixed-radix index of a full assignment to `vars` (in the given order).
    pub fn index_of(&self, vars: &[VarId], inst: &Instantiation) -> Option<usize> {
        let mut index = 0;
        for &v in vars {
            index = index * self.cardinality(v) + inst.get(v)?;
        }
        Some(index)
    }
}

/// Iterator returned by [`FactorSet::enumerate_consistent`].
pub struct Consistent<'a> {
    base: Instantiation,
    free: Vec<VarId>,
    counter: MixedRadix,
    _set: &'a FactorSet,
}

impl Iterator for Consistent<'_> {
    type Item = Instantiation;

    fn next(&mut self) -> Option<Instantiation> {
        let digits = self.counter.current()?;
        let mut inst = self.base.clone();
        for (&v, &x) in self.free.iter().zip(digits) {
            inst.set(v, x);
        }
        self.counter.advance();
        Some(inst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(k: usize) -> Vec<String> {
        (0..k).map(|i| i.to_string()).collect()
    }

    fn two_var() -> FactorSet {
        let mut fs = FactorSet::new();
        let a = fs.add_variable("A", vec!["true".into(), "false".into()]).unwrap();
        let b = fs.add_variable("B", vec!["true".into(), "false".into()]).unwrap();
        fs.add_factor(&[a, b], vec![0.32, 0.28, 0.10, 0.30]).unwrap();
        fs
    }

    #[test]
    fn factor_lookup_matches_table() {
        let fs = two_var();
        let f = &fs.factors()[0];
        let tt = Instantiation::from_pairs([(0, 0), (1, 0)]).unwrap();
        let ff = Instantiation::from_pairs([(0, 1), (1, 1)]).unwrap();
        assert_eq!(f.value(&tt).unwrap(), 0.32);
        assert_eq!(f.value(&ff).unwrap(), 0.30);
        assert!(matches!(f.value(&Instantiation::from_pairs([(0, 0)]).unwrap()), Err(ModelError::Unassigned(1))));
    }

    #[test]
    fn unit_factor_is_all_ones() {
        let x = Variable::new(0, "X", labels(2)).unwrap();
        let f = Factor::unit(&x);
        assert!(f.is_unit());
        for v in 0..2 {
            assert_eq!(f.value(&Instantiation::from_pairs([(0, v)]).unwrap()).unwrap(), 1.0);
        }
    }

    #[test]
    fn wrong_value_count_rejected() {
        let a = Variable::new(0, "A", labels(2)).unwrap();
        let b = Variable::new(1, "B", labels(3)).unwrap();
        let err = Factor::new(&[&a, &b], vec![0.0; 5]).unwrap_err();
        assert_eq!(err, ModelError::ValueCount { expected: 6, found: 5 });
        assert!(Factor::new(&[&a], vec![1.0, -0.5]).is_err());
        assert!(Factor::new(&[&a], vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn duplicate_names_and_labels_rejected() {
        let mut fs = FactorSet::new();
        fs.add_variable("A", labels(2)).unwrap();
        assert!(fs.add_variable("A", labels(2)).is_err());
        assert!(fs.add_variable("B", vec!["x".into(), "x".into()]).is_err());
        assert!(fs.add_factor(&[], vec![1.0]).is_err());
    }

    #[test]
    fn enumeration_examples() {
        let mut fs = FactorSet::new();
        let b = fs.add_variable("B", labels(2)).unwrap();
        let c = fs.add_variable("C", labels(2)).unwrap();
        let recorded = Instantiation::from_pairs([(c, 1)]).unwrap();
        let got: Vec<_> = fs.enumerate_consistent(&[b, c], &recorded).collect();
        assert_eq!(
            got,
            vec![
                Instantiation::from_pairs([(b, 0), (c, 1)]).unwrap(),
                Instantiation::from_pairs([(b, 1), (c, 1)]).unwrap()
            ]
        );
        let empty: Vec<_> = fs.enumerate_consistent(&[], &Instantiation::new()).collect();
        assert_eq!(empty, vec![Instantiation::new()]);
        assert_eq!(fs.enumerate_consistent(&[b, c], &Instantiation::new()).count(), 4);
    }

    #[test]
    fn instantiation_counts() {
        let mut fs = FactorSet::new();
        let a = fs.add_variable("A", labels(2)).unwrap();
        let b = fs.add_variable("B", labels(3)).unwrap();
        assert_eq!(fs.instantiation_count(&[a, b]), 6);
        assert_eq!(fs.instantiation_count(&[]), 1);
        assert_eq!(fs.instantiation_count(&[a]), 2);
    }

    #[test]
    fn merge_detects_conflicts() {
        let x = Instantiation::from_pairs([(0, 1), (2, 0)]).unwrap();
        let y = Instantiation::from_pairs([(1, 1), (2, 0)]).unwrap();
        let z = Instantiation::from_pairs([(2, 1)]).unwrap();
        assert_eq!(x.merge(&y).unwrap(), Instantiation::from_pairs([(0, 1), (1, 1), (2, 0)]).unwrap());
        assert!(x.merge(&z).is_none());
        assert!(x.agrees_with(&y));
        assert!(!x.agrees_with(&z));
        assert!(Instantiation::from_pairs([(0, 1), (0, 0)]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn scoped_factor() -> impl Strategy<Value = (FactorSet, Instantiation)> {
            (prop::collection::vec(1usize..4, 1..5), any::<u64>()).prop_map(|(cards, salt)| {
                let mut fs = FactorSet::new();
                let ids: Vec<VarId> = cards
                    .iter()
                    .enumerate()
                    .map(|(i, &k)| fs.add_variable(&format!("V{i}"), labels(k)).unwrap())
                    .collect();
                let size: usize = cards.iter().product();
                let values = (0..size).map(|i| (((i as u64 * 2654435761) ^ salt) % 97) as f64).collect();
                fs.add_factor(&ids, values).unwrap();
                let recorded = Instantiation::from_pairs(
                    ids.iter().filter(|&&v| (salt >> v) & 1 == 1).map(|&v| (v, (salt as usize >> 8) % cards[v])),
                )
                .unwrap();
                (fs, recorded)
            })
        }

        proptest! {
            #[test]
            fn enumeration_visits_each_cell_in_order((fs, _) in scoped_factor()) {
                let f = &fs.factors()[0];
                let indices: Vec<usize> = fs
                    .enumerate_consistent(f.scope(), &Instantiation::new())
                    .map(|inst| f.index_of(&inst).unwrap())
                    .collect();
                prop_assert_eq!(indices, (0..f.len()).collect::<Vec<_>>());
                let total: f64 = fs
                    .enumerate_consistent(f.scope(), &Instantiation::new())
                    .map(|inst| f.value(&inst).unwrap())
                    .sum();
                prop_assert_eq!(total, f.values().iter().sum::<f64>());
            }

            #[test]
            fn enumeration_size_matches_free_count((fs, recorded) in scoped_factor()) {
                let scope = fs.factors()[0].scope().to_vec();
                let free: Vec<VarId> = scope.iter().copied().filter(|v| !recorded.contains(*v)).collect();
                let all: Vec<_> = fs.enumerate_consistent(&scope, &recorded).collect();
                prop_assert_eq!(all.len() as u64, fs.instantiation_count(&free));
                prop_assert!(all.iter().all(|i| i.agrees_with(&recorded)));
            }
        }
    }
}
