//! Seeded random instances for tests and benchmarks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dtree::EliminationOrder;
use crate::model::{FactorSet, Instantiation, VarId};

#[derive(Clone, Copy, Debug)]
pub struct GenConfig {
    pub min_vars: usize,
    pub max_vars: usize,
    pub max_card: usize,
    pub max_factors: usize,
    pub max_scope: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self { min_vars: 3, max_vars: 10, max_card: 3, max_factors: 12, max_scope: 3 }
    }
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub factors: FactorSet,
    pub order: EliminationOrder,
}

fn add_vars(rng: &mut impl Rng, fs: &mut FactorSet, n: usize, max_card: usize) {
    for i in 0..n {
        let card = rng.random_range(2..=max_card.max(2));
        let labels = (0..card).map(|x| format!("s{x}")).collect();
        fs.add_variable(&format!("X{i}"), labels).expect("fresh name");
    }
}

fn random_values(rng: &mut impl Rng, fs: &FactorSet, scope: &[VarId]) -> Vec<f64> {
    (0..fs.instantiation_count(scope)).map(|_| rng.random_range(0.05..1.0)).collect()
}

/// Arbitrary nonnegative factors; every variable is in some factor.
pub fn random_factor_set(rng: &mut impl Rng, cfg: &GenConfig) -> FactorSet {
    let n = rng.random_range(cfg.min_vars..=cfg.max_vars);
    let mut fs = FactorSet::new();
    add_vars(rng, &mut fs, n, cfg.max_card);

    let mut vars: Vec<VarId> = (0..n).collect();
    vars.shuffle(rng);
    let mut scopes: Vec<Vec<VarId>> = Vec::new();
    let mut rest = &vars[..];
    while !rest.is_empty() {
        let k = rng.random_range(1..=cfg.max_scope.min(rest.len()));
        let mut scope = rest[..k].to_vec();
        rest = &rest[k..];
        // Tie consecutive groups together so the model is rarely disconnected.
        if let Some(prev) = scopes.last() {
            if scope.len() < cfg.max_scope && rng.random_bool(0.8) {
                scope.push(prev[rng.random_range(0..prev.len())]);
            }
        }
        scopes.push(scope);
    }
    let total = rng.random_range(scopes.len().max(1)..=cfg.max_factors.max(scopes.len()));
    while scopes.len() < total {
        let k = rng.random_range(1..=cfg.max_scope.min(n));
        let mut all: Vec<VarId> = (0..n).collect();
        all.shuffle(rng);
        scopes.push(all[..k].to_vec());
    }
    for scope in scopes {
        let values = random_values(rng, &fs, &scope);
        fs.add_factor(&scope, values).expect("valid factor");
    }
    fs
}

/// A Bayesian network: each variable gets a normalized table given up to
/// `max_parents` earlier variables.
pub fn random_network(rng: &mut impl Rng, n: usize, max_card: usize, max_parents: usize) -> FactorSet {
    let mut fs = FactorSet::new();
    add_vars(rng, &mut fs, n, max_card);
    for child in 0..n {
        let mut earlier: Vec<VarId> = (0..child).collect();
        earlier.shuffle(rng);
        let k = rng.random_range(0..=max_parents.min(child));
        let mut scope = earlier[..k].to_vec();
        scope.sort_unstable();
        scope.push(child);
        let card = fs.cardinality(child);
        let rows = fs.instantiation_count(&scope[..k]) as usize;
        let mut values = Vec::with_capacity(rows * card);
        for _ in 0..rows {
            let row: Vec<f64> = (0..card).map(|_| rng.random_range(0.05..1.0)).collect();
            let sum: f64 = row.iter().sum();
            values.extend(row.iter().map(|x| x / sum));
        }
        fs.add_factor(&scope, values).expect("valid table");
    }
    fs
}

pub fn random_order(rng: &mut impl Rng, num_vars: usize) -> EliminationOrder {
    let mut seq: Vec<VarId> = (0..num_vars).collect();
    seq.shuffle(rng);
    EliminationOrder::new(seq, num_vars).expect("permutation")
}

/// Assigns `k` distinct random variables (fewer if the network is smaller).
pub fn random_evidence(rng: &mut impl Rng, fs: &FactorSet, k: usize) -> Instantiation {
    let mut vars: Vec<VarId> = (0..fs.num_vars()).collect();
    vars.shuffle(rng);
    let mut e = Instantiation::new();
    for &v in vars.iter().take(k) {
        e.set(v, rng.random_range(0..fs.cardinality(v)));
    }
    e
}

pub fn random_instance(rng: &mut impl Rng, cfg: &GenConfig) -> Instance {
    let factors = random_factor_set(rng, cfg);
    let order = random_order(rng, factors.num_vars());
    Instance { factors, order }
}

/// `count` instances from one seed.
pub fn corpus(seed: u64, count: usize, cfg: &GenConfig) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_instance(&mut rng, cfg)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::joint_prob;

    #[test]
    fn factor_sets_respect_limits() {
        let cfg = GenConfig::default();
        for inst in corpus(7, 100, &cfg) {
            let fs = &inst.factors;
            assert!((cfg.min_vars..=cfg.max_vars).contains(&fs.num_vars()));
            assert!(fs.factors().len() <= cfg.max_factors);
            assert!(fs.unused_variables().is_empty());
            assert!(fs.variables().iter().all(|v| (2..=3).contains(&v.cardinality())));
            assert!(fs.factors().iter().all(|f| f.scope().len() <= cfg.max_scope));
        }
    }

    #[test]
    fn networks_are_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let fs = random_network(&mut rng, 7, 3, 2);
            assert!((joint_prob(&fs, &Instantiation::new()).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        let a = corpus(11, 5, &GenConfig::default());
        let b = corpus(11, 5, &GenConfig::default());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.factors, y.factors);
            assert_eq!(x.order, y.order);
        }
    }
}
