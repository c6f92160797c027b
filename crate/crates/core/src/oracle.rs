//! Exhaustive enumeration, for checking the real algorithms.

use crate::error::OracleError;
use crate::mapmpe::{max_set, Hypothesis, HypothesisSet};
use crate::model::{FactorSet, Instantiation, VarId};

/// Largest joint state space the oracle will enumerate.
pub const GUARD: u64 = 1 << 24;

fn guard(factors: &FactorSet) -> Result<(), OracleError> {
    let all: Vec<VarId> = (0..factors.num_vars()).collect();
    let n = factors.instantiation_count(&all);
    if n > GUARD {
        return Err(OracleError::TooLarge(n));
    }
    Ok(())
}

fn product(factors: &FactorSet, inst: &Instantiation) -> f64 {
    factors
        .factors()
        .iter()
        .map(|f| f.value(inst).expect("full instantiation"))
        .product()
}

fn for_each_full(factors: &FactorSet, evidence: &Instantiation, mut f: impl FnMut(&Instantiation, f64)) {
    let all: Vec<VarId> = (0..factors.num_vars()).collect();
    for inst in factors.enumerate_consistent(&all, evidence) {
        let p = product(factors, &inst);
        f(&inst, p);
    }
}

/// Sum of the factor product over every full instantiation agreeing with
/// `evidence`.
pub fn joint_prob(factors: &FactorSet, evidence: &Instantiation) -> Result<f64, OracleError> {
    guard(factors)?;
    factors.check_instantiation(evidence)?;
    let mut total = 0.0;
    for_each_full(factors, evidence, |_, p| total += p);
    Ok(total)
}

pub fn brute_mpe(factors: &FactorSet, evidence: &Instantiation) -> Result<HypothesisSet, OracleError> {
    guard(factors)?;
    factors.check_instantiation(evidence)?;
    let mut all = Vec::new();
    for_each_full(factors, evidence, |inst, p| all.push(Hypothesis::new(inst.clone(), p)));
    let best = max_set(all).expect("at least one instantiation");
    Ok(HypothesisSet::new(factors, (0..factors.num_vars()).collect(), best))
}

pub fn brute_map(factors: &FactorSet, map_vars: &[VarId], evidence: &Instantiation) -> Result<HypothesisSet, OracleError> {
    guard(factors)?;
    factors.check_instantiation(evidence)?;
    let mut scope = map_vars.to_vec();
    scope.sort_unstable();
    scope.dedup();
    if let Some(&v) = scope.iter().find(|&&v| evidence.contains(v)) {
        return Err(OracleError::MapVariableInEvidence(v));
    }
    let mut sums = vec![0.0; factors.instantiation_count(&scope) as usize];
    for_each_full(factors, evidence, |inst, p| {
        sums[factors.index_of(&scope, inst).expect("full instantiation")] += p;
    });
    let hyps = factors
        .enumerate_consistent(&scope, &Instantiation::new())
        .zip(sums)
        .map(|(m, p)| Hypothesis::new(m, p))
        .collect();
    let best = max_set(hyps).expect("at least one instantiation");
    Ok(HypothesisSet::new(factors, scope, best))
}
