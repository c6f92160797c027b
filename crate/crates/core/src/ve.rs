//! Bucket elimination baseline with peak-memory accounting.

use crate::dtree::{union, EliminationOrder};
use crate::error::VeError;
use crate::model::{strides, FactorSet, Instantiation, MixedRadix, VarId};

/// One elimination step: the variable and the scope size of the factor it
/// produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VeStep {
    pub var: VarId,
    pub scope_size: usize,
}

/// Factor lifetime events, indexed by a run-local factor id.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VeEvent {
    Alloc { id: usize, cells: u64 },
    Use { id: usize },
    Release { id: usize, cells: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct VeRun {
    pub result: f64,
    pub peak_cells: u64,
    pub steps: Vec<VeStep>,
    pub events: Vec<VeEvent>,
}

struct Table {
    id: usize,
    scope: Vec<VarId>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

impl Table {
    fn cells(&self) -> u64 {
        self.values.len() as u64
    }

    /// Stride of each of `scope`'s variables inside this table (0 if absent).
    fn strides_in(&self, scope: &[VarId]) -> Vec<usize> {
        let own = strides(&self.cards);
        scope
            .iter()
            .map(|v| self.scope.iter().position(|w| w == v).map_or(0, |k| own[k]))
            .collect()
    }
}

type Parts = (Vec<VarId>, Vec<usize>, Vec<f64>);

/// Live-cell accounting. A step's inputs are released as its output is
/// allocated, so a factor and its replacement are never counted together.
struct Ledger {
    live: u64,
    peak: u64,
    next: usize,
    events: Vec<VeEvent>,
}

impl Ledger {
    fn alloc(&mut self, scope: Vec<VarId>, cards: Vec<usize>, values: Vec<f64>) -> Table {
        let id = self.next;
        self.next += 1;
        self.live += values.len() as u64;
        self.peak = self.peak.max(self.live);
        self.events.push(VeEvent::Alloc { id, cells: values.len() as u64 });
        Table { id, scope, cards, values }
    }

    fn release(&mut self, t: Table) {
        self.live -= t.cells();
        self.events.push(VeEvent::Release { id: t.id, cells: t.cells() });
    }
}

/// Probability of `evidence`: restrict every factor, then for each variable
/// in order multiply the factors mentioning it and sum it out.
pub fn ve_prob(factors: &FactorSet, order: &EliminationOrder, evidence: &Instantiation) -> Result<VeRun, VeError> {
    if order.len() != factors.num_vars() {
        return Err(VeError::IncompleteOrder);
    }
    factors.check_instantiation(evidence)?;
    let mut ledger = Ledger { live: 0, peak: 0, next: 0, events: Vec::new() };

    let inputs: Vec<Table> = factors
        .factors()
        .iter()
        .map(|f| ledger.alloc(f.scope().to_vec(), f.cards().to_vec(), f.values().to_vec()))
        .collect();
    let mut live: Vec<Table> = Vec::with_capacity(inputs.len());
    for t in inputs {
        if t.scope.iter().any(|&v| evidence.contains(v)) {
            let (scope, cards, values) = restrict(&t, evidence);
            ledger.events.push(VeEvent::Use { id: t.id });
            ledger.release(t);
            live.push(ledger.alloc(scope, cards, values));
        } else {
            live.push(t);
        }
    }

    let mut steps = Vec::with_capacity(order.len());
    for &var in order.sequence() {
        let (bucket, rest): (Vec<Table>, Vec<Table>) = live.into_iter().partition(|t| t.scope.contains(&var));
        live = rest;
        if bucket.is_empty() {
            steps.push(VeStep { var, scope_size: 0 });
            continue;
        }
        let product = if bucket.len() == 1 {
            bucket.into_iter().next().expect("one factor")
        } else {
            let (scope, cards, values) = multiply(&bucket, factors);
            for t in bucket {
                ledger.events.push(VeEvent::Use { id: t.id });
                ledger.release(t);
            }
            ledger.alloc(scope, cards, values)
        };
        let (scope, cards, values) = sum_out(&product, var);
        ledger.events.push(VeEvent::Use { id: product.id });
        ledger.release(product);
        let reduced = ledger.alloc(scope, cards, values);
        steps.push(VeStep { var, scope_size: reduced.scope.len() });
        live.push(reduced);
    }

    let mut result = 1.0;
    for t in live {
        result *= t.values.iter().sum::<f64>();
        ledger.events.push(VeEvent::Use { id: t.id });
        ledger.release(t);
    }
    Ok(VeRun { result, peak_cells: ledger.peak, steps, events: ledger.events })
}

fn restrict(t: &Table, evidence: &Instantiation) -> Parts {
    let own = strides(&t.cards);
    let mut base = 0;
    let (mut scope, mut cards, mut kept) = (Vec::new(), Vec::new(), Vec::new());
    for (k, &v) in t.scope.iter().enumerate() {
        match evidence.get(v) {
            Some(x) => base += x * own[k],
            None => {
                scope.push(v);
                cards.push(t.cards[k]);
                kept.push(own[k]);
            }
        }
    }
    let mut values = Vec::with_capacity(cards.iter().product());
    let mut counter = MixedRadix::new(cards.clone());
    while let Some(digits) = counter.current() {
        values.push(t.values[base + digits.iter().zip(&kept).map(|(d, s)| d * s).sum::<usize>()]);
        counter.advance();
    }
    (scope, cards, values)
}

fn multiply(tables: &[Table], net: &FactorSet) -> Parts {
    let scope = tables.iter().fold(Vec::new(), |acc, t| {
        let mut s = t.scope.clone();
        s.sort_unstable();
        union(&acc, &s)
    });
    let cards: Vec<usize> = scope.iter().map(|&v| net.cardinality(v)).collect();
    let maps: Vec<Vec<usize>> = tables.iter().map(|t| t.strides_in(&scope)).collect();
    let mut values = Vec::with_capacity(cards.iter().product());
    let mut counter = MixedRadix::new(cards.clone());
    while let Some(digits) = counter.current() {
        let mut p = 1.0;
        for (t, m) in tables.iter().zip(&maps) {
            p *= t.values[digits.iter().zip(m).map(|(d, s)| d * s).sum::<usize>()];
        }
        values.push(p);
        counter.advance();
    }
    (scope, cards, values)
}

fn sum_out(t: &Table, var: VarId) -> Parts {
    let k = t.scope.iter().position(|&v| v == var).expect("bucket variable in product scope");
    let mut scope = t.scope.clone();
    let mut cards = t.cards.clone();
    scope.remove(k);
    let card = cards.remove(k);
    let own = strides(&t.cards);
    let kept: Vec<usize> = (0..t.scope.len()).filter(|&j| j != k).map(|j| own[j]).collect();
    let mut values = Vec::with_capacity(cards.iter().product());
    let mut counter = MixedRadix::new(cards.clone());
    while let Some(digits) = counter.current() {
        let base: usize = digits.iter().zip(&kept).map(|(d, s)| d * s).sum();
        values.push((0..card).map(|x| t.values[base + x * own[k]]).sum());
        counter.advance();
    }
    (scope, cards, values)
}

pub const CSV_HEADER: &str = "network,ve_cells_log2,rc_cells_log2,cells_ratio,ve_mb,rc_mb,mb_ratio";

/// VE cells cost eight bytes each, RC cache cells twelve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MemoryReport {
    pub ve_cells: u64,
    pub rc_cells: u64,
}

pub fn memory_report(ve: &VeRun, rc_peak_cells: u64) -> MemoryReport {
    MemoryReport { ve_cells: ve.peak_cells, rc_cells: rc_peak_cells }
}

const MB: f64 = (1u64 << 20) as f64;

impl MemoryReport {
    pub fn ve_log2(&self) -> f64 {
        (self.ve_cells as f64).log2()
    }

    pub fn rc_log2(&self) -> f64 {
        (self.rc_cells as f64).log2()
    }

    /// Infinite when RC stores nothing.
    pub fn cells_ratio(&self) -> f64 {
        self.ve_cells as f64 / self.rc_cells as f64
    }

    pub fn ve_mb(&self) -> f64 {
        8.0 * self.ve_cells as f64 / MB
    }

    pub fn rc_mb(&self) -> f64 {
        12.0 * self.rc_cells as f64 / MB
    }

    pub fn mb_ratio(&self) -> f64 {
        self.ve_mb() / self.rc_mb()
    }

    pub fn csv_row(&self, network: &str) -> String {
        format!(
            "{network},{:.1},{:.1},{:.1},{:.2},{:.2},{:.1}",
            self.ve_log2(),
            self.rc_log2(),
            self.cells_ratio(),
            self.ve_mb(),
            self.rc_mb(),
            self.mb_ratio()
        )
    }
}
