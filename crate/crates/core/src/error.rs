use thiserror::Error;

use crate::model::VarId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("variable {0:?} has no values")]
    EmptyDomain(String),
    #[error("variable {var:?} lists label {label:?} twice")]
    DuplicateLabel { var: String, label: String },
    #[error("variable {0:?} declared twice")]
    DuplicateVariable(String),
    #[error("unknown variable id {0}")]
    UnknownVariable(VarId),
    #[error("variable {0} repeated in factor scope")]
    RepeatedScopeVariable(VarId),
    #[error("factor has an empty scope")]
    EmptyScope,
    #[error("expected {expected} values, found {found}")]
    ValueCount { expected: usize, found: usize },
    #[error("value #{index} ({value}) is negative or not finite")]
    BadValue { index: usize, value: f64 },
    #[error("variable {0} is not assigned")]
    Unassigned(VarId),
    #[error("value {value} out of range for variable {var}")]
    ValueOutOfRange { var: VarId, value: usize },
    #[error("variable {0} assigned twice")]
    DuplicateAssignment(VarId),
}

/// A parse failure with the 1-based line it was detected on (0 when the
/// input has no line structure, e.g. an evidence string).
#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("unknown label `{label}` for variable `{var}`")]
    UnknownLabel { var: String, label: String },
    #[error("variable `{0}` assigned more than once")]
    DuplicateAssignment(String),
    #[error("variable `{0}` listed more than once in the order")]
    DuplicateInOrder(String),
    #[error("order is missing variable(s): {0}")]
    IncompleteOrder(String),
    #[error("expected {expected} values, found {found}")]
    ValueCount { expected: usize, found: usize },
    #[error("not a number: `{0}`")]
    NotNumeric(String),
    #[error("bad cardinality `{0}`")]
    BadCardinality(String),
    #[error("{0}")]
    Syntax(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DtreeError {
    #[error("cannot build a dtree over an empty factor set")]
    NoFactors,
    #[error("variable {0} appears in no factor")]
    UnusedVariable(VarId),
    #[error("elimination order is not a permutation of the network variables")]
    BadOrder,
    #[error("dtree leaves must cover every factor exactly once")]
    BadLeaves,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RcError {
    #[error("cache factor has {found} entries, dtree has {expected} nodes")]
    CacheFactorLength { expected: usize, found: usize },
    #[error("cache factor missing for internal node {0}")]
    MissingCacheFactor(usize),
    #[error("cache factor {value} for node {node} is outside [0, 1]")]
    CacheFactorRange { node: usize, value: f64 },
    #[error("operation requires a discrete cache factor (every node 0 or 1)")]
    NotDiscrete,
    #[error("node {0} is not cached")]
    NotCached(usize),
    #[error("no query has been run on this session")]
    NoQuery,
    #[error("budgets must be ascending")]
    UnsortedBudgets,
    #[error(transparent)]
    Evidence(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("max over an empty hypothesis collection")]
    Empty,
    #[error("hypotheses disagree on shared variable {0}")]
    Conflict(VarId),
    #[error("MAP variable {0} also appears in the evidence")]
    MapVariableInEvidence(VarId),
    #[error("dtree is not valid for these MAP variables: {0}")]
    InvalidDtree(String),
    #[error("more than {0} tied hypotheses")]
    TooManyHypotheses(usize),
    #[error("summation node {0} received a non-singleton hypothesis set")]
    NonSingleton(usize),
    #[error(transparent)]
    Rc(#[from] RcError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VeError {
    #[error("elimination order does not cover every variable")]
    IncompleteOrder,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("instance has {0} instantiations, above the enumeration guard")]
    TooLarge(u64),
    #[error("MAP variable {0} also appears in the evidence")]
    MapVariableInEvidence(VarId),
    #[error(transparent)]
    Model(#[from] ModelError),
}
