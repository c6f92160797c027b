//! Exact inference by recursive conditioning with per-node cache control.
//!
//! A [`Dtree`] recursively splits a [`FactorSet`]; a [`Session`] runs
//! recursive conditioning over it, caching at each internal node the fraction
//! of context instantiations given by a [`CacheFactor`]. The same session
//! answers probability, MPE and MAP queries, and keeps caches across evidence
//! changes where they remain valid.
//!
//! ```
//! use anyspace::{el2dt, parse_evidence, parse_network, CacheFactor, EliminationOrder, Session};
//!
//! let net = parse_network("variable A 2 true false\nvariable B 2 true false\nfactor A B\n.32 .28 .10 .30\n").unwrap();
//! let tree = el2dt(&net, &EliminationOrder::natural(2)).unwrap();
//! let mut s = Session::new(&tree, CacheFactor::full(&tree)).unwrap();
//! let p = s.query(&parse_evidence("A=true", &net).unwrap()).unwrap();
//! assert!((p - 0.60).abs() < 1e-12);
//! ```

pub mod dtree;
pub mod error;
pub mod generate;
pub mod mapmpe;
pub mod model;
pub mod netio;
pub mod oracle;
pub mod par;
pub mod rc;
pub mod ve;

pub use dtree::{check_order_properties, el2dt, el2sdt, order_width, validate_map_dtree, validate_map_dtree_given, Dtree, EliminationOrder, NodeId};
pub use error::{DtreeError, MapError, ModelError, OracleError, ParseError, RcError, VeError};
pub use mapmpe::{Hypothesis, HypothesisSet, MapOptions};
pub use model::{Factor, FactorSet, Instantiation, VarId, Variable};
pub use netio::{format_instantiation, format_prob, parse_evidence, parse_network, parse_order, serialize_network};
pub use par::Exec;
pub use rc::{predicted_calls, retrieval_count, tradeoff_curve, CacheFactor, Session};
pub use ve::{memory_report, ve_prob, MemoryReport, VeRun};
