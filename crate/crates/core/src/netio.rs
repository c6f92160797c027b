//! Text formats for networks, elimination orders and evidence.
//!
//! ```text
//! # comment
//! variable A 2 true false
//! variable B 2 true false
//! factor A B
//! 0.32 0.28 0.10 0.30
//! ```
//!
//! Factor values are listed row-major with the last scope variable varying
//! fastest and may span several lines. An order file is a whitespace
//! separated list of variable names; evidence is `name=label[,name=label]*`.

use std::fmt::Write as _;

use crate::dtree::EliminationOrder;
use crate::error::{ParseError, ParseErrorKind};
use crate::model::{FactorSet, Instantiation, VarId};

/// A parsed network with the source line of each declaration.
#[derive(Clone, Debug)]
pub struct NetworkDocument {
    pub factors: FactorSet,
    pub variable_lines: Vec<usize>,
    pub factor_lines: Vec<usize>,
}

fn err(line: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, kind }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

struct PendingFactor {
    line: usize,
    scope: Vec<VarId>,
    expected: usize,
    values: Vec<f64>,
}

impl PendingFactor {
    fn finish(self, doc: &mut NetworkDocument) -> Result<(), ParseError> {
        if self.values.len() != self.expected {
            return Err(err(
                self.line,
                ParseErrorKind::ValueCount { expected: self.expected, found: self.values.len() },
            ));
        }
        doc.factors
            .add_factor(&self.scope, self.values)
            .map_err(|e| err(self.line, e.into()))?;
        doc.factor_lines.push(self.line);
        Ok(())
    }
}

pub fn parse_document(text: &str) -> Result<NetworkDocument, ParseError> {
    let mut doc = NetworkDocument { factors: FactorSet::new(), variable_lines: Vec::new(), factor_lines: Vec::new() };
    let mut pending: Option<PendingFactor> = None;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let mut tokens = strip_comment(raw).split_whitespace().peekable();
        let Some(&first) = tokens.peek() else { continue };

        match first {
            "variable" | "factor" => {
                if let Some(p) = pending.take() {
                    p.finish(&mut doc)?;
                }
            }
            _ => {
                let Some(p) = pending.as_mut() else {
                    return Err(err(line_no, ParseErrorKind::Syntax(format!("unexpected token `{first}`"))));
                };
                for tok in tokens {
                    let value: f64 = tok
                        .parse()
                        .map_err(|_| err(line_no, ParseErrorKind::NotNumeric(tok.to_string())))?;
                    p.values.push(value);
                }
                if p.values.len() > p.expected {
                    return Err(err(
                        line_no,
                        ParseErrorKind::ValueCount { expected: p.expected, found: p.values.len() },
                    ));
                }
                continue;
            }
        }

        tokens.next();
        if first == "variable" {
            let name = tokens
                .next()
                .ok_or_else(|| err(line_no, ParseErrorKind::Syntax("variable needs a name".into())))?;
            let card_tok = tokens
                .next()
                .ok_or_else(|| err(line_no, ParseErrorKind::Syntax("variable needs a cardinality".into())))?;
            let card: usize = card_tok
                .parse()
                .ok()
                .filter(|&k| k >= 1)
                .ok_or_else(|| err(line_no, ParseErrorKind::BadCardinality(card_tok.to_string())))?;
            let labels: Vec<String> = tokens.map(str::to_string).collect();
            if labels.len() != card {
                return Err(err(
                    line_no,
                    ParseErrorKind::Syntax(format!("variable `{name}` declares {card} values but lists {}", labels.len())),
                ));
            }
            if doc.factors.variable_by_name(name).is_some() {
                return Err(err(line_no, ParseErrorKind::DuplicateVariable(name.to_string())));
            }
            doc.factors.add_variable(name, labels).map_err(|e| err(line_no, e.into()))?;
            doc.variable_lines.push(line_no);
        } else {
            let mut scope = Vec::new();
            for name in tokens {
                let v = doc
                    .factors
                    .variable_by_name(name)
                    .ok_or_else(|| err(line_no, ParseErrorKind::UnknownVariable(name.to_string())))?;
                scope.push(v.id);
            }
            if scope.is_empty() {
                return Err(err(line_no, ParseErrorKind::Syntax("factor needs at least one variable".into())));
            }
            let expected = scope.iter().map(|&v| doc.factors.cardinality(v)).product();
            pending = Some(PendingFactor { line: line_no, scope, expected, values: Vec::with_capacity(expected) });
        }
    }
    if let Some(p) = pending.take() {
        p.finish(&mut doc)?;
    }
    Ok(doc)
}

pub fn parse_network(text: &str) -> Result<FactorSet, ParseError> {
    parse_document(text).map(|doc| doc.factors)
}

/// Writes the network back in the text format. Unit factors are omitted.
pub fn serialize_network(net: &FactorSet) -> String {
    let mut out = String::new();
    for v in net.variables() {
        let _ = writeln!(out, "variable {} {} {}", v.name, v.cardinality(), v.labels.join(" "));
    }
    for f in net.factors().iter().filter(|f| !f.is_unit()) {
        let names: Vec<&str> = f.scope().iter().map(|&v| net.variable(v).name.as_str()).collect();
        let _ = writeln!(out, "factor {}", names.join(" "));
        let values: Vec<String> = f.values().iter().map(|x| x.to_string()).collect();
        let _ = writeln!(out, "{}", values.join(" "));
    }
    out
}

pub fn parse_order(text: &str, net: &FactorSet) -> Result<EliminationOrder, ParseError> {
    let mut seen = vec![false; net.num_vars()];
    let mut sequence = Vec::with_capacity(net.num_vars());
    for (i, raw) in text.lines().enumerate() {
        for name in strip_comment(raw).split_whitespace() {
            let v = net
                .variable_by_name(name)
                .ok_or_else(|| err(i + 1, ParseErrorKind::UnknownVariable(name.to_string())))?;
            if seen[v.id] {
                return Err(err(i + 1, ParseErrorKind::DuplicateInOrder(name.to_string())));
            }
            seen[v.id] = true;
            sequence.push(v.id);
        }
    }
    let missing: Vec<&str> = net
        .variables()
        .iter()
        .filter(|v| !seen[v.id])
        .map(|v| v.name.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(err(0, ParseErrorKind::IncompleteOrder(missing.join(" "))));
    }
    Ok(EliminationOrder::new(sequence, net.num_vars()).expect("checked permutation"))
}

pub fn serialize_order(order: &EliminationOrder, net: &FactorSet) -> String {
    let names: Vec<&str> = order.sequence().iter().map(|&v| net.variable(v).name.as_str()).collect();
    names.join(" ")
}

pub fn parse_evidence(text: &str, net: &FactorSet) -> Result<Instantiation, ParseError> {
    let mut inst = Instantiation::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, label) = item
            .split_once('=')
            .ok_or_else(|| err(0, ParseErrorKind::Syntax(format!("expected name=label, got `{item}`"))))?;
        let (name, label) = (name.trim(), label.trim());
        let v = net
            .variable_by_name(name)
            .ok_or_else(|| err(0, ParseErrorKind::UnknownVariable(name.to_string())))?;
        let value = v.label_index(label).ok_or_else(|| {
            err(0, ParseErrorKind::UnknownLabel { var: name.to_string(), label: label.to_string() })
        })?;
        if inst.contains(v.id) {
            return Err(err(0, ParseErrorKind::DuplicateAssignment(name.to_string())));
        }
        inst.set(v.id, value);
    }
    Ok(inst)
}

pub fn format_instantiation(inst: &Instantiation, net: &FactorSet) -> String {
    let parts: Vec<String> = inst
        .iter()
        .map(|(v, x)| {
            let var = net.variable(v);
            format!("{}={}", var.name, var.labels[x])
        })
        .collect();
    parts.join(",")
}

/// Shortest decimal for `p` after rounding to 12 significant digits, so
/// accumulated rounding error does not show up in reports.
pub fn format_prob(p: f64) -> String {
    let rounded: f64 = format!("{p:.11e}").parse().unwrap_or(p);
    format!("{rounded}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probabilities_print_rounded() {
        assert_eq!(format_prob(0.28 + 0.30), "0.58");
        assert_eq!(format_prob(0.6000000000000001), "0.6");
        assert_eq!(format_prob(1e-20), "0.00000000000000000001");
        assert_eq!(format_prob(0.0), "0");
    }

    pub(crate) const FIVE_NODE: &str = "\
variable A 2 a0 a1
variable B 2 b0 b1
variable C 2 c0 c1
variable D 2 d0 d1
variable E 2 e0 e1
factor A
0.6 0.4
factor A B
0.2 0.8
0.75 0.25
factor B C
0.8 0.2 0.1 0.9
factor C D
0.3 0.7 0.4 0.6
factor B D E   # E given B, D
0.95 0.05 0.9 0.1
0.8 0.2 0 1
";

    #[test]
    fn parses_five_factor_network() {
        let doc = parse_document(FIVE_NODE).unwrap();
        assert_eq!(doc.factors.num_vars(), 5);
        assert_eq!(doc.factors.factors().len(), 5);
        assert_eq!(doc.factor_lines, vec![6, 8, 11, 13, 15]);
        assert_eq!(doc.factors.factors()[4].scope(), &[1, 3, 4]);
    }

    #[test]
    fn variable_without_factors() {
        let fs = parse_network("variable X 3 a b c\n").unwrap();
        assert_eq!(fs.num_vars(), 1);
        assert!(fs.factors().is_empty());
    }

    #[test]
    fn unknown_variable_reports_name_and_line() {
        let e = parse_network("variable A 2 t f\n\nfactor A Z\n1 2 3 4\n").unwrap_err();
        assert_eq!(e.line, 3);
        assert_eq!(e.kind, ParseErrorKind::UnknownVariable("Z".into()));
        assert!(e.to_string().contains('Z'));
    }

    #[test]
    fn malformed_documents() {
        let dup = parse_network("variable A 2 t f\nvariable A 2 t f\n").unwrap_err();
        assert_eq!(dup.kind, ParseErrorKind::DuplicateVariable("A".into()));
        let short = parse_network("variable A 2 t f\nfactor A\n0.5\n").unwrap_err();
        assert_eq!(short.line, 2);
        assert!(matches!(short.kind, ParseErrorKind::ValueCount { expected: 2, found: 1 }));
        let long = parse_network("variable A 2 t f\nfactor A\n0.5 0.5 0.1\n").unwrap_err();
        assert!(matches!(long.kind, ParseErrorKind::ValueCount { .. }));
        let nan = parse_network("variable A 2 t f\nfactor A\n0.5 x\n").unwrap_err();
        assert_eq!(nan.kind, ParseErrorKind::NotNumeric("x".into()));
        assert_eq!(nan.line, 3);
        assert!(parse_network("variable A 2 t f\nfactor\n").is_err());
        assert!(parse_network("variable A 3 t f\n").is_err());
        assert!(parse_network("variable A 2 t f\nfactor A\n-1 2\n").is_err());
        assert!(parse_network("0.5\n").is_err());
    }

    #[test]
    fn numbers_accept_scientific_notation() {
        let fs = parse_network("variable A 2 t f\nfactor A\n1e-3 2.5E2\n").unwrap();
        assert_eq!(fs.factors()[0].values(), &[0.001, 250.0]);
    }

    #[test]
    fn order_parsing() {
        let fs = parse_network(FIVE_NODE).unwrap();
        assert_eq!(parse_order("A B C D E", &fs).unwrap().sequence(), &[0, 1, 2, 3, 4]);
        assert_eq!(parse_order("E\nD C\tB A", &fs).unwrap().sequence(), &[4, 3, 2, 1, 0]);
        let dup = parse_order("A A B C D E", &fs).unwrap_err();
        assert_eq!(dup.kind, ParseErrorKind::DuplicateInOrder("A".into()));
        let missing = parse_order("A B C D", &fs).unwrap_err();
        assert_eq!(missing.kind, ParseErrorKind::IncompleteOrder("E".into()));
        assert!(parse_order("A B C D E F", &fs).is_err());
    }

    #[test]
    fn evidence_parsing() {
        let fs = parse_network("variable A 2 true false\nvariable B 2 true false\nfactor A B\n.32 .28 .10 .30\n").unwrap();
        assert_eq!(parse_evidence("A=true", &fs).unwrap(), Instantiation::from_pairs([(0, 0)]).unwrap());
        assert_eq!(parse_evidence(" B = false , A=true", &fs).unwrap(), Instantiation::from_pairs([(0, 0), (1, 1)]).unwrap());
        assert!(parse_evidence("", &fs).unwrap().is_empty());
        let purple = parse_evidence("A=purple", &fs).unwrap_err();
        assert!(matches!(purple.kind, ParseErrorKind::UnknownLabel { .. }));
        assert!(matches!(parse_evidence("Q=true", &fs).unwrap_err().kind, ParseErrorKind::UnknownVariable(_)));
        assert!(matches!(
            parse_evidence("A=true,A=false", &fs).unwrap_err().kind,
            ParseErrorKind::DuplicateAssignment(_)
        ));
        assert_eq!(format_instantiation(&parse_evidence("B=false,A=true", &fs).unwrap(), &fs), "A=true,B=false");
    }

    #[test]
    fn serialization_round_trips() {
        let fs = parse_network(FIVE_NODE).unwrap();
        let text = serialize_network(&fs);
        assert_eq!(parse_network(&text).unwrap(), fs);
        assert_eq!(serialize_network(&parse_network(&text).unwrap()), text);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn round_trip_random_tables(cards in prop::collection::vec(1usize..4, 1..4), seed in any::<u64>()) {
                let mut fs = FactorSet::new();
                let ids: Vec<VarId> = cards.iter().enumerate()
                    .map(|(i, &k)| fs.add_variable(&format!("v{i}"), (0..k).map(|j| format!("l{j}")).collect()).unwrap())
                    .collect();
                let size: usize = cards.iter().product();
                let mut state = seed | 1;
                let values: Vec<f64> = (0..size).map(|_| {
                    state ^= state << 13; state ^= state >> 7; state ^= state << 17;
                    (state % 1_000_000) as f64 / 7919.0
                }).collect();
                fs.add_factor(&ids, values).unwrap();
                fs.add_factor(&ids[..1], vec![0.1; cards[0]]).unwrap();
                let again = parse_network(&serialize_network(&fs)).unwrap();
                prop_assert_eq!(again, fs);
            }
        }
    }
}
