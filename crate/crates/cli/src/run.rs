use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;

use anyspace::dtree::{check_order_properties, el2dt, el2sdt, Dtree, EliminationOrder};
use anyspace::error::{MapError, RcError};
use anyspace::mapmpe::{HypothesisSet, MapOptions};
use anyspace::model::{FactorSet, Instantiation, VarId};
use anyspace::netio::{format_instantiation, format_prob, parse_evidence, parse_network, parse_order};
use anyspace::rc::{predicted_calls, tradeoff_curve, CacheFactor, Session};
use anyspace::ve::{memory_report, ve_prob, CSV_HEADER};
use anyspace::Exec;

use crate::args::{Command, Common, Format, HypothesisArgs};

/// Exit status 2, 3 and 4 respectively.
#[derive(Debug)]
pub enum Failure {
    Input(String),
    Config(String),
    Check(String),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) | Failure::Config(m) | Failure::Check(m) => f.write_str(m),
        }
    }
}

fn input(e: impl fmt::Display) -> Failure {
    Failure::Input(e.to_string())
}

fn config(e: impl fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

pub fn run(command: Command) -> Result<String, Failure> {
    match command {
        Command::Prob(c) => prob(&c),
        Command::Mpe { common, hyps } => map(&common, None, &hyps),
        Command::Map { common, map_vars, hyps } => map(&common, Some(&map_vars), &hyps),
        Command::Predict { common, verify } => predict(&common, verify),
        Command::Curve { common, budgets } => curve(&common, &budgets),
        Command::Compare { common, name } => compare(&common, name),
        Command::Dtree { common } => dtree(&common),
    }
}

struct Loaded {
    net: FactorSet,
    order: EliminationOrder,
    evidence: Instantiation,
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))
}

fn load(c: &Common) -> Result<Loaded, Failure> {
    let net = parse_network(&read(&c.network)?).map_err(|e| Failure::Input(format!("{}: {e}", c.network.display())))?;
    let order = parse_order(&read(&c.order)?, &net).map_err(|e| Failure::Input(format!("{}: {e}", c.order.display())))?;
    let evidence = parse_evidence(&c.evidence, &net).map_err(|e| Failure::Input(format!("evidence: {}", e.kind)))?;
    Ok(Loaded { net, order, evidence })
}

fn build(net: &FactorSet, order: &EliminationOrder, sdt: bool) -> Result<Dtree, Failure> {
    if sdt { el2sdt(net, order) } else { el2dt(net, order) }.map_err(input)
}

fn cache_factor(c: &Common, tree: &Dtree) -> Result<CacheFactor, Failure> {
    let cf = match c.cache.as_str() {
        "full" => CacheFactor::full(tree),
        "none" => CacheFactor::none(tree),
        other if other.starts_with("frac=") => {
            let f: f64 = other[5..].parse().map_err(|_| config(format!("bad cache fraction `{}`", &other[5..])))?;
            if !(0.0..=1.0).contains(&f) {
                return Err(config(format!("cache fraction {f} outside [0, 1]")));
            }
            CacheFactor::uniform(tree, f)
        }
        path => cache_file(Path::new(path), tree)?,
    };
    Ok(cf.with_seed(c.seed))
}

/// `<node> <fraction>` per line; `#` starts a comment.
fn cache_file(path: &Path, tree: &Dtree) -> Result<CacheFactor, Failure> {
    let text = read(path)?;
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = || Failure::Input(format!("{}: line {}: expected `<node> <fraction>`", path.display(), i + 1));
        let mut parts = line.split_whitespace();
        let node: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let fraction: f64 = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        if parts.next().is_some() || node >= tree.len() {
            return Err(bad());
        }
        entries.push((node, fraction));
    }
    let cf = CacheFactor::from_entries(tree.len(), entries);
    cf.validate(tree).map_err(|e| match e {
        RcError::CacheFactorRange { .. } => config(e),
        other => Failure::Input(format!("{}: {other}", path.display())),
    })?;
    Ok(cf)
}

fn reject_forget(c: &Common, command: &str) -> Result<(), Failure> {
    if c.forget {
        return Err(config(format!("--forget does not apply to `{command}`")));
    }
    Ok(())
}

fn reject_evidence(l: &Loaded, command: &str) -> Result<(), Failure> {
    if !l.evidence.is_empty() {
        return Err(config(format!("`{command}` assumes no evidence")));
    }
    Ok(())
}

fn prob(c: &Common) -> Result<String, Failure> {
    let l = load(c)?;
    let tree = build(&l.net, &l.order, c.sdt)?;
    let cf = cache_factor(c, &tree)?;
    if c.forget && !cf.is_discrete() {
        return Err(config("--forget needs a discrete cache (every node 0 or 1)"));
    }
    let mut s = Session::new(&tree, cf).map_err(config)?;
    let p = if c.forget {
        s.query_forgetting(&l.evidence).map_err(input)?.0
    } else {
        s.query(&l.evidence).map_err(input)?
    };
    let p = format_prob(p);
    let mut out = String::new();
    match c.format {
        Format::Text => {
            let _ = writeln!(out, "{p}");
            if c.stats {
                out.push_str(&s.stats().dump());
                let _ = writeln!(out, "total_calls={} peak_cells={}", s.stats().total_calls(), s.stats().peak_cells);
            }
        }
        Format::Csv if c.stats => {
            let _ = writeln!(out, "probability,total_calls,peak_cells\n{p},{},{}", s.stats().total_calls(), s.stats().peak_cells);
        }
        Format::Csv => {
            let _ = writeln!(out, "probability\n{p}");
        }
    }
    Ok(out)
}

fn map(c: &Common, names: Option<&[String]>, h: &HypothesisArgs) -> Result<String, Failure> {
    reject_forget(c, if names.is_some() { "map" } else { "mpe" })?;
    let l = load(c)?;
    let mut map_vars: Vec<VarId> = match names {
        Some(names) => names
            .iter()
            .map(|n| n.trim())
            .filter(|n| !n.is_empty())
            .map(|n| l.net.variable_by_name(n).map(|v| v.id).ok_or_else(|| input(format!("unknown MAP variable `{n}`"))))
            .collect::<Result<_, _>>()?,
        None => (0..l.net.num_vars()).filter(|&v| !l.evidence.contains(v)).collect(),
    };
    map_vars.sort_unstable();
    map_vars.dedup();
    if let Some(&v) = map_vars.iter().find(|&&v| l.evidence.contains(v)) {
        return Err(config(format!("MAP variable {} also appears in the evidence", l.net.variable(v).name)));
    }
    let mut order = l.order.clone();
    if names.is_some() {
        let tail = &order.sequence()[order.len() - map_vars.len()..];
        if !map_vars.iter().all(|v| tail.contains(v)) {
            eprintln!("warning: moving MAP variables to the end of the elimination order");
            order = order.with_last(&map_vars);
        }
    }
    let tree = build(&l.net, &order, !c.dt)?;
    let cf = cache_factor(c, &tree)?;
    let mut s = Session::new(&tree, cf).map_err(config)?;
    let opts = MapOptions { cap: h.cap, single: h.single };
    let result = match names {
        Some(_) => s.map_with(&map_vars, &l.evidence, opts),
        None => s.mpe_with(&l.evidence, opts),
    };
    let set: HypothesisSet = result.map_err(|e| match e {
        MapError::MapVariableInEvidence(_) | MapError::InvalidDtree(_) | MapError::TooManyHypotheses(_) => config(e),
        other => Failure::Check(other.to_string()),
    })?;
    let mut out = match c.format {
        Format::Text => set.format(&l.net),
        Format::Csv => set.to_csv(&l.net),
    };
    if c.stats && c.format == Format::Text {
        out.push_str(&s.stats().dump());
        let _ = writeln!(out, "total_calls={} peak_cells={}", s.stats().total_calls(), s.stats().peak_cells);
    }
    Ok(out)
}

fn predict(c: &Common, verify: bool) -> Result<String, Failure> {
    reject_forget(c, "predict")?;
    let l = load(c)?;
    reject_evidence(&l, "predict")?;
    let tree = build(&l.net, &l.order, c.sdt)?;
    let cf = cache_factor(c, &tree)?;
    let ave = predicted_calls(&tree, &cf);
    let total: f64 = ave.iter().sum();
    let sep = if c.format == Format::Csv { "," } else { " " };
    let mut out = format!("node{sep}predicted_calls\n");
    for (t, a) in ave.iter().enumerate() {
        let _ = writeln!(out, "{t}{sep}{a}");
    }
    let _ = writeln!(out, "total{sep}{total}");
    if verify {
        if !cf.is_discrete() {
            return Err(config("--verify needs a discrete cache (every node 0 or 1)"));
        }
        let mut s = Session::new(&tree, cf).map_err(config)?;
        s.query(&Instantiation::new()).map_err(input)?;
        let exact = s.exact_calls().map_err(input)?;
        for (t, (&e, &a)) in exact.iter().zip(&ave).enumerate() {
            if e as f64 != a {
                return Err(Failure::Check(format!("node {t}: {e} calls, predicted {a}")));
            }
        }
        if c.format == Format::Text {
            let _ = writeln!(out, "verified {} calls", s.stats().total_calls());
        }
    }
    Ok(out)
}

fn curve(c: &Common, budgets: &str) -> Result<String, Failure> {
    reject_forget(c, "curve")?;
    let l = load(c)?;
    reject_evidence(&l, "curve")?;
    let budgets: Vec<u64> = budgets
        .split(',')
        .map(str::trim)
        .filter(|b| !b.is_empty())
        .map(|b| b.parse().map_err(|_| input(format!("bad budget `{b}`"))))
        .collect::<Result<_, _>>()?;
    let tree = build(&l.net, &l.order, c.sdt)?;
    let points = tradeoff_curve(&tree, &budgets, Exec::Parallel).map_err(config)?;
    let mut out = String::from("budget_cells,predicted_calls\n");
    for p in points {
        let _ = writeln!(out, "{},{}", p.budget, p.predicted_calls);
    }
    Ok(out)
}

fn compare(c: &Common, name: Option<String>) -> Result<String, Failure> {
    let l = load(c)?;
    reject_evidence(&l, "compare")?;
    let name = name.unwrap_or_else(|| c.network.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned()));
    let run = ve_prob(&l.net, &l.order, &l.evidence).map_err(input)?;
    let tree = build(&l.net, &l.order, c.sdt)?;
    let (p, rc_peak) = Session::new(&tree, CacheFactor::full(&tree))
        .map_err(config)?
        .query_forgetting(&l.evidence)
        .map_err(input)?;
    if !close(run.result, p, 1e-9) {
        return Err(Failure::Check(format!("variable elimination gives {}, recursive conditioning {p}", run.result)));
    }
    Ok(format!("{CSV_HEADER}\n{}\n", memory_report(&run, rc_peak).csv_row(&name)))
}

fn dtree(c: &Common) -> Result<String, Failure> {
    reject_forget(c, "dtree")?;
    let l = load(c)?;
    let tree = build(&l.net, &l.order, !c.dt)?;
    let props = check_order_properties(&tree, &l.order);
    let mut out = tree.dump();
    let _ = writeln!(out, "dtree width: {}", props.dtree_width);
    let _ = writeln!(out, "order width: {}", props.order_width);
    let names = ["width bounded by order", "every variable in a cutset", "cutsets empty or singleton", "cutsets nested in order"];
    for (i, (ok, what)) in props.holds().iter().zip(names).enumerate() {
        let _ = writeln!(out, "property {} ({what}): {}", i + 1, if *ok { "pass" } else { "fail" });
    }
    if !props.width_bounded {
        return Err(Failure::Check(format!("dtree width {} above order width {}", props.dtree_width, props.order_width)));
    }
    if !l.evidence.is_empty() {
        let _ = writeln!(out, "evidence: {}", format_instantiation(&l.evidence, &l.net));
    }
    Ok(out)
}
