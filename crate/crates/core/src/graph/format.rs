//! Line-oriented text format for factor graphs.
//!
//! ```text
//! n k |F|
//! q: <alphabet size>
//! weight <id> <arity>: [w_0, w_1, ...]      (table in symbol-index order)
//! <a>: x_1 ... x_k [<weight id>]
//! pin: <x> <symbol>
//! ```
//!
//! `k` in the header is the largest check arity. Blank lines and lines
//! starting with `#` are ignored.

use std::io::{BufRead, Write};

use super::factor_graph::FactorGraph;
use super::weights::WeightFunction;
use crate::{Error, Result};

pub fn write_graph<W: Write>(g: &FactorGraph, mut out: W) -> Result<()> {
    let k = g.checks().iter().map(|c| c.neighbors.len()).max().unwrap_or(0);
    writeln!(out, "{} {} {}", g.n(), k, g.num_checks())?;
    writeln!(out, "q: {}", g.q())?;
    for (id, w) in g.weights().iter().enumerate() {
        let table = serde_json::to_string(w.table()).expect("finite floats serialize");
        writeln!(out, "weight {id} {}: {table}", w.arity())?;
    }
    for (a, c) in g.checks().iter().enumerate() {
        write!(out, "{a}:")?;
        for x in &c.neighbors {
            write!(out, " {x}")?;
        }
        if let Some(w) = c.weight {
            write!(out, " [{w}]")?;
        }
        writeln!(out)?;
    }
    for p in g.pins() {
        writeln!(out, "pin: {} {}", p.variable, p.symbol)?;
    }
    Ok(())
}

fn parse_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        line,
        reason: reason.into(),
    }
}

fn num<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("expected a number, found `{tok}`")))
}

pub fn read_graph<R: BufRead>(input: R) -> Result<FactorGraph> {
    let mut lines = input
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty() && !l.trim_start().starts_with('#')));
    let (lno, header) = lines.next().ok_or_else(|| parse_err(0, "missing header"))?;
    let header = header?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 3 {
        return Err(parse_err(lno, "header must be `n k |F|`"));
    }
    let n: usize = num(h[0], lno)?;
    let _k: usize = num(h[1], lno)?;
    let m: usize = num(h[2], lno)?;
    let mut q = 2;
    let mut pending_checks: Vec<(usize, Vec<usize>, Option<usize>)> = Vec::new();
    let mut pins: Vec<(usize, usize, usize)> = Vec::new();
    let mut weights: Vec<WeightFunction> = Vec::new();
    for (lno, line) in lines {
        let line = line?;
        let line = line.trim();
        let (head, rest) = line
            .split_once(':')
            .ok_or_else(|| parse_err(lno, "expected `<tag>: ...`"))?;
        let head = head.trim();
        if head == "q" {
            q = num(rest.trim(), lno)?;
        } else if head == "pin" {
            let t: Vec<&str> = rest.split_whitespace().collect();
            if t.len() != 2 {
                return Err(parse_err(lno, "pin needs `x symbol`"));
            }
            pins.push((lno, num(t[0], lno)?, num(t[1], lno)?));
        } else if let Some(spec) = head.strip_prefix("weight") {
            let t: Vec<&str> = spec.split_whitespace().collect();
            if t.len() != 2 {
                return Err(parse_err(lno, "weight needs `id arity`"));
            }
            let id: usize = num(t[0], lno)?;
            let arity: usize = num(t[1], lno)?;
            if id != weights.len() {
                return Err(parse_err(lno, "weight ids must be consecutive from 0"));
            }
            let table: Vec<f64> = serde_json::from_str(rest.trim())
                .map_err(|e| parse_err(lno, format!("bad weight table: {e}")))?;
            weights.push(WeightFunction::new(q, arity, table).map_err(|e| parse_err(lno, e.to_string()))?);
        } else {
            let _a: usize = num(head, lno)?;
            let mut hood = Vec::new();
            let mut weight = None;
            for tok in rest.split_whitespace() {
                if let Some(w) = tok.strip_prefix('[').and_then(|t| t.strip_suffix(']')) {
                    weight = Some(num(w, lno)?);
                } else {
                    hood.push(num(tok, lno)?);
                }
            }
            pending_checks.push((lno, hood, weight));
        }
    }
    let mut graph = FactorGraph::new(n, q);
    for w in weights {
        graph.add_weight(w)?;
    }
    if pending_checks.len() != m {
        return Err(parse_err(0, format!("header announces {m} checks, found {}", pending_checks.len())));
    }
    for (lno, hood, w) in pending_checks {
        graph.add_check(hood, w).map_err(|e| parse_err(lno, e.to_string()))?;
    }
    for (lno, x, s) in pins {
        graph.add_pin(x, s).map_err(|e| parse_err(lno, e.to_string()))?;
    }
    Ok(graph)
}
