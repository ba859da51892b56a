//! QDIMACS writer (Tseitin transformation), reader, and an exact solver for
//! small prefixes by universal expansion.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::time::Instant;

use varisat::{ExtendFormula, Lit as SatLit, Solver, Var};

use super::{SolveError, SolveResult, Status};
use crate::formula::{Gate, Lit, Qbf};

/// Largest universal block expanded by [`solve_by_expansion`].
pub const EXPANSION_CAP: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quant {
    Exists,
    Forall,
}

/// A prenex CNF with variables numbered from 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cnf {
    pub num_vars: u32,
    pub blocks: Vec<(Quant, Vec<u32>)>,
    pub clauses: Vec<Vec<i64>>,
}

/// Tseitin transformation with one auxiliary variable per gate in the cone of
/// the output, in the innermost existential block.
pub fn to_cnf(q: &Qbf) -> Cnf {
    let c = &q.circuit;
    let cone = c.cone(q.output);
    let mut aux: HashMap<usize, i64> = HashMap::new();
    let mut next = q.num_vars as i64 + 1;
    for &n in &cone {
        aux.insert(n, next);
        next += 1;
    }
    let lit = |l: Lit| -> i64 {
        let id = match c.gate(l) {
            Gate::Var(v) => *v as i64 + 1,
            _ => aux[&l.node()],
        };
        if l.is_negated() {
            -id
        } else {
            id
        }
    };
    let mut clauses = Vec::new();
    for &n in &cone {
        let g = aux[&n];
        match &c.nodes()[n] {
            Gate::And(ls) => {
                let mut big = vec![g];
                for &l in ls {
                    clauses.push(vec![-g, lit(l)]);
                    big.push(-lit(l));
                }
                clauses.push(big);
            }
            Gate::Or(ls) => {
                let mut big = vec![-g];
                for &l in ls {
                    clauses.push(vec![g, -lit(l)]);
                    big.push(lit(l));
                }
                clauses.push(big);
            }
            Gate::Xor(a, b) => {
                let (a, b) = (lit(*a), lit(*b));
                clauses.push(vec![-g, a, b]);
                clauses.push(vec![-g, -a, -b]);
                clauses.push(vec![g, -a, b]);
                clauses.push(vec![g, a, -b]);
            }
            _ => unreachable!("cone holds internal gates only"),
        }
    }
    if q.output == Lit::FALSE {
        clauses.push(Vec::new());
    } else if q.output != Lit::TRUE {
        clauses.push(vec![lit(q.output)]);
    }
    let mut blocks = Vec::new();
    let ids = |b: &[u32]| b.iter().map(|v| v + 1).collect::<Vec<u32>>();
    if !q.exists.is_empty() {
        blocks.push((Quant::Exists, ids(&q.exists)));
    }
    if !q.forall.is_empty() {
        blocks.push((Quant::Forall, ids(&q.forall)));
    }
    if !cone.is_empty() {
        let first = q.num_vars + 1;
        let aux: Vec<u32> = (first..first + cone.len() as u32).collect();
        match blocks.last_mut() {
            Some((Quant::Exists, vars)) => vars.extend(aux),
            _ => blocks.push((Quant::Exists, aux)),
        }
    }
    Cnf {
        num_vars: (next - 1) as u32,
        blocks,
        clauses,
    }
}

impl Cnf {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "p cnf {} {}", self.num_vars, self.clauses.len());
        for (quant, vars) in &self.blocks {
            let q = match quant {
                Quant::Exists => 'e',
                Quant::Forall => 'a',
            };
            let vs: Vec<String> = vars.iter().map(u32::to_string).collect();
            let _ = writeln!(out, "{} {} 0", q, vs.join(" "));
        }
        for clause in &self.clauses {
            for l in clause {
                let _ = write!(out, "{l} ");
            }
            out.push_str("0\n");
        }
        out
    }
}

pub fn to_qdimacs(q: &Qbf) -> String {
    to_cnf(q).render()
}

fn parse_err(line: usize, message: impl Into<String>) -> SolveError {
    SolveError::Parse {
        line,
        message: message.into(),
    }
}

pub fn parse_qdimacs(text: &str) -> Result<Cnf, SolveError> {
    let mut header: Option<(u32, usize)> = None;
    let mut blocks: Vec<(Quant, Vec<u32>)> = Vec::new();
    let mut clauses = Vec::new();
    let mut current: Vec<i64> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('c') {
            continue;
        }
        let mut toks = s.split_whitespace();
        let first = toks.next().expect("non-empty line");
        match first {
            "p" => {
                if toks.next() != Some("cnf") {
                    return Err(parse_err(line, "expected `p cnf`"));
                }
                let mut num = || -> Result<usize, SolveError> {
                    toks.next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| parse_err(line, "malformed header"))
                };
                header = Some((num()? as u32, num()?));
            }
            "e" | "a" => {
                if header.is_none() || !clauses.is_empty() {
                    return Err(parse_err(line, "quantifier line out of place"));
                }
                let quant = if first == "e" {
                    Quant::Exists
                } else {
                    Quant::Forall
                };
                let mut vars = Vec::new();
                for t in toks {
                    let v: u32 = t.parse().map_err(|_| parse_err(line, "bad variable"))?;
                    if v == 0 {
                        break;
                    }
                    vars.push(v);
                }
                match blocks.last_mut() {
                    Some((q, vs)) if *q == quant => vs.extend(vars),
                    _ => blocks.push((quant, vars)),
                }
            }
            _ => {
                if header.is_none() {
                    return Err(parse_err(line, "clause before header"));
                }
                for t in std::iter::once(first).chain(toks) {
                    let l: i64 = t.parse().map_err(|_| parse_err(line, format!("bad literal `{t}`")))?;
                    if l == 0 {
                        clauses.push(std::mem::take(&mut current));
                    } else {
                        current.push(l);
                    }
                }
            }
        }
    }
    if !current.is_empty() {
        clauses.push(current);
    }
    let (num_vars, count) = header.ok_or_else(|| parse_err(0, "missing header"))?;
    if count != clauses.len() {
        return Err(parse_err(
            0,
            format!("header announces {count} clauses, found {}", clauses.len()),
        ));
    }
    if let Some(l) = clauses.iter().flatten().find(|l| l.unsigned_abs() > num_vars as u64) {
        return Err(parse_err(0, format!("literal {l} exceeds the variable count")));
    }
    Ok(Cnf {
        num_vars,
        blocks,
        clauses,
    })
}

/// Decides prefixes of the shape `∃X ∀Y ∃Z` (any part may be empty) by
/// copying the clauses once per assignment of `Y`. Unquantified variables
/// count as outermost existentials. The witness covers `X` in block order.
pub fn solve_by_expansion(cnf: &Cnf, deadline: Option<Instant>) -> Result<SolveResult, SolveError> {
    let start = Instant::now();
    let mut blocks: Vec<(Quant, Vec<u32>)> = Vec::new();
    for (q, vars) in &cnf.blocks {
        match blocks.last_mut() {
            Some((last, vs)) if last == q => vs.extend(vars),
            _ => blocks.push((*q, vars.clone())),
        }
    }
    if blocks.first().is_some_and(|(q, _)| *q == Quant::Forall) {
        blocks.insert(0, (Quant::Exists, Vec::new()));
    }
    if blocks.len() > 3 {
        return Err(SolveError::Unsupported(format!(
            "{} quantifier blocks",
            blocks.len()
        )));
    }
    let mut outer: Vec<u32> = blocks.first().map(|b| b.1.clone()).unwrap_or_default();
    let universal: Vec<u32> = blocks.get(1).map(|b| b.1.clone()).unwrap_or_default();
    if universal.len() > EXPANSION_CAP {
        return Err(SolveError::TooManyVars {
            what: "universal block",
            count: universal.len(),
            cap: EXPANSION_CAP,
        });
    }
    let quantified: Vec<bool> = {
        let mut q = vec![false; cnf.num_vars as usize + 1];
        for (_, vars) in &blocks {
            for &v in vars {
                q[v as usize] = true;
            }
        }
        q
    };
    for v in 1..=cnf.num_vars {
        if !quantified[v as usize] {
            outer.push(v);
        }
    }
    let mut solver = Solver::new();
    let shared: HashMap<u32, Var> = outer.iter().map(|&v| (v, solver.new_var())).collect();
    let upos: HashMap<u32, usize> = universal.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    for bits in 0u64..(1u64 << universal.len()) {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            let mut r = SolveResult::new(Status::Unknown, "expansion", start);
            r.diagnostics = "timeout during expansion".into();
            return Ok(r);
        }
        let mut local: HashMap<u32, Var> = HashMap::new();
        'clause: for clause in &cnf.clauses {
            let mut lits = Vec::new();
            for &l in clause {
                let v = l.unsigned_abs() as u32;
                if let Some(&k) = upos.get(&v) {
                    let val = bits >> k & 1 == 1;
                    if val == (l > 0) {
                        continue 'clause;
                    }
                    continue;
                }
                let var = match shared.get(&v) {
                    Some(&var) => var,
                    None => *local.entry(v).or_insert_with(|| solver.new_var()),
                };
                lits.push(SatLit::from_var(var, l > 0));
            }
            solver.add_clause(&lits);
        }
    }
    let sat = solver.solve().expect("sat solver failure");
    let mut r = SolveResult::new(
        if sat { Status::Sat } else { Status::Unsat },
        "expansion",
        start,
    );
    if sat {
        let model = solver.model().expect("model after SAT");
        let x: &[u32] = blocks.first().map(|b| &b.1[..]).unwrap_or(&[]);
        r.witness = Some(
            x.iter()
                .map(|v| model[shared[v].index()].is_positive())
                .collect(),
        );
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::Circuit;

    fn two_vars(build: impl FnOnce(&mut Circuit, Lit, Lit) -> Lit) -> Qbf {
        let mut c = Circuit::new();
        let x = c.var(0);
        let y = c.var(1);
        let output = build(&mut c, x, y);
        Qbf {
            num_vars: 2,
            exists: vec![0],
            forall: vec![1],
            circuit: c,
            output,
        }
    }

    #[test]
    fn literal_output_is_one_clause() {
        let q = two_vars(|_, x, _| x);
        assert_eq!(to_qdimacs(&q), "p cnf 2 1\ne 1 0\na 2 0\n1 0\n");
    }

    #[test]
    fn conjunction_tseitin() {
        let q = two_vars(|c, x, y| c.and([x, y]));
        assert_eq!(
            to_qdimacs(&q),
            "p cnf 3 4\ne 1 0\na 2 0\ne 3 0\n-3 1 0\n-3 2 0\n3 -1 -2 0\n3 0\n"
        );
    }

    #[test]
    fn constants() {
        let q = two_vars(|_, _, _| Lit::FALSE);
        assert_eq!(to_qdimacs(&q), "p cnf 2 1\ne 1 0\na 2 0\n0\n");
        let q = two_vars(|_, _, _| Lit::TRUE);
        assert_eq!(to_qdimacs(&q), "p cnf 2 0\ne 1 0\na 2 0\n");
    }

    #[test]
    fn parse_round_trip_and_solve() {
        let q = two_vars(|c, x, y| c.or([x, y]));
        let text = to_qdimacs(&q);
        let cnf = parse_qdimacs(&text).unwrap();
        assert_eq!(cnf.render(), text);
        let r = solve_by_expansion(&cnf, None).unwrap();
        assert_eq!(r.status, Status::Sat);
        assert_eq!(r.witness, Some(vec![true]));
        let q = two_vars(|c, x, y| c.xor(x, y));
        let r = solve_by_expansion(&to_cnf(&q), None).unwrap();
        assert_eq!(r.status, Status::Unsat);
    }

    #[test]
    fn adjacent_existential_blocks_merge() {
        let mut q = two_vars(|c, x, y| c.and([x, !y]));
        q.exists = vec![0, 1];
        q.forall = vec![];
        let r = solve_by_expansion(&to_cnf(&q), None).unwrap();
        assert_eq!(r.status, Status::Sat);
        // the auxiliary block joins the outer one
        assert_eq!(r.witness.unwrap()[..2], [true, false]);
    }

    #[test]
    fn header_mismatch() {
        assert!(parse_qdimacs("p cnf 1 2\n1 0\n").is_err());
        assert!(parse_qdimacs("p cnf 1 1\n2 0\n").is_err());
    }
}
