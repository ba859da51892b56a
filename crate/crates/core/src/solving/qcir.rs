//! QCIR-G14 (cleansed prenex form) writer and reader.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::SolveError;
use crate::formula::{Circuit, Gate, Lit, Qbf};

/// Renders `q` with variables `1..=num_vars` followed by gate ids. The output
/// statement precedes the gate definitions, as the format requires.
pub fn to_qcir(q: &Qbf) -> String {
    let mut out = String::from("#QCIR-G14\n");
    for (name, block) in [("exists", &q.exists), ("forall", &q.forall)] {
        if block.is_empty() {
            continue;
        }
        let ids: Vec<String> = block.iter().map(|v| (v + 1).to_string()).collect();
        let _ = writeln!(out, "{}({})", name, ids.join(", "));
    }
    let c = &q.circuit;
    let cone = c.cone(q.output);
    let mut ids: HashMap<usize, i64> = HashMap::new();
    let mut next = q.num_vars as i64 + 1;
    for &n in &cone {
        ids.insert(n, next);
        next += 1;
    }
    // constants become empty gates
    let const_id = if q.output.is_const() {
        Some(next)
    } else {
        None
    };
    let lit = |l: Lit| -> i64 {
        let id = match c.gate(l) {
            Gate::Var(v) => *v as i64 + 1,
            Gate::True => const_id.expect("constants only at the output"),
            _ => ids[&l.node()],
        };
        if l.is_negated() {
            -id
        } else {
            id
        }
    };
    let _ = writeln!(out, "output({})", lit(q.output));
    if let Some(id) = const_id {
        let _ = writeln!(out, "{id} = and()");
    }
    for &n in &cone {
        let (op, args): (&str, Vec<Lit>) = match &c.nodes()[n] {
            Gate::And(ls) => ("and", ls.clone()),
            Gate::Or(ls) => ("or", ls.clone()),
            Gate::Xor(a, b) => ("xor", vec![*a, *b]),
            _ => unreachable!("cone holds internal gates only"),
        };
        let args: Vec<String> = args.into_iter().map(|l| lit(l).to_string()).collect();
        let _ = writeln!(out, "{} = {}({})", ids[&n], op, args.join(", "));
    }
    out
}

fn parse_err(line: usize, message: impl Into<String>) -> SolveError {
    SolveError::Parse {
        line,
        message: message.into(),
    }
}

/// Splits `name(args)` into the name and the argument list.
fn call(s: &str, line: usize) -> Result<(&str, Vec<&str>), SolveError> {
    let open = s.find('(').ok_or_else(|| parse_err(line, "expected `(`"))?;
    if !s.ends_with(')') {
        return Err(parse_err(line, "expected `)` at end of line"));
    }
    let name = s[..open].trim();
    let inner = s[open + 1..s.len() - 1].trim();
    let args = if inner.is_empty() {
        Vec::new()
    } else {
        inner.split(',').map(str::trim).collect()
    };
    Ok((name, args))
}

/// Reads a document whose prefix is existential blocks followed by universal
/// blocks (either part may be missing).
pub fn parse_qcir(text: &str) -> Result<Qbf, SolveError> {
    let mut c = Circuit::new();
    let mut names: HashMap<String, Lit> = HashMap::new();
    let mut exists = Vec::new();
    let mut forall = Vec::new();
    let mut output: Option<(String, usize)> = None;
    let mut num_vars = 0u32;
    let mut seen_forall = false;
    let mut header = false;

    let resolve = |names: &HashMap<String, Lit>, tok: &str, line: usize| -> Result<Lit, SolveError> {
        let (neg, name) = match tok.strip_prefix('-') {
            Some(rest) => (true, rest.trim()),
            None => (false, tok),
        };
        let l = *names
            .get(name)
            .ok_or_else(|| parse_err(line, format!("undefined identifier `{name}`")))?;
        Ok(if neg { !l } else { l })
    };

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if s.is_empty() {
            continue;
        }
        if s.starts_with('#') {
            if s.to_ascii_uppercase().starts_with("#QCIR-G14") {
                header = true;
            }
            continue;
        }
        if let Some((lhs, rhs)) = s.split_once('=') {
            let lhs = lhs.trim().to_string();
            if names.contains_key(&lhs) {
                return Err(parse_err(line, format!("`{lhs}` defined twice")));
            }
            let (op, args) = call(rhs.trim(), line)?;
            let lits = args
                .iter()
                .map(|a| resolve(&names, a, line))
                .collect::<Result<Vec<_>, _>>()?;
            let g = match op.to_ascii_lowercase().as_str() {
                "and" => c.and(lits),
                "or" => c.or(lits),
                "xor" if lits.len() == 2 => c.xor(lits[0], lits[1]),
                "ite" if lits.len() == 3 => {
                    let a = c.and([lits[0], lits[1]]);
                    let b = c.and([!lits[0], lits[2]]);
                    c.or([a, b])
                }
                other => return Err(parse_err(line, format!("unsupported gate `{other}`"))),
            };
            names.insert(lhs, g);
            continue;
        }
        let (kw, args) = call(s, line)?;
        match kw.to_ascii_lowercase().as_str() {
            "exists" | "forall" => {
                let universal = kw.eq_ignore_ascii_case("forall");
                if !universal && seen_forall {
                    return Err(SolveError::Unsupported(
                        "existential block after a universal block".into(),
                    ));
                }
                seen_forall |= universal;
                for a in args {
                    if names.contains_key(a) {
                        return Err(parse_err(line, format!("`{a}` quantified twice")));
                    }
                    let v = num_vars;
                    num_vars += 1;
                    names.insert(a.to_string(), c.var(v));
                    if universal {
                        forall.push(v);
                    } else {
                        exists.push(v);
                    }
                }
            }
            "output" => {
                if args.len() != 1 {
                    return Err(parse_err(line, "output takes one literal"));
                }
                output = Some((args[0].to_string(), line));
            }
            other => return Err(parse_err(line, format!("unknown statement `{other}`"))),
        }
    }
    if !header {
        return Err(parse_err(1, "missing #QCIR-G14 header"));
    }
    let (out, line) = output.ok_or_else(|| parse_err(0, "missing output statement"))?;
    let output = resolve(&names, &out, line)?;
    Ok(Qbf {
        num_vars,
        exists,
        forall,
        circuit: c,
        output,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

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
    fn literal_output_is_four_lines() {
        let q = two_vars(|_, x, _| !x);
        assert_eq!(to_qcir(&q), "#QCIR-G14\nexists(1)\nforall(2)\noutput(-1)\n");
    }

    #[test]
    fn and_of_two() {
        let q = two_vars(|c, x, y| c.and([x, !y]));
        assert_eq!(
            to_qcir(&q),
            "#QCIR-G14\nexists(1)\nforall(2)\noutput(3)\n3 = and(1, -2)\n"
        );
    }

    #[test]
    fn constants() {
        let q = two_vars(|_, _, _| Lit::FALSE);
        assert_eq!(
            to_qcir(&q),
            "#QCIR-G14\nexists(1)\nforall(2)\noutput(-3)\n3 = and()\n"
        );
        let back = parse_qcir(&to_qcir(&q)).unwrap();
        assert_eq!(back.output, Lit::FALSE);
    }

    #[test]
    fn parse_back() {
        let q = two_vars(|c, x, y| {
            let a = c.xor(x, y);
            c.or([a, !x])
        });
        let text = to_qcir(&q);
        let back = parse_qcir(&text).unwrap();
        assert_eq!(to_qcir(&back), text);
    }

    #[test]
    fn parse_errors() {
        assert!(parse_qcir("exists(1)\noutput(1)\n").is_err());
        assert!(matches!(
            parse_qcir("#QCIR-G14\nexists(1)\noutput(2)\n"),
            Err(SolveError::Parse { line: 3, .. })
        ));
        assert!(matches!(
            parse_qcir("#QCIR-G14\nforall(1)\nexists(2)\noutput(2)\n"),
            Err(SolveError::Unsupported(_))
        ));
    }
}
