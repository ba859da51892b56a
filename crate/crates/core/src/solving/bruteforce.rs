use std::time::Instant;

use super::{SolveError, SolveResult, Status};
use crate::formula::Qbf;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BruteForceCaps {
    pub existential: usize,
    pub universal: usize,
}

impl Default for BruteForceCaps {
    fn default() -> Self {
        Self {
            existential: 22,
            universal: 24,
        }
    }
}

/// Exact evaluation by depth-first search over the prefix with three-valued
/// pruning. Existential values are tried `false` first, so the witness is the
/// lexicographically first one.
pub fn eval_bruteforce(q: &Qbf, caps: BruteForceCaps) -> Result<SolveResult, SolveError> {
    let start = Instant::now();
    if q.exists.len() > caps.existential {
        return Err(SolveError::TooManyVars {
            what: "existential block",
            count: q.exists.len(),
            cap: caps.existential,
        });
    }
    if q.forall.len() > caps.universal {
        return Err(SolveError::TooManyVars {
            what: "universal block",
            count: q.forall.len(),
            cap: caps.universal,
        });
    }
    let mut bound = vec![false; q.num_vars as usize];
    for &v in q.exists.iter().chain(&q.forall) {
        bound[v as usize] = true;
    }
    if let Some(v) = q.circuit.support(q.output).into_iter().find(|&v| !bound[v as usize]) {
        return Err(SolveError::Unsupported(format!("variable {} is not quantified", v + 1)));
    }
    let mut search = Search {
        q,
        values: vec![None; q.num_vars as usize],
    };
    let sat = search.exists(0);
    let mut result = SolveResult::new(
        if sat { Status::Sat } else { Status::Unsat },
        "bruteforce",
        start,
    );
    if sat {
        result.witness = Some(
            q.exists
                .iter()
                .map(|&v| search.values[v as usize].unwrap_or(false))
                .collect(),
        );
    }
    Ok(result)
}

struct Search<'a> {
    q: &'a Qbf,
    values: Vec<Option<bool>>,
}

impl Search<'_> {
    fn value(&self) -> Option<bool> {
        self.q.circuit.eval_partial(self.q.output, &self.values)
    }

    /// Leaves the witness in `values` on success.
    fn exists(&mut self, k: usize) -> bool {
        match self.value() {
            Some(false) => return false,
            Some(true) => return true,
            None => {}
        }
        if k == self.q.exists.len() {
            return self.forall(0);
        }
        let v = self.q.exists[k] as usize;
        for val in [false, true] {
            self.values[v] = Some(val);
            if self.exists(k + 1) {
                return true;
            }
        }
        self.values[v] = None;
        false
    }

    fn forall(&mut self, k: usize) -> bool {
        if let Some(b) = self.value() {
            return b;
        }
        let v = self.q.forall[k] as usize;
        let mut ok = true;
        for val in [false, true] {
            self.values[v] = Some(val);
            if !self.forall(k + 1) {
                ok = false;
                break;
            }
        }
        self.values[v] = None;
        ok
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{Circuit, Lit};

    fn qbf(build: impl FnOnce(&mut Circuit, Lit, Lit) -> Lit) -> Qbf {
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
    fn textbook_cases() {
        let caps = BruteForceCaps::default();
        let r = eval_bruteforce(&qbf(|c, x, y| c.or([x, y])), caps).unwrap();
        assert_eq!(r.status, Status::Sat);
        assert_eq!(r.witness, Some(vec![true]));
        let r = eval_bruteforce(&qbf(|c, x, y| c.and([x, y])), caps).unwrap();
        assert_eq!(r.status, Status::Unsat);
        let r = eval_bruteforce(&qbf(|_, _, _| Lit::TRUE), caps).unwrap();
        assert_eq!(r.witness, Some(vec![false]));
    }

    #[test]
    fn caps_are_enforced() {
        let caps = BruteForceCaps {
            existential: 0,
            universal: 24,
        };
        assert!(matches!(
            eval_bruteforce(&qbf(|c, x, y| c.or([x, y])), caps),
            Err(SolveError::TooManyVars { .. })
        ));
    }
}
