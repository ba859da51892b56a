//! Counterexample-guided solving of `∃x ∀y φ(x, y)`.
//!
//! One SAT solver proposes candidates for `x`; a second one looks for a `y`
//! falsifying `φ` under the candidate. Every counterexample `y*` adds the
//! residual `φ(x, y*)` to the first solver.

use std::collections::HashMap;
use std::time::Instant;

use varisat::{ExtendFormula, Lit as SatLit, Solver, Var};

use super::{SolveResult, Status};
use crate::formula::{Circuit, Gate, Lit, Qbf};

/// Tseitin definitions of circuit nodes inside one SAT solver.
pub(crate) struct Tseitin {
    nodes: HashMap<usize, SatLit>,
    vars: HashMap<u32, Var>,
    truth: Option<SatLit>,
}

impl Tseitin {
    pub(crate) fn new() -> Self {
        Self {
            nodes: HashMap::new(),
            vars: HashMap::new(),
            truth: None,
        }
    }

    pub(crate) fn var(&mut self, solver: &mut Solver<'_>, v: u32) -> Var {
        *self.vars.entry(v).or_insert_with(|| solver.new_var())
    }

    /// A solver literal equivalent to `lit`.
    pub(crate) fn lit(&mut self, solver: &mut Solver<'_>, c: &Circuit, lit: Lit) -> SatLit {
        let mut stack = vec![lit.node()];
        while let Some(&n) = stack.last() {
            if self.nodes.contains_key(&n) {
                stack.pop();
                continue;
            }
            let children: Vec<usize> = match &c.nodes()[n] {
                Gate::And(ls) | Gate::Or(ls) => ls.iter().map(|l| l.node()).collect(),
                Gate::Xor(a, b) => vec![a.node(), b.node()],
                _ => Vec::new(),
            };
            let missing: Vec<usize> = children
                .into_iter()
                .filter(|ch| !self.nodes.contains_key(ch))
                .collect();
            if !missing.is_empty() {
                stack.extend(missing);
                continue;
            }
            stack.pop();
            let g = self.define(solver, c, n);
            self.nodes.insert(n, g);
        }
        let g = self.nodes[&lit.node()];
        if lit.is_negated() {
            !g
        } else {
            g
        }
    }

    fn child(&self, l: Lit) -> SatLit {
        let g = self.nodes[&l.node()];
        if l.is_negated() {
            !g
        } else {
            g
        }
    }

    fn define(&mut self, solver: &mut Solver<'_>, c: &Circuit, n: usize) -> SatLit {
        match &c.nodes()[n] {
            Gate::True => *self.truth.get_or_insert_with(|| {
                let t = SatLit::positive(solver.new_var());
                solver.add_clause(&[t]);
                t
            }),
            Gate::Var(v) => SatLit::positive(self.var(solver, *v)),
            Gate::And(ls) => {
                let g = SatLit::positive(solver.new_var());
                let ins: Vec<SatLit> = ls.iter().map(|&l| self.child(l)).collect();
                let mut big = vec![g];
                for &a in &ins {
                    solver.add_clause(&[!g, a]);
                    big.push(!a);
                }
                solver.add_clause(&big);
                g
            }
            Gate::Or(ls) => {
                let g = SatLit::positive(solver.new_var());
                let ins: Vec<SatLit> = ls.iter().map(|&l| self.child(l)).collect();
                let mut big = vec![!g];
                for &a in &ins {
                    solver.add_clause(&[g, !a]);
                    big.push(a);
                }
                solver.add_clause(&big);
                g
            }
            Gate::Xor(a, b) => {
                let g = SatLit::positive(solver.new_var());
                let (a, b) = (self.child(*a), self.child(*b));
                solver.add_clause(&[!g, a, b]);
                solver.add_clause(&[!g, !a, !b]);
                solver.add_clause(&[g, !a, b]);
                solver.add_clause(&[g, a, !b]);
                g
            }
        }
    }
}

fn value_of(model: &[SatLit], v: Var) -> bool {
    model
        .get(v.index())
        .map(|l| {
            debug_assert_eq!(l.var(), v);
            l.is_positive()
        })
        .unwrap_or(false)
}

/// Decides `q` exactly; `Unknown` only when `deadline` passes.
pub fn solve_cegar(q: &Qbf, deadline: Option<Instant>) -> SolveResult {
    let start = Instant::now();
    let mut work = q.circuit.clone();

    // counterexample solver: ¬φ over x and y
    let mut checker = Solver::new();
    let mut check_map = Tseitin::new();
    let x_check: Vec<Var> = q
        .exists
        .iter()
        .map(|&v| check_map.var(&mut checker, v))
        .collect();
    let y_check: Vec<Var> = q
        .forall
        .iter()
        .map(|&v| check_map.var(&mut checker, v))
        .collect();
    let neg = check_map.lit(&mut checker, &q.circuit, !q.output);
    checker.add_clause(&[neg]);

    // candidate solver over x only
    let mut abstraction = Solver::new();
    let mut abs_map = Tseitin::new();
    let x_abs: Vec<Var> = q
        .exists
        .iter()
        .map(|&v| abs_map.var(&mut abstraction, v))
        .collect();

    let mut iterations = 0usize;
    loop {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            let mut r = SolveResult::new(Status::Unknown, "internal", start);
            r.diagnostics = format!("timeout after {iterations} refinements");
            return r;
        }
        iterations += 1;
        if !abstraction.solve().expect("sat solver failure") {
            return finish(Status::Unsat, None, start, iterations);
        }
        let model = abstraction.model().expect("model after SAT");
        let candidate: Vec<bool> = x_abs.iter().map(|&v| value_of(&model, v)).collect();

        let assumptions: Vec<SatLit> = x_check
            .iter()
            .zip(&candidate)
            .map(|(&v, &b)| SatLit::from_var(v, b))
            .collect();
        checker.assume(&assumptions);
        if !checker.solve().expect("sat solver failure") {
            return finish(Status::Sat, Some(candidate), start, iterations);
        }
        let cex = checker.model().expect("model after SAT");
        let values: HashMap<u32, bool> = q
            .forall
            .iter()
            .zip(&y_check)
            .map(|(&v, &var)| (v, value_of(&cex, var)))
            .collect();
        let residual = work.substitute(q.output, &values);
        if residual == Lit::FALSE {
            return finish(Status::Unsat, None, start, iterations);
        }
        let r = abs_map.lit(&mut abstraction, &work, residual);
        abstraction.add_clause(&[r]);
    }
}

fn finish(status: Status, witness: Option<Vec<bool>>, start: Instant, iterations: usize) -> SolveResult {
    let mut r = SolveResult::new(status, "internal", start);
    r.witness = witness;
    r.diagnostics = format!("{iterations} refinements");
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cases() {
        let mut c = Circuit::new();
        let x = c.var(0);
        let y = c.var(1);
        let or = c.or([x, y]);
        let and = c.and([x, y]);
        let xor = c.xor(x, y);
        let mk = |c: &Circuit, output| Qbf {
            num_vars: 2,
            exists: vec![0],
            forall: vec![1],
            circuit: c.clone(),
            output,
        };
        let r = solve_cegar(&mk(&c, or), None);
        assert_eq!(r.status, Status::Sat);
        assert_eq!(r.witness, Some(vec![true]));
        assert_eq!(solve_cegar(&mk(&c, and), None).status, Status::Unsat);
        assert_eq!(solve_cegar(&mk(&c, xor), None).status, Status::Unsat);
        assert_eq!(solve_cegar(&mk(&c, Lit::TRUE), None).status, Status::Sat);
        assert_eq!(solve_cegar(&mk(&c, Lit::FALSE), None).status, Status::Unsat);
    }
}
