//! Hash-consed boolean circuits and closed 2-QBF problems over them.

use std::collections::HashMap;
use std::ops::Not;

/// A possibly negated reference to a circuit node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit(u32);

impl Lit {
    pub const TRUE: Lit = Lit(0);
    pub const FALSE: Lit = Lit(1);

    fn new(node: usize, negated: bool) -> Self {
        Lit(((node as u32) << 1) | negated as u32)
    }

    pub fn node(self) -> usize {
        (self.0 >> 1) as usize
    }

    pub fn is_negated(self) -> bool {
        self.0 & 1 == 1
    }

    pub fn positive(self) -> Lit {
        Lit(self.0 & !1)
    }

    pub fn is_const(self) -> bool {
        self.node() == 0
    }
}

impl Not for Lit {
    type Output = Lit;

    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Gate {
    True,
    /// Input variable, numbered from 0.
    Var(u32),
    And(Vec<Lit>),
    Or(Vec<Lit>),
    Xor(Lit, Lit),
}

/// A DAG of gates. Children always precede their parents, so node order is a
/// topological order.
#[derive(Debug, Clone)]
pub struct Circuit {
    nodes: Vec<Gate>,
    index: HashMap<Gate, usize>,
    vars: HashMap<u32, usize>,
}

impl Default for Circuit {
    fn default() -> Self {
        Self::new()
    }
}

impl Circuit {
    pub fn new() -> Self {
        let mut index = HashMap::new();
        index.insert(Gate::True, 0);
        Self {
            nodes: vec![Gate::True],
            index,
            vars: HashMap::new(),
        }
    }

    pub fn nodes(&self) -> &[Gate] {
        &self.nodes
    }

    pub fn gate(&self, lit: Lit) -> &Gate {
        &self.nodes[lit.node()]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() == 1
    }

    fn intern(&mut self, gate: Gate) -> usize {
        if let Some(&i) = self.index.get(&gate) {
            return i;
        }
        let i = self.nodes.len();
        self.nodes.push(gate.clone());
        self.index.insert(gate, i);
        i
    }

    pub fn var(&mut self, v: u32) -> Lit {
        if let Some(&i) = self.vars.get(&v) {
            return Lit::new(i, false);
        }
        let i = self.intern(Gate::Var(v));
        self.vars.insert(v, i);
        Lit::new(i, false)
    }

    pub fn and(&mut self, lits: impl IntoIterator<Item = Lit>) -> Lit {
        match normalize(lits, Lit::TRUE) {
            None => Lit::FALSE,
            Some(v) if v.is_empty() => Lit::TRUE,
            Some(v) if v.len() == 1 => v[0],
            Some(v) => Lit::new(self.intern(Gate::And(v)), false),
        }
    }

    pub fn or(&mut self, lits: impl IntoIterator<Item = Lit>) -> Lit {
        match normalize(lits, Lit::FALSE) {
            None => Lit::TRUE,
            Some(v) if v.is_empty() => Lit::FALSE,
            Some(v) if v.len() == 1 => v[0],
            Some(v) => Lit::new(self.intern(Gate::Or(v)), false),
        }
    }

    pub fn xor(&mut self, a: Lit, b: Lit) -> Lit {
        let flip = a.is_negated() ^ b.is_negated();
        let (a, b) = (a.positive(), b.positive());
        let out = if a == b {
            Lit::FALSE
        } else if a.is_const() {
            // a is TRUE
            !b
        } else if b.is_const() {
            !a
        } else {
            let (x, y) = if a < b { (a, b) } else { (b, a) };
            Lit::new(self.intern(Gate::Xor(x, y)), false)
        };
        if flip {
            !out
        } else {
            out
        }
    }

    pub fn iff(&mut self, a: Lit, b: Lit) -> Lit {
        !self.xor(a, b)
    }

    pub fn implies(&mut self, a: Lit, b: Lit) -> Lit {
        self.or([!a, b])
    }

    /// Evaluates `out` under a total assignment indexed by variable number.
    pub fn eval(&self, out: Lit, assignment: &[bool]) -> bool {
        let values = self.eval_all(Some(out.node()), |v| Some(assignment[v as usize]));
        values[out.node()].expect("total assignment") ^ out.is_negated()
    }

    /// Three-valued evaluation under a partial assignment.
    pub fn eval_partial(&self, out: Lit, assignment: &[Option<bool>]) -> Option<bool> {
        let values = self.eval_all(Some(out.node()), |v| assignment[v as usize]);
        values[out.node()].map(|b| b ^ out.is_negated())
    }

    fn eval_all(
        &self,
        upto: Option<usize>,
        input: impl Fn(u32) -> Option<bool>,
    ) -> Vec<Option<bool>> {
        let end = upto.map_or(self.nodes.len(), |n| n + 1);
        let mut val: Vec<Option<bool>> = Vec::with_capacity(end);
        let lit = |val: &[Option<bool>], l: Lit| val[l.node()].map(|b| b ^ l.is_negated());
        for g in &self.nodes[..end] {
            let v = match g {
                Gate::True => Some(true),
                Gate::Var(x) => input(*x),
                Gate::And(ls) => {
                    let mut res = Some(true);
                    for &l in ls {
                        match lit(&val, l) {
                            Some(false) => {
                                res = Some(false);
                                break;
                            }
                            None => res = None,
                            Some(true) => {}
                        }
                    }
                    res
                }
                Gate::Or(ls) => {
                    let mut res = Some(false);
                    for &l in ls {
                        match lit(&val, l) {
                            Some(true) => {
                                res = Some(true);
                                break;
                            }
                            None => res = None,
                            Some(false) => {}
                        }
                    }
                    res
                }
                Gate::Xor(a, b) => match (lit(&val, *a), lit(&val, *b)) {
                    (Some(x), Some(y)) => Some(x ^ y),
                    _ => None,
                },
            };
            val.push(v);
        }
        val
    }

    /// Rebuilds `out` with some variables fixed to constants, simplifying on
    /// the way. Variables without a value are kept.
    pub fn substitute(&mut self, out: Lit, values: &HashMap<u32, bool>) -> Lit {
        let mut map: Vec<Lit> = Vec::with_capacity(out.node() + 1);
        for i in 0..=out.node() {
            let g = self.nodes[i].clone();
            let m = |map: &[Lit], l: Lit| {
                let r = map[l.node()];
                if l.is_negated() {
                    !r
                } else {
                    r
                }
            };
            let new = match g {
                Gate::True => Lit::TRUE,
                Gate::Var(v) => match values.get(&v) {
                    Some(true) => Lit::TRUE,
                    Some(false) => Lit::FALSE,
                    None => Lit::new(i, false),
                },
                Gate::And(ls) => {
                    let ls: Vec<Lit> = ls.iter().map(|&l| m(&map, l)).collect();
                    self.and(ls)
                }
                Gate::Or(ls) => {
                    let ls: Vec<Lit> = ls.iter().map(|&l| m(&map, l)).collect();
                    self.or(ls)
                }
                Gate::Xor(a, b) => {
                    let (a, b) = (m(&map, a), m(&map, b));
                    self.xor(a, b)
                }
            };
            map.push(new);
        }
        let r = map[out.node()];
        if out.is_negated() {
            !r
        } else {
            r
        }
    }

    /// Variables reachable from `out`, sorted.
    pub fn support(&self, out: Lit) -> Vec<u32> {
        let mut seen = vec![false; out.node() + 1];
        let mut stack = vec![out.node()];
        let mut vars = Vec::new();
        while let Some(i) = stack.pop() {
            if seen[i] {
                continue;
            }
            seen[i] = true;
            match &self.nodes[i] {
                Gate::True => {}
                Gate::Var(v) => vars.push(*v),
                Gate::And(ls) | Gate::Or(ls) => stack.extend(ls.iter().map(|l| l.node())),
                Gate::Xor(a, b) => {
                    stack.push(a.node());
                    stack.push(b.node());
                }
            }
        }
        vars.sort_unstable();
        vars
    }

    /// Internal gates reachable from `out` in topological order.
    pub fn cone(&self, out: Lit) -> Vec<usize> {
        let mut seen = vec![false; out.node() + 1];
        seen[out.node()] = true;
        for i in (0..=out.node()).rev() {
            if !seen[i] {
                continue;
            }
            match &self.nodes[i] {
                Gate::And(ls) | Gate::Or(ls) => ls.iter().for_each(|l| seen[l.node()] = true),
                Gate::Xor(a, b) => {
                    seen[a.node()] = true;
                    seen[b.node()] = true;
                }
                _ => {}
            }
        }
        (0..=out.node())
            .filter(|&i| seen[i] && matches!(self.nodes[i], Gate::And(_) | Gate::Or(_) | Gate::Xor(..)))
            .collect()
    }
}

/// Drops the neutral element and duplicates; `None` when the absorbing
/// element or a complementary pair shows up.
fn normalize(lits: impl IntoIterator<Item = Lit>, neutral: Lit) -> Option<Vec<Lit>> {
    let mut v: Vec<Lit> = Vec::new();
    for l in lits {
        if l == neutral {
            continue;
        }
        if l == !neutral {
            return None;
        }
        v.push(l);
    }
    v.sort_unstable();
    v.dedup();
    if v.windows(2).any(|w| w[0] == !w[1]) {
        return None;
    }
    Some(v)
}

/// `∃ exists ∀ forall : output`, over variables `0..num_vars`.
#[derive(Debug, Clone)]
pub struct Qbf {
    pub num_vars: u32,
    pub exists: Vec<u32>,
    pub forall: Vec<u32>,
    pub circuit: Circuit,
    pub output: Lit,
}

impl Qbf {
    /// A copy whose output additionally requires the given literals.
    pub fn with_units(&self, units: &[(u32, bool)]) -> Qbf {
        let mut q = self.clone();
        let mut lits = vec![q.output];
        for &(v, val) in units {
            let l = q.circuit.var(v);
            lits.push(if val { l } else { !l });
        }
        q.output = q.circuit.and(lits);
        q
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_simplify() {
        let mut c = Circuit::new();
        let x = c.var(0);
        assert_eq!(c.and([]), Lit::TRUE);
        assert_eq!(c.or([]), Lit::FALSE);
        assert_eq!(c.and([x, Lit::TRUE]), x);
        assert_eq!(c.and([x, Lit::FALSE]), Lit::FALSE);
        assert_eq!(c.and([x, !x]), Lit::FALSE);
        assert_eq!(c.or([x, !x]), Lit::TRUE);
        assert_eq!(c.or([x, x]), x);
        assert_eq!(c.xor(x, x), Lit::FALSE);
        assert_eq!(c.iff(x, x), Lit::TRUE);
        assert_eq!(c.xor(x, Lit::TRUE), !x);
    }

    #[test]
    fn hash_consing_shares_gates() {
        let mut c = Circuit::new();
        let x = c.var(0);
        let y = c.var(1);
        let a = c.and([x, y]);
        let b = c.and([y, x]);
        assert_eq!(a, b);
        assert_eq!(c.xor(!x, y), !c.xor(x, y));
    }

    #[test]
    fn evaluation() {
        let mut c = Circuit::new();
        let x = c.var(0);
        let y = c.var(1);
        let f = c.implies(x, y);
        assert!(c.eval(f, &[false, false]));
        assert!(!c.eval(f, &[true, false]));
        assert_eq!(c.eval_partial(f, &[Some(false), None]), Some(true));
        assert_eq!(c.eval_partial(f, &[Some(true), None]), None);
        let g = c.substitute(f, &HashMap::from([(0, true)]));
        assert_eq!(g, y);
    }
}
