use std::collections::HashMap;

use crate::error::{Error, Result};

use super::expr::{div_apply, pow_apply, Expr, Func, Node};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Op {
    Const(u64),
    Var(usize),
    Neg(u32),
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    Pow(u32, u64),
    Func(Func, u32),
}

/// A batch of expressions compiled into a straight-line program.
///
/// Structurally identical subterms are evaluated once, which matters for the
/// derived fields (mean curvature normals, eigenvalue fields and their
/// derivatives) whose trees repeat the same metric derivatives many times.
#[derive(Clone, Debug)]
pub struct Tape {
    ops: Vec<Op>,
    // Source node per instruction, kept for domain-error messages.
    sources: Vec<Expr>,
    outputs: Vec<u32>,
    n_vars: usize,
}

struct Builder {
    ops: Vec<Op>,
    sources: Vec<Expr>,
    interned: HashMap<Op, u32>,
    by_ptr: HashMap<usize, u32>,
    n_vars: usize,
}

impl Builder {
    fn push(&mut self, op: Op, src: &Expr) -> u32 {
        if let Some(&slot) = self.interned.get(&op) {
            return slot;
        }
        let slot = self.ops.len() as u32;
        self.ops.push(op);
        self.sources.push(src.clone());
        self.interned.insert(op, slot);
        slot
    }

    fn visit(&mut self, e: &Expr) -> u32 {
        if let Some(&slot) = self.by_ptr.get(&e.ptr_id()) {
            return slot;
        }
        // Iterative post-order walk: derived expressions can be deep.
        let mut stack: Vec<(Expr, bool)> = vec![(e.clone(), false)];
        while let Some((node, expanded)) = stack.pop() {
            if self.by_ptr.contains_key(&node.ptr_id()) {
                continue;
            }
            if !expanded {
                stack.push((node.clone(), true));
                match node.node() {
                    Node::Const(_) | Node::Var(_) => {}
                    Node::Neg(a) | Node::Pow(a, _) | Node::Func(_, a) => stack.push((a.clone(), false)),
                    Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                        stack.push((b.clone(), false));
                        stack.push((a.clone(), false));
                    }
                }
                continue;
            }
            let s = |b: &Builder, x: &Expr| b.by_ptr[&x.ptr_id()];
            let op = match node.node() {
                Node::Const(c) => Op::Const(c.to_bits()),
                Node::Var(i) => {
                    self.n_vars = self.n_vars.max(i + 1);
                    Op::Var(*i)
                }
                Node::Neg(a) => Op::Neg(s(self, a)),
                Node::Add(a, b) => {
                    let (x, y) = (s(self, a), s(self, b));
                    Op::Add(x.min(y), x.max(y))
                }
                Node::Sub(a, b) => Op::Sub(s(self, a), s(self, b)),
                Node::Mul(a, b) => {
                    let (x, y) = (s(self, a), s(self, b));
                    Op::Mul(x.min(y), x.max(y))
                }
                Node::Div(a, b) => Op::Div(s(self, a), s(self, b)),
                Node::Pow(a, p) => Op::Pow(s(self, a), p.to_bits()),
                Node::Func(f, a) => Op::Func(*f, s(self, a)),
            };
            let slot = self.push(op, &node);
            self.by_ptr.insert(node.ptr_id(), slot);
        }
        self.by_ptr[&e.ptr_id()]
    }
}

impl Tape {
    pub fn compile(exprs: &[Expr]) -> Tape {
        let mut b = Builder {
            ops: Vec::new(),
            sources: Vec::new(),
            interned: HashMap::new(),
            by_ptr: HashMap::new(),
            n_vars: 0,
        };
        let outputs = exprs.iter().map(|e| b.visit(e)).collect();
        Tape {
            ops: b.ops,
            sources: b.sources,
            outputs,
            n_vars: b.n_vars,
        }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    /// Evaluates every output at `p`.
    pub fn eval(&self, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() < self.n_vars {
            return Err(Error::Dimension(format!(
                "expression uses {} coordinates but point has {}",
                self.n_vars,
                p.len()
            )));
        }
        let mut slots = vec![0.0; self.ops.len()];
        for (k, op) in self.ops.iter().enumerate() {
            let v = |i: &u32| slots[*i as usize];
            let r = match op {
                Op::Const(bits) => Ok(f64::from_bits(*bits)),
                Op::Var(i) => Ok(p[*i]),
                Op::Neg(a) => Ok(-v(a)),
                Op::Add(a, b) => Ok(v(a) + v(b)),
                Op::Sub(a, b) => Ok(v(a) - v(b)),
                Op::Mul(a, b) => Ok(v(a) * v(b)),
                Op::Div(a, b) => div_apply(v(a), v(b)),
                Op::Pow(a, e) => pow_apply(v(a), f64::from_bits(*e)),
                Op::Func(f, a) => f.apply(v(a)),
            };
            slots[k] = r.map_err(|reason| Error::Domain {
                reason,
                subexpr: self.sources[k].to_string(),
            })?;
        }
        Ok(self.outputs.iter().map(|&o| slots[o as usize]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shares_structurally_equal_subterms() {
        let x = Expr::var(0);
        let a = x.clone().sin() * x.clone().cos();
        let b = x.clone().cos() * x.clone().sin();
        let tape = Tape::compile(&[a.clone(), b]);
        // var, sin, cos, mul
        assert_eq!(tape.len(), 4);
        let out = tape.eval(&[0.3]).unwrap();
        assert_eq!(out[0], out[1]);
        assert_eq!(out[0], a.eval(&[0.3]).unwrap());
    }

    #[test]
    fn reports_domain_errors() {
        let e = (Expr::var(0) - 1.0).ln();
        let tape = Tape::compile(&[e]);
        assert!(matches!(tape.eval(&[1.0]), Err(Error::Domain { .. })));
        assert!(tape.eval(&[2.0]).is_ok());
    }
}
