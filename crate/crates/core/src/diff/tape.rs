use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use crate::math;
use crate::{Error, Result};

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed)
}

/// Handle to a node on a [`Tape`]. Only valid for the tape that created it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    tape: u64,
    idx: u32,
    len: u32,
}

impl Var {
    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_scalar(&self) -> bool {
        self.len == 1
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Input,
    Constant,
    /// Primal value only; contributes no partials (stop-gradient).
    Detached,
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    Neg(u32),
    Scale(u32, f64),
    Shift(u32),
    Ln(u32),
    Exp(u32),
    Softplus(u32, f64),
    MaxConst(u32, f64),
    Tanh(u32),
    Sum(u32),
    Mean(u32),
    StdDev(u32),
    Dot(u32, u32),
    /// Row-major `rows × (len / rows)` matrix times vector.
    MatVec(u32, u32, u32),
    Softmax(u32),
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Vec<f64>,
    needs_grad: bool,
}

/// Append-only computation record. Single-threaded; use one tape per
/// concurrent evaluation.
#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: fresh_id(),
            nodes: Vec::new(),
        }
    }

    /// Drops all nodes, keeping the allocation. Handles issued before the
    /// reset become invalid.
    pub fn reset(&mut self) {
        self.nodes.clear();
        self.id = fresh_id();
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Vec<f64>, needs_grad: bool) -> Var {
        let idx = self.nodes.len() as u32;
        let len = value.len() as u32;
        self.nodes.push(Node {
            op,
            value,
            needs_grad,
        });
        Var {
            tape: self.id,
            idx,
            len,
        }
    }

    fn check(&self, v: Var) -> Result<&Node> {
        if v.tape != self.id {
            return Err(Error::TapeMismatch);
        }
        self.nodes.get(v.idx as usize).ok_or(Error::TapeMismatch)
    }

    /// Differentiable leaf.
    pub fn input(&mut self, values: &[f64]) -> Var {
        self.push(Op::Input, values.to_vec(), true)
    }

    pub fn constant(&mut self, values: &[f64]) -> Var {
        self.push(Op::Constant, values.to_vec(), false)
    }

    /// Constant whose value was computed from other nodes but which must
    /// not carry gradient back to them.
    pub fn detached(&mut self, values: &[f64]) -> Var {
        self.push(Op::Detached, values.to_vec(), false)
    }

    /// `k`-th smallest element (zero-based) of `v`, recorded as a detached
    /// scalar.
    pub fn detached_order_statistic(&mut self, v: Var, k: usize) -> Result<Var> {
        let node = self.check(v)?;
        if k >= node.value.len() {
            return Err(Error::shape(format!(
                "order statistic {k} of a length-{} vector",
                node.value.len()
            )));
        }
        let mut sorted = node.value.clone();
        sorted.sort_by(f64::total_cmp);
        Ok(self.detached(&[sorted[k]]))
    }

    pub fn value(&self, v: Var) -> Result<&[f64]> {
        Ok(&self.check(v)?.value)
    }

    pub fn scalar(&self, v: Var) -> Result<f64> {
        let node = self.check(v)?;
        match node.value.as_slice() {
            [x] => Ok(*x),
            other => Err(Error::shape(format!(
                "expected a scalar, got length {}",
                other.len()
            ))),
        }
    }

    fn unary(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Result<Var> {
        let node = self.check(a)?;
        let value = node.value.iter().map(|&x| f(x)).collect();
        let needs_grad = node.needs_grad;
        Ok(self.push(op, value, needs_grad))
    }

    fn binary(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        let (na, nb) = (self.check(a)?, self.check(b)?);
        let (la, lb) = (na.value.len(), nb.value.len());
        let value: Vec<f64> = if la == lb {
            na.value.iter().zip(&nb.value).map(|(&x, &y)| f(x, y)).collect()
        } else if lb == 1 {
            na.value.iter().map(|&x| f(x, nb.value[0])).collect()
        } else if la == 1 {
            nb.value.iter().map(|&y| f(na.value[0], y)).collect()
        } else {
            return Err(Error::shape(format!(
                "cannot broadcast lengths {la} and {lb}"
            )));
        };
        let needs_grad = na.needs_grad || nb.needs_grad;
        Ok(self.push(op, value, needs_grad))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Add(a.idx, b.idx), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Sub(a.idx, b.idx), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Mul(a.idx, b.idx), |x, y| x * y)
    }

    /// Elementwise division; a zero or non-finite denominator is a domain
    /// error (callers add an epsilon floor first).
    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        if let Some(d) = self
            .check(b)?
            .value
            .iter()
            .find(|d| **d == 0.0 || !d.is_finite())
        {
            return Err(Error::Domain(format!("division by {d}")));
        }
        self.binary(a, b, Op::Div(a.idx, b.idx), |x, y| x / y)
    }

    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Neg(a.idx), |x| -x)
    }

    /// Multiplication by a constant.
    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        self.unary(a, Op::Scale(a.idx, c), |x| c * x)
    }

    /// Addition of a constant.
    pub fn shift(&mut self, a: Var, c: f64) -> Result<Var> {
        self.unary(a, Op::Shift(a.idx), |x| x + c)
    }

    /// Natural logarithm; requires strictly positive finite arguments.
    pub fn ln(&mut self, a: Var) -> Result<Var> {
        if let Some(x) = self
            .check(a)?
            .value
            .iter()
            .find(|x| !(**x > 0.0 && x.is_finite()))
        {
            return Err(Error::Domain(format!("log of {x}")));
        }
        self.unary(a, Op::Ln(a.idx), math::ln)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Exp(a.idx), math::exp)
    }

    /// `(1/β)·ln(1 + e^{βx})`.
    pub fn softplus(&mut self, a: Var, beta: f64) -> Result<Var> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Domain(format!("softplus sharpness {beta}")));
        }
        self.unary(a, Op::Softplus(a.idx, beta), |x| math::softplus(x, beta))
    }

    /// `max(x, c)`; the partial is 1 where `x > c`, else 0.
    pub fn max_const(&mut self, a: Var, c: f64) -> Result<Var> {
        self.unary(a, Op::MaxConst(a.idx, c), |x| x.max(c))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Tanh(a.idx), math::tanh)
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let node = self.check(a)?;
        let s = node.value.iter().sum();
        let needs_grad = node.needs_grad;
        Ok(self.push(Op::Sum(a.idx), vec![s], needs_grad))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let node = self.check(a)?;
        if node.value.is_empty() {
            return Err(Error::shape("mean of an empty vector"));
        }
        let m = math::mean(&node.value);
        let needs_grad = node.needs_grad;
        Ok(self.push(Op::Mean(a.idx), vec![m], needs_grad))
    }

    /// Population standard deviation `sqrt((1/T)·Σ(x − x̄)²)`; needs T ≥ 2.
    pub fn stddev(&mut self, a: Var) -> Result<Var> {
        let node = self.check(a)?;
        if node.value.len() < 2 {
            return Err(Error::shape(format!(
                "standard deviation needs at least 2 values, got {}",
                node.value.len()
            )));
        }
        let s = math::pop_std(&node.value);
        let needs_grad = node.needs_grad;
        Ok(self.push(Op::StdDev(a.idx), vec![s], needs_grad))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (na, nb) = (self.check(a)?, self.check(b)?);
        if na.value.len() != nb.value.len() {
            return Err(Error::shape(format!(
                "dot of lengths {} and {}",
                na.value.len(),
                nb.value.len()
            )));
        }
        let d = na.value.iter().zip(&nb.value).map(|(x, y)| x * y).sum();
        let needs_grad = na.needs_grad || nb.needs_grad;
        Ok(self.push(Op::Dot(a.idx, b.idx), vec![d], needs_grad))
    }

    /// `M·x` for a row-major `rows × x.len()` matrix `m`.
    pub fn matvec(&mut self, m: Var, x: Var, rows: usize) -> Result<Var> {
        let (nm, nx) = (self.check(m)?, self.check(x)?);
        let cols = nx.value.len();
        if rows == 0 || nm.value.len() != rows * cols {
            return Err(Error::shape(format!(
                "matrix of {} values is not {rows} x {cols}",
                nm.value.len()
            )));
        }
        let value = nm
            .value
            .chunks_exact(cols)
            .map(|row| row.iter().zip(&nx.value).map(|(a, b)| a * b).sum())
            .collect();
        let needs_grad = nm.needs_grad || nx.needs_grad;
        Ok(self.push(Op::MatVec(m.idx, x.idx, rows as u32), value, needs_grad))
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let node = self.check(a)?;
        if node.value.is_empty() {
            return Err(Error::shape("softmax of an empty vector"));
        }
        let max = node.value.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut value: Vec<f64> = node.value.iter().map(|x| math::exp(x - max)).collect();
        let total: f64 = value.iter().sum();
        value.iter_mut().for_each(|v| *v /= total);
        let needs_grad = node.needs_grad;
        Ok(self.push(Op::Softmax(a.idx), value, needs_grad))
    }

    /// Partials of the scalar `output` with respect to each of `inputs`.
    /// Inputs that `output` does not depend on get exact zeros.
    pub fn gradient(&self, output: Var, inputs: &[Var]) -> Result<Vec<Vec<f64>>> {
        self.check(output)?;
        if output.len != 1 {
            return Err(Error::shape(format!(
                "gradient of a non-scalar output (length {})",
                output.len
            )));
        }
        for v in inputs {
            self.check(*v)?;
        }
        let end = output.idx as usize;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; end + 1];
        grads[end] = Some(vec![1.0]);
        for i in (0..=end).rev() {
            let Some(g) = grads[i].take() else { continue };
            if self.nodes[i].needs_grad {
                self.backprop(i, &g, &mut grads);
            }
            grads[i] = Some(g);
        }
        Ok(inputs
            .iter()
            .map(|v| {
                grads
                    .get(v.idx as usize)
                    .and_then(|g| g.clone())
                    .unwrap_or_else(|| vec![0.0; v.len()])
            })
            .collect())
    }

    fn backprop(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let y = &node.value;
        match node.op {
            Op::Input | Op::Constant | Op::Detached => {}
            Op::Add(a, b) => {
                self.accumulate(grads, a, g, |_, gi| gi);
                self.accumulate(grads, b, g, |_, gi| gi);
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, a, g, |_, gi| gi);
                self.accumulate(grads, b, g, |_, gi| -gi);
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.val(a), self.val(b));
                self.accumulate(grads, a, g, |k, gi| gi * at(vb, k));
                self.accumulate(grads, b, g, |k, gi| gi * at(va, k));
            }
            Op::Div(a, b) => {
                let (va, vb) = (self.val(a), self.val(b));
                self.accumulate(grads, a, g, |k, gi| gi / at(vb, k));
                self.accumulate(grads, b, g, |k, gi| {
                    let d = at(vb, k);
                    -gi * at(va, k) / (d * d)
                });
            }
            Op::Neg(a) => self.accumulate(grads, a, g, |_, gi| -gi),
            Op::Scale(a, c) => self.accumulate(grads, a, g, |_, gi| c * gi),
            Op::Shift(a) => self.accumulate(grads, a, g, |_, gi| gi),
            Op::Ln(a) => {
                let va = self.val(a);
                self.accumulate(grads, a, g, |k, gi| gi / va[k]);
            }
            Op::Exp(a) => self.accumulate(grads, a, g, |k, gi| gi * y[k]),
            Op::Softplus(a, beta) => {
                let va = self.val(a);
                self.accumulate(grads, a, g, |k, gi| gi * math::sigmoid(beta * va[k]));
            }
            Op::MaxConst(a, c) => {
                let va = self.val(a);
                self.accumulate(grads, a, g, |k, gi| if va[k] > c { gi } else { 0.0 });
            }
            Op::Tanh(a) => self.accumulate(grads, a, g, |k, gi| gi * (1.0 - y[k] * y[k])),
            Op::Sum(a) => self.accumulate(grads, a, g, |_, gi| gi),
            Op::Mean(a) => {
                let n = self.val(a).len() as f64;
                self.accumulate(grads, a, g, |_, gi| gi / n);
            }
            Op::StdDev(a) => {
                let va = self.val(a);
                let n = va.len() as f64;
                let (m, s) = (math::mean(va), y[0]);
                self.accumulate(grads, a, g, |k, gi| {
                    if s > 0.0 {
                        gi * (va[k] - m) / (n * s)
                    } else {
                        0.0
                    }
                });
            }
            Op::Dot(a, b) => {
                let (va, vb) = (self.val(a), self.val(b));
                self.accumulate(grads, a, g, |k, gi| gi * vb[k]);
                self.accumulate(grads, b, g, |k, gi| gi * va[k]);
            }
            Op::MatVec(m, x, rows) => {
                let (vm, vx) = (self.val(m), self.val(x));
                let cols = vx.len();
                if self.nodes[m as usize].needs_grad {
                    let gm = slot(grads, m, vm.len());
                    for (r, gr) in g.iter().enumerate().take(rows as usize) {
                        if *gr != 0.0 {
                            for (d, xj) in gm[r * cols..(r + 1) * cols].iter_mut().zip(vx) {
                                *d += gr * xj;
                            }
                        }
                    }
                }
                if self.nodes[x as usize].needs_grad {
                    let gx = slot(grads, x, cols);
                    for (row, gr) in vm.chunks_exact(cols).zip(g) {
                        for (d, mij) in gx.iter_mut().zip(row) {
                            *d += gr * mij;
                        }
                    }
                }
            }
            Op::Softmax(a) => {
                let gy: f64 = g.iter().zip(y).map(|(gi, yi)| gi * yi).sum();
                self.accumulate(grads, a, g, |k, gi| y[k] * (gi - gy));
            }
        }
    }

    fn val(&self, idx: u32) -> &[f64] {
        &self.nodes[idx as usize].value
    }

    /// Adds `local(k, g_k)` into the parent's gradient for every output
    /// element `k`, summing when the parent was broadcast from a scalar and
    /// spreading when the child is a reduction.
    fn accumulate(
        &self,
        grads: &mut [Option<Vec<f64>>],
        parent: u32,
        g: &[f64],
        local: impl Fn(usize, f64) -> f64,
    ) {
        let p = &self.nodes[parent as usize];
        if !p.needs_grad {
            return;
        }
        let plen = p.value.len();
        let gp = slot(grads, parent, plen);
        if plen == g.len() {
            for (k, (d, gk)) in gp.iter_mut().zip(g).enumerate() {
                *d += local(k, *gk);
            }
        } else if g.len() == 1 {
            // reduction: scalar child of a vector parent
            for (k, d) in gp.iter_mut().enumerate() {
                *d += local(k, g[0]);
            }
        } else {
            // scalar parent broadcast against a vector child
            let total: f64 = g.iter().enumerate().map(|(k, gk)| local(k, *gk)).sum();
            gp[0] += total;
        }
    }
}

fn slot(grads: &mut [Option<Vec<f64>>], idx: u32, len: usize) -> &mut Vec<f64> {
    grads[idx as usize].get_or_insert_with(|| vec![0.0; len])
}

#[inline]
fn at(v: &[f64], k: usize) -> f64 {
    if v.len() == 1 {
        v[0]
    } else {
        v[k]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::{compare_gradients, finite_difference_gradient};

    #[test]
    fn primal_examples() {
        let mut t = Tape::new();
        let z = t.constant(&[0.0]);
        let sp = t.softplus(z, 1.0).unwrap();
        assert!((t.scalar(sp).unwrap() - core::f64::consts::LN_2).abs() < 1e-15);

        let v = t.constant(&[1.0, 2.0, 3.0]);
        let m = t.mean(v).unwrap();
        assert_eq!(t.scalar(m).unwrap(), 2.0);

        let c = t.constant(&[1.0, 1.0, 1.0]);
        let s = t.stddev(c).unwrap();
        assert_eq!(t.scalar(s).unwrap(), 0.0);

        let pm = t.constant(&[0.01, -0.01]);
        let s = t.stddev(pm).unwrap();
        assert!((t.scalar(s).unwrap() - 0.01).abs() < 1e-17);
    }

    #[test]
    fn linear_and_polynomial_gradients() {
        let mut t = Tape::new();
        let w = t.input(&[0.3, -1.2, 4.0]);
        let c = t.constant(&[2.0, -5.0, 0.5]);
        let d = t.dot(w, c).unwrap();
        assert_eq!(t.gradient(d, &[w]).unwrap()[0], vec![2.0, -5.0, 0.5]);

        let mut t = Tape::new();
        let w = t.input(&[1.0, 2.0]);
        let sq = t.mul(w, w).unwrap();
        let y = t.sum(sq).unwrap();
        assert_eq!(t.gradient(y, &[w]).unwrap()[0], vec![2.0, 4.0]);
    }

    #[test]
    fn stddev_gradient_matches_hand_value() {
        let mut t = Tape::new();
        let x = t.input(&[1.0, 3.0]);
        let s = t.stddev(x).unwrap();
        let g = t.gradient(s, &[x]).unwrap();
        assert!((g[0][0] + 0.5).abs() < 1e-15 && (g[0][1] - 0.5).abs() < 1e-15);
        let fd = finite_difference_gradient(
            |v| Ok(crate::math::pop_std(v)),
            &[1.0, 3.0],
            1e-5,
        )
        .unwrap();
        assert!(compare_gradients(&g[0], &fd).passes(1e-5, 1e-8));
    }

    #[test]
    fn unrelated_inputs_get_zero() {
        let mut t = Tape::new();
        let a = t.input(&[1.0]);
        let b = t.input(&[2.0, 3.0]);
        let y = t.exp(a).unwrap();
        let g = t.gradient(y, &[a, b]).unwrap();
        assert_eq!(g[1], vec![0.0, 0.0]);
    }

    #[test]
    fn errors() {
        let mut t1 = Tape::new();
        let mut t2 = Tape::new();
        let a = t1.input(&[1.0]);
        let b = t2.input(&[1.0]);
        assert_eq!(t1.add(a, b), Err(Error::TapeMismatch));

        let v = t1.input(&[1.0, 2.0]);
        assert!(matches!(t1.gradient(v, &[v]), Err(Error::Shape(_))));
        let z = t1.constant(&[0.0]);
        assert!(matches!(t1.ln(z), Err(Error::Domain(_))));
        assert!(matches!(t1.div(a, z), Err(Error::Domain(_))));
        let one = t1.constant(&[1.0]);
        assert!(matches!(t1.stddev(one), Err(Error::Shape(_))));
        let three = t1.constant(&[1.0, 2.0, 3.0]);
        assert!(matches!(t1.add(v, three), Err(Error::Shape(_))));

        t1.reset();
        assert_eq!(t1.value(a), Err(Error::TapeMismatch));
    }

    #[test]
    fn detached_order_statistic_blocks_gradient() {
        let mut t = Tape::new();
        let x = t.input(&[0.3, -0.2, 0.9, 0.1]);
        let q = t.detached_order_statistic(x, 1).unwrap();
        assert_eq!(t.scalar(q).unwrap(), 0.1);
        let y = t.scale(q, 7.0).unwrap();
        assert_eq!(t.gradient(y, &[x]).unwrap()[0], vec![0.0; 4]);
    }

    #[test]
    fn composite_ops_match_finite_differences() {
        // exercises broadcast, div, softmax, tanh, matvec, max_const together
        let f = |x: &[f64], tape: &mut Tape| -> Result<(Var, Var)> {
            let v = tape.input(x);
            let m = tape.constant(&[0.5, -1.0, 2.0, 0.1, 0.3, -0.7, 1.1, 0.2, -0.4]);
            let mv = tape.matvec(m, v, 3)?;
            let th = tape.tanh(mv)?;
            let sm = tape.softmax(th)?;
            let mean = tape.mean(v)?;
            let centred = tape.sub(v, mean)?;
            let relu = tape.max_const(centred, -10.0)?;
            let den = tape.shift(sm, 1.0)?;
            let q = tape.div(relu, den)?;
            let e = tape.exp(q)?;
            let l = tape.ln(e)?;
            let sd = tape.stddev(l)?;
            let s = tape.sum(sm)?;
            let out = tape.mul(sd, s)?;
            let neg = tape.neg(out)?;
            Ok((v, neg))
        };
        let x = [0.4, -0.3, 0.8];
        let mut tape = Tape::new();
        let (v, out) = f(&x, &mut tape).unwrap();
        let g = tape.gradient(out, &[v]).unwrap().remove(0);
        let fd = finite_difference_gradient(
            |p| {
                let mut t = Tape::new();
                let (_, o) = f(p, &mut t)?;
                t.scalar(o)
            },
            &x,
            1e-5,
        )
        .unwrap();
        let cmp = compare_gradients(&g, &fd);
        assert!(cmp.passes(1e-5, 1e-8), "{cmp:?}");
    }

    #[test]
    fn matvec_gradient_wrt_matrix() {
        let mut t = Tape::new();
        let m = t.input(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let x = t.constant(&[0.5, -1.0, 2.0]);
        let y = t.matvec(m, x, 2).unwrap();
        let c = t.constant(&[1.0, 10.0]);
        let d = t.dot(y, c).unwrap();
        let g = t.gradient(d, &[m]).unwrap();
        assert_eq!(g[0], vec![0.5, -1.0, 2.0, 5.0, -10.0, 20.0]);
    }

    #[test]
    fn deterministic_replay() {
        let run = || {
            let mut t = Tape::new();
            let w = t.input(&[0.1, 0.7, 0.2]);
            let sm = t.softmax(w).unwrap();
            let sp = t.softplus(sm, 3.0).unwrap();
            let s = t.stddev(sp).unwrap();
            let v = t.scalar(s).unwrap();
            (v.to_bits(), t.gradient(s, &[w]).unwrap())
        };
        let (a, ga) = run();
        let (b, gb) = run();
        assert_eq!(a, b);
        let bits = |g: &Vec<Vec<f64>>| g[0].iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&ga), bits(&gb));
    }
}
