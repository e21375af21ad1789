//! Minimal reverse-mode autodiff over `f64` vectors.
//!
//! The policy network is small (tens of thousands of parameters), so a
//! straightforward eager tape is plenty: each operation computes its value
//! when pushed, and `backward` walks the node list in reverse. Parameter
//! leaves remember their offset into the flat parameter vector so gradients
//! can be accumulated directly into an optimizer-shaped buffer.

use crate::F;

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Const,
    /// Leaf bound to `params[offset .. offset+len]`.
    Param { offset: usize },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// Sum of several equal-length nodes.
    AddN(Vec<Var>),
    Scale(Var, F),
    /// Elementwise multiply by a scalar node (length 1).
    MulScalar(Var, Var),
    /// Elementwise divide by a scalar node (length 1).
    DivScalar(Var, Var),
    MatVec { w: Var, x: Var, rows: usize, cols: usize },
    Tanh(Var),
    Exp(Var),
    Sqrt(Var),
    Softmax(Var),
    LogSoftmax(Var),
    /// Elementwise `x * ln x` with `0 ln 0 = 0`.
    XLnX(Var),
    Dot(Var, Var),
    Sum(Var),
    Mean(Var),
    /// Subtract the mean from every element (centering).
    SubMean(Var),
    Concat(Vec<Var>),
    Slice { a: Var, start: usize },
    /// Minimum of two scalars; gradient routes to the smaller side.
    Min2(Var, Var),
    /// Elementwise clamp with constant bounds.
    Clamp { a: Var, lo: F, hi: F },
}

struct Node {
    op: Op,
    val: Vec<F>,
}

/// Eager computation tape.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self { nodes: Vec::with_capacity(1024) }
    }

    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[F] {
        &self.nodes[v.0].val
    }

    pub fn scalar(&self, v: Var) -> F {
        debug_assert_eq!(self.nodes[v.0].val.len(), 1);
        self.nodes[v.0].val[0]
    }

    fn push(&mut self, op: Op, val: Vec<F>) -> Var {
        self.nodes.push(Node { op, val });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, data: &[F]) -> Var {
        self.push(Op::Const, data.to_vec())
    }

    pub fn constant_scalar(&mut self, x: F) -> Var {
        self.push(Op::Const, vec![x])
    }

    /// Leaf bound to a slice of the flat parameter vector.
    pub fn param(&mut self, params: &[F], offset: usize, len: usize) -> Var {
        self.push(Op::Param { offset }, params[offset..offset + len].to_vec())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let val = zip(&self.nodes[a.0].val, &self.nodes[b.0].val, |x, y| x + y);
        self.push(Op::Add(a, b), val)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let val = zip(&self.nodes[a.0].val, &self.nodes[b.0].val, |x, y| x - y);
        self.push(Op::Sub(a, b), val)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let val = zip(&self.nodes[a.0].val, &self.nodes[b.0].val, |x, y| x * y);
        self.push(Op::Mul(a, b), val)
    }

    pub fn add_n(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let mut val = self.nodes[parts[0].0].val.clone();
        for p in &parts[1..] {
            for (v, x) in val.iter_mut().zip(&self.nodes[p.0].val) {
                *v += x;
            }
        }
        self.push(Op::AddN(parts.to_vec()), val)
    }

    pub fn scale(&mut self, a: Var, c: F) -> Var {
        let val = self.nodes[a.0].val.iter().map(|x| x * c).collect();
        self.push(Op::Scale(a, c), val)
    }

    pub fn mul_scalar(&mut self, a: Var, s: Var) -> Var {
        let sv = self.scalar(s);
        let val = self.nodes[a.0].val.iter().map(|x| x * sv).collect();
        self.push(Op::MulScalar(a, s), val)
    }

    pub fn div_scalar(&mut self, a: Var, s: Var) -> Var {
        let sv = self.scalar(s);
        let val = self.nodes[a.0].val.iter().map(|x| x / sv).collect();
        self.push(Op::DivScalar(a, s), val)
    }

    /// `W x` with `W` stored row-major as a length `rows*cols` node.
    pub fn matvec(&mut self, w: Var, x: Var, rows: usize, cols: usize) -> Var {
        debug_assert_eq!(self.nodes[w.0].val.len(), rows * cols);
        debug_assert_eq!(self.nodes[x.0].val.len(), cols);
        let wv = &self.nodes[w.0].val;
        let xv = &self.nodes[x.0].val;
        let mut val = vec![0.0; rows];
        for r in 0..rows {
            let row = &wv[r * cols..(r + 1) * cols];
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(xv) {
                acc += a * b;
            }
            val[r] = acc;
        }
        self.push(Op::MatVec { w, x, rows, cols }, val)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let val = self.nodes[a.0].val.iter().map(|x| x.tanh()).collect();
        self.push(Op::Tanh(a), val)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let val = self.nodes[a.0].val.iter().map(|x| x.exp()).collect();
        self.push(Op::Exp(a), val)
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let val = self.nodes[a.0].val.iter().map(|x| x.sqrt()).collect();
        self.push(Op::Sqrt(a), val)
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let val = crate::num::softmax(&self.nodes[a.0].val);
        self.push(Op::Softmax(a), val)
    }

    pub fn log_softmax(&mut self, a: Var) -> Var {
        let val = crate::num::log_softmax(&self.nodes[a.0].val);
        self.push(Op::LogSoftmax(a), val)
    }

    pub fn xlnx(&mut self, a: Var) -> Var {
        let val = self.nodes[a.0].val.iter().map(|&x| crate::num::xlnx(x)).collect();
        self.push(Op::XLnX(a), val)
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        let val = self.nodes[a.0]
            .val
            .iter()
            .zip(&self.nodes[b.0].val)
            .map(|(x, y)| x * y)
            .sum();
        self.push(Op::Dot(a, b), vec![val])
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let val = self.nodes[a.0].val.iter().sum();
        self.push(Op::Sum(a), vec![val])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.nodes[a.0].val.len() as F;
        let val = self.nodes[a.0].val.iter().sum::<F>() / n;
        self.push(Op::Mean(a), vec![val])
    }

    pub fn sub_mean(&mut self, a: Var) -> Var {
        let n = self.nodes[a.0].val.len() as F;
        let m = self.nodes[a.0].val.iter().sum::<F>() / n;
        let val = self.nodes[a.0].val.iter().map(|x| x - m).collect();
        self.push(Op::SubMean(a), val)
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let mut val = Vec::new();
        for p in parts {
            val.extend_from_slice(&self.nodes[p.0].val);
        }
        self.push(Op::Concat(parts.to_vec()), val)
    }

    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Var {
        let val = self.nodes[a.0].val[start..start + len].to_vec();
        self.push(Op::Slice { a, start }, val)
    }

    pub fn min2(&mut self, a: Var, b: Var) -> Var {
        let val = self.scalar(a).min(self.scalar(b));
        self.push(Op::Min2(a, b), vec![val])
    }

    pub fn clamp(&mut self, a: Var, lo: F, hi: F) -> Var {
        let val = self.nodes[a.0].val.iter().map(|x| x.clamp(lo, hi)).collect();
        self.push(Op::Clamp { a, lo, hi }, val)
    }

    /// Mean cosine-similarity building block: `dot(a,b) / (|a| |b|)`.
    pub fn cosine(&mut self, a: Var, b: Var) -> Var {
        let ab = self.dot(a, b);
        let aa = self.dot(a, a);
        let bb = self.dot(b, b);
        let na = self.sqrt(aa);
        let nb = self.sqrt(bb);
        let denom = self.mul(na, nb);
        self.div_scalar(ab, denom)
    }

    /// Reverse pass from a scalar root. Returns per-node gradients.
    pub fn backward(&self, root: Var) -> BackwardPass {
        let mut grads: Vec<Vec<F>> = self.nodes.iter().map(|n| vec![0.0; n.val.len()]).collect();
        grads[root.0] = vec![1.0];
        for id in (0..=root.0).rev() {
            let g = std::mem::take(&mut grads[id]);
            if g.iter().all(|&x| x == 0.0) {
                grads[id] = g;
                continue;
            }
            match &self.nodes[id].op {
                Op::Const | Op::Param { .. } => {}
                Op::Add(a, b) => {
                    axpy(&mut grads[a.0], &g, 1.0);
                    axpy(&mut grads[b.0], &g, 1.0);
                }
                Op::Sub(a, b) => {
                    axpy(&mut grads[a.0], &g, 1.0);
                    axpy(&mut grads[b.0], &g, -1.0);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].val, &self.nodes[b.0].val);
                    for i in 0..g.len() {
                        grads[a.0][i] += g[i] * bv[i];
                    }
                    for i in 0..g.len() {
                        grads[b.0][i] += g[i] * av[i];
                    }
                }
                Op::AddN(parts) => {
                    for p in parts {
                        axpy(&mut grads[p.0], &g, 1.0);
                    }
                }
                Op::Scale(a, c) => axpy(&mut grads[a.0], &g, *c),
                Op::MulScalar(a, s) => {
                    let sv = self.nodes[s.0].val[0];
                    axpy(&mut grads[a.0], &g, sv);
                    let av = &self.nodes[a.0].val;
                    grads[s.0][0] += g.iter().zip(av).map(|(gi, ai)| gi * ai).sum::<F>();
                }
                Op::DivScalar(a, s) => {
                    let sv = self.nodes[s.0].val[0];
                    axpy(&mut grads[a.0], &g, 1.0 / sv);
                    let av = &self.nodes[a.0].val;
                    grads[s.0][0] -=
                        g.iter().zip(av).map(|(gi, ai)| gi * ai).sum::<F>() / (sv * sv);
                }
                Op::MatVec { w, x, rows, cols } => {
                    let xv = self.nodes[x.0].val.clone();
                    let wv = &self.nodes[w.0].val;
                    let gx = &mut grads[x.0];
                    for r in 0..*rows {
                        let row = &wv[r * cols..(r + 1) * cols];
                        let gr = g[r];
                        for (j, wj) in row.iter().enumerate() {
                            gx[j] += wj * gr;
                        }
                    }
                    let gw = &mut grads[w.0];
                    for r in 0..*rows {
                        let gr = g[r];
                        let base = r * cols;
                        for (j, xj) in xv.iter().enumerate() {
                            gw[base + j] += gr * xj;
                        }
                    }
                }
                Op::Tanh(a) => {
                    let y = &self.nodes[id].val;
                    for i in 0..g.len() {
                        grads[a.0][i] += g[i] * (1.0 - y[i] * y[i]);
                    }
                }
                Op::Exp(a) => {
                    let y = &self.nodes[id].val;
                    for i in 0..g.len() {
                        grads[a.0][i] += g[i] * y[i];
                    }
                }
                Op::Sqrt(a) => {
                    let y = &self.nodes[id].val;
                    for i in 0..g.len() {
                        grads[a.0][i] += g[i] / (2.0 * y[i]);
                    }
                }
                Op::Softmax(a) => {
                    let y = &self.nodes[id].val;
                    let gy: F = g.iter().zip(y).map(|(gi, yi)| gi * yi).sum();
                    for i in 0..g.len() {
                        grads[a.0][i] += y[i] * (g[i] - gy);
                    }
                }
                Op::LogSoftmax(a) => {
                    let y = &self.nodes[id].val;
                    let gsum: F = g.iter().sum();
                    for i in 0..g.len() {
                        grads[a.0][i] += g[i] - y[i].exp() * gsum;
                    }
                }
                Op::XLnX(a) => {
                    let x = &self.nodes[a.0].val;
                    for i in 0..g.len() {
                        if x[i] > 0.0 {
                            grads[a.0][i] += g[i] * (x[i].ln() + 1.0);
                        }
                    }
                }
                Op::Dot(a, b) => {
                    let gs = g[0];
                    let bv = self.nodes[b.0].val.clone();
                    axpy_vec(&mut grads[a.0], &bv, gs);
                    let av = self.nodes[a.0].val.clone();
                    axpy_vec(&mut grads[b.0], &av, gs);
                }
                Op::Sum(a) => {
                    let gs = g[0];
                    for v in grads[a.0].iter_mut() {
                        *v += gs;
                    }
                }
                Op::Mean(a) => {
                    let gs = g[0] / self.nodes[a.0].val.len() as F;
                    for v in grads[a.0].iter_mut() {
                        *v += gs;
                    }
                }
                Op::SubMean(a) => {
                    let gm: F = g.iter().sum::<F>() / g.len() as F;
                    for (v, gi) in grads[a.0].iter_mut().zip(&g) {
                        *v += gi - gm;
                    }
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let len = self.nodes[p.0].val.len();
                        for i in 0..len {
                            grads[p.0][i] += g[off + i];
                        }
                        off += len;
                    }
                }
                Op::Slice { a, start } => {
                    for i in 0..g.len() {
                        grads[a.0][start + i] += g[i];
                    }
                }
                Op::Min2(a, b) => {
                    if self.nodes[a.0].val[0] <= self.nodes[b.0].val[0] {
                        grads[a.0][0] += g[0];
                    } else {
                        grads[b.0][0] += g[0];
                    }
                }
                Op::Clamp { a, lo, hi } => {
                    let x = &self.nodes[a.0].val;
                    for i in 0..g.len() {
                        if x[i] >= *lo && x[i] <= *hi {
                            grads[a.0][i] += g[i];
                        }
                    }
                }
            }
            grads[id] = g;
        }
        BackwardPass { grads }
    }
}

/// Per-node gradients from one reverse pass.
pub struct BackwardPass {
    grads: Vec<Vec<F>>,
}

impl BackwardPass {
    pub fn grad(&self, v: Var) -> &[F] {
        &self.grads[v.0]
    }

    /// Adds the gradients of all parameter leaves into a flat buffer shaped
    /// like the parameter vector.
    pub fn accumulate_params(&self, tape: &Tape, out: &mut [F]) {
        for (node, grad) in tape.nodes.iter().zip(&self.grads) {
            if let Op::Param { offset } = node.op {
                for (i, g) in grad.iter().enumerate() {
                    out[offset + i] += g;
                }
            }
        }
    }
}

fn zip(a: &[F], b: &[F], f: impl Fn(F, F) -> F) -> Vec<F> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect()
}

fn axpy(acc: &mut [F], g: &[F], c: F) {
    for (a, gi) in acc.iter_mut().zip(g) {
        *a += gi * c;
    }
}

fn axpy_vec(acc: &mut [F], v: &[F], c: F) {
    for (a, vi) in acc.iter_mut().zip(v) {
        *a += vi * c;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// A deliberately gnarly scalar function exercising most ops: a tiny MLP
    /// into a softmax, entropy and cosine terms, clamp/min/ratio pieces.
    fn build(tape: &mut Tape, params: &[F], obs: &[F]) -> Var {
        let w1 = tape.param(params, 0, 12); // 3x4
        let b1 = tape.param(params, 12, 3);
        let w2 = tape.param(params, 15, 9); // 3x3
        let target = tape.constant(&[0.2, 0.5, 0.3]);
        let x = tape.constant(obs);
        let h_lin = tape.matvec(w1, x, 3, 4);
        let h_aff = tape.add(h_lin, b1);
        let h = tape.tanh(h_aff);
        let logits = tape.matvec(w2, h, 3, 3);
        let p = tape.softmax(logits);
        let plogp = tape.xlnx(p);
        let neg_ent = tape.sum(plogp);
        let cos = tape.cosine(p, target);
        let lsm = tape.log_softmax(logits);
        let pick = tape.slice(lsm, 1, 1);
        let ratio_arg = tape.scale(pick, 1.0);
        let ratio = tape.exp(ratio_arg);
        let clipped = tape.clamp(ratio, 0.9, 1.1);
        let adv = tape.constant_scalar(-0.7);
        let s1 = tape.mul_scalar(adv, ratio);
        let s2 = tape.mul_scalar(adv, clipped);
        let surr = tape.min2(s1, s2);
        let centered = tape.sub_mean(p);
        let spread = tape.dot(centered, centered);
        let parts = [neg_ent, cos, surr, spread];
        let total = tape.add_n(&parts);
        tape.mean(total)
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for trial in 0..5 {
            let params: Vec<F> = (0..24).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let obs: Vec<F> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut tape = Tape::new();
            let root = build(&mut tape, &params, &obs);
            let pass = tape.backward(root);
            let mut analytic = vec![0.0; params.len()];
            pass.accumulate_params(&tape, &mut analytic);

            for i in 0..params.len() {
                let h = 1e-6 * (1.0 + params[i].abs());
                let mut p_plus = params.clone();
                p_plus[i] += h;
                let mut p_minus = params.clone();
                p_minus[i] -= h;
                let f = |p: &[F]| {
                    let mut t = Tape::new();
                    let r = build(&mut t, p, &obs);
                    t.scalar(r)
                };
                let fd = (f(&p_plus) - f(&p_minus)) / (2.0 * h);
                let denom = fd.abs().max(analytic[i].abs()).max(1e-8);
                let rel = (fd - analytic[i]).abs() / denom;
                assert!(
                    rel < 1e-5,
                    "trial {trial} param {i}: fd={fd:.10e} analytic={:.10e} rel={rel:.3e}",
                    analytic[i]
                );
            }
        }
    }

    #[test]
    fn input_gradient_is_available() {
        let params: Vec<F> = (0..24).map(|i| 0.05 * (i as F - 12.0)).collect();
        let obs = [0.3, -0.2, 0.8, 0.1];
        let mut tape = Tape::new();
        let x = tape.constant(&obs);
        // Reuse x through a fresh little graph.
        let w = tape.param(&params, 0, 12);
        let h = tape.matvec(w, x, 3, 4);
        let t = tape.tanh(h);
        let root = tape.sum(t);
        let pass = tape.backward(root);
        let gx = pass.grad(x);
        for i in 0..4 {
            let h_step = 1e-6;
            let mut op = obs;
            op[i] += h_step;
            let mut tm = obs;
            tm[i] -= h_step;
            let eval = |o: &[F; 4]| {
                let mut tp = Tape::new();
                let xv = tp.constant(o);
                let wv = tp.param(&params, 0, 12);
                let hv = tp.matvec(wv, xv, 3, 4);
                let tv = tp.tanh(hv);
                let r = tp.sum(tv);
                tp.scalar(r)
            };
            let fd = (eval(&op) - eval(&tm)) / (2.0 * h_step);
            assert!((fd - gx[i]).abs() < 1e-8, "input grad {i}: {fd} vs {}", gx[i]);
        }
    }

    #[test]
    fn softmax_grad_handles_masked_logits() {
        // A -1e30 mask bias must neither poison values nor gradients.
        let logits = [1.0, -1e30, 0.5];
        let mut tape = Tape::new();
        let l = tape.constant(&logits);
        let p = tape.softmax(l);
        assert_eq!(tape.value(p)[1], 0.0);
        let lsm = tape.log_softmax(l);
        let pick = tape.slice(lsm, 0, 1);
        let pass = tape.backward(pick);
        assert!(pass.grad(l).iter().all(|g| g.is_finite()));
    }
}
