//! Scalar abstraction for the math kernels.
//!
//! Utility, link, and attention primitives are written against [`Real`] so
//! they work at `f32` or `f64`. Everything downstream of the gradient gates
//! (policy, trainer) instantiates `f64`.

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar usable by the math kernels.
pub trait Real: Float + FromPrimitive + std::fmt::Debug + std::fmt::Display + 'static {
    /// Natural logarithm of `self`, with `ln(0) = -inf` as in IEEE.
    fn rln(self) -> Self {
        self.ln()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `x * ln(x)` with the `0 * ln 0 = 0` convention used by entropy terms.
pub fn xlnx<T: Real>(x: T) -> T {
    if x <= T::zero() {
        T::zero()
    } else {
        x * x.ln()
    }
}

/// Shannon entropy (natural log) of a nonnegative weight vector.
///
/// The caller is responsible for normalization; entries that are zero
/// contribute nothing.
pub fn entropy<T: Real>(weights: &[T]) -> T {
    -weights.iter().fold(T::zero(), |acc, &w| acc + xlnx(w))
}

/// In-place softmax with the max-shift trick.
pub fn softmax_inplace<T: Real>(logits: &mut [T]) {
    let max = logits
        .iter()
        .cloned()
        .fold(T::neg_infinity(), |a, b| if b > a { b } else { a });
    let mut sum = T::zero();
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        sum = sum + *l;
    }
    for l in logits.iter_mut() {
        *l = *l / sum;
    }
}

/// Softmax of a logit slice into a fresh vector.
pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let mut out = logits.to_vec();
    softmax_inplace(&mut out);
    out
}

/// Numerically stable log-softmax. The tape and the inference path share
/// this routine so their outputs agree bit for bit.
pub fn log_softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits
        .iter()
        .cloned()
        .fold(T::neg_infinity(), |a, b| if b > a { b } else { a });
    let mut sum = T::zero();
    for &l in logits {
        sum = sum + (l - max).exp();
    }
    let lse = max + sum.ln();
    logits.iter().map(|&l| l - lse).collect()
}

/// Cosine similarity of two equal-length vectors; 0 when either norm is 0.
pub fn cosine<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut dot = T::zero();
    let mut na = T::zero();
    let mut nb = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        dot = dot + x * y;
        na = na + x * x;
        nb = nb + y * y;
    }
    if na == T::zero() || nb == T::zero() {
        return T::zero();
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// Pearson correlation of two equal-length samples.
///
/// Returns `None` when either sample has zero variance.
pub fn pearson<T: Real>(a: &[T], b: &[T]) -> Option<T> {
    debug_assert_eq!(a.len(), b.len());
    let n = T::from_usize(a.len())?;
    if a.is_empty() {
        return None;
    }
    let ma = a.iter().fold(T::zero(), |s, &x| s + x) / n;
    let mb = b.iter().fold(T::zero(), |s, &x| s + x) / n;
    let mut cov = T::zero();
    let mut va = T::zero();
    let mut vb = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        cov = cov + dx * dy;
        va = va + dx * dx;
        vb = vb + dy * dy;
    }
    if va == T::zero() || vb == T::zero() {
        return None;
    }
    Some(cov / (va.sqrt() * vb.sqrt()))
}
