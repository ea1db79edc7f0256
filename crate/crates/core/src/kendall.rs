//! Exact Kendall tau, the pairwise sign maps and the kernelized Kendall tau.
//!
//! Pairs are indexed lexicographically, `(0,1), (0,2), .., (0,n-1), (1,2), ..`,
//! and every pairwise module uses the same orientation: the entry for
//! `(i, j)` is positive when item `i` scores above item `j`.

use std::ops::Deref;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Sigmoid slope `theta > 0` used by the smooth pair map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmoidSharpness<T>(T);

impl<T: Scalar> SigmoidSharpness<T> {
    pub fn new(theta: T) -> Result<Self> {
        if theta.is_finite() && theta > T::zero() {
            Ok(Self(theta))
        } else {
            Err(Error::Config(format!("sigmoid sharpness must be > 0, got {theta}")))
        }
    }

    pub fn get(self) -> T {
        self.0
    }
}

/// Number of unordered pairs, `n(n-1)/2`.
#[inline]
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Position of pair `(i, j)`, `i < j`, in lexicographic order.
#[inline]
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

fn normalizer<T: Scalar>(n: usize) -> T {
    T::one() / T::from_usize_lossy(pair_count(n)).sqrt()
}

#[inline]
fn sign<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// One entry per pair, scaled by `1 / sqrt(n(n-1)/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFeatureVector<T> {
    entries: Vec<T>,
    normalizer: T,
}

impl<T: Scalar> PairFeatureVector<T> {
    pub fn normalizer(&self) -> T {
        self.normalizer
    }

    pub fn dot(&self, other: &Self) -> T {
        assert_eq!(self.entries.len(), other.entries.len());
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(&a, &b)| a * b)
            .sum()
    }
}

impl<T> Deref for PairFeatureVector<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.entries
    }
}

fn pair_map<T: Scalar>(u: &[T], f: impl Fn(T) -> T) -> PairFeatureVector<T> {
    let n = u.len();
    assert!(n >= 2, "pair maps need at least two items");
    let norm = normalizer::<T>(n);
    let mut entries = Vec::with_capacity(pair_count(n));
    for i in 0..n {
        for j in i + 1..n {
            entries.push(norm * f(u[i] - u[j]));
        }
    }
    PairFeatureVector {
        entries,
        normalizer: norm,
    }
}

/// Kendall tau `(n_c - n_d) / (n(n-1)/2)`; tied pairs count as neither.
pub fn kendall_tau<T: Scalar>(u: &[T], v: &[T]) -> T {
    assert_eq!(u.len(), v.len(), "kendall_tau: length mismatch");
    let n = u.len();
    assert!(n >= 2, "kendall_tau needs at least two items");
    let mut net: i64 = 0;
    for i in 0..n {
        for j in i + 1..n {
            let a = u[i].partial_cmp(&u[j]);
            let b = v[i].partial_cmp(&v[j]);
            match (a, b) {
                (Some(x), Some(y)) if x.is_ne() && y.is_ne() => {
                    net += if x == y { 1 } else { -1 };
                }
                _ => {}
            }
        }
    }
    T::from_i64(net).unwrap() / T::from_usize_lossy(pair_count(n))
}

/// Exact sign map: `+norm` when `u_i > u_j`, `-norm` when below, `0` on ties.
pub fn phi_exact<T: Scalar>(u: &[T]) -> PairFeatureVector<T> {
    pair_map(u, sign)
}

/// Smooth sign map: `norm * (s(d) - s(-d))` with `s` the logistic of slope
/// theta, which equals `norm * tanh(theta * d / 2)`.
pub fn phi_smooth<T: Scalar>(u: &[T], theta: SigmoidSharpness<T>) -> PairFeatureVector<T> {
    let half = theta.get() / T::lit(2.0);
    pair_map(u, |d| (half * d).tanh())
}

/// `phi_exact(u) . phi_smooth(v)`. Not symmetric: `u` is the fixed reference
/// ranking, `v` the learnable one.
pub fn kernel_kendall<T: Scalar>(u: &[T], v: &[T], theta: SigmoidSharpness<T>) -> T {
    assert_eq!(u.len(), v.len(), "kernel_kendall: length mismatch");
    phi_exact(u).dot(&phi_smooth(v, theta))
}

/// Gradient of [`kernel_kendall`] with respect to the learnable scores `v`.
pub fn kernel_kendall_grad<T: Scalar>(u: &[T], v: &[T], theta: SigmoidSharpness<T>) -> Vec<T> {
    assert_eq!(u.len(), v.len(), "kernel_kendall_grad: length mismatch");
    let n = u.len();
    assert!(n >= 2);
    let scale = T::one() / T::from_usize_lossy(pair_count(n));
    let half = theta.get() / T::lit(2.0);
    let mut grad = vec![T::zero(); n];
    for i in 0..n {
        for j in i + 1..n {
            let s = sign(u[i] - u[j]);
            if s == T::zero() {
                continue;
            }
            // d/dv_i tanh(theta d / 2) = 2 theta sigma'(d) = (theta / 2) sech^2
            let t = (half * (v[i] - v[j])).tanh();
            let g = scale * s * half * (T::one() - t * t);
            grad[i] = grad[i] + g;
            grad[j] = grad[j] - g;
        }
    }
    grad
}
