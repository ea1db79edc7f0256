//! Ranking metrics: ranks, DCG/NDCG@k, pairwise swap cost and expected margin.
//!
//! Gains enter DCG as `2^g - 1` with a `1 / log2(1 + position)` discount.

use std::cmp::Ordering;
use std::ops::Deref;

use crate::scalar::Scalar;

/// 1-based rank of every item when scores are sorted descending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankPermutation(Vec<usize>);

impl RankPermutation {
    /// Item indices ordered from rank 1 downwards.
    pub fn order(&self) -> Vec<usize> {
        let mut order = vec![0; self.0.len()];
        for (item, &r) in self.0.iter().enumerate() {
            order[r - 1] = item;
        }
        order
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }
}

impl Deref for RankPermutation {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.0
    }
}

/// Item indices sorted by descending score, ties by ascending index.
pub fn sorted_order<T: Scalar>(scores: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// Realizes `r(.)`: descending sort, ties broken by original index.
pub fn rank_of<T: Scalar>(scores: &[T]) -> RankPermutation {
    let mut ranks = vec![0; scores.len()];
    for (pos, item) in sorted_order(scores).into_iter().enumerate() {
        ranks[item] = pos + 1;
    }
    RankPermutation(ranks)
}

#[inline]
pub(crate) fn gain<T: Scalar>(g: T) -> T {
    g.exp2() - T::one()
}

#[inline]
pub(crate) fn discount<T: Scalar>(rank: usize) -> T {
    T::one() / T::from_usize_lossy(rank + 1).log2()
}

/// DCG over the first `k` items of `order`.
pub fn dcg_of_order<T: Scalar>(order: &[usize], gains: &[T], k: usize) -> T {
    order
        .iter()
        .take(k)
        .enumerate()
        .map(|(pos, &i)| gain(gains[i]) * discount::<T>(pos + 1))
        .sum()
}

/// DCG@k of the best possible ordering.
pub fn ideal_dcg_at_k<T: Scalar>(gains: &[T], k: usize) -> T {
    let mut sorted = gains.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    sorted
        .iter()
        .take(k)
        .enumerate()
        .map(|(pos, &g)| gain(g) * discount::<T>(pos + 1))
        .sum()
}

/// NDCG value plus a flag for the all-zero-gain case, where it is defined as 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ndcg<T> {
    pub value: T,
    pub degenerate: bool,
}

pub fn ndcg_at_k<T: Scalar>(scores: &[T], gains: &[T], k: usize) -> Ndcg<T> {
    assert_eq!(scores.len(), gains.len(), "scores and gains differ in length");
    let ideal = ideal_dcg_at_k(gains, k);
    if ideal <= T::zero() {
        return Ndcg {
            value: T::zero(),
            degenerate: true,
        };
    }
    let dcg = dcg_of_order(&sorted_order(scores), gains, k);
    Ndcg {
        value: (dcg / ideal).min(T::one()),
        degenerate: false,
    }
}

/// Absolute full-list NDCG change from exchanging the positions of `i` and `j`.
pub fn delta_ndcg<T: Scalar>(i: usize, j: usize, scores: &[T], gains: &[T]) -> T {
    assert_ne!(i, j, "swap cost needs two distinct items");
    SwapCosts::new(&rank_of(scores), gains).get(i, j)
}

/// Swap costs for one fixed ranking, with the ideal DCG computed once.
#[derive(Debug, Clone)]
pub struct SwapCosts<'a, T> {
    ranks: &'a [usize],
    gains: &'a [T],
    inv_ideal: T,
}

impl<'a, T: Scalar> SwapCosts<'a, T> {
    pub fn new(ranks: &'a RankPermutation, gains: &'a [T]) -> Self {
        assert_eq!(ranks.len(), gains.len(), "ranks and gains differ in length");
        let ideal = ideal_dcg_at_k(gains, gains.len());
        let inv_ideal = if ideal > T::zero() {
            T::one() / ideal
        } else {
            T::zero()
        };
        Self {
            ranks,
            gains,
            inv_ideal,
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        let dg = self.gains[i].exp2() - self.gains[j].exp2();
        let dd = discount::<T>(self.ranks[i]) - discount::<T>(self.ranks[j]);
        (dg * dd).abs() * self.inv_ideal
    }
}

/// Expected commission collected from the top `k` ranked items.
pub fn expected_margin_at_k<T: Scalar>(
    scores: &[T],
    margins: &[T],
    purchase_probs: &[T],
    k: usize,
) -> T {
    assert_eq!(scores.len(), margins.len());
    assert_eq!(scores.len(), purchase_probs.len());
    sorted_order(scores)
        .into_iter()
        .take(k)
        .map(|i| purchase_probs[i] * margins[i])
        .sum()
}

/// Within-query quartile bin of each value, `floor(4 * below / n)` where
/// `below` counts strictly smaller values; equal values share a bin.
pub fn quartile_gains<T: Scalar>(values: &[T]) -> Vec<T> {
    let n = values.len();
    values
        .iter()
        .map(|v| {
            let below = values.iter().filter(|w| *w < v).count();
            T::from_usize_lossy((4 * below / n.max(1)).min(3))
        })
        .collect()
}
