//! Query sessions, items and score vectors.

use std::fmt;
use std::ops::Deref;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Relevance grade: 0 = no interaction, 1 = click, 2 = booking.
pub const MAX_LABEL: u8 = 2;

/// One candidate item of a query session.
#[derive(Debug, Clone, PartialEq)]
pub struct Item<T> {
    pub item_id: String,
    /// Item attributes. Price is not part of this vector.
    pub features: Vec<T>,
    pub label: u8,
    pub price: T,
    pub cost: T,
    /// First-stage consumer utility, log-odds scale.
    pub base_utility: T,
}

impl<T: Scalar> Item<T> {
    /// Commission `price - cost`. Derived, never stored.
    pub fn margin(&self) -> T {
        self.price - self.cost
    }

    pub fn margin_percent(&self) -> T {
        self.margin() / self.price
    }

    /// `log(m / p)`, strictly negative for a valid item.
    pub fn log_margin_percent(&self) -> T {
        self.margin_percent().ln()
    }
}

/// A search query with its candidate items, in first-stage order.
#[derive(Debug, Clone, PartialEq)]
pub struct QuerySession<T> {
    query_id: String,
    feature_dim: usize,
    items: Vec<Item<T>>,
}

impl<T: Scalar> QuerySession<T> {
    /// Builds a session without checking invariants; see [`validate_session`].
    pub fn new(query_id: impl Into<String>, feature_dim: usize, items: Vec<Item<T>>) -> Self {
        Self {
            query_id: query_id.into(),
            feature_dim,
            items,
        }
    }

    /// Builds a session and fails on the first invariant violation.
    pub fn validated(
        query_id: impl Into<String>,
        feature_dim: usize,
        items: Vec<Item<T>>,
    ) -> Result<Self> {
        let session = Self::new(query_id, feature_dim, items);
        match validate_session(&session).into_iter().next() {
            None => Ok(session),
            Some(v) => Err(Error::InvalidSession {
                query_id: session.query_id,
                reason: v.to_string(),
            }),
        }
    }

    pub fn query_id(&self) -> &str {
        &self.query_id
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn items(&self) -> &[Item<T>] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// True when some item was clicked or booked. Sessions without one are
    /// kept for margin training but left out of consumer NDCG.
    pub fn has_positive_label(&self) -> bool {
        self.items.iter().any(|it| it.label >= 1)
    }

    pub fn base_utilities(&self) -> ScoreVector<T> {
        ScoreVector(self.items.iter().map(|it| it.base_utility).collect())
    }

    pub fn margins(&self) -> Vec<T> {
        self.items.iter().map(Item::margin).collect()
    }

    pub fn margin_percents(&self) -> Vec<T> {
        self.items.iter().map(Item::margin_percent).collect()
    }

    /// Consumer gains: the relevance labels as scalars.
    pub fn label_gains(&self) -> Vec<T> {
        self.items
            .iter()
            .map(|it| T::from_u8(it.label).unwrap())
            .collect()
    }

    /// Margin gains in `{0, 1, 2, 3}` from within-query quartile binning.
    pub fn margin_gains(&self) -> Vec<T> {
        crate::metrics::quartile_gains(&self.margins())
    }
}

/// Scores aligned with a session's items.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector<T>(Vec<T>);

impl<T: Scalar> ScoreVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Config(format!("score {i} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

impl<T> Deref for ScoreVector<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationScope {
    Session,
    Item(usize),
}

/// A broken session invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub scope: ViolationScope,
    pub reason: String,
}

impl Violation {
    fn session(reason: impl Into<String>) -> Self {
        Self {
            scope: ViolationScope::Session,
            reason: reason.into(),
        }
    }

    fn item(index: usize, reason: impl Into<String>) -> Self {
        Self {
            scope: ViolationScope::Item(index),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.scope {
            ViolationScope::Session => write!(f, "session: {}", self.reason),
            ViolationScope::Item(i) => write!(f, "item {}: {}", i, self.reason),
        }
    }
}

/// Reports every invariant violation; an empty list means the session is valid.
pub fn validate_session<T: Scalar>(session: &QuerySession<T>) -> Vec<Violation> {
    let mut out = Vec::new();
    if session.items.len() < 2 {
        out.push(Violation::session("n < 2"));
    }
    if session.feature_dim == 0 {
        out.push(Violation::session("feature_dim must be positive"));
    }
    for (i, item) in session.items.iter().enumerate() {
        if item.features.len() != session.feature_dim {
            out.push(Violation::item(
                i,
                format!(
                    "feature length {} != feature_dim {}",
                    item.features.len(),
                    session.feature_dim
                ),
            ));
        }
        if item.features.iter().any(|x| !x.is_finite()) {
            out.push(Violation::item(i, "non-finite feature"));
        }
        if item.label > MAX_LABEL {
            out.push(Violation::item(i, format!("label {} > {MAX_LABEL}", item.label)));
        }
        if !item.base_utility.is_finite() {
            out.push(Violation::item(i, "non-finite base_utility"));
        }
        if !item.price.is_finite() || item.price <= T::zero() {
            out.push(Violation::item(i, "price ≤ 0"));
        }
        if !item.cost.is_finite() || item.cost <= T::zero() {
            out.push(Violation::item(i, "cost ≤ 0"));
        }
        if item.cost >= item.price {
            out.push(Violation::item(i, "cost ≥ price"));
        }
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn item(id: &str, label: u8, price: f64, cost: f64, u: f64) -> Item<f64> {
        Item {
            item_id: id.to_string(),
            features: vec![0.0],
            label,
            price,
            cost,
            base_utility: u,
        }
    }

    #[test]
    fn valid_two_item_session() {
        let s = QuerySession::new(
            "q",
            1,
            vec![item("a", 1, 100.0, 85.0, 0.3), item("b", 0, 80.0, 72.0, -0.1)],
        );
        assert!(validate_session(&s).is_empty());
    }

    #[test]
    fn cost_at_or_above_price_is_reported() {
        let s = QuerySession::new(
            "q",
            1,
            vec![
                item("a", 1, 100.0, 85.0, 0.3),
                item("b", 0, 80.0, 72.0, -0.1),
                item("c", 0, 90.0, 70.0, 0.0),
                item("d", 0, 50.0, 50.0, 0.0),
            ],
        );
        assert_eq!(
            validate_session(&s),
            vec![Violation {
                scope: ViolationScope::Item(3),
                reason: "cost ≥ price".into()
            }]
        );
    }

    #[test]
    fn single_item_session_is_reported() {
        let s = QuerySession::new("q", 1, vec![item("a", 1, 100.0, 85.0, 0.3)]);
        assert_eq!(validate_session(&s), vec![Violation::session("n < 2")]);
    }

    #[test]
    fn every_violation_is_listed() {
        let mut bad = item("a", 7, -1.0, 2.0, f64::NAN);
        bad.features = vec![0.0, 1.0];
        let s = QuerySession::new("q", 1, vec![bad]);
        let v = validate_session(&s);
        assert_eq!(v.len(), 6, "{v:?}");
        assert!(QuerySession::validated("q", 1, s.items().to_vec()).is_err());
    }

    #[test]
    fn margin_is_derived() {
        let it = item("a", 0, 120.0, 96.0, 0.0);
        assert_eq!(it.margin(), 24.0);
        assert!((it.margin_percent() - 0.2).abs() < 1e-15);
        assert!(it.log_margin_percent() < 0.0);
    }

    #[test]
    fn score_vector_rejects_non_finite() {
        assert!(ScoreVector::new(vec![1.0, f64::INFINITY]).is_err());
        assert_eq!(&*ScoreVector::new(vec![1.0f32, 2.0]).unwrap(), &[1.0, 2.0]);
    }
}
