//! Seeded synthetic marketplace corpus.
//!
//! Margin percent rises with a hidden feature direction and falls with the
//! consumer utility, which sets consumers and the intermediary against each
//! other in the way the re-ranker is meant to arbitrate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::session::{validate_session, Item, QuerySession};

/// Items per query, uniform on `[mean - spread, mean + spread]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItemsPerQuery {
    pub mean: usize,
    pub spread: usize,
}

impl ItemsPerQuery {
    pub fn fixed(n: usize) -> Self {
        Self { mean: n, spread: 0 }
    }

    fn min(self) -> usize {
        self.mean.saturating_sub(self.spread)
    }
}

/// Click and booking sampler driven by the true utility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelModel {
    /// Expected bookings per query before the at-least-one rule.
    pub expected_bookings: f64,
    /// Clicks happen with probability `logistic(t - click_offset)`.
    pub click_offset: f64,
    /// Noise between true utility and the first-stage score.
    pub score_noise: f64,
}

impl Default for LabelModel {
    fn default() -> Self {
        Self {
            expected_bookings: 1.0,
            click_offset: 2.0,
            score_noise: 0.5,
        }
    }
}

/// Margin percent `= floor + width * logistic(z)` with
/// `z = feature_weight * <w, x> - tension * t + noise * e`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginModel {
    pub floor: f64,
    pub width: f64,
    pub feature_weight: f64,
    pub tension: f64,
    pub noise: f64,
    /// Prices are log-normal with this median and log-scale spread.
    pub median_price: f64,
    pub price_spread: f64,
}

impl Default for MarginModel {
    fn default() -> Self {
        Self {
            floor: 0.05,
            width: 0.30,
            feature_weight: 1.0,
            tension: 0.8,
            noise: 0.5,
            median_price: 150.0,
            price_spread: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_queries: usize,
    pub items_per_query: ItemsPerQuery,
    pub feature_dim: usize,
    pub labels: LabelModel,
    pub margins: MarginModel,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_queries: 1000,
            items_per_query: ItemsPerQuery { mean: 30, spread: 10 },
            feature_dim: 4,
            labels: LabelModel::default(),
            margins: MarginModel::default(),
            seed: 0,
        }
    }
}

/// Required upper bound on corr(m/p, u) over the whole corpus.
pub const MAX_TENSION_CORRELATION: f64 = -0.1;
const MAX_ATTEMPTS: u64 = 16;

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_queries == 0 {
            return bad("n_queries must be >= 1".into());
        }
        if self.items_per_query.min() < 2 {
            return bad(format!(
                "items_per_query must be >= 2 (n < 2), got minimum {}",
                self.items_per_query.min()
            ));
        }
        if self.feature_dim == 0 {
            return bad("feature_dim must be >= 1".into());
        }
        let m = &self.margins;
        if !(m.floor > 0.0 && m.width > 0.0 && m.floor + m.width < 1.0) {
            return bad("margin percent range must lie inside (0, 1)".into());
        }
        if !(m.median_price > 0.0 && m.price_spread >= 0.0) {
            return bad("price model must be positive".into());
        }
        if !(self.labels.expected_bookings >= 0.0 && self.labels.score_noise >= 0.0) {
            return bad("label model parameters must be >= 0".into());
        }
        Ok(())
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Generates the corpus, retrying with derived seeds until corr(m/p, u)
/// falls below [`MAX_TENSION_CORRELATION`].
pub fn generate<T: Scalar>(spec: &SyntheticSpec) -> Result<Vec<QuerySession<T>>> {
    spec.validate()?;
    let mut last = f64::NAN;
    for attempt in 0..MAX_ATTEMPTS {
        let seed = spec.seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let sessions = generate_once::<T>(spec, seed);
        last = tension_correlation(&sessions);
        if last < MAX_TENSION_CORRELATION {
            return Ok(sessions);
        }
    }
    Err(Error::Synthetic(format!(
        "corr(m/p, u) = {last:.3} after {MAX_ATTEMPTS} attempts; raise margins.tension"
    )))
}

/// Pearson correlation between margin percent and base utility over all items.
pub fn tension_correlation<T: Scalar>(sessions: &[QuerySession<T>]) -> f64 {
    let pairs: Vec<(f64, f64)> = sessions
        .iter()
        .flat_map(|s| s.items())
        .map(|it| (it.margin_percent().as_f64(), it.base_utility.as_f64()))
        .collect();
    pearson(&pairs)
}

fn pearson(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let (mx, my) = pairs
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x / n, b + y / n));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

fn generate_once<T: Scalar>(spec: &SyntheticSpec, seed: u64) -> Vec<QuerySession<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = spec.feature_dim;
    let scale = 1.0 / (d as f64).sqrt();
    let w_utility: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
    let w_margin: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
    let dot = |w: &[f64], x: &[f64]| w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() * scale;
    let m = spec.margins;
    let l = spec.labels;
    let ipq = spec.items_per_query;

    (0..spec.n_queries)
        .map(|q| {
            let n = rng.random_range(ipq.min()..=ipq.mean + ipq.spread);
            let xs: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| normal(&mut rng)).collect())
                .collect();
            let truth: Vec<f64> = xs.iter().map(|x| dot(&w_utility, x)).collect();

            let max_t = truth.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exp: Vec<f64> = truth.iter().map(|t| (t - max_t).exp()).collect();
            let z: f64 = exp.iter().sum();
            let softmax: Vec<f64> = exp.iter().map(|e| e / z).collect();

            let mut labels: Vec<u8> = softmax
                .iter()
                .zip(&truth)
                .map(|(&p, &t)| {
                    if rng.random::<f64>() < (l.expected_bookings * p).min(1.0) {
                        2
                    } else if rng.random::<f64>() < logistic(t - l.click_offset) {
                        1
                    } else {
                        0
                    }
                })
                .collect();
            if !labels.contains(&2) {
                let mut r = rng.random::<f64>();
                let pick = softmax
                    .iter()
                    .position(|&p| {
                        r -= p;
                        r <= 0.0
                    })
                    .unwrap_or(n - 1);
                labels[pick] = 2;
            }

            let items = (0..n)
                .map(|i| {
                    let u = truth[i] + l.score_noise * normal(&mut rng);
                    let price =
                        (m.median_price.ln() + m.price_spread * normal(&mut rng)).exp();
                    let zm = m.feature_weight * dot(&w_margin, &xs[i]) - m.tension * truth[i]
                        + m.noise * normal(&mut rng);
                    let percent = m.floor + m.width * logistic(zm);
                    Item {
                        item_id: format!("h{q}-{i}"),
                        features: xs[i].iter().map(|&x| T::lit(x)).collect(),
                        label: labels[i],
                        price: T::lit(price),
                        cost: T::lit(price * (1.0 - percent)),
                        base_utility: T::lit(u),
                    }
                })
                .collect();
            let session = QuerySession::new(format!("q{q:05}"), d, items);
            debug_assert!(validate_session(&session).is_empty());
            session
        })
        .collect()
}
