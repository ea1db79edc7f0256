//! Score adjustment `u' = u + alpha log p + beta(x, m) log(m / p)` and the
//! learned margin weight `beta`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metrics::{rank_of, RankPermutation};
use crate::scalar::{format_exact, logistic, softplus, Scalar};
use crate::session::{Item, QuerySession, ScoreVector};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Output nonlinearity of the beta model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Link {
    Identity,
    /// Keeps beta strictly positive.
    #[default]
    Softplus,
}

impl Link {
    pub fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Link::Identity => z,
            Link::Softplus => softplus(z),
        }
    }

    pub fn derivative<T: Scalar>(self, z: T) -> T {
        match self {
            Link::Identity => T::one(),
            Link::Softplus => logistic(z),
        }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Link::Identity => "identity",
            Link::Softplus => "softplus",
        })
    }
}

impl FromStr for Link {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Link::Identity),
            "softplus" => Ok(Link::Softplus),
            other => Err(Error::Config(format!("unknown link {other:?}"))),
        }
    }
}

/// Linear model over `[features; log m]` followed by a link function.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaModel<T> {
    /// `feature_dim + 1` entries; the last one multiplies `log m`.
    pub weights: Vec<T>,
    pub bias: T,
    pub link: Link,
}

impl<T: Scalar> BetaModel<T> {
    pub fn zeros(feature_dim: usize, link: Link) -> Self {
        Self {
            weights: vec![T::zero(); feature_dim + 1],
            bias: T::zero(),
            link,
        }
    }

    /// Small uniform weights in `[-0.01, 0.01)` drawn from `seed`; zero bias.
    pub fn seeded(feature_dim: usize, link: Link, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = (0..=feature_dim)
            .map(|_| T::lit(rng.random_range(-0.01..0.01)))
            .collect();
        Self {
            weights,
            bias: T::zero(),
            link,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.weights.len() - 1
    }

    /// Number of trainable parameters: weights then bias.
    pub fn param_count(&self) -> usize {
        self.weights.len() + 1
    }

    pub fn params(&self) -> Vec<T> {
        let mut p = self.weights.clone();
        p.push(self.bias);
        p
    }

    pub fn set_params(&mut self, params: &[T]) {
        assert_eq!(params.len(), self.param_count());
        let (w, b) = params.split_at(self.weights.len());
        self.weights.copy_from_slice(w);
        self.bias = b[0];
    }

    /// Link input `w . [x; log m] + b`.
    pub fn activation(&self, item: &Item<T>) -> T {
        debug_assert_eq!(item.features.len() + 1, self.weights.len());
        let (w_x, w_m) = self.weights.split_at(item.features.len());
        let dot: T = w_x.iter().zip(&item.features).map(|(&w, &x)| w * x).sum();
        dot + w_m[0] * item.margin().ln() + self.bias
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }
}

/// `beta(x, m) = link(w . [x; log m] + b)`.
pub fn beta_eval<T: Scalar>(model: &BetaModel<T>, item: &Item<T>) -> T {
    model.link.apply(model.activation(item))
}

pub fn adjust_scores<T: Scalar>(
    session: &QuerySession<T>,
    model: &BetaModel<T>,
    alpha: T,
) -> ScoreVector<T> {
    let values = session
        .items()
        .iter()
        .map(|it| {
            it.base_utility + alpha * it.price.ln() + beta_eval(model, it) * it.log_margin_percent()
        })
        .collect();
    ScoreVector::new(values).expect("adjusted scores are finite for a valid session and model")
}

/// New positions of the session's items under the adjusted scores.
pub fn rerank<T: Scalar>(session: &QuerySession<T>, model: &BetaModel<T>, alpha: T) -> RankPermutation {
    rank_of(&adjust_scores(session, model, alpha))
}

/// Hyperparameters for training and applying the re-ranker.
#[derive(Debug, Clone, PartialEq)]
pub struct RerankConfig<T> {
    pub alpha: T,
    pub gamma: T,
    pub theta_rank: T,
    pub theta_kendall: T,
    pub learning_rate: T,
    pub epochs: usize,
    pub link: Link,
    pub seed: u64,
}

impl<T: Scalar> Default for RerankConfig<T> {
    fn default() -> Self {
        Self {
            alpha: T::zero(),
            gamma: T::one(),
            theta_rank: T::one(),
            theta_kendall: T::one(),
            learning_rate: T::lit(0.01),
            epochs: 200,
            link: Link::Softplus,
            seed: 0,
        }
    }
}

impl<T: Scalar> RerankConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if !self.alpha.is_finite() {
            return bad("alpha must be finite");
        }
        if !(self.gamma.is_finite() && self.gamma >= T::zero()) {
            return bad("gamma must be >= 0");
        }
        if !(self.theta_rank.is_finite() && self.theta_rank > T::zero()) {
            return bad("theta_rank must be > 0");
        }
        if !(self.theta_kendall.is_finite() && self.theta_kendall > T::zero()) {
            return bad("theta_kendall must be > 0");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > T::zero()) {
            return bad("learning_rate must be > 0");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        Ok(())
    }
}

/// A trained beta model together with the price weight it was trained under.
/// This is what gets written to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RerankModel<T> {
    pub alpha: T,
    pub beta: BetaModel<T>,
}

impl<T: Scalar> RerankModel<T> {
    pub fn feature_dim(&self) -> usize {
        self.beta.feature_dim()
    }

    pub fn adjust(&self, session: &QuerySession<T>) -> ScoreVector<T> {
        adjust_scores(session, &self.beta, self.alpha)
    }

    /// Line-oriented `key=value` text; floats carry 17 significant digits.
    pub fn to_text(&self) -> String {
        let weights: Vec<String> = self
            .beta
            .weights
            .iter()
            .map(|w| format_exact(w.as_f64()))
            .collect();
        format!(
            "# marketrank beta model\nversion={}\nfeature_dim={}\nlink={}\nalpha={}\nweights={}\nbias={}\n",
            MODEL_FORMAT_VERSION,
            self.feature_dim(),
            self.beta.link,
            format_exact(self.alpha.as_f64()),
            weights.join(","),
            format_exact(self.beta.bias.as_f64()),
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let fields = parse_key_values(text)?;
        let get = |key: &str| {
            fields
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| Error::Artifact(format!("missing field {key:?}")))
        };
        let version: u32 = get("version")?
            .parse()
            .map_err(|_| Error::Artifact("version is not an integer".into()))?;
        if version != MODEL_FORMAT_VERSION {
            return Err(Error::Artifact(format!("unsupported version {version}")));
        }
        let feature_dim: usize = get("feature_dim")?
            .parse()
            .map_err(|_| Error::Artifact("feature_dim is not an integer".into()))?;
        let link: Link = get("link")?
            .parse()
            .map_err(|e: Error| Error::Artifact(e.to_string()))?;
        let alpha = parse_float::<T>("alpha", get("alpha")?)?;
        let bias = parse_float::<T>("bias", get("bias")?)?;
        let raw_weights = get("weights")?;
        let weights = if raw_weights.is_empty() {
            Vec::new()
        } else {
            raw_weights
                .split(',')
                .map(|w| parse_float::<T>("weights", w.trim()))
                .collect::<Result<Vec<_>>>()?
        };
        if weights.len() != feature_dim + 1 {
            return Err(Error::Artifact(format!(
                "expected {} weights for feature_dim {feature_dim}, found {}",
                feature_dim + 1,
                weights.len()
            )));
        }
        Ok(Self {
            alpha,
            beta: BetaModel {
                weights,
                bias,
                link,
            },
        })
    }
}

pub(crate) fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Artifact(format!("line {}: expected key=value", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub(crate) fn parse_float<T: Scalar>(field: &str, raw: &str) -> Result<T> {
    raw.parse::<T>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Artifact(format!("{field}: {raw:?} is not a finite number")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(features: Vec<f64>, price: f64, cost: f64, u: f64) -> Item<f64> {
        Item {
            item_id: "i".into(),
            features,
            label: 0,
            price,
            cost,
            base_utility: u,
        }
    }

    fn session(items: Vec<Item<f64>>) -> QuerySession<f64> {
        let d = items[0].features.len();
        QuerySession::validated("q", d, items).unwrap()
    }

    #[test]
    fn zero_model_outputs() {
        let it = item(vec![1.0, -2.0], 100.0, 80.0, 0.0);
        assert_eq!(beta_eval(&BetaModel::zeros(2, Link::Identity), &it), 0.0);
        let sp = beta_eval(&BetaModel::zeros(2, Link::Softplus), &it);
        assert!((sp - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn beta_matches_hand_dot_product() {
        let it = item(vec![0.5, -1.5, 2.0], 120.0, 90.0, 0.0);
        let model = BetaModel {
            weights: vec![0.2, -0.1, 0.05, 0.3],
            bias: -0.4,
            link: Link::Softplus,
        };
        let z = 0.2 * 0.5 + (-0.1) * (-1.5) + 0.05 * 2.0 + 0.3 * 30f64.ln() - 0.4;
        let expected = (1.0 + z.exp()).ln();
        assert!((beta_eval(&model, &it) - expected).abs() < 1e-14);
    }

    #[test]
    fn zero_effect_leaves_scores_unchanged() {
        let s = session(vec![
            item(vec![0.0], 100.0, 85.0, 0.4),
            item(vec![1.0], 80.0, 72.0, -0.3),
            item(vec![2.0], 120.0, 96.0, 1.1),
        ]);
        let model = BetaModel::zeros(1, Link::Identity);
        assert_eq!(&*adjust_scores(&s, &model, 0.0), &[0.4, -0.3, 1.1]);
        assert_eq!(rerank(&s, &model, 0.0), rank_of(&s.base_utilities()));
    }

    #[test]
    fn constant_beta_with_equal_margin_percent_keeps_order() {
        let s = session(vec![
            item(vec![0.0], 100.0, 80.0, 0.4),
            item(vec![0.0], 50.0, 40.0, -0.3),
            item(vec![0.0], 200.0, 160.0, 1.1),
        ]);
        let k = 1.7;
        let model = BetaModel {
            weights: vec![0.0, 0.0],
            bias: k,
            link: Link::Identity,
        };
        let adj = adjust_scores(&s, &model, 0.0);
        for (a, it) in adj.iter().zip(s.items()) {
            assert!((a - (it.base_utility + k * 0.2f64.ln())).abs() < 1e-14);
        }
        assert_eq!(rank_of(&adj), rank_of(&s.base_utilities()));
    }

    #[test]
    fn price_term_and_elementwise_oracle() {
        let s = session(vec![
            item(vec![0.3, 0.1], 100.0, 70.0, 0.4),
            item(vec![-1.0, 0.2], 80.0, 72.0, -0.3),
        ]);
        let model = BetaModel {
            weights: vec![0.5, -0.25, 0.1],
            bias: 0.2,
            link: Link::Identity,
        };
        let adj = adjust_scores(&s, &model, 0.3);
        for (a, it) in adj.iter().zip(s.items()) {
            let b = 0.5 * it.features[0] - 0.25 * it.features[1] + 0.1 * it.margin().ln() + 0.2;
            let e = it.base_utility + 0.3 * it.price.ln() + b * (it.margin() / it.price).ln();
            assert!((a - e).abs() < 1e-14);
        }
    }

    #[test]
    fn beta_on_one_item_promotes_it() {
        // Item 1 holds the best margin percent and sits mid-list. A model that
        // gives every other item a large beta pushes them down around it.
        let s = session(vec![
            item(vec![0.0], 100.0, 90.0, 1.0),
            item(vec![1.0], 100.0, 60.0, 0.5),
            item(vec![0.0], 100.0, 90.0, 0.0),
        ]);
        let model = BetaModel {
            weights: vec![-10.0, 0.0],
            bias: 5.0,
            link: Link::Identity,
        };
        let before = rank_of(&s.base_utilities());
        let after = rerank(&s, &model, 0.0);
        assert_eq!(before[1], 2);
        assert!(after[1] < before[1]);
    }

    #[test]
    fn two_items_both_orders_reachable() {
        let s = session(vec![
            item(vec![0.0], 100.0, 90.0, 0.2),
            item(vec![0.0], 100.0, 50.0, 0.0),
        ]);
        let with_bias = |b: f64| BetaModel {
            weights: vec![0.0, 0.0],
            bias: b,
            link: Link::Identity,
        };
        // u'_0 - u'_1 = 0.2 + b (ln 0.1 - ln 0.5), crossing zero at b ~ 0.124
        assert_eq!(&*rerank(&s, &with_bias(0.0), 0.0), &[1, 2]);
        assert_eq!(&*rerank(&s, &with_bias(1.0), 0.0), &[2, 1]);
        assert_eq!(&*rerank(&s, &with_bias(-1.0), 0.0), &[1, 2]);
    }

    #[test]
    fn config_invariants() {
        let ok = RerankConfig::<f64>::default();
        assert!(ok.validate().is_ok());
        let zero_epochs = RerankConfig {
            epochs: 0,
            ..ok.clone()
        };
        assert!(zero_epochs.validate().is_err());
        let neg_gamma = RerankConfig { gamma: -1.0, ..ok };
        assert!(neg_gamma.validate().is_err());
    }

    #[test]
    fn artifact_round_trip_is_exact() {
        let m = RerankModel {
            alpha: 0.1,
            beta: BetaModel {
                weights: vec![1.0 / 3.0, -2.0e-17, 7.25],
                bias: std::f64::consts::PI,
                link: Link::Softplus,
            },
        };
        let text = m.to_text();
        assert_eq!(RerankModel::<f64>::from_text(&text).unwrap(), m);
    }

    #[test]
    fn artifact_errors_name_the_problem() {
        let err = RerankModel::<f64>::from_text("version=1\nfeature_dim=1\n").unwrap_err();
        assert!(err.to_string().contains("link"), "{err}");
        let text = "version=1\nfeature_dim=2\nlink=identity\nalpha=0\nweights=1,2\nbias=0\n";
        let err = RerankModel::<f64>::from_text(text).unwrap_err();
        assert!(err.to_string().contains("expected 3 weights"), "{err}");
        let err = RerankModel::<f64>::from_text("garbage").unwrap_err();
        assert!(err.to_string().contains("key=value"), "{err}");
    }
}
