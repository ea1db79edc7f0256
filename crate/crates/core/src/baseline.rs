//! Line-search baseline: one constant margin weight for every item, picked
//! from a grid by minimizing a weighted sum of Kendall distances to the
//! consumer ranking and to a margin-percent target ranking.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kendall::kendall_tau;
use crate::rerank::{parse_float, parse_key_values, BetaModel, Link, RerankModel};
use crate::scalar::{format_exact, Scalar};
use crate::session::QuerySession;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveWeights<T> {
    pub consumer: T,
    pub margin: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsConfig<T> {
    /// Candidate weights, strictly increasing.
    pub beta_grid: Vec<T>,
    pub alpha: T,
    pub weights: ObjectiveWeights<T>,
}

impl<T: Scalar> Default for LsConfig<T> {
    /// 41 evenly spaced points in `[0, 4]`, equal objective weights.
    fn default() -> Self {
        Self {
            beta_grid: (0..=40).map(|k| T::lit(k as f64 / 10.0)).collect(),
            alpha: T::zero(),
            weights: ObjectiveWeights {
                consumer: T::one(),
                margin: T::one(),
            },
        }
    }
}

impl<T: Scalar> LsConfig<T> {
    /// `points` evenly spaced values from `lo` to `hi` inclusive.
    pub fn linear_grid(lo: T, hi: T, points: usize) -> Vec<T> {
        if points == 1 {
            return vec![lo];
        }
        let step = (hi - lo) / T::from_usize_lossy(points - 1);
        (0..points)
            .map(|k| lo + step * T::from_usize_lossy(k))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta_grid.is_empty() {
            return Err(Error::Config("beta_grid is empty".into()));
        }
        if self.beta_grid.iter().any(|b| !b.is_finite()) {
            return Err(Error::Config("beta_grid holds a non-finite value".into()));
        }
        if self.beta_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("beta_grid must be strictly increasing".into()));
        }
        if !self.alpha.is_finite() {
            return Err(Error::Config("alpha must be finite".into()));
        }
        let ObjectiveWeights { consumer, margin } = self.weights;
        if !(consumer >= T::zero() && margin >= T::zero()) {
            return Err(Error::Config("objective weights must be >= 0".into()));
        }
        if consumer == T::zero() && margin == T::zero() {
            return Err(Error::Config("objective weights are both zero".into()));
        }
        Ok(())
    }
}

/// A constant-beta scorer expressed as a beta model with only a bias.
pub fn constant_beta_model<T: Scalar>(feature_dim: usize, beta: T, alpha: T) -> RerankModel<T> {
    let mut model = BetaModel::zeros(feature_dim, Link::Identity);
    model.bias = beta;
    RerankModel { alpha, beta: model }
}

fn constant_beta_scores<T: Scalar>(session: &QuerySession<T>, beta: T, alpha: T) -> Vec<T> {
    session
        .items()
        .iter()
        .map(|it| it.base_utility + alpha * it.price.ln() + beta * it.log_margin_percent())
        .collect()
}

/// Mean over sessions of
/// `w_consumer (1 - tau(u, u'_beta)) + w_margin (1 - tau(m/p, u'_beta))`.
pub fn ls_objective<T: Scalar>(
    sessions: &[QuerySession<T>],
    beta: T,
    alpha: T,
    weights: ObjectiveWeights<T>,
) -> T {
    if sessions.is_empty() {
        return T::zero();
    }
    let total: T = sessions
        .iter()
        .map(|s| {
            let scores = constant_beta_scores(s, beta, alpha);
            let consumer = T::one() - kendall_tau(&s.base_utilities(), &scores);
            let margin = T::one() - kendall_tau(&s.margin_percents(), &scores);
            weights.consumer * consumer + weights.margin * margin
        })
        .sum();
    total / T::from_usize_lossy(sessions.len())
}

/// Grid point with the lowest objective; ties go to the smaller `|beta|`,
/// then to the earlier grid point.
pub fn ls_fit<T: Scalar>(sessions: &[QuerySession<T>], config: &LsConfig<T>) -> Result<T> {
    config.validate()?;
    let values: Vec<T> = config
        .beta_grid
        .par_iter()
        .map(|&b| ls_objective(sessions, b, config.alpha, config.weights))
        .collect();
    let mut best = 0;
    for k in 1..values.len() {
        let better = values[k] < values[best]
            || (values[k] == values[best]
                && config.beta_grid[k].abs() < config.beta_grid[best].abs());
        if better {
            best = k;
        }
    }
    Ok(config.beta_grid[best])
}

pub const BASELINE_FORMAT_VERSION: u32 = 1;

/// A fitted line-search baseline as stored on disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsBaseline<T> {
    pub alpha: T,
    pub beta: T,
}

impl<T: Scalar> LsBaseline<T> {
    pub fn fit(sessions: &[QuerySession<T>], config: &LsConfig<T>) -> Result<Self> {
        Ok(Self {
            alpha: config.alpha,
            beta: ls_fit(sessions, config)?,
        })
    }

    pub fn to_model(&self, feature_dim: usize) -> RerankModel<T> {
        constant_beta_model(feature_dim, self.beta, self.alpha)
    }

    pub fn to_text(&self) -> String {
        format!(
            "# marketrank line-search baseline\nversion={}\nalpha={}\nbeta={}\n",
            BASELINE_FORMAT_VERSION,
            format_exact(self.alpha.as_f64()),
            format_exact(self.beta.as_f64()),
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
        if get("version")? != BASELINE_FORMAT_VERSION.to_string() {
            return Err(Error::Artifact(format!("unsupported version {:?}", get("version")?)));
        }
        Ok(Self {
            alpha: parse_float("alpha", get("alpha")?)?,
            beta: parse_float("beta", get("beta")?)?,
        })
    }
}
