//! Training the margin weight: minimize the margin LambdaRank loss plus
//! `gamma * (1 - K(u, u'))` by full-batch gradient descent.

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kendall::{kernel_kendall, kernel_kendall_grad, SigmoidSharpness};
use crate::metrics::{rank_of, SwapCosts};
use crate::rerank::{adjust_scores, BetaModel, RerankConfig, RerankModel};
use crate::scalar::{logistic, softplus, Scalar};
use crate::session::{validate_session, QuerySession};

/// LambdaRank weight of one ordered pair, `hi` holding the larger margin gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairLambda<T> {
    pub hi: usize,
    pub lo: usize,
    /// `-theta |dNDCG| / (1 + exp(theta (u'_hi - u'_lo)))`, always negative.
    pub lambda: T,
}

/// The two terms of the objective for one session (or their mean over many).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts<T> {
    pub rank_loss: T,
    /// `gamma * (1 - K(u, u'))`.
    pub regularizer: T,
    pub total: T,
}

/// Pairs whose margin gains differ, oriented so that `gains[hi] > gains[lo]`.
fn ordered_pairs<T: Scalar>(gains: &[T]) -> impl Iterator<Item = (usize, usize)> + '_ {
    let n = gains.len();
    (0..n).flat_map(move |i| {
        (i + 1..n).filter_map(move |j| {
            if gains[i] > gains[j] {
                Some((i, j))
            } else if gains[j] > gains[i] {
                Some((j, i))
            } else {
                None
            }
        })
    })
}

fn rank_loss_with_gains<T: Scalar>(u_prime: &[T], gains: &[T], theta: T) -> T {
    let ranks = rank_of(u_prime);
    let costs = SwapCosts::new(&ranks, gains);
    ordered_pairs(gains)
        .map(|(hi, lo)| softplus(-theta * (u_prime[hi] - u_prime[lo])) * costs.get(hi, lo))
        .sum()
}

fn lambdas_with_gains<T: Scalar>(u_prime: &[T], gains: &[T], theta: T) -> Vec<PairLambda<T>> {
    let ranks = rank_of(u_prime);
    let costs = SwapCosts::new(&ranks, gains);
    ordered_pairs(gains)
        .map(|(hi, lo)| PairLambda {
            hi,
            lo,
            lambda: -theta * logistic(-theta * (u_prime[hi] - u_prime[lo])) * costs.get(hi, lo),
        })
        .collect()
}

/// Pairwise logistic loss on margin-ordered pairs, each weighted by its
/// swap cost under the ranking induced by `u_prime`.
pub fn margin_rank_loss<T: Scalar>(session: &QuerySession<T>, u_prime: &[T], theta_rank: T) -> T {
    assert_eq!(session.len(), u_prime.len());
    rank_loss_with_gains(u_prime, &session.margin_gains(), theta_rank)
}

pub fn lambda_gradients<T: Scalar>(
    session: &QuerySession<T>,
    u_prime: &[T],
    theta_rank: T,
) -> Vec<PairLambda<T>> {
    assert_eq!(session.len(), u_prime.len());
    lambdas_with_gains(u_prime, &session.margin_gains(), theta_rank)
}

fn sharpness<T: Scalar>(theta: T) -> SigmoidSharpness<T> {
    SigmoidSharpness::new(theta).expect("validated config has positive theta_kendall")
}

fn loss_with_gains<T: Scalar>(
    session: &QuerySession<T>,
    gains: &[T],
    model: &BetaModel<T>,
    config: &RerankConfig<T>,
) -> LossParts<T> {
    let u = session.base_utilities();
    let u_prime = adjust_scores(session, model, config.alpha);
    let rank_loss = rank_loss_with_gains(&u_prime, gains, config.theta_rank);
    let regularizer =
        config.gamma * (T::one() - kernel_kendall(&u, &u_prime, sharpness(config.theta_kendall)));
    LossParts {
        rank_loss,
        regularizer,
        total: rank_loss + regularizer,
    }
}

pub fn total_loss<T: Scalar>(
    session: &QuerySession<T>,
    model: &BetaModel<T>,
    config: &RerankConfig<T>,
) -> LossParts<T> {
    loss_with_gains(session, &session.margin_gains(), model, config)
}

fn grad_with_gains<T: Scalar>(
    session: &QuerySession<T>,
    gains: &[T],
    model: &BetaModel<T>,
    config: &RerankConfig<T>,
) -> Vec<T> {
    let n = session.len();
    let u = session.base_utilities();
    let u_prime = adjust_scores(session, model, config.alpha);

    let mut d_rank = vec![T::zero(); n];
    for p in lambdas_with_gains(&u_prime, gains, config.theta_rank) {
        d_rank[p.hi] = d_rank[p.hi] + p.lambda;
        d_rank[p.lo] = d_rank[p.lo] - p.lambda;
    }
    let d_kernel = if config.gamma > T::zero() {
        kernel_kendall_grad(&u, &u_prime, sharpness(config.theta_kendall))
    } else {
        vec![T::zero(); n]
    };

    let dim = model.feature_dim();
    let mut grad = vec![T::zero(); model.param_count()];
    for (i, item) in session.items().iter().enumerate() {
        // d/du'_i of the objective, times du'_i/dbeta_i, times the link slope
        let d_score = d_rank[i] - config.gamma * d_kernel[i];
        let g = d_score * item.log_margin_percent() * model.link.derivative(model.activation(item));
        if g == T::zero() {
            continue;
        }
        for (k, &x) in item.features.iter().enumerate() {
            grad[k] = grad[k] + g * x;
        }
        grad[dim] = grad[dim] + g * item.margin().ln();
        grad[dim + 1] = grad[dim + 1] + g;
    }
    grad
}

/// Gradient of [`total_loss`] with respect to `model.params()`.
pub fn grad_beta<T: Scalar>(
    session: &QuerySession<T>,
    model: &BetaModel<T>,
    config: &RerankConfig<T>,
) -> Vec<T> {
    grad_with_gains(session, &session.margin_gains(), model, config)
}

/// Loss, exact tau to the original ranking, and parameter gradient of one
/// session in a single pass over its pairs. Agrees with [`total_loss`] and
/// [`grad_beta`].
fn session_terms<T: Scalar>(
    session: &QuerySession<T>,
    gains: &[T],
    model: &BetaModel<T>,
    config: &RerankConfig<T>,
) -> (LossParts<T>, T, Vec<T>) {
    let n = session.len();
    let items = session.items();
    let activations: Vec<T> = items.iter().map(|it| model.activation(it)).collect();
    let u_prime: Vec<T> = items
        .iter()
        .zip(&activations)
        .map(|(it, &z)| {
            it.base_utility + config.alpha * it.price.ln() + model.link.apply(z) * it.log_margin_percent()
        })
        .collect();
    let ranks = rank_of(&u_prime);
    let costs = SwapCosts::new(&ranks, gains);
    let pairs = T::from_usize_lossy(n * (n - 1) / 2);
    let kernel_scale = T::one() / pairs;
    let theta = config.theta_rank;
    let half = config.theta_kendall / T::lit(2.0);

    let mut rank_loss = T::zero();
    let mut kernel = T::zero();
    let mut net_concordant = T::zero();
    let mut d_score = vec![T::zero(); n];
    for i in 0..n {
        for j in i + 1..n {
            let diff = u_prime[i] - u_prime[j];
            if gains[i] != gains[j] {
                let (hi, lo, d) = if gains[i] > gains[j] { (i, j, diff) } else { (j, i, -diff) };
                let cost = costs.get(hi, lo);
                rank_loss = rank_loss + softplus(-theta * d) * cost;
                let lambda = -theta * logistic(-theta * d) * cost;
                d_score[hi] = d_score[hi] + lambda;
                d_score[lo] = d_score[lo] - lambda;
            }
            let base = items[i].base_utility - items[j].base_utility;
            if base != T::zero() {
                let s = base.signum();
                let t = (half * diff).tanh();
                kernel = kernel + s * t;
                if diff != T::zero() {
                    net_concordant = net_concordant + s * diff.signum();
                }
                if config.gamma > T::zero() {
                    let g = config.gamma * kernel_scale * s * half * (T::one() - t * t);
                    d_score[i] = d_score[i] - g;
                    d_score[j] = d_score[j] + g;
                }
            }
        }
    }
    let regularizer = config.gamma * (T::one() - kernel * kernel_scale);

    let dim = model.feature_dim();
    let mut grad = vec![T::zero(); model.param_count()];
    for (i, item) in items.iter().enumerate() {
        let g = d_score[i] * item.log_margin_percent() * model.link.derivative(activations[i]);
        for (k, &x) in item.features.iter().enumerate() {
            grad[k] = grad[k] + g * x;
        }
        grad[dim] = grad[dim] + g * item.margin().ln();
        grad[dim + 1] = grad[dim + 1] + g;
    }
    let parts = LossParts {
        rank_loss,
        regularizer,
        total: rank_loss + regularizer,
    };
    (parts, net_concordant / pairs, grad)
}

/// Per-epoch audit of both objective terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord<T> {
    pub epoch: usize,
    pub rank_loss: T,
    pub regularizer: T,
    pub total: T,
    /// Mean exact Kendall tau between original and adjusted scores.
    pub mean_tau: T,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainTrace<T> {
    pub records: Vec<EpochRecord<T>>,
}

impl<T: Scalar> TrainTrace<T> {
    pub fn last(&self) -> Option<&EpochRecord<T>> {
        self.records.last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,rank_loss,regularizer,total,mean_tau\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.epoch,
                r.rank_loss.as_f64(),
                r.regularizer.as_f64(),
                r.total.as_f64(),
                r.mean_tau.as_f64()
            ));
        }
        out
    }
}

#[derive(Debug)]
pub enum FitError<T> {
    Invalid(Error),
    /// The objective became NaN or infinite at `epoch`; `trace` holds every
    /// finite epoch before it.
    Diverged { epoch: usize, trace: TrainTrace<T> },
}

impl<T> fmt::Display for FitError<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FitError::Invalid(e) => write!(f, "{e}"),
            FitError::Diverged { epoch, .. } => {
                write!(f, "training diverged at epoch {epoch}: loss is not finite")
            }
        }
    }
}

impl<T: fmt::Debug> std::error::Error for FitError<T> {}

impl<T> From<Error> for FitError<T> {
    fn from(e: Error) -> Self {
        FitError::Invalid(e)
    }
}

fn check_corpus<T: Scalar>(sessions: &[QuerySession<T>]) -> Result<usize> {
    let first = sessions
        .first()
        .ok_or_else(|| Error::Config("no training sessions".into()))?;
    let dim = first.feature_dim();
    for s in sessions {
        if s.feature_dim() != dim {
            return Err(Error::ModelDim {
                model: dim,
                data: s.feature_dim(),
            });
        }
        if let Some(v) = validate_session(s).into_iter().next() {
            return Err(Error::InvalidSession {
                query_id: s.query_id().to_string(),
                reason: v.to_string(),
            });
        }
    }
    Ok(dim)
}

/// Full-batch gradient descent on the mean per-session objective.
///
/// Sessions are evaluated in parallel but reduced in input order, so the
/// result is bitwise reproducible for a given `config.seed`. Each trace
/// record describes the model at the start of its epoch.
pub fn fit<T: Scalar>(
    sessions: &[QuerySession<T>],
    config: &RerankConfig<T>,
) -> std::result::Result<(RerankModel<T>, TrainTrace<T>), FitError<T>> {
    config.validate()?;
    let dim = check_corpus(sessions)?;
    let gains: Vec<Vec<T>> = sessions.iter().map(QuerySession::margin_gains).collect();
    let count = T::from_usize_lossy(sessions.len());

    let mut model = BetaModel::seeded(dim, config.link, config.seed);
    let mut trace = TrainTrace::default();
    for epoch in 0..config.epochs {
        let per_session: Vec<(LossParts<T>, T, Vec<T>)> = sessions
            .par_iter()
            .zip(gains.par_iter())
            .map(|(s, g)| session_terms(s, g, &model, config))
            .collect();

        let mut mean = LossParts::<T>::default();
        let mut tau_sum = T::zero();
        let mut grad = vec![T::zero(); model.param_count()];
        for (parts, tau, g) in &per_session {
            mean.rank_loss = mean.rank_loss + parts.rank_loss;
            mean.regularizer = mean.regularizer + parts.regularizer;
            mean.total = mean.total + parts.total;
            tau_sum = tau_sum + *tau;
            for (acc, &x) in grad.iter_mut().zip(g) {
                *acc = *acc + x;
            }
        }
        let record = EpochRecord {
            epoch,
            rank_loss: mean.rank_loss / count,
            regularizer: mean.regularizer / count,
            total: mean.total / count,
            mean_tau: tau_sum / count,
        };
        if !record.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(FitError::Diverged { epoch, trace });
        }
        trace.records.push(record);

        let step = config.learning_rate / count;
        let params: Vec<T> = model
            .params()
            .iter()
            .zip(&grad)
            .map(|(&p, &g)| p - step * g)
            .collect();
        model.set_params(&params);
        if !model.is_finite() {
            return Err(FitError::Diverged {
                epoch: epoch + 1,
                trace,
            });
        }
    }
    Ok((
        RerankModel {
            alpha: config.alpha,
            beta: model,
        },
        trace,
    ))
}
