//! Multi-stakeholder learning to re-rank.
//!
//! Starting from consumer-optimized scores `u`, the re-ranker produces
//! `u' = u + alpha log p + beta(x, m) log(m / p)` where the margin weight
//! `beta` is learned to push high-commission items up while a kernelized
//! Kendall tau term keeps `u'` close to the consumer ranking.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common `f64` instantiation.

pub mod baseline;
pub mod error;
pub mod eval;
pub mod io;
pub mod kendall;
pub mod metrics;
pub mod rerank;
pub mod scalar;
pub mod session;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use baseline::{
    constant_beta_model, ls_fit, ls_objective, LsBaseline, LsConfig, ObjectiveWeights,
};
pub use eval::{evaluate, risk_reward, EvalReport, Method, Objective, RiskReward, Scorer};
pub use io::{emit_sessions, load_sessions};
pub use kendall::{
    kendall_tau, kernel_kendall, kernel_kendall_grad, phi_exact, phi_smooth, SigmoidSharpness,
};
pub use metrics::{delta_ndcg, expected_margin_at_k, ndcg_at_k, rank_of, RankPermutation};
pub use rerank::{adjust_scores, beta_eval, rerank, BetaModel, Link, RerankConfig, RerankModel};
pub use session::{validate_session, Item, QuerySession, ScoreVector, Violation};
pub use synth::{generate, ItemsPerQuery, SyntheticSpec};
pub use train::{
    fit, grad_beta, lambda_gradients, margin_rank_loss, total_loss, FitError, LossParts,
    TrainTrace,
};

pub type Session = QuerySession<f64>;
pub type Session32 = QuerySession<f32>;
pub type Scores = ScoreVector<f64>;
pub type Model = RerankModel<f64>;
pub type Model32 = RerankModel<f32>;
pub type Config = RerankConfig<f64>;
pub type Config32 = RerankConfig<f32>;
pub type Trace = TrainTrace<f64>;
pub type Report = EvalReport<f64>;
