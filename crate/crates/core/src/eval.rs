//! Trade-off evaluation: mean NDCG@k per objective with lifts against a
//! reference sort, and per-query risk/reward against a baseline.

use std::fmt;

use num_rational::Ratio;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::ndcg_at_k;
use crate::rerank::RerankModel;
use crate::scalar::{format_significant, Scalar};
use crate::session::QuerySession;

pub const DEFAULT_K: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Objective {
    /// Click/booking grades.
    Consumer,
    /// Quartile-binned margins.
    Margin,
}

impl Objective {
    pub const ALL: [Objective; 2] = [Objective::Consumer, Objective::Margin];

    pub fn name(self) -> &'static str {
        match self {
            Objective::Consumer => "consumer",
            Objective::Margin => "margin",
        }
    }

    fn gains<T: Scalar>(self, session: &QuerySession<T>) -> Vec<T> {
        match self {
            Objective::Consumer => session.label_gains(),
            Objective::Margin => session.margin_gains(),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How a method scores a session.
#[derive(Debug, Clone, PartialEq)]
pub enum Scorer<T> {
    /// First-stage utilities as they are.
    Original,
    /// Adjusted scores from a beta model (learned or constant).
    Adjusted(RerankModel<T>),
}

impl<T: Scalar> Scorer<T> {
    pub fn scores(&self, session: &QuerySession<T>) -> Vec<T> {
        match self {
            Scorer::Original => session.base_utilities().into_inner(),
            Scorer::Adjusted(model) => model.adjust(session).into_inner(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Method<T> {
    pub name: String,
    pub scorer: Scorer<T>,
}

impl<T> Method<T> {
    pub fn new(name: impl Into<String>, scorer: Scorer<T>) -> Self {
        Self {
            name: name.into(),
            scorer,
        }
    }
}

/// NDCG@k of one session, or `None` when the session has no positive gain
/// for the objective and is left out of the aggregate.
pub fn query_ndcg<T: Scalar>(
    session: &QuerySession<T>,
    scorer: &Scorer<T>,
    objective: Objective,
    k: usize,
) -> Option<T> {
    let gains = objective.gains(session);
    let ndcg = ndcg_at_k(&scorer.scores(session), &gains, k);
    (!ndcg.degenerate).then_some(ndcg.value)
}

/// Query-level win/loss counts of a challenger against a baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RiskReward {
    /// Challenger strictly below the baseline.
    pub losses: u64,
    /// Challenger strictly above the baseline.
    pub wins: u64,
    pub ties: u64,
}

impl RiskReward {
    pub fn queries(&self) -> u64 {
        self.losses + self.wins + self.ties
    }

    fn fraction(&self, count: u64) -> Ratio<u64> {
        match self.queries() {
            0 => Ratio::new(0, 1),
            q => Ratio::new(count, q),
        }
    }

    pub fn risk(&self) -> Ratio<u64> {
        self.fraction(self.losses)
    }

    pub fn reward(&self) -> Ratio<u64> {
        self.fraction(self.wins)
    }

    /// Remainder after risk and reward; 1 when no query was eligible.
    pub fn tie_fraction(&self) -> Ratio<u64> {
        Ratio::from_integer(1) - self.risk() - self.reward()
    }
}

fn ratio_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn compare<T: Scalar>(challenger: &[Option<T>], baseline: &[Option<T>]) -> RiskReward {
    let mut out = RiskReward::default();
    for (c, b) in challenger.iter().zip(baseline) {
        if let (Some(c), Some(b)) = (c, b) {
            if c < b {
                out.losses += 1;
            } else if c > b {
                out.wins += 1;
            } else {
                out.ties += 1;
            }
        }
    }
    out
}

fn per_query<T: Scalar>(
    sessions: &[QuerySession<T>],
    scorer: &Scorer<T>,
    objective: Objective,
    k: usize,
) -> Vec<Option<T>> {
    sessions
        .par_iter()
        .map(|s| query_ndcg(s, scorer, objective, k))
        .collect()
}

pub fn risk_reward<T: Scalar>(
    sessions: &[QuerySession<T>],
    challenger: &Scorer<T>,
    baseline: &Scorer<T>,
    k: usize,
    objective: Objective,
) -> RiskReward {
    compare(
        &per_query(sessions, challenger, objective, k),
        &per_query(sessions, baseline, objective, k),
    )
}

/// One method under one objective.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow<T> {
    pub method: String,
    pub objective: Objective,
    pub ndcg_mean: T,
    /// Percent change of `ndcg_mean` over the reference; absent when the
    /// reference mean is zero.
    pub lift_pct: Option<T>,
    /// This method against the baseline method.
    pub versus_baseline: RiskReward,
    pub queries: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport<T> {
    pub k: usize,
    pub reference: String,
    pub baseline: String,
    pub query_count: usize,
    pub rows: Vec<ReportRow<T>>,
}

impl<T: Scalar> EvalReport<T> {
    pub fn row(&self, method: &str, objective: Objective) -> Option<&ReportRow<T>> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.objective == objective)
    }

    /// `method,objective,ndcg_mean,lift_pct,risk,reward,ties`; risk, reward
    /// and ties are against the baseline method. Absent lifts print `NA`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,objective,ndcg_mean,lift_pct,risk,reward,ties\n");
        let num = |x: f64| format_significant(x, 9);
        for r in &self.rows {
            let lift = r.lift_pct.map_or("NA".to_string(), |l| num(l.as_f64()));
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.method,
                r.objective,
                num(r.ndcg_mean.as_f64()),
                lift,
                num(ratio_f64(r.versus_baseline.risk())),
                num(ratio_f64(r.versus_baseline.reward())),
                num(ratio_f64(r.versus_baseline.tie_fraction())),
            ));
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "NDCG@{} over {} queries; lift vs {}, risk/reward vs {}\n",
            self.k, self.query_count, self.reference, self.baseline
        );
        out.push_str(&format!(
            "{:<16} {:<9} {:>8} {:>9} {:>7} {:>7} {:>7}\n",
            "method", "objective", "ndcg", "lift", "risk", "reward", "ties"
        ));
        for r in &self.rows {
            let lift = r
                .lift_pct
                .map_or("n/a".to_string(), |l| format!("{:+.1}%", l.as_f64()));
            let pct = |x: Ratio<u64>| format!("{:.1}%", 100.0 * ratio_f64(x));
            out.push_str(&format!(
                "{:<16} {:<9} {:>8.4} {:>9} {:>7} {:>7} {:>7}\n",
                r.method,
                r.objective.name(),
                r.ndcg_mean.as_f64(),
                lift,
                pct(r.versus_baseline.risk()),
                pct(r.versus_baseline.reward()),
                pct(r.versus_baseline.tie_fraction()),
            ));
        }
        out
    }
}

/// Evaluates every method on both objectives. Lifts are relative to the
/// method named `reference`; risk/reward compare each method to `baseline`.
pub fn evaluate<T: Scalar>(
    sessions: &[QuerySession<T>],
    methods: &[Method<T>],
    reference: &str,
    baseline: &str,
    k: usize,
) -> Result<EvalReport<T>> {
    if sessions.is_empty() {
        return Err(Error::Config("evaluation needs at least one session".into()));
    }
    if k == 0 {
        return Err(Error::Config("k must be >= 1".into()));
    }
    let find = |name: &str| {
        methods
            .iter()
            .position(|m| m.name == name)
            .ok_or_else(|| Error::Config(format!("no method named {name:?}")))
    };
    for m in methods {
        if let Scorer::Adjusted(model) = &m.scorer {
            if let Some(s) = sessions.iter().find(|s| s.feature_dim() != model.feature_dim()) {
                return Err(Error::ModelDim {
                    model: model.feature_dim(),
                    data: s.feature_dim(),
                });
            }
        }
    }
    let ref_idx = find(reference)?;
    let base_idx = find(baseline)?;

    let mut rows = Vec::new();
    for objective in Objective::ALL {
        let scores: Vec<Vec<Option<T>>> = methods
            .iter()
            .map(|m| per_query(sessions, &m.scorer, objective, k))
            .collect();
        let mean = |v: &[Option<T>]| {
            let kept: Vec<T> = v.iter().flatten().copied().collect();
            if kept.is_empty() {
                (T::zero(), 0)
            } else {
                let s: T = kept.iter().copied().sum();
                (s / T::from_usize_lossy(kept.len()), kept.len())
            }
        };
        let (ref_mean, _) = mean(&scores[ref_idx]);
        for (m, per) in methods.iter().zip(&scores) {
            let (ndcg_mean, queries) = mean(per);
            let lift_pct = (ref_mean > T::zero())
                .then(|| (ndcg_mean - ref_mean) / ref_mean * T::lit(100.0));
            rows.push(ReportRow {
                method: m.name.clone(),
                objective,
                ndcg_mean,
                lift_pct,
                versus_baseline: compare(per, &scores[base_idx]),
                queries,
            });
        }
    }
    Ok(EvalReport {
        k,
        reference: reference.to_string(),
        baseline: baseline.to_string(),
        query_count: sessions.len(),
        rows,
    })
}
