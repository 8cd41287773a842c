//! Single-covariate Cox model with Breslow ties, Schoenfeld residuals and
//! proportional-hazards diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{NphError, Result};
use crate::special::chi2_1_sf;
use crate::survival::{build_event_table, km_estimate, Arm, EventTable, SurvivalDataset};

const TOLERANCE: f64 = 1e-8;
const MAX_ITER: usize = 25;
/// |β| beyond this is treated as divergence towards a monotone likelihood.
const BETA_LIMIT: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxFit {
    /// Log hazard ratio of treatment versus control.
    pub beta: f64,
    pub var_beta: f64,
    pub loglik: f64,
    pub loglik_null: f64,
    pub n_iter: usize,
    pub converged: bool,
    pub n_events: usize,
    /// Breslow cumulative baseline hazard `(t, Λ̂₀(t))` at each event time.
    pub baseline: Vec<(f64, f64)>,
}

impl CoxFit {
    pub fn se_beta(&self) -> f64 {
        self.var_beta.sqrt()
    }

    pub fn hazard_ratio(&self) -> f64 {
        self.beta.exp()
    }

    /// Wald p-value for β = 0.
    pub fn wald_p(&self) -> f64 {
        chi2_1_sf(self.beta * self.beta / self.var_beta)
    }

    pub fn predict(&self, arm: Arm) -> CoxPrediction<'_> {
        CoxPrediction { fit: self, multiplier: (self.beta * arm.indicator()).exp() }
    }
}

/// Partial log-likelihood, score and information at `beta`.
fn partial_likelihood(table: &EventTable, beta: f64) -> (f64, f64, f64) {
    let eb = beta.exp();
    let mut ll = 0.0;
    let mut score = 0.0;
    let mut info = 0.0;
    for row in &table.rows {
        let s1 = row.at_risk1 as f64 * eb;
        let s0 = row.at_risk0 as f64 + s1;
        let d = row.events as f64;
        let p = s1 / s0;
        ll += row.events1 as f64 * beta - d * s0.ln();
        score += row.events1 as f64 - d * p;
        info += d * p * (1.0 - p);
    }
    (ll, score, info)
}

/// Newton–Raphson with step halving from β = 0.
pub fn cox_fit(data: &SurvivalDataset) -> Result<CoxFit> {
    let table = build_event_table(data)?;
    if table.rows.is_empty() {
        return Err(NphError::Degenerate("Cox model needs at least one event".into()));
    }
    let monotone = || NphError::NonConvergence {
        model: "cox".into(),
        reason: "monotone likelihood: the estimate diverges".into(),
    };

    // The score tends to Σ_{Y0>0} dN1 as β → −∞ and to −Σ_{Y1>0} dN0 as
    // β → +∞; a finite maximizer needs both limits strictly signed.
    let lower: usize = table.rows.iter().filter(|r| r.at_risk0 > 0).map(|r| r.events1).sum();
    let upper: usize = table.rows.iter().filter(|r| r.at_risk1 > 0).map(|r| r.events0).sum();
    if lower == 0 || upper == 0 {
        return Err(monotone());
    }

    let mut beta = 0.0;
    let (mut ll, mut score, mut info) = partial_likelihood(&table, beta);
    let loglik_null = ll;
    let mut n_iter = 0;
    let mut converged = score.abs() < TOLERANCE;
    while !converged && n_iter < MAX_ITER {
        n_iter += 1;
        if !(info > 0.0) {
            return Err(monotone());
        }
        let mut step = score / info;
        let mut cand = beta + step;
        let (mut cll, mut cscore, mut cinfo) = partial_likelihood(&table, cand);
        let mut halvings = 0;
        // Near the root the likelihood change drops below its roundoff, so a
        // smaller |score| also counts as progress.
        while !(cll >= ll || cscore.abs() < score.abs()) && halvings < 30 {
            step *= 0.5;
            cand = beta + step;
            (cll, cscore, cinfo) = partial_likelihood(&table, cand);
            halvings += 1;
        }
        beta = cand;
        (ll, score, info) = (cll, cscore, cinfo);
        if beta.abs() > BETA_LIMIT {
            return Err(monotone());
        }
        converged = score.abs() < TOLERANCE;
    }
    if !(info > 0.0) {
        return Err(monotone());
    }

    let eb = beta.exp();
    let mut cum = 0.0;
    let baseline = table
        .rows
        .iter()
        .map(|row| {
            cum += row.events as f64 / (row.at_risk0 as f64 + row.at_risk1 as f64 * eb);
            (row.time, cum)
        })
        .collect();

    Ok(CoxFit {
        beta,
        var_beta: 1.0 / info,
        loglik: ll,
        loglik_null,
        n_iter,
        converged,
        n_events: table.total_events(),
        baseline,
    })
}

/// Model-based survival curve for one arm.
#[derive(Debug, Clone, Copy)]
pub struct CoxPrediction<'a> {
    fit: &'a CoxFit,
    multiplier: f64,
}

impl CoxPrediction<'_> {
    pub fn cumulative_hazard(&self, t: f64) -> f64 {
        let idx = self.fit.baseline.partition_point(|&(s, _)| s <= t);
        if idx == 0 {
            0.0
        } else {
            self.fit.baseline[idx - 1].1 * self.multiplier
        }
    }

    pub fn survival(&self, t: f64) -> f64 {
        (-self.cumulative_hazard(t)).exp()
    }

    /// First time the step curve falls to 0.5 or below; `None` if never.
    pub fn median(&self) -> Option<f64> {
        self.fit.baseline.iter().find(|&&(_, h)| (-h * self.multiplier).exp() <= 0.5).map(|&(t, _)| t)
    }

    /// Exact area under the step curve on `[0, t]`.
    pub fn rmst(&self, t: f64) -> f64 {
        let mut area = 0.0;
        let mut prev_t = 0.0;
        let mut prev_s = 1.0;
        for &(s, h) in &self.fit.baseline {
            if s >= t {
                break;
            }
            area += prev_s * (s - prev_t);
            prev_t = s;
            prev_s = (-h * self.multiplier).exp();
        }
        area + prev_s * (t - prev_t).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchoenfeldRow {
    pub time: f64,
    pub residual: f64,
    pub scaled: f64,
}

/// One row per event subject; tied events share the risk-set mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchoenfeldResiduals {
    pub rows: Vec<SchoenfeldRow>,
}

/// `r = X − X̄(β̂)` and scaled `r* = β̂ + d·V̂·r`.
pub fn schoenfeld_residuals(fit: &CoxFit, data: &SurvivalDataset) -> Result<SchoenfeldResiduals> {
    let table = build_event_table(data)?;
    let eb = fit.beta.exp();
    let scale = fit.n_events as f64 * fit.var_beta;
    let mut rows = Vec::with_capacity(table.total_events());
    for row in &table.rows {
        let s1 = row.at_risk1 as f64 * eb;
        let mean = s1 / (row.at_risk0 as f64 + s1);
        for (x, count) in [(0.0, row.events0), (1.0, row.events1)] {
            let residual = x - mean;
            for _ in 0..count {
                rows.push(SchoenfeldRow { time: row.time, residual, scaled: fit.beta + scale * residual });
            }
        }
    }
    Ok(SchoenfeldResiduals { rows })
}

/// Time transform applied before correlating residuals with time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeTransform {
    Identity,
    /// `1 − Ŝ(t−)` from the pooled KM curve.
    #[default]
    Km,
    Rank,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhTestKind {
    GrambschTherneau,
    SchoenfeldGlobal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhTestResult {
    pub kind: PhTestKind,
    pub statistic: f64,
    pub df: usize,
    pub p: f64,
}

fn transformed_times(
    residuals: &SchoenfeldResiduals,
    data: &SurvivalDataset,
    transform: TimeTransform,
) -> Result<Vec<f64>> {
    let times = residuals.rows.iter().map(|r| r.time);
    Ok(match transform {
        TimeTransform::Identity => times.collect(),
        TimeTransform::Log => times.map(f64::ln).collect(),
        TimeTransform::Km => {
            let km = km_estimate(data)?;
            times.map(|t| 1.0 - km.surv_before(t)).collect()
        }
        TimeTransform::Rank => {
            // Residual rows are time-sorted; tied times get the average rank.
            let ts: Vec<f64> = times.collect();
            let mut ranks = vec![0.0; ts.len()];
            let mut i = 0;
            while i < ts.len() {
                let mut j = i;
                while j < ts.len() && ts[j] == ts[i] {
                    j += 1;
                }
                let avg = (i + j + 1) as f64 / 2.0;
                ranks[i..j].fill(avg);
                i = j;
            }
            ranks
        }
    })
}

fn correlation_test(
    fit: &CoxFit,
    data: &SurvivalDataset,
    transform: TimeTransform,
    kind: PhTestKind,
) -> Result<PhTestResult> {
    let res = schoenfeld_residuals(fit, data)?;
    if res.rows.len() < 2 {
        return Err(NphError::Degenerate("PH test needs at least two events".into()));
    }
    let g = transformed_times(&res, data, transform)?;
    let gbar = g.iter().sum::<f64>() / g.len() as f64;
    let sxx: f64 = g.iter().map(|x| (x - gbar) * (x - gbar)).sum();
    if !(sxx > 0.0) {
        return Err(NphError::Degenerate("all events occur at one time".into()));
    }
    let sxr: f64 = g.iter().zip(&res.rows).map(|(x, r)| (x - gbar) * r.residual).sum();
    let statistic = fit.n_events as f64 * fit.var_beta * sxr * sxr / sxx;
    Ok(PhTestResult { kind, statistic, df: 1, p: chi2_1_sf(statistic) })
}

/// Score test of the scaled Schoenfeld residuals against `g(t)`.
pub fn grambsch_therneau_test(fit: &CoxFit, data: &SurvivalDataset, transform: TimeTransform) -> Result<PhTestResult> {
    correlation_test(fit, data, transform, PhTestKind::GrambschTherneau)
}

/// Global residual-versus-time test across all covariates, on the untransformed time scale.
pub fn schoenfeld_global_test(fit: &CoxFit, data: &SurvivalDataset) -> Result<PhTestResult> {
    correlation_test(fit, data, TimeTransform::Identity, PhTestKind::SchoenfeldGlobal)
}
