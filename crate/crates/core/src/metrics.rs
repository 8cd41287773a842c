//! Power, type I error and time-dependent bias aggregated over replications.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{NphError, Result};
use crate::sim::{bias_grid, Method, Model, ModelEstimates, Replication, ReplicationPlan, Scenario};
use crate::survival::Arm;

/// Censoring-free truth at one time point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueTheta {
    pub rmst_diff: f64,
    pub surv_diff: f64,
    pub median0: f64,
    pub median1: f64,
}

pub fn true_theta(scenario: &Scenario, t: f64) -> TrueTheta {
    let (a0, a1) = (&scenario.arm0, &scenario.arm1);
    TrueTheta {
        rmst_diff: a1.rmst(t) - a0.rmst(t),
        surv_diff: a1.survival(t) - a0.survival(t),
        median0: a0.median(),
        median1: a1.median(),
    }
}

/// Truth on a grid of times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthCurves {
    pub times: Vec<f64>,
    pub rmst_diff: Vec<f64>,
    pub surv_diff: Vec<f64>,
    pub median: [f64; 2],
}

pub fn truth_on_grid(scenario: &Scenario, times: &[f64]) -> TruthCurves {
    let at: Vec<TrueTheta> = times.iter().map(|&t| true_theta(scenario, t)).collect();
    TruthCurves {
        times: times.to_vec(),
        rmst_diff: at.iter().map(|v| v.rmst_diff).collect(),
        surv_diff: at.iter().map(|v| v.surv_diff).collect(),
        median: [scenario.arm0.median(), scenario.arm1.median()],
    }
}

/// Median of the values; the mean of the middle pair for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Pointwise median and mean of `estimate − truth` over replications.
///
/// Every row must have the length of `truth`. Returns `None` with no rows.
pub fn bias_curves(estimates: &[Vec<f64>], truth: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    if estimates.is_empty() {
        return None;
    }
    let mut med = Vec::with_capacity(truth.len());
    let mut avg = Vec::with_capacity(truth.len());
    let mut column = Vec::with_capacity(estimates.len());
    for (k, &theta) in truth.iter().enumerate() {
        column.clear();
        column.extend(estimates.iter().map(|row| row[k] - theta));
        med.push(median(&column)?);
        avg.push(mean(&column)?);
    }
    Some((med, avg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSummary {
    pub method: Method,
    /// Replications that produced a p-value.
    pub n_success: usize,
    pub n_failed: usize,
    pub n_reject: usize,
    /// Fraction of successful replications with `p < alpha`.
    pub rejection_rate: Option<f64>,
    /// Binomial standard error `sqrt(f (1 − f) / n)`.
    pub se: Option<f64>,
}

pub fn power_summary(reps: &[Replication], method: Method, alpha: f64) -> PowerSummary {
    let mut n_success = 0;
    let mut n_failed = 0;
    let mut n_reject = 0;
    for o in reps.iter().flat_map(|r| r.outcomes.iter().filter(|o| o.method == method)) {
        match o.rejects(alpha) {
            Some(rej) => {
                n_success += 1;
                n_reject += rej as usize;
            }
            None => n_failed += 1,
        }
    }
    let rate = (n_success > 0).then(|| n_reject as f64 / n_success as f64);
    PowerSummary {
        method,
        n_success,
        n_failed,
        n_reject,
        rejection_rate: rate,
        se: rate.map(|f| (f * (1.0 - f) / n_success as f64).sqrt()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    RmstDiff,
    SurvDiff,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::RmstDiff => "rmst_diff",
            Quantity::SurvDiff => "surv_diff",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasCurve {
    pub model: Model,
    pub quantity: Quantity,
    /// `None` when the model never fitted successfully.
    pub median_bias: Option<Vec<f64>>,
    pub mean_bias: Option<Vec<f64>>,
    pub n_used: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianSurvivalBias {
    pub model: Model,
    pub arm: Arm,
    pub truth: f64,
    pub median_bias: Option<f64>,
    pub mean_bias: Option<f64>,
    pub n_used: usize,
    /// Replications whose estimated curve stays above 0.5 within follow-up.
    pub n_not_reached: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub n_reps: usize,
    pub base_seed: u64,
    pub alpha: f64,
    pub power: Vec<PowerSummary>,
    pub truth: TruthCurves,
    pub bias: Vec<BiasCurve>,
    pub median_survival_bias: Vec<MedianSurvivalBias>,
}

fn model_estimates(reps: &[Replication], model: Model) -> (Vec<&ModelEstimates>, usize) {
    let mut ok = Vec::new();
    let mut failed = 0;
    for m in reps.iter().flat_map(|r| r.models.iter().filter(|m| m.model == model)) {
        match &m.estimates {
            Some(e) if e.rmst_diff.iter().chain(&e.surv_diff).all(|v| v.is_finite()) => ok.push(e),
            _ => failed += 1,
        }
    }
    (ok, failed)
}

/// Aggregates a plan's replications into a report.
pub fn build_report(plan: &ReplicationPlan, reps: &[Replication]) -> Result<ScenarioReport> {
    if reps.is_empty() {
        return Err(NphError::InvalidInput("no replications to summarize".into()));
    }
    let alpha = plan.scenario.alpha;
    let grid = bias_grid(plan.scenario.followup);
    let truth = truth_on_grid(&plan.scenario, &grid);
    let power =
        Method::ALL.into_iter().filter(|m| plan.methods.contains(m)).map(|m| power_summary(reps, m, alpha)).collect();

    let mut bias = Vec::new();
    let mut median_survival_bias = Vec::new();
    for model in Model::ALL {
        let (ok, n_failed) = model_estimates(reps, model);
        if ok.is_empty() && n_failed == 0 {
            continue;
        }
        for quantity in [Quantity::RmstDiff, Quantity::SurvDiff] {
            let (rows, truth_row): (Vec<Vec<f64>>, &[f64]) = match quantity {
                Quantity::RmstDiff => (ok.iter().map(|e| e.rmst_diff.clone()).collect(), &truth.rmst_diff),
                Quantity::SurvDiff => (ok.iter().map(|e| e.surv_diff.clone()).collect(), &truth.surv_diff),
            };
            let curves = bias_curves(&rows, truth_row);
            bias.push(BiasCurve {
                model,
                quantity,
                median_bias: curves.as_ref().map(|c| c.0.clone()),
                mean_bias: curves.map(|c| c.1),
                n_used: ok.len(),
                n_failed,
            });
        }
        for arm in Arm::BOTH {
            let t = truth.median[arm.index()];
            let diffs: Vec<f64> = ok.iter().filter_map(|e| e.median[arm.index()]).map(|m| m - t).collect();
            median_survival_bias.push(MedianSurvivalBias {
                model,
                arm,
                truth: t,
                median_bias: median(&diffs),
                mean_bias: mean(&diffs),
                n_used: diffs.len(),
                n_not_reached: ok.len() - diffs.len(),
                n_failed,
            });
        }
    }

    Ok(ScenarioReport {
        scenario: plan.scenario.name.clone(),
        n_reps: reps.len(),
        base_seed: plan.base_seed,
        alpha,
        power,
        truth,
        bias,
        median_survival_bias,
    })
}

impl ScenarioReport {
    pub fn power_of(&self, method: Method) -> Option<&PowerSummary> {
        self.power.iter().find(|p| p.method == method)
    }

    pub fn bias_of(&self, model: Model, quantity: Quantity) -> Option<&BiasCurve> {
        self.bias.iter().find(|b| b.model == model && b.quantity == quantity)
    }

    pub fn median_survival_bias_of(&self, model: Model, arm: Arm) -> Option<&MedianSurvivalBias> {
        self.median_survival_bias.iter().find(|b| b.model == model && b.arm == arm)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| NphError::Io(e.to_string()))
    }

    /// One row per scenario × method × metric × grid time; `time` is empty
    /// for metrics that are not time-indexed.
    pub fn write_tidy_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| NphError::Io(e.to_string());
        w.write_record(["scenario", "method", "metric", "time", "value"]).map_err(io)?;
        let mut row = |method: &str, metric: &str, time: Option<f64>, value: f64| {
            let time = time.map(|t| t.to_string()).unwrap_or_default();
            w.write_record([self.scenario.as_str(), method, metric, &time, &value.to_string()])
        };
        for p in &self.power {
            let name = p.method.name();
            if let (Some(rate), Some(se)) = (p.rejection_rate, p.se) {
                row(name, "rejection_rate", None, rate).map_err(io)?;
                row(name, "rejection_se", None, se).map_err(io)?;
            }
            row(name, "n_success", None, p.n_success as f64).map_err(io)?;
            row(name, "n_failed", None, p.n_failed as f64).map_err(io)?;
        }
        for (k, &t) in self.truth.times.iter().enumerate() {
            row("truth", "rmst_diff", Some(t), self.truth.rmst_diff[k]).map_err(io)?;
            row("truth", "surv_diff", Some(t), self.truth.surv_diff[k]).map_err(io)?;
        }
        for b in &self.bias {
            let (Some(med), Some(avg)) = (&b.median_bias, &b.mean_bias) else { continue };
            let q = b.quantity.name();
            for (k, &t) in self.truth.times.iter().enumerate() {
                row(b.model.name(), &format!("median_bias_{q}"), Some(t), med[k]).map_err(io)?;
                row(b.model.name(), &format!("mean_bias_{q}"), Some(t), avg[k]).map_err(io)?;
            }
        }
        for b in &self.median_survival_bias {
            let arm = if b.arm == Arm::Control { "control" } else { "treatment" };
            if let Some(v) = b.median_bias {
                row(b.model.name(), &format!("median_bias_median_survival_{arm}"), None, v).map_err(io)?;
            }
            if let Some(v) = b.mean_bias {
                row(b.model.name(), &format!("mean_bias_median_survival_{arm}"), None, v).map_err(io)?;
            }
            row(b.model.name(), &format!("not_reached_{arm}"), None, b.n_not_reached as f64).map_err(io)?;
        }
        w.flush().map_err(NphError::from)?;
        Ok(())
    }

    /// Plain-text power table for terminal output.
    pub fn power_table(&self) -> String {
        let mut s = format!("scenario {} ({} replications, alpha {})\n", self.scenario, self.n_reps, self.alpha);
        s.push_str(&format!("{:<10} {:>9} {:>8} {:>8}\n", "method", "rejection", "se", "failed"));
        for p in &self.power {
            let (rate, se) = match (p.rejection_rate, p.se) {
                (Some(r), Some(e)) => (format!("{r:.4}"), format!("{e:.4}")),
                _ => ("-".into(), "-".into()),
            };
            s.push_str(&format!("{:<10} {:>9} {:>8} {:>8}\n", p.method.name(), rate, se, p.n_failed));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{builtin_scenario, run_plan, MethodOutcome};

    #[test]
    fn null_truth_is_zero() {
        let s = builtin_scenario("null").unwrap();
        for t in bias_grid(s.followup) {
            let v = true_theta(&s, t);
            assert_eq!((v.rmst_diff, v.surv_diff), (0.0, 0.0));
        }
    }

    #[test]
    fn cancel1_survival_difference_at_six_months() {
        let s = builtin_scenario("cancel1").unwrap();
        let v = true_theta(&s, 6.0);
        let expected = (-0.1f64 * 1.3 * 6.0).exp() - (-0.6f64).exp();
        assert!((v.surv_diff - expected).abs() < 1e-14);
        assert!((v.surv_diff - -0.0904).abs() < 5e-5);
    }

    #[test]
    fn first_median_matches_bisection() {
        let s = builtin_scenario("first").unwrap();
        let (mut lo, mut hi) = (0.0, 200.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if s.arm0.survival(mid) > 0.5 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((true_theta(&s, 10.0).median0 - 0.5 * (lo + hi)).abs() < 1e-8);
    }

    #[test]
    fn bias_of_shifted_estimates_is_the_shift() {
        let truth = vec![0.5, 1.0, -2.0];
        assert_eq!(bias_curves(&[truth.clone(), truth.clone()], &truth).unwrap().0, vec![0.0; 3]);
        let rows: Vec<Vec<f64>> = (0..5).map(|k| truth.iter().map(|v| v + 0.25 + k as f64 * 1e-3).collect()).collect();
        let (med, _) = bias_curves(&rows, &truth).unwrap();
        assert!(med.iter().all(|b| (b - 0.252).abs() < 1e-12));
        assert!(bias_curves(&[], &truth).is_none());
    }

    #[test]
    fn median_ignores_order() {
        let v = [3.0, -1.0, 7.5, 2.0];
        let mut r = v;
        r.reverse();
        assert_eq!(median(&v), median(&r));
        assert_eq!(median(&v), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn power_counts_and_failures() {
        let rep = |i, p: Option<f64>| Replication {
            index: i,
            outcomes: vec![MethodOutcome {
                method: Method::Logrank,
                statistic: p,
                p_value: p,
                failure: p.is_none().then(|| "x".to_string()),
            }],
            models: vec![],
        };
        let reps = vec![rep(0, Some(0.01)), rep(1, Some(0.2)), rep(2, None), rep(3, Some(0.04))];
        let s = power_summary(&reps, Method::Logrank, 0.05);
        assert_eq!((s.n_success, s.n_failed, s.n_reject), (3, 1, 2));
        let f = 2.0 / 3.0;
        assert!((s.rejection_rate.unwrap() - f).abs() < 1e-15);
        assert!((s.se.unwrap() - (f * (1.0 - f) / 3.0f64).sqrt()).abs() < 1e-15);
        let all = vec![rep(0, Some(0.0)), rep(1, Some(0.001))];
        assert_eq!(power_summary(&all, Method::Logrank, 0.05).rejection_rate, Some(1.0));
    }

    #[test]
    fn report_round_trip_and_csv() {
        let mut plan = ReplicationPlan::new(builtin_scenario("null").unwrap(), 8, 5);
        plan.methods = vec![Method::Logrank, Method::RmstDiff];
        plan.collect_estimates = true;
        let reps = run_plan(&plan, Some(1)).unwrap();
        let report = build_report(&plan, &reps).unwrap();
        assert_eq!(report.power.len(), 2);
        let cox = report.bias_of(Model::Cox, Quantity::RmstDiff).unwrap();
        assert_eq!(cox.median_bias.as_ref().unwrap().len(), 30);
        assert!(report.bias_of(Model::Gg, Quantity::RmstDiff).is_none());
        let back: ScenarioReport = serde_json::from_str(&report.to_json().unwrap()).unwrap();
        assert_eq!(back, report);
        let mut buf = Vec::new();
        report.write_tidy_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("scenario,method,metric,time,value\n"));
        assert!(text.contains("null,logrank,rejection_rate,,"));
        assert_eq!(text.lines().filter(|l| l.starts_with("null,cox,median_bias_rmst_diff,")).count(), 30);
        assert!(report.power_table().contains("logrank"));
    }
}
