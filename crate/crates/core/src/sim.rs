//! Trial simulation: scenario presets, piecewise-exponential data generation
//! and seeded replication plans.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aft::{aft_fit, AftFamily, AftFit};
use crate::cox::cox_fit;
use crate::error::{NphError, Result};
use crate::logrank::{maxcombo_with, weighted_logrank, FhWeight, MaxComboOptions};
use crate::rmst::rmst_difference_test;
use crate::survival::{Arm, PiecewiseExp, Record, SurvivalDataset};

fn default_alpha() -> f64 {
    0.05
}

/// A two-arm trial design with piecewise-exponential hazards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub arm0: PiecewiseExp,
    pub arm1: PiecewiseExp,
    pub n0: usize,
    pub n1: usize,
    /// Administrative censoring horizon.
    pub followup: f64,
    /// Rate of independent exponential censoring; 0 disables it.
    #[serde(default)]
    pub random_censor_rate: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.n0 < 2 || self.n1 < 2 {
            return Err(NphError::InvalidInput("each arm needs at least 2 subjects".into()));
        }
        if !(self.followup > 0.0 && self.followup.is_finite()) {
            return Err(NphError::InvalidInput("follow-up must be positive and finite".into()));
        }
        if !(self.random_censor_rate >= 0.0 && self.random_censor_rate.is_finite()) {
            return Err(NphError::InvalidInput("censoring rate must be non-negative".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(NphError::InvalidInput("alpha must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn arm(&self, arm: Arm) -> &PiecewiseExp {
        match arm {
            Arm::Control => &self.arm0,
            Arm::Treatment => &self.arm1,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario =
            serde_json::from_str(text).map_err(|e| NphError::InvalidInput(format!("scenario JSON: {e}")))?;
        s.validate()?;
        Ok(s)
    }
}

fn pwexp(knots: &[f64], rates: &[f64]) -> PiecewiseExp {
    PiecewiseExp::new(knots.to_vec(), rates.to_vec()).expect("builtin hazards are valid")
}

fn cancel_out(name: &str, knots: &[f64], ratios: &[f64]) -> Scenario {
    let control = pwexp(knots, &vec![0.1; ratios.len()]);
    let treatment = control.with_hazard_ratios(ratios).expect("builtin ratios are valid");
    Scenario {
        name: name.into(),
        arm0: control,
        arm1: treatment,
        n0: 500,
        n1: 500,
        followup: 24.0,
        random_censor_rate: 0.01,
        alpha: 0.05,
    }
}

/// Names accepted by [`builtin_scenario`], in presentation order.
pub const BUILTIN_NAMES: [&str; 7] = ["first", "inovate", "gog0218", "null", "cancel1", "cancel2", "cancel3"];

/// The three case studies, the null scenario and the three cancel-out scenarios.
pub fn builtin_scenarios() -> Vec<Scenario> {
    let case = |name: &str, knots: &[f64], r0: &[f64], r1: &[f64], n: usize, followup: f64| Scenario {
        name: name.into(),
        arm0: pwexp(knots, r0),
        arm1: pwexp(knots, r1),
        n0: n,
        n1: n,
        followup,
        random_censor_rate: 0.0,
        alpha: 0.05,
    };
    vec![
        case(
            "first",
            &[0.0, 8.0, 20.0, 30.0, 60.0],
            &[0.028, 0.033, 0.050, 0.015],
            &[0.031, 0.027, 0.022, 0.009],
            541,
            60.0,
        ),
        case(
            "inovate",
            &[0.0, 4.0, 8.0, 12.0, 16.0, 42.0],
            &[0.106, 0.100, 0.075, 0.144, 0.144],
            &[0.068, 0.122, 0.083, 0.040, 0.020],
            163,
            42.0,
        ),
        case(
            "gog0218",
            &[0.0, 6.0, 15.0, 20.0, 30.0, 42.0],
            &[0.023, 0.097, 0.061, 0.032, 0.017],
            &[0.015, 0.044, 0.065, 0.150, 0.055],
            624,
            42.0,
        ),
        case("null", &[0.0], &[0.1], &[0.1], 163, 42.0),
        cancel_out("cancel1", &[0.0, 6.0, 10.0, 24.0], &[1.3, 0.1, 1.1]),
        cancel_out("cancel2", &[0.0, 5.0, 12.0, 24.0], &[1.6, 0.1, 1.2]),
        cancel_out("cancel3", &[0.0, 4.0, 13.0, 24.0], &[2.0, 0.1, 1.3]),
    ]
}

pub fn builtin_scenario(name: &str) -> Result<Scenario> {
    let key = name.to_ascii_lowercase().replace(['-', '_'], "");
    builtin_scenarios().into_iter().find(|s| s.name == key).ok_or_else(|| NphError::UnknownScenario(name.into()))
}

/// Draws one trial from `rng`: control subjects first, then treatment.
pub fn simulate_with_rng<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> SurvivalDataset {
    let mut records = Vec::with_capacity(scenario.n0 + scenario.n1);
    for (arm, n) in [(Arm::Control, scenario.n0), (Arm::Treatment, scenario.n1)] {
        let hazard = scenario.arm(arm);
        for _ in 0..n {
            // 1 − U lies in (0, 1], so the exponential draw is finite.
            let e = -(1.0 - rng.random::<f64>()).ln();
            let event_time = hazard.inverse_cumulative_hazard(e);
            let censor_time = if scenario.random_censor_rate > 0.0 {
                -(1.0 - rng.random::<f64>()).ln() / scenario.random_censor_rate
            } else {
                f64::INFINITY
            };
            let cutoff = censor_time.min(scenario.followup);
            records.push(if event_time <= cutoff {
                Record::new(event_time, true, arm)
            } else {
                Record::new(cutoff, false, arm)
            });
        }
    }
    SurvivalDataset::new(records).expect("simulated times are valid")
}

pub fn simulate_trial(scenario: &Scenario, seed: u64) -> SurvivalDataset {
    simulate_with_rng(scenario, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Generator for replication `index`: a separate ChaCha stream under the base seed.
pub fn replication_rng(base_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(index);
    rng
}

/// Analysis methods that produce a test of no treatment effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Logrank,
    Maxcombo,
    RmstDiff,
    Gg,
    Gf,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Logrank, Method::Maxcombo, Method::RmstDiff, Method::Gg, Method::Gf];

    pub fn name(self) -> &'static str {
        match self {
            Method::Logrank => "logrank",
            Method::Maxcombo => "maxcombo",
            Method::RmstDiff => "rmst_diff",
            Method::Gg => "gg",
            Method::Gf => "gf",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = NphError;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.name() == key || (key == "rmst" && *m == Method::RmstDiff))
            .ok_or_else(|| NphError::InvalidInput(format!("unknown method '{s}'")))
    }
}

/// Models that yield time-indexed estimates for bias curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Cox,
    Gg,
    Gf,
}

impl Model {
    pub const ALL: [Model; 3] = [Model::Cox, Model::Gg, Model::Gf];

    pub fn name(self) -> &'static str {
        match self {
            Model::Cox => "cox",
            Model::Gg => "gg",
            Model::Gf => "gf",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationPlan {
    pub scenario: Scenario,
    pub n_reps: usize,
    pub base_seed: u64,
    pub methods: Vec<Method>,
    /// Also fit the models on the bias grid (Cox always, GG/GF when requested).
    #[serde(default)]
    pub collect_estimates: bool,
    #[serde(default)]
    pub maxcombo: MaxComboOptions,
}

impl ReplicationPlan {
    pub fn new(scenario: Scenario, n_reps: usize, base_seed: u64) -> Self {
        ReplicationPlan {
            scenario,
            n_reps,
            base_seed,
            methods: Method::ALL.to_vec(),
            collect_estimates: false,
            maxcombo: MaxComboOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.n_reps == 0 {
            return Err(NphError::InvalidInput("at least one replication is required".into()));
        }
        if self.methods.is_empty() && !self.collect_estimates {
            return Err(NphError::InvalidInput("no methods requested".into()));
        }
        Ok(())
    }

    /// Evenly spaced grid on (0, followup] used for bias curves.
    pub fn grid(&self) -> Vec<f64> {
        bias_grid(self.scenario.followup)
    }
}

/// Number of points on the bias grid.
pub const GRID_POINTS: usize = 30;

pub fn bias_grid(followup: f64) -> Vec<f64> {
    (1..=GRID_POINTS).map(|k| followup * k as f64 / GRID_POINTS as f64).collect()
}

/// Outcome of one method on one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: Method,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    /// Set when the method could not produce a p-value.
    pub failure: Option<String>,
}

impl MethodOutcome {
    fn ok(method: Method, statistic: f64, p: f64) -> Self {
        MethodOutcome { method, statistic: Some(statistic), p_value: Some(p), failure: None }
    }

    fn failed(method: Method, reason: String) -> Self {
        MethodOutcome { method, statistic: None, p_value: None, failure: Some(reason) }
    }

    pub fn rejects(&self, alpha: f64) -> Option<bool> {
        self.p_value.map(|p| p < alpha)
    }
}

/// Model predictions on the bias grid for one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEstimates {
    pub model: Model,
    /// Treatment minus control RMST at each grid time.
    pub rmst_diff: Vec<f64>,
    /// Treatment minus control survival at each grid time.
    pub surv_diff: Vec<f64>,
    /// Median survival per arm; `None` when not reached within follow-up.
    pub median: [Option<f64>; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelOutcome {
    pub model: Model,
    pub estimates: Option<ModelEstimates>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub index: usize,
    pub outcomes: Vec<MethodOutcome>,
    pub models: Vec<ModelOutcome>,
}

/// Simulates and analyzes one replication of the plan.
pub fn run_replication(plan: &ReplicationPlan, index: usize) -> Replication {
    let data = simulate_with_rng(&plan.scenario, &mut replication_rng(plan.base_seed, index as u64));
    analyze_replication(plan, index, &data)
}

fn analyze_replication(plan: &ReplicationPlan, index: usize, data: &SurvivalDataset) -> Replication {
    let wants = |m: Method| plan.methods.contains(&m);
    let mut outcomes = Vec::with_capacity(plan.methods.len());
    let mut models = Vec::new();
    let grid = plan.grid();
    let followup = plan.scenario.followup;

    for method in Method::ALL.into_iter().filter(|&m| wants(m)) {
        let outcome = match method {
            Method::Logrank => match weighted_logrank(data, FhWeight::LOGRANK) {
                Ok(r) => MethodOutcome::ok(method, r.z, r.p_two_sided),
                Err(e) => MethodOutcome::failed(method, e.to_string()),
            },
            Method::Maxcombo => match maxcombo_with(data, plan.maxcombo) {
                Ok(r) => MethodOutcome::ok(method, r.z_max, r.p_two_sided),
                Err(e) => MethodOutcome::failed(method, e.to_string()),
            },
            Method::RmstDiff => match rmst_difference_test(data) {
                Ok(r) => MethodOutcome::ok(method, r.z, r.p_two_sided),
                Err(e) => MethodOutcome::failed(method, e.to_string()),
            },
            Method::Gg | Method::Gf => {
                let family = if method == Method::Gg { AftFamily::Gg } else { AftFamily::Gf };
                let model = if method == Method::Gg { Model::Gg } else { Model::Gf };
                let fit = aft_fit(data, family);
                if plan.collect_estimates {
                    models.push(match &fit {
                        Ok(f) if f.converged => ModelOutcome {
                            model,
                            estimates: Some(aft_estimates(model, f, &grid, followup)),
                            failure: None,
                        },
                        Ok(_) => ModelOutcome { model, estimates: None, failure: Some("did not converge".into()) },
                        Err(e) => ModelOutcome { model, estimates: None, failure: Some(e.to_string()) },
                    });
                }
                match fit {
                    Ok(f) => match (f.is_usable(), f.wald) {
                        (true, Some(w)) => MethodOutcome::ok(method, w.statistic, w.p),
                        _ => MethodOutcome::failed(method, aft_failure_reason(&f)),
                    },
                    Err(e) => MethodOutcome::failed(method, e.to_string()),
                }
            }
        };
        outcomes.push(outcome);
    }

    if plan.collect_estimates {
        let cox = match cox_fit(data) {
            Ok(fit) => {
                let p0 = fit.predict(Arm::Control);
                let p1 = fit.predict(Arm::Treatment);
                let within = |m: Option<f64>| m.filter(|&v| v <= followup);
                ModelOutcome {
                    model: Model::Cox,
                    estimates: Some(ModelEstimates {
                        model: Model::Cox,
                        rmst_diff: grid.iter().map(|&t| p1.rmst(t) - p0.rmst(t)).collect(),
                        surv_diff: grid.iter().map(|&t| p1.survival(t) - p0.survival(t)).collect(),
                        median: [within(p0.median()), within(p1.median())],
                    }),
                    failure: None,
                }
            }
            Err(e) => ModelOutcome { model: Model::Cox, estimates: None, failure: Some(e.to_string()) },
        };
        models.insert(0, cox);
    }
    Replication { index, outcomes, models }
}

fn aft_failure_reason(fit: &AftFit) -> String {
    if fit.shape_diverged {
        "shape estimates diverge".into()
    } else if !fit.converged {
        format!("did not converge (max |gradient| {:.3e})", fit.gradient_max)
    } else {
        "observed information is not positive definite".into()
    }
}

fn aft_estimates(model: Model, fit: &AftFit, grid: &[f64], followup: f64) -> ModelEstimates {
    let d0 = fit.distribution(Arm::Control);
    let d1 = fit.distribution(Arm::Treatment);
    let r0 = d0.rmst_grid(grid);
    let r1 = d1.rmst_grid(grid);
    let median = |d: &crate::aft::AftDistribution| Some(d.median()).filter(|m| m.is_finite() && *m <= followup);
    ModelEstimates {
        model,
        rmst_diff: r1.iter().zip(&r0).map(|(a, b)| a - b).collect(),
        surv_diff: grid.iter().map(|&t| d1.survival(t) - d0.survival(t)).collect(),
        median: [median(&d0), median(&d1)],
    }
}

/// Runs every replication, in parallel when `workers` allows, and returns
/// them in index order. Results do not depend on the worker count.
pub fn run_plan(plan: &ReplicationPlan, workers: Option<usize>) -> Result<Vec<Replication>> {
    plan.validate()?;
    let run = || (0..plan.n_reps).into_par_iter().map(|i| run_replication(plan, i)).collect();
    match workers {
        Some(1) => Ok((0..plan.n_reps).map(|i| run_replication(plan, i)).collect()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| NphError::InvalidInput(format!("worker pool: {e}")))?;
            Ok(pool.install(run))
        }
        None => Ok(run()),
    }
}
