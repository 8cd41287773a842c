//! Weighted log-rank tests with Fleming–Harrington weights and the MaxCombo
//! combination test.

use serde::{Deserialize, Serialize};

use crate::error::{NphError, Result};
use crate::mvn::{independent_box_probability, mvn_box_probability};
use crate::special::two_sided_p;
use crate::survival::{build_event_table, EventTable, KmCurve, SurvivalDataset};

/// Fleming–Harrington G(ρ, γ) weight `Ŝ^ρ (1 − Ŝ)^γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FhWeight {
    pub rho: f64,
    pub gamma: f64,
}

impl FhWeight {
    pub const LOGRANK: FhWeight = FhWeight { rho: 0.0, gamma: 0.0 };
    /// Emphasizes early differences.
    pub const EARLY: FhWeight = FhWeight { rho: 1.0, gamma: 0.0 };
    /// Emphasizes late differences.
    pub const LATE: FhWeight = FhWeight { rho: 0.0, gamma: 1.0 };
    /// Emphasizes differences in the middle of follow-up.
    pub const MIDDLE: FhWeight = FhWeight { rho: 1.0, gamma: 1.0 };

    /// MaxCombo components in reporting order.
    pub const COMBO: [FhWeight; 3] = [FhWeight::EARLY, FhWeight::LATE, FhWeight::MIDDLE];

    pub fn new(rho: f64, gamma: f64) -> Result<Self> {
        if !(rho >= 0.0 && gamma >= 0.0 && rho.is_finite() && gamma.is_finite()) {
            return Err(NphError::InvalidInput(format!(
                "weight exponents must be finite and non-negative, got ({rho}, {gamma})"
            )));
        }
        Ok(FhWeight { rho, gamma })
    }

    /// Weight at pooled survival value `s` (with `0^0 = 1`).
    pub fn eval(&self, s: f64) -> f64 {
        s.powf(self.rho) * (1.0 - s).powf(self.gamma)
    }
}

/// Which pooled survival value feeds the weight at an event time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSurvival {
    /// Left limit `Ŝ(t−)`, which keeps the weight predictable.
    #[default]
    LeftLimit,
    /// `Ŝ(t)` including the events at `t`.
    AtTime,
}

/// Weight values at the given event times from a pooled KM curve.
pub fn fh_weight_values(curve: &KmCurve, event_times: &[f64], w: FhWeight, mode: WeightSurvival) -> Vec<f64> {
    event_times
        .iter()
        .map(|&t| {
            let s = match mode {
                WeightSurvival::LeftLimit => curve.surv_before(t),
                WeightSurvival::AtTime => curve.surv_at(t),
            };
            w.eval(s)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WlrResult {
    /// Weighted observed minus expected events in the treatment arm.
    pub u: f64,
    pub se: f64,
    pub z: f64,
    pub p_two_sided: f64,
}

/// Per-row pieces shared by every weight: `ΔN1 − Y1ΔN/Y` and the
/// hypergeometric variance factor.
struct RowTerms {
    o_minus_e: Vec<f64>,
    var: Vec<f64>,
    surv: Vec<f64>,
}

impl RowTerms {
    fn new(table: &EventTable, mode: WeightSurvival) -> Self {
        let n = table.rows.len();
        let mut o_minus_e = Vec::with_capacity(n);
        let mut var = Vec::with_capacity(n);
        let mut surv = Vec::with_capacity(n);
        let mut s = 1.0;
        for row in &table.rows {
            let y = row.at_risk as f64;
            let y0 = row.at_risk0 as f64;
            let y1 = row.at_risk1 as f64;
            let d = row.events as f64;
            // (dN1·Y0 − dN0·Y1)/Y: integer products are exact, so relabeling
            // the arms negates the term bit for bit.
            let cross = row.events1 as f64 * y0 - row.events0 as f64 * y1;
            o_minus_e.push(cross / y);
            var.push(if row.at_risk > 1 { y1 * y0 / (y * y) * (y - d) / (y - 1.0) * d } else { 0.0 });
            let after = s * (1.0 - d / y);
            surv.push(match mode {
                WeightSurvival::LeftLimit => s,
                WeightSurvival::AtTime => after,
            });
            s = after;
        }
        RowTerms { o_minus_e, var, surv }
    }

    fn weights(&self, w: FhWeight) -> Vec<f64> {
        self.surv.iter().map(|&s| w.eval(s)).collect()
    }
}

fn finish(u: f64, var: f64, what: &str) -> Result<WlrResult> {
    if !(var > 0.0) {
        return Err(NphError::Degenerate(format!("{what} has zero variance")));
    }
    let se = var.sqrt();
    let z = u / se;
    Ok(WlrResult { u, se, z, p_two_sided: two_sided_p(z) })
}

/// Weighted log-rank statistic from explicit per-row weights.
pub fn weighted_logrank_with_weights(table: &EventTable, weights: &[f64]) -> Result<WlrResult> {
    if weights.len() != table.rows.len() {
        return Err(NphError::InvalidInput(format!("{} weights for {} event times", weights.len(), table.rows.len())));
    }
    if table.rows.is_empty() {
        return Err(NphError::Degenerate("no events observed".into()));
    }
    let terms = RowTerms::new(table, WeightSurvival::LeftLimit);
    let u = weights.iter().zip(&terms.o_minus_e).map(|(w, x)| w * x).sum();
    let var = weights.iter().zip(&terms.var).map(|(w, v)| w * w * v).sum();
    finish(u, var, "weighted log-rank statistic")
}

pub fn weighted_logrank(data: &SurvivalDataset, w: FhWeight) -> Result<WlrResult> {
    weighted_logrank_mode(data, w, WeightSurvival::default())
}

pub fn weighted_logrank_mode(data: &SurvivalDataset, w: FhWeight, mode: WeightSurvival) -> Result<WlrResult> {
    let table = build_event_table(data)?;
    if table.rows.is_empty() {
        return Err(NphError::Degenerate("no events observed".into()));
    }
    let terms = RowTerms::new(&table, mode);
    let weights = terms.weights(w);
    let u = weights.iter().zip(&terms.o_minus_e).map(|(w, x)| w * x).sum();
    let var = weights.iter().zip(&terms.var).map(|(w, v)| w * w * v).sum();
    finish(u, var, "weighted log-rank statistic")
}

/// Null correlation used for the MaxCombo p-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComboCorrelation {
    /// Correlation estimated from the weighted variance sums.
    #[default]
    Estimated,
    /// Independent components.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MaxComboOptions {
    pub correlation: ComboCorrelation,
    pub weight_survival: WeightSurvival,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxComboResult {
    pub weights: [FhWeight; 3],
    pub component_z: [f64; 3],
    pub correlation: [[f64; 3]; 3],
    pub z_max: f64,
    pub p_two_sided: f64,
}

pub fn maxcombo(data: &SurvivalDataset) -> Result<MaxComboResult> {
    maxcombo_with(data, MaxComboOptions::default())
}

pub fn maxcombo_with(data: &SurvivalDataset, opts: MaxComboOptions) -> Result<MaxComboResult> {
    let table = build_event_table(data)?;
    if table.rows.is_empty() {
        return Err(NphError::Degenerate("no events observed".into()));
    }
    let terms = RowTerms::new(&table, opts.weight_survival);
    let weights: Vec<Vec<f64>> = FhWeight::COMBO.iter().map(|&w| terms.weights(w)).collect();

    let mut cov = [[0.0; 3]; 3];
    for k in 0..3 {
        for l in k..3 {
            let c: f64 = (0..terms.var.len()).map(|i| weights[k][i] * weights[l][i] * terms.var[i]).sum();
            cov[k][l] = c;
            cov[l][k] = c;
        }
    }
    let mut component_z = [0.0; 3];
    for k in 0..3 {
        if !(cov[k][k] > 0.0) {
            let w = FhWeight::COMBO[k];
            return Err(NphError::Degenerate(format!(
                "MaxCombo component {} (rho={}, gamma={}) has zero variance",
                k + 1,
                w.rho,
                w.gamma
            )));
        }
        let u: f64 = weights[k].iter().zip(&terms.o_minus_e).map(|(w, x)| w * x).sum();
        component_z[k] = u / cov[k][k].sqrt();
    }

    let correlation = match opts.correlation {
        ComboCorrelation::Identity => [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        ComboCorrelation::Estimated => {
            let mut r = [[1.0; 3]; 3];
            for k in 0..3 {
                for l in 0..3 {
                    if k != l {
                        r[k][l] = (cov[k][l] / (cov[k][k] * cov[l][l]).sqrt()).clamp(-1.0, 1.0);
                    }
                }
            }
            r
        }
    };
    let z_max = component_z.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    let p_two_sided = combo_p_value(&correlation, z_max, opts.correlation)?;
    Ok(MaxComboResult { weights: FhWeight::COMBO, component_z, correlation, z_max, p_two_sided })
}

/// `1 − P(max_k |Z_k| ≤ z)` under the given null correlation.
pub fn combo_p_value(r: &[[f64; 3]; 3], z: f64, mode: ComboCorrelation) -> Result<f64> {
    let inside = match mode {
        ComboCorrelation::Identity => independent_box_probability(z, 3),
        ComboCorrelation::Estimated => mvn_box_probability(r, z)?,
    };
    Ok((1.0 - inside).clamp(0.0, 1.0))
}
