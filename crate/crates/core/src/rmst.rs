//! Restricted mean survival time and the two-arm ΔRMST test.

use serde::{Deserialize, Serialize};

use crate::error::{NphError, Result};
use crate::special::two_sided_p;
use crate::survival::{km_estimate, Arm, SurvivalDataset};

/// Truncation-time rule for the two-arm test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TStarRule {
    /// Smaller of the two arms' largest event times.
    #[default]
    MaxEventTimes,
    /// Smaller of the two arms' largest observed times, censored or not.
    MaxObservedTimes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmstEstimate {
    pub mu: f64,
    pub var: f64,
}

/// Area under the KM curve of `data` on `[0, t_star]`, with a Greenwood-type
/// variance `Σ A(t_s)² dN / (Y (Y − dN))`, `A(t_s) = ∫_{t_s}^{t*} Ŝ`.
pub fn rmst_estimate(data: &SurvivalDataset, t_star: f64) -> Result<RmstEstimate> {
    if !(t_star > 0.0) || !t_star.is_finite() {
        return Err(NphError::InvalidInput(format!("t* must be positive, got {t_star}")));
    }
    let km = km_estimate(data)?;
    let steps: Vec<_> = km.steps.iter().filter(|s| s.time <= t_star).collect();

    // Cumulative area up to each step time.
    let mut cum = Vec::with_capacity(steps.len());
    let mut area = 0.0;
    let mut prev_t = 0.0;
    let mut prev_s = 1.0;
    for s in &steps {
        area += prev_s * (s.time - prev_t);
        cum.push(area);
        prev_t = s.time;
        prev_s = s.surv;
    }
    let mu = area + prev_s * (t_star - prev_t);

    let var = steps
        .iter()
        .zip(&cum)
        .map(|(s, c)| {
            let remaining = s.at_risk - s.events;
            if remaining == 0 {
                // Ŝ drops to 0 here, so A(t_s) = 0 as well.
                return 0.0;
            }
            let a = mu - c;
            a * a * s.events as f64 / (s.at_risk as f64 * remaining as f64)
        })
        .sum();
    Ok(RmstEstimate { mu, var })
}

pub fn select_t_star(data: &SurvivalDataset) -> Result<f64> {
    select_t_star_with(data, TStarRule::default())
}

pub fn select_t_star_with(data: &SurvivalDataset, rule: TStarRule) -> Result<f64> {
    data.require_two_arms()?;
    let mut t = f64::INFINITY;
    for arm in Arm::BOTH {
        let last = match rule {
            TStarRule::MaxEventTimes => data
                .max_event_time(arm)
                .ok_or_else(|| NphError::Degenerate(format!("arm {} has no events", arm.index())))?,
            TStarRule::MaxObservedTimes => {
                data.records().iter().filter(|r| r.arm == arm).map(|r| r.time).fold(0.0, f64::max)
            }
        };
        t = t.min(last);
    }
    if !(t > 0.0) {
        return Err(NphError::Degenerate("truncation time is zero".into()));
    }
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmstResult {
    pub t_star: f64,
    pub mu0: f64,
    pub mu1: f64,
    /// `mu1 − mu0`.
    pub delta: f64,
    pub se_delta: f64,
    pub z: f64,
    pub p_two_sided: f64,
}

pub fn rmst_difference_test(data: &SurvivalDataset) -> Result<RmstResult> {
    rmst_difference_test_at(data, select_t_star(data)?)
}

pub fn rmst_difference_test_at(data: &SurvivalDataset, t_star: f64) -> Result<RmstResult> {
    data.require_two_arms()?;
    let e0 = rmst_estimate(&data.arm_subset(Arm::Control), t_star)?;
    let e1 = rmst_estimate(&data.arm_subset(Arm::Treatment), t_star)?;
    let delta = e1.mu - e0.mu;
    let var = e0.var + e1.var;
    if !(var > 0.0) {
        return Err(NphError::Degenerate("ΔRMST has zero variance".into()));
    }
    let se_delta = var.sqrt();
    let z = delta / se_delta;
    Ok(RmstResult { t_star, mu0: e0.mu, mu1: e1.mu, delta, se_delta, z, p_two_sided: two_sided_p(z) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::Record;

    fn ds(rows: &[(f64, bool, u8)]) -> SurvivalDataset {
        SurvivalDataset::new(rows.iter().map(|&(t, e, a)| Record::new(t, e, Arm::from_code(a).unwrap())).collect())
            .unwrap()
    }

    #[test]
    fn no_events_before_t_star() {
        let data = ds(&[(5.0, true, 0), (6.0, false, 0)]);
        let e = rmst_estimate(&data, 4.0).unwrap();
        assert_eq!(e.mu, 4.0);
        assert_eq!(e.var, 0.0);
    }

    #[test]
    fn step_area_hand_value() {
        let data = ds(&[(1.0, true, 0), (2.0, true, 0), (3.0, true, 0)]);
        let e = rmst_estimate(&data, 3.0).unwrap();
        assert!((e.mu - 2.0).abs() < 1e-15);
        // A(1) = 2/3 + 1/3 = 1, A(2) = 1/3; terms 1/(3·2) and (1/9)/(2·1).
        let var = 1.0 / 6.0 + (1.0 / 9.0) / 2.0;
        assert!((e.var - var).abs() < 1e-15);
    }

    #[test]
    fn t_star_rule() {
        let data = ds(&[(5.0, true, 0), (50.0, false, 0), (3.0, true, 1), (7.0, true, 1)]);
        assert_eq!(select_t_star(&data).unwrap(), 5.0);
        assert_eq!(select_t_star_with(&data, TStarRule::MaxObservedTimes).unwrap(), 7.0);
        let data = ds(&[(24.0, true, 0), (24.0, true, 1), (1.0, true, 1)]);
        assert_eq!(select_t_star(&data).unwrap(), 24.0);
        let data = ds(&[(5.0, false, 0), (3.0, true, 1)]);
        assert!(matches!(select_t_star(&data), Err(NphError::Degenerate(_))));
    }

    #[test]
    fn errors() {
        let data = ds(&[(1.0, true, 0)]);
        assert!(rmst_estimate(&data, 0.0).is_err());
        assert_eq!(rmst_estimate(&SurvivalDataset::default(), 1.0), Err(NphError::EmptyDataset));
    }

    #[test]
    fn identical_arms_and_swap() {
        let mut rows = Vec::new();
        for (t, e) in [(1.0, true), (2.0, false), (4.0, true), (6.0, true), (8.0, false)] {
            rows.push((t, e, 0));
            rows.push((t, e, 1));
        }
        let r = rmst_difference_test(&ds(&rows)).unwrap();
        assert_eq!(r.delta, 0.0);
        assert_eq!(r.p_two_sided, 1.0);

        let data =
            ds(&[(1.0, true, 0), (2.0, true, 0), (5.0, false, 0), (3.0, true, 1), (4.0, true, 1), (6.0, true, 1)]);
        let a = rmst_difference_test(&data).unwrap();
        let b = rmst_difference_test(&data.with_arms_swapped()).unwrap();
        assert_eq!(a.delta, -b.delta);
        assert_eq!(a.p_two_sided, b.p_two_sided);
    }
}
