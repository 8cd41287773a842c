//! Subject-level survival data, risk-set tables, the Kaplan–Meier estimator and
//! closed-form piecewise-exponential truth functions.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{NphError, Result};

/// Treatment assignment. `Control` is coded 0 and `Treatment` 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Control,
    Treatment,
}

impl Arm {
    pub const BOTH: [Arm; 2] = [Arm::Control, Arm::Treatment];

    pub fn index(self) -> usize {
        match self {
            Arm::Control => 0,
            Arm::Treatment => 1,
        }
    }

    /// Covariate value used by the regression models.
    pub fn indicator(self) -> f64 {
        self.index() as f64
    }

    pub fn from_code(code: u8) -> Option<Arm> {
        match code {
            0 => Some(Arm::Control),
            1 => Some(Arm::Treatment),
            _ => None,
        }
    }

    pub fn other(self) -> Arm {
        match self {
            Arm::Control => Arm::Treatment,
            Arm::Treatment => Arm::Control,
        }
    }
}

/// One subject: observed time (months), event indicator and arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub time: f64,
    /// `true` when the event was observed, `false` when right-censored.
    pub event: bool,
    pub arm: Arm,
}

impl Record {
    pub fn new(time: f64, event: bool, arm: Arm) -> Self {
        Record { time, event, arm }
    }
}

/// Right-censored time-to-event data for one or two arms.
///
/// Records are kept in input order; operations sort internally.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SurvivalDataset {
    records: Vec<Record>,
}

impl SurvivalDataset {
    pub fn new(records: Vec<Record>) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            if !r.time.is_finite() || r.time < 0.0 {
                return Err(NphError::InvalidInput(format!(
                    "record {i}: time must be finite and non-negative, got {}",
                    r.time
                )));
            }
        }
        Ok(SurvivalDataset { records })
    }

    pub fn from_columns(times: &[f64], events: &[bool], arms: &[Arm]) -> Result<Self> {
        if times.len() != events.len() || times.len() != arms.len() {
            return Err(NphError::InvalidInput(format!(
                "column lengths differ: {} times, {} events, {} arms",
                times.len(),
                events.len(),
                arms.len()
            )));
        }
        Self::new(
            times.iter().zip(events).zip(arms).map(|((&time, &event), &arm)| Record { time, event, arm }).collect(),
        )
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_events(&self) -> usize {
        self.records.iter().filter(|r| r.event).count()
    }

    pub fn count_arm(&self, arm: Arm) -> usize {
        self.records.iter().filter(|r| r.arm == arm).count()
    }

    /// Records belonging to one arm.
    pub fn arm_subset(&self, arm: Arm) -> SurvivalDataset {
        SurvivalDataset { records: self.records.iter().copied().filter(|r| r.arm == arm).collect() }
    }

    /// The same data with the arm labels exchanged.
    pub fn with_arms_swapped(&self) -> SurvivalDataset {
        SurvivalDataset { records: self.records.iter().map(|r| Record { arm: r.arm.other(), ..*r }).collect() }
    }

    /// Same data with every time multiplied by `factor`.
    pub fn scaled_times(&self, factor: f64) -> SurvivalDataset {
        SurvivalDataset { records: self.records.iter().map(|r| Record { time: r.time * factor, ..*r }).collect() }
    }

    pub fn require_nonempty(&self) -> Result<()> {
        if self.records.is_empty() {
            Err(NphError::EmptyDataset)
        } else {
            Ok(())
        }
    }

    pub fn require_two_arms(&self) -> Result<()> {
        self.require_nonempty()?;
        for arm in Arm::BOTH {
            if self.count_arm(arm) == 0 {
                return Err(NphError::SingleArm { missing: arm.index() as u8 });
            }
        }
        Ok(())
    }

    /// Largest observed event time in `arm`, if any.
    pub fn max_event_time(&self, arm: Arm) -> Option<f64> {
        self.records
            .iter()
            .filter(|r| r.arm == arm && r.event)
            .map(|r| r.time)
            .fold(None, |acc, t| Some(acc.map_or(t, |m: f64| m.max(t))))
    }

    /// Reads an IPD CSV with header `time,event,arm` (the `arm` column may be
    /// omitted for single-arm data, in which case every record is control).
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| NphError::Csv { line: 1, reason: e.to_string() })?.clone();
        let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
        let time_col = col("time").ok_or(NphError::Csv { line: 1, reason: "missing `time` column".into() })?;
        let event_col = col("event").ok_or(NphError::Csv { line: 1, reason: "missing `event` column".into() })?;
        let arm_col = col("arm");

        let mut records = Vec::new();
        for row in rdr.records() {
            let row = row.map_err(|e| NphError::Csv {
                line: e.position().map_or(0, |p| p.line() as usize),
                reason: e.to_string(),
            })?;
            let line = row.position().map_or(0, |p| p.line() as usize);
            let field = |idx: usize, what: &str| -> Result<&str> {
                row.get(idx).ok_or_else(|| NphError::Csv { line, reason: format!("missing {what} field") })
            };
            let time: f64 = field(time_col, "time")?
                .parse()
                .map_err(|_| NphError::Csv { line, reason: format!("time `{}` is not a number", &row[time_col]) })?;
            if !time.is_finite() || time < 0.0 {
                return Err(NphError::Csv {
                    line,
                    reason: format!("time must be finite and non-negative, got {time}"),
                });
            }
            let event = match field(event_col, "event")? {
                "0" => false,
                "1" => true,
                other => return Err(NphError::Csv { line, reason: format!("event must be 0 or 1, got `{other}`") }),
            };
            let arm = match arm_col {
                None => Arm::Control,
                Some(c) => match field(c, "arm")? {
                    "0" => Arm::Control,
                    "1" => Arm::Treatment,
                    other => return Err(NphError::Csv { line, reason: format!("arm must be 0 or 1, got `{other}`") }),
                },
            };
            records.push(Record { time, event, arm });
        }
        Self::new(records)
    }

    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())
            .map_err(|e| NphError::Io(format!("cannot open {}: {e}", path.as_ref().display())))?;
        Self::from_csv_reader(std::io::BufReader::new(file))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "time,event,arm")?;
        for r in &self.records {
            writeln!(out, "{},{},{}", r.time, r.event as u8, r.arm.index())?;
        }
        Ok(())
    }
}

/// Risk-set summary at one distinct event time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRow {
    pub time: f64,
    pub at_risk: usize,
    pub at_risk0: usize,
    pub at_risk1: usize,
    pub events: usize,
    pub events0: usize,
    pub events1: usize,
}

impl EventRow {
    pub fn at_risk_in(&self, arm: Arm) -> usize {
        match arm {
            Arm::Control => self.at_risk0,
            Arm::Treatment => self.at_risk1,
        }
    }

    pub fn events_in(&self, arm: Arm) -> usize {
        match arm {
            Arm::Control => self.events0,
            Arm::Treatment => self.events1,
        }
    }
}

/// Two-arm risk-set table with one row per distinct event time.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EventTable {
    pub rows: Vec<EventRow>,
}

impl EventTable {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.time).collect()
    }

    pub fn total_events(&self) -> usize {
        self.rows.iter().map(|r| r.events).sum()
    }
}

/// Sweeps sorted records; censorings at a tied time stay in that time's risk set.
fn sweep_risk_sets(records: &[Record]) -> Vec<EventRow> {
    let mut sorted: Vec<Record> = records.to_vec();
    sorted.sort_by(|a, b| a.time.total_cmp(&b.time));
    let mut at_risk = [0usize; 2];
    for r in &sorted {
        at_risk[r.arm.index()] += 1;
    }
    let mut rows = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].time;
        let mut events = [0usize; 2];
        let mut leaving = [0usize; 2];
        while i < sorted.len() && sorted[i].time == t {
            let a = sorted[i].arm.index();
            leaving[a] += 1;
            if sorted[i].event {
                events[a] += 1;
            }
            i += 1;
        }
        if events[0] + events[1] > 0 {
            rows.push(EventRow {
                time: t,
                at_risk: at_risk[0] + at_risk[1],
                at_risk0: at_risk[0],
                at_risk1: at_risk[1],
                events: events[0] + events[1],
                events0: events[0],
                events1: events[1],
            });
        }
        at_risk[0] -= leaving[0];
        at_risk[1] -= leaving[1];
    }
    rows
}

/// Builds the risk-set table used by the log-rank family and the Cox model.
pub fn build_event_table(data: &SurvivalDataset) -> Result<EventTable> {
    data.require_two_arms()?;
    Ok(EventTable { rows: sweep_risk_sets(data.records()) })
}

/// One step of a Kaplan–Meier curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KmStep {
    pub time: f64,
    /// Survival just after `time`.
    pub surv: f64,
    pub at_risk: usize,
    pub events: usize,
}

/// Right-continuous Kaplan–Meier step function with `Ŝ(0) = 1`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct KmCurve {
    pub steps: Vec<KmStep>,
}

impl KmCurve {
    /// `Ŝ(t)`: product over event times `≤ t`.
    pub fn surv_at(&self, t: f64) -> f64 {
        let idx = self.steps.partition_point(|s| s.time <= t);
        if idx == 0 {
            1.0
        } else {
            self.steps[idx - 1].surv
        }
    }

    /// Left limit `Ŝ(t−)`: product over event times `< t`.
    pub fn surv_before(&self, t: f64) -> f64 {
        let idx = self.steps.partition_point(|s| s.time < t);
        if idx == 0 {
            1.0
        } else {
            self.steps[idx - 1].surv
        }
    }

    /// Exact area under the step function on `[0, upper]`. Beyond the last
    /// step the curve is held constant.
    pub fn area(&self, upper: f64) -> f64 {
        let mut area = 0.0;
        let mut prev_t = 0.0;
        let mut prev_s = 1.0;
        for s in &self.steps {
            if s.time >= upper {
                break;
            }
            area += prev_s * (s.time - prev_t);
            prev_t = s.time;
            prev_s = s.surv;
        }
        area + prev_s * (upper - prev_t).max(0.0)
    }
}

/// Product-limit estimate over all records in `data` (pooled across arms).
pub fn km_estimate(data: &SurvivalDataset) -> Result<KmCurve> {
    data.require_nonempty()?;
    // Between censorings the product telescopes to Y_after / Y_anchor, so it
    // is formed as one ratio from the last censoring point. Without
    // censoring this is exactly the empirical survivor function.
    let mut surv = 1.0;
    let mut anchor = (1.0, data.len());
    let mut remaining = data.len();
    let steps = sweep_risk_sets(data.records())
        .into_iter()
        .map(|row| {
            if row.at_risk != remaining {
                anchor = (surv, row.at_risk);
            }
            remaining = row.at_risk - row.events;
            surv = anchor.0 * remaining as f64 / anchor.1 as f64;
            KmStep { time: row.time, surv, at_risk: row.at_risk, events: row.events }
        })
        .collect();
    Ok(KmCurve { steps })
}

/// Piecewise-constant hazard on `[0, ∞)`.
///
/// `knots` are interval boundaries starting at 0. Either one knot per rate
/// (interval starts) or one extra trailing knot marking the nominal end of the
/// last interval may be supplied; the last rate always extends to infinity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PiecewiseExpRaw", into = "PiecewiseExpRaw")]
pub struct PiecewiseExp {
    knots: Vec<f64>,
    rates: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PiecewiseExpRaw {
    knots: Vec<f64>,
    rates: Vec<f64>,
}

impl TryFrom<PiecewiseExpRaw> for PiecewiseExp {
    type Error = NphError;
    fn try_from(raw: PiecewiseExpRaw) -> Result<Self> {
        PiecewiseExp::new(raw.knots, raw.rates)
    }
}

impl From<PiecewiseExp> for PiecewiseExpRaw {
    fn from(p: PiecewiseExp) -> Self {
        PiecewiseExpRaw { knots: p.knots, rates: p.rates }
    }
}

impl PiecewiseExp {
    pub fn new(knots: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty() {
            return Err(NphError::InvalidInput("at least one hazard rate is required".into()));
        }
        if knots.len() != rates.len() && knots.len() != rates.len() + 1 {
            return Err(NphError::InvalidInput(format!("{} knots do not match {} rates", knots.len(), rates.len())));
        }
        if knots[0] != 0.0 {
            return Err(NphError::InvalidInput("first knot must be 0".into()));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(NphError::InvalidInput("knots must be strictly increasing".into()));
        }
        if rates.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
            return Err(NphError::InvalidInput("hazard rates must be positive".into()));
        }
        Ok(PiecewiseExp { knots, rates })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(vec![0.0], vec![rate])
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// `(start, end, rate)` for each interval; the last `end` is infinite.
    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let n = self.rates.len();
        (0..n).map(move |j| {
            let end = if j + 1 < n { self.knots[j + 1] } else { f64::INFINITY };
            (self.knots[j], end, self.rates[j])
        })
    }

    /// Same knots with every interval rate multiplied by the matching ratio.
    pub fn with_hazard_ratios(&self, ratios: &[f64]) -> Result<Self> {
        if ratios.len() != self.rates.len() {
            return Err(NphError::InvalidInput("one hazard ratio per interval required".into()));
        }
        Self::new(self.knots.clone(), self.rates.iter().zip(ratios).map(|(r, hr)| r * hr).collect())
    }

    pub fn hazard(&self, t: f64) -> f64 {
        self.intervals().find(|&(_, end, _)| t < end).map_or(*self.rates.last().unwrap(), |(_, _, r)| r)
    }

    /// Λ(t) = Σ_j λ_j · |interval_j ∩ [0, t]|.
    pub fn cumulative_hazard(&self, t: f64) -> f64 {
        let mut h = 0.0;
        for (start, end, rate) in self.intervals() {
            if t <= start {
                break;
            }
            h += rate * (t.min(end) - start);
        }
        h
    }

    pub fn survival(&self, t: f64) -> f64 {
        (-self.cumulative_hazard(t.max(0.0))).exp()
    }

    /// Smallest `t` with `Λ(t) ≥ h`.
    pub fn inverse_cumulative_hazard(&self, h: f64) -> f64 {
        if h <= 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for (start, end, rate) in self.intervals() {
            let seg = rate * (end - start);
            if acc + seg >= h {
                return start + (h - acc) / rate;
            }
            acc += seg;
        }
        unreachable!("last interval is unbounded")
    }

    /// Smallest `t` with `1 − S(t) ≥ u`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(NphError::InvalidInput(format!("quantile level must be in (0,1), got {u}")));
        }
        Ok(self.inverse_cumulative_hazard(-(-u).ln_1p()))
    }

    pub fn median(&self) -> f64 {
        self.inverse_cumulative_hazard(std::f64::consts::LN_2)
    }

    /// ∫₀^{t*} S(t) dt in closed form, interval by interval.
    pub fn rmst(&self, t_star: f64) -> f64 {
        let mut area = 0.0;
        let mut surv_start = 1.0;
        for (start, end, rate) in self.intervals() {
            if t_star <= start {
                break;
            }
            let len = t_star.min(end) - start;
            area += surv_start * -(-rate * len).exp_m1() / rate;
            surv_start *= (-rate * len).exp();
        }
        area
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(rows: &[(f64, bool, u8)]) -> SurvivalDataset {
        SurvivalDataset::new(rows.iter().map(|&(t, e, a)| Record::new(t, e, Arm::from_code(a).unwrap())).collect())
            .unwrap()
    }

    #[test]
    fn event_table_hand_enumeration() {
        let data = ds(&[(2.0, true, 0), (4.0, false, 0), (2.0, true, 1), (5.0, true, 1)]);
        let table = build_event_table(&data).unwrap();
        assert_eq!(table.rows.len(), 2);
        let r0 = table.rows[0];
        assert_eq!((r0.time, r0.at_risk, r0.events, r0.events0, r0.events1), (2.0, 4, 2, 1, 1));
        let r1 = table.rows[1];
        assert_eq!((r1.time, r1.at_risk, r1.events, r1.events0, r1.events1), (5.0, 1, 1, 0, 1));
        assert_eq!((r1.at_risk0, r1.at_risk1), (0, 1));
    }

    #[test]
    fn censored_at_tied_time_stays_at_risk() {
        let data = ds(&[(3.0, true, 0), (3.0, false, 1), (6.0, true, 1)]);
        let table = build_event_table(&data).unwrap();
        assert_eq!(table.rows[0].at_risk, 3);
        assert_eq!(table.rows[0].at_risk1, 2);
        assert_eq!(table.rows[1].at_risk, 1);
    }

    #[test]
    fn event_table_all_censored_is_empty() {
        let data = ds(&[(1.0, false, 0), (2.0, false, 1)]);
        assert!(build_event_table(&data).unwrap().rows.is_empty());
    }

    #[test]
    fn event_table_distinct_times() {
        let data = ds(&[(1.0, true, 0), (2.0, true, 1)]);
        let table = build_event_table(&data).unwrap();
        assert_eq!(table.rows.len(), 2);
        assert!(table.rows.iter().all(|r| r.events == 1));
    }

    #[test]
    fn event_table_errors() {
        assert_eq!(build_event_table(&SurvivalDataset::default()), Err(NphError::EmptyDataset));
        let one_arm = ds(&[(1.0, true, 0), (2.0, true, 0)]);
        assert_eq!(build_event_table(&one_arm), Err(NphError::SingleArm { missing: 1 }));
    }

    #[test]
    fn km_hand_values() {
        let data = ds(&[(1.0, true, 0), (2.0, true, 0), (3.0, true, 0)]);
        let km = km_estimate(&data).unwrap();
        assert!((km.surv_at(1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((km.surv_at(2.0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(km.surv_at(3.0), 0.0);
        assert_eq!(km.surv_at(0.5), 1.0);
        assert!((km.surv_before(2.0) - 2.0 / 3.0).abs() < 1e-15);

        let data = ds(&[(1.0, true, 0), (2.0, false, 0), (3.0, true, 0)]);
        let km = km_estimate(&data).unwrap();
        assert!((km.surv_at(1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((km.surv_at(2.5) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(km.surv_at(3.0), 0.0);
        assert_eq!(km.steps.len(), 2);
    }

    #[test]
    fn km_all_censored() {
        let data = ds(&[(1.0, false, 0), (4.0, false, 1)]);
        let km = km_estimate(&data).unwrap();
        assert!(km.steps.is_empty());
        assert_eq!(km.surv_at(10.0), 1.0);
        assert_eq!(km_estimate(&SurvivalDataset::default()), Err(NphError::EmptyDataset));
    }

    #[test]
    fn km_area_is_sum_of_rectangles() {
        let data = ds(&[(1.0, true, 0), (2.0, true, 0), (3.0, true, 0)]);
        let km = km_estimate(&data).unwrap();
        assert!((km.area(3.0) - 2.0).abs() < 1e-15);
        assert!((km.area(1.5) - (1.0 + 0.5 * 2.0 / 3.0)).abs() < 1e-15);
        assert_eq!(km.area(5.0), km.area(3.0));
    }

    #[test]
    fn pwexp_closed_forms() {
        let e = PiecewiseExp::exponential(0.1).unwrap();
        assert!((e.survival(10.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(e.survival(0.0), 1.0);
        assert!((e.rmst(10.0) - (1.0 - (-1.0f64).exp()) / 0.1).abs() < 1e-12);
        assert!(e.rmst(1e-12) < 1e-11);
        assert!((e.quantile(0.5).unwrap() - std::f64::consts::LN_2 / 0.1).abs() < 1e-12);
        assert!(e.quantile(1e-300).unwrap() < 1e-290);
        assert!(e.quantile(0.0).is_err());
        assert!(e.quantile(1.0).is_err());

        let first = PiecewiseExp::new(vec![0.0, 8.0], vec![0.028, 0.033]).unwrap();
        let expect = (-(0.028 * 8.0 + 0.033 * 2.0f64)).exp();
        assert!((first.survival(10.0) - expect).abs() < 1e-15);
        assert!((first.survival(10.0) - 0.7483).abs() < 1e-4);

        let two = PiecewiseExp::new(vec![0.0, 5.0], vec![0.2, 0.05]).unwrap();
        let t = two.quantile(0.8).unwrap();
        let expect = 5.0 + (5.0f64.ln() - 1.0) / 0.05;
        assert!((t - expect).abs() < 1e-12);
        assert!((t - 17.19).abs() < 0.01);
    }

    #[test]
    fn pwexp_trailing_knot_is_nominal() {
        let a = PiecewiseExp::new(vec![0.0, 8.0, 20.0], vec![0.1, 0.2]).unwrap();
        let b = PiecewiseExp::new(vec![0.0, 8.0], vec![0.1, 0.2]).unwrap();
        for t in [0.0, 5.0, 8.0, 19.0, 20.0, 45.0] {
            assert_eq!(a.cumulative_hazard(t), b.cumulative_hazard(t));
        }
    }

    #[test]
    fn pwexp_validation() {
        assert!(PiecewiseExp::new(vec![1.0], vec![0.1]).is_err());
        assert!(PiecewiseExp::new(vec![0.0, 0.0], vec![0.1, 0.1]).is_err());
        assert!(PiecewiseExp::new(vec![0.0], vec![0.0]).is_err());
        assert!(PiecewiseExp::new(vec![0.0, 1.0, 2.0, 3.0], vec![0.1]).is_err());
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let data = ds(&[(1.5, true, 0), (2.25, false, 1)]);
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let back = SurvivalDataset::from_csv_reader(buf.as_slice()).unwrap();
        assert_eq!(back, data);

        let bad = "time,event,arm\n1.0,1,0\n2.0,2,1\n";
        match SurvivalDataset::from_csv_reader(bad.as_bytes()) {
            Err(NphError::Csv { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let bad = "time,event,arm\nabc,1,0\n";
        assert!(matches!(SurvivalDataset::from_csv_reader(bad.as_bytes()), Err(NphError::Csv { line: 2, .. })));
        let single = "time,event\n3,1\n4,0\n";
        let d = SurvivalDataset::from_csv_reader(single.as_bytes()).unwrap();
        assert_eq!(d.count_arm(Arm::Control), 2);
    }
}
