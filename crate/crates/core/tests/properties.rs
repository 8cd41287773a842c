//! Property tests for the survival primitives, tests and distributions.

use nphkit::aft::{AftDistribution, AftFamily, AftLikelihood, GfParams, GgParams};
use nphkit::cox::{cox_fit, schoenfeld_residuals};
use nphkit::logrank::{
    combo_p_value, maxcombo, weighted_logrank, weighted_logrank_with_weights, ComboCorrelation, FhWeight,
};
use nphkit::mvn::mvn_box_probability;
use nphkit::quadrature::integrate_adaptive;
use nphkit::rmst::{rmst_difference_test, rmst_difference_test_at, rmst_estimate};
use nphkit::sim::builtin_scenarios;
use nphkit::survival::{build_event_table, km_estimate, Arm, PiecewiseExp, Record, SurvivalDataset};
use proptest::prelude::*;

/// Small two-arm datasets on an integer grid so that ties are common.
fn dataset(max_len: usize) -> impl Strategy<Value = SurvivalDataset> {
    prop::collection::vec((1u32..25, any::<bool>(), any::<bool>()), 6..max_len).prop_map(|rows| {
        let records = rows
            .into_iter()
            .map(|(t, e, a)| Record::new(t as f64 * 0.5, e, if a { Arm::Treatment } else { Arm::Control }))
            .collect();
        SurvivalDataset::new(records).unwrap()
    })
}

fn usable(d: &SurvivalDataset) -> bool {
    let events = |arm| d.records().iter().any(|r| r.arm == arm && r.event);
    d.count_arm(Arm::Control) >= 2 && d.count_arm(Arm::Treatment) >= 2 && events(Arm::Control) && events(Arm::Treatment)
}

fn uncensored(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1u32..40, 1..max_len).prop_map(|v| v.into_iter().map(|t| t as f64 * 0.25).collect())
}

fn pwexp() -> impl Strategy<Value = PiecewiseExp> {
    prop::collection::vec((0.5f64..30.0, 0.005f64..0.5), 1..5).prop_map(|pieces| {
        let mut knots = vec![0.0];
        for (len, _) in &pieces[..pieces.len() - 1] {
            knots.push(knots.last().unwrap() + len);
        }
        PiecewiseExp::new(knots, pieces.iter().map(|p| p.1).collect()).unwrap()
    })
}

/// Unweighted log-rank Z from direct risk-set counting.
fn textbook_logrank(d: &SurvivalDataset) -> f64 {
    let recs = d.records();
    let mut times: Vec<f64> = recs.iter().filter(|r| r.event).map(|r| r.time).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let (mut u, mut v) = (0.0, 0.0);
    for t in times {
        let n = recs.iter().filter(|r| r.time >= t).count() as f64;
        let n1 = recs.iter().filter(|r| r.time >= t && r.arm == Arm::Treatment).count() as f64;
        let dd = recs.iter().filter(|r| r.time == t && r.event).count() as f64;
        let d1 = recs.iter().filter(|r| r.time == t && r.event && r.arm == Arm::Treatment).count() as f64;
        u += d1 - dd * n1 / n;
        if n > 1.0 {
            v += dd * (n1 / n) * (1.0 - n1 / n) * (n - dd) / (n - 1.0);
        }
    }
    u / v.sqrt()
}

fn correlation() -> impl Strategy<Value = [[f64; 3]; 3]> {
    // Normalized Gram matrix of three random vectors.
    prop::array::uniform3(prop::array::uniform3(-1.0f64..1.0)).prop_filter_map("degenerate", |v| {
        let norm: Vec<f64> = v.iter().map(|x| x.iter().map(|a| a * a).sum::<f64>().sqrt()).collect();
        if norm.iter().any(|&n| n < 0.1) {
            return None;
        }
        let mut r = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                r[i][j] =
                    if i == j { 1.0 } else { (0..3).map(|k| v[i][k] * v[j][k]).sum::<f64>() / (norm[i] * norm[j]) };
            }
        }
        Some(r)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn km_is_empirical_survivor_without_censoring(times in uncensored(60), arms in prop::collection::vec(any::<bool>(), 60)) {
        let n = times.len();
        let recs = times.iter().zip(&arms).map(|(&t, &a)| Record::new(t, true, if a { Arm::Treatment } else { Arm::Control })).collect();
        let km = km_estimate(&SurvivalDataset::new(recs).unwrap()).unwrap();
        for &t in &times {
            let empirical = times.iter().filter(|&&x| x > t).count() as f64 / n as f64;
            prop_assert_eq!(km.surv_at(t), empirical);
        }
    }

    #[test]
    fn event_table_counts_every_event(d in dataset(50)) {
        prop_assume!(d.count_arm(Arm::Control) > 0 && d.count_arm(Arm::Treatment) > 0);
        let table = build_event_table(&d).unwrap();
        let events = d.records().iter().filter(|r| r.event).count();
        prop_assert_eq!(table.rows.iter().map(|r| r.events).sum::<usize>(), events);
        prop_assert_eq!(table.rows.iter().map(|r| r.events0 + r.events1).sum::<usize>(), events);
    }

    #[test]
    fn pwexp_quantile_round_trip(spec in pwexp()) {
        for k in 1..10 {
            let u = k as f64 / 10.0;
            let t = spec.quantile(u).unwrap();
            prop_assert!((spec.survival(t) - (1.0 - u)).abs() < 1e-10);
        }
    }

    #[test]
    fn logrank_matches_textbook(d in dataset(40)) {
        prop_assume!(usable(&d));
        let z = weighted_logrank(&d, FhWeight::LOGRANK).unwrap().z;
        let oracle = textbook_logrank(&d);
        prop_assert!((z - oracle).abs() <= 1e-10 * oracle.abs().max(1.0), "{} vs {}", z, oracle);
    }

    #[test]
    fn arm_swap_antisymmetry(d in dataset(40)) {
        prop_assume!(usable(&d));
        let s = d.with_arms_swapped();
        for w in [FhWeight::LOGRANK, FhWeight::EARLY, FhWeight::LATE, FhWeight::MIDDLE] {
            let (Ok(a), Ok(b)) = (weighted_logrank(&d, w), weighted_logrank(&s, w)) else { continue };
            prop_assert_eq!(a.u, -b.u);
            prop_assert_eq!(a.z, -b.z);
            prop_assert_eq!(a.p_two_sided, b.p_two_sided);
        }
        if let (Ok(a), Ok(b)) = (maxcombo(&d), maxcombo(&s)) {
            prop_assert_eq!(a.z_max, b.z_max);
            prop_assert_eq!(a.p_two_sided, b.p_two_sided);
        }
        if let (Ok(a), Ok(b)) = (rmst_difference_test(&d), rmst_difference_test(&s)) {
            prop_assert_eq!(a.delta, -b.delta);
            prop_assert_eq!(a.z, -b.z);
            prop_assert_eq!(a.p_two_sided, b.p_two_sided);
        }
        if let (Ok(a), Ok(b)) = (cox_fit(&d), cox_fit(&s)) {
            // Newton iterates differ in rounding, so agreement is to solver precision.
            prop_assert!((a.beta + b.beta).abs() < 1e-9);
            prop_assert!((a.var_beta - b.var_beta).abs() < 1e-9 * a.var_beta);
        }
    }

    #[test]
    fn weight_scale_invariance(d in dataset(40), c in 0.01f64..100.0, seed in any::<u64>()) {
        prop_assume!(usable(&d));
        let table = build_event_table(&d).unwrap();
        let w: Vec<f64> = (0..table.rows.len()).map(|i| 0.2 + ((seed >> (i % 60)) & 7) as f64 / 7.0).collect();
        let scaled: Vec<f64> = w.iter().map(|x| c * x).collect();
        if let (Ok(a), Ok(b)) = (weighted_logrank_with_weights(&table, &w), weighted_logrank_with_weights(&table, &scaled)) {
            prop_assert!((a.z - b.z).abs() <= 1e-12 * a.z.abs().max(1.0));
        }
    }

    #[test]
    fn maxcombo_is_largest_component(d in dataset(40)) {
        prop_assume!(usable(&d));
        if let Ok(r) = maxcombo(&d) {
            let zs: Vec<f64> = FhWeight::COMBO.iter().map(|&w| weighted_logrank(&d, w).map_or(0.0, |r| r.z)).collect();
            prop_assert_eq!(r.component_z.to_vec(), zs.clone());
            prop_assert_eq!(r.z_max, zs.iter().fold(0.0f64, |m, z| m.max(z.abs())));
        }
    }

    #[test]
    fn box_probability_increases_with_half_width(r in correlation(), z in 0.1f64..4.0, dz in 0.01f64..1.0) {
        let a = mvn_box_probability(&r, z).unwrap();
        let b = mvn_box_probability(&r, z + dz).unwrap();
        prop_assert!(b >= a - 1e-12, "{} then {}", a, b);
    }

    #[test]
    fn identity_mode_is_product_formula(r in correlation(), z in 0.0f64..5.0) {
        let p = combo_p_value(&r, z, ComboCorrelation::Identity).unwrap();
        let inside = 1.0 - libm::erfc(z / std::f64::consts::SQRT_2);
        prop_assert!((p - (1.0 - inside.powi(3))).abs() < 1e-4);
    }

    #[test]
    fn rmst_bounded_and_monotone(d in dataset(40), a in 0.5f64..12.0, b in 0.0f64..6.0) {
        let lo = rmst_estimate(&d, a).unwrap().mu;
        let hi = rmst_estimate(&d, a + b).unwrap().mu;
        prop_assert!(lo <= a + 1e-12);
        prop_assert!(hi >= lo);
    }

    #[test]
    fn rmst_difference_is_area_between_curves(d in dataset(40), t_star in 1.0f64..12.0) {
        prop_assume!(usable(&d));
        let Ok(r) = rmst_difference_test_at(&d, t_star) else { return Ok(()) };
        let k0 = km_estimate(&d.arm_subset(Arm::Control)).unwrap();
        let k1 = km_estimate(&d.arm_subset(Arm::Treatment)).unwrap();
        // Independent route: integrate the step difference on a fine partition.
        let mut cuts: Vec<f64> = k0.steps.iter().chain(&k1.steps).map(|s| s.time).filter(|&t| t < t_star).collect();
        cuts.push(0.0);
        cuts.push(t_star);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let direct: f64 = cuts.windows(2).map(|w| (k1.surv_at(w[0]) - k0.surv_at(w[0])) * (w[1] - w[0])).sum();
        prop_assert!((r.delta - direct).abs() < 1e-12);
    }

    #[test]
    fn rmst_without_censoring_is_mean_of_truncated_times(times in uncensored(50), t_star in 0.5f64..10.0) {
        let recs = times.iter().map(|&t| Record::new(t, true, Arm::Control)).collect();
        let mu = rmst_estimate(&SurvivalDataset::new(recs).unwrap(), t_star).unwrap().mu;
        let mean = times.iter().map(|t| t.min(t_star)).sum::<f64>() / times.len() as f64;
        prop_assert!((mu - mean).abs() < 1e-12);
    }

    #[test]
    fn cox_score_vanishes_at_estimate(d in dataset(50)) {
        prop_assume!(usable(&d));
        if let Ok(fit) = cox_fit(&d) {
            prop_assert!(fit.var_beta > 0.0);
            let res = schoenfeld_residuals(&fit, &d).unwrap();
            let total: f64 = res.rows.iter().map(|r| r.residual).sum();
            prop_assert!(total.abs() < 1e-6 * d.len() as f64);
        }
    }

    #[test]
    fn gg_special_cases(beta in -2.0f64..3.0, sigma in 0.2f64..2.5, t in 0.01f64..50.0) {
        let gg = |tau| AftDistribution::from(GgParams::new(beta, sigma, tau).unwrap());
        let w = (t.ln() - beta) / sigma;
        // τ = 1: Weibull with shape 1/σ and scale e^β.
        let z = (t / beta.exp()).powf(1.0 / sigma);
        prop_assert!((gg(1.0).log_survival(t) + z).abs() < 1e-10 * z.max(1.0));
        let log_f = -(sigma.ln()) - t.ln() + w - z;
        prop_assert!((gg(1.0).log_density(t) - log_f).abs() < 1e-10 * log_f.abs().max(1.0));
        // τ = 0: log-normal.
        let sf = 0.5 * libm::erfc(w / std::f64::consts::SQRT_2);
        prop_assert!((gg(0.0).survival(t) - sf).abs() < 1e-10 * sf.max(1e-300).max(1e-10));
        let log_f = -0.5 * w * w - 0.5 * (2.0 * std::f64::consts::PI).ln() - sigma.ln() - t.ln();
        prop_assert!((gg(0.0).log_density(t) - log_f).abs() < 1e-10 * log_f.abs().max(1.0));
        // σ = τ = 1: exponential with rate e^{−β}.
        let e = AftDistribution::from(GgParams::new(beta, 1.0, 1.0).unwrap());
        prop_assert!((e.log_survival(t) + t * (-beta).exp()).abs() < 1e-10 * (t * (-beta).exp()).max(1.0));
    }

    #[test]
    fn gf_nests_gg_and_log_logistic(beta in -2.0f64..3.0, sigma in 0.2f64..2.5, q in -2.0f64..2.0, t in 0.01f64..50.0) {
        let gf = AftDistribution::from(GfParams::new(beta, sigma, q, 0.0).unwrap());
        let gg = AftDistribution::from(GgParams::new(beta, sigma, q).unwrap());
        prop_assert!((gf.log_density(t) - gg.log_density(t)).abs() < 1e-8);
        prop_assert!((gf.log_survival(t) - gg.log_survival(t)).abs() < 1e-8 * gg.log_survival(t).abs().max(1.0));
        let ll = AftDistribution::from(GfParams::new(beta, sigma, 0.0, 1.0).unwrap());
        let k = std::f64::consts::SQRT_2 / sigma;
        let x = (t / beta.exp()).powf(k);
        prop_assert!((ll.survival(t) - 1.0 / (1.0 + x)).abs() < 1e-8);
        let log_f = k.ln() + (k - 1.0) * t.ln() - k * beta - 2.0 * x.ln_1p();
        prop_assert!((ll.log_density(t) - log_f).abs() < 1e-8 * log_f.abs().max(1.0));
    }

    #[test]
    fn densities_positive_and_survival_monotone(
        beta in -1.0f64..3.0, sigma in 0.2f64..2.0, q in -2.0f64..2.0, p in 0.0f64..3.0, tau in -2.0f64..2.0,
    ) {
        for d in [
            AftDistribution::from(GgParams::new(beta, sigma, tau).unwrap()),
            AftDistribution::from(GfParams::new(beta, sigma, q, p).unwrap()),
        ] {
            let mut prev = 1.0;
            for k in -40..=40 {
                let t = 10f64.powf(k as f64 / 10.0);
                let f = d.density(t);
                let s = d.survival(t);
                prop_assert!(f >= 0.0 && f.is_finite());
                prop_assert!(d.log_density(t) > f64::NEG_INFINITY || f == 0.0);
                prop_assert!(s <= prev + 1e-15 && s >= 0.0);
                prev = s;
            }
        }
    }
}

#[test]
fn pwexp_rmst_matches_quadrature_on_builtin_specs() {
    for sc in builtin_scenarios() {
        for spec in [&sc.arm0, &sc.arm1] {
            for t in [1.0, 7.5, sc.followup, 2.0 * sc.followup] {
                let q = integrate_adaptive(|x| spec.survival(x), 0.0, t, 1e-13);
                assert!((spec.rmst(t) - q).abs() < 1e-8, "{} t={t}", sc.name);
            }
        }
    }
}

#[test]
fn gg_loglik_nests_in_gf_on_data() {
    let data = nphkit::sim::simulate_trial(&nphkit::sim::builtin_scenario("inovate").unwrap(), 9);
    let gg = AftLikelihood::new(&data, AftFamily::Gg).unwrap();
    let gf = AftLikelihood::new(&data, AftFamily::Gf).unwrap();
    for theta in [[2.0, 0.3, -0.1, 0.8], [1.5, -0.2, 0.3, -0.5], [2.5, 0.0, 0.0, 0.0]] {
        let a = gg.loglik(&theta);
        let b = gf.loglik(&[theta[0], theta[1], theta[2], theta[3], -40.0]);
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
}
