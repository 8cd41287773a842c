use nphkit::aft::{aft_fit, aft_fit_with, AftFamily, AftLikelihood, AftOptions};
use nphkit::cox::cox_fit;
use nphkit::sim::{builtin_scenario, simulate_trial};
use nphkit::survival::SurvivalDataset;

fn datasets() -> Vec<(String, SurvivalDataset)> {
    let mut out = Vec::new();
    for name in ["inovate", "null", "first"] {
        let scenario = builtin_scenario(name).unwrap();
        for seed in [3u64, 11] {
            out.push((format!("{name}/{seed}"), simulate_trial(&scenario, seed)));
        }
    }
    out
}

fn central_gradient(lik: &AftLikelihood, theta: &[f64]) -> Vec<f64> {
    (0..theta.len())
        .map(|i| {
            let h = 1e-5 * theta[i].abs().max(1.0);
            let mut up = theta.to_vec();
            let mut down = theta.to_vec();
            up[i] += h;
            down[i] -= h;
            (lik.loglik(&up) - lik.loglik(&down)) / (2.0 * h)
        })
        .collect()
}

#[test]
fn gradient_vanishes_at_optimum() {
    let mut checked = 0;
    for (label, data) in datasets() {
        for family in [AftFamily::Gg, AftFamily::Gf] {
            let fit = aft_fit(&data, family).unwrap();
            if !fit.converged || fit.at_boundary {
                continue;
            }
            let lik = AftLikelihood::new(&data, family).unwrap();
            let g = central_gradient(&lik, &fit.theta);
            let worst = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(worst < 1e-4, "{label} {family:?}: gradient {g:?}");
            checked += 1;
        }
    }
    assert!(checked >= 6, "only {checked} interior optima");
}

#[test]
fn boundary_fit_gradient_vanishes_in_free_coordinates() {
    for (label, data) in datasets() {
        let fit = aft_fit(&data, AftFamily::Gf).unwrap();
        if !(fit.converged && fit.at_boundary) {
            continue;
        }
        let lik = AftLikelihood::new(&data, AftFamily::Gf).unwrap();
        let g = central_gradient(&lik, &fit.theta);
        let worst = g[..4].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst < 1e-4, "{label}: gradient {g:?}");
    }
}

#[test]
fn time_scaling_shifts_only_the_intercept() {
    let mut checked = 0;
    for (label, data) in datasets().into_iter().take(4) {
        for family in [AftFamily::Gg, AftFamily::Gf] {
            let base = aft_fit(&data, family).unwrap();
            if !base.converged || base.shape_diverged {
                continue;
            }
            for c in [0.25, 12.0] {
                let scaled = aft_fit(&data.scaled_times(c), family).unwrap();
                assert!(scaled.converged, "{label} {family:?} c={c}");
                let ctx = format!("{label} {family:?} c={c}");
                assert!((scaled.beta0 - base.beta0 - c.ln()).abs() < 1e-4, "{ctx}: beta0");
                assert!((scaled.beta1 - base.beta1).abs() < 1e-4, "{ctx}: beta1");
                assert!((scaled.sigma / base.sigma - 1.0).abs() < 1e-4, "{ctx}: sigma");
                let events = data.n_events() as f64;
                assert!((scaled.loglik - (base.loglik - events * c.ln())).abs() < 1e-4, "{ctx}: loglik");
                let m0 = base.distribution(nphkit::survival::Arm::Control).median();
                let m1 = scaled.distribution(nphkit::survival::Arm::Control).median();
                assert!((m1 / (c * m0) - 1.0).abs() < 1e-4, "{ctx}: median");
                checked += 1;
            }
        }
    }
    assert!(checked >= 8, "only {checked} fits checked");
}

#[test]
fn multistart_optimum_dominates_each_start() {
    for (label, data) in datasets().into_iter().take(3) {
        for family in [AftFamily::Gg, AftFamily::Gf] {
            let best = aft_fit(&data, family).unwrap();
            for start in family.shape_starts() {
                let opts = AftOptions { shape_starts: Some(vec![start.clone()]), ..AftOptions::default() };
                let single = aft_fit_with(&data, family, &opts).unwrap();
                assert!(
                    single.loglik <= best.loglik + 1e-6,
                    "{label} {family:?} start {start:?}: {} > {}",
                    single.loglik,
                    best.loglik
                );
            }
        }
    }
}

#[test]
fn gg_nests_in_gf_on_simulated_data() {
    for (label, data) in datasets() {
        let gg = aft_fit(&data, AftFamily::Gg).unwrap();
        let gf = aft_fit(&data, AftFamily::Gf).unwrap();
        if gg.converged && gf.converged {
            assert!(gf.loglik >= gg.loglik - 1e-6, "{label}: gf {} < gg {}", gf.loglik, gg.loglik);
        }
    }
}

#[test]
fn cox_scaling_leaves_coefficient_unchanged() {
    for (label, data) in datasets() {
        let base = cox_fit(&data).unwrap();
        let scaled = cox_fit(&data.scaled_times(7.5)).unwrap();
        assert_eq!(base.beta.to_bits(), scaled.beta.to_bits(), "{label}");
    }
}
