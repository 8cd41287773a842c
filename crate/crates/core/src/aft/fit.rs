//! Maximum-likelihood AFT fits with an arm covariate on the location.

use serde::{Deserialize, Serialize};

use super::dist::{AftDistribution, GfParams, GgParams, Kernel};
use super::optim::{bfgs, max_abs, spd_inverse, spd_solve, BfgsOptions};
use crate::error::{NphError, Result};
use crate::special::chi2_1_sf;
use crate::survival::{Arm, SurvivalDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AftFamily {
    Gg,
    Gf,
}

impl AftFamily {
    pub fn name(self) -> &'static str {
        match self {
            AftFamily::Gg => "gg",
            AftFamily::Gf => "gf",
        }
    }

    /// Names of the optimization coordinates.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            AftFamily::Gg => &["beta0", "beta1", "log_sigma", "tau"],
            AftFamily::Gf => &["beta0", "beta1", "log_sigma", "q", "log_p"],
        }
    }

    /// Deterministic shape starting points.
    pub fn shape_starts(self) -> Vec<Vec<f64>> {
        match self {
            AftFamily::Gg => [-1.0, 0.0, 0.5, 1.0, 2.0].iter().map(|&t| vec![t]).collect(),
            AftFamily::Gf => {
                let mut v = Vec::new();
                for q in [-1.0, 0.0, 1.0] {
                    for p in [0.25f64, 1.0] {
                        v.push(vec![q, p.ln()]);
                    }
                }
                v
            }
        }
    }
}

/// Fitting controls.
#[derive(Debug, Clone, PartialEq)]
pub struct AftOptions {
    /// Iteration cap for the screening run from each start.
    pub screen_iter: usize,
    /// Iteration cap for the final polish.
    pub max_iter: usize,
    /// Gradient tolerance per 1000 log-likelihood units.
    pub gtol: f64,
    /// Overrides the family's shape starting grid.
    pub shape_starts: Option<Vec<Vec<f64>>>,
}

impl Default for AftOptions {
    fn default() -> Self {
        AftOptions { screen_iter: 15, max_iter: 400, gtol: 1e-6, shape_starts: None }
    }
}

/// Right-censored log-likelihood of an AFT family for one dataset.
#[derive(Debug, Clone)]
pub struct AftLikelihood {
    family: AftFamily,
    log_t: Vec<f64>,
    arm: Vec<f64>,
    event: Vec<bool>,
    n_events: usize,
    sum_log_t_events: f64,
}

impl AftLikelihood {
    pub fn new(data: &SurvivalDataset, family: AftFamily) -> Result<Self> {
        data.require_two_arms()?;
        if let Some(r) = data.records().iter().find(|r| !(r.time > 0.0)) {
            return Err(NphError::InvalidInput(format!("AFT models need positive times, found {}", r.time)));
        }
        let n_events = data.n_events();
        if n_events < 5 {
            return Err(NphError::Degenerate(format!("AFT fit needs at least 5 events, found {n_events}")));
        }
        let log_t: Vec<f64> = data.records().iter().map(|r| r.time.ln()).collect();
        let event: Vec<bool> = data.records().iter().map(|r| r.event).collect();
        let sum_log_t_events = log_t.iter().zip(&event).filter(|(_, &e)| e).map(|(l, _)| l).sum();
        Ok(AftLikelihood {
            family,
            arm: data.records().iter().map(|r| r.arm.indicator()).collect(),
            log_t,
            event,
            n_events,
            sum_log_t_events,
        })
    }

    pub fn family(&self) -> AftFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.family.param_names().len()
    }

    fn kernel(&self, theta: &[f64]) -> Kernel {
        match self.family {
            AftFamily::Gg => Kernel::gg(theta[3]),
            AftFamily::Gf => Kernel::gf(theta[3], theta[4].exp()),
        }
    }

    /// Log-likelihood at `theta = (β0, β1, ln σ, shapes…)`.
    pub fn loglik(&self, theta: &[f64]) -> f64 {
        if theta.iter().any(|v| !v.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let k = self.kernel(theta);
        let sigma = theta[2].exp();
        let mut ll = -(self.n_events as f64) * theta[2] - self.sum_log_t_events;
        for i in 0..self.log_t.len() {
            let w = (self.log_t[i] - theta[0] - theta[1] * self.arm[i]) / sigma;
            ll += if self.event[i] { k.log_density(w).0 } else { k.log_sf(w) };
        }
        if ll.is_nan() {
            f64::NEG_INFINITY
        } else {
            ll
        }
    }

    /// Log-likelihood and its gradient: analytic in the location and scale
    /// coordinates, central differences in the shapes.
    pub fn loglik_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        if theta.iter().any(|v| !v.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let k = self.kernel(theta);
        let sigma = theta[2].exp();
        let mut ll = -(self.n_events as f64) * theta[2] - self.sum_log_t_events;
        let (mut g0, mut g1, mut g2) = (0.0, 0.0, -(self.n_events as f64));
        for i in 0..self.log_t.len() {
            let w = (self.log_t[i] - theta[0] - theta[1] * self.arm[i]) / sigma;
            let (v, slope) = if self.event[i] { k.log_density(w) } else { k.log_sf_slope(w) };
            ll += v;
            g0 -= slope / sigma;
            g1 -= slope * self.arm[i] / sigma;
            g2 -= slope * w;
        }
        if !ll.is_finite() {
            return f64::NEG_INFINITY;
        }
        grad[0] = g0;
        grad[1] = g1;
        grad[2] = g2;
        let mut probe = theta.to_vec();
        for j in 3..theta.len() {
            let h = 1e-5 * theta[j].abs().max(1.0);
            probe[j] = theta[j] + h;
            let up = self.loglik(&probe);
            probe[j] = theta[j] - h;
            let down = self.loglik(&probe);
            probe[j] = theta[j];
            grad[j] = (up - down) / (2.0 * h);
        }
        ll
    }

    /// Observed information (negative Hessian) by differencing the gradient,
    /// Richardson-extrapolated over two step sizes.
    pub fn information(&self, theta: &[f64]) -> Vec<Vec<f64>> {
        let all: Vec<usize> = (0..theta.len()).collect();
        self.information_over(theta, &all)
    }

    /// Observed information restricted to the coordinates in `idx`.
    pub fn information_over(&self, theta: &[f64], idx: &[usize]) -> Vec<Vec<f64>> {
        let n = idx.len();
        let mut h = vec![vec![0.0; n]; n];
        let mut probe = theta.to_vec();
        let mut gp = vec![0.0; theta.len()];
        let mut gm = vec![0.0; theta.len()];
        let mut coarse = vec![0.0; n];
        for (j, &c) in idx.iter().enumerate() {
            let step = 2e-3 * theta[c].abs().max(1.0);
            for (k, h_k) in [2.0 * step, step].into_iter().enumerate() {
                probe[c] = theta[c] + h_k;
                self.loglik_grad(&probe, &mut gp);
                probe[c] = theta[c] - h_k;
                self.loglik_grad(&probe, &mut gm);
                for (i, &r) in idx.iter().enumerate() {
                    let d = -(gp[r] - gm[r]) / (2.0 * h_k);
                    if k == 0 {
                        coarse[i] = d;
                    } else {
                        h[i][j] = (4.0 * d - coarse[i]) / 3.0;
                    }
                }
            }
            probe[c] = theta[c];
        }
        for i in 0..n {
            for j in 0..i {
                let m = 0.5 * (h[i][j] + h[j][i]);
                h[i][j] = m;
                h[j][i] = m;
            }
        }
        h
    }

    /// Starting location and scale: exponential-like mean on the log scale.
    fn initial_location(&self) -> (f64, f64) {
        let total: f64 = self.log_t.iter().map(|l| l.exp()).sum();
        ((total / self.n_events as f64).ln(), 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaldTest {
    pub statistic: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AftFit {
    pub family: AftFamily,
    pub beta0: f64,
    pub beta1: f64,
    pub sigma: f64,
    /// `[tau]` for the generalized gamma, `[q, p]` for the generalized F.
    pub shape: Vec<f64>,
    /// Optimization coordinates at the optimum.
    pub theta: Vec<f64>,
    pub param_names: Vec<String>,
    /// Inverse observed information over `covariance_params`.
    pub covariance: Option<Vec<Vec<f64>>>,
    pub covariance_params: Vec<String>,
    pub loglik: f64,
    /// Largest gradient component at the optimum.
    pub gradient_max: f64,
    pub converged: bool,
    pub hessian_pd: bool,
    /// True when the generalized F shape `p` sits at its lower boundary.
    pub at_boundary: bool,
    /// True when the shape estimates ran to the edge of the search box.
    pub shape_diverged: bool,
    pub n_iter: usize,
    /// Index of the shape start that led to the optimum.
    pub start: usize,
    pub wald: Option<WaldTest>,
}

impl AftFit {
    pub fn distribution(&self, arm: Arm) -> AftDistribution {
        let beta = self.beta0 + self.beta1 * arm.indicator();
        match self.family {
            AftFamily::Gg => AftDistribution::Gg(GgParams { beta, sigma: self.sigma, tau: self.shape[0] }),
            AftFamily::Gf => {
                AftDistribution::Gf(GfParams { beta, sigma: self.sigma, q: self.shape[0], p: self.shape[1] })
            }
        }
    }

    /// Multiplicative effect of treatment on survival-time quantiles' reciprocal, `e^{−β1}`.
    pub fn acceleration_factor(&self) -> f64 {
        (-self.beta1).exp()
    }

    pub fn var_beta1(&self) -> Option<f64> {
        self.covariance.as_ref().map(|c| c[1][1])
    }

    pub fn se_beta1(&self) -> Option<f64> {
        self.var_beta1().map(f64::sqrt)
    }

    /// Usable for inference: converged with a positive-definite information.
    pub fn is_usable(&self) -> bool {
        self.converged && self.wald.is_some()
    }
}

/// Below this `p` the generalized F fit is checked against its gamma boundary.
const BOUNDARY_P: f64 = 1e-3;
/// Log-likelihood slack within which the boundary fit is preferred; near
/// p = 0 the two fits differ by O(p).
const BOUNDARY_LOGLIK_TOL: f64 = 1e-3;
/// Bound on |τ| and |q|. The generalized F likelihood can increase without
/// limit along q → −∞, p → ∞, σ → 0; such fits stop here and are reported as
/// diverging.
const SHAPE_LIMIT: f64 = 25.0;
/// Upper bound on ln p, for the same reason.
const LN_P_LIMIT: f64 = 12.0;

fn within_shape_box(theta: &[f64]) -> bool {
    theta.get(3).is_none_or(|v| v.abs() <= SHAPE_LIMIT) && theta.get(4).is_none_or(|&v| v <= LN_P_LIMIT)
}

fn near_shape_box(theta: &[f64]) -> bool {
    theta.get(3).is_some_and(|v| v.abs() > SHAPE_LIMIT - 1.0) || theta.get(4).is_some_and(|&v| v > LN_P_LIMIT - 1.0)
}

/// `ln p` stored for fits at the boundary; the kernel treats it as exactly 0.
const LN_P_ZERO: f64 = -40.0;

pub fn aft_fit(data: &SurvivalDataset, family: AftFamily) -> Result<AftFit> {
    aft_fit_with(data, family, &AftOptions::default())
}

pub fn aft_fit_with(data: &SurvivalDataset, family: AftFamily, opts: &AftOptions) -> Result<AftFit> {
    let lik = AftLikelihood::new(data, family)?;
    let (b0, ls) = lik.initial_location();
    let starts = opts.shape_starts.clone().unwrap_or_else(|| family.shape_starts());
    let neg = |x: &[f64], g: &mut [f64]| {
        if !within_shape_box(x) {
            return f64::INFINITY;
        }
        let v = lik.loglik_grad(x, g);
        g.iter_mut().for_each(|v| *v = -*v);
        -v
    };

    // Screen every start briefly, then polish the best.
    let mut best: Option<(usize, super::optim::Minimum)> = None;
    for (idx, shape) in starts.iter().enumerate() {
        let mut x0 = vec![b0, 0.0, ls];
        x0.extend_from_slice(shape);
        let m = bfgs(neg, &x0, BfgsOptions { max_iter: opts.screen_iter, gtol: 1e-3, ..Default::default() });
        if m.f.is_finite() && best.as_ref().is_none_or(|(_, b)| m.f < b.f) {
            best = Some((idx, m));
        }
    }
    let (start, screened) = best.ok_or_else(|| NphError::NonConvergence {
        model: family.name().into(),
        reason: "log-likelihood is not finite at any start".into(),
    })?;

    let gtol = opts.gtol * (screened.f.abs() / 1000.0).max(1.0);
    let polished = bfgs(neg, &screened.x, BfgsOptions { max_iter: opts.max_iter, gtol, ..Default::default() });
    let mut theta = polished.x;
    let mut f = polished.f;
    let mut grad = polished.grad;
    let mut n_iter = screened.n_iter + polished.n_iter;

    // A small p may be the interior approach to the gamma boundary, where the
    // likelihood is flat in ln p. Compare with the exact nested fit at p = 0.
    let mut at_boundary = false;
    if family == AftFamily::Gf && theta[4] < BOUNDARY_P.ln() {
        let nested = AftLikelihood::new(data, AftFamily::Gg)?;
        let neg_nested = |x: &[f64], g: &mut [f64]| {
            let v = nested.loglik_grad(x, g);
            g.iter_mut().for_each(|v| *v = -*v);
            -v
        };
        let m = bfgs(neg_nested, &theta[..4], BfgsOptions { max_iter: opts.max_iter, gtol, ..Default::default() });
        n_iter += m.n_iter;
        if m.f.is_finite() && m.f <= f + BOUNDARY_LOGLIK_TOL {
            theta = m.x;
            theta.push(LN_P_ZERO);
            f = m.f;
            grad = m.grad;
            grad.push(0.0);
            at_boundary = true;
        }
    }
    // Free coordinates used for Newton refinement and the covariance.
    let free: Vec<usize> = if at_boundary { (0..4).collect() } else { (0..theta.len()).collect() };

    let mut info = lik.information_over(&theta, &free);
    // A few Newton steps sharpen the optimum beyond what BFGS reached.
    for _ in 0..5 {
        let g_max = max_abs(&sub_vec(&grad, &free));
        if g_max < 0.01 * gtol {
            break;
        }
        // `grad` is the gradient of −ℓ and `info` its Hessian.
        let Some(step) = spd_solve(&info, &sub_vec(&grad, &free)) else { break };
        let mut cand = theta.clone();
        for (k, &i) in free.iter().enumerate() {
            cand[i] -= step[k];
        }
        let mut gc = vec![0.0; theta.len()];
        let fc = -lik.loglik_grad(&cand, &mut gc);
        // Near the optimum the decrease in f is below its rounding noise, so
        // a smaller gradient also counts as progress.
        let noise = 1e-11 * f.abs().max(1.0);
        let gc_max = max_abs(&sub_vec(&gc, &free));
        if !(fc <= f || (fc <= f + noise && gc_max < g_max)) {
            break;
        }
        theta = cand;
        f = fc;
        grad = gc.iter().map(|v| -v).collect();
        info = lik.information_over(&theta, &free);
    }

    let gradient_max = max_abs(&sub_vec(&grad, &free));
    let shape_diverged = near_shape_box(&theta);
    let converged = gradient_max < 10.0 * gtol && !shape_diverged;
    let covariance = spd_inverse(&info);
    let hessian_pd = covariance.is_some();
    let wald = covariance.as_ref().and_then(|c| {
        let var = c[1][1];
        (var > 0.0).then(|| {
            let statistic = theta[1] * theta[1] / var;
            WaldTest { statistic, p: chi2_1_sf(statistic) }
        })
    });

    let shape = match family {
        AftFamily::Gg => vec![theta[3]],
        AftFamily::Gf => vec![theta[3], if at_boundary { 0.0 } else { theta[4].exp() }],
    };
    let names = family.param_names();
    Ok(AftFit {
        family,
        beta0: theta[0],
        beta1: theta[1],
        sigma: theta[2].exp(),
        shape,
        param_names: names.iter().map(|s| s.to_string()).collect(),
        covariance_params: free.iter().map(|&i| names[i].to_string()).collect(),
        covariance,
        theta,
        loglik: -f,
        gradient_max,
        converged,
        hessian_pd,
        at_boundary,
        shape_diverged,
        n_iter,
        start,
        wald,
    })
}

fn sub_vec(v: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| v[i]).collect()
}
