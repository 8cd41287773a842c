//! Generalized gamma and generalized F distributions in location–scale form
//! on log time: `ln T = β + σ W`, with the shape fixing the law of `W`.

use serde::{Deserialize, Serialize};

use crate::error::{NphError, Result};
use crate::quadrature::integrate_adaptive;
use crate::special::{
    beta_inc_ln, expm1mx, gamma_inv_log_ratio, gamma_ln_pq_log_ratio, log1pmx, normal_log_sf, normal_pdf,
    normal_quantile, normal_sf, stirling_remainder, HALF_LN_2PI,
};

/// Below this |τ| the generalized gamma uses its small-shape expansion around
/// the log-normal.
pub const TAU_LIMIT: f64 = 1e-5;
/// Below this p the generalized F is evaluated as its generalized gamma limit.
pub const P_LIMIT: f64 = 1e-8;

/// Shape-dependent part of the standardized log-time density `g(w)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Kernel {
    /// Generalized gamma near τ = 0.
    GgSmall {
        tau: f64,
    },
    GgShape {
        tau: f64,
        gamma: f64,
        omega: f64,
    },
    GfShape {
        delta: f64,
        m1: f64,
        m2: f64,
        ratio: f64,
        log_norm: f64,
    },
}

impl Kernel {
    pub(crate) fn gg(tau: f64) -> Kernel {
        if tau.abs() < TAU_LIMIT {
            Kernel::GgSmall { tau }
        } else {
            let gamma = 1.0 / (tau * tau);
            Kernel::GgShape { tau, gamma, omega: stirling_remainder(gamma) }
        }
    }

    pub(crate) fn gf(q: f64, p: f64) -> Kernel {
        if p < P_LIMIT {
            return Kernel::gg(q);
        }
        let delta = (q * q + 2.0 * p).sqrt();
        // Both forms avoid the cancellation in q² + 2p ∓ qδ.
        let (m1, m2) = if q >= 0.0 {
            (2.0 / (delta * (delta + q)), (delta + q) / (delta * p))
        } else {
            ((delta - q) / (delta * p), 2.0 / (delta * (delta - q)))
        };
        let log_norm =
            delta.ln() + 0.5 * (m1 * m2 / (2.0 * std::f64::consts::PI * (m1 + m2))).ln() + stirling_remainder(m1 + m2)
                - stirling_remainder(m1)
                - stirling_remainder(m2);
        Kernel::GfShape { delta, m1, m2, ratio: m1 / m2, log_norm }
    }

    /// `(ln g(w), d ln g / dw)`.
    pub(crate) fn log_density(&self, w: f64) -> (f64, f64) {
        match *self {
            Kernel::GgSmall { tau } => {
                let w2 = w * w;
                let lg = -HALF_LN_2PI - 0.5 * w2 - tau * w2 * w / 6.0 - tau * tau * (w2 * w2 / 24.0 + 1.0 / 12.0);
                let slope = -w - 0.5 * tau * w2 - tau * tau * w2 * w / 6.0;
                (lg, slope)
            }
            Kernel::GgShape { tau, gamma, omega } => {
                let tw = tau * w;
                let lg = -HALF_LN_2PI - omega - gamma * expm1mx(tw);
                (lg, -tw.exp_m1() / tau)
            }
            Kernel::GfShape { delta, m1, m2, ratio, log_norm } => {
                let dw = delta * w;
                let u = gf_u(dw, ratio);
                let v = -ratio * u;
                // Near u, v = -1 the series form cancels; use ln(1+v) = ln(1+r) - ln(1+r e^{δw}).
                let ln1v = ratio.ln_1p() - softplus(ratio.ln() + dw);
                let term = |x: f64, ln1x: f64| if x.abs() < 0.5 { log1pmx(x) } else { ln1x - x };
                let lg = log_norm + m1 * term(u, dw + ln1v) + m2 * term(v, ln1v);
                (lg, -delta * m1 * u)
            }
        }
    }

    /// `ln S(w)` for the standardized variable.
    pub(crate) fn log_sf(&self, w: f64) -> f64 {
        match *self {
            Kernel::GgSmall { tau } => {
                let w2 = w * w;
                let second = w * (w2 * w2 + 2.0 * w2 + 6.0) / 72.0;
                let corr = tau * (-(w2 + 2.0) / 6.0 + tau * second);
                let ls = normal_log_sf(w);
                let c = (-0.5 * w2 - HALF_LN_2PI - ls).exp() * corr;
                if c > -1.0 {
                    ls + c.ln_1p()
                } else {
                    (normal_sf(w) + normal_pdf(w) * corr).max(f64::MIN_POSITIVE).ln()
                }
            }
            Kernel::GgShape { tau, gamma, .. } => {
                let (lp, lq) = gamma_ln_pq_log_ratio(gamma, tau * w);
                if tau > 0.0 {
                    lq
                } else {
                    lp
                }
            }
            Kernel::GfShape { delta, ratio, m1, m2, .. } => {
                let (ln_y, ln_yc) = gf_ln_y(delta * w, ratio);
                beta_inc_ln(m1, m2, ln_y, ln_yc).1
            }
        }
    }

    /// `(ln S(w), d ln S / dw)`.
    pub(crate) fn log_sf_slope(&self, w: f64) -> (f64, f64) {
        let ls = self.log_sf(w);
        let (lg, _) = self.log_density(w);
        (ls, -(lg - ls).exp())
    }

    /// Standardized quantile: `w` with `P(W ≤ w) = u`.
    pub(crate) fn quantile(&self, u: f64) -> f64 {
        match *self {
            Kernel::GgSmall { tau } => {
                let z = normal_quantile(u);
                z - tau * (z * z + 2.0) / 6.0
            }
            Kernel::GgShape { tau, gamma, .. } => {
                let l = gamma_inv_log_ratio(gamma, u, tau < 0.0);
                l / tau
            }
            Kernel::GfShape { .. } => self.quantile_by_bisection(u),
        }
    }

    fn quantile_by_bisection(&self, u: f64) -> f64 {
        let target = (1.0 - u).ln();
        // ln S is decreasing in w.
        let mut lo = -1.0;
        let mut hi = 1.0;
        while self.log_sf(lo) < target {
            lo *= 2.0;
            if lo < -1e6 {
                return lo;
            }
        }
        while self.log_sf(hi) > target {
            hi *= 2.0;
            if hi > 1e6 {
                return hi;
            }
        }
        while hi - lo > 1e-12 * (1.0 + lo.abs().max(hi.abs())) {
            let mid = 0.5 * (lo + hi);
            if self.log_sf(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// `u = expm1(δw) (1 − y)`, the relative offset of `y` from its mode ratio.
fn gf_u(dw: f64, ratio: f64) -> f64 {
    if dw > 0.0 {
        let e = (-dw).exp();
        (1.0 - e) / (e + ratio)
    } else {
        dw.exp_m1() / (1.0 + ratio * dw.exp())
    }
}

/// `ln(1 + e^x)`.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `ln y` and `ln(1 − y)` for `y = r e^{δw} / (1 + r e^{δw})`.
fn gf_ln_y(dw: f64, ratio: f64) -> (f64, f64) {
    let l = ratio.ln() + dw;
    (-softplus(-l), -softplus(l))
}

/// Generalized gamma with location `beta`, scale `sigma` and shape `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GgParams {
    pub beta: f64,
    pub sigma: f64,
    pub tau: f64,
}

/// Generalized F with location `beta`, scale `sigma` and shapes `q`, `p ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GfParams {
    pub beta: f64,
    pub sigma: f64,
    pub q: f64,
    pub p: f64,
}

impl GgParams {
    pub fn new(beta: f64, sigma: f64, tau: f64) -> Result<Self> {
        if !(sigma > 0.0) || !beta.is_finite() || !tau.is_finite() || !sigma.is_finite() {
            return Err(NphError::InvalidInput(format!(
                "generalized gamma needs finite parameters and sigma > 0, got ({beta}, {sigma}, {tau})"
            )));
        }
        Ok(GgParams { beta, sigma, tau })
    }
}

impl GfParams {
    pub fn new(beta: f64, sigma: f64, q: f64, p: f64) -> Result<Self> {
        if !(sigma > 0.0) || !(p >= 0.0) || ![beta, sigma, q, p].iter().all(|v| v.is_finite()) {
            return Err(NphError::InvalidInput(format!(
                "generalized F needs finite parameters, sigma > 0 and p >= 0, got ({beta}, {sigma}, {q}, {p})"
            )));
        }
        Ok(GfParams { beta, sigma, q, p })
    }

    /// `(δ, m1, m2)`, evaluated at `max(p, P_LIMIT)`.
    pub fn derived(&self) -> (f64, f64, f64) {
        match Kernel::gf(self.q, self.p.max(P_LIMIT)) {
            Kernel::GfShape { delta, m1, m2, .. } => (delta, m1, m2),
            _ => unreachable!(),
        }
    }
}

/// A fitted or hand-specified parametric AFT survival distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum AftDistribution {
    Gg(GgParams),
    Gf(GfParams),
}

impl From<GgParams> for AftDistribution {
    fn from(p: GgParams) -> Self {
        AftDistribution::Gg(p)
    }
}

impl From<GfParams> for AftDistribution {
    fn from(p: GfParams) -> Self {
        AftDistribution::Gf(p)
    }
}

impl AftDistribution {
    fn location_scale(&self) -> (f64, f64) {
        match self {
            AftDistribution::Gg(p) => (p.beta, p.sigma),
            AftDistribution::Gf(p) => (p.beta, p.sigma),
        }
    }

    pub(crate) fn kernel(&self) -> Kernel {
        match self {
            AftDistribution::Gg(p) => Kernel::gg(p.tau),
            AftDistribution::Gf(p) => Kernel::gf(p.q, p.p),
        }
    }

    fn standardize(&self, t: f64) -> f64 {
        let (beta, sigma) = self.location_scale();
        (t.ln() - beta) / sigma
    }

    pub fn log_density(&self, t: f64) -> f64 {
        if !(t > 0.0) {
            return f64::NEG_INFINITY;
        }
        let (_, sigma) = self.location_scale();
        self.kernel().log_density(self.standardize(t)).0 - (sigma * t).ln()
    }

    pub fn density(&self, t: f64) -> f64 {
        self.log_density(t).exp()
    }

    pub fn log_survival(&self, t: f64) -> f64 {
        if !(t > 0.0) {
            return 0.0;
        }
        self.kernel().log_sf(self.standardize(t))
    }

    pub fn survival(&self, t: f64) -> f64 {
        self.log_survival(t).exp()
    }

    pub fn cdf(&self, t: f64) -> f64 {
        -self.log_survival(t).exp_m1()
    }

    /// Time `t` with `P(T ≤ t) = u`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(NphError::InvalidInput(format!("quantile level must be in (0,1), got {u}")));
        }
        let (beta, sigma) = self.location_scale();
        Ok((beta + sigma * self.kernel().quantile(u)).exp())
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5).expect("0.5 is a valid level")
    }

    /// `∫₀^t S(u) du` by adaptive quadrature.
    pub fn rmst(&self, t: f64) -> f64 {
        if !(t > 0.0) {
            return 0.0;
        }
        integrate_adaptive(|u| self.survival(u), 0.0, t, 1e-10)
    }

    /// RMST at each of the ascending `times`, accumulated segment by segment.
    pub fn rmst_grid(&self, times: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(times.len());
        let mut acc = 0.0;
        let mut prev = 0.0;
        for &t in times {
            if t > prev {
                acc += integrate_adaptive(|u| self.survival(u), prev, t, 1e-10);
                prev = t;
            }
            out.push(acc);
        }
        out
    }
}
