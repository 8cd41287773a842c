//! Central box probabilities `P(|Z_k| ≤ z for all k)` for standard normal
//! vectors of dimension up to three.
//!
//! The trivariate case conditions on the first coordinate and integrates the
//! remaining bivariate rectangle probability, itself written as a conditioned
//! one-dimensional integral. Both layers use adaptive Gauss–Legendre, so the
//! result is deterministic.

use crate::error::{NphError, Result};
use crate::quadrature::integrate_adaptive;
use crate::special::{normal_cdf, normal_pdf};

/// Correlations this close to ±1 are treated as exact, letting the
/// symmetric box collapse one coordinate.
const COLLINEAR: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;
/// Integration window cap in standard deviations.
const CUT: f64 = 9.0;

/// Checks symmetry, unit diagonal and positive semidefiniteness.
pub fn validate_correlation(r: &[[f64; 3]; 3]) -> Result<()> {
    for i in 0..3 {
        if (r[i][i] - 1.0).abs() > 1e-12 {
            return Err(NphError::InvalidInput("correlation diagonal must be 1".into()));
        }
        for j in 0..3 {
            if !r[i][j].is_finite() || (r[i][j] - r[j][i]).abs() > 1e-12 {
                return Err(NphError::InvalidInput("correlation must be symmetric".into()));
            }
            if r[i][j].abs() > 1.0 + PSD_TOL {
                return Err(NphError::InvalidInput("correlation entries must lie in [-1, 1]".into()));
            }
        }
    }
    let (a, b, c) = (r[0][1], r[0][2], r[1][2]);
    let det = 1.0 + 2.0 * a * b * c - a * a - b * b - c * c;
    if det < -PSD_TOL {
        return Err(NphError::InvalidInput(format!(
            "correlation matrix is not positive semidefinite (det = {det:.3e})"
        )));
    }
    Ok(())
}

/// `P(|Z_1| ≤ z, |Z_2| ≤ z, |Z_3| ≤ z)` for `Z ~ N(0, r)`, accurate to well
/// below 1e-6 absolute.
pub fn mvn_box_probability(r: &[[f64; 3]; 3], z: f64) -> Result<f64> {
    validate_correlation(r)?;
    if !(z >= 0.0) {
        return Err(NphError::InvalidInput(format!("box half-width must be non-negative, got {z}")));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    if z.is_infinite() {
        return Ok(1.0);
    }

    // With a symmetric box, a coordinate perfectly (anti)correlated with
    // another adds no constraint.
    let mut keep: Vec<usize> = Vec::with_capacity(3);
    for i in 0..3 {
        if keep.iter().all(|&k| r[k][i].abs() < 1.0 - COLLINEAR) {
            keep.push(i);
        }
    }
    let p = match keep.len() {
        1 => univariate(z),
        2 => bivariate_box(r[keep[0]][keep[1]].clamp(-1.0, 1.0), z),
        _ => trivariate_box(r, z),
    };
    Ok(p.clamp(0.0, 1.0))
}

/// Product formula for independent coordinates.
pub fn independent_box_probability(z: f64, dim: i32) -> f64 {
    univariate(z).powi(dim)
}

fn univariate(z: f64) -> f64 {
    // 1 − 2Φ(−z) keeps precision for large z.
    1.0 - 2.0 * normal_cdf(-z)
}

/// `Φ((b − m)/s) − Φ((a − m)/s)`; with `s = 0` this is the indicator of `a ≤ m ≤ b`.
fn interval_prob(a: f64, b: f64, m: f64, s: f64) -> f64 {
    if s <= 0.0 {
        return if m >= a && m <= b { 1.0 } else { 0.0 };
    }
    let lo = (a - m) / s;
    let hi = (b - m) / s;
    if lo > 0.0 {
        // Both in the upper tail: subtract survivor values to avoid cancellation.
        normal_cdf(-lo) - normal_cdf(-hi)
    } else {
        normal_cdf(hi) - normal_cdf(lo)
    }
}

/// `P(a1 ≤ X ≤ b1, a2 ≤ Y ≤ b2)` for standard bivariate normal with correlation `rho`.
fn bivariate_rectangle(a1: f64, b1: f64, a2: f64, b2: f64, rho: f64, tol: f64) -> f64 {
    let lo = a1.max(-CUT);
    let hi = b1.min(CUT);
    if lo >= hi {
        return 0.0;
    }
    let s = (1.0 - rho * rho).max(0.0).sqrt();
    integrate_adaptive(|x| normal_pdf(x) * interval_prob(a2, b2, rho * x, s), lo, hi, tol)
}

fn bivariate_box(rho: f64, z: f64) -> f64 {
    bivariate_rectangle(-z, z, -z, z, rho, 1e-10)
}

fn trivariate_box(r: &[[f64; 3]; 3], z: f64) -> f64 {
    // Condition on the coordinate least correlated with the others so the
    // conditional pair stays well away from collinearity where possible.
    let strength = |i: usize| (0..3).filter(|&j| j != i).map(|j| r[i][j].abs()).sum::<f64>();
    let first = (0..3).min_by(|&i, &j| strength(i).total_cmp(&strength(j))).unwrap();
    let others: Vec<usize> = (0..3).filter(|&j| j != first).collect();
    let (j, k) = (others[0], others[1]);
    let r1j = r[first][j];
    let r1k = r[first][k];
    let sj = (1.0 - r1j * r1j).sqrt();
    let sk = (1.0 - r1k * r1k).sqrt();
    let cond = ((r[j][k] - r1j * r1k) / (sj * sk)).clamp(-1.0, 1.0);

    let lim = z.min(CUT);
    integrate_adaptive(
        |x| {
            let bj = (z - r1j * x) / sj;
            let aj = (-z - r1j * x) / sj;
            let bk = (z - r1k * x) / sk;
            let ak = (-z - r1k * x) / sk;
            normal_pdf(x) * bivariate_rectangle(aj, bj, ak, bk, cond, 1e-10)
        },
        -lim,
        lim,
        1e-9,
    )
}
