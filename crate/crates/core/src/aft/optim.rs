//! Small dense quasi-Newton minimizer and the linear algebra it needs.

/// Stopping rules for [`bfgs`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Converged once the largest gradient component falls below this.
    pub gtol: f64,
    /// Largest allowed change of any coordinate in one step.
    pub max_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions { max_iter: 200, gtol: 1e-6, max_step: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub n_iter: usize,
    pub converged: bool,
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f`, which returns the value and fills the gradient.
///
/// Non-finite values are treated as +∞ so the line search backs away from
/// them. The inverse Hessian approximation starts as a scaled identity.
pub fn bfgs<F>(mut f: F, x0: &[f64], opts: BfgsOptions) -> Minimum
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    if !fx.is_finite() {
        return Minimum { x, f: f64::INFINITY, grad: g, n_iter: 0, converged: false };
    }
    let mut h = identity(n);
    let mut scaled = false;
    let mut xn = vec![0.0; n];
    let mut gn = vec![0.0; n];
    let mut iter = 0;
    let mut stalls = 0;

    while iter < opts.max_iter {
        if max_abs(&g) < opts.gtol {
            return Minimum { x, f: fx, grad: g, n_iter: iter, converged: true };
        }
        iter += 1;

        let mut d: Vec<f64> = (0..n).map(|i| -dot(&h[i], &g)).collect();
        let mut slope = dot(&d, &g);
        if !(slope < 0.0) {
            // Lost descent; restart from steepest descent.
            h = identity(n);
            d = g.iter().map(|v| -v).collect();
            slope = dot(&d, &g);
        }
        let big = max_abs(&d);
        if big > opts.max_step {
            let s = opts.max_step / big;
            d.iter_mut().for_each(|v| *v *= s);
            slope *= s;
        }

        let mut alpha = 1.0;
        let mut accepted = false;
        let mut fnew = f64::INFINITY;
        for _ in 0..40 {
            for i in 0..n {
                xn[i] = x[i] + alpha * d[i];
            }
            fnew = f(&xn, &mut gn);
            if fnew.is_finite() && fnew <= fx + 1e-4 * alpha * slope {
                accepted = true;
                break;
            }
            alpha *= if fnew.is_finite() { 0.5 } else { 0.1 };
        }
        if !accepted {
            // No decrease is possible along any direction we can form here.
            if stalls == 0 {
                stalls += 1;
                h = identity(n);
                scaled = false;
                continue;
            }
            break;
        }
        stalls = 0;

        let s: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| gn[i] - g[i]).collect();
        let sy = dot(&s, &y);
        let improvement = fx - fnew;
        x.copy_from_slice(&xn);
        g.copy_from_slice(&gn);
        fx = fnew;

        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if !scaled {
                let gamma = sy / dot(&y, &y);
                h = identity(n);
                h.iter_mut().enumerate().for_each(|(i, r)| r[i] = gamma);
                scaled = true;
            }
            update_inverse(&mut h, &s, &y, sy);
        }
        if improvement <= 1e-15 * fx.abs().max(1.0) && max_abs(&s) < 1e-12 {
            break;
        }
    }
    let converged = max_abs(&g) < opts.gtol;
    Minimum { x, f: fx, grad: g, n_iter: iter, converged }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ`.
fn update_inverse(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

/// Cholesky factor `L` with `A = L Lᵀ`, or `None` if `A` is not positive definite.
pub fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

/// Inverse of a symmetric positive-definite matrix via its Cholesky factor.
pub fn spd_inverse(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let l = cholesky(a)?;
    let n = a.len();
    let mut inv = vec![vec![0.0; n]; n];
    for col in 0..n {
        // Solve L z = e_col, then Lᵀ x = z.
        let mut z = vec![0.0; n];
        for i in 0..n {
            let rhs = if i == col { 1.0 } else { 0.0 };
            z[i] = (rhs - (0..i).map(|k| l[i][k] * z[k]).sum::<f64>()) / l[i][i];
        }
        for i in (0..n).rev() {
            inv[i][col] = (z[i] - ((i + 1)..n).map(|k| l[k][i] * inv[k][col]).sum::<f64>()) / l[i][i];
        }
    }
    Some(inv)
}

/// Solves `A x = b` for symmetric positive-definite `A`.
pub fn spd_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let l = cholesky(a)?;
    let n = b.len();
    let mut z = vec![0.0; n];
    for i in 0..n {
        z[i] = (b[i] - (0..i).map(|k| l[i][k] * z[k]).sum::<f64>()) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = (z[i] - ((i + 1)..n).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
    }
    Some(x)
}
