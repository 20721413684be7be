//! Posterior mode search and curvature at the mode.
//!
//! A Nelder-Mead pass gets close; BFGS with central-difference gradients
//! polishes. The Hessian is taken by central differences at the end.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Result, TgarmaError};
use crate::inference::posterior::LogTarget;

#[derive(Debug, Clone)]
pub struct ModeOptions {
    pub max_simplex_iter: usize,
    pub max_bfgs_iter: usize,
    pub grad_tol: f64,
    /// Gradient bound below which a stalled line search still counts as converged.
    pub stall_grad_tol: f64,
}

impl Default for ModeOptions {
    fn default() -> Self {
        Self { max_simplex_iter: 4000, max_bfgs_iter: 300, grad_tol: 1e-6, stall_grad_tol: 1e-3 }
    }
}

#[derive(Debug, Clone)]
pub struct Mode {
    pub x: Vec<f64>,
    pub value: f64,
    /// Inverse of the negated Hessian, symmetrized and made positive-definite.
    pub neg_hessian_inv: DMatrix<f64>,
    /// Whether eigenvalues had to be lifted to reach positive-definiteness.
    pub regularized: bool,
    pub iterations: usize,
}

fn eval(target: &dyn LogTarget, x: &[f64]) -> f64 {
    let v = target.ln_density(x);
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Maximizes `target` from `init`.
pub fn find_mode(target: &dyn LogTarget, init: &[f64], opts: &ModeOptions) -> Result<Mode> {
    let d = target.dim();
    if init.len() != d {
        return Err(TgarmaError::Dimension(format!("initial point has {} coordinates, target has {d}", init.len())));
    }
    let f0 = eval(target, init);
    if !f0.is_finite() {
        return Err(TgarmaError::Domain("initial point is outside the support of the target".into()));
    }
    let (x_nm, f_nm, nm_iter) = nelder_mead(target, init, opts.max_simplex_iter);
    let (x, value, bfgs_iter, grad_norm) = bfgs(target, &x_nm, f_nm, opts);
    let iterations = nm_iter + bfgs_iter;
    if !(grad_norm <= opts.stall_grad_tol) {
        return Err(TgarmaError::NoConvergence { iterations, best: x, best_value: value });
    }
    let hess = hessian(target, &x, value);
    let (neg_hessian_inv, regularized) = regularized_inverse(&hess)?;
    Ok(Mode { x, value, neg_hessian_inv, regularized, iterations })
}

fn nelder_mead(target: &dyn LogTarget, init: &[f64], max_iter: usize) -> (Vec<f64>, f64, usize) {
    let d = init.len();
    // minimize the negated target
    let f = |x: &[f64]| -eval(target, x);
    let mut simplex: Vec<Vec<f64>> = vec![init.to_vec()];
    for i in 0..d {
        let mut v = init.to_vec();
        v[i] += 0.1 * v[i].abs().max(1.0);
        if !f(&v).is_finite() {
            v[i] = init[i] - 0.1 * init[i].abs().max(1.0);
        }
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut iter = 0;
    while iter < max_iter {
        iter += 1;
        let mut idx: Vec<usize> = (0..=d).collect();
        idx.sort_by(|a, b| values[*a].total_cmp(&values[*b]));
        simplex = idx.iter().map(|i| simplex[*i].clone()).collect();
        values = idx.iter().map(|i| values[*i]).collect();

        let spread = (values[d] - values[0]).abs();
        let size = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if values[d].is_finite() && spread <= 1e-11 * values[0].abs().max(1.0) && size <= 1e-8 {
            break;
        }

        let centroid: Vec<f64> = (0..d).map(|j| simplex[..d].iter().map(|v| v[j]).sum::<f64>() / d as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..d).map(|j| centroid[j] + t * (simplex[d][j] - centroid[j])).collect() };

        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                simplex[d] = xe;
                values[d] = fe;
            } else {
                simplex[d] = xr;
                values[d] = fr;
            }
        } else if fr < values[d - 1] {
            simplex[d] = xr;
            values[d] = fr;
        } else {
            let (xc, fc) = if fr < values[d] {
                let xc = along(-0.5);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = f(&xc);
                (xc, fc)
            };
            if fc < values[d].min(fr) {
                simplex[d] = xc;
                values[d] = fc;
            } else {
                for i in 1..=d {
                    let shrunk: Vec<f64> = (0..d).map(|j| simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j])).collect();
                    values[i] = f(&shrunk);
                    simplex[i] = shrunk;
                }
            }
        }
    }
    let best = (0..=d).min_by(|a, b| values[*a].total_cmp(&values[*b])).unwrap_or(0);
    (simplex[best].clone(), -values[best], iter)
}

fn step(x: f64, rel: f64) -> f64 {
    rel * x.abs().max(1.0)
}

fn gradient(target: &dyn LogTarget, x: &[f64]) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = step(x[i], 1e-5);
            xp[i] = x[i] + h;
            let fp = eval(target, &xp);
            xp[i] = x[i] - h;
            let fm = eval(target, &xp);
            xp[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

fn inf_norm(g: &[f64]) -> f64 {
    g.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// BFGS ascent. Returns `(x, value, iterations, final gradient norm)`.
fn bfgs(target: &dyn LogTarget, init: &[f64], f_init: f64, opts: &ModeOptions) -> (Vec<f64>, f64, usize, f64) {
    let d = init.len();
    let mut x = DVector::from_column_slice(init);
    let mut fx = f_init;
    let mut g = DVector::from_vec(gradient(target, x.as_slice()));
    if g.iter().any(|v| !v.is_finite()) {
        return (x.as_slice().to_vec(), fx, 0, f64::INFINITY);
    }
    // inverse Hessian approximation of the negated target
    let mut hinv = DMatrix::<f64>::identity(d, d);
    let mut iter = 0;
    while iter < opts.max_bfgs_iter {
        if inf_norm(g.as_slice()) <= opts.grad_tol {
            break;
        }
        iter += 1;
        let mut dir = &hinv * &g;
        if dir.dot(&g) <= 0.0 {
            hinv = DMatrix::identity(d, d);
            dir = g.clone();
        }
        let slope = dir.dot(&g);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn = &x + &dir * t;
            let fnew = eval(target, xn.as_slice());
            if fnew.is_finite() && fnew >= fx + 1e-4 * t * slope {
                accepted = Some((xn, fnew));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fnew)) = accepted else { break };
        let gn = DVector::from_vec(gradient(target, xn.as_slice()));
        if gn.iter().any(|v| !v.is_finite()) {
            x = xn;
            fx = fnew;
            break;
        }
        // secant pair for the negated function
        let s = &xn - &x;
        let y = &g - &gn;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let eye = DMatrix::<f64>::identity(d, d);
            let left = &eye - &s * y.transpose() * rho;
            let right = &eye - &y * s.transpose() * rho;
            hinv = &left * &hinv * &right + &s * s.transpose() * rho;
        }
        let small_change = (fnew - fx).abs() <= 1e-15 * fx.abs().max(1.0);
        x = xn;
        fx = fnew;
        g = gn;
        if small_change && inf_norm(g.as_slice()) <= opts.stall_grad_tol {
            break;
        }
    }
    let gnorm = inf_norm(g.as_slice());
    (x.as_slice().to_vec(), fx, iter, gnorm)
}

/// Central-difference Hessian of `target` at `x`.
pub fn hessian(target: &dyn LogTarget, x: &[f64], fx: f64) -> DMatrix<f64> {
    let d = x.len();
    let h: Vec<f64> = x.iter().map(|v| step(*v, 1e-4)).collect();
    let mut hess = DMatrix::zeros(d, d);
    let mut xp = x.to_vec();
    let mut at = |shifts: &[(usize, f64)]| {
        for (i, s) in shifts {
            xp[*i] += s;
        }
        let v = eval(target, &xp);
        for (i, s) in shifts {
            xp[*i] -= s;
        }
        v
    };
    for i in 0..d {
        let fp = at(&[(i, h[i])]);
        let fm = at(&[(i, -h[i])]);
        hess[(i, i)] = (fp - 2.0 * fx + fm) / (h[i] * h[i]);
        for j in 0..i {
            let fpp = at(&[(i, h[i]), (j, h[j])]);
            let fpm = at(&[(i, h[i]), (j, -h[j])]);
            let fmp = at(&[(i, -h[i]), (j, h[j])]);
            let fmm = at(&[(i, -h[i]), (j, -h[j])]);
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess
}

/// Inverse of `-hess`, with eigenvalues lifted to a positive floor.
pub fn regularized_inverse(hess: &DMatrix<f64>) -> Result<(DMatrix<f64>, bool)> {
    if hess.iter().any(|v| !v.is_finite()) {
        return Err(TgarmaError::Numeric("Hessian at the mode has non-finite entries".into()));
    }
    let neg = -(hess + hess.transpose()) * 0.5;
    let eig = SymmetricEigen::new(neg);
    let max_abs = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(max_abs > 0.0) {
        return Err(TgarmaError::Numeric("Hessian at the mode is zero".into()));
    }
    let floor = 1e-8 * max_abs;
    let mut regularized = false;
    let lifted = eig.eigenvalues.map(|e| {
        if e >= floor {
            e
        } else {
            regularized = true;
            e.abs().max(floor)
        }
    });
    let inv_diag = DMatrix::from_diagonal(&lifted.map(|e| 1.0 / e));
    let inv = &eig.eigenvectors * inv_diag * eig.eigenvectors.transpose();
    let inv = (&inv + inv.transpose()) * 0.5;
    if inv.clone().cholesky().is_none() {
        return Err(TgarmaError::Numeric("regularized inverse Hessian is not positive-definite".into()));
    }
    Ok((inv, regularized))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::posterior::FnTarget;

    #[test]
    fn quadratic_target_recovers_mean_and_covariance() {
        let mean = [1.5, -0.7, 0.3];
        let cov = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, -0.2, 0.3, 1.0, 0.1, -0.2, 0.1, 0.5]);
        let prec = cov.clone().try_inverse().unwrap();
        let target = FnTarget::new(3, |x: &[f64]| {
            let d = DVector::from_iterator(3, x.iter().zip(mean).map(|(a, b)| a - b));
            -0.5 * (d.transpose() * &prec * &d)[(0, 0)]
        });
        let mode = find_mode(&target, &[0.0, 0.0, 0.0], &ModeOptions::default()).unwrap();
        for (a, b) in mode.x.iter().zip(mean) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        assert!(!mode.regularized);
        for (a, b) in mode.neg_hessian_inv.iter().zip(cov.iter()) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn rosenbrock_like_target_converges() {
        let target = FnTarget::new(2, |x: &[f64]| -((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)));
        let mode = find_mode(&target, &[-1.2, 1.0], &ModeOptions::default()).unwrap();
        assert!((mode.x[0] - 1.0).abs() < 1e-4 && (mode.x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn unbounded_target_fails_to_converge() {
        let target = FnTarget::new(1, |x: &[f64]| x[0]);
        let opts = ModeOptions { max_simplex_iter: 50, max_bfgs_iter: 5, ..ModeOptions::default() };
        match find_mode(&target, &[0.0], &opts) {
            Err(TgarmaError::NoConvergence { best, .. }) => assert_eq!(best.len(), 1),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let target = FnTarget::new(1, |_: &[f64]| f64::NEG_INFINITY);
        assert!(matches!(find_mode(&target, &[0.0], &ModeOptions::default()), Err(TgarmaError::Domain(_))));
    }

    #[test]
    fn saddle_gets_regularized() {
        let hess = DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, 1.0]);
        let (inv, reg) = regularized_inverse(&hess).unwrap();
        assert!(reg);
        assert!((inv[(0, 0)] - 0.5).abs() < 1e-12 && (inv[(1, 1)] - 1.0).abs() < 1e-12);
    }
}
