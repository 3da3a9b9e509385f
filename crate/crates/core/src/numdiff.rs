//! Central finite differences with per-component relative steps.
//!
//! Steps scale as `h * (1 + |x_k|)` so the same relative resolution applies
//! to components of different magnitude.

use nalgebra::{DMatrix, DVector};

/// Default step for first derivatives.
pub const GRADIENT_STEP: f64 = 1e-6;
/// Default step for second derivatives (larger: second differences divide
/// by `h^2`, so rounding error grows much faster than for gradients).
pub const HESSIAN_STEP: f64 = 5e-5;

pub fn gradient<F>(f: F, x: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let n = x.len();
    let mut g = DVector::zeros(n);
    let mut xp = x.clone();
    let mut xm = x.clone();
    for k in 0..n {
        let hk = h * (1.0 + x[k].abs());
        xp[k] = x[k] + hk;
        xm[k] = x[k] - hk;
        g[k] = (f(&xp) - f(&xm)) / (2.0 * hk);
        xp[k] = x[k];
        xm[k] = x[k];
    }
    g
}

/// Jacobian of a vector-valued map, one column per input component.
pub fn jacobian<F>(f: F, x: &DVector<f64>, h: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = x.len();
    let m = f(x).len();
    let mut jac = DMatrix::zeros(m, n);
    let mut xp = x.clone();
    let mut xm = x.clone();
    for k in 0..n {
        let hk = h * (1.0 + x[k].abs());
        xp[k] = x[k] + hk;
        xm[k] = x[k] - hk;
        let col = (f(&xp) - f(&xm)) / (2.0 * hk);
        jac.set_column(k, &col);
        xp[k] = x[k];
        xm[k] = x[k];
    }
    jac
}

/// Symmetric central-difference Hessian.
pub fn hessian<F>(f: F, x: &DVector<f64>, h: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let n = x.len();
    let f0 = f(x);
    let steps: Vec<f64> = (0..n).map(|k| h * (1.0 + x[k].abs())).collect();
    let mut hess = DMatrix::zeros(n, n);
    let mut y = x.clone();
    for i in 0..n {
        y[i] = x[i] + steps[i];
        let fp = f(&y);
        y[i] = x[i] - steps[i];
        let fm = f(&y);
        y[i] = x[i];
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (steps[i] * steps[i]);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            y[i] = x[i] + steps[i];
            y[j] = x[j] + steps[j];
            let fpp = f(&y);
            y[j] = x[j] - steps[j];
            let fpm = f(&y);
            y[i] = x[i] - steps[i];
            let fmm = f(&y);
            y[j] = x[j] + steps[j];
            let fmp = f(&y);
            y[i] = x[i];
            y[j] = x[j];
            let val = (fpp - fpm - fmp + fmm) / (4.0 * steps[i] * steps[j]);
            hess[(i, j)] = val;
            hess[(j, i)] = val;
        }
    }
    hess
}
