//! Unconstrained minimizers used by the likelihood fitters.
//!
//! Positivity constraints are handled by the callers through log (or logit)
//! reparameterization, so everything here works on all of R^d. An objective
//! returns `+inf` (or NaN) outside its domain; both are treated as "worse
//! than anything finite".

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimOptions {
    /// Relative tolerance on function value and gradient.
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_iter: 5000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[inline]
fn sane(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Nelder-Mead downhill simplex with standard coefficients.
pub fn nelder_mead<F>(f: &F, x0: &[f64], step: f64, opts: OptimOptions) -> OptimResult
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let d = x0.len();
    if d == 0 {
        return OptimResult { x: Vec::new(), value: sane(f(x0)), iterations: 0, converged: true };
    }
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    simplex.push(x0.to_vec());
    for i in 0..d {
        let mut v = x0.to_vec();
        v[i] += if v[i].abs() > 1.0 { step * v[i].abs() } else { step };
        simplex.push(v);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|v| sane(f(v))).collect();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let best = vals[0];
        let worst = vals[d];
        let spread = (worst - best).abs();
        let size = simplex[1..]
            .iter()
            .map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if best.is_finite()
            && spread <= opts.tolerance * (best.abs() + opts.tolerance)
            && size <= 1e3 * opts.tolerance.sqrt()
        {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; d];
        for v in &simplex[..d] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / d as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[d]).map(|(c, w)| c + t * (w - c)).collect()
        };
        let xr = along(-1.0);
        let fr = sane(f(&xr));
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = sane(f(&xe));
            if fe < fr {
                simplex[d] = xe;
                vals[d] = fe;
            } else {
                simplex[d] = xr;
                vals[d] = fr;
            }
        } else if fr < vals[d - 1] {
            simplex[d] = xr;
            vals[d] = fr;
        } else {
            let (xc, fc) = if fr < vals[d] {
                let xc = along(-0.5);
                let fc = sane(f(&xc));
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = sane(f(&xc));
                (xc, fc)
            };
            if fc < vals[d].min(fr) {
                simplex[d] = xc;
                vals[d] = fc;
            } else {
                for i in 1..=d {
                    let shrunk: Vec<f64> =
                        simplex[0].iter().zip(&simplex[i]).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    vals[i] = sane(f(&shrunk));
                    simplex[i] = shrunk;
                }
            }
        }
    }
    let (ib, _) = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty simplex");
    OptimResult { x: simplex[ib].clone(), value: vals[ib], iterations, converged }
}

/// Central-difference gradient.
pub fn gradient<F>(f: &F, x: &[f64]) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let h = 1e-6 * (1.0 + x[i].abs());
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Central-difference Hessian.
pub fn hessian<F>(f: &F, x: &[f64]) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let d = x.len();
    let mut h = DMatrix::zeros(d, d);
    let f0 = f(x);
    let steps: Vec<f64> = x.iter().map(|v| 1e-4 * (1.0 + v.abs())).collect();
    let mut xp = x.to_vec();
    for i in 0..d {
        let hi = steps[i];
        xp[i] = x[i] + hi;
        let fp = f(&xp);
        xp[i] = x[i] - hi;
        let fm = f(&xp);
        xp[i] = x[i];
        h[(i, i)] = (fp - 2.0 * f0 + fm) / (hi * hi);
        for j in 0..i {
            let hj = steps[j];
            let mut eval = |si: f64, sj: f64| {
                xp[i] = x[i] + si * hi;
                xp[j] = x[j] + sj * hj;
                let v = f(&xp);
                xp[i] = x[i];
                xp[j] = x[j];
                v
            };
            let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0))
                / (4.0 * hi * hj);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}

/// BFGS with finite-difference gradients and backtracking line search.
pub fn bfgs<F>(f: &F, x0: &[f64], opts: OptimOptions) -> OptimResult
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    bfgs_with_grad(f, &|x: &[f64]| gradient(f, x), x0, opts)
}

/// BFGS given an explicit gradient.
pub fn bfgs_with_grad<F, G>(f: &F, grad: &G, x0: &[f64], opts: OptimOptions) -> OptimResult
where
    F: Fn(&[f64]) -> f64 + ?Sized,
    G: Fn(&[f64]) -> Vec<f64> + ?Sized,
{
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut fx = sane(f(&x));
    if d == 0 || !fx.is_finite() {
        return OptimResult { x, value: fx, iterations: 0, converged: d == 0 };
    }
    let mut g = grad(&x);
    let mut hinv = DMatrix::<f64>::identity(d, d);
    let mut converged = false;
    let mut iterations = 0;
    let mut small_steps = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let gnorm = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if gnorm <= opts.tolerance * (1.0 + fx.abs()).max(1.0) * 1e-1 {
            converged = true;
            break;
        }
        let gv = nalgebra::DVector::from_column_slice(&g);
        let mut dir = -(&hinv * &gv);
        let mut slope = dir.dot(&gv);
        if slope >= 0.0 {
            hinv = DMatrix::identity(d, d);
            dir = -gv.clone();
            slope = dir.dot(&gv);
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn: Vec<f64> = x.iter().zip(dir.iter()).map(|(a, b)| a + t * b).collect();
            let fnew = sane(f(&xn));
            if fnew <= fx + 1e-4 * t * slope {
                accepted = Some((xn, fnew));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            // No descent possible along the quasi-Newton direction: we are at
            // the resolution limit of the finite-difference gradient.
            converged = gnorm <= 1e-4 * (1.0 + fx.abs());
            break;
        };
        let gn = grad(&xn);
        let s = nalgebra::DVector::from_iterator(d, xn.iter().zip(&x).map(|(a, b)| a - b));
        let yv = nalgebra::DVector::from_iterator(d, gn.iter().zip(&g).map(|(a, b)| a - b));
        let sy = s.dot(&yv);
        let df = fx - fnew;
        x = xn;
        g = gn;
        fx = fnew;
        if sy > 1e-12 * s.norm() * yv.norm() {
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(d, d);
            let a = &i - rho * &s * yv.transpose();
            let b = &i - rho * &yv * s.transpose();
            hinv = &a * &hinv * &b + rho * &s * s.transpose();
        }
        if df.abs() <= opts.tolerance * 1e-2 * (1.0 + fx.abs()) {
            small_steps += 1;
            if small_steps >= 3 {
                converged = true;
                break;
            }
        } else {
            small_steps = 0;
        }
    }
    OptimResult { x, value: fx, iterations, converged }
}

/// Nelder-Mead followed by BFGS refinement from the simplex optimum.
pub fn minimize<F>(f: &F, x0: &[f64], opts: OptimOptions) -> OptimResult
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let nm = nelder_mead(f, x0, 0.3, OptimOptions { tolerance: opts.tolerance.max(1e-10), ..opts });
    let start = if nm.value.is_finite() { nm.x.clone() } else { x0.to_vec() };
    let polished = bfgs(f, &start, opts);
    let mut best = if polished.value <= nm.value { polished } else { OptimResult { converged: false, ..nm.clone() } };
    best.iterations += nm.iterations;
    best
}

/// Best of several [`minimize`] runs.
pub fn multistart<F>(f: &F, starts: &[Vec<f64>], opts: OptimOptions) -> Option<OptimResult>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let mut best: Option<OptimResult> = None;
    let mut total_iter = 0;
    for s in starts {
        let r = minimize(f, s, opts);
        total_iter += r.iterations;
        if best.as_ref().is_none_or(|b| r.value < b.value) {
            best = Some(r);
        }
    }
    best.map(|mut b| {
        b.iterations = total_iter;
        b
    })
}

/// Standard errors from the inverse Hessian of a negative log-likelihood.
pub fn stderr_from_hessian(h: &DMatrix<f64>) -> Option<Vec<f64>> {
    let inv = linalg::spd_inverse(h)?;
    let se: Vec<f64> = (0..h.nrows()).map(|i| inv[(i, i)]).collect();
    if se.iter().all(|v| v.is_finite() && *v >= 0.0) {
        Some(se.into_iter().map(crate::math::sqrt).collect())
    } else {
        None
    }
}
