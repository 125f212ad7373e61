//! Linear, generalized linear and accelerated-failure-time regression, and
//! Scheffé-type mixture models with process covariates.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, least_squares};
use crate::math::{exp, ln, mills_lower, norm_cdf, norm_log_cdf, norm_pdf, sqrt, t_quantile};
use crate::optim::{self, OptimOptions};

/// Prepends a column of ones named `(intercept)`.
pub fn with_intercept(rows: &[Vec<f64>], names: &[String]) -> (Vec<Vec<f64>>, Vec<String>) {
    let x = rows
        .iter()
        .map(|r| {
            let mut v = Vec::with_capacity(r.len() + 1);
            v.push(1.0);
            v.extend_from_slice(r);
            v
        })
        .collect();
    let mut n = vec![String::from("(intercept)")];
    n.extend_from_slice(names);
    (x, n)
}

fn design(rows: &[Vec<f64>], names: &[String]) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Err(Error::InsufficientData("no rows".into()));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != names.len()) {
        return Err(Error::DimensionMismatch { expected: names.len(), got: r.len() });
    }
    Ok(linalg::matrix_from_rows(rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub names: Vec<String>,
    pub coef: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Residual SD with `n − p` degrees of freedom.
    pub sigma: f64,
    pub df: usize,
    pub rss: f64,
    pub residuals: Vec<f64>,
}

impl LinearFit {
    /// Two-sided `level` t-intervals, `(lower, upper)` per coefficient.
    pub fn confidence_intervals(&self, level: f64) -> Vec<(f64, f64)> {
        let q = if self.df > 0 { t_quantile(0.5 + level / 2.0, self.df as f64) } else { f64::INFINITY };
        self.coef.iter().zip(&self.stderr).map(|(b, s)| (b - q * s, b + q * s)).collect()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.coef.iter().zip(x).map(|(b, v)| b * v).sum()
    }
}

/// Ordinary least squares on the given design (no implicit intercept).
pub fn fit_linear(rows: &[Vec<f64>], y: &[f64], names: &[String]) -> Result<LinearFit> {
    let x = design(rows, names)?;
    let (n, p) = x.shape();
    if n <= p {
        return Err(Error::InsufficientData(format!("{n} rows for {p} coefficients")));
    }
    let ls = least_squares(&x, y, names)?;
    let df = n - p;
    let sigma = sqrt(ls.rss / df as f64);
    let stderr = (0..p).map(|j| sigma * sqrt(ls.xtx_inv[(j, j)].max(0.0))).collect();
    Ok(LinearFit { names: names.to_vec(), coef: ls.coef, stderr, sigma, df, rss: ls.rss, residuals: ls.residuals })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GlmFamily {
    BernoulliLogit,
    BernoulliProbit,
    PoissonLog,
}

impl FromStr for GlmFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "logit" | "bernoulli-logit" | "logistic" => Ok(Self::BernoulliLogit),
            "probit" | "bernoulli-probit" => Ok(Self::BernoulliProbit),
            "poisson" | "poisson-log" => Ok(Self::PoissonLog),
            other => Err(invalid(format!("unknown GLM family {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmFit {
    pub family: GlmFamily,
    pub names: Vec<String>,
    pub coef: Vec<f64>,
    pub stderr: Vec<f64>,
    pub deviance: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Euclidean norm of the log-likelihood score at `coef`.
    pub score_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlmOptions {
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for GlmOptions {
    fn default() -> Self {
        Self { tolerance: 1e-10, max_iter: 100 }
    }
}

/// Per-observation `(mean, score ∂ℓ/∂η, working weight, deviance term)`.
fn glm_terms(family: GlmFamily, eta: f64, y: f64) -> (f64, f64, f64, f64) {
    match family {
        GlmFamily::BernoulliLogit => {
            let mu = 1.0 / (1.0 + exp(-eta));
            // log(1 + e^η) without overflow
            let softplus = if eta > 0.0 { eta + libm::log1p(exp(-eta)) } else { libm::log1p(exp(eta)) };
            let dev = 2.0 * (softplus - y * eta);
            (mu, y - mu, (mu * (1.0 - mu)).max(1e-300), dev)
        }
        GlmFamily::BernoulliProbit => {
            let mu = norm_cdf(eta);
            let lo = mills_lower(eta); // φ/Φ
            let hi = mills_lower(-eta); // φ/(1−Φ)
            let score = if y > 0.5 { lo } else { -hi };
            let dev = -2.0 * if y > 0.5 { norm_log_cdf(eta) } else { norm_log_cdf(-eta) };
            (mu, score, (lo * hi).max(1e-300), dev)
        }
        GlmFamily::PoissonLog => {
            let mu = exp(eta);
            let dev = 2.0 * (if y > 0.0 { y * ln(y / mu) } else { 0.0 } - (y - mu));
            (mu, y - mu, mu.max(1e-300), dev)
        }
    }
}

/// Maximum likelihood by iteratively reweighted least squares with step
/// halving.
pub fn fit_glm(rows: &[Vec<f64>], y: &[f64], names: &[String], family: GlmFamily, options: GlmOptions) -> Result<GlmFit> {
    let x = design(rows, names)?;
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    match family {
        GlmFamily::BernoulliLogit | GlmFamily::BernoulliProbit => {
            if let Some(i) = y.iter().position(|&v| v != 0.0 && v != 1.0) {
                return Err(invalid(format!("row {i}: binary response must be 0 or 1")));
            }
        }
        GlmFamily::PoissonLog => {
            if let Some(i) = y.iter().position(|&v| !(v >= 0.0 && v == libm::floor(v))) {
                return Err(invalid(format!("row {i}: count response must be a non-negative integer")));
            }
        }
    }
    let dep = linalg::dependent_columns(&x);
    if !dep.is_empty() {
        return Err(Error::RankDeficient { columns: dep.iter().map(|&j| names[j].clone()).collect() });
    }

    let deviance = |beta: &DVector<f64>| -> f64 {
        let eta = &x * beta;
        (0..n).map(|i| glm_terms(family, eta[i], y[i]).3).sum()
    };
    let mut beta = DVector::zeros(p);
    if family == GlmFamily::PoissonLog {
        // start from the intercept-only solution when there is a constant column
        let mean = y.iter().sum::<f64>() / n as f64;
        if let Some(j) = (0..p).find(|&j| x.column(j).iter().all(|&v| v == 1.0)) {
            beta[j] = ln(mean.max(1e-3));
        }
    }
    let mut dev = deviance(&beta);
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=options.max_iter {
        iterations = it;
        let eta = &x * &beta;
        let mut w = DVector::zeros(n);
        let mut z = DVector::zeros(n);
        for i in 0..n {
            let (_, s, wi, _) = glm_terms(family, eta[i], y[i]);
            w[i] = wi;
            z[i] = eta[i] + s / wi;
        }
        let mut xtw = x.transpose();
        for i in 0..n {
            xtw.column_mut(i).scale_mut(w[i]);
        }
        let xtwx = &xtw * &x;
        let rhs = &xtw * &z;
        let Some(next) = xtwx.clone().cholesky().map(|c| c.solve(&rhs)) else { break };
        let mut step = next - &beta;
        let mut new_dev = deviance(&(&beta + &step));
        let mut halvings = 0;
        while !(new_dev <= dev * (1.0 + 1e-12) + 1e-12) && halvings < 30 {
            step *= 0.5;
            new_dev = deviance(&(&beta + &step));
            halvings += 1;
        }
        beta += &step;
        let change = (dev - new_dev).abs() / (new_dev.abs() + 0.1);
        dev = new_dev;
        if change < options.tolerance && step.amax() < 1e-8 * (1.0 + beta.amax()) {
            converged = true;
            break;
        }
    }

    let eta = &x * &beta;
    let mut score = DVector::zeros(p);
    let mut info = DMatrix::zeros(p, p);
    let mut correct = true;
    for i in 0..n {
        let (_, s, wi, _) = glm_terms(family, eta[i], y[i]);
        let xi = x.row(i).transpose();
        score += &xi * s;
        info += &xi * xi.transpose() * wi;
        correct &= (y[i] > 0.5) == (eta[i] > 0.0);
    }
    if family != GlmFamily::PoissonLog && correct && dev < 1e-6 {
        return Err(Error::Separation);
    }
    let stderr = linalg::spd_inverse(&info)
        .map(|v| (0..p).map(|j| sqrt(v[(j, j)].max(0.0))).collect())
        .unwrap_or_else(|| vec![f64::NAN; p]);
    Ok(GlmFit {
        family,
        names: names.to_vec(),
        coef: beta.iter().copied().collect(),
        stderr,
        deviance: dev,
        iterations,
        converged,
        score_norm: score.norm(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AftDistribution {
    /// Normal errors on the log scale.
    Lognormal,
    /// Smallest-extreme-value errors on the log scale.
    Weibull,
}

impl FromStr for AftDistribution {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lognormal" | "log-normal" => Ok(Self::Lognormal),
            "weibull" => Ok(Self::Weibull),
            other => Err(invalid(format!("unknown AFT distribution {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AftFit {
    pub distribution: AftDistribution,
    pub names: Vec<String>,
    pub coef: Vec<f64>,
    /// Maximum-likelihood scale (divisor `n`, not `n − p`).
    pub sigma: f64,
    /// Standard errors of `coef` followed by that of `log σ`.
    pub stderr: Vec<f64>,
    pub log_lik: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// `(log-likelihood, gradient)` of the AFT model at `θ = (β, log σ)`.
fn aft_ll_grad(dist: AftDistribution, x: &DMatrix<f64>, logt: &[f64], event: &[bool], theta: &[f64]) -> (f64, Vec<f64>) {
    let p = x.ncols();
    let ls = theta[p];
    let sigma = exp(ls);
    let mut ll = 0.0;
    let mut g = vec![0.0; p + 1];
    for i in 0..x.nrows() {
        let mu: f64 = (0..p).map(|j| x[(i, j)] * theta[j]).sum();
        let w = (logt[i] - mu) / sigma;
        let (li, r) = match (dist, event[i]) {
            (AftDistribution::Lognormal, true) => (ln(norm_pdf(0.0)) - 0.5 * w * w - ls, -w),
            (AftDistribution::Lognormal, false) => (norm_log_cdf(-w), -mills_lower(-w)),
            (AftDistribution::Weibull, true) => (w - exp(w) - ls, 1.0 - exp(w)),
            (AftDistribution::Weibull, false) => (-exp(w), -exp(w)),
        };
        ll += li - if event[i] { logt[i] } else { 0.0 };
        for j in 0..p {
            g[j] -= r * x[(i, j)] / sigma;
        }
        g[p] -= r * w + if event[i] { 1.0 } else { 0.0 };
    }
    (ll, g)
}

/// Censored log-location-scale regression `log t = x'β + σ ε`.
///
/// `event[i]` is `false` for right-censored rows. The likelihood includes the
/// `−log t` Jacobian of observed failures.
pub fn fit_aft(rows: &[Vec<f64>], time: &[f64], event: &[bool], names: &[String], dist: AftDistribution) -> Result<AftFit> {
    let x = design(rows, names)?;
    let (n, p) = x.shape();
    if time.len() != n || event.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: time.len().min(event.len()) });
    }
    if let Some(i) = time.iter().position(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::NonPositiveTime(time[i]));
    }
    if !event.iter().any(|&e| e) {
        return Err(Error::InsufficientData("all observations are censored".into()));
    }
    let dep = linalg::dependent_columns(&x);
    if !dep.is_empty() {
        return Err(Error::RankDeficient { columns: dep.iter().map(|&j| names[j].clone()).collect() });
    }
    let logt: Vec<f64> = time.iter().map(|&t| ln(t)).collect();

    // start: least squares on log t (all rows), residual scale
    let ls0 = least_squares(&x, &logt, names)?;
    let s0 = sqrt(ls0.rss / n as f64).max(1e-3);
    let mut theta = ls0.coef.clone();
    theta.push(ln(s0));

    let f = |th: &[f64]| -aft_ll_grad(dist, &x, &logt, event, th).0;
    let g = |th: &[f64]| aft_ll_grad(dist, &x, &logt, event, th).1.iter().map(|v| -v).collect::<Vec<_>>();
    let res = optim::bfgs_with_grad(&f, &g, &theta, OptimOptions { tolerance: 1e-12, max_iter: 2000 });
    theta = res.x;

    // Newton polish on a finite-difference Hessian of the analytic gradient.
    let hess = |th: &[f64]| -> DMatrix<f64> {
        let d = th.len();
        let mut h = DMatrix::zeros(d, d);
        for j in 0..d {
            let e = 1e-5 * (1.0 + th[j].abs());
            let mut a = th.to_vec();
            let mut b = th.to_vec();
            a[j] += e;
            b[j] -= e;
            let (ga, gb) = (g(&a), g(&b));
            for i in 0..d {
                h[(i, j)] = (ga[i] - gb[i]) / (2.0 * e);
            }
        }
        (&h + h.transpose()) * 0.5
    };
    let mut converged = res.converged;
    for _ in 0..20 {
        let grad = g(&theta);
        let gn = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gn < 1e-10 * (1.0 + n as f64) {
            converged = true;
            break;
        }
        let Some(step) = linalg::solve(&hess(&theta), &grad) else { break };
        let cand: Vec<f64> = theta.iter().zip(&step).map(|(t, s)| t - s).collect();
        if f(&cand) <= f(&theta) + 1e-12 * (1.0 + f(&theta).abs()) {
            theta = cand;
        } else {
            break;
        }
    }
    let h = hess(&theta);
    let stderr = linalg::spd_inverse(&h)
        .map(|v| (0..=p).map(|j| sqrt(v[(j, j)].max(0.0))).collect())
        .unwrap_or_else(|| vec![f64::NAN; p + 1]);
    let log_lik = -f(&theta);
    Ok(AftFit {
        distribution: dist,
        names: names.to_vec(),
        coef: theta[..p].to_vec(),
        sigma: exp(theta[p]),
        stderr,
        log_lik,
        converged,
        iterations: res.iterations,
    })
}

/// Mean and log sample SD of per-class AUC values.
pub fn aggregate_auc(eta: &[f64]) -> Result<(f64, f64)> {
    if eta.len() < 2 {
        return Err(Error::InsufficientData("need at least two class AUCs".into()));
    }
    if let Some(v) = eta.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(invalid(format!("AUC {v} outside [0, 1]")));
    }
    let m = eta.len() as f64;
    let mean = eta.iter().sum::<f64>() / m;
    let var = eta.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    if var == 0.0 {
        return Err(Error::ZeroDispersion);
    }
    Ok((mean, 0.5 * ln(var)))
}

/// One run of a three-component mixture experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureObservation {
    pub x: [f64; 3],
    pub z: [f64; 2],
    /// Scenario index 0, 1, 2 (balanced, consistent, reverse).
    pub scenario: usize,
    pub y1: f64,
    pub y2: f64,
}

impl MixtureObservation {
    /// Scenario from one-hot flags.
    pub fn scenario_from_flags(c: [f64; 3]) -> Result<usize> {
        let hot: Vec<usize> = (0..3).filter(|&k| c[k] == 1.0).collect();
        if hot.len() != 1 || c.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(invalid("scenario flags must be one-hot"));
        }
        Ok(hot[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixtureResponse {
    Y1,
    Y2,
}

impl FromStr for MixtureResponse {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "y1" => Ok(Self::Y1),
            "y2" => Ok(Self::Y2),
            other => Err(invalid(format!("unknown response {other:?}"))),
        }
    }
}

pub const SCENARIO_NAMES: [&str; 3] = ["balanced", "consistent", "reverse"];

/// A mixture model term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MixtureTerm {
    /// `x_j`
    X(usize),
    /// `x_j x_j'`
    XX(usize, usize),
    /// `z_k x_j`
    ZX(usize, usize),
    /// `z_k z_k'`
    ZZ(usize, usize),
}

impl MixtureTerm {
    fn eval(self, x: &[f64; 3], z: &[f64]) -> f64 {
        match self {
            Self::X(j) => x[j],
            Self::XX(a, b) => x[a] * x[b],
            Self::ZX(k, j) => z[k] * x[j],
            Self::ZZ(k, l) => z[k] * z[l],
        }
    }

    fn name(self, z_names: &[String]) -> String {
        match self {
            Self::X(j) => format!("x{}", j + 1),
            Self::XX(a, b) => format!("x{}:x{}", a + 1, b + 1),
            Self::ZX(k, j) => format!("{}:x{}", z_names[k], j + 1),
            Self::ZZ(k, l) => format!("{}:{}", z_names[k], z_names[l]),
        }
    }
}

/// Terms of the quadratic Scheffé model with `n_z` process covariates;
/// `exclusive` lists covariate pairs whose product is identically zero.
pub fn mixture_terms(n_z: usize, exclusive: &[(usize, usize)]) -> Vec<MixtureTerm> {
    let mut t: Vec<MixtureTerm> = (0..3).map(MixtureTerm::X).collect();
    t.extend([MixtureTerm::XX(0, 1), MixtureTerm::XX(0, 2), MixtureTerm::XX(1, 2)]);
    for k in 0..n_z {
        for j in 0..3 {
            t.push(MixtureTerm::ZX(k, j));
        }
    }
    for k in 0..n_z {
        for l in k + 1..n_z {
            if !exclusive.contains(&(k, l)) {
                t.push(MixtureTerm::ZZ(k, l));
            }
        }
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureFit {
    /// `None` for a pooled fit.
    pub scenario: Option<usize>,
    pub response: MixtureResponse,
    pub z_names: Vec<String>,
    pub terms: Vec<MixtureTerm>,
    pub fit: LinearFit,
}

impl MixtureFit {
    /// Prediction at mixture `x` with process covariates `z` (in
    /// [`MixtureFit::z_names`] order).
    pub fn predict(&self, x: [f64; 3], z: &[f64]) -> f64 {
        self.terms.iter().zip(&self.fit.coef).map(|(t, b)| b * t.eval(&x, z)).sum()
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.fit.names.iter().position(|n| n == name).map(|i| self.fit.coef[i])
    }

    fn covariates_of(&self, o: &MixtureObservation) -> Vec<f64> {
        if self.scenario.is_some() {
            o.z.to_vec()
        } else {
            pooled_z(o)
        }
    }

    pub fn predict_observation(&self, o: &MixtureObservation) -> f64 {
        self.predict(o.x, &self.covariates_of(o))
    }
}

fn pooled_z(o: &MixtureObservation) -> Vec<f64> {
    vec![o.z[0], o.z[1], (o.scenario == 1) as u8 as f64, (o.scenario == 2) as u8 as f64]
}

fn check_mixture(obs: &[MixtureObservation]) -> Result<()> {
    for (i, o) in obs.iter().enumerate() {
        let s: f64 = o.x.iter().sum();
        if (s - 1.0).abs() > 1e-9 || o.x.iter().any(|v| *v < -1e-12) {
            return Err(invalid(format!("row {i}: mixture proportions must lie on the simplex")));
        }
        if o.scenario > 2 {
            return Err(invalid(format!("row {i}: scenario index out of range")));
        }
    }
    Ok(())
}

fn fit_terms(
    obs: &[&MixtureObservation],
    response: MixtureResponse,
    z_names: Vec<String>,
    terms: Vec<MixtureTerm>,
    zs: impl Fn(&MixtureObservation) -> Vec<f64>,
    scenario: Option<usize>,
) -> Result<MixtureFit> {
    let names: Vec<String> = terms.iter().map(|t| t.name(&z_names)).collect();
    let rows: Vec<Vec<f64>> = obs
        .iter()
        .map(|o| {
            let z = zs(o);
            terms.iter().map(|t| t.eval(&o.x, &z)).collect()
        })
        .collect();
    let y: Vec<f64> = obs.iter().map(|o| if response == MixtureResponse::Y1 { o.y1 } else { o.y2 }).collect();
    let fit = fit_linear(&rows, &y, &names)?;
    Ok(MixtureFit { scenario, response, z_names, terms, fit })
}

/// Separate 13-term fits for each scenario present in the data.
pub fn fit_mixture(obs: &[MixtureObservation], response: MixtureResponse) -> Result<Vec<MixtureFit>> {
    check_mixture(obs)?;
    let mut out = Vec::new();
    for s in 0..3 {
        let sub: Vec<&MixtureObservation> = obs.iter().filter(|o| o.scenario == s).collect();
        if sub.is_empty() {
            continue;
        }
        let z_names = vec![String::from("z1"), String::from("z2")];
        out.push(fit_terms(&sub, response, z_names, mixture_terms(2, &[]), |o| o.z.to_vec(), Some(s))?);
    }
    if out.is_empty() {
        return Err(Error::InsufficientData("no observations".into()));
    }
    Ok(out)
}

/// One fit over all scenarios with `c2`, `c3` (balanced as reference) as
/// extra process covariates; the `c2:c3` product is identically zero and
/// omitted.
pub fn fit_mixture_pooled(obs: &[MixtureObservation], response: MixtureResponse) -> Result<MixtureFit> {
    check_mixture(obs)?;
    let all: Vec<&MixtureObservation> = obs.iter().collect();
    let z_names = ["z1", "z2", "c2", "c3"].iter().map(|s| String::from(*s)).collect();
    fit_terms(&all, response, z_names, mixture_terms(4, &[(2, 3)]), pooled_z, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub yhat: f64,
}

/// Barycentric lattice `{(i, j, r−i−j)/r}` with `(r+1)(r+2)/2` points.
pub fn simplex_lattice(r: usize) -> Result<Vec<[f64; 3]>> {
    if r < 2 {
        return Err(invalid("grid resolution must be at least 2"));
    }
    let mut pts = Vec::with_capacity((r + 1) * (r + 2) / 2);
    for i in 0..=r {
        for j in 0..=r - i {
            let k = r - i - j;
            pts.push([i as f64 / r as f64, j as f64 / r as f64, k as f64 / r as f64]);
        }
    }
    Ok(pts)
}

pub fn predict_simplex_grid(fit: &MixtureFit, z: &[f64], resolution: usize) -> Result<Vec<GridPoint>> {
    if z.len() != fit.z_names.len() {
        return Err(Error::DimensionMismatch { expected: fit.z_names.len(), got: z.len() });
    }
    Ok(simplex_lattice(resolution)?
        .into_iter()
        .map(|x| GridPoint { x1: x[0], x2: x[1], x3: x[2], yhat: fit.predict(x, z) })
        .collect())
}

/// Seven-point simplex-centroid design pulled halfway toward the centroid,
/// so every run has all three components present.
pub fn adjusted_centroid_points() -> [[f64; 3]; 7] {
    let c = 1.0 / 3.0;
    let shrink = |p: [f64; 3]| [0.5 * p[0] + 0.5 * c, 0.5 * p[1] + 0.5 * c, 0.5 * p[2] + 0.5 * c];
    [
        shrink([1.0, 0.0, 0.0]),
        shrink([0.0, 1.0, 0.0]),
        shrink([0.0, 0.0, 1.0]),
        shrink([0.5, 0.5, 0.0]),
        shrink([0.5, 0.0, 0.5]),
        shrink([0.0, 0.5, 0.5]),
        [c, c, c],
    ]
}

/// 7 mixtures × 4 `(z1, z2)` settings × 3 scenarios × `replicates` runs,
/// responses zero. With 3 replicates this is 252 runs.
pub fn mixture_layout(replicates: usize) -> Vec<MixtureObservation> {
    let mut out = Vec::new();
    for scenario in 0..3 {
        for x in adjusted_centroid_points() {
            for z1 in [0.0, 1.0] {
                for z2 in [0.0, 1.0] {
                    for _ in 0..replicates {
                        out.push(MixtureObservation { x, z: [z1, z2], scenario, y1: 0.0, y2: 0.0 });
                    }
                }
            }
        }
    }
    out
}

/// Evaluates a 13-term coefficient vector (in [`mixture_terms`]`(2, &[])`
/// order) at `x`, `z`.
pub fn mixture_mean(coef: &[f64], x: [f64; 3], z: [f64; 2]) -> Result<f64> {
    let terms = mixture_terms(2, &[]);
    if coef.len() != terms.len() {
        return Err(Error::DimensionMismatch { expected: terms.len(), got: coef.len() });
    }
    Ok(terms.iter().zip(coef).map(|(t, b)| b * t.eval(&x, &z)).sum())
}
