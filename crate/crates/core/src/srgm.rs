//! Discrete software-reliability-growth models with covariates, and
//! regression-based resilience models.
//!
//! The mean value function over testing intervals `l = 1..t` is
//!
//! ```text
//! m(t) = ω Σ_{l≤t} (1 − (1−h(l))^{g_l}) Π_{s<l} (1−h(s))^{g_s},   g_l = exp(x_l'β)
//! ```
//!
//! The sum telescopes to `ω (1 − Π_{l≤t} (1−h(l))^{g_l})`, which is what is
//! evaluated here (in log space).
//!
//! Shipped hazard forms, with `i ≥ 1` the interval index:
//!
//! | family | `h(i)` | parameters |
//! |---|---|---|
//! | GM  | `b` | `b ∈ (0,1)` |
//! | NB2 | `i b² / (1 + b(i−1))` | `b ∈ (0,1)` |
//! | DW2 | `1 − q^(i² − (i−1)²)` | `q ∈ (0,1)` |
//! | DW3 | `1 − exp(−c i^b)` | `c, b > 0` |
//! | S   | `p (1 − π^i)` | `p, π ∈ (0,1)` |
//! | TL  | `(1 − e^(−1/d)) / (1 + e^(−(i−c)/d))` | `c ∈ ℝ, d > 0` |
//!
//! Only GM is pinned down by the model; the other five are conventions and
//! can be swapped by adding a [`HazardFamily`] variant.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, least_squares};
use crate::math::{exp, expm1, floor, lgamma, ln, ln1p, powf, sqrt};
use crate::optim::{self, OptimOptions};

/// Interval failure counts with named covariates and an optional
/// performance series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalCountSeries {
    pub counts: Vec<u64>,
    pub covariate_names: Vec<String>,
    /// Row `t − 1` holds the covariates of interval `t`.
    pub covariates: Vec<Vec<f64>>,
    pub performance: Option<Vec<f64>>,
}

impl IntervalCountSeries {
    pub fn new(counts: Vec<u64>, covariate_names: Vec<String>, covariates: Vec<Vec<f64>>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::InsufficientData("a count series needs T >= 2".into()));
        }
        if covariates.len() != counts.len() {
            return Err(Error::DimensionMismatch { expected: counts.len(), got: covariates.len() });
        }
        if let Some(r) = covariates.iter().find(|r| r.len() != covariate_names.len()) {
            return Err(Error::DimensionMismatch { expected: covariate_names.len(), got: r.len() });
        }
        for (i, n) in covariate_names.iter().enumerate() {
            if covariate_names[..i].contains(n) {
                return Err(invalid(format!("duplicate covariate name {n:?}")));
            }
        }
        Ok(Self { counts, covariate_names, covariates, performance: None })
    }

    /// Counts only, no covariates.
    pub fn counts_only(counts: Vec<u64>) -> Result<Self> {
        let n = counts.len();
        Self::new(counts, Vec::new(), vec![Vec::new(); n])
    }

    pub fn with_performance(mut self, r: Vec<f64>) -> Result<Self> {
        if r.len() != self.counts.len() {
            return Err(Error::DimensionMismatch { expected: self.counts.len(), got: r.len() });
        }
        self.performance = Some(r);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .covariate_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| invalid(format!("unknown covariate {name:?}")))?;
        Ok(self.covariates.iter().map(|r| r[j]).collect())
    }

    /// Cumulative observed counts `Σ_{s≤t} FC_s`.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.counts
            .iter()
            .map(|&c| {
                acc += c as f64;
                acc
            })
            .collect()
    }
}

/// Number of leading intervals used for fitting: `min(⌊0.9 T⌋, T − 1)`,
/// or the same rule for another fraction.
pub fn fit_window(t: usize, fraction: f64) -> usize {
    (floor(fraction * t as f64) as usize).clamp(1, t.saturating_sub(1).max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HazardFamily {
    GM,
    NB2,
    DW2,
    DW3,
    S,
    TL,
}

impl HazardFamily {
    pub const ALL: [HazardFamily; 6] =
        [HazardFamily::GM, HazardFamily::NB2, HazardFamily::DW2, HazardFamily::DW3, HazardFamily::S, HazardFamily::TL];

    pub fn n_params(self) -> usize {
        match self {
            Self::GM | Self::NB2 | Self::DW2 => 1,
            Self::DW3 | Self::S | Self::TL => 2,
        }
    }

    fn from_unconstrained(self, u: &[f64]) -> Vec<f64> {
        let sig = |x: f64| 1.0 / (1.0 + exp(-x));
        match self {
            Self::GM | Self::NB2 | Self::DW2 => vec![sig(u[0])],
            Self::DW3 => vec![exp(u[0]), exp(u[1])],
            Self::S => vec![sig(u[0]), sig(u[1])],
            Self::TL => vec![u[0], exp(u[1])],
        }
    }

    fn start_grid(self, t: usize) -> Vec<Vec<f64>> {
        let t = t as f64;
        match self {
            Self::GM | Self::NB2 => [-5.0, -3.0, -1.5, 0.0, 1.5].iter().map(|&v| vec![v]).collect(),
            Self::DW2 => [-1.0, 1.0, 3.0, 5.0, 7.0].iter().map(|&v| vec![v]).collect(),
            Self::DW3 => {
                let mut g = Vec::new();
                for &c in &[-6.0, -4.0, -2.0, 0.0] {
                    for &b in &[-1.5, -0.5, 0.0, 0.5] {
                        g.push(vec![c, b]);
                    }
                }
                g
            }
            Self::S => {
                let mut g = Vec::new();
                for &p in &[-4.0, -2.0, 0.0] {
                    for &q in &[-1.0, 1.0, 3.0] {
                        g.push(vec![p, q]);
                    }
                }
                g
            }
            Self::TL => {
                let mut g = Vec::new();
                for &c in &[0.0, 0.25 * t, 0.5 * t, t] {
                    for &d in &[0.0, ln(t / 8.0).max(0.5), ln(t)] {
                        g.push(vec![c, d]);
                    }
                }
                g
            }
        }
    }
}

impl fmt::Display for HazardFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::GM => "GM",
            Self::NB2 => "NB2",
            Self::DW2 => "DW2",
            Self::DW3 => "DW3",
            Self::S => "S",
            Self::TL => "TL",
        };
        f.write_str(s)
    }
}

impl FromStr for HazardFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|h| h.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| invalid(format!("unknown hazard family {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteHazard {
    pub family: HazardFamily,
    pub params: Vec<f64>,
}

impl DiscreteHazard {
    pub fn new(family: HazardFamily, params: Vec<f64>) -> Result<Self> {
        let h = Self { family, params };
        h.validate()?;
        Ok(h)
    }

    pub fn geometric(b: f64) -> Result<Self> {
        Self::new(HazardFamily::GM, vec![b])
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.len() != self.family.n_params() {
            return Err(Error::DimensionMismatch { expected: self.family.n_params(), got: self.params.len() });
        }
        let unit = |x: f64| x > 0.0 && x < 1.0;
        let p = &self.params;
        let ok = match self.family {
            HazardFamily::GM | HazardFamily::NB2 | HazardFamily::DW2 => unit(p[0]),
            HazardFamily::DW3 => p[0] > 0.0 && p[1] > 0.0 && p[0].is_finite() && p[1].is_finite(),
            HazardFamily::S => unit(p[0]) && unit(p[1]),
            HazardFamily::TL => p[0].is_finite() && p[1] > 0.0 && p[1].is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("{} hazard parameters out of range: {:?}", self.family, p)))
        }
    }

    /// `log(1 − h(i))`, computed without forming `h` where that loses digits.
    pub fn log_survival(&self, i: usize) -> f64 {
        let x = i as f64;
        let p = &self.params;
        match self.family {
            HazardFamily::GM => ln1p(-p[0]),
            HazardFamily::NB2 => ln1p(-x * p[0] * p[0] / (1.0 + p[0] * (x - 1.0))),
            HazardFamily::DW2 => (2.0 * x - 1.0) * ln(p[0]),
            HazardFamily::DW3 => -p[0] * powf(x, p[1]),
            HazardFamily::S => ln1p(-p[0] * (1.0 - powf(p[1], x))),
            HazardFamily::TL => ln1p(-(-expm1(-1.0 / p[1])) / (1.0 + exp(-(x - p[0]) / p[1]))),
        }
    }

    pub fn h(&self, i: usize) -> f64 {
        -expm1(self.log_survival(i))
    }
}

/// `exp(x'β)`.
pub fn covariate_link(x: &[f64], beta: &[f64]) -> Result<f64> {
    if x.len() != beta.len() {
        return Err(Error::DimensionMismatch { expected: beta.len(), got: x.len() });
    }
    Ok(exp(x.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>()))
}

/// `Σ_{l≤t} g_l log(1 − h(l))`, validating `h(l) ∈ (0, 1)`.
fn log_survival_sum(hazard: &DiscreteHazard, beta: &[f64], covariates: &[Vec<f64>], t: usize) -> Result<f64> {
    let mut acc = 0.0;
    for l in 1..=t {
        let ls = hazard.log_survival(l);
        if !(ls < 0.0 && ls > f64::NEG_INFINITY) {
            return Err(invalid(format!("hazard h({l}) outside (0, 1)")));
        }
        acc += covariate_link(&covariates[l - 1], beta)? * ls;
    }
    Ok(acc)
}

/// Expected cumulative failures by the end of interval `t`.
pub fn mean_value(omega: f64, hazard: &DiscreteHazard, beta: &[f64], covariates: &[Vec<f64>], t: usize) -> Result<f64> {
    if t == 0 {
        return Ok(0.0);
    }
    if covariates.len() < t {
        return Err(Error::DimensionMismatch { expected: t, got: covariates.len() });
    }
    Ok(-omega * expm1(log_survival_sum(hazard, beta, covariates, t)?))
}

/// Mean-value increments `m(t) − m(t−1)` for `t = 1..T`.
pub fn mean_increments(omega: f64, hazard: &DiscreteHazard, beta: &[f64], covariates: &[Vec<f64>], t_max: usize) -> Result<Vec<f64>> {
    if covariates.len() < t_max {
        return Err(Error::DimensionMismatch { expected: t_max, got: covariates.len() });
    }
    let mut out = Vec::with_capacity(t_max);
    let mut cum = 0.0;
    for l in 1..=t_max {
        let ls = hazard.log_survival(l);
        if !(ls < 0.0 && ls > f64::NEG_INFINITY) {
            return Err(invalid(format!("hazard h({l}) outside (0, 1)")));
        }
        let g = covariate_link(&covariates[l - 1], beta)?;
        out.push(omega * exp(cum) * -expm1(g * ls));
        cum += g * ls;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    /// `None` for the starting model.
    pub added: Option<String>,
    pub aic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SRGMFit {
    pub omega: f64,
    pub hazard: DiscreteHazard,
    /// Selected covariates and their coefficients.
    pub beta: Vec<(String, f64)>,
    /// Requested covariates dropped because the fitting window cannot
    /// identify them (constant or collinear columns).
    pub non_identifiable: Vec<String>,
    pub log_lik: f64,
    pub aic: f64,
    pub n_fit: usize,
    pub holdout_mae: Option<f64>,
    pub trace: Vec<TraceStep>,
    pub converged: bool,
}

impl SRGMFit {
    fn beta_vector(&self, series: &IntervalCountSeries) -> Result<(Vec<f64>, Vec<usize>)> {
        let mut idx = Vec::new();
        let mut b = Vec::new();
        for (name, v) in &self.beta {
            idx.push(
                series
                    .covariate_names
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| invalid(format!("series lacks covariate {name:?}")))?,
            );
            b.push(*v);
        }
        Ok((b, idx))
    }

    /// Predicted cumulative counts `m̂(1..T)` for the series' covariates.
    pub fn predicted_cumulative(&self, series: &IntervalCountSeries) -> Result<Vec<f64>> {
        let (b, idx) = self.beta_vector(series)?;
        let x = select_columns(&series.covariates, &idx);
        let inc = mean_increments(self.omega, &self.hazard, &b, &x, series.len())?;
        let mut acc = 0.0;
        Ok(inc
            .into_iter()
            .map(|d| {
                acc += d;
                acc
            })
            .collect())
    }
}

fn select_columns(rows: &[Vec<f64>], idx: &[usize]) -> Vec<Vec<f64>> {
    rows.iter().map(|r| idx.iter().map(|&j| r[j]).collect()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrgmOptions {
    pub train_fraction: f64,
    pub tolerance: f64,
    pub max_iter: usize,
    pub multistarts: usize,
}

impl Default for SrgmOptions {
    fn default() -> Self {
        Self { train_fraction: 0.9, tolerance: 1e-9, max_iter: 4000, multistarts: 3 }
    }
}

/// Poisson log-likelihood of counts with means `mu` (constant terms kept).
fn poisson_ll(counts: &[u64], mu: &[f64]) -> f64 {
    counts
        .iter()
        .zip(mu)
        .map(|(&y, &m)| {
            let y = y as f64;
            if y == 0.0 {
                -m
            } else if m <= 0.0 {
                f64::NEG_INFINITY
            } else {
                y * ln(m) - m - lgamma(y + 1.0)
            }
        })
        .sum()
}

/// Maximum-likelihood fit on the leading `train_fraction` of intervals with
/// Poisson increments; `ω` is profiled out in closed form.
pub fn fit_srgm(series: &IntervalCountSeries, family: HazardFamily, covariates: &[String], options: SrgmOptions) -> Result<SRGMFit> {
    let t_all = series.len();
    if t_all < 5 {
        return Err(Error::InsufficientData("fitting needs T >= 5 intervals".into()));
    }
    let n_fit = fit_window(t_all, options.train_fraction);
    let counts = &series.counts[..n_fit];
    let total: f64 = counts.iter().map(|&c| c as f64).sum();
    if total == 0.0 {
        return Err(Error::InsufficientData("no failures in the fitting window".into()));
    }

    let mut idx = Vec::new();
    for name in covariates {
        idx.push(
            series
                .covariate_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| invalid(format!("unknown covariate {name:?}")))?,
        );
    }
    // Constant columns act like a rescaled hazard; collinear ones duplicate
    // an earlier column. Neither is identifiable.
    let mut non_identifiable = Vec::new();
    let mut kept: Vec<usize> = Vec::new();
    for &j in &idx {
        let col: Vec<f64> = series.covariates[..n_fit].iter().map(|r| r[j]).collect();
        let mean = col.iter().sum::<f64>() / n_fit as f64;
        let spread = col.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
        if spread <= 1e-12 * (1.0 + mean.abs()) {
            non_identifiable.push(series.covariate_names[j].clone());
        } else {
            kept.push(j);
        }
    }
    if !kept.is_empty() {
        let mut rows = Vec::with_capacity(n_fit);
        for r in &series.covariates[..n_fit] {
            let mut v = vec![1.0];
            v.extend(kept.iter().map(|&j| r[j]));
            rows.push(v);
        }
        let dep = linalg::dependent_columns(&linalg::matrix_from_rows(&rows));
        let drop: Vec<usize> = dep.iter().filter(|&&c| c > 0).map(|&c| kept[c - 1]).collect();
        for j in drop {
            non_identifiable.push(series.covariate_names[j].clone());
            kept.retain(|&k| k != j);
        }
    }

    // Work with RMS-scaled covariates; β is rescaled back afterwards.
    let scale: Vec<f64> = kept
        .iter()
        .map(|&j| sqrt(series.covariates[..n_fit].iter().map(|r| r[j] * r[j]).sum::<f64>() / n_fit as f64))
        .collect();
    let x: Vec<Vec<f64>> =
        series.covariates[..n_fit].iter().map(|r| kept.iter().zip(&scale).map(|(&j, s)| r[j] / s).collect()).collect();
    let hp = family.n_params();
    let q = kept.len();

    let profile = |u: &[f64]| -> Option<(f64, DiscreteHazard, f64)> {
        let hazard = DiscreteHazard { family, params: family.from_unconstrained(&u[..hp]) };
        hazard.validate().ok()?;
        let beta = &u[hp..];
        let unit = mean_increments(1.0, &hazard, beta, &x, n_fit).ok()?;
        let mass: f64 = unit.iter().sum();
        if !(mass > 0.0 && mass.is_finite()) {
            return None;
        }
        let omega = total / mass;
        let mu: Vec<f64> = unit.iter().map(|m| omega * m).collect();
        let ll = poisson_ll(counts, &mu);
        ll.is_finite().then_some((ll, hazard, omega))
    };
    let nll = |u: &[f64]| -> f64 {
        if u.iter().any(|v| !v.is_finite() || v.abs() > 50.0) {
            return f64::INFINITY;
        }
        profile(u).map_or(f64::INFINITY, |(ll, _, _)| -ll)
    };

    let mut starts: Vec<Vec<f64>> = family
        .start_grid(n_fit)
        .into_iter()
        .map(|mut s| {
            s.extend(core::iter::repeat_n(0.0, q));
            s
        })
        .collect();
    starts.sort_by(|a, b| nll(a).total_cmp(&nll(b)));
    starts.truncate(options.multistarts.max(1));
    let opts = OptimOptions { tolerance: options.tolerance, max_iter: options.max_iter };
    let best = optim::multistart(&nll, &starts, opts).expect("non-empty starts");
    let (ll, hazard, omega) =
        profile(&best.x).ok_or_else(|| Error::InsufficientData("no finite likelihood found".into()))?;
    let beta: Vec<(String, f64)> = kept
        .iter()
        .zip(&scale)
        .zip(&best.x[hp..])
        .map(|((&j, s), b)| (series.covariate_names[j].clone(), b / s))
        .collect();
    let k = 1 + hp + q;
    let aic = 2.0 * k as f64 - 2.0 * ll;
    let mut fit = SRGMFit {
        omega,
        hazard,
        beta,
        non_identifiable,
        log_lik: ll,
        aic,
        n_fit,
        holdout_mae: None,
        trace: vec![TraceStep { added: None, aic }],
        converged: best.converged,
    };
    if n_fit < t_all {
        let pred = fit.predicted_cumulative(series)?;
        let obs = series.cumulative();
        let mae = (n_fit..t_all).map(|t| (pred[t] - obs[t]).abs()).sum::<f64>() / (t_all - n_fit) as f64;
        fit.holdout_mae = Some(mae);
    }
    Ok(fit)
}

/// Greedy forward selection by AIC on the fitting window.
///
/// Each round adds the candidate giving the lowest AIC; selection stops when
/// no candidate lowers it. Candidates that turn out non-identifiable are
/// never added.
pub fn forward_stepwise(series: &IntervalCountSeries, family: HazardFamily, candidates: &[String], options: SrgmOptions) -> Result<SRGMFit> {
    let mut selected: Vec<String> = Vec::new();
    let mut best = fit_srgm(series, family, &selected, options)?;
    let mut trace = best.trace.clone();
    let mut remaining: Vec<String> = candidates.to_vec();
    loop {
        let mut round: Option<(usize, SRGMFit)> = None;
        for (i, c) in remaining.iter().enumerate() {
            let mut trial = selected.clone();
            trial.push(c.clone());
            let Ok(fit) = fit_srgm(series, family, &trial, options) else { continue };
            if fit.beta.len() != trial.len() {
                continue;
            }
            if round.as_ref().is_none_or(|(_, f)| fit.aic < f.aic) {
                round = Some((i, fit));
            }
        }
        match round {
            Some((i, fit)) if fit.aic < best.aic => {
                let name = remaining.remove(i);
                trace.push(TraceStep { added: Some(name.clone()), aic: fit.aic });
                selected.push(name);
                best = fit;
            }
            _ => break,
        }
    }
    best.trace = trace;
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResilienceForm {
    Linear,
    /// Main effects plus all pairwise products.
    Interactions,
    /// Main effects plus powers `2..=d` of each covariate.
    Polynomial(u32),
}

impl FromStr for ResilienceForm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "linear" => Ok(Self::Linear),
            "interactions" | "linear+interactions" | "interaction" => Ok(Self::Interactions),
            _ => s
                .strip_prefix("poly:")
                .or_else(|| s.strip_prefix("polynomial:"))
                .and_then(|d| d.parse::<u32>().ok())
                .filter(|&d| d >= 1)
                .map(Self::Polynomial)
                .ok_or_else(|| invalid(format!("unknown resilience form {s:?}"))),
        }
    }
}

/// Candidate regressor names and columns for a resilience form.
pub fn resilience_features(series: &IntervalCountSeries, form: ResilienceForm, candidates: &[String]) -> Result<Vec<(String, Vec<f64>)>> {
    let base: Vec<(String, Vec<f64>)> =
        candidates.iter().map(|c| series.column(c).map(|v| (c.clone(), v))).collect::<Result<_>>()?;
    let mut out = base.clone();
    match form {
        ResilienceForm::Linear => {}
        ResilienceForm::Interactions => {
            for i in 0..base.len() {
                for j in i + 1..base.len() {
                    let v = base[i].1.iter().zip(&base[j].1).map(|(a, b)| a * b).collect();
                    out.push((format!("{}:{}", base[i].0, base[j].0), v));
                }
            }
        }
        ResilienceForm::Polynomial(d) => {
            for (name, col) in &base {
                for k in 2..=d {
                    out.push((format!("{name}^{k}"), col.iter().map(|v| powf(*v, k as f64)).collect()));
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResilienceFit {
    pub form: ResilienceForm,
    pub intercept: f64,
    pub coef: Vec<(String, f64)>,
    pub trace: Vec<TraceStep>,
    pub n_fit: usize,
    /// `r̂(1..T)` by cumulative summation from `r(1)`.
    pub fitted: Vec<f64>,
    pub holdout_mae: Option<f64>,
    /// Holdout MAE of predicting the fitting-window mean of `r`.
    pub mean_only_mae: Option<f64>,
}

/// Relative residual level below which a least-squares fit counts as exact;
/// selection stops there since AIC is unbounded below.
const EXACT_FIT: f64 = 1e-20;

fn gaussian_aic(rss: f64, n: usize, p: usize) -> f64 {
    n as f64 * ln(rss / n as f64) + 2.0 * (p + 1) as f64
}

/// Stepwise least squares of `Δr(t) = r(t) − r(t−1)` on the form's features.
pub fn fit_resilience(series: &IntervalCountSeries, form: ResilienceForm, candidates: &[String], train_fraction: f64) -> Result<ResilienceFit> {
    let r = series.performance.as_ref().ok_or_else(|| invalid("series has no performance values"))?;
    let t_all = r.len();
    let n_fit = fit_window(t_all, train_fraction);
    // Δr(t) for t = 2..n_fit
    let n = n_fit.saturating_sub(1);
    if n < 2 {
        return Err(Error::InsufficientData("fewer observations than parameters".into()));
    }
    let dr: Vec<f64> = (1..n_fit).map(|i| r[i] - r[i - 1]).collect();
    let features = resilience_features(series, form, candidates)?;
    let scale: f64 = dr.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);

    let fit_cols = |sel: &[usize]| -> Result<linalg::LeastSquares> {
        let rows: Vec<Vec<f64>> = (1..n_fit)
            .map(|i| {
                let mut row = vec![1.0];
                row.extend(sel.iter().map(|&k| features[k].1[i]));
                row
            })
            .collect();
        let mut names = vec![String::from("(intercept)")];
        names.extend(sel.iter().map(|&k| features[k].0.clone()));
        least_squares(&linalg::matrix_from_rows(&rows), &dr, &names)
    };

    let mut selected: Vec<usize> = Vec::new();
    let mut current = fit_cols(&selected)?;
    let mut aic = gaussian_aic(current.rss, n, 1);
    let mut trace = vec![TraceStep { added: None, aic }];
    while current.rss > EXACT_FIT * scale && selected.len() + 2 < n {
        let mut round: Option<(usize, linalg::LeastSquares)> = None;
        for k in 0..features.len() {
            if selected.contains(&k) {
                continue;
            }
            let mut trial = selected.clone();
            trial.push(k);
            let Ok(ls) = fit_cols(&trial) else { continue };
            if round.as_ref().is_none_or(|(_, b)| ls.rss < b.rss) {
                round = Some((k, ls));
            }
        }
        let Some((k, ls)) = round else { break };
        let cand_aic = if ls.rss <= EXACT_FIT * scale {
            f64::NEG_INFINITY
        } else {
            gaussian_aic(ls.rss, n, selected.len() + 2)
        };
        if cand_aic >= aic {
            break;
        }
        selected.push(k);
        aic = cand_aic;
        trace.push(TraceStep { added: Some(features[k].0.clone()), aic });
        current = ls;
    }

    let intercept = current.coef[0];
    let coef: Vec<(String, f64)> =
        selected.iter().zip(&current.coef[1..]).map(|(&k, &b)| (features[k].0.clone(), b)).collect();
    let mut fitted = Vec::with_capacity(t_all);
    fitted.push(r[0]);
    for i in 1..t_all {
        let d = intercept + selected.iter().zip(&current.coef[1..]).map(|(&k, b)| b * features[k].1[i]).sum::<f64>();
        fitted.push(fitted[i - 1] + d);
    }
    let (holdout_mae, mean_only_mae) = if n_fit < t_all {
        let h = (t_all - n_fit) as f64;
        let mean_r = r[..n_fit].iter().sum::<f64>() / n_fit as f64;
        (
            Some((n_fit..t_all).map(|t| (fitted[t] - r[t]).abs()).sum::<f64>() / h),
            Some((n_fit..t_all).map(|t| (mean_r - r[t]).abs()).sum::<f64>() / h),
        )
    } else {
        (None, None)
    };
    Ok(ResilienceFit { form, intercept, coef, trace, n_fit, fitted, holdout_mae, mean_only_mae })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Term-by-term expansion of the mean value sum.
    fn brute_mean(omega: f64, h: &DiscreteHazard, beta: &[f64], x: &[Vec<f64>], t: usize) -> f64 {
        let mut s = 0.0;
        for l in 1..=t {
            let g = |i: usize| exp(x[i - 1].iter().zip(beta).map(|(a, b)| a * b).sum::<f64>());
            let mut prod = 1.0;
            for s_ in 1..l {
                prod *= powf(1.0 - h.h(s_), g(s_));
            }
            s += (1.0 - powf(1.0 - h.h(l), g(l))) * prod;
        }
        omega * s
    }

    #[test]
    fn link_values() {
        assert_eq!(covariate_link(&[3.0, -1.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert_relative_eq!(covariate_link(&[1.0], &[ln(2.0)]).unwrap(), 2.0, max_relative = 1e-15);
        assert!(covariate_link(&[1.0], &[]).is_err());
    }

    #[test]
    fn geometric_closed_form() {
        let h = DiscreteHazard::geometric(0.07).unwrap();
        let x = vec![Vec::new(); 50];
        for t in 1..=50 {
            let v = mean_value(40.0, &h, &[], &x, t).unwrap();
            assert!((v - 40.0 * (1.0 - powf(0.93, t as f64))).abs() < 1e-12);
        }
    }

    #[test]
    fn telescoped_matches_brute_for_all_families() {
        let x: Vec<Vec<f64>> = (0..12).map(|i| vec![0.3 * i as f64 - 1.0]).collect();
        let hs = [
            DiscreteHazard::new(HazardFamily::GM, vec![0.2]).unwrap(),
            DiscreteHazard::new(HazardFamily::NB2, vec![0.3]).unwrap(),
            DiscreteHazard::new(HazardFamily::DW2, vec![0.9]).unwrap(),
            DiscreteHazard::new(HazardFamily::DW3, vec![0.05, 1.3]).unwrap(),
            DiscreteHazard::new(HazardFamily::S, vec![0.4, 0.6]).unwrap(),
            DiscreteHazard::new(HazardFamily::TL, vec![4.0, 2.0]).unwrap(),
        ];
        for h in &hs {
            for l in 1..=12 {
                assert!(h.h(l) > 0.0 && h.h(l) < 1.0, "{:?} at {l}", h.family);
            }
            for t in 1..=12 {
                let a = mean_value(17.0, h, &[0.4], &x, t).unwrap();
                let b = brute_mean(17.0, h, &[0.4], &x, t);
                assert!((a - b).abs() < 1e-12 * 17.0, "{:?} t={t}: {a} vs {b}", h.family);
            }
        }
    }

    #[test]
    fn constant_covariate_is_reported() {
        let counts = vec![9, 7, 6, 5, 4, 3, 3, 2, 2, 1];
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0, i as f64]).collect();
        let s = IntervalCountSeries::new(counts, vec!["c".into(), "t".into()], x).unwrap();
        let fit = fit_srgm(&s, HazardFamily::GM, &["c".into()], SrgmOptions::default()).unwrap();
        assert_eq!(fit.non_identifiable, vec![String::from("c")]);
        assert!(fit.beta.is_empty());
    }

    #[test]
    fn gm_fit_on_exact_means() {
        // counts equal to rounded expected increments
        let h = DiscreteHazard::geometric(0.15).unwrap();
        let x = vec![Vec::new(); 30];
        let inc = mean_increments(200.0, &h, &[], &x, 30).unwrap();
        let counts: Vec<u64> = inc.iter().map(|v| libm::round(*v) as u64).collect();
        let s = IntervalCountSeries::counts_only(counts).unwrap();
        let fit = fit_srgm(&s, HazardFamily::GM, &[], SrgmOptions::default()).unwrap();
        assert!((fit.omega / 200.0 - 1.0).abs() < 0.05, "omega {}", fit.omega);
        assert!((fit.hazard.params[0] / 0.15 - 1.0).abs() < 0.05);
        let pred = fit.predicted_cumulative(&s).unwrap();
        assert!(pred.windows(2).all(|w| w[1] >= w[0]));
        assert!(fit.holdout_mae.is_some());
    }

    #[test]
    fn resilience_exact_and_constant() {
        let t = 20;
        let x: Vec<f64> = (0..t).map(|i| libm::sin(i as f64)).collect();
        let mut r = vec![0.6];
        for i in 1..t {
            r.push(r[i - 1] + 0.01 + 0.05 * x[i]);
        }
        let s = IntervalCountSeries::new(vec![0; t], vec!["x".into(), "w".into()], x.iter().map(|v| vec![*v, libm::cos(*v * 3.0)]).collect())
            .unwrap()
            .with_performance(r.clone())
            .unwrap();
        let fit = fit_resilience(&s, ResilienceForm::Linear, &["x".into(), "w".into()], 0.9).unwrap();
        assert_eq!(fit.coef.len(), 1);
        assert!((fit.intercept - 0.01).abs() < 1e-8);
        assert!((fit.coef[0].1 - 0.05).abs() < 1e-8);
        for i in 0..t {
            assert!((fit.fitted[i] - r[i]).abs() < 1e-8);
        }

        let flat = s.clone().with_performance(vec![0.8; t]).unwrap();
        let f2 = fit_resilience(&flat, ResilienceForm::Interactions, &["x".into(), "w".into()], 0.9).unwrap();
        assert!(f2.coef.is_empty());
        assert!(f2.intercept.abs() < 1e-10);
    }

    #[test]
    fn form_parsing() {
        assert_eq!("poly:3".parse::<ResilienceForm>().unwrap(), ResilienceForm::Polynomial(3));
        assert_eq!("dw3".parse::<HazardFamily>().unwrap(), HazardFamily::DW3);
        assert_eq!(fit_window(30, 0.9), 27);
        assert_eq!(fit_window(5, 0.9), 4);
    }
}
