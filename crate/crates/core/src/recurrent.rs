//! Recurrent-event NHPP models with exposure adjustment.
//!
//! A unit `i` with exposure `x_i(t)` has intensity `λ0(t; θ) · x_i(t)`. The
//! log-likelihood over units observed on `(0, τ]` is
//!
//! ```text
//! Σ_i [ Σ_j log(λ0(t_ij) x_i(t_ij)) − ∫_0^τ λ0(s) x_i(s) ds ]
//! ```
//!
//! and since every exposure is piecewise constant the integral reduces to
//! rate-weighted differences of the cumulative baseline.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exposure::ExposureSchedule;
use crate::linalg;
use crate::math::{exp, expm1, ln, ln1p, powf};
use crate::optim::{self, OptimOptions};

/// Parametric families for the baseline intensity function (BIF).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Constant rate `λ`.
    Hpp,
    /// `(β/η)(t/η)^(β−1)`, parameters `(β, η)`.
    PowerLaw,
    /// `θ1 θ2 θ3 t^(θ3−1) exp(−θ2 t^θ3)`, the Weibull reliability-growth form.
    WeibullGrowth,
    /// CBIF `θ1 [exp(−θ2 e^(−θ3 t)) − exp(−θ2)]`.
    Gompertz,
    /// CBIF `θ1 log(1 + θ2 t)`.
    MusaOkumoto,
}

impl Family {
    pub const ALL: [Family; 5] =
        [Family::Hpp, Family::PowerLaw, Family::WeibullGrowth, Family::Gompertz, Family::MusaOkumoto];

    pub fn n_params(self) -> usize {
        match self {
            Family::Hpp => 1,
            Family::PowerLaw | Family::MusaOkumoto => 2,
            Family::WeibullGrowth | Family::Gompertz => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Hpp => "hpp",
            Family::PowerLaw => "power-law",
            Family::WeibullGrowth => "weibull-growth",
            Family::Gompertz => "gompertz",
            Family::MusaOkumoto => "musa-okumoto",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        match key.as_str() {
            "hpp" => Ok(Family::Hpp),
            "powerlaw" | "plp" => Ok(Family::PowerLaw),
            "weibull" | "weibullgrowth" => Ok(Family::WeibullGrowth),
            "gompertz" => Ok(Family::Gompertz),
            "musaokumoto" | "mo" => Ok(Family::MusaOkumoto),
            _ => Err(invalid(format!("unknown baseline family {s:?}"))),
        }
    }
}

/// A baseline family together with its (positive) parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineIntensityModel {
    pub family: Family,
    pub theta: Vec<f64>,
}

impl BaselineIntensityModel {
    pub fn new(family: Family, theta: Vec<f64>) -> Result<Self> {
        let m = Self { family, theta };
        m.validate()?;
        Ok(m)
    }

    pub fn hpp(rate: f64) -> Result<Self> {
        Self::new(Family::Hpp, vec![rate])
    }

    pub fn power_law(beta: f64, eta: f64) -> Result<Self> {
        Self::new(Family::PowerLaw, vec![beta, eta])
    }

    pub fn weibull_growth(t1: f64, t2: f64, t3: f64) -> Result<Self> {
        Self::new(Family::WeibullGrowth, vec![t1, t2, t3])
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta.len() != self.family.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.family.n_params(),
                got: self.theta.len(),
            });
        }
        if self.theta.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(invalid(format!("{} parameters must be positive and finite", self.family)));
        }
        Ok(())
    }

    /// `λ0(t)` without argument checks; `t = 0` yields the right limit
    /// (possibly infinite).
    pub fn intensity_unchecked(&self, t: f64) -> f64 {
        let th = &self.theta;
        match self.family {
            Family::Hpp => th[0],
            Family::PowerLaw => (th[0] / th[1]) * powf(t / th[1], th[0] - 1.0),
            Family::WeibullGrowth => {
                let tp = powf(t, th[2]);
                th[0] * th[1] * th[2] * powf(t, th[2] - 1.0) * exp(-th[1] * tp)
            }
            Family::Gompertz => {
                let u = exp(-th[2] * t);
                th[0] * th[1] * th[2] * u * exp(-th[1] * u)
            }
            Family::MusaOkumoto => th[0] * th[1] / (1.0 + th[1] * t),
        }
    }

    /// `Λ0(t)` without argument checks.
    pub fn cumulative_unchecked(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let th = &self.theta;
        match self.family {
            Family::Hpp => th[0] * t,
            Family::PowerLaw => powf(t / th[1], th[0]),
            Family::WeibullGrowth => -th[0] * expm1(-th[1] * powf(t, th[2])),
            Family::Gompertz => th[0] * (exp(-th[1] * exp(-th[2] * t)) - exp(-th[1])),
            Family::MusaOkumoto => th[0] * ln1p(th[1] * t),
        }
    }

    /// `Λ0(b) − Λ0(a)` for `0 ≤ a ≤ b`, arranged to avoid cancellation.
    pub fn cumulative_between(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let th = &self.theta;
        match self.family {
            Family::Hpp => th[0] * (b - a),
            Family::PowerLaw => powf(b / th[1], th[0]) - powf(a.max(0.0) / th[1], th[0]),
            Family::WeibullGrowth => {
                let pa = if a > 0.0 { powf(a, th[2]) } else { 0.0 };
                let pb = powf(b, th[2]);
                th[0] * exp(-th[1] * pa) * -expm1(-th[1] * (pb - pa))
            }
            Family::Gompertz => {
                let ua = exp(-th[2] * a);
                let ub = exp(-th[2] * b);
                th[0] * exp(-th[1] * ua) * expm1(th[1] * (ua - ub))
            }
            Family::MusaOkumoto => th[0] * ln1p(th[1] * (b - a) / (1.0 + th[1] * a)),
        }
    }

    /// Supremum of `λ0` on `[a, b]`, from the monotonicity/mode of each form.
    pub fn sup_on(&self, a: f64, b: f64) -> f64 {
        let th = &self.theta;
        let mode = match self.family {
            Family::Hpp => return th[0],
            Family::PowerLaw => {
                if th[0] >= 1.0 {
                    b
                } else {
                    a
                }
            }
            Family::WeibullGrowth => {
                if th[2] <= 1.0 {
                    a
                } else {
                    powf((th[2] - 1.0) / (th[1] * th[2]), 1.0 / th[2])
                }
            }
            Family::Gompertz => {
                if th[1] <= 1.0 {
                    a
                } else {
                    ln(th[1]) / th[2]
                }
            }
            Family::MusaOkumoto => a,
        };
        let t = mode.clamp(a, b);
        let v = self.intensity_unchecked(t);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

/// Baseline intensity `λ0(t)` at `t > 0`.
pub fn baseline_intensity(model: &BaselineIntensityModel, t: f64) -> Result<f64> {
    model.validate()?;
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    Ok(model.intensity_unchecked(t))
}

/// Cumulative baseline intensity `Λ0(t) = ∫_0^t λ0(s) ds` at `t ≥ 0`.
pub fn cumulative_baseline(model: &BaselineIntensityModel, t: f64) -> Result<f64> {
    model.validate()?;
    if !(t >= 0.0) {
        return Err(invalid(format!("cumulative baseline needs t >= 0, got {t}")));
    }
    if t.is_infinite() {
        return Ok(match model.family {
            Family::WeibullGrowth => model.theta[0],
            Family::Gompertz => model.theta[0] * -expm1(-model.theta[1]),
            _ => f64::INFINITY,
        });
    }
    Ok(model.cumulative_unchecked(t))
}

/// Event times of one unit on `(0, τ]` with its exposure schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSeries {
    pub unit_id: String,
    /// Non-decreasing; ties (same-day events) are kept.
    pub event_times: Vec<f64>,
    pub tau: f64,
    pub exposure: ExposureSchedule,
}

impl EventSeries {
    pub fn new(unit_id: impl Into<String>, mut event_times: Vec<f64>, tau: f64, exposure: ExposureSchedule) -> Result<Self> {
        let unit_id = unit_id.into();
        if !(tau > 0.0) {
            return Err(invalid("tau must be positive"));
        }
        if (exposure.tau() - tau).abs() > 1e-9 * tau {
            return Err(invalid(format!("unit {unit_id}: exposure horizon {} differs from tau {tau}", exposure.tau())));
        }
        event_times.sort_by(f64::total_cmp);
        if let Some(&t) = event_times.iter().find(|&&t| !(t > 0.0 && t <= tau)) {
            return Err(Error::DataInconsistency { unit: unit_id, time: t, reason: "event outside (0, tau]".into() });
        }
        Ok(Self { unit_id, event_times, tau, exposure })
    }

    /// Unit with constant exposure 1.
    pub fn unit_exposure(unit_id: impl Into<String>, event_times: Vec<f64>, tau: f64) -> Result<Self> {
        let id: String = unit_id.into();
        let exposure = ExposureSchedule::constant(id.clone(), 1.0, tau)?;
        Self::new(id, event_times, tau, exposure)
    }
}

/// Fitted recurrent-event model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrentFit {
    pub model: BaselineIntensityModel,
    pub log_lik: f64,
    pub aic: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Standard errors of `theta` (delta method from the log scale).
    pub stderr: Option<Vec<f64>>,
    /// Proportional-intensity coefficients; empty for plain fits.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub covariate_coef: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariate_stderr: Option<Vec<f64>>,
    /// Covariate columns dropped because they are identically zero.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub non_identifiable: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: f64,
    pub bif: f64,
    pub cbif: f64,
}

impl RecurrentFit {
    fn finish(model: BaselineIntensityModel, log_lik: f64, n_params: usize, converged: bool, iterations: usize) -> Self {
        Self {
            model,
            log_lik,
            aic: 2.0 * n_params as f64 - 2.0 * log_lik,
            converged,
            iterations,
            stderr: None,
            covariate_coef: Vec::new(),
            covariate_stderr: None,
            non_identifiable: Vec::new(),
        }
    }

    /// BIF and CBIF on a grid (`t > 0` points only are meaningful for the BIF).
    pub fn curve(&self, grid: &[f64]) -> Vec<CurvePoint> {
        grid.iter()
            .map(|&t| CurvePoint {
                t,
                bif: self.model.intensity_unchecked(t),
                cbif: self.model.cumulative_unchecked(t),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub multistarts: usize,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { multistarts: 5, tolerance: 1e-8, max_iter: 5000 }
    }
}

impl FitOptions {
    fn optim(&self) -> OptimOptions {
        OptimOptions { tolerance: self.tolerance, max_iter: self.max_iter }
    }
}

/// Per-unit data reduced to what the likelihood needs.
struct Prepared<'a> {
    units: Vec<PreparedUnit<'a>>,
    /// Σ over all events of log x_i(t_ij); constant in θ.
    log_exposure_sum: f64,
    n_events: usize,
}

struct PreparedUnit<'a> {
    times: &'a [f64],
    exposure: &'a ExposureSchedule,
}

fn prepare(units: &[EventSeries]) -> Result<Prepared<'_>> {
    let first = units.first().ok_or_else(|| Error::InsufficientData("no units".into()))?;
    let tau = first.tau;
    let mut log_exposure_sum = 0.0;
    let mut n_events = 0;
    let mut out = Vec::with_capacity(units.len());
    for u in units {
        if (u.tau - tau).abs() > 1e-9 * tau {
            return Err(invalid(format!("unit {} has tau {} but expected shared tau {tau}", u.unit_id, u.tau)));
        }
        for &t in &u.event_times {
            let x = u.exposure.rate_at(t).unwrap_or(0.0);
            if !(x > 0.0) {
                return Err(Error::DataInconsistency {
                    unit: u.unit_id.clone(),
                    time: t,
                    reason: "event recorded with zero exposure".into(),
                });
            }
            log_exposure_sum += ln(x);
        }
        n_events += u.event_times.len();
        out.push(PreparedUnit { times: &u.event_times, exposure: &u.exposure });
    }
    Ok(Prepared { units: out, log_exposure_sum, n_events })
}

impl Prepared<'_> {
    fn unit_terms(&self, model: &BaselineIntensityModel, u: &PreparedUnit<'_>) -> (f64, f64) {
        let log_sum: f64 = u.times.iter().map(|&t| ln(model.intensity_unchecked(t))).sum();
        let integral = u.exposure.integrate_with(|a, b| model.cumulative_between(a, b));
        (log_sum, integral)
    }

    fn log_lik(&self, model: &BaselineIntensityModel) -> f64 {
        let mut ll = self.log_exposure_sum;
        for u in &self.units {
            let (s, i) = self.unit_terms(model, u);
            ll += s - i;
        }
        if ll.is_nan() {
            f64::NEG_INFINITY
        } else {
            ll
        }
    }

    fn total_exposure(&self) -> f64 {
        self.units.iter().map(|u| u.exposure.total()).sum()
    }
}

/// Exposure-adjusted log-likelihood of `model` over `units`.
pub fn log_likelihood(units: &[EventSeries], model: &BaselineIntensityModel) -> Result<f64> {
    model.validate()?;
    let prep = prepare(units)?;
    for u in units {
        if let Some(&t) = u.event_times.iter().find(|&&t| !(model.intensity_unchecked(t) > 0.0)) {
            return Err(Error::DataInconsistency {
                unit: u.unit_id.clone(),
                time: t,
                reason: "baseline intensity is zero".into(),
            });
        }
    }
    Ok(prep.log_lik(model))
}

fn model_from_log(family: Family, phi: &[f64]) -> BaselineIntensityModel {
    BaselineIntensityModel { family, theta: phi.iter().map(|&p| exp(p)).collect() }
}

fn theta_valid(theta: &[f64]) -> bool {
    theta.iter().all(|v| v.is_finite() && *v > 0.0)
}

/// Shape grids with the scale parameter matched to the observed event count.
fn seed_candidates(family: Family, prep: &Prepared<'_>, tau: f64) -> Vec<Vec<f64>> {
    let n = prep.n_events as f64;
    let mut out = Vec::new();
    let scale_to_count = |shape: Vec<f64>| -> Option<Vec<f64>> {
        // families whose first parameter multiplies the whole CBIF
        let mut theta = shape;
        theta[0] = 1.0;
        let m = BaselineIntensityModel { family, theta: theta.clone() };
        let mass: f64 = prep.units.iter().map(|u| u.exposure.integrate_with(|a, b| m.cumulative_between(a, b))).sum();
        if mass > 0.0 && mass.is_finite() {
            theta[0] = n / mass;
            Some(theta)
        } else {
            None
        }
    };
    match family {
        Family::Hpp => out.push(vec![n / prep.total_exposure()]),
        Family::PowerLaw => {
            for &beta in &[0.3, 0.5, 0.8, 1.0, 1.3, 1.7, 2.5, 4.0] {
                let m = BaselineIntensityModel { family, theta: vec![beta, 1.0] };
                let s: f64 = prep.units.iter().map(|u| u.exposure.integrate_with(|a, b| m.cumulative_between(a, b))).sum();
                if s > 0.0 && s.is_finite() {
                    out.push(vec![beta, powf(s / n, 1.0 / beta)]);
                }
            }
        }
        Family::WeibullGrowth => {
            for &shape in &[0.3, 0.6, 1.0, 1.5, 2.5] {
                for &c in &[0.1, 0.5, 1.5, 4.0] {
                    if let Some(th) = scale_to_count(vec![1.0, c / powf(tau, shape), shape]) {
                        out.push(th);
                    }
                }
            }
        }
        Family::Gompertz => {
            for &r in &[0.5, 2.0, 6.0] {
                for &b in &[0.2, 1.0, 3.0, 10.0] {
                    if let Some(th) = scale_to_count(vec![1.0, b, r / tau]) {
                        out.push(th);
                    }
                }
            }
        }
        Family::MusaOkumoto => {
            for &c in &[0.1, 1.0, 10.0, 100.0] {
                if let Some(th) = scale_to_count(vec![1.0, c / tau]) {
                    out.push(th);
                }
            }
        }
    }
    out
}

fn pick_starts(family: Family, prep: &Prepared<'_>, candidates: Vec<Vec<f64>>, k: usize) -> Vec<Vec<f64>> {
    let mut scored: Vec<(f64, Vec<f64>)> = candidates
        .into_iter()
        .filter(|th| theta_valid(th))
        .map(|th| {
            let ll = prep.log_lik(&BaselineIntensityModel { family, theta: th.clone() });
            (ll, th)
        })
        .filter(|(ll, _)| ll.is_finite())
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored.into_iter().take(k.max(1)).map(|(_, th)| th.iter().map(|v| ln(*v)).collect()).collect()
}

/// Maximum-likelihood fit of a baseline family to exposure-adjusted units.
///
/// HPP has the closed form `rate = n / E`. Other families are fitted on the
/// log-parameter scale from several moment-matched starts.
pub fn fit_mle(units: &[EventSeries], family: Family, options: FitOptions) -> Result<RecurrentFit> {
    let prep = prepare(units)?;
    if prep.n_events == 0 {
        return Err(Error::InsufficientData("no events across units".into()));
    }
    let total_exposure = prep.total_exposure();
    if !(total_exposure > 0.0) {
        return Err(Error::InsufficientData("zero total exposure".into()));
    }
    if family == Family::Hpp {
        let n = prep.n_events as f64;
        let rate = n / total_exposure;
        let model = BaselineIntensityModel::hpp(rate)?;
        let ll = n * ln(rate) + prep.log_exposure_sum - n;
        let mut fit = RecurrentFit::finish(model, ll, 1, true, 0);
        fit.stderr = Some(vec![crate::math::sqrt(n) / total_exposure]);
        return Ok(fit);
    }
    let tau = units[0].tau;
    let starts = pick_starts(family, &prep, seed_candidates(family, &prep, tau), options.multistarts);
    if starts.is_empty() {
        return Err(Error::InsufficientData("no feasible starting values".into()));
    }
    let nll = |phi: &[f64]| -> f64 {
        if phi.iter().any(|p| p.abs() > 700.0) {
            return f64::INFINITY;
        }
        -prep.log_lik(&model_from_log(family, phi))
    };
    let best = optim::multistart(&nll, &starts, options.optim()).expect("non-empty starts");
    let model = model_from_log(family, &best.x);
    let ll = -best.value;
    let mut fit = RecurrentFit::finish(model, ll, family.n_params(), best.converged, best.iterations);
    let h = optim::hessian(&nll, &best.x);
    fit.stderr = optim::stderr_from_hessian(&h)
        .map(|se_log| se_log.iter().zip(&fit.model.theta).map(|(s, t)| s * t).collect());
    Ok(fit)
}

/// Fit a manufacturer-level process observed only as pooled event times.
///
/// Independent per-vehicle NHPPs sharing `λ0` superpose to one NHPP with
/// intensity `λ0(t) X(t)`, `X` the summed fleet exposure.
pub fn fit_manufacturer_level(
    events: &[f64],
    fleet_exposure: &[ExposureSchedule],
    family: Family,
    options: FitOptions,
) -> Result<RecurrentFit> {
    let first = fleet_exposure.first().ok_or_else(|| Error::InsufficientData("empty fleet".into()))?;
    let fleet = if fleet_exposure.len() == 1 {
        first.clone()
    } else {
        ExposureSchedule::superpose("fleet", fleet_exposure)?
    };
    let tau = fleet.tau();
    let series = EventSeries::new(fleet.unit_id.clone(), events.to_vec(), tau, fleet)?;
    fit_mle(core::slice::from_ref(&series), family, options)
}

/// Proportional-intensity fit `λ_i(t) = λ0(t) x_i(t) exp(z_i' β)`.
///
/// Identically-zero covariate columns carry no information; they are dropped,
/// reported in `non_identifiable`, and get `β = 0`. Remaining columns that
/// are collinear with each other or with the baseline scale are an error.
pub fn fit_proportional(
    units: &[EventSeries],
    covariates: &[Vec<f64>],
    family: Family,
    options: FitOptions,
) -> Result<RecurrentFit> {
    if covariates.len() != units.len() {
        return Err(Error::DimensionMismatch { expected: units.len(), got: covariates.len() });
    }
    let p = covariates.first().map_or(0, Vec::len);
    if let Some(row) = covariates.iter().find(|r| r.len() != p) {
        return Err(Error::DimensionMismatch { expected: p, got: row.len() });
    }
    let zero_cols: Vec<usize> = (0..p).filter(|&j| covariates.iter().all(|r| r[j] == 0.0)).collect();
    let active: Vec<usize> = (0..p).filter(|j| !zero_cols.contains(j)).collect();

    let base = fit_mle(units, family, options)?;
    if active.is_empty() {
        let mut fit = base;
        fit.covariate_coef = vec![0.0; p];
        fit.non_identifiable = zero_cols;
        return Ok(fit);
    }

    // Identifiability: [1, Z_active] must have full column rank, because a
    // column constant across units is absorbed by the baseline scale.
    let design = nalgebra::DMatrix::from_fn(units.len(), active.len() + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            covariates[i][active[j - 1]]
        }
    });
    let dependent = linalg::dependent_columns(&design);
    if !dependent.is_empty() {
        let columns = dependent
            .iter()
            .map(|&j| if j == 0 { String::from("baseline scale") } else { format!("x{}", active[j - 1]) })
            .collect();
        return Err(Error::RankDeficient { columns });
    }

    let prep = prepare(units)?;
    let k = family.n_params();
    let q = active.len();
    let z: Vec<Vec<f64>> = covariates.iter().map(|r| active.iter().map(|&j| r[j]).collect()).collect();
    let nll = |params: &[f64]| -> f64 {
        let (phi, beta) = params.split_at(k);
        if phi.iter().any(|p| p.abs() > 700.0) {
            return f64::INFINITY;
        }
        let model = model_from_log(family, phi);
        let mut ll = prep.log_exposure_sum;
        for (u, zi) in prep.units.iter().zip(&z) {
            let eta: f64 = zi.iter().zip(beta).map(|(a, b)| a * b).sum();
            let (s, integral) = prep.unit_terms(&model, u);
            ll += s + u.times.len() as f64 * eta - exp(eta) * integral;
        }
        if ll.is_nan() {
            f64::INFINITY
        } else {
            -ll
        }
    };
    let mut start: Vec<f64> = base.model.theta.iter().map(|v| ln(*v)).collect();
    start.extend(core::iter::repeat_n(0.0, q));
    let best = optim::minimize(&nll, &start, options.optim());
    let (phi, beta) = best.x.split_at(k);
    let model = model_from_log(family, phi);
    let mut fit = RecurrentFit::finish(model, -best.value, k + q, best.converged, best.iterations + base.iterations);
    let mut coef = vec![0.0; p];
    for (slot, &j) in active.iter().enumerate() {
        coef[j] = beta[slot];
    }
    fit.covariate_coef = coef;
    fit.non_identifiable = zero_cols;
    let h = optim::hessian(&nll, &best.x);
    if let Some(se) = optim::stderr_from_hessian(&h) {
        fit.stderr = Some(se[..k].iter().zip(&fit.model.theta).map(|(s, t)| s * t).collect());
        let mut bse = vec![f64::NAN; p];
        for (slot, &j) in active.iter().enumerate() {
            bse[j] = se[k + slot];
        }
        fit.covariate_stderr = Some(bse);
    }
    Ok(fit)
}

/// Expected event count of a unit over its window under `model`.
pub fn expected_count(model: &BaselineIntensityModel, exposure: &ExposureSchedule) -> f64 {
    exposure.integrate_with(|a, b| model.cumulative_between(a, b))
}

impl fmt::Display for BaselineIntensityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.family)?;
        for (i, v) in self.theta.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

/// Compare fitted families by AIC, best first.
pub fn rank_by_aic(fits: &[RecurrentFit]) -> Vec<(String, f64)> {
    let mut v: Vec<(String, f64)> = fits.iter().map(|f| (f.model.family.to_string(), f.aic)).collect();
    v.sort_by(|a, b| a.1.total_cmp(&b.1));
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weibull_growth_examples() {
        let m = BaselineIntensityModel::weibull_growth(2.0, 0.5, 1.0).unwrap();
        assert_relative_eq!(baseline_intensity(&m, 1e-12).unwrap(), 1.0, max_relative = 1e-10);
        assert_relative_eq!(cumulative_baseline(&m, f64::INFINITY).unwrap(), 2.0);
        assert_relative_eq!(cumulative_baseline(&m, 1e4).unwrap(), 2.0);
        let m = BaselineIntensityModel::weibull_growth(1.0, 1.0, 2.0).unwrap();
        assert_relative_eq!(baseline_intensity(&m, 1.0).unwrap(), 0.735_758_882_342_884_7, max_relative = 1e-14);
    }

    #[test]
    fn power_law_examples() {
        let m = BaselineIntensityModel::power_law(1.0, 2.0).unwrap();
        for t in [0.1, 1.0, 17.0] {
            assert_relative_eq!(baseline_intensity(&m, t).unwrap(), 0.5);
        }
        let m = BaselineIntensityModel::power_law(2.0, 10.0).unwrap();
        assert_relative_eq!(cumulative_baseline(&m, 10.0).unwrap(), 1.0);
    }

    #[test]
    fn zero_time_cumulative_is_zero() {
        for fam in Family::ALL {
            let theta = vec![1.5; fam.n_params()];
            let m = BaselineIntensityModel::new(fam, theta).unwrap();
            assert_eq!(cumulative_baseline(&m, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn argument_errors() {
        let m = BaselineIntensityModel::hpp(1.0).unwrap();
        assert_eq!(baseline_intensity(&m, 0.0), Err(Error::NonPositiveTime(0.0)));
        assert!(BaselineIntensityModel::power_law(-1.0, 1.0).is_err());
        assert!(BaselineIntensityModel::new(Family::WeibullGrowth, vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn between_matches_difference() {
        let models = [
            BaselineIntensityModel::new(Family::Gompertz, vec![30.0, 2.0, 0.1]).unwrap(),
            BaselineIntensityModel::new(Family::MusaOkumoto, vec![5.0, 0.3]).unwrap(),
            BaselineIntensityModel::weibull_growth(10.0, 0.2, 0.7).unwrap(),
        ];
        for m in &models {
            let d = m.cumulative_unchecked(7.0) - m.cumulative_unchecked(2.5);
            assert_relative_eq!(m.cumulative_between(2.5, 7.0), d, max_relative = 1e-12);
        }
    }

    #[test]
    fn hpp_log_likelihood_textbook() {
        let (lambda, x, tau) = (0.3, 2.0, 50.0);
        let exposure = ExposureSchedule::constant("u", x, tau).unwrap();
        let s = EventSeries::new("u", vec![1.0, 4.0, 4.0, 30.0], tau, exposure).unwrap();
        let ll = log_likelihood(&[s], &BaselineIntensityModel::hpp(lambda).unwrap()).unwrap();
        assert_relative_eq!(ll, 4.0 * ln(lambda * x) - lambda * x * tau, max_relative = 1e-14);
    }

    #[test]
    fn zero_events_likelihood() {
        let m = BaselineIntensityModel::weibull_growth(3.0, 0.1, 1.3).unwrap();
        let units: Vec<EventSeries> = (0..3)
            .map(|i| {
                let e = ExposureSchedule::new("u", vec![0.0, 5.0, 10.0], vec![i as f64, 1.0]).unwrap();
                EventSeries::new("u", vec![], 10.0, e).unwrap()
            })
            .collect();
        let expected: f64 = -units.iter().map(|u| expected_count(&m, &u.exposure)).sum::<f64>();
        assert_relative_eq!(log_likelihood(&units, &m).unwrap(), expected, max_relative = 1e-14);
    }

    #[test]
    fn event_at_zero_exposure_is_reported() {
        let e = ExposureSchedule::new("v1", vec![0.0, 5.0, 10.0], vec![0.0, 1.0]).unwrap();
        let s = EventSeries::new("v1", vec![3.0], 10.0, e).unwrap();
        let err = log_likelihood(&[s], &BaselineIntensityModel::hpp(1.0).unwrap()).unwrap_err();
        assert!(matches!(err, Error::DataInconsistency { time, .. } if time == 3.0));
    }

    #[test]
    fn hpp_fit_is_closed_form() {
        let e1 = ExposureSchedule::new("a", vec![0.0, 10.0, 30.0], vec![0.5, 2.0]).unwrap();
        let e2 = ExposureSchedule::constant("b", 1.5, 30.0).unwrap();
        let units = vec![
            EventSeries::new("a", vec![2.0, 11.0, 12.0, 25.0], 30.0, e1.clone()).unwrap(),
            EventSeries::new("b", vec![7.0, 8.0], 30.0, e2.clone()).unwrap(),
        ];
        let fit = fit_mle(&units, Family::Hpp, FitOptions::default()).unwrap();
        let rate = 6.0 / (e1.total() + e2.total());
        assert!((fit.model.theta[0] - rate).abs() <= 1e-10 * rate);
        assert_relative_eq!(fit.aic, 2.0 - 2.0 * fit.log_lik);
        let ll = log_likelihood(&units, &fit.model).unwrap();
        assert_relative_eq!(ll, fit.log_lik, max_relative = 1e-12);
    }

    #[test]
    fn family_parsing() {
        assert_eq!("Weibull".parse::<Family>().unwrap(), Family::WeibullGrowth);
        assert_eq!("musa-okumoto".parse::<Family>().unwrap(), Family::MusaOkumoto);
        assert_eq!("power_law".parse::<Family>().unwrap(), Family::PowerLaw);
        assert!("spline".parse::<Family>().is_err());
    }
}
