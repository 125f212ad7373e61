//! Event-triggering error-propagation process for multi-module systems.
//!
//! Module `m` has intensity
//!
//! ```text
//! λ_m(t) = λ_m^0(t) + Σ_{n → m} Σ_{t_ni < t} α_mn exp(−γ_mn (t − t_ni))
//! ```
//!
//! with a power-law baseline `λ_m^0` and one exponential kernel per edge
//! `n → m` of the dependency graph. Scenarios are independent replicates, so
//! log-likelihoods add across logs, and because each module's terms only
//! involve its own baseline and incoming edges, fitting splits per module.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math::{exp, expm1, ln, powf};
use crate::optim::{self, OptimOptions};
use crate::recurrent::{BaselineIntensityModel, Family};

/// Module names and, for each module, the modules whose errors feed into it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub modules: Vec<String>,
    /// `sources[m]` lists the indices `n` with an edge `n → m`.
    pub sources: Vec<Vec<usize>>,
}

impl Topology {
    pub fn new(modules: Vec<String>, sources: Vec<Vec<usize>>) -> Result<Self> {
        let t = Self { modules, sources };
        t.validate()?;
        Ok(t)
    }

    /// 2-D and 3-D detection both feed localization; nothing feeds the
    /// detectors.
    pub fn perception() -> Self {
        Self {
            modules: vec!["2d".into(), "3d".into(), "localization".into()],
            sources: vec![vec![], vec![], vec![0, 1]],
        }
    }

    /// Modules with no edges at all.
    pub fn independent(modules: Vec<String>) -> Self {
        let n = modules.len();
        Self { modules, sources: vec![Vec::new(); n] }
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.modules.iter().position(|m| m == name).ok_or_else(|| Error::UnknownModule(name.into()))
    }

    /// Checks indices and that cross-module edges form a DAG. Self-edges
    /// (self-excitation) are allowed.
    pub fn validate(&self) -> Result<()> {
        let m = self.modules.len();
        if self.sources.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: self.sources.len() });
        }
        if self.sources.iter().flatten().any(|&s| s >= m) {
            return Err(invalid("edge refers to a module index out of range"));
        }
        self.order().map(|_| ())
    }

    /// A topological order of modules (ignoring self-edges).
    pub fn order(&self) -> Result<Vec<usize>> {
        let m = self.modules.len();
        let mut indeg: Vec<usize> =
            (0..m).map(|i| self.sources[i].iter().filter(|&&s| s != i).count()).collect();
        let mut ready: Vec<usize> = (0..m).filter(|&i| indeg[i] == 0).collect();
        let mut out = Vec::with_capacity(m);
        while let Some(i) = ready.pop() {
            out.push(i);
            for j in 0..m {
                if j != i && self.sources[j].contains(&i) {
                    indeg[j] -= 1;
                    if indeg[j] == 0 {
                        ready.push(j);
                    }
                }
            }
        }
        if out.len() != m {
            return Err(invalid("module dependency graph has a cycle"));
        }
        Ok(out)
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e = Vec::new();
        for (target, srcs) in self.sources.iter().enumerate() {
            for &s in srcs {
                e.push((target, s));
            }
        }
        e
    }
}

/// Error-injection setting for one module: an interval and a probability
/// that multiplies the module's baseline intensity inside it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorInjection {
    pub start: f64,
    pub end: f64,
    pub prob: f64,
}

impl ErrorInjection {
    pub fn multiplier(&self, t: f64) -> f64 {
        if t >= self.start && t < self.end {
            self.prob
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ScenarioInfo {
    pub scenario_id: i64,
    pub weather: String,
    /// Per module; `None` means no injection (full baseline).
    pub injection: Vec<Option<ErrorInjection>>,
}

/// Module error times for one scenario, on `[0, window]` seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleEventLog {
    pub topology: Topology,
    /// Ascending event times per module.
    pub events: Vec<Vec<f64>>,
    pub window: f64,
    #[serde(default)]
    pub scenario: ScenarioInfo,
}

impl ModuleEventLog {
    pub fn new(topology: Topology, mut events: Vec<Vec<f64>>, window: f64) -> Result<Self> {
        topology.validate()?;
        if events.len() != topology.modules.len() {
            return Err(Error::DimensionMismatch { expected: topology.modules.len(), got: events.len() });
        }
        if !(window > 0.0) {
            return Err(invalid("window must be positive"));
        }
        for (m, ev) in events.iter_mut().enumerate() {
            ev.sort_by(f64::total_cmp);
            if let Some(&t) = ev.iter().find(|&&t| !(0.0..=window).contains(&t)) {
                return Err(Error::DataInconsistency {
                    unit: topology.modules[m].clone(),
                    time: t,
                    reason: "event outside the observation window".into(),
                });
            }
        }
        Ok(Self { topology, events, window, scenario: ScenarioInfo::default() })
    }

    pub fn with_scenario(mut self, scenario: ScenarioInfo) -> Self {
        self.scenario = scenario;
        self
    }

    pub fn n_events(&self) -> usize {
        self.events.iter().map(Vec::len).sum()
    }

    /// Observed `N_m(t) = #{t_mi ≤ t}`.
    pub fn count_until(&self, module: usize, t: f64) -> usize {
        self.events[module].partition_point(|&s| s <= t)
    }
}

/// Exponential triggering kernel on edge `source → target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub target: usize,
    pub source: usize,
    /// Jump size, `≥ 0`.
    pub alpha: f64,
    /// Decay rate, `> 0`.
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EPModel {
    pub topology: Topology,
    /// Power-law baseline per module.
    pub baseline: Vec<BaselineIntensityModel>,
    pub edges: Vec<Edge>,
}

impl EPModel {
    /// Validates that every edge of `topology` has a kernel and every module
    /// a power-law baseline.
    pub fn new(topology: Topology, baseline: Vec<BaselineIntensityModel>, edges: Vec<Edge>) -> Result<Self> {
        topology.validate()?;
        if baseline.len() != topology.modules.len() {
            return Err(Error::DimensionMismatch { expected: topology.modules.len(), got: baseline.len() });
        }
        for b in &baseline {
            b.validate()?;
            if b.family != Family::PowerLaw {
                return Err(invalid("error-propagation baselines are power-law"));
            }
        }
        for e in &edges {
            if !topology.sources.get(e.target).is_some_and(|s| s.contains(&e.source)) {
                return Err(invalid(format!("edge {} -> {} is not in the topology", e.source, e.target)));
            }
            if !(e.alpha >= 0.0 && e.alpha.is_finite() && e.gamma > 0.0 && e.gamma.is_finite()) {
                return Err(invalid("kernel needs alpha >= 0 and gamma > 0"));
            }
        }
        if edges.len() != topology.edges().len() {
            return Err(invalid("every topology edge needs exactly one kernel"));
        }
        Ok(Self { topology, baseline, edges })
    }

    /// Same power law on every module and the same kernel on every edge.
    pub fn uniform(topology: Topology, beta: f64, eta: f64, alpha: f64, gamma: f64) -> Result<Self> {
        let baseline = (0..topology.modules.len())
            .map(|_| BaselineIntensityModel::power_law(beta, eta))
            .collect::<Result<Vec<_>>>()?;
        let edges = topology.edges().into_iter().map(|(target, source)| Edge { target, source, alpha, gamma }).collect();
        Self::new(topology, baseline, edges)
    }

    fn incoming(&self, m: usize) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.target == m)
    }

    /// Triggering part of `λ_m(t)` given the log's history.
    pub fn triggering(&self, log: &ModuleEventLog, m: usize, t: f64) -> f64 {
        self.incoming(m)
            .map(|e| {
                log.events[e.source]
                    .iter()
                    .take_while(|&&s| s < t)
                    .map(|&s| e.alpha * exp(-e.gamma * (t - s)))
                    .sum::<f64>()
            })
            .sum()
    }

    /// `∫_0^t λ_m(u) du` given the log's history.
    pub fn compensator(&self, log: &ModuleEventLog, m: usize, t: f64) -> f64 {
        let base = self.baseline[m].cumulative_unchecked(t);
        let trig: f64 = self
            .incoming(m)
            .map(|e| {
                log.events[e.source]
                    .iter()
                    .take_while(|&&s| s < t)
                    .map(|&s| -(e.alpha / e.gamma) * expm1(-e.gamma * (t - s)))
                    .sum::<f64>()
            })
            .sum();
        base + trig
    }
}

fn check_compatible(model: &EPModel, log: &ModuleEventLog) -> Result<()> {
    if model.topology.modules != log.topology.modules {
        return Err(invalid("log and model have different modules"));
    }
    Ok(())
}

/// Overall intensity of `module` at time `t`.
pub fn ep_intensity(model: &EPModel, log: &ModuleEventLog, module: &str, t: f64) -> Result<f64> {
    check_compatible(model, log)?;
    let m = model.topology.index_of(module)?;
    if !(0.0..=log.window).contains(&t) {
        return Err(invalid(format!("t = {t} outside [0, {}]", log.window)));
    }
    Ok(model.baseline[m].intensity_unchecked(t) + model.triggering(log, m, t))
}

/// Log-likelihood terms of module `m` in one log: `(Σ log λ_m(t_mi), ∫ λ_m)`.
/// Returns `None` when the intensity vanishes at an observed event.
fn module_terms(baseline: &BaselineIntensityModel, incoming: &[Edge], log: &ModuleEventLog, m: usize) -> Option<(f64, f64)> {
    let targets = &log.events[m];
    let mut trig = vec![0.0; targets.len()];
    for e in incoming {
        let src = &log.events[e.source];
        let mut acc = 0.0;
        let mut last = 0.0;
        let mut j = 0;
        for (k, &t) in targets.iter().enumerate() {
            acc *= exp(-e.gamma * (t - last));
            last = t;
            while j < src.len() && src[j] < t {
                acc += exp(-e.gamma * (t - src[j]));
                j += 1;
            }
            trig[k] += e.alpha * acc;
        }
    }
    let mut log_sum = 0.0;
    for (k, &t) in targets.iter().enumerate() {
        let lam = baseline.intensity_unchecked(t) + trig[k];
        if !(lam > 0.0 && lam.is_finite()) {
            return None;
        }
        log_sum += ln(lam);
    }
    let tau = log.window;
    let mut comp = baseline.cumulative_unchecked(tau);
    for e in incoming {
        comp += log.events[e.source]
            .iter()
            .take_while(|&&s| s < tau)
            .map(|&s| -(e.alpha / e.gamma) * expm1(-e.gamma * (tau - s)))
            .sum::<f64>();
    }
    Some((log_sum, comp))
}

/// `Σ_m [Σ_i log λ_m(t_mi) − ∫_0^τ λ_m]`, summed over scenario logs.
pub fn ep_log_likelihood(model: &EPModel, logs: &[ModuleEventLog]) -> Result<f64> {
    let mut ll = 0.0;
    for log in logs {
        check_compatible(model, log)?;
        for m in 0..model.topology.modules.len() {
            let incoming: Vec<Edge> = model.incoming(m).copied().collect();
            let (s, c) = module_terms(&model.baseline[m], &incoming, log, m).ok_or_else(|| {
                Error::DataInconsistency {
                    unit: model.topology.modules[m].clone(),
                    time: f64::NAN,
                    reason: "intensity is zero at an observed event".into(),
                }
            })?;
            ll += s - c;
        }
    }
    Ok(ll)
}

/// Closed-form power-law NHPP MLE for events pooled over replicate windows.
///
/// With common window `τ` this is `β = n / Σ log(τ/t_i)`,
/// `η = τ (K/n)^(1/β)`; unequal windows solve the profile score in `β`.
pub fn power_law_mle(events: &[&[f64]], windows: &[f64]) -> Result<BaselineIntensityModel> {
    let n: usize = events.iter().map(|e| e.len()).sum();
    if n == 0 {
        return Err(Error::InsufficientData("power-law fit needs at least one event".into()));
    }
    let nf = n as f64;
    let sum_log_t: f64 = events.iter().flat_map(|e| e.iter()).map(|&t| ln(t)).sum();
    if !sum_log_t.is_finite() {
        return Err(Error::DataInconsistency {
            unit: String::from("power-law"),
            time: 0.0,
            reason: "event at time zero".into(),
        });
    }
    let tmax = windows.iter().cloned().fold(0.0_f64, f64::max);
    let equal = windows.iter().all(|w| (w - tmax).abs() <= 1e-12 * tmax);
    let beta = if equal {
        let s: f64 = events.iter().flat_map(|e| e.iter()).map(|&t| ln(tmax / t)).sum();
        if !(s > 0.0) {
            return Err(Error::InsufficientData("all events at the window end".into()));
        }
        nf / s
    } else {
        // score(β) = n/β + Σ log t − n Σ τ^β log τ / Σ τ^β, decreasing in β
        let score = |b: f64| {
            let (mut a, mut c) = (0.0, 0.0);
            for &w in windows {
                let p = powf(w / tmax, b);
                a += p;
                c += p * ln(w);
            }
            nf / b + sum_log_t - nf * c / a
        };
        let (mut lo, mut hi) = (1e-6, 1.0);
        while score(hi) > 0.0 && hi < 1e6 {
            hi *= 2.0;
        }
        if score(hi) > 0.0 {
            return Err(Error::InsufficientData("power-law shape diverges".into()));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if score(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let sum_pow: f64 = windows.iter().map(|&w| powf(w / tmax, beta)).sum();
    let eta = tmax * powf(sum_pow / nf, 1.0 / beta);
    BaselineIntensityModel::power_law(beta, eta)
}

/// Independent power-law NHPP per module (the `α = 0` submodel).
pub fn fit_nhpp_modules(logs: &[ModuleEventLog]) -> Result<Vec<BaselineIntensityModel>> {
    let first = logs.first().ok_or_else(|| Error::InsufficientData("no logs".into()))?;
    let windows: Vec<f64> = logs.iter().map(|l| l.window).collect();
    (0..first.topology.modules.len())
        .map(|m| {
            let ev: Vec<&[f64]> = logs.iter().map(|l| l.events[m].as_slice()).collect();
            power_law_mle(&ev, &windows).map_err(|e| match e {
                Error::InsufficientData(_) => {
                    Error::InsufficientData(format!("module {:?} has no events", first.topology.modules[m]))
                }
                other => other,
            })
        })
        .collect()
}

/// HPP rate per module: events over total observed time.
pub fn fit_hpp_modules(logs: &[ModuleEventLog]) -> Result<Vec<f64>> {
    let first = logs.first().ok_or_else(|| Error::InsufficientData("no logs".into()))?;
    let total: f64 = logs.iter().map(|l| l.window).sum();
    Ok((0..first.topology.modules.len())
        .map(|m| logs.iter().map(|l| l.events[m].len()).sum::<usize>() as f64 / total)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpFitOptions {
    pub tolerance: f64,
    pub max_iter: usize,
    pub multistarts: usize,
}

impl Default for EpFitOptions {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_iter: 5000, multistarts: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpFit {
    pub model: EPModel,
    pub log_lik: f64,
    /// Maximized log-likelihood of the independent NHPP submodel.
    pub nhpp_log_lik: f64,
    pub aic: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Maximum-likelihood fit of the error-propagation model.
///
/// Each module with incoming edges is optimized over
/// `(log β, log η, log α_e, log γ_e …)`; the independent-NHPP optimum
/// (`α = 0`) is always a candidate, so the result never has a lower
/// likelihood than the NHPP fit.
pub fn fit_ep(logs: &[ModuleEventLog], options: EpFitOptions) -> Result<EpFit> {
    let first = logs.first().ok_or_else(|| Error::InsufficientData("no logs".into()))?;
    let topology = first.topology.clone();
    if logs.iter().any(|l| l.topology != topology) {
        return Err(invalid("all logs must share one topology"));
    }
    let nhpp = fit_nhpp_modules(logs)?;
    let opts = OptimOptions { tolerance: options.tolerance, max_iter: options.max_iter };
    let mut baseline = nhpp.clone();
    let mut edges = Vec::new();
    let mut converged = true;
    let mut iterations = 0;
    let mut n_params = 0;
    let mut nhpp_ll = 0.0;
    let mut total_ll = 0.0;
    let tau = logs.iter().map(|l| l.window).fold(0.0, f64::max);

    for m in 0..topology.modules.len() {
        let srcs = &topology.sources[m];
        let base_ll = module_ll(&nhpp[m], &[], logs, m);
        nhpp_ll += base_ll;
        n_params += 2;
        if srcs.is_empty() {
            total_ll += base_ll;
            continue;
        }
        n_params += 2 * srcs.len();
        let n_target: usize = logs.iter().map(|l| l.events[m].len()).sum();
        let nll = |phi: &[f64]| -> f64 {
            if phi.iter().any(|p| p.abs() > 60.0) {
                return f64::INFINITY;
            }
            let b = BaselineIntensityModel { family: Family::PowerLaw, theta: vec![exp(phi[0]), exp(phi[1])] };
            let inc: Vec<Edge> = srcs
                .iter()
                .enumerate()
                .map(|(k, &s)| Edge { target: m, source: s, alpha: exp(phi[2 + 2 * k]), gamma: exp(phi[3 + 2 * k]) })
                .collect();
            -module_ll(&b, &inc, logs, m)
        };
        let (beta0, eta0) = (nhpp[m].theta[0], nhpp[m].theta[1]);
        let mut starts = Vec::new();
        for &gscale in &[3.0, 15.0, 60.0] {
            for &share in &[0.5, 0.9] {
                let gamma = gscale / tau;
                let n_src: usize = srcs.iter().map(|&s| logs.iter().map(|l| l.events[s].len()).sum::<usize>()).sum();
                let alpha = (gamma * share * n_target as f64 / (n_src.max(1) as f64)).max(1e-3);
                let mut phi = vec![ln(beta0), ln(eta0 * powf(1.0 / (1.0 - share), 1.0 / beta0))];
                for _ in srcs {
                    phi.push(ln(alpha));
                    phi.push(ln(gamma));
                }
                starts.push(phi);
            }
        }
        starts.sort_by(|a, b| nll(a).total_cmp(&nll(b)));
        starts.truncate(options.multistarts.max(1));
        let best = optim::multistart(&nll, &starts, opts).expect("non-empty starts");
        iterations += best.iterations;
        if -best.value >= base_ll {
            converged &= best.converged;
            total_ll += -best.value;
            baseline[m] = BaselineIntensityModel { family: Family::PowerLaw, theta: vec![exp(best.x[0]), exp(best.x[1])] };
            for (k, &s) in srcs.iter().enumerate() {
                edges.push(Edge { target: m, source: s, alpha: exp(best.x[2 + 2 * k]), gamma: exp(best.x[3 + 2 * k]) });
            }
        } else {
            // the boundary α = 0 beats every interior point found
            total_ll += base_ll;
            for &s in srcs {
                let gamma = exp(best.x[3]).clamp(1e-12, 1e12);
                edges.push(Edge { target: m, source: s, alpha: 0.0, gamma });
            }
        }
    }
    let model = EPModel::new(topology, baseline, edges)?;
    Ok(EpFit {
        model,
        log_lik: total_ll,
        nhpp_log_lik: nhpp_ll,
        aic: 2.0 * n_params as f64 - 2.0 * total_ll,
        converged,
        iterations,
    })
}

fn module_ll(baseline: &BaselineIntensityModel, incoming: &[Edge], logs: &[ModuleEventLog], m: usize) -> f64 {
    let mut ll = 0.0;
    for log in logs {
        match module_terms(baseline, incoming, log, m) {
            Some((s, c)) => ll += s - c,
            None => return f64::NEG_INFINITY,
        }
    }
    if ll.is_nan() {
        f64::NEG_INFINITY
    } else {
        ll
    }
}

/// Predicted cumulative error count of a module up to `t`.
pub trait CumulativePredictor {
    fn predict(&self, log: &ModuleEventLog, module: usize, t: f64) -> f64;
}

/// Constant-rate prediction per module.
#[derive(Debug, Clone, PartialEq)]
pub struct HppPredictor(pub Vec<f64>);

impl CumulativePredictor for HppPredictor {
    fn predict(&self, _log: &ModuleEventLog, module: usize, t: f64) -> f64 {
        self.0[module] * t
    }
}

/// Independent power-law NHPP per module.
#[derive(Debug, Clone, PartialEq)]
pub struct NhppPredictor(pub Vec<BaselineIntensityModel>);

impl CumulativePredictor for NhppPredictor {
    fn predict(&self, _log: &ModuleEventLog, module: usize, t: f64) -> f64 {
        self.0[module].cumulative_unchecked(t)
    }
}

/// The EP compensator, conditional on the observed upstream history.
impl CumulativePredictor for EPModel {
    fn predict(&self, log: &ModuleEventLog, module: usize, t: f64) -> f64 {
        self.compensator(log, module, t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaeReport {
    pub mae: f64,
    /// MAE at each grid point, averaged over logs and modules.
    pub per_point: Vec<f64>,
}

/// Mean absolute error of predicted vs. observed cumulative counts over
/// grid points, modules, and held-out logs.
pub fn evaluate_mae<P: CumulativePredictor + ?Sized>(predictor: &P, logs: &[ModuleEventLog], grid: &[f64]) -> Result<MaeReport> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let first = logs.first().ok_or_else(|| Error::InsufficientData("no held-out logs".into()))?;
    if logs.iter().any(|l| l.topology.modules != first.topology.modules) {
        return Err(invalid("held-out logs must share module structure"));
    }
    let n_mod = first.topology.modules.len();
    let per_point: Vec<f64> = grid
        .iter()
        .map(|&t| {
            let mut acc = 0.0;
            for log in logs {
                for m in 0..n_mod {
                    acc += (predictor.predict(log, m, t) - log.count_until(m, t) as f64).abs();
                }
            }
            acc / (logs.len() * n_mod) as f64
        })
        .collect();
    let mae = per_point.iter().sum::<f64>() / grid.len() as f64;
    Ok(MaeReport { mae, per_point })
}
