//! Seeded generators: NHPP event streams by thinning, error-propagation
//! cascades, SRGM count series and Gaussian responses.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp1, Normal, Poisson};

use crate::error::{invalid, Error, Result};
use crate::exposure::ExposureSchedule;
use crate::propagation::{EPModel, ErrorInjection, ModuleEventLog, ScenarioInfo};
use crate::regression::{mixture_mean, MixtureObservation};
use crate::recurrent::{BaselineIntensityModel, EventSeries, Family};
use crate::rng::Seed;
use crate::srgm::{mean_increments, DiscreteHazard, IntervalCountSeries};

/// Left cutoff used when the intensity is unbounded at `t = 0`
/// (power law with `β < 1`, Weibull growth with `θ3 < 1`). The mass on
/// `(0, T_MIN]` is not simulated.
pub const T_MIN: f64 = 1e-6;

fn singular_at_zero(model: &BaselineIntensityModel) -> bool {
    match model.family {
        Family::PowerLaw => model.theta[0] < 1.0,
        Family::WeibullGrowth => model.theta[2] < 1.0,
        _ => false,
    }
}

/// Piece boundaries on `(a, b]`: geometric near a singular origin, then
/// uniform, so each piece gets a tight constant envelope.
fn pieces(a: f64, b: f64, singular: bool) -> Vec<f64> {
    const UNIFORM: usize = 16;
    let mut cuts = vec![a];
    let mut x = a;
    let uniform_from = a + (b - a) / UNIFORM as f64;
    if singular {
        while x * 2.0 < uniform_from {
            x *= 2.0;
            cuts.push(x);
        }
    }
    let start = *cuts.last().expect("non-empty");
    for k in 1..=UNIFORM {
        let v = a + (b - a) * k as f64 / UNIFORM as f64;
        if v > start {
            cuts.push(v);
        }
    }
    cuts
}

fn exp1(rng: &mut ChaCha20Rng) -> f64 {
    Exp1.sample(rng)
}

/// Events of the unit intensity `λ0(t) x(t)` on `(0, τ]` by thinning
/// against a piecewise-constant envelope.
pub fn simulate_nhpp(model: &BaselineIntensityModel, exposure: &ExposureSchedule, tau: f64, seed: Seed) -> Result<EventSeries> {
    model.validate()?;
    if (exposure.tau() - tau).abs() > 1e-9 * tau {
        return Err(invalid("exposure horizon must equal tau"));
    }
    let mut rng = seed.rng();
    let singular = singular_at_zero(model);
    let mut events = Vec::new();
    for (a, b, rate) in exposure.segments() {
        if rate == 0.0 {
            continue;
        }
        let lo = if singular { a.max(T_MIN) } else { a };
        if lo >= b {
            continue;
        }
        let cuts = pieces(lo, b, singular && lo <= T_MIN);
        for w in cuts.windows(2) {
            let (p, q) = (w[0], w[1]);
            let env = rate * model.sup_on(p, q) * (1.0 + 1e-9);
            if !env.is_finite() {
                return Err(Error::UnboundedIntensity);
            }
            if env == 0.0 {
                continue;
            }
            let mut t = p;
            loop {
                t += exp1(&mut rng) / env;
                if t > q {
                    break;
                }
                let u: f64 = rng.random();
                if u * env <= rate * model.intensity_unchecked(t) {
                    events.push(t);
                }
            }
        }
    }
    EventSeries::new(exposure.unit_id.clone(), events, tau, exposure.clone())
}

/// `n` replicate seeds derived from `seed`.
pub fn replicate_seeds(seed: Seed, n: usize) -> Vec<Seed> {
    (0..n as u64).map(|i| seed.derive(i)).collect()
}

/// One scenario of the error-injection framework.
///
/// Modules are generated in topological order. A module with an injection
/// setting has its baseline multiplied by the injection probability inside
/// the injection interval and switched off outside it; a module without one
/// keeps its full baseline. Triggering from upstream (and own, for
/// self-edges) events is added, and events are drawn by Ogata-style
/// thinning with a bound refreshed at every upstream event, injection
/// boundary, and after each candidate.
pub fn simulate_ep_cascade(model: &EPModel, injection: &[Option<ErrorInjection>], window: f64, seed: Seed) -> Result<ModuleEventLog> {
    let topo = &model.topology;
    let n_mod = topo.modules.len();
    if injection.len() != n_mod {
        return Err(Error::DimensionMismatch { expected: n_mod, got: injection.len() });
    }
    if !(window > 0.0) {
        return Err(invalid("window must be positive"));
    }
    for ei in injection.iter().flatten() {
        if !(0.0 <= ei.start && ei.start <= ei.end && ei.end <= window && (0.0..=1.0).contains(&ei.prob)) {
            return Err(invalid("injection interval must lie in the window with probability in [0, 1]"));
        }
    }
    let mut rng = seed.rng();
    let mut events: Vec<Vec<f64>> = vec![Vec::new(); n_mod];
    let horizon_step = window / 50.0;

    for m in topo.order()? {
        let base = &model.baseline[m];
        let lo = if singular_at_zero(base) { T_MIN } else { 0.0 };
        let incoming: Vec<_> = model.edges.iter().filter(|e| e.target == m && e.alpha > 0.0).copied().collect();
        let ei = injection[m];
        let mult = |t: f64| ei.map_or(1.0, |e| e.multiplier(t));
        let mut stops: Vec<f64> = incoming.iter().filter(|e| e.source != m).flat_map(|e| events[e.source].iter().copied()).collect();
        if let Some(e) = ei {
            stops.push(e.start);
            stops.push(e.end);
        }
        stops.sort_by(f64::total_cmp);

        let mut own: Vec<f64> = Vec::new();
        let excitation = |t: f64, own: &[f64], inclusive: bool| -> f64 {
            let mut acc = 0.0;
            for e in &incoming {
                let src: &[f64] = if e.source == m { own } else { &events[e.source] };
                for &s in src {
                    if s < t || (inclusive && s == t) {
                        acc += e.alpha * libm::exp(-e.gamma * (t - s));
                    } else {
                        break;
                    }
                }
            }
            acc
        };

        let mut t = lo;
        while t < window {
            let next_stop = stops.iter().copied().find(|&s| s > t).unwrap_or(window);
            let end = next_stop.min(t + horizon_step).min(window);
            // multiplier is constant on (t, end) since injection bounds are stops
            let mid = 0.5 * (t + end);
            let m_sup = mult(mid).max(if end == next_stop { mult(end) } else { 0.0 });
            let bound = (m_sup * base.sup_on(t, end) + excitation(t, &own, true)) * (1.0 + 1e-9);
            if !bound.is_finite() {
                return Err(Error::UnboundedIntensity);
            }
            if bound <= 0.0 {
                t = end;
                continue;
            }
            let cand = t + exp1(&mut rng) / bound;
            if cand > end {
                t = end;
                continue;
            }
            let lam = mult(cand) * base.intensity_unchecked(cand) + excitation(cand, &own, false);
            let u: f64 = rng.random();
            if u * bound <= lam {
                own.push(cand);
            }
            t = cand;
        }
        events[m] = own;
    }
    let log = ModuleEventLog::new(topo.clone(), events, window)?;
    Ok(log.with_scenario(ScenarioInfo { scenario_id: 0, weather: alloc::string::String::new(), injection: injection.to_vec() }))
}

/// Independent Poisson counts with means `m(t) − m(t−1)`, `t = 1..T`,
/// where `T = covariates.len()`.
pub fn simulate_srgm_counts(
    omega: f64,
    hazard: &DiscreteHazard,
    beta: &[f64],
    covariate_names: &[alloc::string::String],
    covariates: &[Vec<f64>],
    seed: Seed,
) -> Result<IntervalCountSeries> {
    if !(omega >= 0.0 && omega.is_finite()) {
        return Err(invalid("omega must be non-negative"));
    }
    hazard.validate()?;
    let mu = mean_increments(omega, hazard, beta, covariates, covariates.len())?;
    let mut rng = seed.rng();
    let counts = mu.iter().map(|&m| poisson(&mut rng, m)).collect();
    IntervalCountSeries::new(counts, covariate_names.to_vec(), covariates.to_vec())
}

pub(crate) fn poisson(rng: &mut ChaCha20Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map_or(0, |d| d.sample(rng) as u64)
}

/// `means[i] + sd · N(0, 1)`.
pub fn gaussian_responses(means: &[f64], sd: f64, seed: Seed) -> Result<Vec<f64>> {
    let dist = Normal::new(0.0, sd).map_err(|_| invalid("noise sd must be finite and non-negative"))?;
    let mut rng = seed.rng();
    Ok(means.iter().map(|m| m + dist.sample(&mut rng)).collect())
}

/// Mixture responses on a layout: `y1` from `coef_y1` and `y2` from
/// `coef_y2` (13-term order), each with independent Gaussian noise of SD
/// `sd`.
pub fn simulate_mixture_responses(
    layout: &[MixtureObservation],
    coef_y1: &[f64],
    coef_y2: &[f64],
    sd: f64,
    seed: Seed,
) -> Result<Vec<MixtureObservation>> {
    let m1 = layout.iter().map(|o| mixture_mean(coef_y1, o.x, o.z)).collect::<Result<Vec<_>>>()?;
    let m2 = layout.iter().map(|o| mixture_mean(coef_y2, o.x, o.z)).collect::<Result<Vec<_>>>()?;
    let y1 = gaussian_responses(&m1, sd, seed.derive(1))?;
    let y2 = gaussian_responses(&m2, sd, seed.derive(2))?;
    Ok(layout.iter().zip(y1).zip(y2).map(|((o, a), b)| MixtureObservation { y1: a, y2: b, ..*o }).collect())
}
