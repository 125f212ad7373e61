//! Simulation-based checks: generate from known parameters, refit, compare.

use airrel_core::propagation::{
    evaluate_mae, fit_ep, fit_nhpp_modules, EPModel, EpFitOptions, ErrorInjection, ModuleEventLog, NhppPredictor, Topology,
};
use airrel_core::recurrent::{
    expected_count, fit_manufacturer_level, fit_mle, fit_proportional, log_likelihood, BaselineIntensityModel, EventSeries, Family,
    FitOptions,
};
use airrel_core::regression::{fit_aft, fit_glm, AftDistribution, GlmFamily, GlmOptions};
use airrel_core::simulate::{simulate_ep_cascade, simulate_nhpp, simulate_srgm_counts};
use airrel_core::srgm::{fit_resilience, fit_srgm, forward_stepwise, DiscreteHazard, HazardFamily, IntervalCountSeries, ResilienceForm, SrgmOptions};
use airrel_core::stats::{ks_exp1, rescaled_gaps};
use airrel_core::{ExposureSchedule, Seed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

#[test]
fn weibull_growth_mean_count() {
    let m = BaselineIntensityModel::weibull_growth(12.0, 0.2, 0.7).unwrap();
    let x = ExposureSchedule::constant("u", 1.0, 15.0).unwrap();
    let reps = 2000;
    let counts: Vec<f64> =
        (0..reps).map(|i| simulate_nhpp(&m, &x, 15.0, Seed(21).derive(i)).unwrap().event_times.len() as f64).collect();
    let mean = counts.iter().sum::<f64>() / reps as f64;
    let target = m.cumulative_unchecked(15.0);
    let se = (target / reps as f64).sqrt();
    assert!((mean - target).abs() < 3.0 * se, "{mean} vs {target}");
}

#[test]
fn time_rescaled_gaps_are_unit_exponential() {
    let m = BaselineIntensityModel::power_law(0.8, 2.0).unwrap();
    let x = ExposureSchedule::new("u", vec![0.0, 10.0, 30.0, 40.0], vec![1.0, 2.5, 0.5]).unwrap();
    let reps = 200;
    let mut pass = 0;
    for i in 0..reps {
        let s = simulate_nhpp(&m, &x, 40.0, Seed(8).derive(i)).unwrap();
        let comp = |t: f64| {
            x.segments().filter(|&(a, _, _)| a < t).map(|(a, b, r)| r * m.cumulative_between(a, b.min(t))).sum::<f64>()
        };
        let g = rescaled_gaps(&s.event_times, comp);
        if ks_exp1(&g).is_some_and(|r| r.p_value >= 0.01) {
            pass += 1;
        }
    }
    assert!(pass as f64 >= 0.95 * reps as f64, "{pass}/{reps}");
}

#[test]
fn mle_beats_perturbations() {
    let truth = BaselineIntensityModel::weibull_growth(30.0, 0.05, 1.2).unwrap();
    let units: Vec<EventSeries> = (0..10)
        .map(|i| {
            let x = ExposureSchedule::constant(format!("u{i}"), 1.0 + 0.1 * i as f64, 20.0).unwrap();
            simulate_nhpp(&truth, &x, 20.0, Seed(4).derive(i)).unwrap()
        })
        .collect();
    let fit = fit_mle(&units, Family::WeibullGrowth, FitOptions::default()).unwrap();
    let best = log_likelihood(&units, &fit.model).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(0);
    for _ in 0..100 {
        let theta: Vec<f64> = fit.model.theta.iter().map(|v| v * (1.0 + 0.05 * rng.random_range(-1.0..1.0))).collect();
        let m = BaselineIntensityModel::new(Family::WeibullGrowth, theta).unwrap();
        assert!(log_likelihood(&units, &m).unwrap() <= best + 1e-9);
    }
}

#[test]
fn manufacturer_level_hpp_halves_rate() {
    let ev = EventSeries::unit_exposure("fleet", vec![1.0, 4.0, 6.5, 9.0], 10.0).unwrap();
    let one = fit_mle(std::slice::from_ref(&ev), Family::Hpp, FitOptions::default()).unwrap();
    let x = ExposureSchedule::constant("v", 1.0, 10.0).unwrap();
    let two = fit_manufacturer_level(&ev.event_times, &[x.clone(), x], Family::Hpp, FitOptions::default()).unwrap();
    assert!((two.model.theta[0] - 0.5 * one.model.theta[0]).abs() < 1e-12);
}

#[test]
fn proportional_binary_covariate_recovery() {
    let base = BaselineIntensityModel::power_law(1.2, 5.0).unwrap();
    let mut est = Vec::new();
    for rep in 0..20 {
        let mut units = Vec::new();
        let mut z = Vec::new();
        for i in 0..60 {
            let zi = (i % 2) as f64;
            let x = ExposureSchedule::constant(format!("u{i}"), (0.7 * zi).exp(), 20.0).unwrap();
            let s = simulate_nhpp(&base, &x, 20.0, Seed(100).derive(rep).derive(i)).unwrap();
            units.push(EventSeries::unit_exposure(format!("u{i}"), s.event_times, 20.0).unwrap());
            z.push(vec![zi]);
        }
        let fit = fit_proportional(&units, &z, Family::PowerLaw, FitOptions::default()).unwrap();
        est.push(fit.covariate_coef[0]);
    }
    let med = median(est);
    assert!((med / 0.7 - 1.0).abs() < 0.10, "median beta {med}");
}

#[test]
fn expected_count_tracks_observed_mean() {
    let truth = BaselineIntensityModel::power_law(1.5, 10.0).unwrap();
    let units: Vec<EventSeries> = (0..200)
        .map(|i| simulate_nhpp(&truth, &ExposureSchedule::constant("u", 1.0, 20.0).unwrap(), 20.0, Seed(77).derive(i)).unwrap())
        .collect();
    let fit = fit_mle(&units, Family::PowerLaw, FitOptions::default()).unwrap();
    let observed = units.iter().map(|u| u.event_times.len() as f64).sum::<f64>() / 200.0;
    let predicted = expected_count(&fit.model, &units[0].exposure);
    assert!((predicted / observed - 1.0).abs() < 0.05);
}

fn cascade_logs(model: &EPModel, n: usize, seed: Seed) -> Vec<ModuleEventLog> {
    (0..n as u64).map(|i| simulate_ep_cascade(model, &[None, None, None], 20.0, seed.derive(i)).unwrap()).collect()
}

#[test]
fn ep_fit_without_triggering_keeps_alpha_small() {
    let truth = EPModel::uniform(Topology::perception(), 1.2, 4.0, 0.0, 1.0).unwrap();
    let mut small = 0;
    for rep in 0..20 {
        let logs = cascade_logs(&truth, 50, Seed(500).derive(rep));
        let fit = fit_ep(&logs, EpFitOptions::default()).unwrap();
        assert!(fit.log_lik >= fit.nhpp_log_lik - 1e-9);
        if fit.model.edges.iter().all(|e| e.alpha <= 0.05) {
            small += 1;
        }
    }
    assert!(small >= 18, "{small}/20");
}

#[test]
fn ep_fit_recovers_triggering() {
    let truth = EPModel::uniform(Topology::perception(), 1.2, 4.0, 2.0, 1.0).unwrap();
    let mut a = Vec::new();
    let mut g = Vec::new();
    for rep in 0..20 {
        let logs = cascade_logs(&truth, 50, Seed(900).derive(rep));
        let fit = fit_ep(&logs, EpFitOptions::default()).unwrap();
        for e in &fit.model.edges {
            a.push(e.alpha);
            g.push(e.gamma);
        }
    }
    let (ma, mg) = (median(a), median(g));
    assert!((ma / 2.0 - 1.0).abs() < 0.25, "alpha {ma}");
    assert!((mg - 1.0).abs() < 0.25, "gamma {mg}");
}

#[test]
fn single_module_ep_equals_power_law_mle() {
    let topo = Topology::independent(vec!["only".into()]);
    let truth = EPModel::uniform(topo.clone(), 1.4, 3.0, 0.0, 1.0).unwrap();
    let logs: Vec<ModuleEventLog> =
        (0..5).map(|i| simulate_ep_cascade(&truth, &[None], 20.0, Seed(3).derive(i)).unwrap()).collect();
    let fit = fit_ep(&logs, EpFitOptions::default()).unwrap();
    let series: Vec<EventSeries> =
        logs.iter().map(|l| EventSeries::unit_exposure("s", l.events[0].clone(), 20.0).unwrap()).collect();
    let r = fit_mle(&series, Family::PowerLaw, FitOptions::default()).unwrap();
    for j in 0..2 {
        assert!((fit.model.baseline[0].theta[j] / r.model.theta[j] - 1.0).abs() < 1e-5);
    }
    assert!((fit.log_lik - r.log_lik).abs() < 1e-6);
}

#[test]
fn zero_alpha_world_mae_close_to_nhpp() {
    let truth = EPModel::uniform(Topology::perception(), 1.2, 2.0, 0.0, 1.0).unwrap();
    let train = cascade_logs(&truth, 30, Seed(61).derive(1));
    let test = cascade_logs(&truth, 30, Seed(61).derive(2));
    let grid: Vec<f64> = (1..=20).map(|i| i as f64).collect();
    let ep = fit_ep(&train, EpFitOptions::default()).unwrap();
    let nhpp = NhppPredictor(fit_nhpp_modules(&train).unwrap());
    let a = evaluate_mae(&ep.model, &test, &grid).unwrap().mae;
    let b = evaluate_mae(&nhpp, &test, &grid).unwrap().mae;
    assert!((a / b - 1.0).abs() < 0.10, "{a} vs {b}");
}

#[test]
fn ep_cascade_alpha_zero_matches_nhpp_counts() {
    let truth = EPModel::uniform(Topology::perception(), 1.3, 5.0, 0.0, 1.0).unwrap();
    let reps = 2000;
    let n: Vec<f64> = (0..reps)
        .map(|i| simulate_ep_cascade(&truth, &[None, None, None], 20.0, Seed(31).derive(i)).unwrap().events[2].len() as f64)
        .collect();
    let mean = n.iter().sum::<f64>() / reps as f64;
    let target = truth.baseline[2].cumulative_unchecked(20.0);
    assert!((mean - target).abs() < 3.0 * (target / reps as f64).sqrt(), "{mean} vs {target}");
}

#[test]
fn injection_interval_scales_source_counts() {
    let truth = EPModel::uniform(Topology::perception(), 1.3, 5.0, 1.0, 1.0).unwrap();
    let half = Some(ErrorInjection { start: 10.0, end: 20.0, prob: 0.6 });
    let full = Some(ErrorInjection { start: 0.0, end: 20.0, prob: 0.6 });
    let reps = 2000u64;
    let count = |ei: Option<ErrorInjection>, s: u64| -> f64 {
        (0..reps).map(|i| simulate_ep_cascade(&truth, &[ei, ei, None], 20.0, Seed(s).derive(i)).unwrap().events[0].len() as f64).sum::<f64>()
            / reps as f64
    };
    let (h, f) = (count(half, 1), count(full, 2));
    let b = &truth.baseline[0];
    let expect = b.cumulative_between(10.0, 20.0) / b.cumulative_unchecked(20.0);
    let se_h = (0.6 * b.cumulative_between(10.0, 20.0) / reps as f64).sqrt();
    let se_f = (0.6 * b.cumulative_unchecked(20.0) / reps as f64).sqrt();
    let se_ratio = expect * ((se_h / h).powi(2) + (se_f / f).powi(2)).sqrt();
    assert!((h / f - expect).abs() < 3.0 * se_ratio, "{} vs {expect}", h / f);
}

#[test]
fn srgm_count_totals() {
    let h = DiscreteHazard::geometric(0.08).unwrap();
    let x = vec![Vec::new(); 25];
    let reps = 2000u64;
    let totals = |omega: f64, s: u64| -> f64 {
        (0..reps).map(|i| simulate_srgm_counts(omega, &h, &[], &[], &x, Seed(s).derive(i)).unwrap().counts.iter().sum::<u64>() as f64).sum::<f64>()
            / reps as f64
    };
    let target = 50.0 * (1.0 - 0.92f64.powi(25));
    let t1 = totals(50.0, 1);
    assert!((t1 - target).abs() < 3.0 * (target / reps as f64).sqrt());
    let t2 = totals(100.0, 2);
    let se = 2.0 * ((1.0 / target + 1.0 / (2.0 * target)) / reps as f64).sqrt();
    assert!((t2 / t1 - 2.0).abs() < 3.0 * se);
}

#[test]
fn srgm_gm_omega_recovery() {
    let h = DiscreteHazard::geometric(0.1).unwrap();
    let x = vec![Vec::new(); 30];
    let est: Vec<f64> = (0..20)
        .map(|i| {
            let s = simulate_srgm_counts(150.0, &h, &[], &[], &x, Seed(40).derive(i)).unwrap();
            fit_srgm(&s, HazardFamily::GM, &[], SrgmOptions::default()).unwrap().omega
        })
        .collect();
    let med = median(est);
    assert!((med / 150.0 - 1.0).abs() < 0.10, "{med}");
}

fn covariate_series(rng: &mut ChaCha20Rng, t: usize) -> (Vec<String>, Vec<Vec<f64>>) {
    let names = names(&["signal", "noise1", "noise2", "noise3"]);
    let rows = (0..t).map(|_| (0..4).map(|_| StandardNormal.sample(rng)).collect()).collect();
    (names, rows)
}

#[test]
fn stepwise_picks_strong_covariate() {
    let h = DiscreteHazard::geometric(0.05).unwrap();
    let mut first = 0;
    for rep in 0..20 {
        let mut rng = ChaCha20Rng::seed_from_u64(rep);
        let (names, rows) = covariate_series(&mut rng, 30);
        let beta = [0.8, 0.0, 0.0, 0.0];
        let s = simulate_srgm_counts(400.0, &h, &beta, &names, &rows, Seed(rep)).unwrap();
        let fit = forward_stepwise(&s, HazardFamily::GM, &names, SrgmOptions::default()).unwrap();
        assert!(fit.trace.windows(2).all(|w| w[1].aic <= w[0].aic));
        if fit.trace.get(1).and_then(|t| t.added.as_deref()) == Some("signal") {
            first += 1;
        }
    }
    assert!(first >= 18, "{first}/20");
}

#[test]
fn stepwise_on_noise_stays_small() {
    let h = DiscreteHazard::geometric(0.05).unwrap();
    let mut sizes = [0usize; 5];
    for rep in 0..20 {
        let mut rng = ChaCha20Rng::seed_from_u64(1000 + rep);
        let (names, rows) = covariate_series(&mut rng, 30);
        let s = simulate_srgm_counts(400.0, &h, &[0.0; 4], &names, &rows, Seed(rep)).unwrap();
        let fit = forward_stepwise(&s, HazardFamily::GM, &names, SrgmOptions::default()).unwrap();
        assert!(fit.trace.windows(2).all(|w| w[1].aic <= w[0].aic));
        sizes[fit.beta.len()] += 1;
    }
    // selection-size distribution over the 20 replicates
    println!("selection sizes 0..4: {sizes:?}");
    assert!(sizes[0] + sizes[1] >= 14, "{sizes:?}");
}

#[test]
fn v_shaped_resilience_beats_mean_model() {
    let t = 30;
    // attack intensity high early, retraining effort grows later
    let attack: Vec<f64> = (0..t).map(|i| if i < 10 { 1.0 } else { 0.2 }).collect();
    let effort: Vec<f64> = (0..t).map(|i| if i >= 10 { 1.0 } else { 0.0 }).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let noise = Normal::new(0.0, 0.002).unwrap();
    let mut r = vec![0.75];
    for i in 1..t {
        r.push(r[i - 1] - 0.03 * attack[i] + 0.025 * effort[i] + noise.sample(&mut rng));
    }
    let s = IntervalCountSeries::new(vec![0; t], names(&["attack", "effort"]), (0..t).map(|i| vec![attack[i], effort[i]]).collect())
        .unwrap()
        .with_performance(r.clone())
        .unwrap();
    let fit = fit_resilience(&s, ResilienceForm::Interactions, &names(&["attack", "effort"]), 0.9).unwrap();
    let low = (0..t).min_by(|&a, &b| fit.fitted[a].total_cmp(&fit.fitted[b])).unwrap();
    assert!(low > 3 && low < t - 3, "minimum at {low}");
    assert!(fit.holdout_mae.unwrap() < fit.mean_only_mae.unwrap());
}

#[test]
fn logit_recovery() {
    let mut est0 = Vec::new();
    let mut est1 = Vec::new();
    for rep in 0..20 {
        let mut rng = ChaCha20Rng::seed_from_u64(rep);
        let n = 2000;
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![1.0, StandardNormal.sample(&mut rng)]).collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| {
                let p = 1.0 / (1.0 + (-(0.5 - r[1])).exp());
                (rng.random::<f64>() < p) as u8 as f64
            })
            .collect();
        let f = fit_glm(&rows, &y, &names(&["(intercept)", "x"]), GlmFamily::BernoulliLogit, GlmOptions::default()).unwrap();
        assert!(f.converged && f.score_norm < 1e-6);
        est0.push(f.coef[0]);
        est1.push(f.coef[1]);
    }
    assert!((median(est0) / 0.5 - 1.0).abs() < 0.15);
    assert!((median(est1) / -1.0 - 1.0).abs() < 0.15);
}

#[test]
fn probit_tails_are_finite() {
    let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![1.0, i as f64 / 4.0]).collect();
    let y: Vec<f64> = (0..40).map(|i| if i == 3 || i >= 30 || i == 25 { 1.0 } else { 0.0 }).collect();
    let f = fit_glm(&rows, &y, &names(&["(intercept)", "x"]), GlmFamily::BernoulliProbit, GlmOptions::default()).unwrap();
    assert!(f.converged && f.coef.iter().all(|v| v.is_finite()) && f.score_norm < 1e-6);
}

fn weibull_aft_data(rng: &mut ChaCha20Rng, n: usize, scale: f64) -> (Vec<Vec<f64>>, Vec<f64>, Vec<bool>) {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![1.0, rng.random_range(0.0..2.0)]).collect();
    let mut time = Vec::new();
    let mut event = Vec::new();
    for r in &rows {
        let u: f64 = rng.random();
        // smallest extreme value error: ε = log(−log U)
        let eps = (-(u.ln())).ln();
        let t = (1.0 + 0.5 * r[1] + 0.4 * eps).exp() * scale;
        let c = rng.random_range(0.0..1.0f64);
        // independent censoring time tuned to about 20 %
        let cens = (0.6 + 0.5 * r[1] + 1.5 * c).exp() * scale;
        time.push(t.min(cens));
        event.push(t <= cens);
    }
    (rows, time, event)
}

#[test]
fn weibull_aft_recovery_with_censoring() {
    let mut b0 = Vec::new();
    let mut b1 = Vec::new();
    let mut cens = 0.0;
    for rep in 0..20 {
        let mut rng = ChaCha20Rng::seed_from_u64(300 + rep);
        let (rows, t, ev) = weibull_aft_data(&mut rng, 1000, 1.0);
        cens += ev.iter().filter(|e| !**e).count() as f64 / 1000.0;
        let f = fit_aft(&rows, &t, &ev, &names(&["(intercept)", "x"]), AftDistribution::Weibull).unwrap();
        b0.push(f.coef[0]);
        b1.push(f.coef[1]);
    }
    let frac = cens / 20.0;
    assert!(frac > 0.12 && frac < 0.28, "censoring {frac}");
    assert!((median(b0) - 1.0).abs() < 0.05);
    assert!((median(b1) / 0.5 - 1.0).abs() < 0.05);
}

#[test]
fn aft_time_scale_equivariance() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let (rows, t, ev) = weibull_aft_data(&mut rng, 300, 1.0);
    let nm = names(&["(intercept)", "x"]);
    for dist in [AftDistribution::Weibull, AftDistribution::Lognormal] {
        let a = fit_aft(&rows, &t, &ev, &nm, dist).unwrap();
        let c = 37.0;
        let tc: Vec<f64> = t.iter().map(|v| v * c).collect();
        let b = fit_aft(&rows, &tc, &ev, &nm, dist).unwrap();
        assert!((b.coef[0] - a.coef[0] - c.ln()).abs() < 1e-8);
        assert!((b.coef[1] - a.coef[1]).abs() < 1e-8);
        assert!((b.sigma - a.sigma).abs() < 1e-8);
    }
}
