//! Independent reference computations checked against the library.

use airrel_core::design::{acceleration_factor, phi_criterion, phi_of_points, search_mmlhd, AltSpec, LatinHypercube, PhiConfig};
use airrel_core::propagation::{ep_intensity, ep_log_likelihood, EPModel, Edge, ModuleEventLog, Topology};
use airrel_core::recurrent::{log_likelihood, BaselineIntensityModel, EventSeries, Family};
use airrel_core::regression::{fit_linear, fit_mixture, mixture_layout, mixture_mean, predict_simplex_grid};
use airrel_core::simulate::simulate_mixture_responses;
use airrel_core::srgm::{covariate_link, mean_value, DiscreteHazard, HazardFamily};
use airrel_core::{ExposureSchedule, Seed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Adaptive Simpson quadrature.
fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[test]
fn nhpp_log_likelihood_matches_quadrature() {
    let model = BaselineIntensityModel::weibull_growth(6.0, 0.3, 0.8).unwrap();
    let x = ExposureSchedule::new("v", vec![0.0, 3.0, 7.5, 12.0], vec![0.4, 1.3, 0.0]).unwrap();
    let unit = EventSeries::new("v", vec![0.8, 4.1, 6.9], 12.0, x.clone()).unwrap();
    let ll = log_likelihood(std::slice::from_ref(&unit), &model).unwrap();

    let mut oracle = 0.0;
    for &t in &unit.event_times {
        oracle += (model.intensity_unchecked(t) * x.rate_at(t).unwrap()).ln();
    }
    for (a, b, r) in x.segments() {
        // substitute t = s² to remove the t^(θ3 − 1) endpoint singularity
        let g = |s: f64| if s == 0.0 { 0.0 } else { 2.0 * s * model.intensity_unchecked(s * s) * r };
        oracle -= simpson(&g, a.sqrt(), b.sqrt(), 1e-13);
    }
    assert!((ll - oracle).abs() < 1e-8, "{ll} vs {oracle}");
}

fn five_event_log() -> (EPModel, ModuleEventLog) {
    let topo = Topology::perception();
    let log = ModuleEventLog::new(topo.clone(), vec![vec![1.2, 7.5], vec![3.3], vec![4.0, 9.1]], 20.0).unwrap();
    let baseline = vec![
        BaselineIntensityModel::power_law(1.3, 9.0).unwrap(),
        BaselineIntensityModel::power_law(0.9, 14.0).unwrap(),
        BaselineIntensityModel::power_law(1.1, 11.0).unwrap(),
    ];
    let edges = vec![
        Edge { target: 2, source: 0, alpha: 1.7, gamma: 0.8 },
        Edge { target: 2, source: 1, alpha: 0.6, gamma: 2.5 },
    ];
    (EPModel::new(topo, baseline, edges).unwrap(), log)
}

#[test]
fn ep_log_likelihood_matches_quadrature() {
    let (model, log) = five_event_log();
    let ll = ep_log_likelihood(&model, std::slice::from_ref(&log)).unwrap();
    let mut oracle = 0.0;
    for (m, name) in model.topology.modules.iter().enumerate() {
        for &t in &log.events[m] {
            oracle += ep_intensity(&model, &log, name, t).unwrap().ln();
        }
        // integrate between all event times so every piece is smooth
        let mut cuts: Vec<f64> = log.events.iter().flatten().copied().collect();
        cuts.extend([0.0, 20.0]);
        cuts.sort_by(f64::total_cmp);
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            // t = a + s² handles the t^(β−1) singularity at zero
            let f = |s: f64| {
                let t = a + s * s;
                if t <= 0.0 {
                    return 0.0;
                }
                let lam = model.baseline[m].intensity_unchecked(t)
                    + model
                        .edges
                        .iter()
                        .filter(|e| e.target == m)
                        .flat_map(|e| log.events[e.source].iter().filter(move |&&s0| s0 < t).map(move |&s0| e.alpha * (-e.gamma * (t - s0)).exp()))
                        .sum::<f64>();
                2.0 * s * lam
            };
            oracle -= simpson(&f, 0.0, (b - a).sqrt(), 1e-12);
        }
    }
    assert!((ll - oracle).abs() < 1e-7, "{ll} vs {oracle}");
}

#[test]
fn ep_intensity_hand_value_by_summation() {
    let topo = Topology::new(vec!["src".into(), "dst".into()], vec![vec![], vec![0]]).unwrap();
    let log = ModuleEventLog::new(topo.clone(), vec![vec![1.0], vec![]], 10.0).unwrap();
    let model = EPModel::uniform(topo, 1.0, 1.0, 2.0, 1.0).unwrap();
    let v = ep_intensity(&model, &log, "dst", 2.0).unwrap();
    assert!((v - (1.0 + 2.0 * (-1.0f64).exp())).abs() < 1e-14);
}

#[test]
fn mean_value_t4_matches_expansion() {
    let h = DiscreteHazard::new(HazardFamily::DW3, vec![0.2, 0.9]).unwrap();
    let x = vec![vec![0.5], vec![-1.0], vec![2.0], vec![0.1]];
    let beta = [0.3_f64];
    let g: Vec<f64> = x.iter().map(|r| (r[0] * beta[0]).exp()).collect();
    let hz: Vec<f64> = (1..=4).map(|i| h.h(i)).collect();
    let s = |l: usize| (1.0 - hz[l - 1]).powf(g[l - 1]);
    let oracle = 25.0
        * ((1.0 - s(1))
            + (1.0 - s(2)) * s(1)
            + (1.0 - s(3)) * s(1) * s(2)
            + (1.0 - s(4)) * s(1) * s(2) * s(3));
    let v = mean_value(25.0, &h, &beta, &x, 4).unwrap();
    assert!((v - oracle).abs() < 1e-12, "{v} vs {oracle}");
}

#[test]
fn covariate_link_matches_termwise_product() {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    for _ in 0..100 {
        let x: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let oracle: f64 = x.iter().zip(&b).map(|(a, c)| (a * c).exp()).product();
        let v = covariate_link(&x, &b).unwrap();
        assert!((v - oracle).abs() < 1e-12 * oracle);
    }
}

#[test]
fn phi_matches_pair_loop() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let pts: Vec<Vec<f64>> = (0..5).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
    for (k, m) in [(1u32, 1.0), (5, 2.0), (15, 2.0)] {
        let mut s = 0.0;
        for i in 0..5 {
            for j in 0..i {
                let d = ((pts[i][0] - pts[j][0]).abs().powf(m) + (pts[i][1] - pts[j][1]).abs().powf(m)).powf(1.0 / m);
                s += d.powi(-(k as i32));
            }
        }
        let oracle = s.powf(1.0 / k as f64);
        let v = phi_of_points(&pts, PhiConfig { k, m }).unwrap();
        assert!((v - oracle).abs() < 1e-12 * oracle, "k={k}: {v} vs {oracle}");
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![vec![0]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

#[test]
fn mmlhd_two_runs_and_exhaustive_four() {
    let cfg = PhiConfig::default();
    for p in 1..4 {
        let r = search_mmlhd(2, p, cfg, Seed(1), 50).unwrap();
        assert!((r.criterion - 1.0 / (0.5 * (p as f64).sqrt())).abs() < 1e-12);
    }
    let best = permutations(4)
        .into_iter()
        .map(|q| phi_criterion(&LatinHypercube::from_levels(vec![vec![0, 1, 2, 3], q]).unwrap(), cfg).unwrap())
        .fold(f64::INFINITY, f64::min);
    assert!((best - 1.962_421_004_779_480_1).abs() < 1e-12);
    let r = search_mmlhd(4, 2, cfg, Seed(42), 2000).unwrap();
    assert!((r.criterion - best).abs() < 1e-12 * best);
}

#[test]
fn arrhenius_independent_value() {
    let af = acceleration_factor(AltSpec::Arrhenius { ea: 0.7, t_use: 300.0, t_stress: 350.0 }).unwrap();
    assert!((af / 47.853_749_921_297_67 - 1.0).abs() < 0.01);
}

#[test]
fn linear_fit_matches_normal_equations() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let n = 40;
    let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![1.0, rng.random_range(-1.0..1.0), rng.random_range(0.0..3.0)]).collect();
    let y: Vec<f64> = rows.iter().map(|r| 0.5 - r[1] + 2.0 * r[2] + rng.random_range(-0.1..0.1)).collect();
    let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    let fit = fit_linear(&rows, &y, &names).unwrap();
    // X'X b = X'y by Gaussian elimination
    let mut a = [[0.0f64; 4]; 3];
    for (r, yi) in rows.iter().zip(&y) {
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] += r[i] * r[j];
            }
            a[i][3] += r[i] * yi;
        }
    }
    for i in 0..3 {
        for k in i + 1..3 {
            let f = a[k][i] / a[i][i];
            for j in i..4 {
                a[k][j] -= f * a[i][j];
            }
        }
    }
    let mut b = [0.0; 3];
    for i in (0..3).rev() {
        b[i] = (a[i][3] - (i + 1..3).map(|j| a[i][j] * b[j]).sum::<f64>()) / a[i][i];
    }
    for j in 0..3 {
        assert!((fit.coef[j] - b[j]).abs() < 1e-9);
    }
}

#[test]
fn mixture_grid_matches_direct_evaluation() {
    let coef: Vec<f64> = (0..13).map(|i| 0.1 * i as f64 - 0.4).collect();
    let data = simulate_mixture_responses(&mixture_layout(3), &coef, &coef, 0.0, Seed(0)).unwrap();
    let fits = fit_mixture(&data, airrel_core::regression::MixtureResponse::Y1).unwrap();
    let grid = predict_simplex_grid(&fits[0], &[1.0, 0.0], 10).unwrap();
    for g in &grid {
        let direct = mixture_mean(&coef, [g.x1, g.x2, g.x3], [1.0, 0.0]).unwrap();
        assert!((g.yhat - direct).abs() < 1e-10);
        assert!((g.x1 + g.x2 + g.x3 - 1.0).abs() < 1e-15);
    }
    // vertex evaluation returns the pure-component coefficient
    assert!((fits[0].predict([1.0, 0.0, 0.0], &[0.0, 0.0]) - fits[0].fit.coef[0]).abs() < 1e-15);
}

#[test]
fn family_names_roundtrip() {
    for f in Family::ALL {
        assert_eq!(f.name().parse::<Family>().unwrap(), f);
    }
}
