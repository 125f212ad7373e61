//! Synthetic datasets in the repository schemas, built on the core
//! simulators. Used for bundled fixtures and round-trip checks.

use std::collections::BTreeMap;

use airrel_core::propagation::{EPModel, Edge, ErrorInjection, Topology};
use airrel_core::recurrent::BaselineIntensityModel;
use airrel_core::regression::mixture_layout;
use airrel_core::simulate::{simulate_ep_cascade, simulate_mixture_responses, simulate_nhpp, simulate_srgm_counts};
use airrel_core::srgm::{DiscreteHazard, HazardFamily};
use airrel_core::Seed;
use chrono::{Datelike, Days, Months, NaiveDate};
use rand::Rng;

use crate::datasets::{
    derive_exposure, AdversarialCountRecord, AdversarialTable, AccuracyScale, CollisionRecord, DataError, DisengagementRecord, MileageRow,
    MileageTable, MixtureRecord, ModuleErrorRecord, MonthRow, MonthTable,
};

pub const MANUFACTURERS: [&str; 4] = ["Waymo", "Cruise", "Pony AI", "Zoox"];

pub const WEATHER: [&str; 7] =
    ["clear", "snowy", "rainy", "foggy", "intermittent snowy", "intermittent rainy", "intermittent foggy"];

/// The 24 calendar months from December 2017 through November 2019.
pub fn study_months() -> MonthTable {
    months_from(NaiveDate::from_ymd_opt(2017, 12, 1).expect("valid date"), 24)
}

pub fn months_from(origin: NaiveDate, n: u32) -> MonthTable {
    let rows = (0..n)
        .map(|k| {
            let start = origin.checked_add_months(Months::new(k)).expect("in range");
            let end = start.checked_add_months(Months::new(1)).and_then(|d| d.pred_opt()).expect("in range");
            MonthRow { month_id: k + 1, start_date: start, end_date: end, n_days: end.day(), extra: Vec::new() }
        })
        .collect();
    MonthTable { rows }
}

fn month_label(d: NaiveDate) -> String {
    format!("{:04}-{:02}", d.year(), d.month())
}

/// Monthly mileage with a random active span per vehicle.
fn fleet_mileage(vehicles: &[(String, String)], seed: Seed) -> MileageTable {
    let mut rng = seed.rng();
    let rows = vehicles
        .iter()
        .map(|(m, vin)| {
            let first = rng.random_range(0..8usize);
            let last = rng.random_range(16..24usize);
            let monthly_miles = (0..24)
                .map(|k| if (first..=last).contains(&k) { (rng.random_range(0.3..3.0f64) * 1000.0).round() / 1000.0 } else { 0.0 })
                .collect();
            MileageRow { manufacture: m.clone(), vin: vin.clone(), monthly_miles, extra: Vec::new() }
        })
        .collect();
    MileageTable { month_headers: study_months().rows.iter().map(|r| month_label(r.start_date)).collect(), rows }
}

fn fleet(vehicles_per_make: usize) -> Vec<(String, String)> {
    MANUFACTURERS
        .iter()
        .flat_map(|m| {
            let tag: String = m.chars().filter(char::is_ascii_alphabetic).take(3).collect::<String>().to_uppercase();
            (1..=vehicles_per_make).map(move |i| (m.to_string(), format!("{tag}{i:04}")))
        })
        .collect()
}

/// Decreasing Weibull-growth baselines, scaled per manufacturer.
fn fleet_models(scale: f64) -> Vec<BaselineIntensityModel> {
    [1.0, 0.7, 0.4, 0.3]
        .iter()
        .map(|s| BaselineIntensityModel::weibull_growth(scale * s, 0.05, 0.6).expect("valid parameters"))
        .collect()
}

/// `(manufacture, vin, event date)` from per-vehicle NHPP draws; an event
/// at continuous time `t` falls on day `⌈t⌉`.
fn simulate_fleet_events(
    mileage: &MileageTable,
    months: &MonthTable,
    models: &[BaselineIntensityModel],
    seed: Seed,
) -> Result<Vec<(String, String, NaiveDate)>, DataError> {
    let origin = months.rows[0].start_date;
    let schedules = derive_exposure(mileage, months)?;
    let mut out = Vec::new();
    for (i, (row, x)) in mileage.rows.iter().zip(&schedules).enumerate() {
        let m = MANUFACTURERS.iter().position(|n| *n == row.manufacture).unwrap_or(0);
        let s = simulate_nhpp(&models[m], x, x.tau(), seed.derive(i as u64))?;
        for t in s.event_times {
            let day = t.ceil().max(1.0) as u64;
            out.push((row.manufacture.clone(), row.vin.clone(), origin + Days::new(day - 1)));
        }
    }
    out.sort_by(|a, b| (a.2, &a.0, &a.1).cmp(&(b.2, &b.0, &b.1)));
    Ok(out)
}

pub struct FleetData<R> {
    pub events: Vec<R>,
    pub mileage: MileageTable,
    pub months: MonthTable,
}

pub fn disengagement(vehicles_per_make: usize, seed: Seed) -> Result<FleetData<DisengagementRecord>, DataError> {
    let months = study_months();
    let mileage = fleet_mileage(&fleet(vehicles_per_make), seed.derive(0));
    let ev = simulate_fleet_events(&mileage, &months, &fleet_models(400.0), seed.derive(1))?;
    let origin = months.rows[0].start_date;
    let events = ev
        .into_iter()
        .map(|(manufacture, vin, date)| DisengagementRecord {
            manufacture,
            vin,
            month: month_label(date),
            month_id: month_id_of(origin, date),
            date,
            extra: Vec::new(),
        })
        .collect();
    Ok(FleetData { events, mileage, months })
}

fn month_id_of(origin: NaiveDate, d: NaiveDate) -> u32 {
    ((d.year() - origin.year()) * 12 + d.month() as i32 - origin.month() as i32 + 1) as u32
}

/// Manufacturer-level collision events: VINs are not recorded and event
/// ids number the distinct event dates within each manufacturer.
pub fn collision(vehicles_per_make: usize, seed: Seed) -> Result<FleetData<CollisionRecord>, DataError> {
    let months = study_months();
    let mileage = fleet_mileage(&fleet(vehicles_per_make), seed.derive(0));
    let ev = simulate_fleet_events(&mileage, &months, &fleet_models(40.0), seed.derive(1))?;
    let origin = months.rows[0].start_date;
    let mut ids: BTreeMap<(String, NaiveDate), u32> = BTreeMap::new();
    let mut next: BTreeMap<String, u32> = BTreeMap::new();
    let events = ev
        .into_iter()
        .map(|(manufacture, _, date)| {
            let id = *ids.entry((manufacture.clone(), date)).or_insert_with(|| {
                let n = next.entry(manufacture.clone()).or_insert(0);
                *n += 1;
                *n
            });
            CollisionRecord { manufacture, vin: None, month: month_label(date), month_id: month_id_of(origin, date), date, event_id: id, extra: Vec::new() }
        })
        .collect();
    Ok(FleetData { events, mileage, months })
}

/// Perception-system world used for the module-error generator.
pub fn perception_world() -> EPModel {
    let baseline = vec![
        BaselineIntensityModel::power_law(1.1, 1.5).expect("valid"),
        BaselineIntensityModel::power_law(1.0, 2.0).expect("valid"),
        BaselineIntensityModel::power_law(1.0, 5.0).expect("valid"),
    ];
    let edges = vec![Edge { target: 2, source: 0, alpha: 0.9, gamma: 2.5 }, Edge { target: 2, source: 1, alpha: 0.6, gamma: 2.0 }];
    EPModel::new(Topology::perception(), baseline, edges).expect("valid world")
}

/// One row per distinct error time. Scenarios alternate between
/// injection over the whole 20 s window and over its second half.
pub fn module_errors(model: &EPModel, scenarios: usize, prob: f64, seed: Seed) -> Result<Vec<ModuleErrorRecord>, DataError> {
    let window = 20.0;
    let mut out = Vec::new();
    for s in 0..scenarios {
        let ei = if s % 2 == 0 { [0.0, window] } else { [10.0, window] };
        let inj = ErrorInjection { start: ei[0], end: ei[1], prob };
        let log = simulate_ep_cascade(model, &[Some(inj), Some(inj), None], window, seed.derive(s as u64))?;
        let mut times: BTreeMap<u64, [bool; 3]> = BTreeMap::new();
        for (m, ev) in log.events.iter().enumerate() {
            for &t in ev {
                times.entry(t.to_bits()).or_default()[m] = true;
            }
        }
        for (bits, flags) in times {
            out.push(ModuleErrorRecord {
                scenario_id: s as i64 + 1,
                weather: WEATHER[s % WEATHER.len()].into(),
                window: [0.0, window],
                ei_2d: ei,
                ei_prob_2d: prob,
                ei_3d: ei,
                ei_prob_3d: prob,
                timestamp: f64::from_bits(bits),
                err_2d: flags[0],
                err_3d: flags[1],
                err_loc: flags[2],
                extra: Vec::new(),
            });
        }
    }
    Ok(out)
}

/// Failure counts under adversarial attack with retraining. Counts follow
/// a DW3 covariate model in `epsilon` and `fgsm_pct`; test accuracy dips
/// under attack and recovers as training accuracy improves.
pub fn adversarial(scenarios: usize, steps: usize, seed: Seed) -> Result<AdversarialTable, DataError> {
    let hazard = DiscreteHazard::new(HazardFamily::DW3, vec![0.003, 1.3])?;
    let mut records = Vec::new();
    for s in 0..scenarios {
        let mut rng = seed.derive(2 * s as u64).rng();
        let lo = s as f64 / scenarios as f64;
        let hi = (s + 1) as f64 / scenarios as f64;
        let mut rows = Vec::with_capacity(steps);
        for i in 0..steps {
            let eps = rng.random_range(lo..hi);
            let fgsm = (rng.random_range(0.0..100.0f64) * 10.0).round() / 10.0;
            rows.push((i, eps, fgsm));
        }
        let x: Vec<Vec<f64>> = rows.iter().map(|&(_, e, f)| vec![e, f]).collect();
        let names = ["epsilon".to_string(), "fgsm_pct".to_string()];
        let counts = simulate_srgm_counts(400.0, &hazard, &[1.0, 0.005], &names, &x, seed.derive(2 * s as u64 + 1))?.counts;
        let mut acc = 0.72 - 0.1 * lo;
        for (&(i, eps, fgsm), fc) in rows.iter().zip(counts) {
            let t = i as f64;
            let train_acc = 0.55 + 0.4 * (1.0 - (-t / 8.0).exp());
            let prev_train = 0.55 + 0.4 * (1.0 - (-(t - 1.0) / 8.0).exp());
            if i > 0 {
                acc += -0.05 * eps + 0.9 * (train_acc - prev_train) + 0.01 + rng.random_range(-0.004..0.004);
            }
            acc = acc.clamp(0.01, 0.99);
            let val_acc = (train_acc - 0.03 + rng.random_range(-0.01..0.01f64)).clamp(0.0, 1.0);
            records.push(AdversarialCountRecord {
                scenario: s as i64 + 1,
                epsilon_range: [lo, hi],
                t: i as u32 + 1,
                fc,
                alpha: 0.001,
                f1: (acc - 0.02).clamp(0.0, 1.0),
                epsilon: eps,
                fgsm_pct: fgsm,
                pgd_pct: 100.0 - fgsm,
                train_acc,
                train_loss: -train_acc.ln(),
                val_acc,
                val_loss: -val_acc.max(1e-3).ln(),
                test_acc: acc,
                test_loss: -acc.ln(),
                memory: 1200.0 + 15.0 * t,
                extra: Vec::new(),
            });
        }
    }
    Ok(AdversarialTable { accuracy_scale: AccuracyScale::Proportion, records })
}

/// Coefficients in 13-term order `x1, x2, x3, x1x2, x1x3, x2x3, z1x1,
/// z1x2, z1x3, z2x1, z2x2, z2x3, z1z2` for `y1` and `y2`.
pub fn mixture_truth(scenario: usize) -> ([f64; 13], [f64; 13]) {
    let shift = [0.0, -0.02, -0.05][scenario];
    let y1 = [0.85 + shift, 0.83 + shift, 0.88 + shift, 0.05, -0.03, 0.04, 0.03, 0.02, 0.04, -0.02, -0.01, -0.03, 0.01];
    let y2 = [-3.0 - shift, -2.8 - shift, -3.2 - shift, 0.5, 0.3, -0.4, -0.2, -0.1, -0.3, 0.15, 0.1, 0.2, -0.05];
    (y1, y2)
}

/// The 252-run layout (three replicates) with Gaussian responses.
pub fn mixture(sd: f64, seed: Seed) -> Result<Vec<MixtureRecord>, DataError> {
    let layout = mixture_layout(3);
    let mut out = Vec::with_capacity(layout.len());
    for scenario in 0..3 {
        let part: Vec<_> = layout.iter().copied().filter(|o| o.scenario == scenario).collect();
        let (c1, c2) = mixture_truth(scenario);
        for o in simulate_mixture_responses(&part, &c1, &c2, sd, seed.derive(scenario as u64))? {
            let mut c = [false; 3];
            c[o.scenario] = true;
            out.push(MixtureRecord { x: o.x, z: [o.z[0] == 1.0, o.z[1] == 1.0], c, y1: o.y1.clamp(0.0, 1.0), y2: o.y2, extra: Vec::new() });
        }
    }
    Ok(out)
}
