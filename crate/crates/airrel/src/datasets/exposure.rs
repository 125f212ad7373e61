//! Conversions from typed records to model inputs.

use std::collections::BTreeMap;

use airrel_core::propagation::{ErrorInjection, ModuleEventLog, ScenarioInfo, Topology};
use airrel_core::recurrent::EventSeries;
use airrel_core::srgm::IntervalCountSeries;
use airrel_core::ExposureSchedule;
use chrono::NaiveDate;

use super::records::{AdversarialCountRecord, MileageTable, ModuleErrorRecord, MonthTable};
use super::DataError;

/// Day index of `date` with the first day of the study as day 1, so an
/// event on the last day of a 730-day window has `t = 730 = τ`.
pub fn day_number(origin: NaiveDate, date: NaiveDate) -> f64 {
    ((date - origin).num_days() + 1) as f64
}

fn ordered_months(months: &MonthTable) -> Result<Vec<(f64, NaiveDate)>, DataError> {
    if months.rows.len() != 24 {
        return Err(DataError::Mismatch(format!("month table has {} rows, expected 24", months.rows.len())));
    }
    let mut rows: Vec<_> = months.rows.iter().collect();
    rows.sort_by_key(|r| r.month_id);
    if rows.iter().enumerate().any(|(i, r)| r.month_id as usize != i + 1) {
        return Err(DataError::Mismatch("month ids must be 1..24".into()));
    }
    Ok(rows.iter().map(|r| (f64::from(r.n_days), r.start_date)).collect())
}

/// Daily exposure per vehicle: month `k` covers days `(D_{k−1}, D_k]` with
/// `D_k` the cumulative day count, at rate `miles_k / n_days_k`.
pub fn derive_exposure(mileage: &MileageTable, months: &MonthTable) -> Result<Vec<ExposureSchedule>, DataError> {
    let months = ordered_months(months)?;
    let mut breakpoints = vec![0.0];
    for (days, _) in &months {
        breakpoints.push(breakpoints.last().copied().unwrap_or(0.0) + days);
    }
    mileage
        .rows
        .iter()
        .map(|row| {
            if row.monthly_miles.len() != 24 {
                return Err(DataError::Mismatch(format!("vehicle {} has {} monthly values, expected 24", row.vin, row.monthly_miles.len())));
            }
            let rates = row.monthly_miles.iter().zip(&months).map(|(m, (d, _))| m / d).collect();
            Ok(ExposureSchedule::new(row.vin.clone(), breakpoints.clone(), rates)?)
        })
        .collect()
}

fn study_origin(months: &MonthTable) -> Result<(NaiveDate, f64), DataError> {
    let m = ordered_months(months)?;
    Ok((m[0].1, m.iter().map(|(d, _)| d).sum()))
}

fn event_day(origin: NaiveDate, tau: f64, date: NaiveDate) -> Result<f64, DataError> {
    let t = day_number(origin, date);
    if !(t > 0.0 && t <= tau) {
        return Err(DataError::Mismatch(format!("event date {date} lies outside the study window")));
    }
    Ok(t)
}

/// Per-manufacturer vehicle series. Every vehicle in the mileage table is
/// a unit, including those without events.
pub fn vehicle_series(
    events: &[(String, Option<String>, NaiveDate)],
    mileage: &MileageTable,
    months: &MonthTable,
) -> Result<BTreeMap<String, Vec<EventSeries>>, DataError> {
    let (origin, tau) = study_origin(months)?;
    let schedules = derive_exposure(mileage, months)?;
    let mut times: BTreeMap<&str, Vec<f64>> = mileage.rows.iter().map(|r| (r.vin.as_str(), Vec::new())).collect();
    for (manufacture, vin, date) in events {
        let vin = vin.as_deref().ok_or_else(|| DataError::Mismatch(format!("{manufacture} event on {date} has no VIN")))?;
        let row = mileage
            .rows
            .iter()
            .find(|r| r.vin == vin)
            .ok_or_else(|| DataError::Mismatch(format!("VIN {vin} has events but no mileage row")))?;
        if &row.manufacture != manufacture {
            return Err(DataError::Mismatch(format!("VIN {vin} listed under {} in mileage, {manufacture} in events", row.manufacture)));
        }
        times.get_mut(vin).expect("vin present").push(event_day(origin, tau, *date)?);
    }
    let mut out: BTreeMap<String, Vec<EventSeries>> = BTreeMap::new();
    for (row, x) in mileage.rows.iter().zip(schedules) {
        let ev = times.remove(row.vin.as_str()).unwrap_or_default();
        out.entry(row.manufacture.clone()).or_default().push(EventSeries::new(row.vin.clone(), ev, tau, x)?);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ManufacturerEvents {
    pub event_times: Vec<f64>,
    pub exposures: Vec<ExposureSchedule>,
    pub tau: f64,
}

/// Pooled event days per manufacturer with the exposure of all its
/// vehicles.
pub fn manufacturer_events(
    events: &[(String, Option<String>, NaiveDate)],
    mileage: &MileageTable,
    months: &MonthTable,
) -> Result<BTreeMap<String, ManufacturerEvents>, DataError> {
    let (origin, tau) = study_origin(months)?;
    let schedules = derive_exposure(mileage, months)?;
    let mut out: BTreeMap<String, ManufacturerEvents> = BTreeMap::new();
    for (row, x) in mileage.rows.iter().zip(schedules) {
        out.entry(row.manufacture.clone()).or_insert_with(|| ManufacturerEvents { event_times: Vec::new(), exposures: Vec::new(), tau }).exposures.push(x);
    }
    for (manufacture, _, date) in events {
        let t = event_day(origin, tau, *date)?;
        out.get_mut(manufacture)
            .ok_or_else(|| DataError::Mismatch(format!("manufacturer {manufacture} has events but no vehicles in the mileage table")))?
            .event_times
            .push(t);
    }
    for m in out.values_mut() {
        m.event_times.sort_by(f64::total_cmp);
    }
    Ok(out)
}

/// One log per scenario, times measured from the window start. The 2-D
/// and 3-D modules carry their injection settings; localization has none.
pub fn module_logs(records: &[ModuleErrorRecord]) -> Result<Vec<ModuleEventLog>, DataError> {
    let mut groups: BTreeMap<i64, Vec<&ModuleErrorRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.scenario_id).or_default().push(r);
    }
    let mut logs = Vec::with_capacity(groups.len());
    for (id, rows) in groups {
        let first = rows[0];
        if rows.iter().any(|r| r.window != first.window || r.ei_2d != first.ei_2d || r.ei_3d != first.ei_3d || r.weather != first.weather) {
            return Err(DataError::Mismatch(format!("scenario {id}: window, weather and EI settings must be constant")));
        }
        if rows.iter().any(|r| r.ei_prob_2d != first.ei_prob_2d || r.ei_prob_3d != first.ei_prob_3d) {
            return Err(DataError::Mismatch(format!("scenario {id}: EI probabilities must be constant")));
        }
        let start = first.window[0];
        let mut events = vec![Vec::new(), Vec::new(), Vec::new()];
        for r in &rows {
            let t = r.timestamp - start;
            for (m, hit) in [r.err_2d, r.err_3d, r.err_loc].into_iter().enumerate() {
                if hit {
                    if t <= 0.0 {
                        return Err(DataError::Mismatch(format!("scenario {id}: error event at the window start")));
                    }
                    events[m].push(t);
                }
            }
        }
        let ei = |iv: [f64; 2], prob: f64| Some(ErrorInjection { start: iv[0] - start, end: iv[1] - start, prob });
        let info = ScenarioInfo {
            scenario_id: id,
            weather: first.weather.clone(),
            injection: vec![ei(first.ei_2d, first.ei_prob_2d), ei(first.ei_3d, first.ei_prob_3d), None],
        };
        logs.push(ModuleEventLog::new(Topology::perception(), events, first.window[1] - start)?.with_scenario(info));
    }
    Ok(logs)
}

/// Numeric column of an adversarial record by canonical name.
pub fn adversarial_value(r: &AdversarialCountRecord, name: &str) -> Option<f64> {
    Some(match name {
        "alpha" => r.alpha,
        "f1" => r.f1,
        "epsilon" => r.epsilon,
        "fgsm_pct" => r.fgsm_pct,
        "pgd_pct" => r.pgd_pct,
        "train_acc" => r.train_acc,
        "train_loss" => r.train_loss,
        "val_acc" => r.val_acc,
        "val_loss" => r.val_loss,
        "test_acc" => r.test_acc,
        "test_loss" => r.test_loss,
        "memory" => r.memory,
        _ => return None,
    })
}

/// Interval counts for one scenario, ordered by step, with the named
/// covariate columns and optionally a performance column.
pub fn srgm_series(
    records: &[AdversarialCountRecord],
    scenario: i64,
    covariates: &[String],
    performance: Option<&str>,
) -> Result<IntervalCountSeries, DataError> {
    let mut rows: Vec<&AdversarialCountRecord> = records.iter().filter(|r| r.scenario == scenario).collect();
    if rows.is_empty() {
        return Err(DataError::Mismatch(format!("no rows for scenario {scenario}")));
    }
    rows.sort_by_key(|r| r.t);
    let value = |r: &AdversarialCountRecord, c: &str| {
        adversarial_value(r, c).ok_or_else(|| DataError::Mismatch(format!("unknown numeric column {c:?}")))
    };
    let x = rows.iter().map(|r| covariates.iter().map(|c| value(r, c)).collect::<Result<Vec<_>, _>>()).collect::<Result<Vec<_>, _>>()?;
    let s = IntervalCountSeries::new(rows.iter().map(|r| r.fc).collect(), covariates.to_vec(), x)?;
    Ok(match performance {
        Some(p) => s.with_performance(rows.iter().map(|r| value(r, p)).collect::<Result<Vec<_>, _>>()?)?,
        None => s,
    })
}

#[cfg(test)]
mod tests {
    use super::super::records::{MileageRow, MonthRow};
    use super::*;
    use chrono::{Datelike, Months};

    pub(crate) fn study_months() -> MonthTable {
        let o = NaiveDate::from_ymd_opt(2017, 12, 1).unwrap();
        let rows = (0..24)
            .map(|k| {
                let s = o.checked_add_months(Months::new(k)).unwrap();
                let e = s.checked_add_months(Months::new(1)).unwrap().pred_opt().unwrap();
                MonthRow { month_id: k + 1, start_date: s, end_date: e, n_days: e.day(), extra: Vec::new() }
            })
            .collect();
        MonthTable { rows }
    }

    #[test]
    fn tau_is_730_for_the_two_year_window() {
        let months = study_months();
        let mileage = MileageTable {
            month_headers: (1..=24).map(|k| format!("M{k:02}")).collect(),
            rows: vec![MileageRow { manufacture: "A".into(), vin: "v".into(), monthly_miles: vec![0.0; 24], extra: vec![] }],
        };
        let x = derive_exposure(&mileage, &months).unwrap();
        assert_eq!(x[0].tau(), 730.0);
        assert!(x[0].daily_rate.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn rate_is_miles_over_days() {
        let months = study_months();
        let mut miles = vec![0.0; 24];
        miles[0] = 3.1;
        let mileage = MileageTable {
            month_headers: (1..=24).map(|k| format!("M{k:02}")).collect(),
            rows: vec![MileageRow { manufacture: "A".into(), vin: "v".into(), monthly_miles: miles, extra: vec![] }],
        };
        let x = derive_exposure(&mileage, &months).unwrap();
        assert!((x[0].daily_rate[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn day_numbering() {
        let o = NaiveDate::from_ymd_opt(2017, 12, 1).unwrap();
        assert_eq!(day_number(o, o), 1.0);
        assert_eq!(day_number(o, NaiveDate::from_ymd_opt(2019, 11, 30).unwrap()), 730.0);
    }
}
