use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Dataset, Schema};

/// Deterministic tallies for a loaded dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema: Schema,
    pub rows: usize,
    pub tallies: BTreeMap<String, BTreeMap<String, u64>>,
    pub totals: BTreeMap<String, f64>,
    pub date_range: Option<[String; 2]>,
}

fn tally<'a>(keys: impl Iterator<Item = String> + 'a) -> BTreeMap<String, u64> {
    let mut m = BTreeMap::new();
    for k in keys {
        *m.entry(k).or_insert(0) += 1;
    }
    m
}

/// Splits a free-text list such as `"bias; prediction error and NLP"`
/// into lowercase terms.
pub fn terms(s: &str) -> Vec<String> {
    s.to_lowercase()
        .replace(" and ", ";")
        .split([',', ';', '/', '&', '|'])
        .map(|t| t.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|t| !t.is_empty())
        .collect()
}

fn range<T: Ord + ToString + Copy>(it: impl Iterator<Item = T>) -> Option<[String; 2]> {
    let v: Vec<T> = it.collect();
    Some([v.iter().min()?.to_string(), v.iter().max()?.to_string()])
}

pub fn summarize(ds: &Dataset) -> Summary {
    let mut tallies = BTreeMap::new();
    let mut totals = BTreeMap::new();
    let mut date_range = None;
    match ds {
        Dataset::Disengagement(v) => {
            tallies.insert("manufacture".into(), tally(v.iter().map(|r| r.manufacture.clone())));
            tallies.insert("month_id".into(), tally(v.iter().map(|r| format!("{:02}", r.month_id))));
            totals.insert("vehicles".into(), v.iter().map(|r| &r.vin).collect::<BTreeSet<_>>().len() as f64);
            date_range = range(v.iter().map(|r| r.date));
        }
        Dataset::Collision(v) => {
            tallies.insert("manufacture".into(), tally(v.iter().map(|r| r.manufacture.clone())));
            let events: BTreeSet<_> = v.iter().map(|r| (&r.manufacture, r.event_id)).collect();
            totals.insert("distinct_events".into(), events.len() as f64);
            totals.insert("rows_with_vin".into(), v.iter().filter(|r| r.vin.is_some()).count() as f64);
            date_range = range(v.iter().map(|r| r.date));
        }
        Dataset::Mileage(t) => {
            tallies.insert("vehicles".into(), tally(t.rows.iter().map(|r| r.manufacture.clone())));
            totals.insert("thousand_miles".into(), t.rows.iter().flat_map(|r| &r.monthly_miles).sum());
        }
        Dataset::Months(t) => {
            totals.insert("days".into(), t.rows.iter().map(|r| f64::from(r.n_days)).sum());
            date_range = range(t.rows.iter().map(|r| r.start_date)).zip(range(t.rows.iter().map(|r| r.end_date))).map(|(a, b)| [a[0].clone(), b[1].clone()]);
        }
        Dataset::ModuleErrors(v) => {
            tallies.insert("scenario".into(), tally(v.iter().map(|r| r.scenario_id.to_string())));
            tallies.insert("weather".into(), tally(v.iter().map(|r| r.weather.clone())));
            totals.insert("errors_2d".into(), v.iter().filter(|r| r.err_2d).count() as f64);
            totals.insert("errors_3d".into(), v.iter().filter(|r| r.err_3d).count() as f64);
            totals.insert("errors_localization".into(), v.iter().filter(|r| r.err_loc).count() as f64);
        }
        Dataset::Mixture(v) => {
            let scen = |c: &[bool; 3]| c.iter().position(|&b| b).map_or("none", |i| airrel_core::regression::SCENARIO_NAMES[i]).to_string();
            tallies.insert("scenario".into(), tally(v.iter().map(|r| scen(&r.c))));
            tallies.insert("z1".into(), tally(v.iter().map(|r| u8::from(r.z[0]).to_string())));
            tallies.insert("z2".into(), tally(v.iter().map(|r| u8::from(r.z[1]).to_string())));
        }
        Dataset::Adversarial(t) => {
            tallies.insert("scenario".into(), tally(t.records.iter().map(|r| r.scenario.to_string())));
            totals.insert("failures".into(), t.records.iter().map(|r| r.fc as f64).sum());
        }
        Dataset::Incidents(v) => {
            tallies.insert("cause_terms".into(), tally(v.iter().flat_map(|r| terms(&r.cause))));
            tallies.insert("algorithm_terms".into(), tally(v.iter().flat_map(|r| terms(&r.algorithm))));
            tallies.insert("sector".into(), tally(v.iter().map(|r| r.sector.clone())));
            totals.insert("casuality".into(), v.iter().filter(|r| r.casuality).count() as f64);
            totals.insert("injured".into(), v.iter().filter(|r| r.injured).count() as f64);
            totals.insert("casuality_or_injured".into(), v.iter().filter(|r| r.casuality || r.injured).count() as f64);
        }
    }
    Summary { schema: ds.schema(), rows: ds.len(), tallies, totals, date_range }
}
