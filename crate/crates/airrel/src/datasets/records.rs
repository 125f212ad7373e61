//! Typed records for each schema, with row-level checks and CSV writers.

use std::collections::{BTreeMap, HashMap};

use chrono::{Datelike, Months, NaiveDate};
use serde::{Deserialize, Serialize};

use super::table::{normalize_header, Column, ColumnMap, RawTable};
use super::{AccuracyScale, DataError, ValidateOptions, Violation};
use crate::output::fmt_num;

pub type Extra = Vec<(String, String)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisengagementRecord {
    pub manufacture: String,
    pub vin: String,
    pub date: NaiveDate,
    pub month: String,
    pub month_id: u32,
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionRecord {
    pub manufacture: String,
    pub vin: Option<String>,
    pub date: NaiveDate,
    pub month: String,
    pub month_id: u32,
    pub event_id: u32,
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MileageRow {
    pub manufacture: String,
    pub vin: String,
    /// Thousand miles per month, 24 values.
    pub monthly_miles: Vec<f64>,
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MileageTable {
    pub month_headers: Vec<String>,
    pub rows: Vec<MileageRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthRow {
    pub month_id: u32,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub n_days: u32,
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthTable {
    pub rows: Vec<MonthRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleErrorRecord {
    pub scenario_id: i64,
    pub weather: String,
    /// Observation window `[start, end]`, seconds.
    pub window: [f64; 2],
    pub ei_2d: [f64; 2],
    pub ei_prob_2d: f64,
    pub ei_3d: [f64; 2],
    pub ei_prob_3d: f64,
    pub timestamp: f64,
    pub err_2d: bool,
    pub err_3d: bool,
    pub err_loc: bool,
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureRecord {
    pub x: [f64; 3],
    pub z: [bool; 2],
    pub c: [bool; 3],
    pub y1: f64,
    pub y2: f64,
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialCountRecord {
    pub scenario: i64,
    pub epsilon_range: [f64; 2],
    pub t: u32,
    pub fc: u64,
    pub alpha: f64,
    pub f1: f64,
    pub epsilon: f64,
    pub fgsm_pct: f64,
    pub pgd_pct: f64,
    pub train_acc: f64,
    pub train_loss: f64,
    pub val_acc: f64,
    pub val_loss: f64,
    pub test_acc: f64,
    pub test_loss: f64,
    pub memory: f64,
    pub extra: Extra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialTable {
    pub accuracy_scale: AccuracyScale,
    pub records: Vec<AdversarialCountRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidentRecord {
    pub incident_no: i64,
    pub company: String,
    pub sector: String,
    pub system: String,
    pub algorithm: String,
    pub cause: String,
    pub description: String,
    pub casuality: bool,
    pub injured: bool,
    pub comment: String,
    pub extra: Extra,
}

pub(super) const DISENGAGEMENT: &[Column] = &[
    Column::req("manufacture", "Manufacture", &["manufacturer"]),
    Column::req("vin", "VIN", &[]),
    Column::req("date", "Date", &[]),
    Column::req("month", "Month", &[]),
    Column::req("month_id", "MonthID", &[]),
];

pub(super) const COLLISION: &[Column] = &[
    Column::req("manufacture", "Manufacture", &["manufacturer"]),
    Column::opt("vin", "VIN", &[]),
    Column::req("date", "Date", &[]),
    Column::req("month", "Month", &[]),
    Column::req("month_id", "MonthID", &[]),
    Column::req("event_id", "EventID", &[]),
];

pub(super) const MILEAGE: &[Column] =
    &[Column::req("manufacture", "Manufacture", &["manufacturer"]), Column::req("vin", "VIN", &[])];

pub(super) const MONTHS: &[Column] = &[
    Column::req("month_id", "MonthID", &[]),
    Column::req("start_date", "StartDate", &["start"]),
    Column::req("end_date", "EndDate", &["end"]),
    Column::req("n_days", "NDays", &["days", "numberofdays", "ndays"]),
];

pub(super) const MODULE_ERRORS: &[Column] = &[
    Column::req("scenario_id", "ScenarioID", &["scenario"]),
    Column::req("weather", "Weather", &[]),
    Column::req("window_start", "WindowStart", &["observationwindowstart"]),
    Column::req("window_end", "WindowEnd", &["observationwindowend"]),
    Column::req("ei_2d_start", "EI2DStart", &["eitimein2dmodulestart"]),
    Column::req("ei_2d_end", "EI2DEnd", &["eitimein2dmoduleend"]),
    Column::req("ei_prob_2d", "EI2DProb", &["eiprobin2dmodule"]),
    Column::req("ei_3d_start", "EI3DStart", &["eitimein3dmodulestart"]),
    Column::req("ei_3d_end", "EI3DEnd", &["eitimein3dmoduleend"]),
    Column::req("ei_prob_3d", "EI3DProb", &["eiprobin3dmodule"]),
    Column::req("timestamp", "TimeStamp", &[]),
    Column::req("err_2d", "Err2D", &["2derrorindicator"]),
    Column::req("err_3d", "Err3D", &["3derrorindicator"]),
    Column::req("err_loc", "ErrLoc", &["localizationerrorindicator"]),
];

pub(super) const MIXTURE: &[Column] = &[
    Column::req("x1", "x1", &[]),
    Column::req("x2", "x2", &[]),
    Column::req("x3", "x3", &[]),
    Column::req("z1", "z1", &[]),
    Column::req("z2", "z2", &[]),
    Column::req("c1", "c1", &[]),
    Column::req("c2", "c2", &[]),
    Column::req("c3", "c3", &[]),
    Column::req("y1", "y1", &[]),
    Column::req("y2", "y2", &[]),
];

pub(super) const ADVERSARIAL: &[Column] = &[
    Column::req("scenario", "Scenario", &[]),
    Column::req("epsilon_range", "EpsilonRange", &[]),
    Column::req("t", "T", &[]),
    Column::req("fc", "FC", &["fn"]),
    Column::req("alpha", "Alpha", &[]),
    Column::req("f1", "F1", &[]),
    Column::req("epsilon", "Epsilon", &[]),
    Column::req("fgsm_pct", "FGSM", &[]),
    Column::req("pgd_pct", "PGD", &[]),
    Column::req("train_acc", "TrainingAccuracy", &[]),
    Column::req("train_loss", "TrainingLoss", &[]),
    Column::req("val_acc", "ValidationAccuracy", &[]),
    Column::req("val_loss", "ValidationLoss", &[]),
    Column::req("test_acc", "TestAccuracy", &[]),
    Column::req("test_loss", "TestLoss", &[]),
    Column::req("memory", "Memory", &[]),
];

pub(super) const INCIDENTS: &[Column] = &[
    Column::req("incident_no", "IncidentNo", &[]),
    Column::req("company", "Company", &[]),
    Column::req("sector", "Sector", &[]),
    Column::req("system", "System", &[]),
    Column::req("algorithm", "Algorithm", &[]),
    Column::req("cause", "Cause", &[]),
    Column::req("description", "IncidentDescription", &["description"]),
    Column::req("casuality", "Casuality", &["casualty"]),
    Column::req("injured", "Injured", &[]),
    Column::req("comment", "Comment", &[]),
];

/// Per-row cursor that records violations as cells are read.
struct Row<'a> {
    n: usize,
    cells: &'a [String],
    map: &'a ColumnMap,
    out: &'a mut Vec<Violation>,
}

impl Row<'_> {
    fn raw(&self, key: &str) -> &str {
        self.map.position(key).and_then(|i| self.cells.get(i)).map_or("", String::as_str)
    }

    fn flag(&mut self, key: &str, rule: &str) {
        let column = self.map.header_of(key);
        self.out.push(Violation { row: self.n, column, rule: rule.into() });
    }

    fn flag_columns(&mut self, column: String, rule: &str) {
        self.out.push(Violation { row: self.n, column, rule: rule.into() });
    }

    fn text(&self, key: &str) -> String {
        self.raw(key).to_string()
    }

    fn nonempty(&mut self, key: &str) -> Option<String> {
        let v = self.raw(key).to_string();
        if v.is_empty() {
            self.flag(key, "missing");
            return None;
        }
        Some(v)
    }

    fn real(&mut self, key: &str, lo: f64, hi: f64) -> Option<f64> {
        let s = self.raw(key);
        if s.is_empty() {
            self.flag(key, "missing");
            return None;
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => {
                if v < lo || v > hi {
                    self.flag(key, "range");
                    None
                } else {
                    Some(v)
                }
            }
            _ => {
                self.flag(key, "type");
                None
            }
        }
    }

    fn int(&mut self, key: &str, lo: i64, hi: i64) -> Option<i64> {
        let s = self.raw(key);
        if s.is_empty() {
            self.flag(key, "missing");
            return None;
        }
        match s.parse::<i64>() {
            Ok(v) if (lo..=hi).contains(&v) => Some(v),
            Ok(_) => {
                self.flag(key, "range");
                None
            }
            Err(_) => {
                self.flag(key, "type");
                None
            }
        }
    }

    fn date(&mut self, key: &str) -> Option<NaiveDate> {
        let s = self.raw(key);
        if s.is_empty() {
            self.flag(key, "missing");
            return None;
        }
        match NaiveDate::parse_from_str(s, "%Y-%m-%d") {
            Ok(d) => Some(d),
            Err(_) => {
                self.flag(key, "type");
                None
            }
        }
    }

    fn binary(&mut self, key: &str) -> Option<bool> {
        match parse_flag(self.raw(key)) {
            Some(b) => Some(b),
            None => {
                self.flag(key, if self.raw(key).is_empty() { "missing" } else { "type" });
                None
            }
        }
    }
}

fn parse_flag(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "1.0" | "true" | "yes" | "y" => Some(true),
        "0" | "0.0" | "false" | "no" | "n" => Some(false),
        _ => None,
    }
}

/// Parses `"[a, b]"`, `"(a,b)"`, `"a-b"` or `"a;b"` into an ascending pair.
pub fn parse_interval(s: &str) -> Option<[f64; 2]> {
    let inner = s.trim().trim_start_matches(['[', '(']).trim_end_matches([']', ')']);
    let split = inner.find([',', ';']).or_else(|| inner.char_indices().skip(1).find(|&(_, c)| c == '-').map(|(i, _)| i))?;
    let a = inner[..split].trim().parse::<f64>().ok()?;
    let b = inner[split + 1..].trim().parse::<f64>().ok()?;
    (a.is_finite() && b.is_finite() && a <= b).then_some([a, b])
}

fn write_interval(v: [f64; 2]) -> String {
    format!("[{},{}]", fmt_num(v[0]), fmt_num(v[1]))
}

/// Calendar month `(year, month)` from free-form month text such as
/// `2018-03`, `2018/03`, `Mar-18`, `Mar 2018` or `March 2018`.
pub fn parse_month_text(s: &str) -> Option<(i32, u32)> {
    let s = s.trim();
    let parts: Vec<&str> = s.split(['-', '/', ' ', '_']).filter(|p| !p.is_empty()).collect();
    if parts.len() != 2 {
        return None;
    }
    let num = |p: &str| p.parse::<u32>().ok();
    if let (Some(y), Some(m)) = (num(parts[0]), num(parts[1])) {
        if parts[0].len() == 4 && (1..=12).contains(&m) {
            return Some((y as i32, m));
        }
    }
    let month = month_from_name(parts[0])?;
    let year = match parts[1].len() {
        2 => 2000 + num(parts[1])? as i32,
        4 => num(parts[1])? as i32,
        _ => return None,
    };
    Some((year, month))
}

fn month_from_name(s: &str) -> Option<u32> {
    const NAMES: [&str; 12] = ["jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec"];
    let l = s.to_ascii_lowercase();
    if l.len() < 3 {
        return None;
    }
    NAMES.iter().position(|n| l.starts_with(n)).map(|i| i as u32 + 1)
}

/// First day of calendar month `month_id` counted from `origin` (id 1).
pub fn month_start(origin: NaiveDate, month_id: u32) -> Option<NaiveDate> {
    origin.with_day(1)?.checked_add_months(Months::new(month_id.checked_sub(1)?))
}

fn check_date_month(row: &mut Row<'_>, date: NaiveDate, month: &str, month_id: u32, origin: NaiveDate) {
    let start = month_start(origin, month_id);
    let inside = start.is_some_and(|s| s.year() == date.year() && s.month() == date.month());
    let text_ok = parse_month_text(month).is_none_or(|(y, m)| y == date.year() && m == date.month());
    if !inside || !text_ok {
        let col = format!("{}+{}", row.map.header_of("date"), row.map.header_of("month_id"));
        row.flag_columns(col, "date in month");
    }
}

fn rows<'a>(table: &'a RawTable, map: &ColumnMap, out: &mut Vec<Violation>) -> Vec<(usize, &'a [String])> {
    let mut v = Vec::with_capacity(table.rows.len());
    for (i, cells) in table.rows.iter().enumerate() {
        if cells.len() != map.headers.len() {
            out.push(Violation { row: i + 1, column: "*".into(), rule: "field count".into() });
            continue;
        }
        v.push((i + 1, cells.as_slice()));
    }
    v
}

pub(super) fn parse_disengagement(t: &RawTable, o: &ValidateOptions, out: &mut Vec<Violation>) -> Result<Vec<DisengagementRecord>, DataError> {
    let map = ColumnMap::resolve(&t.headers, DISENGAGEMENT, &[])?;
    let mut recs = Vec::new();
    for (n, cells) in rows(t, &map, out) {
        let mut r = Row { n, cells, map: &map, out };
        let manufacture = r.nonempty("manufacture");
        let vin = r.nonempty("vin");
        let date = r.date("date");
        let month = r.text("month");
        let month_id = r.int("month_id", 1, 24);
        if let (Some(d), Some(id)) = (date, month_id) {
            check_date_month(&mut r, d, &month, id as u32, o.calendar_origin);
        }
        if let (Some(manufacture), Some(vin), Some(date), Some(id)) = (manufacture, vin, date, month_id) {
            recs.push(DisengagementRecord { manufacture, vin, date, month, month_id: id as u32, extra: map.extras_of(cells) });
        }
    }
    Ok(recs)
}

pub(super) fn parse_collision(t: &RawTable, o: &ValidateOptions, out: &mut Vec<Violation>) -> Result<Vec<CollisionRecord>, DataError> {
    let map = ColumnMap::resolve(&t.headers, COLLISION, &[])?;
    let mut recs = Vec::new();
    let mut by_date: HashMap<(String, NaiveDate), (u32, usize)> = HashMap::new();
    let mut by_id: HashMap<(String, u32), (NaiveDate, usize)> = HashMap::new();
    for (n, cells) in rows(t, &map, out) {
        let mut r = Row { n, cells, map: &map, out };
        let manufacture = r.nonempty("manufacture");
        let vin = Some(r.text("vin")).filter(|v| !v.is_empty());
        let date = r.date("date");
        let month = r.text("month");
        let month_id = r.int("month_id", 1, 24);
        let event_id = r.int("event_id", 1, u32::MAX as i64);
        if let (Some(d), Some(id)) = (date, month_id) {
            check_date_month(&mut r, d, &month, id as u32, o.calendar_origin);
        }
        let (Some(manufacture), Some(date), Some(month_id), Some(event_id)) = (manufacture, date, month_id, event_id) else {
            continue;
        };
        let event_id = event_id as u32;
        let clash_date = by_date.get(&(manufacture.clone(), date)).is_some_and(|&(e, _)| e != event_id);
        let clash_id = by_id.get(&(manufacture.clone(), event_id)).is_some_and(|&(d, _)| d != date);
        if clash_date || clash_id {
            r.flag("event_id", "event id");
        }
        by_date.entry((manufacture.clone(), date)).or_insert((event_id, n));
        by_id.entry((manufacture.clone(), event_id)).or_insert((date, n));
        recs.push(CollisionRecord { manufacture, vin, date, month, month_id: month_id as u32, event_id, extra: map.extras_of(cells) });
    }
    Ok(recs)
}

fn is_month_header(h: &str) -> bool {
    let n = normalize_header(h);
    if n.len() == 6 && n.bytes().all(|b| b.is_ascii_digit()) {
        return true;
    }
    for prefix in ["month", "mon", "m"] {
        if let Some(rest) = n.strip_prefix(prefix) {
            if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                return true;
            }
        }
    }
    let alpha: String = n.chars().take_while(char::is_ascii_alphabetic).collect();
    let digits = &n[alpha.len()..];
    month_from_name(&alpha).is_some() && (digits.len() == 2 || digits.len() == 4) && digits.bytes().all(|b| b.is_ascii_digit())
}

pub(super) fn parse_mileage(t: &RawTable, out: &mut Vec<Violation>) -> Result<MileageTable, DataError> {
    let base = ColumnMap::resolve(&t.headers, MILEAGE, &[])?;
    let id_cols: Vec<usize> = base.index.iter().filter_map(|(_, i)| *i).collect();
    let monthly: Vec<usize> = (0..t.headers.len()).filter(|i| !id_cols.contains(i) && is_month_header(&t.headers[*i])).collect();
    if monthly.len() != 24 {
        return Err(DataError::MalformedHeader(format!("mileage table needs 24 monthly columns, found {}", monthly.len())));
    }
    let map = ColumnMap::resolve(&t.headers, MILEAGE, &monthly)?;
    let mut table = MileageTable { month_headers: monthly.iter().map(|&i| t.headers[i].clone()).collect(), rows: Vec::new() };
    for (n, cells) in rows(t, &map, out) {
        let mut r = Row { n, cells, map: &map, out };
        let manufacture = r.nonempty("manufacture");
        let vin = r.nonempty("vin");
        let mut miles = Vec::with_capacity(24);
        for &i in &monthly {
            let s = &cells[i];
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() && v >= 0.0 => miles.push(v),
                Ok(_) => r.flag_columns(t.headers[i].clone(), "range"),
                Err(_) => r.flag_columns(t.headers[i].clone(), if s.is_empty() { "missing" } else { "type" }),
            }
        }
        if let (Some(manufacture), Some(vin), true) = (manufacture, vin, miles.len() == 24) {
            table.rows.push(MileageRow { manufacture, vin, monthly_miles: miles, extra: map.extras_of(cells) });
        }
    }
    Ok(table)
}

pub(super) fn parse_months(t: &RawTable, out: &mut Vec<Violation>) -> Result<MonthTable, DataError> {
    let map = ColumnMap::resolve(&t.headers, MONTHS, &[])?;
    let mut table = MonthTable { rows: Vec::new() };
    for (n, cells) in rows(t, &map, out) {
        let mut r = Row { n, cells, map: &map, out };
        let id = r.int("month_id", 1, 1200);
        let start = r.date("start_date");
        let end = r.date("end_date");
        let days = r.int("n_days", 28, 31);
        if let (Some(s), Some(e), Some(d)) = (start, end, days) {
            if (e - s).num_days() + 1 != d {
                r.flag("n_days", "n days");
            }
        }
        if let Some(id) = id {
            if id as usize != table.rows.len() + 1 {
                r.flag("month_id", "month sequence");
            }
        }
        if let (Some(id), Some(s), Some(e), Some(d)) = (id, start, end, days) {
            table.rows.push(MonthRow { month_id: id as u32, start_date: s, end_date: e, n_days: d as u32, extra: map.extras_of(cells) });
        }
    }
    Ok(table)
}

pub(super) fn parse_module_errors(t: &RawTable, out: &mut Vec<Violation>) -> Result<Vec<ModuleErrorRecord>, DataError> {
    let map = ColumnMap::resolve(&t.headers, MODULE_ERRORS, &[])?;
    let mut recs = Vec::new();
    let inf = f64::INFINITY;
    for (n, cells) in rows(t, &map, out) {
        let mut r = Row { n, cells, map: &map, out };
        let scenario_id = r.int("scenario_id", i64::MIN, i64::MAX);
        let weather = r.nonempty("weather");
        let ws = r.real("window_start", -inf, inf);
        let we = r.real("window_end", -inf, inf);
        let a2 = r.real("ei_2d_start", -inf, inf);
        let b2 = r.real("ei_2d_end", -inf, inf);
        let p2 = r.real("ei_prob_2d", 0.0, 1.0);
        let a3 = r.real("ei_3d_start", -inf, inf);
        let b3 = r.real("ei_3d_end", -inf, inf);
        let p3 = r.real("ei_prob_3d", 0.0, 1.0);
        let ts = r.real("timestamp", -inf, inf);
        let e2 = r.binary("err_2d");
        let e3 = r.binary("err_3d");
        let el = r.binary("err_loc");
        let (Some(ws), Some(we)) = (ws, we) else { continue };
        if ws >= we {
            let col = format!("{}+{}", map.header_of("window_start"), map.header_of("window_end"));
            r.flag_columns(col, "window order");
            continue;
        }
        if let Some(ts) = ts {
            if ts < ws || ts > we {
                r.flag("timestamp", "timestamp window");
            }
        }
        for (a, b, ka, kb) in [(a2, b2, "ei_2d_start", "ei_2d_end"), (a3, b3, "ei_3d_start", "ei_3d_end")] {
            if let (Some(a), Some(b)) = (a, b) {
                if a < ws || b > we || a > b {
                    let col = format!("{}+{}", map.header_of(ka), map.header_of(kb));
                    r.flag_columns(col, "ei window");
                }
            }
        }
        if let (Some(scenario_id), Some(weather), Some(a2), Some(b2), Some(p2), Some(a3), Some(b3), Some(p3), Some(ts), Some(e2), Some(e3), Some(el)) =
            (scenario_id, weather, a2, b2, p2, a3, b3, p3, ts, e2, e3, el)
        {
            recs.push(ModuleErrorRecord {
                scenario_id,
                weather,
                window: [ws, we],
                ei_2d: [a2, b2],
                ei_prob_2d: p2,
                ei_3d: [a3, b3],
                ei_prob_3d: p3,
                timestamp: ts,
                err_2d: e2,
                err_3d: e3,
                err_loc: el,
                extra: map.extras_of(cells),
            });
        }
    }
    Ok(recs)
}

pub(super) fn parse_mixture(t: &RawTable, out: &mut Vec<Violation>) -> Result<Vec<MixtureRecord>, DataError> {
    let map = ColumnMap::resolve(&t.headers, MIXTURE, &[])?;
    let mut recs = Vec::new();
    for (n, cells) in rows(t, &map, out) {
        let mut r = Row { n, cells, map: &map, out };
        let x = ["x1", "x2", "x3"].map(|k| r.real(k, 0.0, 1.0));
        let z = ["z1", "z2"].map(|k| r.binary(k));
        let c = ["c1", "c2", "c3"].map(|k| r.binary(k));
        let y1 = r.real("y1", 0.0, 1.0);
        let y2 = r.real("y2", f64::NEG_INFINITY, f64::INFINITY);
        if let [Some(a), Some(b), Some(d)] = x {
            if (a + b + d - 1.0).abs() > 1e-9 {
                let col = ["x1", "x2", "x3"].map(|k| map.header_of(k)).join("+");
                r.flag_columns(col, "simplex sum");
            }
        }
        if let [Some(a), Some(b), Some(d)] = c {
            if [a, b, d].iter().filter(|v| **v).count() != 1 {
                let col = ["c1", "c2", "c3"].map(|k| map.header_of(k)).join("+");
                r.flag_columns(col, "scenario one-hot");
            }
        }
        if let ([Some(x1), Some(x2), Some(x3)], [Some(z1), Some(z2)], [Some(c1), Some(c2), Some(c3)], Some(y1), Some(y2)) = (x, z, c, y1, y2) {
            recs.push(MixtureRecord { x: [x1, x2, x3], z: [z1, z2], c: [c1, c2, c3], y1, y2, extra: map.extras_of(cells) });
        }
    }
    Ok(recs)
}

const ACCURACY_KEYS: [&str; 3] = ["train_acc", "val_acc", "test_acc"];

pub(super) fn parse_adversarial(t: &RawTable, o: &ValidateOptions, out: &mut Vec<Violation>) -> Result<AdversarialTable, DataError> {
    let map = ColumnMap::resolve(&t.headers, ADVERSARIAL, &[])?;
    let scale = o.accuracy_scale.unwrap_or_else(|| infer_scale(t, &map));
    let acc_hi = match scale {
        AccuracyScale::Proportion => 1.0,
        AccuracyScale::Percent => 100.0,
    };
    let inf = f64::INFINITY;
    let mut records = Vec::new();
    for (n, cells) in rows(t, &map, out) {
        let mut r = Row { n, cells, map: &map, out };
        let scenario = r.int("scenario", i64::MIN, i64::MAX);
        let eps_range = match parse_interval(r.raw("epsilon_range")) {
            Some(iv) if iv[0] >= 0.0 && iv[1] <= 1.0 => Some(iv),
            Some(_) => {
                r.flag("epsilon_range", "range");
                None
            }
            None => {
                r.flag("epsilon_range", "type");
                None
            }
        };
        let step = r.int("t", 0, u32::MAX as i64);
        let fc = r.int("fc", 0, i64::MAX);
        let alpha = r.real("alpha", f64::MIN_POSITIVE, inf);
        let f1 = r.real("f1", 0.0, 1.0);
        let epsilon = r.real("epsilon", 0.0, 1.0);
        let fgsm = r.real("fgsm_pct", 0.0, 100.0);
        let pgd = r.real("pgd_pct", 0.0, 100.0);
        let train_acc = r.real("train_acc", 0.0, acc_hi);
        let train_loss = r.real("train_loss", -inf, inf);
        let val_acc = r.real("val_acc", 0.0, acc_hi);
        let val_loss = r.real("val_loss", -inf, inf);
        let test_acc = r.real("test_acc", 0.0, acc_hi);
        let test_loss = r.real("test_loss", -inf, inf);
        let memory = r.real("memory", 0.0, inf);
        if let (Some(a), Some(b)) = (fgsm, pgd) {
            if (a + b - 100.0).abs() > 1e-6 {
                let col = format!("{}+{}", map.header_of("fgsm_pct"), map.header_of("pgd_pct"));
                r.flag_columns(col, "attack mix sum");
            }
        }
        let vals = (scenario, eps_range, step, fc, alpha, f1, epsilon, fgsm, pgd, train_acc, train_loss, val_acc, val_loss);
        if let (Some(scenario), Some(eps), Some(step), Some(fc), Some(alpha), Some(f1), Some(epsilon), Some(fgsm), Some(pgd), Some(tra), Some(trl), Some(va), Some(vl)) = vals {
            if let (Some(ta), Some(tl), Some(mem)) = (test_acc, test_loss, memory) {
                records.push(AdversarialCountRecord {
                    scenario,
                    epsilon_range: eps,
                    t: step as u32,
                    fc: fc as u64,
                    alpha,
                    f1,
                    epsilon,
                    fgsm_pct: fgsm,
                    pgd_pct: pgd,
                    train_acc: tra,
                    train_loss: trl,
                    val_acc: va,
                    val_loss: vl,
                    test_acc: ta,
                    test_loss: tl,
                    memory: mem,
                    extra: map.extras_of(cells),
                });
            }
        }
    }
    Ok(AdversarialTable { accuracy_scale: scale, records })
}

/// Proportions unless some accuracy value exceeds 1.
fn infer_scale(t: &RawTable, map: &ColumnMap) -> AccuracyScale {
    let above_one = ACCURACY_KEYS.iter().filter_map(|k| map.position(k)).any(|i| {
        t.rows.iter().any(|row| row.get(i).and_then(|s| s.parse::<f64>().ok()).is_some_and(|v| v > 1.0))
    });
    if above_one {
        AccuracyScale::Percent
    } else {
        AccuracyScale::Proportion
    }
}

pub(super) fn parse_incidents(t: &RawTable, out: &mut Vec<Violation>) -> Result<Vec<IncidentRecord>, DataError> {
    let map = ColumnMap::resolve(&t.headers, INCIDENTS, &[])?;
    let mut seen: BTreeMap<i64, usize> = BTreeMap::new();
    let mut recs = Vec::new();
    for (n, cells) in rows(t, &map, out) {
        let mut r = Row { n, cells, map: &map, out };
        let no = r.int("incident_no", i64::MIN, i64::MAX);
        let casuality = r.binary("casuality");
        let injured = r.binary("injured");
        if let Some(no) = no {
            if seen.insert(no, n).is_some() {
                r.flag("incident_no", "unique incident");
            }
        }
        if let (Some(incident_no), Some(casuality), Some(injured)) = (no, casuality, injured) {
            recs.push(IncidentRecord {
                incident_no,
                company: r.text("company"),
                sector: r.text("sector"),
                system: r.text("system"),
                algorithm: r.text("algorithm"),
                cause: r.text("cause"),
                description: r.text("description"),
                casuality,
                injured,
                comment: r.text("comment"),
                extra: map.extras_of(cells),
            });
        }
    }
    Ok(recs)
}

pub(super) struct CsvOut {
    w: csv::Writer<Vec<u8>>,
}

impl CsvOut {
    pub fn new(columns: &[Column], extra_headers: &[String]) -> Self {
        Self::with_headers(columns.iter().map(|c| c.header.to_string()).chain(extra_headers.iter().cloned()).collect())
    }

    pub fn with_headers(headers: Vec<String>) -> Self {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&headers).expect("in-memory write");
        Self { w }
    }

    pub fn row(&mut self, fields: Vec<String>, extra: &Extra) {
        let all = fields.into_iter().chain(extra.iter().map(|(_, v)| v.clone()));
        self.w.write_record(all.collect::<Vec<_>>()).expect("in-memory write");
    }

    pub fn finish(self) -> String {
        String::from_utf8(self.w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }
}

fn extra_headers(extra: Option<&Extra>) -> Vec<String> {
    extra.map(|e| e.iter().map(|(h, _)| h.clone()).collect()).unwrap_or_default()
}

fn b(v: bool) -> String {
    if v { "1" } else { "0" }.into()
}

pub(super) fn write_disengagement(recs: &[DisengagementRecord]) -> String {
    let mut w = CsvOut::new(DISENGAGEMENT, &extra_headers(recs.first().map(|r| &r.extra)));
    for r in recs {
        w.row(vec![r.manufacture.clone(), r.vin.clone(), r.date.to_string(), r.month.clone(), r.month_id.to_string()], &r.extra);
    }
    w.finish()
}

pub(super) fn write_collision(recs: &[CollisionRecord]) -> String {
    let mut w = CsvOut::new(COLLISION, &extra_headers(recs.first().map(|r| &r.extra)));
    for r in recs {
        let f = vec![
            r.manufacture.clone(),
            r.vin.clone().unwrap_or_default(),
            r.date.to_string(),
            r.month.clone(),
            r.month_id.to_string(),
            r.event_id.to_string(),
        ];
        w.row(f, &r.extra);
    }
    w.finish()
}

pub(super) fn write_mileage(t: &MileageTable) -> String {
    let headers = MILEAGE
        .iter()
        .map(|c| c.header.to_string())
        .chain(t.month_headers.iter().cloned())
        .chain(extra_headers(t.rows.first().map(|r| &r.extra)))
        .collect();
    let mut w = CsvOut::with_headers(headers);
    for r in &t.rows {
        let f = [r.manufacture.clone(), r.vin.clone()].into_iter().chain(r.monthly_miles.iter().map(|&v| fmt_num(v))).collect();
        w.row(f, &r.extra);
    }
    w.finish()
}

pub(super) fn write_months(t: &MonthTable) -> String {
    let mut w = CsvOut::new(MONTHS, &extra_headers(t.rows.first().map(|r| &r.extra)));
    for r in &t.rows {
        w.row(vec![r.month_id.to_string(), r.start_date.to_string(), r.end_date.to_string(), r.n_days.to_string()], &r.extra);
    }
    w.finish()
}

pub(super) fn write_module_errors(recs: &[ModuleErrorRecord]) -> String {
    let mut w = CsvOut::new(MODULE_ERRORS, &extra_headers(recs.first().map(|r| &r.extra)));
    for r in recs {
        let f = vec![
            r.scenario_id.to_string(),
            r.weather.clone(),
            fmt_num(r.window[0]),
            fmt_num(r.window[1]),
            fmt_num(r.ei_2d[0]),
            fmt_num(r.ei_2d[1]),
            fmt_num(r.ei_prob_2d),
            fmt_num(r.ei_3d[0]),
            fmt_num(r.ei_3d[1]),
            fmt_num(r.ei_prob_3d),
            fmt_num(r.timestamp),
            b(r.err_2d),
            b(r.err_3d),
            b(r.err_loc),
        ];
        w.row(f, &r.extra);
    }
    w.finish()
}

pub(super) fn write_mixture(recs: &[MixtureRecord]) -> String {
    let mut w = CsvOut::new(MIXTURE, &extra_headers(recs.first().map(|r| &r.extra)));
    for r in recs {
        let mut f: Vec<String> = r.x.iter().map(|&v| fmt_num(v)).collect();
        f.extend(r.z.iter().map(|&v| b(v)));
        f.extend(r.c.iter().map(|&v| b(v)));
        f.push(fmt_num(r.y1));
        f.push(fmt_num(r.y2));
        w.row(f, &r.extra);
    }
    w.finish()
}

pub(super) fn write_adversarial(t: &AdversarialTable) -> String {
    let mut w = CsvOut::new(ADVERSARIAL, &extra_headers(t.records.first().map(|r| &r.extra)));
    for r in &t.records {
        let f = vec![
            r.scenario.to_string(),
            write_interval(r.epsilon_range),
            r.t.to_string(),
            r.fc.to_string(),
            fmt_num(r.alpha),
            fmt_num(r.f1),
            fmt_num(r.epsilon),
            fmt_num(r.fgsm_pct),
            fmt_num(r.pgd_pct),
            fmt_num(r.train_acc),
            fmt_num(r.train_loss),
            fmt_num(r.val_acc),
            fmt_num(r.val_loss),
            fmt_num(r.test_acc),
            fmt_num(r.test_loss),
            fmt_num(r.memory),
        ];
        w.row(f, &r.extra);
    }
    w.finish()
}

pub(super) fn write_incidents(recs: &[IncidentRecord]) -> String {
    let mut w = CsvOut::new(INCIDENTS, &extra_headers(recs.first().map(|r| &r.extra)));
    for r in recs {
        let f = vec![
            r.incident_no.to_string(),
            r.company.clone(),
            r.sector.clone(),
            r.system.clone(),
            r.algorithm.clone(),
            r.cause.clone(),
            r.description.clone(),
            b(r.casuality),
            b(r.injured),
            r.comment.clone(),
        ];
        w.row(f, &r.extra);
    }
    w.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intervals() {
        assert_eq!(parse_interval("[0, 0.1]"), Some([0.0, 0.1]));
        assert_eq!(parse_interval("0.2-0.4"), Some([0.2, 0.4]));
        assert_eq!(parse_interval("(0.1;0.3)"), Some([0.1, 0.3]));
        assert_eq!(parse_interval("0.5-0.1"), None);
        assert_eq!(parse_interval("x"), None);
    }

    #[test]
    fn month_text_forms() {
        assert_eq!(parse_month_text("2018-03"), Some((2018, 3)));
        assert_eq!(parse_month_text("Mar-18"), Some((2018, 3)));
        assert_eq!(parse_month_text("December 2017"), Some((2017, 12)));
        assert_eq!(parse_month_text("whenever"), None);
    }

    #[test]
    fn month_ids_count_from_origin() {
        let o = NaiveDate::from_ymd_opt(2017, 12, 1).unwrap();
        assert_eq!(month_start(o, 1), Some(o));
        assert_eq!(month_start(o, 24), NaiveDate::from_ymd_opt(2019, 11, 1));
    }

    #[test]
    fn monthly_headers() {
        for h in ["2017-12", "M01", "month_24", "Dec-17", "Jan2018"] {
            assert!(is_month_header(h), "{h}");
        }
        for h in ["VIN", "MonthID", "Notes"] {
            assert!(!is_month_header(h), "{h}");
        }
    }
}
