//! Parsing, validation, and summaries for the reliability dataset schemas.
//!
//! Files are UTF-8 CSV with a mandatory header row and ISO-8601 dates.
//! Header matching ignores case, spaces and punctuation. Columns a schema
//! does not know are kept verbatim and written back on serialization.
//!
//! Violations carry the 1-based data row (the header is row 0) and the
//! column header as written in the file; row-level rules spanning several
//! columns name them joined with `+`.

mod exposure;
mod index;
mod records;
mod summary;
mod table;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use exposure::{
    adversarial_value, day_number, derive_exposure, manufacturer_events, module_logs, srgm_series, vehicle_series, ManufacturerEvents,
};
pub use index::{declared_options, scan_dir, DataRoot, DatasetEntry, DatasetIndex, DATA_ROOT_ENV};
pub use records::{
    month_start, parse_interval, parse_month_text, AdversarialCountRecord, AdversarialTable, CollisionRecord, DisengagementRecord,
    IncidentRecord, MileageRow, MileageTable, MixtureRecord, ModuleErrorRecord, MonthRow, MonthTable,
};
pub use summary::{summarize, terms, Summary};
pub use table::{normalize_header, parse_csv, RawTable};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("unknown schema {0:?}")]
    UnknownSchema(String),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("{} violation(s) in {} data", .0.violations.len(), .0.schema)]
    Violations(ValidationReport),
    #[error("{0}")]
    Mismatch(String),
    #[error(transparent)]
    Model(#[from] airrel_core::Error),
}

/// The registered schemas. The last two are auxiliary tables that travel
/// with the disengagement and collision datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schema {
    Disengagement,
    Collision,
    ModuleErrors,
    Mixture,
    Adversarial,
    Incidents,
    Mileage,
    Months,
}

impl Schema {
    pub const ALL: [Schema; 8] = [
        Schema::Disengagement,
        Schema::Collision,
        Schema::ModuleErrors,
        Schema::Mixture,
        Schema::Adversarial,
        Schema::Incidents,
        Schema::Mileage,
        Schema::Months,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Schema::Disengagement => "disengagement",
            Schema::Collision => "collision",
            Schema::ModuleErrors => "module-errors",
            Schema::Mixture => "mixture",
            Schema::Adversarial => "adversarial",
            Schema::Incidents => "incidents",
            Schema::Mileage => "mileage",
            Schema::Months => "months",
        }
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Schema {
    type Err = DataError;
    fn from_str(s: &str) -> Result<Self, DataError> {
        let n = normalize_header(s);
        Schema::ALL
            .into_iter()
            .find(|k| normalize_header(k.name()) == n)
            .or(match n.as_str() {
                "moduleerror" | "module" | "errors" => Some(Schema::ModuleErrors),
                "incident" => Some(Schema::Incidents),
                "month" => Some(Schema::Months),
                _ => None,
            })
            .ok_or_else(|| DataError::UnknownSchema(s.to_string()))
    }
}

/// Whether accuracy columns hold proportions in `[0, 1]` or percentages
/// in `[0, 100]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccuracyScale {
    Proportion,
    Percent,
}

impl FromStr for AccuracyScale {
    type Err = DataError;
    fn from_str(s: &str) -> Result<Self, DataError> {
        match normalize_header(s).as_str() {
            "proportion" | "fraction" | "unit" => Ok(Self::Proportion),
            "percent" | "percentage" | "pct" => Ok(Self::Percent),
            _ => Err(DataError::Mismatch(format!("unknown accuracy scale {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidateOptions {
    /// Declared accuracy scale; inferred from the values when absent.
    pub accuracy_scale: Option<AccuracyScale>,
    /// Calendar month carrying month id 1.
    pub calendar_origin: NaiveDate,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self { accuracy_scale: None, calendar_origin: NaiveDate::from_ymd_opt(2017, 12, 1).expect("valid date") }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub row: usize,
    pub column: String,
    pub rule: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub schema: Schema,
    pub rows: usize,
    pub violations: Vec<Violation>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub accuracy_scale: Option<AccuracyScale>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "schema", content = "data", rename_all = "kebab-case")]
pub enum Dataset {
    Disengagement(Vec<DisengagementRecord>),
    Collision(Vec<CollisionRecord>),
    ModuleErrors(Vec<ModuleErrorRecord>),
    Mixture(Vec<MixtureRecord>),
    Adversarial(AdversarialTable),
    Incidents(Vec<IncidentRecord>),
    Mileage(MileageTable),
    Months(MonthTable),
}

impl Dataset {
    pub fn schema(&self) -> Schema {
        match self {
            Dataset::Disengagement(_) => Schema::Disengagement,
            Dataset::Collision(_) => Schema::Collision,
            Dataset::ModuleErrors(_) => Schema::ModuleErrors,
            Dataset::Mixture(_) => Schema::Mixture,
            Dataset::Adversarial(_) => Schema::Adversarial,
            Dataset::Incidents(_) => Schema::Incidents,
            Dataset::Mileage(_) => Schema::Mileage,
            Dataset::Months(_) => Schema::Months,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Dataset::Disengagement(v) => v.len(),
            Dataset::Collision(v) => v.len(),
            Dataset::ModuleErrors(v) => v.len(),
            Dataset::Mixture(v) => v.len(),
            Dataset::Adversarial(t) => t.records.len(),
            Dataset::Incidents(v) => v.len(),
            Dataset::Mileage(t) => t.rows.len(),
            Dataset::Months(t) => t.rows.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// CSV text in the schema's canonical header order, extras last.
    pub fn to_csv(&self) -> String {
        match self {
            Dataset::Disengagement(v) => records::write_disengagement(v),
            Dataset::Collision(v) => records::write_collision(v),
            Dataset::ModuleErrors(v) => records::write_module_errors(v),
            Dataset::Mixture(v) => records::write_mixture(v),
            Dataset::Adversarial(t) => records::write_adversarial(t),
            Dataset::Incidents(v) => records::write_incidents(v),
            Dataset::Mileage(t) => records::write_mileage(t),
            Dataset::Months(t) => records::write_months(t),
        }
    }
}

/// Parses `text` as `schema`. Returns the typed dataset only when the
/// report has no violations.
pub fn parse_str(text: &str, schema: Schema, options: &ValidateOptions) -> Result<(Option<Dataset>, ValidationReport), DataError> {
    let table = parse_csv(text)?;
    let mut v = Vec::new();
    let mut scale = None;
    let ds = match schema {
        Schema::Disengagement => Dataset::Disengagement(records::parse_disengagement(&table, options, &mut v)?),
        Schema::Collision => Dataset::Collision(records::parse_collision(&table, options, &mut v)?),
        Schema::ModuleErrors => Dataset::ModuleErrors(records::parse_module_errors(&table, &mut v)?),
        Schema::Mixture => Dataset::Mixture(records::parse_mixture(&table, &mut v)?),
        Schema::Adversarial => {
            let t = records::parse_adversarial(&table, options, &mut v)?;
            scale = Some(t.accuracy_scale);
            Dataset::Adversarial(t)
        }
        Schema::Incidents => Dataset::Incidents(records::parse_incidents(&table, &mut v)?),
        Schema::Mileage => Dataset::Mileage(records::parse_mileage(&table, &mut v)?),
        Schema::Months => Dataset::Months(records::parse_months(&table, &mut v)?),
    };
    v.sort_by(|a, b| a.row.cmp(&b.row));
    let report = ValidationReport { schema, rows: table.rows.len(), violations: v, accuracy_scale: scale };
    Ok((report.is_clean().then_some(ds), report))
}

pub fn read_text(path: &Path) -> Result<String, DataError> {
    std::fs::read_to_string(path).map_err(|source| DataError::Io { path: path.display().to_string(), source })
}

/// Checks a file against a schema without side effects.
pub fn validate(path: &Path, schema: Schema, options: &ValidateOptions) -> Result<ValidationReport, DataError> {
    Ok(parse_str(&read_text(path)?, schema, options)?.1)
}

/// Loads a file as typed records; any violation is an error carrying the
/// full report.
pub fn load(path: &Path, schema: Schema, options: &ValidateOptions) -> Result<Dataset, DataError> {
    match parse_str(&read_text(path)?, schema, options)? {
        (Some(ds), _) => Ok(ds),
        (None, report) => Err(DataError::Violations(report)),
    }
}

/// Picks the schema whose columns are all present in `headers`, preferring
/// the one that leaves the fewest unclaimed columns.
pub fn detect_schema(headers: &[String]) -> Option<Schema> {
    let mut best: Option<(usize, Schema)> = None;
    for s in Schema::ALL {
        let header_only = RawTable { headers: headers.to_vec(), rows: Vec::new() };
        let mut scratch = Vec::new();
        let fits = match s {
            Schema::Disengagement => records::parse_disengagement(&header_only, &ValidateOptions::default(), &mut scratch).is_ok(),
            Schema::Collision => records::parse_collision(&header_only, &ValidateOptions::default(), &mut scratch).is_ok(),
            Schema::ModuleErrors => records::parse_module_errors(&header_only, &mut scratch).is_ok(),
            Schema::Mixture => records::parse_mixture(&header_only, &mut scratch).is_ok(),
            Schema::Adversarial => records::parse_adversarial(&header_only, &ValidateOptions::default(), &mut scratch).is_ok(),
            Schema::Incidents => records::parse_incidents(&header_only, &mut scratch).is_ok(),
            Schema::Mileage => records::parse_mileage(&header_only, &mut scratch).is_ok(),
            Schema::Months => records::parse_months(&header_only, &mut scratch).is_ok(),
        };
        if fits {
            let claimed = schema_width(s, headers);
            let unclaimed = headers.len().saturating_sub(claimed);
            if best.is_none_or(|(u, _)| unclaimed < u) {
                best = Some((unclaimed, s));
            }
        }
    }
    best.map(|(_, s)| s)
}

fn schema_width(s: Schema, headers: &[String]) -> usize {
    let cols = match s {
        Schema::Disengagement => records::DISENGAGEMENT,
        Schema::Collision => records::COLLISION,
        Schema::ModuleErrors => records::MODULE_ERRORS,
        Schema::Mixture => records::MIXTURE,
        Schema::Adversarial => records::ADVERSARIAL,
        Schema::Incidents => records::INCIDENTS,
        Schema::Mileage => return headers.len(),
        Schema::Months => records::MONTHS,
    };
    table::ColumnMap::resolve(headers, cols, &[]).map_or(0, |m| headers.len() - m.extras.len())
}
