//! Raw CSV tables and header matching.

use super::DataError;

/// Header plus string cells, exactly as read.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Lowercases and drops everything but ASCII letters and digits, so that
/// `"EI prob in 2D module"`, `"ei_prob_2d"` style variants compare by
/// their alphanumeric content.
pub fn normalize_header(h: &str) -> String {
    h.chars().filter(char::is_ascii_alphanumeric).map(|c| c.to_ascii_lowercase()).collect()
}

pub fn parse_csv(text: &str) -> Result<RawTable, DataError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(DataError::MalformedHeader("empty header row".into()));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok(RawTable { headers, rows })
}

/// A schema column: display name used when writing, plus accepted
/// normalized aliases.
#[derive(Debug, Clone, Copy)]
pub struct Column {
    pub key: &'static str,
    pub header: &'static str,
    pub aliases: &'static [&'static str],
    pub required: bool,
}

impl Column {
    pub const fn req(key: &'static str, header: &'static str, aliases: &'static [&'static str]) -> Self {
        Self { key, header, aliases, required: true }
    }

    pub const fn opt(key: &'static str, header: &'static str, aliases: &'static [&'static str]) -> Self {
        Self { key, header, aliases, required: false }
    }

    fn matches(&self, normalized: &str) -> bool {
        normalize_header(self.header) == normalized || normalize_header(self.key) == normalized || self.aliases.contains(&normalized)
    }
}

/// Resolved positions of schema columns in a concrete header.
#[derive(Debug, Clone)]
pub struct ColumnMap {
    pub headers: Vec<String>,
    pub index: Vec<(&'static str, Option<usize>)>,
    /// Header positions not claimed by any schema column.
    pub extras: Vec<usize>,
}

impl ColumnMap {
    pub fn resolve(headers: &[String], columns: &[Column], claimed: &[usize]) -> Result<Self, DataError> {
        let norm: Vec<String> = headers.iter().map(|h| normalize_header(h)).collect();
        let mut used: Vec<bool> = (0..headers.len()).map(|i| claimed.contains(&i)).collect();
        let mut index = Vec::with_capacity(columns.len());
        let mut missing = Vec::new();
        for c in columns {
            let hits: Vec<usize> = (0..headers.len()).filter(|&i| !claimed.contains(&i) && c.matches(&norm[i])).collect();
            match hits.as_slice() {
                [] => {
                    if c.required {
                        missing.push(c.header);
                    }
                    index.push((c.key, None));
                }
                [i] => {
                    used[*i] = true;
                    index.push((c.key, Some(*i)));
                }
                _ => {
                    return Err(DataError::MalformedHeader(format!("column {:?} matched more than once", c.header)));
                }
            }
        }
        if !missing.is_empty() {
            return Err(DataError::MalformedHeader(format!("missing required columns: {}", missing.join(", "))));
        }
        let extras = (0..headers.len()).filter(|&i| !used[i]).collect();
        Ok(Self { headers: headers.to_vec(), index, extras })
    }

    pub fn position(&self, key: &str) -> Option<usize> {
        self.index.iter().find(|(k, _)| *k == key).and_then(|(_, i)| *i)
    }

    pub fn header_of(&self, key: &str) -> String {
        self.position(key).map_or_else(|| key.to_string(), |i| self.headers[i].clone())
    }

    pub fn extras_of(&self, cells: &[String]) -> Vec<(String, String)> {
        self.extras.iter().map(|&i| (self.headers[i].clone(), cells.get(i).cloned().unwrap_or_default())).collect()
    }
}
