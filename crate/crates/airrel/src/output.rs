//! Run directories, manifests, and number formatting for outputs.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Formats with 17 significant digits, dropping trailing zeros, which is
/// enough to reproduce every `f64` exactly.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let e = x.abs().log10().floor() as i32;
    if (-5..17).contains(&e) {
        let s = format!("{:.*}", (16 - e).max(0) as usize, x);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{x:.16e}");
        let (mant, exp) = s.split_once('e').expect("exponent form");
        let mant = if mant.contains('.') { mant.trim_end_matches('0').trim_end_matches('.') } else { mant };
        format!("{mant}e{exp}")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub flags: Vec<String>,
    /// Input path → SHA-256 of its contents.
    pub input_digests: BTreeMap<String, String>,
    /// Output file name → SHA-256 of its contents.
    pub output_digests: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub toolkit_version: String,
    pub started: String,
    pub finished: String,
}

/// An output directory being filled by one command.
#[derive(Debug)]
pub struct RunOutput {
    pub dir: PathBuf,
    manifest: RunManifest,
}

fn stamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl RunOutput {
    /// Creates `dir`, or `./air-out/<UTC timestamp>` when `None`.
    pub fn create(dir: Option<PathBuf>, command: &str, flags: Vec<String>) -> io::Result<Self> {
        let now = Utc::now();
        let dir = match dir {
            Some(d) => d,
            None => {
                let base = PathBuf::from("air-out").join(now.format("%Y%m%dT%H%M%S%.3fZ").to_string());
                let mut d = base.clone();
                let mut k = 1;
                while d.exists() {
                    d = PathBuf::from(format!("{}-{k}", base.display()));
                    k += 1;
                }
                d
            }
        };
        fs::create_dir_all(&dir)?;
        let manifest = RunManifest {
            command: command.into(),
            flags,
            input_digests: BTreeMap::new(),
            output_digests: BTreeMap::new(),
            seed: None,
            toolkit_version: env!("CARGO_PKG_VERSION").into(),
            started: stamp(now),
            finished: String::new(),
        };
        Ok(Self { dir, manifest })
    }

    pub fn add_input(&mut self, path: &Path) -> io::Result<()> {
        let digest = sha256_file(path)?;
        self.manifest.input_digests.insert(path.display().to_string(), digest);
        Ok(())
    }

    pub fn add_inputs_in(&mut self, dir: &Path) -> io::Result<()> {
        let mut files: Vec<PathBuf> = fs::read_dir(dir)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_file()).collect();
        files.sort();
        for f in files {
            self.add_input(&f)?;
        }
        Ok(())
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.manifest.seed = Some(seed);
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> io::Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, text)?;
        self.manifest.output_digests.insert(name.into(), sha256_hex(text.as_bytes()));
        Ok(path)
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> io::Result<PathBuf> {
        let text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
        self.write_text(name, &(text + "\n"))
    }

    /// Writes a CSV of numbers with 17 significant digits.
    pub fn write_numeric_csv(&mut self, name: &str, headers: &[&str], rows: &[Vec<f64>]) -> io::Result<PathBuf> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(headers).map_err(io::Error::other)?;
        for r in rows {
            w.write_record(r.iter().map(|&v| fmt_num(v))).map_err(io::Error::other)?;
        }
        let bytes = w.into_inner().map_err(|e| io::Error::other(e.to_string()))?;
        self.write_text(name, &String::from_utf8(bytes).map_err(io::Error::other)?)
    }

    /// Stamps the end time and writes `manifest.json`.
    pub fn finish(mut self) -> io::Result<PathBuf> {
        self.manifest.finished = stamp(Utc::now());
        let text = serde_json::to_string_pretty(&self.manifest).map_err(io::Error::other)? + "\n";
        fs::write(self.dir.join("manifest.json"), text)?;
        Ok(self.dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_roundtrip() {
        for x in [0.1, 1.0 / 3.0, 2.0e-7, 123456789.123, 1e300, -5.5, 730.0, f64::MIN_POSITIVE] {
            let s = fmt_num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(fmt_num(730.0), "730");
    }

    #[test]
    fn digest_of_known_input() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
