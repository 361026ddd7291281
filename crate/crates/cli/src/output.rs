use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// C `%.12g`: 12 significant digits, trailing zeros removed.
pub fn fmt_g12(x: f64) -> String {
    const PRECISION: i32 = 12;
    if x == 0.0 {
        return "0".to_owned();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan" } else if x > 0.0 { "inf" } else { "-inf" }.to_owned();
    }
    let sci = format!("{:.*e}", (PRECISION - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= PRECISION {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        trim_zeros(&format!("{:.*}", (PRECISION - 1 - exp) as usize, x)).to_owned()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes through a temporary sibling and renames, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::io(path, e)
    })
}

/// CSV rows rendered in memory.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Result<Self> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(header)?;
        Ok(Self { writer })
    }

    /// Tab-separated variant for ground-truth tables.
    pub fn tsv(header: &[&str]) -> Result<Self> {
        let mut writer = csv::WriterBuilder::new()
            .delimiter(b'\t')
            .quote_style(csv::QuoteStyle::Never)
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(header)?;
        Ok(Self { writer })
    }

    pub fn row<I, T>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn into_bytes(self) -> Result<Vec<u8>> {
        self.writer
            .into_inner()
            .map_err(|e| CliError::Data(format!("csv buffer: {e}")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub config_hash: String,
    /// Input role to SHA-256.
    pub inputs: BTreeMap<String, String>,
    /// Output file, relative to the output directory, to SHA-256.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub stages: BTreeMap<String, StageRecord>,
}

impl RunManifest {
    pub const FILE: &'static str = "manifest.json";

    /// A missing or unreadable manifest starts empty.
    pub fn load(out_dir: &Path) -> Self {
        fs::read(out_dir.join(Self::FILE))
            .ok()
            .and_then(|bytes| serde_json::from_slice(&bytes).ok())
            .unwrap_or_default()
    }

    pub fn save(&mut self, out_dir: &Path) -> Result<()> {
        self.tool_version = env!("CARGO_PKG_VERSION").to_owned();
        let mut bytes = serde_json::to_vec_pretty(self).map_err(|e| CliError::Data(e.to_string()))?;
        bytes.push(b'\n');
        write_atomic(&out_dir.join(Self::FILE), &bytes)
    }

    /// Whether a stage already ran with these settings and inputs and its outputs are intact.
    pub fn is_current(&self, stage: &str, config_hash: &str, inputs: &BTreeMap<String, String>, out_dir: &Path) -> bool {
        let Some(record) = self.stages.get(stage) else {
            return false;
        };
        record.config_hash == config_hash
            && &record.inputs == inputs
            && !record.outputs.is_empty()
            && record.outputs.iter().all(|(name, digest)| {
                fs::read(out_dir.join(name))
                    .map(|bytes| &sha256_hex(&bytes) == digest)
                    .unwrap_or(false)
            })
    }
}

/// Collects a stage's outputs and writes them atomically.
pub struct StageOutputs {
    out_dir: PathBuf,
    written: BTreeMap<String, String>,
}

impl StageOutputs {
    pub fn new(out_dir: &Path) -> Self {
        Self {
            out_dir: out_dir.to_owned(),
            written: BTreeMap::new(),
        }
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.out_dir.join(name), bytes)?;
        self.written.insert(name.to_owned(), sha256_hex(bytes));
        Ok(())
    }

    pub fn into_digests(self) -> BTreeMap<String, String> {
        self.written
    }
}
