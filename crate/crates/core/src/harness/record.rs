//! Question records and the line-delimited record file.
//!
//! Each line is a JSON object. Features are stored as base64 strings holding
//! 768 little-endian `f64`s:
//!
//! ```text
//! {"id":"q0","genre":"medical","series":"house","gold":2,"subtitle":"...","d":["AAAA...",...],"t":[...]}
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::Embedding;
use crate::{FEATURE_DIM, NUM_CANDIDATES};

/// One multiple-choice question with per-candidate audio (`d`) and text (`t`) features.
#[derive(Clone, Debug, PartialEq)]
pub struct QARecord {
    pub id: String,
    pub d: Vec<Embedding>,
    pub t: Vec<Embedding>,
    pub subtitle: String,
    pub gold: usize,
    pub genre: String,
    pub series: String,
}

impl QARecord {
    pub fn validate(&self) -> Result<()> {
        for (name, feats) in [("d", &self.d), ("t", &self.t)] {
            if feats.len() != NUM_CANDIDATES {
                return Err(Error::Data(format!(
                    "record {}: {} has {} candidates, expected {NUM_CANDIDATES}",
                    self.id,
                    name,
                    feats.len()
                )));
            }
            for (i, f) in feats.iter().enumerate() {
                if f.len() != FEATURE_DIM {
                    return Err(Error::Data(format!(
                        "record {}: {name}[{i}] has length {}, expected {FEATURE_DIM}",
                        self.id,
                        f.len()
                    )));
                }
                if f.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(format!("record {}: {name}[{i}]", self.id)));
                }
            }
        }
        if self.gold >= NUM_CANDIDATES {
            return Err(Error::Data(format!("record {}: gold index {} out of range", self.id, self.gold)));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: String,
    genre: String,
    series: String,
    gold: usize,
    subtitle: String,
    d: Vec<String>,
    t: Vec<String>,
}

pub fn encode_f64s(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

pub fn decode_f64s(text: &str) -> std::result::Result<Vec<f64>, String> {
    let bytes = STANDARD.decode(text).map_err(|e| format!("bad base64: {e}"))?;
    if bytes.len() % 8 != 0 {
        return Err(format!("{} bytes is not a whole number of f64s", bytes.len()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

/// Serializes one record as a single line (no trailing newline).
pub fn record_to_line(r: &QARecord) -> String {
    let raw = RawRecord {
        id: r.id.clone(),
        genre: r.genre.clone(),
        series: r.series.clone(),
        gold: r.gold,
        subtitle: r.subtitle.clone(),
        d: r.d.iter().map(|v| encode_f64s(v)).collect(),
        t: r.t.iter().map(|v| encode_f64s(v)).collect(),
    };
    serde_json::to_string(&raw).expect("record serializes")
}

/// Parses and validates one record line.
pub fn record_from_line(line: &str) -> std::result::Result<QARecord, String> {
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let decode = |blocks: Vec<String>| -> std::result::Result<Vec<Embedding>, String> {
        blocks.iter().map(|b| decode_f64s(b).map(Embedding::from)).collect()
    };
    let r = QARecord {
        d: decode(raw.d)?,
        t: decode(raw.t)?,
        id: raw.id,
        subtitle: raw.subtitle,
        gold: raw.gold,
        genre: raw.genre,
        series: raw.series,
    };
    r.validate().map_err(|e| e.to_string())?;
    Ok(r)
}

/// Reads a record file. Blank lines are skipped; the first malformed record
/// fails the whole file with its 1-based line number.
pub fn load_dataset(path: &Path) -> Result<Vec<QARecord>> {
    let f = File::open(path).map_err(|e| Error::Load {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r = record_from_line(&line).map_err(|reason| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            reason,
        })?;
        out.push(r);
    }
    Ok(out)
}

pub fn save_dataset(path: &Path, records: &[QARecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        writeln!(w, "{}", record_to_line(r))?;
    }
    w.flush()?;
    Ok(())
}
