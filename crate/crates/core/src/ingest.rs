//! Coincidence-count tables: parsing (JSON and CSV), validation and
//! per-input normalization into truth tables.
//!
//! JSON layout:
//!
//! ```json
//! { "basis": "ZZ",
//!   "rows": [ { "input": "0z0z", "counts": { "0z0z": 898, "0z1z": 31, "1z0z": 61, "1z1z": 11 } }, ... ],
//!   "metadata": { "device": "..." } }
//! ```
//!
//! CSV layout: a `basis,<ZZ|XX>` line, optional `meta,<key>,<value>` lines,
//! the header `input,out_00,out_01,out_10,out_11` and four data rows.

use serde::de::{Deserializer, MapAccess, Visitor};
use serde::Deserialize;
use serde_json::Value;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::certify::TruthTable;
use crate::error::{Error, Result};
use crate::qubits::Basis;

pub const CSV_HEADER: [&str; 5] = ["input", "out_00", "out_01", "out_10", "out_11"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &std::path::Path) -> Option<Format> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "json" => Some(Format::Json),
            "csv" => Some(Format::Csv),
            _ => None,
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::Malformed(format!("unknown format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    pub basis: Basis,
    /// `rows[input][output]` in basis label order.
    pub rows: [[u64; 4]; 4],
    pub metadata: BTreeMap<String, String>,
}

impl CountTable {
    pub fn row_total(&self, input: usize) -> u64 {
        self.rows[input].iter().sum()
    }

    pub fn to_json(&self) -> String {
        let labels = self.basis.labels();
        let rows: Vec<Value> = (0..4)
            .map(|i| {
                let counts: serde_json::Map<String, Value> =
                    (0..4).map(|o| (labels[o].to_string(), Value::from(self.rows[i][o]))).collect();
                serde_json::json!({ "input": labels[i], "counts": counts })
            })
            .collect();
        let doc = serde_json::json!({
            "basis": self.basis.to_string(),
            "rows": rows,
            "metadata": self.metadata,
        });
        serde_json::to_string_pretty(&doc).expect("count table serialization is infallible")
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
        let write = |w: &mut csv::Writer<Vec<u8>>, rec: Vec<String>| {
            w.write_record(&rec).expect("writing to memory is infallible")
        };
        write(&mut w, vec!["basis".into(), self.basis.to_string()]);
        for (k, v) in &self.metadata {
            write(&mut w, vec!["meta".into(), k.clone(), v.clone()]);
        }
        write(&mut w, CSV_HEADER.iter().map(|s| s.to_string()).collect());
        for (i, row) in self.rows.iter().enumerate() {
            let mut rec = vec![self.basis.label(i).to_string()];
            rec.extend(row.iter().map(|n| n.to_string()));
            write(&mut w, rec);
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv output is UTF-8")
    }

    pub fn serialize(&self, format: Format) -> String {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
        }
    }
}

pub fn parse_count_table(document: &[u8], format: Format) -> Result<CountTable> {
    match format {
        Format::Json => parse_json(document),
        Format::Csv => parse_csv(document),
    }
}

/// Object entries in document order, duplicates kept.
struct Entries(Vec<(String, Value)>);

impl<'de> Deserialize<'de> for Entries {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Entries;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object of counts")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<Entries, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, Value>()? {
                    out.push((k, v));
                }
                Ok(Entries(out))
            }
        }
        d.deserialize_map(V)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonRow {
    input: String,
    counts: Entries,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonDoc {
    basis: String,
    rows: Vec<JsonRow>,
    #[serde(default)]
    metadata: BTreeMap<String, Value>,
}

fn cell_name(basis: Basis, input: usize, output: &str) -> String {
    format!("{} -> {}", basis.label(input), output)
}

fn json_count(cell: String, v: &Value) -> Result<u64> {
    if let Some(n) = v.as_u64() {
        return Ok(n);
    }
    if let Some(n) = v.as_i64() {
        return Err(Error::NegativeCount { cell, count: n });
    }
    if let Some(x) = v.as_f64() {
        if x < 0.0 && x.fract() == 0.0 {
            return Err(Error::NegativeCount { cell, count: x as i64 });
        }
    }
    Err(Error::NonIntegerCount { cell, value: v.to_string() })
}

fn text_count(cell: String, s: &str) -> Result<u64> {
    let s = s.trim();
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    if let Ok(n) = s.parse::<i64>() {
        return Err(Error::NegativeCount { cell, count: n });
    }
    Err(Error::NonIntegerCount { cell, value: s.to_string() })
}

fn input_index(basis: Basis, label: &str) -> Result<usize> {
    basis.index_of(label).ok_or_else(|| Error::UnknownLabel(label.to_string()))
}

/// Accumulates cells and reports the first gap in table order.
struct Cells {
    basis: Basis,
    rows: [[Option<u64>; 4]; 4],
    seen_rows: [bool; 4],
}

impl Cells {
    fn new(basis: Basis) -> Self {
        Cells { basis, rows: [[None; 4]; 4], seen_rows: [false; 4] }
    }

    fn start_row(&mut self, label: &str) -> Result<usize> {
        let i = input_index(self.basis, label)?;
        if std::mem::replace(&mut self.seen_rows[i], true) {
            return Err(Error::DuplicateCell(format!("input row {label}")));
        }
        Ok(i)
    }

    fn set(&mut self, i: usize, o: usize, n: u64) -> Result<()> {
        if self.rows[i][o].replace(n).is_some() {
            return Err(Error::DuplicateCell(cell_name(self.basis, i, self.basis.label(o))));
        }
        Ok(())
    }

    fn finish(self, metadata: BTreeMap<String, String>) -> Result<CountTable> {
        let mut rows = [[0u64; 4]; 4];
        for i in 0..4 {
            for o in 0..4 {
                rows[i][o] = self.rows[i][o].ok_or_else(|| Error::MissingCell {
                    input: self.basis.label(i).to_string(),
                    output: self.basis.label(o).to_string(),
                })?;
            }
        }
        Ok(CountTable { basis: self.basis, rows, metadata })
    }
}

fn parse_json(document: &[u8]) -> Result<CountTable> {
    let doc: JsonDoc =
        serde_json::from_slice(document).map_err(|e| Error::Malformed(format!("count table: {e}")))?;
    let basis: Basis = doc.basis.parse()?;
    let mut cells = Cells::new(basis);
    for row in &doc.rows {
        let i = cells.start_row(&row.input)?;
        for (label, v) in &row.counts.0 {
            let o = basis.index_of(label).ok_or_else(|| Error::UnknownLabel(label.clone()))?;
            cells.set(i, o, json_count(cell_name(basis, i, label), v)?)?;
        }
    }
    let metadata = doc
        .metadata
        .into_iter()
        .map(|(k, v)| {
            let s = match v {
                Value::String(s) => s,
                other => other.to_string(),
            };
            (k, s)
        })
        .collect();
    cells.finish(metadata)
}

fn parse_csv(document: &[u8]) -> Result<CountTable> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(document);
    let mut basis = None;
    let mut metadata = BTreeMap::new();
    let mut cells: Option<Cells> = None;
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Malformed(format!("csv: {e}")))?;
        let first = rec.get(0).unwrap_or("").trim();
        match (&mut cells, first) {
            (_, "") if rec.iter().all(|f| f.trim().is_empty()) => continue,
            (None, "basis") => {
                if rec.len() != 2 || basis.is_some() {
                    return Err(Error::Malformed(format!("csv line {}: bad basis line", line + 1)));
                }
                basis = Some(rec[1].trim().parse::<Basis>()?);
            }
            (None, "meta") => {
                if rec.len() != 3 {
                    return Err(Error::Malformed(format!("csv line {}: meta needs key and value", line + 1)));
                }
                metadata.insert(rec[1].to_string(), rec[2].to_string());
            }
            (None, "input") => {
                let header: Vec<&str> = rec.iter().map(str::trim).collect();
                if header != CSV_HEADER {
                    return Err(Error::Malformed(format!("csv header must be `{}`", CSV_HEADER.join(","))));
                }
                let b = basis.ok_or_else(|| Error::Malformed("csv: basis line must precede the header".into()))?;
                cells = Some(Cells::new(b));
            }
            (None, other) => {
                return Err(Error::Malformed(format!("csv line {}: unexpected `{other}` before header", line + 1)));
            }
            (Some(c), label) => {
                if rec.len() != 5 {
                    return Err(Error::Malformed(format!("csv line {}: expected 5 fields", line + 1)));
                }
                let i = c.start_row(label)?;
                for o in 0..4 {
                    let n = text_count(cell_name(c.basis, i, c.basis.label(o)), &rec[o + 1])?;
                    c.set(i, o, n)?;
                }
            }
        }
    }
    let cells = cells.ok_or_else(|| Error::Malformed("csv: missing header line".into()))?;
    cells.finish(metadata)
}

/// Divides every cell by its input row's total count.
pub fn normalize_to_truth_table(counts: &CountTable) -> Result<TruthTable> {
    let mut probs = [[0.0; 4]; 4];
    for (i, row) in counts.rows.iter().enumerate() {
        let total = counts.row_total(i);
        if total == 0 {
            return Err(Error::ZeroRow(counts.basis.label(i).to_string()));
        }
        probs[i] = row.map(|n| n as f64 / total as f64);
    }
    TruthTable::new(counts.basis, probs, TruthTable::DATA_TOL)
}

/// Shot-noise scale `sqrt(N)` per cell; informational only.
pub fn poisson_sigma(counts: &CountTable) -> [[f64; 4]; 4] {
    counts.rows.map(|r| r.map(|n| (n as f64).sqrt()))
}
