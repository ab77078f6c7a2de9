//! Pool files: CSV with header `instance_id,seed,metric[,o_0,...,o_{T-1}]`.
//!
//! Lines starting with `#` are comments. An empty `seed` cell means no seed
//! was recorded. An empty `metric` cell is derived from the outcome columns.
//! Metrics are written in shortest round-trip form, so a written pool reloads
//! bit-identically.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use pmt_core::data::{MetricRange, PoolMeta, IDENTITY};
use pmt_core::{InstancePool, InstanceRecord, MetricKind, Orientation};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// How to read the metric column and label a pool.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PoolSchema {
    pub metric_kind: Option<MetricKind>,
    pub orientation: Option<Orientation>,
    pub range: Option<MetricRange>,
    /// Defaults to the file stem.
    pub label: Option<String>,
    /// Defaults to the part of the file stem before the last `_`.
    pub mutation_operator: Option<String>,
    pub magnitude: Option<String>,
}

impl PoolSchema {
    pub fn accuracy() -> Self {
        Self { metric_kind: Some(MetricKind::Accuracy), ..Self::default() }
    }

    fn meta(&self, stem: &str) -> PoolMeta {
        let kind = self.metric_kind.unwrap_or(MetricKind::Accuracy);
        let (operator, magnitude) = parse_stem(stem);
        let mut meta = PoolMeta::new(
            self.label.clone().unwrap_or_else(|| stem.to_string()),
            self.mutation_operator.clone().unwrap_or(operator),
            kind,
        );
        meta.magnitude = self.magnitude.clone().or(magnitude);
        if let Some(o) = self.orientation {
            meta.orientation = o;
        }
        if let Some(r) = self.range {
            meta.range = r;
        }
        meta
    }
}

/// Splits a `<mutation>_<magnitude>` file stem. `identity` and `healthy`
/// stems name the unmutated model.
pub fn parse_stem(stem: &str) -> (String, Option<String>) {
    let (op, mag) = match stem.rsplit_once('_') {
        Some((op, mag)) if !op.is_empty() && !mag.is_empty() => (op, Some(mag.to_string())),
        _ => (stem, None),
    };
    if op.eq_ignore_ascii_case(IDENTITY) || op.eq_ignore_ascii_case("healthy") {
        (IDENTITY.to_string(), None)
    } else {
        (op.to_string(), mag)
    }
}

fn parse_outcome(cell: &str) -> Option<bool> {
    match cell.trim() {
        "1" | "true" => Some(true),
        "0" | "false" => Some(false),
        _ => None,
    }
}

/// Parses pool CSV text; `name` is used as the file stem and in messages.
pub fn read_pool<R: Read>(reader: R, name: &str, schema: &PoolSchema) -> Result<InstancePool> {
    let mut csv = csv::ReaderBuilder::new().comment(Some(b'#')).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let header = csv.headers().map_err(|e| Error::Data(format!("{name}: {e}")))?.clone();
    if header.is_empty() {
        return Err(Error::Data(format!("{name}: empty pool")));
    }
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < 3 || cols[..3] != ["instance_id", "seed", "metric"] {
        return Err(Error::Data(format!("{name}: header must start with instance_id,seed,metric, got {}", cols.join(","))));
    }
    for (i, c) in cols[3..].iter().enumerate() {
        if *c != format!("o_{i}") {
            return Err(Error::Data(format!("{name}: outcome column {} is named '{c}', expected 'o_{i}'", i + 3)));
        }
    }
    let t_len = cols.len() - 3;

    let mut records = Vec::new();
    for (row, result) in csv.records().enumerate() {
        let rec = result.map_err(|e| Error::Data(format!("{name}: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line());
        let at = || format!("{name}: row {row} (line {line})");
        if rec.len() != cols.len() {
            return Err(Error::Data(format!("{}: {} fields, header has {}", at(), rec.len(), cols.len())));
        }
        let id = &rec[0];
        if id.is_empty() {
            return Err(Error::Data(format!("{}: missing instance_id", at())));
        }
        let seed = match &rec[1] {
            "" => None,
            s => Some(s.parse::<u64>().map_err(|_| Error::Data(format!("{}: seed '{s}' is not an unsigned integer", at())))?),
        };
        let outcomes = if t_len > 0 {
            let o = (3..rec.len())
                .map(|j| parse_outcome(&rec[j]).ok_or_else(|| Error::Data(format!("{}: outcome '{}' is not 0 or 1", at(), &rec[j]))))
                .collect::<Result<Vec<bool>>>()?;
            Some(o)
        } else {
            None
        };
        let metric = match (&rec[2], &outcomes) {
            ("", Some(o)) => o.iter().filter(|&&b| b).count() as f64 / o.len() as f64,
            ("", None) => return Err(Error::Data(format!("{}: empty metric and no outcome columns", at()))),
            (s, _) => s.parse::<f64>().map_err(|_| Error::Data(format!("{}: metric '{s}' is not a number", at())))?,
        };
        let mut r = InstanceRecord::new(id, metric);
        r.seed = seed;
        r.outcomes = outcomes;
        records.push(r);
    }
    if records.is_empty() {
        return Err(Error::Data(format!("{name}: empty pool")));
    }
    Ok(InstancePool::new(schema.meta(name), records)?)
}

pub fn load_pool(path: &Path, schema: &PoolSchema) -> Result<InstancePool> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let stem = path.file_stem().map_or_else(|| "pool".into(), |s| s.to_string_lossy().into_owned());
    read_pool(file, &stem, schema)
}

/// Writes the pool body (header and rows) with no comment lines.
pub fn write_pool_to<W: Write>(pool: &InstancePool, out: W) -> std::io::Result<()> {
    let t_len = pool.records()[0].outcomes.as_ref().map_or(0, Vec::len);
    let mut w = csv::WriterBuilder::new().from_writer(out);
    let mut header = vec!["instance_id".to_string(), "seed".into(), "metric".into()];
    header.extend((0..t_len).map(|i| format!("o_{i}")));
    w.write_record(&header)?;
    for r in pool.records() {
        let mut row = vec![r.instance_id.clone(), r.seed.map_or_else(String::new, |s| s.to_string()), format!("{}", r.metric)];
        if let Some(o) = &r.outcomes {
            row.extend(o.iter().map(|&b| if b { "1" } else { "0" }.to_string()));
        }
        w.write_record(&row)?;
    }
    w.flush()
}

/// Writes a pool file, preceded by `header` as a `#` comment line.
pub fn write_pool(pool: &InstancePool, path: &Path, header: Option<&str>) -> Result<()> {
    let mut buf = Vec::new();
    if let Some(h) = header {
        writeln!(buf, "# {h}").expect("write to memory");
    }
    write_pool_to(pool, &mut buf).expect("write to memory");
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Row count and SHA-256 of the canonical serialisation of a pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolFingerprint {
    pub label: String,
    pub mutation_operator: String,
    pub magnitude: Option<String>,
    pub rows: usize,
    pub sha256: String,
}

pub fn fingerprint(pool: &InstancePool) -> PoolFingerprint {
    let mut buf = Vec::new();
    write_pool_to(pool, &mut buf).expect("write to memory");
    let meta = pool.meta();
    PoolFingerprint {
        label: meta.label.clone(),
        mutation_operator: meta.mutation_operator.clone(),
        magnitude: meta.magnitude.clone(),
        rows: pool.len(),
        sha256: hex(&Sha256::digest(&buf)),
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
