//! Report and export formats.
//!
//! Every CSV written here starts with one `#` line carrying the command, the
//! master seed and the run configuration as compact JSON.

use std::fmt::Write as _;
use std::path::Path;

use pmt_core::decision::Diagnostics;
use pmt_core::flakiness::FlakinessTable;
use pmt_core::posterior::Density;
use pmt_core::{
    credible_interval, map_estimate, mmse, BaggedPosterior, BetaDist, CredibleInterval, EffectClass, EffectReport,
    IntervalKind, MutationTest, RunConfig, TradeoffReport, Verdict,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::{hex, PoolFingerprint};

/// Points of the exported density grid over `[0, 1]`.
pub const GRID_POINTS: usize = 1001;

pub fn header_line(command: &str, master_seed: u64, cfg: &RunConfig) -> String {
    let cfg_json = serde_json::to_string(cfg).expect("config serialises");
    format!("pmt {command} master_seed={master_seed} config={cfg_json}")
}

pub(crate) fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Density of `p` at `points` evenly spaced abscissae from 0 to 1.
pub fn density_grid(p: &BaggedPosterior, points: usize) -> Vec<(f64, f64)> {
    let last = (points - 1) as f64;
    (0..points).map(|i| i as f64 / last).map(|x| (x, p.pdf(x))).collect()
}

pub fn density_csv(header: &str, grid: &[(f64, f64)]) -> String {
    let mut s = format!("# {header}\nx,density\n");
    for (x, d) in grid {
        writeln!(s, "{x},{d}").expect("write to string");
    }
    s
}

/// Summary block written next to a density grid; holds enough to rebuild it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub healthy: String,
    pub mutant: String,
    pub master_seed: u64,
    pub config: RunConfig,
    pub mmse: f64,
    pub map: f64,
    pub variance: f64,
    pub interval: CredibleInterval,
    pub components: Vec<BetaDist>,
}

impl PosteriorSummary {
    pub fn new(p: &BaggedPosterior, healthy: &str, mutant: &str, cfg: &RunConfig, kind: IntervalKind) -> Result<Self> {
        Ok(Self {
            healthy: healthy.into(),
            mutant: mutant.into(),
            master_seed: cfg.master_seed,
            config: cfg.clone(),
            mmse: mmse(p),
            map: map_estimate(p),
            variance: p.variance(),
            interval: credible_interval(p, cfg.ci_level, kind)?,
            components: p.components().to_vec(),
        })
    }

    pub fn posterior(&self) -> Result<BaggedPosterior> {
        Ok(BaggedPosterior::from_components(self.components.clone())?)
    }
}

/// A ratio that may be infinite; JSON has no infinity, so it becomes `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RatioValue {
    Number(f64),
    Text(String),
}

impl From<f64> for RatioValue {
    fn from(r: f64) -> Self {
        if r.is_finite() {
            RatioValue::Number(r)
        } else {
            RatioValue::Text(format!("{r}"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectEntry {
    pub raw_ratio: RatioValue,
    pub display_ratio: String,
    pub class: EffectClass,
    pub mark: String,
    pub verdict: Verdict,
    pub h_to_not_killed: f64,
    pub h_to_killed: f64,
    pub diagnostics: Option<Diagnostics>,
}

impl From<&EffectReport> for EffectEntry {
    fn from(r: &EffectReport) -> Self {
        Self {
            raw_ratio: r.ratio.into(),
            display_ratio: r.display_ratio(),
            class: r.effect_class,
            mark: r.effect_class.mark().into(),
            verdict: r.verdict,
            h_to_not_killed: r.h_to_not_killed,
            h_to_killed: r.h_to_killed,
            diagnostics: r.diagnostics,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationEntry {
    pub pool: PoolFingerprint,
    /// Compared as two disjoint halves of the healthy pool.
    pub identity_protocol: bool,
    pub mmse: f64,
    pub map: f64,
    pub variance: f64,
    pub interval: CredibleInterval,
    pub effect: EffectEntry,
    /// Density grid and summary file names, relative to the output directory.
    pub posterior_csv: String,
    pub posterior_json: String,
}

/// Everything reproducible from (pools, config, seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunPayload {
    pub master_seed: u64,
    pub config: RunConfig,
    pub test: MutationTest,
    pub interval_kind: IntervalKind,
    pub healthy: PoolFingerprint,
    pub mutations: Vec<MutationEntry>,
    /// Fraction of non-identity mutations with ratio above `theta`.
    pub mutation_score: Option<f64>,
    pub scored_mutations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool_version: String,
    pub started_unix_ms: u128,
    pub elapsed_ms: u128,
    pub seed_randomized: bool,
    /// SHA-256 of the serialised payload.
    pub payload_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub payload: RunPayload,
    pub metadata: RunMetadata,
}

pub fn payload_json(payload: &RunPayload) -> String {
    serde_json::to_string_pretty(payload).expect("payload serialises")
}

pub fn payload_sha256(payload: &RunPayload) -> String {
    hex(&Sha256::digest(payload_json(payload).as_bytes()))
}

pub fn tradeoff_csv(header: &str, report: &TradeoffReport) -> String {
    let mut s = format!(
        "# {header}\nsize,pop_draw,estimate_mu,se_mu,ci_lo_mu,ci_hi_mu,estimate_var,se_var,ci_lo_var,ci_hi_var\n"
    );
    for c in &report.cells {
        let (m, v) = (&c.report.mu, &c.report.var);
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            c.size, c.pop_draw, m.estimate, m.se, m.ci_lo, m.ci_hi, v.estimate, v.se, v.ci_lo, v.ci_hi
        )
        .expect("write to string");
    }
    s
}

pub fn tradeoff_summary_csv(header: &str, report: &TradeoffReport) -> String {
    let mut s = format!(
        "# {header}\nsize,mean_estimate_mu,mean_se_mu,mean_ci_lo_mu,mean_ci_hi_mu,dispersion_mu,\
         mean_estimate_var,mean_se_var,mean_ci_lo_var,mean_ci_hi_var,dispersion_var\n"
    );
    for r in &report.summary {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.size,
            r.mean_estimate_mu,
            r.mean_se_mu,
            r.mean_ci_lo_mu,
            r.mean_ci_hi_mu,
            r.dispersion_mu,
            r.mean_estimate_var,
            r.mean_se_var,
            r.mean_ci_lo_var,
            r.mean_ci_hi_var,
            r.dispersion_var
        )
        .expect("write to string");
    }
    s
}

/// Long format: one row per (pool, partition) plus the per-pool means.
pub fn flakiness_csv(header: &str, table: &FlakinessTable) -> String {
    let mut s = format!("# {header}\nlabel,partition,kill_rate\n");
    for col in std::iter::once(&table.identity).chain(&table.unknowns) {
        for (p, rate) in col.per_partition.iter().enumerate() {
            writeln!(s, "{},{p},{rate}", col.label).expect("write to string");
        }
        writeln!(s, "{},mean,{}", col.label, col.mean_kill_prob).expect("write to string");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinite_ratio_is_text() {
        assert_eq!(serde_json::to_string(&RatioValue::from(f64::INFINITY)).unwrap(), "\"inf\"");
        assert_eq!(serde_json::to_string(&RatioValue::from(1.5)).unwrap(), "1.5");
    }

    #[test]
    fn grid_endpoints() {
        let p = BaggedPosterior::from_components(vec![BetaDist::new(2.0, 2.0).unwrap()]).unwrap();
        let g = density_grid(&p, GRID_POINTS);
        assert_eq!(g.len(), 1001);
        assert_eq!((g[0].0, g[1000].0), (0.0, 1.0));
        assert!((g[500].1 - 1.5).abs() < 1e-12);
    }
}
