//! The full decision pipeline: bagged posterior, estimates, similarity ratio
//! and verdict for each mutant pool, then the mutation score.

use std::path::Path;
use std::time::Instant;

use pmt_core::data::IDENTITY;
use pmt_core::decision::mutation_score_of_ratios;
use pmt_core::{similarity_ratio, IdealPosteriors, InstancePool, IntervalKind, MutationTest, RunConfig, SplitStream};
use rayon::prelude::*;

use crate::error::{Error, Result, StageExt};
use crate::io::fingerprint;
use crate::parallel;
use crate::report::{
    density_csv, density_grid, header_line, payload_sha256, write_file, EffectEntry, MutationEntry, PosteriorSummary,
    RunMetadata, RunPayload, RunReport, GRID_POINTS,
};

/// A file to be written under the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone)]
pub struct DecideOutput {
    pub payload: RunPayload,
    pub files: Vec<OutputFile>,
}

fn file_safe(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect()
}

/// Runs the pipeline for every mutant pool; mutant `j` draws from
/// `SplitStream::new(cfg.master_seed).split(j)`.
///
/// A mutant pool with the same content as the healthy pool is compared as
/// two disjoint halves of the healthy pool.
pub fn decide(
    healthy: &InstancePool,
    mutants: &[InstancePool],
    test: &MutationTest,
    cfg: &RunConfig,
    kind: IntervalKind,
) -> Result<DecideOutput> {
    if mutants.is_empty() {
        return Err(Error::Usage("decide needs at least one mutant pool".into()));
    }
    test.validate()?;
    cfg.validate()?;
    let healthy_fp = fingerprint(healthy);
    let ideals = IdealPosteriors::new(cfg.trials, cfg.prior_a, cfg.prior_b)?;
    let header = header_line("decide", cfg.master_seed, cfg);
    let root = SplitStream::new(cfg.master_seed);

    let results = mutants
        .par_iter()
        .enumerate()
        .map(|(j, mutant)| {
            let stage = |s: &str| format!("mutation {j} '{}': {s}", mutant.label());
            let fp = fingerprint(mutant);
            let identity_protocol = fp.sha256 == healthy_fp.sha256;
            let halves;
            let (h, m) = if identity_protocol {
                halves = healthy.split_halves().stage(stage("identity split"))?;
                (&halves.0, &halves.1)
            } else {
                (healthy, mutant)
            };
            let stream = root.split(j as u64);
            let bag = parallel::bayes_bag(h, m, test, cfg, &stream).stage(stage("bagging"))?;
            let summary = PosteriorSummary::new(&bag, h.label(), m.label(), cfg, kind).stage(stage("estimates"))?;
            let effect = similarity_ratio(&bag, &ideals).stage(stage("decision"))?;

            let stem = format!("posterior_{j:02}_{}", file_safe(mutant.label()));
            let csv = OutputFile {
                name: format!("{stem}.csv"),
                contents: density_csv(&header, &density_grid(&bag, GRID_POINTS)),
            };
            let json = OutputFile {
                name: format!("{stem}.json"),
                contents: serde_json::to_string_pretty(&summary).expect("summary serialises"),
            };
            let entry = MutationEntry {
                pool: fp,
                identity_protocol,
                mmse: summary.mmse,
                map: summary.map,
                variance: summary.variance,
                interval: summary.interval,
                effect: EffectEntry::from(&effect),
                posterior_csv: csv.name.clone(),
                posterior_json: json.name.clone(),
            };
            Ok((entry, effect.ratio, [csv, json]))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut mutations = Vec::with_capacity(results.len());
    let mut ratios = Vec::new();
    let mut files = Vec::new();
    for (entry, ratio, out) in results {
        if !entry.identity_protocol && entry.pool.mutation_operator != IDENTITY {
            ratios.push(ratio);
        }
        mutations.push(entry);
        files.extend(out);
    }
    let mutation_score =
        if ratios.is_empty() { None } else { Some(mutation_score_of_ratios(&ratios, cfg.theta).stage("mutation score")?) };
    Ok(DecideOutput {
        payload: RunPayload {
            master_seed: cfg.master_seed,
            config: cfg.clone(),
            test: *test,
            interval_kind: kind,
            healthy: healthy_fp,
            mutations,
            mutation_score,
            scored_mutations: ratios.len(),
        },
        files,
    })
}

/// Attaches timing metadata and the payload hash.
pub fn finish_report(payload: RunPayload, started: Instant, started_unix_ms: u128, seed_randomized: bool) -> RunReport {
    let metadata = RunMetadata {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        started_unix_ms,
        elapsed_ms: started.elapsed().as_millis(),
        seed_randomized,
        payload_sha256: payload_sha256(&payload),
    };
    RunReport { payload, metadata }
}

/// Writes `report.json` and the posterior exports. Nothing is written unless
/// the whole pipeline succeeded, since this only runs on a finished report.
pub fn write_decide(out_dir: &Path, report: &RunReport, files: &[OutputFile]) -> Result<()> {
    for f in files {
        write_file(&out_dir.join(&f.name), f.contents.as_bytes())?;
    }
    let json = serde_json::to_string_pretty(report).expect("report serialises");
    write_file(&out_dir.join("report.json"), json.as_bytes())
}

