use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use pmt::config::{load_config, resolve_seed, LoadedConfig};
use pmt::error::{Error, Result};
use pmt::io::{fingerprint, load_pool, write_pool, PoolSchema};
use pmt::pipeline::{decide, finish_report, write_decide};
use pmt::report::{
    density_csv, density_grid, flakiness_csv, header_line, tradeoff_csv, tradeoff_summary_csv, PosteriorSummary,
    GRID_POINTS,
};
use pmt::{parallel, pmt_core};
use pmt_core::data::PoolMeta;
use pmt_core::decision::{display_ratio, mutation_score_of_ratios};
use pmt_core::flakiness::{flakiness, FlakinessConfig};
use pmt_core::mutation_test::run_test_metrics;
use pmt_core::synth::{gen_population, PopulationSpec};
use pmt_core::{
    run_test, similarity_ratio, IdealPosteriors, InstancePool, IntervalKind, MetricKind, MutationTest, RunConfig,
    SplitStream,
};

#[derive(Parser)]
#[command(name = "pmt", version, about = "Probabilistic mutation testing for stochastic learned models")]
struct Cli {
    /// JSON or TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "pmt-out")]
    out: PathBuf,
    /// Refuse to run without an explicit seed.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Prior {
    Uniform,
    Neutral,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Accuracy,
    Error,
    Angle,
    Custom,
}

#[derive(Clone, Copy, ValueEnum)]
enum TestArg {
    Statistical,
    Pointwise,
}

#[derive(Clone, Copy, ValueEnum)]
enum IntervalArg {
    EqualTailed,
    Hdi,
    MeanCentered,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Trials per Binomial experiment.
    #[arg(long)]
    trials: Option<u32>,
    /// Bootstrap repetitions.
    #[arg(long)]
    bootstraps: Option<u32>,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    n2: Option<usize>,
    #[arg(long, value_enum)]
    prior: Option<Prior>,
    #[arg(long)]
    ci_level: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, value_enum, default_value = "statistical")]
    test_kind: TestArg,
    #[arg(long, value_enum, default_value = "equal-tailed")]
    interval: IntervalArg,
    #[arg(long, value_enum, default_value = "accuracy")]
    metric_kind: Kind,
}

#[derive(Clone, Copy, ValueEnum)]
enum Law {
    TruncatedNormal,
    Bernoulli,
}

#[derive(Subcommand)]
enum Command {
    /// Load and check pool files.
    Validate { pools: Vec<PathBuf>, #[command(flatten)] run: RunArgs },
    /// Generate a synthetic pool file.
    Simulate {
        #[arg(long, value_enum, default_value = "truncated-normal")]
        law: Law,
        #[arg(long, default_value_t = 200)]
        size: usize,
        #[arg(long, default_value = "identity")]
        operator: String,
        #[arg(long)]
        magnitude: Option<String>,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        t_len: Option<usize>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// One mutation test on n1 + n2 sampled instances, or on whole pools with --full.
    Test {
        healthy: PathBuf,
        mutant: PathBuf,
        #[arg(long)]
        full: bool,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Bagged posterior of the kill probability for one mutant pool.
    Posterior { healthy: PathBuf, mutant: PathBuf, #[command(flatten)] run: RunArgs },
    /// Verdicts, effect classes and mutation score for several mutant pools.
    Decide { healthy: PathBuf, mutants: Vec<PathBuf>, #[command(flatten)] run: RunArgs },
    /// Mutation score of similarity ratios (`>2` accepted).
    Score {
        ratios: Vec<String>,
        /// Read ratios from a decide report instead.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Rerun experiment on halves of the healthy pool and the unknown pools.
    Flakiness {
        healthy: PathBuf,
        unknowns: Vec<PathBuf>,
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[arg(long, default_value_t = 100)]
        n_samplings: u32,
        #[arg(long, default_value_t = 50)]
        n_partitions: usize,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Monte-Carlo error against sample size.
    Tradeoff {
        healthy: PathBuf,
        mutant: PathBuf,
        /// Comma list (`25,70,130`) or inclusive range with step (`25..190:15`).
        #[arg(long, default_value = "25,70,130,190")]
        sizes: String,
        #[arg(long, default_value_t = 10)]
        n_pop: usize,
        #[arg(long, default_value_t = 20)]
        n_reps: usize,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Density grid from a posterior summary file.
    ExportPlot {
        summary: PathBuf,
        #[arg(long, default_value_t = GRID_POINTS)]
        grid: usize,
    },
}

impl RunArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        if let Some(v) = self.bootstraps {
            cfg.bootstraps = v;
        }
        if let Some(v) = self.n1 {
            cfg.n1 = v;
        }
        if let Some(v) = self.n2 {
            cfg.n2 = v;
        }
        match self.prior {
            Some(Prior::Uniform) => (cfg.prior_a, cfg.prior_b) = (1.0, 1.0),
            Some(Prior::Neutral) => *cfg = cfg.clone().with_neutral_prior(),
            None => {}
        }
        if let Some(v) = self.ci_level {
            cfg.ci_level = v;
        }
        if let Some(v) = self.theta {
            cfg.theta = v;
        }
    }

    fn test(&self) -> MutationTest {
        match self.test_kind {
            TestArg::Statistical => MutationTest::statistical(),
            TestArg::Pointwise => MutationTest::pointwise(),
        }
    }

    fn interval(&self) -> IntervalKind {
        match self.interval {
            IntervalArg::EqualTailed => IntervalKind::EqualTailed,
            IntervalArg::Hdi => IntervalKind::Hdi,
            IntervalArg::MeanCentered => IntervalKind::MeanCentered,
        }
    }

    fn metric_kind(&self) -> MetricKind {
        match self.metric_kind {
            Kind::Accuracy => MetricKind::Accuracy,
            Kind::Error => MetricKind::Error,
            Kind::Angle => MetricKind::Angle,
            Kind::Custom => MetricKind::Custom,
        }
    }

    fn schema(&self) -> PoolSchema {
        PoolSchema { metric_kind: Some(self.metric_kind()), ..PoolSchema::default() }
    }
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    seed_randomized: bool,
}

fn context(cli: &Cli, run: Option<&RunArgs>) -> Result<Ctx> {
    let loaded = match &cli.config {
        Some(path) => load_config(path)?,
        None => LoadedConfig { config: RunConfig::default(), seed_given: false },
    };
    let (seed, seed_randomized) = resolve_seed(cli.seed, &loaded, cli.strict)?;
    if seed_randomized {
        eprintln!("no seed given; using master_seed={seed}");
    }
    let mut cfg = loaded.config;
    cfg.master_seed = seed;
    if let Some(run) = run {
        run.apply(&mut cfg);
    }
    cfg.validate()?;
    Ok(Ctx { cfg, out: cli.out.clone(), seed_randomized })
}

fn load(path: &Path, run: &RunArgs) -> Result<InstancePool> {
    load_pool(path, &run.schema()).map_err(|e| Error::Stage { stage: "load".into(), source: Box::new(e) })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("value serialises")
}

fn parse_sizes(text: &str) -> Result<Vec<usize>> {
    let bad = || Error::Usage(format!("cannot parse sizes '{text}'"));
    if let Some((range, step)) = text.split_once(':') {
        let (lo, hi) = range.split_once("..").ok_or_else(bad)?;
        let (lo, hi, step): (usize, usize, usize) =
            (lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?, step.trim().parse().map_err(|_| bad())?);
        if step == 0 || lo > hi {
            return Err(bad());
        }
        Ok((lo..=hi).step_by(step).collect())
    } else {
        text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
    }
}

/// Parses a ratio, accepting the display form `>x` as "some value above x".
fn parse_ratio(text: &str, theta: f64) -> Result<f64> {
    let bad = || Error::Usage(format!("cannot parse ratio '{text}'"));
    match text.trim().strip_prefix('>') {
        Some(bound) => {
            let bound: f64 = bound.parse().map_err(|_| bad())?;
            if bound < theta {
                return Err(Error::Usage(format!("ratio '{text}' cannot be compared with theta {theta}")));
            }
            Ok(f64::INFINITY)
        }
        None => text.trim().parse().map_err(|_| bad()),
    }
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Validate { pools, run } => {
            context(&cli, Some(run))?;
            if pools.is_empty() {
                return Err(Error::Usage("validate needs at least one pool file".into()));
            }
            for path in pools {
                let pool = load(path, run)?;
                let m = pool.metrics();
                let mean = m.iter().sum::<f64>() / m.len() as f64;
                let sd = if m.len() > 1 {
                    (m.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m.len() - 1) as f64).sqrt()
                } else {
                    0.0
                };
                let fp = fingerprint(&pool);
                println!(
                    "{}: ok, label {}, operator {}, {} records, mean {mean:.6}, sd {sd:.6}, sha256 {}",
                    path.display(),
                    fp.label,
                    fp.mutation_operator,
                    fp.rows,
                    fp.sha256
                );
            }
        }
        Command::Simulate { law, size, operator, magnitude, mu, sigma, p, t_len, run } => {
            let ctx = context(&cli, Some(run))?;
            let label = match magnitude {
                Some(m) => format!("{operator}_{m}"),
                None => operator.clone(),
            };
            let mut meta = PoolMeta::new(label.clone(), operator.clone(), run.metric_kind());
            meta.magnitude = magnitude.clone();
            let need = |v: Option<f64>, name: &str| v.ok_or_else(|| Error::Usage(format!("--{name} is required for this law")));
            let spec = match law {
                Law::TruncatedNormal => PopulationSpec::truncated_normal(meta, *size, need(*mu, "mu")?, need(*sigma, "sigma")?),
                Law::Bernoulli => PopulationSpec::bernoulli(
                    meta,
                    *size,
                    need(*p, "p")?,
                    t_len.ok_or_else(|| Error::Usage("--t-len is required for this law".into()))?,
                ),
            };
            let pool = gen_population(&spec, &SplitStream::new(ctx.cfg.master_seed))?;
            let header = format!(
                "pmt simulate master_seed={} spec={}",
                ctx.cfg.master_seed,
                serde_json::to_string(&spec.law).expect("law serialises")
            );
            let path = ctx.out.join(format!("{label}.csv"));
            std::fs::create_dir_all(&ctx.out).map_err(|e| Error::io(&ctx.out, e))?;
            write_pool(&pool, &path, Some(&header))?;
            println!("wrote {} ({} records)", path.display(), pool.len());
        }
        Command::Test { healthy, mutant, full, run } => {
            let ctx = context(&cli, Some(run))?;
            let (h, m) = (load(healthy, run)?, load(mutant, run)?);
            let test = run.test();
            let verdict = if *full {
                run_test(&test, h.records(), m.records())?
            } else {
                ctx.cfg.validate_for(h.len(), m.len())?;
                let mut s = SplitStream::new(ctx.cfg.master_seed);
                let mut draw = |pool: &InstancePool, k: usize| {
                    let mut perm = vec![0; pool.len()];
                    let mut idx = Vec::new();
                    s.sample_without_replacement(&mut perm, k, &mut idx);
                    let metrics = pool.metrics();
                    idx.iter().map(|&i| metrics[i]).collect::<Vec<f64>>()
                };
                let (x, y) = (draw(&h, ctx.cfg.n1), draw(&m, ctx.cfg.n2));
                run_test_metrics(&test, &x, &y)?
            };
            let fmt = |v: Option<f64>| v.map_or_else(|| "-".into(), |x| format!("{x:.6}"));
            println!(
                "{}: p {}, d {}{}",
                if verdict.killed { "killed" } else { "not killed" },
                fmt(verdict.p_value),
                fmt(verdict.effect_size),
                if verdict.degenerate { " (degenerate: zero pooled variance)" } else { "" }
            );
        }
        Command::Posterior { healthy, mutant, run } => {
            let ctx = context(&cli, Some(run))?;
            let (h, m) = (load(healthy, run)?, load(mutant, run)?);
            let cfg = &ctx.cfg;
            let bag = parallel::bayes_bag(&h, &m, &run.test(), cfg, &SplitStream::new(cfg.master_seed))?;
            let summary = PosteriorSummary::new(&bag, h.label(), m.label(), cfg, run.interval())?;
            let effect = similarity_ratio(&bag, &IdealPosteriors::new(cfg.trials, cfg.prior_a, cfg.prior_b)?)?;
            let header = header_line("posterior", cfg.master_seed, cfg);
            write(&ctx.out.join("posterior.csv"), &density_csv(&header, &density_grid(&bag, GRID_POINTS)))?;
            write(&ctx.out.join("posterior.json"), &json(&summary))?;
            println!(
                "mmse {:.4}  map {:.4}  {:.0}% interval [{:.4}, {:.4}]  ratio {}  {}",
                summary.mmse,
                summary.map,
                100.0 * cfg.ci_level,
                summary.interval.lo,
                summary.interval.hi,
                effect.display_ratio(),
                effect.effect_class.as_str()
            );
        }
        Command::Decide { healthy, mutants, run } => {
            let started = Instant::now();
            let started_ms = now_ms();
            if mutants.is_empty() {
                return Err(Error::Usage("decide needs at least one mutant pool".into()));
            }
            let ctx = context(&cli, Some(run))?;
            let h = load(healthy, run)?;
            let ms = mutants.iter().map(|p| load(p, run)).collect::<Result<Vec<_>>>()?;
            let output = decide(&h, &ms, &run.test(), &ctx.cfg, run.interval())?;
            let report = finish_report(output.payload, started, started_ms, ctx.seed_randomized);
            write_decide(&ctx.out, &report, &output.files)?;
            println!("{:<24} {:>8} {:>8} {:>6}  {:<24} verdict", "mutation", "mmse", "ratio", "mark", "class");
            for e in &report.payload.mutations {
                println!(
                    "{:<24} {:>8.4} {:>8} {:>6}  {:<24} {}",
                    format!("{}{}", e.pool.label, if e.identity_protocol { " (halves)" } else { "" }),
                    e.mmse,
                    e.effect.display_ratio,
                    e.effect.mark,
                    e.effect.class.as_str(),
                    serde_json::to_value(e.effect.verdict).expect("verdict serialises").as_str().unwrap_or("")
                );
            }
            match report.payload.mutation_score {
                Some(s) => println!("mutation score {s:.4} (theta {}, {} mutations)", ctx.cfg.theta, report.payload.scored_mutations),
                None => println!("mutation score: no non-identity mutations"),
            }
            println!("wrote {}", ctx.out.join("report.json").display());
        }
        Command::Score { ratios, report, run } => {
            let ctx = context(&cli, Some(run))?;
            let theta = ctx.cfg.theta;
            let values: Vec<f64> = match report {
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                    let r: pmt::report::RunReport =
                        serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
                    r.payload
                        .mutations
                        .iter()
                        .filter(|m| !m.identity_protocol && m.pool.mutation_operator != pmt_core::data::IDENTITY)
                        .map(|m| match &m.effect.raw_ratio {
                            pmt::report::RatioValue::Number(x) => Ok(*x),
                            pmt::report::RatioValue::Text(t) => {
                                t.parse::<f64>().map_err(|_| Error::Data(format!("bad ratio '{t}'")))
                            }
                        })
                        .collect::<Result<_>>()?
                }
                None => ratios.iter().map(|r| parse_ratio(r, theta)).collect::<Result<_>>()?,
            };
            let score = mutation_score_of_ratios(&values, theta)?;
            let shown: Vec<String> = values.iter().map(|&r| display_ratio(r)).collect();
            println!("ratios [{}]", shown.join(", "));
            println!("mutation score {score} (theta {theta})");
        }
        Command::Flakiness { healthy, unknowns, k, n_samplings, n_partitions, run } => {
            let ctx = context(&cli, Some(run))?;
            let h = load(healthy, run)?;
            let us = unknowns.iter().map(|p| load(p, run)).collect::<Result<Vec<_>>>()?;
            let fcfg = FlakinessConfig { k: *k, n_samplings: *n_samplings, n_partitions: *n_partitions };
            let table = flakiness(&h, &us, &run.test(), &fcfg, &SplitStream::new(ctx.cfg.master_seed))?;
            let header = format!("{} flakiness={}", header_line("flakiness", ctx.cfg.master_seed, &ctx.cfg), json_compact(&fcfg));
            write(&ctx.out.join("flakiness.csv"), &flakiness_csv(&header, &table))?;
            write(&ctx.out.join("flakiness.json"), &json(&table))?;
            println!("average probability of declaring a mutant");
            for col in std::iter::once(&table.identity).chain(&table.unknowns) {
                println!("  {:<24} {:.2}", col.label, col.mean_kill_prob);
            }
        }
        Command::Tradeoff { healthy, mutant, sizes, n_pop, n_reps, run } => {
            let ctx = context(&cli, Some(run))?;
            let (h, m) = (load(healthy, run)?, load(mutant, run)?);
            let sizes = parse_sizes(sizes)?;
            let cfg = &ctx.cfg;
            let report = parallel::tradeoff_study(&h, &m, &run.test(), cfg, &sizes, *n_pop, *n_reps, &SplitStream::new(cfg.master_seed))?;
            let header = format!("{} n_pop={n_pop} n_reps={n_reps}", header_line("tradeoff", cfg.master_seed, cfg));
            write(&ctx.out.join("tradeoff.csv"), &tradeoff_csv(&header, &report))?;
            write(&ctx.out.join("tradeoff_summary.csv"), &tradeoff_summary_csv(&header, &report))?;
            println!("{:>6} {:>10} {:>10} {:>12}", "size", "mean mu", "mean se", "dispersion");
            for s in &report.summary {
                println!("{:>6} {:>10.4} {:>10.6} {:>12.6}", s.size, s.mean_estimate_mu, s.mean_se_mu, s.dispersion_mu);
            }
        }
        Command::ExportPlot { summary, grid } => {
            let ctx = context(&cli, None)?;
            if *grid < 2 {
                return Err(Error::Usage("--grid needs at least 2 points".into()));
            }
            let text = std::fs::read_to_string(summary).map_err(|e| Error::io(summary, e))?;
            let s: PosteriorSummary =
                serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", summary.display())))?;
            let bag = s.posterior()?;
            let header = header_line("export-plot", s.master_seed, &s.config);
            let stem = summary.file_stem().map_or_else(|| "posterior".into(), |x| x.to_string_lossy().into_owned());
            write(&ctx.out.join(format!("{stem}_plot.csv")), &density_csv(&header, &density_grid(&bag, *grid)))?;
        }
    }
    Ok(())
}

fn json_compact<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("value serialises")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
