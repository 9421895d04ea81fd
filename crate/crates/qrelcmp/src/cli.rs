//! Command-line interface.

use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use qrelcmp_core::measures::{Gain, MeasureSpec};
use qrelcmp_core::sigtest::{SigTestConfig, SignificanceRule, TestMode};
use qrelcmp_core::synth::{
    percentage_sample, popularity_biased, PopularityConfig, SamplingConfig, SamplingScope, TargetFraction,
};
use qrelcmp_core::trec::{Qrels, RunSet, DEFAULT_MAX_GRADE};

use crate::compare::{compare, evaluate, pair_rows, AnalysisOptions, DEFAULT_KAPPA_THRESHOLD};
use crate::config::ConfigFile;
use crate::error::{Error, Result};
use crate::io::{ensure_dir, load_runs_dir, read_qrels, read_to_string, write_qrels};
use crate::llm::{label_qrels, pairs_for, parse_docs_tsv, parse_queries_tsv, Labeller, LabellerConfig};
use crate::parallel::with_threads;
use crate::plot;
use crate::report::{self, Precision};
use crate::sweep::{run_sweep, summary_csv, sweep_csv, SweepConfig};

#[derive(Debug, Parser)]
#[command(
    name = "qrelcmp",
    version,
    about = "Compare relevance judgments by the significance decisions they lead to"
)]
pub struct Cli {
    /// key = value file supplying defaults for any long flag
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (defaults to the number of CPUs)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for output files
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Metric formatting in CSV output: 4 decimals or full precision
    #[arg(long, global = true, value_parser = ["4", "fixed", "full"])]
    pub precision: Option<String>,
    /// More log output (repeat for debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compare candidate qrels against ground-truth qrels
    Compare(CompareArgs),
    /// Compare percentage-sampled qrels over a grid of fractions
    Sweep(SweepArgs),
    /// Produce candidate qrels
    #[command(subcommand)]
    Generate(GenerateCommand),
    /// Draw an SVG from a pairs or sweep CSV
    Plot(PlotArgs),
    /// Export the per-topic score matrix
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct RunsArgs {
    /// Directory holding one run file per system
    #[arg(long)]
    pub runs_dir: PathBuf,
    /// Name systems by file stem instead of the run tag column
    #[arg(long)]
    pub tag_from_filename: bool,
    /// Comma-separated subset of systems to use
    #[arg(long, value_delimiter = ',')]
    pub runs: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GainArg {
    Linear,
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Sampled,
    Exhaustive,
}

#[derive(Debug, Default, Args)]
pub struct AnalysisArgs {
    /// Significance level
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Number of random permutations B
    #[arg(long)]
    pub permutations: Option<u64>,
    /// Master seed for every random stream
    #[arg(long)]
    pub seed: Option<u64>,
    /// nDCG rank cutoff
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum)]
    pub gain: Option<GainArg>,
    /// Grade at which κ counts a document relevant
    #[arg(long)]
    pub kappa_threshold: Option<u32>,
    #[arg(long, value_enum)]
    pub test_mode: Option<ModeArg>,
    /// Count p = alpha as significant
    #[arg(long)]
    pub inclusive: bool,
    /// Highest grade accepted in qrels files
    #[arg(long)]
    pub max_grade: Option<u32>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub runs: RunsArgs,
    /// Ground-truth qrels
    #[arg(long)]
    pub gt: PathBuf,
    /// Candidate qrels
    #[arg(long)]
    pub cand: PathBuf,
    /// Dataset label for the report row
    #[arg(long, default_value = "dataset")]
    pub dataset: String,
    /// Candidate label for the report row (defaults to the file stem)
    #[arg(long)]
    pub label: Option<String>,
    #[command(flatten)]
    pub analysis: AnalysisArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub runs: RunsArgs,
    #[arg(long)]
    pub gt: PathBuf,
    /// Comma-separated sampling fractions in [0, 1]
    #[arg(long, value_delimiter = ',')]
    pub fractions: Option<Vec<f64>>,
    #[arg(long)]
    pub repetitions: Option<u32>,
    /// Sample within each topic instead of over the whole qrels
    #[arg(long)]
    pub per_topic: bool,
    /// Lowest grade counted as relevant for sampling
    #[arg(long)]
    pub relevant_threshold: Option<u32>,
    #[command(flatten)]
    pub analysis: AnalysisArgs,
}

#[derive(Debug, Subcommand)]
pub enum GenerateCommand {
    /// Keep a random fraction of the relevant judgments
    Sample(SampleArgs),
    /// Label the most retrieved judged documents relevant
    Popularity(PopularityArgs),
    /// Label judged pairs with a chat-completion model
    Llm(LlmArgs),
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub fraction: f64,
    /// Number of samples to write, with repetition indices 0..n
    #[arg(long)]
    pub repetitions: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub per_topic: bool,
    #[arg(long)]
    pub relevant_threshold: Option<u32>,
    #[arg(long)]
    pub max_grade: Option<u32>,
}

#[derive(Debug, Args)]
pub struct PopularityArgs {
    #[command(flatten)]
    pub runs: RunsArgs,
    #[arg(long)]
    pub gt: PathBuf,
    /// Ranking depth within which retrievals are counted
    #[arg(long)]
    pub depth: Option<usize>,
    /// per-topic, global, or an explicit fraction in [0, 1]
    #[arg(long)]
    pub p_mode: Option<String>,
    #[arg(long)]
    pub relevant_threshold: Option<u32>,
    #[arg(long)]
    pub max_grade: Option<u32>,
}

#[derive(Debug, Args)]
pub struct LlmArgs {
    /// Qrels whose judged pairs are labelled
    #[arg(long)]
    pub gt: PathBuf,
    /// TSV of topic, query text
    #[arg(long)]
    pub queries: PathBuf,
    /// TSV of topic, document id, document text
    #[arg(long)]
    pub docs: PathBuf,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// File holding a prompt template with {query} and {document}
    #[arg(long)]
    pub template: Option<PathBuf>,
    #[arg(long)]
    pub max_grade: Option<u32>,
    /// Request timeout in seconds
    #[arg(long)]
    pub timeout: Option<f64>,
    #[arg(long)]
    pub retries: Option<u32>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Requests per second
    #[arg(long)]
    pub rate_limit: Option<f64>,
    /// Requests in flight at once
    #[arg(long)]
    pub concurrency: Option<usize>,
    /// Write the qrels even when some pairs fail
    #[arg(long)]
    pub skip_failures: bool,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// pairs.csv, sweep.csv or sweep_summary.csv
    #[arg(long)]
    pub input: PathBuf,
    /// Output SVG (defaults to the input name with .svg in the output directory)
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub runs: RunsArgs,
    #[arg(long)]
    pub qrels: PathBuf,
    /// Also run the significance test and write pvalues.csv
    #[arg(long)]
    pub with_pvalues: bool,
    #[command(flatten)]
    pub analysis: AnalysisArgs,
}

struct Context {
    config: ConfigFile,
    out_dir: PathBuf,
    precision: Precision,
}

impl Context {
    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn max_grade(&self, flag: Option<u32>) -> Result<u32> {
        self.config.resolve(flag, "max-grade", DEFAULT_MAX_GRADE)
    }

    fn analysis(&self, a: &AnalysisArgs) -> Result<AnalysisOptions> {
        let c = &self.config;
        let gain = match a.gain {
            Some(g) => g,
            None => match c.raw("gain") {
                Some(v) => GainArg::from_str(v, true).map_err(|e| Error::Config(format!("gain: {e}")))?,
                None => GainArg::Linear,
            },
        };
        let mode = match a.test_mode {
            Some(m) => m,
            None => match c.raw("test-mode") {
                Some(v) => ModeArg::from_str(v, true).map_err(|e| Error::Config(format!("test-mode: {e}")))?,
                None => ModeArg::Sampled,
            },
        };
        let inclusive = a.inclusive || c.get::<bool>("inclusive")?.unwrap_or(false);
        let defaults = SigTestConfig::default();
        let sig = SigTestConfig {
            alpha: c.resolve(a.alpha, "alpha", defaults.alpha)?,
            permutations: c.resolve(a.permutations, "permutations", defaults.permutations)?,
            master_seed: c.resolve(a.seed, "seed", defaults.master_seed)?,
            mode: match mode {
                ModeArg::Sampled => TestMode::Sampled,
                ModeArg::Exhaustive => TestMode::Exhaustive,
            },
            rule: if inclusive {
                SignificanceRule::Inclusive
            } else {
                SignificanceRule::Strict
            },
            exhaustive_cap: defaults.exhaustive_cap,
        };
        sig.validate().map_err(|e| Error::Config(e.to_string()))?;
        let measure = MeasureSpec::new(
            c.resolve(a.k, "k", MeasureSpec::default().cutoff)?,
            match gain {
                GainArg::Linear => Gain::Linear,
                GainArg::Exponential => Gain::Exponential,
            },
        )
        .map_err(|e| Error::Config(e.to_string()))?;
        Ok(AnalysisOptions {
            measure,
            sig,
            kappa_threshold: c.resolve(a.kappa_threshold, "kappa-threshold", DEFAULT_KAPPA_THRESHOLD)?,
        })
    }

    fn runs(&self, r: &RunsArgs) -> Result<RunSet> {
        let from_filename = r.tag_from_filename || self.config.get::<bool>("tag-from-filename")?.unwrap_or(false);
        let only: Option<Vec<String>> = match &r.runs {
            Some(list) => Some(list.clone()),
            None => self.config.raw("runs").map(|v| {
                v.split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            }),
        };
        load_runs_dir(&r.runs_dir, from_filename, only.as_deref())
    }

    fn qrels(&self, path: &Path, max_grade: Option<u32>) -> Result<Qrels> {
        Ok(read_qrels(path, self.max_grade(max_grade)?)?.qrels)
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

/// Runs the parsed command line, writing the report text to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn std::io::Write) -> Result<()> {
    init_logging(cli.verbose);
    let config = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let precision = match cli.precision.as_deref().or(config.raw("precision")) {
        None => Precision::Fixed,
        Some(p) => {
            Precision::parse(p).ok_or_else(|| Error::Config(format!("unknown precision {p:?}; use 4 or full")))?
        }
    };
    let threads = match cli.threads {
        Some(n) => Some(n),
        None => config.get::<usize>("threads")?,
    };
    if threads == Some(0) {
        return Err(Error::Config("threads must be at least 1".into()));
    }
    let out_dir = match &cli.out_dir {
        Some(d) => d.clone(),
        None => config.get::<PathBuf>("out-dir")?.unwrap_or_else(|| PathBuf::from(".")),
    };
    let ctx = Context {
        config,
        out_dir,
        precision,
    };
    let text = with_threads(threads, || dispatch(&ctx, cli.command))??;
    stdout.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

/// Runs one command and returns the text to show on the terminal.
fn dispatch(ctx: &Context, command: Command) -> Result<String> {
    match command {
        Command::Compare(a) => cmd_compare(ctx, a),
        Command::Sweep(a) => cmd_sweep(ctx, a),
        Command::Generate(g) => cmd_generate(ctx, g),
        Command::Plot(a) => cmd_plot(ctx, a),
        Command::Evaluate(a) => cmd_evaluate(ctx, a),
    }
}

fn cmd_compare(ctx: &Context, a: CompareArgs) -> Result<String> {
    let opts = ctx.analysis(&a.analysis)?;
    let runs = ctx.runs(&a.runs)?;
    let gt = ctx.qrels(&a.gt, a.analysis.max_grade)?;
    let cand = ctx.qrels(&a.cand, a.analysis.max_grade)?;
    let label = a.label.unwrap_or_else(|| {
        a.cand
            .file_stem()
            .map_or_else(|| "candidate".into(), |s| s.to_string_lossy().into_owned())
    });
    let (gt_eval, cmp) = compare(&runs, &gt, &cand, &opts)?;
    let rows = pair_rows(&gt_eval, &cmp.candidate);
    ensure_dir(&ctx.out_dir)?;
    report::write(
        &ctx.out("report.csv"),
        &report::report_csv(&a.dataset, &label, &cmp.report, ctx.precision),
    )?;
    report::write(
        &ctx.out("report.json"),
        &report::report_json(&a.dataset, &label, &cmp.report),
    )?;
    report::write(&ctx.out("pairs.csv"), &report::pairs_csv(&rows, ctx.precision))?;
    Ok(report::report_table(&a.dataset, &label, &cmp.report, ctx.precision))
}

fn cmd_sweep(ctx: &Context, a: SweepArgs) -> Result<String> {
    let opts = ctx.analysis(&a.analysis)?;
    let c = &ctx.config;
    let defaults = SweepConfig::default();
    let fractions = match a.fractions {
        Some(f) => f,
        None => match c.raw("fractions") {
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("fractions: {e}")))?,
            None => defaults.fractions,
        },
    };
    let per_topic = a.per_topic || c.get::<bool>("per-topic")?.unwrap_or(false);
    let cfg = SweepConfig {
        fractions,
        repetitions: c.resolve(a.repetitions, "repetitions", defaults.repetitions)?,
        master_seed: opts.sig.master_seed,
        relevant_threshold: c.resolve(a.relevant_threshold, "relevant-threshold", defaults.relevant_threshold)?,
        scope: if per_topic {
            SamplingScope::PerTopic
        } else {
            SamplingScope::Global
        },
    };
    let runs = ctx.runs(&a.runs)?;
    let gt = ctx.qrels(&a.gt, a.analysis.max_grade)?;
    let result = run_sweep(&runs, &gt, &opts, &cfg)?;
    ensure_dir(&ctx.out_dir)?;
    report::write(&ctx.out("sweep.csv"), &sweep_csv(&result.cells, ctx.precision))?;
    let summary = summary_csv(&result.summary, ctx.precision);
    report::write(&ctx.out("sweep_summary.csv"), &summary)?;
    Ok(String::from_utf8_lossy(&summary).into_owned())
}

fn parse_p_mode(s: &str) -> Result<TargetFraction> {
    match s {
        "per-topic" | "per_topic" => Ok(TargetFraction::PerTopicFromGt),
        "global" => Ok(TargetFraction::GlobalFromGt),
        other => other
            .parse::<f64>()
            .ok()
            .filter(|p| (0.0..=1.0).contains(p))
            .map(TargetFraction::Explicit)
            .ok_or_else(|| {
                Error::Config(format!(
                    "p-mode must be per-topic, global or a fraction in [0, 1], got {other:?}"
                ))
            }),
    }
}

fn file_param(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '-') {
                c
            } else {
                '-'
            }
        })
        .collect()
}

fn cmd_generate(ctx: &Context, g: GenerateCommand) -> Result<String> {
    let c = &ctx.config;
    ensure_dir(&ctx.out_dir)?;
    let mut written = Vec::new();
    match g {
        GenerateCommand::Sample(a) => {
            let gt = ctx.qrels(&a.gt, a.max_grade)?;
            let per_topic = a.per_topic || c.get::<bool>("per-topic")?.unwrap_or(false);
            let defaults = SamplingConfig::default();
            let cfg = SamplingConfig {
                fraction: a.fraction,
                repetitions: c.resolve(a.repetitions, "repetitions", 1)?,
                master_seed: c.resolve(a.seed, "seed", 0)?,
                relevant_threshold: c.resolve(
                    a.relevant_threshold,
                    "relevant-threshold",
                    defaults.relevant_threshold,
                )?,
                scope: if per_topic {
                    SamplingScope::PerTopic
                } else {
                    SamplingScope::Global
                },
            };
            for rep in 0..cfg.repetitions {
                let q = percentage_sample(&gt, &cfg, rep)?;
                let path = ctx.out(&format!("sample_{}_{rep}.qrels", file_param(&a.fraction.to_string())));
                write_qrels(&path, &q)?;
                written.push(path);
            }
        }
        GenerateCommand::Popularity(a) => {
            let gt = ctx.qrels(&a.gt, a.max_grade)?;
            let runs = ctx.runs(&a.runs)?;
            let defaults = PopularityConfig::default();
            let mode = a
                .p_mode
                .or_else(|| c.raw("p-mode").map(String::from))
                .unwrap_or_else(|| "per-topic".into());
            let cfg = PopularityConfig {
                depth: c.resolve(a.depth, "depth", defaults.depth)?,
                target: parse_p_mode(&mode)?,
                relevant_threshold: c.resolve(
                    a.relevant_threshold,
                    "relevant-threshold",
                    defaults.relevant_threshold,
                )?,
            };
            let out = popularity_biased(&gt, &runs, &cfg)?;
            for t in &out.uncovered_topics {
                warn!("topic {t} is not retrieved by any run; all of its labels are 0");
            }
            let path = ctx.out(&format!("popularity_{}_0.qrels", file_param(&mode)));
            write_qrels(&path, &out.qrels)?;
            written.push(path);
        }
        GenerateCommand::Llm(a) => {
            let gt = ctx.qrels(&a.gt, a.max_grade)?;
            let queries = parse_queries_tsv(&read_to_string(&a.queries)?).map_err(|m| Error::Csv {
                path: a.queries.clone(),
                message: m,
            })?;
            let docs = parse_docs_tsv(&read_to_string(&a.docs)?).map_err(|m| Error::Csv {
                path: a.docs.clone(),
                message: m,
            })?;
            let d = LabellerConfig::default();
            let template = match a.template.or(c.get::<PathBuf>("template")?) {
                Some(p) => read_to_string(&p)?,
                None => d.template.clone(),
            };
            let cfg = LabellerConfig {
                endpoint: c.resolve(a.endpoint, "endpoint", d.endpoint.clone())?,
                model: c.resolve(a.model, "model", d.model.clone())?,
                template,
                max_grade: c.resolve(a.max_grade, "max-grade", d.max_grade)?,
                timeout: Duration::from_secs_f64(c.resolve(a.timeout, "timeout", d.timeout.as_secs_f64())?),
                retries: c.resolve(a.retries, "retries", d.retries)?,
                backoff: d.backoff,
                cache_dir: a.cache_dir.or(c.get("cache-dir")?),
                rate_limit: a.rate_limit.or(c.get("rate-limit")?),
                concurrency: c.resolve(a.concurrency, "concurrency", d.concurrency)?,
                api_key: d.api_key.clone(),
            };
            let skip = a.skip_failures || c.get::<bool>("skip-failures")?.unwrap_or(false);
            let pairs = pairs_for(&gt, &queries, &docs)?;
            let model = cfg.model.clone();
            let labeller = Labeller::http(cfg)?;
            let out = label_qrels(&labeller, &pairs, skip)?;
            for f in &out.failures {
                warn!("skipped topic {} document {}: {}", f.topic, f.doc, f.error);
            }
            info!("{} request(s) sent", labeller.requests());
            let path = ctx.out(&format!("llm_{}_0.qrels", file_param(&model)));
            write_qrels(&path, &out.qrels)?;
            written.push(path);
        }
    }
    Ok(written.iter().map(|p| format!("{}\n", p.display())).collect())
}

fn cmd_plot(ctx: &Context, a: PlotArgs) -> Result<String> {
    let (_, svg) = plot::plot_file(&a.input)?;
    let output = match a.output {
        Some(p) => p,
        None => {
            let stem = a
                .input
                .file_stem()
                .map_or_else(|| "plot".into(), |s| s.to_string_lossy().into_owned());
            ensure_dir(&ctx.out_dir)?;
            ctx.out(&format!("{stem}.svg"))
        }
    };
    report::write(&output, svg.as_bytes())?;
    Ok(format!("{}\n", output.display()))
}

fn cmd_evaluate(ctx: &Context, a: EvaluateArgs) -> Result<String> {
    let opts = ctx.analysis(&a.analysis)?;
    let runs = ctx.runs(&a.runs)?;
    let qrels = ctx.qrels(&a.qrels, a.analysis.max_grade)?;
    ensure_dir(&ctx.out_dir)?;
    if a.with_pvalues {
        let e = evaluate(&runs, &qrels, &opts)?;
        report::write(&ctx.out("scores.csv"), &report::scores_csv(&e.matrix, ctx.precision))?;
        report::write(&ctx.out("pvalues.csv"), &report::pvalues_csv(&e.sig, ctx.precision))?;
    } else {
        let sm = qrelcmp_core::measures::score_matrix(&runs, &qrels, opts.measure)?;
        report::write(&ctx.out("scores.csv"), &report::scores_csv(&sm, ctx.precision))?;
    }
    Ok(format!("{}\n", ctx.out("scores.csv").display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn p_mode_values() {
        assert_eq!(parse_p_mode("global").unwrap(), TargetFraction::GlobalFromGt);
        assert_eq!(parse_p_mode("0.25").unwrap(), TargetFraction::Explicit(0.25));
        assert!(parse_p_mode("2").is_err());
    }
}
