//! Percentage-sampling sweeps: one candidate per (fraction, repetition)
//! cell, each compared against the ground truth.

use qrelcmp_core::discrim::DiscrimReport;
use qrelcmp_core::synth::{percentage_sample, SamplingConfig, SamplingScope};
use qrelcmp_core::trec::{Qrels, RunSet};
use rayon::prelude::*;

use crate::compare::{compare_with_gt, evaluate, AnalysisOptions};
use crate::error::{Error, Result};
use crate::report::{metric_cells, metric_strings, Cell, Precision, METRIC_COLUMNS};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub fractions: Vec<f64>,
    pub repetitions: u32,
    pub master_seed: u64,
    pub relevant_threshold: u32,
    pub scope: SamplingScope,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            fractions: (0..=10).map(|i| i as f64 / 10.0).collect(),
            repetitions: 10,
            master_seed: 0,
            relevant_threshold: 1,
            scope: SamplingScope::Global,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub fraction: f64,
    pub repetition: u32,
    pub report: DiscrimReport,
}

/// Mean and population variance of one metric over the repetitions where it
/// is defined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub mean: Option<f64>,
    pub variance: Option<f64>,
    pub defined: usize,
}

impl Aggregate {
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let xs: Vec<f64> = values.into_iter().flatten().collect();
        if xs.is_empty() {
            return Aggregate {
                mean: None,
                variance: None,
                defined: 0,
            };
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let variance = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        Aggregate {
            mean: Some(mean),
            variance: Some(variance),
            defined: xs.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub fraction: f64,
    pub repetitions: u32,
    /// One entry per name in [`METRIC_COLUMNS`].
    pub metrics: Vec<Aggregate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
    pub summary: Vec<SummaryRow>,
}

pub fn validate(cfg: &SweepConfig) -> Result<()> {
    if cfg.fractions.is_empty() {
        return Err(Error::Config("at least one sampling fraction is required".into()));
    }
    if let Some(f) = cfg.fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(Error::Config(format!("sampling fraction {f} is outside [0, 1]")));
    }
    if cfg.repetitions == 0 {
        return Err(Error::Config("repetitions must be at least 1".into()));
    }
    Ok(())
}

fn cell_values(r: &DiscrimReport) -> Vec<Option<f64>> {
    metric_cells(r)
        .into_iter()
        .map(|c| match c {
            Cell::Real(v) => v,
            Cell::Count(n) => Some(n as f64),
        })
        .collect()
}

pub fn summarize(cells: &[SweepCell]) -> Vec<SummaryRow> {
    let mut fractions: Vec<f64> = Vec::new();
    for c in cells {
        if !fractions.contains(&c.fraction) {
            fractions.push(c.fraction);
        }
    }
    fractions
        .into_iter()
        .map(|f| {
            let rows: Vec<Vec<Option<f64>>> = cells
                .iter()
                .filter(|c| c.fraction == f)
                .map(|c| cell_values(&c.report))
                .collect();
            SummaryRow {
                fraction: f,
                repetitions: rows.len() as u32,
                metrics: (0..METRIC_COLUMNS.len())
                    .map(|m| Aggregate::of(rows.iter().map(|r| r[m])))
                    .collect(),
            }
        })
        .collect()
}

/// Runs every cell in parallel. The ground truth is evaluated once; results
/// are ordered by fraction as given, then repetition.
pub fn run_sweep(runs: &RunSet, gt: &Qrels, opts: &AnalysisOptions, cfg: &SweepConfig) -> Result<SweepResult> {
    validate(cfg)?;
    let gt_eval = evaluate(runs, gt, opts)?;
    let grid: Vec<(f64, u32)> = cfg
        .fractions
        .iter()
        .flat_map(|&f| (0..cfg.repetitions).map(move |r| (f, r)))
        .collect();
    let cells = grid
        .par_iter()
        .map(|&(fraction, repetition)| {
            let sampling = SamplingConfig {
                fraction,
                repetitions: cfg.repetitions,
                master_seed: cfg.master_seed,
                relevant_threshold: cfg.relevant_threshold,
                scope: cfg.scope,
            };
            let cand = percentage_sample(gt, &sampling, repetition)?;
            let cmp = compare_with_gt(runs, gt, &gt_eval, &cand, opts)?;
            Ok(SweepCell {
                fraction,
                repetition,
                report: cmp.report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&cells);
    Ok(SweepResult { cells, summary })
}

fn fraction_string(f: f64) -> String {
    format!("{f}")
}

pub fn sweep_csv(cells: &[SweepCell], precision: Precision) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["fraction", "repetition"];
    header.extend(METRIC_COLUMNS);
    w.write_record(&header).expect("writing to memory");
    for c in cells {
        let mut row = vec![fraction_string(c.fraction), c.repetition.to_string()];
        row.extend(metric_strings(&c.report, precision));
        w.write_record(&row).expect("writing to memory");
    }
    w.into_inner().expect("writing to memory")
}

pub fn summary_header() -> Vec<String> {
    let mut header = vec!["fraction".to_string(), "repetitions".to_string()];
    for m in METRIC_COLUMNS {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_var"));
        header.push(format!("{m}_n"));
    }
    header
}

pub fn summary_csv(summary: &[SummaryRow], precision: Precision) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(summary_header()).expect("writing to memory");
    for s in summary {
        let mut row = vec![fraction_string(s.fraction), s.repetitions.to_string()];
        for a in &s.metrics {
            row.push(precision.format_opt(a.mean, 4));
            row.push(precision.format_opt(a.variance, 6));
            row.push(a.defined.to_string());
        }
        w.write_record(&row).expect("writing to memory");
    }
    w.into_inner().expect("writing to memory")
}
