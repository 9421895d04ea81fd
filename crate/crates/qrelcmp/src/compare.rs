//! Evaluation of a run fleet under ground-truth and candidate qrels, and the
//! pairwise comparison of the two significance outcomes.

use std::collections::BTreeMap;

use qrelcmp_core::discrim::{full_report, DiscrimReport};
use qrelcmp_core::measures::{mean_scores, score_matrix, MeasureSpec, ScoreMatrix};
use qrelcmp_core::sigtest::{SigTestConfig, SignificanceSet};
use qrelcmp_core::trec::{Qrels, RunSet};
use serde::Serialize;

use crate::error::Result;
use crate::parallel;

pub const DEFAULT_KAPPA_THRESHOLD: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub measure: MeasureSpec,
    pub sig: SigTestConfig,
    /// Grades at or above this count as relevant for Cohen's κ.
    pub kappa_threshold: u32,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            measure: MeasureSpec::default(),
            sig: SigTestConfig::default(),
            kappa_threshold: DEFAULT_KAPPA_THRESHOLD,
        }
    }
}

/// Scores, means and significance outcome of one fleet under one qrels.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluated {
    pub matrix: ScoreMatrix,
    pub means: BTreeMap<String, f64>,
    pub sig: SignificanceSet,
}

pub fn evaluate(runs: &RunSet, qrels: &Qrels, opts: &AnalysisOptions) -> Result<Evaluated> {
    let matrix = score_matrix(runs, qrels, opts.measure)?;
    let sig = parallel::tukey_hsd_pvalues(&matrix, &opts.sig)?;
    Ok(Evaluated {
        means: mean_scores(&matrix),
        matrix,
        sig,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub report: DiscrimReport,
    pub candidate: Evaluated,
}

/// Compares a candidate against an already evaluated ground truth. The
/// ground-truth evaluation is reused across candidates in a sweep.
pub fn compare_with_gt(
    runs: &RunSet,
    gt_qrels: &Qrels,
    gt: &Evaluated,
    cand_qrels: &Qrels,
    opts: &AnalysisOptions,
) -> Result<Comparison> {
    let candidate = evaluate(runs, cand_qrels, opts)?;
    let report = full_report(
        &gt.sig,
        &candidate.sig,
        gt_qrels,
        cand_qrels,
        &gt.means,
        &candidate.means,
        opts.kappa_threshold,
    )?;
    Ok(Comparison { report, candidate })
}

pub fn compare(
    runs: &RunSet,
    gt_qrels: &Qrels,
    cand_qrels: &Qrels,
    opts: &AnalysisOptions,
) -> Result<(Evaluated, Comparison)> {
    let gt = evaluate(runs, gt_qrels, opts)?;
    let cmp = compare_with_gt(runs, gt_qrels, &gt, cand_qrels, opts)?;
    Ok((gt, cmp))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PairClass {
    TP,
    TN,
    FP,
    FN,
}

impl PairClass {
    pub fn new(sig_gt: bool, sig_cand: bool) -> Self {
        match (sig_gt, sig_cand) {
            (true, true) => PairClass::TP,
            (false, false) => PairClass::TN,
            (false, true) => PairClass::FP,
            (true, false) => PairClass::FN,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PairClass::TP => "TP",
            PairClass::TN => "TN",
            PairClass::FP => "FP",
            PairClass::FN => "FN",
        }
    }
}

/// One system pair with both outcomes side by side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairRow {
    pub system_a: String,
    pub system_b: String,
    pub mean_a_gt: f64,
    pub mean_b_gt: f64,
    pub mean_a_cand: f64,
    pub mean_b_cand: f64,
    pub p_gt: f64,
    pub p_cand: f64,
    pub sig_gt: bool,
    pub sig_cand: bool,
    pub class: PairClass,
}

/// Pairs in the ground truth's system order. Both evaluations must cover the
/// same systems, which holds whenever they share a run fleet.
pub fn pair_rows(gt: &Evaluated, cand: &Evaluated) -> Vec<PairRow> {
    gt.sig
        .iter()
        .map(|o| {
            let i = cand.sig.system_index(o.a).expect("same fleet");
            let j = cand.sig.system_index(o.b).expect("same fleet");
            let sig_cand = cand.sig.is_significant(i, j);
            PairRow {
                system_a: o.a.to_string(),
                system_b: o.b.to_string(),
                mean_a_gt: gt.means[o.a],
                mean_b_gt: gt.means[o.b],
                mean_a_cand: cand.means[o.a],
                mean_b_cand: cand.means[o.b],
                p_gt: o.p_value,
                p_cand: cand.sig.p_value(i, j),
                sig_gt: o.significant,
                sig_cand,
                class: PairClass::new(o.significant, sig_cand),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;

    #[test]
    fn identity_candidate_is_perfect() {
        let (qrels, runs) = fixture::mini_collection();
        let opts = AnalysisOptions {
            sig: SigTestConfig {
                permutations: 500,
                ..Default::default()
            },
            ..Default::default()
        };
        let (gt, cmp) = compare(&runs, &qrels, &qrels, &opts).unwrap();
        let r = &cmp.report;
        assert_eq!(r.counts.fp + r.counts.fn_, 0);
        assert_eq!(r.kappa, 1.0);
        assert_eq!(r.tau, Some(1.0));
        assert_eq!(r.delta_sens, 0.0);
        let rows = pair_rows(&gt, &cmp.candidate);
        assert_eq!(rows.len(), 10);
        assert!(rows.iter().all(|p| matches!(p.class, PairClass::TP | PairClass::TN)));
    }

    #[test]
    fn class_matrix() {
        assert_eq!(PairClass::new(false, true), PairClass::FP);
        assert_eq!(PairClass::new(true, false), PairClass::FN);
    }
}
