//! Comparison of a candidate significance outcome with the ground truth.
//!
//! Significance testing is treated as binary classification of system pairs:
//! a pair significant under both qrels is a true positive, significant only
//! under the candidate a false positive (Type I error), significant only
//! under the ground truth a false negative (Type II error).
//!
//! Rates whose denominator is zero are reported as `None` ("undefined")
//! rather than coerced to a number.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::sigtest::{significance_partition, PairKey, SignificanceSet};
use crate::trec::Qrels;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DiscrimError {
    #[error("significance sets cover different systems (only in ground truth: {only_gt:?}; only in candidate: {only_cand:?})")]
    SystemMismatch {
        only_gt: Vec<String>,
        only_cand: Vec<String>,
    },
    #[error("the two qrels share no judged (topic, document) pair")]
    EmptyIntersection,
    #[error("rankings need at least two systems, found {0}")]
    TooFewSystems(usize),
}

/// Outcome counts over all system pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    /// Type I errors.
    pub fp: u64,
    /// Type II errors.
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        Self { tp, tn, fp, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// |S_gt|
    pub fn gt_significant(&self) -> u64 {
        self.tp + self.fn_
    }

    /// |NS_gt|
    pub fn gt_nonsignificant(&self) -> u64 {
        self.tn + self.fp
    }

    /// Counts with ground truth and candidate exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            tp: self.tp,
            tn: self.tn,
            fp: self.fn_,
            fn_: self.fp,
        }
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn system_sets_match(gt: &SignificanceSet, cand: &SignificanceSet) -> Result<(), DiscrimError> {
    let a: BTreeSet<&str> = gt.systems().iter().map(String::as_str).collect();
    let b: BTreeSet<&str> = cand.systems().iter().map(String::as_str).collect();
    if a == b {
        return Ok(());
    }
    Err(DiscrimError::SystemMismatch {
        only_gt: a.difference(&b).map(|s| String::from(*s)).collect(),
        only_cand: b.difference(&a).map(|s| String::from(*s)).collect(),
    })
}

/// Intersects the S/NS partitions of both sets.
pub fn confusion(gt: &SignificanceSet, cand: &SignificanceSet) -> Result<ConfusionCounts, DiscrimError> {
    system_sets_match(gt, cand)?;
    let (s_gt, ns_gt) = significance_partition(gt);
    let (s_cand, ns_cand) = significance_partition(cand);
    let n = |a: &BTreeSet<PairKey>, b: &BTreeSet<PairKey>| a.intersection(b).count() as u64;
    Ok(ConfusionCounts {
        tp: n(&s_gt, &s_cand),
        tn: n(&ns_gt, &ns_cand),
        fp: n(&ns_gt, &s_cand),
        fn_: n(&s_gt, &ns_cand),
    })
}

/// (①P, ①R): precision and recall of significant pairs.
pub fn sig_precision_recall(c: &ConfusionCounts) -> (Option<f64>, Option<f64>) {
    (ratio(c.tp, c.tp + c.fp), ratio(c.tp, c.tp + c.fn_))
}

/// (②P, ②R): precision and recall of non-significant pairs.
pub fn nonsig_precision_recall(c: &ConfusionCounts) -> (Option<f64>, Option<f64>) {
    (ratio(c.tn, c.tn + c.fn_), ratio(c.tn, c.tn + c.fp))
}

/// Mean of ①R and ②R; undefined if either is.
pub fn balanced_accuracy(c: &ConfusionCounts) -> Option<f64> {
    let (_, r1) = sig_precision_recall(c);
    let (_, r2) = nonsig_precision_recall(c);
    Some(bac_from_recalls(r1?, r2?))
}

pub fn bac_from_recalls(sig_recall: f64, nonsig_recall: f64) -> f64 {
    (sig_recall + nonsig_recall) / 2.0
}

/// MCC value plus whether the zero-denominator convention was applied.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Mcc {
    pub value: f64,
    pub degenerate: bool,
}

/// Matthews correlation coefficient. Products are formed in 128-bit
/// integers; a zero marginal gives 0 with `degenerate` set.
pub fn mcc(c: &ConfusionCounts) -> Mcc {
    let (tp, tn, fp, fn_) = (c.tp as i128, c.tn as i128, c.fp as i128, c.fn_ as i128);
    let factors = [tp + fp, tp + fn_, tn + fp, tn + fn_];
    if factors.contains(&0) {
        return Mcc {
            value: 0.0,
            degenerate: true,
        };
    }
    let num = (tp * tn - fp * fn_) as f64;
    let den = match factors.iter().try_fold(1i128, |acc, &f| acc.checked_mul(f)) {
        Some(product) => libm::sqrt(product as f64),
        None => libm::sqrt((factors[0] * factors[1]) as f64) * libm::sqrt((factors[2] * factors[3]) as f64),
    };
    Mcc {
        value: (num / den).clamp(-1.0, 1.0),
        degenerate: false,
    }
}

/// |S| / total pairs.
pub fn sensitivity(ss: &SignificanceSet) -> f64 {
    if ss.num_pairs() == 0 {
        return 0.0;
    }
    ss.significant_count() as f64 / ss.num_pairs() as f64
}

/// |sens(gt) - sens(cand)|.
pub fn delta_sensitivity(gt: &SignificanceSet, cand: &SignificanceSet) -> Result<f64, DiscrimError> {
    system_sets_match(gt, cand)?;
    Ok((sensitivity(gt) - sensitivity(cand)).abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Kappa {
    pub value: f64,
    /// Expected agreement was 1 (both raters used a single label).
    pub degenerate: bool,
    /// Number of jointly judged pairs the statistic was computed over.
    pub judged_pairs: u64,
}

/// Cohen's κ over binarized labels (`grade >= threshold`) on the jointly
/// judged `(topic, doc)` pairs.
pub fn cohen_kappa(gt: &Qrels, cand: &Qrels, threshold: u32) -> Result<Kappa, DiscrimError> {
    // table[gt_label][cand_label]
    let mut table = [[0u64; 2]; 2];
    for (topic, doc, g) in gt.iter() {
        if let Some(c) = cand.grade(topic, doc) {
            table[(g >= threshold) as usize][(c >= threshold) as usize] += 1;
        }
    }
    let n = table.iter().flatten().sum::<u64>();
    if n == 0 {
        return Err(DiscrimError::EmptyIntersection);
    }
    let nf = n as f64;
    let observed = (table[0][0] + table[1][1]) as f64 / nf;
    let expected: f64 = (0..2)
        .map(|c| {
            let gt_marginal = (table[c][0] + table[c][1]) as f64 / nf;
            let cand_marginal = (table[0][c] + table[1][c]) as f64 / nf;
            gt_marginal * cand_marginal
        })
        .sum();
    // p_e = 1 exactly when both raters put every item in the same class.
    let degenerate = (0..2).any(|c| table[c][0] + table[c][1] == n && table[0][c] + table[1][c] == n);
    if degenerate {
        let agree = table[0][0] + table[1][1] == n;
        return Ok(Kappa {
            value: if agree { 1.0 } else { 0.0 },
            degenerate: true,
            judged_pairs: n,
        });
    }
    Ok(Kappa {
        value: (observed - expected) / (1.0 - expected),
        degenerate: false,
        judged_pairs: n,
    })
}

/// Kendall's τ-b between two system rankings given as mean scores. Tied
/// means are tied ranks. `Ok(None)` when one ranking is entirely tied.
pub fn kendall_tau(
    means_gt: &BTreeMap<String, f64>,
    means_cand: &BTreeMap<String, f64>,
) -> Result<Option<f64>, DiscrimError> {
    if !means_gt.keys().eq(means_cand.keys()) {
        let a: BTreeSet<&String> = means_gt.keys().collect();
        let b: BTreeSet<&String> = means_cand.keys().collect();
        return Err(DiscrimError::SystemMismatch {
            only_gt: a.difference(&b).map(|s| (*s).clone()).collect(),
            only_cand: b.difference(&a).map(|s| (*s).clone()).collect(),
        });
    }
    let pairs: Vec<(f64, f64)> = means_gt.values().copied().zip(means_cand.values().copied()).collect();
    let m = pairs.len();
    if m < 2 {
        return Err(DiscrimError::TooFewSystems(m));
    }
    let (mut concordant, mut discordant, mut tied_x, mut tied_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..m {
        for j in i + 1..m {
            let dx = pairs[i].0.total_cmp(&pairs[j].0) as i64;
            let dy = pairs[i].1.total_cmp(&pairs[j].1) as i64;
            match (dx, dy) {
                (0, 0) => {
                    tied_x += 1;
                    tied_y += 1;
                }
                (0, _) => tied_x += 1,
                (_, 0) => tied_y += 1,
                _ if dx == dy => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let n0 = (m * (m - 1) / 2) as i64;
    let den = libm::sqrt(((n0 - tied_x) * (n0 - tied_y)) as f64);
    if den == 0.0 {
        return Ok(None);
    }
    Ok(Some(((concordant - discordant) as f64 / den).clamp(-1.0, 1.0)))
}

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiscrimReport {
    pub counts: ConfusionCounts,
    /// ①P
    pub p1: Option<f64>,
    /// ①R
    pub r1: Option<f64>,
    /// ②P
    pub p2: Option<f64>,
    /// ②R
    pub r2: Option<f64>,
    pub bac: Option<f64>,
    pub mcc: f64,
    pub mcc_degenerate: bool,
    pub kappa: f64,
    pub kappa_degenerate: bool,
    pub tau: Option<f64>,
    pub sens_gt: f64,
    pub sens_cand: f64,
    pub delta_sens: f64,
    /// |S_gt|
    pub s_gt: u64,
    /// |NS_gt|
    pub ns_gt: u64,
    pub total_pairs: u64,
}

/// Assembles every metric for one candidate.
pub fn full_report(
    gt_ss: &SignificanceSet,
    cand_ss: &SignificanceSet,
    gt_qrels: &Qrels,
    cand_qrels: &Qrels,
    means_gt: &BTreeMap<String, f64>,
    means_cand: &BTreeMap<String, f64>,
    kappa_threshold: u32,
) -> Result<DiscrimReport, DiscrimError> {
    let counts = confusion(gt_ss, cand_ss)?;
    let (p1, r1) = sig_precision_recall(&counts);
    let (p2, r2) = nonsig_precision_recall(&counts);
    let mcc = mcc(&counts);
    let kappa = cohen_kappa(gt_qrels, cand_qrels, kappa_threshold)?;
    let tau = kendall_tau(means_gt, means_cand)?;
    let sens_gt = sensitivity(gt_ss);
    let sens_cand = sensitivity(cand_ss);
    Ok(DiscrimReport {
        counts,
        p1,
        r1,
        p2,
        r2,
        bac: balanced_accuracy(&counts),
        mcc: mcc.value,
        mcc_degenerate: mcc.degenerate,
        kappa: kappa.value,
        kappa_degenerate: kappa.degenerate,
        tau,
        sens_gt,
        sens_cand,
        delta_sens: (sens_gt - sens_cand).abs(),
        s_gt: counts.gt_significant(),
        ns_gt: counts.gt_nonsignificant(),
        total_pairs: counts.total(),
    })
}
