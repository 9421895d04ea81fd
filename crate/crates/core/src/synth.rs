//! Candidate qrel generators that need no assessor: percentage sampling of
//! relevant judgments and the popularity-biased labeller.
//!
//! Both keep the judged `(topic, doc)` universe of the ground truth intact and
//! only change grades.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::seed::{stream_rng, DOMAIN_SAMPLING};
use crate::trec::{Qrels, QrelsRole, RunSet};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("sampling fraction must lie in [0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("explicit relevant fraction must lie in [0, 1], got {0}")]
    InvalidTarget(f64),
    #[error("popularity depth must be at least 1")]
    ZeroDepth,
}

/// Whether relevant judgments are sampled from one global pool or per topic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SamplingScope {
    #[default]
    Global,
    PerTopic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SamplingConfig {
    pub fraction: f64,
    pub repetitions: u32,
    pub master_seed: u64,
    /// Judgments with `grade >= relevant_threshold` form the sampled pool.
    pub relevant_threshold: u32,
    pub scope: SamplingScope,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            fraction: 1.0,
            repetitions: 10,
            master_seed: 0,
            relevant_threshold: 1,
            scope: SamplingScope::Global,
        }
    }
}

/// Number of members kept when sampling `fraction` of `pool` items.
pub fn sample_size(fraction: f64, pool: usize) -> usize {
    libm::round(fraction * pool as f64) as usize
}

/// Keeps a uniform random `round(f·|R|)` of the relevant judgments `R` with
/// their grades and relabels the rest of `R` as 0. Deterministic in
/// `(master_seed, repetition)`.
pub fn percentage_sample(gt: &Qrels, cfg: &SamplingConfig, repetition: u32) -> Result<Qrels, SynthError> {
    if !(0.0..=1.0).contains(&cfg.fraction) {
        return Err(SynthError::InvalidFraction(cfg.fraction));
    }
    let relevant = |(_, _, g): &(&str, &str, u32)| *g >= cfg.relevant_threshold;
    let mut pools: Vec<(u64, Vec<(&str, &str)>)> = match cfg.scope {
        SamplingScope::Global => {
            let pool = gt.iter().filter(relevant).map(|(t, d, _)| (t, d)).collect();
            alloc::vec![(u64::MAX, pool)]
        }
        SamplingScope::PerTopic => gt
            .topics()
            .enumerate()
            .map(|(i, topic)| {
                let pool = gt.topic(topic).into_iter().flatten();
                let pool = pool
                    .filter(|(_, &g)| g >= cfg.relevant_threshold)
                    .map(|(d, _)| (topic, d.as_str()))
                    .collect();
                (i as u64, pool)
            })
            .collect(),
    };
    let mut out = gt.clone().with_role(QrelsRole::Candidate);
    for (stratum, pool) in pools.iter_mut() {
        let keep = sample_size(cfg.fraction, pool.len());
        let mut rng = stream_rng(cfg.master_seed, &[DOMAIN_SAMPLING, repetition as u64, *stratum]);
        let mut kept = alloc::vec![false; pool.len()];
        for i in rand::seq::index::sample(&mut rng, pool.len(), keep).iter() {
            kept[i] = true;
        }
        for (&(topic, doc), keep) in pool.iter().zip(kept) {
            if !keep {
                out.set_grade(topic, doc, 0);
            }
        }
    }
    Ok(out)
}

/// How the fraction of documents to label relevant is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TargetFraction {
    /// Each topic keeps its own ground-truth relevant fraction.
    #[default]
    PerTopicFromGt,
    /// One fraction measured over the whole ground truth.
    GlobalFromGt,
    Explicit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PopularityConfig {
    /// Only the top `depth` documents of each ranking are counted.
    pub depth: usize,
    pub target: TargetFraction,
    pub relevant_threshold: u32,
}

impl Default for PopularityConfig {
    fn default() -> Self {
        Self {
            depth: 100,
            target: TargetFraction::PerTopicFromGt,
            relevant_threshold: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopularityOutcome {
    pub qrels: Qrels,
    /// Topics no run retrieved anything for; all their labels are 0.
    pub uncovered_topics: Vec<String>,
}

/// For every judged document, the number of systems that retrieve it within
/// the top `depth` of their ranking for that topic.
pub fn retrieval_counts(gt: &Qrels, runs: &RunSet, depth: usize) -> BTreeMap<(String, String), usize> {
    let mut counts = BTreeMap::new();
    for (topic, doc, _) in gt.iter() {
        counts.insert((String::from(topic), String::from(doc)), 0usize);
    }
    for run in runs.iter() {
        for topic in gt.topics() {
            let Some(ranking) = run.ranking(topic) else { continue };
            let judged = gt.topic(topic).expect("topic comes from qrels");
            for d in ranking.iter().take(depth) {
                if judged.contains_key(&d.doc_id) {
                    *counts
                        .get_mut(&(String::from(topic), d.doc_id.clone()))
                        .expect("judged pair") += 1;
                }
            }
        }
    }
    counts
}

/// Labels the most retrieved judged documents of each topic relevant
/// (grade 1) and every other judged document non-relevant (grade 0).
///
/// Topic `t` gets `ceil(p_t · N_t)` relevant documents, where `N_t` is its
/// judged count; selection is by retrieval count descending, then doc id
/// ascending.
pub fn popularity_biased(gt: &Qrels, runs: &RunSet, cfg: &PopularityConfig) -> Result<PopularityOutcome, SynthError> {
    if cfg.depth == 0 {
        return Err(SynthError::ZeroDepth);
    }
    if let TargetFraction::Explicit(p) = cfg.target {
        if !(0.0..=1.0).contains(&p) {
            return Err(SynthError::InvalidTarget(p));
        }
    }
    let total_judged = gt.len();
    let total_relevant = gt.iter().filter(|(_, _, g)| *g >= cfg.relevant_threshold).count();
    let counts = retrieval_counts(gt, runs, cfg.depth);

    let mut out = Qrels::new(QrelsRole::Candidate);
    let mut uncovered_topics = Vec::new();
    for topic in gt.topics() {
        let judged = gt.topic(topic).expect("topic comes from qrels");
        let n_t = judged.len();
        let target = match cfg.target {
            TargetFraction::PerTopicFromGt => judged.values().filter(|&&g| g >= cfg.relevant_threshold).count(),
            // ceil(total_relevant * n_t / total_judged) in exact integer arithmetic
            TargetFraction::GlobalFromGt => (total_relevant * n_t).div_ceil(total_judged),
            TargetFraction::Explicit(p) => (libm::ceil(p * n_t as f64) as usize).min(n_t),
        };
        let covered = runs.iter().any(|r| r.ranking(topic).is_some_and(|x| !x.is_empty()));
        let mut ranked: Vec<(&str, usize)> = judged
            .keys()
            .map(|d| (d.as_str(), counts[&(String::from(topic), d.clone())]))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let selected = if covered { target } else { 0 };
        if !covered {
            uncovered_topics.push(String::from(topic));
        }
        for (i, (doc, _)) in ranked.into_iter().enumerate() {
            out.insert(topic, doc, (i < selected) as u32)
                .expect("judged pairs are unique");
        }
    }
    Ok(PopularityOutcome {
        qrels: out,
        uncovered_topics,
    })
}
