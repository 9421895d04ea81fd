//! Paired randomised Tukey HSD test over every unordered pair of systems.
//!
//! Under the null hypothesis the systems are exchangeable within each topic,
//! so one null draw permutes the scores of every topic column independently
//! and records the spread `max_s mean*(s) - min_s mean*(s)` of the permuted
//! system means. Every pair is compared against this single max-statistic
//! distribution, which is what controls the family-wise error rate:
//!
//! ```text
//! p(i, j) = (1 + #{b : HSD*_b >= |mean(i) - mean(j)|}) / (1 + B)
//! ```
//!
//! In exhaustive mode all `(m!)^n` assignments are enumerated and the exact
//! ratio is returned instead.
//!
//! The permutation of topic `t` in iteration `b` comes from a stream derived
//! from `(master_seed, b, t)`, so p-values are bit-identical however the
//! iterations are scheduled.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::measures::ScoreMatrix;
use crate::seed::{stream_rng, DOMAIN_TUKEY};

/// Slack used when comparing a null statistic against an observed
/// difference, in score units. Mathematically tied values computed through
/// different summation orders can differ by a few ulps.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SigTestError {
    #[error("at least two systems are required, found {0}")]
    TooFewSystems(usize),
    #[error("at least one topic is required")]
    NoTopics,
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("the number of permutations must be at least 1")]
    NoPermutations,
    #[error("exhaustive enumeration needs {needed} assignments, above the cap of {cap}; use sampled mode")]
    ExhaustiveTooLarge { needed: String, cap: u64 },
    #[error("expected {expected} p-values, found {found}")]
    PValueCount { expected: usize, found: usize },
    #[error("p-value {0} is outside [0, 1]")]
    PValueRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TestMode {
    #[default]
    Sampled,
    Exhaustive,
}

/// How a p-value is compared against alpha.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SignificanceRule {
    /// p < alpha
    #[default]
    Strict,
    /// p <= alpha
    Inclusive,
}

impl SignificanceRule {
    pub fn is_significant(self, p: f64, alpha: f64) -> bool {
        match self {
            SignificanceRule::Strict => p < alpha,
            SignificanceRule::Inclusive => p <= alpha,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SigTestConfig {
    pub alpha: f64,
    pub permutations: u64,
    pub master_seed: u64,
    pub mode: TestMode,
    pub rule: SignificanceRule,
    pub exhaustive_cap: u64,
}

impl Default for SigTestConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            permutations: 10_000,
            master_seed: 0,
            mode: TestMode::Sampled,
            rule: SignificanceRule::Strict,
            exhaustive_cap: 10_000_000,
        }
    }
}

impl SigTestConfig {
    pub fn validate(&self) -> Result<(), SigTestError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(SigTestError::InvalidAlpha(self.alpha));
        }
        if self.permutations == 0 {
            return Err(SigTestError::NoPermutations);
        }
        Ok(())
    }
}

/// An unordered system pair, stored with `a <= b`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PairKey {
    pub a: String,
    pub b: String,
}

impl PairKey {
    pub fn new(x: &str, y: &str) -> Self {
        let (a, b) = if x <= y { (x, y) } else { (y, x) };
        Self {
            a: a.into(),
            b: b.into(),
        }
    }
}

/// Pairwise p-values for one set of judgments and the resulting
/// significant / non-significant partition.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SignificanceSet {
    systems: Vec<String>,
    /// Indexed by [`pair_index`] for `i < j`.
    p_values: Vec<f64>,
    alpha: f64,
    rule: SignificanceRule,
}

/// Position of pair `(i, j)`, `i < j < m`, in row-major upper-triangle order.
pub fn pair_index(i: usize, j: usize, m: usize) -> usize {
    debug_assert!(i < j && j < m);
    i * (2 * m - i - 1) / 2 + (j - i - 1)
}

pub fn num_pairs(m: usize) -> usize {
    m * m.saturating_sub(1) / 2
}

/// One row of a significance set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairOutcome<'a> {
    pub a: &'a str,
    pub b: &'a str,
    pub p_value: f64,
    pub significant: bool,
}

impl SignificanceSet {
    /// Wraps precomputed p-values given in [`pair_index`] order.
    pub fn from_p_values(
        systems: Vec<String>,
        p_values: Vec<f64>,
        alpha: f64,
        rule: SignificanceRule,
    ) -> Result<Self, SigTestError> {
        if systems.len() < 2 {
            return Err(SigTestError::TooFewSystems(systems.len()));
        }
        let expected = num_pairs(systems.len());
        if p_values.len() != expected {
            return Err(SigTestError::PValueCount {
                expected,
                found: p_values.len(),
            });
        }
        if let Some(&p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(SigTestError::PValueRange(p));
        }
        Ok(Self {
            systems,
            p_values,
            alpha,
            rule,
        })
    }

    pub fn systems(&self) -> &[String] {
        &self.systems
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn rule(&self) -> SignificanceRule {
        self.rule
    }

    pub fn num_pairs(&self) -> usize {
        self.p_values.len()
    }

    /// Symmetric: `p_value(i, j) == p_value(j, i)`.
    pub fn p_value(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        self.p_values[pair_index(lo, hi, self.systems.len())]
    }

    pub fn is_significant(&self, i: usize, j: usize) -> bool {
        self.rule.is_significant(self.p_value(i, j), self.alpha)
    }

    pub fn system_index(&self, tag: &str) -> Option<usize> {
        self.systems.iter().position(|s| s == tag)
    }

    pub fn p_value_by_tag(&self, a: &str, b: &str) -> Option<f64> {
        let (i, j) = (self.system_index(a)?, self.system_index(b)?);
        (i != j).then(|| self.p_value(i, j))
    }

    /// All pairs `(i, j)` with `i < j`, in [`pair_index`] order.
    pub fn iter(&self) -> impl Iterator<Item = PairOutcome<'_>> + '_ {
        let m = self.systems.len();
        (0..m).flat_map(move |i| {
            (i + 1..m).map(move |j| {
                let p = self.p_value(i, j);
                PairOutcome {
                    a: &self.systems[i],
                    b: &self.systems[j],
                    p_value: p,
                    significant: self.rule.is_significant(p, self.alpha),
                }
            })
        })
    }

    pub fn significant_count(&self) -> usize {
        self.iter().filter(|o| o.significant).count()
    }
}

/// Splits all pairs into significant (S) and non-significant (NS) sets.
pub fn significance_partition(ss: &SignificanceSet) -> (BTreeSet<PairKey>, BTreeSet<PairKey>) {
    let mut sig = BTreeSet::new();
    let mut nonsig = BTreeSet::new();
    for o in ss.iter() {
        let key = PairKey::new(o.a, o.b);
        if o.significant {
            sig.insert(key);
        } else {
            nonsig.insert(key);
        }
    }
    (sig, nonsig)
}

/// Draws null HSD statistics for a fixed matrix and master seed. Holds
/// scratch buffers so repeated draws do not allocate.
pub struct NullSampler<'a> {
    matrix: &'a ScoreMatrix,
    master_seed: u64,
    perm: Vec<usize>,
    sums: Vec<f64>,
}

impl<'a> NullSampler<'a> {
    pub fn new(matrix: &'a ScoreMatrix, master_seed: u64) -> Self {
        let m = matrix.num_systems();
        Self {
            matrix,
            master_seed,
            perm: (0..m).collect(),
            sums: vec![0.0; m],
        }
    }

    /// The HSD statistic of iteration `b`, in mean-score units.
    pub fn statistic(&mut self, b: u64) -> f64 {
        let sm = self.matrix;
        self.sums.iter_mut().for_each(|s| *s = 0.0);
        for t in 0..sm.num_topics() {
            for (k, p) in self.perm.iter_mut().enumerate() {
                *p = k;
            }
            let mut rng = stream_rng(self.master_seed, &[DOMAIN_TUKEY, b, t as u64]);
            self.perm.shuffle(&mut rng);
            for (s, &src) in self.perm.iter().enumerate() {
                self.sums[s] += sm.get(src, t);
            }
        }
        spread(&self.sums) / sm.num_topics() as f64
    }
}

fn spread(values: &[f64]) -> f64 {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    hi - lo
}

/// Checks the matrix shape and the configuration without running the test.
pub fn validate_inputs(sm: &ScoreMatrix, cfg: &SigTestConfig) -> Result<(), SigTestError> {
    check_shape(sm)?;
    cfg.validate()
}

fn check_shape(sm: &ScoreMatrix) -> Result<(), SigTestError> {
    if sm.num_systems() < 2 {
        return Err(SigTestError::TooFewSystems(sm.num_systems()));
    }
    if sm.num_topics() == 0 {
        return Err(SigTestError::NoTopics);
    }
    Ok(())
}

/// Observed |mean(i) - mean(j)| for every pair in [`pair_index`] order.
pub fn observed_differences(sm: &ScoreMatrix) -> Vec<f64> {
    let m = sm.num_systems();
    let n = sm.num_topics() as f64;
    let sums = sm.system_sums();
    let mut out = Vec::with_capacity(num_pairs(m));
    for i in 0..m {
        for j in i + 1..m {
            out.push((sums[i] - sums[j]).abs() / n);
        }
    }
    out
}

/// Draws the null statistics for iterations `0..cfg.permutations` serially.
pub fn null_distribution(sm: &ScoreMatrix, cfg: &SigTestConfig) -> Vec<f64> {
    let mut sampler = NullSampler::new(sm, cfg.master_seed);
    (0..cfg.permutations).map(|b| sampler.statistic(b)).collect()
}

/// Sampled-mode p-values from an already drawn null distribution.
///
/// The null may be produced in any order or on any number of threads; only
/// its multiset of values matters.
pub fn significance_from_null(
    sm: &ScoreMatrix,
    cfg: &SigTestConfig,
    null: &[f64],
) -> Result<SignificanceSet, SigTestError> {
    validate_inputs(sm, cfg)?;
    let mut sorted = null.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let denom = 1.0 + sorted.len() as f64;
    let p_values = observed_differences(sm)
        .into_iter()
        .map(|d| {
            let below = sorted.partition_point(|&h| h < d - TIE_TOLERANCE);
            let at_least = sorted.len() - below;
            (1.0 + at_least as f64) / denom
        })
        .collect();
    SignificanceSet::from_p_values(sm.systems().to_vec(), p_values, cfg.alpha, cfg.rule)
}

/// Number of assignments enumerated in exhaustive mode, or `None` on overflow.
pub fn exhaustive_size(m: usize, n: usize) -> Option<u64> {
    let mut fact: u64 = 1;
    for k in 2..=m as u64 {
        fact = fact.checked_mul(k)?;
    }
    let mut total: u64 = 1;
    for _ in 0..n {
        total = total.checked_mul(fact)?;
    }
    Some(total)
}

/// All permutations of `0..m` in lexicographic order.
fn all_permutations(m: usize) -> Vec<Vec<usize>> {
    let mut current: Vec<usize> = (0..m).collect();
    let mut out = vec![current.clone()];
    loop {
        let Some(i) = (1..m).rev().find(|&i| current[i - 1] < current[i]) else {
            return out;
        };
        let j = (i..m).rev().find(|&j| current[j] > current[i - 1]).unwrap();
        current.swap(i - 1, j);
        current[i..].reverse();
        out.push(current.clone());
    }
}

struct Enumeration<'a> {
    sm: &'a ScoreMatrix,
    perms: Vec<Vec<usize>>,
    /// Observed differences shifted by the tolerance, ascending.
    thresholds: Vec<f64>,
    /// `bumps[k]` counts leaves whose statistic clears exactly the first
    /// `k` thresholds.
    bumps: Vec<u64>,
    levels: Vec<Vec<f64>>,
}

impl Enumeration<'_> {
    fn descend(&mut self, topic: usize) {
        let n = self.sm.num_topics();
        if topic == n {
            let h = spread(&self.levels[n]) / n as f64;
            let k = self.thresholds.partition_point(|&t| t <= h);
            self.bumps[k] += 1;
            return;
        }
        for p in 0..self.perms.len() {
            let (done, rest) = self.levels.split_at_mut(topic + 1);
            let (prev, next) = (&done[topic], &mut rest[0]);
            for (s, &src) in self.perms[p].iter().enumerate() {
                next[s] = prev[s] + self.sm.get(src, topic);
            }
            self.descend(topic + 1);
        }
    }
}

fn exhaustive_pvalues(sm: &ScoreMatrix, cfg: &SigTestConfig) -> Result<SignificanceSet, SigTestError> {
    let (m, n) = (sm.num_systems(), sm.num_topics());
    let total = match exhaustive_size(m, n) {
        Some(t) if t <= cfg.exhaustive_cap => t,
        other => {
            return Err(SigTestError::ExhaustiveTooLarge {
                needed: match other {
                    Some(t) => alloc::format!("{t}"),
                    None => alloc::format!("more than {}", u64::MAX),
                },
                cap: cfg.exhaustive_cap,
            })
        }
    };
    let observed = observed_differences(sm);
    let mut order: Vec<usize> = (0..observed.len()).collect();
    order.sort_by(|&a, &b| observed[a].total_cmp(&observed[b]));
    let thresholds: Vec<f64> = order.iter().map(|&i| observed[i] - TIE_TOLERANCE).collect();
    let mut e = Enumeration {
        sm,
        perms: all_permutations(m),
        bumps: vec![0; thresholds.len() + 1],
        thresholds,
        levels: vec![vec![0.0; m]; n + 1],
    };
    e.descend(0);
    // Leaves clearing more than r thresholds clear the r-th smallest one.
    let mut counts = vec![0u64; observed.len()];
    let mut tail = 0u64;
    for r in (0..observed.len()).rev() {
        tail += e.bumps[r + 1];
        counts[order[r]] = tail;
    }
    let p_values = counts.into_iter().map(|c| c as f64 / total as f64).collect();
    SignificanceSet::from_p_values(sm.systems().to_vec(), p_values, cfg.alpha, cfg.rule)
}

/// Runs the randomised Tukey HSD test on a single thread.
pub fn tukey_hsd_pvalues(sm: &ScoreMatrix, cfg: &SigTestConfig) -> Result<SignificanceSet, SigTestError> {
    validate_inputs(sm, cfg)?;
    match cfg.mode {
        TestMode::Sampled => significance_from_null(sm, cfg, &null_distribution(sm, cfg)),
        TestMode::Exhaustive => exhaustive_pvalues(sm, cfg),
    }
}
