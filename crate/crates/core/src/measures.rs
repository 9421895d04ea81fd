//! nDCG@k and the systems × topics score matrix.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::trec::{Qrels, RunSet};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeasureError {
    #[error("cutoff k must be at least 1")]
    ZeroCutoff,
    #[error("no runs were supplied")]
    NoRuns,
    #[error("the qrels are empty")]
    EmptyQrels,
    #[error("no run topic appears in the qrels")]
    NoTopicOverlap,
    #[error("score matrix shape mismatch: {systems} systems x {topics} topics but {values} values")]
    Shape {
        systems: usize,
        topics: usize,
        values: usize,
    },
    #[error("duplicate label {0} in score matrix")]
    DuplicateLabel(String),
    #[error("score {value} for system {system}, topic {topic} is outside [0, 1]")]
    OutOfRange { system: String, topic: String, value: f64 },
}

/// Gain applied to a relevance grade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Gain {
    /// g(r) = r
    #[default]
    Linear,
    /// g(r) = 2^r - 1
    Exponential,
}

impl Gain {
    pub fn apply(self, grade: u32) -> f64 {
        match self {
            Gain::Linear => grade as f64,
            Gain::Exponential if grade < 64 => ((1u64 << grade) - 1) as f64,
            Gain::Exponential => libm::exp2(grade as f64) - 1.0,
        }
    }
}

/// nDCG at a rank cutoff. nDCG is the only measure this crate computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeasureSpec {
    pub cutoff: usize,
    pub gain: Gain,
}

impl Default for MeasureSpec {
    fn default() -> Self {
        Self {
            cutoff: 10,
            gain: Gain::Linear,
        }
    }
}

impl MeasureSpec {
    pub fn new(cutoff: usize, gain: Gain) -> Result<Self, MeasureError> {
        if cutoff == 0 {
            return Err(MeasureError::ZeroCutoff);
        }
        Ok(Self { cutoff, gain })
    }
}

#[inline]
fn discount(rank: usize) -> f64 {
    libm::log2(rank as f64 + 1.0)
}

/// nDCG@k of a ranking against one topic's judgments.
///
/// Unjudged documents have grade 0. The ideal ranking is built from every
/// judged document of the topic. Returns 0 when no judged document has a
/// positive gain.
pub fn ndcg_at_k<'a, I>(ranking: I, judgments: &BTreeMap<String, u32>, spec: MeasureSpec) -> f64
where
    I: IntoIterator<Item = &'a str>,
{
    let k = spec.cutoff;
    let mut ideal: Vec<u32> = judgments.values().copied().filter(|&g| g > 0).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| spec.gain.apply(g) / discount(i + 1))
        .sum();
    if idcg <= 0.0 {
        return 0.0;
    }
    let dcg: f64 = ranking
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, doc)| {
            let g = judgments.get(doc).copied().unwrap_or(0);
            spec.gain.apply(g) / discount(i + 1)
        })
        .sum();
    // A ranking can never beat the ideal, but summation order can leave it a
    // few ulps above.
    (dcg / idcg).clamp(0.0, 1.0)
}

/// Row-major matrix of per-(system, topic) scores in [0, 1].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoreMatrix {
    systems: Vec<String>,
    topics: Vec<String>,
    values: Vec<f64>,
}

impl ScoreMatrix {
    pub fn new(systems: Vec<String>, topics: Vec<String>, values: Vec<f64>) -> Result<Self, MeasureError> {
        if values.len() != systems.len() * topics.len() {
            return Err(MeasureError::Shape {
                systems: systems.len(),
                topics: topics.len(),
                values: values.len(),
            });
        }
        for labels in [&systems, &topics] {
            let mut seen = BTreeSet::new();
            for l in labels.iter() {
                if !seen.insert(l.as_str()) {
                    return Err(MeasureError::DuplicateLabel(l.clone()));
                }
            }
        }
        let n = topics.len();
        if let Some(i) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(MeasureError::OutOfRange {
                system: systems[i / n].clone(),
                topic: topics[i % n].clone(),
                value: values[i],
            });
        }
        Ok(Self {
            systems,
            topics,
            values,
        })
    }

    /// Builds a matrix from rows, one per system.
    pub fn from_rows(systems: Vec<String>, topics: Vec<String>, rows: &[Vec<f64>]) -> Result<Self, MeasureError> {
        let values = rows.iter().flatten().copied().collect();
        if rows.len() != systems.len() || rows.iter().any(|r| r.len() != topics.len()) {
            return Err(MeasureError::Shape {
                systems: systems.len(),
                topics: topics.len(),
                values: rows.iter().map(Vec::len).sum(),
            });
        }
        Self::new(systems, topics, values)
    }

    pub fn systems(&self) -> &[String] {
        &self.systems
    }

    pub fn topics(&self) -> &[String] {
        &self.topics
    }

    pub fn num_systems(&self) -> usize {
        self.systems.len()
    }

    pub fn num_topics(&self) -> usize {
        self.topics.len()
    }

    pub fn get(&self, system: usize, topic: usize) -> f64 {
        self.values[system * self.topics.len() + topic]
    }

    pub fn row(&self, system: usize) -> &[f64] {
        let n = self.topics.len();
        &self.values[system * n..(system + 1) * n]
    }

    /// Per-system sums over topics, accumulated left to right.
    pub fn system_sums(&self) -> Vec<f64> {
        (0..self.systems.len())
            .map(|s| self.row(s).iter().fold(0.0, |acc, &v| acc + v))
            .collect()
    }

    /// Per-system arithmetic means, aligned with [`systems`](Self::systems).
    pub fn system_means(&self) -> Vec<f64> {
        let n = self.topics.len() as f64;
        self.system_sums().into_iter().map(|s| s / n).collect()
    }
}

/// nDCG for every (system, topic) cell. Topics are those of the qrels; a
/// system without a ranking for a topic scores 0 on it.
pub fn score_matrix(runs: &RunSet, qrels: &Qrels, spec: MeasureSpec) -> Result<ScoreMatrix, MeasureError> {
    if spec.cutoff == 0 {
        return Err(MeasureError::ZeroCutoff);
    }
    if runs.is_empty() {
        return Err(MeasureError::NoRuns);
    }
    if qrels.is_empty() {
        return Err(MeasureError::EmptyQrels);
    }
    let topics: Vec<String> = qrels.topics().map(String::from).collect();
    let overlap = runs.iter().any(|run| topics.iter().any(|t| run.ranking(t).is_some()));
    if !overlap {
        return Err(MeasureError::NoTopicOverlap);
    }
    let systems: Vec<String> = runs.systems().map(String::from).collect();
    let mut values = Vec::with_capacity(systems.len() * topics.len());
    for run in runs.iter() {
        for topic in &topics {
            let judged = qrels.topic(topic).expect("topic comes from qrels");
            let v = match run.ranking(topic) {
                Some(r) => ndcg_at_k(r.iter().map(|d| d.doc_id.as_str()), judged, spec),
                None => 0.0,
            };
            values.push(v);
        }
    }
    ScoreMatrix::new(systems, topics, values)
}

/// Mean score per system over all topics.
pub fn mean_scores(sm: &ScoreMatrix) -> BTreeMap<String, f64> {
    sm.systems.iter().cloned().zip(sm.system_means()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trec::{parse_qrels, parse_run};
    use alloc::string::ToString;
    use alloc::vec;
    use approx::assert_abs_diff_eq;

    fn judgments(pairs: &[(&str, u32)]) -> BTreeMap<String, u32> {
        pairs.iter().map(|(d, g)| (d.to_string(), *g)).collect()
    }

    #[test]
    fn zero_gain_ranking_scores_zero() {
        let j = judgments(&[("A", 3), ("B", 0)]);
        assert_eq!(ndcg_at_k(["B", "X", "Y"], &j, MeasureSpec::default()), 0.0);
    }

    #[test]
    fn ideal_ordering_scores_one() {
        let j = judgments(&[("A", 3), ("B", 2), ("C", 1), ("D", 0)]);
        assert_abs_diff_eq!(
            ndcg_at_k(["A", "B", "C", "D"], &j, MeasureSpec::default()),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn worked_example() {
        // DCG = 1/log2(2) + 3/log2(3), IDCG = 3/log2(2) + 1/log2(3)
        let j = judgments(&[("A", 3), ("B", 1)]);
        let v = ndcg_at_k(["B", "A"], &j, MeasureSpec::default());
        assert_abs_diff_eq!(v, 0.79671, epsilon = 1e-5);
    }

    #[test]
    fn no_positive_judgment_scores_zero() {
        let j = judgments(&[("A", 0)]);
        assert_eq!(ndcg_at_k(["A"], &j, MeasureSpec::default()), 0.0);
    }

    #[test]
    fn cutoff_truncates_both_sides() {
        let j = judgments(&[("A", 1), ("B", 1), ("C", 1)]);
        let spec = MeasureSpec::new(1, Gain::Linear).unwrap();
        assert_eq!(ndcg_at_k(["X", "A"], &j, spec), 0.0);
        assert_eq!(ndcg_at_k(["C", "X"], &j, spec), 1.0);
        assert_eq!(MeasureSpec::new(0, Gain::Linear), Err(MeasureError::ZeroCutoff));
    }

    #[test]
    fn exponential_gain_values() {
        assert_eq!(Gain::Exponential.apply(0), 0.0);
        assert_eq!(Gain::Exponential.apply(3), 7.0);
        assert_eq!(Gain::Exponential.apply(70), libm::exp2(70.0) - 1.0);
    }

    #[test]
    fn single_cell_matrix() {
        let q = parse_qrels("1 0 A 2\n1 0 B 1\n").unwrap().qrels;
        let run = parse_run("1 Q0 A 1 2.0 s\n1 Q0 B 2 1.0 s\n", None).unwrap();
        let runs = RunSet::from_runs([run]).unwrap();
        let sm = score_matrix(&runs, &q, MeasureSpec::default()).unwrap();
        assert_eq!(sm.num_systems(), 1);
        assert_eq!(sm.row(0), &[1.0]);
    }

    #[test]
    fn missing_topic_scores_zero() {
        let q = parse_qrels("1 0 A 2\n2 0 B 1\n").unwrap().qrels;
        let run = parse_run("1 Q0 A 1 2.0 s\n", None).unwrap();
        let runs = RunSet::from_runs([run]).unwrap();
        let sm = score_matrix(&runs, &q, MeasureSpec::default()).unwrap();
        assert_eq!(sm.row(0), &[1.0, 0.0]);
    }

    #[test]
    fn disjoint_topics_are_a_configuration_error() {
        let q = parse_qrels("1 0 A 2\n").unwrap().qrels;
        let run = parse_run("9 Q0 A 1 2.0 s\n", None).unwrap();
        let runs = RunSet::from_runs([run]).unwrap();
        assert_eq!(
            score_matrix(&runs, &q, MeasureSpec::default()),
            Err(MeasureError::NoTopicOverlap)
        );
        assert_eq!(
            score_matrix(&RunSet::new(), &q, MeasureSpec::default()),
            Err(MeasureError::NoRuns)
        );
    }

    #[test]
    fn means() {
        let sm = ScoreMatrix::from_rows(
            vec!["a".into(), "b".into()],
            vec!["1".into(), "2".into()],
            &[vec![1.0, 0.0], vec![0.25, 0.25]],
        )
        .unwrap();
        let m = mean_scores(&sm);
        assert_eq!(m["a"], 0.5);
        assert_eq!(m["b"], 0.25);
    }

    #[test]
    fn matrix_validation() {
        let s = vec!["a".to_string()];
        let t = vec!["1".to_string()];
        assert!(matches!(
            ScoreMatrix::new(s.clone(), t.clone(), vec![1.5]),
            Err(MeasureError::OutOfRange { .. })
        ));
        assert!(matches!(
            ScoreMatrix::new(s.clone(), t.clone(), vec![]),
            Err(MeasureError::Shape { .. })
        ));
        assert_eq!(
            ScoreMatrix::new(vec!["a".into(), "a".into()], t, vec![0.0, 0.0]),
            Err(MeasureError::DuplicateLabel("a".into()))
        );
    }
}
