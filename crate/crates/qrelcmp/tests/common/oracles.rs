//! Independent reference implementations used to cross-check the library.

use std::collections::BTreeMap;

use qrelcmp_core::measures::{Gain, ScoreMatrix};
use qrelcmp_core::sigtest::TIE_TOLERANCE;
use qrelcmp_core::trec::{Qrels, RunSet};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn dcg(grades: &[u32], k: usize, gain: Gain) -> f64 {
    grades
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| {
            let gain = match gain {
                Gain::Linear => g as f64,
                Gain::Exponential => 2f64.powi(g as i32) - 1.0,
            };
            gain / ((i + 2) as f64).log2()
        })
        .sum()
}

fn orderings(items: &[u32]) -> Vec<Vec<u32>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in orderings(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// nDCG with the ideal DCG taken as the maximum over every ordering of the
/// judged documents.
pub fn brute_ndcg(ranking: &[String], judged: &BTreeMap<String, u32>, k: usize, gain: Gain) -> f64 {
    let grades: Vec<u32> = judged.values().copied().collect();
    let ideal = orderings(&grades).iter().map(|p| dcg(p, k, gain)).fold(0.0, f64::max);
    if ideal == 0.0 {
        return 0.0;
    }
    let ranked: Vec<u32> = ranking.iter().map(|d| judged.get(d).copied().unwrap_or(0)).collect();
    dcg(&ranked, k, gain) / ideal
}

pub fn random_topic(rng: &mut ChaCha8Rng) -> (Vec<String>, BTreeMap<String, u32>) {
    let judged: BTreeMap<String, u32> = (0..rng.gen_range(1..=6))
        .map(|i| (format!("j{i}"), rng.gen_range(0..=3)))
        .collect();
    let mut pool: Vec<String> = judged.keys().cloned().collect();
    pool.extend((0..rng.gen_range(0..5)).map(|i| format!("u{i}")));
    pool.shuffle(rng);
    pool.truncate(rng.gen_range(0..=pool.len()));
    (pool, judged)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> ScoreMatrix {
    let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.gen::<f64>()).collect()).collect();
    ScoreMatrix::from_rows(
        (0..m).map(|i| format!("s{i}")).collect(),
        (0..n).map(|t| format!("t{t}")).collect(),
        &rows,
    )
    .unwrap()
}

fn lehmer_permutation(mut index: usize, m: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..m).collect();
    let fact = |k: usize| (1..=k).product::<usize>();
    let mut out = Vec::with_capacity(m);
    for k in (0..m).rev() {
        out.push(pool.remove(index / fact(k)));
        index %= fact(k);
    }
    out
}

/// Exact Tukey HSD p-values, pairs in (0,1), (0,2), ..., (1,2), ... order,
/// by enumerating every assignment as a mixed-radix number.
pub fn brute_force_tukey(sm: &ScoreMatrix) -> Vec<f64> {
    let (m, n) = (sm.num_systems(), sm.num_topics());
    let fact: usize = (1..=m).product();
    let total = fact.pow(n as u32);
    let means = sm.system_means();
    let mut diffs = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            diffs.push((means[i] - means[j]).abs());
        }
    }
    let mut counts = vec![0usize; diffs.len()];
    for code in 0..total {
        let mut rest = code;
        let mut sums = vec![0.0; m];
        for t in 0..n {
            let perm = lehmer_permutation(rest % fact, m);
            rest /= fact;
            for s in 0..m {
                sums[s] += sm.get(perm[s], t);
            }
        }
        let hi = sums.iter().cloned().fold(f64::MIN, f64::max) / n as f64;
        let lo = sums.iter().cloned().fold(f64::MAX, f64::min) / n as f64;
        for (c, d) in counts.iter_mut().zip(&diffs) {
            if hi - lo >= d - TIE_TOLERANCE {
                *c += 1;
            }
        }
    }
    counts.into_iter().map(|c| c as f64 / total as f64).collect()
}

/// Two-sided paired randomization test over all 2^n sign assignments.
pub fn paired_randomization_p(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let observed = d.iter().sum::<f64>().abs() / n as f64;
    let total = 1usize << n;
    let hits = (0..total)
        .filter(|mask| {
            let s: f64 = d
                .iter()
                .enumerate()
                .map(|(t, v)| if mask >> t & 1 == 1 { -v } else { *v })
                .sum();
            s.abs() / n as f64 >= observed - TIE_TOLERANCE
        })
        .count();
    hits as f64 / total as f64
}

/// Per-topic popularity selection: count retrievals in the top `depth`,
/// sort by count then id, and label the first `|relevant|` documents.
pub fn popularity_oracle(gt: &Qrels, runs: &RunSet, depth: usize) -> BTreeMap<(String, String), u32> {
    let mut out = BTreeMap::new();
    for topic in gt.topics() {
        let judged = gt.topic(topic).unwrap();
        let relevant = judged.values().filter(|&&g| g >= 1).count();
        let mut scored: Vec<(usize, String)> = judged
            .keys()
            .map(|doc| {
                let count = runs
                    .iter()
                    .filter(|run| {
                        run.ranking(topic)
                            .and_then(|r| r.iter().position(|d| &d.doc_id == doc))
                            .is_some_and(|p| p < depth)
                    })
                    .count();
                (count, doc.clone())
            })
            .collect();
        scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        for (i, (_, doc)) in scored.into_iter().enumerate() {
            out.insert((topic.to_string(), doc), u32::from(i < relevant));
        }
    }
    out
}
