//! A small deterministic test collection: five systems of decreasing quality
//! over ten topics with fifty judged documents each.

use std::path::Path;

use qrelcmp_core::trec::{serialize_run, Qrels, QrelsRole, Run, RunSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::io;

pub const MINI_SEED: u64 = 20_240_601;
pub const MINI_TOPICS: usize = 10;
pub const MINI_DOCS: usize = 50;
pub const MINI_UNJUDGED: usize = 10;
pub const MINI_SYSTEMS: [(&str, f64); 5] = [
    ("sysA", 0.9),
    ("sysB", 0.7),
    ("sysC", 0.5),
    ("sysD", 0.3),
    ("sysE", 0.1),
];

fn grade(u: f64) -> u32 {
    match u {
        u if u < 0.55 => 0,
        u if u < 0.75 => 1,
        u if u < 0.90 => 2,
        _ => 3,
    }
}

/// Shape of a synthetic collection.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectionSpec<'a> {
    pub seed: u64,
    pub topics: usize,
    pub docs: usize,
    pub unjudged: usize,
    /// System names with a quality in [0, 1].
    pub systems: &'a [(&'a str, f64)],
}

/// Qrels and runs of the mini collection.
pub fn mini_collection() -> (Qrels, RunSet) {
    synthetic_collection(&CollectionSpec {
        seed: MINI_SEED,
        topics: MINI_TOPICS,
        docs: MINI_DOCS,
        unjudged: MINI_UNJUDGED,
        systems: &MINI_SYSTEMS,
    })
}

/// Every system ranks all judged documents plus a few unjudged ones by
/// `q * grade + (1 - q) * 3 * noise`, rounded to four decimals.
pub fn synthetic_collection(spec: &CollectionSpec<'_>) -> (Qrels, RunSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut qrels = Qrels::new(QrelsRole::GroundTruth);
    for t in 1..=spec.topics {
        for d in 0..spec.docs {
            let g = grade(rng.gen());
            qrels
                .insert(&format!("{t}"), &format!("T{t}-D{d:02}"), g)
                .expect("unique ids");
        }
    }
    let mut runs = Vec::new();
    for &(name, q) in spec.systems {
        let per_topic: Vec<(String, Vec<(String, f64)>)> = qrels
            .topics()
            .map(|topic| {
                let judged = qrels.topic(topic).expect("listed topic");
                let mut docs: Vec<(String, f64)> = judged
                    .iter()
                    .map(|(d, &g)| (d.clone(), q * g as f64 + (1.0 - q) * 3.0 * rng.gen::<f64>()))
                    .collect();
                docs.extend((0..spec.unjudged).map(|u| (format!("T{topic}-U{u:02}"), 3.0 * rng.gen::<f64>())));
                for (_, s) in docs.iter_mut() {
                    *s = (*s * 1e4).round() / 1e4;
                }
                (topic.to_string(), docs)
            })
            .collect();
        runs.push(Run::from_scored(name, per_topic).expect("unique docs"));
    }
    (qrels, RunSet::from_runs(runs).expect("unique systems"))
}

/// Writes `qrels.txt` and `runs/<system>.run` under `dir`.
pub fn write_mini_collection(dir: &Path) -> Result<()> {
    let (qrels, runs) = mini_collection();
    io::ensure_dir(&dir.join("runs"))?;
    io::write_qrels(&dir.join("qrels.txt"), &qrels)?;
    for run in runs.iter() {
        io::write_atomic(
            &dir.join("runs").join(format!("{}.run", run.system())),
            serialize_run(run).as_bytes(),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let (q, r) = mini_collection();
        assert_eq!(q.len(), MINI_TOPICS * MINI_DOCS);
        assert_eq!(r.len(), 5);
        assert!(q.iter().any(|x| x.2 == 3));
        assert_eq!(mini_collection(), (q, r));
    }

    #[test]
    fn bundled_files_match_generator() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mini");
        let parsed = io::read_qrels(&dir.join("qrels.txt"), 3).unwrap();
        let runs = io::load_runs_dir(&dir.join("runs"), false, None).unwrap();
        assert_eq!((parsed.qrels, runs), mini_collection());
    }
}
