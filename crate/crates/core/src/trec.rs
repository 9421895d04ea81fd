//! TREC run (6-column) and qrels (4-column) formats.
//!
//! Run lines are `topic Q0 docid rank score tag`; qrels lines are
//! `topic iteration docid grade`. Fields are separated by any run of ASCII
//! whitespace and blank lines are ignored. Serialization always uses a single
//! space and terminates every line with `\n`.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt::Write;

/// Default upper bound on relevance grades (TREC Deep Learning uses 0..=3).
pub const DEFAULT_MAX_GRADE: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TrecError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate judgment for topic {topic}, document {doc}")]
    DuplicateJudgment { topic: String, doc: String },
    #[error("system {system}, topic {topic}: document {doc} is ranked more than once")]
    DuplicateDocument { system: String, topic: String, doc: String },
    #[error("line {line}: grade {grade} exceeds the maximum grade {max}")]
    GradeAboveMax { line: usize, grade: u32, max: u32 },
    #[error("line {line}: run tag {found} differs from {expected}; one file must hold one system")]
    MixedTags {
        line: usize,
        expected: String,
        found: String,
    },
    #[error("run input is empty and no system tag was supplied")]
    MissingTag,
    #[error("system {0} appears in more than one run")]
    DuplicateSystem(String),
}

/// Which side of a comparison a set of judgments plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum QrelsRole {
    #[default]
    GroundTruth,
    Candidate,
}

/// Relevance judgments keyed by topic, then document.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
    role: QrelsRole,
    len: usize,
}

impl Qrels {
    pub fn new(role: QrelsRole) -> Self {
        Self {
            judgments: BTreeMap::new(),
            role,
            len: 0,
        }
    }

    pub fn role(&self) -> QrelsRole {
        self.role
    }

    pub fn with_role(mut self, role: QrelsRole) -> Self {
        self.role = role;
        self
    }

    /// Adds one judgment; a second judgment for the same pair is rejected.
    pub fn insert(&mut self, topic: &str, doc: &str, grade: u32) -> Result<(), TrecError> {
        let docs = self.judgments.entry(topic.to_string()).or_default();
        if docs.contains_key(doc) {
            return Err(TrecError::DuplicateJudgment {
                topic: topic.to_string(),
                doc: doc.to_string(),
            });
        }
        docs.insert(doc.to_string(), grade);
        self.len += 1;
        Ok(())
    }

    /// Overwrites the grade of an existing judgment. Returns `false` if the
    /// pair is not judged.
    pub fn set_grade(&mut self, topic: &str, doc: &str, grade: u32) -> bool {
        match self.judgments.get_mut(topic).and_then(|d| d.get_mut(doc)) {
            Some(g) => {
                *g = grade;
                true
            }
            None => false,
        }
    }

    pub fn grade(&self, topic: &str, doc: &str) -> Option<u32> {
        self.judgments.get(topic)?.get(doc).copied()
    }

    /// All judgments of one topic, keyed by document id.
    pub fn topic(&self, topic: &str) -> Option<&BTreeMap<String, u32>> {
        self.judgments.get(topic)
    }

    pub fn topics(&self) -> impl Iterator<Item = &str> + '_ {
        self.judgments.keys().map(String::as_str)
    }

    pub fn num_topics(&self) -> usize {
        self.judgments.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Iterates `(topic, doc, grade)` in lexicographic `(topic, doc)` order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, u32)> + '_ {
        self.judgments
            .iter()
            .flat_map(|(t, docs)| docs.iter().map(move |(d, &g)| (t.as_str(), d.as_str(), g)))
    }

    /// True when both sets judge exactly the same `(topic, doc)` pairs.
    pub fn same_universe(&self, other: &Qrels) -> bool {
        self.len == other.len
            && self.judgments.len() == other.judgments.len()
            && self
                .judgments
                .iter()
                .zip(other.judgments.iter())
                .all(|((ta, da), (tb, db))| ta == tb && da.keys().eq(db.keys()))
    }
}

/// Result of [`parse_qrels`]: the judgments plus how many negative grades
/// were clamped to zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedQrels {
    pub qrels: Qrels,
    pub clamped_negative: usize,
}

/// Parses qrels with the default maximum grade.
pub fn parse_qrels(text: &str) -> Result<ParsedQrels, TrecError> {
    parse_qrels_with_max(text, DEFAULT_MAX_GRADE)
}

pub fn parse_qrels_with_max(text: &str, max_grade: u32) -> Result<ParsedQrels, TrecError> {
    let mut qrels = Qrels::new(QrelsRole::GroundTruth);
    let mut clamped_negative = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let fields: Vec<&str> = raw.split_ascii_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 4 {
            return Err(parse_err(
                line,
                alloc::format!("expected 4 columns, found {}", fields.len()),
            ));
        }
        let grade: i64 = fields[3]
            .parse()
            .map_err(|_| parse_err(line, alloc::format!("grade {:?} is not an integer", fields[3])))?;
        let grade = if grade < 0 {
            clamped_negative += 1;
            0
        } else {
            u32::try_from(grade).map_err(|_| parse_err(line, alloc::format!("grade {grade} is out of range")))?
        };
        if grade > max_grade {
            return Err(TrecError::GradeAboveMax {
                line,
                grade,
                max: max_grade,
            });
        }
        qrels.insert(fields[0], fields[2], grade)?;
    }
    Ok(ParsedQrels {
        qrels,
        clamped_negative,
    })
}

/// Emits qrels as `topic 0 doc grade` lines sorted by `(topic, doc)`.
pub fn serialize_qrels(qrels: &Qrels) -> String {
    let mut out = String::new();
    for (topic, doc, grade) in qrels.iter() {
        let _ = writeln!(out, "{topic} 0 {doc} {grade}");
    }
    out
}

/// One retrieved document. `rank` is 1-based after normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedDoc {
    pub doc_id: String,
    pub score: f64,
    pub rank: u32,
}

/// One system's rankings, keyed by topic.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Run {
    system: String,
    topics: BTreeMap<String, Vec<RankedDoc>>,
}

fn ranking_order(a: &RankedDoc, b: &RankedDoc) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| b.doc_id.cmp(&a.doc_id))
}

impl Run {
    pub fn new(system: &str) -> Self {
        Self {
            system: system.to_string(),
            topics: BTreeMap::new(),
        }
    }

    /// Builds a run from unsorted per-topic document lists and normalizes it.
    pub fn from_scored(
        system: &str,
        topics: impl IntoIterator<Item = (String, Vec<(String, f64)>)>,
    ) -> Result<Self, TrecError> {
        let mut run = Run::new(system);
        for (topic, docs) in topics {
            let list = run.topics.entry(topic).or_default();
            list.extend(
                docs.into_iter()
                    .map(|(doc_id, score)| RankedDoc { doc_id, score, rank: 0 }),
            );
        }
        run.validate_unique()?;
        run.normalize();
        Ok(run)
    }

    pub fn system(&self) -> &str {
        &self.system
    }

    pub fn ranking(&self, topic: &str) -> Option<&[RankedDoc]> {
        self.topics.get(topic).map(Vec::as_slice)
    }

    pub fn topics(&self) -> impl Iterator<Item = (&str, &[RankedDoc])> + '_ {
        self.topics.iter().map(|(t, v)| (t.as_str(), v.as_slice()))
    }

    pub fn num_topics(&self) -> usize {
        self.topics.len()
    }

    /// Sorts every topic by score descending, then doc id descending, and
    /// reassigns ranks `1..=n`. Idempotent.
    pub fn normalize(&mut self) {
        for docs in self.topics.values_mut() {
            docs.sort_by(ranking_order);
            for (i, d) in docs.iter_mut().enumerate() {
                d.rank = i as u32 + 1;
            }
        }
    }

    fn validate_unique(&self) -> Result<(), TrecError> {
        for (topic, docs) in &self.topics {
            let mut ids: Vec<&str> = docs.iter().map(|d| d.doc_id.as_str()).collect();
            ids.sort_unstable();
            if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
                return Err(TrecError::DuplicateDocument {
                    system: self.system.clone(),
                    topic: topic.clone(),
                    doc: w[0].to_string(),
                });
            }
        }
        Ok(())
    }
}

/// Parses one system's run. The tag column names the system unless
/// `system_tag_override` is given; a file mixing tags is rejected.
pub fn parse_run(text: &str, system_tag_override: Option<&str>) -> Result<Run, TrecError> {
    let mut tag: Option<String> = system_tag_override.map(str::to_string);
    let mut topics: BTreeMap<String, Vec<RankedDoc>> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let fields: Vec<&str> = raw.split_ascii_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 6 {
            return Err(parse_err(
                line,
                alloc::format!("expected 6 columns, found {}", fields.len()),
            ));
        }
        fields[3]
            .parse::<i64>()
            .map_err(|_| parse_err(line, alloc::format!("rank {:?} is not an integer", fields[3])))?;
        let score: f64 = fields[4]
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| parse_err(line, alloc::format!("score {:?} is not a finite number", fields[4])))?;
        if system_tag_override.is_none() {
            match &tag {
                None => tag = Some(fields[5].to_string()),
                Some(t) if t != fields[5] => {
                    return Err(TrecError::MixedTags {
                        line,
                        expected: t.clone(),
                        found: fields[5].to_string(),
                    })
                }
                Some(_) => {}
            }
        }
        topics.entry(fields[0].to_string()).or_default().push(RankedDoc {
            doc_id: fields[2].to_string(),
            score,
            rank: 0,
        });
    }
    let system = tag.ok_or(TrecError::MissingTag)?;
    let mut run = Run { system, topics };
    run.validate_unique()?;
    run.normalize();
    Ok(run)
}

/// Emits a run in 6-column format, topics in lexicographic order and
/// documents in rank order. Scores use the shortest exact decimal form.
pub fn serialize_run(run: &Run) -> String {
    let mut out = String::new();
    for (topic, docs) in &run.topics {
        for d in docs {
            let _ = writeln!(out, "{topic} Q0 {} {} {} {}", d.doc_id, d.rank, d.score, run.system);
        }
    }
    out
}

/// A fleet of systems keyed by system tag.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunSet {
    runs: BTreeMap<String, Run>,
}

impl RunSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, run: Run) -> Result<(), TrecError> {
        if self.runs.contains_key(&run.system) {
            return Err(TrecError::DuplicateSystem(run.system));
        }
        self.runs.insert(run.system.clone(), run);
        Ok(())
    }

    pub fn get(&self, system: &str) -> Option<&Run> {
        self.runs.get(system)
    }

    /// Runs in system-tag order.
    pub fn iter(&self) -> impl Iterator<Item = &Run> + '_ {
        self.runs.values()
    }

    pub fn systems(&self) -> impl Iterator<Item = &str> + '_ {
        self.runs.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }
}

impl RunSet {
    /// Collects runs, rejecting duplicate system tags.
    pub fn from_runs(runs: impl IntoIterator<Item = Run>) -> Result<Self, TrecError> {
        let mut set = RunSet::new();
        for run in runs {
            set.insert(run)?;
        }
        Ok(set)
    }
}

fn parse_err(line: usize, message: String) -> TrecError {
    TrecError::Parse { line, message }
}
