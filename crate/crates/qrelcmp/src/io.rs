//! Reading TREC files from disk and writing outputs atomically.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use log::warn;
use qrelcmp_core::trec::{parse_qrels_with_max, parse_run, serialize_qrels, ParsedQrels, Qrels, Run, RunSet};
use rayon::prelude::*;

use crate::error::{Error, Result};

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn read_qrels(path: &Path, max_grade: u32) -> Result<ParsedQrels> {
    let text = read_to_string(path)?;
    let parsed = parse_qrels_with_max(&text, max_grade).map_err(|source| Error::Trec {
        path: path.to_path_buf(),
        source,
    })?;
    if parsed.clamped_negative > 0 {
        warn!(
            "{}: clamped {} negative grade(s) to 0",
            path.display(),
            parsed.clamped_negative
        );
    }
    Ok(parsed)
}

pub fn read_run(path: &Path, tag_override: Option<&str>) -> Result<Run> {
    let text = read_to_string(path)?;
    parse_run(&text, tag_override).map_err(|source| Error::Trec {
        path: path.to_path_buf(),
        source,
    })
}

/// Regular, non-hidden files of `dir`, sorted by name.
pub fn run_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        let hidden = entry.file_name().to_string_lossy().starts_with('.');
        if path.is_file() && !hidden {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Loads every file of `dir` as one system. With `tag_from_filename` the
/// file stem names the system; otherwise the run tag column does. `only`
/// restricts the fleet to the listed system tags.
pub fn load_runs_dir(dir: &Path, tag_from_filename: bool, only: Option<&[String]>) -> Result<RunSet> {
    let files = run_files(dir)?;
    let runs: Vec<Run> = files
        .par_iter()
        .map(|path| {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
            read_run(path, if tag_from_filename { stem.as_deref() } else { None })
        })
        .collect::<Result<_>>()?;
    let runs = match only {
        Some(list) => {
            let kept: Vec<Run> = runs
                .into_iter()
                .filter(|r| list.iter().any(|s| s == r.system()))
                .collect();
            let missing: Vec<&String> = list.iter().filter(|s| !kept.iter().any(|r| r.system() == *s)).collect();
            if !missing.is_empty() {
                return Err(Error::Config(format!(
                    "{}: requested systems not found: {missing:?}",
                    dir.display()
                )));
            }
            kept
        }
        None => runs,
    };
    if runs.is_empty() {
        return Err(Error::Config(format!("{}: no run files found", dir.display())));
    }
    RunSet::from_runs(runs).map_err(|source| Error::Trec {
        path: dir.to_path_buf(),
        source,
    })
}

/// Writes `contents` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("{} is not a file path", path.display())))?;
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let tmp = path.with_file_name(format!(
        ".{}.tmp-{}-{}",
        file_name.to_string_lossy(),
        std::process::id(),
        COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_qrels(path: &Path, qrels: &Qrels) -> Result<()> {
    write_atomic(path, serialize_qrels(qrels).as_bytes())
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}
