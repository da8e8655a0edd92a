use std::collections::HashSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{Corpus, InteractionEvent, TweetRecord};
use crate::error::{Error, Result};

/// Fraction of malformed lines tolerated before loading fails.
pub const MAX_MALFORMED_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadReport {
    pub corpus: Corpus,
    pub skipped_tweet_lines: usize,
    pub skipped_interaction_lines: usize,
}

impl LoadReport {
    pub fn skipped(&self) -> usize {
        self.skipped_tweet_lines + self.skipped_interaction_lines
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

/// `dir/corpus.jsonl` -> `dir/corpus.interactions.jsonl`
pub fn interactions_path(tweets_path: &Path) -> PathBuf {
    sibling(tweets_path, "interactions.jsonl")
}

pub fn provenance_path(tweets_path: &Path) -> PathBuf {
    sibling(tweets_path, "provenance.txt")
}

/// Parses JSON lines, skipping blank lines. Lines that fail to parse or are
/// rejected by `accept` are counted; more than 10% of them is a format error.
pub(crate) fn read_json_lines<T, F>(path: &Path, mut accept: F) -> Result<(Vec<T>, usize)>
where
    T: DeserializeOwned,
    F: FnMut(&T) -> bool,
{
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    let mut total = 0usize;
    let mut skipped = 0usize;
    for line in raw.lines() {
        if line.trim().is_empty() {
            continue;
        }
        total += 1;
        match serde_json::from_str::<T>(line) {
            Ok(record) if accept(&record) => out.push(record),
            _ => skipped += 1,
        }
    }
    if total > 0 && skipped as f64 > MAX_MALFORMED_FRACTION * total as f64 {
        return Err(Error::format(
            path.display().to_string(),
            format!("{skipped} of {total} lines malformed"),
        ));
    }
    Ok((out, skipped))
}

pub(crate) fn write_json_lines<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).expect("record serializes");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Loads tweets from `path` plus the optional sibling interaction and
/// provenance files.
pub fn load_corpus(path: &Path) -> Result<LoadReport> {
    let mut seen = HashSet::new();
    let (tweets, skipped_tweet_lines) = read_json_lines::<TweetRecord, _>(path, |t| {
        t.validate().is_ok() && seen.insert(t.tweet_id.clone())
    })?;

    let ipath = interactions_path(path);
    let (interactions, skipped_interaction_lines) = if ipath.exists() {
        read_json_lines::<InteractionEvent, _>(&ipath, |e| e.validate().is_ok())?
    } else {
        (Vec::new(), 0)
    };

    let ppath = provenance_path(path);
    let provenance = if ppath.exists() {
        fs::read_to_string(&ppath).map_err(|e| Error::io(&ppath, e))?
    } else {
        String::new()
    };

    Ok(LoadReport {
        corpus: Corpus {
            tweets,
            interactions,
            provenance,
        },
        skipped_tweet_lines,
        skipped_interaction_lines,
    })
}

/// Writes the tweet file, its interaction sibling and provenance sidecar.
pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    write_json_lines(path, &corpus.tweets)?;
    write_json_lines(&interactions_path(path), &corpus.interactions)?;
    let ppath = provenance_path(path);
    fs::write(&ppath, &corpus.provenance).map_err(|e| Error::io(&ppath, e))
}
