//! Four-stratagem label schema and the append-only label store.
//!
//! A tweet is propaganda when at least one of inform, invoke, deflect or
//! recast is marked. The store keeps every revision; the current state is
//! whatever replaying the log produces.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::rfc3339;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stratagem {
    Inform,
    Invoke,
    Deflect,
    Recast,
}

impl Stratagem {
    pub const ALL: [Stratagem; 4] = [
        Stratagem::Inform,
        Stratagem::Invoke,
        Stratagem::Deflect,
        Stratagem::Recast,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stratagem::Inform => "inform",
            Stratagem::Invoke => "invoke",
            Stratagem::Deflect => "deflect",
            Stratagem::Recast => "recast",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StratagemLabel {
    pub inform: bool,
    pub invoke: bool,
    pub deflect: bool,
    pub recast: bool,
    pub annotator: String,
    #[serde(with = "rfc3339")]
    pub labeled_at: DateTime<Utc>,
}

impl StratagemLabel {
    pub fn negative(annotator: impl Into<String>, labeled_at: DateTime<Utc>) -> Self {
        StratagemLabel {
            inform: false,
            invoke: false,
            deflect: false,
            recast: false,
            annotator: annotator.into(),
            labeled_at,
        }
    }

    pub fn with(mut self, stratagem: Stratagem, value: bool) -> Self {
        *self.flag_mut(stratagem) = value;
        self
    }

    pub fn flag(&self, stratagem: Stratagem) -> bool {
        match stratagem {
            Stratagem::Inform => self.inform,
            Stratagem::Invoke => self.invoke,
            Stratagem::Deflect => self.deflect,
            Stratagem::Recast => self.recast,
        }
    }

    fn flag_mut(&mut self, stratagem: Stratagem) -> &mut bool {
        match stratagem {
            Stratagem::Inform => &mut self.inform,
            Stratagem::Invoke => &mut self.invoke,
            Stratagem::Deflect => &mut self.deflect,
            Stratagem::Recast => &mut self.recast,
        }
    }

    pub fn is_propaganda(&self) -> bool {
        is_propaganda(self)
    }
}

/// One true stratagem is enough.
pub fn is_propaganda(label: &StratagemLabel) -> bool {
    label.inform || label.invoke || label.deflect || label.recast
}

/// One line of the label log file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub tweet_id: String,
    #[serde(flatten)]
    pub label: StratagemLabel,
}

pub type RevisionId = usize;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelStore {
    current: BTreeMap<String, StratagemLabel>,
    log: Vec<LabelRecord>,
}

impl LabelStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds state from a log; later records win.
    pub fn replay(log: impl IntoIterator<Item = LabelRecord>) -> Self {
        let mut store = LabelStore::new();
        for record in log {
            store.apply(record);
        }
        store
    }

    fn apply(&mut self, record: LabelRecord) -> RevisionId {
        self.current
            .insert(record.tweet_id.clone(), record.label.clone());
        self.log.push(record);
        self.log.len() - 1
    }

    pub fn get(&self, tweet_id: &str) -> Option<&StratagemLabel> {
        self.current.get(tweet_id)
    }

    pub fn current(&self) -> &BTreeMap<String, StratagemLabel> {
        &self.current
    }

    pub fn log(&self) -> &[LabelRecord] {
        &self.log
    }

    pub fn len(&self) -> usize {
        self.current.len()
    }

    pub fn is_empty(&self) -> bool {
        self.current.is_empty()
    }

    pub fn positive_count(&self) -> usize {
        self.current.values().filter(|l| l.is_propaganda()).count()
    }

    /// tweet_id -> propaganda flag for the current state.
    pub fn targets(&self) -> BTreeMap<&str, bool> {
        self.current
            .iter()
            .map(|(k, v)| (k.as_str(), v.is_propaganda()))
            .collect()
    }

    pub fn read_log(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Ok(LabelStore::new());
        }
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut records = Vec::new();
        for (n, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: LabelRecord = serde_json::from_str(line).map_err(|e| {
                Error::format(format!("{}:{}", path.display(), n + 1), e.to_string())
            })?;
            records.push(record);
        }
        Ok(LabelStore::replay(records))
    }

    pub fn write_log(&self, path: &Path) -> Result<()> {
        crate::corpus::io::write_json_lines(path, &self.log)
    }
}

/// Records a label revision for a tweet known to the working corpus.
pub fn upsert_label(
    store: &mut LabelStore,
    known_tweets: &HashSet<&str>,
    tweet_id: &str,
    label: StratagemLabel,
) -> Result<RevisionId> {
    if !known_tweets.contains(tweet_id) {
        return Err(Error::UnknownTweet(tweet_id.to_owned()));
    }
    Ok(store.apply(LabelRecord {
        tweet_id: tweet_id.to_owned(),
        label,
    }))
}

/// Appends one record to a log file on disk and flushes it.
pub fn append_to_log(path: &Path, record: &LabelRecord) -> Result<()> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let line = serde_json::to_string(record).expect("label serializes");
    writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
    f.flush().map_err(|e| Error::io(path, e))
}
