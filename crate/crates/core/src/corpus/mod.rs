//! Tweet and interaction data model, account anonymization and corpus files.
//!
//! A corpus lives in a JSON-lines file of tweets (`tweet_id`, `author`,
//! `created_at`, `text`) with interactions in a sibling file
//! `<stem>.interactions.jsonl` (`kind`, `actor`, `target`, `tweet_id`,
//! `observed_at`). Free-text provenance goes to `<stem>.provenance.txt`.

pub(crate) mod io;
pub mod synthetic;

use std::collections::HashSet;
use std::fmt;

use chrono::{DateTime, SubsecRound, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use io::{interactions_path, load_corpus, provenance_path, save_corpus, LoadReport};
pub use synthetic::{generate_synthetic, SyntheticSpec, ThemeLexicons};

/// Hex characters kept from the SHA-256 digest.
pub const ACCOUNT_ID_LEN: usize = 32;

/// Longest tweet text accepted, in Unicode scalar values.
pub const MAX_TEXT_CHARS: usize = 4000;

/// Anonymized account identifier: truncated hex digest of `salt || raw_id`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AccountId(String);

impl AccountId {
    /// Accepts an already-anonymized identifier.
    pub fn parse(value: &str) -> Result<Self> {
        let ok = value.len() == ACCOUNT_ID_LEN
            && value
                .bytes()
                .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b));
        if ok {
            Ok(AccountId(value.to_owned()))
        } else {
            Err(Error::InvalidInput(format!(
                "account id must be {ACCOUNT_ID_LEN} lowercase hex chars, got {value:?}"
            )))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for AccountId {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        AccountId::parse(&value)
    }
}

impl From<AccountId> for String {
    fn from(id: AccountId) -> String {
        id.0
    }
}

impl fmt::Display for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AccountId({})", &self.0[..8])
    }
}

/// Hashes a raw platform account id. The raw id is never retained.
pub fn anonymize_account(raw_id: &str, salt: &[u8]) -> Result<AccountId> {
    if raw_id.is_empty() {
        return Err(Error::InvalidInput("raw account id is empty".into()));
    }
    let mut hasher = Sha256::new();
    hasher.update(salt);
    hasher.update(raw_id.as_bytes());
    let digest = hex::encode(hasher.finalize());
    Ok(AccountId(digest[..ACCOUNT_ID_LEN].to_owned()))
}

/// RFC 3339 with whole seconds and a `Z` suffix.
pub(crate) mod rfc3339 {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::Secs, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&raw)
            .map(|t| t.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

pub fn parse_timestamp(raw: &str) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(raw)
        .map(|t| t.with_timezone(&Utc).trunc_subsecs(0))
        .map_err(|e| Error::InvalidInput(format!("bad timestamp {raw:?}: {e}")))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub tweet_id: String,
    pub author: AccountId,
    #[serde(with = "rfc3339")]
    pub created_at: DateTime<Utc>,
    pub text: String,
}

impl TweetRecord {
    pub fn new(
        tweet_id: impl Into<String>,
        author: AccountId,
        created_at: DateTime<Utc>,
        text: impl Into<String>,
    ) -> Result<Self> {
        let record = TweetRecord {
            tweet_id: tweet_id.into(),
            author,
            created_at: created_at.trunc_subsecs(0),
            text: text.into(),
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tweet_id.is_empty() {
            return Err(Error::InvalidInput("tweet_id is empty".into()));
        }
        if self.text.chars().count() > MAX_TEXT_CHARS {
            return Err(Error::InvalidInput(format!(
                "tweet {} exceeds {MAX_TEXT_CHARS} characters",
                self.tweet_id
            )));
        }
        let epoch = Utc.timestamp_opt(0, 0).unwrap();
        if self.created_at < epoch || self.created_at > Utc::now() {
            return Err(Error::InvalidInput(format!(
                "tweet {} has out-of-range created_at {}",
                self.tweet_id, self.created_at
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionKind {
    Like,
    Retweet,
    FollowOrFriend,
}

/// A directed observation `actor -> target`; for likes and retweets the
/// target is the author of `tweet_id`, for follows it is the followed account.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub kind: InteractionKind,
    pub actor: AccountId,
    pub target: AccountId,
    pub tweet_id: Option<String>,
    #[serde(with = "rfc3339")]
    pub observed_at: DateTime<Utc>,
}

impl InteractionEvent {
    pub fn new(
        kind: InteractionKind,
        actor: AccountId,
        target: AccountId,
        tweet_id: Option<String>,
        observed_at: DateTime<Utc>,
    ) -> Result<Self> {
        let event = InteractionEvent {
            kind,
            actor,
            target,
            tweet_id,
            observed_at: observed_at.trunc_subsecs(0),
        };
        event.validate()?;
        Ok(event)
    }

    pub fn validate(&self) -> Result<()> {
        if self.actor == self.target {
            return Err(Error::InvalidInput("interaction actor equals target".into()));
        }
        match (self.kind, &self.tweet_id) {
            (InteractionKind::Like | InteractionKind::Retweet, None) => Err(Error::InvalidInput(
                format!("{:?} interaction without tweet_id", self.kind),
            )),
            (InteractionKind::FollowOrFriend, Some(_)) => Err(Error::InvalidInput(
                "follow interaction must not carry a tweet_id".into(),
            )),
            (_, Some(id)) if id.is_empty() => {
                Err(Error::InvalidInput("interaction has empty tweet_id".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub tweets: Vec<TweetRecord>,
    pub interactions: Vec<InteractionEvent>,
    pub provenance: String,
}

impl Corpus {
    /// Validates every record and the uniqueness of tweet ids.
    pub fn new(
        tweets: Vec<TweetRecord>,
        interactions: Vec<InteractionEvent>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let mut seen = HashSet::with_capacity(tweets.len());
        for t in &tweets {
            t.validate()?;
            if !seen.insert(t.tweet_id.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "duplicate tweet_id {}",
                    t.tweet_id
                )));
            }
        }
        for e in &interactions {
            e.validate()?;
        }
        Ok(Corpus {
            tweets,
            interactions,
            provenance: provenance.into(),
        })
    }

    pub fn tweet(&self, tweet_id: &str) -> Option<&TweetRecord> {
        self.tweets.iter().find(|t| t.tweet_id == tweet_id)
    }

    pub fn tweet_ids(&self) -> HashSet<&str> {
        self.tweets.iter().map(|t| t.tweet_id.as_str()).collect()
    }

    /// Interactions whose `tweet_id` does not resolve inside this corpus.
    pub fn external_interactions(&self) -> Vec<&InteractionEvent> {
        let ids = self.tweet_ids();
        self.interactions
            .iter()
            .filter(|e| matches!(&e.tweet_id, Some(id) if !ids.contains(id.as_str())))
            .collect()
    }
}
