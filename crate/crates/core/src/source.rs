//! Social-graph source abstraction and a deterministic file-backed fixture.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use chrono::{DateTime, Utc};

use crate::corpus::{load_corpus, AccountId, Corpus, InteractionKind, TweetRecord};
use crate::error::{Error, Result};

/// Platform limit on how many likers can be listed for a tweet.
pub const MAX_LIKERS: usize = 100;

/// The five queries the sampler and graph builder need from a platform.
pub trait SocialGraphSource {
    /// Tweets by `author` with `start <= created_at <= end`, oldest first.
    fn tweets_by(
        &self,
        author: &AccountId,
        start: DateTime<Utc>,
        end: DateTime<Utc>,
    ) -> Result<Vec<TweetRecord>>;

    /// Distinct retweeters in ascending id order.
    fn retweeters_of(&self, tweet_id: &str) -> Vec<AccountId>;

    /// At most [`MAX_LIKERS`] distinct likers, most recent first.
    fn likers_of(&self, tweet_id: &str) -> Vec<AccountId>;

    /// Accounts following `author`, ascending.
    fn followers_of(&self, author: &AccountId) -> Vec<AccountId>;

    /// Accounts `author` follows, ascending.
    fn friends_of(&self, author: &AccountId) -> Vec<AccountId>;
}

/// In-memory universe indexed once at construction. Read-only afterwards.
#[derive(Debug, Clone, Default)]
pub struct FixtureSource {
    tweets_by_author: HashMap<AccountId, Vec<TweetRecord>>,
    retweeters: HashMap<String, Vec<AccountId>>,
    likers: HashMap<String, Vec<AccountId>>,
    followers: HashMap<AccountId, Vec<AccountId>>,
    friends: HashMap<AccountId, Vec<AccountId>>,
}

impl FixtureSource {
    pub fn new(corpus: &Corpus) -> Self {
        let mut tweets_by_author: HashMap<AccountId, Vec<TweetRecord>> = HashMap::new();
        for t in &corpus.tweets {
            tweets_by_author
                .entry(t.author.clone())
                .or_default()
                .push(t.clone());
        }
        for list in tweets_by_author.values_mut() {
            list.sort_by(|a, b| {
                a.created_at
                    .cmp(&b.created_at)
                    .then_with(|| a.tweet_id.cmp(&b.tweet_id))
            });
        }

        let mut retweet_sets: HashMap<String, BTreeSet<AccountId>> = HashMap::new();
        // latest like per (tweet, account)
        let mut like_times: HashMap<String, BTreeMap<AccountId, DateTime<Utc>>> = HashMap::new();
        let mut followers: HashMap<AccountId, BTreeSet<AccountId>> = HashMap::new();
        let mut friends: HashMap<AccountId, BTreeSet<AccountId>> = HashMap::new();

        for e in &corpus.interactions {
            match (e.kind, &e.tweet_id) {
                (InteractionKind::Retweet, Some(id)) => {
                    retweet_sets
                        .entry(id.clone())
                        .or_default()
                        .insert(e.actor.clone());
                }
                (InteractionKind::Like, Some(id)) => {
                    let slot = like_times
                        .entry(id.clone())
                        .or_default()
                        .entry(e.actor.clone())
                        .or_insert(e.observed_at);
                    *slot = (*slot).max(e.observed_at);
                }
                (InteractionKind::FollowOrFriend, _) => {
                    followers
                        .entry(e.target.clone())
                        .or_default()
                        .insert(e.actor.clone());
                    friends
                        .entry(e.actor.clone())
                        .or_default()
                        .insert(e.target.clone());
                }
                _ => {}
            }
        }

        let likers = like_times
            .into_iter()
            .map(|(tweet, by_account)| {
                let mut ordered: Vec<(AccountId, DateTime<Utc>)> = by_account.into_iter().collect();
                // newest first; equal timestamps fall back to ascending id
                ordered.sort_by(|(a, ta), (b, tb)| tb.cmp(ta).then_with(|| a.cmp(b)));
                ordered.truncate(MAX_LIKERS);
                (tweet, ordered.into_iter().map(|(a, _)| a).collect())
            })
            .collect();

        FixtureSource {
            tweets_by_author,
            retweeters: flatten(retweet_sets),
            likers,
            followers: flatten(followers),
            friends: flatten(friends),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Ok(FixtureSource::new(&load_corpus(path)?.corpus))
    }
}

fn flatten<K: std::hash::Hash + Eq>(m: HashMap<K, BTreeSet<AccountId>>) -> HashMap<K, Vec<AccountId>> {
    m.into_iter()
        .map(|(k, v)| (k, v.into_iter().collect()))
        .collect()
}

impl SocialGraphSource for FixtureSource {
    fn tweets_by(
        &self,
        author: &AccountId,
        start: DateTime<Utc>,
        end: DateTime<Utc>,
    ) -> Result<Vec<TweetRecord>> {
        if start > end {
            return Err(Error::InvalidInput(format!(
                "date range start {start} is after end {end}"
            )));
        }
        Ok(self
            .tweets_by_author
            .get(author)
            .map(|list| {
                list.iter()
                    .filter(|t| t.created_at >= start && t.created_at <= end)
                    .cloned()
                    .collect()
            })
            .unwrap_or_default())
    }

    fn retweeters_of(&self, tweet_id: &str) -> Vec<AccountId> {
        self.retweeters.get(tweet_id).cloned().unwrap_or_default()
    }

    fn likers_of(&self, tweet_id: &str) -> Vec<AccountId> {
        self.likers.get(tweet_id).cloned().unwrap_or_default()
    }

    fn followers_of(&self, author: &AccountId) -> Vec<AccountId> {
        self.followers.get(author).cloned().unwrap_or_default()
    }

    fn friends_of(&self, author: &AccountId) -> Vec<AccountId> {
        self.friends.get(author).cloned().unwrap_or_default()
    }
}
