//! Snowball sampling: layered expansion from seed accounts through sampled
//! retweeters.
//!
//! Layer `k + 1` holds accounts first discovered while expanding layer `k`.
//! Accounts in a layer are expanded in ascending id order and their tweets
//! oldest first, so RNG consumption (and thus the sample) is a pure function
//! of the source and the config.
//!
//! The sample file is JSON lines, one tagged record per line:
//!
//! ```text
//! {"record":"account","layer":0,"account":"<id>"}
//! {"record":"edge","layer":1,"discoverer":"<id>","discovered":"<id>","via_tweet":"<tweet_id>"}
//! {"record":"tweet","tweet_id":"...","author":"...","created_at":"...","text":"..."}
//! ```

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use chrono::{DateTime, Utc};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::io::{read_json_lines, write_json_lines};
use crate::corpus::{AccountId, TweetRecord};
use crate::error::{Error, Result};
use crate::source::SocialGraphSource;

#[derive(Debug, Clone)]
pub struct SnowballConfig {
    pub seeds: Vec<AccountId>,
    pub layers: usize,
    pub retweeters_per_tweet: usize,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub rng_seed: u64,
}

impl SnowballConfig {
    /// Two layers of 20 retweeters per tweet.
    pub fn new(seeds: Vec<AccountId>, start: DateTime<Utc>, end: DateTime<Utc>, rng_seed: u64) -> Self {
        SnowballConfig {
            seeds,
            layers: 2,
            retweeters_per_tweet: 20,
            start,
            end,
            rng_seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("snowball needs at least one seed".into()));
        }
        if self.layers == 0 || self.retweeters_per_tweet == 0 {
            return Err(Error::InvalidConfig(
                "layers and retweeters_per_tweet must be at least 1".into(),
            ));
        }
        if self.start > self.end {
            return Err(Error::InvalidConfig("date range start is after end".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscoveryEdge {
    /// Layer of the discovered account.
    pub layer: usize,
    pub discoverer: AccountId,
    pub discovered: AccountId,
    pub via_tweet: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SampleSet {
    pub accounts_by_layer: Vec<BTreeSet<AccountId>>,
    pub tweets: Vec<TweetRecord>,
    pub edges: Vec<DiscoveryEdge>,
}

impl SampleSet {
    pub fn account_count(&self) -> usize {
        self.accounts_by_layer.iter().map(BTreeSet::len).sum()
    }

    pub fn layer_of(&self, account: &AccountId) -> Option<usize> {
        self.accounts_by_layer
            .iter()
            .position(|layer| layer.contains(account))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut records = Vec::new();
        for (layer, accounts) in self.accounts_by_layer.iter().enumerate() {
            for account in accounts {
                records.push(SampleRecord::Account {
                    layer,
                    account: account.clone(),
                });
            }
        }
        records.extend(self.edges.iter().cloned().map(SampleRecord::Edge));
        records.extend(self.tweets.iter().cloned().map(SampleRecord::Tweet));
        write_json_lines(path, &records)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (records, skipped) = read_json_lines::<SampleRecord, _>(path, |_| true)?;
        if skipped > 0 {
            return Err(Error::format(
                path.display().to_string(),
                format!("{skipped} unreadable sample records"),
            ));
        }
        let mut set = SampleSet::default();
        for r in records {
            match r {
                SampleRecord::Account { layer, account } => {
                    if set.accounts_by_layer.len() <= layer {
                        set.accounts_by_layer.resize_with(layer + 1, BTreeSet::new);
                    }
                    set.accounts_by_layer[layer].insert(account);
                }
                SampleRecord::Edge(e) => set.edges.push(e),
                SampleRecord::Tweet(t) => set.tweets.push(t),
            }
        }
        Ok(set)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum SampleRecord {
    Account { layer: usize, account: AccountId },
    Edge(DiscoveryEdge),
    Tweet(TweetRecord),
}

/// Uniform sample of `min(k, pool.len())` distinct elements, returned in
/// pool order.
pub fn sample_without_replacement<T: Clone, R: Rng + ?Sized>(pool: &[T], k: usize, rng: &mut R) -> Vec<T> {
    if k >= pool.len() {
        return pool.to_vec();
    }
    let mut picked = index::sample(rng, pool.len(), k).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| pool[i].clone()).collect()
}

pub fn snowball<S: SocialGraphSource + ?Sized>(source: &S, cfg: &SnowballConfig) -> Result<SampleSet> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let seeds: BTreeSet<AccountId> = cfg.seeds.iter().cloned().collect();
    let mut seen: HashSet<AccountId> = seeds.iter().cloned().collect();
    let mut seen_tweets = HashSet::new();
    let mut sample = SampleSet {
        accounts_by_layer: vec![seeds],
        ..Default::default()
    };

    for layer in 0..cfg.layers {
        let mut next = BTreeSet::new();
        for account in &sample.accounts_by_layer[layer] {
            for tweet in source.tweets_by(account, cfg.start, cfg.end)? {
                let pool = source.retweeters_of(&tweet.tweet_id);
                let chosen = sample_without_replacement(&pool, cfg.retweeters_per_tweet, &mut rng);
                for found in chosen {
                    if seen.insert(found.clone()) {
                        sample.edges.push(DiscoveryEdge {
                            layer: layer + 1,
                            discoverer: account.clone(),
                            discovered: found.clone(),
                            via_tweet: tweet.tweet_id.clone(),
                        });
                        next.insert(found);
                    }
                }
                if seen_tweets.insert(tweet.tweet_id.clone()) {
                    sample.tweets.push(tweet);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        sample.accounts_by_layer.push(next);
    }
    Ok(sample)
}
