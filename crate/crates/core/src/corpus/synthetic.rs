//! Seeded synthetic corpora for desk-scale runs.
//!
//! Accounts are split into contiguous community blocks; the last account of
//! each block also engages with the next block, so the interaction graph has
//! a few bridging accounts. Positive tweets embed 3-5 tokens from the
//! lexicons of one or two stratagems among neutral filler; negatives are
//! filler with an occasional single decoy theme token.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{index, IndexedRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    anonymize_account, AccountId, Corpus, InteractionEvent, InteractionKind, TweetRecord,
};
use crate::error::{Error, Result};
use crate::stratagem::{Stratagem, StratagemLabel};

const INFORM: &str = include_str!("../../data/lexicons/inform.txt");
const INVOKE: &str = include_str!("../../data/lexicons/invoke.txt");
const DEFLECT: &str = include_str!("../../data/lexicons/deflect.txt");
const RECAST: &str = include_str!("../../data/lexicons/recast.txt");
const NEUTRAL: &str = include_str!("../../data/lexicons/neutral.txt");

pub const SYNTHETIC_ANNOTATOR: &str = "synthetic";

fn parse_lexicon(raw: &str) -> Vec<String> {
    raw.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThemeLexicons {
    pub themes: BTreeMap<Stratagem, Vec<String>>,
    pub neutral: Vec<String>,
}

impl Default for ThemeLexicons {
    fn default() -> Self {
        let themes = [
            (Stratagem::Inform, INFORM),
            (Stratagem::Invoke, INVOKE),
            (Stratagem::Deflect, DEFLECT),
            (Stratagem::Recast, RECAST),
        ]
        .into_iter()
        .map(|(s, raw)| (s, parse_lexicon(raw)))
        .collect();
        ThemeLexicons {
            themes,
            neutral: parse_lexicon(NEUTRAL),
        }
    }
}

impl ThemeLexicons {
    fn all_theme_tokens(&self) -> Vec<&str> {
        self.themes.values().flatten().map(String::as_str).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub n_tweets: usize,
    pub n_positive: usize,
    pub vocab_themes: ThemeLexicons,
    pub seed: u64,
    pub n_accounts: usize,
    pub n_communities: usize,
    /// Probability that a negative tweet carries one theme token.
    pub decoy_rate: f64,
    pub salt: Vec<u8>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_tweets: 882,
            n_positive: 62,
            vocab_themes: ThemeLexicons::default(),
            seed: 1,
            n_accounts: 120,
            n_communities: 4,
            decoy_rate: 0.1,
            salt: b"liminal-synthetic".to_vec(),
        }
    }
}

impl SyntheticSpec {
    pub fn new(n_tweets: usize, n_positive: usize, seed: u64) -> Self {
        SyntheticSpec {
            n_tweets,
            n_positive,
            seed,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_positive > self.n_tweets {
            return Err(Error::InvalidConfig(format!(
                "n_positive {} exceeds n_tweets {}",
                self.n_positive, self.n_tweets
            )));
        }
        if self.n_communities == 0 || self.n_accounts < 2 * self.n_communities {
            return Err(Error::InvalidConfig(
                "need at least two accounts per community".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.decoy_rate) {
            return Err(Error::InvalidConfig("decoy_rate must be in [0, 1]".into()));
        }
        if self.vocab_themes.neutral.is_empty()
            || self.vocab_themes.themes.len() != 4
            || self.vocab_themes.themes.values().any(Vec::is_empty)
        {
            return Err(Error::InvalidConfig(
                "lexicons need neutral words and four non-empty themes".into(),
            ));
        }
        Ok(())
    }
}

/// Start of the synthetic collection window (inclusive).
pub fn window_start() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2022, 10, 1, 0, 0, 0).unwrap()
}

/// End of the synthetic collection window (inclusive).
pub fn window_end() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2022, 11, 8, 23, 59, 59).unwrap()
}

/// Raw platform id of synthetic account `i`.
pub fn synthetic_raw_id(i: usize) -> String {
    format!("acct{i:04}")
}

struct Accounts {
    ids: Vec<AccountId>,
    community: Vec<usize>,
    blocks: Vec<Vec<usize>>,
}

impl Accounts {
    fn new(spec: &SyntheticSpec) -> Result<Self> {
        let ids = (0..spec.n_accounts)
            .map(|i| anonymize_account(&synthetic_raw_id(i), &spec.salt))
            .collect::<Result<Vec<_>>>()?;
        let community: Vec<usize> = (0..spec.n_accounts)
            .map(|i| i * spec.n_communities / spec.n_accounts)
            .collect();
        let mut blocks = vec![Vec::new(); spec.n_communities];
        for (i, &c) in community.iter().enumerate() {
            blocks[c].push(i);
        }
        Ok(Accounts {
            ids,
            community,
            blocks,
        })
    }

    fn bridge(&self, c: usize) -> usize {
        *self.blocks[c].last().unwrap()
    }

    /// Picks an engaging account for content from community `c`.
    fn engager(&self, c: usize, rng: &mut ChaCha8Rng) -> usize {
        let roll: f64 = rng.random();
        let n_comm = self.blocks.len();
        if roll < 0.82 {
            *self.blocks[c].choose(rng).unwrap()
        } else if roll < 0.94 {
            // bridge of this block or of the previous one
            let prev = (c + n_comm - 1) % n_comm;
            if rng.random_bool(0.5) {
                self.bridge(c)
            } else {
                self.bridge(prev)
            }
        } else {
            rng.random_range(0..self.ids.len())
        }
    }
}

fn compose_text(words: &[String], rng: &mut ChaCha8Rng) -> String {
    let mut out = String::new();
    for (i, w) in words.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        if i == 0 {
            let mut chars = w.chars();
            if let Some(first) = chars.next() {
                out.extend(first.to_uppercase());
                out.push_str(chars.as_str());
            }
        } else {
            out.push_str(w);
        }
    }
    out.push(if rng.random_bool(0.2) { '?' } else { '.' });
    out
}

fn insert_at_random(words: &mut Vec<String>, token: String, rng: &mut ChaCha8Rng) {
    let pos = rng.random_range(0..=words.len());
    words.insert(pos, token);
}

/// Generates a corpus plus ground-truth labels for every tweet; exactly
/// `spec.n_positive` labels are propaganda.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(Corpus, BTreeMap<String, StratagemLabel>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let accounts = Accounts::new(spec)?;
    let lex = &spec.vocab_themes;
    let decoys = lex.all_theme_tokens();
    let labeled_at = Utc.with_ymd_and_hms(2023, 2, 25, 0, 0, 0).unwrap();
    let span = (window_end() - window_start()).num_seconds();

    // campaign vocabulary is head-heavy: word r of a lexicon has weight (r+1)^-1.5
    let zipf: BTreeMap<Stratagem, WeightedIndex<f64>> = lex
        .themes
        .iter()
        .map(|(&s, words)| {
            let w = WeightedIndex::new((0..words.len()).map(|r| 1.0 / ((r + 1) as f64).powf(1.5)));
            w.map(|w| (s, w))
                .map_err(|e| Error::InvalidConfig(format!("{} lexicon: {e}", s.name())))
        })
        .collect::<Result<_>>()?;

    let positives: BTreeSet<usize> = index::sample(&mut rng, spec.n_tweets, spec.n_positive)
        .into_iter()
        .collect();

    let mut tweets = Vec::with_capacity(spec.n_tweets);
    let mut labels = BTreeMap::new();
    let mut interactions = Vec::new();

    for i in 0..spec.n_tweets {
        let tweet_id = format!("t{i:06}");
        let positive = positives.contains(&i);
        let author = if positive && rng.random_bool(0.7) {
            *accounts.blocks[0].choose(&mut rng).unwrap()
        } else {
            rng.random_range(0..spec.n_accounts)
        };
        let created_at = window_start() + Duration::seconds(rng.random_range(0..=span));

        let mut label = StratagemLabel::negative(SYNTHETIC_ANNOTATOR, labeled_at);
        let mut words: Vec<String>;
        if positive {
            words = (0..rng.random_range(6..=14))
                .map(|_| lex.neutral.choose(&mut rng).unwrap().clone())
                .collect();
            let n_strat = if rng.random_bool(0.3) { 2 } else { 1 };
            let chosen: Vec<Stratagem> = index::sample(&mut rng, 4, n_strat)
                .into_iter()
                .map(|k| Stratagem::ALL[k])
                .collect();
            for &s in &chosen {
                label = label.with(s, true);
            }
            for _ in 0..rng.random_range(3..=5) {
                let s = *chosen.choose(&mut rng).unwrap();
                let mut token = lex.themes[&s][zipf[&s].sample(&mut rng)].clone();
                if rng.random_bool(0.25) {
                    token.insert(0, '#');
                }
                insert_at_random(&mut words, token, &mut rng);
            }
        } else {
            words = (0..rng.random_range(8..=18))
                .map(|_| lex.neutral.choose(&mut rng).unwrap().clone())
                .collect();
            if rng.random_bool(spec.decoy_rate) {
                let token = decoys.choose(&mut rng).unwrap().to_string();
                insert_at_random(&mut words, token, &mut rng);
            }
        }
        let text = compose_text(&words, &mut rng);
        tweets.push(TweetRecord::new(
            tweet_id.clone(),
            accounts.ids[author].clone(),
            created_at,
            text,
        )?);
        labels.insert(tweet_id.clone(), label);

        let community = accounts.community[author];
        for (kind, max) in [(InteractionKind::Like, 5), (InteractionKind::Retweet, 3)] {
            let mut engaged = BTreeSet::new();
            for _ in 0..rng.random_range(0..=max) {
                let who = accounts.engager(community, &mut rng);
                if who != author && engaged.insert(who) {
                    let delay = Duration::seconds(rng.random_range(60..=86_400));
                    interactions.push(InteractionEvent::new(
                        kind,
                        accounts.ids[who].clone(),
                        accounts.ids[author].clone(),
                        Some(tweet_id.clone()),
                        created_at + delay,
                    )?);
                }
            }
        }
    }

    let follow_at = window_start();
    for (a, &c) in accounts.community.iter().enumerate() {
        let mut followed = BTreeSet::new();
        for _ in 0..3 {
            let b = *accounts.blocks[c].choose(&mut rng).unwrap();
            if b != a {
                followed.insert(b);
            }
        }
        if a == accounts.bridge(c) {
            let next = (c + 1) % spec.n_communities;
            for _ in 0..2 {
                followed.insert(*accounts.blocks[next].choose(&mut rng).unwrap());
            }
        }
        for b in followed {
            interactions.push(InteractionEvent::new(
                InteractionKind::FollowOrFriend,
                accounts.ids[a].clone(),
                accounts.ids[b].clone(),
                None,
                follow_at,
            )?);
        }
    }

    let provenance = format!(
        "synthetic seed={} tweets={} positives={} accounts={} communities={} window=2022-10-01..2022-11-08",
        spec.seed, spec.n_tweets, spec.n_positive, spec.n_accounts, spec.n_communities
    );
    let corpus = Corpus::new(tweets, interactions, provenance)?;
    Ok((corpus, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::save_corpus;

    #[test]
    fn mirrored_counts() {
        let (corpus, labels) = generate_synthetic(&SyntheticSpec::new(882, 62, 1)).unwrap();
        assert_eq!(corpus.tweets.len(), 882);
        assert_eq!(labels.len(), 882);
        assert_eq!(labels.values().filter(|l| l.is_propaganda()).count(), 62);
        assert!(corpus.external_interactions().is_empty());
    }

    #[test]
    fn zero_positives() {
        let (_, labels) = generate_synthetic(&SyntheticSpec::new(10, 0, 5)).unwrap();
        assert!(labels.values().all(|l| !l.is_propaganda()));
    }

    #[test]
    fn rejects_more_positives_than_tweets() {
        assert!(matches!(
            generate_synthetic(&SyntheticSpec::new(10, 11, 5)),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn same_seed_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SyntheticSpec::new(200, 20, 9);
        let (a, _) = generate_synthetic(&spec).unwrap();
        let (b, _) = generate_synthetic(&spec).unwrap();
        let pa = dir.path().join("a.jsonl");
        let pb = dir.path().join("b.jsonl");
        save_corpus(&a, &pa).unwrap();
        save_corpus(&b, &pb).unwrap();
        assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());
        assert_eq!(
            std::fs::read(crate::corpus::interactions_path(&pa)).unwrap(),
            std::fs::read(crate::corpus::interactions_path(&pb)).unwrap()
        );
        let (c, _) = generate_synthetic(&SyntheticSpec::new(200, 20, 10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn positives_carry_theme_tokens() {
        let spec = SyntheticSpec::new(300, 40, 3);
        let (corpus, labels) = generate_synthetic(&spec).unwrap();
        let lex = ThemeLexicons::default();
        for t in &corpus.tweets {
            let label = &labels[&t.tweet_id];
            let lowered = t.text.to_lowercase();
            let words: Vec<&str> = lowered
                .split(|c: char| !c.is_alphanumeric())
                .filter(|w| !w.is_empty())
                .collect();
            let hits = |s: Stratagem| words.iter().filter(|w| lex.themes[&s].iter().any(|x| x == *w)).count();
            let total: usize = Stratagem::ALL.iter().map(|&s| hits(s)).sum();
            if label.is_propaganda() {
                assert!((3..=5).contains(&total), "{}: {total}", t.text);
                for s in Stratagem::ALL {
                    if hits(s) > 0 {
                        assert!(label.flag(s));
                    }
                }
            } else {
                assert!(total <= 1);
            }
        }
    }
}
