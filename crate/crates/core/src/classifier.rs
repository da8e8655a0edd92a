//! Stratagem classifier: training, scoring, and evaluation against labels
//! and analyst adjudications.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{rfc3339, Corpus, TweetRecord};
use crate::error::{Error, Result};
use crate::neural::{self, Adam, AdamConfig, Architecture, Params};
use crate::parallel::Execution;
use crate::stratagem::LabelStore;
use crate::textenc::{build_vocab, encode, Vocabulary};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const META_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Multiplies the learning rate after every epoch; 1.0 keeps it fixed.
    pub lr_decay: f64,
    pub validation_fraction: f64,
    pub seed: u64,
    /// Stop after this many epochs without a better checkpoint; 0 never stops early.
    pub patience: usize,
    /// Loss weight of positive examples.
    pub pos_weight: f64,
    pub input_length: usize,
    pub vocab_size: usize,
    pub dense_vectors: usize,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: 30,
            batch_size: 32,
            learning_rate: 1e-3,
            lr_decay: 1.0,
            validation_fraction: 0.2,
            seed: 1,
            patience: 8,
            pos_weight: 1.0,
            input_length: 64,
            vocab_size: crate::textenc::VOCAB_SIZE,
            dense_vectors: 16,
            execution: Execution::default(),
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad(format!("validation_fraction must be in (0, 1), got {}", self.validation_fraction));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) || !(self.lr_decay > 0.0) {
            return bad("learning_rate and lr_decay must be positive".into());
        }
        if !(self.pos_weight > 0.0 && self.pos_weight.is_finite()) {
            return bad("pos_weight must be positive".into());
        }
        Architecture::new(self.vocab_size, self.input_length, self.dense_vectors).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochStats>,
    /// 1-based epoch whose weights were kept.
    pub best_epoch: usize,
    pub train_size: usize,
    pub validation_size: usize,
    pub stopped_early: bool,
}

impl TrainingHistory {
    pub fn best(&self) -> &EpochStats {
        &self.epochs[self.best_epoch - 1]
    }
}

/// Sidecar next to a checkpoint binding it to a vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelMeta {
    pub format_version: u32,
    pub vocab_sha256: String,
    pub input_length: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub arch: Architecture,
    pub params: Params<f32>,
    pub vocab: Vocabulary,
    pub threshold: f64,
}

pub fn meta_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("meta.json")
}

impl ClassifierModel {
    pub fn encode(&self, text: &str) -> Vec<usize> {
        encode(text, &self.vocab, self.arch.input_length)
    }

    /// Probabilities in input order.
    pub fn score_texts<S: AsRef<str> + Sync>(&self, texts: &[S], exec: Execution) -> Result<Vec<f32>> {
        let batch: Vec<Vec<usize>> = texts.iter().map(|t| self.encode(t.as_ref())).collect();
        neural::predict(&self.arch, &self.params, &batch, exec)
    }

    pub fn meta(&self) -> ModelMeta {
        ModelMeta {
            format_version: META_VERSION,
            vocab_sha256: self.vocab.digest(),
            input_length: self.arch.input_length,
            threshold: self.threshold,
        }
    }

    /// Writes the checkpoint, its sidecar and the vocabulary file.
    pub fn save(&self, checkpoint: &Path, vocab_path: &Path) -> Result<()> {
        neural::save_checkpoint(checkpoint, &self.arch, &self.params)?;
        self.vocab.save(vocab_path)?;
        let meta = meta_path(checkpoint);
        let json = serde_json::to_string_pretty(&self.meta()).expect("meta serializes");
        fs::write(&meta, json + "\n").map_err(|e| Error::io(&meta, e))
    }

    pub fn load(checkpoint: &Path, vocab_path: &Path) -> Result<Self> {
        let (arch, params) = neural::load_checkpoint(checkpoint)?;
        let meta_file = meta_path(checkpoint);
        let raw = fs::read_to_string(&meta_file).map_err(|e| Error::io(&meta_file, e))?;
        let meta: ModelMeta =
            serde_json::from_str(&raw).map_err(|e| Error::format(meta_file.display().to_string(), e.to_string()))?;
        if meta.format_version != META_VERSION {
            return Err(Error::format(meta_file.display().to_string(), format!("unsupported version {}", meta.format_version)));
        }
        let vocab = Vocabulary::load(vocab_path, arch.input_dim)?;
        let found = vocab.digest();
        if found != meta.vocab_sha256 {
            return Err(Error::VocabularyMismatch {
                expected: meta.vocab_sha256,
                found,
            });
        }
        if meta.input_length != arch.input_length {
            return Err(Error::Inconsistent(format!(
                "sidecar input_length {} differs from checkpoint {}",
                meta.input_length, arch.input_length
            )));
        }
        Ok(ClassifierModel {
            arch,
            params,
            vocab,
            threshold: meta.threshold,
        })
    }
}

#[derive(Debug, Clone)]
struct Example {
    indices: Vec<usize>,
    target: f32,
}

/// Splits labeled ids per class with a seeded shuffle; each class puts
/// `round(fraction * n)` (at least one) into validation.
fn stratified_split<'a>(ids: &[(&'a str, bool)], fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<(&'a str, bool)>, Vec<(&'a str, bool)>) {
    let mut train = Vec::new();
    let mut val = Vec::new();
    for class in [false, true] {
        let mut members: Vec<(&str, bool)> = ids.iter().copied().filter(|&(_, y)| y == class).collect();
        members.shuffle(rng);
        let n_val = ((fraction * members.len() as f64).round() as usize).clamp(1, members.len() - 1);
        val.extend_from_slice(&members[..n_val]);
        train.extend_from_slice(&members[n_val..]);
    }
    (train, val)
}

fn evaluate_split(arch: &Architecture, params: &Params<f32>, examples: &[Example], pos_weight: f32, exec: Execution) -> Result<(f64, f64)> {
    let batch: Vec<Vec<usize>> = examples.iter().map(|e| e.indices.clone()).collect();
    let targets: Vec<f32> = examples.iter().map(|e| e.target).collect();
    let probs = neural::predict(arch, params, &batch, exec)?;
    let loss = neural::bce_loss_weighted(&probs, &targets, pos_weight) as f64;
    let correct = probs
        .iter()
        .zip(&targets)
        .filter(|&(&p, &y)| (p as f64 >= DEFAULT_THRESHOLD) == (y == 1.0))
        .count();
    Ok((loss, correct as f64 / examples.len() as f64))
}

/// Trains on every labeled tweet of `corpus`. The vocabulary comes from the
/// training split only. Returns the best-validation checkpoint (accuracy,
/// then lower loss).
pub fn train(corpus: &Corpus, labels: &LabelStore, cfg: &TrainingConfig) -> Result<(ClassifierModel, TrainingHistory)> {
    cfg.validate()?;
    let targets = labels.targets();
    let mut labeled: Vec<(&str, bool)> = Vec::new();
    for (&id, &y) in &targets {
        if corpus.tweet(id).is_none() {
            return Err(Error::UnknownTweet(id.to_owned()));
        }
        labeled.push((id, y));
    }
    let positives = labeled.iter().filter(|(_, y)| *y).count();
    let negatives = labeled.len() - positives;
    if positives < 2 || negatives < 2 {
        return Err(Error::InvalidInput(format!(
            "training needs at least two examples of each class, got {positives} positive and {negatives} negative"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (train_ids, val_ids) = stratified_split(&labeled, cfg.validation_fraction, &mut rng);
    let text = |id: &str| corpus.tweet(id).expect("checked above").text.as_str();
    let train_texts: Vec<&str> = train_ids.iter().map(|&(id, _)| text(id)).collect();
    let vocab = build_vocab(&train_texts, cfg.vocab_size)?;
    let arch = Architecture::new(cfg.vocab_size, cfg.input_length, cfg.dense_vectors)?;
    let to_examples = |ids: &[(&str, bool)]| -> Vec<Example> {
        ids.iter()
            .map(|&(id, y)| Example {
                indices: encode(text(id), &vocab, arch.input_length),
                target: f32::from(u8::from(y)),
            })
            .collect()
    };
    let mut train_set = to_examples(&train_ids);
    let val_set = to_examples(&val_ids);

    let mut params = Params::<f32>::init(&arch, cfg.seed);
    let mut adam = Adam::new(
        &arch,
        AdamConfig {
            learning_rate: cfg.learning_rate,
            ..AdamConfig::default()
        },
    );
    let pos_weight = cfg.pos_weight as f32;
    let mut history = Vec::new();
    let mut best: Option<(f64, f64, usize, Params<f32>)> = None;
    let mut stale = 0;
    let mut stopped_early = false;

    for epoch in 1..=cfg.epochs {
        train_set.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in train_set.chunks(cfg.batch_size) {
            let batch: Vec<Vec<usize>> = chunk.iter().map(|e| e.indices.clone()).collect();
            let y: Vec<f32> = chunk.iter().map(|e| e.target).collect();
            let (loss, grads) = neural::loss_and_grad(&arch, &params, &batch, &y, pos_weight, cfg.execution)?;
            loss_sum += loss as f64 * chunk.len() as f64;
            adam.step(&mut params, &grads);
        }
        let (val_loss, val_accuracy) = evaluate_split(&arch, &params, &val_set, pos_weight, cfg.execution)?;
        history.push(EpochStats {
            epoch,
            learning_rate: adam.learning_rate(),
            train_loss: loss_sum / train_set.len() as f64,
            val_loss,
            val_accuracy,
        });
        let improved = match &best {
            None => true,
            Some((acc, loss, _, _)) => val_accuracy > *acc || (val_accuracy == *acc && val_loss < *loss),
        };
        if improved {
            best = Some((val_accuracy, val_loss, epoch, params.clone()));
            stale = 0;
        } else {
            stale += 1;
            if cfg.patience > 0 && stale >= cfg.patience {
                stopped_early = true;
                break;
            }
        }
        adam.set_learning_rate(adam.learning_rate() * cfg.lr_decay);
    }

    let (_, _, best_epoch, params) = best.expect("at least one epoch ran");
    Ok((
        ClassifierModel {
            arch,
            params,
            vocab,
            threshold: DEFAULT_THRESHOLD,
        },
        TrainingHistory {
            epochs: history,
            best_epoch,
            train_size: train_ids.len(),
            validation_size: val_ids.len(),
            stopped_early,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub tweet_id: String,
    pub score: f64,
    pub flagged: bool,
}

/// Scores every tweet; flagged iff `score >= threshold`. Sorted by score
/// descending, then tweet id.
pub fn classify(model: &ClassifierModel, tweets: &[TweetRecord], threshold: f64, exec: Execution) -> Result<Vec<Classification>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidConfig(format!("threshold must be in [0, 1], got {threshold}")));
    }
    let texts: Vec<&str> = tweets.iter().map(|t| t.text.as_str()).collect();
    let scores = model.score_texts(&texts, exec)?;
    let mut out: Vec<Classification> = tweets
        .iter()
        .zip(scores)
        .map(|(t, s)| Classification {
            tweet_id: t.tweet_id.clone(),
            score: s as f64,
            flagged: s as f64 >= threshold,
        })
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.tweet_id.cmp(&b.tweet_id)));
    Ok(out)
}

pub fn save_classifications(path: &Path, rows: &[Classification]) -> Result<()> {
    crate::corpus::io::write_json_lines(path, rows)
}

pub fn load_classifications(path: &Path) -> Result<Vec<Classification>> {
    let (rows, skipped) = crate::corpus::io::read_json_lines::<Classification, _>(path, |c| (0.0..=1.0).contains(&c.score))?;
    if skipped > 0 {
        return Err(Error::format(path.display().to_string(), format!("{skipped} malformed classification lines")));
    }
    Ok(rows)
}

// ---- adjudication -----------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ObviousTrue,
    #[serde(alias = "context_true")]
    ContextDependentTrue,
    FalsePositive,
}

impl Verdict {
    pub fn is_true_positive(self) -> bool {
        self != Verdict::FalsePositive
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdjudicationRecord {
    pub tweet_id: String,
    pub verdict: Verdict,
    pub analyst: String,
    #[serde(with = "rfc3339")]
    pub adjudicated_at: DateTime<Utc>,
}

/// Append-only adjudication log; the latest verdict per tweet wins.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AdjudicationStore {
    current: BTreeMap<String, Verdict>,
    log: Vec<AdjudicationRecord>,
}

impl AdjudicationStore {
    pub fn replay(log: impl IntoIterator<Item = AdjudicationRecord>) -> Self {
        let mut store = AdjudicationStore::default();
        for r in log {
            store.apply(r);
        }
        store
    }

    fn apply(&mut self, record: AdjudicationRecord) -> usize {
        self.current.insert(record.tweet_id.clone(), record.verdict);
        self.log.push(record);
        self.log.len() - 1
    }

    /// Records a verdict for a tweet in `flagged`.
    pub fn record(&mut self, flagged: &HashSet<&str>, record: AdjudicationRecord) -> Result<usize> {
        if !flagged.contains(record.tweet_id.as_str()) {
            return Err(Error::UnknownTweet(record.tweet_id));
        }
        Ok(self.apply(record))
    }

    pub fn get(&self, tweet_id: &str) -> Option<Verdict> {
        self.current.get(tweet_id).copied()
    }

    pub fn current(&self) -> &BTreeMap<String, Verdict> {
        &self.current
    }

    pub fn log(&self) -> &[AdjudicationRecord] {
        &self.log
    }

    pub fn len(&self) -> usize {
        self.current.len()
    }

    pub fn is_empty(&self) -> bool {
        self.current.is_empty()
    }

    pub fn read_log(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Ok(AdjudicationStore::default());
        }
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut records = Vec::new();
        for (n, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            records.push(
                serde_json::from_str(line)
                    .map_err(|e| Error::format(format!("{}:{}", path.display(), n + 1), e.to_string()))?,
            );
        }
        Ok(AdjudicationStore::replay(records))
    }

    pub fn write_log(&self, path: &Path) -> Result<()> {
        crate::corpus::io::write_json_lines(path, &self.log)
    }
}

pub fn append_adjudication(path: &Path, record: &AdjudicationRecord) -> Result<()> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let line = serde_json::to_string(record).expect("record serializes");
    writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
    f.flush().map_err(|e| Error::io(path, e))
}

/// Flagged tweets split by verdict. Rates are percentages of `flagged`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FindingsBreakdown {
    pub flagged: usize,
    pub obvious_true: usize,
    pub context_dependent_true: usize,
    pub false_positive: usize,
    pub unadjudicated: usize,
    pub obvious_true_pct: f64,
    pub context_dependent_true_pct: f64,
    pub false_positive_pct: f64,
}

impl FindingsBreakdown {
    /// Obvious plus context-dependent share of the flagged set.
    pub fn true_positive_pct(&self) -> f64 {
        self.obvious_true_pct + self.context_dependent_true_pct
    }
}

pub fn findings_breakdown<'a>(flagged: impl IntoIterator<Item = &'a str>, adjudications: &AdjudicationStore) -> FindingsBreakdown {
    let mut counts: BTreeMap<Option<Verdict>, usize> = BTreeMap::new();
    let mut total = 0;
    for id in flagged {
        total += 1;
        *counts.entry(adjudications.get(id)).or_default() += 1;
    }
    let count = |v: Option<Verdict>| counts.get(&v).copied().unwrap_or(0);
    let pct = |n: usize| if total == 0 { 0.0 } else { 100.0 * n as f64 / total as f64 };
    let (o, c, f) = (
        count(Some(Verdict::ObviousTrue)),
        count(Some(Verdict::ContextDependentTrue)),
        count(Some(Verdict::FalsePositive)),
    );
    FindingsBreakdown {
        flagged: total,
        obvious_true: o,
        context_dependent_true: c,
        false_positive: f,
        unadjudicated: count(None),
        obvious_true_pct: pct(o),
        context_dependent_true_pct: pct(c),
        false_positive_pct: pct(f),
    }
}

// ---- evaluation -------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub total: usize,
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
    pub accuracy: f64,
    /// 0 when nothing is flagged.
    pub precision: f64,
    /// 0 when there are no positives.
    pub recall: f64,
    pub findings: Option<FindingsBreakdown>,
}

/// Confusion counts of `predictions` against `labels`. Every prediction
/// must have a label.
pub fn evaluate_predictions(
    predictions: &[Classification],
    labels: &LabelStore,
    adjudications: Option<&AdjudicationStore>,
) -> Result<EvalReport> {
    if predictions.is_empty() {
        return Err(Error::InvalidInput("nothing to evaluate".into()));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for p in predictions {
        let label = labels
            .get(&p.tweet_id)
            .ok_or_else(|| Error::InvalidInput(format!("tweet {} has no label", p.tweet_id)))?;
        match (p.flagged, label.is_propaganda()) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(EvalReport {
        total: predictions.len(),
        true_positive: tp,
        false_positive: fp,
        true_negative: tn,
        false_negative: fn_,
        accuracy: ratio(tp + tn, predictions.len()),
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        findings: adjudications.map(|a| {
            findings_breakdown(predictions.iter().filter(|p| p.flagged).map(|p| p.tweet_id.as_str()), a)
        }),
    })
}

/// Classifies the labeled tweets of `corpus` and scores them.
pub fn evaluate(
    model: &ClassifierModel,
    corpus: &Corpus,
    labels: &LabelStore,
    adjudications: Option<&AdjudicationStore>,
    exec: Execution,
) -> Result<EvalReport> {
    let tweets: Vec<TweetRecord> = corpus
        .tweets
        .iter()
        .filter(|t| labels.get(&t.tweet_id).is_some())
        .cloned()
        .collect();
    if tweets.is_empty() {
        return Err(Error::InvalidInput("no labeled tweets to evaluate".into()));
    }
    let predictions = classify(model, &tweets, model.threshold, exec)?;
    evaluate_predictions(&predictions, labels, adjudications)
}
