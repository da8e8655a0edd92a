//! Tokenization, a fixed-size frequency vocabulary and index encoding.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const VOCAB_SIZE: usize = 1536;
pub const PAD: usize = 0;
pub const OOV: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const OOV_TOKEN: &str = "<oov>";
pub const URL_TOKEN: &str = "<url>";
pub const MENTION_TOKEN: &str = "<mention>";
pub const DEFAULT_INPUT_LENGTH: usize = 64;

fn is_url(chunk: &str) -> bool {
    ["http://", "https://", "www."].iter().any(|p| chunk.starts_with(p))
}

fn push_words(text: &str, out: &mut Vec<String>) {
    out.extend(
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .map(str::to_owned),
    );
}

/// Lowercases, maps URLs and @-mentions to placeholder tokens and splits
/// everything else on non-alphanumeric characters (so `#tag` becomes `tag`).
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let mut out = Vec::new();
    for chunk in lower.split_whitespace() {
        if is_url(chunk) {
            out.push(URL_TOKEN.to_owned());
        } else if chunk == URL_TOKEN || chunk == MENTION_TOKEN {
            out.push(chunk.to_owned());
        } else if let Some(rest) = chunk.strip_prefix('@') {
            let handle_end = rest
                .find(|c: char| !(c.is_alphanumeric() || c == '_'))
                .unwrap_or(rest.len());
            if handle_end > 0 {
                out.push(MENTION_TOKEN.to_owned());
            }
            push_words(&rest[handle_end..], &mut out);
        } else {
            push_words(chunk, &mut out);
        }
    }
    out
}

/// Token ↔ index map over a fixed index space of `size` slots. Small corpora
/// leave tail indices unassigned; the index space is still `size`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    size: usize,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    fn from_tokens(size: usize, tokens: Vec<String>) -> Result<Self> {
        if size < 3 {
            return Err(Error::InvalidConfig(format!("vocabulary size {size} leaves no room for tokens")));
        }
        if tokens.len() > size {
            return Err(Error::InvalidInput(format!("{} tokens exceed vocabulary size {size}", tokens.len())));
        }
        if tokens.first().map(String::as_str) != Some(PAD_TOKEN) || tokens.get(1).map(String::as_str) != Some(OOV_TOKEN) {
            return Err(Error::InvalidInput("indices 0 and 1 must be <pad> and <oov>".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!("token {t:?} appears twice")));
            }
        }
        Ok(Vocabulary { size, tokens, index })
    }

    /// Size of the index space (the model's input dimension).
    pub fn size(&self) -> usize {
        self.size
    }

    /// Number of assigned indices, including PAD and OOV.
    pub fn assigned(&self) -> usize {
        self.tokens.len()
    }

    pub fn index_of(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(OOV)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    /// `index token` lines in ascending index order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.tokens.iter().enumerate() {
            let _ = writeln!(out, "{i} {t}");
        }
        out
    }

    /// Hex sha256 of [`Vocabulary::to_text`]; checkpoints bind to it.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path, size: usize) -> Result<Self> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut tokens = Vec::new();
        for (n, line) in raw.lines().enumerate() {
            let ctx = || format!("{}:{}", path.display(), n + 1);
            let (i, t) = line.split_once(' ').ok_or_else(|| Error::format(ctx(), "expected `index token`"))?;
            if i.parse::<usize>().ok() != Some(tokens.len()) || t.is_empty() || t.contains(char::is_whitespace) {
                return Err(Error::format(ctx(), "indices must be dense and ascending with one token each"));
            }
            tokens.push(t.to_owned());
        }
        Vocabulary::from_tokens(size, tokens).map_err(|e| Error::format(path.display().to_string(), e.to_string()))
    }
}

/// The `size - 2` most frequent tokens take indices `2..`, ties broken
/// lexicographically.
pub fn build_vocab<S: AsRef<str>>(texts: &[S], size: usize) -> Result<Vocabulary> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for t in texts {
        for tok in tokenize(t.as_ref()) {
            *counts.entry(tok).or_default() += 1;
        }
    }
    // the reserved spellings never tokenize out of text, but be safe
    counts.remove(PAD_TOKEN);
    counts.remove(OOV_TOKEN);
    if counts.is_empty() {
        return Err(Error::InvalidInput("corpus has no tokens to build a vocabulary from".into()));
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    // BTreeMap order is lexicographic already; a stable sort keeps it for ties
    ranked.sort_by(|a, b| b.1.cmp(&a.1));
    let mut tokens = vec![PAD_TOKEN.to_owned(), OOV_TOKEN.to_owned()];
    tokens.extend(ranked.into_iter().take(size.saturating_sub(2)).map(|(t, _)| t));
    Vocabulary::from_tokens(size, tokens)
}

/// Exactly `input_length` indices: right-truncated, right-padded with PAD.
pub fn encode(text: &str, vocab: &Vocabulary, input_length: usize) -> Vec<usize> {
    let mut out: Vec<usize> = tokenize(text)
        .iter()
        .take(input_length)
        .map(|t| vocab.index_of(t))
        .collect();
    out.resize(input_length, PAD);
    out
}
