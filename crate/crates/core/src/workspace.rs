//! On-disk workspace: fixed file names for every pipeline artifact plus a
//! `manifest.json` of sha256 digests.
//!
//! The label and adjudication logs grow while the service runs, so they are
//! left out of the manifest; everything else is checked on open.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

pub const CORPUS: &str = "corpus.jsonl";
pub const INTERACTIONS: &str = "corpus.interactions.jsonl";
pub const PROVENANCE: &str = "corpus.provenance.txt";
pub const TRUTH: &str = "truth.jsonl";
pub const SAMPLE: &str = "sample.jsonl";
pub const GRAPH: &str = "graph.txt";
pub const NODE_MAP: &str = "graph.nodes.txt";
pub const PARTITION: &str = "partition.txt";
pub const CENTRALITY: &str = "centrality.txt";
pub const LIMINAL: &str = "liminal.tsv";
pub const VOCAB: &str = "vocab.txt";
pub const CHECKPOINT: &str = "model.ckpt";
pub const MODEL_META: &str = "model.meta.json";
pub const HISTORY: &str = "history.json";
pub const CLASSIFICATIONS: &str = "classifications.jsonl";
pub const EVALUATION: &str = "evaluation.json";
pub const REPORT_LINES: &str = "report.jsonl";
pub const REPORT_TABLE: &str = "report.txt";

pub const LABELS: &str = "labels.jsonl";
pub const ADJUDICATIONS: &str = "adjudications.jsonl";

/// Files whose digests the manifest records when present.
pub const SEALED: [&str; 18] = [
    CORPUS,
    INTERACTIONS,
    PROVENANCE,
    TRUTH,
    SAMPLE,
    GRAPH,
    NODE_MAP,
    PARTITION,
    CENTRALITY,
    LIMINAL,
    VOCAB,
    CHECKPOINT,
    MODEL_META,
    HISTORY,
    CLASSIFICATIONS,
    EVALUATION,
    REPORT_LINES,
    REPORT_TABLE,
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    /// file name -> hex sha256
    pub files: BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    /// Creates the directory if needed. Does not read the manifest.
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(Workspace { root })
    }

    /// Opens an existing directory and checks the manifest when one exists.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let ws = Workspace { root: root.into() };
        if !ws.root.is_dir() {
            return Err(Error::InvalidInput(format!("workspace {} is not a directory", ws.root.display())));
        }
        if ws.path(MANIFEST).exists() {
            ws.verify()?;
        }
        Ok(ws)
    }

    /// Like [`Workspace::open`] but a missing manifest is an error too.
    pub fn open_sealed(root: impl Into<PathBuf>) -> Result<Self> {
        let ws = Workspace { root: root.into() };
        if !ws.path(MANIFEST).exists() {
            return Err(Error::CorruptManifest(format!("{} has no {MANIFEST}", ws.root.display())));
        }
        ws.verify()?;
        Ok(ws)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn has(&self, name: &str) -> bool {
        self.path(name).exists()
    }

    pub fn read_manifest(&self) -> Result<Manifest> {
        let path = self.path(MANIFEST);
        let raw = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: Manifest =
            serde_json::from_str(&raw).map_err(|e| Error::CorruptManifest(format!("unparseable: {e}")))?;
        if m.version != MANIFEST_VERSION {
            return Err(Error::CorruptManifest(format!("unsupported version {}", m.version)));
        }
        if let Some(name) = m.files.keys().find(|k| !SEALED.contains(&k.as_str())) {
            return Err(Error::CorruptManifest(format!("unexpected entry {name:?}")));
        }
        Ok(m)
    }

    /// Every listed file exists and matches its digest.
    pub fn verify(&self) -> Result<Manifest> {
        let m = self.read_manifest()?;
        for (name, want) in &m.files {
            let path = self.path(name);
            if !path.exists() {
                return Err(Error::CorruptManifest(format!("{name} is listed but missing")));
            }
            let got = sha256_file(&path)?;
            if &got != want {
                return Err(Error::CorruptManifest(format!("{name} digest {got} does not match manifest {want}")));
            }
        }
        Ok(m)
    }

    /// Checks just `names` against the manifest; unlisted files pass.
    pub fn verify_inputs(&self, names: &[&str]) -> Result<()> {
        if !self.has(MANIFEST) {
            return Ok(());
        }
        let m = self.read_manifest()?;
        for name in names {
            if let Some(want) = m.files.get(*name) {
                let got = sha256_file(&self.path(name))?;
                if &got != want {
                    return Err(Error::CorruptManifest(format!("{name} changed since it was recorded")));
                }
            }
        }
        Ok(())
    }

    /// Rewrites the manifest over whichever sealed files are present.
    pub fn seal(&self) -> Result<Manifest> {
        let mut files = BTreeMap::new();
        for name in SEALED {
            let path = self.path(name);
            if path.exists() {
                files.insert(name.to_owned(), sha256_file(&path)?);
            }
        }
        let m = Manifest {
            version: MANIFEST_VERSION,
            files,
        };
        let path = self.path(MANIFEST);
        let mut text = serde_json::to_string_pretty(&m).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(m)
    }
}
