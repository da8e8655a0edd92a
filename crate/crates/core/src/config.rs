//! Pipeline configuration: one TOML file carrying every stage's tunables.
//! Unknown keys are rejected at every level; missing keys take defaults.

use std::fs;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::centrality::{BetweennessConfig, PathMetric};
use crate::classifier::TrainingConfig;
use crate::community::LouvainConfig;
use crate::corpus::rfc3339;
use crate::corpus::synthetic::{window_end, window_start, SyntheticSpec};
use crate::corpus::AccountId;
use crate::error::{Error, Result};
use crate::graph::EdgeWeights;
use crate::parallel::Execution;
use crate::snowball::SnowballConfig;

/// The defaults, commented. `config show` prints this; a test keeps it equal
/// to `PipelineConfig::default()`.
pub const DOCUMENTED_DEFAULTS: &str = r#"# Salt mixed into every account digest. Keep it out of corpus files.
salt = "liminal-synthetic"

[synthetic]
n_tweets = 882
n_positive = 62
n_accounts = 120
n_communities = 4
# chance that a negative tweet carries one theme token
decoy_rate = 0.1
seed = 1

[snowball]
# anonymized seed accounts; empty means "pass --seed-account"
seeds = []
layers = 2
retweeters_per_tweet = 20
start = "2022-10-01T00:00:00Z"
end = "2022-11-08T23:59:59Z"
seed = 1

[graph]
like = 1.0
retweet = 10.0
follow_or_friend = 10.0

[communities]
resolution = 1.0
# omit for ascending node order; set to shuffle each sweep
# shuffle_seed = 7

[centrality]
# "unweighted" (hop count) or "inverse_weight" (length 1/w)
metric = "unweighted"
# share of bridging candidates kept as liminal nodes
top_fraction = 0.05

[training]
epochs = 30
batch_size = 32
learning_rate = 0.001
lr_decay = 1.0
validation_fraction = 0.2
seed = 1
# epochs without improvement before stopping; 0 disables
patience = 8
pos_weight = 1.0
input_length = 64
vocab_size = 1536
dense_vectors = 16

[classify]
threshold = 0.5

[report]
top_k = 20
"#;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSection {
    pub n_tweets: usize,
    pub n_positive: usize,
    pub n_accounts: usize,
    pub n_communities: usize,
    pub decoy_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticSection {
    fn default() -> Self {
        let d = SyntheticSpec::default();
        SyntheticSection {
            n_tweets: d.n_tweets,
            n_positive: d.n_positive,
            n_accounts: d.n_accounts,
            n_communities: d.n_communities,
            decoy_rate: d.decoy_rate,
            seed: d.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnowballSection {
    pub seeds: Vec<String>,
    pub layers: usize,
    pub retweeters_per_tweet: usize,
    #[serde(with = "rfc3339")]
    pub start: DateTime<Utc>,
    #[serde(with = "rfc3339")]
    pub end: DateTime<Utc>,
    pub seed: u64,
}

impl Default for SnowballSection {
    fn default() -> Self {
        SnowballSection {
            seeds: Vec::new(),
            layers: 2,
            retweeters_per_tweet: 20,
            start: window_start(),
            end: window_end(),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphSection {
    pub like: f64,
    pub retweet: f64,
    pub follow_or_friend: f64,
}

impl Default for GraphSection {
    fn default() -> Self {
        let w = EdgeWeights::default();
        GraphSection {
            like: w.like,
            retweet: w.retweet,
            follow_or_friend: w.follow_or_friend,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommunitiesSection {
    pub resolution: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shuffle_seed: Option<u64>,
}

impl Default for CommunitiesSection {
    fn default() -> Self {
        CommunitiesSection {
            resolution: 1.0,
            shuffle_seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CentralitySection {
    pub metric: PathMetric,
    pub top_fraction: f64,
}

impl Default for CentralitySection {
    fn default() -> Self {
        CentralitySection {
            metric: PathMetric::Unweighted,
            top_fraction: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifySection {
    pub threshold: f64,
}

impl Default for ClassifySection {
    fn default() -> Self {
        ClassifySection { threshold: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    pub top_k: usize,
}

impl Default for ReportSection {
    fn default() -> Self {
        ReportSection { top_k: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub salt: String,
    pub synthetic: SyntheticSection,
    pub snowball: SnowballSection,
    pub graph: GraphSection,
    pub communities: CommunitiesSection,
    pub centrality: CentralitySection,
    pub training: TrainingConfig,
    pub classify: ClassifySection,
    pub report: ReportSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            salt: String::from_utf8(SyntheticSpec::default().salt).expect("default salt is utf-8"),
            synthetic: SyntheticSection::default(),
            snowball: SnowballSection::default(),
            graph: GraphSection::default(),
            communities: CommunitiesSection::default(),
            centrality: CentralitySection::default(),
            training: TrainingConfig::default(),
            classify: ClassifySection::default(),
            report: ReportSection::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Points every stage seed at `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.synthetic.seed = seed;
        self.snowball.seed = seed;
        self.training.seed = seed;
        if self.communities.shuffle_seed.is_some() {
            self.communities.shuffle_seed = Some(seed);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.salt.is_empty() {
            return bad("salt must not be empty".into());
        }
        for (name, w) in [
            ("graph.like", self.graph.like),
            ("graph.retweet", self.graph.retweet),
            ("graph.follow_or_friend", self.graph.follow_or_friend),
            ("communities.resolution", self.communities.resolution),
        ] {
            if !(w > 0.0 && w.is_finite()) {
                return bad(format!("{name} must be positive, got {w}"));
            }
        }
        if !(self.centrality.top_fraction > 0.0 && self.centrality.top_fraction <= 1.0) {
            return bad(format!("centrality.top_fraction must be in (0, 1], got {}", self.centrality.top_fraction));
        }
        if !(0.0..=1.0).contains(&self.classify.threshold) {
            return bad(format!("classify.threshold must be in [0, 1], got {}", self.classify.threshold));
        }
        if !(0.0..=1.0).contains(&self.synthetic.decoy_rate) {
            return bad(format!("synthetic.decoy_rate must be in [0, 1], got {}", self.synthetic.decoy_rate));
        }
        if self.report.top_k == 0 {
            return bad("report.top_k must be at least 1".into());
        }
        if self.snowball.start > self.snowball.end {
            return bad("snowball.start is after snowball.end".into());
        }
        self.training.validate()
    }

    pub fn synthetic_spec(&self) -> SyntheticSpec {
        let s = &self.synthetic;
        SyntheticSpec {
            n_tweets: s.n_tweets,
            n_positive: s.n_positive,
            n_accounts: s.n_accounts,
            n_communities: s.n_communities,
            decoy_rate: s.decoy_rate,
            seed: s.seed,
            salt: self.salt.clone().into_bytes(),
            ..SyntheticSpec::default()
        }
    }

    /// `extra_seeds` are appended to the configured ones.
    pub fn snowball_config(&self, extra_seeds: &[String]) -> Result<SnowballConfig> {
        let s = &self.snowball;
        let seeds = s
            .seeds
            .iter()
            .chain(extra_seeds)
            .map(|a| AccountId::parse(a))
            .collect::<Result<Vec<_>>>()?;
        let mut cfg = SnowballConfig::new(seeds, s.start, s.end, s.seed);
        cfg.layers = s.layers;
        cfg.retweeters_per_tweet = s.retweeters_per_tweet;
        Ok(cfg)
    }

    pub fn edge_weights(&self) -> EdgeWeights {
        EdgeWeights {
            like: self.graph.like,
            retweet: self.graph.retweet,
            follow_or_friend: self.graph.follow_or_friend,
        }
    }

    pub fn louvain(&self) -> LouvainConfig {
        LouvainConfig {
            resolution: self.communities.resolution,
            shuffle_seed: self.communities.shuffle_seed,
        }
    }

    pub fn betweenness(&self, execution: Execution) -> BetweennessConfig {
        BetweennessConfig {
            metric: self.centrality.metric,
            execution,
        }
    }
}
