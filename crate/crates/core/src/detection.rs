//! Campaign and disruption-candidate reports: classifier output placed on
//! the community structure, ranked by how likely a flagged tweet is to leave
//! its echo chamber.
//!
//! `breakout_risk = score × max(b(v) / max_u b(u))` over the liminal nodes
//! `v` that authored, liked or retweeted the tweet.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::centrality::{CentralityScores, LiminalReport};
use crate::classifier::Classification;
use crate::community::Partition;
use crate::corpus::{Corpus, InteractionKind};
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;

/// Flagged tweets listed per community row.
pub const TOP_PER_COMMUNITY: usize = 3;

/// Possible responses an analyst may attach to a candidate. Annotation only;
/// nothing here acts on them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FollowOnEffect {
    Block,
    Canalize,
    Contain,
    Defeat,
    Destroy,
    Disrupt,
    Fix,
    Interdict,
    Isolate,
    Neutralize,
    Suppress,
    Turn,
}

impl FollowOnEffect {
    pub const ALL: [FollowOnEffect; 12] = [
        FollowOnEffect::Block,
        FollowOnEffect::Canalize,
        FollowOnEffect::Contain,
        FollowOnEffect::Defeat,
        FollowOnEffect::Destroy,
        FollowOnEffect::Disrupt,
        FollowOnEffect::Fix,
        FollowOnEffect::Interdict,
        FollowOnEffect::Isolate,
        FollowOnEffect::Neutralize,
        FollowOnEffect::Suppress,
        FollowOnEffect::Turn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FollowOnEffect::Block => "block",
            FollowOnEffect::Canalize => "canalize",
            FollowOnEffect::Contain => "contain",
            FollowOnEffect::Defeat => "defeat",
            FollowOnEffect::Destroy => "destroy",
            FollowOnEffect::Disrupt => "disrupt",
            FollowOnEffect::Fix => "fix",
            FollowOnEffect::Interdict => "interdict",
            FollowOnEffect::Isolate => "isolate",
            FollowOnEffect::Neutralize => "neutralize",
            FollowOnEffect::Suppress => "suppress",
            FollowOnEffect::Turn => "turn",
        }
    }
}

impl fmt::Display for FollowOnEffect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FollowOnEffect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FollowOnEffect::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown follow-on effect {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagingNode {
    pub node: usize,
    pub account: String,
    pub betweenness: f64,
    /// Betweenness divided by the graph maximum.
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisruptionCandidate {
    pub tweet_id: String,
    pub score: f64,
    /// Community of the author, when the author is in the graph.
    pub origin_community: Option<usize>,
    /// Ascending node id.
    pub engaging_liminal_nodes: Vec<EngagingNode>,
    pub breakout_risk: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub follow_on: Option<FollowOnEffect>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedTweet {
    pub tweet_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityRow {
    pub community: usize,
    pub members: usize,
    /// Tweets authored by members.
    pub tweets: usize,
    pub flagged: usize,
    pub flagged_rate: f64,
    pub top_flagged: Vec<FlaggedTweet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub communities: Vec<CommunityRow>,
    pub flagged_total: usize,
    /// Flagged tweets whose author is not a graph node.
    pub flagged_outside_graph: usize,
    /// By breakout risk descending, then tweet id.
    pub candidates: Vec<DisruptionCandidate>,
}

fn rank(a: &DisruptionCandidate, b: &DisruptionCandidate) -> std::cmp::Ordering {
    b.breakout_risk
        .total_cmp(&a.breakout_risk)
        .then_with(|| a.tweet_id.cmp(&b.tweet_id))
}

/// Places classifier output on the graph. `classifications` should cover
/// every scored tweet so flagged rates have the right denominator.
pub fn campaign_report(
    classifications: &[Classification],
    corpus: &Corpus,
    graph: &WeightedGraph,
    partition: &Partition,
    scores: &CentralityScores,
    liminal: &LiminalReport,
) -> Result<CampaignReport> {
    let n = graph.node_count();
    if partition.node_count() != n || scores.scores.len() != n {
        return Err(Error::Inconsistent(format!(
            "graph has {n} nodes, partition {}, centrality {}",
            partition.node_count(),
            scores.scores.len()
        )));
    }
    if let Some(bad) = liminal.ranked.iter().find(|e| e.node >= n) {
        return Err(Error::UnknownNode(bad.node));
    }
    let relative = scores.relative_to_max();
    let liminal_nodes: BTreeSet<usize> = liminal.ranked.iter().map(|e| e.node).collect();

    // tweet -> engaging graph nodes (author, likers, retweeters)
    let mut engaged: HashMap<&str, BTreeSet<usize>> = HashMap::new();
    let mut author_node: HashMap<&str, Option<usize>> = HashMap::new();
    for t in &corpus.tweets {
        let node = graph.index_of(t.author.as_str());
        author_node.insert(&t.tweet_id, node);
        if let Some(v) = node {
            engaged.entry(&t.tweet_id).or_default().insert(v);
        }
    }
    for e in &corpus.interactions {
        let (InteractionKind::Like | InteractionKind::Retweet, Some(id)) = (e.kind, &e.tweet_id) else {
            continue;
        };
        if let Some(v) = graph.index_of(e.actor.as_str()) {
            engaged.entry(id).or_default().insert(v);
        }
    }

    let mut rows: Vec<CommunityRow> = (0..partition.community_count())
        .map(|c| CommunityRow {
            community: c,
            members: partition.members(c).len(),
            tweets: 0,
            flagged: 0,
            flagged_rate: 0.0,
            top_flagged: Vec::new(),
        })
        .collect();
    let mut flagged_by_community: BTreeMap<usize, Vec<FlaggedTweet>> = BTreeMap::new();
    let mut flagged_total = 0;
    let mut flagged_outside_graph = 0;
    let mut candidates = Vec::new();

    for c in classifications {
        let author = author_node
            .get(c.tweet_id.as_str())
            .copied()
            .ok_or_else(|| Error::UnknownTweet(c.tweet_id.clone()))?;
        let community = author.map(|v| partition.community_of(v));
        if let Some(k) = community {
            rows[k].tweets += 1;
        }
        if !c.flagged {
            continue;
        }
        flagged_total += 1;
        match community {
            Some(k) => flagged_by_community.entry(k).or_default().push(FlaggedTweet {
                tweet_id: c.tweet_id.clone(),
                score: c.score,
            }),
            None => flagged_outside_graph += 1,
        }
        let nodes: Vec<EngagingNode> = engaged
            .get(c.tweet_id.as_str())
            .into_iter()
            .flatten()
            .filter(|v| liminal_nodes.contains(v))
            .map(|&v| EngagingNode {
                node: v,
                account: graph.label(v).to_owned(),
                betweenness: scores.scores[v],
                relative: relative[v],
            })
            .collect();
        if nodes.is_empty() {
            continue;
        }
        let reach = nodes.iter().map(|e| e.relative).fold(0.0, f64::max);
        candidates.push(DisruptionCandidate {
            tweet_id: c.tweet_id.clone(),
            score: c.score,
            origin_community: community,
            engaging_liminal_nodes: nodes,
            breakout_risk: c.score * reach,
            follow_on: None,
        });
    }

    for (k, mut flagged) in flagged_by_community {
        flagged.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.tweet_id.cmp(&b.tweet_id)));
        rows[k].flagged = flagged.len();
        flagged.truncate(TOP_PER_COMMUNITY);
        rows[k].top_flagged = flagged;
    }
    for row in &mut rows {
        if row.tweets > 0 {
            row.flagged_rate = row.flagged as f64 / row.tweets as f64;
        }
    }
    candidates.sort_by(rank);
    Ok(CampaignReport {
        communities: rows,
        flagged_total,
        flagged_outside_graph,
        candidates,
    })
}

/// The `k` highest-risk candidates (all of them when fewer exist).
pub fn disruption_candidates(report: &CampaignReport, k: usize) -> Result<Vec<DisruptionCandidate>> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let mut out = report.candidates.clone();
    out.sort_by(rank);
    out.truncate(k);
    Ok(out)
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum ReportLine<'a> {
    Summary {
        flagged_total: usize,
        flagged_outside_graph: usize,
        communities: usize,
        candidates: usize,
    },
    Community(&'a CommunityRow),
    Candidate(&'a DisruptionCandidate),
}

impl CampaignReport {
    /// One JSON object per line: a summary, then community rows, then
    /// candidates in rank order.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        let mut push = |line: ReportLine| {
            out.push_str(&serde_json::to_string(&line).expect("report serializes"));
            out.push('\n');
        };
        push(ReportLine::Summary {
            flagged_total: self.flagged_total,
            flagged_outside_graph: self.flagged_outside_graph,
            communities: self.communities.len(),
            candidates: self.candidates.len(),
        });
        for row in &self.communities {
            push(ReportLine::Community(row));
        }
        for c in &self.candidates {
            push(ReportLine::Candidate(c));
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "flagged tweets: {} ({} outside the graph)\n",
            self.flagged_total, self.flagged_outside_graph
        );
        let _ = writeln!(out, "{:>9}  {:>7}  {:>6}  {:>7}  {:>6}  top flagged", "community", "members", "tweets", "flagged", "rate");
        for r in &self.communities {
            let top: Vec<String> = r.top_flagged.iter().map(|t| format!("{} ({:.3})", t.tweet_id, t.score)).collect();
            let _ = writeln!(
                out,
                "{:>9}  {:>7}  {:>6}  {:>7}  {:>6.3}  {}",
                r.community,
                r.members,
                r.tweets,
                r.flagged,
                r.flagged_rate,
                top.join(", ")
            );
        }
        let _ = writeln!(out, "\n{:>4}  {:<16}  {:>6}  {:>8}  {:>6}  liminal nodes", "rank", "tweet", "score", "risk", "origin");
        for (i, c) in self.candidates.iter().enumerate() {
            let nodes: Vec<String> = c
                .engaging_liminal_nodes
                .iter()
                .map(|e| format!("{}:{:.3}", e.node, e.relative))
                .collect();
            let origin = c.origin_community.map_or_else(|| "-".to_owned(), |k| k.to_string());
            let _ = writeln!(
                out,
                "{:>4}  {:<16}  {:>6.3}  {:>8.4}  {:>6}  {}",
                i + 1,
                c.tweet_id,
                c.score,
                c.breakout_risk,
                origin,
                nodes.join(" ")
            );
        }
        out
    }

    pub fn save(&self, jsonl: &Path, table: &Path) -> Result<()> {
        fs::write(jsonl, self.to_json_lines()).map_err(|e| Error::io(jsonl, e))?;
        fs::write(table, self.to_table()).map_err(|e| Error::io(table, e))
    }
}

pub fn save_candidates(path: &Path, candidates: &[DisruptionCandidate]) -> Result<()> {
    crate::corpus::io::write_json_lines(path, candidates)
}
