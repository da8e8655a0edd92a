mod common;

use std::collections::HashSet;

use chrono::{TimeZone, Utc};
use liminal_core::centrality::{betweenness, liminal_nodes, CentralityScores};
use liminal_core::classifier::Classification;
use liminal_core::community::Partition;
use liminal_core::corpus::{AccountId, Corpus, InteractionEvent, InteractionKind, TweetRecord};
use liminal_core::detection::{campaign_report, disruption_candidates, CampaignReport};
use liminal_core::graph::WeightedGraph;
use proptest::prelude::*;
use rand::Rng;

fn account(i: usize) -> AccountId {
    AccountId::parse(&format!("{i:032x}")).unwrap()
}

fn labelled(n: usize, edges: &[(usize, usize, f64)]) -> WeightedGraph {
    WeightedGraph::from_labelled_edges((0..n).map(|i| account(i).as_str().to_owned()).collect(), edges).unwrap()
}

fn tweet(id: &str, author: usize) -> TweetRecord {
    let at = Utc.with_ymd_and_hms(2023, 2, 1, 12, 0, 0).unwrap();
    TweetRecord::new(id, account(author), at, format!("text of {id}")).unwrap()
}

fn engage(kind: InteractionKind, actor: usize, author: usize, id: &str) -> InteractionEvent {
    let at = Utc.with_ymd_and_hms(2023, 2, 2, 12, 0, 0).unwrap();
    InteractionEvent::new(kind, account(actor), account(author), Some(id.to_owned()), at).unwrap()
}

fn scored(id: &str, score: f64, flagged: bool) -> Classification {
    Classification { tweet_id: id.to_owned(), score, flagged }
}

struct Barbell {
    corpus: Corpus,
    graph: WeightedGraph,
    partition: Partition,
    scores: CentralityScores,
    brute: Vec<f64>,
    classifications: Vec<Classification>,
}

/// Barbell accounts 0..9, plus account 99 who never interacts with graph
/// members and so is not a node.
fn barbell_case() -> Barbell {
    let edges = common::barbell();
    let graph = labelled(10, &edges);
    let partition = Partition::from_assignment(&[0, 0, 0, 0, 1, 1, 2, 2, 2, 2]);
    let scores = betweenness(&graph);
    let brute = common::betweenness_brute(10, &edges);
    use InteractionKind::*;
    let corpus = Corpus::new(
        vec![
            tweet("t1", 0),
            tweet("t2", 1),
            tweet("t3", 8),
            tweet("t4", 4),
            tweet("t5", 9),
            tweet("t6", 99),
        ],
        vec![
            engage(Like, 4, 0, "t1"),
            engage(Like, 2, 1, "t2"),
            engage(Retweet, 3, 8, "t3"),
            engage(Like, 4, 9, "t5"),
            engage(Like, 5, 99, "t6"),
        ],
        "fixture",
    )
    .unwrap();
    let classifications = vec![
        scored("t3", 0.9, true),
        scored("t1", 0.8, true),
        scored("t2", 0.8, true),
        scored("t6", 0.7, true),
        scored("t4", 0.5, true),
        scored("t5", 0.1, false),
    ];
    Barbell { corpus, graph, partition, scores, brute, classifications }
}

fn report(b: &Barbell) -> CampaignReport {
    let lim = liminal_nodes(&b.graph, &b.partition, &b.scores, 1.0).unwrap();
    campaign_report(&b.classifications, &b.corpus, &b.graph, &b.partition, &b.scores, &lim).unwrap()
}

#[test]
fn barbell_breakout_risk() {
    let b = barbell_case();
    let max = b.brute.iter().cloned().fold(0.0, f64::max);
    assert_eq!(max, 20.0);
    let r = report(&b);
    let got: Vec<(&str, f64)> = r.candidates.iter().map(|c| (c.tweet_id.as_str(), c.breakout_risk)).collect();
    let want = [
        ("t3", 0.9 * b.brute[3] / max),
        ("t1", 0.8),
        ("t6", 0.7 * b.brute[5] / max),
        ("t4", 0.5),
    ];
    assert_eq!(got.len(), want.len(), "{got:?}");
    for ((id, risk), (wid, wrisk)) in got.iter().zip(want) {
        assert_eq!(*id, wid);
        assert!((risk - wrisk).abs() < 1e-12, "{id}: {risk} vs {wrisk}");
    }
    // liked by the bridge node: exactly score × 1.0
    let t1 = &r.candidates[1];
    assert_eq!(t1.breakout_risk, t1.score);
    assert_eq!(t1.engaging_liminal_nodes.len(), 1);
    assert_eq!(t1.engaging_liminal_nodes[0].node, 4);
    assert_eq!(t1.engaging_liminal_nodes[0].relative, 1.0);
    assert_eq!(t1.origin_community, Some(0));
    assert_eq!(r.candidates[2].origin_community, None);
}

#[test]
fn unengaged_tweet_is_outranked() {
    let b = barbell_case();
    let r = report(&b);
    // t1 and t2 share a score; only t1 reached a liminal node
    assert!(r.candidates.iter().any(|c| c.tweet_id == "t1"));
    assert!(r.candidates.iter().all(|c| c.tweet_id != "t2" && c.tweet_id != "t5"));
}

#[test]
fn community_rows() {
    let b = barbell_case();
    let r = report(&b);
    assert_eq!(r.flagged_total, 5);
    assert_eq!(r.flagged_outside_graph, 1);
    let rows: Vec<(usize, usize, usize, f64)> =
        r.communities.iter().map(|c| (c.members, c.tweets, c.flagged, c.flagged_rate)).collect();
    assert_eq!(rows, [(4, 2, 2, 1.0), (2, 1, 1, 1.0), (4, 2, 1, 0.5)]);
    let top0: Vec<&str> = r.communities[0].top_flagged.iter().map(|t| t.tweet_id.as_str()).collect();
    assert_eq!(top0, ["t1", "t2"]);
}

#[test]
fn candidates_tie_break_and_truncate() {
    let b = barbell_case();
    let mut c = b.classifications.clone();
    c[0].score = 1.0; // t3 via node 3, relative 0.9
    c[1].score = 0.9; // t1 via node 4, relative 1.0
    let lim = liminal_nodes(&b.graph, &b.partition, &b.scores, 1.0).unwrap();
    let r = campaign_report(&c, &b.corpus, &b.graph, &b.partition, &b.scores, &lim).unwrap();
    assert_eq!(r.candidates[0].breakout_risk, r.candidates[1].breakout_risk);
    assert_eq!(r.candidates[0].tweet_id, "t1");
    let top = disruption_candidates(&r, 2).unwrap();
    assert_eq!(top.iter().map(|c| c.tweet_id.as_str()).collect::<Vec<_>>(), ["t1", "t3"]);
    assert_eq!(disruption_candidates(&r, 100).unwrap().len(), 4);
    assert!(disruption_candidates(&r, 0).is_err());
}

#[test]
fn nothing_flagged() {
    let b = barbell_case();
    let quiet: Vec<Classification> = b.classifications.iter().map(|c| scored(&c.tweet_id, c.score, false)).collect();
    let lim = liminal_nodes(&b.graph, &b.partition, &b.scores, 1.0).unwrap();
    let r = campaign_report(&quiet, &b.corpus, &b.graph, &b.partition, &b.scores, &lim).unwrap();
    assert_eq!(r.flagged_total, 0);
    assert!(r.candidates.is_empty());
    assert!(r.communities.iter().all(|c| c.flagged == 0 && c.flagged_rate == 0.0 && c.top_flagged.is_empty()));
    assert_eq!(r.to_json_lines().lines().count(), 1 + 3);
    assert!(r.to_table().contains("flagged tweets: 0"));
}

#[test]
fn inconsistent_inputs_are_rejected() {
    let b = barbell_case();
    let lim = liminal_nodes(&b.graph, &b.partition, &b.scores, 1.0).unwrap();
    let short = Partition::from_assignment(&[0, 0, 1]);
    assert!(campaign_report(&b.classifications, &b.corpus, &b.graph, &short, &b.scores, &lim).is_err());
    let mut unknown = b.classifications.clone();
    unknown.push(scored("ghost", 0.9, true));
    assert!(campaign_report(&unknown, &b.corpus, &b.graph, &b.partition, &b.scores, &lim).is_err());
}

/// Set `LIMINAL_BLESS=1` to rewrite the golden files after an intended change.
#[test]
fn golden_output() {
    let r = report(&barbell_case());
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/detection");
    let jsonl = dir.join("barbell_report.jsonl");
    let table = dir.join("barbell_report.txt");
    if std::env::var_os("LIMINAL_BLESS").is_some() {
        r.save(&jsonl, &table).unwrap();
    }
    assert_eq!(r.to_json_lines(), std::fs::read_to_string(&jsonl).unwrap());
    assert_eq!(r.to_table(), std::fs::read_to_string(&table).unwrap());
    // stable across runs
    assert_eq!(report(&barbell_case()).to_json_lines(), r.to_json_lines());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn candidate_invariants(seed in any::<u64>(), n in 4usize..14, frac in 0.1f64..=1.0) {
        let mut rng = common::rng(seed);
        let edges = common::random_connected(&mut rng, n, 0.3);
        let graph = labelled(n, &edges);
        let assignment: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let partition = Partition::from_assignment(&assignment);
        let scores = betweenness(&graph);
        let lim = liminal_nodes(&graph, &partition, &scores, frac).unwrap();

        let mut tweets = Vec::new();
        let mut events = Vec::new();
        let mut cls = Vec::new();
        for t in 0..12 {
            let id = format!("x{t:02}");
            let author = rng.random_range(0..n);
            tweets.push(tweet(&id, author));
            for actor in 0..n {
                if actor != author && rng.random_bool(0.2) {
                    events.push(engage(InteractionKind::Like, actor, author, &id));
                }
            }
            let score: f64 = rng.random();
            cls.push(scored(&id, score, score >= 0.5));
        }
        let corpus = Corpus::new(tweets, events, "prop").unwrap();
        let r = campaign_report(&cls, &corpus, &graph, &partition, &scores, &lim).unwrap();

        let liminal: HashSet<usize> = lim.ranked.iter().map(|e| e.node).collect();
        for w in r.candidates.windows(2) {
            prop_assert!(w[0].breakout_risk > w[1].breakout_risk
                || (w[0].breakout_risk == w[1].breakout_risk && w[0].tweet_id < w[1].tweet_id));
        }
        for c in &r.candidates {
            prop_assert!(!c.engaging_liminal_nodes.is_empty());
            let t = corpus.tweet(&c.tweet_id).unwrap();
            let mut engaged: HashSet<&str> = corpus.interactions.iter()
                .filter(|e| e.tweet_id.as_deref() == Some(c.tweet_id.as_str()))
                .map(|e| e.actor.as_str())
                .collect();
            engaged.insert(t.author.as_str());
            for e in &c.engaging_liminal_nodes {
                prop_assert!(liminal.contains(&e.node));
                prop_assert!(engaged.contains(e.account.as_str()));
            }
            prop_assert!(c.breakout_risk <= c.score + 1e-15);
            prop_assert!(c.breakout_risk >= 0.0);
        }
        let flagged = cls.iter().filter(|c| c.flagged).count();
        prop_assert_eq!(r.flagged_total, flagged);
        prop_assert_eq!(r.communities.iter().map(|c| c.flagged).sum::<usize>() + r.flagged_outside_graph, flagged);
    }
}
