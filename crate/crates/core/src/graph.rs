//! Undirected weighted interaction graph.
//!
//! Nodes are dense indices `0..n` with a string label each (an account id
//! for interaction graphs, a community id after aggregation). Parallel
//! contributions to the same pair are summed; self-loops are kept separately
//! and count twice towards degree.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::corpus::{AccountId, InteractionEvent, InteractionKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeWeights {
    pub like: f64,
    pub retweet: f64,
    pub follow_or_friend: f64,
}

impl Default for EdgeWeights {
    fn default() -> Self {
        EdgeWeights {
            like: 1.0,
            retweet: 10.0,
            follow_or_friend: 10.0,
        }
    }
}

impl EdgeWeights {
    pub fn weight(&self, kind: InteractionKind) -> f64 {
        match kind {
            InteractionKind::Like => self.like,
            InteractionKind::Retweet => self.retweet,
            InteractionKind::FollowOrFriend => self.follow_or_friend,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    labels: Vec<String>,
    /// Neighbors sorted by index, self-loops excluded.
    adjacency: Vec<Vec<(usize, f64)>>,
    self_loops: Vec<f64>,
    total_weight: f64,
}

impl WeightedGraph {
    /// Builds a graph over `n` nodes labelled `0..n`. Duplicate pairs are
    /// summed and `(u, u, w)` entries become self-loops.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        Self::from_labelled_edges((0..n).map(|i| i.to_string()).collect(), edges)
    }

    pub fn from_labelled_edges(labels: Vec<String>, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let n = labels.len();
        let mut pairs: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::UnknownNode(u.max(v)));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "edge ({u}, {v}) has non-positive weight {w}"
                )));
            }
            *pairs.entry((u.min(v), u.max(v))).or_insert(0.0) += w;
        }
        Ok(Self::from_pairs(labels, pairs))
    }

    fn from_pairs(labels: Vec<String>, pairs: BTreeMap<(usize, usize), f64>) -> Self {
        let n = labels.len();
        let mut adjacency = vec![Vec::new(); n];
        let mut self_loops = vec![0.0; n];
        let mut total_weight = 0.0;
        for ((u, v), w) in pairs {
            total_weight += w;
            if u == v {
                self_loops[u] += w;
            } else {
                adjacency[u].push((v, w));
                adjacency[v].push((u, w));
            }
        }
        for list in &mut adjacency {
            list.sort_by_key(|&(v, _)| v);
        }
        WeightedGraph {
            labels,
            adjacency,
            self_loops,
            total_weight,
        }
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        let plain: usize = self.adjacency.iter().map(Vec::len).sum::<usize>() / 2;
        plain + self.self_loops.iter().filter(|&&w| w > 0.0).count()
    }

    /// Sum of edge weights, each undirected edge and self-loop counted once.
    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn label(&self, v: usize) -> &str {
        &self.labels[v]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.adjacency[v]
    }

    pub fn self_loop(&self, v: usize) -> f64 {
        self.self_loops[v]
    }

    pub fn degree(&self, v: usize) -> Result<f64> {
        if v >= self.node_count() {
            return Err(Error::UnknownNode(v));
        }
        Ok(self.degree_unchecked(v))
    }

    pub(crate) fn degree_unchecked(&self, v: usize) -> f64 {
        self.adjacency[v].iter().map(|&(_, w)| w).sum::<f64>() + 2.0 * self.self_loops[v]
    }

    pub fn degrees(&self) -> Vec<f64> {
        (0..self.node_count()).map(|v| self.degree_unchecked(v)).collect()
    }

    /// Weight between `u` and `v` (the self-loop weight when `u == v`).
    pub fn weight(&self, u: usize, v: usize) -> f64 {
        if u == v {
            return self.self_loops[u];
        }
        self.adjacency[u]
            .binary_search_by_key(&v, |&(x, _)| x)
            .map(|i| self.adjacency[u][i].1)
            .unwrap_or(0.0)
    }

    /// Every edge once as `(u, v, w)` with `u <= v`, in ascending order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for u in 0..self.node_count() {
            if self.self_loops[u] > 0.0 {
                out.push((u, u, self.self_loops[u]));
            }
            for &(v, w) in &self.adjacency[u] {
                if u < v {
                    out.push((u, v, w));
                }
            }
        }
        out
    }

    /// `u v w` per line.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (u, v, w) in self.edges() {
            let _ = writeln!(out, "{u} {v} {w}");
        }
        out
    }

    /// `index label` per line.
    pub fn to_node_map(&self) -> String {
        let mut out = String::new();
        for (i, l) in self.labels.iter().enumerate() {
            let _ = writeln!(out, "{i} {l}");
        }
        out
    }

    /// Writes the edge list to `path` and the node map next to it.
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_edge_list()).map_err(|e| Error::io(path, e))?;
        let nodes = node_map_path(path);
        fs::write(&nodes, self.to_node_map()).map_err(|e| Error::io(&nodes, e))
    }

    /// Reads an edge list; node labels come from the sibling node map when
    /// present, otherwise nodes are `0..=max index`.
    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ctx = |n: usize| format!("{}:{}", path.display(), n + 1);
        let mut edges = Vec::new();
        let mut max_index = None::<usize>;
        for (n, line) in raw.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::format(ctx(n), "expected `u v w`"));
            }
            let u: usize = fields[0].parse().map_err(|_| Error::format(ctx(n), "bad node index"))?;
            let v: usize = fields[1].parse().map_err(|_| Error::format(ctx(n), "bad node index"))?;
            let w: f64 = fields[2].parse().map_err(|_| Error::format(ctx(n), "bad weight"))?;
            max_index = Some(max_index.map_or(u.max(v), |m| m.max(u).max(v)));
            edges.push((u, v, w));
        }
        let nodes = node_map_path(path);
        let labels = if nodes.exists() {
            read_node_map(&nodes)?
        } else {
            (0..max_index.map_or(0, |m| m + 1)).map(|i| i.to_string()).collect()
        };
        Self::from_labelled_edges(labels, &edges)
    }
}

/// `graph.txt` -> `graph.nodes.txt`
pub fn node_map_path(edge_list: &Path) -> PathBuf {
    let stem = edge_list
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    edge_list.with_file_name(format!("{stem}.nodes.txt"))
}

fn read_node_map(path: &Path) -> Result<Vec<String>> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut labels = Vec::new();
    for (n, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (idx, label) = line
            .split_once(' ')
            .ok_or_else(|| Error::format(format!("{}:{}", path.display(), n + 1), "expected `index label`"))?;
        if idx.parse::<usize>().ok() != Some(labels.len()) {
            return Err(Error::format(
                format!("{}:{}", path.display(), n + 1),
                "node indices must be dense and ascending",
            ));
        }
        labels.push(label.to_owned());
    }
    Ok(labels)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BuildStats {
    pub events: usize,
    pub skipped_self_interactions: usize,
}

/// Builds the interaction graph. Nodes are all accounts appearing in the
/// events, in ascending id order; each pair's weight is
/// `likes * like + retweets * retweet + follows * follow_or_friend`, which
/// makes the result independent of event order.
pub fn build_graph(events: &[InteractionEvent], weights: &EdgeWeights) -> (WeightedGraph, BuildStats) {
    let mut stats = BuildStats {
        events: events.len(),
        ..Default::default()
    };
    let mut accounts: BTreeSet<&AccountId> = BTreeSet::new();
    for e in events {
        accounts.insert(&e.actor);
        accounts.insert(&e.target);
    }
    let index: BTreeMap<&AccountId, usize> = accounts.iter().enumerate().map(|(i, a)| (*a, i)).collect();

    // per pair: [likes, retweets, follows]
    let mut counts: BTreeMap<(usize, usize), [u64; 3]> = BTreeMap::new();
    for e in events {
        if e.actor == e.target {
            stats.skipped_self_interactions += 1;
            continue;
        }
        let (a, b) = (index[&e.actor], index[&e.target]);
        let slot = match e.kind {
            InteractionKind::Like => 0,
            InteractionKind::Retweet => 1,
            InteractionKind::FollowOrFriend => 2,
        };
        counts.entry((a.min(b), a.max(b))).or_insert([0; 3])[slot] += 1;
    }
    let pairs = counts
        .into_iter()
        .map(|(pair, [l, r, f])| {
            let w = l as f64 * weights.like + r as f64 * weights.retweet + f as f64 * weights.follow_or_friend;
            (pair, w)
        })
        .filter(|&(_, w)| w > 0.0)
        .collect();
    let labels = accounts.into_iter().map(|a| a.as_str().to_owned()).collect();
    (WeightedGraph::from_pairs(labels, pairs), stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::anonymize_account;
    use chrono::{TimeZone, Utc};
    use proptest::prelude::*;

    fn acct(name: &str) -> AccountId {
        anonymize_account(name, b"g").unwrap()
    }

    fn ev(kind: InteractionKind, a: &str, b: &str) -> InteractionEvent {
        let tweet = (kind != InteractionKind::FollowOrFriend).then(|| "t1".to_string());
        InteractionEvent::new(kind, acct(a), acct(b), tweet, Utc.with_ymd_and_hms(2022, 10, 1, 0, 0, 0).unwrap()).unwrap()
    }

    #[test]
    fn like_weighs_one() {
        let (g, _) = build_graph(&[ev(InteractionKind::Like, "a", "b")], &EdgeWeights::default());
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edges(), vec![(0, 1, 1.0)]);
        assert_eq!(g.total_weight(), 1.0);
    }

    #[test]
    fn retweet_and_follow_weigh_ten() {
        let (g, _) = build_graph(&[ev(InteractionKind::Retweet, "a", "b")], &EdgeWeights::default());
        assert_eq!(g.total_weight(), 10.0);
        let (g, _) = build_graph(&[ev(InteractionKind::FollowOrFriend, "a", "b")], &EdgeWeights::default());
        assert_eq!(g.total_weight(), 10.0);
    }

    #[test]
    fn parallel_contributions_sum() {
        let (g, _) = build_graph(
            &[ev(InteractionKind::Like, "a", "b"), ev(InteractionKind::Retweet, "b", "a")],
            &EdgeWeights::default(),
        );
        assert_eq!(g.edges().len(), 1);
        assert_eq!(g.weight(0, 1), 11.0);
        assert_eq!(g.total_weight(), 11.0);
    }

    #[test]
    fn self_interactions_skipped() {
        let mut e = ev(InteractionKind::Like, "a", "b");
        e.target = e.actor.clone();
        let (g, stats) = build_graph(&[e, ev(InteractionKind::Like, "a", "c")], &EdgeWeights::default());
        assert_eq!(stats.skipped_self_interactions, 1);
        assert_eq!(g.total_weight(), 1.0);
    }

    #[test]
    fn degree_cases() {
        let g = WeightedGraph::from_edges(4, &[(0, 1, 1.0), (0, 2, 10.0), (3, 3, 3.0)]).unwrap();
        assert_eq!(g.degree(0).unwrap(), 11.0);
        assert_eq!(g.degree(3).unwrap(), 6.0);
        let iso = WeightedGraph::from_edges(3, &[(0, 1, 1.0)]).unwrap();
        assert_eq!(iso.degree(2).unwrap(), 0.0);
        assert!(matches!(g.degree(9), Err(Error::UnknownNode(9))));
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(WeightedGraph::from_edges(2, &[(0, 2, 1.0)]).is_err());
        assert!(WeightedGraph::from_edges(2, &[(0, 1, 0.0)]).is_err());
        assert!(WeightedGraph::from_edges(2, &[(0, 1, f64::NAN)]).is_err());
    }

    #[test]
    fn edge_list_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = WeightedGraph::from_labelled_edges(
            vec!["x".into(), "y".into(), "z".into(), "lonely".into()],
            &[(0, 1, 1.5), (1, 2, 10.0), (2, 2, 0.25)],
        )
        .unwrap();
        let p = dir.path().join("graph.txt");
        g.save(&p).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "0 1 1.5\n1 2 10\n2 2 0.25\n");
        assert_eq!(WeightedGraph::load(&p).unwrap(), g);
        fs::remove_file(node_map_path(&p)).unwrap();
        assert_eq!(WeightedGraph::load(&p).unwrap().node_count(), 3);
    }

    fn random_events(spec: &[(u8, u8, u8)]) -> Vec<InteractionEvent> {
        spec.iter()
            .filter(|(a, b, _)| a % 7 != b % 7)
            .map(|&(a, b, k)| {
                let kind = [InteractionKind::Like, InteractionKind::Retweet, InteractionKind::FollowOrFriend][k as usize % 3];
                ev(kind, &format!("n{}", a % 7), &format!("n{}", b % 7))
            })
            .collect()
    }

    proptest! {
        #[test]
        fn degree_sum_is_twice_total(spec in proptest::collection::vec(any::<(u8, u8, u8)>(), 0..40)) {
            let (g, _) = build_graph(&random_events(&spec), &EdgeWeights::default());
            let sum: f64 = g.degrees().iter().sum();
            prop_assert!((sum - 2.0 * g.total_weight()).abs() < 1e-9);
        }

        #[test]
        fn order_independent(spec in proptest::collection::vec(any::<(u8, u8, u8)>(), 0..40), rot in 0usize..40) {
            let events = random_events(&spec);
            let mut shuffled = events.clone();
            if !shuffled.is_empty() {
                let k = rot % shuffled.len();
                shuffled.rotate_left(k);
                shuffled.reverse();
            }
            let w = EdgeWeights { like: 0.1, retweet: 3.3, follow_or_friend: 7.7 };
            prop_assert_eq!(build_graph(&events, &w).0, build_graph(&shuffled, &w).0);
        }
    }
}
