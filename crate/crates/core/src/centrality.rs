//! Exact betweenness centrality (Brandes accumulation over every source) and
//! liminal nodes: high-betweenness accounts whose neighbours sit in two or
//! more communities.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, VecDeque};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::community::Partition;
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::parallel::Execution;

/// Sources per reduction block. Fixed so the summation order, and therefore
/// every bit of the result, is independent of the thread count.
const SOURCE_BLOCK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathMetric {
    /// Every edge has length one.
    #[default]
    Unweighted,
    /// Edge length is `1 / weight`: strong ties are short.
    InverseWeight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BetweennessConfig {
    pub metric: PathMetric,
    pub execution: Execution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentralityScores {
    pub scores: Vec<f64>,
    pub normalized: bool,
}

impl CentralityScores {
    /// Scales by `2 / ((n - 1)(n - 2))`.
    pub fn normalize(&self) -> CentralityScores {
        if self.normalized {
            return self.clone();
        }
        let n = self.scores.len() as f64;
        let scale = if n > 2.0 { 2.0 / ((n - 1.0) * (n - 2.0)) } else { 0.0 };
        CentralityScores {
            scores: self.scores.iter().map(|s| s * scale).collect(),
            normalized: true,
        }
    }

    /// Scores divided by the maximum, so the top node is 1 (all zero when
    /// every score is zero).
    pub fn relative_to_max(&self) -> Vec<f64> {
        let max = self.scores.iter().cloned().fold(0.0, f64::max);
        if max > 0.0 {
            self.scores.iter().map(|s| s / max).collect()
        } else {
            vec![0.0; self.scores.len()]
        }
    }

    /// `node score` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (v, s) in self.scores.iter().enumerate() {
            let _ = writeln!(out, "{v} {s}");
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut scores = Vec::new();
        for (n, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let ctx = || format!("{}:{}", path.display(), n + 1);
            let (node, score) = line.split_once(' ').ok_or_else(|| Error::format(ctx(), "expected `node score`"))?;
            if node.parse::<usize>().ok() != Some(scores.len()) {
                return Err(Error::format(ctx(), "node ids must be dense and ascending"));
            }
            let s: f64 = score.trim().parse().map_err(|_| Error::format(ctx(), "bad score"))?;
            if s < 0.0 {
                return Err(Error::format(ctx(), "negative betweenness"));
            }
            scores.push(s);
        }
        Ok(CentralityScores {
            scores,
            normalized: false,
        })
    }
}

/// Single-source shortest-path DAG: nodes in settle order, path counts and
/// predecessor lists.
struct ShortestPaths {
    order: Vec<usize>,
    sigma: Vec<f64>,
    preds: Vec<Vec<usize>>,
}

fn bfs_paths(graph: &WeightedGraph, s: usize) -> ShortestPaths {
    let n = graph.node_count();
    let mut dist = vec![usize::MAX; n];
    let mut sigma = vec![0.0; n];
    let mut preds = vec![Vec::new(); n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    dist[s] = 0;
    sigma[s] = 1.0;
    queue.push_back(s);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &(w, _) in graph.neighbors(v) {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
            if dist[w] == dist[v] + 1 {
                sigma[w] += sigma[v];
                preds[w].push(v);
            }
        }
    }
    ShortestPaths { order, sigma, preds }
}

#[derive(PartialEq)]
struct Frontier {
    dist: f64,
    node: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, then node id
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra_paths(graph: &WeightedGraph, s: usize) -> ShortestPaths {
    let n = graph.node_count();
    let tie = |a: f64, b: f64| b.is_finite() && (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
    let mut dist = vec![f64::INFINITY; n];
    let mut settled = vec![false; n];
    let mut sigma = vec![0.0; n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut order = Vec::with_capacity(n);
    let mut heap = BinaryHeap::new();
    dist[s] = 0.0;
    sigma[s] = 1.0;
    heap.push(Frontier { dist: 0.0, node: s });
    while let Some(Frontier { dist: d, node: v }) = heap.pop() {
        if settled[v] || d > dist[v] {
            continue;
        }
        settled[v] = true;
        order.push(v);
        for &(w, weight) in graph.neighbors(v) {
            if settled[w] {
                continue;
            }
            let candidate = d + 1.0 / weight;
            if tie(candidate, dist[w]) {
                sigma[w] += sigma[v];
                preds[w].push(v);
            } else if candidate < dist[w] {
                dist[w] = candidate;
                sigma[w] = sigma[v];
                preds[w] = vec![v];
                heap.push(Frontier { dist: candidate, node: w });
            }
        }
    }
    ShortestPaths { order, sigma, preds }
}

/// Adds source `s`'s pair dependencies into `acc`.
fn accumulate_source(graph: &WeightedGraph, s: usize, metric: PathMetric, acc: &mut [f64]) {
    let paths = match metric {
        PathMetric::Unweighted => bfs_paths(graph, s),
        PathMetric::InverseWeight => dijkstra_paths(graph, s),
    };
    let mut delta = vec![0.0; graph.node_count()];
    for &w in paths.order.iter().rev() {
        for &v in &paths.preds[w] {
            delta[v] += paths.sigma[v] / paths.sigma[w] * (1.0 + delta[w]);
        }
        if w != s {
            acc[w] += delta[w];
        }
    }
}

/// Unnormalized betweenness over unordered pairs on the unweighted skeleton.
pub fn betweenness(graph: &WeightedGraph) -> CentralityScores {
    betweenness_with(graph, &BetweennessConfig::default())
}

pub fn betweenness_with(graph: &WeightedGraph, cfg: &BetweennessConfig) -> CentralityScores {
    let n = graph.node_count();
    let blocks = n.div_ceil(SOURCE_BLOCK);
    let partials = cfg.execution.map_range(blocks, |b| {
        let mut acc = vec![0.0; n];
        for s in b * SOURCE_BLOCK..((b + 1) * SOURCE_BLOCK).min(n) {
            accumulate_source(graph, s, cfg.metric, &mut acc);
        }
        acc
    });
    let mut scores = vec![0.0; n];
    for partial in partials {
        for (s, p) in scores.iter_mut().zip(partial) {
            *s += p;
        }
    }
    // each unordered pair was counted from both ends
    for s in &mut scores {
        *s /= 2.0;
    }
    CentralityScores {
        scores,
        normalized: false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiminalEntry {
    pub node: usize,
    pub label: String,
    pub betweenness: f64,
    /// Communities of the node's neighbours, ascending.
    pub communities: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiminalReport {
    pub ranked: Vec<LiminalEntry>,
    pub cutoff: f64,
    pub candidate_count: usize,
}

impl LiminalReport {
    pub fn contains(&self, node: usize) -> bool {
        self.ranked.iter().any(|e| e.node == node)
    }

    /// Tab-separated table: `node label betweenness communities`, after a
    /// `# top_fraction=<f> candidates=<n>` line.
    pub fn to_table(&self) -> String {
        let mut out = format!("# top_fraction={} candidates={}\n", self.cutoff, self.candidate_count);
        out.push_str("node\tlabel\tbetweenness\tcommunities\n");
        for e in &self.ranked {
            let communities: Vec<String> = e.communities.iter().map(|c| c.to_string()).collect();
            let _ = writeln!(out, "{}\t{}\t{}\t{}", e.node, e.label, e.betweenness, communities.join(","));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_table()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_table(&raw).map_err(|m| Error::format(path.display().to_string(), m))
    }

    fn from_table(raw: &str) -> std::result::Result<Self, String> {
        let mut lines = raw.lines();
        let header = lines.next().ok_or("empty liminal table")?;
        let (cutoff, candidate_count) = header
            .strip_prefix("# top_fraction=")
            .and_then(|rest| rest.split_once(" candidates="))
            .and_then(|(f, n)| Some((f.parse::<f64>().ok()?, n.parse::<usize>().ok()?)))
            .ok_or("missing `# top_fraction=<f> candidates=<n>` line")?;
        if lines.next() != Some("node\tlabel\tbetweenness\tcommunities") {
            return Err("missing column header".into());
        }
        let mut ranked = Vec::new();
        for (n, line) in lines.enumerate() {
            let bad = || format!("line {}: expected four tab-separated fields", n + 3);
            let f: Vec<&str> = line.split('\t').collect();
            let [node, label, b, comms] = f[..] else { return Err(bad()) };
            let communities = comms
                .split(',')
                .map(|c| c.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad())?;
            ranked.push(LiminalEntry {
                node: node.parse().map_err(|_| bad())?,
                label: label.to_owned(),
                betweenness: b.parse().map_err(|_| bad())?,
                communities,
            });
        }
        if ranked.len() > candidate_count {
            return Err(format!("{} rows but only {candidate_count} candidates", ranked.len()));
        }
        Ok(LiminalReport { ranked, cutoff, candidate_count })
    }
}

/// Keeps the top `ceil(top_fraction * candidates)` nodes whose neighbours
/// span at least two communities, by betweenness descending then node id.
pub fn liminal_nodes(
    graph: &WeightedGraph,
    partition: &Partition,
    scores: &CentralityScores,
    top_fraction: f64,
) -> Result<LiminalReport> {
    if !(top_fraction > 0.0 && top_fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "top_fraction must be in (0, 1], got {top_fraction}"
        )));
    }
    let n = graph.node_count();
    if partition.node_count() != n || scores.scores.len() != n {
        return Err(Error::Inconsistent(format!(
            "graph has {n} nodes, partition {}, scores {}",
            partition.node_count(),
            scores.scores.len()
        )));
    }
    let mut candidates: Vec<LiminalEntry> = (0..n)
        .filter_map(|v| {
            let adjacent: BTreeSet<usize> = graph
                .neighbors(v)
                .iter()
                .map(|&(u, _)| partition.community_of(u))
                .collect();
            (adjacent.len() >= 2).then(|| LiminalEntry {
                node: v,
                label: graph.label(v).to_owned(),
                betweenness: scores.scores[v],
                communities: adjacent.into_iter().collect(),
            })
        })
        .collect();
    let candidate_count = candidates.len();
    candidates.sort_by(|a, b| b.betweenness.total_cmp(&a.betweenness).then(a.node.cmp(&b.node)));
    let keep = (top_fraction * candidate_count as f64).ceil() as usize;
    candidates.truncate(keep.min(candidate_count));
    Ok(LiminalReport {
        ranked: candidates,
        cutoff: top_fraction,
        candidate_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> WeightedGraph {
        WeightedGraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    fn bridged_triangles() -> WeightedGraph {
        WeightedGraph::from_edges(
            6,
            &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0), (3, 5, 1.0), (2, 3, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn path_center_is_one() {
        let s = betweenness(&path3());
        assert_eq!(s.scores, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn star_center_is_three() {
        let g = WeightedGraph::from_edges(4, &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)]).unwrap();
        assert_eq!(betweenness(&g).scores, vec![3.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn weights_ignored_on_unweighted_skeleton() {
        let g = WeightedGraph::from_edges(3, &[(0, 1, 10.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        assert_eq!(betweenness(&g).scores, vec![0.0, 0.0, 0.0]);
        // with inverse weights 0-1-2 costs 1.1 < 1, so no: 0-2 direct is 1.0
        let inv = betweenness_with(&g, &BetweennessConfig { metric: PathMetric::InverseWeight, ..Default::default() });
        assert_eq!(inv.scores, vec![0.0, 0.0, 0.0]);
        let g = WeightedGraph::from_edges(3, &[(0, 1, 10.0), (1, 2, 10.0), (0, 2, 1.0)]).unwrap();
        let inv = betweenness_with(&g, &BetweennessConfig { metric: PathMetric::InverseWeight, ..Default::default() });
        assert!((inv.scores[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn liminal_table_round_trip() {
        let g = bridged_triangles();
        let p = Partition::from_assignment(&[0, 0, 0, 1, 1, 1]);
        let r = liminal_nodes(&g, &p, &betweenness(&g), 1.0).unwrap();
        let text = r.to_table();
        assert!(text.starts_with("# top_fraction=1 candidates=2\nnode\tlabel"));
        assert_eq!(LiminalReport::from_table(&text).unwrap(), r);
        assert!(LiminalReport::from_table("node\tlabel\tbetweenness\tcommunities\n").is_err());
        assert!(LiminalReport::from_table(&format!("{text}7\tbad\tnan?\t0\n")).is_err());
    }

    #[test]
    fn normalization() {
        let s = betweenness(&path3()).normalize();
        assert!(s.normalized);
        assert_eq!(s.scores, vec![0.0, 1.0, 0.0]);
        assert_eq!(betweenness(&path3()).relative_to_max(), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let mut edges = Vec::new();
        for i in 0..150usize {
            edges.push((i, (i * 7 + 3) % 150, 1.0 + (i % 5) as f64));
            edges.push((i, (i + 1) % 150, 1.0));
        }
        let edges: Vec<_> = edges.into_iter().filter(|(u, v, _)| u != v).collect();
        let g = WeightedGraph::from_edges(150, &edges).unwrap();
        for metric in [PathMetric::Unweighted, PathMetric::InverseWeight] {
            let seq = betweenness_with(&g, &BetweennessConfig { metric, execution: Execution::Sequential });
            let par = betweenness_with(&g, &BetweennessConfig { metric, execution: Execution::Parallel });
            assert_eq!(seq, par);
        }
    }

    #[test]
    fn bridge_endpoints_are_liminal() {
        let g = bridged_triangles();
        let p = Partition::from_assignment(&[0, 0, 0, 1, 1, 1]);
        let s = betweenness(&g);
        let r = liminal_nodes(&g, &p, &s, 1.0).unwrap();
        let nodes: Vec<usize> = r.ranked.iter().map(|e| e.node).collect();
        assert_eq!(nodes, vec![2, 3]);
        assert!(r.ranked.iter().all(|e| e.communities == vec![0, 1]));
        // tie on betweenness (9 each) broken by node id; a small fraction keeps one
        let r = liminal_nodes(&g, &p, &s, 0.05).unwrap();
        assert_eq!(r.ranked.len(), 1);
        assert_eq!(r.ranked[0].node, 2);
    }

    #[test]
    fn merged_partition_has_no_liminal_nodes() {
        let g = bridged_triangles();
        let r = liminal_nodes(&g, &Partition::single_community(6), &betweenness(&g), 1.0).unwrap();
        assert!(r.ranked.is_empty());
    }

    #[test]
    fn bad_fraction_and_mismatch() {
        let g = bridged_triangles();
        let s = betweenness(&g);
        let p = Partition::singletons(6);
        assert!(liminal_nodes(&g, &p, &s, 0.0).is_err());
        assert!(liminal_nodes(&g, &p, &s, 1.5).is_err());
        assert!(liminal_nodes(&g, &Partition::singletons(5), &s, 0.5).is_err());
    }

    #[test]
    fn score_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("centrality.txt");
        let s = betweenness(&bridged_triangles());
        s.save(&path).unwrap();
        assert_eq!(CentralityScores::load(&path).unwrap(), s);
    }
}
