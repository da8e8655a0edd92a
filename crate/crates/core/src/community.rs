//! Weighted modularity and two-phase Louvain optimisation.
//!
//! Modularity of a partition with resolution `γ`:
//!
//! ```text
//! Q = 1/(2m) Σ_ij [A_ij - γ k_i k_j / (2m)] δ(c_i, c_j)
//!   = Σ_c [ in_c / (2m) - γ (tot_c / (2m))² ]
//! ```
//!
//! where `A_ii` is twice the self-loop weight, `in_c` sums `A_ij` inside a
//! community and `tot_c` sums the degrees of its members.
//!
//! Louvain alternates local moves (each node joins the neighbouring
//! community with the largest strictly positive gain) and aggregation
//! (communities become nodes, internal weight becomes self-loops) until a
//! level produces no move.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;

/// Minimum modularity gain for a node to change community.
pub const MOVE_EPSILON: f64 = 1e-12;

/// Safety cap on sweeps within one level.
const MAX_SWEEPS: usize = 10_000;

/// Node -> community assignment with contiguous ids numbered by first
/// appearance in node order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    assignment: Vec<usize>,
    communities: Vec<Vec<usize>>,
}

impl Partition {
    /// Renumbers arbitrary labels into contiguous ids.
    pub fn from_assignment(labels: &[usize]) -> Self {
        let mut remap: BTreeMap<usize, usize> = BTreeMap::new();
        let mut assignment = Vec::with_capacity(labels.len());
        let mut communities: Vec<Vec<usize>> = Vec::new();
        for (node, &label) in labels.iter().enumerate() {
            let next = remap.len();
            let id = *remap.entry(label).or_insert(next);
            if id == communities.len() {
                communities.push(Vec::new());
            }
            communities[id].push(node);
            assignment.push(id);
        }
        Partition {
            assignment,
            communities,
        }
    }

    pub fn singletons(n: usize) -> Self {
        Self::from_assignment(&(0..n).collect::<Vec<_>>())
    }

    pub fn single_community(n: usize) -> Self {
        Self::from_assignment(&vec![0; n])
    }

    pub fn node_count(&self) -> usize {
        self.assignment.len()
    }

    pub fn community_count(&self) -> usize {
        self.communities.len()
    }

    pub fn community_of(&self, node: usize) -> usize {
        self.assignment[node]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn communities(&self) -> &[Vec<usize>] {
        &self.communities
    }

    pub fn members(&self, community: usize) -> &[usize] {
        &self.communities[community]
    }

    /// `node_id community_id` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (node, c) in self.assignment.iter().enumerate() {
            let _ = writeln!(out, "{node} {c}");
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut labels = Vec::new();
        for (n, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let ctx = || format!("{}:{}", path.display(), n + 1);
            let mut fields = line.split_whitespace();
            let node: usize = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| Error::format(ctx(), "bad node id"))?;
            let community: usize = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| Error::format(ctx(), "bad community id"))?;
            if node != labels.len() {
                return Err(Error::format(ctx(), "node ids must be dense and ascending"));
            }
            labels.push(community);
        }
        Ok(Partition::from_assignment(&labels))
    }
}

fn check_sizes(graph: &WeightedGraph, p: &Partition) -> Result<()> {
    if graph.node_count() != p.node_count() {
        return Err(Error::Inconsistent(format!(
            "partition covers {} nodes, graph has {}",
            p.node_count(),
            graph.node_count()
        )));
    }
    Ok(())
}

pub fn modularity(graph: &WeightedGraph, p: &Partition, resolution: f64) -> Result<f64> {
    check_sizes(graph, p)?;
    let m = graph.total_weight();
    if m <= 0.0 {
        return Err(Error::EdgelessGraph);
    }
    let k = p.community_count();
    let mut inside = vec![0.0; k];
    let mut total = vec![0.0; k];
    for v in 0..graph.node_count() {
        let c = p.community_of(v);
        total[c] += graph.degree_unchecked(v);
        inside[c] += 2.0 * graph.self_loop(v);
        for &(u, w) in graph.neighbors(v) {
            if p.community_of(u) == c {
                // each internal edge is seen from both ends
                inside[c] += w;
            }
        }
    }
    let two_m = 2.0 * m;
    Ok(inside
        .iter()
        .zip(&total)
        .map(|(&i, &t)| i / two_m - resolution * (t / two_m) * (t / two_m))
        .sum())
}

/// Incremental local-move state over one graph level.
struct LocalMover<'g> {
    graph: &'g WeightedGraph,
    resolution: f64,
    m: f64,
    degree: Vec<f64>,
    community: Vec<usize>,
    community_total: Vec<f64>,
    q: f64,
    // scratch: weight from the current node to each community
    link: Vec<f64>,
    touched: Vec<usize>,
}

impl<'g> LocalMover<'g> {
    fn new(graph: &'g WeightedGraph, p: &Partition, resolution: f64) -> Result<Self> {
        let q = modularity(graph, p, resolution)?;
        let n = graph.node_count();
        let degree = graph.degrees();
        let mut community_total = vec![0.0; n];
        for v in 0..n {
            community_total[p.community_of(v)] += degree[v];
        }
        Ok(LocalMover {
            graph,
            resolution,
            m: graph.total_weight(),
            degree,
            community: p.assignment().to_vec(),
            community_total,
            q,
            link: vec![0.0; n],
            touched: Vec::new(),
        })
    }

    /// Gain of inserting an isolated node of degree `k` with `link` weight
    /// into a community whose total degree is `total`.
    fn gain(&self, link: f64, total: f64, k: f64) -> f64 {
        link / self.m - self.resolution * total * k / (2.0 * self.m * self.m)
    }

    fn move_node(&mut self, v: usize) -> bool {
        let k = self.degree[v];
        let current = self.community[v];

        for &(u, w) in self.graph.neighbors(v) {
            let c = self.community[u];
            if self.link[c] == 0.0 {
                self.touched.push(c);
            }
            self.link[c] += w;
        }
        self.touched.sort_unstable();
        self.touched.dedup();

        self.community_total[current] -= k;
        let stay = self.gain(self.link[current], self.community_total[current], k);
        let mut best = current;
        let mut best_gain = stay;
        for &c in &self.touched {
            if c == current {
                continue;
            }
            let g = self.gain(self.link[c], self.community_total[c], k);
            // ascending ids: equal gains keep the lower id
            if g > best_gain + MOVE_EPSILON {
                best = c;
                best_gain = g;
            }
        }
        self.community_total[best] += k;

        for &c in &self.touched {
            self.link[c] = 0.0;
        }
        self.touched.clear();

        if best != current {
            self.community[v] = best;
            self.q += best_gain - stay;
            true
        } else {
            false
        }
    }

    fn sweep(&mut self, order: &[usize]) -> bool {
        let mut moved = false;
        for &v in order {
            moved |= self.move_node(v);
        }
        moved
    }

    fn partition(&self) -> Partition {
        Partition::from_assignment(&self.community)
    }
}

fn check_order(graph: &WeightedGraph, node_order: &[usize]) -> Result<()> {
    let n = graph.node_count();
    let mut seen = vec![false; n];
    for &v in node_order {
        if v >= n {
            return Err(Error::UnknownNode(v));
        }
        if std::mem::replace(&mut seen[v], true) {
            return Err(Error::InvalidInput(format!("node {v} repeated in order")));
        }
    }
    Ok(())
}

/// One sweep of local moves over `node_order`. Returns the renumbered
/// partition and whether any node moved.
pub fn local_move_pass(
    graph: &WeightedGraph,
    p: &Partition,
    node_order: &[usize],
    resolution: f64,
) -> Result<(Partition, bool)> {
    check_sizes(graph, p)?;
    check_order(graph, node_order)?;
    let mut mover = LocalMover::new(graph, p, resolution)?;
    let moved = mover.sweep(node_order);
    Ok((mover.partition(), moved))
}

/// Collapses each community into one node. Internal edges and self-loops
/// become the community's self-loop; total weight is preserved.
pub fn aggregate(graph: &WeightedGraph, p: &Partition) -> Result<WeightedGraph> {
    check_sizes(graph, p)?;
    let edges: Vec<(usize, usize, f64)> = graph
        .edges()
        .into_iter()
        .map(|(u, v, w)| (p.community_of(u), p.community_of(v), w))
        .collect();
    let labels = (0..p.community_count()).map(|c| c.to_string()).collect();
    WeightedGraph::from_labelled_edges(labels, &edges)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LouvainConfig {
    pub resolution: f64,
    /// `None` sweeps nodes in ascending index order; `Some(seed)` shuffles
    /// the order of every sweep with a seeded RNG.
    pub shuffle_seed: Option<u64>,
}

impl Default for LouvainConfig {
    fn default() -> Self {
        LouvainConfig {
            resolution: 1.0,
            shuffle_seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LouvainResult {
    /// Final communities over the original nodes.
    pub partition: Partition,
    /// Modularity of the starting singleton partition followed by the
    /// incrementally tracked value after each improving level.
    pub q_history: Vec<f64>,
    /// Partition found at each level, over that level's nodes.
    pub levels: Vec<Partition>,
}

impl LouvainResult {
    pub fn modularity(&self) -> f64 {
        *self.q_history.last().expect("history starts with the singleton value")
    }
}

pub fn louvain(graph: &WeightedGraph, cfg: &LouvainConfig) -> Result<LouvainResult> {
    if graph.total_weight() <= 0.0 {
        return Err(Error::EdgelessGraph);
    }
    let mut rng = cfg.shuffle_seed.map(ChaCha8Rng::seed_from_u64);
    let mut membership: Vec<usize> = (0..graph.node_count()).collect();
    let mut level_graph = graph.clone();
    let mut q = modularity(graph, &Partition::singletons(graph.node_count()), cfg.resolution)?;
    let mut q_history = vec![q];
    let mut levels = Vec::new();

    loop {
        let n = level_graph.node_count();
        let mut mover = LocalMover::new(&level_graph, &Partition::singletons(n), cfg.resolution)?;
        // aggregation preserves modularity, so keep the running value
        mover.q = q;
        let mut order: Vec<usize> = (0..n).collect();
        let mut improved = false;
        for _ in 0..MAX_SWEEPS {
            if let Some(rng) = rng.as_mut() {
                order.shuffle(rng);
            }
            if !mover.sweep(&order) {
                break;
            }
            improved = true;
        }
        if !improved {
            break;
        }
        q = mover.q;
        q_history.push(q);
        let level = mover.partition();
        for c in &mut membership {
            *c = level.community_of(*c);
        }
        let next = aggregate(&level_graph, &level)?;
        levels.push(level);
        level_graph = next;
    }

    Ok(LouvainResult {
        partition: Partition::from_assignment(&membership),
        q_history,
        levels,
    })
}
