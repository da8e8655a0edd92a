//! Independent oracles shared by the integration tests. Nothing here calls
//! into the optimized code paths it is used to check.
#![allow(dead_code)]

use liminal_core::graph::WeightedGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Edge = (usize, usize, f64);

pub fn two_triangles() -> Vec<Edge> {
    vec![(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0), (3, 5, 1.0)]
}

pub fn bridged_triangles() -> Vec<Edge> {
    let mut e = two_triangles();
    e.push((2, 3, 1.0));
    e
}

pub fn complete(nodes: std::ops::Range<usize>) -> Vec<Edge> {
    let mut e = Vec::new();
    for u in nodes.clone() {
        for v in u + 1..nodes.end {
            e.push((u, v, 1.0));
        }
    }
    e
}

/// Two K4s joined through the two-node path 3-4-5-6.
pub fn barbell() -> Vec<Edge> {
    let mut e = complete(0..4);
    e.extend([(3, 4, 1.0), (4, 5, 1.0), (5, 6, 1.0)]);
    e.extend(complete(6..10));
    e
}

pub fn cycle(n: usize) -> Vec<Edge> {
    (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect()
}

/// The shipped fixture list as (name, node count, edges).
pub fn fixtures() -> Vec<(&'static str, usize, Vec<Edge>)> {
    vec![
        ("two_triangles", 6, two_triangles()),
        ("triangles_bridge", 6, bridged_triangles()),
        ("k4", 4, complete(0..4)),
        ("barbell", 10, barbell()),
        ("five_cycle", 5, cycle(5)),
    ]
}

pub fn graph(n: usize, edges: &[Edge]) -> WeightedGraph {
    WeightedGraph::from_edges(n, edges).expect("fixture graph")
}

/// Random weighted graph: each pair present with probability `p`, weight
/// uniform in [0.5, 5], plus occasional self-loops.
pub fn random_edges(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<Edge> {
    let mut e = Vec::new();
    for u in 0..n {
        for v in u..n {
            let prob = if u == v { p / 4.0 } else { p };
            if rng.random_bool(prob) {
                e.push((u, v, rng.random_range(0.5..5.0)));
            }
        }
    }
    e
}

/// Random connected simple graph: a random spanning tree plus extra edges.
pub fn random_connected(rng: &mut ChaCha8Rng, n: usize, extra: f64) -> Vec<Edge> {
    let mut e = Vec::new();
    for v in 1..n {
        e.push((rng.random_range(0..v), v, 1.0));
    }
    for u in 0..n {
        for v in u + 1..n {
            if !e.iter().any(|&(a, b, _)| a == u && b == v) && rng.random_bool(extra) {
                e.push((u, v, 1.0));
            }
        }
    }
    e
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense symmetric adjacency with the diagonal holding twice the self-loop.
pub fn adjacency(n: usize, edges: &[Edge]) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; n]; n];
    for &(u, v, w) in edges {
        if u == v {
            a[u][u] += 2.0 * w;
        } else {
            a[u][v] += w;
            a[v][u] += w;
        }
    }
    a
}

/// Q = (1/2m) Σ_ij [A_ij − γ k_i k_j / 2m] δ(c_i, c_j), evaluated term by term.
pub fn modularity_direct(n: usize, edges: &[Edge], labels: &[usize], gamma: f64) -> f64 {
    let a = adjacency(n, edges);
    let k: Vec<f64> = a.iter().map(|row| row.iter().sum()).collect();
    let two_m: f64 = k.iter().sum();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if labels[i] == labels[j] {
                q += a[i][j] - gamma * k[i] * k[j] / two_m;
            }
        }
    }
    q / two_m
}

/// Calls `f` on every set partition of `0..n` as a restricted growth string.
pub fn for_each_partition(n: usize, mut f: impl FnMut(&[usize])) {
    fn rec(labels: &mut Vec<usize>, n: usize, max: usize, f: &mut dyn FnMut(&[usize])) {
        if labels.len() == n {
            f(labels);
            return;
        }
        let next = if labels.is_empty() { 0 } else { max + 1 };
        for c in 0..=next {
            labels.push(c);
            rec(labels, n, max.max(c), f);
            labels.pop();
        }
    }
    rec(&mut Vec::with_capacity(n), n, 0, &mut f);
}

/// Exhaustive maximum modularity and one partition attaining it.
pub fn max_modularity(n: usize, edges: &[Edge]) -> (f64, Vec<usize>) {
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for_each_partition(n, |labels| {
        let q = modularity_direct(n, edges, labels, 1.0);
        if q > best.0 {
            best = (q, labels.to_vec());
        }
    });
    best
}

/// Betweenness by listing every simple path between every unordered pair and
/// keeping the shortest ones. Exponential; only for n ≤ 8.
pub fn betweenness_brute(n: usize, edges: &[Edge]) -> Vec<f64> {
    let mut adj = vec![Vec::new(); n];
    for &(u, v, _) in edges {
        if u != v && !adj[u].contains(&v) {
            adj[u].push(v);
            adj[v].push(u);
        }
    }
    fn walk(adj: &[Vec<usize>], at: usize, to: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if at == to {
            out.push(path.clone());
            return;
        }
        for &w in &adj[at] {
            if !path.contains(&w) {
                path.push(w);
                walk(adj, w, to, path, out);
                path.pop();
            }
        }
    }
    let mut score = vec![0.0; n];
    for s in 0..n {
        for t in s + 1..n {
            let mut paths = Vec::new();
            walk(&adj, s, t, &mut vec![s], &mut paths);
            let Some(shortest) = paths.iter().map(Vec::len).min() else {
                continue;
            };
            let best: Vec<&Vec<usize>> = paths.iter().filter(|p| p.len() == shortest).collect();
            let total = best.len() as f64;
            for p in &best {
                for &v in &p[1..p.len() - 1] {
                    score[v] += 1.0 / total;
                }
            }
        }
    }
    score
}

/// Connected components of `0..n` after deleting `removed`.
pub fn components_without(n: usize, edges: &[Edge], removed: usize) -> Vec<usize> {
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        if start == removed || comp[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        comp[start] = next;
        while let Some(v) = stack.pop() {
            for &(a, b, _) in edges {
                let other = if a == v { b } else if b == v { a } else { continue };
                if other != removed && comp[other] == usize::MAX {
                    comp[other] = next;
                    stack.push(other);
                }
            }
        }
        next += 1;
    }
    comp
}

// ---- finite-difference gradient oracle ---------------------------------------

use liminal_core::neural::{bce_loss_weighted, forward_example, loss_and_grad, Architecture, Params, PARAM_NAMES};
use liminal_core::parallel::Execution;

#[derive(Debug, Default)]
pub struct GradCheck {
    pub checked: usize,
    /// Coordinates whose ±ε perturbation changed a pooling winner or its
    /// ReLU state, and were differenced again with a smaller step.
    pub shrunk_steps: usize,
    /// Coordinates sitting on a kink even at a 1e-9 step.
    pub unresolved_kinks: usize,
    pub worst_f32: f64,
    pub worst_f64: f64,
    pub failures: Vec<String>,
}

/// Pass if within `tol` relative; tiny gradients (< 1e-6) get 1e-2.
pub fn relative_ok(analytic: f64, numeric: f64, tol: f64) -> (bool, f64) {
    let scale = analytic.abs().max(numeric.abs());
    if scale == 0.0 {
        return (true, 0.0);
    }
    let rel = (analytic - numeric).abs() / scale;
    let ok = rel <= tol || (scale < 1e-6 && rel <= 1e-2) || scale < 1e-12;
    (ok, rel)
}

fn fd_loss(arch: &Architecture, p: &Params<f64>, batch: &[Vec<usize>], y: &[f64]) -> (f64, Vec<Vec<usize>>) {
    let caches: Vec<_> = batch.iter().map(|s| forward_example(arch, p, s).unwrap()).collect();
    let probs: Vec<f64> = caches.iter().map(|c| c.prob).collect();
    let patterns = caches.iter().map(|c| c.activation_pattern()).collect();
    (bce_loss_weighted(&probs, y, 1.0), patterns)
}

/// Compares backprop in f32 and f64 against f64 central differences for
/// every parameter.
pub fn gradient_check(arch: &Architecture, params: &Params<f32>, batch: &[Vec<usize>], y: &[f32], eps: f64, tol: f64) -> GradCheck {
    let p64: Params<f64> = params.cast();
    let y64: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    let (_, g32) = loss_and_grad(arch, params, batch, y, 1.0, Execution::Sequential).unwrap();
    let (_, g64) = loss_and_grad(arch, &p64, batch, &y64, 1.0, Execution::Sequential).unwrap();
    let g32: Params<f64> = g32.cast();
    let (_, base_patterns) = fd_loss(arch, &p64, batch, &y64);

    let mut coords = Vec::new();
    for (t, tensor) in p64.tensors().iter().enumerate() {
        coords.extend((0..tensor.len()).map(|i| (t, i)));
    }
    let results = Execution::Parallel.map_slice(&coords, |&(t, i)| {
        // shrink the step until neither side crosses a kink
        let mut h = eps;
        loop {
            let mut plus = p64.clone();
            plus.tensors_mut()[t].data_mut()[i] += h;
            let mut minus = p64.clone();
            minus.tensors_mut()[t].data_mut()[i] -= h;
            let (lp, pat_p) = fd_loss(arch, &plus, batch, &y64);
            let (lm, pat_m) = fd_loss(arch, &minus, batch, &y64);
            if pat_p == base_patterns && pat_m == base_patterns {
                return Some(((lp - lm) / (2.0 * h), h != eps));
            }
            h /= 10.0;
            if h < 1e-9 {
                return None;
            }
        }
    });
    let mut report = GradCheck::default();
    for (&(t, i), numeric) in coords.iter().zip(results) {
        let Some((numeric, shrunk)) = numeric else {
            report.unresolved_kinks += 1;
            continue;
        };
        report.checked += 1;
        report.shrunk_steps += usize::from(shrunk);
        let (ok32, r32) = relative_ok(g32.tensors()[t].data()[i], numeric, tol);
        let (ok64, r64) = relative_ok(g64.tensors()[t].data()[i], numeric, tol);
        report.worst_f32 = report.worst_f32.max(if ok32 { r32.min(tol) } else { r32 });
        report.worst_f64 = report.worst_f64.max(if ok64 { r64.min(tol) } else { r64 });
        if !ok32 || !ok64 {
            report.failures.push(format!(
                "{}[{i}]: f32 {} f64 {} numeric {numeric}",
                PARAM_NAMES[t],
                g32.tensors()[t].data()[i],
                g64.tensors()[t].data()[i]
            ));
        }
    }
    report
}

/// Small-vocabulary default architecture and a seeded two-example batch
/// (one positive, one negative).
pub fn gradcheck_setup(seed: u64) -> (Architecture, Params<f32>, Vec<Vec<usize>>, Vec<f32>) {
    let arch = Architecture::new(64, 64, 16).unwrap();
    let params = Params::<f32>::init(&arch, seed);
    let mut r = rng(seed ^ 0x9e37);
    let batch: Vec<Vec<usize>> = (0..2)
        .map(|_| {
            let len = r.random_range(20..64);
            let mut s: Vec<usize> = (0..len).map(|_| r.random_range(2..64)).collect();
            s.resize(64, 0);
            s
        })
        .collect();
    (arch, params, batch, vec![1.0, 0.0])
}

// ---- synthetic corpora --------------------------------------------------------

use liminal_core::corpus::{generate_synthetic, Corpus, SyntheticSpec};
use liminal_core::stratagem::{LabelRecord, LabelStore};

pub fn synthetic(n: usize, positives: usize, seed: u64) -> (Corpus, LabelStore) {
    let (corpus, labels) = generate_synthetic(&SyntheticSpec::new(n, positives, seed)).unwrap();
    let store = LabelStore::replay(labels.into_iter().map(|(tweet_id, label)| LabelRecord { tweet_id, label }));
    (corpus, store)
}
