//! Undirected, unweighted networks: generators, edge-list I/O, and
//! induced-subgraph sampling.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, RngStream};

/// An immutable simple graph on nodes `0..n`.
///
/// Adjacency is kept both as a dense 0/1 matrix and as a sorted edge list
/// of `(min, max)` pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adjacency: Vec<u8>,
    edges: Vec<(usize, usize)>,
    labels: Option<Vec<String>>,
}

impl Graph {
    /// Builds a graph, collapsing duplicate and reversed edges.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::invalid(format!(
                    "edge ({u}, {v}) out of range for {n} nodes"
                )));
            }
            if u == v {
                return Err(Error::invalid(format!("self-loop on node {u}")));
            }
            set.insert((u.min(v), u.max(v)));
        }
        let mut adjacency = vec![0u8; n * n];
        for &(u, v) in &set {
            adjacency[u * n + v] = 1;
            adjacency[v * n + u] = 1;
        }
        Ok(Self {
            n,
            adjacency,
            edges: set.into_iter().collect(),
            labels: None,
        })
    }

    pub fn empty(n: usize) -> Self {
        Self {
            n,
            adjacency: vec![0; n * n],
            edges: Vec::new(),
            labels: None,
        }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Sorted `(min, max)` pairs.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u * self.n + v] == 1
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adjacency[u * self.n..(u + 1) * self.n]
            .iter()
            .map(|&x| x as usize)
            .sum()
    }

    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[u * self.n..(u + 1) * self.n]
            .iter()
            .enumerate()
            .filter(|(_, &x)| x == 1)
            .map(|(v, _)| v)
    }

    /// Dense adjacency matrix `A` as floats.
    pub fn adjacency_matrix(&self) -> Matrix {
        Matrix::from_fn(self.n, self.n, |i, j| self.adjacency[i * self.n + j] as f64)
    }

    /// Edge-list document: `n=<N>` header then one sorted `u v` per line.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::with_capacity(8 + self.edges.len() * 8);
        let _ = writeln!(out, "n={}", self.n);
        for &(u, v) in &self.edges {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }
}

/// Preferential attachment: a clique on `m + 1` seed nodes, then each new
/// node links to `m` distinct existing nodes drawn proportionally to degree.
///
/// The edge count is always `C(m+1, 2) + (n - m - 1) * m`.
pub fn barabasi_albert(n: usize, m: usize, seed: u64) -> Result<Graph> {
    if m < 1 || m >= n {
        return Err(Error::invalid(format!(
            "Barabasi-Albert requires 1 <= m < n, got m={m}, n={n}"
        )));
    }
    let mut rng = RngStream::new(seed);
    let mut edges = Vec::with_capacity(m * (m + 1) / 2 + (n - m - 1) * m);
    // Every node appears here once per incident edge end.
    let mut ends: Vec<usize> = Vec::with_capacity(2 * edges.capacity());
    for u in 0..=m {
        for v in (u + 1)..=m {
            edges.push((u, v));
            ends.push(u);
            ends.push(v);
        }
    }
    let mut chosen = Vec::with_capacity(m);
    for new in (m + 1)..n {
        chosen.clear();
        while chosen.len() < m {
            let pick = ends[rng.random_range(0..ends.len())];
            if !chosen.contains(&pick) {
                chosen.push(pick);
            }
        }
        for &t in &chosen {
            edges.push((t, new));
            ends.push(t);
            ends.push(new);
        }
    }
    Graph::from_edges(n, edges)
}

/// Small-world graph: ring lattice with `k/2` neighbours per side, then
/// each lattice edge `(u, u+j)` has its far end rewired with probability
/// `p` to a uniformly chosen node that is neither `u` nor already adjacent.
pub fn watts_strogatz(n: usize, k: usize, p: f64, seed: u64) -> Result<Graph> {
    if !k.is_multiple_of(2) {
        return Err(Error::invalid(format!("Watts-Strogatz needs even k, got {k}")));
    }
    if k == 0 || k >= n {
        return Err(Error::invalid(format!(
            "Watts-Strogatz requires 0 < k < n, got k={k}, n={n}"
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("rewire probability {p} outside [0, 1]")));
    }
    let mut adj = vec![false; n * n];
    let set = |adj: &mut Vec<bool>, u: usize, v: usize, on: bool| {
        adj[u * n + v] = on;
        adj[v * n + u] = on;
    };
    for u in 0..n {
        for j in 1..=k / 2 {
            set(&mut adj, u, (u + j) % n, true);
        }
    }
    let mut rng = RngStream::new(seed);
    for j in 1..=k / 2 {
        for u in 0..n {
            let v = (u + j) % n;
            if !adj[u * n + v] || rng.random::<f64>() >= p {
                continue;
            }
            let free = (0..n).filter(|&w| w != u && !adj[u * n + w]).count();
            if free == 0 {
                continue;
            }
            let mut target = rng.random_range(0..n);
            while target == u || adj[u * n + target] {
                target = rng.random_range(0..n);
            }
            set(&mut adj, u, v, false);
            set(&mut adj, u, target, true);
        }
    }
    let mut edges = Vec::with_capacity(n * k / 2);
    for u in 0..n {
        for v in (u + 1)..n {
            if adj[u * n + v] {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, edges)
}

/// Parses an edge-list document.
///
/// Blank lines and lines starting with `#` are ignored. The first content
/// line may be `n=<N>`; otherwise `n` is one more than the largest id.
pub fn load_edge_list(text: &str) -> Result<Graph> {
    let mut declared: Option<usize> = None;
    let mut seen_content = false;
    let mut edges = Vec::new();
    let mut max_id: Option<usize> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen_content {
            seen_content = true;
            if let Some(rest) = line.strip_prefix("n=") {
                let n = rest
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| Error::parse(line_no, format!("invalid node count {rest:?}")))?;
                declared = Some(n);
                continue;
            }
        }
        let mut fields = line.split_whitespace();
        let (a, b) = match (fields.next(), fields.next(), fields.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => return Err(Error::parse(line_no, format!("expected \"u v\", got {line:?}"))),
        };
        let parse_id = |s: &str| -> Result<usize> {
            if s.starts_with('-') {
                return Err(Error::parse(line_no, format!("negative node id {s}")));
            }
            s.parse::<usize>()
                .map_err(|_| Error::parse(line_no, format!("invalid node id {s:?}")))
        };
        let u = parse_id(a)?;
        let v = parse_id(b)?;
        if u == v {
            return Err(Error::parse(line_no, "self-loop"));
        }
        if let Some(n) = declared {
            if u >= n || v >= n {
                return Err(Error::parse(
                    line_no,
                    format!("node id {} out of range for n={n}", u.max(v)),
                ));
            }
        }
        max_id = Some(max_id.map_or(u.max(v), |m: usize| m.max(u).max(v)));
        edges.push((u, v));
    }
    let n = declared.unwrap_or_else(|| max_id.map_or(0, |m| m + 1));
    Graph::from_edges(n, edges)
}

/// Induced subgraph on `m` nodes chosen uniformly without replacement.
///
/// Returns the subgraph together with `id_map`, where `id_map[new] = old`;
/// chosen nodes keep their relative order.
pub fn sample_induced_subgraph(g: &Graph, m: usize, seed: u64) -> Result<(Graph, Vec<usize>)> {
    if m < 1 || m > g.n() {
        return Err(Error::invalid(format!(
            "subgraph size {m} must be in 1..={}",
            g.n()
        )));
    }
    let mut rng = RngStream::new(seed);
    let mut keep = index::sample(&mut rng, g.n(), m).into_vec();
    keep.sort_unstable();
    let mut new_id = vec![usize::MAX; g.n()];
    for (new, &old) in keep.iter().enumerate() {
        new_id[old] = new;
    }
    let edges = g
        .edges()
        .iter()
        .filter(|&&(u, v)| new_id[u] != usize::MAX && new_id[v] != usize::MAX)
        .map(|&(u, v)| (new_id[u], new_id[v]));
    let mut sub = Graph::from_edges(m, edges)?;
    if let Some(labels) = g.labels() {
        sub = sub.with_labels(keep.iter().map(|&i| labels[i].clone()).collect())?;
    }
    Ok((sub, keep))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_invariants(g: &Graph) {
        let n = g.n();
        let mut sum = 0usize;
        for i in 0..n {
            assert!(!g.has_edge(i, i));
            for j in 0..n {
                assert_eq!(g.has_edge(i, j), g.has_edge(j, i));
                sum += g.has_edge(i, j) as usize;
            }
        }
        assert_eq!(sum, 2 * g.edge_count());
    }

    #[test]
    fn ba_tree_and_triangle() {
        let g = barabasi_albert(5, 1, 123).unwrap();
        assert_eq!(g.edge_count(), 4);
        assert_invariants(&g);
        let t = barabasi_albert(3, 2, 9).unwrap();
        assert_eq!(t.edges(), &[(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn ba_edge_count_formula() {
        let g = barabasi_albert(128, 2, 7).unwrap();
        assert_eq!(g.edge_count(), 3 + 125 * 2);
        assert_invariants(&g);
    }

    #[test]
    fn ba_rejects_bad_m() {
        assert!(barabasi_albert(5, 5, 0).is_err());
        assert!(barabasi_albert(5, 0, 0).is_err());
    }

    #[test]
    fn ws_ring_and_rewired() {
        let ring = watts_strogatz(8, 2, 0.0, 1).unwrap();
        assert_eq!(ring.edge_count(), 8);
        for u in 0..8 {
            assert_eq!(ring.degree(u), 2);
            assert!(ring.has_edge(u, (u + 1) % 8));
        }
        let g = watts_strogatz(8, 4, 1.0, 3).unwrap();
        assert_eq!(g.edge_count(), 16);
        assert_invariants(&g);
    }

    #[test]
    fn ws_deterministic() {
        let a = watts_strogatz(128, 4, 0.1, 11).unwrap();
        let b = watts_strogatz(128, 4, 0.1, 11).unwrap();
        assert_eq!(a.edge_count(), 256);
        assert_eq!(a.to_edge_list(), b.to_edge_list());
    }

    #[test]
    fn ws_rejects_bad_k() {
        assert!(watts_strogatz(8, 3, 0.1, 0).is_err());
        assert!(watts_strogatz(8, 8, 0.1, 0).is_err());
        assert!(watts_strogatz(8, 4, 1.5, 0).is_err());
    }

    #[test]
    fn edge_list_parsing() {
        let g = load_edge_list("n=3\n0 1\n1 2").unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);

        let g = load_edge_list("0 1\n1 0").unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.n(), 2);

        let err = load_edge_list("0 0").unwrap_err();
        assert_eq!(err.to_string(), "self-loop at line 1");

        let err = load_edge_list("# comment\n0 1\n1 -2").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let err = load_edge_list("0 1 2").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = load_edge_list("n=2\n0 5").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn edge_list_roundtrip_format() {
        let g = Graph::from_edges(4, [(2, 1), (0, 3), (1, 0)]).unwrap();
        assert_eq!(g.to_edge_list(), "n=4\n0 1\n0 3\n1 2\n");
        assert_eq!(load_edge_list(&g.to_edge_list()).unwrap(), g);
    }

    #[test]
    fn subgraph_examples() {
        let g = barabasi_albert(20, 2, 4).unwrap();
        let (full, map) = sample_induced_subgraph(&g, 20, 8).unwrap();
        assert_eq!(full, g);
        assert_eq!(map, (0..20).collect::<Vec<_>>());

        let cycle = watts_strogatz(8, 2, 0.0, 0).unwrap();
        let (one, _) = sample_induced_subgraph(&cycle, 1, 3).unwrap();
        assert_eq!((one.n(), one.edge_count()), (1, 0));

        let tri = Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        for seed in 0..10 {
            let (pair, _) = sample_induced_subgraph(&tri, 2, seed).unwrap();
            assert_eq!(pair.edge_count(), 1);
        }
        assert!(sample_induced_subgraph(&tri, 4, 0).is_err());
    }

    #[test]
    fn ba_heavy_tail() {
        let g = barabasi_albert(2048, 2, 1).unwrap();
        let max = (0..g.n()).map(|u| g.degree(u)).max().unwrap() as f64;
        let mean = 2.0 * g.edge_count() as f64 / g.n() as f64;
        assert!(max > 4.0 * mean, "max {max} mean {mean}");
    }
}
