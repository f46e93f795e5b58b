//! Scale-free exchange networks and government perimeters.
//!
//! Links are undirected and carry the cumulative money that has flowed
//! across them, so a node's strength is the sum of its exchange weights.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{seeded, SimRng};

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedNetwork {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
    weights: Vec<f64>,
    /// Per node: `(neighbor, edge index)`.
    adjacency: Vec<Vec<(usize, usize)>>,
    index: HashMap<(usize, usize), usize>,
}

impl WeightedNetwork {
    pub fn empty(n_nodes: usize) -> Self {
        Self {
            n_nodes,
            edges: Vec::new(),
            weights: Vec::new(),
            adjacency: vec![Vec::new(); n_nodes],
            index: HashMap::new(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Endpoints of edge `e`, lower id first.
    pub fn endpoints(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn weight(&self, e: usize) -> f64 {
        self.weights[e]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn edge_between(&self, i: usize, j: usize) -> Option<usize> {
        self.index.get(&key(i, j)).copied()
    }

    /// Weight of the link `(i, j)`; zero when absent.
    pub fn link_weight(&self, i: usize, j: usize) -> f64 {
        self.edge_between(i, j).map_or(0.0, |e| self.weights[e])
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.adjacency[i].iter().map(|&(j, e)| (j, self.weights[e]))
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    /// Sum of the weights of the links at `i`.
    pub fn strength(&self, i: usize) -> f64 {
        self.neighbors(i).map(|(_, w)| w).sum()
    }

    /// Adds an undirected zero-weight link, or returns the existing one.
    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<usize> {
        if i == j {
            return Err(Error::parameter(format!("self-loop at node {i}")));
        }
        if i >= self.n_nodes || j >= self.n_nodes {
            return Err(Error::parameter(format!(
                "edge ({i}, {j}) outside a {}-node network",
                self.n_nodes
            )));
        }
        let k = key(i, j);
        if let Some(&e) = self.index.get(&k) {
            return Ok(e);
        }
        let e = self.edges.len();
        self.edges.push(k);
        self.weights.push(0.0);
        self.adjacency[i].push((j, e));
        self.adjacency[j].push((i, e));
        self.index.insert(k, e);
        Ok(e)
    }

    pub fn add_weight(&mut self, e: usize, amount: f64) {
        self.weights[e] += amount;
    }

    /// Disjoint union; nodes of `other` are shifted by `self.n_nodes()`.
    pub fn disjoint_union(&self, other: &WeightedNetwork) -> WeightedNetwork {
        let offset = self.n_nodes;
        let mut out = WeightedNetwork::empty(self.n_nodes + other.n_nodes);
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            let id = out.add_edge(i, j).expect("valid edge");
            out.weights[id] = self.weights[e];
        }
        for (e, &(i, j)) in other.edges.iter().enumerate() {
            let id = out.add_edge(i + offset, j + offset).expect("valid edge");
            out.weights[id] = other.weights[e];
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        if self.n_nodes == 0 {
            return true;
        }
        self.component_size(0, |_| true) == self.n_nodes
    }

    /// Size of the component of `root` in the subgraph induced by `keep`.
    pub fn component_size(&self, root: usize, keep: impl Fn(usize) -> bool) -> usize {
        let mut seen = vec![false; self.n_nodes];
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        let mut count = 0;
        while let Some(u) = queue.pop_front() {
            count += 1;
            for &(v, _) in &self.adjacency[u] {
                if !seen[v] && keep(v) {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        count
    }

    /// Edge list, one `i j weight` line per link.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::with_capacity(self.edges.len() * 16);
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            // `{}` on f64 prints the shortest representation that round-trips
            let _ = writeln!(out, "{i} {j} {}", self.weights[e]);
        }
        out
    }

    pub fn from_edge_list(n_nodes: usize, text: &str) -> Result<Self> {
        let mut net = WeightedNetwork::empty(n_nodes);
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::domain(format!("edge list line {}: `{line}`", lineno + 1));
            let mut parts = line.split_whitespace();
            let i: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let j: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let w: f64 = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            if parts.next().is_some() || !(w >= 0.0) {
                return Err(bad());
            }
            let e = net.add_edge(i, j)?;
            net.weights[e] += w;
        }
        Ok(net)
    }
}

fn key(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

/// Barabási–Albert preferential attachment.
///
/// Starts from a complete graph on `m + 1` nodes; every later node links to
/// `m` distinct existing nodes chosen with probability proportional to degree.
pub fn generate_scale_free(n: usize, m: usize, seed: u64) -> Result<WeightedNetwork> {
    if m == 0 || n <= m {
        return Err(Error::parameter(format!(
            "scale-free network needs n >= m + 1 and m >= 1, got n={n}, m={m}"
        )));
    }
    let mut rng = seeded(seed);
    let mut net = WeightedNetwork::empty(n);
    // each node appears once per incident edge end
    let mut ends: Vec<usize> = Vec::with_capacity(2 * m * n);
    for i in 0..=m {
        for j in (i + 1)..=m {
            net.add_edge(i, j)?;
            ends.push(i);
            ends.push(j);
        }
    }
    let mut targets = Vec::with_capacity(m);
    for new in (m + 1)..n {
        targets.clear();
        while targets.len() < m {
            let t = ends[rng.random_range(0..ends.len())];
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            net.add_edge(new, t)?;
            ends.push(new);
            ends.push(t);
        }
    }
    Ok(net)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    RandomFraction,
    /// Contiguous region grown breadth-first from a random root.
    #[default]
    BreadthFirstBall,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsystemSpec {
    pub selection: Selection,
    pub fraction: f64,
}

/// Picks `ceil(fraction * n)` node ids for the perimeter `S`, sorted ascending.
pub fn carve_subsystem(
    network: &WeightedNetwork,
    spec: &SubsystemSpec,
    seed: u64,
) -> Result<Vec<usize>> {
    let n = network.n_nodes();
    if !(spec.fraction > 0.0 && spec.fraction < 1.0) {
        return Err(Error::parameter(format!(
            "subsystem fraction must lie in (0, 1), got {}",
            spec.fraction
        )));
    }
    let size = (spec.fraction * n as f64).ceil() as usize;
    if size == 0 || size >= n {
        return Err(Error::parameter(format!(
            "fraction {} of {n} nodes does not give a proper non-empty subset",
            spec.fraction
        )));
    }
    let mut rng = seeded(seed);
    let mut members = match spec.selection {
        Selection::RandomFraction => index::sample(&mut rng, n, size).into_vec(),
        Selection::BreadthFirstBall => bfs_ball(network, size, &mut rng),
    };
    members.sort_unstable();
    Ok(members)
}

fn bfs_ball(network: &WeightedNetwork, size: usize, rng: &mut SimRng) -> Vec<usize> {
    let n = network.n_nodes();
    let mut taken = vec![false; n];
    let mut members = Vec::with_capacity(size);
    let mut queue = VecDeque::new();
    while members.len() < size {
        if queue.is_empty() {
            // a fresh root; only reached again when a component is exhausted
            let mut root = rng.random_range(0..n);
            while taken[root] {
                root = rng.random_range(0..n);
            }
            taken[root] = true;
            queue.push_back(root);
        }
        while let Some(u) = queue.pop_front() {
            members.push(u);
            if members.len() == size {
                break;
            }
            for &(v, _) in &network.adjacency[u] {
                if !taken[v] {
                    taken[v] = true;
                    queue.push_back(v);
                }
            }
        }
    }
    members
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturated_case_is_complete_graph() {
        let net = generate_scale_free(5, 4, 1).unwrap();
        assert_eq!(net.n_edges(), 10);
        assert!(net.degrees().iter().all(|&d| d == 4));
    }

    #[test]
    fn tree_case() {
        let net = generate_scale_free(3, 1, 99).unwrap();
        assert_eq!(net.n_edges(), 2);
        assert!(net.is_connected());
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(generate_scale_free(4, 4, 0).is_err());
        assert!(generate_scale_free(10, 0, 0).is_err());
    }

    #[test]
    fn no_self_loops_and_symmetric() {
        let mut net = generate_scale_free(200, 3, 5).unwrap();
        net.add_weight(3, 2.5);
        for i in 0..net.n_nodes() {
            for (j, w) in net.neighbors(i) {
                assert_ne!(i, j);
                assert_eq!(w, net.link_weight(j, i));
            }
        }
        assert!(net.add_edge(4, 4).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_scale_free(500, 2, 11).unwrap();
        assert_eq!(a, generate_scale_free(500, 2, 11).unwrap());
        assert_ne!(a.edges(), generate_scale_free(500, 2, 12).unwrap().edges());
    }

    #[test]
    fn edge_list_round_trip() {
        let mut net = generate_scale_free(50, 2, 3).unwrap();
        for e in 0..net.n_edges() {
            net.add_weight(e, 0.1 * e as f64 + 1.0 / 3.0);
        }
        let text = net.to_edge_list();
        assert_eq!(text.lines().count(), net.n_edges());
        let back = WeightedNetwork::from_edge_list(50, &text).unwrap();
        assert_eq!(back.weights(), net.weights());
        assert_eq!(back.edges(), net.edges());
    }

    #[test]
    fn random_fraction_cardinality() {
        let net = generate_scale_free(100, 2, 1).unwrap();
        let spec = SubsystemSpec {
            selection: Selection::RandomFraction,
            fraction: 0.25,
        };
        let s = carve_subsystem(&net, &spec, 4).unwrap();
        assert_eq!(s.len(), 25);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn bfs_ball_is_connected() {
        let net = generate_scale_free(1000, 2, 8).unwrap();
        let spec = SubsystemSpec {
            selection: Selection::BreadthFirstBall,
            fraction: 0.3,
        };
        for seed in 0..5 {
            let s = carve_subsystem(&net, &spec, seed).unwrap();
            assert_eq!(s.len(), 300);
            let mut inside = vec![false; net.n_nodes()];
            s.iter().for_each(|&i| inside[i] = true);
            assert_eq!(net.component_size(s[0], |v| inside[v]), 300);
        }
    }

    #[test]
    fn carve_rejects_bad_fraction() {
        let net = generate_scale_free(10, 2, 1).unwrap();
        for fraction in [0.0, 1.0, -0.2, 1.5, 0.95] {
            let spec = SubsystemSpec {
                selection: Selection::RandomFraction,
                fraction,
            };
            assert!(carve_subsystem(&net, &spec, 0).is_err(), "{fraction}");
        }
    }
}
