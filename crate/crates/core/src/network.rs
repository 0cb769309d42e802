//! Communication graphs and doubly stochastic mixing matrices.
//!
//! A [`Graph`] stores, for every node, the ordered list of in-neighbors: the
//! nodes whose messages it receives in a synchronous round. Row `i` of the
//! mixing matrix `W` is therefore supported on `{i} ∪ in(i)`.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;

/// Tolerance on row and column sums of `W`.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Erdos-Renyi resampling budget.
pub const ER_MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    in_neighbors: Vec<Vec<usize>>,
    directed: bool,
}

impl Graph {
    /// Builds a graph from in-neighbor lists. Lists are sorted on the way in.
    /// Undirected graphs must list every edge at both endpoints.
    pub fn new(in_neighbors: Vec<Vec<usize>>, directed: bool) -> Result<Self> {
        let n = in_neighbors.len();
        if n == 0 {
            return Err(Error::InvalidSize("graph needs at least one node".into()));
        }
        let mut lists = in_neighbors;
        for (i, list) in lists.iter_mut().enumerate() {
            list.sort_unstable();
            if list.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidArgument(format!("node {i} lists a neighbor twice")));
            }
            if list.contains(&i) {
                return Err(Error::InvalidArgument(format!("node {i} lists itself")));
            }
            if let Some(&j) = list.iter().find(|&&j| j >= n) {
                return Err(Error::InvalidArgument(format!("node {i} has out-of-range neighbor {j}")));
            }
        }
        if !directed {
            for (i, list) in lists.iter().enumerate() {
                for &j in list {
                    if lists[j].binary_search(&i).is_err() {
                        return Err(Error::InvalidArgument(format!(
                            "undirected edge {j}-{i} is missing its reverse"
                        )));
                    }
                }
            }
        }
        let g = Graph { n, in_neighbors: lists, directed };
        if !g.is_strongly_connected() {
            return Err(Error::InvalidArgument("graph is not strongly connected".into()));
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn in_neighbors(&self, i: usize) -> &[usize] {
        &self.in_neighbors[i]
    }

    /// Nodes that receive messages from `i`, ascending.
    pub fn out_neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n).filter(|&j| self.in_neighbors[j].binary_search(&i).is_ok()).collect()
    }

    pub fn in_degree(&self, i: usize) -> usize {
        self.in_neighbors[i].len()
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.in_neighbors.iter().filter(|l| l.binary_search(&i).is_ok()).count()
    }

    /// Number of directed arcs (each undirected edge counts twice).
    pub fn arc_count(&self) -> usize {
        self.in_neighbors.iter().map(Vec::len).sum()
    }

    fn reaches_all(&self, start: usize, forward: bool) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(u) = queue.pop_front() {
            let next: Vec<usize> = if forward { self.out_neighbors(u) } else { self.in_neighbors[u].clone() };
            for v in next {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.reaches_all(0, true) && self.reaches_all(0, false)
    }
}

/// Directed exponential graph: node `i` sends to `(i + 2^j) mod n` for
/// `j = 0..=e`. Offsets aliasing to self or to an earlier offset are dropped.
pub fn build_directed_exponential(n: usize, e: u32) -> Result<Graph> {
    if n < 2 {
        return Err(Error::InvalidSize(format!("directed exponential graph needs n >= 2, got {n}")));
    }
    let mut offsets: Vec<usize> = Vec::new();
    for j in 0..=e {
        let off = 1usize.checked_shl(j).map_or(0, |v| v % n);
        if off != 0 && !offsets.contains(&off) {
            offsets.push(off);
        }
    }
    let in_neighbors = (0..n).map(|i| offsets.iter().map(|&o| (i + n - o) % n).collect()).collect();
    Graph::new(in_neighbors, true)
}

/// Undirected G(n, p), resampled until connected.
pub fn build_erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(Error::InvalidSize("Erdos-Renyi graph needs n >= 1".into()));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidArgument(format!("edge probability must lie in (0, 1], got {p}")));
    }
    let mut rng = rng::stream(seed, rng::STREAM_GRAPH);
    for _ in 0..ER_MAX_ATTEMPTS {
        let mut lists = vec![Vec::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < p {
                    lists[i].push(j);
                    lists[j].push(i);
                }
            }
        }
        match Graph::new(lists, false) {
            Ok(g) => return Ok(g),
            Err(Error::InvalidArgument(_)) => continue,
            Err(other) => return Err(other),
        }
    }
    Err(Error::GenerationFailure { what: "connected Erdos-Renyi graph", attempts: ER_MAX_ATTEMPTS })
}

pub fn build_complete(n: usize) -> Result<Graph> {
    Graph::new((0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect(), false)
}

pub fn build_path(n: usize) -> Result<Graph> {
    let lists = (0..n)
        .map(|i| {
            let mut l = Vec::new();
            if i > 0 {
                l.push(i - 1);
            }
            if i + 1 < n {
                l.push(i + 1);
            }
            l
        })
        .collect();
    Graph::new(lists, false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    /// `1/(d+1)` on every arc and on the diagonal; needs a `d`-regular graph.
    UniformRegular,
    /// Metropolis-Hastings weights on an undirected graph.
    Metropolis,
}

/// A graph together with a validated mixing matrix and its consensus
/// contraction factor `σ = ‖W − (1/n)𝟙𝟙ᵀ‖`.
#[derive(Debug, Clone)]
pub struct MixingTopology {
    graph: Graph,
    w: DMatrix<f64>,
    sigma: f64,
}

impl MixingTopology {
    /// Validates `w` against `graph`: support, nonnegativity, positive
    /// diagonal, double stochasticity, primitivity and `σ < 1`.
    pub fn new(graph: Graph, w: DMatrix<f64>) -> Result<Self> {
        let n = graph.n();
        if w.nrows() != n || w.ncols() != n {
            return Err(Error::Shape(format!("W is {}x{}, graph has {n} nodes", w.nrows(), w.ncols())));
        }
        for i in 0..n {
            if w[(i, i)] <= 0.0 {
                return Err(Error::Construction(format!("W[{i},{i}] is not positive")));
            }
            for j in 0..n {
                let v = w[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Construction(format!("W[{i},{j}] = {v} is negative or not finite")));
                }
                if i != j && v != 0.0 && graph.in_neighbors(i).binary_search(&j).is_err() {
                    return Err(Error::Construction(format!("W[{i},{j}] is nonzero but {j} -> {i} is not an arc")));
                }
            }
        }
        let (row, col) = stochasticity_error(&w);
        if row > STOCHASTIC_TOL || col > STOCHASTIC_TOL {
            return Err(Error::Construction(format!(
                "W is not doubly stochastic (row error {row:.2e}, column error {col:.2e})"
            )));
        }
        if !is_primitive(&w) {
            return Err(Error::Construction("W is not primitive".into()));
        }
        let sigma = spectral_gap(&w);
        if !(sigma < 1.0 - 1e-12) {
            return Err(Error::Construction(format!("sigma = {sigma} is not below 1")));
        }
        Ok(MixingTopology { graph, w, sigma })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn to_json(&self) -> TopologyJson {
        let n = self.n();
        TopologyJson {
            n,
            directed: self.graph.is_directed(),
            in_neighbors: self.graph.in_neighbors.clone(),
            w: (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| self.w[(i, j)]).collect(),
            sigma: self.sigma,
        }
    }

    pub fn from_json(json: &TopologyJson) -> Result<Self> {
        let n = json.n;
        if json.in_neighbors.len() != n || json.w.len() != n * n {
            return Err(Error::Shape(format!("topology json does not match n = {n}")));
        }
        let graph = Graph::new(json.in_neighbors.clone(), json.directed)?;
        MixingTopology::new(graph, DMatrix::from_row_slice(n, n, &json.w))
    }
}

/// Wire form of a topology: adjacency as in-neighbor lists, `W` dense
/// row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyJson {
    pub n: usize,
    pub directed: bool,
    pub in_neighbors: Vec<Vec<usize>>,
    pub w: Vec<f64>,
    pub sigma: f64,
}

pub fn mixing_matrix(graph: &Graph, scheme: WeightScheme) -> Result<MixingTopology> {
    let n = graph.n();
    let mut w = DMatrix::zeros(n, n);
    match scheme {
        WeightScheme::UniformRegular => {
            let d = graph.in_degree(0);
            if (0..n).any(|i| graph.in_degree(i) != d || graph.out_degree(i) != d) {
                return Err(Error::Scheme("uniform_regular needs equal in- and out-degree at every node".into()));
            }
            let weight = 1.0 / (d as f64 + 1.0);
            for i in 0..n {
                w[(i, i)] = weight;
                for &j in graph.in_neighbors(i) {
                    w[(i, j)] = weight;
                }
            }
        }
        WeightScheme::Metropolis => {
            if graph.is_directed() {
                return Err(Error::Scheme("metropolis weights need an undirected graph".into()));
            }
            for i in 0..n {
                let mut off = 0.0;
                for &j in graph.in_neighbors(i) {
                    let v = 1.0 / (1.0 + graph.in_degree(i).max(graph.in_degree(j)) as f64);
                    w[(i, j)] = v;
                    off += v;
                }
                w[(i, i)] = 1.0 - off;
            }
        }
    }
    MixingTopology::new(graph.clone(), w)
}

/// `‖W − (1/n)𝟙𝟙ᵀ‖₂`, by power iteration.
pub fn spectral_gap(w: &DMatrix<f64>) -> f64 {
    let n = w.nrows();
    let avg = 1.0 / n as f64;
    let dev = DMatrix::from_fn(n, n, |i, j| w[(i, j)] - avg);
    linalg::spectral_norm_power(&dev)
}

/// Largest absolute deviation of row sums and of column sums from 1.
pub fn stochasticity_error(w: &DMatrix<f64>) -> (f64, f64) {
    let row = w.row_iter().map(|r| (r.sum() - 1.0).abs()).fold(0.0, f64::max);
    let col = w.column_iter().map(|c| (c.sum() - 1.0).abs()).fold(0.0, f64::max);
    (row, col)
}

/// `W^m` entrywise positive for some `m ≥ n`, checked on the sparsity
/// pattern by repeated boolean squaring.
pub fn is_primitive(w: &DMatrix<f64>) -> bool {
    let n = w.nrows();
    let mut pat: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| w[(i, j)] > 0.0).collect()).collect();
    let mut power = 1usize;
    while power < n {
        let mut next = vec![vec![false; n]; n];
        for i in 0..n {
            for k in 0..n {
                if pat[i][k] {
                    for j in 0..n {
                        next[i][j] |= pat[k][j];
                    }
                }
            }
        }
        pat = next;
        power *= 2;
    }
    pat.iter().all(|r| r.iter().all(|&b| b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_20_4_neighbors() {
        let g = build_directed_exponential(20, 4).unwrap();
        assert_eq!(g.out_neighbors(0), vec![1, 2, 4, 8, 16]);
        assert_eq!(g.out_neighbors(19), vec![0, 1, 3, 7, 15]);
        assert!(g.is_directed());
        assert!((0..20).all(|i| g.out_degree(i) == 5 && g.in_degree(i) == 5));
    }

    #[test]
    fn exponential_smallest_ring() {
        let g = build_directed_exponential(2, 0).unwrap();
        assert_eq!(g.out_neighbors(0), vec![1]);
        assert_eq!(g.out_neighbors(1), vec![0]);
    }

    #[test]
    fn exponential_drops_self_alias() {
        let g = build_directed_exponential(8, 3).unwrap();
        assert_eq!(g.out_neighbors(0), vec![1, 2, 4]);
        // 2^1 = 2 and 2^2 = 4 alias mod 3 to 2 and 1.
        let g = build_directed_exponential(3, 2).unwrap();
        assert_eq!(g.out_neighbors(0), vec![1, 2]);
    }

    #[test]
    fn exponential_rejects_single_node() {
        assert!(matches!(build_directed_exponential(1, 0), Err(Error::InvalidSize(_))));
    }

    #[test]
    fn erdos_renyi_forced_complete() {
        let g = build_erdos_renyi(2, 1.0, 3).unwrap();
        assert_eq!(g.in_neighbors(0), &[1]);
        assert_eq!(g.in_neighbors(1), &[0]);
        let k5 = build_erdos_renyi(5, 1.0, 99).unwrap();
        assert_eq!(k5.arc_count(), 20);
        assert!(!k5.is_directed());
    }

    #[test]
    fn erdos_renyi_twenty_nodes_connected() {
        let g = build_erdos_renyi(20, 0.3, 11).unwrap();
        assert_eq!(g.n(), 20);
        assert!(g.is_strongly_connected());
        assert_eq!(g, build_erdos_renyi(20, 0.3, 11).unwrap());
    }

    #[test]
    fn erdos_renyi_gives_up() {
        let err = build_erdos_renyi(30, 1e-6, 0).unwrap_err();
        assert!(matches!(err, Error::GenerationFailure { attempts: ER_MAX_ATTEMPTS, .. }));
    }

    #[test]
    fn erdos_renyi_rejects_bad_probability() {
        assert!(build_erdos_renyi(5, 0.0, 1).is_err());
        assert!(build_erdos_renyi(5, 1.5, 1).is_err());
    }

    #[test]
    fn complete_graph_averages_exactly() {
        let t = mixing_matrix(&build_complete(4).unwrap(), WeightScheme::UniformRegular).unwrap();
        assert!(t.w().iter().all(|&v| v == 0.25));
        assert_eq!(t.sigma(), 0.0);
    }

    #[test]
    fn path_metropolis_weights() {
        let t = mixing_matrix(&build_path(3).unwrap(), WeightScheme::Metropolis).unwrap();
        let w = t.w();
        assert_relative_eq!(w[(0, 1)], 1.0 / 3.0);
        assert_relative_eq!(w[(1, 2)], 1.0 / 3.0);
        assert_relative_eq!(w[(0, 0)], 2.0 / 3.0);
        assert_relative_eq!(w[(1, 1)], 1.0 / 3.0);
        assert_relative_eq!(w[(2, 2)], 2.0 / 3.0);
        assert_eq!(w[(0, 2)], 0.0);
        assert!(t.sigma() > 0.0 && t.sigma() < 1.0);
    }

    #[test]
    fn exponential_uniform_rows() {
        let t = mixing_matrix(&build_directed_exponential(20, 4).unwrap(), WeightScheme::UniformRegular).unwrap();
        for i in 0..20 {
            let row: Vec<f64> = t.w().row(i).iter().cloned().filter(|&v| v > 0.0).collect();
            assert_eq!(row.len(), 6);
            assert!(row.iter().all(|&v| v == 1.0 / 6.0));
        }
        let (r, c) = stochasticity_error(t.w());
        assert!(r <= STOCHASTIC_TOL && c <= STOCHASTIC_TOL);
    }

    #[test]
    fn scheme_mismatch() {
        let directed = build_directed_exponential(5, 1).unwrap();
        assert!(matches!(mixing_matrix(&directed, WeightScheme::Metropolis), Err(Error::Scheme(_))));
        let path = build_path(4).unwrap();
        assert!(matches!(mixing_matrix(&path, WeightScheme::UniformRegular), Err(Error::Scheme(_))));
    }

    #[test]
    fn identity_gap_is_one_and_rejected() {
        let w = DMatrix::<f64>::identity(2, 2);
        assert_relative_eq!(spectral_gap(&w), 1.0, epsilon = 1e-12);
        let g = build_complete(2).unwrap();
        assert!(matches!(MixingTopology::new(g, w), Err(Error::Construction(_))));
    }

    #[test]
    fn json_round_trip() {
        let t = mixing_matrix(&build_erdos_renyi(8, 0.5, 2).unwrap(), WeightScheme::Metropolis).unwrap();
        let json = serde_json::to_string(&t.to_json()).unwrap();
        let back = MixingTopology::from_json(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back.w(), t.w());
        assert_eq!(back.graph(), t.graph());
    }
}
