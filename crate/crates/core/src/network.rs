//! Undirected simple graphs: edge-list ingestion, seeded generators and
//! the spectral radius of the adjacency matrix.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::matrix::{Matrix, Vector};

/// Graph families available to experiments. Random families are fully
/// determined by their seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NetworkKind {
    Path { n: usize },
    Cycle { n: usize },
    Complete { n: usize },
    ErdosRenyi { n: usize, prob: f64, seed: u64 },
    RandomGeometric { n: usize, radius: f64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Network {
    n: usize,
    /// Sorted pairs `(i, j)` with `i < j`.
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    /// Original node ids, indexed by dense id.
    labels: Vec<u64>,
}

impl Network {
    /// Builds a graph on nodes `0..n`, rejecting self-loops, duplicates
    /// and isolated nodes.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut set = BTreeSet::new();
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidNetwork(format!(
                    "edge ({a}, {b}) references a node outside 0..{n}"
                )));
            }
            if a == b {
                return Err(Error::InvalidNetwork(format!("self-loop at node {a}")));
            }
            if !set.insert((a.min(b), a.max(b))) {
                return Err(Error::InvalidNetwork(format!("duplicate edge ({a}, {b})")));
            }
        }
        Self::from_edge_set(n, set, (0..n as u64).collect())
    }

    fn from_edge_set(n: usize, set: BTreeSet<(usize, usize)>, labels: Vec<u64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidNetwork("a network needs at least two nodes".into()));
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in &set {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in neighbors.iter_mut() {
            list.sort_unstable();
        }
        if let Some(i) = neighbors.iter().position(|l| l.is_empty()) {
            return Err(Error::InvalidNetwork(format!(
                "node {} is isolated; every node needs at least one neighbor",
                labels[i]
            )));
        }
        Ok(Network {
            n,
            edges: set.into_iter().collect(),
            neighbors,
            labels,
        })
    }

    pub fn generate(kind: &NetworkKind) -> Result<Self> {
        match *kind {
            NetworkKind::Path { n } => {
                check_size(n, 2)?;
                Self::from_edges(n, &(0..n - 1).map(|i| (i, i + 1)).collect::<Vec<_>>())
            }
            NetworkKind::Cycle { n } => {
                check_size(n, 3)?;
                Self::from_edges(n, &(0..n).map(|i| (i, (i + 1) % n)).collect::<Vec<_>>())
            }
            NetworkKind::Complete { n } => {
                check_size(n, 2)?;
                let edges: Vec<_> = (0..n)
                    .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                    .collect();
                Self::from_edges(n, &edges)
            }
            NetworkKind::ErdosRenyi { n, prob, seed } => erdos_renyi(n, prob, seed),
            NetworkKind::RandomGeometric { n, radius, seed } => random_geometric(n, radius, seed),
        }
    }

    /// Parses an edge list: one `i j` pair per line, `#` comments and
    /// blank lines ignored, and an optional leading `n <count>` header
    /// fixing the node count. Ids are used as dense 0-based node indices.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        Self::parse(text, false)
    }

    /// Like [`Network::parse_edge_list`], but accepts arbitrary integer
    /// ids and compacts them to `0..n` in increasing order. The original
    /// ids are kept in [`Network::labels`].
    pub fn parse_edge_list_remapped(text: &str) -> Result<Self> {
        Self::parse(text, true)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse_edge_list(&std::fs::read_to_string(path)?)
    }

    fn parse(text: &str, remap: bool) -> Result<Self> {
        let mut header: Option<usize> = None;
        let mut raw: Vec<(u64, u64, usize)> = Vec::new();
        let mut seen = BTreeSet::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let tokens: Vec<&str> = content.split_whitespace().collect();
            if tokens.len() == 2 && tokens[0] == "n" {
                if header.is_some() || !raw.is_empty() {
                    return Err(Error::EdgeList {
                        line: line_no,
                        message: "node-count header must come before any edge".into(),
                    });
                }
                header = Some(tokens[1].parse().map_err(|_| Error::EdgeList {
                    line: line_no,
                    message: format!("invalid node count {:?}", tokens[1]),
                })?);
                continue;
            }
            if tokens.len() != 2 {
                return Err(Error::EdgeList {
                    line: line_no,
                    message: format!("expected two node ids, found {:?}", content),
                });
            }
            let parse_id = |s: &str| {
                s.parse::<u64>().map_err(|_| Error::EdgeList {
                    line: line_no,
                    message: format!("invalid node id {s:?}"),
                })
            };
            let (a, b) = (parse_id(tokens[0])?, parse_id(tokens[1])?);
            if a == b {
                return Err(Error::EdgeList {
                    line: line_no,
                    message: format!("self-loop at node {a}"),
                });
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::EdgeList {
                    line: line_no,
                    message: format!("duplicate edge {a} {b}"),
                });
            }
            raw.push((a, b, line_no));
        }
        let labels: Vec<u64> = if remap {
            let ids: BTreeSet<u64> = raw.iter().flat_map(|&(a, b, _)| [a, b]).collect();
            ids.into_iter().collect()
        } else {
            let max = raw.iter().map(|&(a, b, _)| a.max(b)).max();
            let n = match (header, max) {
                (Some(h), Some(m)) if (h as u64) <= m => {
                    return Err(Error::InvalidNetwork(format!(
                        "header declares {h} nodes but id {m} appears"
                    )))
                }
                (Some(h), _) => h as u64,
                (None, Some(m)) => m + 1,
                (None, None) => 0,
            };
            (0..n).collect()
        };
        let index: BTreeMap<u64, usize> = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        let set: BTreeSet<(usize, usize)> = raw
            .iter()
            .map(|&(a, b, _)| {
                let (i, j) = (index[&a], index[&b]);
                (i.min(j), i.max(j))
            })
            .collect();
        Self::from_edge_set(labels.len(), set, labels)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Sorted neighbor list of node `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    pub fn adjacency(&self) -> Matrix {
        let mut a = Matrix::zeros(self.n, self.n);
        for &(i, j) in &self.edges {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        a
    }

    /// Largest adjacency eigenvalue, by a dense symmetric eigensolve.
    pub fn spectral_radius(&self) -> f64 {
        if self.n > 2000 {
            if let Ok(rho) = self.spectral_radius_power(1e-12, 100_000) {
                return rho;
            }
        }
        SymmetricEigen::new(self.adjacency())
            .eigenvalues
            .iter()
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
    }

    /// Largest adjacency eigenvalue by power iteration on `A + I`, stopped
    /// once the eigen-residual of the Rayleigh quotient is below `tol`.
    pub fn spectral_radius_power(&self, tol: f64, max_iter: usize) -> Result<f64> {
        let mut v = Vector::from_element(self.n, 1.0 / (self.n as f64).sqrt());
        let apply = |v: &Vector| {
            let mut w = v.clone();
            for &(i, j) in &self.edges {
                w[i] += v[j];
                w[j] += v[i];
            }
            w
        };
        for _ in 0..max_iter {
            let w = apply(&v);
            let theta = v.dot(&w);
            let residual = (&w - &v * theta).norm();
            if residual <= tol {
                return Ok(theta - 1.0);
            }
            v = &w / w.norm();
        }
        Err(Error::PowerIterationNoConvergence { iterations: max_iter })
    }

    /// `n <count>` followed by sorted `i j` lines.
    pub fn canonical_edge_list(&self) -> String {
        let mut out = format!("n {}\n", self.n);
        for &(i, j) in &self.edges {
            out.push_str(&format!("{i} {j}\n"));
        }
        out
    }

    /// SHA-256 of the canonical edge list.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_edge_list().as_bytes()))
    }

    /// The same graph with node `i` renamed `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let edges: Vec<_> = self.edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
        Self::from_edges(self.n, &edges)
    }
}

fn check_size(n: usize, min: usize) -> Result<()> {
    if n < min {
        Err(Error::InvalidParameter(format!(
            "graph needs at least {min} nodes, got {n}"
        )))
    } else {
        Ok(())
    }
}

const ER_ATTEMPTS: usize = 1000;

/// G(n, prob), redrawn from the same seeded stream until no node is
/// isolated.
fn erdos_renyi(n: usize, prob: f64, seed: u64) -> Result<Network> {
    check_size(n, 2)?;
    if !(prob > 0.0 && prob <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "edge probability must lie in (0, 1], got {prob}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..ER_ATTEMPTS {
        let mut set = BTreeSet::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < prob {
                    set.insert((i, j));
                }
            }
        }
        let mut degree = vec![0usize; n];
        for &(i, j) in &set {
            degree[i] += 1;
            degree[j] += 1;
        }
        if degree.iter().all(|&d| d > 0) {
            return Network::from_edge_set(n, set, (0..n as u64).collect());
        }
    }
    Err(Error::InvalidParameter(format!(
        "G({n}, {prob}) produced isolated nodes in {ER_ATTEMPTS} draws"
    )))
}

/// Points uniform in the unit square, joined when within `radius`. Nodes
/// left isolated are joined to their nearest point.
fn random_geometric(n: usize, radius: f64, seed: u64) -> Result<Network> {
    check_size(n, 2)?;
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random(), rng.random())).collect();
    let dist2 = |a: usize, b: usize| {
        let (dx, dy) = (pts[a].0 - pts[b].0, pts[a].1 - pts[b].1);
        dx * dx + dy * dy
    };
    let mut set = BTreeSet::new();
    for i in 0..n {
        for j in i + 1..n {
            if dist2(i, j) <= radius * radius {
                set.insert((i, j));
            }
        }
    }
    let mut degree = vec![0usize; n];
    for &(i, j) in &set {
        degree[i] += 1;
        degree[j] += 1;
    }
    for i in 0..n {
        if degree[i] == 0 {
            let nearest = (0..n)
                .filter(|&j| j != i)
                .min_by(|&a, &b| dist2(i, a).total_cmp(&dist2(i, b)))
                .expect("n >= 2");
            set.insert((i.min(nearest), i.max(nearest)));
            degree[i] += 1;
            degree[nearest] += 1;
        }
    }
    Network::from_edge_set(n, set, (0..n as u64).collect())
}
