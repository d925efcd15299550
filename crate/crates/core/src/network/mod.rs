//! Same-practice graph: construction, uniqueness pruning, modularity,
//! Louvain communities and community degree metrics.

mod degrees;
mod export;
mod louvain;

pub use degrees::{degree_report, DegreeReport};
pub use export::{read_partition_csv, write_dot, write_graphml, write_partition_csv, write_partition_json};
pub use louvain::{exhaustive_best_modularity, louvain_partition};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::decision::{PairVerdict, Verdict};
use crate::error::{Error, Result};

pub const DEFAULT_PRUNE_FRACTION: f64 = 0.09;
pub const DEFAULT_RESOLUTION: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    /// Node indices, `a < b`.
    pub a: usize,
    pub b: usize,
    pub weight: f64,
    /// Uniqueness `W` computed on the graph the edge was built in.
    pub uniqueness: f64,
}

/// Simple undirected graph over region ids. Nodes are kept sorted, and
/// edges sorted by `(a, b)`, so every derived output is order-independent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PracticeGraph {
    pub nodes: Vec<String>,
    pub edges: Vec<Edge>,
}

/// Community assignment for every node of a graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// `community[i]` for node `i`; ids are dense and numbered in order of
    /// first appearance over the sorted nodes.
    pub community: Vec<usize>,
    /// `None` when the graph has no edges and modularity is undefined.
    pub modularity_q: Option<f64>,
    pub resolution: f64,
}

impl Partition {
    /// Every node in its own community, for graphs Louvain cannot run on.
    pub fn singletons(n: usize, resolution: f64) -> Self {
        Partition {
            community: (0..n).collect(),
            modularity_q: None,
            resolution,
        }
    }

    pub fn n_communities(&self) -> usize {
        self.community.iter().max().map_or(0, |m| m + 1)
    }

    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_communities()];
        for (node, &c) in self.community.iter().enumerate() {
            out[c].push(node);
        }
        out
    }
}

/// Relabel communities densely by first appearance.
pub(crate) fn canonical_labels(raw: &[usize]) -> Vec<usize> {
    let mut map = BTreeMap::new();
    raw.iter()
        .map(|c| {
            let next = map.len();
            *map.entry(*c).or_insert(next)
        })
        .collect()
}

impl PracticeGraph {
    /// Graph with the given nodes and unit-weight edges between named pairs.
    pub fn from_edges<S: AsRef<str>>(nodes: &[S], edges: &[(S, S)]) -> Result<Self> {
        let mut names: Vec<String> = nodes.iter().map(|s| s.as_ref().to_string()).collect();
        names.sort();
        names.dedup();
        let mut g = PracticeGraph {
            nodes: names,
            edges: Vec::new(),
        };
        for (a, b) in edges {
            let (i, j) = (g.index_of(a.as_ref())?, g.index_of(b.as_ref())?);
            if i == j {
                return Err(Error::Invalid(format!("self-loop on {}", a.as_ref())));
            }
            g.edges.push(Edge {
                a: i.min(j),
                b: i.max(j),
                weight: 1.0,
                uniqueness: 0.0,
            });
        }
        g.edges.sort_by_key(|e| (e.a, e.b));
        g.edges.dedup_by_key(|e| (e.a, e.b));
        g.refresh_uniqueness();
        Ok(g)
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.nodes
            .binary_search_by(|n| n.as_str().cmp(id))
            .map_err(|_| Error::UnknownNode(id.to_string()))
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.nodes.len()];
        for e in &self.edges {
            d[e.a] += 1;
            d[e.b] += 1;
        }
        d
    }

    pub fn edge_id(&self, e: &Edge) -> String {
        format!("{}__{}", self.nodes[e.a], self.nodes[e.b])
    }

    /// Recompute `W` for every edge from the current degrees.
    fn refresh_uniqueness(&mut self) {
        let w = uniqueness(self);
        for (e, w) in self.edges.iter_mut().zip(w) {
            e.uniqueness = w;
        }
    }
}

/// `W_ij = ((max - deg_i) + (max - deg_j)) / (2 max)` with `max = |nodes| - 1`,
/// one value per edge in edge order.
pub fn uniqueness(g: &PracticeGraph) -> Vec<f64> {
    let max = g.n_nodes().saturating_sub(1) as f64;
    if max == 0.0 {
        return vec![0.0; g.n_edges()];
    }
    let deg = g.degrees();
    g.edges
        .iter()
        .map(|e| 0.5 * ((max - deg[e.a] as f64) / max + (max - deg[e.b] as f64) / max))
        .collect()
}

/// One node per region, one edge per Same verdict.
pub fn build_graph(verdicts: &[PairVerdict]) -> Result<PracticeGraph> {
    let mut seen: BTreeMap<(String, String), Verdict> = BTreeMap::new();
    for v in verdicts {
        if v.region_a == v.region_b {
            return Err(Error::Invalid(format!(
                "pair {} compares a region with itself",
                v.pair_id
            )));
        }
        let key = if v.region_a <= v.region_b {
            (v.region_a.clone(), v.region_b.clone())
        } else {
            (v.region_b.clone(), v.region_a.clone())
        };
        match seen.get(&key) {
            Some(prev) if *prev != v.verdict => return Err(Error::ConflictingVerdicts(v.pair_id.clone())),
            _ => {
                seen.insert(key, v.verdict);
            }
        }
    }
    let nodes: Vec<&str> = seen.keys().flat_map(|(a, b)| [a.as_str(), b.as_str()]).collect();
    let edges: Vec<(&str, &str)> = seen
        .iter()
        .filter(|(_, v)| **v == Verdict::Same)
        .map(|((a, b), _)| (a.as_str(), b.as_str()))
        .collect();
    PracticeGraph::from_edges(&nodes, &edges)
}

/// Outcome of [`prune_edges`].
#[derive(Debug, Clone, PartialEq)]
pub struct PruneResult {
    pub graph: PracticeGraph,
    pub removed: Vec<String>,
    pub cutoff: Option<f64>,
    pub warning: Option<String>,
}

/// Remove the least unique edges.
///
/// `c = ceil(fraction · |E|)`; every edge with `W` at or below the c-th
/// smallest value goes, so ties are removed together. Two guards apply:
/// when every edge has the same `W` there is nothing to rank by and the
/// graph is returned unchanged, and when the tie rule would remove more than
/// half of the edges only the `c` lowest are removed, ties broken by edge
/// id. Both emit a warning.
pub fn prune_edges(g: &PracticeGraph, fraction: f64) -> Result<PruneResult> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::OutOfRange(format!("prune fraction {fraction} not in [0, 1)")));
    }
    let mut out = g.clone();
    out.refresh_uniqueness();
    let m = out.n_edges();
    let c = (fraction * m as f64).ceil() as usize;
    if m == 0 || c == 0 {
        return Ok(PruneResult {
            graph: out,
            removed: Vec::new(),
            cutoff: None,
            warning: None,
        });
    }

    // uniqueness values are exact multiples of 1/(2 max), so compare with a
    // tolerance that only absorbs rounding
    let eps = 1e-12;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| {
        out.edges[i]
            .uniqueness
            .total_cmp(&out.edges[j].uniqueness)
            .then_with(|| out.edge_id(&out.edges[i]).cmp(&out.edge_id(&out.edges[j])))
    });
    let lo = out.edges[order[0]].uniqueness;
    let hi = out.edges[order[m - 1]].uniqueness;
    if hi - lo <= eps {
        let warning = format!("all {m} edges share uniqueness {lo:.6}; pruning skipped");
        log::warn!("{warning}");
        for e in &mut out.edges {
            e.weight = 1.0;
        }
        return Ok(PruneResult {
            graph: out,
            removed: Vec::new(),
            cutoff: None,
            warning: Some(warning),
        });
    }

    let cutoff = out.edges[order[c - 1]].uniqueness;
    let tied: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| out.edges[i].uniqueness <= cutoff + eps)
        .collect();
    let (drop, warning) = if 2 * tied.len() > m {
        let w = format!(
            "tie at W = {cutoff:.6} would remove {} of {m} edges; removing the lowest {c} only",
            tied.len()
        );
        log::warn!("{w}");
        (order[..c].to_vec(), Some(w))
    } else {
        (tied, None)
    };

    let mut keep = vec![true; m];
    drop.iter().for_each(|&i| keep[i] = false);
    let mut removed: Vec<String> = drop.iter().map(|&i| out.edge_id(&out.edges[i])).collect();
    removed.sort();
    let mut it = keep.iter();
    out.edges.retain(|_| *it.next().unwrap());
    for e in &mut out.edges {
        e.weight = 1.0;
    }
    Ok(PruneResult {
        graph: out,
        removed,
        cutoff: Some(cutoff),
        warning,
    })
}

/// Newman-Girvan modularity with resolution `gamma` on the unit-weight
/// graph. Errors on a graph with no edges, where it is undefined.
pub fn modularity(g: &PracticeGraph, community: &[usize], gamma: f64) -> Result<f64> {
    if community.len() != g.n_nodes() {
        return Err(Error::Invalid(format!(
            "partition covers {} nodes, graph has {}",
            community.len(),
            g.n_nodes()
        )));
    }
    if g.n_edges() == 0 {
        return Err(Error::NoEdges);
    }
    let m = g.n_edges() as f64;
    let deg = g.degrees();
    let n_comm = community.iter().max().map_or(0, |c| c + 1);
    let mut internal = vec![0.0; n_comm];
    let mut total = vec![0.0; n_comm];
    for e in &g.edges {
        if community[e.a] == community[e.b] {
            internal[community[e.a]] += 1.0;
        }
    }
    for (i, d) in deg.iter().enumerate() {
        total[community[i]] += *d as f64;
    }
    Ok(internal
        .iter()
        .zip(&total)
        .map(|(l, t)| l / m - gamma * (t / (2.0 * m)).powi(2))
        .sum())
}
