use serde::{Deserialize, Serialize};

use super::{Partition, PracticeGraph};
use crate::error::{Error, Result};

/// Community cohesion and separation on the unit-weight graph.
///
/// `None` marks a value with an empty normalization: internal degree of a
/// single-node community, or total external degree when there is only one
/// community.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeReport {
    pub sizes: Vec<usize>,
    /// Internal edge count over `n(n-1)/2`.
    pub k_int: Vec<Option<f64>>,
    /// Crossing edge count over `n·n'`, symmetric; the diagonal is `None`.
    pub k_ext_pair: Vec<Vec<Option<f64>>>,
    /// Edges leaving the community over `n·(N - n)`.
    pub k_ext_total: Vec<Option<f64>>,
}

pub fn degree_report(g: &PracticeGraph, p: &Partition) -> Result<DegreeReport> {
    if p.community.len() != g.n_nodes() {
        return Err(Error::Invalid(format!(
            "partition covers {} nodes, graph has {}",
            p.community.len(),
            g.n_nodes()
        )));
    }
    let k = p.n_communities();
    let mut sizes = vec![0usize; k];
    p.community.iter().for_each(|c| sizes[*c] += 1);
    let mut w = vec![vec![0.0f64; k]; k];
    for e in &g.edges {
        let (a, b) = (p.community[e.a], p.community[e.b]);
        w[a][b] += e.weight;
        if a != b {
            w[b][a] += e.weight;
        }
    }
    let total = g.n_nodes();
    let k_int = (0..k)
        .map(|c| {
            let n = sizes[c] as f64;
            (sizes[c] >= 2).then(|| 2.0 * w[c][c] / (n * (n - 1.0)))
        })
        .collect();
    let k_ext_pair = (0..k)
        .map(|a| {
            (0..k)
                .map(|b| (a != b).then(|| w[a][b] / (sizes[a] * sizes[b]) as f64))
                .collect()
        })
        .collect();
    let k_ext_total = (0..k)
        .map(|c| {
            let out: f64 = (0..k).filter(|&o| o != c).map(|o| w[c][o]).sum();
            let rest = total - sizes[c];
            (rest > 0).then(|| out / (sizes[c] * rest) as f64)
        })
        .collect();
    Ok(DegreeReport {
        sizes,
        k_int,
        k_ext_pair,
        k_ext_total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn part(c: Vec<usize>) -> Partition {
        Partition {
            community: c,
            modularity_q: None,
            resolution: 1.0,
        }
    }

    #[test]
    fn four_clique_is_fully_cohesive() {
        let n = ["a", "b", "c", "d"];
        let e = [("a", "b"), ("a", "c"), ("a", "d"), ("b", "c"), ("b", "d"), ("c", "d")];
        let g = PracticeGraph::from_edges(&n, &e).unwrap();
        let r = degree_report(&g, &part(vec![0; 4])).unwrap();
        assert_eq!(r.k_int, vec![Some(1.0)]);
        assert_eq!(r.k_ext_total, vec![None]);
    }

    #[test]
    fn external_degrees() {
        let n = ["a", "b", "c", "d", "e"];
        let g = PracticeGraph::from_edges(&n, &[("a", "b"), ("c", "d"), ("d", "e")]).unwrap();
        let r = degree_report(&g, &part(vec![0, 0, 1, 1, 1])).unwrap();
        assert_eq!(r.k_ext_pair[0][1], Some(0.0));
        assert_eq!(r.k_ext_pair[0][0], None);

        let g = PracticeGraph::from_edges(&n, &[("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")]).unwrap();
        let r = degree_report(&g, &part(vec![0, 0, 1, 1, 1])).unwrap();
        assert!((r.k_ext_pair[0][1].unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.k_ext_pair[0][1], r.k_ext_pair[1][0]);
        assert!((r.k_ext_total[1].unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.k_int[1].unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn singleton_internal_degree_is_undefined() {
        let g = PracticeGraph::from_edges(&["a", "b", "c"], &[("a", "b")]).unwrap();
        let r = degree_report(&g, &part(vec![0, 0, 1])).unwrap();
        assert_eq!(r.k_int, vec![Some(1.0), None]);
        assert_eq!(r.k_ext_total, vec![Some(0.0), Some(0.0)]);
    }
}
