use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::{canonical_labels, modularity, Partition, PracticeGraph};
use crate::error::{Error, Result};
use crate::seed::SeedKey;

const EPS: f64 = 1e-12;

/// Weighted graph at one aggregation level. `self_loop[i]` is `A_ii`, i.e.
/// twice the weight of edges collapsed inside node `i`.
struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    self_loop: Vec<f64>,
    degree: Vec<f64>,
    two_m: f64,
}

impl Level {
    fn from_graph(g: &PracticeGraph) -> Self {
        let n = g.n_nodes();
        let mut adj = vec![Vec::new(); n];
        for e in &g.edges {
            adj[e.a].push((e.b, 1.0));
            adj[e.b].push((e.a, 1.0));
        }
        let degree: Vec<f64> = adj.iter().map(|a| a.len() as f64).collect();
        Level {
            adj,
            self_loop: vec![0.0; n],
            two_m: degree.iter().sum(),
            degree,
        }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    /// Local moving phase. Returns the community of each node and whether
    /// any node moved.
    fn local_moves(&self, gamma: f64, rng: &mut crate::seed::Rng) -> (Vec<usize>, bool) {
        let n = self.len();
        let mut comm: Vec<usize> = (0..n).collect();
        let mut tot = self.degree.clone();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut any = false;
        loop {
            let mut moved = false;
            for &i in &order {
                let home = comm[i];
                let ki = self.degree[i];
                let mut links: BTreeMap<usize, f64> = BTreeMap::new();
                for &(j, w) in &self.adj[i] {
                    *links.entry(comm[j]).or_insert(0.0) += w;
                }
                tot[home] -= ki;
                let gain = |c: usize, w: f64, tot: &[f64]| w - gamma * tot[c] * ki / self.two_m;
                let stay = gain(home, links.get(&home).copied().unwrap_or(0.0), &tot);
                let (mut best, mut best_gain) = (home, stay);
                // ascending ids with a strict comparison: equal gains keep the lowest id
                for (&c, &w) in &links {
                    let g = gain(c, w, &tot);
                    if g > best_gain + EPS {
                        best = c;
                        best_gain = g;
                    }
                }
                tot[best] += ki;
                if best != home {
                    comm[i] = best;
                    moved = true;
                    any = true;
                }
            }
            if !moved {
                break;
            }
        }
        (comm, any)
    }

    fn aggregate(&self, comm: &[usize]) -> Level {
        let n = comm.iter().max().map_or(0, |c| c + 1);
        let mut links: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        let mut self_loop = vec![0.0; n];
        let mut degree = vec![0.0; n];
        for i in 0..self.len() {
            let ci = comm[i];
            self_loop[ci] += self.self_loop[i];
            degree[ci] += self.degree[i];
            for &(j, w) in &self.adj[i] {
                let cj = comm[j];
                if ci == cj {
                    self_loop[ci] += w;
                } else {
                    *links[ci].entry(cj).or_insert(0.0) += w;
                }
            }
        }
        Level {
            adj: links.into_iter().map(|m| m.into_iter().collect()).collect(),
            self_loop,
            degree,
            two_m: self.two_m,
        }
    }
}

impl Level {
    /// Run Louvain phases on this level starting from `membership` (over
    /// this level's nodes), returning the final membership.
    fn phases(&self, start: &[usize], gamma: f64, rng: &mut crate::seed::Rng) -> Vec<usize> {
        let mut membership = canonical_labels(start);
        let mut level = self.aggregate(&membership);
        loop {
            let (comm, moved) = level.local_moves(gamma, rng);
            if !moved {
                break;
            }
            let comm = canonical_labels(&comm);
            membership.iter_mut().for_each(|m| *m = comm[*m]);
            level = level.aggregate(&comm);
        }
        canonical_labels(&membership)
    }

    /// Steepest single-node moves over all communities, including a fresh
    /// one, alternated with [`Level::best_regrouping`] until neither helps.
    fn polish(&self, comm: &mut Vec<usize>, gamma: f64) -> bool {
        let n = self.len();
        let mut changed = false;
        loop {
            let mut improved = false;
            // node moves; a non-neighboring community can never beat a
            // fresh one, so only neighbors, home and one free id compete
            let mut tot = vec![0.0; n + 1];
            let mut size = vec![0usize; n + 1];
            for i in 0..n {
                tot[comm[i]] += self.degree[i];
                size[comm[i]] += 1;
            }
            for i in 0..n {
                let home = comm[i];
                let ki = self.degree[i];
                let mut links: BTreeMap<usize, f64> = BTreeMap::new();
                for &(j, w) in &self.adj[i] {
                    *links.entry(comm[j]).or_insert(0.0) += w;
                }
                tot[home] -= ki;
                size[home] -= 1;
                let gain =
                    |c: usize, tot: &[f64]| links.get(&c).copied().unwrap_or(0.0) - gamma * tot[c] * ki / self.two_m;
                let mut candidates: Vec<usize> = links.keys().copied().collect();
                if size[home] > 0 {
                    candidates.extend(size.iter().position(|s| *s == 0));
                }
                candidates.sort_unstable();
                candidates.dedup();
                let (mut best, mut best_gain) = (home, gain(home, &tot));
                for c in candidates {
                    let g = gain(c, &tot);
                    if g > best_gain + EPS {
                        best = c;
                        best_gain = g;
                    }
                }
                tot[best] += ki;
                size[best] += 1;
                if best != home {
                    comm[i] = best;
                    improved = true;
                }
            }
            *comm = canonical_labels(comm);

            if let Some(next) = self.best_regrouping(comm, gamma) {
                *comm = next;
                improved = true;
            }
            if !improved {
                return changed;
            }
            changed = true;
        }
    }
}

/// Largest community union re-split exactly in [`Level::best_regrouping`].
const REGROUP_LIMIT: usize = 10;

impl Level {
    /// Best exact two-way re-split of one community, or of the union of two
    /// communities (which also covers merging them and swapping nodes),
    /// over unions of at most `REGROUP_LIMIT` nodes. Returns the improved
    /// membership of the single best regrouping, if any gains.
    fn best_regrouping(&self, comm: &[usize], gamma: f64) -> Option<Vec<usize>> {
        let k = comm.iter().max().map_or(0, |c| c + 1);
        let mut members = vec![Vec::new(); k];
        for (i, c) in comm.iter().enumerate() {
            members[*c].push(i);
        }
        let mut linked = vec![vec![false; k]; k];
        for (i, nbrs) in self.adj.iter().enumerate() {
            for &(j, _) in nbrs {
                linked[comm[i]][comm[j]] = true;
            }
        }
        let mut best_gain = EPS;
        let mut best: Option<(Vec<usize>, u32, usize, usize)> = None;
        for a in 0..k {
            for b in a..k {
                // a union without crossing edges splits no better than its parts
                if a != b && !linked[a][b] {
                    continue;
                }
                let mut u = members[a].clone();
                if b != a {
                    u.extend(&members[b]);
                }
                if u.len() < 2 || u.len() > REGROUP_LIMIT {
                    continue;
                }
                let (gain, mask) = self.best_bipartition(&u, comm, a, b, gamma);
                if gain > best_gain {
                    best_gain = gain;
                    best = Some((u, mask, a, b));
                }
            }
        }
        let (u, mask, a, b) = best?;
        let fresh = if a == b { k } else { b };
        let mut next = comm.to_vec();
        for (bit, node) in u.iter().enumerate() {
            next[*node] = if mask >> bit & 1 == 0 { a } else { fresh };
        }
        Some(canonical_labels(&next))
    }

    /// Modularity gain (scaled by `m`) of the best split of `u` into two
    /// groups, relative to its current split into communities `a` and `b`.
    fn best_bipartition(&self, u: &[usize], comm: &[usize], a: usize, b: usize, gamma: f64) -> (f64, u32) {
        let pos = |x: usize| u.iter().position(|&y| y == x);
        let mut inner = Vec::new();
        for (li, &i) in u.iter().enumerate() {
            for &(j, w) in &self.adj[i] {
                if let Some(lj) = pos(j) {
                    if li < lj {
                        inner.push((li, lj, w));
                    }
                }
            }
        }
        let deg: Vec<f64> = u.iter().map(|&i| self.degree[i]).collect();
        let loops: f64 = u.iter().map(|&i| self.self_loop[i]).sum::<f64>() / 2.0;
        let total: f64 = deg.iter().sum();
        // scaled contribution of a two-way split given by `mask`
        let score = |mask: u32| {
            let mut within = loops;
            for &(x, y, w) in &inner {
                if (mask >> x & 1) == (mask >> y & 1) {
                    within += w;
                }
            }
            let t1: f64 = (0..u.len()).filter(|x| mask >> x & 1 == 1).map(|x| deg[x]).sum();
            let t0 = total - t1;
            within - gamma * (t0 * t0 + t1 * t1) / (2.0 * self.two_m)
        };
        let current = u
            .iter()
            .enumerate()
            .filter(|(_, &i)| a != b && comm[i] == b)
            .fold(0u32, |m, (bit, _)| m | 1 << bit);
        let base = score(current);
        let mut best = (0.0, current);
        // node 0 stays on side 0, so each split is visited once
        for mask in 0..(1u32 << (u.len() - 1)) {
            let mask = mask << 1;
            let g = score(mask) - base;
            if g > best.0 + EPS {
                best = (g, mask);
            }
        }
        best
    }
}

/// Independent Louvain runs whose best result is kept.
const RESTARTS: u64 = 8;
/// Perturb-and-settle rounds per run.
const PERTURBATIONS: usize = 24;

impl Level {
    /// Alternate polishing and Louvain phases until the membership is
    /// stable.
    fn settle(&self, comm: &mut Vec<usize>, gamma: f64, rng: &mut crate::seed::Rng) {
        for _ in 0..self.len().max(4) {
            if !self.polish(comm, gamma) {
                break;
            }
            *comm = self.phases(comm, gamma, rng);
        }
    }
}

/// Scatter the members of one to three random communities over as many
/// labels plus one fresh label.
fn perturb(comm: &[usize], rng: &mut crate::seed::Rng) -> Vec<usize> {
    use rand::Rng;
    let k = comm.iter().max().map_or(0, |c| c + 1);
    let mut ids: Vec<usize> = (0..k).collect();
    ids.shuffle(rng);
    let take = rng.random_range(1..=3usize).min(k);
    let mut labels: Vec<usize> = ids[..take].to_vec();
    labels.push(k);
    let mut out = comm.to_vec();
    for c in out.iter_mut() {
        if ids[..take].contains(c) {
            *c = labels[rng.random_range(0..labels.len())];
        }
    }
    canonical_labels(&out)
}

/// Two-phase Louvain: local moves to the neighboring community with the
/// largest modularity gain, then aggregation, repeated until nothing moves.
/// Node visit order is shuffled from `seed`; equal gains go to the lowest
/// community id.
///
/// Plain Louvain can stall in a partition where splitting a community or
/// moving a node to a new community would still help. Each run is
/// therefore polished with steepest single-node and merge moves and
/// resumed until stable, and the best of a few seeded restarts is kept.
pub fn louvain_partition(g: &PracticeGraph, gamma: f64, seed: u64) -> Result<Partition> {
    if g.n_edges() == 0 {
        return Err(Error::NoEdges);
    }
    if !(gamma > 0.0) {
        return Err(Error::OutOfRange(format!("resolution {gamma} must be positive")));
    }
    let base = Level::from_graph(g);
    let identity: Vec<usize> = (0..g.n_nodes()).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for r in 0..RESTARTS {
        let mut rng = SeedKey::new(seed).str("louvain").int(r).rng();
        let mut comm = base.phases(&identity, gamma, &mut rng);
        base.settle(&mut comm, gamma, &mut rng);
        let mut q = modularity(g, &comm, gamma)?;
        for _ in 0..PERTURBATIONS {
            let mut cand = perturb(&comm, &mut rng);
            base.settle(&mut cand, gamma, &mut rng);
            let cq = modularity(g, &cand, gamma)?;
            if cq > q + EPS {
                comm = cand;
                q = cq;
            }
        }
        if best.as_ref().is_none_or(|(bq, _)| q > bq + EPS) {
            best = Some((q, comm));
        }
    }
    let (q, community) = best.expect("at least one restart");
    Ok(Partition {
        community,
        modularity_q: Some(q),
        resolution: gamma,
    })
}

/// Highest modularity over every set partition of the nodes. Brute force;
/// intended as a test oracle for graphs of at most 12 nodes.
pub fn exhaustive_best_modularity(g: &PracticeGraph, gamma: f64) -> Result<(f64, Vec<usize>)> {
    let n = g.n_nodes();
    if n > 12 {
        return Err(Error::OutOfRange(format!(
            "{n} nodes is too many for exhaustive search"
        )));
    }
    if g.n_edges() == 0 {
        return Err(Error::NoEdges);
    }
    // restricted growth strings enumerate each set partition once
    let mut a = vec![0usize; n];
    let mut best = (f64::NEG_INFINITY, a.clone());
    loop {
        let q = modularity(g, &a, gamma)?;
        if q > best.0 + EPS {
            best = (q, a.clone());
        }
        let mut i = n;
        loop {
            if i <= 1 {
                return Ok(best);
            }
            i -= 1;
            let cap = a[..i].iter().max().copied().unwrap_or(0) + 1;
            if a[i] < cap {
                a[i] += 1;
                a[i + 1..].iter_mut().for_each(|x| *x = 0);
                break;
            }
        }
    }
}
