//! Agglomerative Ward clustering via the nearest-neighbour chain algorithm.

use super::{check_k, ClusterLibrary, Provenance};
use crate::dataset::ProfileSet;
use crate::distance::squared_euclidean_unchecked;
use crate::error::Result;

/// Upper-triangle storage for a symmetric matrix without diagonal.
struct Condensed {
    n: usize,
    values: Vec<f64>,
}

impl Condensed {
    fn index(&self, a: usize, b: usize) -> usize {
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    fn get(&self, a: usize, b: usize) -> f64 {
        self.values[self.index(a, b)]
    }

    fn set(&mut self, a: usize, b: usize, v: f64) {
        let idx = self.index(a, b);
        self.values[idx] = v;
    }
}

struct Merge {
    a: usize,
    b: usize,
    height: f64,
}

/// Full Ward dendrogram as merges between slot indices, in the order found.
/// The merged cluster always keeps the lower slot index.
fn ward_merges(data: &ProfileSet) -> Vec<Merge> {
    use rayon::prelude::*;
    let n = data.len();
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| (i + 1..n).map(move |j| squared_euclidean_unchecked(data.row(i), data.row(j))))
        .collect();
    let mut dist = Condensed { n, values };
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    let mut chain: Vec<usize> = Vec::new();

    while merges.len() + 1 < n {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).expect("two active clusters remain"));
        }
        let (a, b, height) = loop {
            let a = *chain.last().expect("non-empty chain");
            let prev = chain.len().checked_sub(2).map(|i| chain[i]);
            // prefer the chain predecessor on ties, otherwise the lowest index
            let mut best = prev.map(|p| (p, dist.get(a, p)));
            for c in (0..n).filter(|&c| active[c] && c != a) {
                let d = dist.get(a, c);
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((c, d));
                }
            }
            let (b, d) = best.expect("another active cluster");
            if Some(b) == prev {
                break (a, b, d);
            }
            chain.push(b);
        };
        chain.truncate(chain.len() - 2);

        let (keep, drop) = (a.min(b), a.max(b));
        let (na, nb) = (size[keep] as f64, size[drop] as f64);
        for c in (0..n).filter(|&c| active[c] && c != keep && c != drop) {
            let nc = size[c] as f64;
            let updated = ((na + nc) * dist.get(keep, c) + (nb + nc) * dist.get(drop, c) - nc * height)
                / (na + nb + nc);
            dist.set(keep, c, updated);
        }
        active[drop] = false;
        size[keep] += size[drop];
        merges.push(Merge { a: keep, b: drop, height });
    }
    merges
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Ward linkage on Euclidean distance, cut at `k` clusters.
///
/// Clusters are ordered by their lowest member index.
pub fn hierarchical(data: &ProfileSet, k: usize) -> Result<ClusterLibrary> {
    check_k(data, k)?;
    let n = data.len();
    let mut merges = ward_merges(data);
    // stable: equal heights keep discovery order, which respects nesting
    merges.sort_by(|x, y| x.height.total_cmp(&y.height));

    let mut parent: Vec<usize> = (0..n).collect();
    for m in merges.iter().take(n - k) {
        let (ra, rb) = (find(&mut parent, m.a), find(&mut parent, m.b));
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        parent[hi] = lo;
    }
    let labels: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    let source = Provenance::new("hierarchical").with("k", k).with("linkage", "ward");
    ClusterLibrary::from_labels(data, &labels, source)
}
