use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{check_k, mean_profile, ClusterLibrary, Provenance};
use crate::dataset::ProfileSet;
use crate::distance::squared_euclidean_unchecked;
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub library: ClusterLibrary,
    /// WCSS after each centroid update, in iteration order.
    pub wcss_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub fn kmeans(data: &ProfileSet, k: usize, seed: u64, max_iter: usize) -> Result<ClusterLibrary> {
    kmeans_fit(data, k, seed, max_iter).map(|f| f.library)
}

/// Lloyd iterations from k-means++ seeding, on raw Euclidean distance.
///
/// A profile only changes cluster when another centroid is strictly closer,
/// so ties never cause oscillation. An emptied cluster is reseeded with the
/// profile lying farthest from its own centroid.
pub fn kmeans_fit(data: &ProfileSet, k: usize, seed: u64, max_iter: usize) -> Result<KMeansFit> {
    check_k(data, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_seeds(data, k, &mut rng);
    let mut labels: Vec<usize> = (0..data.len())
        .into_par_iter()
        .map(|i| nearest(data.row(i), &centroids).0)
        .collect();

    let mut wcss_history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    loop {
        repair_empty(data, &mut labels, &mut centroids, k);
        centroids = (0..k)
            .map(|c| {
                let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
                mean_profile(data, &members)
            })
            .collect();
        wcss_history.push(wcss_of(data, &labels, &centroids));
        if iterations == max_iter {
            break;
        }
        iterations += 1;
        let updated: Vec<usize> = (0..data.len())
            .into_par_iter()
            .map(|i| {
                let current = labels[i];
                let row = data.row(i);
                let (best, d) = nearest(row, &centroids);
                if d < squared_euclidean_unchecked(row, &centroids[current]) {
                    best
                } else {
                    current
                }
            })
            .collect();
        let changed = updated != labels;
        labels = updated;
        if !changed {
            converged = true;
            break;
        }
    }

    let source = Provenance::new("kmeans")
        .with("k", k)
        .with("seed", seed)
        .with("max_iter", max_iter);
    let library = ClusterLibrary::from_labels(data, &labels, source)?;
    Ok(KMeansFit {
        library,
        wcss_history,
        iterations,
        converged,
    })
}

fn nearest(row: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = squared_euclidean_unchecked(row, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_seeds(data: &ProfileSet, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = data.len();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![data.row(first).to_vec()];
    let mut d2: Vec<f64> = (0..n)
        .map(|i| squared_euclidean_unchecked(data.row(i), &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave the target past the last positive weight
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("positive total"))
        } else {
            // every remaining profile duplicates a seed; take any unused one
            let unused: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            unused[rng.random_range(0..unused.len())]
        };
        chosen[pick] = true;
        let c = data.row(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(squared_euclidean_unchecked(data.row(i), &c));
        }
        centroids.push(c);
    }
    centroids
}

fn repair_empty(data: &ProfileSet, labels: &mut [usize], centroids: &mut [Vec<f64>], k: usize) {
    loop {
        let mut sizes = vec![0usize; k];
        for &l in labels.iter() {
            sizes[l] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let farthest = (0..labels.len())
            .filter(|&i| sizes[labels[i]] > 1)
            .map(|i| (i, squared_euclidean_unchecked(data.row(i), &centroids[labels[i]])))
            .fold(None, |best: Option<(usize, f64)>, cand| match best {
                Some(b) if b.1 >= cand.1 => Some(b),
                _ => Some(cand),
            })
            .map(|(i, _)| i)
            .expect("k <= N leaves a cluster with two members");
        labels[farthest] = empty;
        centroids[empty] = data.row(farthest).to_vec();
    }
}

fn wcss_of(data: &ProfileSet, labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| squared_euclidean_unchecked(data.row(i), &centroids[l]))
        .sum()
}
