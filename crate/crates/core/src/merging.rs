//! Stage two: greedy merging of cluster pairs under CI-DTW between centroids.
//!
//! Every iteration merges the closest pair whose combined size stays within
//! `tau * N`. Closer pairs breaking that cap are skipped and logged in the
//! trace. Ties go to the lowest `(i, j)` position pair.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::ProfileSet;
use crate::dba::{dba, DbaOptions};
use crate::distance::cidtw;
use crate::engines::{Cluster, ClusterLibrary};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CentroidUpdate {
    /// DBA over the union of members.
    Dba(DbaOptions),
    /// Size-weighted mean of the two centroids; cheap for very large clusters.
    WeightedMean,
}

impl Default for CentroidUpdate {
    fn default() -> Self {
        Self::Dba(DbaOptions::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeConfig {
    pub k_final: usize,
    /// Largest share of all profiles a merged cluster may hold.
    pub tau: f64,
    pub band: Option<usize>,
    #[serde(default)]
    pub centroid_update: CentroidUpdate,
}

impl MergeConfig {
    pub fn new(k_final: usize, tau: f64) -> Self {
        Self {
            k_final,
            tau,
            band: None,
            centroid_update: CentroidUpdate::default(),
        }
    }

    fn check_tau(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::InvalidInput(format!("tau must lie in (0, 1], got {}", self.tau)));
        }
        Ok(())
    }
}

/// Dense symmetric matrix of centroid distances, indexed by library position.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    size: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.size + j] = v;
        self.values[j * self.size + i] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.size..(i + 1) * self.size]
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.size).all(|i| (0..self.size).all(|j| self.get(i, j) == self.get(j, i)))
    }

    fn remove(&mut self, k: usize) {
        let n = self.size;
        let mut values = Vec::with_capacity((n - 1) * (n - 1));
        for i in (0..n).filter(|&i| i != k) {
            values.extend((0..n).filter(|&j| j != k).map(|j| self.values[i * n + j]));
        }
        self.size = n - 1;
        self.values = values;
    }
}

/// Pairwise CI-DTW between all centroids.
pub fn centroid_distance_matrix(lib: &ClusterLibrary, band: Option<usize>) -> Result<DistanceMatrix> {
    let k = lib.k();
    if k < 2 {
        return Err(Error::TooFewClusters("centroid distance matrix", 2));
    }
    let clusters = lib.clusters();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
    let dists = pairs
        .par_iter()
        .map(|&(i, j)| cidtw(&clusters[i].centroid, &clusters[j].centroid, band))
        .collect::<Result<Vec<_>>>()?;
    let mut m = DistanceMatrix {
        size: k,
        values: vec![0.0; k * k],
    };
    for (&(i, j), d) in pairs.iter().zip(dists) {
        m.set(i, j, d);
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedPair {
    pub a: usize,
    pub b: usize,
    pub cidtw: f64,
    pub combined_size: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeRecord {
    pub iteration: usize,
    /// Ids of the two clusters merged.
    pub merged: (usize, usize),
    pub cidtw: f64,
    pub result_id: usize,
    pub result_size: usize,
    /// Closer pairs rejected by the density cap, nearest first.
    pub skipped: Vec<SkippedPair>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MergeTrace {
    pub initial_k: usize,
    pub final_k: usize,
    pub n_profiles: usize,
    pub tau: f64,
    pub records: Vec<MergeRecord>,
}

impl MergeTrace {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn merged_centroid(data: &ProfileSet, a: &Cluster, b: &Cluster, members: &[usize], config: &MergeConfig) -> Result<Vec<f64>> {
    match &config.centroid_update {
        CentroidUpdate::Dba(opts) => {
            let rows: Vec<&[f64]> = members.iter().map(|&m| data.row(m)).collect();
            let opts = DbaOptions {
                band: opts.band.or(config.band),
                ..opts.clone()
            };
            dba(&rows, &opts)
        }
        CentroidUpdate::WeightedMean => {
            let (na, nb) = (a.len() as f64, b.len() as f64);
            Ok(a.centroid
                .iter()
                .zip(&b.centroid)
                .map(|(x, y)| (na * x + nb * y) / (na + nb))
                .collect())
        }
    }
}

/// Merges the closest admissible pair and updates `matrix` in place.
///
/// `iteration` is only copied into the returned record.
pub fn merge_once(
    data: &ProfileSet,
    lib: &ClusterLibrary,
    matrix: &mut DistanceMatrix,
    config: &MergeConfig,
    iteration: usize,
) -> Result<(ClusterLibrary, MergeRecord)> {
    config.check_tau()?;
    lib.check_covers(data)?;
    let k = lib.k();
    if k < 2 {
        return Err(Error::TooFewClusters("merge", 2));
    }
    if matrix.size() != k {
        return Err(Error::InvalidInput(format!(
            "distance matrix is {}x{} for {k} clusters",
            matrix.size(),
            matrix.size()
        )));
    }
    let clusters = lib.clusters();
    let cap = config.tau * lib.n_profiles() as f64;

    let mut best: Option<(usize, usize, f64)> = None;
    let mut rejected: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let d = matrix.get(i, j);
            let combined = clusters[i].len() + clusters[j].len();
            if combined as f64 <= cap {
                if best.is_none_or(|(_, _, bd)| d < bd) {
                    best = Some((i, j, d));
                }
            } else {
                rejected.push((i, j, d));
            }
        }
    }
    let Some((i, j, d)) = best else {
        return Err(Error::MergeExhausted { reached: k });
    };
    // rejected pairs ordered ahead of the winner under (distance, i, j)
    let mut skipped: Vec<(usize, usize, f64)> = rejected
        .into_iter()
        .filter(|&(a, b, x)| x < d || (x == d && (a, b) < (i, j)))
        .collect();
    skipped.sort_by(|x, y| x.2.total_cmp(&y.2).then((x.0, x.1).cmp(&(y.0, y.1))));
    let skipped = skipped
        .into_iter()
        .map(|(a, b, x)| SkippedPair {
            a: clusters[a].id,
            b: clusters[b].id,
            cidtw: x,
            combined_size: clusters[a].len() + clusters[b].len(),
            reason: format!(
                "combined size {} exceeds tau*N = {}",
                clusters[a].len() + clusters[b].len(),
                cap
            ),
        })
        .collect();

    let (a, b) = (&clusters[i], &clusters[j]);
    let members: Vec<usize> = a.members.iter().chain(&b.members).copied().collect();
    let centroid = merged_centroid(data, a, b, &members, config)?;
    let result_id = clusters.iter().map(|c| c.id).max().unwrap_or(0) + 1;
    let merged = Cluster::new(result_id, members, centroid, lib.n_profiles());
    let record = MergeRecord {
        iteration,
        merged: (a.id, b.id),
        cidtw: d,
        result_id,
        result_size: merged.len(),
        skipped,
    };

    let mut next: Vec<Cluster> = lib.clusters().to_vec();
    next[i] = merged;
    next.remove(j);
    let next = ClusterLibrary::new(next, lib.n_profiles(), lib.source.clone())?;

    matrix.remove(j);
    let row = (0..next.k())
        .into_par_iter()
        .map(|c| {
            if c == i {
                Ok(0.0)
            } else {
                cidtw(&next.clusters()[i].centroid, &next.clusters()[c].centroid, config.band)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    for (c, v) in row.into_iter().enumerate() {
        matrix.set(i, c, v);
    }
    Ok((next, record))
}

/// Merges until `config.k_final` clusters remain.
pub fn merge_to_k(data: &ProfileSet, lib: &ClusterLibrary, config: &MergeConfig) -> Result<(ClusterLibrary, MergeTrace)> {
    config.check_tau()?;
    if config.k_final < 1 || config.k_final >= lib.k() {
        return Err(Error::InvalidInput(format!(
            "k_final must lie in [1, {}), got {}",
            lib.k(),
            config.k_final
        )));
    }
    let mut matrix = centroid_distance_matrix(lib, config.band)?;
    let mut current = lib.clone();
    let mut trace = MergeTrace {
        initial_k: lib.k(),
        final_k: config.k_final,
        n_profiles: lib.n_profiles(),
        tau: config.tau,
        records: Vec::with_capacity(lib.k() - config.k_final),
    };
    while current.k() > config.k_final {
        let (next, record) = merge_once(data, &current, &mut matrix, config, trace.records.len() + 1)?;
        trace.records.push(record);
        current = next;
    }
    Ok((current, trace))
}
