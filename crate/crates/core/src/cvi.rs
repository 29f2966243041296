//! Cluster validity indices and the K sweep used to pick cluster counts.
//!
//! Every index uses Euclidean distance and the library's stored centroids.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::ProfileSet;
use crate::distance::squared_euclidean_unchecked;
use crate::engines::{run_engine, ClusterLibrary, EngineOptions};
use crate::error::{Error, Result};

fn require_k(lib: &ClusterLibrary, index: &'static str) -> Result<()> {
    if lib.k() < 2 {
        return Err(Error::TooFewClusters(index, 2));
    }
    Ok(())
}

/// Within-cluster sum of squared deviations from each centroid.
pub fn wcss(data: &ProfileSet, lib: &ClusterLibrary) -> Result<f64> {
    lib.check_covers(data)?;
    Ok(lib
        .clusters()
        .iter()
        .map(|c| {
            c.members
                .iter()
                .map(|&m| squared_euclidean_unchecked(data.row(m), &c.centroid))
                .sum::<f64>()
        })
        .sum())
}

/// Davies-Bouldin index; lower is better.
pub fn dbi(data: &ProfileSet, lib: &ClusterLibrary) -> Result<f64> {
    lib.check_covers(data)?;
    require_k(lib, "dbi")?;
    let clusters = lib.clusters();
    let scatter: Vec<f64> = clusters
        .iter()
        .map(|c| {
            c.members
                .iter()
                .map(|&m| squared_euclidean_unchecked(data.row(m), &c.centroid).sqrt())
                .sum::<f64>()
                / c.len() as f64
        })
        .collect();
    let k = clusters.len();
    let mut total = 0.0;
    for i in 0..k {
        let mut worst = f64::NEG_INFINITY;
        for j in (0..k).filter(|&j| j != i) {
            let sep = squared_euclidean_unchecked(&clusters[i].centroid, &clusters[j].centroid).sqrt();
            if sep == 0.0 {
                return Err(Error::CoincidentCentroids(clusters[i].id, clusters[j].id));
            }
            worst = worst.max((scatter[i] + scatter[j]) / sep);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

/// Silhouette, averaged within each cluster and then across clusters.
///
/// Singletons score 0, as does a point whose intra and nearest-other mean
/// distances are both 0.
pub fn silhouette(data: &ProfileSet, lib: &ClusterLibrary) -> Result<f64> {
    lib.check_covers(data)?;
    require_k(lib, "silhouette")?;
    let labels = lib.assignments();
    let sizes: Vec<usize> = lib.clusters().iter().map(|c| c.len()).collect();
    let k = lib.k();
    let scores: Vec<f64> = (0..data.len())
        .into_par_iter()
        .map(|x| {
            let own = labels[x];
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            let row = data.row(x);
            for (y, &l) in labels.iter().enumerate() {
                if y != x {
                    sums[l] += squared_euclidean_unchecked(row, data.row(y)).sqrt();
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom == 0.0 {
                0.0
            } else {
                (b - a) / denom
            }
        })
        .collect();
    let mut per_cluster = vec![0.0; k];
    for (x, s) in scores.iter().enumerate() {
        per_cluster[labels[x]] += s;
    }
    Ok(per_cluster
        .iter()
        .zip(&sizes)
        .map(|(s, &n)| s / n as f64)
        .sum::<f64>()
        / k as f64)
}

/// Calinski-Harabasz index with between-dispersion measured to the global mean.
/// Zero within-dispersion yields `f64::INFINITY`.
pub fn chi(data: &ProfileSet, lib: &ClusterLibrary) -> Result<f64> {
    lib.check_covers(data)?;
    require_k(lib, "chi")?;
    let (n, k) = (data.len(), lib.k());
    if n <= k {
        return Err(Error::InvalidK { k, n });
    }
    let all: Vec<usize> = (0..n).collect();
    let global = crate::engines::mean_profile(data, &all);
    let between: f64 = lib
        .clusters()
        .iter()
        .map(|c| c.len() as f64 * squared_euclidean_unchecked(&c.centroid, &global))
        .sum();
    let within = wcss(data, lib)?;
    if within == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((between / (k - 1) as f64) / (within / (n - k) as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CviRow {
    pub k: usize,
    /// Clusters actually returned; SOM may drop empty units.
    pub k_effective: usize,
    /// `None` where the index is undefined for this library.
    pub dbi: Option<f64>,
    pub sil: Option<f64>,
    pub chi: Option<f64>,
    pub wcss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CviReport {
    pub engine: String,
    pub seed: u64,
    pub rows: Vec<CviRow>,
}

impl CviReport {
    pub fn k_values(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.k).collect()
    }

    /// CSV with columns `k,dbi,sil,chi,wcss`; undefined entries are empty, infinite ones `inf`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(["k", "dbi", "sil", "chi", "wcss"])?;
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            csv.write_record([r.k.to_string(), cell(r.dbi), cell(r.sil), cell(r.chi), r.wcss.to_string()])?;
        }
        csv.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// The evaluation grid {5, 6, ..., 10, 15, 20, ..., 120}.
pub fn standard_k_grid() -> Vec<usize> {
    (5..10).chain((10..=120).step_by(5)).collect()
}

/// All four indices for one library; undefined ones become `None`.
pub fn evaluate_library(data: &ProfileSet, lib: &ClusterLibrary, k: usize) -> Result<CviRow> {
    let defined = |r: Result<f64>| match r {
        Ok(v) => Ok(Some(v)),
        Err(e) if e.is_numerical() || matches!(e, Error::InvalidK { .. }) => Ok(None),
        Err(e) => Err(e),
    };
    Ok(CviRow {
        k,
        k_effective: lib.k(),
        dbi: defined(dbi(data, lib))?,
        sil: defined(silhouette(data, lib))?,
        chi: defined(chi(data, lib))?,
        wcss: wcss(data, lib)?,
    })
}

/// Clusters at every K (each run seeded with `seed`) and scores the result.
pub fn sweep(data: &ProfileSet, engine: &EngineOptions, k_values: &[usize], seed: u64) -> Result<CviReport> {
    if k_values.is_empty() {
        return Err(Error::InvalidInput("empty K grid".into()));
    }
    if k_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("K values must be strictly increasing".into()));
    }
    let rows = k_values
        .par_iter()
        .map(|&k| {
            let lib = run_engine(data, engine, k, seed)?;
            evaluate_library(data, &lib, k)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CviReport {
        engine: engine.kind.to_string(),
        seed,
        rows,
    })
}

/// Knee of the WCSS curve: the K farthest below the chord joining its endpoints.
pub fn elbow_k(report: &CviReport) -> Result<usize> {
    let rows = &report.rows;
    if rows.len() < 3 {
        return Err(Error::DegenerateCurve(format!("need at least 3 K values, got {}", rows.len())));
    }
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    let (x0, y0) = (first.k as f64, first.wcss);
    let (x1, y1) = (last.k as f64, last.wcss);
    let slope = (y1 - y0) / (x1 - x0);
    let norm = (1.0 + slope * slope).sqrt();
    let scale = rows.iter().map(|r| r.wcss.abs()).fold(0.0, f64::max);

    let mut best: Option<(usize, f64)> = None;
    for r in &rows[1..rows.len() - 1] {
        let below = (y0 + slope * (r.k as f64 - x0) - r.wcss) / norm;
        if best.is_none_or(|(_, d)| below > d) {
            best = Some((r.k, below));
        }
    }
    match best {
        Some((k, d)) if d > 1e-9 * scale / norm && d > 0.0 => Ok(k),
        _ => Err(Error::DegenerateCurve("WCSS curve has no knee below its chord".into())),
    }
}
