//! Correlation-based quality of a cluster library and comparison against a benchmark.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cvi::wcss;
use crate::dataset::ProfileSet;
use crate::engines::{Cluster, ClusterLibrary};
use crate::error::{Error, Result};

/// Pearson correlation. A constant series correlates 1 with an identical
/// constant series and 0 with anything else.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.len() < 2 {
        return Err(Error::SeriesTooShort { required: 2, actual: a.len() });
    }
    let constant = |s: &[f64]| s.iter().all(|v| *v == s[0]);
    match (constant(a), constant(b)) {
        (true, true) => return Ok(if a[0] == b[0] { 1.0 } else { 0.0 }),
        (true, false) | (false, true) => return Ok(0.0),
        _ => {}
    }
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(0.0);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Mean correlation of the cluster's members with its centroid.
pub fn cluster_corr(data: &ProfileSet, cluster: &Cluster) -> Result<f64> {
    if cluster.is_empty() {
        return Err(Error::Coverage(format!("cluster {} is empty", cluster.id)));
    }
    let mut total = 0.0;
    for &m in &cluster.members {
        if m >= data.len() {
            return Err(Error::Coverage(format!("member {m} out of range")));
        }
        total += pearson(data.row(m), &cluster.centroid)?;
    }
    Ok(total / cluster.len() as f64)
}

/// Size-weighted average of per-cluster correlations.
pub fn wac(data: &ProfileSet, lib: &ClusterLibrary) -> Result<f64> {
    lib.check_covers(data)?;
    let mut total = 0.0;
    for c in lib.clusters() {
        total += c.len() as f64 * cluster_corr(data, c)?;
    }
    Ok(total / data.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterEval {
    pub cluster_id: usize,
    pub size: usize,
    pub frequency: f64,
    pub corr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalParams {
    pub engine: String,
    pub k_prime: Option<usize>,
    pub k: usize,
    pub tau: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub params: EvalParams,
    pub n_profiles: usize,
    pub clusters: Vec<ClusterEval>,
    pub wac: f64,
    pub wcss: f64,
}

impl EvalReport {
    pub fn build(data: &ProfileSet, lib: &ClusterLibrary, method: &str, params: EvalParams) -> Result<Self> {
        lib.check_covers(data)?;
        let clusters = lib
            .clusters()
            .iter()
            .map(|c| {
                Ok(ClusterEval {
                    cluster_id: c.id,
                    size: c.len(),
                    frequency: c.frequency,
                    corr: cluster_corr(data, c)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let wac = clusters.iter().map(|c| c.size as f64 * c.corr).sum::<f64>() / data.len() as f64;
        Ok(Self {
            method: method.to_string(),
            params,
            n_profiles: data.len(),
            clusters,
            wac,
            wcss: wcss(data, lib)?,
        })
    }

    /// WAC recomputed from the per-cluster fields.
    pub fn recomputed_wac(&self) -> f64 {
        self.clusters.iter().map(|c| c.frequency * c.corr).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per cluster followed by a `summary` row carrying WAC and WCSS.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(["row", "cluster_id", "size", "frequency", "corr", "wac", "wcss"])?;
        for c in &self.clusters {
            csv.write_record([
                "cluster".to_string(),
                c.cluster_id.to_string(),
                c.size.to_string(),
                c.frequency.to_string(),
                c.corr.to_string(),
                String::new(),
                String::new(),
            ])?;
        }
        csv.write_record([
            "summary".to_string(),
            String::new(),
            self.n_profiles.to_string(),
            "1".to_string(),
            String::new(),
            self.wac.to_string(),
            self.wcss.to_string(),
        ])?;
        csv.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub two_stage: EvalReport,
    pub benchmark: EvalReport,
    /// `100 * (two_stage - benchmark) / |benchmark|`; `None` when the benchmark value is 0.
    pub delta_wac_pct: Option<f64>,
    pub delta_wcss_pct: Option<f64>,
    pub warnings: Vec<String>,
}

fn pct_change(new: f64, base: f64) -> Option<f64> {
    (base != 0.0).then(|| 100.0 * (new - base) / base.abs())
}

pub fn compare(data: &ProfileSet, two_stage: &ClusterLibrary, benchmark: &ClusterLibrary, params: (EvalParams, EvalParams)) -> Result<Comparison> {
    let two = EvalReport::build(data, two_stage, "two-stage", params.0)?;
    let bench = EvalReport::build(data, benchmark, "benchmark", params.1)?;
    Ok(compare_reports(two, bench))
}

pub fn compare_reports(two_stage: EvalReport, benchmark: EvalReport) -> Comparison {
    let mut warnings = Vec::new();
    if two_stage.clusters.len() != benchmark.clusters.len() {
        warnings.push(format!(
            "cluster counts differ: two-stage K={} vs benchmark K={}",
            two_stage.clusters.len(),
            benchmark.clusters.len()
        ));
    }
    Comparison {
        delta_wac_pct: pct_change(two_stage.wac, benchmark.wac),
        delta_wcss_pct: pct_change(two_stage.wcss, benchmark.wcss),
        two_stage,
        benchmark,
        warnings,
    }
}
