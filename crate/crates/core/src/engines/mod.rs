//! Stage-one clustering engines and the cluster library they produce.

mod hierarchical;
mod kmeans;
mod som;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::ProfileSet;
use crate::error::{Error, Result};

pub use hierarchical::hierarchical;
pub use kmeans::{kmeans, kmeans_fit, KMeansFit};
pub use som::{grid_shape, som_fit, som_train, SomModel};

/// One cluster of profiles, identified by a library-unique `id`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: usize,
    /// Indices into the profile set, ascending.
    pub members: Vec<usize>,
    pub centroid: Vec<f64>,
    pub frequency: f64,
}

impl Cluster {
    pub fn new(id: usize, mut members: Vec<usize>, centroid: Vec<f64>, n_profiles: usize) -> Self {
        members.sort_unstable();
        let frequency = members.len() as f64 / n_profiles as f64;
        Self {
            id,
            members,
            centroid,
            frequency,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Which engine and parameters produced a library.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub engine: String,
    pub params: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(engine: &str) -> Self {
        Self {
            engine: engine.to_string(),
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }
}

/// An ordered set of clusters whose member sets partition `0..n_profiles`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterLibrary {
    clusters: Vec<Cluster>,
    n_profiles: usize,
    pub source: Provenance,
}

impl ClusterLibrary {
    pub fn new(clusters: Vec<Cluster>, n_profiles: usize, source: Provenance) -> Result<Self> {
        let lib = Self {
            clusters,
            n_profiles,
            source,
        };
        lib.validate()?;
        Ok(lib)
    }

    /// Groups profiles by label and gives each group its samplewise mean as centroid.
    /// Cluster order and ids follow first appearance of each label value, sorted.
    pub fn from_labels(data: &ProfileSet, labels: &[usize], source: Provenance) -> Result<Self> {
        if labels.len() != data.len() {
            return Err(Error::Coverage(format!(
                "{} labels for {} profiles",
                labels.len(),
                data.len()
            )));
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &l) in labels.iter().enumerate() {
            groups.entry(l).or_default().push(i);
        }
        let clusters = groups
            .into_values()
            .enumerate()
            .map(|(id, members)| {
                let centroid = mean_profile(data, &members);
                Cluster::new(id, members, centroid, data.len())
            })
            .collect();
        Self::new(clusters, data.len(), source)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_profiles;
        if n == 0 {
            return Err(Error::Coverage("library over zero profiles".into()));
        }
        let t = self.clusters.first().map_or(0, |c| c.centroid.len());
        let mut seen = vec![false; n];
        let mut ids = std::collections::BTreeSet::new();
        for c in &self.clusters {
            if c.members.is_empty() {
                return Err(Error::Coverage(format!("cluster {} is empty", c.id)));
            }
            if !ids.insert(c.id) {
                return Err(Error::Coverage(format!("duplicate cluster id {}", c.id)));
            }
            if c.centroid.len() != t {
                return Err(Error::LengthMismatch { left: t, right: c.centroid.len() });
            }
            for &m in &c.members {
                if m >= n {
                    return Err(Error::Coverage(format!("member {m} out of range for N={n}")));
                }
                if std::mem::replace(&mut seen[m], true) {
                    return Err(Error::Coverage(format!("profile {m} assigned twice")));
                }
            }
            let expected = c.members.len() as f64 / n as f64;
            if (c.frequency - expected).abs() > 1e-12 {
                return Err(Error::Coverage(format!("cluster {} frequency is stale", c.id)));
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Coverage(format!("profile {missing} is unassigned")));
        }
        Ok(())
    }

    /// Checks that this library partitions `data` and its centroids have the data's length.
    pub fn check_covers(&self, data: &ProfileSet) -> Result<()> {
        if self.n_profiles != data.len() {
            return Err(Error::Coverage(format!(
                "library covers {} profiles, data has {}",
                self.n_profiles,
                data.len()
            )));
        }
        if let Some(c) = self.clusters.iter().find(|c| c.centroid.len() != data.samples_per_day()) {
            return Err(Error::LengthMismatch {
                left: data.samples_per_day(),
                right: c.centroid.len(),
            });
        }
        Ok(())
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn into_clusters(self) -> Vec<Cluster> {
        self.clusters
    }

    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    pub fn n_profiles(&self) -> usize {
        self.n_profiles
    }

    /// Position (not id) of the cluster holding each profile.
    pub fn assignments(&self) -> Vec<usize> {
        let mut out = vec![usize::MAX; self.n_profiles];
        for (pos, c) in self.clusters.iter().enumerate() {
            for &m in &c.members {
                out[m] = pos;
            }
        }
        out
    }

    /// Same partition with every centroid replaced by `f(cluster)`.
    pub fn map_centroids<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(&Cluster) -> Result<Vec<f64>> + Sync,
    {
        use rayon::prelude::*;
        let centroids: Vec<Vec<f64>> = self.clusters.par_iter().map(&f).collect::<Result<_>>()?;
        let clusters = self
            .clusters
            .iter()
            .zip(centroids)
            .map(|(c, centroid)| Cluster {
                centroid,
                ..c.clone()
            })
            .collect();
        Self::new(clusters, self.n_profiles, self.source.clone())
    }
}

pub(crate) fn mean_profile(data: &ProfileSet, members: &[usize]) -> Vec<f64> {
    let mut mean = vec![0.0; data.samples_per_day()];
    for &m in members {
        for (acc, v) in mean.iter_mut().zip(data.row(m)) {
            *acc += v;
        }
    }
    let n = members.len() as f64;
    mean.iter_mut().for_each(|v| *v /= n);
    mean
}

pub(crate) fn check_k(data: &ProfileSet, k: usize) -> Result<()> {
    if k < 1 || k > data.len() {
        return Err(Error::InvalidK { k, n: data.len() });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Kmeans,
    Som,
    Hierarchical,
}

impl std::str::FromStr for EngineKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kmeans" | "k-means" => Ok(Self::Kmeans),
            "som" => Ok(Self::Som),
            "hierarchical" | "hc" | "ward" => Ok(Self::Hierarchical),
            other => Err(Error::InvalidInput(format!("unknown engine {other:?}"))),
        }
    }
}

impl std::fmt::Display for EngineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Kmeans => "kmeans",
            Self::Som => "som",
            Self::Hierarchical => "hierarchical",
        })
    }
}

/// Engine choice plus the per-engine knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineOptions {
    pub kind: EngineKind,
    pub kmeans_max_iter: usize,
    pub som_epochs: usize,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            kind: EngineKind::Kmeans,
            kmeans_max_iter: 100,
            som_epochs: 20,
        }
    }
}

impl EngineOptions {
    pub fn of(kind: EngineKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }
}

/// Runs the configured engine at `k` clusters. Centroids are Euclidean means.
pub fn run_engine(data: &ProfileSet, engine: &EngineOptions, k: usize, seed: u64) -> Result<ClusterLibrary> {
    match engine.kind {
        EngineKind::Kmeans => kmeans(data, k, seed, engine.kmeans_max_iter),
        EngineKind::Som => som_train(data, k, seed, engine.som_epochs),
        EngineKind::Hierarchical => hierarchical(data, k),
    }
}

/// Stage one: cluster into `k_prime` groups, deliberately more than the final count.
pub fn overpopulate(data: &ProfileSet, engine: &EngineOptions, k_prime: usize, seed: u64) -> Result<ClusterLibrary> {
    run_engine(data, engine, k_prime, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> ProfileSet {
        ProfileSet::from_rows(vec![vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, 5.0]]).unwrap()
    }

    #[test]
    fn from_labels_builds_mean_centroids() {
        let lib = ClusterLibrary::from_labels(&data(), &[1, 0, 1], Provenance::new("test")).unwrap();
        assert_eq!(lib.k(), 2);
        assert_eq!(lib.clusters()[0].members, vec![1]);
        assert_eq!(lib.clusters()[1].centroid, vec![2.0, 3.0]);
        assert_eq!(lib.assignments(), vec![1, 0, 1]);
        let total: f64 = lib.clusters().iter().map(|c| c.frequency).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn validation_catches_broken_partitions() {
        let src = Provenance::new("test");
        let overlap = vec![Cluster::new(0, vec![0, 1], vec![0.0; 2], 3), Cluster::new(1, vec![1, 2], vec![0.0; 2], 3)];
        assert!(ClusterLibrary::new(overlap, 3, src.clone()).is_err());
        let gap = vec![Cluster::new(0, vec![0, 1], vec![0.0; 2], 3)];
        assert!(ClusterLibrary::new(gap, 3, src.clone()).is_err());
        let empty = vec![Cluster::new(0, vec![0, 1, 2], vec![0.0; 2], 3), Cluster::new(1, vec![], vec![0.0; 2], 3)];
        assert!(ClusterLibrary::new(empty, 3, src.clone()).is_err());
        let range = vec![Cluster::new(0, vec![0, 1, 2, 3], vec![0.0; 2], 3)];
        assert!(ClusterLibrary::new(range, 3, src).is_err());
    }

    #[test]
    fn engine_names_parse() {
        assert_eq!("kmeans".parse::<EngineKind>().unwrap(), EngineKind::Kmeans);
        assert_eq!("SOM".parse::<EngineKind>().unwrap(), EngineKind::Som);
        assert_eq!("hc".parse::<EngineKind>().unwrap(), EngineKind::Hierarchical);
        assert!("fcm".parse::<EngineKind>().is_err());
    }

    #[test]
    fn overpopulate_at_n_gives_singletons() {
        let d = data();
        for kind in [EngineKind::Kmeans, EngineKind::Som, EngineKind::Hierarchical] {
            let lib = overpopulate(&d, &EngineOptions::of(kind), d.len(), 5).unwrap();
            assert_eq!(lib.k(), 3, "{kind}");
            assert!(lib.clusters().iter().all(|c| c.len() == 1));
        }
    }

    #[test]
    fn engines_reject_bad_k() {
        let d = data();
        for kind in [EngineKind::Kmeans, EngineKind::Som, EngineKind::Hierarchical] {
            assert!(matches!(run_engine(&d, &EngineOptions::of(kind), 0, 1), Err(Error::InvalidK { .. })));
            assert!(matches!(run_engine(&d, &EngineOptions::of(kind), 4, 1), Err(Error::InvalidK { .. })));
        }
    }
}
