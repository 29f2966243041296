//! DTW barycenter averaging.
//!
//! Each refinement aligns every member to the current centroid with DTW,
//! collects the member samples associated with each centroid sample along
//! those paths, and replaces the centroid sample with their mean. With a
//! squared local cost this never increases the summed DTW of the members
//! to the centroid.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::{dtw_path_unchecked, dtw_unchecked};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DbaInit {
    /// Member with the smallest summed DTW to all others (lowest index on ties).
    Medoid,
    /// A member drawn uniformly with the given seed.
    RandomMember { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DbaOptions {
    pub max_iter: usize,
    /// Stop once an iteration improves the summed DTW by less than this fraction.
    pub tol: f64,
    pub init: DbaInit,
    pub band: Option<usize>,
}

impl Default for DbaOptions {
    fn default() -> Self {
        Self {
            max_iter: 10,
            tol: 1e-4,
            init: DbaInit::Medoid,
            band: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DbaResult {
    pub centroid: Vec<f64>,
    /// Summed DTW of members to the centroid: the initial value, then one per accepted iteration.
    pub inertia: Vec<f64>,
}

fn check_members(members: &[&[f64]], t: usize) -> Result<()> {
    if members.is_empty() {
        return Err(Error::InvalidInput("DBA needs at least one member".into()));
    }
    if t == 0 {
        return Err(Error::SeriesTooShort { required: 1, actual: 0 });
    }
    if let Some(m) = members.iter().find(|m| m.len() != t) {
        return Err(Error::LengthMismatch { left: t, right: m.len() });
    }
    Ok(())
}

struct Alignment {
    inertia: f64,
    next: Vec<f64>,
}

/// Aligns all members to `centroid`; returns their summed DTW and the barycentre update.
fn align(members: &[&[f64]], centroid: &[f64], band: Option<usize>) -> Alignment {
    let paths: Vec<(f64, Vec<(usize, usize)>)> = members
        .par_iter()
        .map(|m| dtw_path_unchecked(centroid, m, band))
        .collect();
    let t = centroid.len();
    let mut sums = vec![0.0; t];
    let mut counts = vec![0usize; t];
    let mut inertia = 0.0;
    for (m, (cost, path)) in members.iter().zip(&paths) {
        inertia += cost;
        for &(i, j) in path {
            sums[i] += m[j];
            counts[i] += 1;
        }
    }
    let next = sums
        .iter()
        .zip(&counts)
        .zip(centroid)
        .map(|((s, &c), &old)| if c > 0 { s / c as f64 } else { old })
        .collect();
    Alignment { inertia, next }
}

/// One refinement of `centroid` against `members`.
pub fn dba_iterate(members: &[&[f64]], centroid: &[f64], band: Option<usize>) -> Result<Vec<f64>> {
    check_members(members, centroid.len())?;
    Ok(align(members, centroid, band).next)
}

/// Index of the member minimising summed DTW to the others.
pub fn medoid_index(members: &[&[f64]], band: Option<usize>) -> usize {
    let n = members.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let dists: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| dtw_unchecked(members[i], members[j], band))
        .collect();
    let mut totals = vec![0.0; n];
    for (&(i, j), d) in pairs.iter().zip(&dists) {
        totals[i] += d;
        totals[j] += d;
    }
    let mut best = 0;
    for (i, &s) in totals.iter().enumerate() {
        if s < totals[best] {
            best = i;
        }
    }
    best
}

/// Full DBA run from the configured initialisation.
pub fn dba_trace(members: &[&[f64]], options: &DbaOptions) -> Result<DbaResult> {
    let t = members.first().map_or(0, |m| m.len());
    check_members(members, t)?;
    let start = match options.init {
        DbaInit::Medoid => medoid_index(members, options.band),
        DbaInit::RandomMember { seed } => ChaCha8Rng::seed_from_u64(seed).random_range(0..members.len()),
    };
    let mut centroid = members[start].to_vec();
    let mut current = align(members, &centroid, options.band);
    let mut inertia = vec![current.inertia];
    for _ in 0..options.max_iter {
        let candidate = align(members, &current.next, options.band);
        if candidate.inertia > current.inertia {
            // only reachable through rounding; keep the better centroid
            break;
        }
        let improvement = current.inertia - candidate.inertia;
        centroid = std::mem::take(&mut current.next);
        inertia.push(candidate.inertia);
        let done = improvement <= options.tol * current.inertia;
        current = candidate;
        if done {
            break;
        }
    }
    Ok(DbaResult { centroid, inertia })
}

pub fn dba(members: &[&[f64]], options: &DbaOptions) -> Result<Vec<f64>> {
    dba_trace(members, options).map(|r| r.centroid)
}
