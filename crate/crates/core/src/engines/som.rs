use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_k, ClusterLibrary, Provenance};
use crate::dataset::ProfileSet;
use crate::distance::squared_euclidean_unchecked;
use crate::error::Result;

const LEARNING_RATE_START: f64 = 0.5;
const LEARNING_RATE_END: f64 = 0.01;
const RADIUS_END: f64 = 0.5;

/// Near-square `rows x cols == k` grid: `rows` is the largest divisor of `k` not above `sqrt(k)`.
pub fn grid_shape(k: usize) -> (usize, usize) {
    let rows = (1..=k).take_while(|r| r * r <= k).filter(|r| k.is_multiple_of(*r)).last().unwrap_or(1);
    (rows, k / rows)
}

/// A trained rectangular map; unit `u` sits at grid cell `(u / cols, u % cols)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SomModel {
    pub rows: usize,
    pub cols: usize,
    pub prototypes: Vec<Vec<f64>>,
}

impl SomModel {
    /// Best-matching unit, lowest index on ties.
    pub fn best_unit(&self, x: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (u, w) in self.prototypes.iter().enumerate() {
            let d = squared_euclidean_unchecked(x, w);
            if d < best.1 {
                best = (u, d);
            }
        }
        best.0
    }

    fn grid_distance_sq(&self, a: usize, b: usize) -> f64 {
        let (ra, ca) = ((a / self.cols) as f64, (a % self.cols) as f64);
        let (rb, cb) = ((b / self.cols) as f64, (b % self.cols) as f64);
        (ra - rb).powi(2) + (ca - cb).powi(2)
    }
}

/// Online SOM training.
///
/// Prototypes start as `k` distinct sampled profiles. Over `epochs` shuffled
/// passes the learning rate falls linearly from 0.5 to 0.01 and the
/// neighbourhood radius from half the longer grid side (at least 1) to 0.5.
/// The neighbourhood is Gaussian in grid distance and cut off beyond the
/// current radius.
pub fn som_fit(data: &ProfileSet, k: usize, seed: u64, epochs: usize) -> Result<SomModel> {
    check_k(data, k)?;
    let (rows, cols) = grid_shape(k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prototypes = index::sample(&mut rng, data.len(), k)
        .into_iter()
        .map(|i| data.row(i).to_vec())
        .collect();
    let mut model = SomModel { rows, cols, prototypes };

    let radius_start = (rows.max(cols) as f64 / 2.0).max(1.0);
    let total_steps = (epochs * data.len()) as f64;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut step = 0usize;
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let progress = step as f64 / total_steps;
            let lr = LEARNING_RATE_START + (LEARNING_RATE_END - LEARNING_RATE_START) * progress;
            let radius = radius_start + (RADIUS_END - radius_start) * progress;
            let x = data.row(i);
            let winner = model.best_unit(x);
            for u in 0..k {
                let g2 = model.grid_distance_sq(winner, u);
                if g2 > radius * radius {
                    continue;
                }
                let h = lr * (-g2 / (2.0 * radius * radius)).exp();
                for (w, v) in model.prototypes[u].iter_mut().zip(x) {
                    *w += h * (v - *w);
                }
            }
            step += 1;
        }
    }
    Ok(model)
}

/// Trains a map and turns each non-empty unit into a cluster (mean centroid).
/// Units that attract no profile are dropped, so the library may hold fewer than `k` clusters.
pub fn som_train(data: &ProfileSet, k: usize, seed: u64, epochs: usize) -> Result<ClusterLibrary> {
    let model = som_fit(data, k, seed, epochs)?;
    let labels: Vec<usize> = data.rows().map(|x| model.best_unit(x)).collect();
    let source = Provenance::new("som")
        .with("k", k)
        .with("grid", format!("{}x{}", model.rows, model.cols))
        .with("seed", seed)
        .with("epochs", epochs);
    ClusterLibrary::from_labels(data, &labels, source)
}
