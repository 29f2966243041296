//! Distance kernels: Euclidean, DTW, complexity estimate and complexity-invariant DTW.
//!
//! DTW uses the squared sample difference as the local cost and returns the
//! raw accumulated cost of the optimal warping path (no length normalisation,
//! no final square root).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower clamp applied to complexity estimates before taking their ratio.
pub const COMPLEXITY_FLOOR: f64 = 1e-12;

/// A finite, non-empty real sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WarpSeries(Vec<f64>);

impl WarpSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::SeriesTooShort { required: 1, actual: 0 });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite sample {v}")));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for WarpSeries {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<WarpSeries> for Vec<f64> {
    fn from(w: WarpSeries) -> Self {
        w.0
    }
}

impl AsRef<[f64]> for WarpSeries {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[inline]
fn cost(a: f64, b: f64) -> f64 {
    let d = a - b;
    d * d
}

pub(crate) fn squared_euclidean_unchecked(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| cost(*a, *b)).sum()
}

pub fn squared_euclidean(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch { left: p.len(), right: q.len() });
    }
    Ok(squared_euclidean_unchecked(p, q))
}

pub fn euclidean(p: &[f64], q: &[f64]) -> Result<f64> {
    squared_euclidean(p, q).map(f64::sqrt)
}

fn check_warp_inputs(p: &[f64], q: &[f64], band: Option<usize>) -> Result<()> {
    for s in [p, q] {
        if s.is_empty() {
            return Err(Error::SeriesTooShort { required: 1, actual: 0 });
        }
    }
    if let Some(w) = band {
        if w < p.len().abs_diff(q.len()) {
            return Err(Error::InfeasibleBand {
                band: w,
                left: p.len(),
                right: q.len(),
            });
        }
    }
    Ok(())
}

/// Column range `lo..hi` of row `i` admitted by a Sakoe-Chiba band of half-width `w`.
#[inline]
fn band_columns(i: usize, m: usize, band: Option<usize>) -> (usize, usize) {
    match band {
        None => (0, m),
        Some(w) => (i.saturating_sub(w), (i + w + 1).min(m)),
    }
}

/// Accumulated cost of the optimal warping of `p` onto `q`.
pub fn dtw(p: &[f64], q: &[f64], band: Option<usize>) -> Result<f64> {
    check_warp_inputs(p, q, band)?;
    Ok(dtw_unchecked(p, q, band))
}

pub(crate) fn dtw_unchecked(p: &[f64], q: &[f64], band: Option<usize>) -> f64 {
    let m = q.len();
    let mut prev = vec![f64::INFINITY; m];
    let mut curr = vec![f64::INFINITY; m];
    for (i, &pi) in p.iter().enumerate() {
        let (lo, hi) = band_columns(i, m, band);
        curr.fill(f64::INFINITY);
        for j in lo..hi {
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let diag = if i > 0 && j > 0 { prev[j - 1] } else { f64::INFINITY };
                let left = if j > 0 { curr[j - 1] } else { f64::INFINITY };
                let up = if i > 0 { prev[j] } else { f64::INFINITY };
                diag.min(left).min(up)
            };
            curr[j] = cost(pi, q[j]) + best;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[m - 1]
}

/// Optimal warping path as `(index into p, index into q)` pairs from `(0, 0)`
/// to the last cell, together with its cost.
///
/// Ties between predecessors are resolved diagonal first, then advancing
/// `p` only, then advancing `q` only.
pub fn dtw_path(p: &[f64], q: &[f64], band: Option<usize>) -> Result<(f64, Vec<(usize, usize)>)> {
    check_warp_inputs(p, q, band)?;
    Ok(dtw_path_unchecked(p, q, band))
}

pub(crate) fn dtw_path_unchecked(p: &[f64], q: &[f64], band: Option<usize>) -> (f64, Vec<(usize, usize)>) {
    let (n, m) = (p.len(), q.len());
    let mut acc = vec![f64::INFINITY; n * m];
    let at = |i: usize, j: usize| i * m + j;
    for i in 0..n {
        let (lo, hi) = band_columns(i, m, band);
        for j in lo..hi {
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let diag = if i > 0 && j > 0 { acc[at(i - 1, j - 1)] } else { f64::INFINITY };
                let left = if j > 0 { acc[at(i, j - 1)] } else { f64::INFINITY };
                let up = if i > 0 { acc[at(i - 1, j)] } else { f64::INFINITY };
                diag.min(left).min(up)
            };
            acc[at(i, j)] = cost(p[i], q[j]) + best;
        }
    }

    let mut path = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n - 1, m - 1);
    path.push((i, j));
    while i > 0 || j > 0 {
        (i, j) = if i == 0 {
            (0, j - 1)
        } else if j == 0 {
            (i - 1, 0)
        } else {
            let diag = acc[at(i - 1, j - 1)];
            let up = acc[at(i - 1, j)];
            let left = acc[at(i, j - 1)];
            if diag <= up && diag <= left {
                (i - 1, j - 1)
            } else if up <= left {
                (i - 1, j)
            } else {
                (i, j - 1)
            }
        };
        path.push((i, j));
    }
    path.reverse();
    (acc[at(n - 1, m - 1)], path)
}

/// Root of the summed squared first differences; zero exactly for constant series.
pub fn complexity_estimate(a: &[f64]) -> Result<f64> {
    if a.len() < 2 {
        return Err(Error::SeriesTooShort { required: 2, actual: a.len() });
    }
    Ok(complexity_estimate_unchecked(a))
}

pub(crate) fn complexity_estimate_unchecked(a: &[f64]) -> f64 {
    a.windows(2).map(|w| cost(w[0], w[1])).sum::<f64>().sqrt()
}

/// Ratio of the larger to the smaller complexity estimate, always >= 1.
pub fn correction_factor(p: &[f64], q: &[f64]) -> Result<f64> {
    let cp = complexity_estimate(p)?.max(COMPLEXITY_FLOOR);
    let cq = complexity_estimate(q)?.max(COMPLEXITY_FLOOR);
    Ok(cp.max(cq) / cp.min(cq))
}

/// DTW scaled by the complexity correction factor.
pub fn cidtw(p: &[f64], q: &[f64], band: Option<usize>) -> Result<f64> {
    let cf = correction_factor(p, q)?;
    Ok(dtw(p, q, band)? * cf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashMap;

    /// Memoised top-down evaluation of the DTW recurrence.
    fn dtw_recursive(p: &[f64], q: &[f64]) -> f64 {
        fn go(p: &[f64], q: &[f64], i: usize, j: usize, memo: &mut HashMap<(usize, usize), f64>) -> f64 {
            if let Some(v) = memo.get(&(i, j)) {
                return *v;
            }
            let d = (p[i] - q[j]) * (p[i] - q[j]);
            let v = if i == 0 && j == 0 {
                d
            } else {
                let mut best = f64::INFINITY;
                if i > 0 && j > 0 {
                    best = best.min(go(p, q, i - 1, j - 1, memo));
                }
                if j > 0 {
                    best = best.min(go(p, q, i, j - 1, memo));
                }
                if i > 0 {
                    best = best.min(go(p, q, i - 1, j, memo));
                }
                d + best
            };
            memo.insert((i, j), v);
            v
        }
        go(p, q, p.len() - 1, q.len() - 1, &mut HashMap::new())
    }

    /// Cost of every monotone warping path, by explicit enumeration.
    fn all_path_costs(p: &[f64], q: &[f64]) -> Vec<f64> {
        fn walk(p: &[f64], q: &[f64], i: usize, j: usize, acc: f64, out: &mut Vec<f64>) {
            let acc = acc + (p[i] - q[j]).powi(2);
            if i + 1 == p.len() && j + 1 == q.len() {
                out.push(acc);
                return;
            }
            if i + 1 < p.len() && j + 1 < q.len() {
                walk(p, q, i + 1, j + 1, acc, out);
            }
            if i + 1 < p.len() {
                walk(p, q, i + 1, j, acc, out);
            }
            if j + 1 < q.len() {
                walk(p, q, i, j + 1, acc, out);
            }
        }
        let mut out = Vec::new();
        walk(p, q, 0, 0, 0.0, &mut out);
        out
    }

    #[test]
    fn euclidean_examples() {
        assert_eq!(euclidean(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(euclidean(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(euclidean(&[1.0, 1.0, 1.0], &[2.0, 2.0, 2.0]).unwrap(), 3f64.sqrt());
        assert!(matches!(euclidean(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn dtw_examples() {
        assert_eq!(dtw(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], None).unwrap(), 0.0);
        assert_eq!(dtw(&[0.0], &[3.0], None).unwrap(), 9.0);
        let p = [0.0, 0.0, 1.0, 0.0];
        let q = [0.0, 1.0, 0.0, 0.0];
        let brute = all_path_costs(&p, &q).into_iter().fold(f64::INFINITY, f64::min);
        assert_eq!(brute, 0.0);
        assert_eq!(dtw(&p, &q, None).unwrap(), brute);
    }

    #[test]
    fn dtw_errors() {
        assert!(matches!(dtw(&[], &[1.0], None), Err(Error::SeriesTooShort { .. })));
        assert!(matches!(
            dtw(&[1.0, 2.0, 3.0], &[1.0], Some(1)),
            Err(Error::InfeasibleBand { .. })
        ));
        assert!(dtw(&[1.0, 2.0, 3.0], &[1.0], Some(2)).is_ok());
    }

    #[test]
    fn path_cost_matches_value_and_is_monotone() {
        let p = [0.0, 3.0, 1.0, 4.0, 1.0, 5.0];
        let q = [1.0, 0.0, 4.0, 4.0, 2.0];
        let (c, path) = dtw_path(&p, &q, None).unwrap();
        assert_eq!(c, dtw(&p, &q, None).unwrap());
        assert_eq!(path[0], (0, 0));
        assert_eq!(*path.last().unwrap(), (5, 4));
        for w in path.windows(2) {
            let (di, dj) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            assert!(di <= 1 && dj <= 1 && di + dj >= 1);
        }
        let along: f64 = path.iter().map(|&(i, j)| (p[i] - q[j]).powi(2)).sum();
        assert!((along - c).abs() < 1e-12);
    }

    #[test]
    fn complexity_examples() {
        assert_eq!(complexity_estimate(&[5.0, 5.0, 5.0, 5.0]).unwrap(), 0.0);
        assert_eq!(complexity_estimate(&[0.0, 1.0, 0.0]).unwrap(), 2f64.sqrt());
        assert_eq!(complexity_estimate(&[0.0, 1.0]).unwrap(), 1.0);
        assert!(complexity_estimate(&[1.0]).is_err());
    }

    #[test]
    fn cidtw_examples() {
        let p = [0.3, 1.7, 0.2, 2.5];
        assert_eq!(cidtw(&p, &p, None).unwrap(), 0.0);
        assert_eq!(cidtw(&[0.0, 1.0], &[0.0, 2.0], None).unwrap(), 2.0);

        let p = [0.0, 1.0, 0.0, 1.0];
        let q = [1.0, 0.0, 1.0, 0.0];
        assert_eq!(correction_factor(&p, &q).unwrap(), 1.0);
        let brute = all_path_costs(&p, &q).into_iter().fold(f64::INFINITY, f64::min);
        assert_eq!(cidtw(&p, &q, None).unwrap(), brute);
    }

    #[test]
    fn constant_series_have_unit_correction() {
        assert_eq!(correction_factor(&[2.0; 5], &[7.0; 5]).unwrap(), 1.0);
        assert_eq!(cidtw(&[2.0; 5], &[3.0; 5], None).unwrap(), 5.0);
        let cf = correction_factor(&[2.0; 3], &[0.0, 1.0, 0.0]).unwrap();
        assert!(cf.is_finite() && cf > 1e11);
    }

    #[test]
    fn warp_series_validates() {
        assert!(WarpSeries::new(vec![]).is_err());
        assert!(WarpSeries::new(vec![1.0, f64::NAN]).is_err());
        let w: WarpSeries = serde_json::from_str("[1.0, 2.5]").unwrap();
        assert_eq!(w.as_slice(), &[1.0, 2.5]);
        assert!(serde_json::from_str::<WarpSeries>("[]").is_err());
    }

    fn series(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-5.0f64..5.0, 1..=max_len)
    }

    proptest! {
        #[test]
        fn dp_matches_recursive_oracle(p in series(12), q in series(12)) {
            prop_assert_eq!(dtw(&p, &q, None).unwrap(), dtw_recursive(&p, &q));
        }

        #[test]
        fn dtw_is_symmetric(p in series(16), q in series(16)) {
            prop_assert_eq!(dtw(&p, &q, None).unwrap(), dtw(&q, &p, None).unwrap());
        }

        #[test]
        fn dtw_bounded_by_identity_path(pq in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..24)) {
            let (p, q): (Vec<f64>, Vec<f64>) = pq.into_iter().unzip();
            prop_assert!(dtw(&p, &q, None).unwrap() <= squared_euclidean(&p, &q).unwrap());
        }

        #[test]
        fn wide_band_equals_unbanded(p in series(14), q in series(14)) {
            let w = p.len().max(q.len()) - 1;
            prop_assert_eq!(dtw(&p, &q, Some(w)).unwrap(), dtw(&p, &q, None).unwrap());
        }

        #[test]
        fn narrow_band_never_beats_unbanded(p in series(14), q in series(14), extra in 0usize..4) {
            let w = p.len().abs_diff(q.len()) + extra;
            prop_assert!(dtw(&p, &q, Some(w)).unwrap() >= dtw(&p, &q, None).unwrap());
            let (c, _) = dtw_path(&p, &q, Some(w)).unwrap();
            prop_assert_eq!(c, dtw(&p, &q, Some(w)).unwrap());
        }

        #[test]
        fn cidtw_dominates_dtw(p in prop::collection::vec(-5.0f64..5.0, 2..16), q in prop::collection::vec(-5.0f64..5.0, 2..16)) {
            prop_assert!(cidtw(&p, &q, None).unwrap() >= dtw(&p, &q, None).unwrap());
        }
    }
}
