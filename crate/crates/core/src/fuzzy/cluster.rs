//! Subtractive clustering on data scaled to the unit hypercube.

use serde::{Deserialize, Serialize};

/// Penalty on consequent slopes. Without it the global fit has more
/// unknowns than rows once a dozen rules meet a few dozen inputs, and
/// held-out images extrapolate far outside the grid.
pub const DEFAULT_RIDGE: f64 = 0.01;

/// Rule genesis settings: subtractive clustering radii and thresholds plus
/// the consequent penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterParams {
    pub radius: f64,
    pub squash: f64,
    pub accept: f64,
    pub reject: f64,
    /// Ridge penalty on the consequent slopes; 0 gives plain least squares.
    pub ridge: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            radius: 0.5,
            squash: 1.25,
            accept: 0.5,
            reject: 0.15,
            ridge: DEFAULT_RIDGE,
        }
    }
}

/// Per-dimension `(min, range)`; a zero range is reported as 1.
pub fn bounds(rows: &[Vec<f64>]) -> Vec<(f64, f64)> {
    let dim = rows[0].len();
    (0..dim)
        .map(|d| {
            let (lo, hi) = rows
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                    (lo.min(r[d]), hi.max(r[d]))
                });
            let range = hi - lo;
            (lo, if range > 0.0 { range } else { 1.0 })
        })
        .collect()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices of the rows chosen as cluster centers, in acceptance order.
pub fn subtractive_clustering(rows: &[Vec<f64>], params: &ClusterParams) -> Vec<usize> {
    if rows.is_empty() {
        return Vec::new();
    }
    let b = bounds(rows);
    let x: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            r.iter()
                .zip(&b)
                .map(|(v, (lo, range))| (v - lo) / range)
                .collect()
        })
        .collect();
    let n = x.len();
    let alpha = 4.0 / (params.radius * params.radius);
    let rb = params.squash * params.radius;
    let beta = 4.0 / (rb * rb);
    let mut potential: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| (-alpha * dist2(&x[i], &x[j])).exp()).sum())
        .collect();
    let argmax = |p: &[f64]| {
        p.iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
                if v > best.1 {
                    (i, v)
                } else {
                    best
                }
            })
    };
    let (first, p_first) = argmax(&potential);
    let mut centers = vec![first];
    let subtract = |potential: &mut Vec<f64>, c: usize, pc: f64| {
        for (i, p) in potential.iter_mut().enumerate() {
            *p -= pc * (-beta * dist2(&x[i], &x[c])).exp();
        }
    };
    subtract(&mut potential, first, p_first);
    loop {
        let (k, pk) = argmax(&potential);
        if pk <= 0.0 {
            break;
        }
        let ratio = pk / p_first;
        let accept = if ratio > params.accept {
            true
        } else if ratio < params.reject {
            break;
        } else {
            let dmin = centers
                .iter()
                .map(|&c| dist2(&x[k], &x[c]).sqrt())
                .fold(f64::INFINITY, f64::min);
            dmin / params.radius + ratio >= 1.0
        };
        if accept {
            centers.push(k);
            subtract(&mut potential, k, pk);
        } else {
            potential[k] = 0.0;
        }
    }
    centers
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_row_gives_one_center() {
        let rows = vec![vec![0.3, 0.7]];
        assert_eq!(
            subtractive_clustering(&rows, &ClusterParams::default()),
            vec![0]
        );
    }

    #[test]
    fn two_blobs_give_two_centers() {
        let mut rows = Vec::new();
        for i in 0..5 {
            let e = i as f64 * 0.01;
            rows.push(vec![0.0 + e, 0.0 - e]);
            rows.push(vec![10.0 + e, 10.0 - e]);
        }
        let c = subtractive_clustering(&rows, &ClusterParams::default());
        assert_eq!(c.len(), 2);
        assert!(rows[c[0]][0] < 1.0 || rows[c[1]][0] < 1.0);
        assert!(rows[c[0]][0] > 9.0 || rows[c[1]][0] > 9.0);
    }

    #[test]
    fn duplicates_collapse() {
        let rows = vec![vec![1.0, 2.0]; 6];
        assert_eq!(
            subtractive_clustering(&rows, &ClusterParams::default()).len(),
            1
        );
    }
}
