//! Row-similarity graph shared by the graph-based selectors.

use nalgebra::{DMatrix, DVector};

/// Symmetric k-nearest-neighbor graph with Gaussian weights
/// `exp(-d² / (2h²))`, `h` = mean pairwise Euclidean distance between rows.
#[derive(Debug, Clone)]
pub struct KnnGraph {
    pub weights: DMatrix<f64>,
    pub degree: DVector<f64>,
}

pub fn default_k(rows: usize) -> usize {
    5.min(rows.saturating_sub(1)).max(1)
}

fn distances(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    DMatrix::from_fn(n, n, |i, j| (x.row(i) - x.row(j)).norm())
}

impl KnnGraph {
    pub fn build(x: &DMatrix<f64>, k: usize) -> Self {
        let n = x.nrows();
        let d = distances(x);
        let pairs = n * n.saturating_sub(1);
        let h = if pairs > 0 {
            d.sum() / pairs as f64
        } else {
            0.0
        };
        let k = k.min(n.saturating_sub(1));
        let mut adjacent = DMatrix::from_element(n, n, false);
        for i in 0..n {
            let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            order.sort_by(|&a, &b| d[(i, a)].total_cmp(&d[(i, b)]).then(a.cmp(&b)));
            for &j in order.iter().take(k) {
                adjacent[(i, j)] = true;
                adjacent[(j, i)] = true;
            }
        }
        let weights = DMatrix::from_fn(n, n, |i, j| {
            if !adjacent[(i, j)] {
                0.0
            } else if h > 0.0 {
                (-d[(i, j)].powi(2) / (2.0 * h * h)).exp()
            } else {
                1.0
            }
        });
        let degree = DVector::from_fn(n, |i, _| weights.row(i).sum());
        Self { weights, degree }
    }

    /// `L = D − W`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.degree) - &self.weights
    }

    /// `I − D^{-1/2} W D^{-1/2}`.
    pub fn normalized_laplacian(&self) -> DMatrix<f64> {
        let n = self.degree.len();
        let inv = self
            .degree
            .map(|d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 });
        DMatrix::from_fn(n, n, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            id - inv[i] * self.weights[(i, j)] * inv[j]
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_is_symmetric_with_zero_diagonal() {
        let x = DMatrix::from_fn(7, 3, |i, j| ((i * 5 + j * 3) % 7) as f64);
        let g = KnnGraph::build(&x, 2);
        assert_eq!(g.weights, g.weights.transpose());
        assert!((0..7).all(|i| g.weights[(i, i)] == 0.0));
        assert!(g.degree.iter().all(|&d| d > 0.0));
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        let x = DMatrix::from_fn(6, 2, |i, j| (i + j * i) as f64);
        let l = KnnGraph::build(&x, 3).laplacian();
        for i in 0..6 {
            assert!(l.row(i).sum().abs() < 1e-12);
        }
    }
}
