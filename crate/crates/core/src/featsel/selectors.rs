//! The six column selectors.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::graph::{default_k, KnnGraph};
use super::{drop_correlated, standardize, SIMILARITY_TAU};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Correlation,
    FeatureSimilarity,
    Laplacian,
    Spectral,
    MultiCluster,
    Greedy,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Correlation,
        Method::FeatureSimilarity,
        Method::Laplacian,
        Method::Spectral,
        Method::MultiCluster,
        Method::Greedy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Correlation => "correlation",
            Method::FeatureSimilarity => "feature_similarity",
            Method::Laplacian => "laplacian",
            Method::Spectral => "spectral",
            Method::MultiCluster => "multi_cluster",
            Method::Greedy => "greedy",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == s)
    }
}

/// Columns picked by one method, as indices into a matrix `universe` columns wide.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectorResult {
    pub method: Method,
    pub columns: Vec<usize>,
    pub universe: usize,
}

/// Tunables of the graph-based selectors. `None` picks the defaults
/// (`k = min(5, L−1)`, `K = min(5, L−1)`, ridge `0.01·L`).
/// `cap_vote` limits the vote survivors to `N_T2` columns.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectorParams {
    pub k: Option<usize>,
    pub clusters: Option<usize>,
    pub ridge: Option<f64>,
    #[serde(default)]
    pub cap_vote: bool,
}

impl SelectorParams {
    fn k(&self, rows: usize) -> usize {
        self.k.unwrap_or_else(|| default_k(rows)).clamp(1, rows - 1)
    }

    fn clusters(&self, rows: usize) -> usize {
        self.clusters
            .unwrap_or_else(|| default_k(rows))
            .clamp(1, rows - 1)
    }

    fn ridge(&self, rows: usize) -> f64 {
        self.ridge.unwrap_or(0.01 * rows as f64)
    }
}

pub fn run_selector(method: Method, f: &DMatrix<f64>, m: usize) -> Result<SelectorResult> {
    run_selector_with(method, f, m, &SelectorParams::default())
}

pub fn run_selector_with(
    method: Method,
    f: &DMatrix<f64>,
    m: usize,
    params: &SelectorParams,
) -> Result<SelectorResult> {
    let width = f.ncols();
    if m > width {
        return Err(Error::contract(format!(
            "cannot select {m} of {width} columns"
        )));
    }
    if f.nrows() < 2 {
        return Err(Error::contract("selectors need at least two rows"));
    }
    let columns = if m == 0 {
        Vec::new()
    } else {
        let x = standardize(f);
        let rows = x.nrows();
        match method {
            Method::Correlation => correlation_columns(f, m)?,
            Method::FeatureSimilarity => feature_similarity(&x, m),
            Method::Laplacian => ascending(&laplacian_scores(&x, params.k(rows)), m),
            Method::Spectral => ascending(&spectral_scores(&x, params.k(rows)), m),
            Method::MultiCluster => {
                let s = multi_cluster_scores(
                    &x,
                    params.k(rows),
                    params.clusters(rows),
                    params.ridge(rows),
                );
                let neg: Vec<f64> = s.iter().map(|v| -v).collect();
                ascending(&neg, m)
            }
            Method::Greedy => greedy_path(&x, m).columns,
        }
    };
    Ok(SelectorResult {
        method,
        columns,
        universe: width,
    })
}

/// Indices of the `m` smallest scores; ties go to the lower index.
fn ascending(scores: &[f64], m: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    idx.truncate(m);
    idx
}

/// The left-to-right 90% scan, then padded with the earliest dropped
/// columns (or truncated) to exactly `m`.
fn correlation_columns(f: &DMatrix<f64>, m: usize) -> Result<Vec<usize>> {
    let mut kept = drop_correlated(f, SIMILARITY_TAU)?;
    if kept.len() < m {
        let extra: Vec<usize> = (0..f.ncols()).filter(|c| !kept.contains(c)).collect();
        kept.extend(extra.into_iter().take(m - kept.len()));
    }
    kept.truncate(m);
    Ok(kept)
}

/// Smallest eigenvalue of the 2×2 covariance of two columns.
pub fn max_information_compression(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        vx += (a - mx) * (a - mx) / n;
        vy += (b - my) * (b - my) / n;
        cxy += (a - mx) * (b - my) / n;
    }
    let rho2 = if vx > 0.0 && vy > 0.0 {
        (cxy * cxy / (vx * vy)).min(1.0)
    } else {
        0.0
    };
    let s = vx + vy;
    let disc = (s * s - 4.0 * vx * vy * (1.0 - rho2)).max(0.0);
    (0.5 * (s - disc.sqrt())).max(0.0)
}

/// Repeatedly removes the higher-indexed member of the pair with the
/// smallest compression index until `m` columns remain.
fn feature_similarity(x: &DMatrix<f64>, m: usize) -> Vec<usize> {
    let n = x.ncols();
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|j| x.column(j).iter().copied().collect())
        .collect();
    let mut lambda = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = max_information_compression(&cols[i], &cols[j]);
            lambda[(i, j)] = v;
            lambda[(j, i)] = v;
        }
    }
    let mut alive: Vec<usize> = (0..n).collect();
    while alive.len() > m {
        let mut best = (f64::INFINITY, 0usize, 0usize);
        for (a, &i) in alive.iter().enumerate() {
            for &j in &alive[a + 1..] {
                if lambda[(i, j)] < best.0 {
                    best = (lambda[(i, j)], i, j);
                }
            }
        }
        let drop = best.2;
        alive.retain(|&c| c != drop);
    }
    alive
}

/// Laplacian score `f̃ᵀLf̃ / f̃ᵀDf̃` per column (smaller is better);
/// constant columns score `+∞`.
pub fn laplacian_scores(x: &DMatrix<f64>, k: usize) -> Vec<f64> {
    let g = KnnGraph::build(x, k);
    let l = g.laplacian();
    let dsum = g.degree.sum();
    (0..x.ncols())
        .map(|j| {
            let f = x.column(j).into_owned();
            let mu = f.dot(&g.degree) / dsum;
            let ft = f.add_scalar(-mu);
            let den = ft.component_mul(&ft).dot(&g.degree);
            if den <= 1e-12 * dsum {
                f64::INFINITY
            } else {
                (ft.transpose() * &l * &ft)[(0, 0)] / den
            }
        })
        .collect()
}

/// Separability score over all non-trivial eigenvectors of the normalized
/// Laplacian, `f̂ᵀ𝓛f̂ / (1 − (f̂ᵀξ₁)²)` with `f̂ = D^{1/2}f / ‖D^{1/2}f‖`
/// (smaller is better).
pub fn spectral_scores(x: &DMatrix<f64>, k: usize) -> Vec<f64> {
    let g = KnnGraph::build(x, k);
    let nl = g.normalized_laplacian();
    let sqrt_d = g.degree.map(f64::sqrt);
    let xi1 = sqrt_d.normalize();
    (0..x.ncols())
        .map(|j| {
            let fd = x.column(j).component_mul(&sqrt_d);
            let norm = fd.norm();
            if norm <= 1e-12 {
                return f64::INFINITY;
            }
            let fh = fd / norm;
            let den = 1.0 - fh.dot(&xi1).powi(2);
            if den <= 1e-12 {
                f64::INFINITY
            } else {
                (fh.transpose() * &nl * &fh)[(0, 0)] / den
            }
        })
        .collect()
}

/// Eigenpairs sorted by ascending eigenvalue (ties by original position).
fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .total_cmp(&eig.eigenvalues[b])
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = eig.eigenvectors.select_columns(&order);
    (values, vectors)
}

/// Maximum absolute ridge coefficient of each column when regressing the
/// `clusters` smallest non-trivial spectral-embedding vectors on `x`.
pub fn multi_cluster_scores(x: &DMatrix<f64>, k: usize, clusters: usize, ridge: f64) -> Vec<f64> {
    let g = KnnGraph::build(x, k);
    let (_, vecs) = sorted_eigen(g.normalized_laplacian());
    let inv_sqrt = g.degree.map(|d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 });
    let n = x.ncols();
    let gram = x.transpose() * x + DMatrix::identity(n, n) * ridge.max(1e-12);
    let chol = gram
        .cholesky()
        .expect("ridge-regularized Gram matrix is positive definite");
    let mut score = vec![0.0f64; n];
    for c in 1..=clusters.min(vecs.ncols() - 1) {
        let y: DVector<f64> = vecs.column(c).component_mul(&inv_sqrt);
        let coef = chol.solve(&(x.transpose() * y));
        for (s, v) in score.iter_mut().zip(coef.iter()) {
            *s = s.max(v.abs());
        }
    }
    score
}

/// Column order and squared Frobenius residual after each greedy step.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyPath {
    pub columns: Vec<usize>,
    pub residual: Vec<f64>,
}

/// Greedy column-subset selection: each step adds the column whose
/// residual direction removes the most energy from the residual matrix,
/// then deflates that direction.
pub fn greedy_path(x: &DMatrix<f64>, m: usize) -> GreedyPath {
    let n = x.ncols();
    let mut e = x.clone();
    let scale = x.norm_squared().max(1.0);
    let mut chosen: Vec<usize> = Vec::with_capacity(m);
    let mut residual = Vec::with_capacity(m);
    while chosen.len() < m.min(n) {
        let mut best: Option<(f64, usize)> = None;
        for l in (0..n).filter(|l| !chosen.contains(l)) {
            let w = e.column(l);
            let w2 = w.norm_squared();
            let gain = if w2 > 1e-12 * scale {
                (e.transpose() * w).norm_squared() / w2
            } else {
                0.0
            };
            if best.is_none_or(|(g, _)| gain > g) {
                best = Some((gain, l));
            }
        }
        let (_, l) = best.expect("at least one unchosen column");
        let w: DVector<f64> = e.column(l).into_owned();
        let w2 = w.norm_squared();
        if w2 > 1e-12 * scale {
            let proj = &w * (w.transpose() * &e) / w2;
            e -= proj;
        }
        chosen.push(l);
        residual.push(e.norm_squared());
    }
    GreedyPath {
        columns: chosen,
        residual,
    }
}
