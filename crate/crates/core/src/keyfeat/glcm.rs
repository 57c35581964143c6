//! Gray-level co-occurrence statistics.
//!
//! Matrices are quantized to eight levels over their own `[min, max]`,
//! pairs are counted at distance one in both orders (symmetric) and the
//! counts are normalized to probabilities. Contrast and homogeneity use
//! gray levels rescaled to `[0, 1]`.

use nalgebra::DMatrix;

pub const GLCM_LEVELS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Deg0,
    Deg45,
    Deg90,
    Deg135,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::Deg0,
        Direction::Deg45,
        Direction::Deg90,
        Direction::Deg135,
    ];

    /// `(row, col)` step of the second pixel of a pair.
    fn offset(self) -> (isize, isize) {
        match self {
            Direction::Deg0 => (0, 1),
            Direction::Deg45 => (-1, 1),
            Direction::Deg90 => (-1, 0),
            Direction::Deg135 => (-1, -1),
        }
    }

    pub fn degrees(self) -> u32 {
        match self {
            Direction::Deg0 => 0,
            Direction::Deg45 => 45,
            Direction::Deg90 => 90,
            Direction::Deg135 => 135,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlcmStats {
    pub contrast: f64,
    pub correlation: f64,
    pub energy: f64,
    pub homogeneity: f64,
}

impl GlcmStats {
    pub fn to_array(self) -> [f64; 4] {
        [
            self.contrast,
            self.correlation,
            self.energy,
            self.homogeneity,
        ]
    }
}

pub fn quantize(m: &DMatrix<f64>, levels: usize) -> DMatrix<usize> {
    let (lo, hi) = m
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = hi - lo;
    m.map(|v| {
        if span <= 0.0 || !span.is_finite() {
            0
        } else {
            (((v - lo) / span * levels as f64).floor() as usize).min(levels - 1)
        }
    })
}

/// Symmetric, normalized co-occurrence matrix. `None` when no pair fits.
pub fn cooccurrence(q: &DMatrix<usize>, levels: usize, dir: Direction) -> Option<DMatrix<f64>> {
    let (dr, dc) = dir.offset();
    let (rows, cols) = q.shape();
    let mut p = DMatrix::zeros(levels, levels);
    let mut total = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let (r2, c2) = (r as isize + dr, c as isize + dc);
            if r2 < 0 || c2 < 0 || r2 >= rows as isize || c2 >= cols as isize {
                continue;
            }
            let a = q[(r, c)];
            let b = q[(r2 as usize, c2 as usize)];
            p[(a, b)] += 1.0;
            p[(b, a)] += 1.0;
            total += 2.0;
        }
    }
    if total == 0.0 {
        return None;
    }
    Some(p / total)
}

pub fn glcm_stats(p: &DMatrix<f64>) -> GlcmStats {
    let levels = p.nrows();
    let scale = (levels.max(2) - 1) as f64;
    let g = |i: usize| i as f64 / scale;
    let mut mu = 0.0;
    for i in 0..levels {
        for j in 0..levels {
            mu += g(i) * p[(i, j)];
        }
    }
    let mut var = 0.0;
    let (mut contrast, mut energy, mut homogeneity, mut cov) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..levels {
        for j in 0..levels {
            let pij = p[(i, j)];
            let d = g(i) - g(j);
            contrast += d * d * pij;
            energy += pij * pij;
            homogeneity += pij / (1.0 + d.abs());
            var += (g(i) - mu).powi(2) * pij;
            cov += (g(i) - mu) * (g(j) - mu) * pij;
        }
    }
    let correlation = if var > 1e-15 { cov / var } else { 0.0 };
    GlcmStats {
        contrast,
        correlation,
        energy,
        homogeneity,
    }
}

/// GLCM statistics of `m` along `dir`; a matrix without any pair behaves
/// like a constant one.
pub fn texture(m: &DMatrix<f64>, dir: Direction) -> GlcmStats {
    let q = quantize(m, GLCM_LEVELS);
    match cooccurrence(&q, GLCM_LEVELS, dir) {
        Some(p) => glcm_stats(&p),
        None => GlcmStats {
            contrast: 0.0,
            correlation: 0.0,
            energy: 1.0,
            homogeneity: 1.0,
        },
    }
}
