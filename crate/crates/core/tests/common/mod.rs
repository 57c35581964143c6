//! Independent oracles shared by the integration tests and the acceptance
//! suite. Only image and mask constructors come from the library.
#![allow(dead_code)]

use nalgebra::DMatrix;
use scefis_core::metrics::{BinaryMask, GrayImage};

/// Columns to zero mean and unit population sd; constant columns to zero.
pub fn zscore(f: &DMatrix<f64>) -> DMatrix<f64> {
    let n = f.nrows() as f64;
    DMatrix::from_fn(f.nrows(), f.ncols(), |i, j| {
        let col = f.column(j);
        let mean = col.sum() / n;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        if col.iter().all(|&v| v == col[0]) {
            0.0
        } else {
            (f[(i, j)] - mean) / sd
        }
    })
}

/// Independent Laplacian score: symmetric kNN graph built by brute force,
/// score = ½ Σ_ij (f_i − f_j)² S_ij / Σ_i (f_i − μ)² d_i.
pub fn laplacian_oracle(f: &DMatrix<f64>, k: usize) -> Vec<f64> {
    let x = zscore(f);
    let n = x.nrows();
    let dist = |i: usize, j: usize| -> f64 {
        (0..x.ncols())
            .map(|c| (x[(i, c)] - x[(j, c)]).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += dist(i, j);
            }
        }
    }
    let h = total / (n * (n - 1)) as f64;
    let mut nbr = vec![vec![false; n]; n];
    for i in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (dist(i, j), j))
            .collect();
        others.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for &(_, j) in others.iter().take(k) {
            nbr[i][j] = true;
            nbr[j][i] = true;
        }
    }
    let s = |i: usize, j: usize| {
        if nbr[i][j] {
            (-dist(i, j).powi(2) / (2.0 * h * h)).exp()
        } else {
            0.0
        }
    };
    let d: Vec<f64> = (0..n).map(|i| (0..n).map(|j| s(i, j)).sum()).collect();
    (0..x.ncols())
        .map(|c| {
            let f: Vec<f64> = (0..n).map(|i| x[(i, c)]).collect();
            let mu = f.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>() / d.iter().sum::<f64>();
            let mut num = 0.0;
            for i in 0..n {
                for j in 0..n {
                    num += 0.5 * (f[i] - f[j]).powi(2) * s(i, j);
                }
            }
            let den: f64 = f.iter().zip(&d).map(|(a, b)| (a - mu).powi(2) * b).sum();
            num / den
        })
        .collect()
}

/// Residual ‖A − A_S (A_Sᵀ A_S)⁻¹ A_Sᵀ A‖²_F by explicit normal equations.
pub fn projection_residual(a: &DMatrix<f64>, cols: &[usize]) -> f64 {
    let s = a.select_columns(cols);
    let gram = s.transpose() * &s;
    let inv = gram.try_inverse().expect("chosen columns are independent");
    let p = &s * inv * s.transpose();
    (a - p * a).norm_squared()
}

pub fn toy(seed: u64) -> DMatrix<f64> {
    let mut state = seed
        .wrapping_mul(6364136223846793005)
        .wrapping_add(1442695040888963407);
    DMatrix::from_fn(6, 8, |_, _| {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    })
}

pub fn lcg_image(w: usize, h: usize, seed: u64) -> GrayImage {
    let mut s = seed.wrapping_add(0x9E3779B97F4A7C15);
    GrayImage::from_fn(w, h, |_, _| {
        s = s
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((s >> 40) % 256) as f64 / 255.0
    })
}

/// Independent binary STAPLE written per pixel with plain products.
pub fn staple_oracle(masks: &[BinaryMask]) -> BinaryMask {
    let n = masks[0].data().len();
    let r = masks.len();
    let f = masks.iter().map(|m| m.count()).sum::<usize>() as f64 / (n * r) as f64;
    let mut p = vec![0.99999; r];
    let mut q = vec![0.99999; r];
    let mut w = vec![0.0; n];
    let mut prev = f64::NEG_INFINITY;
    for _ in 0..100 {
        let mut ll = 0.0;
        for i in 0..n {
            let mut a = f;
            let mut b = 1.0 - f;
            for j in 0..r {
                let d = masks[j].data()[i];
                a *= if d { p[j] } else { 1.0 - p[j] };
                b *= if d { 1.0 - q[j] } else { q[j] };
            }
            w[i] = a / (a + b);
            ll += (a + b).ln();
        }
        for j in 0..r {
            let d = masks[j].data();
            let sw: f64 = w.iter().sum();
            let sv: f64 = w.iter().map(|x| 1.0 - x).sum();
            let tp: f64 = (0..n).filter(|&i| d[i]).map(|i| w[i]).sum();
            let tn: f64 = (0..n).filter(|&i| !d[i]).map(|i| 1.0 - w[i]).sum();
            if sw > 0.0 {
                p[j] = tp / sw;
            }
            if sv > 0.0 {
                q[j] = tn / sv;
            }
        }
        if (ll - prev).abs() < 1e-6 {
            break;
        }
        prev = ll;
    }
    let (width, height) = masks[0].dims();
    let mut out = BinaryMask::empty(width, height);
    for (o, x) in out.data_mut().iter_mut().zip(&w) {
        *o = *x >= 0.5;
    }
    out
}
