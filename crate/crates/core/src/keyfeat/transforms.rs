//! Window transforms: 2-D DCT, Haar approximation band, gradient magnitude.

use nalgebra::DMatrix;

use crate::metrics::GrayImage;

/// Extracts the `z×z` window centered on `(cx, cy)`.
///
/// The window is shifted to stay inside the image; when the image itself is
/// narrower than `z` along an axis, the window spans that whole axis.
pub fn feature_window(img: &GrayImage, cx: usize, cy: usize, z: usize) -> DMatrix<f64> {
    let span = |c: usize, len: usize| -> (usize, usize) {
        if len <= z {
            return (0, len);
        }
        let start = c.saturating_sub(z / 2).min(len - z);
        (start, z)
    };
    let (x0, w) = span(cx, img.width());
    let (y0, h) = span(cy, img.height());
    DMatrix::from_fn(h, w, |r, c| img.get(x0 + c, y0 + r))
}

fn dct_basis(n: usize) -> DMatrix<f64> {
    let nf = n as f64;
    DMatrix::from_fn(n, n, |k, i| {
        let alpha = if k == 0 {
            (1.0 / nf).sqrt()
        } else {
            (2.0 / nf).sqrt()
        };
        alpha * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2.0 * nf)).cos()
    })
}

/// Orthonormal 2-D type-II DCT.
pub fn dct2(m: &DMatrix<f64>) -> DMatrix<f64> {
    let rows = dct_basis(m.nrows());
    let cols = dct_basis(m.ncols());
    &rows * m * cols.transpose()
}

/// Single-level orthonormal Haar LL band. Odd sizes replicate the last row/column.
pub fn haar_approximation(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = m.shape();
    let at = |i: usize, j: usize| m[(i.min(r - 1), j.min(c - 1))];
    DMatrix::from_fn(r.div_ceil(2), c.div_ceil(2), |i, j| {
        let (i2, j2) = (2 * i, 2 * j);
        0.5 * (at(i2, j2) + at(i2, j2 + 1) + at(i2 + 1, j2) + at(i2 + 1, j2 + 1))
    })
}

/// Central-difference gradient magnitude with replicated borders.
pub fn gradient_magnitude(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = m.shape();
    let at = |i: isize, j: isize| {
        m[(
            i.clamp(0, r as isize - 1) as usize,
            j.clamp(0, c as isize - 1) as usize,
        )]
    };
    DMatrix::from_fn(r, c, |i, j| {
        let (i, j) = (i as isize, j as isize);
        let gx = 0.5 * (at(i, j + 1) - at(i, j - 1));
        let gy = 0.5 * (at(i + 1, j) - at(i - 1, j));
        (gx * gx + gy * gy).sqrt()
    })
}
