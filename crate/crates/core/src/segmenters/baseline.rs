//! Classical thresholding baselines on a 256-bin histogram.
//!
//! The global methods pick a split level `k` (class 0 = bins `0..=k`); the
//! returned threshold sits midway between `k` and the next occupied bin so
//! that applying it reproduces the split exactly.

use serde::{Deserialize, Serialize};

use super::threshold::{largest_component, threshold_raw};
use super::Polarity;
use crate::error::{Error, Result};
use crate::metrics::{BinaryMask, GrayImage};

const BINS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    Otsu,
    Kittler,
    Huang,
    Niblack,
}

impl Baseline {
    pub const ALL: [Baseline; 4] = [
        Baseline::Otsu,
        Baseline::Kittler,
        Baseline::Huang,
        Baseline::Niblack,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::Otsu => "otsu",
            Baseline::Kittler => "kittler",
            Baseline::Huang => "huang",
            Baseline::Niblack => "niblack",
        }
    }

    pub fn parse(s: &str) -> Option<Baseline> {
        Baseline::ALL.into_iter().find(|b| b.name() == s)
    }
}

fn histogram(img: &GrayImage) -> [f64; BINS] {
    let mut h = [0.0; BINS];
    for &v in img.data() {
        h[((v * 255.0).round() as usize).min(BINS - 1)] += 1.0;
    }
    h
}

fn occupied_range(h: &[f64; BINS]) -> Result<(usize, usize)> {
    let lo = h.iter().position(|&c| c > 0.0).unwrap_or(0);
    let hi = h.iter().rposition(|&c| c > 0.0).unwrap_or(0);
    if lo == hi {
        return Err(Error::contract(
            "global threshold is undefined on a constant image",
        ));
    }
    Ok((lo, hi))
}

/// Threshold in `[0, 1]` between split level `k` and the next occupied bin.
fn split_threshold(h: &[f64; BINS], k: usize) -> f64 {
    let next = (k + 1..BINS).find(|&i| h[i] > 0.0).unwrap_or(k + 1);
    (k + next) as f64 / 2.0 / 255.0
}

/// Best split by maximizing `score(k)` over `lo..hi`; ties keep the first.
fn best_split(lo: usize, hi: usize, mut score: impl FnMut(usize) -> f64) -> usize {
    let mut best = (f64::NEG_INFINITY, lo);
    for k in lo..hi {
        let s = score(k);
        if s > best.0 {
            best = (s, k);
        }
    }
    best.1
}

struct Moments {
    count: [f64; BINS + 1],
    sum: [f64; BINS + 1],
    sq: [f64; BINS + 1],
}

impl Moments {
    fn new(h: &[f64; BINS]) -> Self {
        let mut m = Moments {
            count: [0.0; BINS + 1],
            sum: [0.0; BINS + 1],
            sq: [0.0; BINS + 1],
        };
        for i in 0..BINS {
            let g = i as f64;
            m.count[i + 1] = m.count[i] + h[i];
            m.sum[i + 1] = m.sum[i] + h[i] * g;
            m.sq[i + 1] = m.sq[i] + h[i] * g * g;
        }
        m
    }

    /// (count, mean, variance) of bins `a..b`.
    fn class(&self, a: usize, b: usize) -> (f64, f64, f64) {
        let n = self.count[b] - self.count[a];
        if n <= 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let mean = (self.sum[b] - self.sum[a]) / n;
        let var = ((self.sq[b] - self.sq[a]) / n - mean * mean).max(0.0);
        (n, mean, var)
    }
}

/// Between-class variance maximizer.
pub fn otsu_threshold(img: &GrayImage) -> Result<f64> {
    let h = histogram(img);
    let (lo, hi) = occupied_range(&h)?;
    let m = Moments::new(&h);
    let total = m.count[BINS];
    let k = best_split(lo, hi, |k| {
        let (n0, m0, _) = m.class(0, k + 1);
        let (n1, m1, _) = m.class(k + 1, BINS);
        n0 * n1 * (m0 - m1).powi(2) / (total * total)
    });
    Ok(split_threshold(&h, k))
}

/// Minimum-error criterion with Gaussian class models. A variance floor of
/// one twelfth of a bin squared (uniform quantization noise) keeps
/// single-level classes finite.
pub fn kittler_threshold(img: &GrayImage) -> Result<f64> {
    let h = histogram(img);
    let (lo, hi) = occupied_range(&h)?;
    let m = Moments::new(&h);
    let total = m.count[BINS];
    let k = best_split(lo, hi, |k| {
        let (n0, _, v0) = m.class(0, k + 1);
        let (n1, _, v1) = m.class(k + 1, BINS);
        let (p0, p1) = (n0 / total, n1 / total);
        let (s0, s1) = ((v0 + 1.0 / 12.0).sqrt(), (v1 + 1.0 / 12.0).sqrt());
        let j = 1.0 + 2.0 * (p0 * s0.ln() + p1 * s1.ln()) - 2.0 * (p0 * p0.ln() + p1 * p1.ln());
        -j
    });
    Ok(split_threshold(&h, k))
}

/// Fuzzy-entropy minimizer with membership `1 / (1 + |g − μ_class| / C)`.
pub fn huang_threshold(img: &GrayImage) -> Result<f64> {
    let h = histogram(img);
    let (lo, hi) = occupied_range(&h)?;
    let m = Moments::new(&h);
    let c = (hi - lo) as f64;
    let total = m.count[BINS];
    let entropy = |mu: f64| {
        if mu <= 0.0 || mu >= 1.0 {
            0.0
        } else {
            -mu * mu.ln() - (1.0 - mu) * (1.0 - mu).ln()
        }
    };
    let k = best_split(lo, hi, |k| {
        let (_, m0, _) = m.class(0, k + 1);
        let (_, m1, _) = m.class(k + 1, BINS);
        let e: f64 = (lo..=hi)
            .filter(|&g| h[g] > 0.0)
            .map(|g| {
                let centre = if g <= k { m0 } else { m1 };
                h[g] * entropy(1.0 / (1.0 + (g as f64 - centre).abs() / c))
            })
            .sum();
        -e / total
    });
    Ok(split_threshold(&h, k))
}

/// Local mean and population sd over a `w×w` window truncated at the borders.
pub fn local_mean_sd(img: &GrayImage, w: usize) -> (Vec<f64>, Vec<f64>) {
    let (width, height) = img.dims();
    let stride = width + 1;
    let mut s1 = vec![0.0; stride * (height + 1)];
    let mut s2 = vec![0.0; stride * (height + 1)];
    for y in 0..height {
        for x in 0..width {
            let v = img.get(x, y);
            let i = (y + 1) * stride + x + 1;
            s1[i] = v + s1[i - 1] + s1[i - stride] - s1[i - stride - 1];
            s2[i] = v * v + s2[i - 1] + s2[i - stride] - s2[i - stride - 1];
        }
    }
    let r = w / 2;
    let mut mean = vec![0.0; width * height];
    let mut sd = vec![0.0; width * height];
    for y in 0..height {
        for x in 0..width {
            let (x0, x1) = (x.saturating_sub(r), (x + r + 1).min(width));
            let (y0, y1) = (y.saturating_sub(r), (y + r + 1).min(height));
            let n = ((x1 - x0) * (y1 - y0)) as f64;
            let rect = |s: &[f64]| {
                s[y1 * stride + x1] - s[y0 * stride + x1] - s[y1 * stride + x0]
                    + s[y0 * stride + x0]
            };
            let m = rect(&s1) / n;
            mean[y * width + x] = m;
            sd[y * width + x] = (rect(&s2) / n - m * m).max(0.0).sqrt();
        }
    }
    (mean, sd)
}

/// Per-pixel threshold `local mean + k · local sd`.
pub fn niblack_thresholds(img: &GrayImage, w: usize, k: f64) -> Vec<f64> {
    let (mean, sd) = local_mean_sd(img, w);
    mean.iter().zip(&sd).map(|(m, s)| m + k * s).collect()
}

pub const NIBLACK_WINDOW: usize = 15;
pub const NIBLACK_K: f64 = -0.2;

/// Runs a baseline and keeps the largest component when asked.
pub fn baseline_threshold(
    img: &GrayImage,
    method: Baseline,
    polarity: Polarity,
    keep_largest: bool,
) -> Result<BinaryMask> {
    let raw = match method {
        Baseline::Niblack => {
            let t = niblack_thresholds(img, NIBLACK_WINDOW, NIBLACK_K);
            let (w, h) = img.dims();
            BinaryMask::from_fn(w, h, |x, y| polarity.is_object(img.get(x, y), t[y * w + x]))
        }
        global => {
            let t = match global {
                Baseline::Otsu => otsu_threshold(img)?,
                Baseline::Kittler => kittler_threshold(img)?,
                _ => huang_threshold(img)?,
            };
            threshold_raw(img, t.clamp(0.0, 1.0), polarity)?
        }
    };
    Ok(if keep_largest {
        largest_component(&raw)
    } else {
        raw
    })
}
