//! Synthetic speckle datasets with a known relation between lesion
//! intensity and the best threshold.
//!
//! Each image holds one dark elliptical lesion on a brighter background.
//! The background sits a roughly fixed step above the lesion, so the best
//! threshold moves with the lesion intensity. Multiplicative gamma speckle,
//! smoothed over a 3×3 box, gives both regions an ultrasound-like grain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{BinaryMask, GrayImage};
use crate::pipeline::{Dataset, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeckleParams {
    pub n_images: usize,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    /// Range of the mean lesion intensity.
    pub lesion: (f64, f64),
    /// Mean background step above the lesion.
    pub contrast: f64,
    /// Relative standard deviation of the per-image contrast.
    pub contrast_jitter: f64,
    /// Equivalent number of looks of the gamma speckle; larger is smoother.
    pub looks: f64,
}

impl Default for SpeckleParams {
    fn default() -> Self {
        Self {
            n_images: 40,
            width: 112,
            height: 96,
            seed: 2024,
            lesion: (0.12, 0.48),
            contrast: 0.30,
            contrast_jitter: 0.10,
            looks: 4.0,
        }
    }
}

/// A generated image with the values it was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCase {
    pub sample: Sample,
    pub lesion_intensity: f64,
    pub background: f64,
}

fn box3(data: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    for y in 0..h {
        for x in 0..w {
            let mut sum = 0.0;
            let mut n = 0.0;
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let (xx, yy) = (x as isize + dx, y as isize + dy);
                    if xx >= 0 && yy >= 0 && (xx as usize) < w && (yy as usize) < h {
                        sum += data[yy as usize * w + xx as usize];
                        n += 1.0;
                    }
                }
            }
            out[y * w + x] = sum / n;
        }
    }
    out
}

fn one_case(p: &SpeckleParams, index: usize) -> Result<SyntheticCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    rng.set_stream(index as u64);
    let (w, h) = (p.width, p.height);
    let lesion = rng.random_range(p.lesion.0..=p.lesion.1);
    let jitter = Normal::new(1.0, p.contrast_jitter).map_err(|e| Error::contract(e.to_string()))?;
    let background = (lesion + p.contrast * jitter.sample(&mut rng).max(0.3)).min(0.95);
    let cx = rng.random_range(0.35..0.65) * w as f64;
    let cy = rng.random_range(0.35..0.65) * h as f64;
    let rx = rng.random_range(0.14..0.24) * w as f64;
    let ry = rng.random_range(0.14..0.24) * h as f64;
    let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
    let (s, c) = theta.sin_cos();
    let inside = |x: usize, y: usize| {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        let u = (c * dx + s * dy) / rx;
        let v = (-s * dx + c * dy) / ry;
        u * u + v * v <= 1.0
    };
    let gamma = Gamma::new(p.looks, 1.0 / p.looks).map_err(|e| Error::contract(e.to_string()))?;
    let noise: Vec<f64> = (0..w * h).map(|_| gamma.sample(&mut rng)).collect();
    let smooth = box3(&noise, w, h);
    let data: Vec<f64> = (0..w * h)
        .map(|i| {
            let base = if inside(i % w, i / w) {
                lesion
            } else {
                background
            };
            (base * smooth[i]).clamp(0.0, 1.0)
        })
        .collect();
    let image = GrayImage::new(w, h, data)?;
    let gold = BinaryMask::from_fn(w, h, inside);
    Ok(SyntheticCase {
        sample: Sample {
            id: format!("syn{index:03}"),
            image,
            gold,
        },
        lesion_intensity: lesion,
        background,
    })
}

pub fn speckle_cases(p: &SpeckleParams) -> Result<Vec<SyntheticCase>> {
    if p.n_images == 0 || p.width < 16 || p.height < 16 {
        return Err(Error::contract("need at least one image of 16×16 or more"));
    }
    if !(0.0 <= p.lesion.0 && p.lesion.0 <= p.lesion.1 && p.lesion.1 <= 1.0) || !(p.looks > 0.0) {
        return Err(Error::contract("invalid speckle parameters"));
    }
    (0..p.n_images).map(|i| one_case(p, i)).collect()
}

pub fn speckle_dataset(p: &SpeckleParams) -> Result<Dataset> {
    Dataset::new(speckle_cases(p)?.into_iter().map(|c| c.sample).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_sized() {
        let p = SpeckleParams {
            n_images: 3,
            ..Default::default()
        };
        let a = speckle_cases(&p).unwrap();
        assert_eq!(a, speckle_cases(&p).unwrap());
        for c in &a {
            assert_eq!(c.sample.image.dims(), (112, 96));
            assert!(c.sample.gold.count() > 100);
            assert!(c.background > c.lesion_intensity);
        }
    }
}
