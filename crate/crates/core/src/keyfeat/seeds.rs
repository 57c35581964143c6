//! Difference-of-Gaussians keypoints, orientation-histogram descriptors and
//! the window-separated seed selection.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::plane::Plane;
use crate::error::{Error, Result};
use crate::metrics::GrayImage;

pub const DESCRIPTOR_LEN: usize = 128;

const SCALES_PER_OCTAVE: usize = 3;
const BASE_SIGMA: f64 = 1.6;
const ASSUMED_BLUR: f64 = 0.5;
const CONTRAST_THRESHOLD: f64 = 0.04;
const EDGE_RATIO: f64 = 10.0;
const MAX_OCTAVES: usize = 6;
const MIN_OCTAVE_SIDE: usize = 12;
const MIN_DETECTED: usize = 4;

const ORI_BINS: usize = 36;
const ORI_SIGMA_FACTOR: f64 = 1.5;
const DESCR_WIDTH: usize = 4;
const DESCR_BINS: usize = 8;
const DESCR_SCALE_FACTOR: f64 = 3.0;
const DESCR_MAG_CLAMP: f64 = 0.2;

/// Sign of the scale-space extremum a seed came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Extremum {
    /// DoG maximum. The DoG is coarse minus fine, so this is a dark blob.
    Maximum,
    /// DoG minimum, a bright blob.
    Minimum,
    /// Regular grid point added when detection found too few keypoints.
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedPoint {
    pub x: usize,
    pub y: usize,
    /// Absolute DoG value at the extremum; zero for grid points.
    pub response: f64,
    pub scale: f64,
    pub extremum: Extremum,
    pub descriptor: Vec<f64>,
}

/// Sort key used before the separation pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedOrdering {
    #[default]
    Response,
    DescriptorNorm,
}

#[derive(Debug, Clone)]
struct Candidate {
    x: usize,
    y: usize,
    response: f64,
    scale: f64,
    extremum: Extremum,
}

fn is_extremum(dogs: &[Plane], s: usize, x: usize, y: usize) -> bool {
    let v = dogs[s].at(x, y);
    let mut is_max = true;
    let mut is_min = true;
    for plane in &dogs[s - 1..=s + 1] {
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                if std::ptr::eq(plane, &dogs[s]) && dx == 0 && dy == 0 {
                    continue;
                }
                let n = plane.at((x as isize + dx) as usize, (y as isize + dy) as usize);
                is_max &= v > n;
                is_min &= v < n;
                if !is_max && !is_min {
                    return false;
                }
            }
        }
    }
    is_max || is_min
}

fn passes_edge_test(d: &Plane, x: usize, y: usize) -> bool {
    let c = d.at(x, y);
    let dxx = d.at(x + 1, y) + d.at(x - 1, y) - 2.0 * c;
    let dyy = d.at(x, y + 1) + d.at(x, y - 1) - 2.0 * c;
    let dxy =
        (d.at(x + 1, y + 1) - d.at(x + 1, y - 1) - d.at(x - 1, y + 1) + d.at(x - 1, y - 1)) / 4.0;
    let tr = dxx + dyy;
    let det = dxx * dyy - dxy * dxy;
    det > 0.0 && tr * tr / det < (EDGE_RATIO + 1.0).powi(2) / EDGE_RATIO
}

/// Scans a DoG pyramid for local extrema with sufficient contrast and no edge response.
fn detect_candidates(img: &GrayImage) -> Vec<Candidate> {
    let threshold = 0.5 * CONTRAST_THRESHOLD / SCALES_PER_OCTAVE as f64;
    let k = 2f64.powf(1.0 / SCALES_PER_OCTAVE as f64);
    let mut base =
        Plane::from_image(img).blur((BASE_SIGMA * BASE_SIGMA - ASSUMED_BLUR * ASSUMED_BLUR).sqrt());
    let mut out = Vec::new();

    for octave in 0..MAX_OCTAVES {
        if base.width.min(base.height) < MIN_OCTAVE_SIDE {
            break;
        }
        let mut gauss = vec![base.clone()];
        for s in 1..SCALES_PER_OCTAVE + 3 {
            let prev = BASE_SIGMA * k.powi(s as i32 - 1);
            let total = prev * k;
            let step = (total * total - prev * prev).sqrt();
            let next = gauss[s - 1].blur(step);
            gauss.push(next);
        }
        let dogs: Vec<Plane> = gauss.windows(2).map(|w| w[1].sub(&w[0])).collect();
        let factor = 1usize << octave;
        for s in 1..=SCALES_PER_OCTAVE {
            let d = &dogs[s];
            for y in 1..d.height - 1 {
                for x in 1..d.width - 1 {
                    let v = d.at(x, y);
                    if v.abs() <= threshold || !is_extremum(&dogs, s, x, y) {
                        continue;
                    }
                    if !passes_edge_test(d, x, y) {
                        continue;
                    }
                    out.push(Candidate {
                        x: (x * factor).min(img.width() - 1),
                        y: (y * factor).min(img.height() - 1),
                        response: v.abs(),
                        scale: BASE_SIGMA * k.powi(s as i32) * factor as f64,
                        extremum: if v > 0.0 {
                            Extremum::Maximum
                        } else {
                            Extremum::Minimum
                        },
                    });
                }
            }
        }
        base = gauss[SCALES_PER_OCTAVE].downsample();
    }
    out
}

/// Gradient field of a lightly smoothed image, shared by all descriptors of one image.
pub(crate) struct GradientField {
    dx: Plane,
    dy: Plane,
}

impl GradientField {
    pub fn new(img: &GrayImage) -> Self {
        let smooth = Plane::from_image(img).blur(1.0);
        let (w, h) = (smooth.width, smooth.height);
        let mut dx = vec![0.0; w * h];
        let mut dy = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let (xi, yi) = (x as isize, y as isize);
                dx[y * w + x] =
                    0.5 * (smooth.at_clamped(xi + 1, yi) - smooth.at_clamped(xi - 1, yi));
                dy[y * w + x] =
                    0.5 * (smooth.at_clamped(xi, yi + 1) - smooth.at_clamped(xi, yi - 1));
            }
        }
        let mk = |data| Plane {
            width: w,
            height: h,
            data,
        };
        Self {
            dx: mk(dx),
            dy: mk(dy),
        }
    }

    #[inline]
    fn grad(&self, x: isize, y: isize) -> (f64, f64) {
        (self.dx.at_clamped(x, y), self.dy.at_clamped(x, y))
    }

    fn dominant_orientation(&self, x: usize, y: usize, scale: f64) -> f64 {
        let sigma = ORI_SIGMA_FACTOR * scale;
        let radius = (3.0 * sigma).round() as isize;
        let mut hist = [0.0f64; ORI_BINS];
        for i in -radius..=radius {
            for j in -radius..=radius {
                let (gx, gy) = self.grad(x as isize + j, y as isize + i);
                let mag = (gx * gx + gy * gy).sqrt();
                if mag == 0.0 {
                    continue;
                }
                let w = (-((i * i + j * j) as f64) / (2.0 * sigma * sigma)).exp();
                let angle = gy.atan2(gx).rem_euclid(2.0 * PI);
                let bin = ((angle / (2.0 * PI) * ORI_BINS as f64).round() as usize) % ORI_BINS;
                hist[bin] += w * mag;
            }
        }
        let mut smoothed = [0.0f64; ORI_BINS];
        for (b, s) in smoothed.iter_mut().enumerate() {
            let prev = hist[(b + ORI_BINS - 1) % ORI_BINS];
            let next = hist[(b + 1) % ORI_BINS];
            *s = 0.25 * prev + 0.5 * hist[b] + 0.25 * next;
        }
        let (best, &peak) = smoothed
            .iter()
            .enumerate()
            .fold(
                (0, &smoothed[0]),
                |acc, (i, v)| if *v > *acc.1 { (i, v) } else { acc },
            );
        if peak == 0.0 {
            return 0.0;
        }
        let l = smoothed[(best + ORI_BINS - 1) % ORI_BINS];
        let r = smoothed[(best + 1) % ORI_BINS];
        let denom = l - 2.0 * peak + r;
        let offset = if denom.abs() > 0.0 {
            0.5 * (l - r) / denom
        } else {
            0.0
        };
        ((best as f64 + offset) / ORI_BINS as f64 * 2.0 * PI).rem_euclid(2.0 * PI)
    }

    /// 4×4×8 orientation-histogram descriptor, rotated to the dominant orientation,
    /// L2-normalized with the usual 0.2 clamp.
    pub fn describe(&self, x: usize, y: usize, scale: f64) -> Vec<f64> {
        let angle = self.dominant_orientation(x, y, scale);
        let (sin_t, cos_t) = angle.sin_cos();
        let d = DESCR_WIDTH as f64;
        let hist_width = DESCR_SCALE_FACTOR * scale;
        let radius = (hist_width * std::f64::consts::SQRT_2 * (d + 1.0) * 0.5).round() as isize;
        let n = DESCR_WIDTH + 2;
        let mut hist = vec![0.0f64; n * n * (DESCR_BINS + 2)];
        let idx = |r: usize, c: usize, o: usize| (r * n + c) * (DESCR_BINS + 2) + o;

        for i in -radius..=radius {
            for j in -radius..=radius {
                let c_rot = (j as f64 * cos_t + i as f64 * sin_t) / hist_width;
                let r_rot = (-(j as f64) * sin_t + i as f64 * cos_t) / hist_width;
                let rbin = r_rot + d / 2.0 - 0.5;
                let cbin = c_rot + d / 2.0 - 0.5;
                if rbin <= -1.0 || rbin >= d || cbin <= -1.0 || cbin >= d {
                    continue;
                }
                let (gx, gy) = self.grad(x as isize + j, y as isize + i);
                let mag = (gx * gx + gy * gy).sqrt();
                if mag == 0.0 {
                    continue;
                }
                let weight = (-(c_rot * c_rot + r_rot * r_rot) / (0.5 * d * d)).exp();
                let ori = (gy.atan2(gx) - angle).rem_euclid(2.0 * PI);
                let obin = ori * DESCR_BINS as f64 / (2.0 * PI);

                let (r0, c0, o0) = (rbin.floor(), cbin.floor(), obin.floor());
                let (dr, dc, dob) = (rbin - r0, cbin - c0, obin - o0);
                let v = mag * weight;
                for (ri, wr) in [(0, 1.0 - dr), (1, dr)] {
                    for (ci, wc) in [(0, 1.0 - dc), (1, dc)] {
                        for (oi, wo) in [(0, 1.0 - dob), (1, dob)] {
                            let r = (r0 as isize + 1 + ri) as usize;
                            let c = (c0 as isize + 1 + ci) as usize;
                            let o = (o0 as usize + oi) % DESCR_BINS;
                            hist[idx(r, c, o)] += v * wr * wc * wo;
                        }
                    }
                }
            }
        }

        let mut out = Vec::with_capacity(DESCRIPTOR_LEN);
        for r in 0..DESCR_WIDTH {
            for c in 0..DESCR_WIDTH {
                for o in 0..DESCR_BINS {
                    out.push(hist[idx(r + 1, c + 1, o)]);
                }
            }
        }
        normalize_descriptor(&mut out);
        out
    }
}

fn normalize_descriptor(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return;
    }
    let clamp = DESCR_MAG_CLAMP * norm;
    v.iter_mut().for_each(|x| *x = x.min(clamp));
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
}

/// `true` when `(x, y)` is at least `z` away from `(kx, ky)` along some axis.
#[inline]
pub(crate) fn separated(x: usize, y: usize, kx: usize, ky: usize, z: usize) -> bool {
    x.abs_diff(kx) >= z || y.abs_diff(ky) >= z
}

/// Greedy pass: a candidate survives if it is separated from every kept point.
pub(crate) fn select_separated<T>(
    candidates: Vec<T>,
    pos: impl Fn(&T) -> (usize, usize),
    z: usize,
) -> Vec<T> {
    let mut kept: Vec<T> = Vec::new();
    for c in candidates {
        let (x, y) = pos(&c);
        if kept.iter().all(|k| {
            let (kx, ky) = pos(k);
            separated(x, y, kx, ky, z)
        }) {
            kept.push(c);
        }
    }
    kept
}

/// Regular grid positions spaced `z` apart, starting half a window in.
pub fn grid_points(width: usize, height: usize, z: usize) -> Vec<(usize, usize)> {
    let start = z / 2;
    let xs: Vec<usize> = (start..width).step_by(z.max(1)).collect();
    let ys: Vec<usize> = (start..height).step_by(z.max(1)).collect();
    ys.iter()
        .flat_map(|&y| xs.iter().map(move |&x| (x, y)))
        .collect()
}

/// Detects scale-space seed points over the whole image.
///
/// Candidates are ordered by `ordering` (descending; ties by row-major
/// position) and kept only if they are at least `z` pixels apart from every
/// previously kept point along x or along y. When fewer than four survive,
/// the set is topped up with grid points (spacing `z`) that respect the same
/// rule.
pub fn detect_seed_points_with(
    img: &GrayImage,
    z: usize,
    ordering: SeedOrdering,
) -> Result<Vec<SeedPoint>> {
    if z == 0 || img.width() < z || img.height() < z {
        return Err(Error::contract(format!(
            "image {}x{} is smaller than the {z}x{z} feature window",
            img.width(),
            img.height()
        )));
    }
    let field = GradientField::new(img);
    let max_scale = (z as f64 / 4.0).max(1.0);
    let mut seeds: Vec<SeedPoint> = detect_candidates(img)
        .into_iter()
        .map(|c| {
            let scale = c.scale.min(max_scale);
            SeedPoint {
                descriptor: field.describe(c.x, c.y, scale),
                x: c.x,
                y: c.y,
                response: c.response,
                scale,
                extremum: c.extremum,
            }
        })
        .collect();

    let key = |s: &SeedPoint| match ordering {
        SeedOrdering::Response => s.response,
        SeedOrdering::DescriptorNorm => s.descriptor.iter().map(|v| v * v).sum::<f64>(),
    };
    seeds.sort_by(|a, b| {
        key(b)
            .total_cmp(&key(a))
            .then(a.y.cmp(&b.y))
            .then(a.x.cmp(&b.x))
    });
    let mut kept = select_separated(seeds, |s| (s.x, s.y), z);

    if kept.len() < MIN_DETECTED {
        let scale = z as f64 / 4.0;
        for (x, y) in grid_points(img.width(), img.height(), z) {
            if kept.iter().all(|k| separated(x, y, k.x, k.y, z)) {
                kept.push(SeedPoint {
                    x,
                    y,
                    response: 0.0,
                    scale,
                    extremum: Extremum::Grid,
                    descriptor: field.describe(x, y, scale),
                });
            }
        }
    }
    Ok(kept)
}

pub fn detect_seed_points(img: &GrayImage, z: usize) -> Result<Vec<SeedPoint>> {
    detect_seed_points_with(img, z, SeedOrdering::Response)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_falls_back_to_grid() {
        let img = GrayImage::constant(64, 48, 0.4);
        let seeds = detect_seed_points(&img, 16).unwrap();
        let expected = grid_points(64, 48, 16);
        assert_eq!(seeds.len(), expected.len());
        for (s, (x, y)) in seeds.iter().zip(expected) {
            assert_eq!((s.x, s.y), (x, y));
            assert_eq!(s.extremum, Extremum::Grid);
            assert!(s.descriptor.iter().all(|&v| v == 0.0));
        }
        for w in seeds.windows(2) {
            assert!(separated(w[0].x, w[0].y, w[1].x, w[1].y, 16));
        }
    }

    #[test]
    fn close_candidates_collapse_to_one() {
        let c = vec![(10usize, 10usize, 2.0), (14, 12, 1.0)];
        let kept = select_separated(c, |c| (c.0, c.1), 8);
        assert_eq!(kept, vec![(10, 10, 2.0)]);
    }

    #[test]
    fn separation_along_one_axis_suffices() {
        let c = vec![(10usize, 10usize), (10, 18), (13, 12)];
        let kept = select_separated(c, |c| *c, 8);
        assert_eq!(kept, vec![(10, 10), (10, 18)]);
    }

    #[test]
    fn window_larger_than_image_is_rejected() {
        let img = GrayImage::constant(10, 30, 0.0);
        assert!(detect_seed_points(&img, 12).is_err());
    }

    #[test]
    fn descriptors_are_unit_or_zero_and_nonnegative() {
        let img = GrayImage::from_fn(80, 80, |x, y| {
            0.5 + 0.4 * ((x as f64 / 5.0).sin() * (y as f64 / 7.0).cos())
        });
        for s in detect_seed_points(&img, 10).unwrap() {
            assert_eq!(s.descriptor.len(), DESCRIPTOR_LEN);
            assert!(s.descriptor.iter().all(|&v| v >= 0.0));
            let n: f64 = s.descriptor.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(n == 0.0 || (n - 1.0).abs() < 1e-9);
        }
    }
}
