use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::metrics::{BinaryMask, GrayImage};

/// Order-preserving key for values in `[0, 1]`.
fn key(v: f64) -> u64 {
    v.max(0.0).to_bits()
}

/// Grows one region from `seed`: the frontier pixel closest to the running
/// region mean joins while that distance is at most `sim`.
fn grow_one(img: &GrayImage, seed: (usize, usize), sim: f64, out: &mut BinaryMask) {
    let (w, h) = img.dims();
    let data = img.data();
    let mut inside = vec![false; w * h];
    let mut queued = vec![false; w * h];
    let mut frontier: BTreeSet<(u64, usize)> = BTreeSet::new();
    let start = seed.1 * w + seed.0;
    let mut sum = data[start];
    let mut count = 1.0;
    inside[start] = true;
    queued[start] = true;
    let mut p = start;
    loop {
        let (x, y) = (p % w, p / w);
        let mut push = |q: usize| {
            if !queued[q] {
                queued[q] = true;
                frontier.insert((key(data[q]), q));
            }
        };
        if x > 0 {
            push(p - 1);
        }
        if x + 1 < w {
            push(p + 1);
        }
        if y > 0 {
            push(p - w);
        }
        if y + 1 < h {
            push(p + w);
        }
        let mean = sum / count;
        let below = frontier.range(..(key(mean), 0)).next_back().copied();
        let above = frontier.range((key(mean), 0)..).next().copied();
        let pick = match (below, above) {
            (Some(b), Some(a)) => {
                if mean - data[b.1] <= data[a.1] - mean {
                    b
                } else {
                    a
                }
            }
            (Some(b), None) => b,
            (None, Some(a)) => a,
            (None, None) => break,
        };
        if (data[pick.1] - mean).abs() > sim {
            break;
        }
        frontier.remove(&pick);
        p = pick.1;
        inside[p] = true;
        sum += data[p];
        count += 1.0;
    }
    for (o, i) in out.data_mut().iter_mut().zip(inside) {
        *o |= i;
    }
}

/// 4-connected region growing from each seed with similarity threshold
/// `sim` against the running region mean; the per-seed regions are united.
pub fn region_grow(img: &GrayImage, seeds: &[(usize, usize)], sim: f64) -> Result<BinaryMask> {
    if seeds.is_empty() {
        return Err(Error::contract("region growing needs at least one seed"));
    }
    if !(0.0..=1.0).contains(&sim) {
        return Err(Error::contract(format!("similarity {sim} outside [0, 1]")));
    }
    let (w, h) = img.dims();
    if let Some(s) = seeds.iter().find(|s| s.0 >= w || s.1 >= h) {
        return Err(Error::contract(format!("seed {s:?} outside {w}x{h} image")));
    }
    let mut out = BinaryMask::empty(w, h);
    for &s in seeds {
        grow_one(img, s, sim, &mut out);
    }
    Ok(out)
}
