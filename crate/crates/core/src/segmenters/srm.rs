use crate::error::{Error, Result};
use crate::metrics::{BinaryMask, GrayImage};

struct Regions {
    parent: Vec<usize>,
    size: Vec<usize>,
    sum: Vec<f64>,
}

impl Regions {
    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (big, small) = if self.size[a] >= self.size[b] {
            (a, b)
        } else {
            (b, a)
        };
        self.parent[small] = big;
        self.size[big] += self.size[small];
        self.sum[big] += self.sum[small];
    }
}

/// Statistical region merging with scale `q`; returns a region label per
/// pixel (labels numbered from 0 in raster order of first occurrence).
pub fn srm_regions(img: &GrayImage, q: f64) -> Result<Vec<usize>> {
    if !(q >= 1.0) {
        return Err(Error::contract(format!("SRM scale {q} must be at least 1")));
    }
    let (w, h) = img.dims();
    let n = w * h;
    let data = img.data();
    let delta = 1.0 / (6.0 * (n as f64).powi(2));
    let log_term = (2.0 / delta).ln();
    let b2 = |size: usize| log_term / (2.0 * q * size as f64);

    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(2 * n);
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            if x + 1 < w {
                pairs.push(((data[p] - data[p + 1]).abs(), p, p + 1));
            }
            if y + 1 < h {
                pairs.push(((data[p] - data[p + w]).abs(), p, p + w));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut r = Regions {
        parent: (0..n).collect(),
        size: vec![1; n],
        sum: data.to_vec(),
    };
    for &(_, a, b) in &pairs {
        let (ra, rb) = (r.find(a), r.find(b));
        if ra == rb {
            continue;
        }
        let ma = r.sum[ra] / r.size[ra] as f64;
        let mb = r.sum[rb] / r.size[rb] as f64;
        if (ma - mb).abs() <= (b2(r.size[ra]) + b2(r.size[rb])).sqrt() {
            r.union(ra, rb);
        }
    }
    let mut relabel = vec![usize::MAX; n];
    let mut next = 0;
    let mut labels = vec![0; n];
    for (p, l) in labels.iter_mut().enumerate() {
        let root = r.find(p);
        if relabel[root] == usize::MAX {
            relabel[root] = next;
            next += 1;
        }
        *l = relabel[root];
    }
    Ok(labels)
}

/// SRM mask: the merged region containing `seed`.
pub fn srm_segment(img: &GrayImage, q: f64, seed: (usize, usize)) -> Result<BinaryMask> {
    let (w, h) = img.dims();
    if seed.0 >= w || seed.1 >= h {
        return Err(Error::contract(format!(
            "seed {seed:?} outside {w}x{h} image"
        )));
    }
    let labels = srm_regions(img, q)?;
    let target = labels[seed.1 * w + seed.0];
    let mut out = BinaryMask::empty(w, h);
    for (o, &l) in out.data_mut().iter_mut().zip(&labels) {
        *o = l == target;
    }
    Ok(out)
}

pub fn region_count(labels: &[usize]) -> usize {
    labels.iter().max().map_or(0, |m| m + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_is_one_region() {
        let img = GrayImage::constant(8, 6, 0.4);
        for q in [1.0, 32.0, 256.0] {
            assert_eq!(region_count(&srm_regions(&img, q).unwrap()), 1);
            assert_eq!(srm_segment(&img, q, (0, 0)).unwrap().count(), 48);
        }
    }

    #[test]
    fn scale_below_one_is_rejected() {
        let img = GrayImage::constant(2, 2, 0.4);
        assert!(srm_regions(&img, 0.5).is_err());
    }
}
