use std::collections::VecDeque;

use super::Polarity;
use crate::error::{Error, Result};
use crate::metrics::{BinaryMask, GrayImage};

/// Object pixels at or below (`Dark`) or at or above (`Bright`) `t`.
pub fn threshold_raw(img: &GrayImage, t: f64, polarity: Polarity) -> Result<BinaryMask> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::contract(format!("threshold {t} outside [0, 1]")));
    }
    let (w, h) = img.dims();
    Ok(BinaryMask::from_fn(w, h, |x, y| {
        polarity.is_object(img.get(x, y), t)
    }))
}

/// Global threshold followed by largest-component retention.
pub fn threshold_segment(img: &GrayImage, t: f64, polarity: Polarity) -> Result<BinaryMask> {
    Ok(largest_component(&threshold_raw(img, t, polarity)?))
}

/// 4-connected component labels (0 = background, components numbered from 1
/// in raster order of their first pixel) and the component sizes.
pub fn label_components(mask: &BinaryMask) -> (Vec<u32>, Vec<usize>) {
    let (w, h) = mask.dims();
    let mut labels = vec![0u32; w * h];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask.data()[start] || labels[start] != 0 {
            continue;
        }
        let id = sizes.len() as u32 + 1;
        let mut size = 0;
        labels[start] = id;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            size += 1;
            let (x, y) = (p % w, p / w);
            let mut visit = |q: usize| {
                if mask.data()[q] && labels[q] == 0 {
                    labels[q] = id;
                    queue.push_back(q);
                }
            };
            if x > 0 {
                visit(p - 1);
            }
            if x + 1 < w {
                visit(p + 1);
            }
            if y > 0 {
                visit(p - w);
            }
            if y + 1 < h {
                visit(p + w);
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

/// Keeps the largest 4-connected component; ties go to the component met
/// first in raster order.
pub fn largest_component(mask: &BinaryMask) -> BinaryMask {
    let (labels, sizes) = label_components(mask);
    let Some(best) = sizes
        .iter()
        .enumerate()
        .fold(None, |acc: Option<(usize, usize)>, (i, &s)| match acc {
            Some((_, bs)) if bs >= s => acc,
            _ => Some((i, s)),
        })
        .map(|(i, _)| i as u32 + 1)
    else {
        return mask.clone();
    };
    let (w, h) = mask.dims();
    let mut out = BinaryMask::empty(w, h);
    for (o, &l) in out.data_mut().iter_mut().zip(&labels) {
        *o = l == best;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_threshold_selects_everything() {
        let img = GrayImage::from_fn(5, 4, |x, y| ((x + y) % 3) as f64 / 2.0);
        assert_eq!(
            threshold_raw(&img, 1.0, Polarity::Dark).unwrap().count(),
            20
        );
        assert_eq!(
            threshold_segment(&img, 1.0, Polarity::Dark)
                .unwrap()
                .count(),
            20
        );
    }

    #[test]
    fn zero_threshold_on_bright_image_is_empty() {
        let img = GrayImage::constant(4, 4, 0.1);
        assert!(threshold_segment(&img, 0.0, Polarity::Dark)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn two_level_image() {
        let img = GrayImage::from_fn(6, 6, |x, _| if x < 2 { 0.2 } else { 0.8 });
        let m = threshold_segment(&img, 0.5, Polarity::Dark).unwrap();
        assert_eq!(m, BinaryMask::from_fn(6, 6, |x, _| x < 2));
        let b = threshold_segment(&img, 0.5, Polarity::Bright).unwrap();
        assert_eq!(b, m.complement());
    }

    #[test]
    fn out_of_range_threshold_is_rejected() {
        let img = GrayImage::constant(2, 2, 0.5);
        assert!(threshold_raw(&img, 1.5, Polarity::Dark).is_err());
        assert!(threshold_raw(&img, -0.1, Polarity::Dark).is_err());
    }

    #[test]
    fn largest_component_and_ties() {
        // two blobs of 3 and 2 pixels, diagonal contact does not connect
        let m = BinaryMask::from_fn(5, 3, |x, y| {
            (y == 0 && x < 3) || (y == 2 && x >= 3) || (x == 3 && y == 1)
        });
        let (_, sizes) = label_components(&m);
        assert_eq!(sizes, vec![3, 3]);
        let l = largest_component(&m);
        assert_eq!(l, BinaryMask::from_fn(5, 3, |x, y| y == 0 && x < 3));
        assert!(largest_component(&BinaryMask::empty(3, 3)).is_empty());
    }
}
