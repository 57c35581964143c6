//! Binary STAPLE label fusion.

use crate::error::{Error, Result};
use crate::metrics::BinaryMask;

pub const STAPLE_INIT: f64 = 0.99999;
pub const STAPLE_TOL: f64 = 1e-6;
pub const STAPLE_MAX_ITER: usize = 100;

/// Per-rater performance and the fused estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct StapleResult {
    pub mask: BinaryMask,
    pub weights: Vec<f64>,
    pub sensitivity: Vec<f64>,
    pub specificity: Vec<f64>,
    pub iterations: usize,
}

const TINY: f64 = 1e-300;

pub fn staple(masks: &[BinaryMask]) -> Result<StapleResult> {
    let first = masks
        .first()
        .ok_or_else(|| Error::contract("fusion needs at least one mask"))?;
    for m in &masks[1..] {
        first.check_same_dims(m)?;
    }
    let n = first.data().len();
    let raters = masks.len();
    let prior = masks.iter().map(|m| m.count() as f64).sum::<f64>() / (n * raters) as f64;
    let mut p = vec![STAPLE_INIT; raters];
    let mut q = vec![STAPLE_INIT; raters];
    let mut w = vec![0.0; n];
    let mut last_ll = f64::NEG_INFINITY;
    let mut iterations = 0;
    for iter in 1..=STAPLE_MAX_ITER {
        iterations = iter;
        let mut ll = 0.0;
        for (i, wi) in w.iter_mut().enumerate() {
            let (mut a, mut b) = (prior.ln(), (1.0 - prior).ln());
            for j in 0..raters {
                if masks[j].data()[i] {
                    a += p[j].max(TINY).ln();
                    b += (1.0 - q[j]).max(TINY).ln();
                } else {
                    a += (1.0 - p[j]).max(TINY).ln();
                    b += q[j].max(TINY).ln();
                }
            }
            let top = a.max(b);
            let (ea, eb) = ((a - top).exp(), (b - top).exp());
            *wi = ea / (ea + eb);
            ll += top + (ea + eb).ln();
        }
        for j in 0..raters {
            let d = masks[j].data();
            let (mut tp, mut fg, mut tn, mut bg) = (0.0, 0.0, 0.0, 0.0);
            for (i, &wi) in w.iter().enumerate() {
                fg += wi;
                bg += 1.0 - wi;
                if d[i] {
                    tp += wi;
                } else {
                    tn += 1.0 - wi;
                }
            }
            if fg > 0.0 {
                p[j] = tp / fg;
            }
            if bg > 0.0 {
                q[j] = tn / bg;
            }
        }
        if (ll - last_ll).abs() < STAPLE_TOL {
            break;
        }
        last_ll = ll;
    }
    let (width, height) = first.dims();
    let mut mask = BinaryMask::empty(width, height);
    for (o, &wi) in mask.data_mut().iter_mut().zip(&w) {
        *o = wi >= 0.5;
    }
    Ok(StapleResult {
        mask,
        weights: w,
        sensitivity: p,
        specificity: q,
        iterations,
    })
}

/// Fused mask only.
pub fn staple_fuse(masks: &[BinaryMask]) -> Result<BinaryMask> {
    Ok(staple(masks)?.mask)
}
