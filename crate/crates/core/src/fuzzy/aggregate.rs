use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{mean, median, sample_sd};

/// Z-shaped membership: 1 below `a`, 0 above `b`, piecewise quadratic between.
pub fn zmf(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(a < b) {
        return Err(Error::contract(format!(
            "zmf needs a < b, got a={a}, b={b}"
        )));
    }
    let mid = 0.5 * (a + b);
    Ok(if x <= a {
        1.0
    } else if x <= mid {
        1.0 - 2.0 * ((x - a) / (b - a)).powi(2)
    } else if x < b {
        2.0 * ((x - b) / (b - a)).powi(2)
    } else {
        0.0
    })
}

/// Lower and upper breakpoints of the spread test, as fractions of the mean.
pub const SPREAD_LOW: f64 = 0.10;
pub const SPREAD_HIGH: f64 = 0.20;

/// Summary of the eight per-row outputs and the blended parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    /// Weight of the mean in the blend.
    pub weight: f64,
    pub value: f64,
}

/// Blends mean and median: `m·μ + (1−m)·Md` with
/// `m = zmf(σ, 0.1μ, 0.2μ)`. A non-positive mean uses `m = 1` when the
/// outputs agree and `m = 0` otherwise.
pub fn aggregate(t_o: &[f64]) -> Result<Aggregate> {
    if t_o.is_empty() {
        return Err(Error::contract("aggregation needs at least one output"));
    }
    let agree = t_o.iter().all(|&v| v == t_o[0]);
    let mu = if agree { t_o[0] } else { mean(t_o) };
    let md = median(t_o);
    let sd = if agree || t_o.len() < 2 {
        0.0
    } else {
        sample_sd(t_o)
    };
    let weight = if mu > 0.0 {
        zmf(sd, SPREAD_LOW * mu, SPREAD_HIGH * mu)?
    } else if sd == 0.0 {
        1.0
    } else {
        0.0
    };
    let value = if weight == 1.0 {
        mu
    } else if weight == 0.0 {
        md
    } else {
        weight * mu + (1.0 - weight) * md
    };
    Ok(Aggregate {
        mean: mu,
        median: md,
        sd,
        weight,
        value,
    })
}

/// [`aggregate`] clamped into `[lo, hi]`.
pub fn aggregate_in(t_o: &[f64], lo: f64, hi: f64) -> Result<f64> {
    Ok(aggregate(t_o)?.value.clamp(lo, hi))
}
