use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::image::BinaryMask;
use crate::error::{Error, Result};

/// Area overlap `|S ∩ G| / |S ∪ G|`. Two empty masks agree perfectly (1.0).
pub fn jaccard(s: &BinaryMask, g: &BinaryMask) -> Result<f64> {
    s.check_same_dims(g)?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&a, &b) in s.data().iter().zip(g.data()) {
        inter += (a && b) as usize;
        union += (a || b) as usize;
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Median; the mean of the two central values for even counts.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Sample standard deviation (n − 1 denominator); zero for a single value.
pub fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Population variance (n denominator).
pub fn population_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
}

/// Two-sided Student t critical value `t_{1-alpha/2, df}`.
pub fn t_critical(alpha: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("degrees of freedom are positive");
    dist.inverse_cdf(1.0 - alpha / 2.0)
}

fn two_sided_p(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("degrees of freedom are positive");
    (2.0 * dist.cdf(-t.abs())).clamp(0.0, 1.0)
}

/// Mean, spread and 95% confidence interval of a score sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub mean: f64,
    pub sd: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n: usize,
}

/// Summarizes scores with a two-sided 95% Student-t interval on the mean.
pub fn summarize(scores: &[f64]) -> Result<ScoreSummary> {
    if scores.is_empty() {
        return Err(Error::contract("cannot summarize an empty score list"));
    }
    let n = scores.len();
    let m = mean(scores);
    let sd = sample_sd(scores);
    let half = if n < 2 || sd == 0.0 {
        0.0
    } else {
        t_critical(0.05, (n - 1) as f64) * sd / (n as f64).sqrt()
    };
    Ok(ScoreSummary {
        mean: m,
        sd,
        ci_lo: m - half,
        ci_hi: m + half,
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub statistic: f64,
    pub p_value: f64,
    pub df: f64,
    /// Set when the spread of the differences is zero and the statistic is undefined.
    pub degenerate: bool,
}

/// Relative tolerance below which a spread is treated as exactly zero.
const DEGENERATE_SPREAD: f64 = 1e-12;

/// Paired two-sided t-test on `a - b`.
///
/// All-zero differences give `t = 0, p = 1`. Constant nonzero differences
/// have no finite statistic: `statistic` is NaN, `p = 0` and the result is
/// flagged `degenerate`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::contract(format!(
            "paired samples differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::contract("paired t-test needs at least two pairs"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let df = n - 1.0;
    let md = mean(&d);
    let sd = sample_sd(&d);
    let scale = d.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return Ok(TTest {
            statistic: 0.0,
            p_value: 1.0,
            df,
            degenerate: false,
        });
    }
    if sd <= DEGENERATE_SPREAD * scale {
        return Ok(TTest {
            statistic: f64::NAN,
            p_value: 0.0,
            df,
            degenerate: true,
        });
    }
    let t = md / (sd / n.sqrt());
    Ok(TTest {
        statistic: t,
        p_value: two_sided_p(t, df),
        df,
        degenerate: false,
    })
}

/// Welch's unequal-variance two-sample t-test.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::contract(
            "Welch t-test needs at least two values per sample",
        ));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sample_sd(a).powi(2) / na, sample_sd(b).powi(2) / nb);
    let diff = mean(a) - mean(b);
    let se2 = va + vb;
    if se2 == 0.0 {
        return Ok(TTest {
            statistic: if diff == 0.0 { 0.0 } else { f64::NAN },
            p_value: if diff == 0.0 { 1.0 } else { 0.0 },
            df: na + nb - 2.0,
            degenerate: diff != 0.0,
        });
    }
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let t = diff / se2.sqrt();
    Ok(TTest {
        statistic: t,
        p_value: two_sided_p(t, df),
        df,
        degenerate: false,
    })
}
