//! Unsupervised column selection: correlation pruning, six selectors and
//! the three-of-six vote.

mod graph;
mod selectors;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use self::graph::{default_k, KnnGraph};
pub use self::selectors::{
    greedy_path, laplacian_scores, max_information_compression, multi_cluster_scores, run_selector,
    run_selector_with, spectral_scores, GreedyPath, Method, SelectorParams, SelectorResult,
};

use crate::error::{Error, Result};

/// Threshold for the near-duplicate pass producing `F_4`.
pub const DUPLICATE_TAU: f64 = 0.99;
/// Threshold for the similarity passes (`N_T2` and `F*`).
pub const SIMILARITY_TAU: f64 = 0.90;
/// Votes a column needs to reach `F_5`.
pub const MIN_VOTES: usize = 3;

fn is_constant(col: &[f64]) -> bool {
    col.iter().all(|&v| v == col[0])
}

/// Zero-mean, unit population-sd columns; constant columns become zero.
pub fn standardize(f: &DMatrix<f64>) -> DMatrix<f64> {
    let mut x = f.clone();
    let n = f.nrows() as f64;
    for mut col in x.column_iter_mut() {
        let vals: Vec<f64> = col.iter().copied().collect();
        if vals.is_empty() || is_constant(&vals) {
            col.fill(0.0);
            continue;
        }
        let mean = vals.iter().sum::<f64>() / n;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        col.iter_mut().for_each(|v| *v = (*v - mean) / sd);
    }
    x
}

/// Absolute Pearson correlation; zero when either column is constant.
pub fn abs_pearson(a: &[f64], b: &[f64]) -> f64 {
    if is_constant(a) || is_constant(b) {
        return 0.0;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (sab / (saa * sbb).sqrt()).abs().min(1.0)
}

/// Left-to-right scan keeping a column iff its |r| with every kept column
/// is below `tau`. Exact copies of a kept column are always dropped, and a
/// constant column survives only if no constant column was kept before it.
pub fn drop_correlated(f: &DMatrix<f64>, tau: f64) -> Result<Vec<usize>> {
    if f.nrows() < 2 {
        return Err(Error::contract("correlation needs at least two rows"));
    }
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::contract(format!("tau {tau} outside (0, 1]")));
    }
    let cols: Vec<Vec<f64>> = f
        .column_iter()
        .map(|c| c.iter().copied().collect())
        .collect();
    let mut kept: Vec<usize> = Vec::new();
    for (j, col) in cols.iter().enumerate() {
        let constant = is_constant(col);
        let clash = kept.iter().any(|&k| {
            let other = &cols[k];
            other == col || (constant && is_constant(other)) || abs_pearson(col, other) >= tau
        });
        if !clash {
            kept.push(j);
        }
    }
    Ok(kept)
}

/// Columns chosen by at least three of the six results, ascending.
pub fn ensemble_vote(results: &[SelectorResult]) -> Result<Vec<usize>> {
    Ok(vote_counts(results)?
        .into_iter()
        .filter(|&(_, v)| v >= MIN_VOTES)
        .map(|(c, _)| c)
        .collect())
}

/// Number of results naming each column.
pub fn vote_counts(results: &[SelectorResult]) -> Result<BTreeMap<usize, usize>> {
    if results.len() != Method::ALL.len() {
        return Err(Error::contract(format!(
            "vote needs six selector results, got {}",
            results.len()
        )));
    }
    let universe = results[0].universe;
    if results.iter().any(|r| r.universe != universe) {
        return Err(Error::contract(
            "selector results disagree on the column universe",
        ));
    }
    let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
    for r in results {
        let mut cols = r.columns.clone();
        cols.sort_unstable();
        cols.dedup();
        for c in cols {
            if c >= universe {
                return Err(Error::contract(format!(
                    "column {c} outside universe {universe}"
                )));
            }
            *votes.entry(c).or_default() += 1;
        }
    }
    Ok(votes)
}

/// Vote survivors limited to `cap` columns: when more than `cap` columns
/// reach three votes, the most-voted are kept (ties to the lower index).
pub fn capped_vote(results: &[SelectorResult], cap: usize) -> Result<Vec<usize>> {
    let mut ranked: Vec<(usize, usize)> = vote_counts(results)?
        .into_iter()
        .filter(|&(_, v)| v >= MIN_VOTES)
        .collect();
    if ranked.len() > cap {
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(cap);
    }
    let mut cols: Vec<usize> = ranked.into_iter().map(|(c, _)| c).collect();
    cols.sort_unstable();
    Ok(cols)
}

/// Record of every selection stage; all indices refer to the input columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub n_t: usize,
    pub n_t1: usize,
    pub n_t2: usize,
    pub n_t3: usize,
    pub n_l: usize,
    pub kept_after_99: Vec<usize>,
    pub per_method: Vec<SelectorResult>,
    pub vote_survivors: Vec<usize>,
    pub final_columns: Vec<usize>,
}

pub fn self_select(f3: &DMatrix<f64>) -> Result<SelectionTrace> {
    self_select_with(f3, &SelectorParams::default())
}

pub fn self_select_with(f3: &DMatrix<f64>, params: &SelectorParams) -> Result<SelectionTrace> {
    let kept = drop_correlated(f3, DUPLICATE_TAU)?;
    let f4 = f3.select_columns(&kept);
    let m = drop_correlated(&f4, SIMILARITY_TAU)?.len();
    let per_local: Vec<SelectorResult> = Method::ALL
        .par_iter()
        .map(|&method| run_selector_with(method, &f4, m, params))
        .collect::<Result<_>>()?;
    let survivors_local = if params.cap_vote {
        capped_vote(&per_local, m)?
    } else {
        ensemble_vote(&per_local)?
    };
    let f5 = f4.select_columns(&survivors_local);
    let final_local: Vec<usize> = if survivors_local.is_empty() {
        Vec::new()
    } else {
        drop_correlated(&f5, SIMILARITY_TAU)?
    };
    let to_raw = |local: &[usize]| local.iter().map(|&i| kept[i]).collect::<Vec<_>>();
    let vote_survivors = to_raw(&survivors_local);
    let final_columns: Vec<usize> = final_local.iter().map(|&i| vote_survivors[i]).collect();
    let per_method = per_local
        .iter()
        .map(|r| SelectorResult {
            method: r.method,
            columns: to_raw(&r.columns),
            universe: f3.ncols(),
        })
        .collect();
    Ok(SelectionTrace {
        n_t: f3.ncols(),
        n_t1: kept.len(),
        n_t2: m,
        n_t3: vote_survivors.len(),
        n_l: final_columns.len(),
        kept_after_99: kept,
        per_method,
        vote_survivors,
        final_columns,
    })
}

fn join(cols: &[usize]) -> String {
    cols.iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn split(s: &str) -> Result<Vec<usize>> {
    s.split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|e| Error::Parse(format!("index '{t}': {e}")))
        })
        .collect()
}

impl SelectionTrace {
    /// `key = value` lines; index lists are space separated.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "n_t = {}", self.n_t);
        let _ = writeln!(out, "n_t1 = {}", self.n_t1);
        let _ = writeln!(out, "n_t2 = {}", self.n_t2);
        let _ = writeln!(out, "n_t3 = {}", self.n_t3);
        let _ = writeln!(out, "n_l = {}", self.n_l);
        let _ = writeln!(out, "kept_after_99 = {}", join(&self.kept_after_99));
        for r in &self.per_method {
            let _ = writeln!(out, "method.{} = {}", r.method.name(), join(&r.columns));
        }
        let _ = writeln!(out, "vote_survivors = {}", join(&self.vote_survivors));
        let _ = writeln!(out, "final = {}", join(&self.final_columns));
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut fields: BTreeMap<String, String> = BTreeMap::new();
        for line in text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
        {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key = value, got '{line}'")))?;
            fields.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| {
            fields
                .get(k)
                .cloned()
                .ok_or_else(|| Error::Parse(format!("missing '{k}'")))
        };
        let count = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|e| Error::Parse(format!("{k}: {e}")))
        };
        let n_t = count("n_t")?;
        let mut per_method = Vec::new();
        for m in Method::ALL {
            if let Some(v) = fields.get(&format!("method.{}", m.name())) {
                per_method.push(SelectorResult {
                    method: m,
                    columns: split(v)?,
                    universe: n_t,
                });
            }
        }
        Ok(Self {
            n_t,
            n_t1: count("n_t1")?,
            n_t2: count("n_t2")?,
            n_t3: count("n_t3")?,
            n_l: count("n_l")?,
            kept_after_99: split(&get("kept_after_99")?)?,
            per_method,
            vote_survivors: split(&get("vote_survivors")?)?,
            final_columns: split(&get("final")?)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(method: Method, columns: &[usize]) -> SelectorResult {
        SelectorResult {
            method,
            columns: columns.to_vec(),
            universe: 10,
        }
    }

    #[test]
    fn duplicate_dropped_at_any_tau() {
        let f = DMatrix::from_row_slice(4, 3, &[1., 2., 1., 2., 0., 2., 3., 5., 3., 0., 1., 0.]);
        for tau in [0.6, 0.9, 1.0] {
            assert_eq!(drop_correlated(&f, tau).unwrap(), vec![0, 1]);
        }
    }

    #[test]
    fn orthogonal_columns_survive() {
        let f = DMatrix::from_row_slice(4, 2, &[1., 1., -1., 1., 1., -1., -1., -1.]);
        assert_eq!(drop_correlated(&f, 0.01).unwrap(), vec![0, 1]);
    }

    #[test]
    fn second_constant_column_is_dropped() {
        let f = DMatrix::from_row_slice(3, 3, &[1., 5., 7., 1., 6., 7., 1., 2., 7.]);
        assert_eq!(drop_correlated(&f, 0.99).unwrap(), vec![0, 1]);
    }

    #[test]
    fn contract_checks() {
        let f = DMatrix::from_element(1, 3, 1.0);
        assert!(drop_correlated(&f, 0.9).is_err());
        let f = DMatrix::from_element(3, 3, 1.0);
        assert!(drop_correlated(&f, 0.0).is_err());
        assert!(drop_correlated(&f, 1.5).is_err());
    }

    #[test]
    fn vote_thresholds() {
        let rs = vec![
            result(Method::Correlation, &[0, 1, 2]),
            result(Method::FeatureSimilarity, &[0, 1, 2]),
            result(Method::Laplacian, &[0, 2, 5]),
            result(Method::Spectral, &[0, 5, 7]),
            result(Method::MultiCluster, &[0, 7, 8]),
            result(Method::Greedy, &[0, 9, 8]),
        ];
        // 0 in six, 2 in three, 1/5/7/8 in two
        assert_eq!(ensemble_vote(&rs).unwrap(), vec![0, 2]);
        let mut rev = rs.clone();
        rev.reverse();
        assert_eq!(ensemble_vote(&rev).unwrap(), vec![0, 2]);
    }

    #[test]
    fn vote_rejects_mixed_universes() {
        let mut rs: Vec<_> = Method::ALL.iter().map(|&m| result(m, &[1])).collect();
        rs[3].universe = 11;
        assert!(ensemble_vote(&rs).is_err());
        assert!(ensemble_vote(&rs[..5]).is_err());
    }

    #[test]
    fn trace_text_round_trip() {
        let f = DMatrix::from_fn(16, 12, |i, j| (((i + 3) * (j + 5) * 37) % 17) as f64);
        let t = self_select(&f).unwrap();
        assert_eq!(SelectionTrace::from_text(&t.to_text()).unwrap(), t);
    }
}
