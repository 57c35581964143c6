//! Takagi–Sugeno rule bases: genesis by subtractive clustering, inference,
//! output aggregation and pruning-gated evolution.

mod aggregate;
mod cluster;

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use self::aggregate::{aggregate, aggregate_in, zmf, Aggregate, SPREAD_HIGH, SPREAD_LOW};
pub use self::cluster::{bounds, subtractive_clustering, ClusterParams, DEFAULT_RIDGE};

use crate::error::{Error, Result};
use crate::keyfeat::Normalization;

/// Current on-disk format of [`RuleBase`].
pub const RULEBASE_FORMAT: u32 = 1;

/// Firing total below which the nearest rule answers alone.
pub const MIN_FIRING: f64 = 1e-12;

/// One first-order Takagi–Sugeno rule with Gaussian antecedents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub center: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Linear coefficient per input followed by the constant term.
    pub consequent: Vec<f64>,
}

impl Rule {
    pub fn log_firing(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.center.iter().zip(&self.sigma))
            .map(|(v, (c, s))| -(v - c) * (v - c) / (2.0 * s * s))
            .sum()
    }

    pub fn output(&self, x: &[f64]) -> f64 {
        let d = x.len();
        x.iter()
            .zip(&self.consequent[..d])
            .map(|(v, a)| v * a)
            .sum::<f64>()
            + self.consequent[d]
    }
}

/// Pruning thresholds on normalized inputs and on the parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pruning {
    pub eps_x: f64,
    pub eps_o: f64,
}

impl Pruning {
    /// `ε_x = 0.10·√N_L`, `ε_o = 5%` of the grid span.
    pub fn defaults(input_dim: usize, grid_span: f64) -> Self {
        Self {
            eps_x: 0.10 * (input_dim as f64).sqrt(),
            eps_o: 0.05 * grid_span,
        }
    }
}

/// Indices of candidate rows not matched by any stored row, where a match
/// means `‖x − m_i‖ ≤ ε_x` and `|t − o_i| ≤ ε_o`.
pub fn novel_rows(
    m: &[Vec<f64>],
    o: &[f64],
    candidates: &[Vec<f64>],
    t: f64,
    pruning: &Pruning,
) -> Vec<usize> {
    candidates
        .iter()
        .enumerate()
        .filter(|(_, x)| {
            !m.iter().zip(o).any(|(mi, &oi)| {
                let d = x
                    .iter()
                    .zip(mi)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                d <= pruning.eps_x && (t - oi).abs() <= pruning.eps_o
            })
        })
        .map(|(i, _)| i)
        .collect()
}

/// Firing strengths normalized to sum 1, or the nearest rule alone when
/// the total is degenerate (matches [`infer_row`]).
fn normalized_firing(rules: &[Rule], x: &[f64]) -> Vec<f64> {
    let w: Vec<f64> = rules.iter().map(|r| r.log_firing(x).exp()).collect();
    let total: f64 = w.iter().sum();
    if !(total >= MIN_FIRING) {
        return nearest_only(rules, x);
    }
    w.iter().map(|v| v / total).collect()
}

/// Rules from normalized inputs `m` and outputs `o`: one rule per
/// subtractive-clustering center of the joint space, consequents fitted by
/// global least squares (minimum-norm SVD solution) with a ridge penalty
/// `params.ridge` on the linear terms. Intercepts are not penalized.
pub fn generate_rules(m: &[Vec<f64>], o: &[f64], params: &ClusterParams) -> Result<Vec<Rule>> {
    let first = m
        .first()
        .ok_or_else(|| Error::contract("rule generation needs at least one row"))?;
    if m.len() != o.len() {
        return Err(Error::contract(format!(
            "{} input rows but {} outputs",
            m.len(),
            o.len()
        )));
    }
    let dim = first.len();
    if dim == 0 || m.iter().any(|r| r.len() != dim) {
        return Err(Error::contract("input rows must share a positive width"));
    }
    let joint: Vec<Vec<f64>> = m
        .iter()
        .zip(o)
        .map(|(r, &y)| r.iter().copied().chain(std::iter::once(y)).collect())
        .collect();
    let centers = subtractive_clustering(&joint, params);
    let b = bounds(&joint);
    let sigma: Vec<f64> = b[..dim]
        .iter()
        .map(|(_, range)| params.radius * range / 8f64.sqrt())
        .collect();
    let mut rules: Vec<Rule> = centers
        .iter()
        .map(|&c| Rule {
            center: m[c].clone(),
            sigma: sigma.clone(),
            consequent: vec![0.0; dim + 1],
        })
        .collect();

    let w: Vec<Vec<f64>> = m.iter().map(|x| normalized_firing(&rules, x)).collect();
    let theta = if params.ridge > 0.0 {
        ridge_consequents(m, &w, o, params.ridge)?
    } else {
        plain_consequents(m, &w, o)?
    };
    for (rule, c) in rules.iter_mut().zip(theta) {
        rule.consequent = c;
    }
    Ok(rules)
}

/// Minimum-norm least squares over all `R·(d+1)` coefficients.
fn plain_consequents(m: &[Vec<f64>], w: &[Vec<f64>], o: &[f64]) -> Result<Vec<Vec<f64>>> {
    let (dim, n_rules) = (m[0].len(), w[0].len());
    let mut a = DMatrix::zeros(m.len(), n_rules * (dim + 1));
    for (i, x) in m.iter().enumerate() {
        for (r, wr) in w[i].iter().enumerate() {
            let base = r * (dim + 1);
            for d in 0..dim {
                a[(i, base + d)] = wr * x[d];
            }
            a[(i, base + dim)] = *wr;
        }
    }
    let svd = a.svd(true, true);
    let cutoff = svd.singular_values.max() * 1e-10;
    let theta = svd
        .solve(&DVector::from_column_slice(o), cutoff)
        .map_err(|e| Error::contract(format!("consequent fit failed: {e}")))?;
    Ok(theta
        .as_slice()
        .chunks(dim + 1)
        .map(|c| c.to_vec())
        .collect())
}

/// Minimizes `‖Sβ + Wα − y‖² + λ‖β‖²` where `S` holds the firing-weighted
/// inputs (slopes) and `W` the firing strengths (intercepts).
///
/// With `Q` the projector onto the complement of `col(W)`, the slopes are
/// `β = SᵀQ(QSSᵀQ + λI)⁻¹Qy` and the intercepts the minimum-norm
/// `α = W⁺(y − Sβ)`. Only `n×n` systems appear, and `SSᵀ` is the
/// elementwise product `(XXᵀ)∘(WWᵀ)`.
fn ridge_consequents(
    m: &[Vec<f64>],
    w: &[Vec<f64>],
    o: &[f64],
    ridge: f64,
) -> Result<Vec<Vec<f64>>> {
    let n = m.len();
    let (dim, n_rules) = (m[0].len(), w[0].len());
    let wm = DMatrix::from_fn(n, n_rules, |i, r| w[i][r]);
    let xm = DMatrix::from_fn(n, dim, |i, d| m[i][d]);
    let y = DVector::from_column_slice(o);

    let svd = wm.clone().svd(true, true);
    let cutoff = svd.singular_values.max() * 1e-10;
    let u = svd.u.as_ref().expect("u requested");
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > cutoff)
        .collect();
    let ur = u.select_columns(&keep);
    let q = DMatrix::<f64>::identity(n, n) - &ur * ur.transpose();

    let gram = (&xm * xm.transpose()).component_mul(&(&wm * wm.transpose()));
    let mut system = &q * gram * &q;
    for i in 0..n {
        system[(i, i)] += ridge;
    }
    let rhs = &q * &y;
    let z = system
        .cholesky()
        .ok_or_else(|| Error::contract("consequent system is not positive definite"))?
        .solve(&rhs);
    let qz = &q * z;
    // β_r = Σ_i w_ir (Qz)_i x_i
    let beta = DMatrix::from_fn(n_rules, dim, |r, d| {
        (0..n).map(|i| w[i][r] * qz[i] * m[i][d]).sum::<f64>()
    });
    let fitted = DVector::from_fn(n, |i, _| {
        (0..n_rules)
            .map(|r| w[i][r] * (0..dim).map(|d| beta[(r, d)] * m[i][d]).sum::<f64>())
            .sum::<f64>()
    });
    let alpha = svd
        .solve(&(y - fitted), cutoff)
        .map_err(|e| Error::contract(format!("intercept fit failed: {e}")))?;
    Ok((0..n_rules)
        .map(|r| {
            let mut c: Vec<f64> = (0..dim).map(|d| beta[(r, d)]).collect();
            c.push(alpha[r]);
            c
        })
        .collect())
}

fn nearest_index(rules: &[Rule], x: &[f64]) -> usize {
    rules
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, r)| {
            let l = r.log_firing(x);
            if l > best.1 {
                (i, l)
            } else {
                best
            }
        })
        .0
}

fn nearest_only(rules: &[Rule], x: &[f64]) -> Vec<f64> {
    let k = nearest_index(rules, x);
    (0..rules.len())
        .map(|i| if i == k { 1.0 } else { 0.0 })
        .collect()
}

/// Weighted-average output of `rules` at normalized input `x`.
pub fn infer_row(rules: &[Rule], x: &[f64]) -> f64 {
    let w: Vec<f64> = rules.iter().map(|r| r.log_firing(x).exp()).collect();
    let total: f64 = w.iter().sum();
    if !(total >= MIN_FIRING) {
        return rules[nearest_index(rules, x)].output(x);
    }
    rules
        .iter()
        .zip(&w)
        .map(|(r, wr)| wr * r.output(x))
        .sum::<f64>()
        / total
}

/// Result of offering one image's rows to the rule base.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvolveOutcome {
    pub appended: usize,
    pub discarded: usize,
    pub rules: usize,
}

/// Rule base together with the data it was generated from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleBase {
    pub format: u32,
    pub input_dim: usize,
    pub normalization: Normalization,
    /// Stored inputs (normalized).
    pub m_matrix: Vec<Vec<f64>>,
    pub o_vector: Vec<f64>,
    pub pruning: Pruning,
    pub cluster: ClusterParams,
    pub rules: Vec<Rule>,
}

impl RuleBase {
    /// Builds a rule base from already normalized rows.
    pub fn from_normalized(
        normalization: Normalization,
        m_matrix: Vec<Vec<f64>>,
        o_vector: Vec<f64>,
        pruning: Pruning,
        cluster: ClusterParams,
    ) -> Result<Self> {
        let rules = generate_rules(&m_matrix, &o_vector, &cluster)?;
        let input_dim = m_matrix[0].len();
        if normalization.width() != input_dim {
            return Err(Error::contract("normalization width differs from inputs"));
        }
        Ok(Self {
            format: RULEBASE_FORMAT,
            input_dim,
            normalization,
            m_matrix,
            o_vector,
            pruning,
            cluster,
            rules,
        })
    }

    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    fn normalize(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter()
            .map(|r| {
                if r.len() != self.input_dim {
                    Err(Error::contract(format!(
                        "input width {} differs from rule base width {}",
                        r.len(),
                        self.input_dim
                    )))
                } else {
                    Ok(self.normalization.apply(r))
                }
            })
            .collect()
    }

    /// One output per row of selected, not yet normalized features.
    pub fn infer(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(self
            .normalize(rows)?
            .iter()
            .map(|x| infer_row(&self.rules, x))
            .collect())
    }

    /// Appends the rows of one image that are not already represented and
    /// regenerates the rules when anything was appended.
    pub fn prune_and_evolve(&mut self, rows: &[Vec<f64>], t_b: f64) -> Result<EvolveOutcome> {
        let x = self.normalize(rows)?;
        let keep = novel_rows(&self.m_matrix, &self.o_vector, &x, t_b, &self.pruning);
        if !keep.is_empty() {
            let mut m = self.m_matrix.clone();
            let mut o = self.o_vector.clone();
            for &i in &keep {
                m.push(x[i].clone());
                o.push(t_b);
            }
            self.rules = generate_rules(&m, &o, &self.cluster)?;
            self.m_matrix = m;
            self.o_vector = o;
        }
        Ok(EvolveOutcome {
            appended: keep.len(),
            discarded: rows.len() - keep.len(),
            rules: self.rules.len(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rb: RuleBase = serde_json::from_str(text)?;
        if rb.format != RULEBASE_FORMAT {
            return Err(Error::Parse(format!(
                "unsupported rule base format {} (expected {RULEBASE_FORMAT})",
                rb.format
            )));
        }
        if rb.rules.is_empty() || rb.m_matrix.len() != rb.o_vector.len() {
            return Err(Error::Parse("rule base file is inconsistent".into()));
        }
        Ok(rb)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(m: Vec<Vec<f64>>, o: Vec<f64>) -> RuleBase {
        let dim = m[0].len();
        RuleBase::from_normalized(
            Normalization::identity(dim),
            m,
            o,
            Pruning::defaults(dim, 1.0),
            ClusterParams::default(),
        )
        .unwrap()
    }

    /// Augmented least squares: √λ rows under the slope columns.
    fn augmented_oracle(m: &[Vec<f64>], w: &[Vec<f64>], o: &[f64], lam: f64) -> Vec<f64> {
        let (n, dim, r) = (m.len(), m[0].len(), w[0].len());
        let p = r * (dim + 1);
        let mut a = DMatrix::zeros(n + r * dim, p);
        let mut y = DVector::zeros(n + r * dim);
        for i in 0..n {
            for k in 0..r {
                for d in 0..dim {
                    a[(i, k * (dim + 1) + d)] = w[i][k] * m[i][d];
                }
                a[(i, k * (dim + 1) + dim)] = w[i][k];
            }
            y[i] = o[i];
        }
        for k in 0..r {
            for d in 0..dim {
                a[(n + k * dim + d, k * (dim + 1) + d)] = lam.sqrt();
            }
        }
        a.svd(true, true)
            .solve(&y, 1e-13)
            .unwrap()
            .as_slice()
            .to_vec()
    }

    #[test]
    fn dual_ridge_matches_augmented_least_squares() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for (n, dim, r) in [(12, 3, 4), (6, 4, 5), (20, 2, 2)] {
            let m: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            let w: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    let raw: Vec<f64> = (0..r).map(|_| rng.random_range(0.01..1.0)).collect();
                    let t: f64 = raw.iter().sum();
                    raw.iter().map(|v| v / t).collect()
                })
                .collect();
            let o: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            for lam in [0.01, 1.0] {
                let got: Vec<f64> = ridge_consequents(&m, &w, &o, lam).unwrap().concat();
                let want = augmented_oracle(&m, &w, &o, lam);
                for (g, e) in got.iter().zip(&want) {
                    assert!(
                        (g - e).abs() < 1e-8,
                        "{g} vs {e} (n={n}, d={dim}, r={r}, λ={lam})"
                    );
                }
            }
        }
    }

    #[test]
    fn single_row_is_reproduced() {
        let rb = base(vec![vec![0.3, -1.2]], vec![0.42]);
        assert_eq!(rb.rule_count(), 1);
        let y = rb.infer(&[vec![0.3, -1.2]]).unwrap()[0];
        assert!((y - 0.42).abs() < 1e-12);
    }

    #[test]
    fn constant_rule_answers_everywhere() {
        let rule = Rule {
            center: vec![0.0, 0.0],
            sigma: vec![1.0, 1.0],
            consequent: vec![0.0, 0.0, 0.7],
        };
        for x in [[0.0, 0.0], [5.0, -3.0], [1e3, 1e3]] {
            assert_eq!(infer_row(std::slice::from_ref(&rule), &x), 0.7);
        }
    }

    #[test]
    fn identical_rows_identical_outputs() {
        let rb = base(vec![vec![0.0], vec![1.0], vec![2.0]], vec![0.1, 0.2, 0.4]);
        let out = rb.infer(&vec![vec![0.7]; 8]).unwrap();
        assert!(out.iter().all(|&v| v == out[0]));
    }

    #[test]
    fn duplicate_candidate_is_discarded() {
        let mut rb = base(vec![vec![0.0, 0.0], vec![3.0, 3.0]], vec![0.2, 0.6]);
        let before = rb.clone();
        let out = rb.prune_and_evolve(&[vec![0.0, 0.0]], 0.2).unwrap();
        assert_eq!(out.appended, 0);
        assert_eq!(rb, before);
        let out = rb.prune_and_evolve(&[vec![10.0, 10.0]], 0.2).unwrap();
        assert_eq!(out.appended, 1);
        assert_eq!(rb.m_matrix.len(), 3);
    }

    #[test]
    fn zero_thresholds_only_drop_exact_duplicates() {
        let p = Pruning {
            eps_x: 0.0,
            eps_o: 0.0,
        };
        let m = vec![vec![1.0, 1.0]];
        let o = vec![0.5];
        let cand = vec![vec![1.0, 1.0], vec![1.0, 1.0 + 1e-12]];
        assert_eq!(novel_rows(&m, &o, &cand, 0.5, &p), vec![1]);
        assert_eq!(novel_rows(&m, &o, &cand, 0.5 + 1e-12, &p), vec![0, 1]);
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let rb = base(vec![vec![0.0, 1.0]], vec![0.5]);
        assert!(rb.infer(&[vec![1.0]]).is_err());
        assert!(generate_rules(&[], &[], &ClusterParams::default()).is_err());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let m: Vec<Vec<f64>> = (0..12)
            .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos() * 3.0])
            .collect();
        let o: Vec<f64> = (0..12).map(|i| 0.1 + 0.03 * i as f64).collect();
        let rb = base(m, o);
        let back = RuleBase::from_json(&rb.to_json().unwrap()).unwrap();
        assert_eq!(back, rb);
        let probe = vec![vec![0.123, -0.456]; 8];
        let a = rb.infer(&probe).unwrap();
        let b = back.infer(&probe).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
