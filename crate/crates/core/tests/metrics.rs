use proptest::prelude::*;
use scefis_core::metrics::{jaccard, paired_t_test, summarize, BinaryMask};

/// Student t density, integrated with composite Simpson from 0 to `x`.
fn t_cdf_oracle(x: f64, df: f64) -> f64 {
    let ln_gamma = |z: f64| statrs_free_ln_gamma(z);
    let c = (ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0)).exp()
        / (df * std::f64::consts::PI).sqrt();
    let pdf = |t: f64| c * (1.0 + t * t / df).powf(-(df + 1.0) / 2.0);
    let n = 20_000;
    let h = x / n as f64;
    let mut s = pdf(0.0) + pdf(x);
    for i in 1..n {
        s += pdf(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    0.5 + s * h / 3.0
}

/// Lanczos approximation, good to ~1e-15 for positive arguments.
fn statrs_free_ln_gamma(z: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let z = z - 1.0;
    let mut x = C[0];
    for (i, c) in C.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}

fn t_quantile_oracle(p: f64, df: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 50.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if t_cdf_oracle(mid, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn ci_of_ten_uses_the_t_quantile() {
    let xs = [0.61, 0.72, 0.55, 0.80, 0.67, 0.49, 0.70, 0.74, 0.58, 0.66];
    let s = summarize(&xs).unwrap();
    let q = t_quantile_oracle(0.975, 9.0);
    assert!((q - 2.2622).abs() < 1e-4, "{q}");
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((s.ci_lo - (m - q * sd / n.sqrt())).abs() < 1e-9);
    assert!((s.ci_hi - (m + q * sd / n.sqrt())).abs() < 1e-9);
}

#[test]
fn paired_t_matches_formula() {
    let a = [0.1, 0.2, 0.3, 0.4];
    let b = [0.2, 0.3, 0.4, 0.5];
    let degenerate = paired_t_test(&a, &b).unwrap();
    assert!(degenerate.degenerate && degenerate.p_value == 0.0);

    let b = [0.2, 0.31, 0.39, 0.52];
    let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let m = d.iter().sum::<f64>() / n;
    let sd = (d.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let t = paired_t_test(&a, &b).unwrap();
    assert!((t.statistic - m / (sd / n.sqrt())).abs() < 1e-9);
    let p = 2.0 * (1.0 - t_cdf_oracle(t.statistic.abs(), n - 1.0));
    assert!((t.p_value - p).abs() < 1e-7, "{} vs {p}", t.p_value);

    let same = paired_t_test(&a, &a).unwrap();
    assert_eq!((same.statistic, same.p_value), (0.0, 1.0));
}

#[test]
fn jaccard_worked_example() {
    let s = BinaryMask::from_fn(2, 2, |x, y| (x, y) == (0, 0) || (x, y) == (0, 1));
    let g = BinaryMask::from_fn(2, 2, |x, y| (x, y) == (0, 1) || (x, y) == (1, 1));
    assert!((jaccard(&s, &g).unwrap() - 1.0 / 3.0).abs() < 1e-15);
}

fn mask_pair() -> impl Strategy<Value = (BinaryMask, BinaryMask)> {
    (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
        (
            proptest::collection::vec(any::<bool>(), w * h),
            proptest::collection::vec(any::<bool>(), w * h),
        )
            .prop_map(move |(a, b)| {
                (
                    BinaryMask::new(w, h, a).unwrap(),
                    BinaryMask::new(w, h, b).unwrap(),
                )
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn jaccard_is_symmetric((s, g) in mask_pair()) {
        prop_assert_eq!(jaccard(&s, &g).unwrap(), jaccard(&g, &s).unwrap());
    }

    #[test]
    fn jaccard_is_one_only_for_equal_masks((s, g) in mask_pair()) {
        let j = jaccard(&s, &g).unwrap();
        prop_assert!((0.0..=1.0).contains(&j));
        prop_assert_eq!(j == 1.0, s == g);
    }

    #[test]
    fn subset_jaccard_is_area_ratio((s, g) in mask_pair()) {
        let (w, h) = g.dims();
        let sub = BinaryMask::from_fn(w, h, |x, y| s.get(x, y) && g.get(x, y));
        prop_assume!(g.count() > 0);
        let j = jaccard(&sub, &g).unwrap();
        prop_assert!((j - sub.count() as f64 / g.count() as f64).abs() < 1e-15);
    }

    #[test]
    fn ci_narrows_with_n_at_fixed_sd(base in proptest::collection::vec(0.0f64..1.0, 30), sd in 0.01f64..0.3, n in 2usize..29) {
        let scaled = |k: usize| {
            let v = &base[..k];
            let m = v.iter().sum::<f64>() / k as f64;
            let s = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (k as f64 - 1.0)).sqrt();
            v.iter().map(|x| 0.5 + (x - m) / s * sd).collect::<Vec<_>>()
        };
        let a = scaled(n);
        let b = scaled(n + 1);
        prop_assume!(a.iter().chain(&b).all(|v| v.is_finite()));
        let (sa, sb) = (summarize(&a).unwrap(), summarize(&b).unwrap());
        prop_assert!(sb.ci_hi - sb.ci_lo <= sa.ci_hi - sa.ci_lo + 1e-12);
        prop_assert!(sa.ci_lo <= sa.mean && sa.mean <= sa.ci_hi);
    }
}
