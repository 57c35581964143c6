use proptest::prelude::*;
use scefis_core::fuzzy::*;
use scefis_core::keyfeat::Normalization;
use scefis_core::metrics::median;

fn rule_base(m: Vec<Vec<f64>>, o: Vec<f64>) -> RuleBase {
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

#[test]
fn separated_clusters_reproduce_their_outputs() {
    let mut m = Vec::new();
    let mut o = Vec::new();
    for i in 0..6 {
        let e = 0.05 * i as f64;
        m.push(vec![e, -e]);
        o.push(0.2);
        m.push(vec![10.0 + e, 10.0 - e]);
        o.push(0.7);
    }
    let rb = rule_base(m, o);
    assert_eq!(rb.rule_count(), 2);
    // closed-form bound: the far rule's membership at a center
    let r = &rb.rules;
    for (i, j) in [(0, 1), (1, 0)] {
        let far = r[j].log_firing(&r[i].center).exp();
        assert!(far < 1e-8, "{far}");
        let want = if r[i].center[0] < 5.0 { 0.2 } else { 0.7 };
        let got = rb.infer(&[r[i].center.clone()]).unwrap()[0];
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }
}

#[test]
fn isolated_rule_dominates_at_its_center() {
    let near = Rule {
        center: vec![0.0, 0.0],
        sigma: vec![0.5, 0.5],
        consequent: vec![0.3, -0.2, 0.4],
    };
    let far: Vec<Rule> = (1..4)
        .map(|k| Rule {
            center: vec![10.0 * 0.5 * k as f64 + 5.0, 0.0],
            sigma: vec![0.5, 0.5],
            consequent: vec![0.0, 0.0, 100.0],
        })
        .collect();
    // ≥ 10σ away: each far firing ≤ exp(−50); its pull on the output is
    // bounded by 3·exp(−50)·|100 − 0.4|
    let bound = 3.0 * (-50f64).exp() * 100.0;
    assert!(bound < 1e-6);
    let mut rules = vec![near.clone()];
    rules.extend(far.iter().cloned());
    let y = infer_row(&rules, &[0.0, 0.0]);
    assert!((y - near.output(&[0.0, 0.0])).abs() < 1e-6);
    // rule order does not matter
    rules.reverse();
    assert!((infer_row(&rules, &[0.0, 0.0]) - y).abs() < 1e-12);
}

#[test]
fn degenerate_firing_falls_back_to_nearest_rule() {
    let rules: Vec<Rule> = [0.0, 1.0]
        .iter()
        .map(|&c| Rule {
            center: vec![c],
            sigma: vec![0.01],
            consequent: vec![0.0, c + 5.0],
        })
        .collect();
    assert_eq!(infer_row(&rules, &[100.0]), 6.0);
    assert_eq!(infer_row(&rules, &[-100.0]), 5.0);
}

#[test]
fn regeneration_is_deterministic() {
    let m: Vec<Vec<f64>> = (0..40)
        .map(|i| {
            vec![
                (i as f64 * 0.7).sin(),
                (i as f64 * 1.3).cos(),
                (i % 5) as f64 * 0.2,
            ]
        })
        .collect();
    let o: Vec<f64> = (0..40).map(|i| 0.3 + 0.01 * (i % 7) as f64).collect();
    let a = generate_rules(&m, &o, &ClusterParams::default()).unwrap();
    let b = generate_rules(&m, &o, &ClusterParams::default()).unwrap();
    assert_eq!(a, b);
    assert!(a.len() <= m.len());
}

#[test]
fn aggregation_examples() {
    let mu = 0.4;
    // alternating ±d: sample sd = d·√(8/7) = 0.15·μ
    let d = 0.15 * mu * (7.0f64 / 8.0).sqrt();
    let t: Vec<f64> = (0..8)
        .map(|i| if i % 2 == 0 { mu - d } else { mu + d })
        .collect();
    let a = aggregate(&t).unwrap();
    assert!((a.sd - 0.15 * a.mean).abs() < 1e-12);
    assert!((a.weight - 0.5).abs() < 1e-9);
    assert!((a.value - 0.5 * (a.mean + a.median)).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rule_count_bounded_by_rows(rows in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 3), 1..40)) {
        let o: Vec<f64> = rows.iter().map(|r| (r[0] * 0.1).abs()).collect();
        let rules = generate_rules(&rows, &o, &ClusterParams::default()).unwrap();
        prop_assert!(!rules.is_empty() && rules.len() <= rows.len());
        prop_assert!(rules.iter().all(|r| r.sigma.iter().all(|&s| s > 0.0)));
    }

    #[test]
    fn evolution_never_shrinks_memory(
        batches in proptest::collection::vec((proptest::collection::vec(proptest::collection::vec(-2.0f64..2.0, 2), 8), 0.0f64..1.0), 1..8)
    ) {
        let mut rb = rule_base(batches[0].0.clone(), vec![batches[0].1; 8]);
        let mut offered = 8;
        let mut last = rb.m_matrix.len();
        for (rows, t) in &batches[1..] {
            let out = rb.prune_and_evolve(rows, *t).unwrap();
            offered += rows.len();
            prop_assert_eq!(out.appended + out.discarded, rows.len());
            prop_assert!(rb.m_matrix.len() >= last);
            prop_assert!(rb.m_matrix.len() <= offered);
            prop_assert!(rb.rule_count() <= rb.m_matrix.len());
            last = rb.m_matrix.len();
        }
    }

    #[test]
    fn constant_outputs_aggregate_to_themselves(c in 0.0f64..=256.0, n in 1usize..12) {
        prop_assert_eq!(aggregate(&vec![c; n]).unwrap().value, c);
    }

    #[test]
    fn wide_spread_gives_median(base in proptest::collection::vec(0.01f64..1.0, 8)) {
        let a = aggregate(&base).unwrap();
        if a.sd >= 0.2 * a.mean {
            prop_assert_eq!(a.value, median(&base));
        }
        prop_assert!(a.value >= base.iter().cloned().fold(f64::INFINITY, f64::min) - 1e-12);
        prop_assert!(a.value <= base.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1e-12);
    }
}
