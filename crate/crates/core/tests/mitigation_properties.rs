mod common;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use unibias_core::mitigation::{mitigate, minimal_mitigation, KTargets, MitigationOptions};
use unibias_core::schema::GroupKey;
use unibias_core::{apply_plan, general_solution, is_unbiased, Error, SummaryTable};

#[test]
fn oracle_small_shapes_exhaustive() {
    for (g, k) in [(1, 2), (1, 3), (2, 2), (2, 3), (3, 2)] {
        assert!(exhaust_shape(g, k) > 0);
    }
}

/// 2×2 summaries with K = (a, (n − a·n₀)/n₁) per group for a few `a`.
#[test]
fn oracle_k_targets_two_by_two() {
    let schema = schema_with(&[2], 2);
    let ks = [(1, 2), (4, 5), (6, 5), (3, 2)];
    for counts in all_rows(4, 6) {
        let s = SummaryTable::from_counts(schema.clone(), counts.clone()).unwrap();
        if !labels_nonempty(&s) {
            continue;
        }
        let (n, n0, n1) = (s.n() as i64, s.label_total(0) as i64, s.label_total(1) as i64);
        for &(a0, b0) in &ks {
            for &(a1, b1) in &ks {
                let second = |a: i64, b: i64| (b * n - a * n0, b * n1);
                let (p0, q0) = second(a0, b0);
                let (p1, q1) = second(a1, b1);
                if p0 <= 0 || p1 <= 0 {
                    continue;
                }
                let values = vec![rational(a0, b0), rational(p0, q0), rational(a1, b1), rational(p1, q1)];
                let k = KTargets::from_rationals(s.schema(), values).unwrap();
                let plan = minimal_mitigation(&s, &k).unwrap();
                let weights = [
                    [((a0 * n0) as u128, b0 as u128), (p0 as u128 * n1 as u128, q0 as u128)],
                    [((a1 * n0) as u128, b1 as u128), (p1 as u128 * n1 as u128, q1 as u128)],
                ];
                for (g, w) in weights.iter().enumerate() {
                    let row = s.group_row(g);
                    let m = smallest_valid(row, w, 400).expect("within bound");
                    let want: Vec<u64> = m.iter().zip(row).map(|(a, b)| a - b).collect();
                    assert_eq!(plan.groups()[g].delta, want, "{counts:?} K=({a0}/{b0},{a1}/{b1})");
                }
                let after = apply_plan(&s, &plan).unwrap();
                check_slack(&s, &after, &k).unwrap();
            }
        }
    }
}

/// Under general K the label totals become `f_y·Σ_s K_{s,y}·T_s / Σ_s T_s`
/// (a mixture over mitigated group sizes), so preservation is only expected
/// for K ≡ 1. Checked against that mixture exactly.
#[test]
fn general_targets_shift_label_frequencies_by_mixture() {
    let s = unibias_core::fixtures::compas_summary();
    let k = KTargets::preserve_marginal(&s, &[0]).unwrap();
    let after = apply_plan(&s, &minimal_mitigation(&s, &k).unwrap()).unwrap();
    for y in 0..3 {
        let fy = s.label_total(y) as f64 / s.n() as f64;
        let mix: f64 = (0..4)
            .map(|b| k.get_f64(b, y) * after.group_total(b) as f64)
            .sum::<f64>()
            / after.n() as f64;
        let got = after.label_total(y) as f64 / after.n() as f64;
        assert!((got - fy * mix).abs() <= 4.0 * 3.0 / after.n() as f64);
    }
}

#[test]
fn random_plans_satisfy_slack_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut done = 0;
    while done < 500 {
        let s = random_summary(&mut rng, 1000);
        if !labels_nonempty(&s) {
            continue;
        }
        let ones = KTargets::ones(s.schema());
        let plan = minimal_mitigation(&s, &ones).unwrap();
        let after = apply_plan(&s, &plan).unwrap();
        check_minimality(&s, &plan).unwrap();
        check_frequencies(&s, &after).unwrap();
        check_slack(&s, &after, &ones).unwrap();
        if s.schema().m() > 1 {
            if let Ok(k) = KTargets::preserve_marginal(&s, &[0]) {
                let plan = minimal_mitigation(&s, &k).unwrap();
                check_slack(&s, &apply_plan(&s, &plan).unwrap(), &k).unwrap();
            }
        }
        done += 1;
    }
}

#[test]
fn empty_label_is_rejected() {
    let schema = schema_with(&[2], 3);
    let s = SummaryTable::from_counts(schema, vec![1, 2, 0, 3, 4, 0]).unwrap();
    assert!(matches!(
        general_solution(&s, &GroupKey::base(vec![0]), 0),
        Err(Error::EmptyLabel(_))
    ));
}

fn arb_summary() -> impl Strategy<Value = SummaryTable> {
    (1usize..=4, 2usize..=5)
        .prop_flat_map(|(attrs, k)| (proptest::collection::vec(1usize..=3, attrs), Just(k)))
        .prop_flat_map(|(domains, k)| {
            let schema = schema_with(&domains, k);
            let cells = schema.num_cells();
            (Just(schema), proptest::collection::vec(0u64..=1_000_000, cells))
        })
        .prop_map(|(schema, counts)| SummaryTable::from_counts(schema, counts).unwrap())
        .prop_filter("labels present", labels_nonempty)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn general_solution_is_nonnegative(s in arb_summary(), free in 0u64..=1_000_000) {
        for (b, key) in s.schema().base_keys().enumerate() {
            let got = general_solution(&s, &key, free).unwrap();
            let (_, expect) = closed_form(s.group_row(b), s.label_totals(), free);
            prop_assert!(expect.iter().all(|&d| d >= 0));
            let expect: Vec<u64> = expect.into_iter().map(|d| d as u64).collect();
            prop_assert_eq!(got, expect);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn plans_are_minimal_and_preserve_frequencies(s in arb_summary()) {
        let ones = KTargets::ones(s.schema());
        let plan = minimal_mitigation(&s, &ones).unwrap();
        let after = apply_plan(&s, &plan).unwrap();
        prop_assert!(check_minimality(&s, &plan).is_ok());
        prop_assert!(check_frequencies(&s, &after).is_ok());
        if let Err(e) = check_slack(&s, &after, &ones) {
            prop_assert!(false, "{}", e);
        }
    }

    #[test]
    fn larger_free_vars_give_larger_plans(s in arb_summary(), a in 0u64..1000, extra in 0u64..1000) {
        let g = s.num_groups();
        let ones = KTargets::ones(s.schema());
        let lo = mitigate(&s, &ones, &MitigationOptions { free_vars: vec![a; g], ..Default::default() }).unwrap();
        let hi = mitigate(&s, &ones, &MitigationOptions { free_vars: vec![a + extra; g], ..Default::default() }).unwrap();
        for (x, y) in lo.additions().iter().zip(hi.additions()) {
            prop_assert!(*x <= y);
        }
    }

    #[test]
    fn mitigated_tables_are_unbiased_within_slack(s in arb_summary()) {
        let after = apply_plan(&s, &minimal_mitigation(&s, &KTargets::ones(s.schema())).unwrap()).unwrap();
        // Worst cell slack over the table: smallest s^mit·f_y.
        let n = after.n() as f64;
        let k = s.k() as f64;
        let mut worst = 0.0f64;
        for b in 0..after.num_groups() {
            for y in 0..s.k() {
                let s_mit = after.group_total(b) as f64;
                if s_mit == 0.0 { continue; }
                let fy = after.label_total(y) as f64 / n;
                // slack against source f_y plus label-frequency drift
                let drift = (k * after.num_groups() as f64) / n;
                worst = worst.max((k.max(1.0) + s_mit * drift) / (fy * s_mit));
            }
        }
        let check = is_unbiased(&after, worst).unwrap();
        prop_assert!(check.unbiased, "{:?}", check.worst);
    }
}
