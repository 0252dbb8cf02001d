//! Independent oracles shared by the property and acceptance tests.
//!
//! Nothing here calls into the solver's internals: mitigated counts are
//! recomputed from the closed form or found by brute force over the
//! addition lattice.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;
use unibias_core::mitigation::{minimal_mitigation, minimality_residual, KTargets};
use unibias_core::schema::{enumerate_groups, Attribute, FairnessSchema};
use unibias_core::{MitigationPlan, SummaryTable};

pub fn schema_with(domains: &[usize], k: usize) -> FairnessSchema {
    let sensitive = domains
        .iter()
        .enumerate()
        .map(|(a, &d)| Attribute::new(format!("a{a}"), (0..d).map(|v| format!("v{v}"))))
        .collect();
    FairnessSchema::new(sensitive, Attribute::new("y", (0..k).map(|l| format!("l{l}")))).unwrap()
}

/// Random summary with up to 4 attributes (domains 1..=3), 2..=5 labels and
/// counts up to `max_count`. A quarter of the cells are zero.
pub fn random_summary<R: Rng>(rng: &mut R, max_count: u64) -> SummaryTable {
    let attrs = rng.gen_range(1..=4);
    let domains: Vec<usize> = (0..attrs).map(|_| rng.gen_range(1..=3)).collect();
    let k = rng.gen_range(2..=5);
    let schema = schema_with(&domains, k);
    let counts = (0..schema.num_cells())
        .map(|_| if rng.gen_bool(0.25) { 0 } else { rng.gen_range(0..=max_count) })
        .collect();
    SummaryTable::from_counts(schema, counts).unwrap()
}

pub fn labels_nonempty(s: &SummaryTable) -> bool {
    s.label_totals().iter().all(|&t| t > 0)
}

/// `a/b < c/d` for non-negative fractions with positive denominators.
fn lt(a: u128, b: u128, c: u128, d: u128) -> bool {
    a * d < c * b
}

/// Whether some `t` has `⌊w_y·t⌋ = m_y` for every label, i.e. the counts
/// `m` are exactly proportional to the weights up to flooring.
/// Weights are fractions `(num, den)` with `num > 0`.
pub fn floor_consistent(m: &[u64], w: &[(u128, u128)]) -> bool {
    // t ∈ [m_y·den/num, (m_y+1)·den/num) for each y
    let mut lo = (0u128, 1u128);
    let mut hi: Option<(u128, u128)> = None;
    for (&my, &(num, den)) in m.iter().zip(w) {
        let l = (my as u128 * den, num);
        let h = ((my as u128 + 1) * den, num);
        if lt(lo.0, lo.1, l.0, l.1) {
            lo = l;
        }
        if hi.is_none_or(|x| lt(h.0, h.1, x.0, x.1)) {
            hi = Some(h);
        }
    }
    let hi = hi.expect("at least one label");
    lt(lo.0, lo.1, hi.0, hi.1)
}

/// Smallest (by total, then lexicographically) `m ≥ c` that is
/// floor-consistent with `w`, by exhaustive search over `Σ(m − c) ≤ bound`.
pub fn smallest_valid(c: &[u64], w: &[(u128, u128)], bound: u64) -> Option<Vec<u64>> {
    fn walk(
        c: &[u64],
        w: &[(u128, u128)],
        m: &mut Vec<u64>,
        left: u64,
    ) -> bool {
        let y = m.len();
        if y + 1 == c.len() {
            m.push(c[y] + left);
            if floor_consistent(m, w) {
                return true;
            }
            m.pop();
            return false;
        }
        for d in 0..=left {
            m.push(c[y] + d);
            if walk(c, w, m, left - d) {
                return true;
            }
            m.pop();
        }
        false
    }
    for total in 0..=bound {
        let mut m = Vec::with_capacity(c.len());
        if walk(c, w, &mut m, total) {
            return Some(m);
        }
    }
    None
}

/// Oracle additions for one row under `K ≡ 1`.
pub fn oracle_unit(row: &[u64], label_totals: &[u64]) -> Vec<u64> {
    let w: Vec<(u128, u128)> = label_totals.iter().map(|&t| (t as u128, 1)).collect();
    let n: u64 = label_totals.iter().sum();
    let m = smallest_valid(row, &w, 4 * n.max(1)).expect("a valid vector exists within 4n");
    m.iter().zip(row).map(|(a, b)| a - b).collect()
}

/// Closed form recomputed directly: pivot by cross-multiplication, then
/// `⌊n^y·(c_i + free)/n^{y_i}⌋ − c_y`, in signed arithmetic so a negative
/// result would show up.
pub fn closed_form(row: &[u64], totals: &[u64], free: u64) -> (usize, Vec<i128>) {
    let mut best = 0;
    for j in 0..row.len() {
        if (row[j] as u128) * (totals[best] as u128) > (row[best] as u128) * (totals[j] as u128) {
            best = j;
        }
    }
    let x = row[best] as u128 + free as u128;
    let out = totals
        .iter()
        .zip(row)
        .map(|(&t, &c)| ((t as u128 * x) / totals[best] as u128) as i128 - c as i128)
        .collect();
    (best, out)
}

pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// `max(1, (k−1)·K·f_y) / (K·f_y·s^mit)`: the per-cell bound on
/// `|K − f_{s,y}/f_y|` after a floor plan, relative to the source `f_y`.
pub fn cell_bound(k: usize, target_rate: f64, s_mit: u64) -> f64 {
    let a = 1f64.max((k as f64 - 1.0) * target_rate);
    a / (target_rate * s_mit as f64)
}

const EPS: f64 = 1e-9;

/// Minimality residual `C ∈ [0, k)` for every group of a floor plan.
pub fn check_minimality(summary: &SummaryTable, plan: &MitigationPlan) -> Result<(), String> {
    let k = summary.k() as i128;
    for base in 0..summary.num_groups() {
        let (num, den) = minimality_residual(summary, plan, base).ok_or("plan has no pivot")?;
        if num < 0 || num >= k * den as i128 {
            return Err(format!("group {base}: C = {num}/{den} outside [0, {k})"));
        }
    }
    Ok(())
}

/// Every base cell of `after` is within the rounding slack of its target
/// `K·f_y` (source frequencies), and every wildcard group is within the sum
/// of the slacks of its base cells. Returns the largest bound margin used.
pub fn check_slack(before: &SummaryTable, after: &SummaryTable, targets: &KTargets) -> Result<(), String> {
    let schema = before.schema();
    let k = before.k();
    let n = before.n() as f64;
    let f: Vec<f64> = before.label_totals().iter().map(|&t| t as f64 / n).collect();
    for key in enumerate_groups(schema, true) {
        let bases = schema.matching_bases(&key);
        for label in 0..k {
            let mut sum_dev = 0.0;
            let mut sum_target = 0.0;
            let mut bound = 0.0;
            for &b in &bases {
                let s_mit = after.group_total(b);
                if s_mit == 0 {
                    continue;
                }
                let rate = targets.get_f64(b, label) * f[label];
                let dev = after.cell(b, label) as f64 - rate * s_mit as f64;
                if key.is_base() {
                    let rel = (dev / (rate * s_mit as f64)).abs();
                    let bd = cell_bound(k, rate, s_mit);
                    if rel >= bd + EPS {
                        return Err(format!(
                            "cell {}/{label}: |K − f_sy/f_y| = {rel} ≥ {bd}",
                            schema.display(&key)
                        ));
                    }
                }
                sum_dev += dev;
                sum_target += rate * s_mit as f64;
                bound += cell_bound(k, rate, s_mit);
            }
            if !key.is_base() && sum_target > 0.0 {
                let rel = (sum_dev / sum_target).abs();
                if rel >= bound + EPS {
                    return Err(format!(
                        "group {}/{label}: wildcard deviation {rel} ≥ summed slack {bound}",
                        schema.display(&key)
                    ));
                }
            }
        }
    }
    Ok(())
}

/// `max_y |f_y(after) − f_y(before)| ≤ k·G/n_after`, recomputed directly.
pub fn check_frequencies(before: &SummaryTable, after: &SummaryTable) -> Result<(), String> {
    let tol = (before.k() * before.num_groups()) as f64 / after.n() as f64;
    for y in 0..before.k() {
        let fb = before.label_total(y) as f64 / before.n() as f64;
        let fa = after.label_total(y) as f64 / after.n() as f64;
        if (fa - fb).abs() > tol {
            return Err(format!("label {y}: |{fa} − {fb}| > {tol}"));
        }
    }
    Ok(())
}

pub fn all_rows(k: usize, max: u64) -> Vec<Vec<u64>> {
    let mut rows = vec![vec![]];
    for _ in 0..k {
        rows = rows
            .into_iter()
            .flat_map(|r| {
                (0..=max).map(move |c| {
                    let mut r = r.clone();
                    r.push(c);
                    r
                })
            })
            .collect();
    }
    rows
}

/// Every summary of the given shape with counts ≤ 6.
pub fn exhaust_shape(groups: usize, k: usize) -> usize {
    let schema = schema_with(&[groups], k);
    let rows = all_rows(k, 6);
    let mut idx = vec![0usize; groups];
    let mut checked = 0;
    loop {
        let counts: Vec<u64> = idx.iter().flat_map(|&i| rows[i].clone()).collect();
        let s = SummaryTable::from_counts(schema.clone(), counts).unwrap();
        let got = minimal_mitigation(&s, &KTargets::ones(s.schema()));
        if s.n() == 0 || !labels_nonempty(&s) {
            assert!(got.is_err());
        } else {
            let plan = got.unwrap();
            for b in 0..groups {
                assert_eq!(
                    plan.groups()[b].delta,
                    oracle_unit(s.group_row(b), s.label_totals()),
                    "{:?}",
                    s.counts()
                );
            }
            checked += 1;
        }
        let mut pos = 0;
        loop {
            if pos == groups {
                return checked;
            }
            idx[pos] += 1;
            if idx[pos] < rows.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// 3 groups × 3 labels: a group's plan depends only on its own row and the
/// label totals, so sweeping every (row, rest-of-table) pair with the rest
/// split across the other two groups covers all 7⁹ summaries.
pub fn oracle_three_by_three() -> usize {
    let schema = schema_with(&[3], 3);
    let rows = all_rows(3, 6);
    let rests = all_rows(3, 12);
    let mut checked = 0;
    for c in &rows {
        for r in &rests {
            let r1: Vec<u64> = r.iter().map(|&x| x.min(6)).collect();
            let r2: Vec<u64> = r.iter().zip(&r1).map(|(a, b)| a - b).collect();
            let counts: Vec<u64> = c.iter().chain(&r1).chain(&r2).copied().collect();
            let s = SummaryTable::from_counts(schema.clone(), counts).unwrap();
            if !labels_nonempty(&s) {
                continue;
            }
            let plan = minimal_mitigation(&s, &KTargets::ones(s.schema())).unwrap();
            assert_eq!(plan.groups()[0].delta, oracle_unit(c, s.label_totals()), "{c:?} {r:?}");
            checked += 1;
        }
    }
    checked
}

