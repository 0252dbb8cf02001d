//! Tuple-addition mitigation.
//!
//! For a base group `s` with pivot `i`, adding `Δ` tuples per label so that
//! `(sy + Δsy)/(K_{s,y}·n^y)` is the same for every label makes
//! `f_{s,y} = K_{s,y}·f_y`. Fixing `Δsy_i` (the free variable) fixes all
//! the others up to rounding:
//!
//! ```text
//! sy^mit = ⌊ (K_{s,y}·n^y)/(K_{s,i}·n^{y_i}) · (sy_i + Δsy_i) ⌋
//! ```
//!
//! Choosing `i = argmax_j sy_j/(K_{s,j}·n^{y_j})` keeps every `Δ ≥ 0`.

mod budget;
mod targets;

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{FairnessSchema, GroupKey};
use crate::summary::SummaryTable;

pub use budget::{
    budgeted_mitigation, BudgetOutcome, CostModel, CostModelExport, CostRule, CostRuleExport,
    FundingStatus, FundingStep, OrderEntry,
};
pub use targets::{KTargets, TargetCell, TargetsExport, IDENTITY_TOLERANCE};

/// How the exact mitigated count is turned into an integer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rounding {
    #[default]
    Floor,
    Nearest,
}

impl Rounding {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "floor" => Ok(Rounding::Floor),
            "nearest" => Ok(Rounding::Nearest),
            other => Err(Error::Malformed(format!("unknown rounding `{other}`"))),
        }
    }
}

/// Additions for one base group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupPlan {
    /// `None` for plans imported from explicit counts.
    pub pivot: Option<usize>,
    pub free_var: u64,
    pub delta: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MitigationPlan {
    schema: FairnessSchema,
    groups: Vec<GroupPlan>,
    targets: KTargets,
    rounding: Rounding,
    source_digest: String,
}

impl MitigationPlan {
    /// A plan from explicit cell-indexed additions, without solver metadata.
    pub fn from_additions(summary: &SummaryTable, additions: &[u64], targets: KTargets) -> Result<Self> {
        let schema = summary.schema();
        if additions.len() != schema.num_cells() {
            return Err(Error::SchemaMismatch(format!(
                "expected {} additions, got {}",
                schema.num_cells(),
                additions.len()
            )));
        }
        let groups = additions
            .chunks(schema.k())
            .map(|d| GroupPlan {
                pivot: None,
                free_var: 0,
                delta: d.to_vec(),
            })
            .collect();
        Ok(MitigationPlan {
            schema: schema.clone(),
            groups,
            targets,
            rounding: Rounding::Floor,
            source_digest: summary.digest(),
        })
    }

    pub fn schema(&self) -> &FairnessSchema {
        &self.schema
    }

    pub fn groups(&self) -> &[GroupPlan] {
        &self.groups
    }

    pub fn targets(&self) -> &KTargets {
        &self.targets
    }

    pub fn rounding(&self) -> Rounding {
        self.rounding
    }

    pub fn source_digest(&self) -> &str {
        &self.source_digest
    }

    pub fn delta(&self, base: usize, label: usize) -> u64 {
        self.groups[base].delta[label]
    }

    /// Cell-indexed additions.
    pub fn additions(&self) -> Vec<u64> {
        self.groups.iter().flat_map(|g| g.delta.iter().copied()).collect()
    }

    pub fn total_additions(&self) -> u64 {
        self.groups.iter().flat_map(|g| &g.delta).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.groups.iter().all(|g| g.delta.iter().all(|&d| d == 0))
    }

    pub fn to_export(&self) -> PlanExport {
        let schema = &self.schema;
        let groups = self
            .groups
            .iter()
            .enumerate()
            .map(|(base, g)| GroupPlanExport {
                group: schema.group_to_map(&schema.base_key(base)),
                pivot: g.pivot.map(|p| schema.label_name(p).to_string()),
                free_var: g.free_var,
                delta: g
                    .delta
                    .iter()
                    .enumerate()
                    .map(|(l, &d)| (schema.label_name(l).to_string(), d))
                    .collect(),
            })
            .collect();
        PlanExport {
            v: 1,
            targets: self.targets.to_export(schema),
            rounding: self.rounding,
            groups,
            total_additions: self.total_additions(),
            source_digest: self.source_digest.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_export()).expect("plan serializes")
    }

    /// Rebuilds a plan against the schema of `summary`. Groups not listed
    /// get no additions. The digest is kept as written; [`apply_plan`]
    /// checks it.
    pub fn from_export(export: &PlanExport, summary: &SummaryTable) -> Result<Self> {
        let schema = summary.schema();
        let k = schema.k();
        let mut groups = vec![
            GroupPlan {
                pivot: None,
                free_var: 0,
                delta: vec![0; k],
            };
            schema.num_base_groups()
        ];
        for g in &export.groups {
            let key = schema.group_from_map(&g.group)?;
            let base = schema.base_index_of(&key)?;
            let plan = &mut groups[base];
            plan.pivot = g.pivot.as_deref().map(|p| schema.label_index(p)).transpose()?;
            plan.free_var = g.free_var;
            for (label, &count) in &g.delta {
                plan.delta[schema.label_index(label)?] = count;
            }
        }
        Ok(MitigationPlan {
            schema: schema.clone(),
            groups,
            targets: KTargets::from_export(schema, &export.targets)?,
            rounding: export.rounding,
            source_digest: export.source_digest.clone(),
        })
    }

    pub fn from_json(text: &str, summary: &SummaryTable) -> Result<Self> {
        let export: PlanExport =
            serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
        Self::from_export(&export, summary)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPlanExport {
    pub group: BTreeMap<String, String>,
    #[serde(default)]
    pub pivot: Option<String>,
    #[serde(default)]
    pub free_var: u64,
    pub delta: BTreeMap<String, u64>,
}

/// JSON form of a [`MitigationPlan`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanExport {
    #[serde(default = "one")]
    pub v: u32,
    #[serde(default = "ones_export")]
    pub targets: TargetsExport,
    #[serde(default)]
    pub rounding: Rounding,
    pub groups: Vec<GroupPlanExport>,
    #[serde(default)]
    pub total_additions: u64,
    pub source_digest: String,
}

fn one() -> u32 {
    1
}

fn ones_export() -> TargetsExport {
    TargetsExport {
        default: 1.0,
        cells: Vec::new(),
    }
}

/// Solver knobs beyond the targets.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MitigationOptions {
    pub rounding: Rounding,
    /// One free variable per base group; empty means all zero.
    pub free_vars: Vec<u64>,
}

fn check_labels(summary: &SummaryTable) -> Result<()> {
    match summary.label_totals().iter().position(|&t| t == 0) {
        Some(l) => Err(Error::EmptyLabel(summary.schema().label_name(l).to_string())),
        None => Ok(()),
    }
}

fn to_u64(v: BigInt) -> Result<u64> {
    v.to_u64().ok_or(Error::Overflow)
}

/// Pivot and mitigated counts for one row, `K ≡ 1`, in exact `u128` arithmetic.
fn solve_row_unit(row: &[u64], totals: &[u64], free: u64, rounding: Rounding) -> Result<(usize, Vec<u64>)> {
    let mut pivot = 0;
    for j in 1..row.len() {
        // row_j / n_j > row_p / n_p
        if row[j] as u128 * totals[pivot] as u128 > row[pivot] as u128 * totals[j] as u128 {
            pivot = j;
        }
    }
    let x = row[pivot] as u128 + free as u128;
    let np = totals[pivot] as u128;
    let mitigated = totals
        .iter()
        .map(|&ny| {
            let num = (ny as u128).checked_mul(x).ok_or(Error::Overflow)?;
            let q = match rounding {
                Rounding::Floor => num / np,
                Rounding::Nearest => num
                    .checked_mul(2)
                    .and_then(|v| v.checked_add(np))
                    .ok_or(Error::Overflow)?
                    / (2 * np),
            };
            u64::try_from(q).map_err(|_| Error::Overflow)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((pivot, mitigated))
}

fn solve_row_targets(
    row: &[u64],
    totals: &[u64],
    ks: &[&BigRational],
    free: u64,
    rounding: Rounding,
) -> Result<(usize, Vec<u64>)> {
    let w: Vec<BigRational> = totals
        .iter()
        .zip(ks)
        .map(|(&ny, &k)| k * BigRational::from_integer(ny.into()))
        .collect();
    let mut pivot = 0;
    for j in 1..row.len() {
        let lhs = &w[pivot] * BigRational::from_integer(row[j].into());
        let rhs = &w[j] * BigRational::from_integer(row[pivot].into());
        if lhs > rhs {
            pivot = j;
        }
    }
    let x = BigRational::from_integer(BigInt::from(row[pivot]) + BigInt::from(free));
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let mitigated = w
        .iter()
        .map(|wj| {
            let q = wj * &x / &w[pivot];
            let r = match rounding {
                Rounding::Floor => q.floor(),
                Rounding::Nearest => (q + &half).floor(),
            };
            to_u64(r.to_integer())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((pivot, mitigated))
}

fn solve_group(
    summary: &SummaryTable,
    targets: &KTargets,
    base: usize,
    free: u64,
    rounding: Rounding,
) -> Result<GroupPlan> {
    let row = summary.group_row(base);
    let totals = summary.label_totals();
    let (pivot, mitigated) = if targets.is_ones() {
        solve_row_unit(row, totals, free, rounding)?
    } else {
        let ks: Vec<&BigRational> = (0..row.len()).map(|l| targets.get(base, l)).collect();
        solve_row_targets(row, totals, &ks, free, rounding)?
    };
    let delta = mitigated
        .iter()
        .zip(row)
        .enumerate()
        .map(|(l, (&after, &before))| {
            after.checked_sub(before).ok_or_else(|| {
                let schema = summary.schema();
                Error::InfeasibleTargets(format!(
                    "negative addition for {}/{}",
                    schema.display(&schema.base_key(base)),
                    schema.label_name(l)
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GroupPlan {
        pivot: Some(pivot),
        free_var: free,
        delta,
    })
}

/// `argmax_j sy_j / n^{y_j}`, first label on ties.
pub fn pivot_label(summary: &SummaryTable, group: &GroupKey) -> Result<usize> {
    let base = summary.schema().base_index_of(group)?;
    if summary.group_total(base) == 0 {
        return Err(Error::EmptyGroup(summary.schema().display(group)));
    }
    check_labels(summary)?;
    Ok(solve_row_unit(summary.group_row(base), summary.label_totals(), 0, Rounding::Floor)?.0)
}

/// Per-label additions for one base group at a given free variable (`K ≡ 1`, floor).
pub fn general_solution(summary: &SummaryTable, group: &GroupKey, free_var: u64) -> Result<Vec<u64>> {
    let base = summary.schema().base_index_of(group)?;
    check_labels(summary)?;
    let ones = KTargets::ones(summary.schema());
    Ok(solve_group(summary, &ones, base, free_var, Rounding::Floor)?.delta)
}

/// The general solution over every base group, with per-group free variables.
pub fn mitigate(summary: &SummaryTable, targets: &KTargets, options: &MitigationOptions) -> Result<MitigationPlan> {
    let schema = summary.schema();
    if summary.n() == 0 {
        return Err(Error::EmptyGroup("population".into()));
    }
    check_labels(summary)?;
    targets.validate(summary)?;
    if !options.free_vars.is_empty() && options.free_vars.len() != schema.num_base_groups() {
        return Err(Error::Malformed(format!(
            "expected {} free variables, got {}",
            schema.num_base_groups(),
            options.free_vars.len()
        )));
    }
    let groups = (0..schema.num_base_groups())
        .map(|base| {
            let free = options.free_vars.get(base).copied().unwrap_or(0);
            solve_group(summary, targets, base, free, options.rounding)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MitigationPlan {
        schema: schema.clone(),
        groups,
        targets: targets.clone(),
        rounding: options.rounding,
        source_digest: summary.digest(),
    })
}

/// Fewest additions: free variable 0 in every group, floor rounding.
pub fn minimal_mitigation(summary: &SummaryTable, targets: &KTargets) -> Result<MitigationPlan> {
    mitigate(summary, targets, &MitigationOptions::default())
}

/// [`minimal_mitigation`] with the extra requirement `K_{s,y}·f_y ≤ 1`
/// (a target rate above 1 cannot be met).
pub fn mitigate_with_targets(summary: &SummaryTable, targets: &KTargets) -> Result<MitigationPlan> {
    targets.validate(summary)?;
    let schema = summary.schema();
    let n = BigRational::from_integer(summary.n().into());
    for idx in 0..schema.num_cells() {
        let (base, label) = (idx / schema.k(), idx % schema.k());
        let fy = BigRational::from_integer(summary.label_total(label).into()) / &n;
        if targets.get(base, label) * fy > BigRational::one() {
            return Err(Error::InvalidTargets(format!(
                "K·f_y exceeds 1 for {}/{}",
                schema.display(&schema.base_key(base)),
                schema.label_name(label)
            )));
        }
    }
    minimal_mitigation(summary, targets)
}

/// `sy ← sy + Δsy` for every cell.
pub fn apply_plan(summary: &SummaryTable, plan: &MitigationPlan) -> Result<SummaryTable> {
    if summary.schema() != plan.schema() {
        return Err(Error::SchemaMismatch("plan and summary use different schemas".into()));
    }
    let digest = summary.digest();
    if digest != plan.source_digest {
        return Err(Error::DigestMismatch {
            plan: plan.source_digest.clone(),
            summary: digest,
        });
    }
    add_counts(summary, &plan.additions())
}

fn add_counts(summary: &SummaryTable, additions: &[u64]) -> Result<SummaryTable> {
    let counts = summary
        .counts()
        .iter()
        .zip(additions)
        .map(|(&c, &d)| c.checked_add(d).ok_or(Error::Overflow))
        .collect::<Result<Vec<_>>>()?;
    summary.with_counts(counts)
}

/// Cell-indexed deletions and additions against one schema.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EditSet {
    pub deletions: Vec<u64>,
    pub additions: Vec<u64>,
}

impl EditSet {
    pub fn new(schema: &FairnessSchema) -> Self {
        EditSet {
            deletions: vec![0; schema.num_cells()],
            additions: vec![0; schema.num_cells()],
        }
    }

    pub fn from_plan(plan: &MitigationPlan) -> Self {
        EditSet {
            deletions: vec![0; plan.schema().num_cells()],
            additions: plan.additions(),
        }
    }

    pub fn delete(&mut self, schema: &FairnessSchema, base: usize, label: usize, count: u64) -> &mut Self {
        self.deletions[base * schema.k() + label] += count;
        self
    }

    pub fn add(&mut self, schema: &FairnessSchema, base: usize, label: usize, count: u64) -> &mut Self {
        self.additions[base * schema.k() + label] += count;
        self
    }

    pub fn is_empty(&self) -> bool {
        self.deletions.iter().chain(&self.additions).all(|&c| c == 0)
    }

    /// Deletions first, then additions.
    pub fn apply(&self, summary: &SummaryTable) -> Result<SummaryTable> {
        let trimmed = apply_deletions(summary, &self.deletions)?;
        if self.additions.len() != trimmed.counts().len() {
            return Err(Error::SchemaMismatch("edit set does not fit the summary".into()));
        }
        add_counts(&trimmed, &self.additions)
    }
}

/// Cell-wise subtraction; fails rather than clamping.
pub fn apply_deletions(summary: &SummaryTable, deletions: &[u64]) -> Result<SummaryTable> {
    let schema = summary.schema();
    if deletions.len() != schema.num_cells() {
        return Err(Error::SchemaMismatch(format!(
            "expected {} deletion counts, got {}",
            schema.num_cells(),
            deletions.len()
        )));
    }
    let counts = summary
        .counts()
        .iter()
        .zip(deletions)
        .enumerate()
        .map(|(idx, (&c, &d))| {
            c.checked_sub(d).ok_or_else(|| Error::Overdelete {
                group: schema.display(&schema.base_key(idx / schema.k())),
                label: schema.label_name(idx % schema.k()).to_string(),
                requested: d,
                available: c,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    summary.with_counts(counts)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyCheck {
    pub preserved: bool,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub before: Vec<f64>,
    pub after: Vec<f64>,
}

/// Rounding-slack tolerance for label frequencies: `k·G / n_after`.
pub fn default_frequency_tolerance(after: &SummaryTable) -> f64 {
    if after.n() == 0 {
        return 0.0;
    }
    (after.k() * after.num_groups()) as f64 / after.n() as f64
}

fn frequencies(s: &SummaryTable) -> Vec<f64> {
    s.label_totals()
        .iter()
        .map(|&t| if s.n() == 0 { 0.0 } else { t as f64 / s.n() as f64 })
        .collect()
}

/// Whether every `f_y` moved by at most `tolerance` (default: the rounding slack).
pub fn verify_label_frequency_preservation(
    before: &SummaryTable,
    after: &SummaryTable,
    tolerance: Option<f64>,
) -> Result<FrequencyCheck> {
    if before.schema() != after.schema() {
        return Err(Error::SchemaMismatch("tables use different schemas".into()));
    }
    let tolerance = tolerance.unwrap_or_else(|| default_frequency_tolerance(after));
    if !tolerance.is_finite() || tolerance < 0.0 {
        return Err(Error::InvalidTolerance(tolerance));
    }
    let (fb, fa) = (frequencies(before), frequencies(after));
    let max_deviation = if before.counts() == after.counts() {
        0.0
    } else {
        fb.iter()
            .zip(&fa)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    Ok(FrequencyCheck {
        preserved: max_deviation <= tolerance,
        max_deviation,
        tolerance,
        before: fb,
        after: fa,
    })
}

/// `(sy_i + Δsy_i)·n/n^{y_i} − s^mit` for one base group of a `K ≡ 1` plan,
/// as an exact fraction `(numerator, denominator)`: how far flooring pulled
/// the group total below its exact value. Lies in `[0, k)` under floor
/// rounding.
pub fn minimality_residual(summary: &SummaryTable, plan: &MitigationPlan, base: usize) -> Option<(i128, u128)> {
    let pivot = plan.groups[base].pivot?;
    let s_mit: u64 = summary
        .group_row(base)
        .iter()
        .zip(&plan.groups[base].delta)
        .map(|(c, d)| c + d)
        .sum();
    let den = summary.label_total(pivot) as u128;
    let exact = (summary.cell(base, pivot) as u128 + plan.groups[base].free_var as u128) * summary.n() as u128;
    let num = exact as i128 - s_mit as i128 * den as i128;
    let g = (num.unsigned_abs()).gcd(&den).max(1);
    Some((num / g as i128, den / g))
}

/// Exact `Σ_y K_{s,y}·n^y / n` for a base group, handy for diagnostics.
pub fn identity_sum(summary: &SummaryTable, targets: &KTargets, base: usize) -> f64 {
    if summary.n() == 0 {
        return 0.0;
    }
    let n = BigRational::from_integer(summary.n().into());
    (0..summary.k())
        .map(|l| targets.get(base, l) * BigRational::from_integer(summary.label_total(l).into()) / &n)
        .fold(BigRational::zero(), |a, b| a + b)
        .to_f64()
        .unwrap_or(f64::NAN)
}
