//! Uniform Bias and the classical binary measures (IR, OR, MD, p⁺(0)).
//!
//! Every measure is evaluated from integer counts with exact integer
//! numerators and denominators; the conversion to `f64` happens once, in the
//! final division. `f_{s,y} = f_y` therefore yields a bias of exactly 0.

use std::collections::HashMap;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::schema::{enumerate_groups, GroupKey};
use crate::summary::SummaryTable;

/// Default admissible bias band, `|b| ≤ 0.1`.
pub const DEFAULT_TOLERANCE: f64 = 0.1;

/// A Uniform Bias value `b = 1 − f_{s,y}/f_y`; at most 1, unbounded below.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct BiasValue(f64);

impl BiasValue {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl Serialize for BiasValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

/// Why a bias cell has no value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Undefined {
    EmptyGroup,
    EmptyLabel,
}

/// `n·num/den` style division done as a single rounding: `num / den`.
pub(crate) fn ratio(num: i128, den: u128) -> f64 {
    num as f64 / den as f64
}

/// `1 − (sy/s)/(ny/n)` from raw counts.
///
/// All four counts are taken as exact integers; `s·ny − sy·n` is formed in
/// 128-bit arithmetic so that fair cells give exactly zero.
pub fn ub_from_counts(sy: u64, s: u64, ny: u64, n: u64) -> std::result::Result<f64, Undefined> {
    if s == 0 {
        return Err(Undefined::EmptyGroup);
    }
    if ny == 0 {
        return Err(Undefined::EmptyLabel);
    }
    let den = s as u128 * ny as u128;
    let num = den as i128 - (sy as u128 * n as u128) as i128;
    Ok(ratio(num, den))
}

/// Uniform Bias of `group` for `label`.
pub fn uniform_bias(summary: &SummaryTable, group: &GroupKey, label: usize) -> Result<BiasValue> {
    let sy = summary.group_count(group, Some(label))?;
    let s = summary.group_count(group, None)?;
    let ny = summary.label_total(label);
    ub_from_counts(sy, s, ny, summary.n())
        .map(BiasValue)
        .map_err(|u| match u {
            Undefined::EmptyGroup => Error::EmptyGroup(summary.schema().display(group)),
            Undefined::EmptyLabel => {
                Error::EmptyLabel(summary.schema().label_name(label).to_string())
            }
        })
}

/// Report cell state relative to the tolerance band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Fair,
    BiasAgainst,
    BiasInFavor,
    Undefined,
}

impl Classification {
    pub fn of(value: f64, tolerance: f64) -> Self {
        if value.is_nan() {
            Classification::Undefined
        } else if value.abs() <= tolerance {
            Classification::Fair
        } else if value > tolerance {
            Classification::BiasAgainst
        } else {
            Classification::BiasInFavor
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Fair => "fair",
            Classification::BiasAgainst => "bias_against",
            Classification::BiasInFavor => "bias_in_favor",
            Classification::Undefined => "undefined",
        }
    }
}

/// A global tolerance with optional per-label and per-cell overrides.
///
/// Lookup order: cell override, then label override, then the global value.
#[derive(Debug, Clone, PartialEq)]
pub struct Tolerance {
    pub global: f64,
    pub per_label: HashMap<usize, f64>,
    pub per_cell: HashMap<(GroupKey, usize), f64>,
}

impl Tolerance {
    pub fn global(tau: f64) -> Self {
        Tolerance {
            global: tau,
            per_label: HashMap::new(),
            per_cell: HashMap::new(),
        }
    }

    pub fn for_cell(&self, group: &GroupKey, label: usize) -> f64 {
        self.per_cell
            .get(&(group.clone(), label))
            .or_else(|| self.per_label.get(&label))
            .copied()
            .unwrap_or(self.global)
    }

    fn validate(&self) -> Result<()> {
        let bad = std::iter::once(&self.global)
            .chain(self.per_label.values())
            .chain(self.per_cell.values())
            .find(|t| !t.is_finite() || **t < 0.0);
        match bad {
            Some(t) => Err(Error::InvalidTolerance(*t)),
            None => Ok(()),
        }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::global(DEFAULT_TOLERANCE)
    }
}

impl From<f64> for Tolerance {
    fn from(tau: f64) -> Self {
        Tolerance::global(tau)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasEntry {
    #[serde(skip)]
    pub group: GroupKey,
    #[serde(skip)]
    pub label: usize,
    /// `|s y|`
    pub cell_count: u64,
    /// `|s|`
    pub group_count: u64,
    pub f_sy: Option<f64>,
    pub f_y: Option<f64>,
    pub ub: Option<BiasValue>,
    /// Target ratio `K̄ = f_{s,y}/f_y` the cell is judged against (1 for plain UB).
    pub target: f64,
    /// `K̄ − f_{s,y}/f_y`; equals `ub` when the target is 1.
    pub residual: Option<f64>,
    pub classification: Classification,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasReport {
    pub entries: Vec<BiasEntry>,
    pub tolerance: Tolerance,
}

impl BiasReport {
    pub fn entry(&self, group: &GroupKey, label: usize) -> Option<&BiasEntry> {
        self.entries
            .iter()
            .find(|e| &e.group == group && e.label == label)
    }

    pub fn all_fair(&self) -> bool {
        self.entries
            .iter()
            .all(|e| matches!(e.classification, Classification::Fair | Classification::Undefined))
    }

    /// Entry with the largest `|residual|`.
    pub fn worst(&self) -> Option<&BiasEntry> {
        self.entries
            .iter()
            .filter(|e| e.residual.is_some())
            .max_by(|a, b| {
                let (x, y) = (a.residual.unwrap().abs(), b.residual.unwrap().abs());
                x.total_cmp(&y)
            })
    }
}

/// One entry per (group, label), in the order given, judged against `b = 0`.
pub fn bias_report(
    summary: &SummaryTable,
    groups: &[GroupKey],
    tolerance: &Tolerance,
) -> Result<BiasReport> {
    report_against(summary, groups, tolerance, |_, _| 1.0)
}

/// Like [`bias_report`] but each cell is judged against a target ratio
/// `target(group, label)` instead of 1.
pub fn report_against<F>(
    summary: &SummaryTable,
    groups: &[GroupKey],
    tolerance: &Tolerance,
    target: F,
) -> Result<BiasReport>
where
    F: Fn(&GroupKey, usize) -> f64,
{
    tolerance.validate()?;
    let n = summary.n();
    let mut entries = Vec::with_capacity(groups.len() * summary.k());
    for group in groups {
        let s = summary.group_count(group, None)?;
        for label in 0..summary.k() {
            let sy = summary.group_count(group, Some(label))?;
            let ny = summary.label_total(label);
            let tau = tolerance.for_cell(group, label);
            let k_bar = target(group, label);
            let ub = ub_from_counts(sy, s, ny, n).ok();
            let residual = ub.map(|b| if k_bar == 1.0 { b } else { k_bar - (1.0 - b) });
            entries.push(BiasEntry {
                group: group.clone(),
                label,
                cell_count: sy,
                group_count: s,
                f_sy: (s > 0).then(|| sy as f64 / s as f64),
                f_y: (n > 0).then(|| ny as f64 / n as f64),
                ub: ub.map(BiasValue),
                target: k_bar,
                residual,
                classification: residual
                    .map(|r| Classification::of(r, tau))
                    .unwrap_or(Classification::Undefined),
                tolerance: tau,
            });
        }
    }
    Ok(BiasReport {
        entries,
        tolerance: tolerance.clone(),
    })
}

/// Worst (group, label) cell found by [`is_unbiased`].
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub group: GroupKey,
    pub label: usize,
    pub ub: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnbiasedCheck {
    pub unbiased: bool,
    /// The cell with the largest `|ub|` over every nonempty group.
    pub worst: Option<Witness>,
}

/// Whether every nonempty group (wildcard groups included) has `|ub| ≤ τ`
/// for every label with at least one tuple.
pub fn is_unbiased(summary: &SummaryTable, tolerance: f64) -> Result<UnbiasedCheck> {
    if !tolerance.is_finite() || tolerance < 0.0 {
        return Err(Error::InvalidTolerance(tolerance));
    }
    let groups = enumerate_groups(summary.schema(), true);
    let report = bias_report(summary, &groups, &Tolerance::global(tolerance))?;
    let worst = report.worst().map(|e| Witness {
        group: e.group.clone(),
        label: e.label,
        ub: e.ub.expect("worst entry is defined").value(),
    });
    let unbiased = worst.as_ref().is_none_or(|w| w.ub.abs() <= tolerance);
    Ok(UnbiasedCheck { unbiased, worst })
}

/// Binary partition counts behind [`ClassicalMeasures`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BinaryCounts {
    pub n: u64,
    pub n_pos: u64,
    pub p: u64,
    pub p_pos: u64,
    pub u: u64,
    pub u_pos: u64,
}

/// IR, OR, MD and `p⁺(0)` for a protected group against its complement.
///
/// A measure whose formula divides by zero is `None`; [`ClassicalMeasures::get`]
/// turns that into [`Error::DivisionByZeroMeasure`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassicalMeasures {
    pub counts: BinaryCounts,
    /// `f_{p,+}/f_{u,+}`
    pub ir: Option<f64>,
    /// `(u⁺/u⁻)/(p⁺/p⁻)`
    #[serde(rename = "or")]
    pub or_: Option<f64>,
    /// `f_{u,+} − f_{p,+}`
    pub md: Option<f64>,
    /// `f₊ · p`
    pub p_plus_zero: Option<f64>,
    /// `⌊f₊ · p⌉`, nearest integer with halves rounded up.
    pub p_plus_zero_rounded: Option<u64>,
}

impl ClassicalMeasures {
    pub fn get(&self, name: &str) -> Result<f64> {
        let (value, tag) = match name.to_ascii_lowercase().as_str() {
            "ir" => (self.ir, "IR"),
            "or" => (self.or_, "OR"),
            "md" => (self.md, "MD"),
            "p_plus_zero" | "p+(0)" => (self.p_plus_zero, "p+(0)"),
            other => return Err(Error::Malformed(format!("unknown measure `{other}`"))),
        };
        value.ok_or(Error::DivisionByZeroMeasure(tag))
    }

    /// Names of the measures that are undefined for these counts.
    pub fn undefined(&self) -> Vec<&'static str> {
        [
            (self.ir.is_none(), "IR"),
            (self.or_.is_none(), "OR"),
            (self.md.is_none(), "MD"),
            (self.p_plus_zero.is_none(), "p+(0)"),
        ]
        .into_iter()
        .filter_map(|(missing, name)| missing.then_some(name))
        .collect()
    }
}

pub fn classical_measures(
    summary: &SummaryTable,
    protected: &GroupKey,
    positive_label: usize,
) -> Result<ClassicalMeasures> {
    let n = summary.n();
    let n_pos = summary.group_count(&GroupKey::population(summary.schema().m()), Some(positive_label))?;
    let p = summary.group_count(protected, None)?;
    let p_pos = summary.group_count(protected, Some(positive_label))?;
    Ok(measures_from_counts(BinaryCounts {
        n,
        n_pos,
        p,
        p_pos,
        u: n - p,
        u_pos: n_pos - p_pos,
    }))
}

pub fn measures_from_counts(c: BinaryCounts) -> ClassicalMeasures {
    let (p, pp, u, up) = (c.p as u128, c.p_pos as u128, c.u as u128, c.u_pos as u128);
    let p_neg = p - pp;
    let u_neg = u - up;
    let div = |num: u128, den: u128| (den != 0).then(|| num as f64 / den as f64);
    let ir = if p == 0 || u == 0 { None } else { div(pp * u, p * up) };
    let or_ = div(up * p_neg, u_neg * pp);
    let md = (p != 0 && u != 0).then(|| {
        let den = u * p;
        ratio((up * p) as i128 - (pp * u) as i128, den)
    });
    let (n, np) = (c.n as u128, c.n_pos as u128);
    let p_plus_zero = div(np * p, n);
    let p_plus_zero_rounded = (n != 0).then(|| ((2 * np * p + n) / (2 * n)) as u64);
    ClassicalMeasures {
        counts: c,
        ir,
        or_,
        md,
        p_plus_zero,
        p_plus_zero_rounded,
    }
}

/// Impact ratio implied by a bias value and the protected/unprotected
/// shares: `IR(b) = (1 − b)/(1 + b·P/U)`.
pub fn ir_from_bias(b: f64, p: f64, u: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) || (p + u - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidPartition { p, u });
    }
    Ok((1.0 - b) / (1.0 + b * p / u))
}
