use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{FairnessSchema, GroupKey};
use crate::summary::SummaryTable;

/// Identity tolerance for `Σ_y K_{s,y}·f_y = 1`.
pub const IDENTITY_TOLERANCE: f64 = 1e-9;

/// Target ratios `K_{s,y} = f_{s,y}/f_y` per base cell, held as exact rationals.
#[derive(Debug, Clone, PartialEq)]
pub struct KTargets {
    k: usize,
    values: Vec<BigRational>,
}

impl KTargets {
    /// `K ≡ 1`: the unbiased goal.
    pub fn ones(schema: &FairnessSchema) -> Self {
        KTargets {
            k: schema.k(),
            values: vec![BigRational::one(); schema.num_cells()],
        }
    }

    /// Cell-indexed values (`base * k + label`), converted exactly from `f64`.
    pub fn from_values(schema: &FairnessSchema, values: &[f64]) -> Result<Self> {
        if values.len() != schema.num_cells() {
            return Err(Error::InvalidTargets(format!(
                "expected {} values, got {}",
                schema.num_cells(),
                values.len()
            )));
        }
        let values = values
            .iter()
            .map(|&v| rational_from_f64(v))
            .collect::<Result<Vec<_>>>()?;
        Ok(KTargets {
            k: schema.k(),
            values,
        })
    }

    /// Cell-indexed exact values.
    pub fn from_rationals(schema: &FairnessSchema, values: Vec<BigRational>) -> Result<Self> {
        if values.len() != schema.num_cells() {
            return Err(Error::InvalidTargets(format!(
                "expected {} values, got {}",
                schema.num_cells(),
                values.len()
            )));
        }
        Ok(KTargets {
            k: schema.k(),
            values,
        })
    }

    /// Targets that keep each base group at the label profile of its
    /// marginal over the `keep` attributes: `K_{s,y} = f_{g(s),y}/f_y`,
    /// where `g(s)` wildcards every attribute not in `keep`.
    ///
    /// With `keep = [gender]` on a gender × race schema this asks every
    /// intersectional group to match its gender's original label rates.
    /// Cells whose marginal group or label is empty get `K = 1`; a marginal
    /// that has tuples but none with some label is rejected (K must be > 0).
    pub fn preserve_marginal(summary: &SummaryTable, keep: &[usize]) -> Result<Self> {
        let schema = summary.schema();
        if let Some(&bad) = keep.iter().find(|&&a| a >= schema.m()) {
            return Err(Error::InvalidTargets(format!("no sensitive attribute #{bad}")));
        }
        let k = schema.k();
        let n = BigInt::from(summary.n());
        let mut values = Vec::with_capacity(schema.num_cells());
        for base in 0..schema.num_base_groups() {
            let entries = schema
                .base_values(base)
                .into_iter()
                .enumerate()
                .map(|(a, v)| {
                    if keep.contains(&a) {
                        crate::schema::GroupEntry::Value(v)
                    } else {
                        crate::schema::GroupEntry::Any
                    }
                })
                .collect();
            let marginal = GroupKey::new(entries);
            let g = summary.group_count(&marginal, None)?;
            for label in 0..k {
                let ny = summary.label_total(label);
                if g == 0 || ny == 0 {
                    values.push(BigRational::one());
                    continue;
                }
                let gy = summary.group_count(&marginal, Some(label))?;
                if gy == 0 {
                    return Err(Error::InvalidTargets(format!(
                        "marginal {} has no `{}` tuples, so its target K would be 0",
                        schema.display(&marginal),
                        schema.label_name(label)
                    )));
                }
                values.push(BigRational::new(
                    BigInt::from(gy) * &n,
                    BigInt::from(g) * BigInt::from(ny),
                ));
            }
        }
        Ok(KTargets { k, values })
    }

    pub fn get(&self, base: usize, label: usize) -> &BigRational {
        &self.values[base * self.k + label]
    }

    pub fn get_f64(&self, base: usize, label: usize) -> f64 {
        self.get(base, label).to_f64().unwrap_or(f64::NAN)
    }

    pub fn is_ones(&self) -> bool {
        self.values.iter().all(One::is_one)
    }

    pub fn num_cells(&self) -> usize {
        self.values.len()
    }

    /// Checks positivity, shape, and `Σ_y K_{s,y}·f_y = 1` for every base group.
    pub fn validate(&self, summary: &SummaryTable) -> Result<()> {
        let schema = summary.schema();
        if self.values.len() != schema.num_cells() || self.k != schema.k() {
            return Err(Error::InvalidTargets(format!(
                "targets cover {} cells, summary has {}",
                self.values.len(),
                schema.num_cells()
            )));
        }
        if let Some(pos) = self.values.iter().position(|v| !v.is_positive()) {
            return Err(Error::InvalidTargets(format!(
                "K for {}/{} must be positive",
                schema.display(&schema.base_key(pos / self.k)),
                schema.label_name(pos % self.k)
            )));
        }
        let n = summary.n();
        if n == 0 {
            return Ok(());
        }
        let n = BigInt::from(n);
        for base in 0..schema.num_base_groups() {
            let sum: BigRational = (0..self.k)
                .map(|l| self.get(base, l) * BigRational::new(summary.label_total(l).into(), n.clone()))
                .fold(BigRational::zero(), |acc, x| acc + x);
            let gap = (sum - BigRational::one()).abs().to_f64().unwrap_or(f64::INFINITY);
            if gap > IDENTITY_TOLERANCE {
                return Err(Error::InvalidTargets(format!(
                    "Σ K·f_y for group {} is off by {gap:e}",
                    schema.display(&schema.base_key(base))
                )));
            }
        }
        Ok(())
    }

    /// Target ratio for any key: the size-weighted mean of the matched base
    /// targets, using the group sizes of `summary`. Base keys get their own K.
    pub fn effective(&self, summary: &SummaryTable, group: &GroupKey, label: usize) -> f64 {
        if self.is_ones() {
            return 1.0;
        }
        let schema = summary.schema();
        let bases = schema.matching_bases(group);
        if let [only] = bases.as_slice() {
            return self.get_f64(*only, label);
        }
        let total: u64 = bases.iter().map(|&b| summary.group_total(b)).sum();
        if total == 0 {
            return f64::NAN;
        }
        let weighted: BigRational = bases
            .iter()
            .map(|&b| self.get(b, label) * BigRational::from_integer(summary.group_total(b).into()))
            .fold(BigRational::zero(), |acc, x| acc + x);
        (weighted / BigRational::from_integer(total.into()))
            .to_f64()
            .unwrap_or(f64::NAN)
    }

    pub fn to_export(&self, schema: &FairnessSchema) -> TargetsExport {
        let cells = if self.is_ones() {
            Vec::new()
        } else {
            (0..self.values.len())
                .map(|idx| TargetCell {
                    group: schema.group_to_map(&schema.base_key(idx / self.k)),
                    label: Some(schema.label_name(idx % self.k).to_string()),
                    k: self.values[idx].to_f64().unwrap_or(f64::NAN),
                })
                .collect()
        };
        TargetsExport { default: 1.0, cells }
    }

    /// Later cells override earlier ones; wildcard groups and a missing
    /// label apply to every matching base cell.
    pub fn from_export(schema: &FairnessSchema, export: &TargetsExport) -> Result<Self> {
        let default = rational_from_f64(export.default)?;
        let mut values = vec![default; schema.num_cells()];
        for cell in &export.cells {
            let key = schema.group_from_map(&cell.group)?;
            let labels: Vec<usize> = match &cell.label {
                Some(l) => vec![schema.label_index(l)?],
                None => (0..schema.k()).collect(),
            };
            let k = rational_from_f64(cell.k)?;
            for base in schema.matching_bases(&key) {
                for &l in &labels {
                    values[base * schema.k() + l] = k.clone();
                }
            }
        }
        Ok(KTargets {
            k: schema.k(),
            values,
        })
    }
}

fn rational_from_f64(v: f64) -> Result<BigRational> {
    if !v.is_finite() || v <= 0.0 {
        return Err(Error::InvalidTargets(format!("K must be positive and finite, got {v}")));
    }
    BigRational::from_float(v).ok_or_else(|| Error::InvalidTargets(format!("cannot represent {v}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetCell {
    pub group: BTreeMap<String, String>,
    #[serde(default)]
    pub label: Option<String>,
    pub k: f64,
}

/// JSON form of [`KTargets`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetsExport {
    #[serde(default = "one")]
    pub default: f64,
    #[serde(default)]
    pub cells: Vec<TargetCell>,
}

fn one() -> f64 {
    1.0
}
