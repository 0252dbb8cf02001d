//! Exact integer contingency summary: base groups × label values.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::schema::{FairnessSchema, GroupKey};

/// Cell counts `sy` for every base group `s` and label `y`, with marginals.
///
/// Cells are stored row-major: `counts[base * k + label]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummaryTable {
    schema: Arc<FairnessSchema>,
    counts: Vec<u64>,
    group_totals: Vec<u64>,
    label_totals: Vec<u64>,
    n: u64,
}

impl SummaryTable {
    pub fn from_counts(schema: FairnessSchema, counts: Vec<u64>) -> Result<Self> {
        Self::build(Arc::new(schema), counts)
    }

    fn build(schema: Arc<FairnessSchema>, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != schema.num_cells() {
            return Err(Error::SchemaMismatch(format!(
                "expected {} cells, got {}",
                schema.num_cells(),
                counts.len()
            )));
        }
        let k = schema.k();
        let mut group_totals = vec![0u64; schema.num_base_groups()];
        let mut label_totals = vec![0u64; k];
        for (idx, &c) in counts.iter().enumerate() {
            let g = &mut group_totals[idx / k];
            *g = g.checked_add(c).ok_or(Error::Overflow)?;
            let l = &mut label_totals[idx % k];
            *l = l.checked_add(c).ok_or(Error::Overflow)?;
        }
        let n = group_totals
            .iter()
            .try_fold(0u64, |acc, &g| acc.checked_add(g))
            .ok_or(Error::Overflow)?;
        Ok(SummaryTable {
            schema,
            counts,
            group_totals,
            label_totals,
            n,
        })
    }

    /// Same schema, different cell counts.
    pub fn with_counts(&self, counts: Vec<u64>) -> Result<Self> {
        Self::build(self.schema.clone(), counts)
    }

    pub fn schema(&self) -> &FairnessSchema {
        &self.schema
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn k(&self) -> usize {
        self.schema.k()
    }

    pub fn num_groups(&self) -> usize {
        self.group_totals.len()
    }

    pub fn cell(&self, base: usize, label: usize) -> u64 {
        self.counts[base * self.k() + label]
    }

    /// Counts of one base group, one per label.
    pub fn group_row(&self, base: usize) -> &[u64] {
        let k = self.k();
        &self.counts[base * k..(base + 1) * k]
    }

    pub fn group_total(&self, base: usize) -> u64 {
        self.group_totals[base]
    }

    /// `n^y`.
    pub fn label_total(&self, label: usize) -> u64 {
        self.label_totals[label]
    }

    pub fn label_totals(&self) -> &[u64] {
        &self.label_totals
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// `|s y|` (or `|s|` when `label` is `None`) for any key, wildcards included.
    pub fn group_count(&self, group: &GroupKey, label: Option<usize>) -> Result<u64> {
        self.schema.check_key(group)?;
        if let Some(l) = label {
            if l >= self.k() {
                return Err(Error::UnknownLabel(l.to_string()));
            }
        }
        if group.is_population() {
            return Ok(match label {
                Some(l) => self.label_totals[l],
                None => self.n,
            });
        }
        Ok(self
            .schema
            .matching_bases(group)
            .into_iter()
            .map(|b| match label {
                Some(l) => self.cell(b, l),
                None => self.group_totals[b],
            })
            .sum())
    }

    pub fn to_export(&self) -> SummaryExport {
        let k = self.k();
        let cells = self
            .counts
            .iter()
            .enumerate()
            .map(|(idx, &count)| CellExport {
                group: self.schema.group_to_map(&self.schema.base_key(idx / k)),
                label: self.schema.label_name(idx % k).to_string(),
                count,
            })
            .collect();
        SummaryExport {
            v: 1,
            schema: (*self.schema).clone(),
            n: self.n,
            cells,
        }
    }

    pub fn from_export(export: &SummaryExport) -> Result<Self> {
        let schema = export.schema.clone();
        let mut counts = vec![0u64; schema.num_cells()];
        let mut seen = vec![false; schema.num_cells()];
        for cell in &export.cells {
            let key = schema.group_from_map(&cell.group)?;
            let base = schema.base_index_of(&key)?;
            let label = schema.label_index(&cell.label)?;
            let idx = base * schema.k() + label;
            if std::mem::replace(&mut seen[idx], true) {
                return Err(Error::Malformed(format!(
                    "cell {}/{} listed twice",
                    schema.display(&key),
                    cell.label
                )));
            }
            counts[idx] = cell.count;
        }
        let table = Self::from_counts(schema, counts)?;
        if table.n != export.n {
            return Err(Error::Malformed(format!(
                "n = {} but cells sum to {}",
                export.n, table.n
            )));
        }
        Ok(table)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_export()).expect("summary serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let export: SummaryExport =
            serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
        Self::from_export(&export)
    }

    /// Hex SHA-256 of the canonical JSON export.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

/// Counts every row into its (base group, label) cell.
pub fn summarize(dataset: &Dataset) -> SummaryTable {
    let schema = dataset.schema();
    let k = schema.k();
    let mut counts = vec![0u64; schema.num_cells()];
    for i in 0..dataset.n() {
        counts[dataset.base_of(i) * k + dataset.label_of(i)] += 1;
    }
    SummaryTable::from_counts(schema.clone(), counts).expect("row counts fit in u64")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellExport {
    pub group: BTreeMap<String, String>,
    pub label: String,
    pub count: u64,
}

/// JSON form of a summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryExport {
    pub v: u32,
    pub schema: FairnessSchema,
    pub n: u64,
    pub cells: Vec<CellExport>,
}
