//! Greedy allocation of a plan under per-cell costs and a total budget.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{add_counts, EditSet, MitigationPlan};
use crate::error::{Error, Result};
use crate::measures::{report_against, BiasReport, Tolerance};
use crate::schema::{enumerate_groups, FairnessSchema, GroupKey};
use crate::summary::SummaryTable;

/// Slack when dividing the remaining budget by a cost, so that e.g.
/// `0.3 / 0.1` still affords 3 tuples.
const AFFORD_EPS: f64 = 1e-9;

/// Cost override for every base cell matched by `group` (and `label`, if given).
#[derive(Debug, Clone, PartialEq)]
pub struct CostRule {
    pub group: GroupKey,
    pub label: Option<usize>,
    pub cost: f64,
}

/// Per-tuple addition costs `c_{sy}` and a budget `B`. The last matching
/// rule wins; cells no rule matches cost `default_cost`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    pub default_cost: f64,
    pub rules: Vec<CostRule>,
    pub budget: f64,
}

impl CostModel {
    pub fn uniform(cost: f64, budget: f64) -> Self {
        CostModel {
            default_cost: cost,
            rules: Vec::new(),
            budget,
        }
    }

    pub fn with_rule(mut self, group: GroupKey, label: Option<usize>, cost: f64) -> Self {
        self.rules.push(CostRule { group, label, cost });
        self
    }

    pub fn cost(&self, schema: &FairnessSchema, base: usize, label: usize) -> f64 {
        let values = schema.base_values(base);
        self.rules
            .iter()
            .rev()
            .find(|r| r.group.matches(&values) && r.label.is_none_or(|l| l == label))
            .map_or(self.default_cost, |r| r.cost)
    }

    pub fn validate(&self, schema: &FairnessSchema) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.budget) {
            return Err(Error::InvalidCosts(format!("budget must be finite and ≥ 0, got {}", self.budget)));
        }
        if let Some(bad) = std::iter::once(self.default_cost)
            .chain(self.rules.iter().map(|r| r.cost))
            .find(|&c| !ok(c))
        {
            return Err(Error::InvalidCosts(format!("cost must be finite and ≥ 0, got {bad}")));
        }
        for r in &self.rules {
            schema.check_key(&r.group)?;
            if r.label.is_some_and(|l| l >= schema.k()) {
                return Err(Error::UnknownLabel(format!("#{}", r.label.unwrap())));
            }
        }
        Ok(())
    }

    /// `Σ Δsy · c_{sy}` over the cell-indexed `additions`.
    pub fn total_cost(&self, schema: &FairnessSchema, additions: &[u64]) -> f64 {
        additions
            .iter()
            .enumerate()
            .map(|(idx, &d)| d as f64 * self.cost(schema, idx / schema.k(), idx % schema.k()))
            .sum()
    }

    pub fn to_export(&self, schema: &FairnessSchema) -> CostModelExport {
        CostModelExport {
            default_cost: self.default_cost,
            budget: self.budget,
            costs: self
                .rules
                .iter()
                .map(|r| CostRuleExport {
                    group: schema.group_to_map(&r.group),
                    label: r.label.map(|l| schema.label_name(l).to_string()),
                    cost: r.cost,
                })
                .collect(),
        }
    }

    pub fn from_export(schema: &FairnessSchema, export: &CostModelExport) -> Result<Self> {
        let rules = export
            .costs
            .iter()
            .map(|r| {
                Ok(CostRule {
                    group: schema.group_from_map(&r.group)?,
                    label: r.label.as_deref().map(|l| schema.label_index(l)).transpose()?,
                    cost: r.cost,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let model = CostModel {
            default_cost: export.default_cost,
            rules,
            budget: export.budget,
        };
        model.validate(schema)?;
        Ok(model)
    }

    pub fn from_json(schema: &FairnessSchema, text: &str) -> Result<Self> {
        let export: CostModelExport =
            serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
        Self::from_export(schema, &export)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRuleExport {
    #[serde(default)]
    pub group: BTreeMap<String, String>,
    #[serde(default)]
    pub label: Option<String>,
    pub cost: f64,
}

/// JSON form of a [`CostModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModelExport {
    #[serde(default = "unit")]
    pub default_cost: f64,
    pub budget: f64,
    #[serde(default)]
    pub costs: Vec<CostRuleExport>,
}

fn unit() -> f64 {
    1.0
}

/// One priority entry: a group (wildcards expand to matching base groups)
/// and an optional label (`None` = every label).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderEntry {
    pub group: GroupKey,
    pub label: Option<usize>,
}

impl OrderEntry {
    pub fn new(group: GroupKey, label: Option<usize>) -> Self {
        OrderEntry { group, label }
    }

    /// Parses `group` or `group/label`, e.g. `w,*` or `m,*/L`.
    pub fn parse(schema: &FairnessSchema, text: &str) -> Result<Self> {
        let (g, l) = match text.rsplit_once('/') {
            Some((g, l)) => (g, Some(schema.label_index(l.trim())?)),
            None => (text, None),
        };
        Ok(OrderEntry {
            group: schema.parse_group(g.trim())?,
            label: l,
        })
    }

    fn cells(&self, schema: &FairnessSchema) -> Vec<usize> {
        let k = schema.k();
        schema
            .matching_bases(&self.group)
            .into_iter()
            .flat_map(|b| match self.label {
                Some(l) => vec![b * k + l],
                None => (0..k).map(|l| b * k + l).collect(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FundingStatus {
    Full,
    Partial,
    Unfunded,
}

/// What one order entry received.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FundingStep {
    pub group: BTreeMap<String, String>,
    pub label: Option<String>,
    pub needed: u64,
    pub funded: u64,
    pub spent: f64,
    /// Budget left after this step.
    pub remaining: f64,
    pub status: FundingStatus,
}

#[derive(Debug, Clone)]
pub struct BudgetOutcome {
    pub edits: EditSet,
    pub steps: Vec<FundingStep>,
    pub spent: f64,
    pub remaining: f64,
    /// Summary with only the funded additions applied.
    pub after: SummaryTable,
    /// Every group (wildcards included) judged against the plan's targets.
    pub residual: BiasReport,
}

impl BudgetOutcome {
    pub fn step_for(&self, schema: &FairnessSchema, entry: &OrderEntry) -> Option<&FundingStep> {
        let group = schema.group_to_map(&entry.group);
        let label = entry.label.map(|l| schema.label_name(l).to_string());
        self.steps.iter().find(|s| s.group == group && s.label == label)
    }
}

/// Walks `order`, funding each cell's `Δ` fully if affordable, otherwise
/// `⌊remaining/c⌋` tuples. Cells outside `order` stay unfunded; an empty
/// order means every base group in base order. Each cell is funded at most
/// once, by the first entry that reaches it.
pub fn budgeted_mitigation(
    summary: &SummaryTable,
    plan: &MitigationPlan,
    costs: &CostModel,
    order: &[OrderEntry],
    tolerance: &Tolerance,
) -> Result<BudgetOutcome> {
    let schema = summary.schema();
    if schema != plan.schema() {
        return Err(Error::SchemaMismatch("plan and summary use different schemas".into()));
    }
    let digest = summary.digest();
    if digest != plan.source_digest() {
        return Err(Error::DigestMismatch {
            plan: plan.source_digest().to_string(),
            summary: digest,
        });
    }
    costs.validate(schema)?;
    let default_order: Vec<OrderEntry>;
    let order = if order.is_empty() {
        default_order = schema.base_keys().map(|g| OrderEntry::new(g, None)).collect();
        &default_order
    } else {
        order
    };
    for entry in order {
        schema.check_key(&entry.group)?;
    }

    let k = schema.k();
    let wanted = plan.additions();
    let mut funded = vec![0u64; wanted.len()];
    let mut visited = vec![false; wanted.len()];
    let mut remaining = costs.budget;
    let mut steps = Vec::with_capacity(order.len());
    for entry in order {
        let (mut needed, mut got, mut spent) = (0u64, 0u64, 0.0f64);
        for cell in entry.cells(schema) {
            if std::mem::replace(&mut visited[cell], true) {
                continue;
            }
            let delta = wanted[cell];
            let c = costs.cost(schema, cell / k, cell % k);
            let take = if c == 0.0 {
                delta
            } else {
                let afford = (remaining / c + AFFORD_EPS).floor().max(0.0);
                if afford >= delta as f64 {
                    delta
                } else {
                    afford as u64
                }
            };
            let cost = take as f64 * c;
            remaining = (remaining - cost).max(0.0);
            funded[cell] = take;
            needed += delta;
            got += take;
            spent += cost;
        }
        let status = if got == needed {
            FundingStatus::Full
        } else if got == 0 {
            FundingStatus::Unfunded
        } else {
            FundingStatus::Partial
        };
        steps.push(FundingStep {
            group: schema.group_to_map(&entry.group),
            label: entry.label.map(|l| schema.label_name(l).to_string()),
            needed,
            funded: got,
            spent,
            remaining,
            status,
        });
    }

    let after = add_counts(summary, &funded)?;
    let groups = enumerate_groups(schema, true);
    let targets = plan.targets();
    let residual = report_against(&after, &groups, tolerance, |g, l| targets.effective(&after, g, l))?;
    Ok(BudgetOutcome {
        edits: EditSet {
            deletions: vec![0; funded.len()],
            additions: funded,
        },
        steps,
        spent: costs.budget - remaining,
        remaining,
        after,
        residual,
    })
}
