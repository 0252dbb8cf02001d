//! Request bodies and response payloads shared by the CLI and the HTTP
//! service. Both front ends build the same request structs and render
//! through [`render`], so identical logical requests give byte-identical
//! JSON.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use unibias_core::measures::{classical_measures, is_unbiased, report_against, Classification, Tolerance};
use unibias_core::mitigation::{
    apply_plan, budgeted_mitigation, mitigate, verify_label_frequency_preservation, CostModel,
    CostModelExport, FrequencyCheck, FundingStep, KTargets, MitigationOptions, MitigationPlan, OrderEntry,
    PlanExport, Rounding, TargetsExport,
};
use unibias_core::policy::{bias_surface, classify_surface, Axis, Constraint, GridExport, GridSpec, PolicyGrid, PolicyOp};
use unibias_core::realization::{mitigation_pipeline, realize_plan, PipelineOrder, RealizationReport};
use unibias_core::summary::SummaryExport;
use unibias_core::{
    enumerate_groups, export_to_string, load_dataset_with, summarize, Dataset, ExcludedRow, FairnessSchema,
    GroupKey, LoadOptions, LoadOutcome, SummaryTable,
};

use crate::error::{AppError, AppResult};

/// Version stamped on every payload.
pub const VERSION: u32 = 1;

/// Tolerance used when a request does not name one.
pub const DEFAULT_TAU: f64 = 0.1;

/// Pretty JSON with a trailing newline.
pub fn render<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("payloads serialize");
    text.push('\n');
    text
}

pub fn body_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `None` is a comma; `tab` or `\t` is a tab; otherwise one ASCII character.
pub fn delimiter_byte(text: Option<&str>) -> AppResult<u8> {
    match text {
        None => Ok(b','),
        Some("tab") | Some("\\t") | Some("\t") => Ok(b'\t'),
        Some(s) if s.len() == 1 && s.is_ascii() => Ok(s.as_bytes()[0]),
        Some(s) => Err(AppError::validation("invalid_delimiter", format!("`{s}` is not a single ASCII character"))),
    }
}

pub fn load(csv: &[u8], schema: &FairnessSchema, delimiter: Option<&str>, lenient: bool) -> AppResult<LoadOutcome> {
    let options = LoadOptions {
        delimiter: delimiter_byte(delimiter)?,
        lenient,
        ..LoadOptions::default()
    };
    Ok(load_dataset_with(csv, schema, &options)?)
}

// ---------------------------------------------------------------- datasets

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UploadRequest {
    pub csv: String,
    pub schema: FairnessSchema,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delimiter: Option<String>,
    #[serde(default)]
    pub lenient: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExcludedExport {
    pub row: usize,
    pub error: String,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct DatasetPayload {
    pub v: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub digest: String,
    pub n: u64,
    pub summary: SummaryExport,
    pub excluded: Vec<ExcludedExport>,
}

pub fn dataset_payload(id: Option<&str>, summary: &SummaryTable, excluded: &[ExcludedRow]) -> DatasetPayload {
    DatasetPayload {
        v: VERSION,
        id: id.map(str::to_string),
        digest: summary.digest(),
        n: summary.n(),
        summary: summary.to_export(),
        excluded: excluded
            .iter()
            .map(|e| ExcludedExport {
                row: e.row,
                error: e.reason.code().to_string(),
                detail: e.reason.to_string(),
            })
            .collect(),
    }
}

// ------------------------------------------------------------------ report

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportQuery {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    /// Comma-separated subset of `ub,ir,or,md`; defaults to `ub`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measures: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    Ub,
    Ir,
    Or,
    Md,
}

impl Measure {
    pub fn name(self) -> &'static str {
        match self {
            Measure::Ub => "ub",
            Measure::Ir => "ir",
            Measure::Or => "or",
            Measure::Md => "md",
        }
    }
}

pub fn parse_measures(text: Option<&str>) -> AppResult<Vec<Measure>> {
    let Some(text) = text else {
        return Ok(vec![Measure::Ub]);
    };
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let m = match part.to_ascii_lowercase().as_str() {
            "ub" => Measure::Ub,
            "ir" => Measure::Ir,
            "or" => Measure::Or,
            "md" => Measure::Md,
            other => {
                return Err(AppError::validation(
                    "unknown_measure",
                    format!("`{other}` is not one of ub, ir, or, md"),
                ))
            }
        };
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(AppError::validation("unknown_measure", "no measures selected"));
    }
    Ok(out)
}

/// One (group, label) row. IR/OR/MD treat the group as protected against
/// its complement and the label as the positive outcome.
#[derive(Debug, Clone, Serialize)]
pub struct ReportEntry {
    pub group: BTreeMap<String, String>,
    pub label: String,
    pub count: u64,
    pub group_count: u64,
    pub f_sy: Option<f64>,
    pub f_y: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ub: Option<Option<f64>>,
    #[serde(rename = "class", skip_serializing_if = "Option::is_none")]
    pub class: Option<Classification>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ir: Option<Option<f64>>,
    #[serde(rename = "or", skip_serializing_if = "Option::is_none")]
    pub or_: Option<Option<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub md: Option<Option<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessExport {
    pub group: BTreeMap<String, String>,
    pub label: String,
    pub ub: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportPayload {
    pub v: u32,
    pub digest: String,
    pub n: u64,
    pub tau: f64,
    pub measures: Vec<&'static str>,
    pub unbiased: bool,
    pub worst: Option<WitnessExport>,
    pub entries: Vec<ReportEntry>,
}

pub fn report_payload(summary: &SummaryTable, query: &ReportQuery, default_tau: f64) -> AppResult<ReportPayload> {
    let schema = summary.schema();
    let tau = query.tau.unwrap_or(default_tau);
    let measures = parse_measures(query.measures.as_deref())?;
    let has = |m| measures.contains(&m);
    let groups = enumerate_groups(schema, true);
    let report = report_against(summary, &groups, &Tolerance::global(tau), |_, _| 1.0)?;
    let check = is_unbiased(summary, tau)?;
    let classical = has(Measure::Ir) || has(Measure::Or) || has(Measure::Md);
    let mut entries = Vec::with_capacity(report.entries.len());
    for e in &report.entries {
        let c = if classical { Some(classical_measures(summary, &e.group, e.label)?) } else { None };
        entries.push(ReportEntry {
            group: schema.group_to_map(&e.group),
            label: schema.label_name(e.label).to_string(),
            count: e.cell_count,
            group_count: e.group_count,
            f_sy: e.f_sy,
            f_y: e.f_y,
            ub: has(Measure::Ub).then(|| e.ub.map(|b| b.value())),
            class: has(Measure::Ub).then_some(e.classification),
            ir: c.filter(|_| has(Measure::Ir)).map(|c| c.ir),
            or_: c.filter(|_| has(Measure::Or)).map(|c| c.or_),
            md: c.filter(|_| has(Measure::Md)).map(|c| c.md),
        });
    }
    Ok(ReportPayload {
        v: VERSION,
        digest: summary.digest(),
        n: summary.n(),
        tau,
        measures: measures.iter().map(|m| m.name()).collect(),
        unbiased: check.unbiased,
        worst: check.worst.map(|w| WitnessExport {
            group: schema.group_to_map(&w.group),
            label: schema.label_name(w.label).to_string(),
            ub: w.ub,
        }),
        entries,
    })
}

fn group_text(schema: &FairnessSchema, group: &BTreeMap<String, String>) -> String {
    schema
        .sensitive()
        .iter()
        .map(|a| group.get(&a.name).map(String::as_str).unwrap_or("*"))
        .collect::<Vec<_>>()
        .join(",")
}

fn number(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

/// Aligned text table of a report, one row per (group, label).
pub fn report_text(schema: &FairnessSchema, report: &ReportPayload) -> String {
    let mut header = vec!["group", "label", "count", "f_sy"];
    for m in &report.measures {
        header.push(m);
        if *m == "ub" {
            header.push("class");
        }
    }
    let mut rows: Vec<Vec<String>> = vec![header.iter().map(|h| h.to_string()).collect()];
    for e in &report.entries {
        let mut row = vec![group_text(schema, &e.group), e.label.clone(), e.count.to_string(), number(e.f_sy)];
        for m in &report.measures {
            match *m {
                "ub" => {
                    row.push(number(e.ub.flatten()));
                    row.push(e.class.map(|c| c.as_str()).unwrap_or("-").to_string());
                }
                "ir" => row.push(number(e.ir.flatten())),
                "or" => row.push(number(e.or_.flatten())),
                _ => row.push(number(e.md.flatten())),
            }
        }
        rows.push(row);
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &rows {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (cell, &w))| if i < 2 { format!("{cell:<w$}") } else { format!("{cell:>w$}") })
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    let verdict = if report.unbiased { "unbiased" } else { "biased" };
    let _ = write!(out, "n = {}, tau = {}: {verdict}", report.n, report.tau);
    if let Some(w) = report.worst.as_ref().filter(|_| !report.unbiased) {
        let _ = write!(out, " (worst {}/{}: {:.4})", group_text(schema, &w.group), w.label, w.ub);
    }
    out.push('\n');
    out
}

// -------------------------------------------------------------- mitigation

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MitigateRequest {
    /// Explicit K-target table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<TargetsExport>,
    /// Attribute names whose label profile the targets should keep.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub preserve: Vec<String>,
    #[serde(default)]
    pub rounding: Rounding,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub free_vars: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs: Option<CostModelExport>,
    /// Overrides the cost model's budget; on its own, every tuple costs 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    /// Priority entries such as `w,*` or `m,*/L`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub order: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

pub fn resolve_targets(
    summary: &SummaryTable,
    targets: Option<&TargetsExport>,
    preserve: &[String],
) -> AppResult<KTargets> {
    let schema = summary.schema();
    match (targets, preserve.is_empty()) {
        (Some(_), false) => Err(AppError::validation(
            "conflicting_targets",
            "give either explicit targets or attributes to preserve, not both",
        )),
        (Some(t), true) => Ok(KTargets::from_export(schema, t)?),
        (None, false) => {
            let keep = preserve
                .iter()
                .map(|name| {
                    schema.attribute_index(name).ok_or_else(|| {
                        AppError::validation("unknown_attribute", format!("no sensitive attribute `{name}`"))
                    })
                })
                .collect::<AppResult<Vec<_>>>()?;
            Ok(KTargets::preserve_marginal(summary, &keep)?)
        }
        (None, true) => Ok(KTargets::ones(schema)),
    }
}

fn cost_model(schema: &FairnessSchema, costs: Option<&CostModelExport>, budget: Option<f64>) -> AppResult<Option<CostModel>> {
    let mut model = match (costs, budget) {
        (None, None) => return Ok(None),
        (Some(c), _) => CostModel::from_export(schema, c)?,
        (None, Some(b)) => CostModel::uniform(1.0, b),
    };
    if let Some(b) = budget {
        model.budget = b;
    }
    model.validate(schema)?;
    Ok(Some(model))
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualEntry {
    pub group: BTreeMap<String, String>,
    pub label: String,
    pub count: u64,
    pub group_count: u64,
    pub target: f64,
    pub ub: Option<f64>,
    pub residual: Option<f64>,
    #[serde(rename = "class")]
    pub class: Classification,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualExport {
    pub tau: f64,
    pub all_fair: bool,
    pub entries: Vec<ResidualEntry>,
}

fn residual_export(after: &SummaryTable, targets: &KTargets, tau: f64) -> AppResult<ResidualExport> {
    let schema = after.schema();
    let groups = enumerate_groups(schema, true);
    let report = report_against(after, &groups, &Tolerance::global(tau), |g, l| targets.effective(after, g, l))?;
    Ok(ResidualExport {
        tau,
        all_fair: report.all_fair(),
        entries: report
            .entries
            .iter()
            .map(|e| ResidualEntry {
                group: schema.group_to_map(&e.group),
                label: schema.label_name(e.label).to_string(),
                count: e.cell_count,
                group_count: e.group_count,
                target: e.target,
                ub: e.ub.map(|b| b.value()),
                residual: e.residual,
                class: e.classification,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FrequencyExport {
    /// Preservation is guaranteed only for uniform targets.
    pub required: bool,
    #[serde(flatten)]
    pub check: FrequencyCheck,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellCount {
    pub group: BTreeMap<String, String>,
    pub label: String,
    pub count: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BudgetExport {
    pub budget: f64,
    pub spent: f64,
    pub remaining: f64,
    pub steps: Vec<FundingStep>,
    pub funded: Vec<CellCount>,
    pub residual: ResidualExport,
}

#[derive(Debug, Clone, Serialize)]
pub struct MitigatePayload {
    pub v: u32,
    pub digest: String,
    pub plan: PlanExport,
    pub mitigated: SummaryExport,
    pub residual: ResidualExport,
    pub frequencies: FrequencyExport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<BudgetExport>,
}

fn nonzero_cells(schema: &FairnessSchema, counts: &[u64]) -> Vec<CellCount> {
    let k = schema.k();
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, &c)| CellCount {
            group: schema.group_to_map(&schema.base_key(i / k)),
            label: schema.label_name(i % k).to_string(),
            count: c,
        })
        .collect()
}

pub fn plan_for(summary: &SummaryTable, req: &MitigateRequest) -> AppResult<MitigationPlan> {
    let targets = resolve_targets(summary, req.targets.as_ref(), &req.preserve)?;
    let options = MitigationOptions {
        rounding: req.rounding,
        free_vars: req.free_vars.clone(),
    };
    Ok(mitigate(summary, &targets, &options)?)
}

pub fn mitigate_payload(summary: &SummaryTable, req: &MitigateRequest, default_tau: f64) -> AppResult<MitigatePayload> {
    let schema = summary.schema();
    let tau = req.tau.unwrap_or(default_tau);
    let plan = plan_for(summary, req)?;
    let targets = plan.targets();
    let after = apply_plan(summary, &plan)?;
    let check = verify_label_frequency_preservation(summary, &after, None)?;
    let budget = match cost_model(schema, req.costs.as_ref(), req.budget)? {
        None => {
            if !req.order.is_empty() {
                return Err(AppError::validation("missing_budget", "a priority order needs a budget or cost model"));
            }
            None
        }
        Some(model) => {
            let order = req
                .order
                .iter()
                .map(|o| OrderEntry::parse(schema, o))
                .collect::<Result<Vec<_>, _>>()?;
            let out = budgeted_mitigation(summary, &plan, &model, &order, &Tolerance::global(tau))?;
            Some(BudgetExport {
                budget: model.budget,
                spent: out.spent,
                remaining: out.remaining,
                funded: nonzero_cells(schema, &out.edits.additions),
                residual: residual_export(&out.after, targets, tau)?,
                steps: out.steps,
            })
        }
    };
    Ok(MitigatePayload {
        v: VERSION,
        digest: summary.digest(),
        plan: plan.to_export(),
        mitigated: after.to_export(),
        residual: residual_export(&after, targets, tau)?,
        frequencies: FrequencyExport {
            required: targets.is_ones(),
            check,
        },
        budget,
    })
}

// -------------------------------------------------------------------- grid

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRequest {
    /// `kind:group:label:[min:]max[:step]`, e.g. `add:Male:neg:0:5100`.
    pub x: String,
    pub y: String,
    /// `group/label` whose bias is plotted; defaults to the y op's cell.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub focus: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_x: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_y: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_rows: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs: Option<CostModelExport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    /// When set, the payload carries a per-cell classification.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

fn parse_focus(schema: &FairnessSchema, text: &str) -> AppResult<(GroupKey, usize)> {
    let entry = OrderEntry::parse(schema, text)?;
    let label = entry
        .label
        .ok_or_else(|| AppError::validation("invalid_focus", format!("`{text}` needs a label, e.g. `Female/pos`")))?;
    Ok((entry.group, label))
}

pub fn build_grid(summary: &SummaryTable, req: &GridRequest) -> AppResult<PolicyGrid> {
    let schema = summary.schema();
    let mut spec = GridSpec::new(PolicyOp::parse(schema, &req.x)?, PolicyOp::parse(schema, &req.y)?, schema);
    if let Some(focus) = &req.focus {
        let (group, label) = parse_focus(schema, focus)?;
        spec = spec.with_focus(group, label);
    }
    let mut constraints = Vec::new();
    if let Some(limit) = req.max_x {
        constraints.push(Constraint::MaxOpValue { axis: Axis::X, limit });
    }
    if let Some(limit) = req.max_y {
        constraints.push(Constraint::MaxOpValue { axis: Axis::Y, limit });
    }
    if let Some(rows) = req.min_rows {
        constraints.push(Constraint::MinTotalRows(rows));
    }
    if let Some(model) = cost_model(schema, req.costs.as_ref(), req.budget)? {
        constraints.push(Constraint::Budget(model));
    }
    let mut grid = bias_surface(summary, &spec)?;
    grid.apply_constraints(&constraints)?;
    Ok(grid)
}

#[derive(Debug, Clone, Serialize)]
pub struct GridPayload {
    pub v: u32,
    pub digest: String,
    pub grid: GridExport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<Classification>>,
}

pub fn grid_payload(summary: &SummaryTable, req: &GridRequest) -> AppResult<(GridPayload, PolicyGrid)> {
    let grid = build_grid(summary, req)?;
    let classes = req.tau.map(|tau| classify_surface(&grid, tau)).transpose()?;
    Ok((
        GridPayload {
            v: VERSION,
            digest: summary.digest(),
            grid: grid.to_export(),
            tau: req.tau,
            classes,
        },
        grid,
    ))
}

// ------------------------------------------------------------- realization

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealizeRequest {
    /// Candidate tuples, CSV with the dataset's header.
    pub pool_csv: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delimiter: Option<String>,
    #[serde(default)]
    pub seed: u64,
    /// Plan to realize; computed from `targets`/`preserve` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanExport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<TargetsExport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub preserve: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RealizePayload {
    pub v: u32,
    pub digest: String,
    pub plan: PlanExport,
    pub report: RealizationReport,
    /// Digest of the source summary with the drawn rows added.
    pub realized_digest: String,
    pub added_csv: String,
}

/// Draws the plan's additions from the pool. Returns the payload and the
/// drawn rows.
pub fn realize_payload(summary: &SummaryTable, req: &RealizeRequest) -> AppResult<(RealizePayload, Dataset)> {
    let schema = summary.schema();
    let pool = load(req.pool_csv.as_bytes(), schema, req.delimiter.as_deref(), false)?.dataset;
    let plan = match &req.plan {
        Some(p) => {
            if req.targets.is_some() || !req.preserve.is_empty() {
                return Err(AppError::validation("conflicting_targets", "a plan already fixes its targets"));
            }
            MitigationPlan::from_export(p, summary)?
        }
        None => plan_for(
            summary,
            &MitigateRequest {
                targets: req.targets.clone(),
                preserve: req.preserve.clone(),
                ..MitigateRequest::default()
            },
        )?,
    };
    let (added, report) = realize_plan(&plan, &pool, req.seed)?;
    let drawn = summarize(&added);
    let combined: Vec<u64> = summary.counts().iter().zip(drawn.counts()).map(|(a, b)| a + b).collect();
    let realized = summary.with_counts(combined)?;
    Ok((
        RealizePayload {
            v: VERSION,
            digest: summary.digest(),
            plan: plan.to_export(),
            report,
            realized_digest: realized.digest(),
            added_csv: export_to_string(&added),
        },
        added,
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelinePayload {
    pub v: u32,
    pub digest: String,
    pub order: PipelineOrder,
    pub seed: u64,
    pub plan: PlanExport,
    pub report: RealizationReport,
    pub mitigated_rows: usize,
    pub output_rows: usize,
    pub output_digest: String,
}

/// Mitigate `initial` from `pool`, then finish per `order`. Returns the
/// payload and the output dataset.
pub fn pipeline_payload(
    initial: &Dataset,
    pool: &Dataset,
    targets: Option<&KTargets>,
    order: PipelineOrder,
    seed: u64,
) -> AppResult<(PipelinePayload, Dataset)> {
    let out = mitigation_pipeline(initial, pool, targets, order, seed)?;
    Ok((
        PipelinePayload {
            v: VERSION,
            digest: summarize(initial).digest(),
            order,
            seed,
            plan: out.plan.to_export(),
            report: out.report,
            mitigated_rows: out.mitigated.n(),
            output_rows: out.output.n(),
            output_digest: summarize(&out.output).digest(),
        },
        out.output,
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorPayload<'a> {
    pub v: u32,
    pub error: &'a str,
    pub detail: &'a str,
}

pub fn error_payload(e: &AppError) -> String {
    render(&ErrorPayload {
        v: VERSION,
        error: &e.code,
        detail: &e.detail,
    })
}
