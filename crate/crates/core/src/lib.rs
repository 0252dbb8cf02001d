//! Uniform Bias over intersectional groups: measurement, tuple-addition
//! mitigation, policy what-if grids, and seeded realization of plans
//! against real rows.
//!
//! Everything operates on exact integer counts ([`SummaryTable`]); floating
//! point only appears when a ratio is reported.

pub mod dataset;
pub mod error;
pub mod fixtures;
pub mod measures;
pub mod mitigation;
pub mod policy;
pub mod realization;
pub mod schema;
pub mod summary;

pub use dataset::{
    export_dataset, export_to_string, infer_schema, load_dataset, load_dataset_with, Dataset,
    ExcludedRow, LoadOptions, LoadOutcome,
};
pub use error::{Error, Result};
pub use measures::{
    bias_report, classical_measures, ir_from_bias, is_unbiased, measures_from_counts,
    report_against, uniform_bias, BiasEntry, BiasReport, BinaryCounts, Classification,
    ClassicalMeasures, Tolerance,
};
pub use mitigation::{
    apply_deletions, apply_plan, budgeted_mitigation, general_solution, minimal_mitigation,
    mitigate, mitigate_with_targets, pivot_label, verify_label_frequency_preservation,
    CostModel, EditSet, KTargets, MitigationOptions, MitigationPlan, OrderEntry, Rounding,
};
pub use policy::{
    bias_surface, classify_surface, feasible_mask, zero_bias_contour, Axis, Constraint, GridSpec,
    Lattice, OpKind, PolicyGrid, PolicyOp,
};
pub use realization::{
    mitigation_pipeline, partition_dataset, realize_plan, uniform_sample, PartitionSpec,
    PipelineOrder, RealizationReport,
};
pub use schema::{enumerate_groups, Attribute, FairnessSchema, GroupEntry, GroupKey};
pub use summary::{summarize, SummaryTable};
