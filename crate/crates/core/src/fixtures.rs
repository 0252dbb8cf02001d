//! Reference datasets rebuilt from their published contingency counts.
//!
//! The row-level COMPAS and Adult files are not redistributed; these
//! helpers regenerate CSVs with exactly the published cell counts (one row
//! per tuple, plus an `id` column) so that every path through the loader can
//! be exercised end to end.

use crate::schema::{Attribute, FairnessSchema};
use crate::summary::SummaryTable;

/// COMPAS cells in base order (m,o) (m,c) (w,o) (w,c), labels L, M, H.
pub const COMPAS_COUNTS: [u64; 12] = [
    19489, 7143, 4510, //
    12202, 2862, 1273, //
    5637, 1589, 665, //
    4159, 894, 375,
];

/// Adult cells in base order Male, Female; labels pos (>50K), neg.
pub const ADULT_COUNTS: [u64; 4] = [6662, 15128, 1179, 9592];

pub fn compas_schema() -> FairnessSchema {
    FairnessSchema::new(
        vec![
            Attribute::new("gender", ["m", "w"]),
            Attribute::new("race", ["o", "c"]),
        ],
        Attribute::new("score", ["L", "M", "H"]),
    )
    .expect("valid schema")
}

pub fn adult_schema() -> FairnessSchema {
    FairnessSchema::new(
        vec![Attribute::new("sex", ["Male", "Female"])],
        Attribute::new("income", ["pos", "neg"]),
    )
    .expect("valid schema")
}

pub fn compas_summary() -> SummaryTable {
    SummaryTable::from_counts(compas_schema(), COMPAS_COUNTS.to_vec()).expect("fits schema")
}

pub fn adult_summary() -> SummaryTable {
    SummaryTable::from_counts(adult_schema(), ADULT_COUNTS.to_vec()).expect("fits schema")
}

/// Two-group summary under the Adult schema: Female is protected, `pos` is `+`.
pub fn binary_summary(p_pos: u64, p_neg: u64, u_pos: u64, u_neg: u64) -> SummaryTable {
    SummaryTable::from_counts(adult_schema(), vec![u_pos, u_neg, p_pos, p_neg])
        .expect("fits schema")
}

/// CSV text with one row per tuple of `summary`, cells in base order.
pub fn csv_from_summary(summary: &SummaryTable) -> String {
    let schema = summary.schema();
    let mut header = vec!["id".to_string()];
    header.extend(schema.sensitive().iter().map(|a| a.name.clone()));
    header.push(schema.label().name.clone());
    let mut out = header.join(",");
    out.push('\n');
    let mut id = 0u64;
    for base in 0..summary.num_groups() {
        let values: Vec<&str> = schema
            .base_values(base)
            .iter()
            .zip(schema.sensitive())
            .map(|(&v, a)| a.values[v].as_str())
            .collect();
        let prefix = values.join(",");
        for label in 0..summary.k() {
            let name = schema.label_name(label);
            for _ in 0..summary.cell(base, label) {
                id += 1;
                out.push_str(&format!("{id},{prefix},{name}\n"));
            }
        }
    }
    out
}

pub fn compas_csv() -> String {
    csv_from_summary(&compas_summary())
}

pub fn adult_csv() -> String {
    csv_from_summary(&adult_summary())
}
