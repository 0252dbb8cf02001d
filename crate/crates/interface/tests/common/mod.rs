#![allow(dead_code)]

use std::path::{Path, PathBuf};

use unibias_core::fixtures;
use unibias_core::SummaryTable;
use unibias_interface::cli;

/// Writes a fixture CSV and schema into `dir`; returns (csv, schema) paths.
pub fn write_fixture(dir: &Path, name: &str, summary: &SummaryTable) -> (PathBuf, PathBuf) {
    let csv = dir.join(format!("{name}.csv"));
    let schema = dir.join(format!("{name}.schema.json"));
    std::fs::write(&csv, fixtures::csv_from_summary(summary)).unwrap();
    std::fs::write(&schema, serde_json::to_string(summary.schema()).unwrap()).unwrap();
    (csv, schema)
}

pub struct Run {
    pub code: i32,
    pub out: String,
    pub err: String,
}

pub fn run_cli(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["unibias"];
    argv.extend_from_slice(args);
    let code = cli::run(argv, &mut out, &mut err);
    Run {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}
