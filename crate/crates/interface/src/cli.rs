use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use unibias_core::fixtures;
use unibias_core::mitigation::{CostModelExport, PlanExport, Rounding, TargetsExport};
use unibias_core::realization::{partition_dataset, uniform_sample, PartitionSpec, PipelineOrder};
use unibias_core::{export_to_string, summarize, Dataset, FairnessSchema, LoadOutcome};

use crate::error::{AppError, AppResult};
use crate::http::{self, Config};
use crate::payload::{self, GridRequest, MitigateRequest, RealizeRequest, ReportQuery, DEFAULT_TAU, VERSION};

#[derive(Debug, Parser)]
#[command(name = "unibias", version, about = "Uniform Bias reports, mitigation plans, policy grids and realization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Input {
    /// Dataset CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Schema JSON: {"sensitive": [{"name", "values"}], "label": {"name", "values"}}.
    #[arg(long)]
    pub schema: PathBuf,
    /// Field delimiter: one character, or `tab`.
    #[arg(long)]
    pub delimiter: Option<String>,
    /// Drop rows that violate the schema instead of failing.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GridFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PipelineArg {
    /// Resample the mitigated table back to the initial size.
    Resample,
    /// Keep the whole mitigated table.
    Keep,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FixtureName {
    Compas,
    Adult,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Summary counts and digest of a dataset.
    Summary {
        #[command(flatten)]
        input: Input,
    },
    /// Bias report over every group and label.
    Report {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
        /// Columns to show, e.g. `ub,ir,or,md`.
        #[arg(long)]
        measures: Option<String>,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        format: ReportFormat,
    },
    /// Minimal mitigation plan, optionally walked under a budget.
    Mitigate {
        #[command(flatten)]
        input: Input,
        /// K-target JSON file.
        #[arg(long, conflicts_with = "preserve")]
        targets: Option<PathBuf>,
        /// Attributes whose label profile the targets keep (comma-separated).
        #[arg(long, value_delimiter = ',')]
        preserve: Vec<String>,
        #[arg(long, value_parser = parse_rounding)]
        rounding: Option<Rounding>,
        /// Free variable per base group, comma-separated.
        #[arg(long, value_delimiter = ',')]
        free_vars: Vec<u64>,
        /// Cost model JSON file.
        #[arg(long)]
        costs: Option<PathBuf>,
        #[arg(long)]
        budget: Option<f64>,
        /// Priority entry such as `w,*` or `m,*/L`; repeat for each.
        #[arg(long)]
        order: Vec<String>,
        #[arg(long)]
        tau: Option<f64>,
        /// Also write the plan JSON here.
        #[arg(long)]
        plan_out: Option<PathBuf>,
    },
    /// Bias surface over two edit operations.
    Grid {
        #[command(flatten)]
        input: Input,
        /// `kind:group:label:[min:]max[:step]`.
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        /// `group/label` to plot; defaults to the y op's cell.
        #[arg(long)]
        focus: Option<String>,
        #[arg(long)]
        max_x: Option<u64>,
        #[arg(long)]
        max_y: Option<u64>,
        #[arg(long)]
        min_rows: Option<u64>,
        #[arg(long)]
        costs: Option<PathBuf>,
        #[arg(long)]
        budget: Option<f64>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long, value_enum, default_value_t = GridFormat::Json)]
        format: GridFormat,
    },
    /// Split a dataset into an initial sample and a candidate pool.
    Partition {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        initial_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        initial_out: PathBuf,
        #[arg(long)]
        pool_out: PathBuf,
    },
    /// Uniform sample without replacement.
    Sample {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw a plan's additions from a pool of candidate rows.
    Realize {
        #[command(flatten)]
        input: Input,
        /// Candidate rows, same header as the dataset.
        #[arg(long)]
        pool: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Plan JSON; computed when absent.
        #[arg(long, conflicts_with_all = ["targets", "preserve", "pipeline"])]
        plan: Option<PathBuf>,
        #[arg(long, conflicts_with = "preserve")]
        targets: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        preserve: Vec<String>,
        /// Run the full pipeline and finish with this step.
        #[arg(long, value_enum)]
        pipeline: Option<PipelineArg>,
        /// Write the resulting dataset here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "UNIBIAS_BIND", default_value = "127.0.0.1:8080")]
        bind: String,
        /// Largest request body in bytes.
        #[arg(long, env = "UNIBIAS_UPLOAD_CAP", default_value_t = 64 * 1024 * 1024)]
        upload_cap: usize,
        #[arg(long, env = "UNIBIAS_SESSIONS", default_value_t = 64)]
        sessions: usize,
        #[arg(long, env = "UNIBIAS_TAU", default_value_t = DEFAULT_TAU)]
        tau: f64,
    },
    /// Write a reference dataset and its schema, rebuilt from published counts.
    Fixture {
        #[arg(value_enum)]
        name: FixtureName,
        #[arg(long, default_value = ".")]
        dir: PathBuf,
    },
}

fn parse_rounding(text: &str) -> Result<Rounding, String> {
    Rounding::parse(text).map_err(|e| e.to_string())
}

/// Parses `args` and runs the command, writing results to `out` and
/// diagnostics to `err`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return e.exit_code();
        }
    };
    match execute(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn read(path: &Path) -> AppResult<Vec<u8>> {
    fs::read(path).map_err(|e| AppError::io(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> AppResult<()> {
    fs::write(path, contents).map_err(|e| AppError::io(format!("{}: {e}", path.display())))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> AppResult<T> {
    let bytes = read(path)?;
    serde_json::from_slice(&bytes)
        .map_err(|e| AppError::validation("invalid_json", format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, text: &str) -> AppResult<()> {
    out.write_all(text.as_bytes()).map_err(|e| AppError::io(e.to_string()))
}

fn emit_json<T: Serialize>(out: &mut dyn Write, value: &T) -> AppResult<()> {
    emit(out, &payload::render(value))
}

fn load_input(input: &Input) -> AppResult<(FairnessSchema, LoadOutcome)> {
    let schema: FairnessSchema = read_json(&input.schema)?;
    let csv = read(&input.data)?;
    let outcome = payload::load(&csv, &schema, input.delimiter.as_deref(), input.lenient)?;
    Ok((schema, outcome))
}

fn load_other(path: &Path, schema: &FairnessSchema, input: &Input) -> AppResult<Dataset> {
    let csv = read(path)?;
    Ok(payload::load(&csv, schema, input.delimiter.as_deref(), input.lenient)?.dataset)
}

fn read_opt<T: DeserializeOwned>(path: Option<&PathBuf>) -> AppResult<Option<T>> {
    path.map(|p| read_json(p)).transpose()
}

#[derive(Serialize)]
struct SplitPayload {
    v: u32,
    seed: u64,
    initial_rows: usize,
    pool_rows: usize,
    initial_digest: String,
    pool_digest: String,
}

#[derive(Serialize)]
struct SamplePayload {
    v: u32,
    seed: u64,
    rows: usize,
    digest: String,
}

#[derive(Serialize)]
struct FixturePayload {
    v: u32,
    csv: String,
    schema: String,
    n: u64,
}

pub fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> AppResult<()> {
    match command {
        Command::Summary { input } => {
            let (_, loaded) = load_input(&input)?;
            let summary = summarize(&loaded.dataset);
            emit_json(out, &payload::dataset_payload(None, &summary, &loaded.excluded))
        }
        Command::Report { input, tau, measures, format } => {
            let (schema, loaded) = load_input(&input)?;
            let summary = summarize(&loaded.dataset);
            let report = payload::report_payload(&summary, &ReportQuery { tau: Some(tau), measures }, tau)?;
            match format {
                ReportFormat::Json => emit_json(out, &report),
                ReportFormat::Text => emit(out, &payload::report_text(&schema, &report)),
            }
        }
        Command::Mitigate {
            input,
            targets,
            preserve,
            rounding,
            free_vars,
            costs,
            budget,
            order,
            tau,
            plan_out,
        } => {
            let (_, loaded) = load_input(&input)?;
            let summary = summarize(&loaded.dataset);
            let req = MitigateRequest {
                targets: read_opt::<TargetsExport>(targets.as_ref())?,
                preserve,
                rounding: rounding.unwrap_or_default(),
                free_vars,
                costs: read_opt::<CostModelExport>(costs.as_ref())?,
                budget,
                order,
                tau,
            };
            let result = payload::mitigate_payload(&summary, &req, DEFAULT_TAU)?;
            if let Some(path) = plan_out {
                write_file(&path, &payload::render(&result.plan))?;
            }
            emit_json(out, &result)
        }
        Command::Grid {
            input,
            x,
            y,
            focus,
            max_x,
            max_y,
            min_rows,
            costs,
            budget,
            tau,
            format,
        } => {
            let (_, loaded) = load_input(&input)?;
            let summary = summarize(&loaded.dataset);
            let req = GridRequest {
                x,
                y,
                focus,
                max_x,
                max_y,
                min_rows,
                costs: read_opt::<CostModelExport>(costs.as_ref())?,
                budget,
                tau,
            };
            let (result, grid) = payload::grid_payload(&summary, &req)?;
            match format {
                GridFormat::Json => emit_json(out, &result),
                GridFormat::Csv => emit(out, &grid.to_csv()),
            }
        }
        Command::Partition { input, initial_size, seed, initial_out, pool_out } => {
            let (_, loaded) = load_input(&input)?;
            let (initial, pool) = partition_dataset(&loaded.dataset, PartitionSpec { initial_size, seed })?;
            write_file(&initial_out, &export_to_string(&initial))?;
            write_file(&pool_out, &export_to_string(&pool))?;
            emit_json(
                out,
                &SplitPayload {
                    v: VERSION,
                    seed,
                    initial_rows: initial.n(),
                    pool_rows: pool.n(),
                    initial_digest: summarize(&initial).digest(),
                    pool_digest: summarize(&pool).digest(),
                },
            )
        }
        Command::Sample { input, size, seed, out: path } => {
            let (_, loaded) = load_input(&input)?;
            let sample = uniform_sample(&loaded.dataset, size, seed)?;
            write_file(&path, &export_to_string(&sample))?;
            emit_json(
                out,
                &SamplePayload {
                    v: VERSION,
                    seed,
                    rows: sample.n(),
                    digest: summarize(&sample).digest(),
                },
            )
        }
        Command::Realize {
            input,
            pool,
            seed,
            plan,
            targets,
            preserve,
            pipeline,
            out: path,
        } => {
            let (schema, loaded) = load_input(&input)?;
            let summary = summarize(&loaded.dataset);
            let targets = read_opt::<TargetsExport>(targets.as_ref())?;
            if let Some(step) = pipeline {
                let pool = load_other(&pool, &schema, &input)?;
                let k = if targets.is_some() || !preserve.is_empty() {
                    Some(payload::resolve_targets(&summary, targets.as_ref(), &preserve)?)
                } else {
                    None
                };
                let order = match step {
                    PipelineArg::Resample => PipelineOrder::ResampleToInitialSize,
                    PipelineArg::Keep => PipelineOrder::KeepMitigated,
                };
                let (result, output) = payload::pipeline_payload(&loaded.dataset, &pool, k.as_ref(), order, seed)?;
                if let Some(path) = path {
                    write_file(&path, &export_to_string(&output))?;
                }
                return emit_json(out, &result);
            }
            let pool_csv = String::from_utf8(read(&pool)?)
                .map_err(|_| AppError::validation("malformed", format!("{} is not UTF-8", pool.display())))?;
            let req = RealizeRequest {
                pool_csv,
                delimiter: input.delimiter.clone(),
                seed,
                plan: read_opt::<PlanExport>(plan.as_ref())?,
                targets,
                preserve,
            };
            let (result, added) = payload::realize_payload(&summary, &req)?;
            if !result.report.is_complete() {
                let _ = writeln!(err, "warning: pool short by {} tuples", result.report.shortfall);
            }
            if let Some(path) = path {
                let combined = loaded.dataset.concat(&added)?;
                write_file(&path, &export_to_string(&combined))?;
            }
            emit_json(out, &result)
        }
        Command::Serve { bind, upload_cap, sessions, tau } => {
            let config = Config { upload_cap, sessions, default_tau: tau };
            let runtime = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|e| AppError::io(e.to_string()))?;
            runtime.block_on(http::serve(&bind, config))
        }
        Command::Fixture { name, dir } => {
            let (stem, summary) = match name {
                FixtureName::Compas => ("compas", fixtures::compas_summary()),
                FixtureName::Adult => ("adult", fixtures::adult_summary()),
            };
            fs::create_dir_all(&dir).map_err(|e| AppError::io(format!("{}: {e}", dir.display())))?;
            let csv = dir.join(format!("{stem}.csv"));
            let schema = dir.join(format!("{stem}.schema.json"));
            write_file(&csv, &fixtures::csv_from_summary(&summary))?;
            write_file(&schema, &payload::render(summary.schema()))?;
            emit_json(
                out,
                &FixturePayload {
                    v: VERSION,
                    csv: csv.display().to_string(),
                    schema: schema.display().to_string(),
                    n: summary.n(),
                },
            )
        }
    }
}
