//! Row-level sampling: initial/pool partitions, uniform samples, and drawing
//! the tuples a plan asks for from a pool.
//!
//! Randomness is ChaCha8 seeded from a `u64`; independent draws use
//! separate streams of the same seed, so results are identical across
//! platforms and do not depend on the order in which cells are processed.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::mitigation::{minimal_mitigation, EditSet, KTargets, MitigationPlan};
use crate::schema::FairnessSchema;
use crate::summary::{summarize, SummaryTable};

/// Stream used by [`uniform_sample`] and [`partition_dataset`]; per-cell
/// draws in [`realize_additions`] use the cell index as their stream.
const SAMPLE_STREAM: u64 = u64::MAX;
/// Stream for the final resample in [`mitigation_pipeline`].
const RESAMPLE_STREAM: u64 = u64::MAX - 1;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `k` distinct positions out of `0..n`, ascending (partial Fisher–Yates).
fn choose(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.gen_range(i as u64..n as u64) as usize;
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionSpec {
    pub initial_size: usize,
    pub seed: u64,
}

/// Splits `dataset` uniformly at random into an initial sample of exactly
/// `initial_size` rows and the pool of the rest. Both keep the original
/// row order.
pub fn partition_dataset(dataset: &Dataset, spec: PartitionSpec) -> Result<(Dataset, Dataset)> {
    let n = dataset.n();
    if spec.initial_size > n {
        return Err(Error::InvalidSize {
            requested: spec.initial_size,
            available: n,
        });
    }
    let chosen = choose(n, spec.initial_size, &mut rng_for(spec.seed, SAMPLE_STREAM));
    let mut taken = vec![false; n];
    for &i in &chosen {
        taken[i] = true;
    }
    let rest: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
    Ok((dataset.select(&chosen), dataset.select(&rest)))
}

/// `size` rows drawn uniformly without replacement, in original order.
pub fn uniform_sample(dataset: &Dataset, size: usize, seed: u64) -> Result<Dataset> {
    Ok(partition_dataset(dataset, PartitionSpec { initial_size: size, seed })?.0)
}

/// Outcome for one base cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CellRealization {
    pub group: BTreeMap<String, String>,
    pub label: String,
    pub requested: u64,
    pub available: u64,
    pub fulfilled: u64,
    pub shortfall: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RealizationReport {
    pub seed: u64,
    pub requested: u64,
    pub fulfilled: u64,
    pub shortfall: u64,
    pub cells: Vec<CellRealization>,
}

impl RealizationReport {
    pub fn is_complete(&self) -> bool {
        self.shortfall == 0
    }

    /// Cell-indexed fulfilled counts, usable as an addition vector.
    pub fn fulfilled_counts(&self) -> Vec<u64> {
        self.cells.iter().map(|c| c.fulfilled).collect()
    }
}

/// Draws `min(Δ, available)` pool rows per cell for the cell-indexed
/// `additions`. Rows come back grouped by cell (base order, then label),
/// each cell's rows in pool order.
pub fn realize_additions(
    schema: &FairnessSchema,
    additions: &[u64],
    pool: &Dataset,
    seed: u64,
) -> Result<(Dataset, RealizationReport)> {
    if pool.schema() != schema {
        return Err(Error::SchemaMismatch("pool and plan use different schemas".into()));
    }
    if additions.len() != schema.num_cells() {
        return Err(Error::SchemaMismatch(format!(
            "expected {} additions, got {}",
            schema.num_cells(),
            additions.len()
        )));
    }
    let k = schema.k();
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); schema.num_cells()];
    for i in 0..pool.n() {
        buckets[pool.base_of(i) * k + pool.label_of(i)].push(i);
    }
    let mut picked = Vec::new();
    let mut cells = Vec::with_capacity(additions.len());
    for (cell, (&want, bucket)) in additions.iter().zip(&buckets).enumerate() {
        let available = bucket.len() as u64;
        let take = want.min(available);
        let mut rng = rng_for(seed, cell as u64);
        picked.extend(choose(bucket.len(), take as usize, &mut rng).into_iter().map(|p| bucket[p]));
        cells.push(CellRealization {
            group: schema.group_to_map(&schema.base_key(cell / k)),
            label: schema.label_name(cell % k).to_string(),
            requested: want,
            available,
            fulfilled: take,
            shortfall: want - take,
        });
    }
    let requested = additions.iter().sum();
    let fulfilled = cells.iter().map(|c| c.fulfilled).sum();
    let report = RealizationReport {
        seed,
        requested,
        fulfilled,
        shortfall: requested - fulfilled,
        cells,
    };
    Ok((pool.select(&picked), report))
}

/// [`realize_additions`] for a plan's additions.
pub fn realize_plan(plan: &MitigationPlan, pool: &Dataset, seed: u64) -> Result<(Dataset, RealizationReport)> {
    realize_additions(plan.schema(), &plan.additions(), pool, seed)
}

/// [`realize_additions`] for the additions of an edit set (deletions are
/// applied to the source, not drawn from the pool).
pub fn realize_edits(
    schema: &FairnessSchema,
    edits: &EditSet,
    pool: &Dataset,
    seed: u64,
) -> Result<(Dataset, RealizationReport)> {
    realize_additions(schema, &edits.additions, pool, seed)
}

/// What happens after the pool rows are appended to the initial sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineOrder {
    /// Mitigate with pool rows, then draw a uniform sample of the initial
    /// size from the mitigated table.
    #[default]
    ResampleToInitialSize,
    /// Keep the whole mitigated table.
    KeepMitigated,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub plan: MitigationPlan,
    pub report: RealizationReport,
    /// Initial sample plus the realized pool rows.
    pub mitigated: Dataset,
    /// The dataset handed to downstream consumers, per [`PipelineOrder`].
    pub output: Dataset,
}

/// Minimal plan for `initial` (against `targets`, or `K ≡ 1`), realized
/// from `pool`, then finished according to `order`.
pub fn mitigation_pipeline(
    initial: &Dataset,
    pool: &Dataset,
    targets: Option<&KTargets>,
    order: PipelineOrder,
    seed: u64,
) -> Result<PipelineOutcome> {
    initial.check_compatible(pool)?;
    let summary: SummaryTable = summarize(initial);
    let ones;
    let targets = match targets {
        Some(t) => t,
        None => {
            ones = KTargets::ones(summary.schema());
            &ones
        }
    };
    let plan = minimal_mitigation(&summary, targets)?;
    let (rows, report) = realize_plan(&plan, pool, seed)?;
    let mitigated = initial.concat(&rows)?;
    let output = match order {
        PipelineOrder::KeepMitigated => mitigated.clone(),
        PipelineOrder::ResampleToInitialSize => {
            let chosen = choose(mitigated.n(), initial.n(), &mut rng_for(seed, RESAMPLE_STREAM));
            mitigated.select(&chosen)
        }
    };
    Ok(PipelineOutcome {
        plan,
        report,
        mitigated,
        output,
    })
}
