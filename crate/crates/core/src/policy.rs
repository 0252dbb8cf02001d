//! Two-operation what-if surfaces.
//!
//! Each axis adds or deletes tuples of one base cell. Every count entering
//! `b = 1 − (sy·n)/(s·ny)` for the focus cell is then affine in `(x, y)`,
//! so a grid value costs O(1) and the zero contour is a root of
//! `sy·n − s·ny`, a polynomial of degree ≤ 2 in `y`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{ub_from_counts, Classification};
use crate::mitigation::CostModel;
use crate::schema::{FairnessSchema, GroupKey};
use crate::summary::SummaryTable;

/// Grid budget per axis: default steps keep each axis near this many points.
pub const DEFAULT_POINTS: u64 = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Add,
    Delete,
}

impl OpKind {
    fn sign(self) -> i128 {
        match self {
            OpKind::Add => 1,
            OpKind::Delete => -1,
        }
    }
}

/// Add or delete up to `max` tuples of one base cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyOp {
    pub kind: OpKind,
    pub base: usize,
    pub label: usize,
    pub max: u64,
}

impl PolicyOp {
    pub fn new(schema: &FairnessSchema, kind: OpKind, group: &GroupKey, label: usize, max: u64) -> Result<Self> {
        let base = schema.base_index_of(group)?;
        if label >= schema.k() {
            return Err(Error::UnknownLabel(format!("#{label}")));
        }
        Ok(PolicyOp { kind, base, label, max })
    }

    pub fn add(schema: &FairnessSchema, group: &GroupKey, label: usize, max: u64) -> Result<Self> {
        Self::new(schema, OpKind::Add, group, label, max)
    }

    pub fn delete(schema: &FairnessSchema, group: &GroupKey, label: usize, max: u64) -> Result<Self> {
        Self::new(schema, OpKind::Delete, group, label, max)
    }

    /// Parses `kind:group:label:min:max` (e.g. `add:Male:neg:0:5100`) into
    /// an op and its lattice. `min` and `max` may be omitted together
    /// (`add:Male:neg:5100` means `0..=5100`), and the step may follow as a
    /// sixth field.
    pub fn parse(schema: &FairnessSchema, text: &str) -> Result<(Self, Lattice)> {
        let parts: Vec<&str> = text.split(':').map(str::trim).collect();
        let bad = || Error::Malformed(format!("expected kind:group:label:[min:]max[:step], got `{text}`"));
        if parts.len() < 4 || parts.len() > 6 {
            return Err(bad());
        }
        let kind = match parts[0] {
            "add" | "a" => OpKind::Add,
            "delete" | "del" | "d" => OpKind::Delete,
            _ => return Err(bad()),
        };
        let group = schema.parse_group(parts[1])?;
        let label = schema.label_index(parts[2])?;
        let num = |s: &str| s.parse::<u64>().map_err(|_| bad());
        let (min, max, step) = match parts.len() {
            4 => (0, num(parts[3])?, None),
            5 => (num(parts[3])?, num(parts[4])?, None),
            _ => (num(parts[3])?, num(parts[4])?, Some(num(parts[5])?)),
        };
        let op = Self::new(schema, kind, &group, label, max)?;
        let lattice = match step {
            Some(step) => Lattice::new(min, max, step)?,
            None => Lattice::with_default_step(min, max)?,
        };
        Ok((op, lattice))
    }

    pub fn to_export(&self, schema: &FairnessSchema) -> OpExport {
        OpExport {
            kind: self.kind,
            group: schema.group_to_map(&schema.base_key(self.base)),
            label: schema.label_name(self.label).to_string(),
            max: self.max,
        }
    }

    pub fn from_export(schema: &FairnessSchema, e: &OpExport) -> Result<Self> {
        let group = schema.group_from_map(&e.group)?;
        Self::new(schema, e.kind, &group, schema.label_index(&e.label)?, e.max)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpExport {
    pub kind: OpKind,
    pub group: BTreeMap<String, String>,
    pub label: String,
    pub max: u64,
}

/// Axis points `min, min+step, …`, always ending at `max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    pub min: u64,
    pub max: u64,
    pub step: u64,
}

impl Lattice {
    pub fn new(min: u64, max: u64, step: u64) -> Result<Self> {
        if min > max {
            return Err(Error::InvalidLattice(format!("min {min} > max {max}")));
        }
        if step == 0 {
            return Err(Error::InvalidLattice("step must be positive".into()));
        }
        Ok(Lattice { min, max, step })
    }

    /// Step `max(1, (max − min)/512)`.
    pub fn with_default_step(min: u64, max: u64) -> Result<Self> {
        Self::new(min, max, ((max.saturating_sub(min)) / DEFAULT_POINTS).max(1))
    }

    pub fn values(&self) -> Vec<u64> {
        let mut out: Vec<u64> = (self.min..=self.max).step_by(self.step as usize).collect();
        if out.last() != Some(&self.max) {
            out.push(self.max);
        }
        out
    }
}

/// Which axis a constraint talks about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// The axis value may not exceed `limit` (e.g. availability of new tuples).
    MaxOpValue { axis: Axis, limit: u64 },
    /// The edited table must keep at least this many rows.
    MinTotalRows(u64),
    /// Added tuples cost `c_{sy}` each; deletions are free.
    Budget(CostModel),
}

/// Input to [`bias_surface`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub x_op: PolicyOp,
    pub y_op: PolicyOp,
    pub focus: GroupKey,
    pub focus_label: usize,
    pub x_lattice: Lattice,
    pub y_lattice: Lattice,
}

impl GridSpec {
    /// Focus defaults to the y-op's cell.
    pub fn new(x: (PolicyOp, Lattice), y: (PolicyOp, Lattice), schema: &FairnessSchema) -> Self {
        let focus = schema.base_key(y.0.base);
        let focus_label = y.0.label;
        GridSpec {
            x_op: x.0,
            y_op: y.0,
            focus,
            focus_label,
            x_lattice: x.1,
            y_lattice: y.1,
        }
    }

    pub fn with_focus(mut self, group: GroupKey, label: usize) -> Self {
        self.focus = group;
        self.focus_label = label;
        self
    }
}

/// `c0 + cx·x + cy·y`, exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct Affine {
    c0: i128,
    cx: i128,
    cy: i128,
}

impl Affine {
    fn at(&self, x: u64, y: u64) -> i128 {
        self.c0 + self.cx * x as i128 + self.cy * y as i128
    }

    /// Fix `x`, leaving `(const, slope in y)`.
    fn in_y(&self, x: u64) -> (i128, i128) {
        (self.c0 + self.cx * x as i128, self.cy)
    }
}

/// The four focus counts as affine functions of the two op values.
#[derive(Debug, Clone, Copy)]
struct FocusForm {
    sy: Affine,
    s: Affine,
    ny: Affine,
    n: Affine,
}

impl FocusForm {
    fn build(summary: &SummaryTable, spec: &GridSpec) -> Result<Self> {
        let schema = summary.schema();
        let mut form = FocusForm {
            sy: Affine {
                c0: summary.group_count(&spec.focus, Some(spec.focus_label))? as i128,
                ..Default::default()
            },
            s: Affine {
                c0: summary.group_count(&spec.focus, None)? as i128,
                ..Default::default()
            },
            ny: Affine {
                c0: summary.label_total(spec.focus_label) as i128,
                ..Default::default()
            },
            n: Affine {
                c0: summary.n() as i128,
                ..Default::default()
            },
        };
        for (op, is_x) in [(&spec.x_op, true), (&spec.y_op, false)] {
            let a = op.kind.sign();
            let in_group = spec.focus.matches(&schema.base_values(op.base));
            let same_label = op.label == spec.focus_label;
            let bump = |f: &mut Affine, on: bool| {
                if on {
                    if is_x {
                        f.cx += a
                    } else {
                        f.cy += a
                    }
                }
            };
            bump(&mut form.sy, in_group && same_label);
            bump(&mut form.s, in_group);
            bump(&mut form.ny, same_label);
            bump(&mut form.n, true);
        }
        Ok(form)
    }

    fn bias(&self, x: u64, y: u64) -> Option<f64> {
        let c = |f: &Affine| u64::try_from(f.at(x, y)).ok();
        ub_from_counts(c(&self.sy)?, c(&self.s)?, c(&self.ny)?, c(&self.n)?).ok()
    }

    /// Real roots of `sy·n − s·ny = 0` in `y` at fixed `x`, ascending.
    fn roots(&self, x: u64) -> Vec<f64> {
        let (a0, a1) = self.sy.in_y(x);
        let (b0, b1) = self.n.in_y(x);
        let (c0, c1) = self.s.in_y(x);
        let (d0, d1) = self.ny.in_y(x);
        let qa = a1 * b1 - c1 * d1;
        let qb = a0 * b1 + a1 * b0 - c0 * d1 - c1 * d0;
        let qc = a0 * b0 - c0 * d0;
        if qa == 0 {
            if qb == 0 {
                return Vec::new();
            }
            return vec![-(qc as f64) / qb as f64];
        }
        let disc = (qb as f64).powi(2) - 4.0 * qa as f64 * qc as f64;
        if disc < 0.0 {
            return Vec::new();
        }
        // Stable form: q = −(b + sign(b)·√disc)/2, roots q/a and c/q.
        let sq = disc.sqrt();
        let q = -0.5 * (qb as f64 + sq.copysign(qb as f64));
        let mut r = vec![q / qa as f64];
        if q != 0.0 {
            r.push(qc as f64 / q);
        }
        r.sort_by(f64::total_cmp);
        r
    }
}

fn check_ops(summary: &SummaryTable, spec: &GridSpec) -> Result<()> {
    let schema = summary.schema();
    schema.check_key(&spec.focus)?;
    if spec.focus_label >= schema.k() {
        return Err(Error::UnknownLabel(format!("#{}", spec.focus_label)));
    }
    for (op, lat, name) in [(&spec.x_op, &spec.x_lattice, "x"), (&spec.y_op, &spec.y_lattice, "y")] {
        if op.base >= schema.num_base_groups() || op.label >= schema.k() {
            return Err(Error::InvalidLattice(format!("{name} op targets no cell")));
        }
        if lat.max > op.max {
            return Err(Error::InvalidLattice(format!(
                "{name} lattice reaches {} beyond the op range {}",
                lat.max, op.max
            )));
        }
    }
    // Deletions must fit at every lattice point, including the far corner.
    let mut deleted: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for (op, lat) in [(&spec.x_op, &spec.x_lattice), (&spec.y_op, &spec.y_lattice)] {
        if op.kind == OpKind::Delete {
            *deleted.entry((op.base, op.label)).or_default() += lat.max;
        }
    }
    for ((base, label), total) in deleted {
        if total > summary.cell(base, label) {
            return Err(Error::LatticeOverdelete {
                group: schema.display(&schema.base_key(base)),
                label: schema.label_name(label).to_string(),
            });
        }
    }
    Ok(())
}

/// Bias of the focus cell over the lattice; `feasible` starts all true.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGrid {
    pub schema: FairnessSchema,
    pub spec: GridSpec,
    /// Row count of the unedited table.
    pub n: u64,
    pub x_values: Vec<u64>,
    pub y_values: Vec<u64>,
    /// `values[xi * y_values.len() + yi]`; `None` where the focus group or label is empty.
    pub values: Vec<Option<f64>>,
    pub feasible: Vec<bool>,
    /// One entry per x value: the real `y` with `b = 0`, if it lies in the y range.
    pub contour: Vec<(u64, Option<f64>)>,
}

impl PolicyGrid {
    pub fn at(&self, xi: usize, yi: usize) -> Option<f64> {
        self.values[xi * self.y_values.len() + yi]
    }

    pub fn feasible_at(&self, xi: usize, yi: usize) -> bool {
        self.feasible[xi * self.y_values.len() + yi]
    }

    pub fn x_index(&self, x: u64) -> Option<usize> {
        self.x_values.iter().position(|&v| v == x)
    }

    pub fn y_index(&self, y: u64) -> Option<usize> {
        self.y_values.iter().position(|&v| v == y)
    }

    /// Replaces the mask with the one induced by `constraints`.
    pub fn apply_constraints(&mut self, constraints: &[Constraint]) -> Result<()> {
        self.feasible = feasible_mask(self, constraints)?;
        Ok(())
    }

    pub fn to_export(&self) -> GridExport {
        let schema = &self.schema;
        GridExport {
            v: 1,
            x_op: self.spec.x_op.to_export(schema),
            y_op: self.spec.y_op.to_export(schema),
            focus: FocusExport {
                group: schema.group_to_map(&self.spec.focus),
                label: schema.label_name(self.spec.focus_label).to_string(),
            },
            x_lattice: self.spec.x_lattice,
            y_lattice: self.spec.y_lattice,
            x_values: self.x_values.clone(),
            y_values: self.y_values.clone(),
            b: self.values.clone(),
            feasible: self.feasible.clone(),
            contour: self
                .contour
                .iter()
                .filter_map(|&(x, y)| y.map(|y| [x as f64, y]))
                .collect(),
            no_root: self
                .contour
                .iter()
                .filter(|(_, y)| y.is_none())
                .map(|&(x, _)| x)
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_export()).expect("grid serializes")
    }

    /// `x,y,b,feasible` per lattice point, x-major; empty `b` where undefined.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,b,feasible\n");
        for (xi, &x) in self.x_values.iter().enumerate() {
            for (yi, &y) in self.y_values.iter().enumerate() {
                let b = self.at(xi, yi).map(|b| b.to_string()).unwrap_or_default();
                let _ = writeln!(out, "{x},{y},{b},{}", self.feasible_at(xi, yi));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocusExport {
    pub group: BTreeMap<String, String>,
    pub label: String,
}

/// JSON form of a [`PolicyGrid`]; `b` and `feasible` are x-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridExport {
    pub v: u32,
    pub x_op: OpExport,
    pub y_op: OpExport,
    pub focus: FocusExport,
    pub x_lattice: Lattice,
    pub y_lattice: Lattice,
    pub x_values: Vec<u64>,
    pub y_values: Vec<u64>,
    pub b: Vec<Option<f64>>,
    pub feasible: Vec<bool>,
    pub contour: Vec<[f64; 2]>,
    pub no_root: Vec<u64>,
}

/// Evaluates the focus bias at every lattice point, plus the zero contour.
pub fn bias_surface(summary: &SummaryTable, spec: &GridSpec) -> Result<PolicyGrid> {
    check_ops(summary, spec)?;
    let form = FocusForm::build(summary, spec)?;
    let x_values = spec.x_lattice.values();
    let y_values = spec.y_lattice.values();
    let mut values = Vec::with_capacity(x_values.len() * y_values.len());
    for &x in &x_values {
        values.extend(y_values.iter().map(|&y| form.bias(x, y)));
    }
    let contour = contour_from_form(&form, &x_values, &spec.y_lattice);
    Ok(PolicyGrid {
        schema: summary.schema().clone(),
        spec: spec.clone(),
        n: summary.n(),
        feasible: vec![true; values.len()],
        x_values,
        y_values,
        values,
        contour,
    })
}

/// Exact focus bias at one point, off-lattice points included.
pub fn bias_at(summary: &SummaryTable, spec: &GridSpec, x: u64, y: u64) -> Result<Option<f64>> {
    check_ops(summary, spec)?;
    Ok(FocusForm::build(summary, spec)?.bias(x, y))
}

fn contour_from_form(form: &FocusForm, xs: &[u64], y_range: &Lattice) -> Vec<(u64, Option<f64>)> {
    let (lo, hi) = (y_range.min as f64, y_range.max as f64);
    xs.iter()
        .map(|&x| {
            let root = form.roots(x).into_iter().find(|&r| {
                // Tolerate float noise at the range ends.
                r >= lo - 1e-9 && r <= hi + 1e-9 && {
                    let y = r.clamp(lo, hi);
                    let s = form.s.in_y(x);
                    let ny = form.ny.in_y(x);
                    s.0 as f64 + s.1 as f64 * y > 0.0 && ny.0 as f64 + ny.1 as f64 * y > 0.0
                }
            });
            (x, root.map(|r| r.clamp(lo, hi)))
        })
        .collect()
}

/// For each x in `xs`, the real `y` in the y lattice's range where the focus
/// bias is 0, or `None` when there is no root in range.
pub fn zero_bias_contour(summary: &SummaryTable, spec: &GridSpec, xs: &[u64]) -> Result<Vec<(u64, Option<f64>)>> {
    check_ops(summary, spec)?;
    let form = FocusForm::build(summary, spec)?;
    Ok(contour_from_form(&form, xs, &spec.y_lattice))
}

/// Feasibility of each lattice point under all `constraints`.
pub fn feasible_mask(grid: &PolicyGrid, constraints: &[Constraint]) -> Result<Vec<bool>> {
    let schema = &grid.schema;
    let x_op = &grid.spec.x_op;
    let y_op = &grid.spec.y_op;
    let cost = |op: &PolicyOp, m: &CostModel| match op.kind {
        OpKind::Add => m.cost(schema, op.base, op.label),
        OpKind::Delete => 0.0,
    };
    for c in constraints {
        if let Constraint::Budget(m) = c {
            m.validate(schema)?;
        }
    }
    let ny = grid.y_values.len();
    let mut mask = vec![true; grid.values.len()];
    for (xi, &x) in grid.x_values.iter().enumerate() {
        for (yi, &y) in grid.y_values.iter().enumerate() {
            let ok = constraints.iter().all(|c| match c {
                Constraint::MaxOpValue { axis: Axis::X, limit } => x <= *limit,
                Constraint::MaxOpValue { axis: Axis::Y, limit } => y <= *limit,
                Constraint::MinTotalRows(min) => {
                    let n = grid.n as i128 + x_op.kind.sign() * x as i128 + y_op.kind.sign() * y as i128;
                    n >= *min as i128
                }
                Constraint::Budget(m) => x as f64 * cost(x_op, m) + y as f64 * cost(y_op, m) <= m.budget,
            });
            mask[xi * ny + yi] = ok;
        }
    }
    Ok(mask)
}

/// Per-point classification against `τ`; undefined points stay `Undefined`.
pub fn classify_surface(grid: &PolicyGrid, tolerance: f64) -> Result<Vec<Classification>> {
    if !tolerance.is_finite() || tolerance < 0.0 {
        return Err(Error::InvalidTolerance(tolerance));
    }
    Ok(grid
        .values
        .iter()
        .map(|v| v.map_or(Classification::Undefined, |b| Classification::of(b, tolerance)))
        .collect())
}

/// The summary after applying `x` of the x-op and `y` of the y-op. This is
/// the slow path the closed form is checked against.
pub fn edited_summary(summary: &SummaryTable, spec: &GridSpec, x: u64, y: u64) -> Result<SummaryTable> {
    let mut counts = summary.counts().to_vec();
    let k = summary.k();
    for (op, v) in [(&spec.x_op, x), (&spec.y_op, y)] {
        let c = &mut counts[op.base * k + op.label];
        *c = match op.kind {
            OpKind::Add => c.checked_add(v).ok_or(Error::Overflow)?,
            OpKind::Delete => c.checked_sub(v).ok_or_else(|| Error::LatticeOverdelete {
                group: summary.schema().display(&summary.schema().base_key(op.base)),
                label: summary.schema().label_name(op.label).to_string(),
            })?,
        };
    }
    summary.with_counts(counts)
}
