//! Row-level datasets: CSV ingestion against a schema, and export.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::schema::{Attribute, FairnessSchema};

/// Knobs for [`load_dataset_with`].
#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub delimiter: u8,
    /// Exclude offending rows and report them instead of failing.
    pub lenient: bool,
    /// Field contents (after trimming) treated as missing.
    pub missing_markers: Vec<String>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            delimiter: b',',
            lenient: false,
            missing_markers: vec![String::new()],
        }
    }
}

/// A row dropped in lenient mode. `row` is 1-based over data rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcludedRow {
    pub row: usize,
    pub reason: Error,
}

#[derive(Debug, Clone)]
pub struct LoadOutcome {
    pub dataset: Dataset,
    pub excluded: Vec<ExcludedRow>,
}

/// Validated rows plus, per row, the base group and label it falls into.
///
/// All original columns are kept so exported samples stay usable by
/// downstream trainers.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Arc<FairnessSchema>,
    headers: Arc<[String]>,
    rows: Vec<Arc<[String]>>,
    codes: Vec<(u32, u32)>,
}

impl Dataset {
    pub fn schema(&self) -> &FairnessSchema {
        &self.schema
    }

    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[String] {
        &self.rows[i]
    }

    /// Base-group index of row `i`.
    pub fn base_of(&self, i: usize) -> usize {
        self.codes[i].0 as usize
    }

    /// Label index of row `i`.
    pub fn label_of(&self, i: usize) -> usize {
        self.codes[i].1 as usize
    }

    /// Rows `indices` in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            headers: self.headers.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            codes: indices.iter().map(|&i| self.codes[i]).collect(),
        }
    }

    /// Concatenation; both sides must share schema and header.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        out.rows.extend(other.rows.iter().cloned());
        out.codes.extend_from_slice(&other.codes);
        Ok(out)
    }

    pub fn check_compatible(&self, other: &Dataset) -> Result<()> {
        if *self.schema != *other.schema {
            return Err(Error::SchemaMismatch("datasets use different schemas".into()));
        }
        if self.headers != other.headers {
            return Err(Error::SchemaMismatch("datasets have different headers".into()));
        }
        Ok(())
    }

    /// Empty dataset sharing this one's schema and header.
    pub fn empty_like(&self) -> Dataset {
        self.select(&[])
    }
}

/// Strict load: the first schema violation is returned as the error.
pub fn load_dataset<R: Read>(source: R, schema: &FairnessSchema) -> Result<Dataset> {
    load_dataset_with(source, schema, &LoadOptions::default()).map(|o| o.dataset)
}

pub fn load_dataset_with<R: Read>(
    source: R,
    schema: &FairnessSchema,
    options: &LoadOptions,
) -> Result<LoadOutcome> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(true)
        .flexible(false)
        .from_reader(source);
    let headers: Vec<String> = reader
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let sensitive_cols = schema
        .sensitive()
        .iter()
        .map(|a| column(&a.name))
        .collect::<Result<Vec<_>>>()?;
    let label_col = column(&schema.label().name)?;

    let mut rows = Vec::new();
    let mut codes = Vec::new();
    let mut excluded = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row_no = i + 1;
        let record = record.map_err(csv_error)?;
        let decoded = decode_row(schema, &record, row_no, &sensitive_cols, label_col, options);
        match decoded {
            Ok(code) => {
                rows.push(record.iter().map(str::to_string).collect::<Vec<_>>().into());
                codes.push(code);
            }
            Err(e) if options.lenient => excluded.push(ExcludedRow { row: row_no, reason: e }),
            Err(e) => return Err(e),
        }
    }
    Ok(LoadOutcome {
        dataset: Dataset {
            schema: Arc::new(schema.clone()),
            headers: headers.into(),
            rows,
            codes,
        },
        excluded,
    })
}

fn decode_row(
    schema: &FairnessSchema,
    record: &csv::StringRecord,
    row: usize,
    sensitive_cols: &[usize],
    label_col: usize,
    options: &LoadOptions,
) -> Result<(u32, u32)> {
    let lookup = |attr: &Attribute, col: usize| -> Result<usize> {
        let raw = record.get(col).unwrap_or("").trim();
        if options.missing_markers.iter().any(|m| m == raw) {
            return Err(Error::MissingValue {
                row,
                attr: attr.name.clone(),
            });
        }
        attr.index_of(raw).ok_or_else(|| Error::DomainViolation {
            row,
            attr: attr.name.clone(),
            value: raw.to_string(),
        })
    };
    let values = schema
        .sensitive()
        .iter()
        .zip(sensitive_cols)
        .map(|(a, &c)| lookup(a, c))
        .collect::<Result<Vec<_>>>()?;
    let label = lookup(schema.label(), label_col)?;
    Ok((schema.base_index(&values) as u32, label as u32))
}

fn csv_error(e: csv::Error) -> Error {
    if e.is_io_error() {
        Error::Io(e.to_string())
    } else {
        Error::Malformed(e.to_string())
    }
}

/// Builds a schema whose domains are the sorted distinct values observed.
///
/// Rows with an empty value in any named column are ignored when collecting
/// domains; [`load_dataset`] will still reject them.
pub fn infer_schema<R: Read>(
    source: R,
    sensitive: &[&str],
    label: &str,
    delimiter: u8,
) -> Result<FairnessSchema> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .from_reader(source);
    let headers: Vec<String> = reader
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let names: Vec<&str> = sensitive.iter().copied().chain(std::iter::once(label)).collect();
    let cols = names
        .iter()
        .map(|n| {
            headers
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| Error::MissingColumn(n.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut domains = vec![BTreeSet::new(); names.len()];
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        for (domain, &c) in domains.iter_mut().zip(&cols) {
            let v = record.get(c).unwrap_or("").trim();
            if !v.is_empty() {
                domain.insert(v.to_string());
            }
        }
    }
    let mut attrs: Vec<Attribute> = names
        .iter()
        .zip(domains)
        .map(|(n, d)| Attribute::new(*n, d))
        .collect();
    let label_attr = attrs.pop().expect("label attribute present");
    FairnessSchema::new(attrs, label_attr)
}

struct CountingWriter<W> {
    inner: W,
    written: u64,
}

impl<W: Write> Write for CountingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.written += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

/// Writes the dataset as comma-separated CSV with its header; returns bytes written.
pub fn export_dataset<W: Write>(dataset: &Dataset, destination: W) -> Result<u64> {
    let mut counter = CountingWriter {
        inner: destination,
        written: 0,
    };
    {
        let mut writer = csv::Writer::from_writer(&mut counter);
        writer.write_record(dataset.headers()).map_err(csv_error)?;
        for row in &dataset.rows {
            writer.write_record(row.iter()).map_err(csv_error)?;
        }
        writer.flush()?;
    }
    Ok(counter.written)
}

/// Convenience wrapper returning the CSV text.
pub fn export_to_string(dataset: &Dataset) -> String {
    let mut buf = Vec::new();
    export_dataset(dataset, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is utf-8")
}
