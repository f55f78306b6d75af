//! CSV ingestion with a missing-value drop pass, and the matching writer.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Result, SnvcError};

/// Cell spellings treated as missing, compared case-insensitively after trimming.
pub const MISSING_TOKENS: [&str; 5] = ["", "na", "nan", "null", "n/a"];

/// Which columns play which role.
#[derive(Debug, Clone, PartialEq)]
pub struct TableSchema {
    pub coords: (String, String),
    pub response: Option<String>,
    pub covariates: Vec<String>,
}

impl TableSchema {
    fn designated(&self) -> Vec<&str> {
        let mut v = vec![self.coords.0.as_str(), self.coords.1.as_str()];
        v.extend(self.response.as_deref());
        v.extend(self.covariates.iter().map(String::as_str));
        v
    }

    fn check(&self) -> Result<()> {
        if self.coords.0 == self.coords.1 {
            return Err(SnvcError::config(
                "coords",
                "the two coordinate columns must differ",
            ));
        }
        if let Some(r) = &self.response {
            if *r == self.coords.0 || *r == self.coords.1 {
                return Err(SnvcError::config(
                    "y",
                    format!("response `{r}` is also a coordinate column"),
                ));
            }
        }
        Ok(())
    }
}

/// Designated columns of the rows that survived the drop pass.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    /// Every column name in the header, in file order.
    pub columns: Vec<String>,
    pub coords: Vec<[f64; 2]>,
    pub response: Option<Vec<f64>>,
    pub covariate_names: Vec<String>,
    /// One vector per covariate.
    pub covariates: Vec<Vec<f64>>,
    pub dropped_count: usize,
    /// 1-based data row numbers (header excluded) of the kept rows.
    pub source_rows: Vec<usize>,
}

impl DataTable {
    pub fn n_rows(&self) -> usize {
        self.coords.len()
    }
}

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    MISSING_TOKENS.iter().any(|m| t.eq_ignore_ascii_case(m))
}

pub fn load_table(path: impl AsRef<Path>, schema: &TableSchema) -> Result<DataTable> {
    read_table(File::open(path)?, schema)
}

/// Lines starting with `#` are skipped. A row is dropped when any designated
/// cell is missing or parses to a non-finite value; any other unparsable
/// designated cell is an error.
pub fn read_table<R: Read>(reader: R, schema: &TableSchema) -> Result<DataTable> {
    schema.check()?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let columns: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let designated = schema.designated();
    let idx: Vec<usize> = designated
        .iter()
        .map(|name| {
            columns
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| SnvcError::MissingColumn(name.to_string()))
        })
        .collect::<Result<_>>()?;

    let k = schema.covariates.len();
    let offset = if schema.response.is_some() { 3 } else { 2 };
    let mut coords = Vec::new();
    let mut response = Vec::new();
    let mut covariates = vec![Vec::new(); k];
    let mut source_rows = Vec::new();
    let mut dropped = 0;
    let mut vals = vec![0.0; idx.len()];

    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = r + 1;
        let mut keep = true;
        for (slot, &c) in idx.iter().enumerate() {
            let cell = rec.get(c).unwrap_or("");
            if is_missing(cell) {
                keep = false;
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| SnvcError::Parse {
                row,
                column: designated[slot].to_string(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                keep = false;
            }
            vals[slot] = v;
        }
        if !keep {
            dropped += 1;
            continue;
        }
        coords.push([vals[0], vals[1]]);
        if schema.response.is_some() {
            response.push(vals[2]);
        }
        for j in 0..k {
            covariates[j].push(vals[offset + j]);
        }
        source_rows.push(row);
    }
    if coords.is_empty() {
        return Err(SnvcError::EmptyAfterFiltering);
    }
    Ok(DataTable {
        columns,
        coords,
        response: schema.response.as_ref().map(|_| response),
        covariate_names: schema.covariates.clone(),
        covariates,
        dropped_count: dropped,
        source_rows,
    })
}

/// Writes `comment` lines (each prefixed with `# `), a header and the rows.
/// Floats use the shortest representation that parses back to the same value.
pub fn write_table<W: Write>(
    out: W,
    comment: &[String],
    header: &[String],
    rows: &[Vec<f64>],
) -> Result<()> {
    let mut out = out;
    for line in comment {
        writeln!(out, "# {line}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(SnvcError::DimensionMismatch(format!(
                "row of {} values for {} columns",
                row.len(),
                header.len()
            )));
        }
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_table_file(
    path: impl AsRef<Path>,
    comment: &[String],
    header: &[String],
    rows: &[Vec<f64>],
) -> Result<()> {
    write_table(
        std::io::BufWriter::new(File::create(path)?),
        comment,
        header,
        rows,
    )
}
