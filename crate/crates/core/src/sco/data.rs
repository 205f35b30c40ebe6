//! Data points, the raw-label boundary, and the text dataset format.
//!
//! Datasets on disk are line-oriented `feature_id,label` records. Features
//! live in a sidecar table of `feature_id,v1,v2,...` rows. Blank lines and
//! lines starting with `#` are ignored in both files.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::mechanisms::{Label, SanitizedSubset};

#[derive(Debug, Clone, PartialEq)]
pub struct DataPoint<X> {
    pub feature: X,
    pub label: Label,
}

impl<X> DataPoint<X> {
    pub fn new(feature: X, label: Label) -> Self {
        Self { feature, label }
    }
}

/// Read access to private labels. Only the randomization stage takes one.
pub trait LabelStore {
    fn len(&self) -> usize;

    fn label(&self, index: usize) -> Label;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<X> LabelStore for [DataPoint<X>] {
    fn len(&self) -> usize {
        <[DataPoint<X>]>::len(self)
    }

    fn label(&self, index: usize) -> Label {
        self[index].label
    }
}

impl<X> LabelStore for Vec<DataPoint<X>> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }

    fn label(&self, index: usize) -> Label {
        self[index].label
    }
}

/// What the analyzer receives from one user: the public feature and the
/// sanitized label. There is no path from here back to the raw label.
#[derive(Debug, Clone, PartialEq)]
pub struct SanitizedRecord<'a, X> {
    pub feature: &'a X,
    pub subset: SanitizedSubset,
}

fn data_lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    reader
        .lines()
        .enumerate()
        .map(|(i, line)| line.map(|l| (i + 1, l)).map_err(Error::from))
        .filter(|r| match r {
            Ok((_, l)) => {
                let t = l.trim();
                !t.is_empty() && !t.starts_with('#')
            }
            Err(_) => true,
        })
}

fn parse_field<T: std::str::FromStr>(field: &str, line: usize, what: &str) -> Result<T> {
    field.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid {what} `{}`", field.trim()),
    })
}

/// Reads `feature_id,label` records. Labels are checked against `num_labels`.
pub fn read_records<R: BufRead>(reader: R, num_labels: usize) -> Result<Vec<DataPoint<u64>>> {
    let mut out = Vec::new();
    for item in data_lines(reader) {
        let (line, text) = item?;
        let mut fields = text.split(',');
        let (Some(id), Some(label), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::Parse {
                line,
                message: "expected `feature_id,label`".into(),
            });
        };
        let id: u64 = parse_field(id, line, "feature id")?;
        let label: usize = parse_field(label, line, "label")?;
        out.push(DataPoint::new(id, Label::new(label, num_labels)?));
    }
    Ok(out)
}

pub fn write_records<W: Write>(mut writer: W, data: &[DataPoint<u64>]) -> Result<()> {
    for p in data {
        writeln!(writer, "{},{}", p.feature, p.label)?;
    }
    Ok(())
}

/// Reads a `feature_id,v1,v2,...` table. All rows must share one width.
pub fn read_feature_table<R: BufRead>(reader: R) -> Result<HashMap<u64, Vec<f64>>> {
    let mut table = HashMap::new();
    let mut width = None;
    for item in data_lines(reader) {
        let (line, text) = item?;
        let mut fields = text.split(',');
        let id: u64 = parse_field(fields.next().unwrap_or(""), line, "feature id")?;
        let values = fields
            .map(|f| parse_field::<f64>(f, line, "feature value"))
            .collect::<Result<Vec<_>>>()?;
        if *width.get_or_insert(values.len()) != values.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} feature values, found {}", width.unwrap(), values.len()),
            });
        }
        if table.insert(id, values).is_some() {
            return Err(Error::Parse {
                line,
                message: format!("duplicate feature id {id}"),
            });
        }
    }
    Ok(table)
}

/// Replaces feature ids by their rows from `table`.
pub fn resolve_features(
    records: &[DataPoint<u64>],
    table: &HashMap<u64, Vec<f64>>,
) -> Result<Vec<DataPoint<Vec<f64>>>> {
    records
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let feature = table.get(&p.feature).ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("feature id {} missing from table", p.feature),
            })?;
            Ok(DataPoint::new(feature.clone(), p.label))
        })
        .collect()
}
