//! CSV and ARFF ingestion into a timestamp-ordered [`RawDataset`].

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{AttributeKind, AttributeSchema, ColumnRole, SchemaError, TimestampSource};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("row {row}: expected {expected} fields, found {found}")]
    Arity { row: usize, expected: usize, found: usize },
    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    BadNumber { row: usize, column: String, value: String },
    #[error("row {row}: cannot parse timestamp `{value}`")]
    BadTimestamp { row: usize, value: String },
    #[error("malformed ARFF at line {line}: {message}")]
    Arff { line: usize, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Csv { delimiter: u8 },
    Arff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RawValue {
    Missing,
    Number(f64),
    Label(String),
}

impl RawValue {
    pub fn is_missing(&self) -> bool {
        matches!(self, RawValue::Missing)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub timestamp: i64,
    /// One slot per analyzed attribute, in schema order.
    pub values: Vec<RawValue>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub schema: AttributeSchema,
    pub records: Vec<RawRecord>,
}

fn is_missing_cell(cell: &str) -> bool {
    cell.is_empty() || cell == "?"
}

struct RowBuilder<'a> {
    schema: &'a AttributeSchema,
    roles: Vec<ColumnRole>,
    header: Vec<String>,
    records: Vec<RawRecord>,
}

impl<'a> RowBuilder<'a> {
    fn new(schema: &'a AttributeSchema, header: Vec<String>) -> Result<Self, IngestError> {
        let roles = schema.plan_columns(&header)?;
        Ok(Self { schema, roles, header, records: Vec::new() })
    }

    /// `row` is the 1-based data row number used in error messages.
    fn push<'c>(&mut self, row: usize, cells: impl ExactSizeIterator<Item = &'c str>) -> Result<(), IngestError> {
        if cells.len() != self.roles.len() {
            return Err(IngestError::Arity { row, expected: self.roles.len(), found: cells.len() });
        }
        let mut values = vec![RawValue::Missing; self.schema.len()];
        let mut timestamp = self.records.len() as i64;
        for (col, cell) in cells.enumerate() {
            let cell = cell.trim();
            match self.roles[col] {
                ColumnRole::Skip => {}
                ColumnRole::Timestamp => {
                    timestamp = self
                        .schema
                        .clock()
                        .parse_time(cell)
                        .map_err(|_| IngestError::BadTimestamp { row, value: cell.to_string() })?;
                }
                ColumnRole::Attribute(id) => {
                    if is_missing_cell(cell) {
                        continue;
                    }
                    values[id] = match self.schema.attribute(id).kind {
                        AttributeKind::Categorical => RawValue::Label(cell.to_string()),
                        AttributeKind::Numeric => match cell.parse::<f64>() {
                            Ok(v) if v.is_nan() => RawValue::Missing,
                            Ok(v) => RawValue::Number(v),
                            Err(_) => {
                                return Err(IngestError::BadNumber {
                                    row,
                                    column: self.header[col].clone(),
                                    value: cell.to_string(),
                                })
                            }
                        },
                    };
                }
            }
        }
        self.records.push(RawRecord { timestamp, values });
        Ok(())
    }

    fn finish(mut self) -> RawDataset {
        // stable: ties keep input order
        self.records.sort_by_key(|r| r.timestamp);
        RawDataset { schema: self.schema.clone(), records: self.records }
    }
}

/// Reads every row of `source`, drops excluded columns and orders records by
/// timestamp, keeping input order among equal timestamps.
pub fn ingest_records<R: Read>(
    source: R,
    format: DataFormat,
    schema: &AttributeSchema,
) -> Result<RawDataset, IngestError> {
    match format {
        DataFormat::Csv { delimiter } => ingest_csv(source, delimiter, schema),
        DataFormat::Arff => ingest_arff(source, schema),
    }
}

fn ingest_csv<R: Read>(source: R, delimiter: u8, schema: &AttributeSchema) -> Result<RawDataset, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(source);
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut builder = RowBuilder::new(schema, header)?;
    let mut record = csv::StringRecord::new();
    let mut row = 0;
    while reader.read_record(&mut record)? {
        row += 1;
        builder.push(row, record.iter().collect::<Vec<_>>().into_iter())?;
    }
    Ok(builder.finish())
}

/// Splits one ARFF data line on commas, honouring single and double quotes.
fn split_arff_row(line: &str) -> Result<Vec<String>, String> {
    let mut cells = Vec::new();
    let mut current = String::new();
    let mut quote: Option<char> = None;
    let mut chars = line.chars();
    while let Some(c) = chars.next() {
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) if c == '\\' => {
                if let Some(next) = chars.next() {
                    current.push(next);
                }
            }
            Some(_) => current.push(c),
            None => match c {
                '\'' | '"' => quote = Some(c),
                ',' => cells.push(std::mem::take(&mut current).trim().to_string()),
                _ => current.push(c),
            },
        }
    }
    if quote.is_some() {
        return Err("unterminated quote".into());
    }
    cells.push(current.trim().to_string());
    Ok(cells)
}

/// Attribute name from the remainder of an `@attribute` line.
fn arff_attribute_name(rest: &str) -> Option<String> {
    let rest = rest.trim_start();
    let first = rest.chars().next()?;
    if first == '\'' || first == '"' {
        let end = rest[1..].find(first)?;
        Some(rest[1..1 + end].to_string())
    } else {
        rest.split_whitespace().next().map(str::to_string)
    }
}

fn ingest_arff<R: Read>(source: R, schema: &AttributeSchema) -> Result<RawDataset, IngestError> {
    let reader = BufReader::new(source);
    let mut header = Vec::new();
    let mut builder: Option<RowBuilder> = None;
    let mut row = 0;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        match builder.as_mut() {
            None => {
                let lower = trimmed.to_ascii_lowercase();
                if lower.starts_with("@attribute") {
                    let name = arff_attribute_name(&trimmed["@attribute".len()..]).ok_or_else(|| {
                        IngestError::Arff { line: line_no, message: "attribute without a name".into() }
                    })?;
                    header.push(name);
                } else if lower.starts_with("@data") {
                    builder = Some(RowBuilder::new(schema, std::mem::take(&mut header))?);
                } else if lower.starts_with("@relation") {
                } else {
                    return Err(IngestError::Arff {
                        line: line_no,
                        message: format!("unexpected header line `{trimmed}`"),
                    });
                }
            }
            Some(b) => {
                if trimmed.starts_with('{') {
                    return Err(IngestError::Arff {
                        line: line_no,
                        message: "sparse ARFF rows are not supported".into(),
                    });
                }
                let cells = split_arff_row(trimmed).map_err(|message| IngestError::Arff { line: line_no, message })?;
                row += 1;
                b.push(row, cells.iter().map(String::as_str))?;
            }
        }
    }
    match builder {
        Some(b) => Ok(b.finish()),
        None => Err(IngestError::Arff { line: 0, message: "no @data section".into() }),
    }
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Writes the dataset as CSV that [`ingest_records`] reads back into an
    /// identical dataset under the same schema. Excluded columns are gone.
    pub fn write_csv<W: Write>(&self, out: W, delimiter: u8) -> Result<(), IngestError> {
        let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(out);
        let ts_column = match self.schema.timestamp_source() {
            TimestampSource::Column(c) => Some(c.as_str()),
            TimestampSource::RecordIndex => None,
        };
        let mut header: Vec<&str> = ts_column.into_iter().collect();
        header.extend(self.schema.attributes().iter().map(|a| a.name.as_str()));
        w.write_record(&header)?;
        let mut fields = Vec::with_capacity(header.len());
        for r in &self.records {
            fields.clear();
            if ts_column.is_some() {
                fields.push(r.timestamp.to_string());
            }
            for v in &r.values {
                fields.push(match v {
                    RawValue::Missing => "?".to_string(),
                    RawValue::Number(x) => x.to_string(),
                    RawValue::Label(s) => s.clone(),
                });
            }
            w.write_record(&fields)?;
        }
        w.flush()?;
        Ok(())
    }
}
