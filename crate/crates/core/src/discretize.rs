//! Global equal-frequency discretization and the integer-coded dataset.
//!
//! Numeric attributes are cut into at most `bin_count` bins whose boundaries
//! are fitted on the pooled values of every record, so that one encoding is
//! shared by all time windows. Bins are right-closed: a value `v` gets the
//! code `#{cut points c : c < v}`. Categorical labels get dictionary codes;
//! labels never seen at fit time map to an overflow code one past the
//! dictionary.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{RawDataset, RawValue};
use crate::schema::{AttrId, AttributeKind, AttributeSchema};

pub type Code = u32;

#[derive(Debug, Error)]
pub enum DiscretizeError {
    #[error("bin count must be at least 2, got {0}")]
    BinCount(usize),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("attribute `{0}` has no non-missing values")]
    NoValues(String),
    #[error("discretizer does not match the dataset schema: {0}")]
    SchemaMismatch(String),
    #[error("record {record}: code {code} out of range for attribute `{attribute}`")]
    CodeOutOfRange { record: usize, attribute: String, code: Code },
    #[error("sidecar: {0}")]
    Sidecar(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Encoding {
    Numeric { cut_points: Vec<f64> },
    Categorical { labels: Vec<String> },
}

impl Encoding {
    /// Number of distinct codes, including the categorical overflow code.
    pub fn cardinality(&self) -> usize {
        match self {
            Encoding::Numeric { cut_points } => cut_points.len() + 1,
            Encoding::Categorical { labels } => labels.len() + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeEncoding {
    pub name: String,
    #[serde(flatten)]
    pub encoding: Encoding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discretizer {
    pub bin_count: usize,
    pub attributes: Vec<AttributeEncoding>,
}

/// Cut points splitting `values` into at most `bins` equal-frequency bins.
///
/// The ideal split after the `i`-th bin sits at rank `round(i·n/bins)`. A cut
/// can only separate distinct values, so a rank falling inside a run of equal
/// values moves to the nearer end of the run (the lower end on a tie). Each
/// cut is placed midway between the two values it separates.
pub fn equal_frequency_cuts(values: &[f64], bins: usize) -> Vec<f64> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n == 0 || bins < 2 {
        return Vec::new();
    }
    let mut ranks = BTreeSet::new();
    for i in 1..bins {
        let ideal = (2 * i * n + bins) / (2 * bins);
        if ideal == 0 || ideal >= n {
            continue;
        }
        let rank = if sorted[ideal - 1] < sorted[ideal] {
            ideal
        } else {
            // run of equal values covering positions lo..hi
            let v = sorted[ideal];
            let lo = sorted.partition_point(|x| *x < v);
            let hi = sorted.partition_point(|x| *x <= v);
            if ideal - lo <= hi - ideal {
                lo
            } else {
                hi
            }
        };
        if rank > 0 && rank < n {
            ranks.insert(rank);
        }
    }
    ranks.into_iter().map(|r| midpoint(sorted[r - 1], sorted[r])).collect()
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo / 2.0 + hi / 2.0;
    if m >= lo && m < hi {
        m
    } else {
        lo
    }
}

impl Discretizer {
    /// Fits cut points and dictionaries on all records of `dataset`.
    pub fn fit(dataset: &RawDataset, bin_count: usize) -> Result<Self, DiscretizeError> {
        if bin_count < 2 {
            return Err(DiscretizeError::BinCount(bin_count));
        }
        if dataset.is_empty() {
            return Err(DiscretizeError::EmptyDataset);
        }
        let schema = &dataset.schema;
        let mut attributes = Vec::with_capacity(schema.len());
        for (id, attr) in schema.attributes().iter().enumerate() {
            let encoding = match attr.kind {
                AttributeKind::Numeric => {
                    let values: Vec<f64> = dataset
                        .records
                        .iter()
                        .filter_map(|r| match r.values[id] {
                            RawValue::Number(v) => Some(v),
                            _ => None,
                        })
                        .collect();
                    if values.is_empty() {
                        return Err(DiscretizeError::NoValues(attr.name.clone()));
                    }
                    Encoding::Numeric { cut_points: equal_frequency_cuts(&values, bin_count) }
                }
                AttributeKind::Categorical => {
                    let observed: BTreeSet<&str> = dataset
                        .records
                        .iter()
                        .filter_map(|r| match &r.values[id] {
                            RawValue::Label(s) => Some(s.as_str()),
                            _ => None,
                        })
                        .collect();
                    if observed.is_empty() {
                        return Err(DiscretizeError::NoValues(attr.name.clone()));
                    }
                    let mut labels: Vec<String> = attr.domain.clone().unwrap_or_default();
                    let declared: BTreeSet<String> = labels.iter().cloned().collect();
                    labels.extend(observed.into_iter().filter(|l| !declared.contains(*l)).map(str::to_string));
                    Encoding::Categorical { labels }
                }
            };
            attributes.push(AttributeEncoding { name: attr.name.clone(), encoding });
        }
        Ok(Self { bin_count, attributes })
    }

    /// A pass-through discretizer for data that is already integer coded:
    /// attribute `i` takes labels `"0"..cardinalities[i]`.
    pub fn identity(schema: &AttributeSchema, cardinalities: &[usize]) -> Self {
        let attributes = schema
            .attributes()
            .iter()
            .zip(cardinalities)
            .map(|(a, &k)| AttributeEncoding {
                name: a.name.clone(),
                encoding: Encoding::Categorical { labels: (0..k).map(|c| c.to_string()).collect() },
            })
            .collect();
        Self { bin_count: cardinalities.iter().copied().max().unwrap_or(0), attributes }
    }

    pub fn cardinality(&self, id: AttrId) -> usize {
        self.attributes[id].encoding.cardinality()
    }

    /// Code for one raw value, or `None` when missing. The second element is
    /// true when a categorical label fell through to the overflow code.
    pub fn encode_value(&self, id: AttrId, value: &RawValue, lookup: &HashMap<&str, Code>) -> (Option<Code>, bool) {
        match (&self.attributes[id].encoding, value) {
            (_, RawValue::Missing) => (None, false),
            (Encoding::Numeric { cut_points }, RawValue::Number(v)) => {
                (Some(cut_points.partition_point(|c| c < v) as Code), false)
            }
            (Encoding::Categorical { labels }, RawValue::Label(s)) => match lookup.get(s.as_str()) {
                Some(&c) => (Some(c), false),
                None => (Some(labels.len() as Code), true),
            },
            (Encoding::Categorical { labels }, RawValue::Number(v)) => {
                let s = v.to_string();
                match lookup.get(s.as_str()) {
                    Some(&c) => (Some(c), false),
                    None => (Some(labels.len() as Code), true),
                }
            }
            (Encoding::Numeric { .. }, RawValue::Label(_)) => (None, false),
        }
    }

    /// Human-readable label for a code.
    pub fn label(&self, id: AttrId, code: Code) -> String {
        match &self.attributes[id].encoding {
            Encoding::Categorical { labels } => {
                labels.get(code as usize).cloned().unwrap_or_else(|| "<unseen>".to_string())
            }
            Encoding::Numeric { cut_points } => {
                let c = code as usize;
                let lo = if c == 0 { "-inf".to_string() } else { cut_points[c - 1].to_string() };
                let hi = cut_points.get(c).map_or("inf".to_string(), |v| v.to_string());
                format!("({lo},{hi}]")
            }
        }
    }

    fn check_schema(&self, schema: &AttributeSchema) -> Result<(), DiscretizeError> {
        if self.attributes.len() != schema.len() {
            return Err(DiscretizeError::SchemaMismatch(format!(
                "{} encodings for {} attributes",
                self.attributes.len(),
                schema.len()
            )));
        }
        for (enc, attr) in self.attributes.iter().zip(schema.attributes()) {
            let kind_ok = matches!(
                (&enc.encoding, attr.kind),
                (Encoding::Numeric { .. }, AttributeKind::Numeric)
                    | (Encoding::Categorical { .. }, AttributeKind::Categorical)
            );
            if enc.name != attr.name || !kind_ok {
                return Err(DiscretizeError::SchemaMismatch(format!("attribute `{}`", attr.name)));
            }
        }
        Ok(())
    }

    /// Encodes every record of `dataset`.
    pub fn apply(&self, dataset: &RawDataset) -> Result<EncodedDataset, DiscretizeError> {
        self.check_schema(&dataset.schema)?;
        let width = dataset.schema.len();
        let lookups: Vec<HashMap<&str, Code>> = self
            .attributes
            .iter()
            .map(|a| match &a.encoding {
                Encoding::Categorical { labels } => {
                    labels.iter().enumerate().map(|(i, l)| (l.as_str(), i as Code)).collect()
                }
                Encoding::Numeric { .. } => HashMap::new(),
            })
            .collect();
        let mut codes = Vec::with_capacity(dataset.len() * width);
        let mut timestamps = Vec::with_capacity(dataset.len());
        let mut unseen = vec![0usize; width];
        for r in &dataset.records {
            timestamps.push(r.timestamp);
            for (id, v) in r.values.iter().enumerate() {
                let (code, overflow) = self.encode_value(id, v, &lookups[id]);
                unseen[id] += overflow as usize;
                codes.push(code);
            }
        }
        let cardinalities = (0..width).map(|id| self.cardinality(id)).collect();
        Ok(EncodedDataset::assemble(dataset.schema.clone(), self.clone(), timestamps, codes, cardinalities, unseen))
    }

    pub fn to_json(&self) -> Result<String, DiscretizeError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, DiscretizeError> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Timestamp-ordered records with every attribute integer coded.
#[derive(Debug, Clone)]
pub struct EncodedDataset {
    schema: AttributeSchema,
    discretizer: Discretizer,
    timestamps: Vec<i64>,
    /// Row-major, `schema.len()` codes per record.
    codes: Vec<Option<Code>>,
    cardinalities: Vec<usize>,
    missing: Vec<usize>,
    unseen: Vec<usize>,
}

impl EncodedDataset {
    fn assemble(
        schema: AttributeSchema,
        discretizer: Discretizer,
        timestamps: Vec<i64>,
        codes: Vec<Option<Code>>,
        cardinalities: Vec<usize>,
        unseen: Vec<usize>,
    ) -> Self {
        let width = schema.len();
        let mut missing = vec![0usize; width];
        if width > 0 {
            for row in codes.chunks(width) {
                for (m, c) in missing.iter_mut().zip(row) {
                    *m += c.is_none() as usize;
                }
            }
        }
        Self { schema, discretizer, timestamps, codes, cardinalities, missing, unseen }
    }

    /// Builds a dataset from already-coded rows; rows are stably sorted by
    /// timestamp.
    pub fn from_codes(
        schema: AttributeSchema,
        cardinalities: &[usize],
        mut rows: Vec<(i64, Vec<Option<Code>>)>,
    ) -> Result<Self, DiscretizeError> {
        let width = schema.len();
        if cardinalities.len() != width {
            return Err(DiscretizeError::SchemaMismatch("cardinality count".into()));
        }
        rows.sort_by_key(|r| r.0);
        let mut timestamps = Vec::with_capacity(rows.len());
        let mut codes = Vec::with_capacity(rows.len() * width);
        for (i, (t, row)) in rows.into_iter().enumerate() {
            if row.len() != width {
                return Err(DiscretizeError::SchemaMismatch(format!("record {i} has {} codes", row.len())));
            }
            for (id, c) in row.iter().enumerate() {
                if let Some(c) = *c {
                    if c as usize >= cardinalities[id] {
                        return Err(DiscretizeError::CodeOutOfRange {
                            record: i,
                            attribute: schema.attribute(id).name.clone(),
                            code: c,
                        });
                    }
                }
            }
            timestamps.push(t);
            codes.extend(row);
        }
        let discretizer = Discretizer::identity(&schema, cardinalities);
        Ok(Self::assemble(schema, discretizer, timestamps, codes, cardinalities.to_vec(), vec![0; width]))
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn discretizer(&self) -> &Discretizer {
        &self.discretizer
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn record(&self, index: usize) -> &[Option<Code>] {
        let w = self.schema.len();
        &self.codes[index * w..(index + 1) * w]
    }

    pub fn cardinality(&self, id: AttrId) -> usize {
        self.cardinalities[id]
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    pub fn missing_count(&self, id: AttrId) -> usize {
        self.missing[id]
    }

    /// Count of categorical values per attribute that hit the overflow code.
    pub fn unseen_counts(&self) -> &[usize] {
        &self.unseen
    }

    pub fn label(&self, id: AttrId, code: Code) -> String {
        self.discretizer.label(id, code)
    }

    /// Writes `timestamp` plus one code column per attribute; `?` marks missing.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DiscretizeError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["timestamp".to_string()];
        header.extend(self.schema.attributes().iter().map(|a| a.name.clone()));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut fields = vec![self.timestamps[i].to_string()];
            fields.extend(self.record(i).iter().map(|c| c.map_or("?".to_string(), |c| c.to_string())));
            w.write_record(&fields)?;
        }
        w.flush()?;
        Ok(())
    }
}
