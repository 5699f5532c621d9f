//! The single TOML document that declares the schema together with the
//! discretization and analysis parameters.
//!
//! ```toml
//! [schema]
//! class = "class"
//! timestamp = "record-index"      # or the name of a column holding ticks/dates
//! tick_seconds = 1800
//! epoch = "1996-05-07"
//! excluded = ["date", "day"]
//! delimiter = ","
//!
//! [[schema.attributes]]
//! name = "nswprice"
//! kind = "numeric"
//!
//! [[schema.attributes]]
//! name = "class"
//! kind = "categorical"
//!
//! [discretization]
//! bins = 5
//!
//! [analysis]
//! distance = "tvd"
//! step = "1d"
//! span = "30d"
//! alignment = "adjacent-before-after"
//! measures = ["covariate", "class"]
//! ```
//!
//! Command-line flags take precedence over `[analysis]` values, which take
//! precedence over built-in defaults.

use serde::{Deserialize, Serialize};

use crate::schema::{parse_datetime, Attribute, AttributeSchema, Clock, SchemaError, TimestampSource};

pub const DEFAULT_BINS: usize = 5;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct SchemaSection {
    class: String,
    #[serde(default = "record_index")]
    timestamp: TimestampSource,
    #[serde(default = "one")]
    tick_seconds: i64,
    #[serde(default)]
    epoch: Option<String>,
    #[serde(default)]
    excluded: Vec<String>,
    #[serde(default)]
    delimiter: Option<String>,
    #[serde(default)]
    attributes: Vec<Attribute>,
}

fn record_index() -> TimestampSource {
    TimestampSource::RecordIndex
}

fn one() -> i64 {
    1
}

#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationConfig {
    #[serde(default = "default_bins")]
    pub bins: usize,
}

fn default_bins() -> usize {
    DEFAULT_BINS
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        Self { bins: DEFAULT_BINS }
    }
}

/// Optional analysis defaults; every field can be overridden on the command line.
#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub struct AnalysisConfig {
    pub distance: Option<String>,
    pub step: Option<String>,
    pub span: Option<String>,
    pub alignment: Option<String>,
    pub measures: Option<Vec<String>>,
    pub subset: Option<Vec<String>>,
    pub window_a: Option<String>,
    pub window_b: Option<String>,
    pub map_kind: Option<String>,
    pub classes_on_map: Option<bool>,
    pub markers: Option<Vec<String>>,
    pub start: Option<String>,
    pub end: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    schema: SchemaSection,
    #[serde(default)]
    discretization: DiscretizationConfig,
    #[serde(default)]
    analysis: AnalysisConfig,
}

#[derive(Debug, Clone)]
pub struct Config {
    pub schema: AttributeSchema,
    pub delimiter: u8,
    pub discretization: DiscretizationConfig,
    pub analysis: AnalysisConfig,
}

impl Config {
    pub fn parse(document: &str) -> Result<Self, SchemaError> {
        let doc: Document = toml::from_str(document).map_err(|e| SchemaError::Config(e.to_string()))?;
        let s = doc.schema;
        let epoch = match s.epoch.as_deref() {
            Some(text) => {
                Some(parse_datetime(text).ok_or_else(|| SchemaError::InvalidClock(format!("bad epoch `{text}`")))?)
            }
            None => None,
        };
        let clock = Clock::new(s.tick_seconds, epoch)?;
        let delimiter = match s.delimiter.as_deref() {
            None => b',',
            Some("\\t") | Some("\t") => b'\t',
            Some(d) if d.len() == 1 => d.as_bytes()[0],
            Some(d) => return Err(SchemaError::Config(format!("delimiter must be one byte, got `{d}`"))),
        };
        if doc.discretization.bins < 2 {
            return Err(SchemaError::Config("discretization.bins must be at least 2".into()));
        }
        let schema = AttributeSchema::new(s.attributes, &s.class, s.timestamp, s.excluded, clock)?;
        Ok(Self { schema, delimiter, discretization: doc.discretization, analysis: doc.analysis })
    }
}

/// Parses and validates the schema part of a config document.
pub fn parse_schema(document: &str) -> Result<AttributeSchema, SchemaError> {
    Config::parse(document).map(|c| c.schema)
}
