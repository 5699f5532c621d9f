//! Attribute schema: column names, kinds, the class attribute and the time axis.

use std::collections::HashSet;
use std::fmt;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of an analyzed attribute within [`AttributeSchema::attributes`].
pub type AttrId = usize;

#[derive(Debug, Error, PartialEq)]
pub enum SchemaError {
    #[error("malformed config document: {0}")]
    Config(String),
    #[error("duplicate attribute name `{0}`")]
    DuplicateAttribute(String),
    #[error("class attribute `{0}` is not declared")]
    ClassMissing(String),
    #[error("class attribute `{0}` must be categorical")]
    ClassNotCategorical(String),
    #[error("`{0}` is both excluded and analyzed")]
    ExcludedOverlap(String),
    #[error("timestamp column `{0}` is also declared as an attribute")]
    TimestampIsAttribute(String),
    #[error("timestamp column `{0}` absent from data header")]
    TimestampColumnAbsent(String),
    #[error("attribute `{0}` absent from data header")]
    AttributeAbsent(String),
    #[error("column `{0}` in data header is neither declared nor excluded")]
    UndeclaredColumn(String),
    #[error("duplicate column `{0}` in data header")]
    DuplicateColumn(String),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("invalid clock: {0}")]
    InvalidClock(String),
    #[error("invalid duration `{0}`")]
    InvalidDuration(String),
    #[error("invalid time `{0}`")]
    InvalidTime(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Categorical,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub kind: AttributeKind,
    /// Declared category labels; their order fixes the code order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<String>>,
}

impl Attribute {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self { name: name.into(), kind: AttributeKind::Numeric, domain: None }
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        Self { name: name.into(), kind: AttributeKind::Categorical, domain: None }
    }
}

/// Where a record's time value comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum TimestampSource {
    /// Ordinal position of the record stands in for time.
    RecordIndex,
    Column(String),
}

impl From<String> for TimestampSource {
    fn from(s: String) -> Self {
        if s == "record-index" {
            TimestampSource::RecordIndex
        } else {
            TimestampSource::Column(s)
        }
    }
}

impl From<TimestampSource> for String {
    fn from(t: TimestampSource) -> Self {
        match t {
            TimestampSource::RecordIndex => "record-index".to_string(),
            TimestampSource::Column(c) => c,
        }
    }
}

/// Integer time ticks with a declared length and an optional calendar epoch
/// (the instant of tick 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clock {
    pub tick_seconds: i64,
    pub epoch: Option<NaiveDateTime>,
}

impl Default for Clock {
    fn default() -> Self {
        Self { tick_seconds: 1, epoch: None }
    }
}

impl Clock {
    pub fn new(tick_seconds: i64, epoch: Option<NaiveDateTime>) -> Result<Self, SchemaError> {
        if tick_seconds <= 0 {
            return Err(SchemaError::InvalidClock(format!("tick_seconds must be positive, got {tick_seconds}")));
        }
        Ok(Self { tick_seconds, epoch })
    }

    /// Parses a duration into ticks. Accepts a bare integer (ticks) or a number
    /// with one of the suffixes `s`, `m`, `h`, `d`, `w`. The duration must be a
    /// whole, positive number of ticks.
    pub fn parse_duration(&self, text: &str) -> Result<i64, SchemaError> {
        let err = || SchemaError::InvalidDuration(text.to_string());
        let t = text.trim();
        if let Ok(ticks) = t.parse::<i64>() {
            return if ticks > 0 { Ok(ticks) } else { Err(err()) };
        }
        let split = t.find(|c: char| !c.is_ascii_digit()).ok_or_else(err)?;
        let (num, unit) = t.split_at(split);
        let n: i64 = num.parse().map_err(|_| err())?;
        let unit_seconds = match unit {
            "s" => 1,
            "m" | "min" => 60,
            "h" => 3_600,
            "d" => 86_400,
            "w" => 7 * 86_400,
            _ => return Err(err()),
        };
        let seconds = n.checked_mul(unit_seconds).ok_or_else(err)?;
        if seconds <= 0 || seconds % self.tick_seconds != 0 {
            return Err(err());
        }
        Ok(seconds / self.tick_seconds)
    }

    /// Parses a point in time: an integer tick, or a calendar date/datetime
    /// resolved against the epoch.
    pub fn parse_time(&self, text: &str) -> Result<i64, SchemaError> {
        let t = text.trim();
        if let Ok(ticks) = t.parse::<i64>() {
            return Ok(ticks);
        }
        let dt = parse_datetime(t).ok_or_else(|| SchemaError::InvalidTime(t.to_string()))?;
        self.ticks_at(dt).ok_or_else(|| SchemaError::InvalidTime(t.to_string()))
    }

    /// Tick containing `dt`, or `None` without an epoch.
    pub fn ticks_at(&self, dt: NaiveDateTime) -> Option<i64> {
        let epoch = self.epoch?;
        let secs = (dt - epoch).num_seconds();
        Some(secs.div_euclid(self.tick_seconds))
    }

    pub fn datetime_of(&self, ticks: i64) -> Option<NaiveDateTime> {
        let epoch = self.epoch?;
        epoch.checked_add_signed(chrono::Duration::seconds(ticks.checked_mul(self.tick_seconds)?))
    }

    /// Human-readable time label: ISO datetime when an epoch is declared,
    /// otherwise the raw tick.
    pub fn format_time(&self, ticks: i64) -> String {
        match self.datetime_of(ticks) {
            Some(dt) if dt.time() == chrono::NaiveTime::MIN => dt.date().to_string(),
            Some(dt) => dt.format("%Y-%m-%dT%H:%M:%S").to_string(),
            None => ticks.to_string(),
        }
    }
}

pub(crate) fn parse_datetime(t: &str) -> Option<NaiveDateTime> {
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(t, fmt) {
            return Some(dt);
        }
    }
    NaiveDate::parse_from_str(t, "%Y-%m-%d").ok().map(|d| d.and_time(chrono::NaiveTime::MIN))
}

/// Validated description of the analyzed columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSchema {
    attributes: Vec<Attribute>,
    class_index: AttrId,
    timestamp: TimestampSource,
    excluded: Vec<String>,
    clock: Clock,
}

impl AttributeSchema {
    pub fn new(
        attributes: Vec<Attribute>,
        class_attribute: &str,
        timestamp: TimestampSource,
        excluded: Vec<String>,
        clock: Clock,
    ) -> Result<Self, SchemaError> {
        let mut seen = HashSet::new();
        for a in &attributes {
            if !seen.insert(a.name.as_str()) {
                return Err(SchemaError::DuplicateAttribute(a.name.clone()));
            }
        }
        let class_index = attributes
            .iter()
            .position(|a| a.name == class_attribute)
            .ok_or_else(|| SchemaError::ClassMissing(class_attribute.to_string()))?;
        if attributes[class_index].kind != AttributeKind::Categorical {
            return Err(SchemaError::ClassNotCategorical(class_attribute.to_string()));
        }
        if let Some(x) = excluded.iter().find(|x| seen.contains(x.as_str())) {
            return Err(SchemaError::ExcludedOverlap(x.clone()));
        }
        if let TimestampSource::Column(c) = &timestamp {
            if seen.contains(c.as_str()) {
                return Err(SchemaError::TimestampIsAttribute(c.clone()));
            }
            if excluded.contains(c) {
                return Err(SchemaError::ExcludedOverlap(c.clone()));
            }
        }
        if clock.tick_seconds <= 0 {
            return Err(SchemaError::InvalidClock("tick_seconds must be positive".into()));
        }
        Ok(Self { attributes, class_index, timestamp, excluded, clock })
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn attribute(&self, id: AttrId) -> &Attribute {
        &self.attributes[id]
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn class_id(&self) -> AttrId {
        self.class_index
    }

    pub fn class_attribute(&self) -> &Attribute {
        &self.attributes[self.class_index]
    }

    /// Covariate ids in schema order.
    pub fn covariate_ids(&self) -> Vec<AttrId> {
        (0..self.attributes.len()).filter(|&i| i != self.class_index).collect()
    }

    pub fn id_of(&self, name: &str) -> Result<AttrId, SchemaError> {
        self.attributes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| SchemaError::UnknownAttribute(name.to_string()))
    }

    pub fn timestamp_source(&self) -> &TimestampSource {
        &self.timestamp
    }

    pub fn excluded(&self) -> &[String] {
        &self.excluded
    }

    pub fn clock(&self) -> &Clock {
        &self.clock
    }

    /// Checks a data header against the schema and maps each header column to
    /// its role.
    pub fn plan_columns(&self, header: &[String]) -> Result<Vec<ColumnRole>, SchemaError> {
        let mut seen = HashSet::new();
        let mut roles = Vec::with_capacity(header.len());
        for name in header {
            if !seen.insert(name.as_str()) {
                return Err(SchemaError::DuplicateColumn(name.clone()));
            }
            let role = if let Some(id) = self.attributes.iter().position(|a| &a.name == name) {
                ColumnRole::Attribute(id)
            } else if matches!(&self.timestamp, TimestampSource::Column(c) if c == name) {
                ColumnRole::Timestamp
            } else if self.excluded.contains(name) {
                ColumnRole::Skip
            } else {
                return Err(SchemaError::UndeclaredColumn(name.clone()));
            };
            roles.push(role);
        }
        if let Some(a) = self.attributes.iter().find(|a| !seen.contains(a.name.as_str())) {
            return Err(SchemaError::AttributeAbsent(a.name.clone()));
        }
        if let TimestampSource::Column(c) = &self.timestamp {
            if !seen.contains(c.as_str()) {
                return Err(SchemaError::TimestampColumnAbsent(c.clone()));
            }
        }
        Ok(roles)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnRole {
    Attribute(AttrId),
    Timestamp,
    Skip,
}

impl fmt::Display for AttributeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttributeKind::Categorical => "categorical",
            AttributeKind::Numeric => "numeric",
        })
    }
}
