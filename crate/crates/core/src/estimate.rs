//! Time windows and maximum-likelihood distribution estimates over attribute
//! subsets.

use std::collections::BTreeMap;
use std::io::Write;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discretize::{Code, EncodedDataset};
use crate::schema::{AttrId, AttributeSchema, SchemaError};

/// Joint code of the attributes of a subset, in subset order.
pub type Tuple = Vec<Code>;

#[derive(Debug, Error, PartialEq)]
pub enum EstimateError {
    #[error("interval start {start} is not before end {end}")]
    InvalidInterval { start: i64, end: i64 },
    #[error("attribute subset is empty")]
    EmptySubset,
    #[error("attribute {0} listed twice in subset")]
    DuplicateAttribute(AttrId),
    #[error("attribute id {0} out of range")]
    UnknownAttribute(AttrId),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("target and conditioning subsets overlap")]
    Overlap,
    #[error("window has no usable records for this subset")]
    NoData,
}

/// Half-open `[start, end)` interval of time ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TimeInterval {
    start: i64,
    end: i64,
}

impl TimeInterval {
    pub fn new(start: i64, end: i64) -> Result<Self, EstimateError> {
        if start < end {
            Ok(Self { start, end })
        } else {
            Err(EstimateError::InvalidInterval { start, end })
        }
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn end(&self) -> i64 {
        self.end
    }

    pub fn contains(&self, t: i64) -> bool {
        self.start <= t && t < self.end
    }
}

/// The records of a dataset whose timestamps fall in an interval.
#[derive(Debug, Clone)]
pub struct WindowView<'a> {
    dataset: &'a EncodedDataset,
    interval: TimeInterval,
    range: Range<usize>,
}

/// Window covering exactly the records with `start <= timestamp < end`.
pub fn select_window(dataset: &EncodedDataset, interval: TimeInterval) -> WindowView<'_> {
    let ts = dataset.timestamps();
    let lo = ts.partition_point(|&t| t < interval.start);
    let hi = ts.partition_point(|&t| t < interval.end);
    WindowView { dataset, interval, range: lo..hi }
}

impl<'a> WindowView<'a> {
    pub fn dataset(&self) -> &'a EncodedDataset {
        self.dataset
    }

    pub fn interval(&self) -> TimeInterval {
        self.interval
    }

    pub fn range(&self) -> Range<usize> {
        self.range.clone()
    }

    pub fn record_count(&self) -> usize {
        self.range.len()
    }

    pub fn records(&self) -> impl Iterator<Item = &'a [Option<Code>]> + '_ {
        let d = self.dataset;
        self.range.clone().map(move |i| d.record(i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubsetRole {
    CovariatesOnly,
    ClassOnly,
    CovariatesPlusClass,
}

/// An ordered, duplicate-free list of attributes. The role follows from
/// whether the class attribute is present.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AttributeSubset {
    attributes: Vec<AttrId>,
    role: SubsetRole,
}

impl AttributeSubset {
    pub fn new(schema: &AttributeSchema, attributes: Vec<AttrId>) -> Result<Self, EstimateError> {
        if attributes.is_empty() {
            return Err(EstimateError::EmptySubset);
        }
        for (i, &a) in attributes.iter().enumerate() {
            if a >= schema.len() {
                return Err(EstimateError::UnknownAttribute(a));
            }
            if attributes[..i].contains(&a) {
                return Err(EstimateError::DuplicateAttribute(a));
            }
        }
        let has_class = attributes.contains(&schema.class_id());
        let role = match (has_class, attributes.len()) {
            (true, 1) => SubsetRole::ClassOnly,
            (true, _) => SubsetRole::CovariatesPlusClass,
            (false, _) => SubsetRole::CovariatesOnly,
        };
        Ok(Self { attributes, role })
    }

    pub fn by_names<S: AsRef<str>>(schema: &AttributeSchema, names: &[S]) -> Result<Self, EstimateError> {
        let ids = names.iter().map(|n| schema.id_of(n.as_ref())).collect::<Result<Vec<_>, _>>()?;
        Self::new(schema, ids)
    }

    pub fn class(schema: &AttributeSchema) -> Self {
        Self { attributes: vec![schema.class_id()], role: SubsetRole::ClassOnly }
    }

    /// All covariates; errors on a class-only schema.
    pub fn covariates(schema: &AttributeSchema) -> Result<Self, EstimateError> {
        Self::new(schema, schema.covariate_ids())
    }

    /// All covariates plus the class.
    pub fn joint(schema: &AttributeSchema) -> Self {
        Self::new(schema, (0..schema.len()).collect()).expect("schema attributes are unique")
    }

    pub fn attributes(&self) -> &[AttrId] {
        &self.attributes
    }

    pub fn role(&self) -> SubsetRole {
        self.role
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn is_disjoint(&self, other: &AttributeSubset) -> bool {
        self.attributes.iter().all(|a| !other.attributes.contains(a))
    }

    /// `+`-joined attribute names.
    pub fn label(&self, schema: &AttributeSchema) -> String {
        self.attributes.iter().map(|&a| schema.attribute(a).name.as_str()).collect::<Vec<_>>().join("+")
    }

    /// Codes of this subset for one record, or `None` if any is missing.
    pub fn project(&self, record: &[Option<Code>]) -> Option<Tuple> {
        self.attributes.iter().map(|&a| record[a]).collect()
    }
}

/// Normalized sparse distribution over the observed tuples of a subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionEstimate {
    subset: AttributeSubset,
    support: BTreeMap<Tuple, f64>,
    sample_size: usize,
}

impl DistributionEstimate {
    /// Maximum-likelihood estimate from raw counts; zero counts are dropped.
    pub fn from_counts(subset: AttributeSubset, counts: BTreeMap<Tuple, u64>) -> Result<Self, EstimateError> {
        let total: u64 = counts.values().sum();
        if total == 0 {
            return Err(EstimateError::NoData);
        }
        let n = total as f64;
        let support = counts.into_iter().filter(|(_, c)| *c > 0).map(|(t, c)| (t, c as f64 / n)).collect();
        Ok(Self { subset, support, sample_size: total as usize })
    }

    pub fn subset(&self) -> &AttributeSubset {
        &self.subset
    }

    pub fn support(&self) -> &BTreeMap<Tuple, f64> {
        &self.support
    }

    pub fn probability(&self, tuple: &[Code]) -> f64 {
        self.support.get(tuple).copied().unwrap_or(0.0)
    }

    pub fn sample_size(&self) -> usize {
        self.sample_size
    }

    /// Writes one row per supported tuple: the subset's attribute columns
    /// followed by `probability`.
    pub fn write_csv<W: Write>(&self, schema: &AttributeSchema, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> =
            self.subset.attributes.iter().map(|&a| schema.attribute(a).name.clone()).collect();
        header.push("probability".into());
        w.write_record(&header)?;
        for (tuple, p) in &self.support {
            let mut row: Vec<String> = tuple.iter().map(Code::to_string).collect();
            row.push(p.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_subset(window: &WindowView<'_>, subset: &AttributeSubset) -> Result<(), EstimateError> {
    let width = window.dataset.schema().len();
    match subset.attributes.iter().find(|&&a| a >= width) {
        Some(&a) => Err(EstimateError::UnknownAttribute(a)),
        None => Ok(()),
    }
}

/// ML estimate of the subset's distribution in the window. Records missing
/// any subset attribute are skipped.
pub fn estimate_distribution(
    window: &WindowView<'_>,
    subset: &AttributeSubset,
) -> Result<DistributionEstimate, EstimateError> {
    check_subset(window, subset)?;
    let mut counts: BTreeMap<Tuple, u64> = BTreeMap::new();
    for rec in window.records() {
        if let Some(t) = subset.project(rec) {
            *counts.entry(t).or_insert(0) += 1;
        }
    }
    DistributionEstimate::from_counts(subset.clone(), counts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalMember {
    /// Share of usable records carrying this conditioning tuple.
    pub weight: f64,
    pub estimate: DistributionEstimate,
}

/// One target distribution per observed conditioning tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalFamily {
    target: AttributeSubset,
    conditioning: AttributeSubset,
    members: BTreeMap<Tuple, ConditionalMember>,
    sample_size: usize,
}

impl ConditionalFamily {
    pub fn target(&self) -> &AttributeSubset {
        &self.target
    }

    pub fn conditioning(&self) -> &AttributeSubset {
        &self.conditioning
    }

    pub fn members(&self) -> &BTreeMap<Tuple, ConditionalMember> {
        &self.members
    }

    pub fn get(&self, condition: &[Code]) -> Option<&ConditionalMember> {
        self.members.get(condition)
    }

    pub fn sample_size(&self) -> usize {
        self.sample_size
    }
}

/// ML estimates of `target` given each observed tuple of `conditioning`.
/// Records missing any attribute of either subset are skipped.
pub fn estimate_conditional(
    window: &WindowView<'_>,
    target: &AttributeSubset,
    conditioning: &AttributeSubset,
) -> Result<ConditionalFamily, EstimateError> {
    check_subset(window, target)?;
    check_subset(window, conditioning)?;
    if !target.is_disjoint(conditioning) {
        return Err(EstimateError::Overlap);
    }
    let mut groups: BTreeMap<Tuple, BTreeMap<Tuple, u64>> = BTreeMap::new();
    let mut total = 0u64;
    for rec in window.records() {
        if let (Some(c), Some(t)) = (conditioning.project(rec), target.project(rec)) {
            *groups.entry(c).or_default().entry(t).or_insert(0) += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(EstimateError::NoData);
    }
    let n = total as f64;
    let mut members = BTreeMap::new();
    for (cond, counts) in groups {
        let group_total: u64 = counts.values().sum();
        let estimate = DistributionEstimate::from_counts(target.clone(), counts)?;
        members.insert(cond, ConditionalMember { weight: group_total as f64 / n, estimate });
    }
    Ok(ConditionalFamily {
        target: target.clone(),
        conditioning: conditioning.clone(),
        members,
        sample_size: total as usize,
    })
}
