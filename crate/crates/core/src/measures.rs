//! Drift magnitudes between two windows.
//!
//! Marginal drift is a plain distance between the two estimates of a subset.
//! The conditional measures average per-condition distances, weighting each
//! condition by its mean probability across the two windows:
//!
//! * conditioned covariate drift: `Σ_y ½(P_a(y)+P_b(y)) · d(P_a(x̄|y), P_b(x̄|y))`
//! * posterior drift: `Σ_x̄ ½(P_a(x̄)+P_b(x̄)) · d(P_a(y|x̄), P_b(y|x̄))`
//!
//! Sums run over the union of the conditions observed in either window. A
//! condition observed in only one window has no conditional distribution on
//! the other side; its inner distance is taken as 1 and the measurement
//! records how many such one-sided terms it contains.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distance::{DistanceError, DistanceKind};
use crate::estimate::{
    estimate_conditional, estimate_distribution, AttributeSubset, ConditionalFamily, EstimateError, SubsetRole,
    TimeInterval, Tuple, WindowView,
};
use crate::schema::AttributeSchema;

#[derive(Debug, Error, PartialEq)]
pub enum MeasureError {
    #[error("windows come from different datasets")]
    DifferentDatasets,
    #[error("{kind} drift needs a covariates-only subset")]
    NotCovariateSubset { kind: MeasureKind },
    #[error("{kind} drift is incompatible with a {role:?} subset")]
    RoleMismatch { kind: MeasureKind, role: SubsetRole },
    #[error("unknown measure `{0}`")]
    UnknownMeasure(String),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Distance(#[from] DistanceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureKind {
    Joint,
    Covariate,
    Class,
    ConditionedCovariate,
    Posterior,
}

impl MeasureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MeasureKind::Joint => "joint",
            MeasureKind::Covariate => "covariate",
            MeasureKind::Class => "class",
            MeasureKind::ConditionedCovariate => "conditioned-covariate",
            MeasureKind::Posterior => "posterior",
        }
    }

    /// The subset role this kind is computed over.
    pub fn required_role(self) -> SubsetRole {
        match self {
            MeasureKind::Joint => SubsetRole::CovariatesPlusClass,
            MeasureKind::Class => SubsetRole::ClassOnly,
            MeasureKind::Covariate | MeasureKind::ConditionedCovariate | MeasureKind::Posterior => {
                SubsetRole::CovariatesOnly
            }
        }
    }

    fn of_marginal(role: SubsetRole) -> Self {
        match role {
            SubsetRole::CovariatesOnly => MeasureKind::Covariate,
            SubsetRole::ClassOnly => MeasureKind::Class,
            SubsetRole::CovariatesPlusClass => MeasureKind::Joint,
        }
    }
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MeasureKind {
    type Err = MeasureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "joint" => Ok(MeasureKind::Joint),
            "covariate" => Ok(MeasureKind::Covariate),
            "class" => Ok(MeasureKind::Class),
            "conditioned-covariate" | "conditioned" => Ok(MeasureKind::ConditionedCovariate),
            "posterior" => Ok(MeasureKind::Posterior),
            other => Err(MeasureError::UnknownMeasure(other.to_string())),
        }
    }
}

/// A magnitude, or the marker for a window with no usable records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftValue {
    Magnitude(f64),
    InsufficientData,
}

impl DriftValue {
    pub fn magnitude(self) -> Option<f64> {
        match self {
            DriftValue::Magnitude(v) => Some(v),
            DriftValue::InsufficientData => None,
        }
    }

    pub fn status(self) -> &'static str {
        match self {
            DriftValue::Magnitude(_) => "ok",
            DriftValue::InsufficientData => "insufficient-data",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftMeasurement {
    pub measure_kind: MeasureKind,
    pub distance_kind: DistanceKind,
    pub subset: AttributeSubset,
    pub window_a: TimeInterval,
    pub window_b: TimeInterval,
    pub value: DriftValue,
    /// Usable records in each window.
    pub sample_sizes: (usize, usize),
    /// Conditional terms whose condition was seen in only one window.
    pub one_sided_terms: usize,
}

impl DriftMeasurement {
    pub fn magnitude(&self) -> Option<f64> {
        self.value.magnitude()
    }

    pub fn row(&self, schema: &AttributeSchema) -> MeasurementRow {
        MeasurementRow {
            measure_kind: self.measure_kind.as_str().to_string(),
            distance_kind: self.distance_kind.as_str().to_string(),
            subset: self.subset.label(schema),
            window_a_start: self.window_a.start(),
            window_a_end: self.window_a.end(),
            window_b_start: self.window_b.start(),
            window_b_end: self.window_b.end(),
            magnitude: self.value.magnitude(),
            status: self.value.status().to_string(),
            sample_size_a: self.sample_sizes.0,
            sample_size_b: self.sample_sizes.1,
            one_sided_terms: self.one_sided_terms,
        }
    }
}

/// Flat serialization of one measurement (one CSV row / JSON object).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRow {
    pub measure_kind: String,
    pub distance_kind: String,
    pub subset: String,
    pub window_a_start: i64,
    pub window_a_end: i64,
    pub window_b_start: i64,
    pub window_b_end: i64,
    pub magnitude: Option<f64>,
    pub status: String,
    pub sample_size_a: usize,
    pub sample_size_b: usize,
    pub one_sided_terms: usize,
}

/// One condition's contribution to a conditional drift measure.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalTerm {
    pub condition: Tuple,
    pub weight_a: f64,
    pub weight_b: f64,
    /// Distance between the two conditional distributions; 1 when one-sided.
    pub inner: f64,
    pub one_sided: bool,
}

impl ConditionalTerm {
    /// Mean of the two condition probabilities.
    pub fn weight(&self) -> f64 {
        (self.weight_a + self.weight_b) / 2.0
    }
}

/// Per-condition terms of a conditional measure, with usable sample sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalTerms {
    pub terms: Vec<ConditionalTerm>,
    pub sample_sizes: (usize, usize),
}

impl ConditionalTerms {
    pub fn weighted_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.weight() * t.inner).sum::<f64>().clamp(0.0, 1.0)
    }

    pub fn one_sided(&self) -> usize {
        self.terms.iter().filter(|t| t.one_sided).count()
    }
}

fn same_dataset(a: &WindowView<'_>, b: &WindowView<'_>) -> Result<(), MeasureError> {
    if std::ptr::eq(a.dataset(), b.dataset()) {
        Ok(())
    } else {
        Err(MeasureError::DifferentDatasets)
    }
}

fn estimate_or_none<T>(r: Result<T, EstimateError>) -> Result<Option<T>, MeasureError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(EstimateError::NoData) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Distance between the two windows' estimates of `subset`. The measure kind
/// follows the subset role.
pub fn marginal_drift(
    window_a: &WindowView<'_>,
    window_b: &WindowView<'_>,
    subset: &AttributeSubset,
    distance: DistanceKind,
) -> Result<DriftMeasurement, MeasureError> {
    same_dataset(window_a, window_b)?;
    let pa = estimate_or_none(estimate_distribution(window_a, subset))?;
    let pb = estimate_or_none(estimate_distribution(window_b, subset))?;
    let sample_sizes = (pa.as_ref().map_or(0, |p| p.sample_size()), pb.as_ref().map_or(0, |p| p.sample_size()));
    let value = match (&pa, &pb) {
        (Some(p), Some(q)) => DriftValue::Magnitude(distance.between(p, q)?),
        _ => DriftValue::InsufficientData,
    };
    Ok(DriftMeasurement {
        measure_kind: MeasureKind::of_marginal(subset.role()),
        distance_kind: distance,
        subset: subset.clone(),
        window_a: window_a.interval(),
        window_b: window_b.interval(),
        value,
        sample_sizes,
        one_sided_terms: 0,
    })
}

fn pair_terms(
    fa: &ConditionalFamily,
    fb: &ConditionalFamily,
    distance: DistanceKind,
) -> Result<Vec<ConditionalTerm>, MeasureError> {
    let mut terms = Vec::with_capacity(fa.members().len().max(fb.members().len()));
    let mut a = fa.members().iter().peekable();
    let mut b = fb.members().iter().peekable();
    loop {
        let term = match (a.peek(), b.peek()) {
            (None, None) => break,
            (Some((ka, _)), Some((kb, _))) if ka.cmp(kb) == Ordering::Equal => {
                let ((k, ma), (_, mb)) = (a.next().unwrap(), b.next().unwrap());
                ConditionalTerm {
                    condition: k.clone(),
                    weight_a: ma.weight,
                    weight_b: mb.weight,
                    inner: distance.between(&ma.estimate, &mb.estimate)?,
                    one_sided: false,
                }
            }
            (Some((ka, _)), Some((kb, _))) if ka < kb => {
                let (k, ma) = a.next().unwrap();
                ConditionalTerm {
                    condition: k.clone(),
                    weight_a: ma.weight,
                    weight_b: 0.0,
                    inner: 1.0,
                    one_sided: true,
                }
            }
            (Some(_), None) => {
                let (k, ma) = a.next().unwrap();
                ConditionalTerm {
                    condition: k.clone(),
                    weight_a: ma.weight,
                    weight_b: 0.0,
                    inner: 1.0,
                    one_sided: true,
                }
            }
            (_, Some(_)) => {
                let (k, mb) = b.next().unwrap();
                ConditionalTerm {
                    condition: k.clone(),
                    weight_a: 0.0,
                    weight_b: mb.weight,
                    inner: 1.0,
                    one_sided: true,
                }
            }
        };
        terms.push(term);
    }
    Ok(terms)
}

/// Terms of a conditional measure: distances between the windows'
/// `target | conditioning` distributions for every observed condition.
/// `None` when either window has no usable record.
pub fn conditional_terms(
    window_a: &WindowView<'_>,
    window_b: &WindowView<'_>,
    target: &AttributeSubset,
    conditioning: &AttributeSubset,
    distance: DistanceKind,
) -> Result<Option<ConditionalTerms>, MeasureError> {
    same_dataset(window_a, window_b)?;
    let fa = estimate_or_none(estimate_conditional(window_a, target, conditioning))?;
    let fb = estimate_or_none(estimate_conditional(window_b, target, conditioning))?;
    match (fa, fb) {
        (Some(fa), Some(fb)) => Ok(Some(ConditionalTerms {
            terms: pair_terms(&fa, &fb, distance)?,
            sample_sizes: (fa.sample_size(), fb.sample_size()),
        })),
        _ => Ok(None),
    }
}

fn conditional_measure(
    kind: MeasureKind,
    window_a: &WindowView<'_>,
    window_b: &WindowView<'_>,
    subset: &AttributeSubset,
    distance: DistanceKind,
) -> Result<DriftMeasurement, MeasureError> {
    if subset.role() != SubsetRole::CovariatesOnly {
        return Err(MeasureError::NotCovariateSubset { kind });
    }
    let class = AttributeSubset::class(window_a.dataset().schema());
    let terms = match kind {
        MeasureKind::ConditionedCovariate => conditional_terms(window_a, window_b, subset, &class, distance)?,
        _ => conditional_terms(window_a, window_b, &class, subset, distance)?,
    };
    let (value, sample_sizes, one_sided_terms) = match terms {
        Some(t) => (DriftValue::Magnitude(t.weighted_sum()), t.sample_sizes, t.one_sided()),
        None => {
            let usable = |w: &WindowView<'_>| {
                let both = [subset.attributes(), class.attributes()].concat();
                w.records().filter(|r| both.iter().all(|&a| r[a].is_some())).count()
            };
            (DriftValue::InsufficientData, (usable(window_a), usable(window_b)), 0)
        }
    };
    Ok(DriftMeasurement {
        measure_kind: kind,
        distance_kind: distance,
        subset: subset.clone(),
        window_a: window_a.interval(),
        window_b: window_b.interval(),
        value,
        sample_sizes,
        one_sided_terms,
    })
}

/// Class-prevalence-weighted distance between `P(x̄ | y)` in the two windows.
pub fn conditioned_covariate_drift(
    window_a: &WindowView<'_>,
    window_b: &WindowView<'_>,
    subset: &AttributeSubset,
    distance: DistanceKind,
) -> Result<DriftMeasurement, MeasureError> {
    conditional_measure(MeasureKind::ConditionedCovariate, window_a, window_b, subset, distance)
}

/// Covariate-prevalence-weighted distance between `P(y | x̄)` in the two
/// windows.
pub fn posterior_drift(
    window_a: &WindowView<'_>,
    window_b: &WindowView<'_>,
    subset: &AttributeSubset,
    distance: DistanceKind,
) -> Result<DriftMeasurement, MeasureError> {
    conditional_measure(MeasureKind::Posterior, window_a, window_b, subset, distance)
}

/// Dispatches on `kind`, checking that the subset role fits it.
pub fn measure(
    kind: MeasureKind,
    window_a: &WindowView<'_>,
    window_b: &WindowView<'_>,
    subset: &AttributeSubset,
    distance: DistanceKind,
) -> Result<DriftMeasurement, MeasureError> {
    if subset.role() != kind.required_role() {
        return Err(MeasureError::RoleMismatch { kind, role: subset.role() });
    }
    match kind {
        MeasureKind::Joint | MeasureKind::Covariate | MeasureKind::Class => {
            marginal_drift(window_a, window_b, subset, distance)
        }
        MeasureKind::ConditionedCovariate => conditioned_covariate_drift(window_a, window_b, subset, distance),
        MeasureKind::Posterior => posterior_drift(window_a, window_b, subset, distance),
    }
}
