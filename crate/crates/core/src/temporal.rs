//! Drift time series: sweep window pairs along the stream.
//!
//! A sweep has two periodicity parameters: how often drift is evaluated
//! (`compute_step`) and how long each compared period is (`span`). At an
//! evaluation time `t` the compared windows are
//!
//! * adjacent-before-after: `[t − span, t)` against `[t, t + span)`;
//! * consecutive: `[t − 2·span, t − span)` against `[t − span, t)`.
//!
//! Evaluation times lie on the grid `origin + k·compute_step`, where the
//! origin is the clipping start (the first timestamp by default), and only
//! times whose windows fit entirely inside `[start, end)` are evaluated.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discretize::EncodedDataset;
use crate::distance::DistanceKind;
use crate::estimate::{select_window, AttributeSubset, TimeInterval};
use crate::measures::{measure, DriftMeasurement, DriftValue, MeasureError, MeasureKind};
use crate::schema::AttributeSchema;

#[derive(Debug, Error, PartialEq)]
pub enum TemporalError {
    #[error("compute step must be positive, got {0}")]
    Step(i64),
    #[error("span must be positive, got {0}")]
    Span(i64),
    #[error("a sweep needs at least one measure")]
    NoMeasures,
    #[error("{kind} drift cannot be computed over a {subset} subset")]
    IncompatibleMeasure { kind: MeasureKind, subset: String },
    #[error("unknown alignment `{0}`")]
    UnknownAlignment(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alignment {
    #[default]
    AdjacentBeforeAfter,
    Consecutive,
}

impl Alignment {
    pub fn as_str(self) -> &'static str {
        match self {
            Alignment::AdjacentBeforeAfter => "adjacent-before-after",
            Alignment::Consecutive => "consecutive",
        }
    }

    /// The two windows compared at time `t`.
    pub fn windows(self, t: i64, span: i64) -> (TimeInterval, TimeInterval) {
        let (a, b) = match self {
            Alignment::AdjacentBeforeAfter => ((t - span, t), (t, t + span)),
            Alignment::Consecutive => ((t - 2 * span, t - span), (t - span, t)),
        };
        (TimeInterval::new(a.0, a.1).expect("positive span"), TimeInterval::new(b.0, b.1).expect("positive span"))
    }
}

impl fmt::Display for Alignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Alignment {
    type Err = TemporalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "adjacent-before-after" | "adjacent" => Ok(Alignment::AdjacentBeforeAfter),
            "consecutive" => Ok(Alignment::Consecutive),
            other => Err(TemporalError::UnknownAlignment(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub kind: MeasureKind,
    pub subset: AttributeSubset,
    pub distance: DistanceKind,
}

impl MeasureSpec {
    pub fn new(
        schema: &AttributeSchema,
        kind: MeasureKind,
        subset: AttributeSubset,
        distance: DistanceKind,
    ) -> Result<Self, TemporalError> {
        if subset.role() != kind.required_role() {
            return Err(TemporalError::IncompatibleMeasure { kind, subset: subset.label(schema) });
        }
        Ok(Self { kind, subset, distance })
    }

    /// `kind:subset` label used in legends and long-format output.
    pub fn label(&self, schema: &AttributeSchema) -> String {
        format!("{}:{}", self.kind, self.subset.label(schema))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub compute_step: i64,
    pub span: i64,
    pub alignment: Alignment,
    pub measures: Vec<MeasureSpec>,
    /// Clip the sweep to `[start, end)`; defaults to the data's extent.
    pub start: Option<i64>,
    pub end: Option<i64>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), TemporalError> {
        if self.compute_step <= 0 {
            return Err(TemporalError::Step(self.compute_step));
        }
        if self.span <= 0 {
            return Err(TemporalError::Span(self.span));
        }
        if self.measures.is_empty() {
            return Err(TemporalError::NoMeasures);
        }
        Ok(())
    }

    /// Evaluation times whose windows fit inside `[lower, upper)`.
    pub fn evaluation_times(&self, lower: i64, upper: i64) -> Vec<i64> {
        let origin = lower;
        let (lead, lag) = match self.alignment {
            Alignment::AdjacentBeforeAfter => (self.span, self.span),
            Alignment::Consecutive => (2 * self.span, 0),
        };
        let first = origin + lead;
        let k0 = (first - origin + self.compute_step - 1).div_euclid(self.compute_step);
        let mut times = Vec::new();
        let mut t = origin + k0 * self.compute_step;
        while t + lag <= upper {
            times.push(t);
            t += self.compute_step;
        }
        times
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesStatus {
    Complete,
    /// The data does not span a single window pair.
    TooShort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub time: i64,
    pub window_a: TimeInterval,
    pub window_b: TimeInterval,
    /// One entry per requested measure, in spec order.
    pub measurements: Vec<DriftMeasurement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSeries {
    pub spec: SweepSpec,
    pub status: SeriesStatus,
    pub points: Vec<SeriesPoint>,
}

impl DriftSeries {
    /// Values of measure `index` across all points.
    pub fn values(&self, index: usize) -> Vec<DriftValue> {
        self.points.iter().map(|p| p.measurements[index].value).collect()
    }

    pub fn times(&self) -> Vec<i64> {
        self.points.iter().map(|p| p.time).collect()
    }

    /// Long-format rows: one per (point, measure).
    pub fn rows(&self, schema: &AttributeSchema) -> Vec<SeriesRow> {
        let clock = schema.clock();
        self.points
            .iter()
            .flat_map(|p| {
                p.measurements.iter().map(move |m| SeriesRow {
                    time: p.time,
                    time_label: clock.format_time(p.time),
                    measure_kind: m.measure_kind.as_str().to_string(),
                    distance_kind: m.distance_kind.as_str().to_string(),
                    subset: m.subset.label(schema),
                    magnitude: m.magnitude(),
                    status: m.value.status().to_string(),
                    window_a_start: m.window_a.start(),
                    window_a_end: m.window_a.end(),
                    window_b_start: m.window_b.start(),
                    window_b_end: m.window_b.end(),
                    sample_size_a: m.sample_sizes.0,
                    sample_size_b: m.sample_sizes.1,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub time: i64,
    pub time_label: String,
    pub measure_kind: String,
    pub distance_kind: String,
    pub subset: String,
    pub magnitude: Option<f64>,
    pub status: String,
    pub window_a_start: i64,
    pub window_a_end: i64,
    pub window_b_start: i64,
    pub window_b_end: i64,
    pub sample_size_a: usize,
    pub sample_size_b: usize,
}

/// Computes every requested measure at every feasible evaluation time.
pub fn drift_series(dataset: &EncodedDataset, spec: &SweepSpec) -> Result<DriftSeries, TemporalError> {
    spec.validate()?;
    for m in &spec.measures {
        if m.subset.role() != m.kind.required_role() {
            return Err(TemporalError::IncompatibleMeasure { kind: m.kind, subset: m.subset.label(dataset.schema()) });
        }
    }
    let ts = dataset.timestamps();
    let (Some(&first), Some(&last)) = (ts.first(), ts.last()) else {
        return Ok(DriftSeries { spec: spec.clone(), status: SeriesStatus::TooShort, points: Vec::new() });
    };
    let lower = spec.start.unwrap_or(first);
    let upper = spec.end.unwrap_or(last + 1);
    let times = spec.evaluation_times(lower, upper);
    if times.is_empty() {
        return Ok(DriftSeries { spec: spec.clone(), status: SeriesStatus::TooShort, points: Vec::new() });
    }
    let points = times
        .par_iter()
        .map(|&t| {
            let (ia, ib) = spec.alignment.windows(t, spec.span);
            let wa = select_window(dataset, ia);
            let wb = select_window(dataset, ib);
            let measurements = spec
                .measures
                .iter()
                .map(|m| measure(m.kind, &wa, &wb, &m.subset, m.distance))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(SeriesPoint { time: t, window_a: ia, window_b: ib, measurements })
        })
        .collect::<Result<Vec<_>, MeasureError>>()?;
    Ok(DriftSeries { spec: spec.clone(), status: SeriesStatus::Complete, points })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Earliest point attaining the maximum.
    pub argmax_index: usize,
    pub argmax_time: i64,
    pub valid_points: usize,
}

/// Min/max/mean/argmax over the non-insufficient values; `None` when every
/// value is insufficient.
pub fn summarize(times: &[i64], values: &[DriftValue]) -> Option<MeasureSummary> {
    let mut best: Option<MeasureSummary> = None;
    let mut sum = 0.0;
    for (i, v) in values.iter().enumerate() {
        let Some(v) = v.magnitude() else { continue };
        sum += v;
        match best.as_mut() {
            None => {
                best = Some(MeasureSummary {
                    min: v,
                    max: v,
                    mean: 0.0,
                    argmax_index: i,
                    argmax_time: times[i],
                    valid_points: 1,
                })
            }
            Some(s) => {
                s.valid_points += 1;
                s.min = s.min.min(v);
                if v > s.max {
                    s.max = v;
                    s.argmax_index = i;
                    s.argmax_time = times[i];
                }
            }
        }
    }
    best.map(|mut s| {
        s.mean = sum / s.valid_points as f64;
        s
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    /// One entry per measure, `None` when that measure never had data.
    pub measures: Vec<Option<MeasureSummary>>,
    pub status: SummaryStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SummaryStatus {
    Ok,
    EmptySeries,
    AllInsufficient,
}

pub fn series_statistics(series: &DriftSeries) -> SeriesSummary {
    if series.points.is_empty() {
        return SeriesSummary { measures: vec![None; series.spec.measures.len()], status: SummaryStatus::EmptySeries };
    }
    let times = series.times();
    let measures: Vec<_> = (0..series.spec.measures.len()).map(|i| summarize(&times, &series.values(i))).collect();
    let status = if measures.iter().all(Option::is_none) { SummaryStatus::AllInsufficient } else { SummaryStatus::Ok };
    SeriesSummary { measures, status }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::Code;
    use crate::schema::{Attribute, Clock, TimestampSource};

    fn spec(step: i64, span: i64, alignment: Alignment, measures: Vec<MeasureSpec>) -> SweepSpec {
        SweepSpec { compute_step: step, span, alignment, measures, start: None, end: None }
    }

    fn dataset(rows: Vec<(i64, Vec<Code>)>) -> EncodedDataset {
        let schema = AttributeSchema::new(
            vec![Attribute::categorical("x"), Attribute::categorical("y")],
            "y",
            TimestampSource::Column("t".into()),
            vec![],
            Clock::default(),
        )
        .unwrap();
        let rows = rows.into_iter().map(|(t, c)| (t, c.into_iter().map(Some).collect())).collect();
        EncodedDataset::from_codes(schema, &[4, 2], rows).unwrap()
    }

    fn covariate(d: &EncodedDataset) -> MeasureSpec {
        MeasureSpec::new(
            d.schema(),
            MeasureKind::Covariate,
            AttributeSubset::new(d.schema(), vec![0]).unwrap(),
            DistanceKind::TotalVariation,
        )
        .unwrap()
    }

    #[test]
    fn evaluation_grid() {
        let s = spec(1, 3, Alignment::AdjacentBeforeAfter, vec![]);
        assert_eq!(s.evaluation_times(0, 10), vec![3, 4, 5, 6, 7]);
        let s = spec(2, 3, Alignment::Consecutive, vec![]);
        assert_eq!(s.evaluation_times(0, 10), vec![6, 8, 10]);
        let s = spec(1, 6, Alignment::AdjacentBeforeAfter, vec![]);
        assert!(s.evaluation_times(0, 10).is_empty());
    }

    #[test]
    fn windows_follow_alignment() {
        let (a, b) = Alignment::AdjacentBeforeAfter.windows(10, 3);
        assert_eq!((a.start(), a.end(), b.start(), b.end()), (7, 10, 10, 13));
        let (a, b) = Alignment::Consecutive.windows(10, 3);
        assert_eq!((a.start(), a.end(), b.start(), b.end()), (4, 7, 7, 10));
    }

    #[test]
    fn constant_stream_is_flat_zero() {
        let d = dataset((0..20).map(|t| (t, vec![1, 0])).collect());
        let class = MeasureSpec::new(
            d.schema(),
            MeasureKind::Class,
            AttributeSubset::class(d.schema()),
            DistanceKind::Hellinger,
        )
        .unwrap();
        let series = drift_series(&d, &spec(1, 4, Alignment::AdjacentBeforeAfter, vec![covariate(&d), class])).unwrap();
        assert_eq!(series.status, SeriesStatus::Complete);
        assert_eq!(series.points.len(), 13);
        for p in &series.points {
            assert!(p.measurements.iter().all(|m| m.magnitude() == Some(0.0)));
        }
        let times = series.times();
        assert!(times.windows(2).all(|w| w[1] - w[0] == 1));
    }

    #[test]
    fn gaps_are_reported_as_insufficient() {
        let mut rows: Vec<_> = (0..4).map(|t| (t, vec![0, 0])).collect();
        rows.extend((8..12).map(|t| (t, vec![1, 0])));
        let d = dataset(rows);
        let series = drift_series(&d, &spec(1, 2, Alignment::Consecutive, vec![covariate(&d)])).unwrap();
        let values = series.values(0);
        assert!(values.contains(&DriftValue::InsufficientData));
        assert!(values.contains(&DriftValue::Magnitude(0.0)));
    }

    #[test]
    fn too_short_and_invalid() {
        let d = dataset((0..3).map(|t| (t, vec![0, 0])).collect());
        let s = drift_series(&d, &spec(1, 5, Alignment::AdjacentBeforeAfter, vec![covariate(&d)])).unwrap();
        assert_eq!(s.status, SeriesStatus::TooShort);
        assert!(s.points.is_empty());
        assert_eq!(series_statistics(&s).status, SummaryStatus::EmptySeries);
        assert_eq!(
            drift_series(&d, &spec(0, 1, Alignment::Consecutive, vec![covariate(&d)])).unwrap_err(),
            TemporalError::Step(0)
        );
        assert_eq!(
            drift_series(&d, &spec(1, 1, Alignment::Consecutive, vec![])).unwrap_err(),
            TemporalError::NoMeasures
        );
        assert!(MeasureSpec::new(
            d.schema(),
            MeasureKind::Class,
            AttributeSubset::new(d.schema(), vec![0]).unwrap(),
            DistanceKind::TotalVariation
        )
        .is_err());
    }

    #[test]
    fn summary_examples() {
        let m = |v: &[f64]| v.iter().map(|&x| DriftValue::Magnitude(x)).collect::<Vec<_>>();
        let times = [10, 20, 30, 40];
        let s = summarize(&times, &m(&[0.0, 0.0, 0.8, 0.2])).unwrap();
        assert_eq!((s.max, s.argmax_index, s.argmax_time), (0.8, 2, 30));
        assert_eq!(s.min, 0.0);
        assert!((s.mean - 0.25).abs() < 1e-15);
        let z = summarize(&times, &m(&[0.0; 4])).unwrap();
        assert_eq!((z.max, z.argmax_index), (0.0, 0));
        assert!(summarize(&times[..1], &[DriftValue::InsufficientData]).is_none());
    }

    #[test]
    fn permuting_ties_leaves_series_unchanged() {
        let rows: Vec<(i64, Vec<Code>)> =
            (0..40).map(|i| (i / 4, vec![(i * 7 % 4) as Code, (i % 2) as Code])).collect();
        let mut shuffled = rows.clone();
        for chunk in shuffled.chunks_mut(4) {
            chunk.reverse();
        }
        let a = dataset(rows);
        let b = dataset(shuffled);
        let sa = drift_series(&a, &spec(1, 2, Alignment::AdjacentBeforeAfter, vec![covariate(&a)])).unwrap();
        let sb = drift_series(&b, &spec(1, 2, Alignment::AdjacentBeforeAfter, vec![covariate(&b)])).unwrap();
        assert_eq!(sa, sb);
    }
}
