//! Heat-map grids of drift over attribute pairs and attribute × class cells
//! for one window pair.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discretize::{Code, Encoding};
use crate::distance::DistanceKind;
use crate::estimate::{AttributeSubset, EstimateError, TimeInterval, WindowView};
use crate::measures::{conditional_terms, marginal_drift, posterior_drift, ConditionalTerms, DriftValue, MeasureError};
use crate::schema::{AttrId, AttributeSchema};

/// Tolerance for the symmetry and monotonicity checks.
pub const GRID_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("a map needs at least one attribute")]
    NoAttributes,
    #[error("the class attribute cannot be a covariate row of a {0} map")]
    ClassAsCovariate(MapKind),
    #[error("unknown map kind `{0}`")]
    UnknownKind(String),
    #[error("grid invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapKind {
    PairwiseJoint,
    ConditionedUnivariate,
    ConditionedPairwise,
    PosteriorPairwise,
}

impl MapKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MapKind::PairwiseJoint => "pairwise-joint",
            MapKind::ConditionedUnivariate => "conditioned-univariate",
            MapKind::ConditionedPairwise => "conditioned-pairwise",
            MapKind::PosteriorPairwise => "posterior-pairwise",
        }
    }

    fn is_pairwise(self) -> bool {
        !matches!(self, MapKind::ConditionedUnivariate)
    }

    /// Whether off-diagonal cells must dominate their diagonal cells.
    fn is_monotone(self) -> bool {
        matches!(self, MapKind::PairwiseJoint | MapKind::ConditionedPairwise)
    }
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MapKind {
    type Err = MapError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pairwise-joint" => Ok(MapKind::PairwiseJoint),
            "conditioned-univariate" => Ok(MapKind::ConditionedUnivariate),
            "conditioned-pairwise" => Ok(MapKind::ConditionedPairwise),
            "posterior-pairwise" => Ok(MapKind::PosteriorPairwise),
            other => Err(MapError::UnknownKind(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatMapGrid {
    pub map_kind: MapKind,
    pub distance_kind: DistanceKind,
    pub row_labels: Vec<String>,
    pub column_labels: Vec<String>,
    /// Row-major cells.
    pub cells: Vec<Vec<DriftValue>>,
    /// The class a conditioned-pairwise grid belongs to.
    pub class_label: Option<String>,
    pub window_a: TimeInterval,
    pub window_b: TimeInterval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub map_kind: String,
    pub row: String,
    pub column: String,
    pub class: Option<String>,
    pub magnitude: Option<f64>,
    pub status: String,
}

impl HeatMapGrid {
    pub fn rows(&self) -> usize {
        self.cells.len()
    }

    pub fn columns(&self) -> usize {
        self.column_labels.len()
    }

    pub fn cell(&self, row: usize, column: usize) -> DriftValue {
        self.cells[row][column]
    }

    /// Checks symmetry (pairwise kinds) and that every off-diagonal cell is at
    /// least both of its diagonal cells (joint and conditioned pairwise kinds).
    pub fn verify(&self) -> Result<(), MapError> {
        if !self.map_kind.is_pairwise() {
            return Ok(());
        }
        let n = self.rows();
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (self.cells[i][j], self.cells[j][i]);
                let symmetric = match (a.magnitude(), b.magnitude()) {
                    (Some(x), Some(y)) => (x - y).abs() <= GRID_TOLERANCE,
                    (None, None) => true,
                    _ => false,
                };
                if !symmetric {
                    return Err(MapError::Invariant(format!("cell ({i},{j}) differs from ({j},{i})")));
                }
                if self.map_kind.is_monotone() && i != j {
                    if let Some(pair) = a.magnitude() {
                        for d in [i, j] {
                            if let Some(single) = self.cells[d][d].magnitude() {
                                if pair < single - GRID_TOLERANCE {
                                    return Err(MapError::Invariant(format!(
                                        "cell ({i},{j}) = {pair} below diagonal ({d},{d}) = {single}"
                                    )));
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Long-format rows, one per cell.
    pub fn long_rows(&self) -> Vec<GridRow> {
        let mut out = Vec::with_capacity(self.rows() * self.columns());
        for (i, row) in self.cells.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                out.push(GridRow {
                    map_kind: self.map_kind.as_str().to_string(),
                    row: self.row_labels[i].clone(),
                    column: self.column_labels[j].clone(),
                    class: self.class_label.clone(),
                    magnitude: v.magnitude(),
                    status: v.status().to_string(),
                });
            }
        }
        out
    }
}

fn names(schema: &AttributeSchema, ids: &[AttrId]) -> Vec<String> {
    ids.iter().map(|&a| schema.attribute(a).name.clone()).collect()
}

/// Upper-triangle index pairs `(i, j)` with `i <= j`.
fn upper_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect()
}

fn pair_subset(schema: &AttributeSchema, ids: &[AttrId], i: usize, j: usize) -> Result<AttributeSubset, MapError> {
    let attrs = if i == j { vec![ids[i]] } else { vec![ids[i], ids[j]] };
    Ok(AttributeSubset::new(schema, attrs)?)
}

fn mirror(n: usize, upper: Vec<((usize, usize), DriftValue)>) -> Vec<Vec<DriftValue>> {
    let mut cells = vec![vec![DriftValue::InsufficientData; n]; n];
    for ((i, j), v) in upper {
        cells[i][j] = v;
        cells[j][i] = v;
    }
    cells
}

fn missing_free(window: &WindowView<'_>, ids: &[AttrId]) -> bool {
    ids.iter().all(|&a| window.dataset().missing_count(a) == 0)
}

fn check_covariates(schema: &AttributeSchema, ids: &[AttrId], kind: MapKind) -> Result<(), MapError> {
    if ids.is_empty() {
        return Err(MapError::NoAttributes);
    }
    if ids.contains(&schema.class_id()) {
        return Err(MapError::ClassAsCovariate(kind));
    }
    Ok(())
}

/// `cell(i, j)` = marginal drift over `{A_i, A_j}`; the diagonal is
/// univariate drift. `attributes` may include the class.
pub fn pairwise_joint_map(
    window_a: &WindowView<'_>,
    window_b: &WindowView<'_>,
    attributes: &[AttrId],
    distance: DistanceKind,
) -> Result<HeatMapGrid, MapError> {
    if attributes.is_empty() {
        return Err(MapError::NoAttributes);
    }
    let schema = window_a.dataset().schema();
    let upper = upper_pairs(attributes.len())
        .into_par_iter()
        .map(|(i, j)| {
            let subset = pair_subset(schema, attributes, i, j)?;
            Ok(((i, j), marginal_drift(window_a, window_b, &subset, distance)?.value))
        })
        .collect::<Result<Vec<_>, MapError>>()?;
    let labels = names(schema, attributes);
    let grid = HeatMapGrid {
        map_kind: MapKind::PairwiseJoint,
        distance_kind: distance,
        row_labels: labels.clone(),
        column_labels: labels,
        cells: mirror(attributes.len(), upper),
        class_label: None,
        window_a: window_a.interval(),
        window_b: window_b.interval(),
    };
    if missing_free(window_a, attributes) {
        grid.verify()?;
    }
    Ok(grid)
}

/// Class codes shown as columns: every dictionary label, plus the overflow
/// code when it occurs in either window.
fn class_columns(window_a: &WindowView<'_>, window_b: &WindowView<'_>) -> Vec<Code> {
    let d = window_a.dataset();
    let class = d.schema().class_id();
    let known = match &d.discretizer().attributes[class].encoding {
        Encoding::Categorical { labels } => labels.len(),
        Encoding::Numeric { cut_points } => cut_points.len() + 1,
    } as Code;
    let mut codes: Vec<Code> = (0..known).collect();
    if window_a.records().chain(window_b.records()).any(|r| r[class] == Some(known)) {
        codes.push(known);
    }
    codes
}

/// Inner distance of one class from a set of conditional terms, or
/// insufficient data when the class occurs in neither window.
fn class_cell(terms: &Option<ConditionalTerms>, class: Code) -> DriftValue {
    terms
        .as_ref()
        .and_then(|t| t.terms.iter().find(|term| term.condition == [class]))
        .map_or(DriftValue::InsufficientData, |term| DriftValue::Magnitude(term.inner))
}

/// `cell(attribute, class)` = distance between `P_a(x | y)` and `P_b(x | y)`,
/// unweighted by class prevalence.
pub fn conditioned_univariate_map(
    window_a: &WindowView<'_>,
    window_b: &WindowView<'_>,
    covariates: &[AttrId],
    distance: DistanceKind,
) -> Result<HeatMapGrid, MapError> {
    let d = window_a.dataset();
    let schema = d.schema();
    check_covariates(schema, covariates, MapKind::ConditionedUnivariate)?;
    let class_subset = AttributeSubset::class(schema);
    let classes = class_columns(window_a, window_b);
    let terms = covariates
        .par_iter()
        .map(|&a| {
            let target = AttributeSubset::new(schema, vec![a])?;
            Ok(conditional_terms(window_a, window_b, &target, &class_subset, distance)?)
        })
        .collect::<Result<Vec<_>, MapError>>()?;
    let cells = terms.iter().map(|t| classes.iter().map(|&c| class_cell(t, c)).collect()).collect();
    Ok(HeatMapGrid {
        map_kind: MapKind::ConditionedUnivariate,
        distance_kind: distance,
        row_labels: names(schema, covariates),
        column_labels: classes.iter().map(|&c| d.label(schema.class_id(), c)).collect(),
        cells,
        class_label: None,
        window_a: window_a.interval(),
        window_b: window_b.interval(),
    })
}

/// One grid per class: `cell(i, j)` = distance between the windows'
/// `P(A_i, A_j | y)`.
pub fn conditioned_pairwise_map(
    window_a: &WindowView<'_>,
    window_b: &WindowView<'_>,
    covariates: &[AttrId],
    distance: DistanceKind,
) -> Result<Vec<HeatMapGrid>, MapError> {
    let d = window_a.dataset();
    let schema = d.schema();
    check_covariates(schema, covariates, MapKind::ConditionedPairwise)?;
    let class_subset = AttributeSubset::class(schema);
    let classes = class_columns(window_a, window_b);
    let upper = upper_pairs(covariates.len())
        .into_par_iter()
        .map(|(i, j)| {
            let target = pair_subset(schema, covariates, i, j)?;
            Ok(((i, j), conditional_terms(window_a, window_b, &target, &class_subset, distance)?))
        })
        .collect::<Result<Vec<_>, MapError>>()?;
    let labels = names(schema, covariates);
    let check = missing_free(window_a, covariates) && missing_free(window_a, &[schema.class_id()]);
    classes
        .iter()
        .map(|&c| {
            let cells = mirror(covariates.len(), upper.iter().map(|(ij, t)| (*ij, class_cell(t, c))).collect());
            let grid = HeatMapGrid {
                map_kind: MapKind::ConditionedPairwise,
                distance_kind: distance,
                row_labels: labels.clone(),
                column_labels: labels.clone(),
                cells,
                class_label: Some(d.label(schema.class_id(), c)),
                window_a: window_a.interval(),
                window_b: window_b.interval(),
            };
            if check {
                grid.verify()?;
            }
            Ok(grid)
        })
        .collect()
}

/// `cell(i, j)` = posterior drift with covariate subset `{A_i, A_j}`.
pub fn posterior_pairwise_map(
    window_a: &WindowView<'_>,
    window_b: &WindowView<'_>,
    covariates: &[AttrId],
    distance: DistanceKind,
) -> Result<HeatMapGrid, MapError> {
    let schema = window_a.dataset().schema();
    check_covariates(schema, covariates, MapKind::PosteriorPairwise)?;
    let upper = upper_pairs(covariates.len())
        .into_par_iter()
        .map(|(i, j)| {
            let subset = pair_subset(schema, covariates, i, j)?;
            Ok(((i, j), posterior_drift(window_a, window_b, &subset, distance)?.value))
        })
        .collect::<Result<Vec<_>, MapError>>()?;
    let labels = names(schema, covariates);
    let grid = HeatMapGrid {
        map_kind: MapKind::PosteriorPairwise,
        distance_kind: distance,
        row_labels: labels.clone(),
        column_labels: labels,
        cells: mirror(covariates.len(), upper),
        class_label: None,
        window_a: window_a.interval(),
        window_b: window_b.interval(),
    };
    grid.verify()?;
    Ok(grid)
}
