//! Total variation and Hellinger distances between sparse estimates.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimate::{DistributionEstimate, Tuple};

#[derive(Debug, Error, PartialEq)]
pub enum DistanceError {
    #[error("distributions are over different attribute subsets")]
    SubsetMismatch,
    #[error("distribution has no mass")]
    Empty,
    #[error("unknown distance `{0}` (expected tvd or hellinger)")]
    Unknown(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum DistanceKind {
    #[default]
    #[serde(rename = "tvd")]
    TotalVariation,
    #[serde(rename = "hellinger")]
    Hellinger,
}

impl DistanceKind {
    pub fn between(self, p: &DistributionEstimate, q: &DistributionEstimate) -> Result<f64, DistanceError> {
        match self {
            DistanceKind::TotalVariation => total_variation(p, q),
            DistanceKind::Hellinger => hellinger(p, q),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DistanceKind::TotalVariation => "tvd",
            DistanceKind::Hellinger => "hellinger",
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DistanceKind {
    type Err = DistanceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tvd" | "total-variation" | "total_variation" => Ok(DistanceKind::TotalVariation),
            "hellinger" => Ok(DistanceKind::Hellinger),
            other => Err(DistanceError::Unknown(other.to_string())),
        }
    }
}

/// Visits `(p(z), q(z))` for every tuple in the union of both supports, in
/// tuple order.
fn for_each_union_pair(p: &BTreeMap<Tuple, f64>, q: &BTreeMap<Tuple, f64>, mut f: impl FnMut(f64, f64)) {
    let mut a = p.iter().peekable();
    let mut b = q.iter().peekable();
    loop {
        match (a.peek(), b.peek()) {
            (Some((ka, va)), Some((kb, vb))) => match ka.cmp(kb) {
                Ordering::Less => {
                    f(**va, 0.0);
                    a.next();
                }
                Ordering::Greater => {
                    f(0.0, **vb);
                    b.next();
                }
                Ordering::Equal => {
                    f(**va, **vb);
                    a.next();
                    b.next();
                }
            },
            (Some((_, va)), None) => {
                f(**va, 0.0);
                a.next();
            }
            (None, Some((_, vb))) => {
                f(0.0, **vb);
                b.next();
            }
            (None, None) => break,
        }
    }
}

fn check(p: &DistributionEstimate, q: &DistributionEstimate) -> Result<(), DistanceError> {
    if p.subset() != q.subset() {
        return Err(DistanceError::SubsetMismatch);
    }
    if p.support().is_empty() || q.support().is_empty() {
        return Err(DistanceError::Empty);
    }
    Ok(())
}

/// `½ Σ |p(z) − q(z)|` over the union of supports.
pub fn total_variation(p: &DistributionEstimate, q: &DistributionEstimate) -> Result<f64, DistanceError> {
    check(p, q)?;
    Ok(total_variation_sparse(p.support(), q.support()))
}

/// `√(½ Σ (√p(z) − √q(z))²)` over the union of supports.
pub fn hellinger(p: &DistributionEstimate, q: &DistributionEstimate) -> Result<f64, DistanceError> {
    check(p, q)?;
    Ok(hellinger_sparse(p.support(), q.support()))
}

pub(crate) fn total_variation_sparse(p: &BTreeMap<Tuple, f64>, q: &BTreeMap<Tuple, f64>) -> f64 {
    let mut sum = 0.0;
    for_each_union_pair(p, q, |a, b| sum += (a - b).abs());
    (0.5 * sum).clamp(0.0, 1.0)
}

pub(crate) fn hellinger_sparse(p: &BTreeMap<Tuple, f64>, q: &BTreeMap<Tuple, f64>) -> f64 {
    let mut sum = 0.0;
    for_each_union_pair(p, q, |a, b| {
        let d = a.sqrt() - b.sqrt();
        sum += d * d;
    });
    (0.5 * sum).sqrt().clamp(0.0, 1.0)
}
