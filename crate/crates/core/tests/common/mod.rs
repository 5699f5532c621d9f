//! Synthetic data generators and a dense brute-force oracle shared by the
//! integration tests.
#![allow(dead_code)]

use driftmap::discretize::{Code, EncodedDataset};
use driftmap::distance::DistanceKind;
use driftmap::estimate::TimeInterval;
use driftmap::schema::{Attribute, AttributeSchema, Clock, TimestampSource};
use rand::Rng;

/// Categorical covariates `x0..` followed by the class `y`.
pub fn schema(covariates: usize) -> AttributeSchema {
    let mut attrs: Vec<Attribute> = (0..covariates).map(|i| Attribute::categorical(format!("x{i}"))).collect();
    attrs.push(Attribute::categorical("y"));
    AttributeSchema::new(attrs, "y", TimestampSource::RecordIndex, vec![], Clock::default()).unwrap()
}

/// Two adjacent windows of coded records; record `i` sits at tick `i`.
pub struct Synthetic {
    pub dataset: EncodedDataset,
    pub window_a: TimeInterval,
    pub window_b: TimeInterval,
}

/// Up to `max_attrs` attributes (class included) with at most `max_codes`
/// codes each and at most `max_records` records per window. Each cell is
/// missing with probability `missing`.
pub fn random_synthetic<R: Rng>(
    rng: &mut R,
    max_attrs: usize,
    max_codes: usize,
    max_records: usize,
    missing: f64,
) -> Synthetic {
    let width = rng.gen_range(2..=max_attrs);
    let schema = schema(width - 1);
    let cards: Vec<usize> = (0..width).map(|_| rng.gen_range(1..=max_codes)).collect();
    let na = rng.gen_range(1..=max_records);
    let nb = rng.gen_range(1..=max_records);
    // skewed per-window generators so the two windows usually differ
    let weights: Vec<Vec<Vec<f64>>> =
        (0..2).map(|_| cards.iter().map(|&k| (0..k).map(|_| rng.gen::<f64>() + 0.05).collect()).collect()).collect();
    let mut rows = Vec::with_capacity(na + nb);
    for i in 0..na + nb {
        let w = &weights[usize::from(i >= na)];
        let row = (0..width)
            .map(|a| if missing > 0.0 && rng.gen::<f64>() < missing { None } else { Some(sample(rng, &w[a]) as Code) })
            .collect();
        rows.push((i as i64, row));
    }
    let dataset = EncodedDataset::from_codes(schema, &cards, rows).unwrap();
    Synthetic {
        dataset,
        window_a: TimeInterval::new(0, na as i64).unwrap(),
        window_b: TimeInterval::new(na as i64, (na + nb) as i64).unwrap(),
    }
}

fn sample<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Dense joint table over the full domain of `attrs`, counting only records
/// in `window` that are complete on `complete_on`.
pub struct Dense {
    pub cards: Vec<usize>,
    pub counts: Vec<f64>,
    pub total: f64,
}

impl Dense {
    pub fn index(&self, codes: &[usize]) -> usize {
        codes.iter().zip(&self.cards).fold(0, |acc, (c, k)| acc * k + c)
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.counts.iter().map(|c| c / self.total).collect()
    }
}

pub fn dense(d: &EncodedDataset, window: TimeInterval, attrs: &[usize], complete_on: &[usize]) -> Dense {
    let cards: Vec<usize> = attrs.iter().map(|&a| d.cardinality(a)).collect();
    let size = cards.iter().product();
    let mut table = Dense { cards, counts: vec![0.0; size], total: 0.0 };
    for i in 0..d.len() {
        if !window.contains(d.timestamps()[i]) {
            continue;
        }
        let rec = d.record(i);
        if complete_on.iter().any(|&a| rec[a].is_none()) {
            continue;
        }
        let codes: Vec<usize> = attrs.iter().map(|&a| rec[a].unwrap() as usize).collect();
        let idx = table.index(&codes);
        table.counts[idx] += 1.0;
        table.total += 1.0;
    }
    table
}

pub fn dense_distance(kind: DistanceKind, p: &[f64], q: &[f64]) -> f64 {
    match kind {
        DistanceKind::TotalVariation => 0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>(),
        DistanceKind::Hellinger => {
            (0.5 * p.iter().zip(q).map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2)).sum::<f64>()).sqrt()
        }
    }
}

/// Marginal drift over `attrs`, or `None` when a window has no complete record.
pub fn oracle_marginal(s: &Synthetic, attrs: &[usize], kind: DistanceKind) -> Option<f64> {
    let a = dense(&s.dataset, s.window_a, attrs, attrs);
    let b = dense(&s.dataset, s.window_b, attrs, attrs);
    if a.total == 0.0 || b.total == 0.0 {
        return None;
    }
    Some(dense_distance(kind, &a.probabilities(), &b.probabilities()))
}

/// `Σ_y ½(Pa(y)+Pb(y)) · d(Pa(x|y), Pb(x|y))` over the full domain of `y`,
/// with inner distance 1 where `y` occurs in only one window.
pub fn oracle_conditional(s: &Synthetic, target: &[usize], given: &[usize], kind: DistanceKind) -> Option<f64> {
    let all: Vec<usize> = given.iter().chain(target).copied().collect();
    let a = dense(&s.dataset, s.window_a, &all, &all);
    let b = dense(&s.dataset, s.window_b, &all, &all);
    if a.total == 0.0 || b.total == 0.0 {
        return None;
    }
    let ny: usize = given.iter().map(|&g| s.dataset.cardinality(g)).product();
    let nx: usize = target.iter().map(|&t| s.dataset.cardinality(t)).product();
    let mut sum = 0.0;
    for y in 0..ny {
        // `given` leads `all`, so the rows of one condition are contiguous
        let ra = &a.counts[y * nx..(y + 1) * nx];
        let rb = &b.counts[y * nx..(y + 1) * nx];
        let (ca, cb): (f64, f64) = (ra.iter().sum(), rb.iter().sum());
        let (pa, pb) = (ca / a.total, cb / b.total);
        if pa + pb == 0.0 {
            continue;
        }
        let inner = if ca == 0.0 || cb == 0.0 {
            1.0
        } else {
            let ca_row: Vec<f64> = ra.iter().map(|c| c / ca).collect();
            let cb_row: Vec<f64> = rb.iter().map(|c| c / cb).collect();
            dense_distance(kind, &ca_row, &cb_row)
        };
        sum += 0.5 * (pa + pb) * inner;
    }
    Some(sum)
}
