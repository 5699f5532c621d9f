//! End-to-end acceptance suite. Runs without the libtest harness and prints
//! one PASS/FAIL line per criterion; exits nonzero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::{oracle_conditional, oracle_marginal, random_synthetic, Synthetic};
use driftmap::config::Config;
use driftmap::discretize::{Code, Discretizer, EncodedDataset};
use driftmap::distance::{hellinger, total_variation, DistanceKind};
use driftmap::estimate::{
    estimate_conditional, estimate_distribution, select_window, AttributeSubset, DistributionEstimate, TimeInterval,
};
use driftmap::ingest::{ingest_records, DataFormat};
use driftmap::maps::{pairwise_joint_map, posterior_pairwise_map};
use driftmap::measures::{conditioned_covariate_drift, marginal_drift, posterior_drift, MeasureKind};
use driftmap::temporal::{drift_series, Alignment, MeasureSpec, SweepSpec};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;
const DISTANCES: [DistanceKind; 2] = [DistanceKind::TotalVariation, DistanceKind::Hellinger];

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:?}"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("distance metric properties", distance_suite),
        ("brute-force oracle equivalence", oracle_equivalence),
        ("monotone under added attributes", monotonicity),
        ("electricity market change", electricity),
        ("satellite-style posterior interaction", satellite_style),
        ("weekly cycle vs daily span", weekly_cycle),
        ("CLI byte-identical reruns", cli_determinism),
        ("chain rule and marginalization", chain_rule),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let took = start.elapsed();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name} ({detail}; {took:.2?})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} ({why}; {took:.2?})", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}

fn random_distribution(rng: &mut ChaCha8Rng, subset: &AttributeSubset, codes: &[Code]) -> DistributionEstimate {
    let counts: BTreeMap<Vec<Code>, u64> = codes.iter().map(|&c| (vec![c], rng.gen_range(1..=50))).collect();
    DistributionEstimate::from_counts(subset.clone(), counts).unwrap()
}

fn distance_suite() -> Outcome {
    let start = Instant::now();
    let schema = common::schema(1);
    let subset = AttributeSubset::new(&schema, vec![0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let all: Vec<Code> = (0..25).collect();
    let draw = |rng: &mut ChaCha8Rng| {
        let n = rng.gen_range(1..=25);
        let support: Vec<Code> = all.choose_multiple(rng, n).copied().collect();
        random_distribution(rng, &subset, &support)
    };
    for trial in 0..1000 {
        let (p, q, r) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
        let split = rng.gen_range(1..25);
        let lo = random_distribution(&mut rng, &subset, &all[..split]);
        let hi = random_distribution(&mut rng, &subset, &all[split..]);
        for f in [total_variation, hellinger] {
            let d = |a: &DistributionEstimate, b: &DistributionEstimate| f(a, b).unwrap();
            ensure(d(&p, &p).abs() <= TOL, || format!("trial {trial}: d(p,p) = {}", d(&p, &p)))?;
            ensure((d(&lo, &hi) - 1.0).abs() <= TOL, || format!("trial {trial}: disjoint gave {}", d(&lo, &hi)))?;
            ensure((d(&p, &q) - d(&q, &p)).abs() <= TOL, || format!("trial {trial}: asymmetric"))?;
            ensure(d(&p, &r) <= d(&p, &q) + d(&q, &r) + TOL, || format!("trial {trial}: triangle violated"))?;
        }
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok("1000 triples, both distances".into())
}

fn close(got: Option<f64>, want: Option<f64>) -> bool {
    match (got, want) {
        (Some(g), Some(w)) => (g - w).abs() <= TOL,
        (None, None) => true,
        _ => false,
    }
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut compared = 0;
    for n in 0..200 {
        let missing = if n % 4 == 3 { 0.1 } else { 0.0 };
        let s = random_synthetic(&mut rng, 4, 5, 200, missing);
        compared += compare_with_oracle(&s).map_err(|e| format!("dataset {n}: {e}"))?;
    }
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("200 datasets, {compared} comparisons"))
}

fn covariate_subsets(schema: &driftmap::AttributeSchema) -> Vec<Vec<usize>> {
    let cov = schema.covariate_ids();
    (1u32..1 << cov.len())
        .map(|mask| cov.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, &a)| a).collect())
        .collect()
}

fn compare_with_oracle(s: &Synthetic) -> Result<usize, String> {
    let d = &s.dataset;
    let schema = d.schema();
    let class = schema.class_id();
    let (wa, wb) = (select_window(d, s.window_a), select_window(d, s.window_b));
    let mut n = 0;
    for kind in DISTANCES {
        let class_subset = AttributeSubset::class(schema);
        let got = marginal_drift(&wa, &wb, &class_subset, kind).unwrap().magnitude();
        ensure(close(got, oracle_marginal(s, &[class], kind)), || format!("class {kind}: {got:?}"))?;
        n += 1;
        for attrs in covariate_subsets(schema) {
            let subset = AttributeSubset::new(schema, attrs.clone()).unwrap();
            let mut joint = attrs.clone();
            joint.push(class);
            let joint_subset = AttributeSubset::new(schema, joint.clone()).unwrap();
            let checks = [
                ("covariate", marginal_drift(&wa, &wb, &subset, kind), oracle_marginal(s, &attrs, kind)),
                ("joint", marginal_drift(&wa, &wb, &joint_subset, kind), oracle_marginal(s, &joint, kind)),
                (
                    "conditioned",
                    conditioned_covariate_drift(&wa, &wb, &subset, kind),
                    oracle_conditional(s, &attrs, &[class], kind),
                ),
                ("posterior", posterior_drift(&wa, &wb, &subset, kind), oracle_conditional(s, &[class], &attrs, kind)),
            ];
            for (label, got, want) in checks {
                let got = got.map_err(|e| e.to_string())?.magnitude();
                ensure(close(got, want), || format!("{label} {kind} over {attrs:?}: got {got:?}, oracle {want:?}"))?;
                n += 1;
            }
        }
    }
    Ok(n)
}

fn monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut chains = 0;
    for n in 0..200 {
        let s = random_synthetic(&mut rng, 4, 5, 200, 0.0);
        let d = &s.dataset;
        let schema = d.schema();
        let (wa, wb) = (select_window(d, s.window_a), select_window(d, s.window_b));
        for kind in DISTANCES {
            let value = |attrs: &[usize]| {
                let subset = AttributeSubset::new(schema, attrs.to_vec()).unwrap();
                let m = marginal_drift(&wa, &wb, &subset, kind).unwrap().magnitude().unwrap();
                let c = conditioned_covariate_drift(&wa, &wb, &subset, kind).unwrap().magnitude().unwrap();
                (m, c)
            };
            for small in covariate_subsets(schema) {
                for z in schema.covariate_ids().into_iter().filter(|z| !small.contains(z)) {
                    let mut big = small.clone();
                    big.push(z);
                    let ((ms, cs), (mb, cb)) = (value(&small), value(&big));
                    ensure(ms <= mb + TOL && cs <= cb + TOL, || {
                        format!("dataset {n} {kind}: {small:?} -> {big:?} gave ({ms}, {cs}) > ({mb}, {cb})")
                    })?;
                    chains += 1;
                }
            }
            let mut axes = schema.covariate_ids();
            axes.push(schema.class_id());
            let grid = pairwise_joint_map(&wa, &wb, &axes, kind).map_err(|e| e.to_string())?;
            for i in 0..grid.rows() {
                for j in 0..grid.columns() {
                    let cell = grid.cell(i, j).magnitude().unwrap();
                    for k in [i, j] {
                        let diag = grid.cell(k, k).magnitude().unwrap();
                        ensure(cell >= diag - TOL, || format!("dataset {n} {kind}: cell ({i},{j}) < ({k},{k})"))?;
                    }
                }
            }
        }
    }
    Ok(format!("{chains} subset chains and 400 heat maps"))
}

fn data_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data"))
}

fn load_electricity() -> (Config, EncodedDataset) {
    let config = Config::parse(&fs::read_to_string(data_dir().join("electricity.toml")).unwrap()).unwrap();
    let file = fs::File::open(data_dir().join("electricity.csv")).unwrap();
    let raw = ingest_records(file, DataFormat::Csv { delimiter: config.delimiter }, &config.schema).unwrap();
    let dataset = Discretizer::fit(&raw, config.discretization.bins).unwrap().apply(&raw).unwrap();
    (config, dataset)
}

fn electricity() -> Outcome {
    let start = Instant::now();
    let (config, d) = load_electricity();
    ensure(config.discretization.bins == 5, || "config must use 5 bins".into())?;
    let schema = d.schema();
    let clock = schema.clock();
    let covariate = |names: &[&str]| {
        MeasureSpec::new(
            schema,
            MeasureKind::Covariate,
            AttributeSubset::by_names(schema, names).unwrap(),
            DistanceKind::TotalVariation,
        )
        .unwrap()
    };
    let singles = ["vicprice", "vicdemand", "transfer"];
    let mut measures: Vec<MeasureSpec> = singles.iter().map(|n| covariate(&[n])).collect();
    measures.push(covariate(&["nswprice", "nswdemand", "vicprice", "vicdemand", "transfer"]));
    measures.push(
        MeasureSpec::new(schema, MeasureKind::Class, AttributeSubset::class(schema), DistanceKind::TotalVariation)
            .unwrap(),
    );
    let spec = SweepSpec {
        compute_step: clock.parse_duration("1d").unwrap(),
        span: clock.parse_duration("30d").unwrap(),
        alignment: Alignment::AdjacentBeforeAfter,
        measures,
        start: None,
        end: None,
    };
    let series = drift_series(&d, &spec).map_err(|e| e.to_string())?;
    let change = clock.parse_time("1997-05-02").unwrap();
    let times = series.times();

    let mut zero_points = 0;
    for (m, name) in singles.iter().enumerate() {
        for (t, v) in times.iter().zip(series.values(m)) {
            if t + spec.span <= change {
                ensure(v.magnitude() == Some(0.0), || format!("(a) {name} at {} is {v:?}", clock.format_time(*t)))?;
                zero_points += 1;
            }
        }
    }
    ensure(zero_points > 0, || "(a) no evaluation point precedes the change".into())?;

    let all = series.values(3);
    let (mut best, mut best_t) = (f64::NEG_INFINITY, 0);
    for (t, v) in times.iter().zip(&all) {
        if let Some(x) = v.magnitude() {
            if x > best {
                (best, best_t) = (x, *t);
            }
        }
    }
    let day = clock.parse_duration("1d").unwrap();
    ensure((best_t - change).abs() <= 3 * day, || format!("(b) argmax at {} ({best})", clock.format_time(best_t)))?;

    let class_max = series.values(4).iter().filter_map(|v| v.magnitude()).fold(0.0, f64::max);
    ensure(class_max < 0.5, || format!("(c) class drift reaches {class_max}"))?;
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!(
        "{} points; (a) {zero_points} exact zeros; (b) max {best:.3} at {}; (c) class max {class_max:.3}",
        times.len(),
        clock.format_time(best_t)
    ))
}

/// Covariates x0, x1 binary on a balanced grid, x2..x5 random noise; the
/// class is x0 XOR x1 in the first window and its negation in the second.
fn satellite_dataset() -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let schema = common::schema(6);
    let cards = [2, 2, 4, 4, 4, 4, 2];
    let per_window = 4000;
    let mut rows = Vec::new();
    for i in 0..2 * per_window {
        let window = usize::from(i >= per_window);
        let cell = i % 4;
        let (x0, x1) = ((cell / 2) as Code, (cell % 2) as Code);
        let y = (x0 ^ x1) ^ window as Code;
        let mut row = vec![Some(x0), Some(x1)];
        row.extend((0..4).map(|_| Some(rng.gen_range(0..4))));
        row.push(Some(y));
        rows.push((i as i64, row));
    }
    Synthetic {
        dataset: EncodedDataset::from_codes(schema, &cards, rows).unwrap(),
        window_a: TimeInterval::new(0, per_window as i64).unwrap(),
        window_b: TimeInterval::new(per_window as i64, 2 * per_window as i64).unwrap(),
    }
}

fn satellite_style() -> Outcome {
    let s = satellite_dataset();
    let d = &s.dataset;
    let schema = d.schema();
    let (wa, wb) = (select_window(d, s.window_a), select_window(d, s.window_b));
    let kind = DistanceKind::TotalVariation;
    let class = marginal_drift(&wa, &wb, &AttributeSubset::class(schema), kind).unwrap().magnitude();
    ensure(class == Some(0.0), || format!("class drift {class:?}"))?;

    let grid = posterior_pairwise_map(&wa, &wb, &schema.covariate_ids(), kind).map_err(|e| e.to_string())?;
    let m = |i: usize, j: usize| grid.cell(i, j).magnitude().unwrap();
    let n = grid.rows();
    let mut found = None;
    'search: for i in 0..n {
        for j in i + 1..n {
            if m(i, j) > 0.2 && m(i, i) < 0.05 && m(j, j) < 0.05 {
                found = Some((i, j));
                break 'search;
            }
        }
    }
    let (i, j) = found.ok_or_else(|| "no pairwise posterior cell above 0.2 with quiet diagonals".to_string())?;

    let covariates = AttributeSubset::covariates(schema).unwrap();
    let values = [
        marginal_drift(&wa, &wb, &covariates, kind),
        marginal_drift(&wa, &wb, &AttributeSubset::class(schema), kind),
        conditioned_covariate_drift(&wa, &wb, &covariates, kind),
        posterior_drift(&wa, &wb, &covariates, kind),
    ];
    for v in values {
        let v = v.map_err(|e| e.to_string())?.magnitude().unwrap();
        ensure((0.0..=1.0).contains(&v), || format!("measure outside [0,1]: {v}"))?;
    }
    Ok(format!(
        "cell ({},{}) = {:.3} with diagonals {:.3}, {:.3}",
        grid.row_labels[i],
        grid.column_labels[j],
        m(i, j),
        m(i, i),
        m(j, j)
    ))
}

/// 500 records a day for 12 weeks; x follows the weekday 80% of the time.
fn weekly_dataset() -> EncodedDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let schema = {
        use driftmap::schema::{Attribute, AttributeSchema, Clock, TimestampSource};
        AttributeSchema::new(
            vec![Attribute::categorical("x"), Attribute::categorical("y")],
            "y",
            TimestampSource::Column("t".into()),
            vec![],
            Clock::new(1, None).unwrap(),
        )
        .unwrap()
    };
    let mut rows = Vec::new();
    for day in 0..84i64 {
        for k in 0..500i64 {
            let x = if rng.gen::<f64>() < 0.8 { (day % 7) as Code } else { rng.gen_range(0..7) };
            let y = rng.gen_range(0..2);
            rows.push((day * 86_400 + k * 172, vec![Some(x), Some(y)]));
        }
    }
    EncodedDataset::from_codes(schema, &[7, 2], rows).unwrap()
}

fn weekly_cycle() -> Outcome {
    let start = Instant::now();
    let d = weekly_dataset();
    let schema = d.schema();
    let spec = |span: &str| SweepSpec {
        compute_step: schema.clock().parse_duration("1d").unwrap(),
        span: schema.clock().parse_duration(span).unwrap(),
        alignment: Alignment::AdjacentBeforeAfter,
        measures: vec![MeasureSpec::new(
            schema,
            MeasureKind::Covariate,
            AttributeSubset::covariates(schema).unwrap(),
            DistanceKind::TotalVariation,
        )
        .unwrap()],
        start: None,
        end: None,
    };
    let mean = |span: &str| -> Result<f64, String> {
        let series = drift_series(&d, &spec(span)).map_err(|e| e.to_string())?;
        let v: Vec<f64> = series.values(0).iter().filter_map(|v| v.magnitude()).collect();
        ensure(!v.is_empty(), || format!("{span} series is empty"))?;
        Ok(v.iter().sum::<f64>() / v.len() as f64)
    };
    let (daily, weekly) = (mean("1d")?, mean("7d")?);
    ensure(daily >= 3.0 * weekly, || format!("daily mean {daily} < 3 x weekly mean {weekly}"))?;
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!("daily mean {daily:.3}, weekly mean {weekly:.3}"))
}

fn cli_run(out: &Path, args: &[&str]) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_driftmap"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(status.status.success(), || String::from_utf8_lossy(&status.stderr).into_owned())
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn cli_determinism() -> Outcome {
    let config = data_dir().join("electricity.toml");
    let data = data_dir().join("electricity.csv");
    let (config, data) = (config.to_str().unwrap(), data.to_str().unwrap());
    let runs: [&[&str]; 3] = [
        &["series", "--config", config, "--data", data, "--step", "7d", "--format", "csv,json,svg"],
        &[
            "map",
            "--config",
            config,
            "--data",
            data,
            "--kind",
            "pairwise-joint",
            "--window-a",
            "1997-03-01..1997-05-01",
            "--window-b",
            "1997-05-01..1997-07-01",
            "--format",
            "csv,json,svg",
        ],
        &[
            "measure",
            "--config",
            config,
            "--data",
            data,
            "--measures",
            "covariate,class,posterior",
            "--window-a",
            "0..5000",
            "--window-b",
            "5000..10000",
        ],
    ];
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        for args in runs {
            cli_run(dir.path(), args)?;
        }
    }
    let (first, second) = (snapshot(dirs[0].path()), snapshot(dirs[1].path()));
    let extensions: Vec<&str> = first.keys().filter_map(|k| k.rsplit('.').next()).collect();
    for ext in ["csv", "json", "svg"] {
        ensure(extensions.contains(&ext), || format!("no .{ext} artifact written"))?;
    }
    ensure(first.keys().eq(second.keys()), || "file names differ between runs".into())?;
    for (name, bytes) in &first {
        ensure(second[name] == *bytes, || format!("{name} differs between runs"))?;
    }
    Ok(format!("{} artifacts identical across two runs", first.len()))
}

fn chain_rule() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut checked = 0;
    for n in 0..100 {
        let s = random_synthetic(&mut rng, 4, 5, 200, 0.0);
        let d = &s.dataset;
        let schema = d.schema();
        let w = select_window(d, s.window_a);
        let cov = schema.covariate_ids();
        let x = AttributeSubset::new(schema, cov.clone()).unwrap();
        let y = AttributeSubset::class(schema);
        let mut both = cov.clone();
        both.push(schema.class_id());
        let joint = estimate_distribution(&w, &AttributeSubset::new(schema, both).unwrap()).unwrap();
        let px = estimate_distribution(&w, &x).unwrap();
        let py = estimate_distribution(&w, &y).unwrap();
        let given_y = estimate_conditional(&w, &x, &y).unwrap();

        let mut marginal: BTreeMap<Vec<Code>, f64> = BTreeMap::new();
        for (tuple, p) in joint.support() {
            let (xs, ys) = tuple.split_at(cov.len());
            let member = given_y.get(ys).ok_or_else(|| format!("dataset {n}: class {ys:?} missing"))?;
            let product = member.estimate.probability(xs) * py.probability(ys);
            ensure((p - product).abs() <= TOL, || format!("dataset {n}: chain rule at {tuple:?}: {p} vs {product}"))?;
            *marginal.entry(xs.to_vec()).or_insert(0.0) += p;
            checked += 1;
        }
        ensure(marginal.len() == px.support().len(), || format!("dataset {n}: marginal support differs"))?;
        for (xs, p) in &marginal {
            let want = px.probability(xs);
            ensure((p - want).abs() <= TOL, || format!("dataset {n}: marginal at {xs:?}: {p} vs {want}"))?;
        }
    }
    Ok(format!("{checked} joint cells on 100 datasets"))
}
