//! `driftmap` command-line front end.
//!
//! Every subcommand reads one config document and one data file, then writes
//! its artifacts into `--out`. File names are `<subcommand>-<hash>.<ext>`
//! where `<hash>` prefixes the SHA-256 of the run's provenance, so reruns with
//! identical inputs overwrite identical files. Flags override `[analysis]`
//! values from the config, which override built-in defaults.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::discretize::{Discretizer, EncodedDataset};
use crate::distance::DistanceKind;
use crate::estimate::{select_window, AttributeSubset, TimeInterval};
use crate::ingest::{ingest_records, DataFormat};
use crate::maps::{
    conditioned_pairwise_map, conditioned_univariate_map, pairwise_joint_map, posterior_pairwise_map, HeatMapGrid,
    MapKind,
};
use crate::measures::{measure, MeasureKind};
use crate::render::{escape, render_heatmap, render_lineplot, PlotStyle};
use crate::schema::{AttrId, AttributeSchema};
use crate::temporal::{drift_series, series_statistics, Alignment, MeasureSpec, SweepSpec};

#[derive(Debug, Parser)]
#[command(name = "driftmap", version, about = "Measure and map distribution drift in timestamped tabular data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ingest and discretize; write the encoded dataset and discretizer sidecar.
    Encode(Common),
    /// Drift between one pair of windows.
    Measure {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        windows: WindowArgs,
        #[command(flatten)]
        measures: MeasureArgs,
    },
    /// Drift swept over time.
    Series {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        measures: MeasureArgs,
        /// Distance between evaluation times, e.g. `1d`.
        #[arg(long)]
        step: Option<String>,
        /// Window length, e.g. `30d`.
        #[arg(long)]
        span: Option<String>,
        /// `adjacent-before-after` or `consecutive`.
        #[arg(long)]
        alignment: Option<String>,
        #[arg(long)]
        start: Option<String>,
        #[arg(long)]
        end: Option<String>,
        /// Times for dashed vertical lines in the plot.
        #[arg(long, value_delimiter = ',')]
        markers: Option<Vec<String>>,
    },
    /// Heat map of drift over attribute pairs or attribute/class cells.
    Map {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        windows: WindowArgs,
        /// pairwise-joint, conditioned-univariate, conditioned-pairwise or posterior-pairwise.
        #[arg(long)]
        kind: Option<String>,
        /// Attributes on the map axes (defaults to every covariate).
        #[arg(long, value_delimiter = ',')]
        subset: Option<Vec<String>>,
        /// Add the class as a row and column of a pairwise-joint map.
        #[arg(long)]
        classes_on_map: bool,
    },
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// CSV (or ARFF, by `.arff` extension) data file.
    #[arg(long)]
    data: PathBuf,
    /// Previously written discretizer sidecar to apply instead of fitting.
    #[arg(long)]
    discretizer: Option<PathBuf>,
    #[arg(long)]
    bins: Option<usize>,
    /// tvd or hellinger.
    #[arg(long)]
    distance: Option<String>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Comma-separated subset of csv, json, svg.
    #[arg(long, value_delimiter = ',')]
    format: Option<Vec<String>>,
}

#[derive(Debug, Args)]
struct WindowArgs {
    /// `START..END`, as ticks or dates.
    #[arg(long)]
    window_a: Option<String>,
    #[arg(long)]
    window_b: Option<String>,
}

#[derive(Debug, Args)]
struct MeasureArgs {
    /// Measure kinds, optionally with a subset: `covariate`, `posterior:a+b`.
    #[arg(long, value_delimiter = ',')]
    measures: Option<Vec<String>>,
    /// Covariates used by measures without an explicit subset.
    #[arg(long, value_delimiter = ',')]
    subset: Option<Vec<String>>,
}

/// Runs the CLI and returns the process exit status.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
    Svg,
}

struct Loaded {
    config: Config,
    dataset: EncodedDataset,
    config_sha256: String,
    data_sha256: String,
    discretizer_sha256: String,
    discretizer_json: String,
    discretizer_source: String,
}

#[derive(Debug, Serialize)]
struct Provenance {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: String,
    config_sha256: String,
    data: String,
    data_sha256: String,
    discretizer: String,
    discretizer_sha256: String,
    parameters: serde_json::Value,
}

impl Provenance {
    fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("provenance serializes");
        sha256_hex(text.as_bytes())
    }

    fn stem(&self) -> String {
        format!("{}-{}", self.command, &self.hash()[..12])
    }

    fn csv_header(&self) -> String {
        let mut s = format!(
            "# tool: {} {}\n# command: {}\n# config: {} sha256={}\n# data: {} sha256={}\n# discretizer: {} sha256={}\n",
            self.tool,
            self.version,
            self.command,
            self.config,
            self.config_sha256,
            self.data,
            self.data_sha256,
            self.discretizer,
            self.discretizer_sha256
        );
        s.push_str(&format!("# parameters: {}\n", self.parameters));
        s
    }

    fn svg_metadata(&self) -> String {
        format!(
            "<metadata id=\"provenance\">{}</metadata>\n",
            escape(&serde_json::to_string(self).expect("provenance serializes"))
        )
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn load(common: &Common) -> Result<Loaded> {
    let config_bytes = fs::read(&common.config).with_context(|| format!("reading {}", common.config.display()))?;
    let config_text = String::from_utf8(config_bytes.clone()).context("config is not UTF-8")?;
    let config = Config::parse(&config_text).with_context(|| format!("parsing {}", common.config.display()))?;
    let data_bytes = fs::read(&common.data).with_context(|| format!("reading {}", common.data.display()))?;
    let format = match common.data.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("arff") => DataFormat::Arff,
        _ => DataFormat::Csv { delimiter: config.delimiter },
    };
    let raw = ingest_records(data_bytes.as_slice(), format, &config.schema)
        .with_context(|| format!("ingesting {}", common.data.display()))?;
    let (discretizer, source) = match &common.discretizer {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            (Discretizer::from_json(&text)?, path.display().to_string())
        }
        None => {
            let bins = common.bins.unwrap_or(config.discretization.bins);
            if bins < 2 {
                bail!("--bins must be at least 2");
            }
            (Discretizer::fit(&raw, bins)?, format!("fitted, {bins} bins"))
        }
    };
    let dataset = discretizer.apply(&raw)?;
    let discretizer_json = discretizer.to_json()?;
    Ok(Loaded {
        config,
        dataset,
        config_sha256: sha256_hex(&config_bytes),
        data_sha256: sha256_hex(&data_bytes),
        discretizer_sha256: sha256_hex(discretizer_json.as_bytes()),
        discretizer_json,
        discretizer_source: source,
    })
}

impl Loaded {
    fn provenance(&self, common: &Common, command: &'static str, parameters: serde_json::Value) -> Provenance {
        Provenance {
            tool: "driftmap",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config: file_name(&common.config),
            config_sha256: self.config_sha256.clone(),
            data: file_name(&common.data),
            data_sha256: self.data_sha256.clone(),
            discretizer: self.discretizer_source.clone(),
            discretizer_sha256: self.discretizer_sha256.clone(),
            parameters,
        }
    }

    fn schema(&self) -> &AttributeSchema {
        self.dataset.schema()
    }

    fn distance(&self, common: &Common) -> Result<DistanceKind> {
        let text = common.distance.clone().or_else(|| self.config.analysis.distance.clone());
        Ok(match text {
            Some(t) => t.parse()?,
            None => DistanceKind::default(),
        })
    }

    fn interval(&self, flag: &Option<String>, configured: &Option<String>, which: &str) -> Result<TimeInterval> {
        let text = flag.as_ref().or(configured.as_ref()).ok_or_else(|| anyhow!("--{which} START..END is required"))?;
        let (start, end) =
            text.split_once("..").ok_or_else(|| anyhow!("--{which} must look like START..END, got `{text}`"))?;
        let clock = self.schema().clock();
        Ok(TimeInterval::new(clock.parse_time(start)?, clock.parse_time(end)?)?)
    }

    fn covariates(&self, names: &Option<Vec<String>>) -> Result<Vec<AttrId>> {
        let schema = self.schema();
        match names.as_ref().or(self.config.analysis.subset.as_ref()) {
            Some(names) => Ok(names.iter().map(|n| schema.id_of(n.trim())).collect::<Result<_, _>>()?),
            None => Ok(schema.covariate_ids()),
        }
    }

    fn measure_specs(&self, args: &MeasureArgs, distance: DistanceKind) -> Result<Vec<MeasureSpec>> {
        let schema = self.schema();
        let covariates = self.covariates(&args.subset)?;
        let requested = args
            .measures
            .clone()
            .or_else(|| self.config.analysis.measures.clone())
            .unwrap_or_else(|| vec!["covariate".into()]);
        requested
            .iter()
            .map(|entry| {
                let (kind, subset) = match entry.split_once(':') {
                    Some((k, s)) => (k.trim(), Some(s)),
                    None => (entry.trim(), None),
                };
                let kind: MeasureKind = kind.parse()?;
                let subset = match subset {
                    Some(names) => {
                        AttributeSubset::by_names(schema, &names.split('+').map(str::trim).collect::<Vec<_>>())?
                    }
                    None => default_subset(schema, kind, &covariates)?,
                };
                Ok(MeasureSpec::new(schema, kind, subset, distance)?)
            })
            .collect()
    }
}

fn default_subset(schema: &AttributeSchema, kind: MeasureKind, covariates: &[AttrId]) -> Result<AttributeSubset> {
    let mut ids = covariates.to_vec();
    match kind {
        MeasureKind::Class => return Ok(AttributeSubset::class(schema)),
        MeasureKind::Joint => ids.push(schema.class_id()),
        _ => {}
    }
    Ok(AttributeSubset::new(schema, ids)?)
}

fn file_name(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn formats(requested: &Option<Vec<String>>, defaults: &[Format], allowed: &[Format]) -> Result<Vec<Format>> {
    let Some(list) = requested else {
        return Ok(defaults.to_vec());
    };
    let mut out = Vec::new();
    for f in list {
        let name = f.trim();
        let f = match name {
            "csv" => Format::Csv,
            "json" => Format::Json,
            "svg" => Format::Svg,
            other => bail!("unknown format `{other}` (expected csv, json or svg)"),
        };
        if !allowed.contains(&f) {
            bail!("{name} output is not available for this subcommand");
        }
        if !out.contains(&f) {
            out.push(f);
        }
    }
    Ok(out)
}

fn csv_bytes<T: Serialize>(prov: &Provenance, rows: &[T]) -> Result<Vec<u8>> {
    let mut out = prov.csv_header().into_bytes();
    let mut w = csv::Writer::from_writer(&mut out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    drop(w);
    Ok(out)
}

fn json_bytes(value: serde_json::Value) -> Result<Vec<u8>> {
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    Ok(text.into_bytes())
}

fn with_metadata(svg: String, prov: &Provenance) -> Vec<u8> {
    let end = svg.find('>').and_then(|i| svg[i + 1..].find('>').map(|j| i + j + 2)).unwrap_or(svg.len());
    let mut out = String::with_capacity(svg.len() + 512);
    out.push_str(&svg[..end]);
    out.push('\n');
    out.push_str(&prov.svg_metadata());
    out.push_str(svg[end..].trim_start_matches('\n'));
    out.into_bytes()
}

fn execute(command: Command) -> Result<Vec<PathBuf>> {
    let (out_dir, artifacts) = match command {
        Command::Encode(common) => (common.out.clone(), encode(&common)?),
        Command::Measure { common, windows, measures } => {
            (common.out.clone(), run_measure(&common, &windows, &measures)?)
        }
        Command::Series { common, measures, step, span, alignment, start, end, markers } => {
            let opts = SeriesOpts { step, span, alignment, start, end, markers };
            (common.out.clone(), run_series(&common, &measures, &opts)?)
        }
        Command::Map { common, windows, kind, subset, classes_on_map } => {
            (common.out.clone(), run_map(&common, &windows, kind, subset, classes_on_map)?)
        }
    };
    write_all(&out_dir, artifacts)
}

/// Writes every artifact, removing the ones already written if any write fails.
fn write_all(dir: &Path, artifacts: Vec<(String, Vec<u8>)>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    for (name, bytes) in artifacts {
        let path = dir.join(name);
        if let Err(e) = fs::write(&path, bytes) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            let _ = fs::remove_file(&path);
            return Err(e).with_context(|| format!("writing {}", path.display()));
        }
        written.push(path);
    }
    Ok(written)
}

fn encode(common: &Common) -> Result<Vec<(String, Vec<u8>)>> {
    formats(&common.format, &[Format::Csv, Format::Json], &[Format::Csv, Format::Json])?;
    let loaded = load(common)?;
    let d = &loaded.dataset;
    let params = serde_json::json!({
        "records": d.len(),
        "cardinalities": d.cardinalities(),
    });
    let prov = loaded.provenance(common, "encode", params);
    let stem = prov.stem();
    let mut encoded = prov.csv_header().into_bytes();
    d.write_csv(&mut encoded)?;
    let mut sidecar = loaded.discretizer_json.clone().into_bytes();
    sidecar.push(b'\n');
    let missing: Vec<usize> = (0..loaded.schema().len()).map(|i| d.missing_count(i)).collect();
    let summary = serde_json::json!({
        "provenance": &prov,
        "attributes": loaded.schema().attributes().iter().map(|a| &a.name).collect::<Vec<_>>(),
        "cardinalities": d.cardinalities(),
        "missing": missing,
        "unseen": d.unseen_counts(),
    });
    Ok(vec![
        (format!("{stem}.encoded.csv"), encoded),
        (format!("{stem}.discretizer.json"), sidecar),
        (format!("{stem}.provenance.json"), json_bytes(summary)?),
    ])
}

fn run_measure(common: &Common, windows: &WindowArgs, args: &MeasureArgs) -> Result<Vec<(String, Vec<u8>)>> {
    let fmts = formats(&common.format, &[Format::Csv, Format::Json], &[Format::Csv, Format::Json])?;
    let loaded = load(common)?;
    let schema = loaded.schema();
    let distance = loaded.distance(common)?;
    let a = loaded.interval(&windows.window_a, &loaded.config.analysis.window_a, "window-a")?;
    let b = loaded.interval(&windows.window_b, &loaded.config.analysis.window_b, "window-b")?;
    let specs = loaded.measure_specs(args, distance)?;
    let (wa, wb) = (select_window(&loaded.dataset, a), select_window(&loaded.dataset, b));
    let rows = specs
        .iter()
        .map(|s| Ok(measure(s.kind, &wa, &wb, &s.subset, s.distance)?.row(schema)))
        .collect::<Result<Vec<_>>>()?;
    let params = serde_json::json!({
        "distance": distance,
        "window_a": [a.start(), a.end()],
        "window_b": [b.start(), b.end()],
        "measures": specs.iter().map(|s| s.label(schema)).collect::<Vec<_>>(),
    });
    let prov = loaded.provenance(common, "measure", params);
    let stem = prov.stem();
    let mut out = Vec::new();
    for f in fmts {
        match f {
            Format::Csv => out.push((format!("{stem}.csv"), csv_bytes(&prov, &rows)?)),
            Format::Json => out.push((
                format!("{stem}.json"),
                json_bytes(serde_json::json!({ "provenance": &prov, "measurements": rows }))?,
            )),
            Format::Svg => unreachable!(),
        }
    }
    Ok(out)
}

struct SeriesOpts {
    step: Option<String>,
    span: Option<String>,
    alignment: Option<String>,
    start: Option<String>,
    end: Option<String>,
    markers: Option<Vec<String>>,
}

fn run_series(common: &Common, args: &MeasureArgs, opts: &SeriesOpts) -> Result<Vec<(String, Vec<u8>)>> {
    let all = [Format::Csv, Format::Json, Format::Svg];
    let fmts = formats(&common.format, &all, &all)?;
    let loaded = load(common)?;
    let schema = loaded.schema();
    let clock = schema.clock();
    let analysis = &loaded.config.analysis;
    let distance = loaded.distance(common)?;
    let step_text = opts.step.clone().or_else(|| analysis.step.clone()).ok_or_else(|| anyhow!("--step is required"))?;
    let span_text = opts.span.clone().or_else(|| analysis.span.clone()).ok_or_else(|| anyhow!("--span is required"))?;
    let alignment = match opts.alignment.clone().or_else(|| analysis.alignment.clone()) {
        Some(a) => a.parse::<Alignment>()?,
        None => Alignment::default(),
    };
    let time = |t: Option<&String>| t.map(|t| clock.parse_time(t)).transpose();
    let spec = SweepSpec {
        compute_step: clock.parse_duration(&step_text)?,
        span: clock.parse_duration(&span_text)?,
        alignment,
        measures: loaded.measure_specs(args, distance)?,
        start: time(opts.start.as_ref().or(analysis.start.as_ref()))?,
        end: time(opts.end.as_ref().or(analysis.end.as_ref()))?,
    };
    let markers = opts
        .markers
        .as_ref()
        .or(analysis.markers.as_ref())
        .map(|m| m.iter().map(|t| clock.parse_time(t)).collect::<Result<Vec<_>, _>>())
        .transpose()?
        .unwrap_or_default();
    let series = drift_series(&loaded.dataset, &spec)?;
    let summary = series_statistics(&series);
    let params = serde_json::json!({
        "distance": distance,
        "step": spec.compute_step,
        "span": spec.span,
        "alignment": spec.alignment,
        "start": spec.start,
        "end": spec.end,
        "measures": spec.measures.iter().map(|s| s.label(schema)).collect::<Vec<_>>(),
        "markers": markers,
    });
    let prov = loaded.provenance(common, "series", params);
    let stem = prov.stem();
    let rows = series.rows(schema);
    let mut out = Vec::new();
    for f in fmts {
        match f {
            Format::Csv => out.push((format!("{stem}.csv"), csv_bytes(&prov, &rows)?)),
            Format::Json => {
                let labels: Vec<String> = spec.measures.iter().map(|s| s.label(schema)).collect();
                out.push((
                    format!("{stem}.json"),
                    json_bytes(serde_json::json!({
                        "provenance": &prov,
                        "status": series.status,
                        "measures": labels,
                        "summary": summary,
                        "points": rows,
                    }))?,
                ))
            }
            Format::Svg => {
                let style = PlotStyle { markers: markers.clone(), ..PlotStyle::default() };
                let svg = render_lineplot(&series, schema, &style)?;
                out.push((format!("{stem}.svg"), with_metadata(svg, &prov)));
            }
        }
    }
    Ok(out)
}

fn run_map(
    common: &Common,
    windows: &WindowArgs,
    kind: Option<String>,
    subset: Option<Vec<String>>,
    classes_on_map: bool,
) -> Result<Vec<(String, Vec<u8>)>> {
    let all = [Format::Csv, Format::Json, Format::Svg];
    let fmts = formats(&common.format, &all, &all)?;
    let loaded = load(common)?;
    let schema = loaded.schema();
    let analysis = &loaded.config.analysis;
    let distance = loaded.distance(common)?;
    let kind: MapKind = match kind.or_else(|| analysis.map_kind.clone()) {
        Some(k) => k.parse()?,
        None => MapKind::PairwiseJoint,
    };
    let classes_on_map = classes_on_map || analysis.classes_on_map.unwrap_or(false);
    if classes_on_map && kind != MapKind::PairwiseJoint {
        bail!("--classes-on-map applies only to pairwise-joint maps");
    }
    let mut attributes = loaded.covariates(&subset)?;
    if classes_on_map && !attributes.contains(&schema.class_id()) {
        attributes.push(schema.class_id());
    }
    let a = loaded.interval(&windows.window_a, &analysis.window_a, "window-a")?;
    let b = loaded.interval(&windows.window_b, &analysis.window_b, "window-b")?;
    let (wa, wb) = (select_window(&loaded.dataset, a), select_window(&loaded.dataset, b));
    let grids: Vec<HeatMapGrid> = match kind {
        MapKind::PairwiseJoint => vec![pairwise_joint_map(&wa, &wb, &attributes, distance)?],
        MapKind::ConditionedUnivariate => vec![conditioned_univariate_map(&wa, &wb, &attributes, distance)?],
        MapKind::ConditionedPairwise => conditioned_pairwise_map(&wa, &wb, &attributes, distance)?,
        MapKind::PosteriorPairwise => vec![posterior_pairwise_map(&wa, &wb, &attributes, distance)?],
    };
    let params = serde_json::json!({
        "distance": distance,
        "map_kind": kind,
        "window_a": [a.start(), a.end()],
        "window_b": [b.start(), b.end()],
        "attributes": attributes.iter().map(|&i| &schema.attribute(i).name).collect::<Vec<_>>(),
    });
    let prov = loaded.provenance(common, "map", params);
    let stem = prov.stem();
    let mut out = Vec::new();
    for f in fmts {
        match f {
            Format::Csv => {
                let rows: Vec<_> = grids.iter().flat_map(|g| g.long_rows()).collect();
                out.push((format!("{stem}.csv"), csv_bytes(&prov, &rows)?));
            }
            Format::Json => out.push((
                format!("{stem}.json"),
                json_bytes(serde_json::json!({ "provenance": &prov, "grids": grids }))?,
            )),
            Format::Svg => {
                for (i, g) in grids.iter().enumerate() {
                    let title = match &g.class_label {
                        Some(c) => format!("{kind} ({distance}), class {c}"),
                        None => format!("{kind} ({distance})"),
                    };
                    let style = PlotStyle { title: Some(title), ..PlotStyle::default() };
                    let svg = render_heatmap(g, &style)?;
                    let name = if grids.len() == 1 { format!("{stem}.svg") } else { format!("{stem}-class{i}.svg") };
                    out.push((name, with_metadata(svg, &prov)));
                }
            }
        }
    }
    Ok(out)
}
