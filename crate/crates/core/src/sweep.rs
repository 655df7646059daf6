//! Parameter sweeps over viewing conditions.
//!
//! One corpus is generated (or loaded) per run. Each sweep point renormalizes
//! every stack to the point's display, perceives it with each method,
//! channelizes it, trains virtual msCHO readers and records the MRMC figures
//! of merit as one CSV row. Rows come out ordered by method, then by swept
//! value, and are bit-identical for a given config regardless of thread count.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csf::BartenParams;
use crate::observer::{LgChannelSet, StackFeatures};
use crate::percept::{MethodKind, Perceiver};
use crate::seed::{derive_seed, stream};
use crate::stackgen::{normalize_to_display, Corpus, CorpusSpec, Label, ViewingConditions};
use crate::stats::{d_prime_error_bar, make_readers, mrmc_one_shot, split_cases, McmcInput};
use crate::stats::{McmcResult, ReaderConfig};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unsupported config version {found} (this build reads version {CONFIG_VERSION})")]
    Version { found: u32 },
    #[error("{field}: {reason}")]
    Field { field: &'static str, reason: String },
    #[error("config is not valid JSON for this schema: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn field(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweptParameter {
    Contrast,
    LMax,
    Ssr,
    BrowseSpeed,
}

impl SweptParameter {
    pub const ALL: [SweptParameter; 4] = [
        SweptParameter::Contrast,
        SweptParameter::LMax,
        SweptParameter::Ssr,
        SweptParameter::BrowseSpeed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweptParameter::Contrast => "contrast",
            SweptParameter::LMax => "l_max",
            SweptParameter::Ssr => "ssr",
            SweptParameter::BrowseSpeed => "browse_speed",
        }
    }

    pub fn apply(self, base: ViewingConditions, value: f64) -> ViewingConditions {
        let mut vc = base;
        match self {
            SweptParameter::Contrast => vc.contrast = value,
            SweptParameter::LMax => vc.l_max = value,
            SweptParameter::Ssr => vc.ssr = value,
            SweptParameter::BrowseSpeed => vc.browse_speed = value,
        }
        vc
    }

    /// The grid used when a config names only the parameter.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweptParameter::Contrast => vec![50.0, 100.0, 200.0, 400.0, 800.0],
            SweptParameter::LMax => vec![100.0, 200.0, 300.0, 500.0, 800.0],
            SweptParameter::Ssr => vec![3.0, 5.0, 7.0, 10.0, 14.0],
            SweptParameter::BrowseSpeed => vec![5.0, 10.0, 25.0, 50.0, 100.0],
        }
    }
}

impl fmt::Display for SweptParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SweptParameter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SweptParameter::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                format!("unknown parameter {s:?} (expected contrast, l_max, ssr or browse_speed)")
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub parameter: SweptParameter,
    pub values: Vec<f64>,
}

/// Physical size of the displayed slice, used to report viewing distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisplayGeometry {
    pub width_cm: f64,
    pub width_px: usize,
}

impl Default for DisplayGeometry {
    fn default() -> Self {
        Self {
            width_cm: 3.0,
            width_px: 64,
        }
    }
}

impl DisplayGeometry {
    /// Distance at which `width_px` pixels spanning `width_cm` subtend
    /// `width_px / ssr` degrees.
    pub fn viewing_distance(&self, ssr: f64) -> Result<f64, ConfigError> {
        if !(self.width_cm > 0.0 && self.width_cm.is_finite()) || self.width_px == 0 {
            return Err(field("display", "width_cm and width_px must be positive"));
        }
        if !(ssr > 0.0 && ssr.is_finite()) {
            return Err(field("ssr", format!("{ssr} must be positive")));
        }
        let half_angle = (self.width_px as f64 / ssr).to_radians() / 2.0;
        if half_angle >= std::f64::consts::FRAC_PI_2 {
            return Err(field(
                "ssr",
                format!("{ssr} px/deg makes the slice span 180 degrees or more"),
            ));
        }
        Ok(self.width_cm / (2.0 * half_angle.tan()))
    }
}

/// Viewing distance (cm) for the default 3 cm, 64 px slice.
pub fn viewing_distance(ssr: f64) -> Result<f64, ConfigError> {
    DisplayGeometry::default().viewing_distance(ssr)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub version: u32,
    pub methods: Vec<MethodKind>,
    pub sweep: SweepAxis,
    /// Values of the parameters that are not swept.
    #[serde(default)]
    pub viewing: ViewingConditions,
    #[serde(default)]
    pub corpus: CorpusSpec,
    /// Load this corpus instead of generating one from `corpus`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus_manifest: Option<PathBuf>,
    #[serde(default)]
    pub readers: ReaderConfig,
    #[serde(default)]
    pub barten: BartenParams,
    #[serde(default)]
    pub display: DisplayGeometry,
}

impl SweepConfig {
    /// All three methods over the default grid of `parameter`.
    pub fn for_parameter(parameter: SweptParameter) -> Self {
        Self {
            version: CONFIG_VERSION,
            methods: vec![MethodKind::LF, MethodKind::PM, MethodKind::MC],
            sweep: SweepAxis {
                parameter,
                values: parameter.default_values(),
            },
            viewing: ViewingConditions::default(),
            corpus: CorpusSpec::default(),
            corpus_manifest: None,
            readers: ReaderConfig::default(),
            barten: BartenParams::default(),
            display: DisplayGeometry::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let raw: serde_json::Value = serde_json::from_str(text)?;
        match raw.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == CONFIG_VERSION as u64 => {}
            Some(v) => return Err(ConfigError::Version { found: v as u32 }),
            None => return Err(field("version", "missing or not an integer")),
        }
        let config: Self = serde_json::from_value(raw)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let mut config = Self::from_json(&fs::read_to_string(path.as_ref())?)?;
        if let Some(m) = &config.corpus_manifest {
            if m.is_relative() {
                if let Some(dir) = path.as_ref().parent() {
                    config.corpus_manifest = Some(dir.join(m));
                }
            }
        }
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != CONFIG_VERSION {
            return Err(ConfigError::Version {
                found: self.version,
            });
        }
        if self.methods.is_empty() {
            return Err(field("methods", "at least one method is required"));
        }
        if self.methods.iter().collect::<BTreeSet<_>>().len() != self.methods.len() {
            return Err(field("methods", "methods must not repeat"));
        }
        let values = &self.sweep.values;
        if values.is_empty() {
            return Err(field("sweep.values", "at least one value is required"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(field("sweep.values", "values must be finite"));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(field("sweep.values", "values must be strictly increasing"));
        }
        self.viewing
            .validate()
            .map_err(|e| field("viewing", e.to_string()))?;
        for &v in values {
            let vc = self.sweep.parameter.apply(self.viewing, v);
            vc.validate()
                .map_err(|e| field("sweep.values", e.to_string()))?;
            self.display.viewing_distance(vc.ssr)?;
        }
        self.barten
            .validate()
            .map_err(|e| field("barten", e.to_string()))?;
        let c = &self.corpus;
        c.dims
            .check_transformable()
            .map_err(|e| field("corpus.dims", e.to_string()))?;
        if !(c.beta.is_finite() && c.beta >= 0.0) {
            return Err(field("corpus.beta", "must be finite and >= 0"));
        }
        if !(c.lesion.amplitude >= 0.0 && c.lesion.sigma_xy > 0.0 && c.lesion.sigma_t > 0.0) {
            return Err(field(
                "corpus.lesion",
                "amplitude must be >= 0 and widths > 0",
            ));
        }
        let cho = &self.readers.cho;
        if cho.n_channels == 0 || !(cho.spread > 0.0) || !(cho.ridge_factor >= 0.0) {
            return Err(field(
                "readers.cho",
                "n_channels >= 1, spread > 0 and ridge_factor >= 0 are required",
            ));
        }
        if self.corpus_manifest.is_none() {
            let mut labels = vec![Label::Absent; c.n_pairs];
            labels.extend(vec![Label::Present; c.n_pairs]);
            split_cases(
                &labels,
                self.readers.n_readers,
                self.readers.train_fraction,
                c.master_seed,
            )
            .map_err(|e| field("readers", e.to_string()))?;
        }
        Ok(())
    }
}

/// One CSV row: a (method, sweep point) result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: MethodKind,
    pub contrast: f64,
    pub l_max: f64,
    pub ssr: f64,
    pub viewing_distance_cm: f64,
    pub browse_speed: f64,
    pub auc: f64,
    pub auc_var: f64,
    pub error_bar: f64,
    pub d_prime: f64,
    /// Test cases scored by every reader.
    pub n_cases: usize,
    pub n_readers: usize,
    pub master_seed: u64,
}

impl ResultRow {
    pub fn value_of(&self, parameter: SweptParameter) -> f64 {
        match parameter {
            SweptParameter::Contrast => self.contrast,
            SweptParameter::LMax => self.l_max,
            SweptParameter::Ssr => self.ssr,
            SweptParameter::BrowseSpeed => self.browse_speed,
        }
    }
}

/// Streams rows to a CSV file, flushing after each so a failed run leaves
/// every completed row on disk.
pub struct CsvSink {
    writer: csv::Writer<fs::File>,
}

impl CsvSink {
    pub fn create(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let mut writer = csv::WriterBuilder::new()
            .has_headers(false)
            .from_path(path)?;
        writer.write_record(CSV_COLUMNS)?;
        writer.flush()?;
        Ok(Self { writer })
    }

    pub fn push(&mut self, row: &ResultRow) -> Result<(), ConfigError> {
        self.writer.serialize(row)?;
        self.writer.flush()?;
        Ok(())
    }
}

pub const CSV_COLUMNS: [&str; 13] = [
    "method",
    "contrast",
    "l_max",
    "ssr",
    "viewing_distance_cm",
    "browse_speed",
    "auc",
    "auc_var",
    "error_bar",
    "d_prime",
    "n_cases",
    "n_readers",
    "master_seed",
];

pub fn rows_to_csv(rows: &[ResultRow]) -> Result<String, ConfigError> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    writer.write_record(CSV_COLUMNS)?;
    for row in rows {
        writer.serialize(row)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| ConfigError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRow>, ConfigError> {
    let mut reader = csv::Reader::from_path(path)?;
    Ok(reader
        .deserialize()
        .collect::<Result<Vec<ResultRow>, _>>()?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Increasing,
    Decreasing,
    Peaked,
    Constant,
}

impl fmt::Display for Trend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Trend::Increasing => "increasing",
            Trend::Decreasing => "decreasing",
            Trend::Peaked => "peaked",
            Trend::Constant => "constant",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrendError {
    #[error("{values} values but {errors} error bars")]
    Length { values: usize, errors: usize },
    #[error("need at least three points")]
    TooShort,
    #[error("non-finite value or error bar at point {0}")]
    NonFinite(usize),
}

/// Labels a d′ curve sampled at increasing parameter values.
///
/// Two points differ significantly when their gap exceeds the combined
/// half-width `√(eᵢ² + eⱼ²)`. The curve is `peaked` if some interior point
/// rises significantly above both endpoints, `increasing` if the last point
/// is significantly above the first and no successive step falls
/// significantly, `decreasing` symmetrically, and `constant` otherwise.
pub fn classify_trend(d: &[f64], err: &[f64]) -> Result<Trend, TrendError> {
    if d.len() != err.len() {
        return Err(TrendError::Length {
            values: d.len(),
            errors: err.len(),
        });
    }
    if d.len() < 3 {
        return Err(TrendError::TooShort);
    }
    if let Some(i) =
        (0..d.len()).find(|&i| !d[i].is_finite() || !err[i].is_finite() || err[i] < 0.0)
    {
        return Err(TrendError::NonFinite(i));
    }
    let above = |i: usize, j: usize| d[i] - d[j] > err[i].hypot(err[j]);
    let last = d.len() - 1;
    if (1..last).any(|i| above(i, 0) && above(i, last)) {
        return Ok(Trend::Peaked);
    }
    if above(last, 0) && !(1..=last).any(|i| above(i - 1, i)) {
        return Ok(Trend::Increasing);
    }
    if above(0, last) && !(1..=last).any(|i| above(i, i - 1)) {
        return Ok(Trend::Decreasing);
    }
    Ok(Trend::Constant)
}

/// `d′ / max d′` with negatives floored at zero, or `None` when no point has
/// a positive finite d′.
pub fn relative_d_prime(d: &[f64]) -> Option<Vec<f64>> {
    if d.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let max = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return None;
    }
    Some(d.iter().map(|&v| v.max(0.0) / max).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodTrend {
    pub method: MethodKind,
    pub values: Vec<f64>,
    pub d_prime: Vec<f64>,
    pub d_prime_error: Vec<f64>,
    pub relative_d_prime: Option<Vec<f64>>,
    pub trend: Option<Trend>,
    /// Set when d′ saturated or was non-positive everywhere, so no trend or
    /// relative curve is reported.
    pub inconclusive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub parameter: SweptParameter,
    pub methods: Vec<MethodTrend>,
}

impl TrendReport {
    pub fn from_rows(parameter: SweptParameter, rows: &[ResultRow]) -> Self {
        let mut order: Vec<MethodKind> = Vec::new();
        for r in rows {
            if !order.contains(&r.method) {
                order.push(r.method);
            }
        }
        let methods = order
            .into_iter()
            .map(|method| {
                let mut pts: Vec<&ResultRow> = rows.iter().filter(|r| r.method == method).collect();
                pts.sort_by(|a, b| a.value_of(parameter).total_cmp(&b.value_of(parameter)));
                let d: Vec<f64> = pts.iter().map(|r| r.d_prime).collect();
                let e: Vec<f64> = pts
                    .iter()
                    .map(|r| d_prime_error_bar(r.auc, r.error_bar))
                    .collect();
                let relative = relative_d_prime(&d);
                let trend = classify_trend(&d, &e).ok();
                MethodTrend {
                    method,
                    values: pts.iter().map(|r| r.value_of(parameter)).collect(),
                    inconclusive: relative.is_none() || trend.is_none(),
                    d_prime: d,
                    d_prime_error: e,
                    relative_d_prime: relative,
                    trend,
                }
            })
            .collect();
        Self { parameter, methods }
    }

    pub fn trend_of(&self, method: MethodKind) -> Option<Trend> {
        self.methods
            .iter()
            .find(|m| m.method == method)
            .and_then(|m| m.trend)
    }
}

/// Failure of a sweep, naming the point being evaluated if there was one.
#[derive(Debug, Error)]
#[error("{}{source}", point_prefix(.point))]
pub struct SweepError {
    pub point: Option<(MethodKind, f64)>,
    #[source]
    pub source: crate::Error,
}

fn point_prefix(point: &Option<(MethodKind, f64)>) -> String {
    match point {
        Some((m, v)) => format!("{m} at {v}: "),
        None => String::new(),
    }
}

impl SweepError {
    fn setup(e: impl Into<crate::Error>) -> Self {
        Self {
            point: None,
            source: e.into(),
        }
    }

    /// JSON written next to a partial CSV.
    pub fn manifest(&self, parameter: SweptParameter, completed_rows: usize) -> serde_json::Value {
        serde_json::json!({
            "error": self.source.to_string(),
            "kind": self.source.kind(),
            "parameter": parameter.name(),
            "method": self.point.map(|(m, _)| m.to_string()),
            "value": self.point.map(|(_, v)| v),
            "completed_rows": completed_rows,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<ResultRow>,
    pub report: TrendReport,
}

/// Shared state for evaluating sweep points on one corpus.
pub struct PointEvaluator<'a> {
    corpus: &'a Corpus,
    labels: Vec<Label>,
    perceiver: Perceiver,
    channels: LgChannelSet,
    readers: ReaderConfig,
    master_seed: u64,
}

impl<'a> PointEvaluator<'a> {
    pub fn new(
        corpus: &'a Corpus,
        readers: ReaderConfig,
        barten: BartenParams,
    ) -> Result<Self, crate::Error> {
        let dims = corpus.spec.dims;
        Ok(Self {
            corpus,
            labels: corpus.labels(),
            perceiver: Perceiver::new(dims, barten)?,
            channels: LgChannelSet::new(
                dims.nx,
                dims.ny,
                readers.cho.n_channels,
                readers.cho.spread,
            )?,
            readers,
            master_seed: corpus.spec.master_seed,
        })
    }

    /// Channel features of case `i` as perceived by `reader` (the reader only
    /// matters for MC, which draws an independent perception per reader).
    pub fn features(
        &self,
        method: MethodKind,
        vc: &ViewingConditions,
        reader: usize,
        i: usize,
    ) -> Result<StackFeatures, crate::Error> {
        let displayed = normalize_to_display(&self.corpus.cases[i], vc)?;
        let seed = derive_seed(
            self.master_seed,
            stream::MC_PERCEPTION,
            (reader * self.labels.len() + i) as u64,
        );
        let perceived = self
            .perceiver
            .perceive(&displayed, method.with_seed(seed), vc)?;
        Ok(self.channels.stack_features(&perceived)?)
    }

    pub fn evaluate(
        &self,
        method: MethodKind,
        vc: &ViewingConditions,
    ) -> Result<McmcResult, crate::Error> {
        let rc = &self.readers;
        let split = split_cases(
            &self.labels,
            rc.n_readers,
            rc.train_fraction,
            self.master_seed,
        )?;
        let per_reader = method.is_stochastic();
        let mut needed: BTreeSet<(usize, usize)> = BTreeSet::new();
        for (r, train) in split.train.iter().enumerate() {
            let slot = if per_reader { r } else { 0 };
            needed.extend(train.iter().chain(&split.test).map(|&i| (slot, i)));
        }
        let needed: Vec<(usize, usize)> = needed.into_iter().collect();
        let computed = needed
            .par_iter()
            .map(|&(slot, i)| self.features(method, vc, slot, i))
            .collect::<Result<Vec<_>, crate::Error>>()?;
        let table: HashMap<(usize, usize), StackFeatures> =
            needed.into_iter().zip(computed).collect();

        let readers = make_readers(&self.labels, rc, self.master_seed, |r, i| {
            let slot = if per_reader { r } else { 0 };
            Ok::<_, crate::Error>(table[&(slot, i)].clone())
        })?;
        let input = McmcInput::new(readers.into_iter().map(|r| r.scores).collect())?;
        Ok(mrmc_one_shot(&input)?)
    }
}

/// Runs a sweep on an existing corpus, calling `on_row` as each row
/// completes (in output order).
pub fn run_sweep_on(
    config: &SweepConfig,
    corpus: &Corpus,
    mut on_row: impl FnMut(&ResultRow) -> Result<(), ConfigError>,
) -> Result<SweepOutput, SweepError> {
    config.validate().map_err(SweepError::setup)?;
    let evaluator =
        PointEvaluator::new(corpus, config.readers, config.barten).map_err(SweepError::setup)?;
    let mut rows = Vec::new();
    for &method in &config.methods {
        for &value in &config.sweep.values {
            let at = |e: crate::Error| SweepError {
                point: Some((method, value)),
                source: e,
            };
            let vc = config.sweep.parameter.apply(config.viewing, value);
            let result = evaluator.evaluate(method, &vc).map_err(at)?;
            let row = ResultRow {
                method,
                contrast: vc.contrast,
                l_max: vc.l_max,
                ssr: vc.ssr,
                viewing_distance_cm: config
                    .display
                    .viewing_distance(vc.ssr)
                    .map_err(|e| at(e.into()))?,
                browse_speed: vc.browse_speed,
                auc: result.auc_mean,
                auc_var: result.auc_variance,
                error_bar: result.error_bar,
                d_prime: result.d_prime,
                n_cases: result.n_absent + result.n_present,
                n_readers: result.n_readers,
                master_seed: corpus.spec.master_seed,
            };
            on_row(&row).map_err(|e| at(e.into()))?;
            rows.push(row);
        }
    }
    let report = TrendReport::from_rows(config.sweep.parameter, &rows);
    Ok(SweepOutput { rows, report })
}

/// Loads or generates the corpus named by `config`.
pub fn corpus_for(config: &SweepConfig) -> Result<Corpus, crate::Error> {
    match &config.corpus_manifest {
        Some(path) => Ok(Corpus::load(path)?),
        None => Ok(Corpus::generate(config.corpus)?),
    }
}

/// Full run: corpus, then every sweep point, on a pool of `threads` workers
/// (rayon's default when `None`).
pub fn run_sweep(
    config: &SweepConfig,
    threads: Option<usize>,
    on_row: impl FnMut(&ResultRow) -> Result<(), ConfigError> + Send,
) -> Result<SweepOutput, SweepError> {
    config.validate().map_err(SweepError::setup)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(SweepError::setup(field("threads", "must be >= 1")));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| SweepError::setup(field("threads", e.to_string())))?;
    pool.install(|| {
        let corpus = corpus_for(config).map_err(SweepError::setup)?;
        run_sweep_on(config, &corpus, on_row)
    })
}

/// Writes `rows` and, on failure, an error manifest at `<out>.error.json`.
pub fn write_error_manifest(
    out: &Path,
    error: &SweepError,
    parameter: SweptParameter,
    completed: usize,
) -> std::io::Result<PathBuf> {
    let mut path = out.as_os_str().to_owned();
    path.push(".error.json");
    let path = PathBuf::from(path);
    let mut f = fs::File::create(&path)?;
    writeln!(
        f,
        "{}",
        serde_json::to_string_pretty(&error.manifest(parameter, completed))?
    )?;
    Ok(path)
}
