//! End-to-end protocol: clean, stationarize, train, forecast the test span,
//! invert and evaluate. Every stage leaves a file behind.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, StageExt};
use crate::evaluation::{
    compare_models, confidence_interval, metrics, monthly_aggregate_error, seasonal_breakdown, write_ci_csv,
    write_comparison_csv, write_metrics_csv, write_monthly_csv, write_seasonal_csv, ComparisonRow, ForecastRun,
    MetricsReport,
};
use crate::forecast::{fit, forecast_span, Hyperparameters, Model, ModelKind, ModelSpec};
use crate::mlp::TrainHistory;
use crate::model_io::{write_factors_csv, write_model};
use crate::preprocess::{Preprocessor, DEFAULT_HALF_WIDTH};
use crate::series::{clean, generate_synthetic, load_csv, write_csv, CsvSchema, DailySeries, DayIndex, SynthConfig};
use crate::solar::{h0_table, SiteSpec, SOLAR_CONSTANT};

/// Overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "SOLARCAST_OUT_DIR";

/// Inclusive range of calendar years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearSpan {
    pub first: i32,
    pub last: i32,
}

impl YearSpan {
    pub fn new(first: i32, last: i32) -> Self {
        YearSpan { first, last }
    }

    pub fn first_day(self) -> DayIndex {
        DayIndex::from_ymd(self.first, 1, 1).expect("January 1st exists")
    }

    pub fn last_day(self) -> DayIndex {
        DayIndex::from_ymd(self.last, 12, 31).expect("December 31st exists")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Daily GHI CSV; a synthetic series is generated when absent.
    pub input: Option<PathBuf>,
    pub synth: SynthConfig,
    pub latitude_deg: f64,
    pub solar_constant: f64,
    pub train: YearSpan,
    pub test: YearSpan,
    pub model: ModelKind,
    pub hyper: Hyperparameters,
    pub preprocess: bool,
    pub half_width: usize,
    /// MLP restart seeds; other models run once.
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: None,
            synth: SynthConfig::default(),
            latitude_deg: 41.917,
            solar_constant: SOLAR_CONSTANT,
            train: YearSpan::new(1971, 1987),
            test: YearSpan::new(1988, 1989),
            model: ModelKind::Mlp,
            hyper: Hyperparameters::default(),
            preprocess: true,
            half_width: DEFAULT_HALF_WIDTH,
            seeds: (0..10).collect(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn site(&self) -> Result<SiteSpec> {
        SiteSpec::with_solar_constant(self.latitude_deg.to_radians(), self.solar_constant)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for (name, span) in [("train", self.train), ("test", self.test)] {
            if span.first > span.last {
                return bad(format!("{name} span {}..{} is empty", span.first, span.last));
            }
        }
        if self.test.first <= self.train.last {
            return bad(format!(
                "test span {}..{} must start after train span {}..{}",
                self.test.first, self.test.last, self.train.first, self.train.last
            ));
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        if self.half_width == 0 {
            return bad("half_width must be positive".into());
        }
        if self.input.is_none() {
            self.synth.validate()?;
        }
        self.site()?;
        self.hyper.validate()
    }

    /// Seeds that produce distinct runs for the configured model.
    pub fn effective_seeds(&self) -> Vec<u64> {
        if self.model == ModelKind::Mlp {
            self.seeds.clone()
        } else {
            vec![self.seeds[0]]
        }
    }

    pub fn model_id(&self) -> String {
        arm_id(self.model, self.preprocess)
    }
}

/// `ar-raw`, `mlp-pre`, ...
pub fn arm_id(kind: ModelKind, preprocess: bool) -> String {
    format!("{kind}-{}", if preprocess { "pre" } else { "raw" })
}

/// One fitted model and its test-span forecast.
#[derive(Debug, Clone)]
pub struct ArmResult {
    pub seed: u64,
    pub model: Model,
    pub history: Option<TrainHistory>,
    pub predictions: DailySeries,
    pub run: ForecastRun,
    pub metrics: MetricsReport,
}

/// Loads or generates the input and cleans it.
pub fn prepare_input(cfg: &PipelineConfig) -> Result<(DailySeries, crate::series::CleaningReport)> {
    let raw = match &cfg.input {
        Some(path) => {
            let file = File::open(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            load_csv(file, &CsvSchema::ghi()).stage("load")?
        }
        None => generate_synthetic(&cfg.synth).stage("synth")?,
    };
    let needed_from = cfg.train.first_day();
    let needed_to = cfg.test.last_day();
    if raw.start() > needed_from || raw.end() < needed_to {
        return Err(Error::Config(format!(
            "data covers {}..{} but the spans need {needed_from}..{needed_to}",
            raw.start(),
            raw.end()
        )));
    }
    let h0 = h0_table(&cfg.site()?);
    clean(&raw, &h0).stage("clean")
}

/// Fits the stationarization on the train span when enabled.
pub fn fit_preprocessor(cfg: &PipelineConfig, cleaned: &DailySeries) -> Result<Option<Preprocessor>> {
    if !cfg.preprocess {
        return Ok(None);
    }
    let train = cleaned.years(cfg.train.first, cfg.train.last)?;
    Preprocessor::fit_with_half_width(&train, cfg.site()?, cfg.half_width)
        .stage("preprocess")
        .map(Some)
}

/// Fits one model per seed on the train span and forecasts the test span.
/// Seeds train concurrently; results keep seed order.
pub fn run_arm(
    cfg: &PipelineConfig,
    kind: ModelKind,
    cleaned: &DailySeries,
    preprocessor: Option<&Preprocessor>,
    seeds: &[u64],
) -> Result<Vec<ArmResult>> {
    let model_space = match preprocessor {
        Some(p) => p.apply(cleaned).stage("preprocess")?,
        None => cleaned.clone(),
    };
    let train = model_space.years(cfg.train.first, cfg.train.last)?;
    let measured_test = cleaned.years(cfg.test.first, cfg.test.last)?;
    let id = arm_id(kind, preprocessor.is_some());
    seeds
        .par_iter()
        .map(|&seed| {
            let spec = ModelSpec {
                kind,
                hyper: cfg.hyper.clone(),
                seed,
            };
            let (model, history) = fit(&spec, &train).stage("train")?;
            let predictions = forecast_span(
                &model,
                preprocessor,
                cleaned,
                measured_test.start(),
                measured_test.end(),
            )
            .stage("forecast")?;
            let seed_tag = (kind == ModelKind::Mlp).then_some(seed);
            let run = ForecastRun::from_series(id.clone(), seed_tag, &measured_test, &predictions).stage("evaluate")?;
            let metrics = metrics(&run).stage("evaluate")?;
            if let Some(h) = &history {
                info!(
                    "{id} seed {seed}: {} epochs, stop {}, nRMSE {:.4}",
                    h.epochs.len(),
                    h.stop_reason.as_str(),
                    metrics.nrmse
                );
            }
            Ok(ArmResult {
                seed,
                model,
                history,
                predictions,
                run,
                metrics,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub output_dir: PathBuf,
    pub cleaned: DailySeries,
    pub replaced_days: usize,
    pub preprocessor: Option<Preprocessor>,
    pub results: Vec<ArmResult>,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Runs the full protocol for the configured model, writing every artifact
/// into the output directory as soon as it exists.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir)?;

    let (cleaned, report) = prepare_input(cfg)?;
    info!("cleaning replaced {} days", report.replaced.len());
    write_csv(&cleaned, create(&dir, "cleaned.csv")?, &CsvSchema::ghi())?;

    let preprocessor = fit_preprocessor(cfg, &cleaned)?;
    let model_space = match &preprocessor {
        Some(p) => {
            write_factors_csv(p.factors(), create(&dir, "factors.csv")?)?;
            p.apply(&cleaned).stage("preprocess")?
        }
        None => cleaned.clone(),
    };
    let schema = if preprocessor.is_some() {
        CsvSchema::dimensionless("s_corr")
    } else {
        CsvSchema::ghi()
    };
    write_csv(&model_space, create(&dir, "corrected.csv")?, &schema)?;

    let seeds = cfg.effective_seeds();
    let results = run_arm(cfg, cfg.model, &cleaned, preprocessor.as_ref(), &seeds)?;
    let multi = results.len() > 1;
    for r in &results {
        let suffix = if multi {
            format!("_seed{}", r.seed)
        } else {
            String::new()
        };
        write_model(
            &r.model,
            preprocessor.as_ref(),
            create(&dir, &format!("model{suffix}.txt"))?,
        )?;
        if multi {
            write_csv(
                &r.predictions,
                create(&dir, &format!("predictions{suffix}.csv"))?,
                &CsvSchema::prediction(),
            )?;
        }
    }
    write_csv(
        &results[0].predictions,
        create(&dir, "predictions.csv")?,
        &CsvSchema::prediction(),
    )?;

    let runs: Vec<ForecastRun> = results.iter().map(|r| r.run.clone()).collect();
    write_evaluation(&dir, &runs)?;
    Ok(PipelineOutcome {
        output_dir: dir,
        cleaned,
        replaced_days: report.replaced.len(),
        preprocessor,
        results,
    })
}

fn run_label(run: &ForecastRun) -> String {
    match run.seed() {
        Some(s) => format!("{}#{s}", run.model_id()),
        None => run.model_id().to_string(),
    }
}

/// Writes `metrics.csv`, `seasonal.csv` and `monthly.csv` with one block per
/// run, plus `ci.csv` for every model id that has at least two runs.
pub fn write_evaluation(dir: &Path, runs: &[ForecastRun]) -> Result<()> {
    let rows = runs
        .iter()
        .map(|r| Ok((run_label(r), metrics(r)?)))
        .collect::<Result<Vec<_>>>()
        .stage("evaluate")?;
    write_metrics_csv(&rows, create(dir, "metrics.csv")?)?;
    let seasonal = runs
        .iter()
        .map(|r| Ok((run_label(r), seasonal_breakdown(r)?)))
        .collect::<Result<Vec<_>>>()
        .stage("evaluate")?;
    write_seasonal_csv(&seasonal, create(dir, "seasonal.csv")?)?;
    let monthly = runs
        .iter()
        .map(|r| Ok((run_label(r), monthly_aggregate_error(r)?)))
        .collect::<Result<Vec<_>>>()
        .stage("evaluate")?;
    write_monthly_csv(&monthly, create(dir, "monthly.csv")?)?;

    let mut ids: Vec<&str> = Vec::new();
    for r in runs {
        if !ids.contains(&r.model_id()) {
            ids.push(r.model_id());
        }
    }
    let mut ci_rows = Vec::new();
    for id in ids {
        let reports: Vec<MetricsReport> = rows
            .iter()
            .zip(runs)
            .filter(|(_, r)| r.model_id() == id)
            .map(|((_, m), _)| *m)
            .collect();
        if reports.len() >= 2 {
            ci_rows.push((id.to_string(), confidence_interval(&reports).stage("evaluate")?));
        }
    }
    if !ci_rows.is_empty() {
        write_ci_csv(&ci_rows, create(dir, "ci.csv")?)?;
    }
    Ok(())
}

/// The reference comparison: every baseline plus both MLP arms.
pub const TABLE1_ARMS: [(ModelKind, bool); 8] = [
    (ModelKind::Naive, false),
    (ModelKind::Markov, false),
    (ModelKind::Bayes, false),
    (ModelKind::Knn, false),
    (ModelKind::Ar, false),
    (ModelKind::Arma, true),
    (ModelKind::Mlp, false),
    (ModelKind::Mlp, true),
];

/// Runs each `(model, preprocess)` arm on the same cleaned data and returns
/// one comparison row per arm. MLP arms train once per configured seed and
/// report the mean over those restarts.
pub fn run_comparison(cfg: &PipelineConfig, arms: &[(ModelKind, bool)]) -> Result<Vec<ComparisonRow>> {
    cfg.validate()?;
    let (cleaned, _) = prepare_input(cfg)?;
    let with = PipelineConfig {
        preprocess: true,
        ..cfg.clone()
    };
    let preprocessor = fit_preprocessor(&with, &cleaned)?;
    let mut runs = Vec::new();
    for &(kind, pre) in arms {
        let p = if pre { preprocessor.as_ref() } else { None };
        let arm_cfg = PipelineConfig {
            model: kind,
            ..cfg.clone()
        };
        let results = run_arm(cfg, kind, &cleaned, p, &arm_cfg.effective_seeds())?;
        runs.extend(results.into_iter().map(|r| r.run));
    }
    compare_models(&runs).stage("compare")
}

pub fn write_comparison(rows: &[ComparisonRow], path: &Path) -> Result<()> {
    write_comparison_csv(rows, BufWriter::new(File::create(path)?))
}
