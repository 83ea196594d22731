//! `solarcast`: every forecasting stage as a subcommand that reads and writes
//! plain files, plus `run` for the whole chain.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error, 3 numerical
//! failure.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use solarcast::evaluation::{compare_models, metrics, write_comparison_csv, ForecastRun};
use solarcast::forecast::{fit, forecast_span, ModelKind, ModelSpec};
use solarcast::model_io::{read_factors_csv, read_model, write_factors_csv, write_model};
use solarcast::pipeline::{
    fit_preprocessor, run_comparison, run_pipeline, write_comparison, write_evaluation, PipelineConfig, OUT_DIR_ENV,
    TABLE1_ARMS,
};
use solarcast::preprocess::{clearness_index, Preprocessor, DEFAULT_HALF_WIDTH};
use solarcast::series::{
    clean, generate_synthetic, load_csv, write_csv, CsvSchema, DailySeries, DayIndex, SynthConfig,
};
use solarcast::solar::{h0_table, SiteSpec, SOLAR_CONSTANT};
use solarcast::spectral::{fisher_g_test, periodogram};
use solarcast::{Error, ErrorClass};

#[derive(Parser)]
#[command(name = "solarcast", version, about = "Daily global solar irradiation forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic daily GHI series.
    Synth(SynthArgs),
    /// Replace atypical days (negative or above H0) by same-day means of other years.
    Clean(CleanArgs),
    /// Dump the 365 daily extraterrestrial irradiation values.
    H0Table(H0Args),
    /// Fit seasonal factors and write the corrected series and factors.csv.
    Preprocess(PreprocessArgs),
    /// Periodogram as `period_days,power`; Fisher's g and p go to stderr.
    Spectrum(SpectrumArgs),
    /// Fit one model on the train span and save it.
    Train(TrainArgs),
    /// One-step forecasts in Wh/m² from a saved model and a measured history.
    Predict(PredictArgs),
    /// Turn model-space (corrected) values back into Wh/m².
    Invert(InvertArgs),
    /// Metrics, seasonal and monthly breakdowns for prediction files.
    Evaluate(EvaluateArgs),
    /// Normalized RMSE per model, one row per model.
    Compare(CompareArgs),
    /// Run the whole chain: clean, preprocess, train, forecast, invert, evaluate.
    Run(RunArgs),
}

#[derive(Args)]
struct SiteArgs {
    /// Site latitude in degrees, north positive.
    #[arg(long, allow_hyphen_values = true, default_value_t = 41.917)]
    latitude: f64,
    /// Solar constant in W/m².
    #[arg(long, default_value_t = SOLAR_CONSTANT)]
    solar_constant: f64,
}

impl SiteArgs {
    fn site(&self) -> solarcast::Result<SiteSpec> {
        SiteSpec::with_solar_constant(self.latitude.to_radians(), self.solar_constant)
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    years: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    start_year: Option<i32>,
    #[arg(long, allow_hyphen_values = true)]
    latitude: Option<f64>,
    /// Mean clearness index.
    #[arg(long)]
    clearness: Option<f64>,
    /// Amplitude of the annual clearness modulation.
    #[arg(long)]
    amplitude: Option<f64>,
    /// AR(1) coefficient of the cloud noise.
    #[arg(long)]
    ar_coeff: Option<f64>,
    /// Innovation standard deviation of the cloud noise.
    #[arg(long)]
    noise_std: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CleanArgs {
    input: PathBuf,
    #[command(flatten)]
    site: SiteArgs,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct H0Args {
    #[command(flatten)]
    site: SiteArgs,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PreprocessArgs {
    /// Cleaned GHI series.
    input: PathBuf,
    #[command(flatten)]
    site: SiteArgs,
    /// First year used to fit the factors; defaults to the first year of the input.
    #[arg(long)]
    fit_from: Option<i32>,
    /// Last year used to fit the factors; defaults to the last year of the input.
    #[arg(long)]
    fit_to: Option<i32>,
    #[arg(long, default_value_t = DEFAULT_HALF_WIDTH)]
    half_width: usize,
    /// Directory for corrected.csv and factors.csv.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SpectrumArgs {
    /// Any `date,value` series without gaps.
    input: PathBuf,
    /// Divide by H0 first, giving the clearness-index spectrum.
    #[arg(long)]
    clearness: bool,
    #[command(flatten)]
    site: SiteArgs,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// Settings shared by `train` and `run`: a TOML config file overridden by flags.
#[derive(Args)]
struct Settings {
    /// TOML pipeline configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    latitude: Option<f64>,
    #[arg(long)]
    model: Option<ModelKind>,
    /// Stationarize before fitting (the default).
    #[arg(long, overrides_with = "no_preprocess")]
    preprocess: bool,
    /// Fit on raw Wh/m².
    #[arg(long, overrides_with = "preprocess")]
    no_preprocess: bool,
    #[arg(long)]
    train_from: Option<i32>,
    #[arg(long)]
    train_to: Option<i32>,
    #[arg(long)]
    test_from: Option<i32>,
    #[arg(long)]
    test_to: Option<i32>,
    #[arg(long)]
    half_width: Option<usize>,
    /// MLP initialization seeds, comma separated.
    #[arg(long, alias = "seed", value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    ar_order: Option<usize>,
    #[arg(long)]
    arma_p: Option<usize>,
    #[arg(long)]
    arma_q: Option<usize>,
    /// Classes of the Markov and Bayes discretizer.
    #[arg(long)]
    classes: Option<usize>,
    /// Context length of the Markov and Bayes models.
    #[arg(long)]
    chain_order: Option<usize>,
    #[arg(long)]
    knn_k: Option<usize>,
    #[arg(long)]
    knn_window: Option<usize>,
    /// MLP layer sizes, comma separated, inputs first.
    #[arg(long, value_delimiter = ',')]
    layout: Option<Vec<usize>>,
    /// Maximum Levenberg-Marquardt epochs.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    max_fail: Option<usize>,
    #[arg(long)]
    val_fraction: Option<f64>,
    /// Output directory; overrides $SOLARCAST_OUT_DIR and the config file.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl Settings {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        set(&mut cfg.latitude_deg, self.latitude);
        set(&mut cfg.model, self.model);
        if self.no_preprocess {
            cfg.preprocess = false;
        } else if self.preprocess {
            cfg.preprocess = true;
        }
        set(&mut cfg.train.first, self.train_from);
        set(&mut cfg.train.last, self.train_to);
        set(&mut cfg.test.first, self.test_from);
        set(&mut cfg.test.last, self.test_to);
        set(&mut cfg.half_width, self.half_width);
        set(&mut cfg.seeds, self.seeds.clone());
        let h = &mut cfg.hyper;
        set(&mut h.ar_order, self.ar_order);
        set(&mut h.arma_p, self.arma_p);
        set(&mut h.arma_q, self.arma_q);
        set(&mut h.classes, self.classes);
        set(&mut h.chain_order, self.chain_order);
        set(&mut h.knn.k, self.knn_k);
        set(&mut h.knn.window, self.knn_window);
        set(&mut h.mlp_layout, self.layout.clone());
        set(&mut h.lm.max_epochs, self.epochs);
        set(&mut h.lm.max_fail, self.max_fail);
        set(&mut h.lm.val_fraction, self.val_fraction);
        cfg.output_dir = out_dir(self.out_dir.clone(), cfg.output_dir);
        Ok(cfg)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Flag, then `$SOLARCAST_OUT_DIR`, then `fallback`.
fn out_dir(flag: Option<PathBuf>, fallback: PathBuf) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or(fallback)
}

#[derive(Args)]
struct TrainArgs {
    /// Cleaned GHI series covering the train span.
    input: PathBuf,
    #[command(flatten)]
    settings: Settings,
    /// Model file to write.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Model file written by `train`.
    model: PathBuf,
    /// Cleaned GHI series; only days before each forecast day are read.
    history: PathBuf,
    /// First forecast day, YYYY-MM-DD.
    #[arg(long)]
    from: DayIndex,
    /// Last forecast day, YYYY-MM-DD.
    #[arg(long)]
    to: DayIndex,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct InvertArgs {
    /// Corrected (dimensionless) series.
    input: PathBuf,
    /// factors.csv written by `preprocess`.
    #[arg(long)]
    factors: PathBuf,
    #[command(flatten)]
    site: SiteArgs,
    #[arg(long, default_value_t = DEFAULT_HALF_WIDTH)]
    half_width: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Measured (cleaned) GHI series.
    #[arg(long)]
    measured: PathBuf,
    /// Prediction files; a `_seedN` stem suffix marks restarts of one model.
    #[arg(required = true)]
    predicted: Vec<PathBuf>,
    /// Model id for every file instead of the file stem.
    #[arg(long)]
    model_id: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    measured: PathBuf,
    #[arg(required = true)]
    predicted: Vec<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// GHI CSV; a synthetic series from the config is used when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
    /// Also run every baseline arm and write table1.csv.
    #[arg(long)]
    compare: bool,
}

fn open(path: &Path) -> solarcast::Result<File> {
    File::open(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn read_series(path: &Path, schema: &CsvSchema) -> Result<DailySeries> {
    load_csv(open(path)?, schema).with_context(|| format!("reading {}", path.display()))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            let file = File::create(p)
                .map_err(Error::from)
                .with_context(|| format!("creating {}", p.display()))?;
            Box::new(BufWriter::new(file))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn synth(args: SynthArgs) -> Result<()> {
    let mut cfg = SynthConfig::default();
    set(&mut cfg.n_years, args.years);
    set(&mut cfg.seed, args.seed);
    set(&mut cfg.start_year, args.start_year);
    set(&mut cfg.latitude_deg, args.latitude);
    set(&mut cfg.clear_sky_fraction_mean, args.clearness);
    set(&mut cfg.modulation_amplitude, args.amplitude);
    set(&mut cfg.ar_coeff, args.ar_coeff);
    set(&mut cfg.noise_std, args.noise_std);
    let series = generate_synthetic(&cfg)?;
    let mut out = sink(args.output.as_deref())?;
    write_csv(&series, &mut out, &CsvSchema::ghi())?;
    Ok(out.flush()?)
}

fn clean_cmd(args: CleanArgs) -> Result<()> {
    let raw = read_series(&args.input, &CsvSchema::ghi())?;
    let (cleaned, report) = clean(&raw, &h0_table(&args.site.site()?))?;
    info!("replaced {} atypical or missing days", report.replaced.len());
    let mut out = sink(args.output.as_deref())?;
    write_csv(&cleaned, &mut out, &CsvSchema::ghi())?;
    Ok(out.flush()?)
}

fn h0_cmd(args: H0Args) -> Result<()> {
    let table = h0_table(&args.site.site()?);
    let mut out = sink(args.output.as_deref())?;
    writeln!(out, "day,h0_wh_m2")?;
    for (i, v) in table.as_slice().iter().enumerate() {
        writeln!(out, "{},{v}", i + 1)?;
    }
    Ok(out.flush()?)
}

fn preprocess_cmd(args: PreprocessArgs) -> Result<()> {
    let series = read_series(&args.input, &CsvSchema::ghi())?;
    let first = args.fit_from.unwrap_or(series.start().year());
    let last = args.fit_to.unwrap_or(series.end().year());
    let train = series.years(first, last)?;
    let pre = Preprocessor::fit_with_half_width(&train, args.site.site()?, args.half_width)?;
    let dir = out_dir(args.out_dir, PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    let corrected = pre.apply(&series)?;
    let mut out = sink(Some(&dir.join("corrected.csv")))?;
    write_csv(&corrected, &mut out, &CsvSchema::dimensionless("s_corr"))?;
    out.flush()?;
    let mut out = sink(Some(&dir.join("factors.csv")))?;
    write_factors_csv(pre.factors(), &mut out)?;
    out.flush()?;
    info!("factors fitted on {first}..{last}, written to {}", dir.display());
    Ok(())
}

fn spectrum_cmd(args: SpectrumArgs) -> Result<()> {
    let mut series = read_series(&args.input, &CsvSchema::any())?;
    if args.clearness {
        series = clearness_index(&series, &h0_table(&args.site.site()?))?.into_series();
    }
    let p = periodogram(&series.dense()?)?;
    let fisher = fisher_g_test(&p)?;
    eprintln!(
        "fisher g = {:.6}, p = {:.6e}, peak period = {:.2} days",
        fisher.g, fisher.p_value, fisher.peak_period
    );
    let mut out = sink(args.output.as_deref())?;
    writeln!(out, "period_days,power")?;
    for (period, power) in p.period_rows() {
        writeln!(out, "{period},{power}")?;
    }
    Ok(out.flush()?)
}

fn train_cmd(args: TrainArgs) -> Result<()> {
    let cfg = args.settings.resolve()?;
    cfg.validate()?;
    let cleaned = read_series(&args.input, &CsvSchema::ghi())?;
    let pre = fit_preprocessor(&cfg, &cleaned)?;
    let model_space = match &pre {
        Some(p) => p.apply(&cleaned)?,
        None => cleaned,
    };
    let train = model_space.years(cfg.train.first, cfg.train.last)?;
    let spec = ModelSpec {
        kind: cfg.model,
        hyper: cfg.hyper.clone(),
        seed: cfg.seeds[0],
    };
    let (model, history) = fit(&spec, &train)?;
    if let Some(h) = history {
        info!(
            "{} epochs, stopped on {}, train MSE {:.6e}, best validation MSE {:?}",
            h.epochs.len(),
            h.stop_reason.as_str(),
            h.final_train_mse(),
            h.best_val_mse()
        );
    }
    let mut out = sink(Some(&args.output))?;
    write_model(&model, pre.as_ref(), &mut out)?;
    Ok(out.flush()?)
}

fn predict_cmd(args: PredictArgs) -> Result<()> {
    let (model, pre) = read_model(open(&args.model)?).with_context(|| format!("reading {}", args.model.display()))?;
    let history = read_series(&args.history, &CsvSchema::ghi())?;
    let predictions = forecast_span(&model, pre.as_ref(), &history, args.from, args.to)?;
    let mut out = sink(args.output.as_deref())?;
    write_csv(&predictions, &mut out, &CsvSchema::prediction())?;
    Ok(out.flush()?)
}

fn invert_cmd(args: InvertArgs) -> Result<()> {
    let factors = read_factors_csv(open(&args.factors)?, args.half_width)
        .with_context(|| format!("reading {}", args.factors.display()))?;
    let pre = Preprocessor::from_parts(args.site.site()?, factors);
    let corrected = read_series(&args.input, &CsvSchema::any())?;
    let wh = pre.invert(&corrected)?.with_label("ghi_pred_wh_m2");
    let mut out = sink(args.output.as_deref())?;
    write_csv(&wh, &mut out, &CsvSchema::prediction())?;
    Ok(out.flush()?)
}

/// `mlp-pre_seed3` → (`mlp-pre`, Some(3)).
fn id_from_stem(path: &Path) -> (String, Option<u64>) {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    if let Some((id, seed)) = stem.rsplit_once("_seed") {
        if let Ok(seed) = seed.parse() {
            return (id.to_string(), Some(seed));
        }
    }
    (stem, None)
}

fn load_runs(measured: &Path, predicted: &[PathBuf], model_id: Option<&str>) -> Result<Vec<ForecastRun>> {
    let measured = read_series(measured, &CsvSchema::ghi())?;
    predicted
        .iter()
        .map(|path| {
            let (stem_id, seed) = id_from_stem(path);
            let id = model_id.map_or(stem_id, str::to_string);
            let series = read_series(path, &CsvSchema::any())?;
            ForecastRun::from_series(id, seed, &measured, &series)
                .with_context(|| format!("pairing {}", path.display()))
        })
        .collect()
}

fn evaluate_cmd(args: EvaluateArgs) -> Result<()> {
    let runs = load_runs(&args.measured, &args.predicted, args.model_id.as_deref())?;
    let dir = out_dir(args.out_dir, PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    write_evaluation(&dir, &runs)?;
    write_comparison(&compare_models(&runs)?, &dir.join("table1.csv"))?;
    for run in &runs {
        let m = metrics(run)?;
        info!(
            "{}: nRMSE {:.4}%, RMSE {:.2} Wh/m², MBE {:.2} Wh/m²",
            run.model_id(),
            100.0 * m.nrmse,
            m.rmse,
            m.mbe
        );
    }
    Ok(())
}

fn compare_cmd(args: CompareArgs) -> Result<()> {
    let runs = load_runs(&args.measured, &args.predicted, None)?;
    let mut out = sink(args.output.as_deref())?;
    write_comparison_csv(&compare_models(&runs)?, &mut out)?;
    Ok(out.flush()?)
}

fn run_cmd(args: RunArgs) -> Result<()> {
    let mut cfg = args.settings.resolve()?;
    if args.input.is_some() {
        cfg.input = args.input;
    }
    let outcome = run_pipeline(&cfg)?;
    for r in &outcome.results {
        info!(
            "{} seed {}: nRMSE {:.4}%, RMSE {:.2} Wh/m²",
            r.run.model_id(),
            r.seed,
            100.0 * r.metrics.nrmse,
            r.metrics.rmse
        );
    }
    if args.compare {
        let rows = run_comparison(&cfg, &TABLE1_ARMS)?;
        write_comparison(&rows, &outcome.output_dir.join("table1.csv"))?;
    }
    info!("artifacts in {}", outcome.output_dir.display());
    Ok(())
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Clean(a) => clean_cmd(a),
        Command::H0Table(a) => h0_cmd(a),
        Command::Preprocess(a) => preprocess_cmd(a),
        Command::Spectrum(a) => spectrum_cmd(a),
        Command::Train(a) => train_cmd(a),
        Command::Predict(a) => predict_cmd(a),
        Command::Invert(a) => invert_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Compare(a) => compare_cmd(a),
        Command::Run(a) => run_cmd(a),
    }
}

fn exit_class(err: &anyhow::Error) -> ErrorClass {
    err.chain()
        .find_map(|e| e.downcast_ref::<Error>())
        .map_or(ErrorClass::Data, Error::class)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(ErrorClass::Config.exit_code() as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_class(&e).exit_code() as u8)
        }
    }
}
