//! Forecast verification: RMSE, normalized RMSE, mean bias, squared
//! correlation, seasonal and monthly breakdowns, and multi-run intervals.

use std::collections::BTreeMap;
use std::io::Write;

use log::warn;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::series::{DailySeries, DayIndex};

/// Aligned measured and predicted values for one model run.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRun {
    model_id: String,
    seed: Option<u64>,
    days: Vec<DayIndex>,
    measured: Vec<f64>,
    predicted: Vec<f64>,
}

impl ForecastRun {
    pub fn new(
        model_id: impl Into<String>,
        seed: Option<u64>,
        days: Vec<DayIndex>,
        measured: Vec<f64>,
        predicted: Vec<f64>,
    ) -> Result<Self> {
        if measured.len() != days.len() || predicted.len() != days.len() {
            return Err(Error::MismatchedRuns(format!(
                "{} days, {} measured, {} predicted",
                days.len(),
                measured.len(),
                predicted.len()
            )));
        }
        if days.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSeries("run days must be strictly increasing".into()));
        }
        if let Some((d, m)) = days.iter().zip(&measured).find(|(_, m)| !(m.is_finite() && **m >= 0.0)) {
            return Err(Error::InvalidSeries(format!("measured value {m} on {d}")));
        }
        if let Some((d, p)) = days.iter().zip(&predicted).find(|(_, p)| !p.is_finite()) {
            return Err(Error::NonFinite(format!("predicted value {p} on {d}")));
        }
        Ok(ForecastRun {
            model_id: model_id.into(),
            seed,
            days,
            measured,
            predicted,
        })
    }

    /// Pairs the days where both series have a value.
    pub fn from_series(
        model_id: impl Into<String>,
        seed: Option<u64>,
        measured: &DailySeries,
        predicted: &DailySeries,
    ) -> Result<Self> {
        let (mut days, mut m, mut p) = (Vec::new(), Vec::new(), Vec::new());
        for (day, pv) in predicted.days().zip(predicted.values()) {
            let Some(pv) = pv else { continue };
            if let Some(mv) = measured.index_of(day).and_then(|i| measured.value(i)) {
                days.push(day);
                m.push(mv);
                p.push(*pv);
            }
        }
        if days.is_empty() {
            return Err(Error::MismatchedRuns(
                "measured and predicted series share no days".into(),
            ));
        }
        ForecastRun::new(model_id, seed, days, m, p)
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn days(&self) -> &[DayIndex] {
        &self.days
    }

    pub fn measured(&self) -> &[f64] {
        &self.measured
    }

    pub fn predicted(&self) -> &[f64] {
        &self.predicted
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    /// The sub-run of days satisfying `keep`.
    pub fn filter(&self, keep: impl Fn(DayIndex) -> bool) -> ForecastRun {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(self.days[i])).collect();
        ForecastRun {
            model_id: self.model_id.clone(),
            seed: self.seed,
            days: idx.iter().map(|&i| self.days[i]).collect(),
            measured: idx.iter().map(|&i| self.measured[i]).collect(),
            predicted: idx.iter().map(|&i| self.predicted[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    /// Wh/m².
    pub rmse: f64,
    pub nrmse: f64,
    /// Wh/m², predicted minus measured.
    pub mbe: f64,
    /// Squared Pearson correlation; `None` when either side is constant.
    pub r_squared: Option<f64>,
    pub n: usize,
}

pub fn metrics(run: &ForecastRun) -> Result<MetricsReport> {
    let n = run.len();
    if n == 0 {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    let nf = n as f64;
    let (c, m) = (run.predicted(), run.measured());
    let sse: f64 = c.iter().zip(m).map(|(c, m)| (c - m).powi(2)).sum();
    let bias: f64 = c.iter().zip(m).map(|(c, m)| c - m).sum();
    let power: f64 = m.iter().map(|m| m * m).sum();
    if power == 0.0 {
        return Err(Error::ZeroMeasured);
    }
    let rmse = (sse / nf).sqrt();
    Ok(MetricsReport {
        rmse,
        nrmse: rmse / (power / nf).sqrt(),
        mbe: bias / nf,
        r_squared: squared_correlation(c, m),
        n,
    })
}

fn squared_correlation(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    (saa > 0.0 && sbb > 0.0).then(|| (sab * sab / (saa * sbb)).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Season {
    Winter,
    Spring,
    Summer,
    Autumn,
}

impl Season {
    pub const ALL: [Season; 4] = [Season::Winter, Season::Spring, Season::Summer, Season::Autumn];

    /// Meteorological seasons: DJF, MAM, JJA, SON.
    pub fn of(day: DayIndex) -> Season {
        match day.month() {
            12 | 1 | 2 => Season::Winter,
            3..=5 => Season::Spring,
            6..=8 => Season::Summer,
            _ => Season::Autumn,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Season::Winter => "winter",
            Season::Spring => "spring",
            Season::Summer => "summer",
            Season::Autumn => "autumn",
        }
    }
}

/// Metrics per season; seasons without days are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeasonalReport {
    pub seasons: BTreeMap<Season, Option<MetricsReport>>,
}

impl SeasonalReport {
    pub fn get(&self, season: Season) -> Option<&MetricsReport> {
        self.seasons.get(&season).and_then(Option::as_ref)
    }
}

pub fn seasonal_breakdown(run: &ForecastRun) -> Result<SeasonalReport> {
    if run.is_empty() {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    let seasons = Season::ALL
        .into_iter()
        .map(|s| {
            let part = run.filter(|d| Season::of(d) == s);
            let report = if part.is_empty() { None } else { Some(metrics(&part)?) };
            Ok((s, report))
        })
        .collect::<Result<_>>()?;
    Ok(SeasonalReport { seasons })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonthlyRow {
    pub year: i32,
    pub month: u32,
    pub measured_sum: f64,
    pub predicted_sum: f64,
    /// `|ΣC − ΣM| / ΣM`; `None` when the month's measured sum is zero.
    pub relative_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonthlyReport {
    pub months: Vec<MonthlyRow>,
    /// Mean relative error over the usable months, in percent.
    pub mean_percent: f64,
}

/// Relative error of monthly totals, averaged over calendar months.
pub fn monthly_aggregate_error(run: &ForecastRun) -> Result<MonthlyReport> {
    let mut sums: BTreeMap<(i32, u32), (f64, f64)> = BTreeMap::new();
    for ((d, m), c) in run.days().iter().zip(run.measured()).zip(run.predicted()) {
        let e = sums.entry((d.year(), d.month())).or_default();
        e.0 += m;
        e.1 += c;
    }
    let months: Vec<MonthlyRow> = sums
        .into_iter()
        .map(|((year, month), (ms, cs))| {
            let relative_error = if ms > 0.0 {
                Some((cs - ms).abs() / ms)
            } else {
                warn!("{year}-{month:02}: measured total is zero, month excluded");
                None
            };
            MonthlyRow {
                year,
                month,
                measured_sum: ms,
                predicted_sum: cs,
                relative_error,
            }
        })
        .collect();
    let usable: Vec<f64> = months.iter().filter_map(|r| r.relative_error).collect();
    if usable.is_empty() {
        return Err(Error::ZeroMeasured);
    }
    Ok(MonthlyReport {
        mean_percent: 100.0 * usable.iter().sum::<f64>() / usable.len() as f64,
        months,
    })
}

/// Two-sided 97.5% quantile of Student's t.
pub fn t_quantile_975(degrees_of_freedom: usize) -> Result<f64> {
    let t = StudentsT::new(0.0, 1.0, degrees_of_freedom as f64)
        .map_err(|e| Error::Config(format!("Student t with {degrees_of_freedom} dof: {e}")))?;
    Ok(t.inverse_cdf(0.975))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub mean: f64,
    /// 95% half width.
    pub half_width: f64,
}

fn interval(values: &[f64], t: f64) -> Interval {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Interval {
        mean,
        half_width: t * var.sqrt() / n.sqrt(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiSummary {
    pub n_runs: usize,
    pub rmse: Interval,
    pub nrmse: Interval,
    pub mbe: Interval,
    /// `None` if any run had an undefined correlation.
    pub r_squared: Option<Interval>,
}

/// Mean and Student-t 95% half width of each metric across runs.
pub fn confidence_interval(runs: &[MetricsReport]) -> Result<CiSummary> {
    if runs.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: runs.len(),
        });
    }
    let t = t_quantile_975(runs.len() - 1)?;
    let pick = |f: fn(&MetricsReport) -> f64| interval(&runs.iter().map(f).collect::<Vec<_>>(), t);
    let r2: Option<Vec<f64>> = runs.iter().map(|r| r.r_squared).collect();
    Ok(CiSummary {
        n_runs: runs.len(),
        rmse: pick(|r| r.rmse),
        nrmse: pick(|r| r.nrmse),
        mbe: pick(|r| r.mbe),
        r_squared: r2.map(|v| interval(&v, t)),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub model_id: String,
    /// Runs averaged into this row.
    pub n_runs: usize,
    /// Per-metric mean over the runs; `r_squared` is `None` if any run lacked it.
    pub metrics: MetricsReport,
}

/// One row per model id, in order of first appearance. Runs sharing an id
/// (restarts of one model) are averaged metric by metric. Every run must
/// cover the same days.
pub fn compare_models(runs: &[ForecastRun]) -> Result<Vec<ComparisonRow>> {
    let Some(first) = runs.first() else {
        return Err(Error::EmptyInput);
    };
    let mut groups: Vec<(String, Vec<MetricsReport>)> = Vec::new();
    for run in runs {
        if run.days() != first.days() {
            return Err(Error::MismatchedRuns(format!(
                "'{}' and '{}' cover different days",
                first.model_id(),
                run.model_id()
            )));
        }
        let m = metrics(run)?;
        match groups.iter_mut().find(|(id, _)| id == run.model_id()) {
            Some((_, v)) => v.push(m),
            None => groups.push((run.model_id().to_string(), vec![m])),
        }
    }
    Ok(groups
        .into_iter()
        .map(|(model_id, reports)| {
            let k = reports.len() as f64;
            let mean = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / k;
            let r2: Option<Vec<f64>> = reports.iter().map(|r| r.r_squared).collect();
            ComparisonRow {
                model_id,
                n_runs: reports.len(),
                metrics: MetricsReport {
                    rmse: mean(|r| r.rmse),
                    nrmse: mean(|r| r.nrmse),
                    mbe: mean(|r| r.mbe),
                    r_squared: r2.map(|v| v.iter().sum::<f64>() / k),
                    n: reports[0].n,
                },
            }
        })
        .collect())
}

/// `x` rounded to six significant digits, without exponent notation.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { x.to_string() };
    }
    let rounded: f64 = format!("{x:.5e}").parse().unwrap_or(x);
    let magnitude = rounded.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{rounded:.decimals$}")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, format_sig6)
}

pub fn write_metrics_csv<W: Write>(rows: &[(String, MetricsReport)], mut out: W) -> Result<()> {
    writeln!(out, "model,n,rmse_wh_m2,nrmse,mbe_wh_m2,r_squared")?;
    for (id, m) in rows {
        writeln!(
            out,
            "{id},{},{},{},{},{}",
            m.n,
            format_sig6(m.rmse),
            format_sig6(m.nrmse),
            format_sig6(m.mbe),
            opt(m.r_squared)
        )?;
    }
    Ok(())
}

pub fn write_seasonal_csv<W: Write>(rows: &[(String, SeasonalReport)], mut out: W) -> Result<()> {
    writeln!(out, "model,season,n,rmse_wh_m2,nrmse,mbe_wh_m2,r_squared")?;
    for (id, report) in rows {
        for s in Season::ALL {
            if let Some(m) = report.get(s) {
                writeln!(
                    out,
                    "{id},{},{},{},{},{},{}",
                    s.as_str(),
                    m.n,
                    format_sig6(m.rmse),
                    format_sig6(m.nrmse),
                    format_sig6(m.mbe),
                    opt(m.r_squared)
                )?;
            }
        }
    }
    Ok(())
}

pub fn write_monthly_csv<W: Write>(rows: &[(String, MonthlyReport)], mut out: W) -> Result<()> {
    writeln!(
        out,
        "model,year,month,measured_wh_m2,predicted_wh_m2,relative_error_percent"
    )?;
    for (id, report) in rows {
        for r in &report.months {
            writeln!(
                out,
                "{id},{},{},{},{},{}",
                r.year,
                r.month,
                format_sig6(r.measured_sum),
                format_sig6(r.predicted_sum),
                opt(r.relative_error.map(|e| 100.0 * e))
            )?;
        }
        writeln!(out, "{id},all,all,,,{}", format_sig6(report.mean_percent))?;
    }
    Ok(())
}

/// Table-1 layout: one normalized RMSE per model, in percent.
pub fn write_comparison_csv<W: Write>(rows: &[ComparisonRow], mut out: W) -> Result<()> {
    writeln!(out, "model,n_runs,nrmse_percent")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{}",
            r.model_id,
            r.n_runs,
            format_sig6(100.0 * r.metrics.nrmse)
        )?;
    }
    Ok(())
}

pub fn write_ci_csv<W: Write>(rows: &[(String, CiSummary)], mut out: W) -> Result<()> {
    writeln!(out, "model,metric,n_runs,mean,half_width_95")?;
    for (id, ci) in rows {
        let metrics = [
            ("rmse_wh_m2", Some(ci.rmse)),
            ("nrmse", Some(ci.nrmse)),
            ("mbe_wh_m2", Some(ci.mbe)),
            ("r_squared", ci.r_squared),
        ];
        for (name, iv) in metrics {
            if let Some(iv) = iv {
                writeln!(
                    out,
                    "{id},{name},{},{},{}",
                    ci.n_runs,
                    format_sig6(iv.mean),
                    format_sig6(iv.half_width)
                )?;
            }
        }
    }
    Ok(())
}
