//! Plain-text persistence for fitted models and seasonal factors.
//!
//! A model file is line oriented:
//!
//! ```text
//! solarcast-model 1
//! kind=ar
//! intercept=0.1375
//! begin ar
//! 0.51
//! 0.12
//! end ar
//! ```
//!
//! The first line carries the format version. `key=value` lines hold
//! scalars; `begin <name>` .. `end <name>` delimit a CSV block. Blank lines
//! and lines starting with `#` are ignored. Floats are written in Rust's
//! shortest round-trip form, so a saved model reloads bit for bit.
//!
//! Blocks per kind:
//! * naive: `slot_means` (365 rows, empty field for an empty slot).
//! * ar, arma: `ar`, `ma`, `residual_history`, one coefficient per row.
//! * markov: `marginal` (`class,count`), `transitions`
//!   (`context_len,context,next,count`, context classes space separated).
//! * bayes: `prior` (`class,count`), `conditional` (`lag,class,attribute,count`).
//! * mlp: `scaler_inputs` (`min,max` per input), `layer<i>_weights`
//!   (row-major `n_out × n_in`), `layer<i>_biases`.
//!
//! With `preprocess=true` the file also carries `latitude_rad`,
//! `solar_constant`, `half_width` and a `factors` block (`y_star,n_years`).

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::str::FromStr;

use crate::baselines::{BayesModel, Discretizer, KnnConfig, LinearModel, MarkovModel, NaiveModel};
use crate::error::{Error, Result};
use crate::forecast::{Model, ModelKind};
use crate::mlp::{Layer, Mlp, MlpForecaster, MlpLayout, Scaler};
use crate::preprocess::{Preprocessor, SeasonalFactors};
use crate::series::SLOTS;
use crate::solar::SiteSpec;

pub const FORMAT_MAGIC: &str = "solarcast-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Default)]
struct Document {
    entries: BTreeMap<String, String>,
    blocks: BTreeMap<String, Vec<Vec<String>>>,
    order: Vec<Item>,
}

#[derive(Debug)]
enum Item {
    Entry(String),
    Block(String),
}

fn bad(msg: impl Into<String>) -> Error {
    Error::ModelFormat(msg.into())
}

impl Document {
    fn set(&mut self, key: &str, value: impl ToString) {
        self.order.push(Item::Entry(key.to_string()));
        self.entries.insert(key.to_string(), value.to_string());
    }

    fn block(&mut self, name: &str, rows: Vec<Vec<String>>) {
        self.order.push(Item::Block(name.to_string()));
        self.blocks.insert(name.to_string(), rows);
    }

    fn column<T: ToString>(&mut self, name: &str, values: &[T]) {
        self.block(name, values.iter().map(|v| vec![v.to_string()]).collect());
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .entries
            .get(key)
            .ok_or_else(|| bad(format!("missing key '{key}'")))?;
        raw.parse().map_err(|_| bad(format!("bad value '{raw}' for '{key}'")))
    }

    fn rows(&self, name: &str) -> Result<&[Vec<String>]> {
        self.blocks
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| bad(format!("missing block '{name}'")))
    }

    fn parsed_column<T: FromStr>(&self, name: &str) -> Result<Vec<T>> {
        self.rows(name)?
            .iter()
            .map(|r| match r.as_slice() {
                [v] => parse_field(v, name),
                _ => Err(bad(format!("block '{name}' must have one column"))),
            })
            .collect()
    }

    fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{FORMAT_MAGIC} {FORMAT_VERSION}")?;
        for item in &self.order {
            match item {
                Item::Entry(k) => writeln!(out, "{k}={}", self.entries[k])?,
                Item::Block(name) => {
                    writeln!(out, "begin {name}")?;
                    for row in &self.blocks[name] {
                        writeln!(out, "{}", row.join(","))?;
                    }
                    writeln!(out, "end {name}")?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }

    fn read<R: Read>(source: R) -> Result<Self> {
        let mut lines = BufReader::new(source).lines().enumerate();
        let header = match lines.next() {
            Some((_, line)) => line?,
            None => return Err(Error::EmptyInput),
        };
        let version = header
            .trim()
            .strip_prefix(FORMAT_MAGIC)
            .map(str::trim)
            .ok_or_else(|| bad("not a model file"))?;
        if version != FORMAT_VERSION.to_string() {
            return Err(bad(format!("unsupported format version '{version}'")));
        }
        let mut doc = Document::default();
        let mut open: Option<(String, Vec<Vec<String>>)> = None;
        for (i, line) in lines {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if let Some((name, rows)) = open.as_mut() {
                if line.trim() == format!("end {name}") {
                    let (name, rows) = open.take().unwrap();
                    doc.blocks.insert(name, rows);
                } else {
                    rows.push(line.split(',').map(|f| f.trim().to_string()).collect());
                }
                continue;
            }
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if let Some(name) = trimmed.strip_prefix("begin ") {
                open = Some((name.trim().to_string(), Vec::new()));
            } else if let Some((k, v)) = trimmed.split_once('=') {
                doc.entries.insert(k.trim().to_string(), v.trim().to_string());
            } else {
                return Err(Error::Parse {
                    line: i as u64 + 1,
                    message: format!("unrecognized line '{trimmed}'"),
                });
            }
        }
        if let Some((name, _)) = open {
            return Err(bad(format!("block '{name}' is not closed")));
        }
        Ok(doc)
    }
}

fn parse_field<T: FromStr>(field: &str, context: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| bad(format!("bad field '{field}' in '{context}'")))
}

fn parse_row<T: FromStr>(row: &[String], width: usize, context: &str) -> Result<Vec<T>> {
    if row.len() != width {
        return Err(bad(format!(
            "block '{context}' expects {width} fields, got {}",
            row.len()
        )));
    }
    row.iter().map(|f| parse_field(f, context)).collect()
}

fn discretizer_entries(doc: &mut Document, d: &Discretizer) {
    let (min, max) = d.range();
    doc.set("classes", d.n_classes());
    doc.set("class_min", min);
    doc.set("class_max", max);
}

fn read_discretizer(doc: &Document) -> Result<Discretizer> {
    Discretizer::with_range(doc.get("class_min")?, doc.get("class_max")?, doc.get("classes")?)
}

fn count_table(counts: &[u64]) -> Vec<Vec<String>> {
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(k, c)| vec![k.to_string(), c.to_string()])
        .collect()
}

fn read_count_table(doc: &Document, name: &str, k: usize) -> Result<Vec<u64>> {
    let mut out = vec![0u64; k];
    for row in doc.rows(name)? {
        let [class, count] = parse_row::<u64>(row, 2, name)?[..] else {
            unreachable!()
        };
        *out.get_mut(class as usize)
            .ok_or_else(|| bad(format!("class {class} out of range")))? = count;
    }
    Ok(out)
}

fn write_linear(doc: &mut Document, m: &LinearModel) {
    doc.set("intercept", m.intercept);
    doc.column("ar", &m.ar);
    doc.column("ma", &m.ma);
    doc.column("residual_history", &m.residual_history);
}

fn read_linear(doc: &Document) -> Result<LinearModel> {
    let m = LinearModel {
        ar: doc.parsed_column("ar")?,
        ma: doc.parsed_column("ma")?,
        intercept: doc.get("intercept")?,
        residual_history: doc.parsed_column("residual_history")?,
    };
    if m.ar.iter().chain(&m.ma).chain([&m.intercept]).any(|v| !v.is_finite()) {
        return Err(bad("non-finite linear coefficient"));
    }
    Ok(m)
}

fn build_document(model: &Model, preprocessor: Option<&Preprocessor>) -> Document {
    let mut doc = Document::default();
    doc.set("kind", model.kind());
    match model {
        Model::Naive(m) => {
            let rows = m
                .slot_means()
                .iter()
                .map(|v| vec![v.map_or_else(String::new, |x| x.to_string())])
                .collect();
            doc.block("slot_means", rows);
        }
        Model::Ar(m) | Model::Arma(m) => write_linear(&mut doc, m),
        Model::Markov(m) => {
            doc.set("order", m.order);
            discretizer_entries(&mut doc, &m.discretizer);
            doc.block("marginal", count_table(&m.marginal));
            let mut rows = Vec::new();
            for (j, table) in m.contexts.iter().enumerate() {
                for (ctx, counts) in table {
                    let ctx: Vec<String> = ctx.iter().map(usize::to_string).collect();
                    for (next, &c) in counts.iter().enumerate().filter(|(_, &c)| c > 0) {
                        rows.push(vec![
                            (j + 1).to_string(),
                            ctx.join(" "),
                            next.to_string(),
                            c.to_string(),
                        ]);
                    }
                }
            }
            doc.block("transitions", rows);
        }
        Model::Bayes(m) => {
            doc.set("order", m.order);
            discretizer_entries(&mut doc, &m.discretizer);
            doc.block("prior", count_table(&m.prior));
            let mut rows = Vec::new();
            for (j, table) in m.conditional.iter().enumerate() {
                for (c, attrs) in table.iter().enumerate() {
                    for (a, &n) in attrs.iter().enumerate().filter(|(_, &n)| n > 0) {
                        rows.push(vec![(j + 1).to_string(), c.to_string(), a.to_string(), n.to_string()]);
                    }
                }
            }
            doc.block("conditional", rows);
        }
        Model::Knn(cfg) => {
            doc.set("k", cfg.k);
            doc.set("window", cfg.window);
        }
        Model::Mlp(f) => {
            let sizes: Vec<String> = f.mlp.layout().sizes().iter().map(usize::to_string).collect();
            doc.set("layout", sizes.join(" "));
            doc.set("seed", f.mlp.seed());
            let (lo, hi) = f.scaler.output_range();
            doc.set("scaler_output_min", lo);
            doc.set("scaler_output_max", hi);
            let inputs = f
                .scaler
                .input_min()
                .iter()
                .zip(f.scaler.input_max())
                .map(|(a, b)| vec![a.to_string(), b.to_string()])
                .collect();
            doc.block("scaler_inputs", inputs);
            for (i, layer) in f.mlp.layers().iter().enumerate() {
                let rows = layer
                    .weights
                    .chunks(layer.n_in)
                    .map(|r| r.iter().map(f64::to_string).collect())
                    .collect();
                doc.block(&format!("layer{i}_weights"), rows);
                doc.column(&format!("layer{i}_biases"), &layer.biases);
            }
        }
    }
    match preprocessor {
        None => doc.set("preprocess", false),
        Some(p) => {
            doc.set("preprocess", true);
            doc.set("latitude_rad", p.site().latitude());
            doc.set("solar_constant", p.site().solar_constant());
            doc.set("half_width", p.factors().half_width());
            doc.block("factors", factor_rows(p.factors()));
        }
    }
    doc
}

fn factor_rows(f: &SeasonalFactors) -> Vec<Vec<String>> {
    f.adjusted()
        .iter()
        .zip(f.n_years_used())
        .map(|(y, n)| vec![y.to_string(), n.to_string()])
        .collect()
}

fn read_mlp(doc: &Document) -> Result<MlpForecaster> {
    let sizes: Vec<usize> = doc
        .get::<String>("layout")?
        .split_whitespace()
        .map(|s| parse_field(s, "layout"))
        .collect::<Result<_>>()?;
    let layout = MlpLayout::new(sizes.clone())?;
    let (mut lo, mut hi) = (Vec::new(), Vec::new());
    for row in doc.rows("scaler_inputs")? {
        let r: Vec<f64> = parse_row(row, 2, "scaler_inputs")?;
        lo.push(r[0]);
        hi.push(r[1]);
    }
    let scaler = Scaler::from_ranges(lo, hi, doc.get("scaler_output_min")?, doc.get("scaler_output_max")?)?;
    let layers = sizes
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let (n_in, n_out) = (w[0], w[1]);
            let name = format!("layer{i}_weights");
            let rows = doc.rows(&name)?;
            if rows.len() != n_out {
                return Err(bad(format!("block '{name}' expects {n_out} rows, got {}", rows.len())));
            }
            let mut weights = Vec::with_capacity(n_in * n_out);
            for row in rows {
                weights.extend(parse_row::<f64>(row, n_in, &name)?);
            }
            Ok(Layer {
                n_in,
                n_out,
                weights,
                biases: doc.parsed_column(&format!("layer{i}_biases"))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    MlpForecaster::new(Mlp::from_layers(layout, layers, doc.get("seed")?)?, scaler)
}

fn read_markov(doc: &Document) -> Result<MarkovModel> {
    let order: usize = doc.get("order")?;
    let discretizer = read_discretizer(doc)?;
    let k = discretizer.n_classes();
    let marginal = read_count_table(doc, "marginal", k)?;
    let mut contexts = vec![BTreeMap::new(); order];
    for row in doc.rows("transitions")? {
        if row.len() != 4 {
            return Err(bad("block 'transitions' expects 4 fields"));
        }
        let len: usize = parse_field(&row[0], "transitions")?;
        let ctx: Vec<usize> = row[1]
            .split_whitespace()
            .map(|c| parse_field(c, "transitions"))
            .collect::<Result<_>>()?;
        let next: usize = parse_field(&row[2], "transitions")?;
        let count: u64 = parse_field(&row[3], "transitions")?;
        if len == 0 || len > order || ctx.len() != len || next >= k || ctx.iter().any(|&c| c >= k) {
            return Err(bad(format!("invalid transition row {row:?}")));
        }
        contexts[len - 1].entry(ctx).or_insert_with(|| vec![0u64; k])[next] = count;
    }
    Ok(MarkovModel {
        order,
        discretizer,
        contexts,
        marginal,
    })
}

fn read_bayes(doc: &Document) -> Result<BayesModel> {
    let order: usize = doc.get("order")?;
    let discretizer = read_discretizer(doc)?;
    let k = discretizer.n_classes();
    let prior = read_count_table(doc, "prior", k)?;
    let mut conditional = vec![vec![vec![0u64; k]; k]; order];
    for row in doc.rows("conditional")? {
        let [lag, c, a, n] = parse_row::<u64>(row, 4, "conditional")?[..] else {
            unreachable!()
        };
        let (lag, c, a) = (lag as usize, c as usize, a as usize);
        if lag == 0 || lag > order || c >= k || a >= k {
            return Err(bad(format!("invalid conditional row {row:?}")));
        }
        conditional[lag - 1][c][a] = n;
    }
    Ok(BayesModel {
        order,
        discretizer,
        prior,
        conditional,
    })
}

fn read_preprocessor(doc: &Document) -> Result<Option<Preprocessor>> {
    if !doc.get::<bool>("preprocess")? {
        return Ok(None);
    }
    let site = SiteSpec::with_solar_constant(doc.get("latitude_rad")?, doc.get("solar_constant")?)?;
    let (adjusted, n_years) = parse_factor_rows(doc.rows("factors")?)?;
    let factors = SeasonalFactors::from_adjusted(adjusted, n_years, doc.get("half_width")?)?;
    Ok(Some(Preprocessor::from_parts(site, factors)))
}

fn parse_factor_rows(rows: &[Vec<String>]) -> Result<(Vec<f64>, Vec<usize>)> {
    if rows.len() != SLOTS {
        return Err(bad(format!("factors need {SLOTS} rows, got {}", rows.len())));
    }
    let mut adjusted = Vec::with_capacity(SLOTS);
    let mut n_years = Vec::with_capacity(SLOTS);
    for row in rows {
        if row.len() != 2 {
            return Err(bad("factor rows need 2 fields"));
        }
        adjusted.push(parse_field(&row[0], "factors")?);
        n_years.push(parse_field(&row[1], "factors")?);
    }
    Ok((adjusted, n_years))
}

pub fn write_model<W: Write>(model: &Model, preprocessor: Option<&Preprocessor>, out: W) -> Result<()> {
    build_document(model, preprocessor).write(out)
}

pub fn read_model<R: Read>(source: R) -> Result<(Model, Option<Preprocessor>)> {
    let doc = Document::read(source)?;
    let kind: ModelKind = doc.get::<String>("kind")?.parse()?;
    let model = match kind {
        ModelKind::Naive => {
            let means = doc
                .rows("slot_means")?
                .iter()
                .map(|r| match r.as_slice() {
                    [v] if v.is_empty() => Ok(None),
                    [v] => parse_field(v, "slot_means").map(Some),
                    _ => Err(bad("block 'slot_means' must have one column")),
                })
                .collect::<Result<Vec<_>>>()?;
            Model::Naive(NaiveModel::from_slot_means(means)?)
        }
        ModelKind::Ar => Model::Ar(read_linear(&doc)?),
        ModelKind::Arma => Model::Arma(read_linear(&doc)?),
        ModelKind::Markov => Model::Markov(read_markov(&doc)?),
        ModelKind::Bayes => Model::Bayes(read_bayes(&doc)?),
        ModelKind::Knn => {
            let cfg = KnnConfig {
                k: doc.get("k")?,
                window: doc.get("window")?,
            };
            cfg.validate()?;
            Model::Knn(cfg)
        }
        ModelKind::Mlp => Model::Mlp(read_mlp(&doc)?),
    };
    Ok((model, read_preprocessor(&doc)?))
}

/// `day,y_star,n_years` with one row per seasonal slot.
pub fn write_factors_csv<W: Write>(factors: &SeasonalFactors, mut out: W) -> Result<()> {
    writeln!(out, "day,y_star,n_years")?;
    for (i, (y, n)) in factors.adjusted().iter().zip(factors.n_years_used()).enumerate() {
        writeln!(out, "{},{y},{n}", i + 1)?;
    }
    Ok(())
}

pub fn read_factors_csv<R: Read>(source: R, half_width: usize) -> Result<SeasonalFactors> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers().map_err(csv_error)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["day", "y_star", "n_years"] {
        return Err(Error::Parse {
            line: 1,
            message: "expected header day,y_star,n_years".into(),
        });
    }
    let mut rows = Vec::with_capacity(SLOTS);
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let day: usize = record[0].parse().map_err(|_| Error::Parse {
            line: i as u64 + 2,
            message: format!("bad day '{}'", &record[0]),
        })?;
        if day != i + 1 {
            return Err(Error::Parse {
                line: i as u64 + 2,
                message: format!("expected day {}, got {day}", i + 1),
            });
        }
        rows.push(vec![record[1].to_string(), record[2].to_string()]);
    }
    let (adjusted, n_years) = parse_factor_rows(&rows)?;
    SeasonalFactors::from_adjusted(adjusted, n_years, half_width)
}

fn csv_error(e: csv::Error) -> Error {
    Error::Parse {
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    }
}
