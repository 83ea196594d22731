use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::NaiveDate;

use super::{DailySeries, DayIndex};
use crate::error::{Error, Result};

/// Two-column `date,<value_column>` layout. Missing values are empty fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    /// Expected name of the value column; `None` accepts any name on read.
    pub value_column: Option<String>,
    /// Fixed decimals on write; `None` writes the shortest round-trip form.
    pub decimals: Option<usize>,
}

impl CsvSchema {
    /// Measured global horizontal irradiation, `date,ghi_wh_m2`.
    pub fn ghi() -> Self {
        CsvSchema {
            value_column: Some("ghi_wh_m2".into()),
            decimals: None,
        }
    }

    /// Forecast output, `date,ghi_pred_wh_m2`.
    pub fn prediction() -> Self {
        CsvSchema {
            value_column: Some("ghi_pred_wh_m2".into()),
            decimals: None,
        }
    }

    /// Dimensionless intermediate series.
    pub fn dimensionless(column: &str) -> Self {
        CsvSchema {
            value_column: Some(column.into()),
            decimals: None,
        }
    }

    /// Reads any `date,<name>` file.
    pub fn any() -> Self {
        CsvSchema {
            value_column: None,
            decimals: None,
        }
    }

    fn column_name(&self) -> &str {
        self.value_column.as_deref().unwrap_or("value")
    }
}

/// Parses a `date,value` CSV into a contiguous series. Rows may come in any
/// order; dates absent between the first and last row become missing slots.
pub fn load_csv<R: Read>(source: R, schema: &CsvSchema) -> Result<DailySeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let headers = reader.headers().map_err(csv_err)?.clone();
    if headers.len() < 2 || &headers[0] != "date" {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `date,{}`", schema.column_name()),
        });
    }
    if let Some(col) = &schema.value_column {
        if &headers[1] != col.as_str() {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected value column `{col}`, found `{}`", &headers[1]),
            });
        }
    }
    let label = headers[1].to_string();

    let mut rows: BTreeMap<NaiveDate, Option<f64>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d").map_err(|e| Error::Parse {
            line,
            message: format!("bad date `{}`: {e}", &record[0]),
        })?;
        let value = match &record[1] {
            "" => None,
            raw => {
                let v: f64 = raw.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("bad value `{raw}`"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line,
                        message: format!("non-finite value `{raw}`"),
                    });
                }
                if v < 0.0 {
                    return Err(Error::NegativeValue { line, value: v });
                }
                Some(v)
            }
        };
        if rows.insert(date, value).is_some() {
            return Err(Error::DuplicateDate(date));
        }
    }

    let (&first, _) = rows.first_key_value().ok_or(Error::EmptyInput)?;
    let (&last, _) = rows.last_key_value().ok_or(Error::EmptyInput)?;
    let len = (last - first).num_days() as usize + 1;
    let mut values = vec![None; len];
    for (date, v) in rows {
        values[(date - first).num_days() as usize] = v;
    }
    DailySeries::new(DayIndex::from_date(first), values, label)
}

pub fn write_csv<W: Write>(series: &DailySeries, sink: W, schema: &CsvSchema) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink);
    w.write_record(["date", schema.column_name()]).map_err(csv_err)?;
    for (day, v) in series.days().zip(series.values()) {
        let field = match (v, schema.decimals) {
            (None, _) => String::new(),
            (Some(v), Some(d)) => format!("{v:.d$}"),
            (Some(v), None) => format!("{v}"),
        };
        w.write_record([day.to_string(), field]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}
