//! CSV formats for data blocks, forecasts and feature vectors.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::grid::{DataBlock, MarketDay};
use crate::ml::{FeatureVector, FEATURE_NAMES, N_FEATURES};
use crate::pipeline::Forecast;

pub const BLOCK_HEADER: [&str; 14] = [
    "option_id",
    "bid_m2",
    "ask_m2",
    "vol_m2",
    "bid_m1",
    "ask_m1",
    "vol_m1",
    "bid_0",
    "ask_0",
    "vol_0",
    "stock_bid_0",
    "stock_ask_0",
    "real_p1",
    "real_p2",
];

pub const FORECAST_HEADER: [&str; 7] = [
    "option_id",
    "est_p1",
    "est_p2",
    "err",
    "beta",
    "M",
    "converged",
];

/// A row that was rejected while reading leniently.
#[derive(Debug, Clone, PartialEq)]
pub struct RowIssue {
    pub line: usize,
    pub msg: String,
}

impl std::fmt::Display for RowIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.msg)
    }
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(None)
        .from_reader(r)
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, want: &[&str]) -> Result<()> {
    let got = rdr.headers()?.clone();
    let got: Vec<&str> = got.iter().collect();
    if got != want {
        return Err(Error::Parse {
            line: 1,
            msg: format!(
                "expected header `{}`, got `{}`",
                want.join(","),
                got.join(",")
            ),
        });
    }
    Ok(())
}

fn field_f64(rec: &csv::StringRecord, k: usize, name: &str) -> std::result::Result<f64, String> {
    let s = rec.get(k).unwrap_or("");
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("{name}: cannot parse `{s}` as a number"))
}

fn field_opt(
    rec: &csv::StringRecord,
    k: usize,
    name: &str,
) -> std::result::Result<Option<f64>, String> {
    match rec.get(k).unwrap_or("") {
        "" => Ok(None),
        _ => field_f64(rec, k, name).map(Some),
    }
}

/// Reads data blocks. With `strict`, the first malformed row aborts the read;
/// otherwise malformed rows are skipped and returned with their line numbers.
pub fn read_blocks<R: Read>(r: R, strict: bool) -> Result<(Vec<DataBlock>, Vec<RowIssue>)> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &BLOCK_HEADER)?;
    let mut blocks = Vec::new();
    let mut issues = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        match parse_block(&rec) {
            Ok(b) => blocks.push(b),
            Err(msg) if strict => return Err(Error::Parse { line, msg }),
            Err(msg) => issues.push(RowIssue { line, msg }),
        }
    }
    Ok((blocks, issues))
}

fn parse_block(rec: &csv::StringRecord) -> std::result::Result<DataBlock, String> {
    if rec.len() != BLOCK_HEADER.len() {
        return Err(format!(
            "expected {} fields, got {}",
            BLOCK_HEADER.len(),
            rec.len()
        ));
    }
    let id = rec.get(0).unwrap_or("").to_string();
    if id.is_empty() {
        return Err("option_id is empty".into());
    }
    let num = |k: usize| field_f64(rec, k, BLOCK_HEADER[k]);
    let day = |k: usize| -> std::result::Result<MarketDay, String> {
        Ok(MarketDay {
            option_bid: num(k)?,
            option_ask: num(k + 1)?,
            volatility: num(k + 2)?,
            stock_bid: None,
            stock_ask: None,
        })
    };
    let mut days = [day(1)?, day(4)?, day(7)?];
    days[2].stock_bid = Some(num(10)?);
    days[2].stock_ask = Some(num(11)?);
    let real1 = field_opt(rec, 12, "real_p1")?;
    let real2 = field_opt(rec, 13, "real_p2")?;
    DataBlock::new(id, days, real1, real2).map_err(|e| e.to_string())
}

fn opt_str(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_blocks<W: Write>(w: W, blocks: &[DataBlock]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(BLOCK_HEADER)?;
    for b in blocks {
        let mut row = vec![b.option_id.clone()];
        for d in &b.days {
            row.extend([d.option_bid, d.option_ask, d.volatility].map(|v| v.to_string()));
        }
        row.push(opt_str(b.today().stock_bid));
        row.push(opt_str(b.today().stock_ask));
        row.push(opt_str(b.real_plus1));
        row.push(opt_str(b.real_plus2));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_forecasts<W: Write>(w: W, forecasts: &[Forecast]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(FORECAST_HEADER)?;
    for f in forecasts {
        out.write_record([
            f.option_id.clone(),
            f.est_plus1.to_string(),
            f.est_plus2.to_string(),
            opt_str(f.err),
            f.beta_used.to_string(),
            f.m_used.to_string(),
            f.converged.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_forecasts<R: Read>(r: R) -> Result<Vec<Forecast>> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &FORECAST_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let parse = || -> std::result::Result<Forecast, String> {
            if rec.len() != FORECAST_HEADER.len() {
                return Err(format!(
                    "expected {} fields, got {}",
                    FORECAST_HEADER.len(),
                    rec.len()
                ));
            }
            Ok(Forecast {
                option_id: rec[0].to_string(),
                est_plus1: field_f64(&rec, 1, "est_p1")?,
                est_plus2: field_f64(&rec, 2, "est_p2")?,
                err: field_opt(&rec, 3, "err")?,
                beta_used: field_f64(&rec, 4, "beta")?,
                m_used: rec[5]
                    .parse()
                    .map_err(|_| format!("M: cannot parse `{}`", &rec[5]))?,
                converged: rec[6]
                    .parse()
                    .map_err(|_| format!("converged: cannot parse `{}`", &rec[6]))?,
            })
        };
        out.push(parse().map_err(|msg| Error::Parse { line, msg })?);
    }
    Ok(out)
}

fn feature_header() -> Vec<&'static str> {
    let mut h = vec!["option_id"];
    h.extend(FEATURE_NAMES);
    h.push("label");
    h
}

pub fn write_features<W: Write>(w: W, data: &[FeatureVector]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(feature_header())?;
    for v in data {
        let mut row = vec![v.option_id.clone()];
        row.extend(v.x.iter().map(f64::to_string));
        row.push(v.y.to_string());
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_features<R: Read>(r: R) -> Result<Vec<FeatureVector>> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &feature_header())?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let parse = || -> std::result::Result<FeatureVector, String> {
            if rec.len() != N_FEATURES + 2 {
                return Err(format!(
                    "expected {} fields, got {}",
                    N_FEATURES + 2,
                    rec.len()
                ));
            }
            let mut x = [0.0; N_FEATURES];
            for (k, v) in x.iter_mut().enumerate() {
                *v = field_f64(&rec, k + 1, FEATURE_NAMES[k])?;
            }
            let y = match &rec[N_FEATURES + 1] {
                "0" => 0,
                "1" => 1,
                other => return Err(format!("label must be 0 or 1, got `{other}`")),
            };
            Ok(FeatureVector {
                option_id: rec[0].to_string(),
                x,
                y,
            })
        };
        out.push(parse().map_err(|msg| Error::Parse { line, msg })?);
    }
    Ok(out)
}
