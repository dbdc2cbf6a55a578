//! CSV ingestion of OHLC bars and volatility-time files.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ohlc_bridge_core::{OhlcBar, VolTimeMap};

use crate::error::{Error, Result};
use crate::fmt::sig12;
use crate::mc::dump::csv_err;

/// One input row as read, before any clamping.
#[derive(Debug, Clone, PartialEq)]
pub struct RawBar {
    pub line: usize,
    pub id: String,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
}

/// A validated bar with its log-scale normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Bar {
    pub raw: RawBar,
    pub normalized: OhlcBar,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OrderingMode {
    /// OHLC ordering violations are errors.
    Strict,
    /// Violations are clamped (`h := max(h, o, c)`, `ℓ := min(ℓ, o, c)`)
    /// with a warning.
    #[default]
    Lenient,
}

/// Header names for each field, matched case-insensitively.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub id: String,
    pub open: String,
    pub high: String,
    pub low: String,
    pub close: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self { id: "date".into(), open: "open".into(), high: "high".into(), low: "low".into(), close: "close".into() }
    }
}

impl ColumnMap {
    /// `field=Header` pairs separated by commas, e.g.
    /// `id=Timestamp,close=Last`; unnamed fields keep their defaults.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut m = Self::default();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| Error::Config(format!("column mapping '{part}' lacks '='")))?;
            let slot = match k.trim().to_ascii_lowercase().as_str() {
                "id" | "date" => &mut m.id,
                "open" => &mut m.open,
                "high" => &mut m.high,
                "low" => &mut m.low,
                "close" => &mut m.close,
                other => return Err(Error::Config(format!("unknown column field '{other}'"))),
            };
            *slot = v.trim().to_string();
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IngestOptions {
    pub columns: ColumnMap,
    pub mode: OrderingMode,
    /// Use the previous row's close as the open; the first row is dropped.
    pub proxy_open: bool,
}

fn find(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name))
}

fn field(rec: &csv::StringRecord, idx: usize, name: &str, line: usize) -> Result<f64> {
    let s = rec.get(idx).map(str::trim).unwrap_or("");
    s.parse::<f64>().map_err(|_| Error::Parse { line, message: format!("{name}: cannot parse '{s}'") })
}

/// Checks ordering and positivity, then normalizes on the log scale:
/// `h' = ln h − ln o`, `ℓ' = ln ℓ − ln o`, `c' = ln c − ln o`.
pub fn normalize(raw: &RawBar, mode: OrderingMode) -> Result<(OhlcBar, Vec<String>)> {
    let line = raw.line;
    for (name, v) in [("open", raw.open), ("high", raw.high), ("low", raw.low), ("close", raw.close)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Parse { line, message: format!("{name} must be a positive price, got {v}") });
        }
    }
    let mut warnings = Vec::new();
    let (mut h, mut l) = (raw.high, raw.low);
    let top = raw.open.max(raw.close);
    let bottom = raw.open.min(raw.close);
    if h < top {
        match mode {
            OrderingMode::Strict => return Err(Error::Parse { line, message: format!("high {h} below max(open, close) {top}") }),
            OrderingMode::Lenient => {
                warnings.push(format!("line {line}: high {h} raised to {top}"));
                h = top;
            }
        }
    }
    if l > bottom {
        match mode {
            OrderingMode::Strict => return Err(Error::Parse { line, message: format!("low {l} above min(open, close) {bottom}") }),
            OrderingMode::Lenient => {
                warnings.push(format!("line {line}: low {l} lowered to {bottom}"));
                l = bottom;
            }
        }
    }
    let lo = raw.open.ln();
    let c = raw.close.ln() - lo;
    let hn = (h.ln() - lo).max(c.max(0.0));
    let ln = (l.ln() - lo).min(c.min(0.0));
    Ok((OhlcBar::new(hn, ln, c)?, warnings))
}

pub fn ingest_reader<R: Read>(reader: R, opts: &IngestOptions) -> Result<Vec<Bar>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let col = |name: &str| find(&headers, name).ok_or_else(|| Error::Parse { line: 1, message: format!("missing column '{name}'") });
    let id = find(&headers, &opts.columns.id);
    let open = if opts.proxy_open { None } else { Some(col(&opts.columns.open)?) };
    let (high, low, close) = (col(&opts.columns.high)?, col(&opts.columns.low)?, col(&opts.columns.close)?);
    let mut bars = Vec::new();
    let mut prev_close: Option<f64> = None;
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(n + 2);
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        let c = field(&rec, close, "close", line)?;
        let o = match open {
            Some(i) => field(&rec, i, "open", line)?,
            None => match prev_close.replace(c) {
                Some(p) => p,
                None => {
                    log::warn!("line {line}: first row has no previous close and is skipped");
                    continue;
                }
            },
        };
        let raw = RawBar {
            line,
            id: id.and_then(|i| rec.get(i)).map(|s| s.to_string()).unwrap_or_else(|| (n + 1).to_string()),
            open: o,
            high: field(&rec, high, "high", line)?,
            low: field(&rec, low, "low", line)?,
            close: c,
        };
        let (normalized, warnings) = normalize(&raw, opts.mode)?;
        for w in &warnings {
            log::warn!("{w}");
        }
        bars.push(Bar { raw, normalized, warnings });
    }
    if bars.is_empty() {
        return Err(ohlc_bridge_core::Error::EmptyInput.into());
    }
    Ok(bars)
}

pub fn ingest(path: impl AsRef<Path>, opts: &IngestOptions) -> Result<Vec<Bar>> {
    ingest_reader(File::open(path)?, opts)
}

/// Writes `date, open, high, low, close` rows at 12 significant digits.
pub fn write_bars<W: Write>(w: W, bars: &[RawBar]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["date", "open", "high", "low", "close"]).map_err(csv_err)?;
    for b in bars {
        wr.write_record([b.id.clone(), sig12(b.open), sig12(b.high), sig12(b.low), sig12(b.close)]).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

/// Two-column `t, tau` file, validated as a monotone map ending at (1, 1).
pub fn read_voltime<R: Read>(reader: R) -> Result<VolTimeMap> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let (ti, ui) = match (find(&headers, "t"), find(&headers, "tau")) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Parse { line: 1, message: "volatility-time file needs columns t, tau".into() }),
    };
    let (mut t, mut tau) = (Vec::new(), Vec::new());
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(n + 2);
        t.push(field(&rec, ti, "t", line)?);
        tau.push(field(&rec, ui, "tau", line)?);
    }
    Ok(VolTimeMap::from_points(t, tau)?)
}

pub fn write_voltime<W: Write>(w: W, map: &VolTimeMap) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["t", "tau"]).map_err(csv_err)?;
    for (t, u) in map.t.iter().zip(&map.tau) {
        wr.write_record([sig12(*t), sig12(*u)]).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}
