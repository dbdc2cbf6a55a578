//! Binary summary dumps and CSV export of reports.
//!
//! Dump layout (little endian): magic `OHLCSUM1`, seed u64, config hash
//! u64, path count u64, then `close, max, min` as f64 per path.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::fmt::sig12;
use crate::mc::generate::PathSummary;
use crate::mc::report::{BinComparison, EnsembleVarianceReport};
use crate::mc::study::Table2Row;

const MAGIC: &[u8; 8] = b"OHLCSUM1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DumpHeader {
    pub seed: u64,
    pub config_hash: u64,
    pub n_paths: u64,
}

pub fn write_summaries<W: Write>(mut w: W, seed: u64, config_hash: u64, summaries: &[PathSummary]) -> Result<()> {
    w.write_all(MAGIC)?;
    for v in [seed, config_hash, summaries.len() as u64] {
        w.write_all(&v.to_le_bytes())?;
    }
    for s in summaries {
        for v in [s.close, s.max, s.min] {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|_| Error::Format("truncated".into()))?;
    Ok(u64::from_le_bytes(b))
}

/// Summaries read back from a dump; `argmax` is not stored and reads as 0.
pub fn read_summaries<R: Read>(mut r: R) -> Result<(DumpHeader, Vec<PathSummary>)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| Error::Format("truncated header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format("not a summary dump".into()));
    }
    let header = DumpHeader { seed: read_u64(&mut r)?, config_hash: read_u64(&mut r)?, n_paths: read_u64(&mut r)? };
    let mut out = Vec::with_capacity(header.n_paths.min(1 << 24) as usize);
    for _ in 0..header.n_paths {
        let close = f64::from_bits(read_u64(&mut r)?);
        let max = f64::from_bits(read_u64(&mut r)?);
        let min = f64::from_bits(read_u64(&mut r)?);
        out.push(PathSummary { close, max, min, argmax: 0 });
    }
    Ok((header, out))
}

/// One row per (bin, time): bin, count, flagged, mean statistics, t, mean,
/// variance.
pub fn write_bin_curves<W: Write>(w: W, report: &EnsembleVarianceReport) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["set", "bin", "count", "flagged", "q_close", "q_high", "q_low", "t", "mean", "variance"]).map_err(csv_err)?;
    for (b, bin) in report.bins.iter().enumerate() {
        if bin.count == 0 {
            continue;
        }
        for (k, &t) in report.times.iter().enumerate() {
            wr.write_record([
                report.label.clone(),
                b.to_string(),
                bin.count.to_string(),
                bin.flagged.to_string(),
                sig12(bin.stat_mean[0]),
                sig12(bin.stat_mean[1]),
                sig12(bin.stat_mean[2]),
                sig12(t),
                sig12(bin.mean[k]),
                sig12(bin.variance[k]),
            ])
            .map_err(csv_err)?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// `set, t, ensemble_variance` rows followed by one `set, average, value`
/// row per report.
pub fn write_ensemble<W: Write>(w: W, reports: &[EnsembleVarianceReport]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["set", "t", "ensemble_variance"]).map_err(csv_err)?;
    for r in reports {
        for (t, v) in r.times.iter().zip(&r.ensemble_variance) {
            wr.write_record([r.label.clone(), sig12(*t), sig12(*v)]).map_err(csv_err)?;
        }
        wr.write_record([r.label.clone(), "average".to_string(), sig12(r.time_average)]).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_comparisons<W: Write>(w: W, rows: &[BinComparison]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["bin", "count", "mse_mean", "mse_variance", "error"]).map_err(csv_err)?;
    for c in rows {
        wr.write_record([
            c.bin.to_string(),
            c.count.to_string(),
            sig12(c.mse_mean),
            sig12(c.mse_variance),
            c.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_table2<W: Write>(w: W, rows: &[Table2Row]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["set", "measured", "expected", "tolerance", "pass"]).map_err(csv_err)?;
    for r in rows {
        wr.write_record([r.label.clone(), sig12(r.measured), sig12(r.expected), sig12(r.tolerance), r.pass().to_string()])
            .map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse { line, message: format!("{other:?}") },
    }
}
