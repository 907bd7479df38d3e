use std::io::Write;

use super::bins::{BinMax, BinStats};
use super::extremes::ExtremeRecord;
use crate::error::Result;

/// Writes records as `rank,sigma1,sigma2,xi_total,xi1,xi2,u_inv,w`.
pub fn write_records_csv<W: Write>(out: W, records: &[ExtremeRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv<R: std::io::Read>(input: R) -> Result<Vec<ExtremeRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

/// Writes bins as `j,lower,upper,count,expected_count,bin_max,argmax`, with
/// `empty` in both trailing columns for empty bins.
pub fn write_bins_csv<W: Write>(out: W, bins: &[BinStats]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "j",
        "lower",
        "upper",
        "count",
        "expected_count",
        "bin_max",
        "argmax",
    ])?;
    for b in bins {
        let (max, arg) = match b.bin_max {
            BinMax::Empty => ("empty".to_string(), "empty".to_string()),
            BinMax::Value { value, sigma } => (value.to_string(), sigma.to_string()),
        };
        w.write_record([
            b.j.to_string(),
            b.lower.to_string(),
            b.upper.to_string(),
            b.count.to_string(),
            b.expected_count.to_string(),
            max,
            arg,
        ])?;
    }
    w.flush()?;
    Ok(())
}
