//! CSV writers. Every file starts with a `#` comment line naming the schema
//! version, followed by a header row.

use std::io::Write;

use super::{RunMetrics, SweepRow};
use crate::error::Result;

pub const CSV_VERSION: &str = "mcflow-csv v1";

fn comment(out: &mut impl Write, kind: &str) -> Result<()> {
    writeln!(out, "# {CSV_VERSION} {kind}")?;
    Ok(())
}

/// Thinned time series of one run.
pub fn write_series_csv(out: impl Write, metrics: &RunMetrics) -> Result<()> {
    let mut out = out;
    comment(&mut out, "series")?;
    let mut w = csv::Writer::from_writer(out);
    for p in &metrics.series {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per `(value, replication, policy)`.
pub fn write_sweep_csv(out: impl Write, rows: &[SweepRow]) -> Result<()> {
    let mut out = out;
    comment(&mut out, "sweep")?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
