//! CSV and JSON writers. Every file starts from the resolved run config so it
//! can be reproduced on its own: CSV files carry it as a `# config:` comment
//! line, JSON files wrap the payload as `{"config": …, "result": …}`.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::resolvent::ScanRow;
use crate::walk::{MomentPoint, ProbabilityProfile, TimeAveragedProfile};

/// Floats are written with 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn header<W: Write, C: Serialize>(out: &mut W, config: &C, columns: &[&str]) -> Result<()> {
    let json = serde_json::to_string(config).map_err(|e| Error::invalid(format!("config not serializable: {e}")))?;
    writeln!(out, "# config: {json}")?;
    writeln!(out, "{}", columns.join(","))?;
    Ok(())
}

/// Long-form `l,n,a_plus,a_minus,a_total`, one row per time and site.
pub fn write_profiles_csv<W: Write, C: Serialize>(
    out: &mut W,
    config: &C,
    profiles: &[ProbabilityProfile],
) -> Result<()> {
    header(out, config, &["l", "n", "a_plus", "a_minus", "a_total"])?;
    for p in profiles {
        for (n, a, b, t) in p.rows() {
            writeln!(out, "{},{n},{},{},{}", p.time, fmt_float(a), fmt_float(b), fmt_float(t))?;
        }
    }
    Ok(())
}

/// `n,a_plus,a_minus,a_total` for a single profile.
pub fn write_profile_csv<W: Write, C: Serialize>(out: &mut W, config: &C, profile: &ProbabilityProfile) -> Result<()> {
    header(out, config, &["n", "a_plus", "a_minus", "a_total"])?;
    for (n, a, b, t) in profile.rows() {
        writeln!(out, "{n},{},{},{}", fmt_float(a), fmt_float(b), fmt_float(t))?;
    }
    Ok(())
}

/// Long-form `L,n,a_plus,a_minus,a_total` over several time scales.
pub fn write_averaged_csv<W: Write, C: Serialize>(
    out: &mut W,
    config: &C,
    profiles: &[TimeAveragedProfile],
) -> Result<()> {
    header(out, config, &["L", "n", "a_plus", "a_minus", "a_total"])?;
    for p in profiles {
        for (n, a, b, t) in p.rows() {
            writeln!(out, "{},{n},{},{},{}", fmt_float(p.scale), fmt_float(a), fmt_float(b), fmt_float(t))?;
        }
    }
    Ok(())
}

pub fn write_moments_csv<W: Write, C: Serialize>(out: &mut W, config: &C, points: &[MomentPoint]) -> Result<()> {
    header(out, config, &["L", "p", "moment", "log_moment"])?;
    for m in points {
        writeln!(out, "{},{},{},{}", fmt_float(m.scale), fmt_float(m.p), fmt_float(m.moment), fmt_float(m.log_moment))?;
    }
    Ok(())
}

pub fn write_scan_csv<W: Write, C: Serialize>(out: &mut W, config: &C, rows: &[ScanRow]) -> Result<()> {
    header(out, config, &["tau", "n", "resolvent_sq"])?;
    for r in rows {
        writeln!(out, "{},{},{}", fmt_float(r.tau), r.n, fmt_float(r.resolvent_sq))?;
    }
    Ok(())
}

/// Generic table with preformatted cells; use [`fmt_float`] for floats.
pub fn write_table<W: Write, C: Serialize>(
    out: &mut W,
    config: &C,
    columns: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    header(out, config, columns)?;
    for row in rows {
        if row.len() != columns.len() {
            return Err(Error::invalid(format!("row has {} cells, expected {}", row.len(), columns.len())));
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Envelope<'a, C: Serialize, T: Serialize> {
    config: &'a C,
    result: &'a T,
}

pub fn write_json<W: Write, C: Serialize, T: Serialize>(out: &mut W, config: &C, result: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, &Envelope { config, result })
        .map_err(|e| Error::invalid(format!("result not serializable: {e}")))?;
    writeln!(out)?;
    Ok(())
}

/// Splits a CSV written here into its config line and data lines.
pub fn read_provenance(text: &str) -> Option<(serde_json::Value, Vec<&str>)> {
    let mut lines = text.lines();
    let config = lines.next()?.strip_prefix("# config: ")?;
    let value = serde_json::from_str(config).ok()?;
    Some((value, lines.collect()))
}
