use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::Result;
use crate::metrics::format_percent;
use crate::pipelines::Method;

use super::RunRecord;

pub const CSV_HEADER: [&str; 6] = ["T", "L", "method", "mean_r", "std_r", "quotient"];

fn or_na(v: Option<String>) -> String {
    v.unwrap_or_else(|| "NA".into())
}

/// One row per record, in the given order. Amari values are percentages with
/// two decimals; missing values are `NA`.
pub fn csv_report(records: &[RunRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.t.to_string(),
            r.l.to_string(),
            r.method.as_str().to_string(),
            or_na(r.mean.map(format_percent)),
            or_na(r.std_dev.map(format_percent)),
            or_na(r.quotient.map(|q| format!("{q:.3}"))),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| crate::error::Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// gnuplot data: one indexed block per (method, L) with columns
/// `T mean_r std_r` as fractions at full precision. Cells without a mean are
/// skipped.
pub fn loglog_data(records: &[RunRecord]) -> String {
    let mut blocks: BTreeMap<(Method, usize), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        blocks.entry((r.method, r.l)).or_default().push(r);
    }
    let mut out = String::new();
    for (i, ((method, l), mut rows)) in blocks.into_iter().enumerate() {
        rows.sort_by_key(|r| r.t);
        if i > 0 {
            out.push_str("\n\n");
        }
        let _ = writeln!(out, "# method={method} L={l}");
        out.push_str("# T mean_r std_r\n");
        for r in rows {
            if let (Some(m), Some(s)) = (r.mean, r.std_dev) {
                let _ = writeln!(out, "{} {m:e} {s:e}", r.t);
            }
        }
    }
    out
}
