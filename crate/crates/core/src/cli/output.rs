//! CSV and JSON emitters. Floats are written with 17 significant digits.

use crate::asymptotics::{fit_power_law, fit_power_law_ln, FitReport, ProfileRow, SeriesPoint};
use crate::kernels::ClusterEntry;
use crate::error::{LabError, Result};
use std::path::Path;

pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Vec<u8> {
    w.into_inner().expect("in-memory csv writer")
}

pub const CERTIFICATE_COLUMNS: [&str; 8] =
    ["radius", "tail_bound", "ln_tail_bound", "rounding_bound", "ln_rounding_bound", "terms", "met", "resolved"];

fn value_fields(p: &SeriesPoint) -> Vec<String> {
    let v = p.value();
    let c = &p.result.cert;
    vec![
        fmt_f64(v.re),
        fmt_f64(v.im),
        fmt_f64(v.norm()),
        fmt_f64(p.ln_abs()),
        fmt_f64(c.radius),
        fmt_f64(c.tail_bound),
        fmt_f64(c.ln_tail_bound),
        fmt_f64(c.rounding_bound),
        fmt_f64(c.ln_rounding_bound),
        c.terms.to_string(),
        c.met.to_string(),
        p.result.resolved().to_string(),
    ]
}

fn value_header() -> Vec<String> {
    let mut h: Vec<String> = ["re", "im", "abs", "ln_abs"].iter().map(|s| s.to_string()).collect();
    h.extend(CERTIFICATE_COLUMNS.iter().map(|s| s.to_string()));
    h
}

/// `lambda, re, im, abs, ln_abs, <certificate>` plus an optional flag column.
pub fn series_csv(series: &[SeriesPoint], flag: Option<(&str, &[bool])>) -> Vec<u8> {
    let mut w = writer();
    let mut header = vec!["lambda".to_string()];
    header.extend(value_header());
    if let Some((name, _)) = flag {
        header.push(name.to_string());
    }
    w.write_record(&header).expect("csv header");
    for (j, p) in series.iter().enumerate() {
        let mut row = vec![fmt_f64(p.lambda)];
        row.extend(value_fields(p));
        if let Some((_, flags)) = flag {
            row.push(flags[j].to_string());
        }
        w.write_record(&row).expect("csv row");
    }
    finish(w)
}

/// `lambda, point, s_1..s_d, re, im, abs, ln_abs, <certificate>`.
pub fn project_csv(rows: &[(usize, &[f64], &SeriesPoint)], d: usize) -> Vec<u8> {
    let mut w = writer();
    let mut header = vec!["lambda".to_string(), "point".to_string()];
    header.extend((1..=d).map(|i| format!("s_{i}")));
    header.extend(value_header());
    w.write_record(&header).expect("csv header");
    for (idx, s, p) in rows {
        let mut row = vec![fmt_f64(p.lambda), idx.to_string()];
        row.extend(s.iter().map(|x| fmt_f64(*x)));
        row.extend(value_fields(p));
        w.write_record(&row).expect("csv row");
    }
    finish(w)
}

/// `level, k_1..k_n, lambda_1..lambda_r, weight`.
pub fn spectrum_csv(entries: &[ClusterEntry], n: usize, r: usize) -> Vec<u8> {
    let mut w = writer();
    let mut header = vec!["level".to_string()];
    header.extend((1..=n).map(|i| format!("k_{i}")));
    header.extend((1..=r).map(|i| format!("lambda_{i}")));
    header.push("weight".to_string());
    w.write_record(&header).expect("csv header");
    for e in entries {
        let mut row = vec![e.point.level.to_string()];
        row.extend(e.point.offsets.iter().map(|k| k.to_string()));
        row.extend(e.point.eigenvalue.iter().map(|x| fmt_f64(*x)));
        row.push(fmt_f64(e.weight));
        w.write_record(&row).expect("csv row");
    }
    finish(w)
}

pub fn pairs_csv(columns: [&str; 2], rows: &[(f64, f64)]) -> Vec<u8> {
    let mut w = writer();
    w.write_record(columns).expect("csv header");
    for (a, b) in rows {
        w.write_record([fmt_f64(*a), fmt_f64(*b)]).expect("csv row");
    }
    finish(w)
}

pub fn profile_csv(rows: &[ProfileRow]) -> Vec<u8> {
    let mut w = writer();
    w.write_record(["h", "measured", "predicted", "rel_error"]).expect("csv header");
    for r in rows {
        w.write_record([fmt_f64(r.h), fmt_f64(r.measured), fmt_f64(r.predicted), fmt_f64(r.rel_error)])
            .expect("csv row");
    }
    finish(w)
}

/// Fits a CSV with a `lambda` column. The value column defaults to `ln_abs`,
/// then `abs`, then `value`; log-domain columns are recognized by the `ln_` prefix.
pub fn fit_csv(path: &Path, column: Option<&str>) -> Result<FitReport> {
    let io = |e: csv::Error| LabError::InvalidArgument(format!("{}: {e}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(io)?;
    let headers = reader.headers().map_err(io)?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let lambda_col =
        find("lambda").ok_or_else(|| LabError::InvalidArgument(format!("{}: no lambda column", path.display())))?;
    let name = match column {
        Some(c) => c.to_string(),
        None => ["ln_abs", "abs", "value"]
            .iter()
            .find(|c| find(c).is_some())
            .map(|c| c.to_string())
            .ok_or_else(|| LabError::InvalidArgument(format!("{}: no value column", path.display())))?,
    };
    let value_col =
        find(&name).ok_or_else(|| LabError::InvalidArgument(format!("{}: no column {name}", path.display())))?;
    let mut samples = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(io)?;
        let parse = |i: usize| -> Result<f64> {
            rec[i].trim().parse::<f64>().map_err(|e| LabError::InvalidArgument(format!("{:?}: {e}", &rec[i])))
        };
        samples.push((parse(lambda_col)?, parse(value_col)?));
    }
    if name.starts_with("ln_") {
        fit_power_law_ln(&samples)
    } else {
        fit_power_law(&samples)
    }
}
