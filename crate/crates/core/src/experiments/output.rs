//! CSV emitters. Floats use Rust's shortest round-trip formatting, so equal
//! values always produce equal bytes.

use std::io::Write;

use super::{ExperimentSummary, IndependenceRow, LlnRow, NormalityReport};
use crate::error::{Error, Result};

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::numerical("csv output", e.to_string())
}

fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

/// `estimator,mean,median,std,count,degenerate`, one row per estimate.
pub fn write_table_csv<W: Write>(summary: &ExperimentSummary, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["estimator", "mean", "median", "std", "count", "degenerate"])
        .map_err(io_err)?;
    for r in &summary.rows {
        w.write_record([
            r.label.to_string(),
            num(r.mean),
            num(r.median),
            num(r.std),
            r.count.to_string(),
            r.degenerate_count.to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// `row,lower,upper,b,beta`: summary statistics per component, then the
/// histogram with bin bounds and counts.
pub fn write_normality_csv<W: Write>(report: &NormalityReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["row", "lower", "upper", "b", "beta"]).map_err(io_err)?;
    let [cb, cbeta] = report.components;
    let stat_rows = [
        ("mean", cb.mean, cbeta.mean),
        ("std", cb.std, cbeta.std),
        ("skewness", cb.skewness, cbeta.skewness),
        ("excess_kurtosis", cb.excess_kurtosis, cbeta.excess_kurtosis),
        ("ks", cb.ks, cbeta.ks),
    ];
    for (name, a, b) in stat_rows {
        w.write_record([name.to_string(), String::new(), String::new(), num(a), num(b)])
            .map_err(io_err)?;
    }
    let width = if report.bin_edges.len() > 1 {
        report.bin_edges[1] - report.bin_edges[0]
    } else {
        0.0
    };
    for (lo, c) in report.bin_edges.iter().zip(&report.counts) {
        w.write_record([
            "bin".to_string(),
            num(*lo),
            num(lo + width),
            c[0].to_string(),
            c[1].to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// `lag,gap_mc,gap_riccati,se_mc,joint_mc,product_mc,joint_riccati,product_riccati`.
pub fn write_independence_csv<W: Write>(rows: &[IndependenceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "lag",
        "gap_mc",
        "gap_riccati",
        "se_mc",
        "joint_mc",
        "product_mc",
        "joint_riccati",
        "product_riccati",
    ])
    .map_err(io_err)?;
    for r in rows {
        w.write_record(
            [
                r.lag,
                r.gap_mc,
                r.gap_riccati,
                r.se_mc,
                r.joint_mc,
                r.product_mc,
                r.joint_riccati,
                r.product_riccati,
            ]
            .map(num),
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// `T,average,target,zero_count`.
pub fn write_lln_csv<W: Write>(rows: &[LlnRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["T", "average", "target", "zero_count"])
        .map_err(io_err)?;
    for r in rows {
        w.write_record([num(r.horizon), num(r.average), num(r.target), r.zero_count.to_string()])
            .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}
