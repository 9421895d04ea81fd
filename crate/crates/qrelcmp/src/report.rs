//! CSV and JSON rendering of comparison results.
//!
//! Metric columns use four decimals unless full precision is requested;
//! rates that are undefined are written as `undefined` in CSV and `null` in
//! JSON.

use std::path::Path;

use qrelcmp_core::discrim::DiscrimReport;
use qrelcmp_core::measures::ScoreMatrix;
use qrelcmp_core::sigtest::SignificanceSet;
use serde::Serialize;

use crate::compare::PairRow;
use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const UNDEFINED: &str = "undefined";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    Fixed,
    Full,
}

impl Precision {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "4" | "fixed" => Some(Precision::Fixed),
            "full" => Some(Precision::Full),
            _ => None,
        }
    }

    /// `decimals` applies only to fixed precision.
    pub fn format(self, v: f64, decimals: usize) -> String {
        match self {
            Precision::Fixed => format!("{v:.decimals$}"),
            Precision::Full => format!("{v}"),
        }
    }

    pub fn format_opt(self, v: Option<f64>, decimals: usize) -> String {
        v.map_or_else(|| UNDEFINED.to_string(), |v| self.format(v, decimals))
    }
}

/// Metric columns shared by report and sweep tables, in output order.
pub const METRIC_COLUMNS: [&str; 18] = [
    "kappa",
    "tau",
    "delta_sens",
    "p1",
    "r1",
    "p2",
    "r2",
    "bac",
    "mcc",
    "fp",
    "fn",
    "tp",
    "tn",
    "s_gt",
    "ns_gt",
    "total_pairs",
    "sens_gt",
    "sens_cand",
];

pub enum Cell {
    Real(Option<f64>),
    Count(u64),
}

pub fn metric_cells(r: &DiscrimReport) -> [Cell; 18] {
    use Cell::{Count, Real};
    [
        Real(Some(r.kappa)),
        Real(r.tau),
        Real(Some(r.delta_sens)),
        Real(r.p1),
        Real(r.r1),
        Real(r.p2),
        Real(r.r2),
        Real(r.bac),
        Real(Some(r.mcc)),
        Count(r.counts.fp),
        Count(r.counts.fn_),
        Count(r.counts.tp),
        Count(r.counts.tn),
        Count(r.s_gt),
        Count(r.ns_gt),
        Count(r.total_pairs),
        Real(Some(r.sens_gt)),
        Real(Some(r.sens_cand)),
    ]
}

pub fn metric_strings(r: &DiscrimReport, precision: Precision) -> Vec<String> {
    metric_cells(r)
        .into_iter()
        .map(|c| match c {
            Cell::Real(v) => precision.format_opt(v, 4),
            Cell::Count(n) => n.to_string(),
        })
        .collect()
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for row in rows {
        w.write_record(&row).expect("writing to memory");
    }
    w.into_inner().expect("writing to memory")
}

fn report_header() -> Vec<&'static str> {
    let mut h = vec!["dataset", "qrels"];
    h.extend(METRIC_COLUMNS);
    h.extend(["mcc_degenerate", "kappa_degenerate"]);
    h
}

fn report_fields(dataset: &str, qrels: &str, r: &DiscrimReport, precision: Precision) -> Vec<String> {
    let mut row = vec![dataset.to_string(), qrels.to_string()];
    row.extend(metric_strings(r, precision));
    row.push(r.mcc_degenerate.to_string());
    row.push(r.kappa_degenerate.to_string());
    row
}

pub fn report_csv(dataset: &str, qrels: &str, r: &DiscrimReport, precision: Precision) -> Vec<u8> {
    csv_bytes(&report_header(), [report_fields(dataset, qrels, r, precision)])
}

#[derive(Serialize)]
struct ReportJson<'a> {
    dataset: &'a str,
    qrels: &'a str,
    #[serde(flatten)]
    report: &'a DiscrimReport,
}

pub fn report_json(dataset: &str, qrels: &str, r: &DiscrimReport) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(&ReportJson {
        dataset,
        qrels,
        report: r,
    })
    .expect("report serializes");
    out.push(b'\n');
    out
}

/// The report row as an aligned two-line table for the terminal.
pub fn report_table(dataset: &str, qrels: &str, r: &DiscrimReport, precision: Precision) -> String {
    let header = report_header();
    let fields = report_fields(dataset, qrels, r, precision);
    let widths: Vec<usize> = header.iter().zip(&fields).map(|(h, f)| h.len().max(f.len())).collect();
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    format!(
        "{}\n{}\n",
        line(header.clone()),
        line(fields.iter().map(String::as_str).collect())
    )
}

pub const PAIRS_COLUMNS: [&str; 11] = [
    "system_a",
    "system_b",
    "mean_a_gt",
    "mean_b_gt",
    "mean_a_cand",
    "mean_b_cand",
    "p_gt",
    "p_cand",
    "sig_gt",
    "sig_cand",
    "class",
];

pub fn pairs_csv(rows: &[PairRow], precision: Precision) -> Vec<u8> {
    csv_bytes(
        &PAIRS_COLUMNS,
        rows.iter().map(|p| {
            vec![
                p.system_a.clone(),
                p.system_b.clone(),
                precision.format(p.mean_a_gt, 6),
                precision.format(p.mean_b_gt, 6),
                precision.format(p.mean_a_cand, 6),
                precision.format(p.mean_b_cand, 6),
                precision.format(p.p_gt, 6),
                precision.format(p.p_cand, 6),
                p.sig_gt.to_string(),
                p.sig_cand.to_string(),
                p.class.as_str().to_string(),
            ]
        }),
    )
}

/// Score matrix with a `system` column followed by one column per topic.
pub fn scores_csv(sm: &ScoreMatrix, precision: Precision) -> Vec<u8> {
    let mut header = vec!["system"];
    header.extend(sm.topics().iter().map(String::as_str));
    csv_bytes(
        &header,
        sm.systems().iter().enumerate().map(|(i, s)| {
            let mut row = vec![s.clone()];
            row.extend(sm.row(i).iter().map(|&v| precision.format(v, 6)));
            row
        }),
    )
}

pub fn pvalues_csv(ss: &SignificanceSet, precision: Precision) -> Vec<u8> {
    csv_bytes(
        &["system_a", "system_b", "p_value", "significant"],
        ss.iter().map(|o| {
            vec![
                o.a.to_string(),
                o.b.to_string(),
                precision.format(o.p_value, 6),
                o.significant.to_string(),
            ]
        }),
    )
}

pub fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, bytes)
}

/// Reads a CSV produced by this tool into its header and string records.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        },
        _ => csv_err(e),
    })?;
    let header = reader.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let rows = reader
        .records()
        .map(|r| r.map(|r| r.iter().map(String::from).collect()).map_err(csv_err))
        .collect::<Result<_>>()?;
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use qrelcmp_core::discrim::ConfusionCounts;

    fn sample_report() -> DiscrimReport {
        DiscrimReport {
            counts: ConfusionCounts::new(443, 303, 36, 929),
            p1: Some(0.924843),
            r1: Some(0.322886),
            p2: None,
            r2: Some(0.89381),
            bac: Some(0.5),
            mcc: 0.25,
            mcc_degenerate: false,
            kappa: 0.5,
            kappa_degenerate: false,
            tau: None,
            sens_gt: 0.8,
            sens_cand: 0.28,
            delta_sens: 0.52,
            s_gt: 1372,
            ns_gt: 339,
            total_pairs: 1711,
        }
    }

    #[test]
    fn fixed_and_full_formatting() {
        assert_eq!(Precision::Fixed.format(0.924843, 4), "0.9248");
        assert_eq!(Precision::Full.format(0.924843, 4), "0.924843");
        assert_eq!(Precision::Fixed.format_opt(None, 4), "undefined");
    }

    #[test]
    fn report_csv_layout() {
        let text = String::from_utf8(report_csv("dl19", "cand", &sample_report(), Precision::Fixed)).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "dataset,qrels,kappa,tau,delta_sens,p1,r1,p2,r2,bac,mcc,fp,fn,tp,tn,s_gt,ns_gt,total_pairs,sens_gt,sens_cand,mcc_degenerate,kappa_degenerate"
        );
        assert_eq!(
            lines.next().unwrap(),
            "dl19,cand,0.5000,undefined,0.5200,0.9248,0.3229,undefined,0.8938,0.5000,0.2500,36,929,443,303,1372,339,1711,0.8000,0.2800,false,false"
        );
    }

    #[test]
    fn json_uses_null_for_undefined() {
        let v: serde_json::Value = serde_json::from_slice(&report_json("d", "q", &sample_report())).unwrap();
        assert!(v["tau"].is_null());
        assert_eq!(v["counts"]["fn_"], 929);
        assert_eq!(v["dataset"], "d");
    }

    #[test]
    fn scores_csv_header() {
        let sm = ScoreMatrix::from_rows(
            vec!["a".into(), "b".into()],
            vec!["t1".into(), "t2".into()],
            &[vec![0.5, 1.0], vec![0.0, 0.25]],
        )
        .unwrap();
        let text = String::from_utf8(scores_csv(&sm, Precision::Fixed)).unwrap();
        assert_eq!(text, "system,t1,t2\na,0.500000,1.000000\nb,0.000000,0.250000\n");
    }
}
