//! Text renderings of run reports and sweep tables.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiment::RunReport;
use crate::sweep::SweepRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Table,
    Csv,
    JsonLines,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(Self::Table),
            "csv" => Ok(Self::Csv),
            "jsonl" | "json-lines" => Ok(Self::JsonLines),
            other => Err(Error::Validation(format!("unknown format `{other}` (table, csv, jsonl)"))),
        }
    }
}

/// Flat row shared by the csv and jsonl renderings of a run.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct RunRow {
    pub architecture: String,
    pub epochs: u64,
    pub mec_bits: u64,
    pub demand_bits: u64,
    pub accuracy: f64,
    pub acc_positive: f64,
    pub acc_negative: f64,
    pub generalization: f64,
    pub balance: f64,
    pub bias_flagged: bool,
    pub correct_count: u64,
    pub test_total: u64,
    pub train_loss: f64,
    pub test_loss: f64,
}

impl From<&RunReport> for RunRow {
    fn from(r: &RunReport) -> Self {
        let m = &r.measurements;
        Self {
            architecture: r.architecture.clone(),
            epochs: r.epochs,
            mec_bits: m.mec_bits,
            demand_bits: m.demand_bits,
            accuracy: r.test.accuracy,
            acc_positive: r.test.acc_positive,
            acc_negative: r.test.acc_negative,
            generalization: m.generalization,
            balance: m.balance,
            bias_flagged: m.bias_flagged,
            correct_count: r.test.correct_count,
            test_total: r.test.total,
            train_loss: r.train_loss,
            test_loss: r.test.mean_loss,
        }
    }
}

fn csv_of<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::CsvFormat(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::CsvFormat(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
}

fn jsonl_of<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn render_run(report: &RunReport, format: Format) -> Result<String> {
    let row = RunRow::from(report);
    match format {
        Format::Csv => csv_of(&[row]),
        Format::JsonLines => jsonl_of(&[row]),
        Format::Table => {
            let m = &report.measurements;
            let mut s = String::new();
            let _ = writeln!(s, "architecture         {}", row.architecture);
            let _ = writeln!(s, "epochs               {}", row.epochs);
            let _ = writeln!(s, "MEC                  {} bits  (per layer {:?})", m.mec_bits, m.mec_per_layer);
            let est = if m.demand_estimated { " (estimated on a subsample)" } else { "" };
            let _ = writeln!(s, "capacity demand      {} bits{est}", m.demand_bits);
            let _ = writeln!(
                s,
                "accuracy             {:.4}  ({} / {})",
                row.accuracy, row.correct_count, row.test_total
            );
            let _ = writeln!(s, "accuracy (+1)        {:.4}", row.acc_positive);
            let _ = writeln!(s, "accuracy (-1)        {:.4}", row.acc_negative);
            let verdict = if m.generalization > 1.0 { "generalizes" } else { "no generalization" };
            let _ = writeln!(s, "generalization G     {:.2}  ({verdict})", m.generalization);
            let _ = writeln!(s, "class balance        {:.3}", m.balance);
            let _ = writeln!(s, "bias flagged         {}", m.bias_flagged);
            let _ = writeln!(s, "loss train / test    {:.5} / {:.5}", row.train_loss, row.test_loss);
            Ok(s)
        }
    }
}

pub fn render_sweep(rows: &[SweepRow], format: Format) -> Result<String> {
    #[derive(Serialize)]
    struct Flat<'a> {
        rank: usize,
        architecture: &'a str,
        mec_bits: u64,
        demand_bits: u64,
        accuracy: f64,
        generalization: f64,
    }
    let flat: Vec<Flat> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| Flat {
            rank: i + 1,
            architecture: &r.architecture,
            mec_bits: r.mec_bits,
            demand_bits: r.demand_bits,
            accuracy: r.accuracy,
            generalization: r.generalization,
        })
        .collect();
    match format {
        Format::Csv => csv_of(&flat),
        Format::JsonLines => jsonl_of(&flat),
        Format::Table => {
            let width = rows.iter().map(|r| r.architecture.len()).max().unwrap_or(0).max(12);
            let mut s = format!(
                "{:>4}  {:<width$}  {:>8}  {:>8}  {:>8}  {:>8}\n",
                "rank", "architecture", "MEC", "demand", "accuracy", "G"
            );
            for f in &flat {
                let _ = writeln!(
                    s,
                    "{:>4}  {:<width$}  {:>8}  {:>8}  {:>8.4}  {:>8.2}",
                    f.rank, f.architecture, f.mec_bits, f.demand_bits, f.accuracy, f.generalization
                );
            }
            Ok(s)
        }
    }
}
