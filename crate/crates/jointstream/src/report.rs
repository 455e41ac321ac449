//! Evaluation report files: `report.csv`, `report.txt` and one
//! `roc_<factor>.csv` per factor.

use std::fmt::Write as _;
use std::path::Path;

use jointstream_core::metrics::{roc_curve, EvalReport, FactorReport};
use jointstream_core::{FACTOR_NAMES, NUM_FACTORS};

use crate::error::{io, Result};

pub const COLUMNS: [&str; 13] = ["factor", "ap", "auc", "acc", "spec", "sen", "ppv", "npv", "f1", "tp", "tn", "fp", "fn"];

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".into(), |x| x.to_string())
}

fn factor_values(f: &FactorReport) -> [Option<f64>; 8] {
    [f.ap, f.auc, f.acc, f.spec, f.sen, f.ppv, f.npv, f.f1]
}

fn macro_values(r: &EvalReport) -> [Option<f64>; 8] {
    [r.map, r.auc, r.acc, r.spec, r.sen, r.ppv, r.npv, r.f1]
}

pub fn to_csv(r: &EvalReport) -> String {
    let mut out = COLUMNS.join(",");
    out.push('\n');
    for (name, f) in FACTOR_NAMES.iter().zip(&r.factors) {
        let c = &f.confusion;
        let values: Vec<String> = factor_values(f).into_iter().map(cell).collect();
        let _ = writeln!(out, "{name},{},{},{},{},{}", values.join(","), c.tp, c.tn, c.fp, c.fn_);
    }
    let values: Vec<String> = macro_values(r).into_iter().map(cell).collect();
    let _ = writeln!(out, "macro,{},,,,", values.join(","));
    out
}

/// Plain-text table: AP and AUC as fractions, the rest in percent.
pub fn to_table(r: &EvalReport) -> String {
    let header = ["Factor", "AP", "AUC", "ACC%", "SPEC%", "SEN%", "PPV%", "NPV%", "F1%"];
    let fmt = |i: usize, v: Option<f64>| match v {
        None => "-".to_string(),
        Some(x) if i < 2 => format!("{x:.4}"),
        Some(x) => format!("{:.2}", 100.0 * x),
    };
    let mut rows = vec![header.map(String::from).to_vec()];
    for (name, f) in FACTOR_NAMES.iter().zip(&r.factors) {
        let mut row = vec![name.to_string()];
        row.extend(factor_values(f).into_iter().enumerate().map(|(i, v)| fmt(i, v)));
        rows.push(row);
    }
    let mut row = vec!["Macro".to_string()];
    row.extend(macro_values(r).into_iter().enumerate().map(|(i, v)| fmt(i, v)));
    rows.push(row);

    let widths: Vec<usize> = (0..header.len()).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in &rows {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (s, &w))| if c == 0 { format!("{s:<w$}") } else { format!("{s:>w$}") })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    let _ = writeln!(out, "threshold {}", r.threshold);
    out
}

/// ROC points per factor as CSV text, `None` where the curve is undefined.
pub fn roc_csvs(probs: &[[f64; NUM_FACTORS]], labels: &[[bool; NUM_FACTORS]]) -> Result<Vec<Option<String>>> {
    let mut out = Vec::with_capacity(NUM_FACTORS);
    for k in 0..NUM_FACTORS {
        let p: Vec<f64> = probs.iter().map(|r| r[k]).collect();
        let y: Vec<bool> = labels.iter().map(|r| r[k]).collect();
        out.push(roc_curve(&p, &y)?.map(|points| {
            let mut s = String::from("fpr,tpr,threshold\n");
            for pt in points {
                let _ = writeln!(s, "{},{},{}", pt.fpr, pt.tpr, pt.threshold);
            }
            s
        }));
    }
    Ok(out)
}

/// Writes all report files into `dir`.
pub fn write_all(dir: &Path, report: &EvalReport, probs: &[[f64; NUM_FACTORS]], labels: &[[bool; NUM_FACTORS]]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let write = |name: &str, text: &str| {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(io(&p))
    };
    write("report.csv", &to_csv(report))?;
    write("report.txt", &to_table(report))?;
    for (name, csv) in FACTOR_NAMES.iter().zip(roc_csvs(probs, labels)?) {
        let file = format!("roc_{}.csv", name.to_lowercase());
        match csv {
            Some(text) => write(&file, &text)?,
            None => {
                let p = dir.join(&file);
                if p.exists() {
                    std::fs::remove_file(&p).map_err(io(&p))?;
                }
            }
        }
    }
    Ok(())
}
