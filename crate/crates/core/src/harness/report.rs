use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use super::EvalReport;
use crate::error::Result;

#[derive(Serialize)]
struct CsvRow<'a> {
    agent: &'a str,
    test_regime: &'a str,
    n_episodes: usize,
    mean_wealth: f64,
    std_wealth: f64,
    sharpe: f64,
    mean_inv: f64,
    std_inv: f64,
    mean_spread: f64,
    std_spread: f64,
    mean_reward: f64,
    std_reward: f64,
    variance_ratio: Option<f64>,
}

/// One labelled report, as it appears in a table or CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportLine {
    pub agent: String,
    pub test_regime: String,
    pub report: EvalReport,
    pub variance_ratio: Option<f64>,
}

pub fn write_reports_csv<W: Write>(lines: &[ReportLine], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for l in lines {
        let r = &l.report;
        w.serialize(CsvRow {
            agent: &l.agent,
            test_regime: &l.test_regime,
            n_episodes: r.n_episodes,
            mean_wealth: r.mean_wealth,
            std_wealth: r.std_wealth,
            sharpe: r.sharpe,
            mean_inv: r.mean_inv,
            std_inv: r.std_inv,
            mean_spread: r.mean_spread,
            std_spread: r.std_spread,
            mean_reward: r.mean_reward,
            std_reward: r.std_reward,
            variance_ratio: l.variance_ratio,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Aligned plain-text table of terminal wealth, Sharpe ratio, terminal
/// inventory, average spread and variance ratio.
pub fn format_table(lines: &[ReportLine]) -> String {
    let header = ["agent", "test", "term. wealth", "sharpe", "term. inventory", "avg. spread", "var. ratio"];
    let body: Vec<[String; 7]> = lines
        .iter()
        .map(|l| {
            let r = &l.report;
            [
                l.agent.clone(),
                l.test_regime.clone(),
                format!("{:.1} ± {:.1}", r.mean_wealth, r.std_wealth),
                format!("{:.2}", r.sharpe),
                format!("{:.2} ± {:.2}", r.mean_inv, r.std_inv),
                format!("{:.2} ± {:.2}", r.mean_spread, r.std_spread),
                l.variance_ratio.map_or("-".into(), |v| format!("{v:.3}")),
            ]
        })
        .collect();
    let mut widths = header.map(|h| h.chars().count());
    for row in &body {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[String]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(i, (c, w))| {
                let pad = w - c.chars().count();
                if i < 2 {
                    format!("{c}{}", " ".repeat(pad))
                } else {
                    format!("{}{c}", " ".repeat(pad))
                }
            })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&header.map(String::from));
    line(&widths.map(|w| "-".repeat(w)));
    for row in &body {
        line(row);
    }
    out
}
