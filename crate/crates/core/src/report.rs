//! CSV and text output of scenario reports.
//!
//! Numbers are written in scientific notation with 9 significant digits
//! (`{:.8e}`), the baseline row's level column reads `baseline`, and the
//! converged column reads `true` or `false`.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::leakage::{self, LeakagePower};
use crate::scenario::{ReportRow, ScenarioReport};

pub const CSV_HEADER: &str = "leakage_dBW,noise_K,delta_tb_K,precip_diff_max_mm,precip_diff_rms_mm,t2m_diff_max_C,t2m_diff_rms_C,analysis_cost,converged";

pub const NOISE_TABLE_HEADER: &str = "leakage_dBW,received_W,noise_K,delta_tb_K";

pub fn format_number(x: f64) -> String {
    format!("{x:.8e}")
}

pub fn csv_string(report: &ScenarioReport) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in &report.rows {
        let level = row
            .leakage_dbw
            .map_or_else(|| "baseline".to_string(), format_number);
        let fields = [
            row.noise_k,
            row.delta_tb_k,
            row.precip_diff_max_mm,
            row.precip_diff_rms_mm,
            row.t2m_diff_max_c,
            row.t2m_diff_rms_c,
            row.analysis_cost,
        ]
        .map(format_number);
        let _ = writeln!(out, "{level},{},{}", fields.join(","), row.converged);
    }
    out
}

pub fn emit_csv(report: &ScenarioReport, path: &Path) -> Result<()> {
    std::fs::write(path, csv_string(report))?;
    Ok(())
}

/// Human-readable table of the same rows plus run metadata.
pub fn emit_summary(report: &ScenarioReport, out: &mut dyn Write) -> io::Result<()> {
    writeln!(out, "config hash: {}", report.config_hash)?;
    writeln!(out, "ensemble members: {}", report.ensemble_size)?;
    if !report.defaulted.is_empty() {
        writeln!(out, "defaulted keys: {}", report.defaulted.join(", "))?;
    }
    writeln!(
        out,
        "{:>10} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12} {:>14} {:>12} {:>5}",
        "level dBW",
        "noise K",
        "dTb K",
        "dP max mm",
        "dP rms mm",
        "dT2m max C",
        "dT2m rms C",
        format!("dT@{} rms C", report.verification_lead),
        "cost",
        "conv"
    )?;
    for row in &report.rows {
        let level = row
            .leakage_dbw
            .map_or_else(|| "baseline".to_string(), |l| format!("{l:.1}"));
        writeln!(
            out,
            "{:>10} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.5e} {:>14.5e} {:>12.5e} {:>5}",
            level,
            row.noise_k,
            row.delta_tb_k,
            row.precip_diff_max_mm,
            row.precip_diff_rms_mm,
            row.t2m_diff_max_c,
            row.t2m_diff_rms_c,
            row.lead_t_diff_rms_c,
            row.analysis_cost,
            if row.converged { "yes" } else { "no" }
        )?;
    }
    Ok(())
}

/// A parsed CSV row; `lead_t_diff_rms_c` is not part of the CSV.
pub fn parse_csv(text: &str) -> Result<Vec<ReportRow>> {
    let bad = |line: usize, msg: &str| Error::validation(format!("csv line {line}"), msg);
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(bad(1, "unexpected header"));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 9 {
                return Err(bad(i + 2, "expected 9 columns"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(i + 2, "malformed number"));
            Ok(ReportRow {
                leakage_dbw: if cols[0] == "baseline" {
                    None
                } else {
                    Some(num(cols[0])?)
                },
                noise_k: num(cols[1])?,
                delta_tb_k: num(cols[2])?,
                precip_diff_max_mm: num(cols[3])?,
                precip_diff_rms_mm: num(cols[4])?,
                t2m_diff_max_c: num(cols[5])?,
                t2m_diff_rms_c: num(cols[6])?,
                lead_t_diff_rms_c: f64::NAN,
                analysis_cost: num(cols[7])?,
                converged: cols[8]
                    .parse()
                    .map_err(|_| bad(i + 2, "malformed boolean"))?,
            })
        })
        .collect()
}

/// Induced noise temperature versus leakage level through `link`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseTableRow {
    pub leakage_dbw: f64,
    pub received_w: f64,
    pub noise_k: f64,
    pub delta_tb_k: f64,
}

pub fn noise_table(
    levels: &[f64],
    link: &leakage::LinkBudget,
    channel: &leakage::ChannelSpec,
    antenna: &leakage::AntennaModel,
) -> Result<Vec<NoiseTableRow>> {
    levels
        .iter()
        .map(|&level| {
            let chain = leakage::leakage_chain(LeakagePower::Dbw(level), link, channel, antenna)?;
            Ok(NoiseTableRow {
                leakage_dbw: level,
                received_w: chain.received_watts,
                noise_k: chain.noise.value,
                delta_tb_k: chain.delta_tb,
            })
        })
        .collect()
}

/// -55 dBW to -15 dBW in 5 dB steps.
pub fn noise_table_levels() -> Vec<f64> {
    (0..=8).map(|i| -55.0 + 5.0 * i as f64).collect()
}

pub fn noise_table_csv(rows: &[NoiseTableRow]) -> String {
    let mut out = String::from(NOISE_TABLE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            format_number(r.leakage_dbw),
            format_number(r.received_w),
            format_number(r.noise_k),
            format_number(r.delta_tb_k)
        );
    }
    out
}
