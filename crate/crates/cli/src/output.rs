//! Report rendering. Text output rounds to three decimals; JSON and CSV
//! carry full precision.

use std::fmt::Write as _;

use anyhow::{bail, Result};
use serde::Serialize;

use schedcert_core::bounds::{Branch, SequenceRow};
use schedcert_core::truthfulness::AuditOutcome;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Serialize)]
pub struct BoundRow {
    pub n: usize,
    pub a_n1: f64,
    pub a_n2: f64,
    pub branch: Branch,
    pub r: f64,
    pub rho: f64,
    pub rho_limit: f64,
}

impl BoundRow {
    pub fn from_sequence(row: &SequenceRow, rho_limit: f64) -> Self {
        BoundRow {
            n: row.n,
            a_n1: row.a_n1,
            a_n2: row.a_n2,
            branch: row.branch,
            r: row.r,
            rho: row.rho,
            rho_limit,
        }
    }
}

fn branch_name(branch: Branch) -> &'static str {
    match branch {
        Branch::An1 => "an1",
        Branch::An2 => "an2",
    }
}

pub fn render_bound_rows(rows: &[BoundRow], format: Format) -> Result<String> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(rows)?),
        Format::Csv => {
            let mut out = String::from("n,a_n1,a_n2,branch,r,rho,rho_limit\n");
            for row in rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    row.n,
                    row.a_n1,
                    row.a_n2,
                    branch_name(row.branch),
                    row.r,
                    row.rho,
                    row.rho_limit
                )?;
            }
            Ok(out)
        }
        Format::Text => {
            let mut out = String::from("  n    a_n1    a_n2  branch      r    rho\n");
            for row in rows {
                writeln!(
                    out,
                    "{:>3}  {:>6.3}  {:>6.3}  {:>6}  {:>5.3}  {:>5.3}",
                    row.n,
                    row.a_n1,
                    row.a_n2,
                    branch_name(row.branch),
                    row.r,
                    row.rho
                )?;
            }
            writeln!(out, "limit rho = {:.3}", rows[0].rho_limit)?;
            Ok(out)
        }
    }
}

#[derive(Serialize)]
pub struct LimitReport {
    pub rho_limit: f64,
    pub residual: f64,
}

pub fn render_limit(report: &LimitReport, format: Format) -> Result<String> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(report)?),
        Format::Csv => Ok(format!("rho_limit,residual\n{},{}\n", report.rho_limit, report.residual)),
        Format::Text => Ok(format!("rho_limit = {:.3}\n", report.rho_limit)),
    }
}

#[derive(Serialize)]
pub struct AuditReport {
    pub mechanism: String,
    pub generator: String,
    pub seed: u64,
    pub tol: f64,
    pub outcome: AuditOutcome,
}

pub fn render_audit(report: &AuditReport, format: Format) -> Result<String> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(report)?),
        Format::Csv => bail!("audit reports support text and json output"),
        Format::Text => {
            let mut out = String::new();
            writeln!(
                out,
                "mechanism={} generator={} pairs={} witnesses={} inconclusive={} failures={}",
                report.mechanism,
                report.generator,
                report.outcome.pairs_tested,
                report.outcome.witnesses.len(),
                report.outcome.inconclusive,
                report.outcome.failures.len()
            )?;
            if let Some(worst) = report.outcome.worst_value() {
                writeln!(out, "worst witness value = {worst:.6e}")?;
            }
            for (k, record) in report.outcome.witnesses.iter().enumerate() {
                writeln!(
                    out,
                    "witness #{k}: {} machine={} value={:.6e}",
                    record.label, record.witness.machine, record.witness.value
                )?;
            }
            for failure in &report.outcome.failures {
                writeln!(
                    out,
                    "failure at pair {} ({}): {}",
                    failure.pair_index, failure.label, failure.error
                )?;
            }
            Ok(out)
        }
    }
}
